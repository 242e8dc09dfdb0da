//! Tabular data: the column store, causal role assignment, CSV ingestion and
//! design-matrix construction from feature formulas.

mod csv_io;
mod dataset;
mod design;
mod formula;
mod roles;

pub use csv_io::{load_csv, load_csv_reader, write_csv, write_csv_writer, ColumnReport, LoadReport, MissingPolicy};
pub use dataset::{Column, ColumnData, ColumnType, Dataset};
pub use design::DesignMatrix;
pub use formula::{build_design, transforms, FeatureFormula, Term, Transform};
pub use roles::{GroupRole, Role, RoleMap};
