use serde::{Deserialize, Serialize};

use super::dataset::{ColumnType, Dataset};
use crate::error::{Error, Result};

/// Causal role of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Group,
    Baseline,
    PreConfounder,
    SystemFactor,
    IntermediateConfounder,
    IndividualFactor,
    Outcome,
    Cluster,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRole {
    pub column: String,
    /// Label of the reference group.
    pub reference: String,
    /// Comparison group labels in reporting order. Empty means every
    /// non-reference level found in the data.
    #[serde(default)]
    pub comparisons: Vec<String>,
}

/// Assignment of dataset columns to causal roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleMap {
    pub group: GroupRole,
    #[serde(default)]
    pub baseline: Vec<String>,
    #[serde(default)]
    pub pre_confounders: Vec<String>,
    pub system_factor: String,
    #[serde(default)]
    pub intermediate_confounders: Vec<String>,
    pub individual_factor: String,
    pub outcome: String,
    #[serde(default)]
    pub allowable_a: Vec<String>,
    #[serde(default)]
    pub allowable_m: Vec<String>,
    #[serde(default)]
    pub cluster: Option<String>,
}

impl RoleMap {
    pub fn role_of(&self, column: &str) -> Role {
        if column == self.group.column {
            Role::Group
        } else if self.baseline.iter().any(|c| c == column) {
            Role::Baseline
        } else if self.pre_confounders.iter().any(|c| c == column) {
            Role::PreConfounder
        } else if column == self.system_factor {
            Role::SystemFactor
        } else if self.intermediate_confounders.iter().any(|c| c == column) {
            Role::IntermediateConfounder
        } else if column == self.individual_factor {
            Role::IndividualFactor
        } else if column == self.outcome {
            Role::Outcome
        } else if self.cluster.as_deref() == Some(column) {
            Role::Cluster
        } else {
            Role::Unassigned
        }
    }

    /// Every column named by a role, group first.
    pub fn role_columns(&self) -> Vec<&str> {
        let mut out = vec![self.group.column.as_str()];
        out.extend(self.baseline.iter().map(String::as_str));
        out.extend(self.pre_confounders.iter().map(String::as_str));
        out.push(&self.system_factor);
        out.extend(self.intermediate_confounders.iter().map(String::as_str));
        out.push(&self.individual_factor);
        out.push(&self.outcome);
        if let Some(c) = &self.cluster {
            out.push(c);
        }
        out
    }

    /// Structural checks that do not need data: disjoint roles and
    /// allowable sets nested in the baseline set.
    pub fn validate_structure(&self) -> Result<()> {
        let cols = self.role_columns();
        for (i, a) in cols.iter().enumerate() {
            if cols[i + 1..].contains(a) {
                return Err(Error::Schema(format!("column `{a}` is assigned to more than one role")));
            }
        }
        for (set, name) in [(&self.allowable_a, "allowable_a"), (&self.allowable_m, "allowable_m")] {
            if let Some(c) = set.iter().find(|c| !self.baseline.contains(c)) {
                return Err(Error::Schema(format!("{name} column `{c}` is not a baseline covariate")));
            }
        }
        if self.group.comparisons.contains(&self.group.reference) {
            return Err(Error::Schema("reference level listed among comparison levels".into()));
        }
        Ok(())
    }

    /// Full validation against a dataset.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        self.validate_structure()?;
        for c in self.role_columns() {
            if !ds.has_column(c) {
                return Err(Error::Schema(format!("role column `{c}` not found in dataset")));
            }
        }
        for f in [&self.system_factor, &self.individual_factor] {
            if ds.column(f)?.kind() != ColumnType::Binary {
                return Err(Error::domain(f.as_str(), "target factor must be binary {0,1}"));
            }
        }
        if ds.column(&self.outcome)?.numeric().is_none() {
            return Err(Error::domain(self.outcome.as_str(), "outcome must be numeric"));
        }
        let g = ds.column(&self.group.column)?;
        let levels = g
            .levels()
            .ok_or_else(|| Error::domain(self.group.column.as_str(), "group column must be categorical"))?;
        if levels.first() != Some(&self.group.reference) {
            return Err(Error::domain(
                self.group.column.as_str(),
                format!("reference level `{}` must be the first level", self.group.reference),
            ));
        }
        if levels.len() < 2 {
            return Err(Error::domain(self.group.column.as_str(), "group needs at least two levels"));
        }
        for l in &self.group.comparisons {
            if !levels.contains(l) {
                return Err(Error::domain(self.group.column.as_str(), format!("comparison level `{l}` not present")));
            }
        }
        Ok(())
    }

    /// Comparison levels as (label, code) in reporting order.
    pub fn comparison_levels(&self, ds: &Dataset) -> Result<Vec<(String, u32)>> {
        let levels = ds
            .column(&self.group.column)?
            .levels()
            .ok_or_else(|| Error::domain(self.group.column.as_str(), "group column must be categorical"))?;
        let labels: Vec<String> = if self.group.comparisons.is_empty() {
            levels.iter().filter(|l| **l != self.group.reference).cloned().collect()
        } else {
            self.group.comparisons.clone()
        };
        labels
            .into_iter()
            .map(|l| {
                let code = levels
                    .iter()
                    .position(|x| *x == l)
                    .ok_or_else(|| Error::domain(self.group.column.as_str(), format!("level `{l}` not present")))?;
                Ok((l, code as u32))
            })
            .collect()
    }

    /// Levels that must lead the group column's level list: the reference
    /// first, then declared comparisons.
    pub fn leading_group_levels(&self) -> Vec<String> {
        let mut v = vec![self.group.reference.clone()];
        v.extend(self.group.comparisons.iter().cloned());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> RoleMap {
        RoleMap {
            group: GroupRole {
                column: "R".into(),
                reference: "0".into(),
                comparisons: vec![],
            },
            baseline: vec!["C".into()],
            pre_confounders: vec!["X".into()],
            system_factor: "A".into(),
            intermediate_confounders: vec!["Z".into()],
            individual_factor: "M".into(),
            outcome: "Y".into(),
            allowable_a: vec![],
            allowable_m: vec!["C".into()],
            cluster: None,
        }
    }

    #[test]
    fn overlapping_roles_rejected() {
        let mut r = roles();
        r.pre_confounders.push("C".into());
        assert!(r.validate_structure().is_err());
    }

    #[test]
    fn allowables_must_be_baseline() {
        let mut r = roles();
        r.allowable_a = vec!["X".into()];
        let e = r.validate_structure().unwrap_err().to_string();
        assert!(e.contains("allowable_a"), "{e}");
    }

    #[test]
    fn role_lookup() {
        let r = roles();
        assert_eq!(r.role_of("Z"), Role::IntermediateConfounder);
        assert_eq!(r.role_of("nope"), Role::Unassigned);
    }
}
