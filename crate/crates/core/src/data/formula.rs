use std::fmt;

use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset};
use super::design::DesignMatrix;
use crate::error::{Error, Result};

/// Scalar maps available as formula transforms.
pub mod transforms {
    /// exp(x1) / 2
    pub fn misspec_exp_half(x1: f64) -> f64 {
        x1.exp() / 2.0
    }

    /// x2 / (1 + exp(x1)) + 10
    pub fn misspec_ratio(x1: f64, x2: f64) -> f64 {
        x2 / (1.0 + x1.exp()) + 10.0
    }

    /// (x1·x3/25 + 0.6)^3
    pub fn misspec_cubic(x1: f64, x3: f64) -> f64 {
        (x1 * x3 / 25.0 + 0.6).powi(3)
    }
}

/// Named unary or binary column maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Exp,
    Log,
    Square,
    /// a / b
    Ratio,
    /// exp(a)/2
    Xm1,
    /// b/(1+exp(a)) + 10
    Xm2,
    /// (a·b/25 + 0.6)^3
    Xm3,
}

impl Transform {
    fn keyword(self) -> &'static str {
        match self {
            Transform::Exp => "exp",
            Transform::Log => "log",
            Transform::Square => "sq",
            Transform::Ratio => "ratio",
            Transform::Xm1 => "xm1",
            Transform::Xm2 => "xm2",
            Transform::Xm3 => "xm3",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Transform::Exp,
            "log" => Transform::Log,
            "sq" => Transform::Square,
            "ratio" => Transform::Ratio,
            "xm1" => Transform::Xm1,
            "xm2" => Transform::Xm2,
            "xm3" => Transform::Xm3,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Transform::Exp | Transform::Log | Transform::Square | Transform::Xm1 => 1,
            Transform::Ratio | Transform::Xm2 | Transform::Xm3 => 2,
        }
    }

    fn apply(self, args: &[&[f64]], names: &[String]) -> Result<Vec<f64>> {
        let n = args[0].len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = args[0][i];
            let v = match self {
                Transform::Exp => a.exp(),
                Transform::Log => {
                    if a <= 0.0 {
                        return Err(Error::domain(names[0].as_str(), format!("log of non-positive value at row {}", i + 1)));
                    }
                    a.ln()
                }
                Transform::Square => a * a,
                Transform::Ratio => {
                    let b = args[1][i];
                    if b == 0.0 {
                        return Err(Error::domain(names[1].as_str(), format!("division by zero at row {}", i + 1)));
                    }
                    a / b
                }
                Transform::Xm1 => transforms::misspec_exp_half(a),
                Transform::Xm2 => transforms::misspec_ratio(a, args[1][i]),
                Transform::Xm3 => transforms::misspec_cubic(a, args[1][i]),
            };
            if !v.is_finite() {
                return Err(Error::domain(
                    names[0].as_str(),
                    format!("transform `{}` is not finite at row {}", self.keyword(), i + 1),
                ));
            }
            out.push(v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Column(String),
    Centered(String),
    /// Elementwise product of two or more columns.
    Interaction(Vec<String>),
    Transform { kind: Transform, args: Vec<String> },
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Column(c) => write!(f, "{c}"),
            Term::Centered(c) => write!(f, "center({c})"),
            Term::Interaction(cs) => write!(f, "{}", cs.join(":")),
            Term::Transform { kind, args } => write!(f, "{}({})", kind.keyword(), args.join(", ")),
        }
    }
}

/// Ordered list of model terms, optionally with an intercept.
///
/// Text form: terms joined by `+`, products by `:`, transforms as function
/// calls (`center(C)`, `log(x)`, `ratio(a, b)`, `xm1(X1)`, `xm2(X1, X2)`,
/// `xm3(X1, X3)`). The intercept is included unless a `0` term is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureFormula {
    pub intercept: bool,
    pub terms: Vec<Term>,
}

impl FeatureFormula {
    pub fn new(intercept: bool, terms: Vec<Term>) -> Self {
        Self { intercept, terms }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut intercept = true;
        let mut terms = Vec::new();
        for raw in split_top_level(text, '+') {
            let t = raw.trim();
            match t {
                "" => return Err(Error::InvalidArgument(format!("empty term in formula `{text}`"))),
                "1" => intercept = true,
                "0" | "-1" => intercept = false,
                _ => terms.push(parse_term(t)?),
            }
        }
        Ok(Self { intercept, terms })
    }

    /// Intercept plus every product of a non-empty subset of `columns`,
    /// ordered by subset size. For binary columns this is the saturated model.
    pub fn saturated(columns: &[&str]) -> Self {
        let k = columns.len();
        let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
            .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let terms = subsets
            .into_iter()
            .map(|s| {
                if s.len() == 1 {
                    Term::Column(columns[s[0]].to_string())
                } else {
                    Term::Interaction(s.iter().map(|&i| columns[i].to_string()).collect())
                }
            })
            .collect();
        Self { intercept: true, terms }
    }

    /// Names of all columns the formula reads.
    pub fn columns_used(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.terms {
            let cols: Vec<&str> = match t {
                Term::Column(c) | Term::Centered(c) => vec![c.as_str()],
                Term::Interaction(cs) | Term::Transform { args: cs, .. } => cs.iter().map(String::as_str).collect(),
            };
            for c in cols {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }
}

impl fmt::Display for FeatureFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.intercept {
            parts.push("0".into());
        }
        parts.extend(self.terms.iter().map(|t| t.to_string()));
        if parts.is_empty() {
            parts.push("1".into());
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl TryFrom<String> for FeatureFormula {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<FeatureFormula> for String {
    fn from(f: FeatureFormula) -> String {
        f.to_string()
    }
}

fn split_top_level(text: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&text[start..i]);
                start = i + ch.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

fn check_ident(s: &str) -> Result<String> {
    let s = s.trim();
    let ok = !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.');
    if ok {
        Ok(s.to_string())
    } else {
        Err(Error::InvalidArgument(format!("invalid column name `{s}` in formula")))
    }
}

fn parse_term(t: &str) -> Result<Term> {
    if let Some(open) = t.find('(') {
        if !t.ends_with(')') {
            return Err(Error::InvalidArgument(format!("unbalanced parentheses in `{t}`")));
        }
        let func = t[..open].trim();
        let args: Vec<String> = t[open + 1..t.len() - 1]
            .split(',')
            .map(check_ident)
            .collect::<Result<_>>()?;
        if func == "center" {
            if args.len() != 1 {
                return Err(Error::InvalidArgument("center() takes one column".into()));
            }
            return Ok(Term::Centered(args[0].clone()));
        }
        let kind = Transform::from_keyword(func)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown transform `{func}`")))?;
        if args.len() != kind.arity() {
            return Err(Error::InvalidArgument(format!(
                "`{func}` takes {} argument(s), got {}",
                kind.arity(),
                args.len()
            )));
        }
        return Ok(Term::Transform { kind, args });
    }
    let factors: Vec<String> = t.split(':').map(check_ident).collect::<Result<_>>()?;
    if factors.len() == 1 {
        Ok(Term::Column(factors.into_iter().next().unwrap()))
    } else {
        Ok(Term::Interaction(factors))
    }
}

/// Expanded columns of a dataset column: the values for numeric columns,
/// k−1 reference-coded indicators for a k-level categorical.
fn expand(ds: &Dataset, name: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let col = ds.column(name)?;
    Ok(match col.data() {
        ColumnData::Numeric(v) => vec![(name.to_string(), v.clone())],
        ColumnData::Categorical { levels, codes } => (1..levels.len())
            .map(|l| {
                let ind = codes.iter().map(|&c| if c as usize == l { 1.0 } else { 0.0 }).collect();
                (format!("{name}[{}]", levels[l]), ind)
            })
            .collect(),
    })
}

/// Expand a formula against a dataset. Column order follows term order;
/// the intercept, when present, is column 0.
pub fn build_design(ds: &Dataset, formula: &FeatureFormula) -> Result<DesignMatrix> {
    let n = ds.n_rows();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    if formula.intercept {
        cols.push(("(intercept)".into(), vec![1.0; n]));
    }
    for term in &formula.terms {
        match term {
            Term::Column(c) => cols.extend(expand(ds, c)?),
            Term::Centered(c) => {
                for (name, mut v) in expand(ds, c)? {
                    let mean = if n > 0 { v.iter().sum::<f64>() / n as f64 } else { 0.0 };
                    v.iter_mut().for_each(|x| *x -= mean);
                    cols.push((format!("center({name})"), v));
                }
            }
            Term::Interaction(factors) => {
                let mut acc: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
                for f in factors {
                    let parts = expand(ds, f)?;
                    let mut next = Vec::with_capacity(acc.len() * parts.len());
                    for (an, av) in &acc {
                        for (pn, pv) in &parts {
                            let name = if an.is_empty() { pn.clone() } else { format!("{an}:{pn}") };
                            next.push((name, av.iter().zip(pv).map(|(a, b)| a * b).collect()));
                        }
                    }
                    acc = next;
                }
                cols.extend(acc);
            }
            Term::Transform { kind, args } => {
                let values: Vec<&[f64]> = args.iter().map(|a| ds.numeric(a)).collect::<Result<_>>()?;
                cols.push((term.to_string(), kind.apply(&values, args)?));
            }
        }
    }
    DesignMatrix::from_columns(n, cols)
}
