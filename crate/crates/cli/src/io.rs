//! JSON schemas for inputs and reports, plus CSV emission.

use std::path::Path;

use num_complex::Complex64 as C;
use overlap_core::analytic::PointConfig;
use overlap_core::permlat::{PartialPermutation, Vertex};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

pub fn pair(c: C) -> Pair {
    [c.re, c.im]
}

pub fn complex(p: Pair) -> C {
    C::new(p[0], p[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub vertex: Vertex,
    pub z: Pair,
    pub w: Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsJson {
    pub points: Vec<PointJson>,
}

impl PointsJson {
    pub fn from_config(pts: &PointConfig) -> Self {
        let points = pts.points().map(|(vertex, z, w)| PointJson { vertex, z: pair(z), w: pair(w) }).collect();
        Self { points }
    }

    pub fn to_config(&self) -> Result<PointConfig, CliError> {
        Ok(PointConfig::new(self.points.iter().map(|p| (p.vertex, complex(p.z), complex(p.w))))?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationJson {
    pub cycles: Vec<Vec<Vertex>>,
}

impl PermutationJson {
    pub fn from_perm(sigma: &PartialPermutation) -> Self {
        Self { cycles: sigma.cycles() }
    }

    pub fn to_perm(&self) -> Result<PartialPermutation, CliError> {
        Ok(PartialPermutation::from_cycles(&self.cycles)?)
    }
}

/// Inline JSON when the argument starts with `{` or `[`, otherwise a file path.
pub fn read_arg(arg: &str) -> Result<String, CliError> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(Path::new(arg)).map_err(|e| CliError::Io(format!("{arg}: {e}")))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))
}

pub fn load_points(arg: &str) -> Result<PointConfig, CliError> {
    parse_json::<PointsJson>(&read_arg(arg)?)?.to_config()
}

/// Cycle JSON (`{"cycles":[[1,2],[3]]}`), or compact text such as `(1,2)(3)`.
pub fn parse_perm(arg: &str) -> Result<PartialPermutation, CliError> {
    if arg.trim_start().starts_with('{') {
        parse_json::<PermutationJson>(arg)?.to_perm()
    } else {
        Ok(arg.parse()?)
    }
}

/// A JSON list of `[re, im]` pairs, inline or from a file.
pub fn load_pairs(arg: &str) -> Result<Vec<C>, CliError> {
    Ok(parse_json::<Vec<Pair>>(&read_arg(arg)?)?.into_iter().map(complex).collect())
}

/// `re,im` or `[re,im]`.
pub fn parse_complex(arg: &str) -> Result<C, CliError> {
    let body = arg.trim().trim_start_matches('[').trim_end_matches(']');
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("cannot parse complex number {arg:?}"));
    match parts.as_slice() {
        [re] => Ok(C::new(re.parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(C::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

/// CSV text from a header and rows.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeReport {
    pub ell: usize,
    pub size: usize,
    pub elements: Vec<PermutationJson>,
    /// Index pairs `[i, j]` with `elements[i] ≺ elements[j]`.
    pub steps: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NMatrixReport {
    pub ell: usize,
    pub index: Vec<String>,
    pub n: Vec<Vec<Pair>>,
    pub l: Vec<Vec<Pair>>,
    pub r: Vec<Vec<Pair>>,
    pub exp: Vec<Vec<Pair>>,
    pub residuals: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub perm: String,
    pub value: Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoReport {
    pub perm: String,
    pub value: Pair,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rho4Report {
    pub nu: Vec<Pair>,
    pub value: Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadRow {
    pub kind: String,
    pub sigma: String,
    pub tau: String,
    pub closed: Pair,
    pub quadrature: Pair,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadReport {
    pub res: usize,
    pub max_error: f64,
    pub rows: Vec<QuadRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McReport {
    pub estimator: String,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub eps: Option<f64>,
    pub perm: Option<String>,
    pub mean: Pair,
    pub stderr: f64,
    pub target: Pair,
    pub sigmas: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionJson {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub details: Vec<String>,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptReport {
    pub passed: bool,
    pub criteria: Vec<CriterionJson>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perm_forms_agree() {
        let a = parse_perm("(1,2)(3)").unwrap();
        let b = parse_perm(r#"{"cycles":[[1,2],[3]]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(PermutationJson::from_perm(&a).to_perm().unwrap(), a);
    }

    #[test]
    fn overlapping_cycles_rejected() {
        assert!(parse_perm("(1,2)(2,3)").is_err());
        assert!(parse_perm(r#"{"cycles":[[1,2],[2]]}"#).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"points":[{"vertex":1,"z":[0,0],"w":[0.5,0],"extra":1}]}"#;
        assert!(matches!(parse_json::<PointsJson>(text), Err(CliError::Json(_))));
        assert!(parse_json::<PermutationJson>(r#"{"cycles":[],"x":0}"#).is_err());
    }

    #[test]
    fn points_round_trip() {
        let text = r#"{"points":[{"vertex":1,"z":[0.1,-0.2],"w":[0.5,0.25]},{"vertex":2,"z":[0,0.3],"w":[-0.4,0]}]}"#;
        let pts = load_points(text).unwrap();
        let back = serde_json::to_string(&PointsJson::from_config(&pts)).unwrap();
        assert_eq!(load_points(&back).unwrap(), pts);
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.5,-1").unwrap(), C::new(0.5, -1.0));
        assert_eq!(parse_complex("[0, 0.25]").unwrap(), C::new(0.0, 0.25));
        assert_eq!(parse_complex("2").unwrap(), C::new(2.0, 0.0));
        assert!(parse_complex("a,b").is_err());
    }

    #[test]
    fn csv_quotes_commas() {
        let s = csv_table(&["perm", "re"], &[vec!["(1,2)".into(), "1".into()]]).unwrap();
        assert_eq!(s, "perm,re\n\"(1,2)\",1\n");
    }
}
