//! JSON problem and result files.
//!
//! Matrices are written as separate real and imaginary row arrays; complex
//! literals never appear. Floats use the shortest representation that
//! parses back to the same double.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symprep_core::{MSeries, Matrix, MultiIndex};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixRecord {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<Vec<f64>>,
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> anyhow::Result<Matrix> {
        let n = self.re.len();
        if self.re.iter().any(|r| r.len() != n) {
            bail!("real part is not a square array");
        }
        let im = if self.im.is_empty() {
            vec![vec![0.0; n]; n]
        } else {
            self.im.clone()
        };
        Ok(Matrix::from_parts(&self.re, &im)?)
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let im = m.imag_rows();
        let all_real = im.iter().flatten().all(|&v| v == 0.0);
        MatrixRecord {
            re: m.real_rows(),
            im: if all_real { Vec::new() } else { im },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoeffRecord {
    pub j: u32,
    pub alpha: Vec<u32>,
    #[serde(flatten)]
    pub value: MatrixRecord,
}

pub fn series_from_records(
    records: &[CoeffRecord],
    nvars: usize,
    dim: usize,
    order: u32,
) -> anyhow::Result<MSeries> {
    let mut terms = Vec::with_capacity(records.len());
    for r in records {
        if r.alpha.len() != nvars {
            bail!(
                "coefficient (j={}, alpha={:?}) has {} x-exponents, expected n = {nvars}",
                r.j,
                r.alpha,
                r.alpha.len()
            );
        }
        let m = r.value.to_matrix()?;
        if m.dim() != dim {
            bail!("coefficient (j={}, alpha={:?}) is {}x{}, expected N = {dim}", r.j, r.alpha, m.dim(), m.dim());
        }
        terms.push((MultiIndex::new(r.j, r.alpha.clone()), m));
    }
    Ok(MSeries::from_terms(nvars, dim, order, terms)?)
}

pub fn records_from_series(s: &MSeries) -> Vec<CoeffRecord> {
    s.iter()
        .map(|(k, m)| CoeffRecord {
            j: k.j(),
            alpha: k.alpha().to_vec(),
            value: MatrixRecord::from_matrix(m),
        })
        .collect()
}

pub fn gauge_from_records(records: &[CoeffRecord], nvars: usize, dim: usize) -> anyhow::Result<BTreeMap<MultiIndex, Matrix>> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.alpha.len() != nvars {
            bail!("gauge entry (j={}, alpha={:?}) has the wrong number of x-exponents", r.j, r.alpha);
        }
        let m = r.value.to_matrix()?;
        if m.dim() != dim {
            bail!("gauge entry (j={}, alpha={:?}) has the wrong size", r.j, r.alpha);
        }
        out.insert(MultiIndex::new(r.j, r.alpha.clone()), m);
    }
    Ok(out)
}

/// A function on the strip: polynomial coefficients (ascending degree) or a
/// named built-in.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSpec {
    Polynomial(Vec<MatrixRecord>),
    Sampler {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PrepareProblem {
    pub n: usize,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "P")]
    pub order: u32,
    #[serde(default)]
    pub branch: Option<String>,
    pub coefficients: Vec<CoeffRecord>,
    #[serde(default)]
    pub gauge: Vec<CoeffRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DivideProblem {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "B")]
    pub b: MatrixRecord,
    pub eps: f64,
    pub t_points: Vec<f64>,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(rename = "G")]
    pub g: FunctionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DyadicProblem {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "B")]
    pub b: MatrixRecord,
    pub half_width: f64,
    pub grid_points: usize,
    pub bands: usize,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(rename = "G")]
    pub g: FunctionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FamilyMember {
    pub id: String,
    #[serde(rename = "G")]
    pub g: FunctionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateProblem {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "B")]
    pub b: MatrixRecord,
    pub eps_list: Vec<f64>,
    pub t_points: Vec<f64>,
    #[serde(default = "default_panels")]
    pub panels: usize,
    pub family: Vec<FamilyMember>,
}

fn default_panels() -> usize {
    symprep_core::division::DEFAULT_PANELS
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Prepare(PrepareProblem),
    Divide(DivideProblem),
    Dyadic(DyadicProblem),
    Estimate(EstimateProblem),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Prepare(_) => "prepare",
            Problem::Divide(_) => "divide",
            Problem::Dyadic(_) => "dyadic",
            Problem::Estimate(_) => "estimate",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub problem: Problem,
}

/// A problem file together with the SHA-256 of its bytes.
pub struct LoadedProblem {
    pub file: ProblemFile,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_problem(path: &Path) -> anyhow::Result<LoadedProblem> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ProblemFile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing problem file {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        );
    }
    Ok(LoadedProblem {
        file,
        sha256: sha256_hex(&bytes),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PrepareOutput {
    pub n: usize,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "P")]
    pub order: u32,
    pub branch: String,
    #[serde(default)]
    pub gauge: Vec<CoeffRecord>,
    #[serde(rename = "U")]
    pub u: Vec<CoeffRecord>,
    #[serde(rename = "M")]
    pub m: Vec<CoeffRecord>,
    /// Present when the remainder path was taken.
    #[serde(rename = "F00", default, skip_serializing_if = "Option::is_none")]
    pub f00: Option<MatrixRecord>,
    pub residual_per_degree: Vec<f64>,
    pub residual_max: f64,
    pub f_norm: f64,
    /// Residual acceptance factor relative to `f_norm`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DivideOutput {
    pub eps: f64,
    pub quadrature_panels: usize,
    pub t_points: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<MatrixRecord>,
    #[serde(rename = "R")]
    pub r: MatrixRecord,
    pub residual_max: f64,
    pub m_g: f64,
    pub est_q: f64,
    pub est_r: f64,
    /// `max |Q - Q_exact|, |R - R_exact|` for polynomial `G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_discrepancy: Option<f64>,
    /// Residual acceptance factor relative to `m_g`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandRecord {
    pub band: usize,
    pub eps: f64,
    pub mass: f64,
    pub skipped: bool,
    pub q_sup: f64,
    pub r_norm: f64,
    pub band_residual: f64,
    pub cumulative_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DyadicOutput {
    pub t_points: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<MatrixRecord>,
    #[serde(rename = "R")]
    pub r: MatrixRecord,
    pub bands: Vec<BandRecord>,
    pub residual_max: f64,
    pub m_g: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Output {
    Prepare(PrepareOutput),
    Divide(DivideOutput),
    Dyadic(DyadicOutput),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultFile {
    pub schema_version: u32,
    pub tool: String,
    pub input_sha256: String,
    #[serde(flatten)]
    pub output: Output,
}

pub fn tool_version() -> String {
    format!("symprep {}", env!("CARGO_PKG_VERSION"))
}

pub fn load_result(path: &Path) -> anyhow::Result<ResultFile> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ResultFile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing result file {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {}", file.schema_version);
    }
    Ok(file)
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
