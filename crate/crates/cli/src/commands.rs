use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use symprep_core::division::{
    contour_divide, estimate_report, polynomial_divide, smooth_divide_dyadic, DyadicOptions, Pencil,
    StripFunction, UniformGrid,
};
use symprep_core::prep::{
    prepare_formal, prepare_with_remainder, verify_preparation, Branch, PreparationInput, PreparationResult,
};
use symprep_core::{MSeries, Matrix, MultiIndex, XSeries, C64};

use crate::files::{
    gauge_from_records, load_problem, load_result, records_from_series, series_from_records, tool_version,
    write_json, BandRecord, CoeffRecord, DivideOutput, DivideProblem, DyadicOutput, DyadicProblem,
    EstimateProblem, LoadedProblem, MatrixRecord, Output, PrepareOutput, PrepareProblem, Problem, ResultFile,
    SCHEMA_VERSION,
};
use crate::samplers;

/// Environment variable overriding the acceptance factors.
pub const TOL_ENV: &str = "SYMPREP_TOL";

/// Largest admissible `est_Q` / `est_R` in an estimate table.
pub const EST_CONSTANT: f64 = 10.0;

/// Recomputed residuals must match the recorded ones this closely.
const REPRODUCTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

/// Residual acceptance factors, relative to `|F|` (prepare) or `M_G`
/// (divide, dyadic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub prepare: f64,
    pub divide: f64,
    pub dyadic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            prepare: 1e-9,
            divide: 1e-8,
            dyadic: 1e-6,
        }
    }
}

impl Tolerances {
    /// Parses `1e-8` (all commands) or `prepare=1e-10,dyadic=1e-5`.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut tol = Tolerances::default();
        let positive = |v: &str| -> anyhow::Result<f64> {
            let x: f64 = v.trim().parse().with_context(|| format!("{TOL_ENV}: `{v}` is not a number"))?;
            if !(x > 0.0 && x.is_finite()) {
                bail!("{TOL_ENV}: tolerance must be positive, got {x}");
            }
            Ok(x)
        };
        if !text.contains('=') {
            let x = positive(text)?;
            return Ok(Tolerances {
                prepare: x,
                divide: x,
                dyadic: x,
            });
        }
        for part in text.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("{TOL_ENV}: expected key=value, got `{part}`"))?;
            let slot = match key.trim() {
                "prepare" => &mut tol.prepare,
                "divide" => &mut tol.divide,
                "dyadic" => &mut tol.dyadic,
                other => bail!("{TOL_ENV}: unknown key `{other}`"),
            };
            *slot = positive(value)?;
        }
        Ok(tol)
    }

    pub fn from_env() -> anyhow::Result<Self> {
        match std::env::var(TOL_ENV) {
            Ok(v) => Self::parse(&v),
            Err(std::env::VarError::NotPresent) => Ok(Tolerances::default()),
            Err(e) => Err(anyhow!("{TOL_ENV}: {e}")),
        }
    }
}

pub struct PrepareArgs {
    pub input: PathBuf,
    pub order: Option<u32>,
    pub branch: Option<String>,
    pub gauge_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub struct DivideArgs {
    pub input: PathBuf,
    pub eps: Option<f64>,
    pub panels: Option<usize>,
    pub points: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

pub struct DyadicArgs {
    pub input: PathBuf,
    pub bands: Option<usize>,
    pub panels: Option<usize>,
    pub out: Option<PathBuf>,
}

pub struct EstimateArgs {
    pub input: PathBuf,
    pub eps_list: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

fn wrong_kind(path: &Path, found: &str, expected: &str) -> anyhow::Error {
    anyhow!("{} is a `{found}` problem, expected `{expected}`", path.display())
}

fn result_file(loaded: &LoadedProblem, output: Output) -> ResultFile {
    ResultFile {
        schema_version: SCHEMA_VERSION,
        tool: tool_version(),
        input_sha256: loaded.sha256.clone(),
        output,
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::VerificationFailed
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

// ---------------------------------------------------------------- prepare

fn build_f(p: &PrepareProblem) -> anyhow::Result<MSeries> {
    if p.dim == 0 {
        bail!("N must be positive");
    }
    series_from_records(&p.coefficients, p.n, p.dim, p.order)
}

fn resolve_branch(p: &PrepareProblem, args: &PrepareArgs) -> anyhow::Result<(Branch, Vec<CoeffRecord>)> {
    let gauge_records = match &args.gauge_file {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_slice::<Vec<CoeffRecord>>(&bytes)
                .with_context(|| format!("parsing gauge file {}", path.display()))?
        }
        None => p.gauge.clone(),
    };
    let name = args
        .branch
        .clone()
        .or_else(|| p.branch.clone())
        .unwrap_or_else(|| if gauge_records.is_empty() { "hermitian" } else { "general" }.to_string());
    match name.as_str() {
        "hermitian" => {
            if !gauge_records.is_empty() {
                bail!("a gauge was supplied but the branch is `hermitian`");
            }
            Ok((Branch::HermitianUnique, gauge_records))
        }
        "general" => {
            let gauge = gauge_from_records(&gauge_records, p.n, p.dim)?;
            Ok((Branch::General { gauge }, gauge_records))
        }
        other => bail!("unknown branch `{other}` (expected hermitian or general)"),
    }
}

fn print_residual_table(per_degree: &[f64]) {
    eprintln!("  degree  residual");
    for (d, r) in per_degree.iter().enumerate() {
        eprintln!("  {d:>6}  {r:.3e}");
    }
}

pub fn prepare(args: &PrepareArgs, tol: &Tolerances) -> anyhow::Result<Status> {
    let loaded = load_problem(&args.input)?;
    let p = match &loaded.file.problem {
        Problem::Prepare(p) => p,
        other => return Err(wrong_kind(&args.input, other.kind(), "prepare")),
    };
    let f = build_f(p)?;
    let order = args.order.unwrap_or(p.order);
    if order == 0 {
        bail!("order must be at least 1");
    }
    let (branch, gauge_records) = resolve_branch(p, args)?;

    let f00 = f.coeff_or_zero(&MultiIndex::zero(p.n));
    let (result, remainder): (PreparationResult, Option<Matrix>) = if f00.is_zero() {
        (prepare_formal(&PreparationInput::new(f, order, branch))?, None)
    } else {
        eprintln!("F(0,0) is nonzero; preparing F - F(0,0) and recording the remainder");
        let (r, f00) = prepare_with_remainder(&f, order, branch)?;
        (r, Some(f00))
    };

    let ok = result.within(tol.prepare);
    eprintln!(
        "prepare: n={} N={} P={order} branch={}",
        p.n,
        p.dim,
        result.branch.name()
    );
    print_residual_table(&result.diagnostics.per_degree);
    eprintln!(
        "  residual_max {:.3e}, tolerance {:.1e} x |F| = {:.3e}: {}",
        result.residual_max,
        tol.prepare,
        tol.prepare * result.f_norm,
        verdict(ok)
    );

    let out = PrepareOutput {
        n: p.n,
        dim: p.dim,
        order,
        branch: result.branch.name().to_string(),
        gauge: gauge_records,
        u: records_from_series(&result.u),
        m: records_from_series(&result.m),
        f00: remainder.as_ref().map(MatrixRecord::from_matrix),
        residual_per_degree: result.diagnostics.per_degree.clone(),
        residual_max: result.residual_max,
        f_norm: result.f_norm,
        tolerance: tol.prepare,
    };
    write_json(&result_file(&loaded, Output::Prepare(out)), args.out.as_deref())?;
    Ok(status(ok))
}

fn verify_prepare(p: &PrepareProblem, r: &PrepareOutput) -> anyhow::Result<Status> {
    if (r.n, r.dim) != (p.n, p.dim) {
        bail!("result shape (n={}, N={}) does not match the problem (n={}, N={})", r.n, r.dim, p.n, p.dim);
    }
    let f = build_f(p)?;
    let f = match &r.f00 {
        Some(c) => f.sub(&MSeries::constant(p.n, p.order, c.to_matrix()?))?,
        None => f,
    };
    let u = series_from_records(&r.u, r.n, r.dim, r.order)?;
    let m = XSeries::new(series_from_records(&r.m, r.n, r.dim, r.order)?)?;
    let table = verify_preparation(&f, &u, &m, r.order)?;
    let residual_max = table.max();

    let drift = table
        .per_degree
        .iter()
        .zip(&r.residual_per_degree)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let same_len = table.per_degree.len() == r.residual_per_degree.len();
    let reproduced = same_len && drift <= REPRODUCTION_TOL;
    let within = residual_max <= r.tolerance * r.f_norm;

    eprintln!("verify prepare: n={} N={} P={} branch={}", r.n, r.dim, r.order, r.branch);
    print_residual_table(&table.per_degree);
    eprintln!(
        "  residual_max {residual_max:.3e}, tolerance {:.1e} x |F| = {:.3e}: {}",
        r.tolerance,
        r.tolerance * r.f_norm,
        verdict(within)
    );
    eprintln!(
        "  recorded table reproduced within {REPRODUCTION_TOL:.0e}: {} (drift {drift:.3e})",
        verdict(reproduced)
    );
    Ok(status(within && reproduced))
}

// ----------------------------------------------------------------- divide

fn pencil(b: &MatrixRecord, dim: usize) -> anyhow::Result<Pencil> {
    let b = b.to_matrix()?;
    if b.dim() != dim {
        bail!("B is {}x{}, expected N = {dim}", b.dim(), b.dim());
    }
    Ok(Pencil::new(b)?)
}

fn residual_at(g: &StripFunction, pencil: &Pencil, t: f64, q: &Matrix, r: &Matrix) -> f64 {
    let s = C64::new(t, 0.0);
    let d = &(&g.eval(s) - &(q * &pencil.eval(s))) - r;
    d.operator_norm()
}

pub fn divide(args: &DivideArgs, tol: &Tolerances) -> anyhow::Result<Status> {
    let loaded = load_problem(&args.input)?;
    let p = match &loaded.file.problem {
        Problem::Divide(p) => p,
        other => return Err(wrong_kind(&args.input, other.kind(), "divide")),
    };
    let pencil = pencil(&p.b, p.dim)?;
    let g = samplers::build(&p.g, p.dim, &pencil)?;
    let eps = args.eps.unwrap_or(p.eps);
    let panels = args.panels.unwrap_or(p.panels);
    let t_points = args.points.clone().unwrap_or_else(|| p.t_points.clone());

    let res = contour_divide(&g, &pencil, eps, &t_points, panels)?;

    let oracle_discrepancy = match samplers::polynomial_coeffs(&p.g, p.dim)? {
        Some(coeffs) => {
            let (q, r) = polynomial_divide(&coeffs, &pencil)?;
            let q = StripFunction::polynomial(q)?;
            let dq = t_points
                .iter()
                .zip(&res.q_values)
                .map(|(&t, qv)| (qv - &q.eval(C64::new(t, 0.0))).operator_norm())
                .fold(0.0, f64::max);
            Some(dq.max((&res.r - &r).operator_norm()))
        }
        None => None,
    };

    let limit = tol.divide * res.m_g;
    let ok = res.residual_max <= limit && oracle_discrepancy.map_or(true, |d| d <= limit);
    eprintln!(
        "divide: N={} |B|={:.3} eps={eps} panels={} points={}",
        p.dim,
        pencil.norm(),
        res.quadrature_panels,
        t_points.len()
    );
    eprintln!(
        "  M_G {:.4e}  sup|Q| {:.4e}  |R| {:.4e}  est_Q {:.4e}  est_R {:.4e}",
        res.m_g, res.sup_q, res.norm_r, res.est_q, res.est_r
    );
    if let Some(d) = oracle_discrepancy {
        eprintln!("  polynomial long-division discrepancy {d:.3e}");
    }
    eprintln!(
        "  residual_max {:.3e}, tolerance {:.1e} x M_G = {limit:.3e}: {}",
        res.residual_max,
        tol.divide,
        verdict(ok)
    );

    let out = DivideOutput {
        eps,
        quadrature_panels: res.quadrature_panels,
        t_points: res.t_points.clone(),
        q: res.q_values.iter().map(MatrixRecord::from_matrix).collect(),
        r: MatrixRecord::from_matrix(&res.r),
        residual_max: res.residual_max,
        m_g: res.m_g,
        est_q: res.est_q,
        est_r: res.est_r,
        oracle_discrepancy,
        tolerance: tol.divide,
    };
    write_json(&result_file(&loaded, Output::Divide(out)), args.out.as_deref())?;
    Ok(status(ok))
}

fn recorded_residual(
    g: &StripFunction,
    pencil: &Pencil,
    t_points: &[f64],
    q: &[MatrixRecord],
    r: &MatrixRecord,
) -> anyhow::Result<f64> {
    if q.len() != t_points.len() {
        bail!("result has {} Q values for {} t-points", q.len(), t_points.len());
    }
    let r = r.to_matrix()?;
    let mut worst: f64 = 0.0;
    for (&t, q) in t_points.iter().zip(q) {
        worst = worst.max(residual_at(g, pencil, t, &q.to_matrix()?, &r));
    }
    Ok(worst)
}

fn verify_divide(p: &DivideProblem, r: &DivideOutput) -> anyhow::Result<Status> {
    let pencil = pencil(&p.b, p.dim)?;
    let g = samplers::build(&p.g, p.dim, &pencil)?;
    let residual = recorded_residual(&g, &pencil, &r.t_points, &r.q, &r.r)?;
    let limit = r.tolerance * r.m_g;
    let within = residual <= limit;
    let drift = (residual - r.residual_max).abs();
    let reproduced = drift <= REPRODUCTION_TOL * r.m_g.max(1.0);
    eprintln!("verify divide: N={} eps={} points={}", p.dim, r.eps, r.t_points.len());
    eprintln!(
        "  residual_max {residual:.3e}, tolerance {:.1e} x M_G = {limit:.3e}: {}",
        r.tolerance,
        verdict(within)
    );
    eprintln!(
        "  recorded residual reproduced within {REPRODUCTION_TOL:.0e}: {} (drift {drift:.3e})",
        verdict(reproduced)
    );
    Ok(status(within && reproduced))
}

// ----------------------------------------------------------------- dyadic

pub fn dyadic(args: &DyadicArgs, tol: &Tolerances) -> anyhow::Result<Status> {
    let loaded = load_problem(&args.input)?;
    let p = match &loaded.file.problem {
        Problem::Dyadic(p) => p,
        other => return Err(wrong_kind(&args.input, other.kind(), "dyadic")),
    };
    let pencil = pencil(&p.b, p.dim)?;
    let grid = UniformGrid::symmetric(p.half_width, p.grid_points);
    let samples = samplers::sample(&p.g, p.dim, &pencil, &grid.points())?;
    let opts = DyadicOptions {
        bands: args.bands.unwrap_or(p.bands),
        panels: args.panels.unwrap_or(p.panels),
        ..DyadicOptions::default()
    };
    let res = smooth_divide_dyadic(&grid, &samples, &pencil, &opts)?;
    let limit = tol.dyadic * res.m_g;
    let ok = res.residual_max <= limit;

    eprintln!(
        "dyadic: N={} |B|={:.3} grid={} on [-{}, {}) bands 0..={}",
        p.dim,
        pencil.norm(),
        p.grid_points,
        p.half_width,
        p.half_width,
        opts.bands
    );
    eprintln!("  band  eps        mass       cumulative residual");
    for b in &res.bands {
        let note = if b.skipped { "  (below noise floor)" } else { "" };
        eprintln!(
            "  {:>4}  {:.3e}  {:.3e}  {:.3e}{note}",
            b.band, b.eps, b.mass, b.cumulative_residual
        );
    }
    eprintln!(
        "  residual_max {:.3e}, tolerance {:.1e} x M_G = {limit:.3e}: {}",
        res.residual_max,
        tol.dyadic,
        verdict(ok)
    );

    let out = DyadicOutput {
        t_points: grid.points(),
        q: res.q.iter().map(MatrixRecord::from_matrix).collect(),
        r: MatrixRecord::from_matrix(&res.r),
        bands: res
            .bands
            .iter()
            .map(|b| BandRecord {
                band: b.band,
                eps: b.eps,
                mass: b.mass,
                skipped: b.skipped,
                q_sup: b.q_sup,
                r_norm: b.r_norm,
                band_residual: b.band_residual,
                cumulative_residual: b.cumulative_residual,
            })
            .collect(),
        residual_max: res.residual_max,
        m_g: res.m_g,
        tolerance: tol.dyadic,
    };
    write_json(&result_file(&loaded, Output::Dyadic(out)), args.out.as_deref())?;
    Ok(status(ok))
}

fn verify_dyadic(p: &DyadicProblem, r: &DyadicOutput) -> anyhow::Result<Status> {
    let pencil = pencil(&p.b, p.dim)?;
    let g = samplers::build(&p.g, p.dim, &pencil)?;
    let residual = recorded_residual(&g, &pencil, &r.t_points, &r.q, &r.r)?;
    let limit = r.tolerance * r.m_g;
    let within = residual <= limit;
    let drift = (residual - r.residual_max).abs();
    let reproduced = drift <= REPRODUCTION_TOL * r.m_g.max(1.0);
    eprintln!("verify dyadic: N={} grid={}", p.dim, r.t_points.len());
    eprintln!(
        "  residual_max {residual:.3e}, tolerance {:.1e} x M_G = {limit:.3e}: {}",
        r.tolerance,
        verdict(within)
    );
    eprintln!(
        "  recorded residual reproduced within {REPRODUCTION_TOL:.0e}: {} (drift {drift:.3e})",
        verdict(reproduced)
    );
    Ok(status(within && reproduced))
}

// --------------------------------------------------------------- estimate

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
fn csv_float(x: f64) -> String {
    if x != 0.0 && !(1e-4..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn estimate(args: &EstimateArgs) -> anyhow::Result<Status> {
    let loaded = load_problem(&args.input)?;
    let p: &EstimateProblem = match &loaded.file.problem {
        Problem::Estimate(p) => p,
        other => return Err(wrong_kind(&args.input, other.kind(), "estimate")),
    };
    let pencil = pencil(&p.b, p.dim)?;
    let family = p
        .family
        .iter()
        .map(|m| Ok((m.id.clone(), samplers::build(&m.g, p.dim, &pencil)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let eps_list = args.eps_list.clone().unwrap_or_else(|| p.eps_list.clone());
    let table = estimate_report(&family, &pencil, &eps_list, &p.t_points, p.panels)?;

    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["function_id", "eps", "sup_norm_Q", "norm_R", "est_Q", "est_R"])?;
    for row in &table.rows {
        w.write_record([
            row.function_id.clone(),
            csv_float(row.eps),
            csv_float(row.sup_norm_q),
            csv_float(row.norm_r),
            csv_float(row.est_q),
            csv_float(row.est_r),
        ])?;
    }
    w.flush()?;

    let ok = table.max_est_q <= EST_CONSTANT && table.max_est_r <= EST_CONSTANT;
    eprintln!(
        "estimate: {} rows, max est_Q {:.4}, max est_R {:.4}, bound {EST_CONSTANT}: {}",
        table.rows.len(),
        table.max_est_q,
        table.max_est_r,
        verdict(ok)
    );
    Ok(status(ok))
}

// ----------------------------------------------------------------- verify

pub fn verify(result: &Path, problem: &Path) -> anyhow::Result<Status> {
    let r = load_result(result)?;
    let loaded = load_problem(problem)?;
    if r.input_sha256 != loaded.sha256 {
        bail!(
            "input hash mismatch: {} was produced from {}, but {} hashes to {}",
            result.display(),
            r.input_sha256,
            problem.display(),
            loaded.sha256
        );
    }
    match (&loaded.file.problem, &r.output) {
        (Problem::Prepare(p), Output::Prepare(o)) => verify_prepare(p, o),
        (Problem::Divide(p), Output::Divide(o)) => verify_divide(p, o),
        (Problem::Dyadic(p), Output::Dyadic(o)) => verify_dyadic(p, o),
        (p, _) => bail!("cannot verify a `{}` problem against this result file", p.kind()),
    }
}
