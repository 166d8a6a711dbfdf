use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symprep_cli::commands::{self, DivideArgs, DyadicArgs, EstimateArgs, PrepareArgs, Tolerances};
use symprep_cli::{exit_code, is_precondition, EXIT_IO};

/// Symmetric preparation of Hermitian matrix series and division by `tI + B`.
///
/// Results are written as JSON (stdout unless --out is given); a readable
/// report goes to stderr. SYMPREP_TOL overrides the residual acceptance
/// factors, either as one number or as `prepare=..,divide=..,dyadic=..`
/// (defaults 1e-9, 1e-8, 1e-6).
#[derive(Parser)]
#[command(name = "symprep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute U and M with F = U (tI + M) U*.
    Prepare {
        input: PathBuf,
        /// Truncation order (defaults to the file's P).
        #[arg(long = "order")]
        order: Option<u32>,
        #[arg(long, value_parser = ["hermitian", "general"])]
        branch: Option<String>,
        /// JSON array of skew coefficient records for the general branch.
        #[arg(long)]
        gauge_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Divide G by tI + B on a strip by contour quadrature.
    Divide {
        input: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        /// Panels per unit contour length.
        #[arg(long)]
        panels: Option<usize>,
        /// Comma-separated evaluation points in (-2, 2).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        points: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Divide sampled G band by band.
    Dyadic {
        input: PathBuf,
        /// Highest band index.
        #[arg(long)]
        bands: Option<usize>,
        #[arg(long)]
        panels: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate scaled norms of Q and R over a family and eps values (CSV).
    Estimate {
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the residuals of a result file against its problem file.
    Verify { result: PathBuf, problem: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<commands::Status> {
    let tol = Tolerances::from_env()?;
    match cli.command {
        Command::Prepare {
            input,
            order,
            branch,
            gauge_file,
            out,
        } => commands::prepare(
            &PrepareArgs {
                input,
                order,
                branch,
                gauge_file,
                out,
            },
            &tol,
        ),
        Command::Divide {
            input,
            eps,
            panels,
            points,
            out,
        } => commands::divide(
            &DivideArgs {
                input,
                eps,
                panels,
                points,
                out,
            },
            &tol,
        ),
        Command::Dyadic {
            input,
            bands,
            panels,
            out,
        } => commands::dyadic(&DyadicArgs { input, bands, panels, out }, &tol),
        Command::Estimate { input, eps_list, out } => commands::estimate(&EstimateArgs { input, eps_list, out }),
        Command::Verify { result, problem } => commands::verify(&result, &problem),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO } else { 0 });
        }
    };
    let outcome = run(cli);
    if let Err(e) = &outcome {
        if is_precondition(e) {
            eprintln!("symprep: precondition violated: {e:#}");
        } else {
            eprintln!("symprep: error: {e:#}");
        }
    }
    ExitCode::from(exit_code(&outcome))
}
