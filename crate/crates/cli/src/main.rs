use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use sheaflap_cli::commands::{self, CommandError, Outcome, SpectrumKind};
use sheaflap_cli::format::{self, Document};

/// Spectral toolkit for weighted cellular sheaves on cell complexes.
///
/// Commands read a document (see docs/FORMAT.md), run one library operation,
/// and print a structured report to standard output. Exit codes: 0 success,
/// 1 validation failure, 2 usage error.
#[derive(Parser)]
#[command(name = "sheaflap", version)]
struct Cli {
    /// Numerical tolerance override (default: per-operation; also read from
    /// the SHEAFLAP_TOL environment variable).
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the incidence sign condition, sheaf shapes, and d*d = 0.
    Validate { input: PathBuf },

    /// Eigenvalues of a degree-k Laplacian.
    #[command(group(ArgGroup::new("kind").args(["up", "down", "full"])))]
    Spectrum {
        input: PathBuf,
        #[arg(long)]
        degree: usize,
        /// Use the normalized degree-0 Laplacian (graph base).
        #[arg(long)]
        normalized: bool,
        /// Up-Laplacian (default).
        #[arg(long)]
        up: bool,
        /// Down-Laplacian.
        #[arg(long)]
        down: bool,
        /// Full Hodge Laplacian.
        #[arg(long)]
        full: bool,
    },

    /// Orthonormal harmonic basis and cohomology dimension.
    Harmonic {
        input: PathBuf,
        #[arg(long)]
        degree: usize,
    },

    /// Harmonic extension of named boundary values.
    Extend {
        input: PathBuf,
        /// Comma-separated boundary cell ids.
        #[arg(long, value_delimiter = ',', required = true)]
        boundary: Vec<String>,
        /// Name of the cochain section holding the boundary values.
        #[arg(long)]
        values: String,
    },

    /// Kron reduction onto a boundary vertex set.
    Kron {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        boundary: Vec<String>,
    },

    /// Effective resistance: one cell's form, or between two named cycles.
    #[command(group(ArgGroup::new("target").required(true).args(["cell", "between"])))]
    Resistance {
        input: PathBuf,
        /// Resistance form of this cell.
        #[arg(long)]
        cell: Option<String>,
        /// Two cochain names to measure between.
        #[arg(long, num_args = 2)]
        between: Option<Vec<String>>,
    },

    /// Randomized spectral sparsification of the top-dimensional cells.
    Sparsify {
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        seed: u64,
    },

    /// Explicit-Euler Laplacian diffusion from a named cochain.
    Diffuse {
        input: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        x0: String,
    },

    /// Build an approximation to the constant sheaf from a spec document.
    ApproxConst {
        /// Document with complex and approximation sections.
        #[arg(long)]
        spec: PathBuf,
    },

    /// Spectral checks: interlacing, product formula, Hodge relations.
    #[command(group(ArgGroup::new("what").required(true).args(["interlace", "product", "hodge_relations"])))]
    Check {
        input: PathBuf,
        /// Upward-closed cell ids to delete, comma separated.
        #[arg(long, value_delimiter = ',')]
        interlace: Option<Vec<String>>,
        /// Second sheaf document for the product formula.
        #[arg(long)]
        product: Option<PathBuf>,
        /// Verify the Hodge spectrum identities.
        #[arg(long)]
        hodge_relations: bool,
        #[arg(long, default_value_t = 0)]
        degree: usize,
    },
}

fn read_document(path: &PathBuf) -> Result<Document, CommandError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CommandError::Schema(format::SchemaError {
            path: path.display().to_string(),
            message: format!("cannot read file: {e}"),
        })
    })?;
    Ok(format::parse(&text)?)
}

fn tolerance(cli_value: Option<f64>) -> Option<f64> {
    cli_value.or_else(|| {
        std::env::var("SHEAFLAP_TOL")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn dispatch(cli: Cli) -> Result<Outcome, (String, CommandError)> {
    let tol = tolerance(cli.tol);
    fn named(cmd: &'static str) -> impl Fn(CommandError) -> (String, CommandError) {
        move |e| (cmd.to_string(), e)
    }
    match cli.command {
        Cmd::Validate { input } => {
            let doc = read_document(&input).map_err(named("validate"))?;
            commands::validate(&doc, tol).map_err(named("validate"))
        }
        Cmd::Spectrum {
            input,
            degree,
            normalized,
            up: _,
            down,
            full,
        } => {
            let doc = read_document(&input).map_err(named("spectrum"))?;
            let kind = if down {
                SpectrumKind::Down
            } else if full {
                SpectrumKind::Full
            } else {
                SpectrumKind::Up
            };
            commands::spectrum_cmd(&doc, degree, kind, normalized, tol)
                .map_err(named("spectrum"))
        }
        Cmd::Harmonic { input, degree } => {
            let doc = read_document(&input).map_err(named("harmonic"))?;
            commands::harmonic_cmd(&doc, degree, tol).map_err(named("harmonic"))
        }
        Cmd::Extend {
            input,
            boundary,
            values,
        } => {
            let doc = read_document(&input).map_err(named("extend"))?;
            commands::extend_cmd(&doc, &boundary, &values, tol).map_err(named("extend"))
        }
        Cmd::Kron { input, boundary } => {
            let doc = read_document(&input).map_err(named("kron"))?;
            commands::kron_cmd(&doc, &boundary, tol).map_err(named("kron"))
        }
        Cmd::Resistance {
            input,
            cell,
            between,
        } => {
            let doc = read_document(&input).map_err(named("resistance"))?;
            if let Some(cell) = cell {
                commands::resistance_cell_cmd(&doc, &cell, tol).map_err(named("resistance"))
            } else {
                let pair = between.expect("clap enforces the group");
                commands::resistance_between_cmd(&doc, &pair[0], &pair[1], tol)
                    .map_err(named("resistance"))
            }
        }
        Cmd::Sparsify { input, eps, seed } => {
            let doc = read_document(&input).map_err(named("sparsify"))?;
            commands::sparsify_cmd(&doc, eps, seed).map_err(named("sparsify"))
        }
        Cmd::Diffuse {
            input,
            degree,
            dt,
            steps,
            x0,
        } => {
            let doc = read_document(&input).map_err(named("diffuse"))?;
            commands::diffuse_cmd(&doc, degree, dt, steps, &x0).map_err(named("diffuse"))
        }
        Cmd::ApproxConst { spec } => {
            let doc = read_document(&spec).map_err(named("approx-const"))?;
            commands::approx_const_cmd(&doc).map_err(named("approx-const"))
        }
        Cmd::Check {
            input,
            interlace,
            product,
            hodge_relations,
            degree,
        } => {
            let doc = read_document(&input).map_err(named("check"))?;
            if let Some(cells) = interlace {
                commands::check_interlace_cmd(&doc, &cells, degree).map_err(named("check"))
            } else if let Some(other_path) = product {
                let other = read_document(&other_path).map_err(named("check"))?;
                commands::check_product_cmd(&doc, &other).map_err(named("check"))
            } else {
                debug_assert!(hodge_relations);
                commands::check_hodge_relations_cmd(&doc, degree, tol).map_err(named("check"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Spectrum {
        degree, normalized, ..
    } = &cli.command
    {
        if *normalized && *degree != 0 {
            eprintln!("error: --normalized applies to the degree-0 Laplacian only");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(outcome) => {
            print!("{}", outcome.report.to_text());
            if outcome.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err((command, error)) => {
            print!("{}", error.report(&command).to_text());
            ExitCode::from(1)
        }
    }
}
