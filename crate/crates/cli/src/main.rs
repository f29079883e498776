use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use clearnet::clearing_matrix::{optimal_matrix_lp, prorata_matrix, system_loss};
use clearnet::clearing_set::{
    analyze_clearing_set, brute_force_clearing_set, free_extreme_vectors, sample_clearing_vectors,
    sufficient_uniqueness, unique_by_sink_components,
};
use clearnet::clearing_vector::{default_fda_cap, dominant_vector_fda, dominant_vector_lp, FDA_TOL};
use clearnet::experiment::{run_sweep, write_csv, SweepConfig, SweepMeta};
use clearnet::model::{check_clearing_matrix, defaults, ClearingSolution};
use clearnet::simgen::{apply_shock, generate, GeneratorConfig, ShockConfig};
use clearnet::{Execution, FinancialNetwork};

mod report;

use report::*;

/// Largest |p_LP − p_FDA| for the two methods to count as agreeing.
const AGREEMENT_TOL: f64 = 1e-7;

#[derive(Debug, Parser)]
#[command(name = "clearnet", version, about = "Clearing payments in interbank liability networks")]
struct Cli {
    /// Absolute tolerance for equalities, defaults and clearing checks.
    #[arg(long, global = true, default_value_t = clearnet::EPS)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a random network and write it as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        /// Expected number of creditors per bank.
        #[arg(long)]
        degree: f64,
        #[arg(long, env = "CLEARNET_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        p_max: f64,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Wipe out the outside assets of this many random banks.
        #[arg(long, default_value_t = 0)]
        shock: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Dominant clearing vector, equities and defaults.
    ClearVector {
        network: PathBuf,
        /// Method whose vector is reported; the other one is run as a cross-check.
        #[arg(long, value_enum, default_value_t = VectorMethod::Lp)]
        method: VectorMethod,
    },
    /// Optimal clearing matrix, or the pro-rata matrix of the dominant vector.
    ClearMatrix {
        network: PathBuf,
        #[arg(long)]
        prorata: bool,
    },
    /// Whether the clearing vector is unique, with the staged analysis.
    Uniqueness { network: PathBuf },
    /// Describe every clearing vector and draw samples from the set.
    ClearingSet {
        network: PathBuf,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, env = "CLEARNET_SEED", default_value_t = 0)]
        seed: u64,
        /// Also enumerate the vertices of the set exhaustively (at most 10 nodes).
        #[arg(long)]
        enumerate: bool,
    },
    /// Check a network file and summarise it.
    Validate { network: PathBuf },
    /// Monte-Carlo sweep over average degree and shock size.
    Experiment {
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Degree grid as `start:stop:step`, `start:stop`, a single value or a comma list.
        #[arg(long, default_value = "5:35:5")]
        degrees: String,
        /// Shock-size grid, same syntax as `--degrees`.
        #[arg(long, default_value = "1:5")]
        shocks: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, env = "CLEARNET_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        p_max: f64,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Worker threads; 1 runs sequentially. Defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// CSV destination; a `.meta.json` companion is written next to it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VectorMethod {
    Lp,
    Fda,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .filter_map(|c| c.downcast_ref::<clearnet::Error>())
                .any(clearnet::Error::is_numerical);
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let tol = cli.tol;
    if !(tol.is_finite() && tol >= 0.0) {
        bail!("--tol must be a nonnegative number");
    }
    match cli.command {
        Command::Gen {
            n,
            degree,
            seed,
            p_max,
            beta,
            shock,
            output,
        } => {
            let cfg = GeneratorConfig {
                n,
                avg_degree: degree,
                p_max,
                beta,
                seed,
            };
            let mut net = generate(&cfg)?;
            if shock > 0 {
                net = apply_shock(&net, &ShockConfig { n_s: shock, seed })?;
            }
            emit_text(&net.to_json_string()?, output.as_deref())
        }
        Command::ClearVector { network, method } => {
            let net = load(&network)?;
            let lp = dominant_vector_lp(&net)?;
            let fda = dominant_vector_fda(&net, default_fda_cap(net.n()), FDA_TOL);
            let diff = (&lp.p_star - &fda.p_star).amax();
            let chosen = match method {
                VectorMethod::Lp => lp.p_star.clone(),
                VectorMethod::Fda => fda.p_star.clone(),
            };
            let sol = ClearingSolution::evaluate(&net, chosen, tol.max(1e-8))?;
            emit_json(&ClearVectorReport {
                p_star: sol.payments.as_slice().to_vec(),
                equities: sol.equities.as_slice().to_vec(),
                defaults: defaults(&net.total_out(), &sol.payments, tol).into_iter().collect(),
                residual: sol.residual,
                method: method_name(method),
                method_agreement: MethodAgreement {
                    agree: diff <= AGREEMENT_TOL && fda.converged,
                    max_abs_difference: diff,
                    tolerance: AGREEMENT_TOL,
                    fda_iterations: fda.iterations.unwrap_or(0),
                    fda_converged: fda.converged,
                },
            })
        }
        Command::ClearMatrix { network, prorata } => {
            let net = load(&network)?;
            let (matrix, total, rule) = if prorata {
                let p = dominant_vector_lp(&net)?.p_star;
                let m = prorata_matrix(&net, &p);
                let total = m.total();
                (m, total, "pro-rata")
            } else {
                let opt = optimal_matrix_lp(&net)?;
                (opt.matrix, opt.total_payments, "optimal")
            };
            let check = check_clearing_matrix(&net, &matrix, tol.max(1e-8));
            emit_json(&ClearMatrixReport {
                rule,
                note: (!prorata).then_some(
                    "the matrix is one optimizer; total_payments and system_loss are the same for every optimizer",
                ),
                matrix: matrix.triples(),
                total_payments: total,
                system_loss: system_loss(&net, &matrix),
                residual: check.residual,
                clears: check.passed,
            })
        }
        Command::Uniqueness { network } => {
            let net = load(&network)?;
            let p_star = dominant_vector_lp(&net)?.p_star;
            let (cs, trace) = analyze_clearing_set(&net, &p_star);
            emit_json(&UniquenessReport {
                unique: cs.is_unique,
                criterion_lemma4: sufficient_uniqueness(&net).unique,
                criterion_theorem2: unique_by_sink_components(&net),
                fixed_nodes: cs.fixed_nodes.iter().copied().collect(),
                free_nodes: cs.free_nodes.clone(),
                stage_trace: trace.stages,
            })
        }
        Command::ClearingSet {
            network,
            samples,
            seed,
            enumerate,
        } => {
            let net = load(&network)?;
            let p_star = dominant_vector_lp(&net)?.p_star;
            let (cs, _) = analyze_clearing_set(&net, &p_star);
            let extremes = free_extreme_vectors(&cs)?;
            let drawn = sample_clearing_vectors(&net, &cs, samples, seed)?;
            let vertices = if enumerate {
                let all = brute_force_clearing_set(&net)?;
                Some(all.vertices.iter().map(|v| v.as_slice().to_vec()).collect())
            } else {
                None
            };
            emit_json(&ClearingSetReport {
                unique: cs.is_unique,
                p_star: p_star.as_slice().to_vec(),
                fixed_nodes: cs.fixed_nodes.iter().copied().collect(),
                free_nodes: cs.free_nodes.clone(),
                free_matrix: rows(&cs.free_matrix),
                free_bounds: cs.free_bounds.as_slice().to_vec(),
                free_extremes: extremes.iter().map(|v| v.as_slice().to_vec()).collect(),
                samples: drawn.iter().map(|v| v.as_slice().to_vec()).collect(),
                vertices,
            })
        }
        Command::Validate { network } => {
            let net = load(&network)?;
            let nominal = clearnet::PaymentMatrix::nominal(&net);
            emit_json(&ValidateReport {
                valid: true,
                n: net.n(),
                arcs: net.arc_count(),
                total_liabilities: net.liabilities().sum(),
                sinks: net.sinks().into_iter().collect(),
                asset_holders: net.asset_holders().into_iter().collect(),
                shocked: net.assets() != net.nominal_assets(),
                nominal_payments_clear: check_clearing_matrix(&net, &nominal, tol).passed,
            })
        }
        Command::Experiment {
            n,
            degrees,
            shocks,
            trials,
            seed,
            p_max,
            beta,
            jobs,
            output,
        } => {
            let cfg = SweepConfig {
                n,
                degrees: parse_grid(&degrees).context("invalid --degrees")?,
                shocks: parse_grid(&shocks)
                    .context("invalid --shocks")?
                    .into_iter()
                    .map(|s: f64| {
                        if s >= 0.0 && s.fract() == 0.0 {
                            Ok(s as usize)
                        } else {
                            bail!("shock sizes must be nonnegative integers, got {s}")
                        }
                    })
                    .collect::<Result<_>>()?,
                trials,
                base_seed: seed,
                p_max,
                beta,
            };
            let sweep = run_sweep(&cfg, Execution::from_jobs(jobs))?;
            let mut csv = Vec::new();
            write_csv(&mut csv, &sweep.cells)?;
            match output {
                Some(path) => {
                    fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
                    let meta = meta_path(&path);
                    let text = serde_json::to_string_pretty(&SweepMeta::new(&cfg))? + "\n";
                    fs::write(&meta, text).with_context(|| format!("writing {}", meta.display()))?;
                }
                None => io::stdout().write_all(&csv)?,
            }
            Ok(())
        }
    }
}

fn method_name(m: VectorMethod) -> &'static str {
    match m {
        VectorMethod::Lp => "lp",
        VectorMethod::Fda => "fictitious-default",
    }
}

fn load(path: &Path) -> Result<FinancialNetwork> {
    FinancialNetwork::read_json(path).with_context(|| format!("reading network {}", path.display()))
}

fn emit_text(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn emit_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    emit_text(&text, None)
}

/// `sweep.csv` → `sweep.meta.json`.
fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.meta.json"))
}

/// Parses `a:b:s`, `a:b` (step 1), `a` or `a,b,c` into an inclusive list.
fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("`{s}` is not a number"))?;
        if !v.is_finite() {
            bail!("`{s}` is not finite");
        }
        Ok(v)
    };
    if grid.contains(',') {
        return grid.split(',').map(num).collect();
    }
    let parts: Vec<&str> = grid.split(':').collect();
    let (start, stop, step) = match parts.as_slice() {
        [a] => return Ok(vec![num(a)?]),
        [a, b] => (num(a)?, num(b)?, 1.0),
        [a, b, s] => (num(a)?, num(b)?, num(s)?),
        _ => bail!("expected start:stop[:step], got `{grid}`"),
    };
    if step <= 0.0 {
        bail!("step must be positive");
    }
    if stop < start {
        bail!("stop {stop} is below start {start}");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
