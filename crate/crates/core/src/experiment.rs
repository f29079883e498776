//! Monte-Carlo sweeps comparing pro-rata clearing with optimal clearing
//! matrices on shocked random networks.
//!
//! Trial `t` of a cell with degree `d` draws its network from
//! `derive_seed(base, [d, t, 0])` and its shock permutation from
//! `derive_seed(base, [d, t, 1])`. Cells that differ only in shock size
//! therefore see the same networks and nested shocked sets.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::clearing_matrix::{optimal_matrix_lp, system_loss};
use crate::clearing_vector::dominant_vector_lp;
use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::model::{check_clearing_matrix, defaults, FinancialNetwork, EPS};
use crate::simgen::{apply_shock, derive_seed, generate, GeneratorConfig, ShockConfig, RNG_NAME};

/// Residual both clearing solutions must meet for a trial to count.
pub const TRIAL_RESIDUAL_TOL: f64 = 1e-8;

/// Slack allowed in `l_nopr ≤ l_pr`.
pub const LOSS_ORDER_TOL: f64 = 1e-7;

/// Largest fraction of failed trials a cell tolerates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

pub const CSV_HEADER: [&str; 7] = [
    "d",
    "n_s",
    "mean_G",
    "se_G",
    "mean_defaults_pr",
    "mean_defaults_nopr",
    "trials",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub avg_degree: f64,
    pub n_s: usize,
    pub trial: usize,
    pub l_pr: f64,
    pub l_nopr: f64,
    pub gain: f64,
    pub defaults_pr: usize,
    pub defaults_nopr: usize,
    /// Seed of the generated network.
    pub seed: u64,
}

/// Relative loss reduction; zero when there is no pro-rata loss.
pub fn gain(l_pr: f64, l_nopr: f64) -> f64 {
    if l_pr <= EPS {
        0.0
    } else {
        ((l_pr - l_nopr) / l_pr).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellConfig {
    pub n: usize,
    pub avg_degree: f64,
    pub p_max: f64,
    pub beta: f64,
    pub n_s: usize,
    pub trials: usize,
    pub base_seed: u64,
}

impl CellConfig {
    pub fn generator(&self, trial: usize) -> GeneratorConfig {
        GeneratorConfig {
            n: self.n,
            avg_degree: self.avg_degree,
            p_max: self.p_max,
            beta: self.beta,
            seed: derive_seed(self.base_seed, &[self.avg_degree.to_bits(), trial as u64, 0]),
        }
    }

    pub fn shock(&self, trial: usize) -> ShockConfig {
        ShockConfig {
            n_s: self.n_s,
            seed: derive_seed(self.base_seed, &[self.avg_degree.to_bits(), trial as u64, 1]),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_s > self.n {
            return Err(Error::Config(format!(
                "shock size {} exceeds network size {}",
                self.n_s, self.n
            )));
        }
        self.generator(0).validate()
    }
}

/// One trial on an already shocked network.
pub fn evaluate_trial(net: &FinancialNetwork) -> Result<(f64, f64, usize, usize)> {
    let pbar = net.total_out();
    let rel = net.relative_liabilities();
    let p_star = dominant_vector_lp(net)?.p_star;
    let residual = rel.clearing_residual(net.assets(), &p_star);
    if residual > TRIAL_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "dominant vector residual {residual:e}"
        )));
    }
    let opt = optimal_matrix_lp(net)?;
    let report = check_clearing_matrix(net, &opt.matrix, TRIAL_RESIDUAL_TOL);
    if !report.passed {
        return Err(Error::Numerical(format!(
            "optimal matrix residual {:e}, bound violation {:e}",
            report.residual, report.bound_violation
        )));
    }
    let l_pr = (&pbar - &p_star).sum();
    let l_nopr = system_loss(net, &opt.matrix);
    if l_nopr > l_pr + LOSS_ORDER_TOL {
        return Err(Error::Numerical(format!(
            "optimal-matrix loss {l_nopr} exceeds pro-rata loss {l_pr}"
        )));
    }
    let outflow: DVector<f64> = opt.matrix.outflow();
    Ok((
        l_pr,
        l_nopr,
        defaults(&pbar, &p_star, EPS).len(),
        defaults(&pbar, &outflow, EPS).len(),
    ))
}

pub fn run_trial(cell: &CellConfig, trial: usize) -> Result<ExperimentRecord> {
    let gen = cell.generator(trial);
    let net = apply_shock(&generate(&gen)?, &cell.shock(trial))?;
    let (l_pr, l_nopr, defaults_pr, defaults_nopr) = evaluate_trial(&net)?;
    Ok(ExperimentRecord {
        avg_degree: cell.avg_degree,
        n_s: cell.n_s,
        trial,
        l_pr,
        l_nopr,
        gain: gain(l_pr, l_nopr),
        defaults_pr,
        defaults_nopr,
        seed: gen.seed,
    })
}

/// Records of a cell's successful trials, in trial order.
pub fn run_cell(cell: &CellConfig, exec: Execution) -> Result<Vec<ExperimentRecord>> {
    cell.validate()?;
    collect_cell(cell.trials, exec.map(cell.trials, |t| run_trial(cell, t)))
}

fn collect_cell(trials: usize, results: Vec<Result<ExperimentRecord>>) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::with_capacity(results.len());
    let mut failed = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * trials as f64 {
        return Err(Error::TooManyFailures {
            failed,
            trials,
            first: first.unwrap_or_default(),
        });
    }
    Ok(records)
}

/// Aggregates of one `(d, n_s)` cell; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: f64,
    pub n_s: usize,
    pub mean_g: f64,
    pub se_g: f64,
    pub mean_defaults_pr: f64,
    pub mean_defaults_nopr: f64,
    /// Successful trials.
    pub trials: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let sd = (pairwise_sum(&sq) / (k - 1) as f64).sqrt();
    (mean, sd / (k as f64).sqrt())
}

pub fn summarize(d: f64, n_s: usize, records: &[ExperimentRecord]) -> CellSummary {
    let gains: Vec<f64> = records.iter().map(|r| r.gain).collect();
    let pr: Vec<f64> = records.iter().map(|r| r.defaults_pr as f64).collect();
    let nopr: Vec<f64> = records.iter().map(|r| r.defaults_nopr as f64).collect();
    let (mean_g, se_g) = mean_and_se(&gains);
    CellSummary {
        d,
        n_s,
        mean_g,
        se_g,
        mean_defaults_pr: mean_and_se(&pr).0,
        mean_defaults_nopr: mean_and_se(&nopr).0,
        trials: records.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n: usize,
    pub degrees: Vec<f64>,
    pub shocks: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub p_max: f64,
    pub beta: f64,
}

impl SweepConfig {
    pub fn cells(&self) -> Vec<CellConfig> {
        self.degrees
            .iter()
            .flat_map(|&d| {
                self.shocks.iter().map(move |&n_s| CellConfig {
                    n: self.n,
                    avg_degree: d,
                    p_max: self.p_max,
                    beta: self.beta,
                    n_s,
                    trials: self.trials,
                    base_seed: self.base_seed,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
    /// Per-cell records, aligned with `cells`.
    pub records: Vec<Vec<ExperimentRecord>>,
}

/// Runs the full `degrees × shocks` grid. Every trial of every cell is an
/// independent work item; results are regrouped in grid order.
pub fn run_sweep(cfg: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    if cfg.degrees.is_empty() || cfg.shocks.is_empty() {
        return Err(Error::Config("degree and shock grids must be nonempty".into()));
    }
    let cells = cfg.cells();
    for c in &cells {
        c.validate()?;
    }
    let per = cfg.trials;
    let mut flat = exec.map(cells.len() * per, |k| run_trial(&cells[k / per], k % per)).into_iter();
    let mut summaries = Vec::with_capacity(cells.len());
    let mut records = Vec::with_capacity(cells.len());
    for c in &cells {
        let recs = collect_cell(per, flat.by_ref().take(per).collect())?;
        summaries.push(summarize(c.avg_degree, c.n_s, &recs));
        records.push(recs);
    }
    Ok(SweepResult {
        cells: summaries,
        records,
    })
}

/// Writes the summary table as CSV with the fixed header.
pub fn write_csv<W: Write>(out: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in cells {
        w.write_record([
            c.d.to_string(),
            c.n_s.to_string(),
            c.mean_g.to_string(),
            c.se_g.to_string(),
            c.mean_defaults_pr.to_string(),
            c.mean_defaults_nopr.to_string(),
            c.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Companion metadata of a sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMeta<'a> {
    pub config: &'a SweepConfig,
    pub rng: &'static str,
    pub seed_derivation: &'static str,
    pub software: &'static str,
    pub version: &'static str,
}

impl<'a> SweepMeta<'a> {
    pub fn new(config: &'a SweepConfig) -> Self {
        Self {
            config,
            rng: RNG_NAME,
            seed_derivation: "network: derive_seed(base_seed, [d as f64 bits, trial, 0]); \
                              shock: derive_seed(base_seed, [d as f64 bits, trial, 1])",
            software: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}
