//! Parameter sweeps over `delta`, `gamma` and `eps0` for the greedy
//! optimizer and the two baselines, producing one CSV row per run.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{gradient_descent, simulated_annealing, AnnealParams, PenaltyParams};
use crate::error::{Error, Result};
use crate::fisher::fisher_threshold_from_delta;
use crate::gauss_info::mi_utility_zero_noise;
use crate::greedy::{greedy_optimize, UtilityMetric};
use crate::trace::format_sig;
use crate::{Config, Model, Outcome};

pub const CURVE_COLUMNS: [&str; 12] = [
    "algorithm",
    "delta",
    "gamma",
    "eps0",
    "utility_metric",
    "i_xp_y",
    "i_xu_y",
    "utility_loss",
    "cumulative_ratio",
    "iterations",
    "wall_time_seconds",
    "termination",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Greedy,
    GradientDescent,
    SimulatedAnnealing,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::GradientDescent => "gd",
            Algorithm::SimulatedAnnealing => "sa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Algorithm::Greedy),
            "gd" => Ok(Algorithm::GradientDescent),
            "sa" => Ok(Algorithm::SimulatedAnnealing),
            other => Err(Error::Domain(format!("unknown algorithm {other:?} (greedy, gd, sa)"))),
        }
    }
}

/// `points` evenly spaced budgets from 0 to `1.1 · I(Xu;X)`.
pub fn default_delta_grid(model: &Model, points: usize) -> Result<Vec<f64>> {
    let top = 1.1 * mi_utility_zero_noise(model)?;
    Ok(match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect(),
    })
}

/// Fisher threshold equivalent to an MI budget; budgets at or beyond
/// `I(Xu;X)` map to 0, which every allocation satisfies.
pub fn fisher_budget(model: &Model, delta_mi: f64) -> Result<f64> {
    let full = mi_utility_zero_noise(model)?;
    if delta_mi >= full {
        Ok(0.0)
    } else {
        fisher_threshold_from_delta(model, delta_mi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Utility-loss budgets in nats, ascending. Fisher-mode runs convert
    /// each entry with [`fisher_budget`].
    pub delta_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub eps0_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub utility_metric: UtilityMetric,
    pub seeds: Vec<u64>,
    pub dtheta0: Option<f64>,
    pub eps: Option<f64>,
    pub sa_iters: usize,
}

impl SweepSpec {
    pub fn new(delta_grid: Vec<f64>) -> Self {
        Self {
            delta_grid,
            gamma_grid: vec![0.0],
            eps0_grid: vec![1e-6],
            algorithms: vec![Algorithm::Greedy],
            utility_metric: UtilityMetric::MutualInformation,
            seeds: vec![0],
            dtheta0: None,
            eps: None,
            sa_iters: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("delta grid", self.delta_grid.is_empty()),
            ("gamma grid", self.gamma_grid.is_empty()),
            ("eps0 grid", self.eps0_grid.is_empty()),
            ("algorithm list", self.algorithms.is_empty()),
            ("seed list", self.seeds.is_empty()),
        ];
        if let Some((what, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(Error::Domain(format!("{what} is empty")));
        }
        if self.delta_grid.iter().any(|&d| !(d >= 0.0)) || self.delta_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("delta grid must be non-negative and ascending".into()));
        }
        if self.gamma_grid.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::Domain("gamma grid must be non-negative".into()));
        }
        if self.eps0_grid.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Domain("eps0 grid must be positive".into()));
        }
        let baseline = self.algorithms.iter().find(|a| **a != Algorithm::Greedy);
        if let Some(a) = baseline {
            if self.gamma_grid.iter().any(|&g| g != 0.0) {
                return Err(Error::Capability(format!("algorithm {a} requires gamma grid {{0}}")));
            }
            if self.utility_metric != UtilityMetric::MutualInformation {
                return Err(Error::Capability(format!("algorithm {a} supports the mi metric only")));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.algorithms.len() * self.delta_grid.len() * self.gamma_grid.len() * self.eps0_grid.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub utility_metric: UtilityMetric,
    pub seed: u64,
    pub i_xp_y: f64,
    pub i_xu_y: f64,
    pub utility_loss: f64,
    pub cumulative_ratio: f64,
    pub iterations: usize,
    pub wall_time_seconds: f64,
    /// Termination reason, or `error` when the run failed.
    pub termination: String,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    algorithm: Algorithm,
    delta: f64,
    gamma: f64,
    eps0: f64,
    seed: u64,
}

/// Builds the optimizer configuration for one sweep cell.
pub fn cell_config(model: &Model, spec: &SweepSpec, delta: f64, gamma: f64, eps0: f64) -> Result<Config> {
    let budget = match spec.utility_metric {
        UtilityMetric::MutualInformation => delta,
        UtilityMetric::Fisher => fisher_budget(model, delta)?,
    };
    let mut cfg = Config::for_model(model, budget, gamma).with_eps0(eps0).with_metric(spec.utility_metric);
    if let Some(d) = spec.dtheta0 {
        cfg.dtheta0 = d;
        cfg.eps = 1e-6 * d;
    }
    if let Some(e) = spec.eps {
        cfg.eps = e;
    }
    Ok(cfg)
}

/// Runs one optimizer for one configuration.
pub fn run_algorithm(model: &Model, algorithm: Algorithm, cfg: &Config, seed: u64, sa_iters: usize) -> Result<Outcome> {
    match algorithm {
        Algorithm::Greedy => Ok(greedy_optimize(model, cfg)?),
        Algorithm::GradientDescent => gradient_descent(model, cfg, &PenaltyParams::for_model(model)),
        Algorithm::SimulatedAnnealing => {
            simulated_annealing(model, cfg, &AnnealParams::for_model(model, sa_iters, seed)?)
        }
    }
}

fn run_cell(model: &Model, spec: &SweepSpec, cell: Cell) -> CurveRow {
    let start = Instant::now();
    let outcome = cell_config(model, spec, cell.delta, cell.gamma, cell.eps0)
        .and_then(|cfg| run_algorithm(model, cell.algorithm, &cfg, cell.seed, spec.sa_iters));
    let wall = start.elapsed().as_secs_f64();
    let mut row = CurveRow {
        algorithm: cell.algorithm,
        delta: cell.delta,
        gamma: cell.gamma,
        eps0: cell.eps0,
        utility_metric: spec.utility_metric,
        seed: cell.seed,
        i_xp_y: f64::NAN,
        i_xu_y: f64::NAN,
        utility_loss: f64::NAN,
        cumulative_ratio: f64::NAN,
        iterations: 0,
        wall_time_seconds: wall,
        termination: "error".into(),
    };
    if let Ok(r) = outcome {
        row.i_xp_y = r.point.i_xp_y;
        row.i_xu_y = r.point.i_xu_y;
        row.utility_loss = r.point.utility_loss;
        row.cumulative_ratio = r.cumulative_ratio;
        row.iterations = r.iterations;
        row.termination = r.termination.to_string();
    }
    row
}

/// Evaluates every grid cell on up to `jobs` threads. Rows come back sorted
/// by (algorithm, gamma, eps0, delta, seed) regardless of completion order.
pub fn run_sweep(model: &Model, spec: &SweepSpec, jobs: usize) -> Result<Vec<CurveRow>> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.cell_count());
    for &algorithm in &spec.algorithms {
        for &gamma in &spec.gamma_grid {
            for &eps0 in &spec.eps0_grid {
                for &delta in &spec.delta_grid {
                    for &seed in &spec.seeds {
                        cells.push(Cell { algorithm, delta, gamma, eps0, seed });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<CurveRow> = pool.install(|| cells.par_iter().map(|&c| run_cell(model, spec, c)).collect());
    rows.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.gamma.total_cmp(&b.gamma))
            .then(a.eps0.total_cmp(&b.eps0))
            .then(a.delta.total_cmp(&b.delta))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

/// Writes the curve CSV. With `with_timing = false` the wall-time column is
/// written as 0 so repeated runs are byte-identical.
pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow], with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            format_sig(r.delta),
            format_sig(r.gamma),
            format_sig(r.eps0),
            r.utility_metric.to_string(),
            format_sig(r.i_xp_y),
            format_sig(r.i_xu_y),
            format_sig(r.utility_loss),
            format_sig(r.cumulative_ratio),
            r.iterations.to_string(),
            format_sig(if with_timing { r.wall_time_seconds } else { 0.0 }),
            r.termination.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    #[test]
    fn grid_spans_past_full_utility() {
        let m = datasets::dataset1();
        let g = default_delta_grid(&m, 25).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 0.0);
        assert!((g[24] - 1.1 * 1.0646509844179828).abs() < 1e-12);
    }

    #[test]
    fn baselines_reject_gamma_grid() {
        let mut spec = SweepSpec::new(vec![0.1]);
        spec.algorithms = vec![Algorithm::Greedy, Algorithm::GradientDescent];
        spec.gamma_grid = vec![0.0, 0.5];
        assert!(matches!(spec.validate(), Err(Error::Capability(_))));
    }

    #[test]
    fn rows_complete_and_sorted() {
        let m = datasets::dataset1();
        let mut spec = SweepSpec::new(vec![0.0, 0.3, 0.6]);
        spec.gamma_grid = vec![2.0, 0.0];
        spec.eps0_grid = vec![1e-2, 1e-6];
        spec.seeds = vec![1, 2];
        let rows = run_sweep(&m, &spec, 3).unwrap();
        assert_eq!(rows.len(), spec.cell_count());
        assert_eq!(rows.len(), 24);
        assert_eq!(rows[0].gamma, 0.0);
        assert_eq!(rows[0].eps0, 1e-6);
        assert!(rows.iter().all(|r| r.termination != "error"));
    }

    #[test]
    fn failed_cells_still_emit_rows() {
        let m = datasets::dataset1();
        let mut spec = SweepSpec::new(vec![0.1]);
        spec.dtheta0 = Some(1.0);
        spec.eps = Some(2.0); // eps > dtheta0 makes every config invalid
        let rows = run_sweep(&m, &spec, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].termination, "error");
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows, false).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",nan,"));
    }

    #[test]
    fn fisher_budget_saturates_at_zero() {
        let m = datasets::dataset1();
        assert_eq!(fisher_budget(&m, 5.0).unwrap(), 0.0);
        assert!((fisher_budget(&m, 0.0).unwrap() - 3.278316381304894).abs() < 1e-9);
    }
}
