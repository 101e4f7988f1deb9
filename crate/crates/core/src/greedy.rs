//! Greedy noise allocation.
//!
//! Each iteration scores every disclosed feature by the privacy gained per
//! unit of utility lost when a small noise increment `Δθ` is added to it,
//! tentatively adds `Δθ` to the best one, and commits only if the cumulative
//! utility budget (`delta`) and the cumulative gain-to-loss ratio (`gamma`)
//! both still hold. A rejected step halves `Δθ`. The run ends when `Δθ`
//! drops below `eps`, when every feature is saturated (gain below `eps0`),
//! or at the iteration cap.
//!
//! Candidate scoring uses rank-one determinant updates: adding `d` to
//! diagonal entry `i` of `Σ` changes `ln|Σ|` by `ln(1 + d (Σ⁻¹)_ii)`, so one
//! inverse per matrix scores all `n` candidates.

use std::fmt;

use crate::covmodel::{check_theta, noisy_covariances, CovarianceModel, NoiseAllocation};
use crate::error::{Error, Result};
use crate::fisher::fisher_scalar;
use crate::gauss_info::{self, info_point, InfoPoint};
use crate::linalg::spd_inverse;
use crate::scalar::Real;

/// Cumulative utility losses below this count as zero when forming ratios.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Slack allowed by [`verify_result`].
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityMetric {
    MutualInformation,
    /// Requires exactly one utility feature. `delta` is then the minimum
    /// Fisher information to retain and `gamma` is in privacy nats per unit
    /// of Fisher information.
    Fisher,
}

impl UtilityMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            UtilityMetric::MutualInformation => "mi",
            UtilityMetric::Fisher => "fisher",
        }
    }
}

impl fmt::Display for UtilityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffConfig<T> {
    /// MI mode: largest admissible end utility loss in nats.
    /// Fisher mode: smallest admissible end Fisher information.
    pub delta: T,
    /// Smallest admissible end privacy gain per unit of end utility loss.
    pub gamma: T,
    pub dtheta0: T,
    pub eps: T,
    pub eps0: T,
    pub utility_metric: UtilityMetric,
    pub max_iters: usize,
}

impl<T: Real> TradeoffConfig<T> {
    /// Scale-aware defaults: `Δθ₀` is a tenth of the largest feature
    /// variance, `ε = 10⁻⁶ Δθ₀`, `ε₀ = 10⁻⁶`.
    pub fn for_model(model: &CovarianceModel<T>, delta: T, gamma: T) -> Self {
        let dtheta0 = model.sigma_x().max_diag() / T::lit(10.0);
        Self {
            delta,
            gamma,
            dtheta0,
            eps: dtheta0 * T::lit(1e-6),
            eps0: T::lit(1e-6),
            utility_metric: UtilityMetric::MutualInformation,
            max_iters: 1_000_000,
        }
    }

    pub fn with_metric(mut self, metric: UtilityMetric) -> Self {
        self.utility_metric = metric;
        self
    }

    pub fn with_eps0(mut self, eps0: T) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("invalid configuration: {what}")));
        if !(self.eps > T::zero()) {
            return bad("eps must be > 0");
        }
        if !(self.dtheta0 > self.eps) {
            return bad("dtheta0 must exceed eps");
        }
        if !(self.eps0 > T::zero()) {
            return bad("eps0 must be > 0");
        }
        if !(self.delta >= T::zero()) {
            return bad("delta must be >= 0");
        }
        if !(self.gamma >= T::zero()) {
            return bad("gamma must be >= 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    DeltaThetaBelowEps,
    TotalSaturation,
    MaxIters,
    /// A baseline optimizer ran its full schedule.
    Completed,
    /// A baseline ended outside the utility budget.
    Infeasible,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::DeltaThetaBelowEps => "delta_theta_below_eps",
            Termination::TotalSaturation => "total_saturation",
            Termination::MaxIters => "max_iters",
            Termination::Completed => "completed",
            Termination::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One committed step of an optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep<T> {
    pub iteration: usize,
    /// Feature that received noise; `None` for full-vector moves.
    pub variable: Option<usize>,
    pub dtheta: T,
    pub privacy_gain: T,
    pub utility_loss_step: T,
    pub gain_factor: T,
    pub point: InfoPoint<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffResult<T> {
    pub theta: NoiseAllocation<T>,
    pub point: InfoPoint<T>,
    /// Fisher information at `theta` when the model has one utility feature.
    pub fisher: Option<T>,
    pub utility_metric: UtilityMetric,
    pub cumulative_ratio: T,
    pub termination: Termination,
    pub iterations: usize,
    pub trace: Vec<TraceStep<T>>,
}

/// An optimizer failure together with the steps committed before it.
#[derive(Debug)]
pub struct OptimizeError<T> {
    pub error: Error,
    pub partial_trace: Vec<TraceStep<T>>,
}

impl<T> fmt::Display for OptimizeError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} committed steps)", self.error, self.partial_trace.len())
    }
}

impl<T: fmt::Debug> std::error::Error for OptimizeError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl<T> From<OptimizeError<T>> for Error {
    fn from(e: OptimizeError<T>) -> Self {
        e.error
    }
}

/// Score of adding `Δθ` to one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEval<T> {
    pub privacy_gain: T,
    pub utility_loss_step: T,
    /// `-1` when saturated, `+∞` when the step costs no utility.
    pub gain_factor: T,
}

fn gain_factor<T: Real>(gain: T, loss: T, eps0: T) -> T {
    if gain < eps0 {
        -T::one()
    } else if loss < T::lit(RATIO_FLOOR) {
        T::infinity()
    } else {
        gain / loss
    }
}

/// Scores every feature for a noise increment of `dtheta` at `theta`.
pub fn step_evaluation<T: Real>(
    model: &CovarianceModel<T>,
    theta: &NoiseAllocation<T>,
    dtheta: T,
    eps0: T,
    utility_metric: UtilityMetric,
) -> Result<Vec<StepEval<T>>> {
    if !(dtheta > T::zero()) {
        return Err(Error::Domain(format!("noise increment must be positive, got {dtheta}")));
    }
    if utility_metric == UtilityMetric::Fisher {
        model.sigma2_xu()?;
    }
    let c = noisy_covariances(model, theta)?;
    let s = spd_inverse(&c.sigma_y)?;
    let p = spd_inverse(&c.sigma_y_xp)?;
    let u = spd_inverse(&c.sigma_y_xu)?;
    let n = model.n();
    let half = T::lit(0.5);
    let evals = (0..n)
        .map(|i| {
            let dy = (dtheta * s[(i, i)]).ln_1p();
            let gain = half * ((dtheta * p[(i, i)]).ln_1p() - dy);
            let loss = match utility_metric {
                UtilityMetric::MutualInformation => half * ((dtheta * u[(i, i)]).ln_1p() - dy),
                // Sherman-Morrison on the trailing precision entry
                UtilityMetric::Fisher => {
                    let w = u[(i, n)];
                    dtheta * w * w / (T::one() + dtheta * u[(i, i)])
                }
            };
            StepEval { privacy_gain: gain, utility_loss_step: loss, gain_factor: gain_factor(gain, loss, eps0) }
        })
        .collect();
    Ok(evals)
}

/// Index of the largest gain factor; ties go to the lowest index.
fn select<T: Real>(evals: &[StepEval<T>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        match best {
            Some(b) if !(e.gain_factor > evals[b].gain_factor) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Privacy and utility reference values at zero noise.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Baseline<T> {
    pub i_xp_x: T,
    pub fisher0: Option<T>,
}

impl<T: Real> Baseline<T> {
    pub fn new(model: &CovarianceModel<T>) -> Result<Self> {
        let zero = NoiseAllocation::zeros(model.n());
        Ok(Self {
            i_xp_x: gauss_info::mi_private(model, &zero)?,
            fisher0: if model.n_u() == 1 { Some(fisher_scalar(model, &zero)?) } else { None },
        })
    }

    /// End utility loss in the units of `metric`.
    pub fn cumulative_loss(&self, metric: UtilityMetric, point: &InfoPoint<T>, fisher: Option<T>) -> T {
        match (metric, self.fisher0, fisher) {
            (UtilityMetric::Fisher, Some(f0), Some(f)) => f0 - f,
            _ => point.utility_loss,
        }
    }

    pub fn ratio(&self, metric: UtilityMetric, point: &InfoPoint<T>, fisher: Option<T>) -> T {
        let loss = self.cumulative_loss(metric, point, fisher);
        if loss < T::lit(RATIO_FLOOR) {
            T::infinity()
        } else {
            (self.i_xp_x - point.i_xp_y) / loss
        }
    }
}

/// Checks the utility budget in the units of `metric`.
pub(crate) fn within_budget<T: Real>(metric: UtilityMetric, delta: T, point: &InfoPoint<T>, fisher: Option<T>) -> bool {
    match (metric, fisher) {
        (UtilityMetric::Fisher, Some(f)) => f >= delta,
        _ => point.utility_loss <= delta,
    }
}

pub(crate) fn evaluate_point<T: Real>(
    model: &CovarianceModel<T>,
    theta: &NoiseAllocation<T>,
) -> Result<(InfoPoint<T>, Option<T>)> {
    let point = info_point(model, theta)?;
    let fisher = if model.n_u() == 1 { Some(fisher_scalar(model, theta)?) } else { None };
    Ok((point, fisher))
}

pub fn greedy_optimize<T: Real>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
) -> Result<TradeoffResult<T>, OptimizeError<T>> {
    let mut trace = Vec::new();
    match run_greedy(model, config, &mut trace) {
        Ok(r) => Ok(r),
        Err(error) => Err(OptimizeError { error, partial_trace: trace }),
    }
}

fn run_greedy<T: Real>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
    trace: &mut Vec<TraceStep<T>>,
) -> Result<TradeoffResult<T>> {
    config.validate()?;
    let metric = config.utility_metric;
    if metric == UtilityMetric::Fisher {
        model.sigma2_xu()?;
    }
    let base = Baseline::new(model)?;
    let mut theta = NoiseAllocation::zeros(model.n());
    let (mut point, mut fisher) = evaluate_point(model, &theta)?;
    let mut dtheta = config.dtheta0;
    let mut iterations = 0;

    let termination = loop {
        if dtheta < config.eps {
            break Termination::DeltaThetaBelowEps;
        }
        if iterations >= config.max_iters {
            break Termination::MaxIters;
        }
        iterations += 1;

        let evals = step_evaluation(model, &theta, dtheta, config.eps0, metric)?;
        let j = match select(&evals) {
            Some(j) if evals[j].gain_factor > T::zero() => j,
            _ => break Termination::TotalSaturation,
        };

        let candidate = theta.incremented(j, dtheta);
        let (cand_point, cand_fisher) = evaluate_point(model, &candidate)?;
        let delta_ok = within_budget(metric, config.delta, &cand_point, cand_fisher);
        let gamma_ok = base.ratio(metric, &cand_point, cand_fisher) >= config.gamma;
        if delta_ok && gamma_ok {
            theta = candidate;
            point = cand_point;
            fisher = cand_fisher;
            trace.push(TraceStep {
                iteration: iterations,
                variable: Some(j),
                dtheta,
                privacy_gain: evals[j].privacy_gain,
                utility_loss_step: evals[j].utility_loss_step,
                gain_factor: evals[j].gain_factor,
                point,
            });
        } else {
            dtheta *= T::lit(0.5);
        }
    };

    Ok(TradeoffResult {
        cumulative_ratio: base.ratio(metric, &point, fisher),
        theta,
        point,
        fisher,
        utility_metric: metric,
        termination,
        iterations,
        trace: std::mem::take(trace),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub passed: bool,
    /// Positive when satisfied with room to spare; NaN if not computable.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub utility_budget: ConstraintCheck,
    pub ratio: ConstraintCheck,
    pub nonnegative: ConstraintCheck,
}

impl ConstraintReport {
    pub fn all_passed(&self) -> bool {
        self.utility_budget.passed && self.ratio.passed && self.nonnegative.passed
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, name: &str, c: &ConstraintCheck| {
            writeln!(f, "  {name:<16} {}  slack {:e}", if c.passed { "pass" } else { "FAIL" }, c.slack)
        };
        line(f, "utility budget", &self.utility_budget)?;
        line(f, "gain ratio", &self.ratio)?;
        line(f, "non-negativity", &self.nonnegative)
    }
}

/// Recomputes every constraint from the result's `theta` alone.
pub fn verify_result<T: Real>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
    result: &TradeoffResult<T>,
) -> ConstraintReport {
    let theta = &result.theta;
    let min_theta = theta.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let nonnegative = ConstraintCheck {
        passed: theta.len() == model.n() && min_theta >= 0.0,
        slack: if theta.is_empty() { 0.0 } else { min_theta },
    };
    let failed = ConstraintCheck { passed: false, slack: f64::NAN };

    let recomputed = check_theta(model, theta)
        .and_then(|_| Baseline::new(model))
        .and_then(|b| evaluate_point(model, theta).map(|(p, f)| (b, p, f)));
    let (utility_budget, ratio) = match recomputed {
        Ok((base, point, fisher)) => {
            let metric = result.utility_metric;
            let tol = VERIFY_TOLERANCE;
            let budget_slack = match (metric, fisher) {
                (UtilityMetric::Fisher, Some(f)) => (f - config.delta).as_f64(),
                (UtilityMetric::Fisher, None) => f64::NAN,
                _ => (config.delta - point.utility_loss).as_f64(),
            };
            let r = base.ratio(metric, &point, fisher);
            let ratio_slack = if r.is_infinite() { f64::INFINITY } else { (r - config.gamma).as_f64() };
            (
                ConstraintCheck { passed: budget_slack >= -tol, slack: budget_slack },
                ConstraintCheck { passed: ratio_slack >= -tol || theta.is_zero(), slack: ratio_slack },
            )
        }
        Err(_) => (failed, failed),
    };
    ConstraintReport { utility_budget, ratio, nonnegative }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::gauss_info::mi_private;
    use crate::linalg::Matrix;

    fn config(model: &CovarianceModel<f64>, delta: f64, gamma: f64) -> TradeoffConfig<f64> {
        TradeoffConfig::for_model(model, delta, gamma)
    }

    #[test]
    fn config_validation() {
        let m = datasets::dataset1();
        let mut c = config(&m, 0.5, 0.0);
        assert!(c.validate().is_ok());
        c.eps = c.dtheta0 * 2.0;
        assert!(c.validate().is_err());
        let mut c = config(&m, -0.1, 0.0);
        assert!(c.validate().is_err());
        c.delta = 0.1;
        c.max_iters = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rank_one_scores_match_direct_recomputation() {
        let m = datasets::dataset2();
        let theta = NoiseAllocation::new(vec![1.0, 0.0, 3.0, 0.5, 0.01, 2.0]).unwrap();
        let d = 0.75;
        let evals = step_evaluation(&m, &theta, d, 1e-6, UtilityMetric::MutualInformation).unwrap();
        let fevals = step_evaluation(&m, &theta, d, 1e-6, UtilityMetric::Fisher).unwrap();
        let base = info_point(&m, &theta).unwrap();
        let f_base = fisher_scalar(&m, &theta).unwrap();
        for i in 0..m.n() {
            let next = theta.incremented(i, d);
            let p = info_point(&m, &next).unwrap();
            assert!((evals[i].privacy_gain - (base.i_xp_y - p.i_xp_y)).abs() < 1e-12);
            assert!((evals[i].utility_loss_step - (base.i_xu_y - p.i_xu_y)).abs() < 1e-12);
            let df = f_base - fisher_scalar(&m, &next).unwrap();
            assert!((fevals[i].utility_loss_step - df).abs() < 1e-10 * f_base);
        }
    }

    #[test]
    fn dataset_one_first_step_factors_are_finite_positive() {
        let m = datasets::dataset1();
        let e = step_evaluation(&m, &NoiseAllocation::zeros(2), 1.0, 1e-6, UtilityMetric::MutualInformation).unwrap();
        assert_eq!(e.len(), 2);
        for s in &e {
            assert!(s.gain_factor.is_finite() && s.gain_factor > 0.0);
        }
        // hand-derived from four determinant evaluations
        assert!((e[0].gain_factor - 0.8774214098371104).abs() < 1e-9);
        assert!((e[1].gain_factor - 6.397049249424147).abs() < 1e-9);
    }

    fn block_model(private_link: f64, utility_link: f64) -> CovarianceModel<f64> {
        // x1 links to Xp only; x2 links to Xu only
        let sx = Matrix::identity(2);
        let sxp = Matrix::from_rows(&[[1.0, 0.0, private_link], [0.0, 1.0, 0.0], [private_link, 0.0, 1.0]]).unwrap();
        let sxu = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, utility_link], [0.0, utility_link, 1.0]]).unwrap();
        CovarianceModel::new(2, 1, 1, sx, sxp, sxu).unwrap()
    }

    #[test]
    fn independent_private_block_saturates_everything() {
        let m = block_model(0.0, 0.5);
        let e = step_evaluation(&m, &NoiseAllocation::zeros(2), 0.5, 1e-6, UtilityMetric::MutualInformation).unwrap();
        assert!(e.iter().all(|s| s.gain_factor == -1.0));
        let r = greedy_optimize(&m, &config(&m, 1.0, 0.0)).unwrap();
        assert_eq!(r.termination, Termination::TotalSaturation);
        assert!(r.theta.is_zero());
    }

    #[test]
    fn free_privacy_gain_is_infinite_factor() {
        let m = block_model(0.6, 0.5);
        let e = step_evaluation(&m, &NoiseAllocation::zeros(2), 0.5, 1e-6, UtilityMetric::MutualInformation).unwrap();
        assert_eq!(e[0].gain_factor, f64::INFINITY);
        assert_eq!(e[0].utility_loss_step, 0.0);
        assert_eq!(e[1].gain_factor, -1.0);
    }

    #[test]
    fn selection_prefers_lowest_index_on_ties() {
        let e = |g| StepEval { privacy_gain: 1.0, utility_loss_step: 1.0, gain_factor: g };
        assert_eq!(select(&[e(1.0), e(2.0), e(2.0)]), Some(1));
        assert_eq!(select(&[e(f64::INFINITY), e(f64::INFINITY)]), Some(0));
        assert_eq!(select(&[e(-1.0), e(-1.0)]), Some(0));
    }

    #[test]
    fn zero_budget_means_no_noise() {
        let m = datasets::dataset1();
        let r = greedy_optimize(&m, &config(&m, 0.0, 0.0)).unwrap();
        assert!(r.theta.is_zero());
        assert!((r.point.i_xp_y - 2.1877462047149216).abs() < 1e-9);
        assert!(verify_result(&m, &config(&m, 0.0, 0.0), &r).all_passed());
    }

    #[test]
    fn generous_budget_reduces_leakage() {
        let m = datasets::dataset1();
        let cfg = config(&m, 1.1, 0.0);
        let r = greedy_optimize(&m, &cfg).unwrap();
        assert!(r.point.i_xp_y < 2.18);
        assert!(r.point.utility_loss <= 1.1);
        assert!(verify_result(&m, &cfg, &r).all_passed());
        // leakage strictly decreasing, loss non-decreasing along the trace
        for w in r.trace.windows(2) {
            assert!(w[1].point.i_xp_y < w[0].point.i_xp_y);
            assert!(w[1].point.utility_loss >= w[0].point.utility_loss);
        }
    }

    #[test]
    fn unattainable_ratio_blocks_all_noise() {
        let m = datasets::dataset1();
        let r = greedy_optimize(&m, &config(&m, 1.0, 1e9)).unwrap();
        assert!(r.theta.is_zero());
    }

    #[test]
    fn result_matches_direct_leakage() {
        let m = datasets::dataset1();
        let r = greedy_optimize(&m, &config(&m, 0.4, 0.0)).unwrap();
        assert!((mi_private(&m, &r.theta).unwrap() - r.point.i_xp_y).abs() < 1e-15);
    }

    #[test]
    fn verify_flags_mutations() {
        let m = datasets::dataset1();
        let cfg = config(&m, 0.3, 0.0);
        let r = greedy_optimize(&m, &cfg).unwrap();
        let mut neg = r.clone();
        neg.theta = NoiseAllocation::new_unchecked(vec![-1.0, 5.0]);
        let rep = verify_result(&m, &cfg, &neg);
        assert!(!rep.nonnegative.passed);
        let mut over = r.clone();
        over.theta = NoiseAllocation::new(vec![1e6, 1e6]).unwrap();
        let rep = verify_result(&m, &cfg, &over);
        assert!(!rep.utility_budget.passed);
        assert!(rep.utility_budget.slack < 0.0);
    }

    #[test]
    fn fisher_mode_requires_single_utility_feature() {
        let sx = Matrix::identity(1);
        let sxp = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]).unwrap();
        let sxu = Matrix::from_rows(&[[1.0, 0.2, 0.1], [0.2, 1.0, 0.0], [0.1, 0.0, 1.0]]).unwrap();
        let m = CovarianceModel::new(1, 1, 2, sx, sxp, sxu).unwrap();
        let cfg = config(&m, 0.1, 0.0).with_metric(UtilityMetric::Fisher);
        let err = greedy_optimize(&m, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Shape(_)));
        assert!(err.partial_trace.is_empty());
        // MI mode is fine with two utility features
        assert!(greedy_optimize(&m, &config(&m, 0.1, 0.0)).is_ok());
    }
}
