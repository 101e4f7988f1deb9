//! Reference optimizers for the same problem: gradient descent and simulated
//! annealing on a quadratic-penalty relaxation of the utility budget.
//!
//! Neither handles the gain-ratio constraint, so both insist on `gamma = 0`.
//! Non-negativity is built in: gradient descent works on `θ = s²` and the
//! annealer clips its moves at zero. A final point that overshoots the budget
//! is pulled back along the ray towards zero noise until it fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covmodel::{CovarianceModel, NoiseAllocation};
use crate::error::{Error, Result};
use crate::gauss_info::{info_point, mi_private, utility_loss};
use crate::greedy::{evaluate_point, Baseline, Termination, TraceStep, TradeoffConfig, TradeoffResult, UtilityMetric};
use crate::scalar::Real;

/// Budget overshoot tolerated before a baseline result is flagged.
pub const INFEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams<T> {
    pub lambda: T,
    pub step_size: T,
    pub fd_step: T,
    /// Descent iterations per penalty round.
    pub iters: usize,
    pub lambda_growth: T,
    pub outer_rounds: usize,
    /// Pull an over-budget final point back inside the budget.
    pub project: bool,
}

impl<T: Real> PenaltyParams<T> {
    /// `λ` from 10, ×10 per round, 5 rounds; step and difference sizes scale
    /// with the largest feature variance.
    pub fn for_model(model: &CovarianceModel<T>) -> Self {
        let scale = model.sigma_x().max_diag();
        Self {
            lambda: T::lit(10.0),
            step_size: scale * T::lit(10.0),
            fd_step: scale * T::lit(1e-6),
            iters: 200,
            lambda_growth: T::lit(10.0),
            outer_rounds: 5,
            project: true,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lambda >= T::zero()
            && self.step_size > T::zero()
            && self.fd_step > T::zero()
            && self.iters > 0
            && self.lambda_growth >= T::one()
            && self.outer_rounds >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid penalty parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealParams<T> {
    pub t0: T,
    pub cooling: T,
    pub neighbor_scale: T,
    pub iters: usize,
    pub seed: u64,
    /// Penalty weight on budget overshoot.
    pub lambda: T,
}

impl<T: Real> AnnealParams<T> {
    /// Starts hot at the zero-noise leakage and cools by 0.995 per
    /// iteration. Moves start at ten times the largest feature variance:
    /// near saturation the useful noise levels sit well above the feature
    /// scale, and the schedule shrinks moves fast.
    pub fn for_model(model: &CovarianceModel<T>, iters: usize, seed: u64) -> Result<Self> {
        let t0 = mi_private(model, &NoiseAllocation::zeros(model.n()))?.abs().max(T::lit(1e-12));
        Ok(Self {
            t0,
            cooling: T::lit(0.995),
            neighbor_scale: model.sigma_x().max_diag() * T::lit(10.0),
            iters,
            seed,
            lambda: T::lit(1e4),
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = self.t0 > T::zero()
            && self.cooling > T::zero()
            && self.cooling < T::one()
            && self.neighbor_scale > T::zero()
            && self.iters > 0
            && self.lambda >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid annealing parameters {self:?}")))
        }
    }
}

/// `I(Xp;Y) + λ · max(0, loss − δ)²`.
pub fn penalized_objective<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>, delta: T, lambda: T) -> Result<T> {
    let p = info_point(model, theta)?;
    let over = (p.utility_loss - delta).max(T::zero());
    Ok(p.i_xp_y + lambda * over * over)
}

/// Central differences, switching to a forward difference for components
/// closer than `h` to zero.
pub fn numeric_gradient<T: Real, F>(mut objective: F, theta: &[T], h: T) -> Result<Vec<T>>
where
    F: FnMut(&[T]) -> Result<T>,
{
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    let f0 = if theta.iter().any(|&t| t < h) { Some(objective(theta)?) } else { None };
    for i in 0..theta.len() {
        let x = theta[i];
        let g = if x < h {
            probe[i] = x + h;
            let fp = objective(&probe)?;
            (fp - f0.expect("base value computed")) / h
        } else {
            probe[i] = x + h;
            let fp = objective(&probe)?;
            probe[i] = x - h;
            let fm = objective(&probe)?;
            (fp - fm) / (T::lit(2.0) * h)
        };
        probe[i] = x;
        grad.push(g);
    }
    Ok(grad)
}

fn require_plain_mi<T: Real>(config: &TradeoffConfig<T>, name: &str) -> Result<()> {
    if config.gamma != T::zero() {
        return Err(Error::Capability(format!("{name} cannot enforce the gamma constraint; use gamma = 0")));
    }
    if config.utility_metric != UtilityMetric::MutualInformation {
        return Err(Error::Capability(format!("{name} supports the mutual-information utility metric only")));
    }
    Ok(())
}

/// Largest `t ∈ [0, 1]` (by bisection) with `loss(t θ) <= δ`.
fn pull_inside_budget<T: Real>(model: &CovarianceModel<T>, theta: NoiseAllocation<T>, delta: T) -> Result<NoiseAllocation<T>> {
    if utility_loss(model, &theta)? <= delta {
        return Ok(theta);
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if utility_loss(model, &theta.scaled(mid))? <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(theta.scaled(lo))
}

fn finish<T: Real>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
    theta: NoiseAllocation<T>,
    project: bool,
    iterations: usize,
    trace: Vec<TraceStep<T>>,
) -> Result<TradeoffResult<T>> {
    let theta = if project { pull_inside_budget(model, theta, config.delta)? } else { theta };
    let base = Baseline::new(model)?;
    let (point, fisher) = evaluate_point(model, &theta)?;
    let metric = UtilityMetric::MutualInformation;
    let termination = if point.utility_loss > config.delta + T::lit(INFEASIBILITY_TOLERANCE) {
        Termination::Infeasible
    } else {
        Termination::Completed
    };
    Ok(TradeoffResult {
        cumulative_ratio: base.ratio(metric, &point, fisher),
        theta,
        point,
        fisher,
        utility_metric: metric,
        termination,
        iterations,
        trace,
    })
}

fn trace_step<T: Real>(
    iteration: usize,
    variable: Option<usize>,
    dtheta: T,
    before: &crate::InfoPoint<T>,
    after: crate::InfoPoint<T>,
) -> TraceStep<T> {
    let gain = before.i_xp_y - after.i_xp_y;
    let loss = after.utility_loss - before.utility_loss;
    TraceStep {
        iteration,
        variable,
        dtheta,
        privacy_gain: gain,
        utility_loss_step: loss,
        gain_factor: if loss.abs() < T::lit(crate::greedy::RATIO_FLOOR) { T::infinity() } else { gain / loss },
        point: after,
    }
}

/// Penalty-method gradient descent with numerically approximated gradients.
pub fn gradient_descent<T: Real>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
    params: &PenaltyParams<T>,
) -> Result<TradeoffResult<T>> {
    require_plain_mi(config, "gradient descent")?;
    config.validate()?;
    params.validate()?;
    let n = model.n();
    let delta = config.delta;

    let objective_at = |s: &[T], lambda: T| -> Result<T> {
        let theta = NoiseAllocation::new(s.iter().map(|&v| v * v).collect())?;
        penalized_objective(model, &theta, delta, lambda)
    };

    let mut s = vec![config.dtheta0.sqrt(); n];
    let mut lambda = params.lambda;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut point = info_point(model, &NoiseAllocation::new(s.iter().map(|&v| v * v).collect())?)?;

    for _round in 0..params.outer_rounds {
        for _ in 0..params.iters {
            iterations += 1;
            let theta: Vec<T> = s.iter().map(|&v| v * v).collect();
            let f0 = penalized_objective(model, &NoiseAllocation::new(theta.clone())?, delta, lambda)?;
            let g_theta = numeric_gradient(
                |t: &[T]| penalized_objective(model, &NoiseAllocation::new(t.to_vec())?, delta, lambda),
                &theta,
                params.fd_step,
            )?;
            let g_s: Vec<T> = s.iter().zip(&g_theta).map(|(&si, &gi)| T::lit(2.0) * si * gi).collect();

            let mut step = params.step_size;
            let mut moved = None;
            for _ in 0..=30 {
                let trial: Vec<T> = s.iter().zip(&g_s).map(|(&si, &gi)| si - step * gi).collect();
                if objective_at(&trial, lambda)? < f0 {
                    moved = Some((trial, step));
                    break;
                }
                step *= T::lit(0.5);
            }
            let Some((next, step)) = moved else { break };
            s = next;
            let new_point = info_point(model, &NoiseAllocation::new(s.iter().map(|&v| v * v).collect())?)?;
            trace.push(trace_step(iterations, None, step, &point, new_point));
            point = new_point;
        }
        lambda *= params.lambda_growth;
    }

    let theta = NoiseAllocation::new(s.iter().map(|&v| v * v).collect())?;
    finish(model, config, theta, params.project, iterations, trace)
}

/// Metropolis annealing with geometric cooling; returns the best point seen.
pub fn simulated_annealing<T>(
    model: &CovarianceModel<T>,
    config: &TradeoffConfig<T>,
    params: &AnnealParams<T>,
) -> Result<TradeoffResult<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
{
    require_plain_mi(config, "simulated annealing")?;
    config.validate()?;
    params.validate()?;
    let n = model.n();
    let delta = config.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut theta = NoiseAllocation::zeros(n);
    let mut f = penalized_objective(model, &theta, delta, params.lambda)?;
    let mut point = info_point(model, &theta)?;
    let mut best = (f, theta.clone());
    let mut temperature = params.t0;
    let mut trace = Vec::new();

    for k in 1..=params.iters {
        let i = rng.random_range(0..n);
        let z: T = StandardNormal.sample(&mut rng);
        let width = params.neighbor_scale * temperature / params.t0;
        let mut cand = theta.as_slice().to_vec();
        cand[i] = (cand[i] + z * width).max(T::zero());
        let cand = NoiseAllocation::new(cand)?;
        let fc = penalized_objective(model, &cand, delta, params.lambda)?;
        let diff = fc - f;
        let accept = diff <= T::zero() || {
            let u: f64 = rng.random();
            u < (-(diff / temperature)).as_f64().exp()
        };
        if accept {
            let step = (cand.as_slice()[i] - theta.as_slice()[i]).abs();
            let new_point = info_point(model, &cand)?;
            trace.push(trace_step(k, Some(i), step, &point, new_point));
            point = new_point;
            theta = cand;
            f = fc;
            if f < best.0 {
                best = (f, theta.clone());
            }
        }
        temperature *= params.cooling;
    }

    finish(model, config, best.1, true, params.iters, trace)
}
