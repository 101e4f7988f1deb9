//! Differential entropies and mutual information of Gaussian vectors, all in
//! nats, computed from Cholesky log-determinants.

use std::f64::consts::{E, PI};

use crate::covmodel::{noisy_covariances, CovarianceModel, NoiseAllocation};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Round-off band below zero that is still reported as zero information.
pub const MI_NEGATIVE_TOLERANCE: f64 = 1e-9;

pub use linalg::log_det;

/// `½ (k ln(2πe) + ln|Σ|)`.
pub fn gaussian_entropy<T: Real>(cov: &Matrix<T>) -> Result<T> {
    let k = T::from_usize_lossy(cov.rows());
    Ok(T::lit(0.5) * (k * T::lit((2.0 * PI * E).ln()) + log_det(cov)?))
}

/// Maps `[-tol, 0)` to zero and rejects anything more negative.
pub(crate) fn clamp_nonneg<T: Real>(quantity: &'static str, v: T) -> Result<T> {
    if v >= T::zero() {
        Ok(v)
    } else if v >= -T::lit(MI_NEGATIVE_TOLERANCE) {
        Ok(T::zero())
    } else {
        Err(Error::NumericalConsistency { quantity, value: v.as_f64() })
    }
}

/// `½ (ln|Σ_A| + ln|Σ_Y| − ln|Σ_{Y∪A}|)`.
fn mi_from_log_dets<T: Real>(ld_a: T, ld_y: T, ld_joint: T) -> T {
    T::lit(0.5) * (ld_a + ld_y - ld_joint)
}

/// `I(Xp; Y)` for the release `Y = X + N`.
pub fn mi_private<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<T> {
    let c = noisy_covariances(model, theta)?;
    let v = mi_from_log_dets(log_det(&model.sigma_xp())?, log_det(&c.sigma_y)?, log_det(&c.sigma_y_xp)?);
    clamp_nonneg("I(Xp;Y)", v)
}

/// `I(Xu; Y)`.
pub fn mi_utility<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<T> {
    let c = noisy_covariances(model, theta)?;
    let v = mi_from_log_dets(log_det(&model.sigma_xu())?, log_det(&c.sigma_y)?, log_det(&c.sigma_y_xu)?);
    clamp_nonneg("I(Xu;Y)", v)
}

/// `I(Xp; X)`, the leakage with no noise at all.
pub fn mi_private_zero_noise<T: Real>(model: &CovarianceModel<T>) -> Result<T> {
    mi_private(model, &NoiseAllocation::zeros(model.n()))
}

/// `I(Xu; X)`, the largest utility loss any allocation can cause.
pub fn mi_utility_zero_noise<T: Real>(model: &CovarianceModel<T>) -> Result<T> {
    mi_utility(model, &NoiseAllocation::zeros(model.n()))
}

/// `I(Xu;X) − I(Xu;Y) = ½ (ln|Σ_X| − ln|Σ_{X∪Xu}| − ln|Σ_Y| + ln|Σ_{Y∪Xu}|)`.
pub fn utility_loss<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<T> {
    let c = noisy_covariances(model, theta)?;
    let v = T::lit(0.5)
        * (log_det(model.sigma_x())? - log_det(model.sigma_x_xu())? - log_det(&c.sigma_y)?
            + log_det(&c.sigma_y_xu)?);
    clamp_nonneg("utility loss", v)
}

/// Leakage, retained utility and utility loss at one allocation, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoPoint<T> {
    pub i_xp_y: T,
    pub i_xu_y: T,
    pub utility_loss: T,
}

/// Computes all three quantities sharing one factorization per matrix.
pub fn info_point<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<InfoPoint<T>> {
    let c = noisy_covariances(model, theta)?;
    let ld_y = log_det(&c.sigma_y)?;
    let ld_yxp = log_det(&c.sigma_y_xp)?;
    let ld_yxu = log_det(&c.sigma_y_xu)?;
    let ld_xu = log_det(&model.sigma_xu())?;
    let ld_x = log_det(model.sigma_x())?;
    let ld_xxu = log_det(model.sigma_x_xu())?;
    let half = T::lit(0.5);
    Ok(InfoPoint {
        i_xp_y: clamp_nonneg("I(Xp;Y)", mi_from_log_dets(log_det(&model.sigma_xp())?, ld_y, ld_yxp))?,
        i_xu_y: clamp_nonneg("I(Xu;Y)", mi_from_log_dets(ld_xu, ld_y, ld_yxu))?,
        utility_loss: clamp_nonneg("utility loss", half * (ld_x - ld_xxu - ld_y + ld_yxu))?,
    })
}
