//! Fisher information of the release about the utility features, and its
//! link to `I(Xu;Y)` when there is a single utility feature.
//!
//! With `A = Σ_Xu⁻¹` and `B = Σ_{Y∪Xu}⁻¹`, the information matrix is
//! `𝓘_ij = ½ (b_{n+i,n+j} + b_{n+j,n+i} − a_ij − a_ji)`, i.e. the negated
//! expected Hessian of `ln f(Y | Xu)`. For one utility feature this is
//! `b_{n+1,n+1} − 1/σ²_xu` (1-based), and
//! `I(Xu;Y) = ½ ln(σ²_xu · 𝓘 + 1)`.

use crate::covmodel::{noisy_covariances, CovarianceModel, NoiseAllocation};
use crate::error::{Error, Result};
use crate::gauss_info::{self, clamp_nonneg};
use crate::linalg::{self, spd_inverse, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T> {
    pub h: Matrix<T>,
}

impl<T: Real> FisherMatrix<T> {
    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.h == self.h.transpose()
    }

    /// Smallest eigenvalue; should be `>= 0` up to round-off.
    pub fn min_eigenvalue(&self) -> T {
        self.h.symmetric_eigenvalues().first().copied().unwrap_or_else(T::zero)
    }
}

pub fn fisher_matrix<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<FisherMatrix<T>> {
    let c = noisy_covariances(model, theta)?;
    let a = spd_inverse(&model.sigma_xu())?;
    let b = spd_inverse(&c.sigma_y_xu)?;
    let (n, nu) = (model.n(), model.n_u());
    let half = T::lit(0.5);
    let mut h = Matrix::zeros(nu, nu);
    for i in 0..nu {
        h[(i, i)] = b[(n + i, n + i)] - a[(i, i)];
        for j in (i + 1)..nu {
            let v = half * (b[(n + i, n + j)] + b[(n + j, n + i)] - a[(i, j)] - a[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(FisherMatrix { h })
}

/// Last diagonal entry of `Σ_{Y∪Xu}⁻¹`, read off the Cholesky factor.
fn trailing_precision<T: Real>(sigma_y_xu: &Matrix<T>) -> Result<T> {
    let chol = sigma_y_xu.cholesky()?;
    let k = chol.dim();
    // (L⁻¹)_{k-1,k-1} = 1 / L_{k-1,k-1} and the last row of L⁻ᵀL⁻¹ only sees it
    let l_last = chol.factor_l()[(k - 1, k - 1)];
    Ok(T::one() / (l_last * l_last))
}

/// Scalar Fisher information for a model with one utility feature.
pub fn fisher_scalar<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<T> {
    let s2 = model.sigma2_xu()?;
    let c = noisy_covariances(model, theta)?;
    clamp_nonneg("Fisher information", trailing_precision(&c.sigma_y_xu)? - T::one() / s2)
}

/// Returns `(b_last, |Σ_Y| / |Σ_{Y∪Xu}|)`, which agree algebraically.
pub fn cofactor_identity_check<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<(T, T)> {
    model.sigma2_xu()?;
    let c = noisy_covariances(model, theta)?;
    let lhs = spd_inverse(&c.sigma_y_xu)?[(model.n(), model.n())];
    let rhs = (linalg::log_det(&c.sigma_y)? - linalg::log_det(&c.sigma_y_xu)?).exp();
    Ok((lhs, rhs))
}

/// `½ ln(σ²_xu · 𝓘 + 1)`.
pub fn mi_from_fisher<T: Real>(sigma2_xu: T, fisher: T) -> Result<T> {
    if !(sigma2_xu > T::zero()) {
        return Err(Error::Domain(format!("utility variance must be positive, got {sigma2_xu}")));
    }
    let fisher = clamp_nonneg("Fisher information", fisher)?;
    Ok(T::lit(0.5) * (sigma2_xu * fisher).ln_1p())
}

/// Inverse of [`mi_from_fisher`]: the Fisher value whose implied `I(Xu;Y)`
/// equals `mi`.
pub fn fisher_from_mi<T: Real>(sigma2_xu: T, mi: T) -> T {
    (T::lit(2.0) * mi).exp_m1() / sigma2_xu
}

/// Smallest Fisher information that keeps the utility loss within `delta`
/// nats: `(e^{2(I(Xu;X) − δ)} − 1) / σ²_xu`.
pub fn fisher_threshold_from_delta<T: Real>(model: &CovarianceModel<T>, delta: T) -> Result<T> {
    let s2 = model.sigma2_xu()?;
    let i_full = gauss_info::mi_utility_zero_noise(model)?;
    if !(delta >= T::zero() && delta <= i_full) {
        return Err(Error::Domain(format!("delta {delta} outside [0, I(Xu;X) = {i_full}]")));
    }
    Ok(fisher_from_mi(s2, i_full - delta))
}
