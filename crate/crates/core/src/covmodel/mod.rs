//! The jointly Gaussian feature model: disclosed features `X`, private
//! features `Xp` and utility features `Xu`, described by the covariance of
//! `[X; Xp]` and of `[X; Xu]`.
//!
//! Blocks are always ordered with `X` first. The private and utility blocks
//! are treated as disjoint; their cross-covariance is never needed and never
//! stored.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

mod io;
mod sampling;

pub use io::{read_samples_csv, write_samples_csv, ModelDocument};
pub use sampling::{estimate_from_samples, sample_dataset, Block, SampleLayout};

/// Relative tolerance for the symmetry invariant.
pub const SYMMETRY_RTOL: f64 = 1e-9;
/// Relative tolerance for agreement of the `X` blocks across matrices.
pub const BLOCK_RTOL: f64 = 1e-12;
/// Smallest admissible eigenvalue, relative to the largest diagonal entry.
pub const PD_FLOOR_REL: f64 = 1e-10;

/// Optional mean vectors. Only sampling uses them; every information measure
/// here is invariant to location.
#[derive(Debug, Clone, PartialEq)]
pub struct Means<T> {
    pub x: Vec<T>,
    pub xp: Vec<T>,
    pub xu: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel<T> {
    n: usize,
    n_p: usize,
    n_u: usize,
    sigma_x: Matrix<T>,
    sigma_x_xp: Matrix<T>,
    sigma_x_xu: Matrix<T>,
    means: Option<Means<T>>,
}

/// Which of the three model matrices a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixName {
    SigmaX,
    SigmaXXp,
    SigmaXXu,
}

impl fmt::Display for MatrixName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixName::SigmaX => "sigma_x",
            MatrixName::SigmaXXp => "sigma_x_xp",
            MatrixName::SigmaXXu => "sigma_x_xu",
        })
    }
}

/// A single failed model invariant. Indices are 0-based; `Display` prints
/// them 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyBlock { block: &'static str },
    NonFinite { matrix: MatrixName, row: usize, col: usize },
    Asymmetric { matrix: MatrixName, row: usize, col: usize },
    NotPositiveDefinite { matrix: MatrixName, min_eigenvalue: f64, floor: f64 },
    BlockMismatch { matrix: MatrixName, row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::EmptyBlock { block } => write!(f, "block {block} has dimension 0"),
            Violation::NonFinite { matrix, row, col } => {
                write!(f, "{matrix}({},{}) is not finite", row + 1, col + 1)
            }
            Violation::Asymmetric { matrix, row, col } => write!(
                f,
                "{matrix} is not symmetric at ({},{})/({},{})",
                row + 1,
                col + 1,
                col + 1,
                row + 1
            ),
            Violation::NotPositiveDefinite { matrix, min_eigenvalue, floor } => write!(
                f,
                "{matrix} is not positive definite (smallest eigenvalue {min_eigenvalue:e} <= floor {floor:e})"
            ),
            Violation::BlockMismatch { matrix, row, col } => write!(
                f,
                "leading block of {matrix} differs from sigma_x at ({},{})",
                row + 1,
                col + 1
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl<T: Real> CovarianceModel<T> {
    /// Builds and validates a model.
    pub fn new(
        n: usize,
        n_p: usize,
        n_u: usize,
        sigma_x: Matrix<T>,
        sigma_x_xp: Matrix<T>,
        sigma_x_xu: Matrix<T>,
    ) -> Result<Self> {
        Self::from_parts(n, n_p, n_u, sigma_x, sigma_x_xp, sigma_x_xu, None)?.validated()
    }

    /// Assembles a model checking only that the matrix shapes match the
    /// declared dimensions. Invariants are left to [`Self::validate`].
    pub fn from_parts(
        n: usize,
        n_p: usize,
        n_u: usize,
        sigma_x: Matrix<T>,
        sigma_x_xp: Matrix<T>,
        sigma_x_xu: Matrix<T>,
        means: Option<Means<T>>,
    ) -> Result<Self> {
        let check = |name: MatrixName, m: &Matrix<T>, k: usize| {
            if m.rows() != k || m.cols() != k {
                Err(Error::Shape(format!(
                    "{name} is {}x{}, declared dimensions require {k}x{k}",
                    m.rows(),
                    m.cols()
                )))
            } else {
                Ok(())
            }
        };
        check(MatrixName::SigmaX, &sigma_x, n)?;
        check(MatrixName::SigmaXXp, &sigma_x_xp, n + n_p)?;
        check(MatrixName::SigmaXXu, &sigma_x_xu, n + n_u)?;
        if let Some(m) = &means {
            if m.x.len() != n || m.xp.len() != n_p || m.xu.len() != n_u {
                return Err(Error::Shape(format!(
                    "mean vectors have lengths ({}, {}, {}), expected ({n}, {n_p}, {n_u})",
                    m.x.len(),
                    m.xp.len(),
                    m.xu.len()
                )));
            }
        }
        Ok(Self { n, n_p, n_u, sigma_x, sigma_x_xp, sigma_x_xu, means })
    }

    pub fn with_means(mut self, means: Means<T>) -> Result<Self> {
        if means.x.len() != self.n || means.xp.len() != self.n_p || means.xu.len() != self.n_u {
            return Err(Error::Shape("mean vector lengths do not match the model".into()));
        }
        self.means = Some(means);
        Ok(self)
    }

    /// Returns `self` if valid, otherwise the report wrapped in an error.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (block, k) in [("X", self.n), ("Xp", self.n_p), ("Xu", self.n_u)] {
            if k == 0 {
                violations.push(Violation::EmptyBlock { block });
            }
        }
        let mats = [
            (MatrixName::SigmaX, &self.sigma_x),
            (MatrixName::SigmaXXp, &self.sigma_x_xp),
            (MatrixName::SigmaXXu, &self.sigma_x_xu),
        ];
        for (name, m) in mats {
            check_matrix(name, m, &mut violations);
        }
        for (name, m) in [(MatrixName::SigmaXXp, &self.sigma_x_xp), (MatrixName::SigmaXXu, &self.sigma_x_xu)] {
            let tol = T::lit(BLOCK_RTOL);
            for i in 0..self.n {
                for j in 0..self.n {
                    let a = self.sigma_x[(i, j)];
                    let b = m[(i, j)];
                    if (a - b).abs() > tol * a.abs().max(b.abs()) {
                        violations.push(Violation::BlockMismatch { matrix: name, row: i, col: j });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn sigma_x(&self) -> &Matrix<T> {
        &self.sigma_x
    }

    pub fn sigma_x_xp(&self) -> &Matrix<T> {
        &self.sigma_x_xp
    }

    pub fn sigma_x_xu(&self) -> &Matrix<T> {
        &self.sigma_x_xu
    }

    pub fn means(&self) -> Option<&Means<T>> {
        self.means.as_ref()
    }

    /// Trailing `n_p x n_p` block of `sigma_x_xp`.
    pub fn sigma_xp(&self) -> Matrix<T> {
        self.sigma_x_xp.block(self.n, self.n, self.n_p, self.n_p)
    }

    /// Trailing `n_u x n_u` block of `sigma_x_xu`.
    pub fn sigma_xu(&self) -> Matrix<T> {
        self.sigma_x_xu.block(self.n, self.n, self.n_u, self.n_u)
    }

    /// Variance of the single utility feature.
    pub fn sigma2_xu(&self) -> Result<T> {
        if self.n_u != 1 {
            return Err(Error::Shape(format!(
                "operation requires exactly one utility feature, model has {}",
                self.n_u
            )));
        }
        Ok(self.sigma_x_xu[(self.n, self.n)])
    }

    /// Converts the model to another scalar type.
    pub fn cast<U: Real>(&self) -> CovarianceModel<U> {
        let conv = |v: T| U::lit(v.as_f64());
        let cv = |v: &Vec<T>| v.iter().map(|&x| conv(x)).collect::<Vec<U>>();
        CovarianceModel {
            n: self.n,
            n_p: self.n_p,
            n_u: self.n_u,
            sigma_x: self.sigma_x.map(conv),
            sigma_x_xp: self.sigma_x_xp.map(conv),
            sigma_x_xu: self.sigma_x_xu.map(conv),
            means: self.means.as_ref().map(|m| Means { x: cv(&m.x), xp: cv(&m.xp), xu: cv(&m.xu) }),
        }
    }
}

fn check_matrix<T: Real>(name: MatrixName, m: &Matrix<T>, out: &mut Vec<Violation>) {
    let k = m.rows();
    let mut finite = true;
    for i in 0..k {
        for j in 0..k {
            if !m[(i, j)].is_finite() {
                out.push(Violation::NonFinite { matrix: name, row: i, col: j });
                finite = false;
            }
        }
    }
    if !finite {
        return;
    }
    let rtol = T::lit(SYMMETRY_RTOL);
    for i in 0..k {
        for j in (i + 1)..k {
            let a = m[(i, j)];
            let b = m[(j, i)];
            if (a - b).abs() > rtol * a.abs().max(b.abs()) {
                out.push(Violation::Asymmetric { matrix: name, row: i, col: j });
            }
        }
    }
    if k == 0 {
        return;
    }
    let floor = T::lit(PD_FLOOR_REL) * m.max_diag();
    let min_ev = m.symmetric_eigenvalues()[0];
    if !(min_ev > floor) {
        out.push(Violation::NotPositiveDefinite {
            matrix: name,
            min_eigenvalue: min_ev.as_f64(),
            floor: floor.as_f64(),
        });
    }
}

/// Per-feature noise variances: the diagonal of the noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAllocation<T> {
    theta: Vec<T>,
}

impl<T: Real> NoiseAllocation<T> {
    /// Rejects negative or non-finite entries.
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = theta.iter().enumerate().find(|(_, v)| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Domain(format!("noise variance theta[{i}] = {v} must be finite and >= 0")));
        }
        Ok(Self { theta })
    }

    /// Wraps a vector without checking it. Intended for diagnostics such as
    /// feeding deliberately broken allocations to a constraint checker.
    pub fn new_unchecked(theta: Vec<T>) -> Self {
        Self { theta }
    }

    pub fn zeros(n: usize) -> Self {
        Self { theta: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<T> {
        self.theta
    }

    pub fn is_zero(&self) -> bool {
        self.theta.iter().all(|&v| v == T::zero())
    }

    /// Copy with `amount` added to component `index`.
    pub fn incremented(&self, index: usize, amount: T) -> Self {
        let mut theta = self.theta.clone();
        theta[index] += amount;
        Self { theta }
    }

    /// Copy with every component scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { theta: self.theta.iter().map(|&v| v * factor).collect() }
    }
}

/// `Σ_Y`, `Σ_{Y∪Xp}` and `Σ_{Y∪Xu}` for a given noise allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCovariances<T> {
    pub sigma_y: Matrix<T>,
    pub sigma_y_xp: Matrix<T>,
    pub sigma_y_xu: Matrix<T>,
}

pub(crate) fn check_theta<T: Real>(model: &CovarianceModel<T>, theta: &NoiseAllocation<T>) -> Result<()> {
    if theta.len() != model.n() {
        return Err(Error::Shape(format!(
            "noise allocation has {} entries, model has {} disclosed features",
            theta.len(),
            model.n()
        )));
    }
    if let Some((i, v)) = theta.as_slice().iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
        return Err(Error::Domain(format!("noise variance theta[{i}] = {v} is negative")));
    }
    Ok(())
}

/// Adds the noise variances to the leading `n` diagonal entries of each
/// model matrix; the `Xp`/`Xu` diagonal entries are left alone.
pub fn noisy_covariances<T: Real>(
    model: &CovarianceModel<T>,
    theta: &NoiseAllocation<T>,
) -> Result<NoisyCovariances<T>> {
    check_theta(model, theta)?;
    let t = theta.as_slice();
    Ok(NoisyCovariances {
        sigma_y: model.sigma_x.with_added_diag(t),
        sigma_y_xp: model.sigma_x_xp.with_added_diag(t),
        sigma_y_xu: model.sigma_x_xu.with_added_diag(t),
    })
}
