use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::io::sample_headers;
use super::{CovarianceModel, Means};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Which augmented block to draw from. `Cov(Xp, Xu)` is not part of the
/// model, so the two blocks are sampled independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    XXp,
    XXu,
}

impl Block {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x_xp" => Some(Block::XXp),
            "x_xu" => Some(Block::XXu),
            _ => None,
        }
    }
}

impl<T: Real> CovarianceModel<T> {
    pub fn block_covariance(&self, block: Block) -> &Matrix<T> {
        match block {
            Block::XXp => self.sigma_x_xp(),
            Block::XXu => self.sigma_x_xu(),
        }
    }

    /// CSV column names for samples of `block`.
    pub fn sample_headers(&self, block: Block) -> Vec<String> {
        match block {
            Block::XXp => sample_headers(self.n(), "xp", self.n_p()),
            Block::XXu => sample_headers(self.n(), "xu", self.n_u()),
        }
    }

    fn block_mean(&self, block: Block) -> Vec<T> {
        let k = self.block_covariance(block).rows();
        match (self.means(), block) {
            (None, _) => vec![T::zero(); k],
            (Some(m), Block::XXp) => m.x.iter().chain(&m.xp).copied().collect(),
            (Some(m), Block::XXu) => m.x.iter().chain(&m.xu).copied().collect(),
        }
    }
}

/// Draws `count` rows from the Gaussian of the selected block,
/// deterministically for a given seed.
pub fn sample_dataset<T>(model: &CovarianceModel<T>, count: usize, seed: u64, block: Block) -> Result<Matrix<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
{
    if count == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    let cov = model.block_covariance(block);
    let chol = cov.cholesky()?;
    let l = chol.factor_l();
    let mean = model.block_mean(block);
    let k = cov.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![T::zero(); k];
    let mut data = Vec::with_capacity(count * k);
    for _ in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..k {
            let mut v = mean[i];
            for j in 0..=i {
                v += l[(i, j)] * z[j];
            }
            data.push(v);
        }
    }
    Matrix::from_vec(count, k, data)
}

/// Declared block sizes for a pair of sample matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleLayout {
    pub n: usize,
    pub n_p: usize,
    pub n_u: usize,
}

fn column_means<T: Real>(samples: &Matrix<T>) -> Vec<T> {
    let m = T::from_usize_lossy(samples.rows());
    (0..samples.cols())
        .map(|j| (0..samples.rows()).map(|i| samples[(i, j)]).sum::<T>() / m)
        .collect()
}

/// Unbiased sample covariance (two-pass), symmetrized.
fn sample_covariance<T: Real>(samples: &Matrix<T>, mean: &[T]) -> Matrix<T> {
    let k = samples.cols();
    let mut cov = Matrix::zeros(k, k);
    let mut centered = vec![T::zero(); k];
    for r in 0..samples.rows() {
        for j in 0..k {
            centered[j] = samples[(r, j)] - mean[j];
        }
        for a in 0..k {
            for b in 0..=a {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    let denom = T::from_usize_lossy(samples.rows() - 1);
    for a in 0..k {
        for b in 0..=a {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov.symmetrized()
}

/// Re-expresses one augmented covariance around a shared `Σ_X`.
///
/// The appended block keeps its within-file regression on `X`
/// (`B = S_xx⁻¹ S_xa`) and residual covariance `R`, so the result is
/// `[Σ_X, Σ_X B; Bᵀ Σ_X, Bᵀ Σ_X B + R]`, whose Schur complement is exactly `R`.
fn rebase_on_shared_x<T: Real>(cov: &Matrix<T>, n: usize, sigma_x: &Matrix<T>) -> Result<Matrix<T>> {
    let k = cov.rows() - n;
    let chol = cov
        .block(0, 0, n, n)
        .cholesky()
        .map_err(|_| Error::Estimation("sample covariance of X is singular; more rows are needed".into()))?;
    let mut b = Matrix::zeros(n, k);
    let mut col = vec![T::zero(); n];
    for a in 0..k {
        for i in 0..n {
            col[i] = cov[(i, n + a)];
        }
        chol.solve_in_place(&mut col);
        for i in 0..n {
            b[(i, a)] = col[i];
        }
    }
    let cross = sigma_x.matmul(&b)?;
    let explained_file = cov.block(0, n, n, k).transpose().matmul(&b)?;
    let explained_shared = b.transpose().matmul(&cross)?;
    let mut out = Matrix::zeros(n + k, n + k);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = sigma_x[(i, j)];
        }
        for a in 0..k {
            out[(i, n + a)] = cross[(i, a)];
            out[(n + a, i)] = cross[(i, a)];
        }
    }
    for a in 0..k {
        for c in 0..k {
            let residual = cov[(n + a, n + c)] - explained_file[(a, c)];
            out[(n + a, n + c)] = explained_shared[(a, c)] + residual;
        }
    }
    Ok(out.symmetrized())
}

/// Estimates a model from independent samples of `[X; Xp]` and `[X; Xu]`.
///
/// `Σ_X` is pooled over both files. Each appended block is rebuilt from its
/// own file's regression on `X` around that pooled estimate, which keeps both
/// augmented matrices consistent with `Σ_X` and positive definite whenever
/// the per-file estimates are.
pub fn estimate_from_samples<T: Real>(
    samples_x_xp: &Matrix<T>,
    samples_x_xu: &Matrix<T>,
    layout: SampleLayout,
) -> Result<CovarianceModel<T>> {
    let SampleLayout { n, n_p, n_u } = layout;
    if samples_x_xp.cols() != n + n_p || samples_x_xu.cols() != n + n_u {
        return Err(Error::Shape(format!(
            "sample matrices have {} and {} columns, layout expects {} and {}",
            samples_x_xp.cols(),
            samples_x_xu.cols(),
            n + n_p,
            n + n_u
        )));
    }
    for (name, s) in [("x_xp", samples_x_xp), ("x_xu", samples_x_xu)] {
        if s.rows() < 2 {
            return Err(Error::Estimation(format!("{name} samples have {} rows, need at least 2", s.rows())));
        }
    }

    let mean_p = column_means(samples_x_xp);
    let mean_u = column_means(samples_x_xu);
    let cov_p = sample_covariance(samples_x_xp, &mean_p);
    let cov_u = sample_covariance(samples_x_xu, &mean_u);

    // pooled over both files, weighted by degrees of freedom
    let (dof_p, dof_u) = (T::from_usize_lossy(samples_x_xp.rows() - 1), T::from_usize_lossy(samples_x_xu.rows() - 1));
    let mut sigma_x = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sigma_x[(i, j)] = (cov_p[(i, j)] * dof_p + cov_u[(i, j)] * dof_u) / (dof_p + dof_u);
        }
    }
    let sigma_x = sigma_x.symmetrized();
    let big_p = rebase_on_shared_x(&cov_p, n, &sigma_x)?;
    let big_u = rebase_on_shared_x(&cov_u, n, &sigma_x)?;

    let (rows_p, rows_u) = (T::from_usize_lossy(samples_x_xp.rows()), T::from_usize_lossy(samples_x_xu.rows()));
    let means = Means {
        x: (0..n).map(|i| (mean_p[i] * rows_p + mean_u[i] * rows_u) / (rows_p + rows_u)).collect(),
        xp: mean_p[n..].to_vec(),
        xu: mean_u[n..].to_vec(),
    };
    let model = CovarianceModel::from_parts(n, n_p, n_u, sigma_x, big_p, big_u, Some(means))?;
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::Estimation(format!("estimated covariance is unusable: {report}")));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    fn max_rel_err(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| ((x - y) / y).abs())
            .fold(0.0, f64::max)
    }

    fn rel_frobenius(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        let diff: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum();
        diff.sqrt() / b.frobenius_norm()
    }

    #[test]
    fn single_row_shape() {
        let m = datasets::dataset1();
        let s = sample_dataset(&m, 1, 3, Block::XXu).unwrap();
        assert_eq!((s.rows(), s.cols()), (1, 3));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(sample_dataset(&datasets::dataset1(), 0, 3, Block::XXu).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let m = datasets::dataset1();
        let a = sample_dataset(&m, 50, 42, Block::XXp).unwrap();
        let b = sample_dataset(&m, 50, 42, Block::XXp).unwrap();
        let c = sample_dataset(&m, 50, 43, Block::XXp).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_covariance_is_consistent() {
        let m = datasets::dataset1();
        let s = sample_dataset(&m, 100_000, 11, Block::XXu).unwrap();
        let cov = sample_covariance(&s, &column_means(&s));
        assert!(max_rel_err(&cov, m.sigma_x_xu()) < 0.05);
    }

    #[test]
    fn recovers_dataset_one_from_a_million_rows() {
        let m = datasets::dataset1();
        let a = sample_dataset(&m, 1_000_000, 1, Block::XXp).unwrap();
        let b = sample_dataset(&m, 1_000_000, 2, Block::XXu).unwrap();
        let est = estimate_from_samples(&a, &b, SampleLayout { n: 2, n_p: 1, n_u: 1 }).unwrap();
        assert!(max_rel_err(est.sigma_x(), m.sigma_x()) < 0.02);
        assert!(max_rel_err(est.sigma_x_xp(), m.sigma_x_xp()) < 0.02);
        assert!(max_rel_err(est.sigma_x_xu(), m.sigma_x_xu()) < 0.02);
    }

    #[test]
    fn small_independent_samples_still_give_a_valid_model() {
        // dataset1's Xp is nearly a linear function of X, so naive block
        // averaging breaks definiteness at this size
        for m in [datasets::dataset1(), datasets::dataset2()] {
            let layout = SampleLayout { n: m.n(), n_p: 1, n_u: 1 };
            for seed in 0..20 {
                let a = sample_dataset(&m, 1000, 2 * seed, Block::XXp).unwrap();
                let b = sample_dataset(&m, 1000, 2 * seed + 1, Block::XXu).unwrap();
                assert!(estimate_from_samples(&a, &b, layout).is_ok(), "seed {seed}");
            }
        }
    }

    #[test]
    fn too_few_rows_for_the_regression() {
        let m = datasets::dataset2();
        let a = sample_dataset(&m, 4, 1, Block::XXp).unwrap();
        let b = sample_dataset(&m, 4, 2, Block::XXu).unwrap();
        let r = estimate_from_samples(&a, &b, SampleLayout { n: 6, n_p: 1, n_u: 1 });
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn estimation_error_shrinks_with_sample_count() {
        let m = datasets::dataset1();
        let layout = SampleLayout { n: 2, n_p: 1, n_u: 1 };
        let err = |count| {
            let a = sample_dataset(&m, count, 5, Block::XXp).unwrap();
            let b = sample_dataset(&m, count, 6, Block::XXu).unwrap();
            let est = estimate_from_samples(&a, &b, layout).unwrap();
            rel_frobenius(est.sigma_x_xp(), m.sigma_x_xp()) + rel_frobenius(est.sigma_x_xu(), m.sigma_x_xu())
        };
        assert!(err(100_000) < err(1_000));
    }

    #[test]
    fn identical_rows_are_singular() {
        let row = [1.0, 2.0, 3.0];
        let s = Matrix::from_rows(&[row, row]).unwrap();
        let r = estimate_from_samples(&s, &s, SampleLayout { n: 2, n_p: 1, n_u: 1 });
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn too_few_rows() {
        let s = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let r = estimate_from_samples(&s, &s, SampleLayout { n: 2, n_p: 1, n_u: 1 });
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn column_mismatch_is_structural() {
        let m = datasets::dataset1();
        let a = sample_dataset(&m, 10, 1, Block::XXp).unwrap();
        let b = Matrix::<f64>::zeros(10, 4);
        let r = estimate_from_samples(&a, &b, SampleLayout { n: 2, n_p: 1, n_u: 1 });
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn honours_stored_means() {
        let m = datasets::dataset1()
            .with_means(Means { x: vec![100.0, -50.0], xp: vec![3.0], xu: vec![0.0] })
            .unwrap();
        let s = sample_dataset(&m, 20_000, 9, Block::XXp).unwrap();
        let mu = column_means(&s);
        assert!((mu[0] - 100.0).abs() < 0.5);
        assert!((mu[1] + 50.0).abs() < 0.5);
        assert!((mu[2] - 3.0).abs() < 0.1);
    }
}
