//! The two bundled sample models (two-decimal covariance entries).
//!
//! As printed, the `[X; Xu]` matrix of the second model is indefinite
//! (smallest eigenvalue about -0.0028): two-decimal rounding pushed the
//! utility variance below `cᵀ Σ_X⁻¹ c = 2.23282`. The bundled copy uses
//! `Var(Xu) = 2.234`, which still rounds to the printed 2.23 and is the only
//! single-entry change inside the rounding interval that restores
//! definiteness with margin. [`dataset2_as_printed`] keeps the literal values.

use crate::covmodel::CovarianceModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const NAMES: [&str; 2] = ["dataset1", "dataset2"];

/// Utility variance used by the bundled second model.
pub const DATASET2_UTILITY_VARIANCE: f64 = 2.234;

fn assemble(sigma_x_xp: &[&[f64]], sigma_x_xu: &[&[f64]]) -> CovarianceModel<f64> {
    let big_p = Matrix::from_rows(sigma_x_xp).expect("square literal");
    let big_u = Matrix::from_rows(sigma_x_xu).expect("square literal");
    let n = big_p.rows() - 1;
    let sigma_x = big_p.block(0, 0, n, n);
    CovarianceModel::from_parts(n, 1, 1, sigma_x, big_p, big_u, None).expect("square literal blocks")
}

fn build(sigma_x_xp: &[&[f64]], sigma_x_xu: &[&[f64]]) -> CovarianceModel<f64> {
    assemble(sigma_x_xp, sigma_x_xu).validated().expect("bundled dataset is valid")
}

/// Two disclosed features, one private, one utility feature.
pub fn dataset1() -> CovarianceModel<f64> {
    build(
        &[&[138.27, 165.66, 26.36], &[165.66, 240.07, 43.86], &[26.36, 43.86, 8.76]],
        &[&[138.27, 165.66, 11.28], &[165.66, 240.07, 6.84], &[11.28, 6.84, 2.26]],
    )
}

/// Six disclosed features, one private, one utility feature, with the
/// utility variance raised to [`DATASET2_UTILITY_VARIANCE`].
pub fn dataset2() -> CovarianceModel<f64> {
    let printed = dataset2_as_printed();
    let mut xu = printed.sigma_x_xu().clone();
    xu[(6, 6)] = DATASET2_UTILITY_VARIANCE;
    CovarianceModel::new(6, 1, 1, printed.sigma_x().clone(), printed.sigma_x_xp().clone(), xu)
        .expect("repaired dataset is valid")
}

/// The second model exactly as printed. It fails validation.
pub fn dataset2_as_printed() -> CovarianceModel<f64> {
    assemble(
        &[
            &[66.42, 57.38, 83.90, 80.03, 0.06, 121.43, 9.26],
            &[57.38, 229.20, 146.94, 232.62, 0.04, 69.30, 45.07],
            &[83.90, 146.94, 142.89, 169.83, 0.06, 140.22, 27.17],
            &[80.03, 232.62, 169.83, 247.38, 0.06, 114.44, 45.18],
            &[0.06, 0.04, 0.06, 0.06, 0.12, 0.10, 0.01],
            &[121.43, 69.30, 140.22, 114.44, 0.10, 233.30, 9.44],
            &[9.26, 45.07, 27.17, 45.18, 0.01, 9.44, 9.01],
        ],
        &[
            &[66.42, 57.38, 83.90, 80.03, 0.06, 121.43, 11.22],
            &[57.38, 229.20, 146.94, 232.62, 0.04, 69.30, 2.42],
            &[83.90, 146.94, 142.89, 169.83, 0.06, 140.22, 11.31],
            &[80.03, 232.62, 169.83, 247.38, 0.06, 114.44, 6.93],
            &[0.06, 0.04, 0.06, 0.06, 0.12, 0.10, 0.01],
            &[121.43, 69.30, 140.22, 114.44, 0.10, 233.30, 22.38],
            &[11.22, 2.42, 11.31, 6.93, 0.01, 22.38, 2.23],
        ],
    )
}

pub fn by_name(name: &str) -> Result<CovarianceModel<f64>> {
    match name {
        "dataset1" => Ok(dataset1()),
        "dataset2" => Ok(dataset2()),
        other => Err(Error::Domain(format!(
            "unknown dataset {other:?} (available: {})",
            NAMES.join(", ")
        ))),
    }
}
