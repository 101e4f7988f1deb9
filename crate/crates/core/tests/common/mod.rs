#![allow(dead_code)]

use privtrade::{Mat, Model, Noise};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random positive definite joint covariance over `[X; Xp; Xu]` with `n`
/// disclosed features and one private and one utility feature.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> Model {
    let k = n + 2;
    let m = k + 2;
    let g: Vec<f64> = (0..k * m).map(|_| StandardNormal.sample(rng)).collect();
    let scale: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..20.0f64).sqrt()).collect();
    let mut joint = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = (0..m).map(|t| g[i * m + t] * g[j * m + t]).sum();
            let ridge = if i == j { 0.2 } else { 0.0 };
            joint[i * k + j] = scale[i] * scale[j] * (dot / m as f64 + ridge);
        }
    }
    let pick = |idx: &[usize]| {
        let mut out = Mat::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = joint[i * k + j];
            }
        }
        out
    };
    let xs: Vec<usize> = (0..n).collect();
    let with = |extra: usize| xs.iter().copied().chain([extra]).collect::<Vec<_>>();
    Model::new(n, 1, 1, pick(&xs), pick(&with(n)), pick(&with(n + 1))).expect("random model is valid")
}

pub fn random_theta(rng: &mut ChaCha8Rng, model: &Model) -> Noise {
    let scale = model.sigma_x().max_diag();
    Noise::new((0..model.n()).map(|_| scale * rng.random_range(0.0..2.0f64).powi(3)).collect()).unwrap()
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> =
                    a[1..].iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect()).collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][c] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// `½ ln(|Σ_A| |Σ_X| / |Σ_{X∪A}|)` for a single appended feature, from
/// cofactor determinants only.
pub fn oracle_mi(augmented: &Mat) -> f64 {
    let rows = augmented.to_rows();
    let n = rows.len() - 1;
    let x: Vec<Vec<f64>> = rows[..n].iter().map(|r| r[..n].to_vec()).collect();
    0.5 * (rows[n][n] * cofactor_det(&x) / cofactor_det(&rows)).ln()
}
