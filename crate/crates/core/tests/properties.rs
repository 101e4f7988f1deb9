mod common;

use common::{cofactor_det, random_model, random_theta};
use privtrade::covmodel::noisy_covariances;
use privtrade::fisher::{fisher_scalar, mi_from_fisher};
use privtrade::gauss_info::{gaussian_entropy, log_det, mi_private, mi_utility, utility_loss};
use privtrade::{Mat, Model, Noise};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize) -> (Model, Noise) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_model(&mut rng, n);
    let t = random_theta(&mut rng, &m);
    (m, t)
}

fn spd(seed: u64, k: usize) -> Mat {
    // any model's joint block is a random SPD matrix of size n + 1
    let (m, _) = instance(seed, k - 1);
    m.sigma_x_xp().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn more_noise_never_adds_information(seed in any::<u64>(), n in 1usize..=6, i in 0usize..6, bump in 1e-4f64..1e3) {
        let (m, t) = instance(seed, n);
        let t2 = t.incremented(i % n, bump * m.sigma_x().max_diag());
        prop_assert!(mi_private(&m, &t2).unwrap() <= mi_private(&m, &t).unwrap() + 1e-9);
        prop_assert!(mi_utility(&m, &t2).unwrap() <= mi_utility(&m, &t).unwrap() + 1e-9);
        prop_assert!(utility_loss(&m, &t2).unwrap() >= utility_loss(&m, &t).unwrap() - 1e-9);
    }

    #[test]
    fn mutual_information_is_an_entropy_difference(seed in any::<u64>(), n in 1usize..=6) {
        let (m, t) = instance(seed, n);
        let c = noisy_covariances(&m, &t).unwrap();
        let chain = gaussian_entropy(&m.sigma_xp()).unwrap() + gaussian_entropy(&c.sigma_y).unwrap()
            - gaussian_entropy(&c.sigma_y_xp).unwrap();
        prop_assert!((chain - mi_private(&m, &t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn log_det_matches_cofactor_expansion(seed in any::<u64>(), k in 2usize..=4) {
        let a = spd(seed, k);
        let oracle = cofactor_det(&a.to_rows()).ln();
        prop_assert!((log_det(&a).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn fisher_information_determines_utility(seed in any::<u64>(), n in 1usize..=6) {
        let (m, t) = instance(seed, n);
        let via = mi_from_fisher(m.sigma2_xu().unwrap(), fisher_scalar(&m, &t).unwrap()).unwrap();
        prop_assert!((via - mi_utility(&m, &t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn release_covariances_stay_positive_definite(seed in any::<u64>(), n in 1usize..=6) {
        let (m, t) = instance(seed, n);
        let c = noisy_covariances(&m, &t).unwrap();
        prop_assert!(c.sigma_y.cholesky().is_ok());
        prop_assert!(c.sigma_y_xp.cholesky().is_ok());
        prop_assert!(c.sigma_y_xu.cholesky().is_ok());
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>(), n in 1usize..=6) {
        let (m, _) = instance(seed, n);
        let back = Model::load_str(&m.emit()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn single_precision_tracks_double(seed in any::<u64>(), n in 1usize..=4) {
        let (m, t) = instance(seed, n);
        let m32 = m.cast::<f32>();
        let t32 = privtrade::NoiseF32::new(t.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
        let (a, b) = (mi_private(&m, &t).unwrap(), mi_private(&m32, &t32).unwrap() as f64);
        prop_assert!((a - b).abs() < 1e-2 * (1.0 + a));
    }
}

#[test]
fn bivariate_correlation_point_six() {
    let joint = Mat::from_rows(&[[1.0, 0.6], [0.6, 1.0]]).unwrap();
    let m = Model::new(1, 1, 1, Mat::identity(1), joint.clone(), joint).unwrap();
    let v = mi_private(&m, &Noise::zeros(1)).unwrap();
    assert!((v - 0.22314355131).abs() < 1e-11);
    assert!((v - 0.5 * (1.0f64 / 0.64).ln()).abs() < 1e-12);
}
