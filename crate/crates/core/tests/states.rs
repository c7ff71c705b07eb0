use std::f64::consts::{FRAC_PI_2, PI, TAU};

use etacrit_core::linalg::{self, Matrix2};
use etacrit_core::optimize::draw_starts;
use etacrit_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(n: usize, hi: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| hi * i as f64 / (n - 1) as f64)
}

fn noise(kind: NoiseKind, p: f64, w: f64) -> NoiseSpec {
    match kind {
        NoiseKind::ColoredPhotonPhoton => NoiseSpec::colored_pp(p).unwrap(),
        NoiseKind::ColoredAtomPhoton => NoiseSpec::colored_ap(p).unwrap(),
        NoiseKind::White => NoiseSpec::white(w).unwrap(),
        NoiseKind::Mixed => NoiseSpec::mixed(p, w).unwrap(),
    }
}

#[test]
fn every_state_on_the_grid_is_valid() {
    for kind in NoiseKind::ALL {
        for theta in grid(20, FRAC_PI_2) {
            for p in grid(11, 1.0) {
                for w in grid(11, 1.0) {
                    let rho = make_noisy(theta, noise(kind, p, w)).unwrap();
                    rho.validate().unwrap_or_else(|e| panic!("{kind} {theta} {p} {w}: {e}"));
                    assert!((rho.trace().re - 1.0).abs() < 1e-12);
                    assert!(rho.eigenvalues().iter().all(|&l| l > -1e-10));
                }
            }
        }
    }
}

#[test]
fn colored_noise_scales_only_the_coherences() {
    for theta in grid(20, FRAC_PI_2) {
        let pure = make_pure(theta).unwrap();
        for p in grid(11, 1.0) {
            for (spec, factor) in [
                (NoiseSpec::colored_pp(p).unwrap(), (1.0 - p) * (1.0 - p)),
                (NoiseSpec::colored_ap(p).unwrap(), 1.0 - p),
            ] {
                let rho = make_noisy(theta, spec).unwrap();
                for i in 0..4 {
                    for j in 0..4 {
                        let expected = if (i, j) == (1, 2) || (i, j) == (2, 1) {
                            pure.entry(i, j) * factor
                        } else {
                            pure.entry(i, j)
                        };
                        assert!((rho.entry(i, j) - expected).norm() < 1e-14, "({i},{j}) at p={p}");
                    }
                }
            }
        }
    }
}

#[test]
fn white_noise_at_full_weight_is_maximally_mixed() {
    let rho = make_noisy(0.3, NoiseSpec::white(1.0).unwrap()).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j { 0.25 } else { 0.0 };
            assert!((rho.entry(i, j).re - expected).abs() < 1e-15);
        }
    }
}

fn close2(a: &Matrix2, b: &Matrix2, tol: f64) -> bool {
    (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() < tol))
}

#[test]
fn projectors_are_rank_one() {
    let cfg = SearchConfig { n_starts: 1000, seed: 99, ..Default::default() };
    for x in draw_starts(1, false, &cfg) {
        let p = projector(MeasurementSetting::new(x[0], x[1]));
        let mut p2 = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p2[i][j] = p[i][0] * p[0][j] + p[i][1] * p[1][j];
            }
        }
        assert!(close2(&p, &p2, 1e-12));
        assert!(((p[0][0] + p[1][1]) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}

fn arb_state() -> impl Strategy<Value = TwoQubitState> {
    (0.0..FRAC_PI_2, 0.0..1.0f64, 0.0..1.0f64, 0usize..4).prop_map(|(theta, p, w, k)| {
        make_noisy(theta, noise(NoiseKind::ALL[k % NoiseKind::ALL.len()], p, w)).unwrap()
    })
}

fn arb_setting() -> impl Strategy<Value = MeasurementSetting> {
    (0.0..TAU, 0.0..TAU).prop_map(|(phi, nu)| MeasurementSetting::new(phi, nu))
}

proptest! {
    #[test]
    fn no_signaling(rho in arb_state(), a in arb_setting(), b in arb_setting()) {
        // outcome 1 of a projective measurement is the orthogonal vector
        let a_perp = MeasurementSetting::new(a.phi() + FRAC_PI_2, a.nu());
        let b_perp = MeasurementSetting::new(b.phi() + FRAC_PI_2, b.nu());
        let pa = marginal_prob(&rho, Side::A, a).unwrap();
        let pb = marginal_prob(&rho, Side::B, b).unwrap();
        let sum_b = joint_prob(&rho, a, b).unwrap() + joint_prob(&rho, a, b_perp).unwrap();
        let sum_a = joint_prob(&rho, a, b).unwrap() + joint_prob(&rho, a_perp, b).unwrap();
        prop_assert!((sum_b - pa).abs() < 1e-12);
        prop_assert!((sum_a - pb).abs() < 1e-12);
    }

    #[test]
    fn angles_are_two_pi_periodic(rho in arb_state(), a in arb_setting(), b in arb_setting(), k in -3i32..4) {
        let shift = k as f64 * TAU;
        let base = joint_prob(&rho, a, b).unwrap();
        let phi = joint_prob(&rho, MeasurementSetting::new(a.phi() + shift, a.nu()), b).unwrap();
        let nu = joint_prob(&rho, a, MeasurementSetting::new(b.phi(), b.nu() + shift)).unwrap();
        prop_assert!((base - phi).abs() < 1e-12);
        prop_assert!((base - nu).abs() < 1e-12);
    }

    #[test]
    fn probabilities_are_linear_in_the_state(
        theta in 0.0..FRAC_PI_2, p in 0.0..1.0f64, t in 0.0..1.0f64,
        a in arb_setting(), b in arb_setting(),
    ) {
        let r1 = make_pure(theta).unwrap();
        let r2 = make_noisy(FRAC_PI_2 - theta, NoiseSpec::colored_pp(p).unwrap()).unwrap();
        let mixed = r1.mix(&r2, t).unwrap();
        let expected = t * joint_prob(&r1, a, b).unwrap() + (1.0 - t) * joint_prob(&r2, a, b).unwrap();
        prop_assert!((joint_prob(&mixed, a, b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn sigma_x_flip_is_a_relabeling(theta in 0.0..FRAC_PI_2, p in 0.0..1.0f64, a in arb_setting(), b in arb_setting()) {
        let rho = make_noisy(theta, NoiseSpec::colored_pp(p).unwrap()).unwrap();
        let flipped = make_noisy(FRAC_PI_2 - theta, NoiseSpec::colored_pp(p).unwrap()).unwrap();
        let lhs = joint_prob(&rho, a, b).unwrap();
        let rhs = joint_prob(&flipped, a.flipped(), b.flipped()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        let rhs = joint_prob(&rho.flipped(), a.flipped(), b.flipped()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn product_state_probabilities_factorize() {
    let va = MeasurementSetting::new(0.4, 1.1).vector();
    let vb = MeasurementSetting::new(2.0, -0.3).vector();
    let rho = TwoQubitState::from_matrix(linalg::kron2(&linalg::outer2(&va), &linalg::outer2(&vb))).unwrap();
    let a = MeasurementSetting::new(1.3, 0.2);
    let b = MeasurementSetting::new(0.1, PI);
    let pa = marginal_prob(&rho, Side::A, a).unwrap();
    let pb = marginal_prob(&rho, Side::B, b).unwrap();
    assert!((joint_prob(&rho, a, b).unwrap() - pa * pb).abs() < 1e-12);
}
