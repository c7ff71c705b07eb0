//! Two-qubit states `C|HV> + S|VH>` under colored, white and mixed noise,
//! rank-1 local projectors and the outcome probabilities a Bell functional
//! needs.
//!
//! The product basis is ordered `(|HH>, |HV>, |VH>, |VV>)`, qubit A first.
//! The measurement basis vectors `|+>, |->` are identified with `|H>, |V>`.

use core::f64::consts::{FRAC_PI_2, TAU};
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
#[allow(unused_imports)] // std provides inherent float methods when it is linked
use num_traits::Float;

use crate::linalg::{self, Matrix2, Matrix4, ZERO};
use crate::{Error, Result};

/// Entrywise tolerance for the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|trace(rho) - 1|`.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Probabilities this far outside [0, 1] are clipped; further is an error.
pub const PROB_TOL: f64 = 1e-10;

const HV: usize = 1;
const VH: usize = 2;

/// Reduce an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x - TAU * (x / TAU).floor();
    if r >= TAU || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// State angle of `cos θ |HV> + sin θ |VH>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureStateParam {
    theta: f64,
}

impl PureStateParam {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("state angle must be finite"));
        }
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::invalid("state angle must lie in [0, pi/2]"));
        }
        Ok(Self { theta })
    }

    /// State with `min(C,S)/max(C,S) = ratio` and `C ≥ S` (θ = atan(ratio)).
    pub fn from_entanglement_ratio(ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::invalid("entanglement ratio C/S must lie in (0, 1]"));
        }
        Self::new(libm::atan(ratio))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cos(&self) -> f64 {
        libm::cos(self.theta)
    }

    pub fn sin(&self) -> f64 {
        libm::sin(self.theta)
    }

    /// `C/S` folded into [0, 1]: 0 is a product state, 1 maximally entangled.
    pub fn entanglement_ratio(&self) -> f64 {
        entanglement_ratio(self.theta)
    }
}

/// `C/S` folded into [0, 1] for any real angle.
pub fn entanglement_ratio(theta: f64) -> f64 {
    let c = libm::cos(theta).abs();
    let s = libm::sin(theta).abs();
    if s >= c {
        c / s
    } else {
        s / c
    }
}

/// Validated 4x4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4,
}

impl TwoQubitState {
    /// Wrap a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: Matrix4) -> Result<Self> {
        let s = Self { rho };
        s.validate()?;
        Ok(s)
    }

    fn from_trusted(rho: Matrix4) -> Self {
        Self { rho }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            for j in 0..4 {
                if !(self.rho[i][j].re.is_finite() && self.rho[i][j].im.is_finite()) {
                    return Err(Error::numeric("density matrix has non-finite entries"));
                }
                if (self.rho[i][j] - self.rho[j][i].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::numeric("density matrix is not Hermitian"));
                }
            }
        }
        let tr = linalg::trace4(&self.rho);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::numeric("density matrix trace differs from 1"));
        }
        if self.eigenvalues()[0] < -PSD_TOL {
            return Err(Error::numeric("density matrix is not positive semidefinite"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Matrix4 {
        &self.rho
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row][col]
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace4(&self.rho)
    }

    /// `trace(rho^2)`.
    pub fn purity(&self) -> f64 {
        linalg::trace4(&linalg::mul4(&self.rho, &self.rho)).re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 4] {
        linalg::hermitian_eigenvalues4(&self.rho)
    }

    /// Reduced state of qubit A.
    pub fn reduced_a(&self) -> Matrix2 {
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = self.rho[2 * i][2 * j] + self.rho[2 * i + 1][2 * j + 1];
            }
        }
        m
    }

    /// Reduced state of qubit B.
    pub fn reduced_b(&self) -> Matrix2 {
        let mut m = [[ZERO; 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                m[k][l] = self.rho[k][l] + self.rho[2 + k][2 + l];
            }
        }
        m
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &TwoQubitState, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid("mixing weight must lie in [0, 1]"));
        }
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.rho[i][j] * weight + other.rho[i][j] * (1.0 - weight);
            }
        }
        Ok(Self::from_trusted(m))
    }

    /// Apply `sigma_x` to both qubits: `C|HV> + S|VH>` becomes `C|VH> + S|HV>`.
    pub fn flipped(&self) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[3 - i][3 - j] = self.rho[i][j];
            }
        }
        Self::from_trusted(m)
    }
}

/// Prints the matrix as four rows of `re+im i` with 12 significant digits.
impl fmt::Display for TwoQubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rho {
            for (j, z) in row.iter().enumerate() {
                if j > 0 {
                    f.write_str("  ")?;
                }
                write!(f, "{:.11e}{:+.11e}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Orientation `phi` and phase `nu` of a rank-1 qubit projector
/// `|v><v|`, `|v> = sin(phi)|H> + e^{i nu} cos(phi)|V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetting {
    phi: f64,
    nu: f64,
}

impl MeasurementSetting {
    /// Angles are stored reduced into `[0, 2π)`.
    pub fn new(phi: f64, nu: f64) -> Self {
        Self {
            phi: wrap_angle(phi),
            nu: wrap_angle(nu),
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The projected-onto vector `|v>` in the `(|H>, |V>)` basis.
    pub fn vector(&self) -> [Complex64; 2] {
        let (s, c) = libm::sincos(self.phi);
        [
            Complex64::new(s, 0.0),
            Complex64::new(c * libm::cos(self.nu), c * libm::sin(self.nu)),
        ]
    }

    /// Setting seen through `sigma_x`: `(phi, nu) -> (pi/2 - phi, -nu)`.
    pub fn flipped(&self) -> Self {
        Self::new(FRAC_PI_2 - self.phi, -self.nu)
    }
}

/// Source of decoherence acting on the pure state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Both photons partially distinguishable: coherences scaled by `(1-p)^2`.
    ColoredPhotonPhoton,
    /// Only the photon affected: coherences scaled by `(1-p)`.
    ColoredAtomPhoton,
    /// `(1-w)|psi><psi| + (w/4) 1`.
    White,
    /// White noise of level `w` on top of photon-photon colored noise `p`.
    Mixed,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::ColoredPhotonPhoton,
        NoiseKind::ColoredAtomPhoton,
        NoiseKind::White,
        NoiseKind::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::ColoredPhotonPhoton => "colored-pp",
            NoiseKind::ColoredAtomPhoton => "colored-ap",
            NoiseKind::White => "white",
            NoiseKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "colored-pp" | "colored-photon-photon" | "pp" => Ok(NoiseKind::ColoredPhotonPhoton),
            "colored-ap" | "colored-atom-photon" | "ap" => Ok(NoiseKind::ColoredAtomPhoton),
            "white" => Ok(NoiseKind::White),
            "mixed" => Ok(NoiseKind::Mixed),
            _ => Err(Error::invalid(alloc::format!(
                "unknown noise kind '{s}' (expected colored-pp, colored-ap, white or mixed)"
            ))),
        }
    }
}

/// Noise kind plus its levels. `p` is the colored level, `w` the white level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub p: f64,
    pub w: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, p: f64, w: f64) -> Result<Self> {
        let spec = Self { kind, p, w };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::ColoredPhotonPhoton,
            p: 0.0,
            w: 0.0,
        }
    }

    pub fn colored_pp(p: f64) -> Result<Self> {
        Self::new(NoiseKind::ColoredPhotonPhoton, p, 0.0)
    }

    pub fn colored_ap(p: f64) -> Result<Self> {
        Self::new(NoiseKind::ColoredAtomPhoton, p, 0.0)
    }

    pub fn white(w: f64) -> Result<Self> {
        Self::new(NoiseKind::White, 0.0, w)
    }

    pub fn mixed(p: f64, w: f64) -> Result<Self> {
        Self::new(NoiseKind::Mixed, p, w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !ok(self.p) {
            return Err(Error::invalid("colored noise level p must lie in [0, 1]"));
        }
        if !ok(self.w) {
            return Err(Error::invalid("white noise level w must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `|psi><psi|` with `|psi> = cos θ |HV> + sin θ |VH>`.
pub fn make_pure(theta: f64) -> Result<TwoQubitState> {
    if !theta.is_finite() {
        return Err(Error::invalid("state angle must be finite"));
    }
    Ok(TwoQubitState::from_trusted(colored(theta, 1.0)))
}

/// Pure-state diagonal with the HV/VH coherences scaled by `coherence`.
fn colored(theta: f64, coherence: f64) -> Matrix4 {
    let (s, c) = libm::sincos(theta);
    let mut m = [[ZERO; 4]; 4];
    m[HV][HV] = Complex64::new(c * c, 0.0);
    m[VH][VH] = Complex64::new(s * s, 0.0);
    let off = Complex64::new(coherence * c * s, 0.0);
    m[HV][VH] = off;
    m[VH][HV] = off;
    m
}

fn add_white(mut m: Matrix4, w: f64) -> Matrix4 {
    for (i, row) in m.iter_mut().enumerate() {
        for (j, z) in row.iter_mut().enumerate() {
            *z *= 1.0 - w;
            if i == j {
                *z += Complex64::new(w / 4.0, 0.0);
            }
        }
    }
    m
}

/// The pure state at angle `theta` degraded by `spec`.
pub fn make_noisy(theta: f64, spec: NoiseSpec) -> Result<TwoQubitState> {
    if !theta.is_finite() {
        return Err(Error::invalid("state angle must be finite"));
    }
    spec.validate()?;
    let one_minus_p = 1.0 - spec.p;
    let m = match spec.kind {
        NoiseKind::ColoredPhotonPhoton => colored(theta, one_minus_p * one_minus_p),
        NoiseKind::ColoredAtomPhoton => colored(theta, one_minus_p),
        NoiseKind::White => add_white(colored(theta, 1.0), spec.w),
        NoiseKind::Mixed => add_white(colored(theta, one_minus_p * one_minus_p), spec.w),
    };
    Ok(TwoQubitState::from_trusted(m))
}

/// `|v><v|` for the setting.
pub fn projector(s: MeasurementSetting) -> Matrix2 {
    linalg::outer2(&s.vector())
}

/// Which party a marginal refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

pub(crate) fn check_probability(raw: f64) -> Result<f64> {
    if !raw.is_finite() || raw < -PROB_TOL || raw > 1.0 + PROB_TOL {
        return Err(Error::numeric(alloc::format!(
            "probability {raw} outside [0, 1]"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Probability of the outcome pair "0,0": `trace[(P_a ⊗ P_b) rho]`.
pub fn joint_prob(
    rho: &TwoQubitState,
    a: MeasurementSetting,
    b: MeasurementSetting,
) -> Result<f64> {
    check_probability(joint_prob_vec(rho, &a.vector(), &b.vector()))
}

pub(crate) fn joint_prob_vec(rho: &TwoQubitState, a: &[Complex64; 2], b: &[Complex64; 2]) -> f64 {
    let v = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    linalg::expectation4(&rho.rho, &v).re
}

/// Probability of outcome "0" on one side, ignoring the other party.
pub fn marginal_prob(rho: &TwoQubitState, side: Side, s: MeasurementSetting) -> Result<f64> {
    let reduced = match side {
        Side::A => rho.reduced_a(),
        Side::B => rho.reduced_b(),
    };
    check_probability(linalg::expectation2(&reduced, &s.vector()).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_4;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_matrix_close(a: &Matrix4, b: &Matrix4, tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - b[i][j]).norm() < tol, "entry ({i},{j}): {} vs {}", a[i][j], b[i][j]);
            }
        }
    }

    #[test]
    fn pure_product_state() {
        let rho = make_pure(0.0).unwrap();
        let mut want = [[ZERO; 4]; 4];
        want[1][1] = c(1.0);
        assert_matrix_close(rho.matrix(), &want, 1e-15);
    }

    #[test]
    fn pure_maximally_entangled() {
        let rho = make_pure(FRAC_PI_4).unwrap();
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert!((rho.entry(i, j) - c(0.5)).norm() < 1e-15);
        }
        assert!(rho.entry(0, 0).norm() < 1e-15);
    }

    #[test]
    fn pure_state_purity_at_table_ratio() {
        let theta = 0.2041f64.atan();
        let rho = make_pure(theta).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((PureStateParam::new(theta).unwrap().entanglement_ratio() - 0.2041).abs() < 1e-12);
    }

    #[test]
    fn non_finite_angle_rejected() {
        assert!(matches!(make_pure(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(PureStateParam::new(2.0).is_err());
        assert!(PureStateParam::from_entanglement_ratio(0.0).is_err());
    }

    #[test]
    fn colored_zero_noise_is_pure() {
        let noisy = make_noisy(FRAC_PI_4, NoiseSpec::colored_pp(0.0).unwrap()).unwrap();
        assert_matrix_close(noisy.matrix(), make_pure(FRAC_PI_4).unwrap().matrix(), 1e-12);
    }

    #[test]
    fn colored_full_noise_is_diagonal() {
        let noisy = make_noisy(FRAC_PI_4, NoiseSpec::colored_pp(1.0).unwrap()).unwrap();
        let mut want = [[ZERO; 4]; 4];
        want[1][1] = c(0.5);
        want[2][2] = c(0.5);
        assert_matrix_close(noisy.matrix(), &want, 1e-12);
    }

    #[test]
    fn white_full_noise_is_maximally_mixed() {
        let noisy = make_noisy(FRAC_PI_4, NoiseSpec::white(1.0).unwrap()).unwrap();
        let mut want = [[ZERO; 4]; 4];
        for (i, row) in want.iter_mut().enumerate() {
            row[i] = c(0.25);
        }
        assert_matrix_close(noisy.matrix(), &want, 1e-12);
    }

    #[test]
    fn atom_photon_vs_photon_photon_coherence() {
        let ap = make_noisy(FRAC_PI_4, NoiseSpec::colored_ap(0.5).unwrap()).unwrap();
        let pp = make_noisy(FRAC_PI_4, NoiseSpec::colored_pp(0.5).unwrap()).unwrap();
        assert!((ap.entry(1, 2).re - 0.25).abs() < 1e-12);
        assert!((ap.entry(2, 1).re - 0.25).abs() < 1e-12);
        assert!((pp.entry(1, 2).re - 0.125).abs() < 1e-12);
    }

    #[test]
    fn noise_levels_out_of_range() {
        assert!(NoiseSpec::colored_pp(1.5).is_err());
        assert!(NoiseSpec::white(-0.1).is_err());
        let bad = NoiseSpec { kind: NoiseKind::Mixed, p: 0.1, w: f64::NAN };
        assert!(make_noisy(0.3, bad).is_err());
    }

    #[test]
    fn projector_examples() {
        let p = projector(MeasurementSetting::new(0.0, 1.234));
        assert!(p[0][0].norm() < 1e-15 && (p[1][1] - c(1.0)).norm() < 1e-15);
        let p = projector(MeasurementSetting::new(FRAC_PI_2, 0.0));
        assert!((p[0][0] - c(1.0)).norm() < 1e-15 && p[1][1].norm() < 1e-15);
        let p = projector(MeasurementSetting::new(FRAC_PI_4, 0.0));
        for row in p {
            for z in row {
                assert!((z - c(0.5)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn joint_probability_examples() {
        let hv = make_pure(0.0).unwrap();
        let h = MeasurementSetting::new(FRAC_PI_2, 0.0);
        let v = MeasurementSetting::new(0.0, 0.0);
        assert!((joint_prob(&hv, h, v).unwrap() - 1.0).abs() < 1e-15);
        assert!(joint_prob(&hv, v, v).unwrap().abs() < 1e-15);
        let bell = make_pure(FRAC_PI_4).unwrap();
        let diag = MeasurementSetting::new(FRAC_PI_4, 0.0);
        assert!((joint_prob(&bell, diag, diag).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn marginal_examples() {
        let hv = make_pure(0.0).unwrap();
        let h = MeasurementSetting::new(FRAC_PI_2, 0.0);
        assert!((marginal_prob(&hv, Side::A, h).unwrap() - 1.0).abs() < 1e-15);
        let bell = make_pure(FRAC_PI_4).unwrap();
        for k in 0..10 {
            let s = MeasurementSetting::new(0.37 * k as f64, 1.1 * k as f64);
            assert!((marginal_prob(&bell, Side::B, s).unwrap() - 0.5).abs() < 1e-12);
        }
        let noisy = make_noisy(FRAC_PI_4, NoiseSpec::colored_pp(0.3).unwrap()).unwrap();
        let diag = MeasurementSetting::new(FRAC_PI_4, 0.0);
        assert!((marginal_prob(&noisy, Side::A, diag).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probability_clipping_and_rejection() {
        assert_eq!(check_probability(-5e-11).unwrap(), 0.0);
        assert_eq!(check_probability(1.0 + 5e-11).unwrap(), 1.0);
        assert!(matches!(check_probability(-1e-6), Err(Error::NumericIntegrity(_))));
        assert!(check_probability(f64::NAN).is_err());
    }

    #[test]
    fn corrupted_matrix_rejected() {
        let mut m = *make_pure(0.3).unwrap().matrix();
        m[1][2] = c(0.9);
        assert!(matches!(TwoQubitState::from_matrix(m), Err(Error::NumericIntegrity(_))));
        let mut m = *make_pure(0.3).unwrap().matrix();
        m[1][2] = c(0.9);
        m[2][1] = c(0.9);
        // Hermitian, unit trace, but negative eigenvalue
        assert!(TwoQubitState::from_matrix(m).is_err());
    }

    #[test]
    fn display_table_has_four_rows() {
        let s = alloc::format!("{}", make_pure(FRAC_PI_4).unwrap());
        let rows: alloc::vec::Vec<&str> = s.lines().collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[1].contains("5.00000000000e-1+0.00000000000e0i"));
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - TAU)).abs() < 1e-15);
        let s = MeasurementSetting::new(1.0 + TAU, -2.0);
        assert!((s.phi() - 1.0).abs() < 1e-14);
        assert!((s.nu() - (TAU - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn sigma_x_flip_maps_probabilities() {
        let rho = make_noisy(0.4, NoiseSpec::colored_ap(0.2).unwrap()).unwrap();
        let a = MeasurementSetting::new(0.7, 1.3);
        let b = MeasurementSetting::new(2.1, 4.0);
        let direct = joint_prob(&rho, a, b).unwrap();
        let flipped = joint_prob(&rho.flipped(), a.flipped(), b.flipped()).unwrap();
        assert!((direct - flipped).abs() < 1e-12);
    }
}
