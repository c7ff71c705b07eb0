//! Inequality value under inefficient detectors and the critical efficiency.
//!
//! A missed detection counts as "not outcome 0", so every probability picks
//! up one factor of efficiency per detector it involves:
//! `P(0,0|x,y) -> η_A η_B P(0,0|x,y)`, `P_A(0|x) -> η_A P_A(0|x)`,
//! `P_B(0|y) -> η_B P_B(0|y)`.

use core::fmt;
use core::str::FromStr;

use crate::inequality::EfficiencyDecomposition;
use crate::{Error, Result};

/// Which detectors are lossy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorModel {
    /// `η_A = η_B = η` (photon-photon).
    Symmetric,
    /// `η_A = 1`, `η_B = η` (atom-photon).
    OneSidedPerfect,
}

impl DetectorModel {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorModel::Symmetric => "symmetric",
            DetectorModel::OneSidedPerfect => "one-sided",
        }
    }

    /// `(η_A, η_B)` for a single efficiency parameter.
    pub fn efficiencies(&self, eta: f64) -> (f64, f64) {
        match self {
            DetectorModel::Symmetric => (eta, eta),
            DetectorModel::OneSidedPerfect => (1.0, eta),
        }
    }
}

impl fmt::Display for DetectorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" | "sym" | "photon-photon" => Ok(DetectorModel::Symmetric),
            "one-sided" | "one-sided-perfect" | "atom-photon" => Ok(DetectorModel::OneSidedPerfect),
            _ => Err(Error::invalid(alloc::format!(
                "unknown detector model '{s}' (expected symmetric or one-sided)"
            ))),
        }
    }
}

/// Lowest efficiency above which the rewritten inequality is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalEfficiency {
    Threshold(f64),
    /// No efficiency in [0, 1] gives a violation.
    NoViolation,
}

impl CriticalEfficiency {
    pub fn value(&self) -> Option<f64> {
        match *self {
            CriticalEfficiency::Threshold(v) => Some(v),
            CriticalEfficiency::NoViolation => None,
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, CriticalEfficiency::Threshold(_))
    }
}

impl fmt::Display for CriticalEfficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalEfficiency::Threshold(v) => write!(f, "{v:.10}"),
            CriticalEfficiency::NoViolation => f.write_str("no-violation"),
        }
    }
}

/// Value of the efficiency-rewritten functional.
pub fn value_at_eta(d: &EfficiencyDecomposition, m: DetectorModel, eta: f64) -> Result<f64> {
    if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
        return Err(Error::invalid("efficiency must lie in [0, 1]"));
    }
    Ok(value_unchecked(d, m, eta))
}

fn value_unchecked(d: &EfficiencyDecomposition, m: DetectorModel, eta: f64) -> f64 {
    match m {
        DetectorModel::Symmetric => eta * eta * d.j + eta * (d.k_a + d.k_b),
        DetectorModel::OneSidedPerfect => eta * (d.j + d.k_b) + d.k_a,
    }
}

/// Closed-form root of [`value_at_eta`].
pub fn eta_crit(d: &EfficiencyDecomposition, m: DetectorModel) -> CriticalEfficiency {
    let (slope, offset) = match m {
        DetectorModel::Symmetric => (d.j, d.k_a + d.k_b),
        DetectorModel::OneSidedPerfect => (d.j + d.k_b, d.k_a),
    };
    if !(slope > 0.0) {
        return CriticalEfficiency::NoViolation;
    }
    let root = -offset / slope;
    if root.is_finite() && root <= 1.0 {
        CriticalEfficiency::Threshold(root.max(0.0))
    } else {
        CriticalEfficiency::NoViolation
    }
}

const BISECT_TOL: f64 = 1e-12;
const SCAN_STEPS: usize = 1000;

/// Root of [`value_at_eta`] by a sign-change scan from η = 1 downwards
/// followed by bisection. Independent of the closed form.
pub fn eta_crit_bisect(d: &EfficiencyDecomposition, m: DetectorModel) -> CriticalEfficiency {
    let v = |eta: f64| value_unchecked(d, m, eta);
    if !(v(1.0) > 0.0) {
        return CriticalEfficiency::NoViolation;
    }
    // walk down until the value stops being positive
    let mut hi = 1.0;
    let mut lo = None;
    for k in (0..SCAN_STEPS).rev() {
        let eta = k as f64 / SCAN_STEPS as f64;
        if v(eta) > 0.0 {
            hi = eta;
        } else {
            lo = Some(eta);
            break;
        }
    }
    let Some(mut lo) = lo else {
        return CriticalEfficiency::Threshold(0.0);
    };
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if v(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    CriticalEfficiency::Threshold(0.5 * (lo + hi))
}
