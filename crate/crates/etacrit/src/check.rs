//! Quick invariant suite behind `etacrit check`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use etacrit_core::optimize::{draw_starts, objective};
use etacrit_core::{
    joint_prob, make_noisy, marginal_prob, projector, BellFunctional, Builtin, DetectorModel, MeasurementSetting,
    NoiseKind, NoiseSpec, SearchConfig, Side, ThetaMode,
};

use crate::parallel;
use crate::scan::{self, SweepMode, SweepSpec};

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

/// Uniform angle pairs `(φ, ν)` in [0, 2π) from the search's own generator.
fn random_settings(n: usize, seed: u64) -> Vec<MeasurementSetting> {
    let cfg = SearchConfig {
        n_starts: n,
        seed,
        ..SearchConfig::default()
    };
    draw_starts(1, false, &cfg)
        .into_iter()
        .map(|x| MeasurementSetting::new(x[0], x[1]))
        .collect()
}

fn states() -> Result<(), String> {
    for kind in NoiseKind::ALL {
        for i in 0..20 {
            let theta = FRAC_PI_2 * i as f64 / 19.0;
            for a in 0..=10 {
                for b in 0..=10 {
                    let noise = NoiseSpec::new(kind, a as f64 / 10.0, b as f64 / 10.0).map_err(|e| e.to_string())?;
                    let rho = make_noisy(theta, noise).map_err(|e| e.to_string())?;
                    rho.validate().map_err(|e| format!("{kind} theta={theta} p/w={a}/{b}: {e}"))?;
                }
            }
        }
    }
    Ok(())
}

fn no_signaling() -> Result<(), String> {
    let s = random_settings(200, 11);
    for (k, pair) in s.chunks(2).enumerate() {
        let rho = make_noisy(0.1 + 0.01 * k as f64, NoiseSpec::mixed(0.2, 0.1).unwrap()).map_err(|e| e.to_string())?;
        let (a, b) = (pair[0], pair[1]);
        let b_perp = MeasurementSetting::new(b.phi() + FRAC_PI_2, b.nu());
        let a_perp = MeasurementSetting::new(a.phi() + FRAC_PI_2, a.nu());
        let p = |x, y| joint_prob(&rho, x, y).map_err(|e| e.to_string());
        let pa = marginal_prob(&rho, Side::A, a).map_err(|e| e.to_string())?;
        let pb = marginal_prob(&rho, Side::B, b).map_err(|e| e.to_string())?;
        if (p(a, b)? + p(a, b_perp)? - pa).abs() > 1e-12 || (p(a, b)? + p(a_perp, b)? - pb).abs() > 1e-12 {
            return Err(format!("marginals disagree with summed joints at pair {k}"));
        }
    }
    Ok(())
}

fn projectors() -> Result<(), String> {
    for s in random_settings(1000, 12) {
        let m = projector(s);
        for i in 0..2 {
            for j in 0..2 {
                let sq = m[i][0] * m[0][j] + m[i][1] * m[1][j];
                if (sq - m[i][j]).norm() > 1e-12 || (m[i][j] - m[j][i].conj()).norm() > 1e-12 {
                    return Err(format!("projector not idempotent/Hermitian at phi={} nu={}", s.phi(), s.nu()));
                }
            }
        }
        if ((m[0][0] + m[1][1]).re - 1.0).abs() > 1e-12 {
            return Err("projector trace is not 1".into());
        }
    }
    Ok(())
}

fn parser() -> Result<(), String> {
    for b in Builtin::ALL {
        let f = BellFunctional::builtin(b);
        let back = BellFunctional::parse(&f.to_string()).map_err(|e| e.to_string())?;
        if back != f {
            return Err(format!("{} does not survive a text round trip", f.name()));
        }
    }
    Ok(())
}

fn determinism() -> Result<(), String> {
    let f = BellFunctional::builtin(Builtin::Chsh);
    let cfg = SearchConfig {
        n_starts: 24,
        seed: 5,
        ..SearchConfig::default()
    };
    let theta = ThetaMode::Fixed(FRAC_PI_4);
    let noise = NoiseSpec::colored_pp(0.05).unwrap();
    let run = |jobs| parallel::multistart(&f, DetectorModel::Symmetric, noise, theta, &cfg, jobs);
    let a = run(1).map_err(|e| e.to_string())?;
    let b = run(1).map_err(|e| e.to_string())?;
    let c = run(3).map_err(|e| e.to_string())?;
    if a != b || a != c {
        return Err("repeated or parallel runs differ".into());
    }
    let mut spec = SweepSpec::new(SweepMode::CsSweep, vec![f.clone()], DetectorModel::Symmetric, NoiseKind::ColoredPhotonPhoton);
    spec.p_grid = vec![0.0, 0.1];
    spec.cs_grid = vec![0.5, 1.0];
    spec.search = SearchConfig { n_starts: 8, ..cfg };
    let one = scan::run(&spec).and_then(|r| scan::to_csv_string(&r)).map_err(|e| e.to_string())?;
    let two = scan::run(&spec).and_then(|r| scan::to_csv_string(&r)).map_err(|e| e.to_string())?;
    if one != two {
        return Err("CSV output differs between identical sweeps".into());
    }
    Ok(())
}

fn certified_reporting() -> Result<(), String> {
    let cfg = SearchConfig {
        n_starts: 16,
        seed: 9,
        ..SearchConfig::default()
    };
    for b in Builtin::ALL {
        let f = BellFunctional::builtin(b);
        for m in [DetectorModel::Symmetric, DetectorModel::OneSidedPerfect] {
            let obj = objective(&f, m, NoiseSpec::colored_ap(0.1).unwrap(), ThetaMode::Fixed(0.6), &cfg)
                .map_err(|e| e.to_string())?;
            let o = parallel::search(&obj, &cfg, 1).map_err(|e| e.to_string())?;
            o.verify(&obj).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

pub fn run_all() -> Vec<CheckResult> {
    let checks: [(&'static str, fn() -> Result<(), String>); 6] = [
        ("state PSD/trace/Hermiticity grid", states),
        ("no-signaling consistency", no_signaling),
        ("projector idempotence", projectors),
        ("built-in parser round trips", parser),
        ("run and CSV determinism", determinism),
        ("certified reporting", certified_reporting),
    ];
    checks
        .into_iter()
        .map(|(name, f)| CheckResult { name, outcome: f() })
        .collect()
}
