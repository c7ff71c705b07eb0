//! Multistart search for the lowest critical efficiency.
//!
//! Parameter layout: `(φ_1..φ_k, ν_1..ν_k[, θ])` with `k = n_A + n_B`,
//! Alice's settings first. Each start is a BFGS descent on central
//! finite-difference gradients. Start points are drawn
//! from ChaCha8 (`rand_chacha`) seeded through `SeedableRng::seed_from_u64`;
//! a uniform double is `(next_u64() >> 11) * 2^-53`, so the stream is
//! identical on every platform.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

#[allow(unused_imports)] // std provides inherent float methods when it is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::detection::{self, CriticalEfficiency, DetectorModel};
use crate::inequality::{self, BellFunctional, EfficiencyDecomposition, SettingsAssignment};
use crate::qstate::{self, MeasurementSetting, NoiseSpec, TwoQubitState};
use crate::{Error, Result};

/// Objective value assigned to settings that give no violation for any
/// efficiency. Any constant above 1 keeps such points worse than every
/// genuine threshold.
pub const NO_VIOLATION_OBJECTIVE: f64 = 10.0;

/// Reported values must agree with their recomputation to this tolerance.
pub const CERTIFY_TOL: f64 = 1e-10;

/// Starts whose objective values differ by less than this are one minimum.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Objective values closer than this are ties, broken by larger violation.
const TIE_TOL: f64 = 1e-12;

/// Coincidence terms smaller than this are treated as carrying no violation.
pub const MIN_SLOPE: f64 = 1e-9;

/// [`detection::eta_crit`], except that a vanishing coincidence term counts
/// as no violation. Near product states both sides of the ratio go to zero
/// and the quotient is round-off.
pub fn guarded_eta_crit(d: &EfficiencyDecomposition, m: DetectorModel) -> CriticalEfficiency {
    if coincidence_slope(d, m) <= MIN_SLOPE {
        CriticalEfficiency::NoViolation
    } else {
        detection::eta_crit(d, m)
    }
}

fn coincidence_slope(d: &EfficiencyDecomposition, m: DetectorModel) -> f64 {
    match m {
        DetectorModel::Symmetric => d.j,
        DetectorModel::OneSidedPerfect => d.j + d.k_b,
    }
}

/// Whether the state angle is part of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    Fixed(f64),
    Free,
}

impl ThetaMode {
    pub fn is_free(&self) -> bool {
        matches!(self, ThetaMode::Free)
    }
}

/// What the search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveKind {
    /// Critical efficiency plus the violation-floor penalty.
    #[default]
    CriticalEfficiency,
    /// Negated unit-efficiency violation.
    Violation,
}

/// Settings angles and, optionally, the state angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    n_settings: usize,
    theta_free: bool,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, n_settings: usize, theta_free: bool) -> Result<Self> {
        let want = 2 * n_settings + usize::from(theta_free);
        if values.len() != want {
            return Err(Error::invalid(alloc::format!(
                "parameter vector has length {}, expected {want}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter vector has non-finite entries"));
        }
        Ok(Self {
            values,
            n_settings,
            theta_free,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn theta_free(&self) -> bool {
        self.theta_free
    }

    pub fn phis(&self) -> &[f64] {
        &self.values[..self.n_settings]
    }

    pub fn nus(&self) -> &[f64] {
        &self.values[self.n_settings..2 * self.n_settings]
    }

    /// State angle clamped into `[0, π/2]`, when it is a free parameter.
    pub fn theta(&self) -> Option<f64> {
        self.theta_free
            .then(|| clamp_theta(self.values[2 * self.n_settings]))
    }

    /// Angles reduced into `[0, 2π)`, θ clamped into `[0, π/2]`.
    pub fn normalized(&self) -> Self {
        let mut values = self.values.clone();
        let k = 2 * self.n_settings;
        for v in &mut values[..k] {
            *v = qstate::wrap_angle(*v);
        }
        if self.theta_free {
            values[k] = clamp_theta(values[k]);
        }
        Self {
            values,
            n_settings: self.n_settings,
            theta_free: self.theta_free,
        }
    }
}

fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(0.0, FRAC_PI_2)
}

/// Knobs of the multistart search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub n_starts: usize,
    pub seed: u64,
    /// Central-difference step.
    pub gradient_step: f64,
    /// Gradient-norm convergence tolerance.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Minimum unit-efficiency violation; 0 disables the constraint.
    pub violation_floor: f64,
    pub penalty_weight: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_starts: 1000,
            seed: 0,
            gradient_step: 1e-6,
            gradient_tolerance: 1e-8,
            max_iterations: 2000,
            violation_floor: 0.0,
            penalty_weight: 1000.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts must be at least 1"));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.gradient_step) || !positive(self.gradient_tolerance) {
            return Err(Error::invalid("gradient step and tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.violation_floor.is_finite() && self.violation_floor >= 0.0) {
            return Err(Error::invalid("violation floor must be non-negative"));
        }
        if !(self.penalty_weight.is_finite() && self.penalty_weight >= 0.0) {
            return Err(Error::invalid("penalty weight must be non-negative"));
        }
        Ok(())
    }
}

/// The function minimized by every start.
#[derive(Debug, Clone)]
pub struct Objective {
    functional: BellFunctional,
    model: DetectorModel,
    noise: NoiseSpec,
    theta_mode: ThetaMode,
    kind: ObjectiveKind,
    violation_floor: f64,
    penalty_weight: f64,
    fixed_state: Option<TwoQubitState>,
}

/// Critical-efficiency objective (plus floor penalty) for the problem.
pub fn objective(
    f: &BellFunctional,
    m: DetectorModel,
    noise: NoiseSpec,
    theta_mode: ThetaMode,
    cfg: &SearchConfig,
) -> Result<Objective> {
    Objective::new(f, m, noise, theta_mode, ObjectiveKind::CriticalEfficiency, cfg)
}

impl Objective {
    pub fn new(
        f: &BellFunctional,
        model: DetectorModel,
        noise: NoiseSpec,
        theta_mode: ThetaMode,
        kind: ObjectiveKind,
        cfg: &SearchConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        noise.validate()?;
        let fixed_state = match theta_mode {
            ThetaMode::Fixed(theta) => {
                if !(theta.is_finite() && (0.0..=FRAC_PI_2).contains(&theta)) {
                    return Err(Error::invalid("fixed state angle must lie in [0, pi/2]"));
                }
                Some(qstate::make_noisy(theta, noise)?)
            }
            ThetaMode::Free => None,
        };
        Ok(Self {
            functional: f.clone(),
            model,
            noise,
            theta_mode,
            kind,
            violation_floor: cfg.violation_floor,
            penalty_weight: cfg.penalty_weight,
            fixed_state,
        })
    }

    pub fn functional(&self) -> &BellFunctional {
        &self.functional
    }

    pub fn model(&self) -> DetectorModel {
        self.model
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn theta_mode(&self) -> ThetaMode {
        self.theta_mode
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn violation_floor(&self) -> f64 {
        self.violation_floor
    }

    pub fn dimension(&self) -> usize {
        self.functional.n_parameters() + usize::from(self.theta_mode.is_free())
    }

    fn check_dimension(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::invalid(alloc::format!(
                "parameter vector has length {}, objective expects {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// State angle encoded by (or fixed for) `x`.
    pub fn theta_at(&self, x: &[f64]) -> f64 {
        match self.theta_mode {
            ThetaMode::Fixed(theta) => theta,
            ThetaMode::Free => clamp_theta(x[self.functional.n_parameters()]),
        }
    }

    pub fn state_at(&self, x: &[f64]) -> Result<TwoQubitState> {
        self.check_dimension(x)?;
        match &self.fixed_state {
            Some(s) => Ok(s.clone()),
            None => qstate::make_noisy(self.theta_at(x), self.noise),
        }
    }

    pub fn settings_at(&self, x: &[f64]) -> Result<SettingsAssignment> {
        self.check_dimension(x)?;
        let k = self.functional.n_settings();
        SettingsAssignment::from_angles(
            self.functional.n_a(),
            self.functional.n_b(),
            &x[..k],
            &x[k..2 * k],
        )
    }

    /// Decomposition of the functional at `x`.
    pub fn decompose(&self, x: &[f64]) -> Result<EfficiencyDecomposition> {
        self.check_dimension(x)?;
        let k = self.functional.n_settings();
        let n_a = self.functional.n_a();
        let settings: Vec<MeasurementSetting> = (0..k)
            .map(|i| MeasurementSetting::new(x[i], x[k + i]))
            .collect();
        let (alice, bob) = settings.split_at(n_a);
        match &self.fixed_state {
            Some(rho) => inequality::evaluate_settings(&self.functional, rho, alice, bob),
            None => {
                let rho = qstate::make_noisy(self.theta_at(x), self.noise)?;
                inequality::evaluate_settings(&self.functional, &rho, alice, bob)
            }
        }
    }

    /// Objective value for a decomposition.
    /// Threshold as the search sees it; see [`guarded_eta_crit`].
    pub fn critical_efficiency(&self, d: &EfficiencyDecomposition) -> CriticalEfficiency {
        guarded_eta_crit(d, self.model)
    }

    pub fn value_of(&self, d: &EfficiencyDecomposition) -> f64 {
        match self.kind {
            ObjectiveKind::Violation => -d.ideal_value(),
            ObjectiveKind::CriticalEfficiency => {
                let base = match self.critical_efficiency(d) {
                    CriticalEfficiency::Threshold(eta) => eta,
                    CriticalEfficiency::NoViolation => NO_VIOLATION_OBJECTIVE,
                };
                let shortfall = self.violation_floor - d.ideal_value();
                if self.violation_floor > 0.0 && shortfall > 0.0 {
                    base + self.penalty_weight * shortfall
                } else {
                    base
                }
            }
        }
    }

    /// Objective at `x`; NaN when the point cannot be evaluated.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.decompose(x) {
            Ok(d) => self.value_of(&d),
            Err(_) => f64::NAN,
        }
    }
}

/// Result of one local descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Counted<'a, F> {
    f: &'a F,
    calls: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        (self.f)(x)
    }

    /// Central differences; false when any probe is non-finite.
    fn gradient(&mut self, x: &[f64], h: f64, scratch: &mut Vec<f64>, g: &mut [f64]) -> bool {
        scratch.clear();
        scratch.extend_from_slice(x);
        for i in 0..x.len() {
            scratch[i] = x[i] + h;
            let fp = self.eval(scratch);
            scratch[i] = x[i] - h;
            let fm = self.eval(scratch);
            scratch[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
            if !g[i].is_finite() {
                return false;
            }
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const ARMIJO_C1: f64 = 1e-4;
/// Longest trial step, in radians.
const MAX_STEP: f64 = 1.0;
const MAX_EXPANSIONS: usize = 40;

enum LineSearch {
    Accepted { alpha: f64, value: f64 },
    Stalled,
    NonFinite,
}

/// Backtracking Armijo search along `d`, expanding while the first trial
/// keeps improving.
fn line_search<F: Fn(&[f64]) -> f64>(
    f: &mut Counted<'_, F>,
    x: &[f64],
    fx: f64,
    d: &[f64],
    slope: f64,
    alpha0: f64,
    trial: &mut Vec<f64>,
) -> LineSearch {
    let dnorm = norm(d);
    let xscale = 1.0 + norm(x);
    let step_to = |alpha: f64, trial: &mut Vec<f64>, f: &mut Counted<'_, F>| {
        trial.clear();
        trial.extend(x.iter().zip(d).map(|(xi, di)| xi + alpha * di));
        f.eval(trial)
    };
    let mut alpha = alpha0;
    let mut first = true;
    loop {
        let ft = step_to(alpha, trial, f);
        if !ft.is_finite() {
            return LineSearch::NonFinite;
        }
        if ft <= fx + ARMIJO_C1 * alpha * slope && ft < fx {
            if !first {
                return LineSearch::Accepted { alpha, value: ft };
            }
            let mut best = (alpha, ft);
            for _ in 0..MAX_EXPANSIONS {
                let a2 = best.0 * 2.0;
                if a2 * dnorm > MAX_STEP {
                    break;
                }
                let f2 = step_to(a2, trial, f);
                if f2.is_finite() && f2 < best.1 {
                    best = (a2, f2);
                } else {
                    break;
                }
            }
            return LineSearch::Accepted {
                alpha: best.0,
                value: best.1,
            };
        }
        first = false;
        alpha *= 0.5;
        if alpha * dnorm <= f64::EPSILON * xscale {
            return LineSearch::Stalled;
        }
    }
}

/// Quasi-Newton (BFGS) descent from `x0` on finite-difference gradients.
///
/// Stops when the gradient norm drops below `cfg.gradient_tolerance`
/// (converged), after `cfg.max_iterations`, or when no descent step can be
/// found along the steepest-descent direction. A non-finite objective
/// abandons the trajectory at the last good point.
pub fn local_minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], cfg: &SearchConfig) -> LocalMinimum {
    descend(f, x0, cfg, f64::NEG_INFINITY)
}

/// [`local_minimize`] that also stops, flagged converged, as soon as the
/// value drops below `target`.
fn descend<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], cfg: &SearchConfig, target: f64) -> LocalMinimum {
    let n = x0.len();
    let h = cfg.gradient_step;
    let tol = cfg.gradient_tolerance;
    let mut counted = Counted { f, calls: 0 };
    let mut x = x0.to_vec();
    let mut fx = counted.eval(&x);
    let finish = |x: Vec<f64>, value: f64, converged: bool, iterations: usize, calls: usize| LocalMinimum {
        x,
        value,
        converged,
        iterations,
        evaluations: calls,
    };
    if !fx.is_finite() {
        return finish(x, fx, false, 0, counted.calls);
    }

    let mut scratch = Vec::with_capacity(n);
    let mut trial = Vec::with_capacity(n);
    let mut g = vec![0.0; n];
    if !counted.gradient(&x, h, &mut scratch, &mut g) {
        return finish(x, fx, false, 0, counted.calls);
    }
    // inverse Hessian estimate, row-major; `fresh` until the first curvature pair rescales it
    let mut inv = identity(n);
    let mut fresh = true;
    let mut d = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];

    for iter in 0..cfg.max_iterations {
        let gnorm = norm(&g);
        if gnorm < tol || fx < target {
            return finish(x, fx, true, iter, counted.calls);
        }
        mat_vec(&inv, &g, &mut d);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            reset(&mut inv, &mut fresh);
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = -gnorm * gnorm;
        }
        let alpha0 = if fresh { 0.1 / gnorm } else { 1.0 };
        let alpha0 = alpha0.min(MAX_STEP / norm(&d));

        let outcome = match line_search(&mut counted, &x, fx, &d, slope, alpha0, &mut trial) {
            LineSearch::Stalled if !fresh => {
                // retry once along steepest descent
                reset(&mut inv, &mut fresh);
                d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
                slope = -gnorm * gnorm;
                let alpha0 = (0.1 / gnorm).min(MAX_STEP / gnorm);
                line_search(&mut counted, &x, fx, &d, slope, alpha0, &mut trial)
            }
            other => other,
        };
        let (alpha, value) = match outcome {
            LineSearch::Accepted { alpha, value } => (alpha, value),
            LineSearch::Stalled | LineSearch::NonFinite => return finish(x, fx, false, iter, counted.calls),
        };
        for i in 0..n {
            s[i] = alpha * d[i];
            x[i] += s[i];
        }
        fx = value;
        if !counted.gradient(&x, h, &mut scratch, &mut g_new) {
            return finish(x, fx, false, iter + 1, counted.calls);
        }
        for i in 0..n {
            y[i] = g_new[i] - g[i];
        }
        core::mem::swap(&mut g, &mut g_new);
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                inv.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            bfgs_update(&mut inv, &s, &y, sy, &mut d);
        }
    }
    let converged = norm(&g) < tol;
    finish(x, fx, converged, cfg.max_iterations, counted.calls)
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn reset(inv: &mut [f64], fresh: &mut bool) {
    let n = (inv.len() as f64).sqrt() as usize;
    inv.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    *fresh = true;
}

fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * n..(i + 1) * n], v);
    }
}

/// `H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / sᵀy`.
fn bfgs_update(inv: &mut [f64], s: &[f64], y: &[f64], sy: f64, hy: &mut [f64]) {
    let n = s.len();
    let rho = 1.0 / sy;
    mat_vec(inv, y, hy);
    let yhy = dot(y, hy);
    let c = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            inv[i * n + j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Seeded start points: angles uniform in `[0, 2π)`, θ (when free) uniform
/// in `(0, π/2)`.
pub fn draw_starts(n_settings: usize, theta_free: bool, cfg: &SearchConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = |rng: &mut ChaCha8Rng| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (0..cfg.n_starts)
        .map(|_| {
            let mut x: Vec<f64> = (0..2 * n_settings).map(|_| unit(&mut rng) * TAU).collect();
            if theta_free {
                let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                x.push(u * FRAC_PI_2);
            }
            x
        })
        .collect()
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub index: usize,
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Violation a start must reach before the efficiency descent begins.
const ENTRY_VIOLATION: f64 = 1e-4;

/// Local descent from one start.
///
/// Starts without any violation sit on the flat [`NO_VIOLATION_OBJECTIVE`]
/// plateau where the gradient vanishes. Those are first moved uphill in
/// unit-efficiency violation until it exceeds [`ENTRY_VIOLATION`].
pub fn run_start(obj: &Objective, index: usize, x0: &[f64], cfg: &SearchConfig) -> StartResult {
    let mut start = x0.to_vec();
    if obj.kind() == ObjectiveKind::CriticalEfficiency && !(obj.value(&start) < NO_VIOLATION_OBJECTIVE) {
        let seeker = Objective {
            kind: ObjectiveKind::Violation,
            ..obj.clone()
        };
        let climb = |x: &[f64]| seeker.value(x);
        start = descend(&climb, &start, cfg, -ENTRY_VIOLATION).x;
    }
    let eval = |x: &[f64]| obj.value(x);
    let local = local_minimize(&eval, &start, cfg);
    StartResult {
        index,
        x: local.x,
        value: local.value,
        converged: local.converged,
    }
}

/// Best point of a multistart run with independently recomputed figures.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    /// Normalized best parameters.
    pub best: ParameterVector,
    /// `best` decoded into per-party settings.
    pub settings: SettingsAssignment,
    /// State angle used at the best point.
    pub theta: f64,
    pub decomposition: EfficiencyDecomposition,
    pub eta_crit: CriticalEfficiency,
    /// Unit-efficiency violation at the best point.
    pub ideal_value: f64,
    pub objective_value: f64,
    /// Whether `ideal_value` reaches the configured violation floor.
    pub meets_floor: bool,
    /// Fraction of starts that reached the gradient tolerance inside the
    /// violating region.
    pub converged_fraction: f64,
    /// Clusters of start results (within [`CLUSTER_TOL`]) in the violating
    /// region.
    pub distinct_minima: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl OptimizationOutcome {
    /// Recompute the reported figures from `best` and compare.
    pub fn verify(&self, obj: &Objective) -> Result<()> {
        let rho = qstate::make_noisy(self.theta, obj.noise())?;
        let d = inequality::evaluate(obj.functional(), &rho, &self.settings)?;
        let eta = obj.critical_efficiency(&d);
        let close = |a: f64, b: f64| (a - b).abs() <= CERTIFY_TOL;
        let eta_ok = match (eta, self.eta_crit) {
            (CriticalEfficiency::Threshold(a), CriticalEfficiency::Threshold(b)) => close(a, b),
            (CriticalEfficiency::NoViolation, CriticalEfficiency::NoViolation) => true,
            _ => false,
        };
        if !eta_ok || !close(d.ideal_value(), self.ideal_value) {
            return Err(Error::numeric(
                "reported critical efficiency or violation does not match recomputation",
            ));
        }
        Ok(())
    }
}

fn is_violating(obj: &Objective, value: f64) -> bool {
    match obj.kind() {
        ObjectiveKind::CriticalEfficiency => value < NO_VIOLATION_OBJECTIVE,
        ObjectiveKind::Violation => value < 0.0,
    }
}

/// Pick the best start (ties broken by larger violation, then lower index),
/// recompute its figures and collect run statistics.
pub fn reduce(obj: &Objective, cfg: &SearchConfig, results: &[StartResult]) -> Result<OptimizationOutcome> {
    let finite: Vec<&StartResult> = results.iter().filter(|r| r.value.is_finite()).collect();
    let best_value = finite
        .iter()
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);
    if !best_value.is_finite() {
        return Err(Error::numeric("no start produced a finite objective value"));
    }
    let mut best: Option<(&StartResult, f64)> = None;
    for r in finite.iter().filter(|r| r.value <= best_value + TIE_TOL) {
        let ideal = obj.decompose(&r.x)?.ideal_value();
        let better = match best {
            None => true,
            Some((b, b_ideal)) => ideal > b_ideal || (ideal == b_ideal && r.index < b.index),
        };
        if better {
            best = Some((r, ideal));
        }
    }
    let (winner, _) = best.expect("at least one finite start");

    let n_settings = obj.functional().n_settings();
    let theta_free = obj.theta_mode().is_free();
    let params = ParameterVector::new(winner.x.clone(), n_settings, theta_free)?.normalized();
    let theta = obj.theta_at(params.values());
    let settings = obj.settings_at(params.values())?;
    let decomposition = obj.decompose(params.values())?;
    let objective_value = obj.value_of(&decomposition);
    if !((objective_value - winner.value).abs() <= CERTIFY_TOL) {
        return Err(Error::numeric(alloc::format!(
            "recomputed objective {objective_value} differs from search value {}",
            winner.value
        )));
    }
    let eta_crit = obj.critical_efficiency(&decomposition);
    let ideal_value = decomposition.ideal_value();

    let mut violating: Vec<f64> = finite
        .iter()
        .map(|r| r.value)
        .filter(|&v| is_violating(obj, v))
        .collect();
    violating.sort_by(|a, b| a.total_cmp(b));
    let distinct_minima = if violating.is_empty() {
        0
    } else {
        1 + violating.windows(2).filter(|w| w[1] - w[0] > CLUSTER_TOL).count()
    };
    let converged = results
        .iter()
        .filter(|r| r.converged && is_violating(obj, r.value))
        .count();

    let outcome = OptimizationOutcome {
        best: params,
        settings,
        theta,
        decomposition,
        eta_crit,
        ideal_value,
        objective_value,
        meets_floor: ideal_value >= obj.violation_floor(),
        converged_fraction: converged as f64 / results.len().max(1) as f64,
        distinct_minima,
        n_starts: cfg.n_starts,
        seed: cfg.seed,
    };
    outcome.verify(obj)?;
    Ok(outcome)
}

/// Serial multistart search for the lowest critical efficiency.
pub fn multistart(
    f: &BellFunctional,
    m: DetectorModel,
    noise: NoiseSpec,
    theta_mode: ThetaMode,
    cfg: &SearchConfig,
) -> Result<OptimizationOutcome> {
    let obj = objective(f, m, noise, theta_mode, cfg)?;
    search(&obj, cfg)
}

/// Serial multistart search on a prepared objective.
pub fn search(obj: &Objective, cfg: &SearchConfig) -> Result<OptimizationOutcome> {
    let starts = draw_starts(obj.functional().n_settings(), obj.theta_mode().is_free(), cfg);
    let results: Vec<StartResult> = starts
        .iter()
        .enumerate()
        .map(|(i, x0)| run_start(obj, i, x0, cfg))
        .collect();
    reduce(obj, cfg, &results)
}
