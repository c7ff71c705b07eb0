//! CH-form Bell functionals.
//!
//! A functional is a signed rational combination of joint probabilities
//! `P(0,0|x,y)` and one-sided marginals `P_A(0|x)`, `P_B(0|y)`, compared with
//! a local bound (0 for CH-form inequalities). Text format:
//!
//! ```text
//! # comment
//! settings A=2 B=2
//! J 0 0 1
//! J 0 1 1
//! J 1 0 1
//! J 1 1 -1
//! MA 0 -1
//! MB 0 -1
//! bound 0
//! ```

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::linalg;
use crate::qstate::{self, MeasurementSetting, TwoQubitState};
use crate::{Error, Result};

/// Exact coefficient of a functional term.
pub type Coefficient = Ratio<i64>;

fn int(n: i64) -> Coefficient {
    Coefficient::from_integer(n)
}

fn to_f64(c: &Coefficient) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// The three functionals shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Chsh,
    I3322,
    A5,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Chsh, Builtin::I3322, Builtin::A5];

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Chsh => "CHSH",
            Builtin::I3322 => "I3322",
            Builtin::A5 => "A5",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chsh" => Ok(Builtin::Chsh),
            "i3322" => Ok(Builtin::I3322),
            "a5" => Ok(Builtin::A5),
            _ => Err(Error::invalid(format!(
                "unknown inequality '{s}' (expected chsh, i3322 or a5)"
            ))),
        }
    }
}

/// CH-form bipartite Bell functional with two outcomes per setting.
///
/// Equality compares the defining coefficients and bound, not the name.
#[derive(Debug, Clone)]
pub struct BellFunctional {
    name: String,
    n_a: usize,
    n_b: usize,
    joint: BTreeMap<(usize, usize), Coefficient>,
    marg_a: BTreeMap<usize, Coefficient>,
    marg_b: BTreeMap<usize, Coefficient>,
    bound: Coefficient,
}

impl PartialEq for BellFunctional {
    fn eq(&self, other: &Self) -> bool {
        self.n_a == other.n_a
            && self.n_b == other.n_b
            && self.joint == other.joint
            && self.marg_a == other.marg_a
            && self.marg_b == other.marg_b
            && self.bound == other.bound
    }
}

impl BellFunctional {
    /// Build and validate a functional. Zero coefficients are dropped.
    pub fn new(
        name: impl Into<String>,
        n_a: usize,
        n_b: usize,
        joint: impl IntoIterator<Item = ((usize, usize), Coefficient)>,
        marg_a: impl IntoIterator<Item = (usize, Coefficient)>,
        marg_b: impl IntoIterator<Item = (usize, Coefficient)>,
        bound: Coefficient,
    ) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::invalid("each party needs at least one setting"));
        }
        let joint: BTreeMap<_, _> = joint.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let marg_a: BTreeMap<_, _> = marg_a.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let marg_b: BTreeMap<_, _> = marg_b.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if joint.is_empty() {
            return Err(Error::invalid("functional has no nonzero joint coefficient"));
        }
        if let Some(&(x, y)) = joint.keys().find(|&&(x, y)| x >= n_a || y >= n_b) {
            return Err(Error::invalid(format!("joint term ({x}, {y}) out of range")));
        }
        if let Some(x) = marg_a.keys().find(|&&x| x >= n_a) {
            return Err(Error::invalid(format!("Alice marginal {x} out of range")));
        }
        if let Some(y) = marg_b.keys().find(|&&y| y >= n_b) {
            return Err(Error::invalid(format!("Bob marginal {y} out of range")));
        }
        Ok(Self {
            name: name.into(),
            n_a,
            n_b,
            joint,
            marg_a,
            marg_b,
            bound,
        })
    }

    pub fn builtin(which: Builtin) -> Self {
        let (n, joint, marg_a, marg_b): (usize, &[(usize, usize, i64)], &[(usize, i64)], &[(usize, i64)]) =
            match which {
                Builtin::Chsh => (
                    2,
                    &[(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, -1)],
                    &[(0, -1)],
                    &[(0, -1)],
                ),
                Builtin::I3322 => (
                    3,
                    &[
                        (0, 0, 1),
                        (0, 1, 1),
                        (0, 2, 1),
                        (1, 0, 1),
                        (1, 1, 1),
                        (1, 2, -1),
                        (2, 0, 1),
                        (2, 1, -1),
                    ],
                    &[(0, -2), (1, -1)],
                    &[(0, -1)],
                ),
                Builtin::A5 => (
                    4,
                    &[
                        (0, 1, 1),
                        (0, 2, 1),
                        (0, 3, -1),
                        (1, 0, 1),
                        (1, 1, 1),
                        (1, 2, -1),
                        (1, 3, 1),
                        (2, 0, 1),
                        (2, 2, 1),
                        (2, 3, 1),
                        (3, 0, 1),
                        (3, 3, -1),
                    ],
                    &[(0, -1), (1, -1), (2, -2)],
                    &[(0, -1), (1, -1)],
                ),
            };
        let f = Self::new(
            which.name(),
            n,
            n,
            joint.iter().map(|&(x, y, c)| ((x, y), int(c))),
            marg_a.iter().map(|&(x, c)| (x, int(c))),
            marg_b.iter().map(|&(y, c)| (y, int(c))),
            int(0),
        )
        .expect("built-in functionals are valid");
        // The tables above are written with the heavier marginals on the
        // first party. The reference one-sided (η_A = 1) numbers put those
        // marginals on the lossy side, so I3322 and A5 are stored transposed.
        match which {
            Builtin::Chsh => f,
            Builtin::I3322 | Builtin::A5 => f.swapped(),
        }
    }

    /// Parse the line-based text format; the result is named "custom".
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "custom")
    }

    pub fn parse_named(text: &str, name: &str) -> Result<Self> {
        let mut dims: Option<(usize, usize)> = None;
        let mut joint = BTreeMap::new();
        let mut marg_a = BTreeMap::new();
        let mut marg_b = BTreeMap::new();
        let mut bound: Option<(usize, Coefficient)> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((bound_line, _)) = bound {
                return Err(Error::parse(
                    line_no,
                    format!("content after the bound line (line {bound_line})"),
                ));
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let keyword = tokens[0];
            if keyword == "settings" {
                if dims.is_some() {
                    return Err(Error::parse(line_no, "duplicate settings header"));
                }
                dims = Some(parse_settings_header(&tokens, line_no)?);
                continue;
            }
            let (n_a, n_b) = dims.ok_or_else(|| {
                Error::parse(line_no, "missing 'settings A=<n> B=<n>' header before terms")
            })?;
            match keyword {
                "J" => {
                    expect_arity(&tokens, 4, line_no)?;
                    let x = parse_index(tokens[1], n_a, "Alice", line_no)?;
                    let y = parse_index(tokens[2], n_b, "Bob", line_no)?;
                    let c = parse_coefficient(tokens[3], line_no)?;
                    if joint.insert((x, y), c).is_some() {
                        return Err(Error::parse(line_no, format!("duplicate joint term J {x} {y}")));
                    }
                }
                "MA" | "MB" => {
                    expect_arity(&tokens, 3, line_no)?;
                    let (limit, who, map) = if keyword == "MA" {
                        (n_a, "Alice", &mut marg_a)
                    } else {
                        (n_b, "Bob", &mut marg_b)
                    };
                    let i = parse_index(tokens[1], limit, who, line_no)?;
                    let c = parse_coefficient(tokens[2], line_no)?;
                    if map.insert(i, c).is_some() {
                        return Err(Error::parse(line_no, format!("duplicate marginal term {keyword} {i}")));
                    }
                }
                "bound" => {
                    expect_arity(&tokens, 2, line_no)?;
                    bound = Some((line_no, parse_coefficient(tokens[1], line_no)?));
                }
                other => {
                    return Err(Error::parse(line_no, format!("unknown keyword '{other}'")));
                }
            }
        }

        let last_line = text.lines().count().max(1);
        let (n_a, n_b) = dims.ok_or_else(|| Error::parse(last_line, "missing 'settings' header"))?;
        let (_, bound) = bound.ok_or_else(|| Error::parse(last_line, "missing 'bound' line"))?;
        Self::new(name, n_a, n_b, joint, marg_a, marg_b, bound)
            .map_err(|e| Error::parse(last_line, e.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Number of local settings, `n_A + n_B`.
    pub fn n_settings(&self) -> usize {
        self.n_a + self.n_b
    }

    /// Free measurement parameters `2 (n_A + n_B)`.
    pub fn n_parameters(&self) -> usize {
        2 * self.n_settings()
    }

    pub fn joint_coefficient(&self, x: usize, y: usize) -> Coefficient {
        self.joint.get(&(x, y)).copied().unwrap_or_else(Coefficient::zero)
    }

    pub fn alice_marginal(&self, x: usize) -> Coefficient {
        self.marg_a.get(&x).copied().unwrap_or_else(Coefficient::zero)
    }

    pub fn bob_marginal(&self, y: usize) -> Coefficient {
        self.marg_b.get(&y).copied().unwrap_or_else(Coefficient::zero)
    }

    pub fn joint_terms(&self) -> impl Iterator<Item = ((usize, usize), Coefficient)> + '_ {
        self.joint.iter().map(|(k, v)| (*k, *v))
    }

    pub fn alice_terms(&self) -> impl Iterator<Item = (usize, Coefficient)> + '_ {
        self.marg_a.iter().map(|(k, v)| (*k, *v))
    }

    pub fn bob_terms(&self) -> impl Iterator<Item = (usize, Coefficient)> + '_ {
        self.marg_b.iter().map(|(k, v)| (*k, *v))
    }

    pub fn bound(&self) -> Coefficient {
        self.bound
    }

    /// Every coefficient (and the bound) multiplied by `factor`.
    pub fn scaled(&self, factor: Coefficient) -> Result<Self> {
        if factor <= Coefficient::zero() {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Self::new(
            self.name.clone(),
            self.n_a,
            self.n_b,
            self.joint.iter().map(|(k, c)| (*k, *c * factor)),
            self.marg_a.iter().map(|(k, c)| (*k, *c * factor)),
            self.marg_b.iter().map(|(k, c)| (*k, *c * factor)),
            self.bound * factor,
        )
    }

    /// Exchange the roles of Alice and Bob.
    pub fn swapped(&self) -> Self {
        Self {
            name: self.name.clone(),
            n_a: self.n_b,
            n_b: self.n_a,
            joint: self.joint.iter().map(|(&(x, y), c)| ((y, x), *c)).collect(),
            marg_a: self.marg_b.clone(),
            marg_b: self.marg_a.clone(),
            bound: self.bound,
        }
    }
}

fn expect_arity(tokens: &[&str], n: usize, line: usize) -> Result<()> {
    if tokens.len() != n {
        return Err(Error::parse(
            line,
            format!("'{}' expects {} fields, found {}", tokens[0], n - 1, tokens.len() - 1),
        ));
    }
    Ok(())
}

fn parse_settings_header(tokens: &[&str], line: usize) -> Result<(usize, usize)> {
    let mut n_a = None;
    let mut n_b = None;
    for tok in &tokens[1..] {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected KEY=VALUE, found '{tok}'")))?;
        let n: usize = value
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid settings count '{value}'")))?;
        if n == 0 {
            return Err(Error::parse(line, "settings counts must be positive"));
        }
        match key {
            "A" if n_a.is_none() => n_a = Some(n),
            "B" if n_b.is_none() => n_b = Some(n),
            _ => return Err(Error::parse(line, format!("unexpected settings field '{tok}'"))),
        }
    }
    match (n_a, n_b) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::parse(line, "settings header needs both A=<n> and B=<n>")),
    }
}

fn parse_index(tok: &str, limit: usize, who: &str, line: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid index '{tok}'")))?;
    if i >= limit {
        return Err(Error::parse(
            line,
            format!("{who} setting index {i} out of range (declared {limit})"),
        ));
    }
    Ok(i)
}

/// Decimal integer or `p/q`.
pub fn parse_coefficient(tok: &str, line: usize) -> Result<Coefficient> {
    let bad = || Error::parse(line, format!("coefficient '{tok}' is not an integer or p/q rational"));
    match tok.split_once('/') {
        Some((num, den)) => {
            let num: i64 = num.parse().map_err(|_| bad())?;
            let den: i64 = den.parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(Error::parse(line, "zero denominator"));
            }
            Ok(Coefficient::new(num, den))
        }
        None => tok.parse::<i64>().map(int).map_err(|_| bad()),
    }
}

/// Canonical text form, parseable by [`BellFunctional::parse`].
impl fmt::Display for BellFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.name)?;
        writeln!(f, "settings A={} B={}", self.n_a, self.n_b)?;
        for ((x, y), c) in &self.joint {
            writeln!(f, "J {x} {y} {c}")?;
        }
        for (x, c) in &self.marg_a {
            writeln!(f, "MA {x} {c}")?;
        }
        for (y, c) in &self.marg_b {
            writeln!(f, "MB {y} {c}")?;
        }
        writeln!(f, "bound {}", self.bound)
    }
}

/// Measurement settings for both parties.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingsAssignment {
    pub alice: Vec<MeasurementSetting>,
    pub bob: Vec<MeasurementSetting>,
}

impl SettingsAssignment {
    pub fn new(alice: Vec<MeasurementSetting>, bob: Vec<MeasurementSetting>) -> Self {
        Self { alice, bob }
    }

    /// Decode `(phi_1..phi_k, nu_1..nu_k)` with `k = n_a + n_b`, Alice first.
    pub fn from_angles(n_a: usize, n_b: usize, phis: &[f64], nus: &[f64]) -> Result<Self> {
        let k = n_a + n_b;
        if phis.len() != k || nus.len() != k {
            return Err(Error::invalid(format!(
                "expected {k} orientation and {k} phase angles, got {} and {}",
                phis.len(),
                nus.len()
            )));
        }
        let mut settings = phis.iter().zip(nus).map(|(&p, &n)| MeasurementSetting::new(p, n));
        let alice = settings.by_ref().take(n_a).collect();
        let bob = settings.collect();
        Ok(Self { alice, bob })
    }

    /// Swap the parties' setting lists.
    pub fn swapped(&self) -> Self {
        Self {
            alice: self.bob.clone(),
            bob: self.alice.clone(),
        }
    }

    pub fn phis(&self) -> Vec<f64> {
        self.alice.iter().chain(&self.bob).map(|s| s.phi()).collect()
    }

    pub fn nus(&self) -> Vec<f64> {
        self.alice.iter().chain(&self.bob).map(|s| s.nu()).collect()
    }
}

/// Split of the functional value into its joint and marginal parts:
/// `value = j + k_a + k_b` at unit efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyDecomposition {
    /// `Σ c_xy P(0,0|x,y)`.
    pub j: f64,
    /// `Σ a_x P_A(0|x)`.
    pub k_a: f64,
    /// `Σ b_y P_B(0|y)`.
    pub k_b: f64,
}

impl EfficiencyDecomposition {
    pub fn new(j: f64, k_a: f64, k_b: f64) -> Self {
        Self { j, k_a, k_b }
    }

    /// Functional value with perfect detectors; positive means violation.
    pub fn ideal_value(&self) -> f64 {
        self.j + self.k_a + self.k_b
    }
}

/// Evaluate `f` on `rho` with the given settings.
pub fn evaluate(
    f: &BellFunctional,
    rho: &TwoQubitState,
    s: &SettingsAssignment,
) -> Result<EfficiencyDecomposition> {
    evaluate_settings(f, rho, &s.alice, &s.bob)
}

pub(crate) fn evaluate_settings(
    f: &BellFunctional,
    rho: &TwoQubitState,
    alice: &[MeasurementSetting],
    bob: &[MeasurementSetting],
) -> Result<EfficiencyDecomposition> {
    if alice.len() != f.n_a || bob.len() != f.n_b {
        return Err(Error::invalid(format!(
            "settings ({}, {}) do not match functional dimensions ({}, {})",
            alice.len(),
            bob.len(),
            f.n_a,
            f.n_b
        )));
    }
    if !f.bound.is_zero() {
        return Err(Error::invalid(
            "only CH-form functionals with local bound 0 can be evaluated",
        ));
    }
    let va: Vec<[Complex64; 2]> = alice.iter().map(|s| s.vector()).collect();
    let vb: Vec<[Complex64; 2]> = bob.iter().map(|s| s.vector()).collect();

    let mut j = 0.0;
    for (&(x, y), c) in &f.joint {
        let p = qstate::check_probability(qstate::joint_prob_vec(rho, &va[x], &vb[y]))?;
        j += to_f64(c) * p;
    }
    let mut k_a = 0.0;
    if !f.marg_a.is_empty() {
        let reduced = rho.reduced_a();
        for (&x, c) in &f.marg_a {
            let p = qstate::check_probability(linalg::expectation2(&reduced, &va[x]).re)?;
            k_a += to_f64(c) * p;
        }
    }
    let mut k_b = 0.0;
    if !f.marg_b.is_empty() {
        let reduced = rho.reduced_b();
        for (&y, c) in &f.marg_b {
            let p = qstate::check_probability(linalg::expectation2(&reduced, &vb[y]).re)?;
            k_b += to_f64(c) * p;
        }
    }
    Ok(EfficiencyDecomposition { j, k_a, k_b })
}
