//! Growth-scale functions `alpha`, `beta`, `gamma` and sampled checks of the
//! classes L1 (subadditive up to a constant), L2 (stable under bounded shifts)
//! and L3 (subadditive), plus the asymptotic side conditions tying a triple
//! together.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleKind {
    /// `log^[p] x`.
    IteratedLog(u32),
    Identity,
    /// `x^s` with `0 < s <= 1`.
    PowerConcave(f64),
}

/// A scale function: the kind's formula above `cap_x0`, the constant
/// `cap_value` at and below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFn {
    pub kind: ScaleKind,
    pub cap_x0: f64,
    pub cap_value: f64,
}

/// Anything that can be sampled as a scale function by the class checks.
pub trait ScaleMap {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScaleMap for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

impl ScaleMap for ScaleFn {
    fn eval(&self, x: f64) -> f64 {
        ScaleFn::eval(self, x)
    }
}

fn iterate_exp(mut y: f64, times: u32) -> f64 {
    for _ in 0..times {
        y = y.exp();
    }
    y
}

fn iterate_ln(mut x: f64, times: u32) -> f64 {
    for _ in 0..times {
        x = x.ln();
    }
    x
}

impl ScaleFn {
    /// `log^[p]` with the cap at `exp^[p-1](e)`, where the value is 1.
    pub fn iterated_log(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::Argument("iterated log needs p >= 1".into()));
        }
        Ok(ScaleFn {
            kind: ScaleKind::IteratedLog(p),
            cap_x0: iterate_exp(1.0, p),
            cap_value: 1.0,
        })
    }

    pub fn identity() -> Self {
        ScaleFn {
            kind: ScaleKind::Identity,
            cap_x0: 0.0,
            cap_value: 0.0,
        }
    }

    pub fn power(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Argument(format!("power exponent {s} not in (0, 1]")));
        }
        Ok(ScaleFn {
            kind: ScaleKind::PowerConcave(s),
            cap_x0: 0.0,
            cap_value: 0.0,
        })
    }

    /// Moves the cap; the cap value follows the formula so the function stays continuous.
    pub fn with_cap(self, cap_x0: f64) -> Result<Self> {
        let value = self.formula(cap_x0);
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Argument(format!(
                "cap at {cap_x0} gives invalid value {value}"
            )));
        }
        Ok(ScaleFn {
            cap_x0,
            cap_value: value,
            ..self
        })
    }

    fn formula(&self, x: f64) -> f64 {
        match self.kind {
            ScaleKind::IteratedLog(p) => iterate_ln(x, p),
            ScaleKind::Identity => x,
            ScaleKind::PowerConcave(s) => x.powf(s),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.cap_x0 || x.is_nan() {
            self.cap_value
        } else {
            self.formula(x)
        }
    }

    /// `alpha(e^x)` without forming `e^x`; needed when callers hold an
    /// already-logged argument beyond the `f64` range.
    pub fn eval_exp(&self, x: f64) -> f64 {
        if x <= self.cap_x0.ln() {
            return self.cap_value;
        }
        match self.kind {
            ScaleKind::IteratedLog(p) => iterate_ln(x, p - 1),
            ScaleKind::Identity => x.exp(),
            ScaleKind::PowerConcave(s) => (s * x).exp(),
        }
    }

    /// `ln alpha(e^x)`, finite for every finite `x` above the cap.
    pub fn ln_eval_exp(&self, x: f64) -> f64 {
        if x <= self.cap_x0.ln() {
            return self.cap_value.ln();
        }
        match self.kind {
            ScaleKind::IteratedLog(p) => iterate_ln(x, p),
            ScaleKind::Identity => x,
            ScaleKind::PowerConcave(s) => s * x,
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.check_range(y)?;
        if y == self.cap_value {
            return Ok(self.cap_x0);
        }
        Ok(match self.kind {
            ScaleKind::IteratedLog(p) => iterate_exp(y, p),
            ScaleKind::Identity => y,
            ScaleKind::PowerConcave(s) => y.powf(1.0 / s),
        })
    }

    /// `ln alpha^{-1}(y)`, representable far beyond where `alpha^{-1}` overflows.
    pub fn ln_inverse(&self, y: f64) -> Result<f64> {
        self.check_range(y)?;
        if y == self.cap_value {
            return Ok(self.cap_x0.ln());
        }
        Ok(match self.kind {
            ScaleKind::IteratedLog(p) => iterate_exp(y, p - 1),
            ScaleKind::Identity => y.ln(),
            ScaleKind::PowerConcave(s) => y.ln() / s,
        })
    }

    /// Smallest `x` with `alpha(x) >= y`; equals [`ScaleFn::inverse`] above the cap.
    pub fn inverse_clamped(&self, y: f64) -> f64 {
        self.inverse(y.max(self.cap_value)).unwrap_or(self.cap_x0)
    }

    fn check_range(&self, y: f64) -> Result<()> {
        if y < self.cap_value || y.is_nan() {
            return Err(Error::Domain(format!(
                "inverse undefined below the cap value {} (got {y})",
                self.cap_value
            )));
        }
        Ok(())
    }

    /// Analytic knowledge: every catalog kind is concave on its increasing range.
    pub fn concave_above_cap(&self) -> bool {
        true
    }
}

/// Inverts a non-decreasing function by bisection on `[lo, inf)`.
pub fn invert_monotone(f: &impl ScaleMap, y: f64, lo: f64) -> Result<f64> {
    if f.eval(lo) > y {
        return Err(Error::Domain(format!("{y} is below f({lo})")));
    }
    let mut a = lo;
    let mut b = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    while f.eval(b) < y {
        a = b;
        b *= 2.0;
        if !b.is_finite() {
            return Err(Error::Domain(format!("no preimage for {y}")));
        }
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f.eval(m) < y {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-15 * b.abs() {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

impl fmt::Display for ScaleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScaleKind::IteratedLog(p) => write!(f, "iterlog:{p}"),
            ScaleKind::Identity => write!(f, "id"),
            ScaleKind::PowerConcave(s) => write!(f, "pow:{s}"),
        }
    }
}

impl FromStr for ScaleFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "id" {
            return Ok(ScaleFn::identity());
        }
        let bad = || Error::Parse(format!("unknown scale function '{s}'"));
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        match name.trim() {
            "iterlog" => {
                let p: u32 = arg.trim().parse().map_err(|_| bad())?;
                ScaleFn::iterated_log(p).map_err(|e| Error::Parse(e.to_string()))
            }
            "pow" => {
                let v: f64 = arg.trim().parse().map_err(|_| bad())?;
                ScaleFn::power(v).map_err(|e| Error::Parse(e.to_string()))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTriple {
    pub alpha: ScaleFn,
    pub beta: ScaleFn,
    pub gamma: ScaleFn,
}

impl ScaleTriple {
    pub fn new(alpha: ScaleFn, beta: ScaleFn, gamma: ScaleFn) -> Self {
        ScaleTriple { alpha, beta, gamma }
    }

    /// `(log, id, id)`, under which the orders reduce to the classical ones.
    pub fn canonical() -> Self {
        ScaleTriple::new(
            ScaleFn::iterated_log(1).expect("p = 1"),
            ScaleFn::identity(),
            ScaleFn::identity(),
        )
    }

    /// `beta(log gamma(1/(1-r)))`, the common denominator of every order.
    pub fn denominator(&self, r: f64) -> f64 {
        let g = self.gamma.eval(1.0 / (1.0 - r));
        self.beta.eval(g.ln())
    }

    /// `beta(log gamma(x))` where `x = e^lx`.
    fn denominator_at_log(&self, lx: f64) -> f64 {
        self.beta.eval(self.gamma.ln_eval_exp(lx))
    }
}

impl fmt::Display for ScaleTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.alpha, self.beta, self.gamma)
    }
}

impl FromStr for ScaleTriple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "triple '{s}' must have three comma-separated entries"
            )));
        }
        Ok(ScaleTriple::new(
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleClass {
    L1,
    L2,
    L3,
}

/// Sample grids for the class and side-condition checks.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    /// Values for `a` and `b` in the (sub)additivity checks; every pair is used.
    pub pair_grid: Vec<f64>,
    /// Points for the L2 shift check.
    pub x_grid: Vec<f64>,
    /// Shifts for the L2 check.
    pub offsets: Vec<f64>,
    /// `ln x` values for the side conditions, so `x` may exceed the `f64` range.
    pub log_x_grid: Vec<f64>,
    /// Arguments `y` for the `alpha^{-1}(k y) / alpha^{-1}(y)` check.
    pub inverse_grid: Vec<f64>,
    pub inverse_factors: Vec<f64>,
    /// A ratio that should tend to zero passes when its last value is below this ...
    pub threshold: f64,
    /// ... and it does not increase over this many trailing grid points.
    pub tail: usize,
    /// Largest acceptable L1 constant.
    pub c_max: f64,
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            pair_grid: geometric_grid(1.0, 1e12, 30),
            x_grid: geometric_grid(1e2, 1e300, 60),
            offsets: vec![1.0, 5.0],
            log_x_grid: geometric_grid(1.0, 1e300, 80),
            inverse_grid: geometric_grid(2.0, 700.0, 40),
            inverse_factors: vec![0.25, 0.5, 0.9],
            threshold: 0.05,
            tail: 5,
            c_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub a: f64,
    pub b: f64,
    pub excess: f64,
}

/// One sampled check within a report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub label: String,
    pub pass: bool,
    /// Smallest constant `c` making the L1 inequality hold on the grid.
    pub best_constant: Option<f64>,
    pub witness: Option<Witness>,
    pub checks: Vec<CheckLine>,
}

impl ClassReport {
    fn from_checks(label: String, checks: Vec<CheckLine>) -> Self {
        ClassReport {
            pass: checks.iter().all(|c| c.pass),
            label,
            best_constant: None,
            witness: None,
            checks,
        }
    }
}

/// Outcome of testing that a sampled ratio tends to zero.
fn vanishing_tail(ratios: &[f64], threshold: f64, tail: usize) -> (bool, String) {
    let finite: Vec<f64> = ratios.iter().copied().filter(|r| !r.is_nan()).collect();
    let Some(&last) = finite.last() else {
        return (false, "no evaluable points".into());
    };
    let start = finite.len().saturating_sub(tail);
    let monotone = finite[start..]
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1e-300));
    // Slow decay (iterated logs of deep order) is accepted when the tail is
    // strictly decreasing and the ratio has at least halved over the grid.
    let strict = finite[start..].windows(2).all(|w| w[1] < w[0]);
    let peak = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = monotone && (last < threshold || (strict && last <= 0.5 * peak));
    (pass, format!("last ratio {last:.6e}, tail non-increasing: {monotone}"))
}

pub fn check_class(s: &impl ScaleMap, cls: ScaleClass, spec: &SampleSpec) -> Result<ClassReport> {
    match cls {
        ScaleClass::L1 | ScaleClass::L3 => {
            if spec.pair_grid.is_empty() {
                return Err(Error::Argument("empty pair grid".into()));
            }
            let mut worst: Option<Witness> = None;
            for &a in &spec.pair_grid {
                for &b in &spec.pair_grid {
                    let lhs = s.eval(a + b);
                    let rhs = s.eval(a) + s.eval(b);
                    let excess = lhs - rhs;
                    if worst.as_ref().is_none_or(|w| excess > w.excess) {
                        worst = Some(Witness { a, b, excess });
                    }
                }
            }
            let worst = worst.expect("non-empty grid");
            if cls == ScaleClass::L1 {
                let c = worst.excess.max(0.0);
                let pass = c.is_finite() && c <= spec.c_max;
                return Ok(ClassReport {
                    label: "L1".into(),
                    pass,
                    best_constant: Some(c),
                    witness: Some(worst.clone()),
                    checks: vec![CheckLine {
                        label: "s(a+b) <= s(a)+s(b)+c".into(),
                        pass,
                        detail: format!("best c = {c:.6e} at ({}, {})", worst.a, worst.b),
                    }],
                });
            }
            let tol = |v: f64| 1e-14 * v.abs().max(1.0);
            let sub_pass = worst.excess <= tol(s.eval(worst.a) + s.eval(worst.b));
            let mut checks = vec![CheckLine {
                label: "s(a+b) <= s(a)+s(b)".into(),
                pass: sub_pass,
                detail: format!(
                    "worst excess {:.6e} at ({}, {})",
                    worst.excess, worst.a, worst.b
                ),
            }];
            let mut mult_worst: Option<Witness> = None;
            for m in 2..=5u32 {
                let mf = m as f64;
                for &r in &spec.pair_grid {
                    let excess = s.eval(mf * r) - mf * s.eval(r);
                    if excess > tol(mf * s.eval(r))
                        && mult_worst.as_ref().is_none_or(|w| excess > w.excess)
                    {
                        mult_worst = Some(Witness { a: mf, b: r, excess });
                    }
                }
            }
            checks.push(CheckLine {
                label: "s(m r) <= m s(r), m = 2..5".into(),
                pass: mult_worst.is_none(),
                detail: match &mult_worst {
                    None => "holds on grid".into(),
                    Some(w) => format!("fails at m = {}, r = {}", w.a, w.b),
                },
            });
            let mut report = ClassReport::from_checks("L3".into(), checks);
            report.witness = if sub_pass { mult_worst } else { Some(worst) };
            Ok(report)
        }
        ScaleClass::L2 => {
            if spec.x_grid.is_empty() || spec.offsets.is_empty() {
                return Err(Error::Argument("empty shift grid".into()));
            }
            let mut checks = Vec::new();
            for &d in &spec.offsets {
                let ratios: Vec<f64> = spec
                    .x_grid
                    .iter()
                    .map(|&x| {
                        let base = s.eval(x);
                        if base > 0.0 {
                            (s.eval(x + d) / base - 1.0).abs()
                        } else {
                            f64::NAN
                        }
                    })
                    .collect();
                let (pass, detail) = vanishing_tail(&ratios, spec.threshold, spec.tail);
                checks.push(CheckLine {
                    label: format!("|s(x+{d})/s(x) - 1| -> 0"),
                    pass,
                    detail,
                });
            }
            Ok(ClassReport::from_checks("L2".into(), checks))
        }
    }
}

/// Sampled side conditions: `alpha(log^[p] x) = o(beta(log gamma(x)))` for
/// `p = 2..=p_max`, `alpha(log x) = o(alpha(x))` and
/// `alpha^{-1}(k x) = o(alpha^{-1}(x))`.
pub fn check_triple_conditions(t: &ScaleTriple, p_max: u32, spec: &SampleSpec) -> Result<ClassReport> {
    if p_max < 2 {
        return Err(Error::Argument("p_max must be at least 2".into()));
    }
    let mut checks = Vec::new();
    for p in 2..=p_max {
        // log^[p] x = log^[p-1](lx) with lx = ln x.
        let ratios: Vec<f64> = spec
            .log_x_grid
            .iter()
            .map(|&lx| {
                let num = t.alpha.eval(iterate_ln(lx, p - 1));
                num / t.denominator_at_log(lx)
            })
            .collect();
        let (pass, detail) = vanishing_tail(&ratios, spec.threshold, spec.tail);
        checks.push(CheckLine {
            label: format!("(a) alpha(log^[{p}] x) / beta(log gamma(x)) -> 0"),
            pass,
            detail,
        });
    }
    let ratios: Vec<f64> = spec
        .log_x_grid
        .iter()
        .map(|&lx| t.alpha.eval(lx) / t.alpha.eval_exp(lx))
        .collect();
    let (pass, detail) = vanishing_tail(&ratios, spec.threshold, spec.tail);
    checks.push(CheckLine {
        label: "(b) alpha(log x) / alpha(x) -> 0".into(),
        pass,
        detail,
    });
    for &k in &spec.inverse_factors {
        let ratios: Vec<f64> = spec
            .inverse_grid
            .iter()
            .map(|&y| {
                let top = t.alpha.ln_inverse(t.alpha.cap_value.max(k * y));
                let bottom = t.alpha.ln_inverse(t.alpha.cap_value.max(y));
                match (top, bottom) {
                    (Ok(a), Ok(b)) if !(a.is_infinite() && b.is_infinite()) => (a - b).exp(),
                    _ => f64::NAN,
                }
            })
            .collect();
        let (pass, detail) = vanishing_tail(&ratios, spec.threshold, spec.tail);
        checks.push(CheckLine {
            label: format!("(c) alpha^-1({k} x) / alpha^-1(x) -> 0"),
            pass,
            detail,
        });
    }
    Ok(ClassReport::from_checks("condition (ii)".into(), checks))
}

/// Every class and side-condition check a triple must pass before it is used.
#[derive(Debug, Clone)]
pub struct TripleReport {
    pub triple: ScaleTriple,
    pub alpha_l1: ClassReport,
    pub beta_l2: ClassReport,
    pub gamma_l3: ClassReport,
    pub conditions: ClassReport,
}

impl TripleReport {
    pub fn pass(&self) -> bool {
        self.alpha_l1.pass && self.beta_l2.pass && self.gamma_l3.pass && self.conditions.pass
    }

    pub fn parts(&self) -> [(&'static str, &ClassReport); 4] {
        [
            ("alpha in L1", &self.alpha_l1),
            ("beta in L2", &self.beta_l2),
            ("gamma in L3", &self.gamma_l3),
            ("side conditions", &self.conditions),
        ]
    }

    pub fn summary(&self) -> String {
        let mut out = format!("triple {}: {}\n", self.triple, verdict(self.pass()));
        for (name, rep) in self.parts() {
            out.push_str(&format!("  {name}: {}\n", verdict(rep.pass)));
            for c in &rep.checks {
                out.push_str(&format!("    [{}] {} ({})\n", verdict(c.pass), c.label, c.detail));
            }
        }
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn check_admissible(t: &ScaleTriple, p_max: u32, spec: &SampleSpec) -> Result<TripleReport> {
    Ok(TripleReport {
        triple: *t,
        alpha_l1: check_class(&t.alpha, ScaleClass::L1, spec)?,
        beta_l2: check_class(&t.beta, ScaleClass::L2, spec)?,
        gamma_l3: check_class(&t.gamma, ScaleClass::L3, spec)?,
        conditions: check_triple_conditions(t, p_max, spec)?,
    })
}
