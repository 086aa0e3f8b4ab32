//! Maximum modulus `M(r, f)`, the characteristic `T(r, f)`, and order and
//! type estimates under a scale triple as `r -> 1`.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcs::{ln_abs, Expr};
use crate::lognum::{cmp_real, lse_sum, LogComplex};
use crate::scale::ScaleTriple;

/// Radii `r_i = 1 - (1 - r0) q^i`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r0: f64,
    pub q: f64,
    pub n: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid {
            r0: 0.5,
            q: 0.72,
            n: 24,
        }
    }
}

impl RadialGrid {
    pub fn new(r0: f64, q: f64, n: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0 < 1.0) || !(q > 0.0 && q < 1.0) || n == 0 {
            return Err(Error::Argument(format!(
                "grid needs 0 < r0 < 1, 0 < q < 1, n >= 1 (got {r0}, {q}, {n})"
            )));
        }
        Ok(RadialGrid { r0, q, n })
    }

    pub fn radius(&self, i: usize) -> f64 {
        1.0 - (1.0 - self.r0) * self.q.powi(i as i32)
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.radius(i)).collect()
    }

    pub fn r_max(&self) -> f64 {
        self.radius(self.n - 1)
    }

    /// Drops trailing radii above `r_max`; returns the grid and how many were dropped.
    pub fn trimmed(&self, r_max: f64) -> Result<(RadialGrid, usize)> {
        let keep = (0..self.n).take_while(|&i| self.radius(i) <= r_max).count();
        if keep == 0 {
            return Err(Error::Argument(format!(
                "no grid radius below {r_max} (r0 = {})",
                self.r0
            )));
        }
        Ok((RadialGrid { n: keep, ..*self }, self.n - keep))
    }
}

impl fmt::Display for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r0={} q={} n={}", self.r0, self.q, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrowthMode {
    /// `alpha(log^[2] M) / beta(log gamma(1/(1-r)))`.
    MOrder,
    /// `alpha(log T) / ...`.
    TOrder,
    /// `alpha(log^[3] M) / ...`.
    MLogOrder,
    /// `alpha(log^[2] T) / ...`.
    TLogOrder,
}

impl GrowthMode {
    pub fn uses_t(&self) -> bool {
        matches!(self, GrowthMode::TOrder | GrowthMode::TLogOrder)
    }

    pub fn name(&self) -> &'static str {
        match self {
            GrowthMode::MOrder => "M",
            GrowthMode::TOrder => "T",
            GrowthMode::MLogOrder => "M_log",
            GrowthMode::TLogOrder => "T_log",
        }
    }
}

impl fmt::Display for GrowthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GrowthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "M" | "M_order" => Ok(GrowthMode::MOrder),
            "T" | "T_order" => Ok(GrowthMode::TOrder),
            "M_log" | "M_logorder" | "Mlog" => Ok(GrowthMode::MLogOrder),
            "T_log" | "T_logorder" | "Tlog" => Ok(GrowthMode::TLogOrder),
            other => Err(Error::Parse(format!("unknown mode '{other}'"))),
        }
    }
}

/// How the limsup is read off a finite grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimsupPolicy {
    /// Least-squares slope of numerator against denominator over the tail.
    TailSlope,
    /// Largest ratio over the tail.
    TailMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthOptions {
    pub n_theta: usize,
    pub n_quad: usize,
    pub quad_cap: usize,
    pub quad_tol: f64,
    pub tail_k: usize,
    pub policy: LimsupPolicy,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            n_theta: 512,
            n_quad: 256,
            quad_cap: 1 << 16,
            quad_tol: 1e-8,
            tail_k: 8,
            policy: LimsupPolicy::TailSlope,
        }
    }
}

/// `ln|f|` on one radius, with zeros ordered below everything else.
fn ln_abs_at(f: &Expr, r: f64, theta: f64) -> Result<Option<LogComplex>> {
    ln_abs(f, Complex64::from_polar(r, theta)).map_err(|e| at_radius(e, r))
}

fn at_radius(e: Error, r: f64) -> Error {
    match e {
        Error::TowerOverflow {
            logmag,
            limit,
            context,
        } => Error::TowerOverflow {
            logmag,
            limit,
            context: Some(match context {
                Some(c) => format!("{c} at r = {r}"),
                None => format!("r = {r}"),
            }),
        },
        other => other,
    }
}

fn cmp_ln(a: &Option<LogComplex>, b: &Option<LogComplex>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => cmp_real(x, y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxModulus {
    /// `ln M(r, f)` as a real value; `None` when `f` vanishes on the circle.
    pub ln_m: Option<LogComplex>,
    pub theta_argmax: f64,
}

/// `ln M(r, f)` from a uniform grid (with `theta = 0` as a node) refined by
/// golden-section search around the best node.
pub fn max_modulus(f: &Expr, r: f64, n_theta: usize) -> Result<MaxModulus> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} not in (0, 1)")));
    }
    if n_theta < 64 {
        return Err(Error::Argument(format!("n_theta = {n_theta} below 64")));
    }
    let h = TAU / n_theta as f64;
    let values: Vec<Option<LogComplex>> = (0..n_theta)
        .into_par_iter()
        .map(|i| ln_abs_at(f, r, h * i as f64))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if cmp_ln(v, &values[best]) == Ordering::Greater {
            best = i;
        }
    }
    let node = MaxModulus {
        ln_m: values[best],
        theta_argmax: h * best as f64,
    };
    let refined = golden_max(f, r, node.theta_argmax - h, node.theta_argmax + h)?;
    let out = if cmp_ln(&refined.ln_m, &node.ln_m) == Ordering::Greater {
        refined
    } else {
        node
    };
    Ok(MaxModulus {
        theta_argmax: out.theta_argmax.rem_euclid(TAU),
        ..out
    })
}

fn golden_max(f: &Expr, r: f64, mut a: f64, mut b: f64) -> Result<MaxModulus> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = ln_abs_at(f, r, x1)?;
    let mut f2 = ln_abs_at(f, r, x2)?;
    while b - a > 1e-10 {
        if cmp_ln(&f1, &f2) == Ordering::Less {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = ln_abs_at(f, r, x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = ln_abs_at(f, r, x1)?;
        }
    }
    let theta = 0.5 * (a + b);
    Ok(MaxModulus {
        ln_m: ln_abs_at(f, r, theta)?,
        theta_argmax: theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    /// `T(r, f)` in log-space; zero when `|f| <= 1` on the circle.
    pub t: LogComplex,
    pub nodes: usize,
    pub converged: bool,
}

fn ln_plus(v: Option<LogComplex>) -> LogComplex {
    match v {
        Some(x) => x.positive_part(),
        None => LogComplex::ZERO,
    }
}

fn mean_ln_plus(f: &Expr, r: f64, thetas: &[f64]) -> Result<LogComplex> {
    let vals: Vec<LogComplex> = thetas
        .par_iter()
        .map(|&t| ln_abs_at(f, r, t).map(ln_plus))
        .collect::<Result<_>>()?;
    Ok(lse_sum(&vals).scale(1.0 / thetas.len() as f64))
}

/// Relative change between successive quadrature values; in `ln T` once `T`
/// itself has no meaningful relative precision.
fn quad_change(old: LogComplex, new: LogComplex) -> f64 {
    match (old.is_zero(), new.is_zero()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ if new.logmag > crate::lognum::EXP_LIMIT => {
            ((old.logmag - new.logmag) / new.logmag).abs()
        }
        _ => ((old.logmag - new.logmag).exp() - 1.0).abs(),
    }
}

/// `T(r, f) = (1/2pi) int log^+ |f(r e^{i theta})| d theta` by the trapezoid
/// rule, doubling the nodes until successive values agree.
pub fn characteristic(f: &Expr, r: f64, opts: &GrowthOptions) -> Result<Characteristic> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} not in (0, 1)")));
    }
    if opts.n_quad == 0 {
        return Err(Error::Argument("n_quad must be positive".into()));
    }
    let mut n = opts.n_quad;
    let nodes: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let mut t = mean_ln_plus(f, r, &nodes)?;
    while n < opts.quad_cap {
        let mids: Vec<f64> = (0..n).map(|i| TAU * (i as f64 + 0.5) / n as f64).collect();
        let m = mean_ln_plus(f, r, &mids)?;
        let next = (t + m).scale(0.5);
        n *= 2;
        let change = quad_change(t, next);
        t = next;
        if change < opts.quad_tol {
            return Ok(Characteristic {
                t,
                nodes: n,
                converged: true,
            });
        }
    }
    Ok(Characteristic {
        t,
        nodes: n,
        converged: false,
    })
}

/// One radius worth of growth data. The iterated logarithms are present
/// only where defined (the argument of each `log` positive).
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSample {
    pub r: f64,
    pub ln_m: Option<LogComplex>,
    pub log_m: Option<f64>,
    pub loglog_m: Option<f64>,
    pub log3_m: Option<f64>,
    pub t: Option<Characteristic>,
    pub theta_argmax: f64,
}

fn pos_ln(x: Option<f64>) -> Option<f64> {
    x.filter(|v| *v > 0.0).map(f64::ln)
}

impl GrowthSample {
    pub fn log_t(&self) -> Option<f64> {
        self.t.filter(|c| !c.t.is_zero()).map(|c| c.t.logmag)
    }

    pub fn loglog_t(&self) -> Option<f64> {
        pos_ln(self.log_t())
    }

    /// The iterated logarithm a mode feeds into `alpha`.
    pub fn numerator_arg(&self, mode: GrowthMode) -> Option<f64> {
        match mode {
            GrowthMode::MOrder => self.loglog_m,
            GrowthMode::MLogOrder => self.log3_m,
            GrowthMode::TOrder => self.log_t(),
            GrowthMode::TLogOrder => self.loglog_t(),
        }
    }
}

pub fn sample(f: &Expr, r: f64, with_t: bool, opts: &GrowthOptions) -> Result<GrowthSample> {
    let mm = max_modulus(f, r, opts.n_theta)?;
    let log_m = mm.ln_m.map(|l| l.to_real());
    let loglog_m = mm.ln_m.filter(|l| l.real_sign() > 0).map(|l| l.logmag);
    let t = if with_t {
        Some(characteristic(f, r, opts)?)
    } else {
        None
    };
    Ok(GrowthSample {
        r,
        ln_m: mm.ln_m,
        log_m,
        loglog_m,
        log3_m: pos_ln(loglog_m),
        t,
        theta_argmax: mm.theta_argmax,
    })
}

/// Samples at every grid radius; failures are kept per radius.
pub fn sample_grid(
    f: &Expr,
    g: &RadialGrid,
    with_t: bool,
    opts: &GrowthOptions,
) -> Vec<Result<GrowthSample>> {
    g.radii().iter().map(|&r| sample(f, r, with_t, opts)).collect()
}

#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// The estimate under `policy`.
    pub value: f64,
    pub tail_max: f64,
    pub slope: f64,
    pub policy: LimsupPolicy,
    pub mode: GrowthMode,
    pub radii: Vec<f64>,
    pub numerators: Vec<Option<f64>>,
    pub denominators: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub samples: Vec<Option<GrowthSample>>,
    /// Error text for radii whose sample failed.
    pub gaps: Vec<Option<String>>,
    pub tail_k: usize,
}

impl OrderEstimate {
    pub fn gap_count(&self) -> usize {
        self.gaps.iter().filter(|g| g.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,one_minus_r,logM,loglogM,log3M,T,ratio,mode\n");
        for i in 0..self.radii.len() {
            let r = self.radii[i];
            let s = self.samples[i].as_ref();
            let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            out.push_str(&format!(
                "{r},{},{},{},{},{},{},{}\n",
                1.0 - r,
                opt(s.and_then(|s| s.log_m)),
                opt(s.and_then(|s| s.loglog_m)),
                opt(s.and_then(|s| s.log3_m)),
                opt(s.and_then(|s| s.t).map(|t| t.t.to_real())),
                opt(self.ratios[i]),
                self.mode
            ));
        }
        out
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Estimate from precomputed samples, so several modes can share one pass.
pub fn order_from_samples(
    samples: &[Result<GrowthSample>],
    radii: &[f64],
    t: &ScaleTriple,
    mode: GrowthMode,
    opts: &GrowthOptions,
) -> Result<OrderEstimate> {
    let denominators: Vec<f64> = radii.iter().map(|&r| t.denominator(r)).collect();
    let mut numerators = Vec::new();
    let mut gaps = Vec::new();
    for s in samples {
        match s {
            Ok(s) if mode.uses_t() && s.t.is_none() => {
                numerators.push(None);
                gaps.push(Some("no characteristic computed".to_string()));
            }
            Ok(s) => {
                // An undefined iterated log sits below every cap.
                let arg = s.numerator_arg(mode).unwrap_or(f64::NEG_INFINITY);
                numerators.push(Some(t.alpha.eval(arg)));
                gaps.push(None);
            }
            Err(e) => {
                numerators.push(None);
                gaps.push(Some(e.to_string()));
            }
        }
    }
    let ratios: Vec<Option<f64>> = numerators
        .iter()
        .zip(&denominators)
        .map(|(n, d)| n.map(|n| n / d))
        .collect();
    let start = radii.len().saturating_sub(opts.tail_k);
    let tail: Vec<(f64, f64)> = (start..radii.len())
        .filter_map(|i| numerators[i].map(|n| (denominators[i], n)))
        .collect();
    if tail.len() < 4 {
        return Err(Error::Estimation(format!(
            "{} valid tail points, need 4 ({})",
            tail.len(),
            gaps.iter().flatten().next().cloned().unwrap_or_default()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    let slope = least_squares_slope(&xs, &ys)
        .ok_or_else(|| Error::Estimation("denominator constant over the tail".into()))?;
    let tail_max = (start..radii.len())
        .filter_map(|i| ratios[i])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let value = match opts.policy {
        LimsupPolicy::TailSlope => slope.max(0.0),
        LimsupPolicy::TailMax => tail_max,
    };
    Ok(OrderEstimate {
        value,
        tail_max,
        slope,
        policy: opts.policy,
        mode,
        radii: radii.to_vec(),
        numerators,
        denominators,
        ratios,
        samples: samples.iter().map(|s| s.as_ref().ok().cloned()).collect(),
        gaps,
        tail_k: opts.tail_k,
    })
}

pub fn order_estimate(
    f: &Expr,
    t: &ScaleTriple,
    g: &RadialGrid,
    mode: GrowthMode,
    opts: &GrowthOptions,
) -> Result<OrderEstimate> {
    let samples = sample_grid(f, g, mode.uses_t(), opts);
    order_from_samples(&samples, &g.radii(), t, mode, opts)
}

#[derive(Debug, Clone)]
pub struct TypeEstimate {
    pub value: f64,
    pub mode: GrowthMode,
    pub rho_used: f64,
    /// `exp(alpha(numerator) - rho * denominator)` per radius.
    pub values: Vec<Option<f64>>,
}

/// Tail-max of `exp(alpha(num)) / exp(beta(log gamma(1/(1-r))))^rho`, formed
/// as one exponential of the difference.
pub fn type_estimate(
    f: &Expr,
    t: &ScaleTriple,
    g: &RadialGrid,
    mode: GrowthMode,
    rho: f64,
    opts: &GrowthOptions,
) -> Result<TypeEstimate> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Argument(format!("rho = {rho} must be in (0, inf)")));
    }
    let est = order_estimate(f, t, g, mode, opts)?;
    type_from_order(&est, rho)
}

pub fn type_from_order(est: &OrderEstimate, rho: f64) -> Result<TypeEstimate> {
    let values: Vec<Option<f64>> = est
        .numerators
        .iter()
        .zip(&est.denominators)
        .map(|(n, d)| n.map(|n| (n - rho * d).exp()))
        .collect();
    let start = values.len().saturating_sub(est.tail_k);
    let value = values[start..]
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b));
    Ok(TypeEstimate {
        value,
        mode: est.mode,
        rho_used: rho,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ineq12Row {
    pub r: f64,
    /// `ln T(r)`, `ln log^+ M(r)` and `ln` of the right-hand side.
    pub ln_t: f64,
    pub ln_logm: f64,
    pub ln_rhs: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Ineq12Report {
    pub rows: Vec<Result<Ineq12Row>>,
    pub pass: bool,
}

impl Ineq12Report {
    /// `r,lhs_log,rhs_log,margin,violate` rows: the tighter of the two margins.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,lhs_log,rhs_log,margin,violate\n");
        for row in self.rows.iter().flatten() {
            let margin = row.lower_margin.min(row.upper_margin);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.r, row.ln_logm, row.ln_rhs, margin, !row.pass
            ));
        }
        out
    }
}

/// `ln a - ln b` with `ln 0 - ln 0 = 0`.
fn log_gap(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else {
        a - b
    }
}

fn ln_of(v: LogComplex) -> f64 {
    if v.is_zero() {
        f64::NEG_INFINITY
    } else {
        v.logmag
    }
}

/// Rounding allowance for the equality cases of the sandwich.
const SANDWICH_TOL: f64 = 1e-12;

/// `T(r) <= log^+ M(r) <= (1+3r)/(1-r) T((1+r)/2)` at every grid radius.
pub fn verify_ineq_12(f: &Expr, g: &RadialGrid, opts: &GrowthOptions) -> Ineq12Report {
    let rows: Vec<Result<Ineq12Row>> = g
        .radii()
        .iter()
        .map(|&r| {
            let mm = max_modulus(f, r, opts.n_theta)?;
            let t = characteristic(f, r, opts)?;
            let t_outer = characteristic(f, 0.5 * (1.0 + r), opts)?;
            let ln_logm = ln_of(ln_plus(mm.ln_m));
            let ln_t = ln_of(t.t);
            let ln_rhs = ((1.0 + 3.0 * r) / (1.0 - r)).ln() + ln_of(t_outer.t);
            let lower_margin = log_gap(ln_logm, ln_t);
            let upper_margin = log_gap(ln_rhs, ln_logm);
            let tol = SANDWICH_TOL * ln_logm.abs().max(1.0);
            Ok(Ineq12Row {
                r,
                ln_t,
                ln_logm,
                ln_rhs,
                lower_margin,
                upper_margin,
                pass: lower_margin >= -tol && upper_margin >= -tol,
            })
        })
        .collect();
    let pass = rows.iter().all(|r| matches!(r, Ok(row) if row.pass));
    Ineq12Report { rows, pass }
}

#[derive(Debug, Clone)]
pub struct Prop11Report {
    pub m_log: OrderEstimate,
    pub t_log: OrderEstimate,
    pub difference: f64,
}

/// Both log-orders of `f` from one sampling pass.
pub fn proposition11_check(
    f: &Expr,
    t: &ScaleTriple,
    g: &RadialGrid,
    opts: &GrowthOptions,
) -> Result<Prop11Report> {
    let samples = sample_grid(f, g, true, opts);
    let radii = g.radii();
    let m_log = order_from_samples(&samples, &radii, t, GrowthMode::MLogOrder, opts)?;
    let t_log = order_from_samples(&samples, &radii, t, GrowthMode::TLogOrder, opts)?;
    Ok(Prop11Report {
        difference: (m_log.value - t_log.value).abs(),
        m_log,
        t_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{build_tower, parse_expr, TowerSpec};

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn opts() -> GrowthOptions {
        GrowthOptions::default()
    }

    #[test]
    fn grid_shape() {
        let g = RadialGrid::default();
        let r = g.radii();
        assert_eq!(r.len(), 24);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!((1.0 - g.r_max() - 0.5 * 0.72f64.powi(23)).abs() < 1e-15);
        assert!(1.0 - g.r_max() < 3e-4);
        let (t, dropped) = g.trimmed(0.99).unwrap();
        assert_eq!(t.n + dropped, 24);
        assert!(t.r_max() <= 0.99);
        assert!(RadialGrid::new(1.0, 0.5, 3).is_err());
    }

    #[test]
    fn max_modulus_examples() {
        let m = max_modulus(&Expr::pow1mz(1.0), 0.5, 64).unwrap();
        assert!((m.ln_m.unwrap().to_real() - 2f64.ln()).abs() < 1e-14);
        assert!(m.theta_argmax.abs() < 1e-9 || (m.theta_argmax - TAU).abs() < 1e-9);
        let m = max_modulus(&Expr::z().exp(), 0.7, 64).unwrap();
        assert!((m.ln_m.unwrap().to_real() - 0.7).abs() < 1e-14);
        assert!(max_modulus(&Expr::z(), 0.7, 63).is_err());
    }

    #[test]
    fn max_modulus_off_axis() {
        // Peak of |exp(i z)| on |z| = r is at theta = -pi/2, between no grid nodes
        // for n_theta = 100 only after refinement.
        let f = e("exp(const(0,1)*z)");
        let m = max_modulus(&f, 0.6, 97).unwrap();
        assert!((m.ln_m.unwrap().to_real() - 0.6).abs() < 1e-12);
        assert!((m.theta_argmax - 1.5 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn level_two_tower_at_point_nine() {
        let t = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let s = sample(&t, 0.9, false, &opts()).unwrap();
        assert!((s.loglog_m.unwrap() - 10.0).abs() <= 0.2);
        // Dense-grid oracle.
        let dense = max_modulus(&t, 0.9, 1 << 16).unwrap();
        assert!((dense.ln_m.unwrap().logmag - s.loglog_m.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn characteristic_examples() {
        let c = characteristic(&Expr::real(2.0), 0.4, &opts()).unwrap();
        assert!((c.t.to_real() - 2f64.ln()).abs() < 1e-14 && c.converged);
        for r in [0.3, 0.8] {
            let c = characteristic(&Expr::z().exp(), r, &opts()).unwrap();
            assert!((c.t.to_real() - r / std::f64::consts::PI).abs() < 1e-7, "{r}: {c:?}");
        }
    }

    #[test]
    fn characteristic_of_pole_against_dense_oracle() {
        // |1/(1 - z)| > 1 exactly when Re z > r^2/2 ... the integrand has kinks, so
        // compare against plain trapezoid on 2^20 nodes.
        let f = Expr::pow1mz(1.0);
        let r = 0.9;
        let n = 1 << 20;
        let oracle: f64 = (0..n)
            .map(|i| {
                let z = Complex64::from_polar(r, TAU * i as f64 / n as f64);
                (1.0 / (1.0 - z).norm()).ln().max(0.0)
            })
            .sum::<f64>()
            / n as f64;
        let c = characteristic(&f, r, &opts()).unwrap();
        assert!(((c.t.to_real() - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", c.t.to_real());
    }

    #[test]
    fn order_examples() {
        let canon = ScaleTriple::canonical();
        let g = RadialGrid::default();
        let est = order_estimate(&Expr::real(5.0), &canon, &g, GrowthMode::MOrder, &opts()).unwrap();
        assert_eq!(est.value, 0.0);
        let t2 = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let est = order_estimate(&t2, &canon, &g, GrowthMode::MOrder, &opts()).unwrap();
        assert!((est.value - 1.0).abs() <= 0.05, "{}", est.value);
        assert_eq!(est.gap_count(), 0);
    }

    #[test]
    fn log_order_of_level_three() {
        let spec = TowerSpec::new(3, 1.0, 0.5).unwrap();
        let (g, _) = RadialGrid::default().trimmed(spec.max_radius(700.0)).unwrap();
        let est = order_estimate(
            &build_tower(&spec),
            &ScaleTriple::canonical(),
            &g,
            GrowthMode::MLogOrder,
            &opts(),
        )
        .unwrap();
        assert!((est.value - 0.5).abs() <= 0.05, "{}", est.value);
    }

    #[test]
    fn type_examples() {
        let canon = ScaleTriple::canonical();
        let g = RadialGrid::default();
        for c in [0.5, 2.0] {
            let t = build_tower(&TowerSpec::new(2, c, 1.0).unwrap());
            let ty = type_estimate(&t, &canon, &g, GrowthMode::MOrder, 1.0, &opts()).unwrap();
            assert!((ty.value / c - 1.0).abs() <= 0.1, "{c}: {}", ty.value);
            let big = type_estimate(&t, &canon, &g, GrowthMode::MOrder, 1.5, &opts()).unwrap();
            assert!(big.value < 0.1 * c);
        }
        assert!(type_estimate(&Expr::z(), &canon, &g, GrowthMode::MOrder, 0.0, &opts()).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let g = RadialGrid::new(0.5, 0.72, 8).unwrap();
        assert!(verify_ineq_12(&Expr::real(3.0), &g, &opts()).pass);
        let rep = verify_ineq_12(&Expr::z().exp(), &RadialGrid::new(0.5, 0.5, 1).unwrap(), &opts());
        let row = rep.rows[0].as_ref().unwrap();
        // The integrand has kinks, so the trapezoid rule is only second order.
        assert!((row.ln_t - (0.5 / std::f64::consts::PI).ln()).abs() < 1e-7, "{row:?}");
        assert!((row.ln_logm - 0.5f64.ln()).abs() < 1e-12);
        assert!((row.ln_rhs - (5.0 * 0.75 / std::f64::consts::PI).ln()).abs() < 1e-7);
        assert!(rep.pass);
        let t2 = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let (g, _) = RadialGrid::default().trimmed(0.99).unwrap();
        let rep = verify_ineq_12(&t2, &g, &opts());
        assert!(rep.pass, "{:?}", rep.rows.iter().find(|r| !matches!(r, Ok(x) if x.pass)));
    }

    #[test]
    fn proposition_examples() {
        let canon = ScaleTriple::canonical();
        let g = RadialGrid::default();
        let rep = proposition11_check(&Expr::real(1.0), &canon, &g, &opts()).unwrap();
        assert_eq!((rep.m_log.value, rep.t_log.value), (0.0, 0.0));
    }

    #[test]
    fn mode_names_parse() {
        for m in [GrowthMode::MOrder, GrowthMode::TOrder, GrowthMode::MLogOrder, GrowthMode::TLogOrder] {
            assert_eq!(m.name().parse::<GrowthMode>().unwrap(), m);
        }
        assert!("X".parse::<GrowthMode>().is_err());
    }
}
