//! Growth and logarithmic-derivative bounds checked on radial grids, and
//! logarithmic-measure accounting for the sets where they fail.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcs::{eval_log, log_derivative_ratios, Expr, Node};
use crate::growth::{
    characteristic, max_modulus, order_estimate, order_from_samples, type_estimate, GrowthMode,
    GrowthOptions, GrowthSample, OrderEstimate, RadialGrid,
};
use crate::lognum::{cmp_real, lse_sum, LogComplex};
use crate::ode::{series_derivatives, LogSeries, OdeProblem};
use crate::scale::ScaleTriple;

/// Sorted, pairwise disjoint intervals `[lo, hi]` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExceptionalSet {
    intervals: Vec<(f64, f64)>,
}

impl ExceptionalSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(0.0 <= lo && lo <= hi && hi < 1.0) {
                return Err(Error::Argument(format!("interval [{lo}, {hi}] not in [0, 1)")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Argument(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(ExceptionalSet { intervals })
    }

    pub fn empty() -> Self {
        ExceptionalSet::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `int_S dr / (1 - r)`.
    pub fn log_measure(&self) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| ((1.0 - lo) / (1.0 - hi)).ln())
            .sum()
    }

    /// Union of the grid cells `[r_i, r_{i+1}]` whose flag is set, adjacent
    /// cells merged.
    pub fn from_grid_cells(g: &RadialGrid, flags: &[bool]) -> Self {
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for (i, &bad) in flags.iter().enumerate() {
            if !bad {
                continue;
            }
            let (lo, hi) = (g.radius(i), g.radius(i + 1));
            match intervals.last_mut() {
                Some(last) if last.1 >= lo => last.1 = hi,
                _ => intervals.push((lo, hi)),
            }
        }
        ExceptionalSet { intervals }
    }
}

impl fmt::Display for ExceptionalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "(empty)");
        }
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(lo, hi)| format!("[{lo}, {hi}]"))
            .collect();
        write!(f, "{}", parts.join(" U "))
    }
}

/// Per-radius comparison of two logged quantities.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub radii: Vec<f64>,
    /// `ln` of the bounded quantity.
    pub lhs_log: Vec<f64>,
    /// `ln` of the bound.
    pub rhs_log: Vec<f64>,
    /// `rhs_log - lhs_log`, from log-space values so that huge bounds compare exactly.
    pub margins: Vec<f64>,
    pub violate: Vec<bool>,
    pub violations: ExceptionalSet,
    pub budget: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Whether the last `n` radii are free of violations.
    pub fn tail_clean(&self, n: usize) -> bool {
        let start = self.violate.len().saturating_sub(n);
        self.violate[start..].iter().all(|v| !v)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,lhs_log,rhs_log,margin,violate\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.radii[i],
                self.lhs_log[i],
                self.rhs_log[i],
                self.margins[i],
                self.violate[i]
            ));
        }
        out.push_str(&format!(
            "# exceptional set: {} (log-measure {})\n",
            self.violations,
            self.violations.log_measure()
        ));
        out
    }

    fn build(g: &RadialGrid, rows: Vec<(LogComplex, LogComplex)>, budget: f64, tol: f64) -> Self {
        let mut lhs_log = Vec::new();
        let mut rhs_log = Vec::new();
        let mut margins = Vec::new();
        let mut flags = Vec::new();
        for (lhs, rhs) in rows {
            lhs_log.push(lhs.to_real());
            rhs_log.push(rhs.to_real());
            let m = rhs.sub(lhs);
            let scale = lhs.to_real().abs().max(1.0);
            flags.push(m.to_real() < -tol * scale);
            margins.push(m.to_real());
        }
        let violations = ExceptionalSet::from_grid_cells(g, &flags);
        let pass = violations.log_measure() <= budget;
        BoundReport {
            radii: g.radii(),
            lhs_log,
            rhs_log,
            margins,
            violations,
            violate: flags,
            budget,
            pass,
            notes: Vec::new(),
        }
    }
}

/// Default log-measure tolerated for violation sets.
pub const VIOLATION_BUDGET: f64 = 0.5;

fn neg_inf() -> LogComplex {
    // Stand-in for ln 0 in comparisons: a very negative real.
    LogComplex::from_real(-1e300)
}

fn ln_value(v: LogComplex) -> LogComplex {
    if v.is_zero() {
        neg_inf()
    } else {
        LogComplex::from_real(v.logmag)
    }
}

/// Settings for the growth bound of a solution along one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Starting radius of the integral.
    pub nu: f64,
    pub n_quad: usize,
    pub quad_cap: usize,
    pub quad_tol: f64,
    /// Replaces the computed `ln C`.
    pub ln_c_override: Option<f64>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            nu: 0.0,
            n_quad: 64,
            quad_cap: 1 << 14,
            quad_tol: 1e-4,
            ln_c_override: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionBound {
    /// `ln C + n_c I` as a real log-space value: the log of the bound on `|f|`.
    pub log_bound: LogComplex,
    pub ln_c: f64,
    /// `I = int_nu^r max_j |A_j(t e^{i theta})|^{1/(k-j)} dt`.
    pub integral: LogComplex,
    pub n_c: usize,
    pub nodes: usize,
    pub converged: bool,
}

fn nonzero_coeffs(p: &OdeProblem) -> usize {
    p.coeffs
        .iter()
        .filter(|a| a.as_const() != Some(Complex64::new(0.0, 0.0)))
        .count()
}

/// `max_j ln|A_j(z)| / (k - j)`, or `None` when every coefficient vanishes at `z`.
fn ln_integrand(p: &OdeProblem, z: Complex64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for (j, a) in p.coeffs.iter().enumerate() {
        let v = eval_log(a, z)?;
        if v.is_zero() {
            continue;
        }
        let x = v.logmag / (p.k - j) as f64;
        best = Some(best.map_or(x, |b: f64| b.max(x)));
    }
    Ok(best)
}

/// Trapezoid sum of `exp(phi)` over the nodes, in log-space.
fn log_trapezoid(nodes: &[f64], phi: &[Option<f64>]) -> LogComplex {
    let mut terms = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
        let right = if i + 1 < nodes.len() { nodes[i + 1] - nodes[i] } else { 0.0 };
        let w = 0.5 * (left + right);
        match phi[i] {
            Some(x) if w > 0.0 => terms.push(LogComplex::new(w.ln() + x, 0.0)),
            _ => {}
        }
    }
    lse_sum(&terms)
}

/// Nodes on `[nu, r]`: uniform in `s = (r - t)/(r - nu)` down to `s = 1/n`,
/// then geometric toward `t = r`.
fn graded_nodes(nu: f64, r: f64, n: usize) -> Vec<f64> {
    let half = n / 2;
    let s_c = 1.0 / n as f64;
    let s_min: f64 = 1e-12;
    let mut s: Vec<f64> = (0..half)
        .map(|i| 1.0 - (1.0 - s_c) * i as f64 / half as f64)
        .collect();
    let q = (s_min / s_c).powf(1.0 / (n - half - 1) as f64);
    s.extend((0..n - half).map(|i| s_c * q.powi(i as i32)));
    let mut t: Vec<f64> = s.iter().map(|s| r - (r - nu) * s).collect();
    t.push(r);
    t
}

/// Values `f^(j)(nu e^{i theta})`, `j < k`, from the initial data or the closed form.
fn data_at(p: &OdeProblem, z: Complex64) -> Result<Vec<LogComplex>> {
    if z.norm() == 0.0 {
        return Ok(p.initial.clone());
    }
    let f = p.solution.as_ref().ok_or_else(|| {
        Error::Precondition("nu > 0 needs a closed-form solution for the constant".into())
    })?;
    let d = log_derivative_ratios(f, p.k)?;
    let f0 = eval_log(f, z)?;
    d.iter().take(p.k).map(|dj| Ok(eval_log(dj, z)? * f0)).collect()
}

/// `ln C` with `eps = 1`: `ln 2 + max_j [ln|f^(j)(z)| - j ln n_c - (j/(k-j)) ln max_m |A_m(z)|]`.
fn ln_constant(p: &OdeProblem, z: Complex64, n_c: usize) -> Result<f64> {
    let data = data_at(p, z)?;
    let ln_amax = p
        .coeffs
        .iter()
        .map(|a| eval_log(a, z).map(|v| if v.is_zero() { f64::NEG_INFINITY } else { v.logmag }))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if ln_amax == f64::NEG_INFINITY {
        return Err(Error::Precondition(
            "every coefficient vanishes at the starting point".into(),
        ));
    }
    let mut best = f64::NEG_INFINITY;
    for (j, v) in data.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let jf = j as f64;
        let x = v.logmag - jf * (n_c as f64).ln() - jf / (p.k - j) as f64 * ln_amax;
        best = best.max(x);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Precondition("trivial initial data".into()));
    }
    Ok(2f64.ln() + best)
}

/// Bound on `ln|f(r e^{i theta})|` for the solution with the problem's
/// initial data: `ln C + n_c int_nu^r max_j |A_j(t e^{i theta})|^{1/(k-j)} dt`.
///
/// The integrand stays in log-space throughout, so coefficients far beyond
/// the `f64` range are handled rather than rejected.
pub fn growth_bound(p: &OdeProblem, r: f64, theta: f64, opts: &BoundOptions) -> Result<SolutionBound> {
    let nu = opts.nu;
    if !(0.0 <= nu && nu < r && r < 1.0) {
        return Err(Error::Argument(format!("need 0 <= nu < r < 1 (nu = {nu}, r = {r})")));
    }
    let n_c = nonzero_coeffs(p);
    if n_c == 0 {
        return Err(Error::Precondition("all coefficients are zero".into()));
    }
    let ray = Complex64::from_polar(1.0, theta);
    let z0 = ray * nu;
    if ln_integrand(p, z0)?.is_none() {
        return Err(Error::Precondition(format!(
            "every coefficient vanishes at nu e^(i theta) = {z0}"
        )));
    }
    let ln_c = match opts.ln_c_override {
        Some(c) => c,
        None => ln_constant(p, z0, n_c)?,
    };
    let integrate = |n: usize| -> Result<LogComplex> {
        let nodes = graded_nodes(nu, r, n);
        let phi: Vec<Option<f64>> = nodes
            .par_iter()
            .map(|&t| ln_integrand(p, ray * t))
            .collect::<Result<_>>()?;
        Ok(log_trapezoid(&nodes, &phi))
    };
    let mut n = opts.n_quad.max(8);
    let mut integral = integrate(n)?;
    let mut converged = false;
    while n < opts.quad_cap {
        n *= 2;
        let next = integrate(n)?;
        let change = if next.is_zero() || integral.is_zero() {
            if next.is_zero() && integral.is_zero() { 0.0 } else { f64::INFINITY }
        } else if next.logmag > crate::lognum::EXP_LIMIT {
            ((next.logmag - integral.logmag) / next.logmag).abs()
        } else {
            ((integral.logmag - next.logmag).exp() - 1.0).abs()
        };
        integral = next;
        if change < opts.quad_tol {
            converged = true;
            break;
        }
    }
    let log_bound = LogComplex::from_real(ln_c) + integral.scale(n_c as f64);
    Ok(SolutionBound {
        log_bound,
        ln_c,
        integral,
        n_c,
        nodes: n + 1,
        converged,
    })
}

/// Directions sampled when a bound is maximized over the circle.
pub const BOUND_DIRECTIONS: usize = 8;

fn max_bound_on_circle(p: &OdeProblem, r: f64, opts: &BoundOptions) -> Result<LogComplex> {
    let mut best: Option<LogComplex> = None;
    for i in 0..BOUND_DIRECTIONS {
        let theta = std::f64::consts::TAU * i as f64 / BOUND_DIRECTIONS as f64;
        let b = growth_bound(p, r, theta, opts)?.log_bound;
        if best.is_none_or(|x| cmp_real(&b, &x).is_gt()) {
            best = Some(b);
        }
    }
    Ok(best.expect("at least one direction"))
}

/// The `M_log` order of the circle-maximized bound, read as a surrogate `ln M`.
pub fn order_of_bound(
    p: &OdeProblem,
    t: &ScaleTriple,
    g: &RadialGrid,
    bopts: &BoundOptions,
    gopts: &GrowthOptions,
) -> Result<OrderEstimate> {
    let radii = g.radii();
    let samples: Vec<Result<GrowthSample>> = radii
        .iter()
        .map(|&r| {
            let b = max_bound_on_circle(p, r, bopts)?;
            let loglog = (b.real_sign() > 0).then_some(b.logmag);
            Ok(GrowthSample {
                r,
                ln_m: Some(b),
                log_m: Some(b.to_real()),
                loglog_m: loglog,
                log3_m: loglog.filter(|x| *x > 0.0).map(f64::ln),
                t: None,
                theta_argmax: 0.0,
            })
        })
        .collect();
    order_from_samples(&samples, &radii, t, GrowthMode::MLogOrder, gopts)
}

/// `ln|f(r e^{i theta})|` of a series solution against the bound on the same
/// ray, at `n_theta` directions per grid radius up to the reliable radius.
pub fn domination_check(
    p: &OdeProblem,
    s: &LogSeries,
    g: &RadialGrid,
    n_theta: usize,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let (g, dropped) = g.trimmed(s.r_reliable)?;
    let rows: Vec<(LogComplex, LogComplex)> = g
        .radii()
        .iter()
        .map(|&r| {
            let mut worst: Option<(LogComplex, LogComplex)> = None;
            for i in 0..n_theta {
                let theta = std::f64::consts::TAU * i as f64 / n_theta as f64;
                let f = series_derivatives(s, Complex64::from_polar(r, theta), 0)[0];
                let lhs = ln_value(f);
                let rhs = growth_bound(p, r, theta, opts)?.log_bound;
                let better = worst.is_none_or(|(l, r0)| {
                    cmp_real(&rhs.sub(lhs), &r0.sub(l)).is_lt()
                });
                if better {
                    worst = Some((lhs, rhs));
                }
            }
            worst.ok_or_else(|| Error::Argument("n_theta must be positive".into()))
        })
        .collect::<Result<_>>()?;
    let mut rep = BoundReport::build(&g, rows, 0.0, 1e-12);
    if dropped > 0 {
        rep.notes.push(format!(
            "{dropped} radii beyond the reliable radius {} skipped",
            s.r_reliable
        ));
    }
    Ok(rep)
}

fn require_exp_rooted(f: &Expr) -> Result<()> {
    if !matches!(f.node(), Node::Exp(_)) {
        return Err(Error::Argument(format!("bound needs f = exp(g), got {}", f.short())));
    }
    Ok(())
}

/// `|f^(k)/f^(j)| <= [(1/(1-r))^{2+eps} max{log 1/(1-r), T(1 - d(1-r), f)}]^{k-j}`
/// at the point of maximum modulus of each grid radius.
pub fn log_derivative_check(
    f: &Expr,
    k: usize,
    j: usize,
    g: &RadialGrid,
    d: f64,
    eps: f64,
    opts: &GrowthOptions,
) -> Result<BoundReport> {
    require_exp_rooted(f)?;
    if k <= j {
        return Err(Error::Argument(format!("need k > j (k = {k}, j = {j})")));
    }
    if !(d > 0.0 && d < 1.0) || !(eps > 0.0) {
        return Err(Error::Argument(format!("need 0 < d < 1 and eps > 0 (d = {d}, eps = {eps})")));
    }
    let ratios = log_derivative_ratios(f, k)?;
    let rows: Vec<(LogComplex, LogComplex)> = g
        .radii()
        .iter()
        .map(|&r| {
            let mm = max_modulus(f, r, opts.n_theta)?;
            let z = Complex64::from_polar(r, mm.theta_argmax);
            let lhs = ln_value(eval_log(&ratios[k], z)?.div(eval_log(&ratios[j], z)?)?);
            let s = 1.0 - d * (1.0 - r);
            let t = characteristic(f, s, opts).map_err(|e| {
                Error::UnsupportedMode(format!("characteristic unavailable at r = {s}: {e}"))
            })?;
            let l = (1.0 / (1.0 - r)).ln();
            let ln_t = ln_value(t.t);
            let inner = if cmp_real(&ln_t, &LogComplex::from_real(l.ln())).is_gt() {
                ln_t
            } else {
                LogComplex::from_real(l.ln())
            };
            let rhs = (LogComplex::from_real((2.0 + eps) * l) + inner).scale((k - j) as f64);
            Ok((lhs, rhs))
        })
        .collect::<Result<_>>()?;
    Ok(BoundReport::build(g, rows, VIOLATION_BUDGET, 1e-12))
}

#[derive(Debug, Clone)]
pub struct ProximityReport {
    pub bound: BoundReport,
    /// Order used in the bound (`T_log` mode estimate of `f`).
    pub rho: f64,
    pub ln_k: f64,
}

/// `m(r, f^(k)/f) <= K exp(alpha^{-1}((rho + eps) beta(log gamma(1/(1-r)))))`
/// with `K` fitted on the first third of the grid.
pub fn proximity_bound_check(
    f: &Expr,
    k: usize,
    t: &ScaleTriple,
    g: &RadialGrid,
    eps: f64,
    opts: &GrowthOptions,
) -> Result<ProximityReport> {
    require_exp_rooted(f)?;
    if k == 0 || !(eps > 0.0) {
        return Err(Error::Argument(format!("need k >= 1 and eps > 0 (k = {k}, eps = {eps})")));
    }
    let dk = log_derivative_ratios(f, k)?.pop().expect("k + 1 ratios");
    let rho = order_estimate(f, t, g, GrowthMode::TLogOrder, opts)?.value;
    let radii = g.radii();
    let ln_m: Vec<LogComplex> = radii
        .iter()
        .map(|&r| characteristic(&dk, r, opts).map(|c| ln_value(c.t)))
        .collect::<Result<_>>()?;
    // ln of the un-scaled bound: alpha^{-1}(y) itself.
    let growth: Vec<LogComplex> = radii
        .iter()
        .map(|&r| {
            let y = ((rho + eps) * t.denominator(r)).max(t.alpha.cap_value);
            let la = t.alpha.ln_inverse(y)?;
            Ok(LogComplex::new(la, 0.0))
        })
        .collect::<Result<_>>()?;
    let fit = (radii.len() / 3).max(1);
    let ln_k = (0..fit)
        .filter(|&i| ln_m[i].real_sign() > 0 || ln_m[i].logmag > -1e299)
        .map(|i| ln_m[i].sub(growth[i]).to_real())
        .fold(0.0f64, f64::max);
    let rows = ln_m
        .iter()
        .zip(&growth)
        .map(|(m, gr)| (*m, LogComplex::from_real(ln_k) + *gr))
        .collect();
    let mut bound = BoundReport::build(g, rows, VIOLATION_BUDGET, 1e-12);
    bound.notes.push(format!("rho (T_log estimate) = {rho}, ln K = {ln_k}"));
    Ok(ProximityReport { bound, rho, ln_k })
}

/// How `h` is read between its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Value at the largest sample radius below: a lower bound for monotone `h`.
    StepLower,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorelReport {
    pub pass: bool,
    pub first_violation: Option<f64>,
    /// Whether `g <= h` held at every sample outside the bad set.
    pub premise_holds: bool,
    pub checked: usize,
    /// Samples whose shifted radius lies beyond the last sample.
    pub skipped: usize,
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

/// Checks `g(r) <= h(1 - d(1 - r))` at every sample radius.
pub fn borel_shift_check(
    radii: &[f64],
    g_vals: &[f64],
    h_vals: &[f64],
    bad: &ExceptionalSet,
    d: f64,
    interp: Interpolation,
) -> Result<BorelReport> {
    if radii.len() != g_vals.len() || radii.len() != h_vals.len() || radii.is_empty() {
        return Err(Error::Argument("sample lengths differ or are empty".into()));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Argument(format!("d = {d} not in (0, 1)")));
    }
    if !radii.windows(2).all(|w| w[1] > w[0]) || !non_decreasing(g_vals) || !non_decreasing(h_vals) {
        return Err(Error::Argument("samples must be non-decreasing".into()));
    }
    let in_bad = |r: f64| bad.intervals().iter().any(|&(lo, hi)| lo <= r && r <= hi);
    let premise_holds = radii
        .iter()
        .zip(g_vals.iter().zip(h_vals))
        .all(|(&r, (&gv, &hv))| in_bad(r) || gv <= hv);
    let mut first_violation = None;
    let (mut checked, mut skipped) = (0, 0);
    for (i, &r) in radii.iter().enumerate() {
        let s = 1.0 - d * (1.0 - r);
        let idx = radii.partition_point(|&x| x <= s);
        if idx == radii.len() && s > radii[radii.len() - 1] {
            skipped += 1;
            continue;
        }
        let lo = idx - 1;
        let h = match interp {
            Interpolation::StepLower => h_vals[lo],
            Interpolation::Linear if lo + 1 < radii.len() => {
                let w = (s - radii[lo]) / (radii[lo + 1] - radii[lo]);
                h_vals[lo] + w * (h_vals[lo + 1] - h_vals[lo])
            }
            Interpolation::Linear => h_vals[lo],
        };
        checked += 1;
        if g_vals[i] > h && first_violation.is_none() {
            first_violation = Some(r);
        }
    }
    Ok(BorelReport {
        pass: first_violation.is_none(),
        first_violation,
        premise_holds,
        checked,
        skipped,
    })
}

#[derive(Debug, Clone)]
pub struct LowerSetReport {
    pub radii: Vec<f64>,
    pub holds: Vec<bool>,
    /// Log-measure of the cells where the inequality holds, up to each radius.
    pub cumulative: Vec<f64>,
    pub set: ExceptionalSet,
    /// Cumulative measure beyond 3 with non-decreasing increments over the last five radii.
    pub unbounded: bool,
    pub measured: f64,
}

/// Where `alpha(log^[2] M) > mu beta(log gamma(1/(1-r)))` holds (or, typed,
/// `exp(alpha(log^[2] M)) > omega exp(beta(...))^rho`) and how large that set is.
pub fn lower_set_measure(
    f: &Expr,
    t: &ScaleTriple,
    mu: f64,
    g: &RadialGrid,
    typed: Option<(f64, f64)>,
    opts: &GrowthOptions,
) -> Result<LowerSetReport> {
    let est = order_estimate(f, t, g, GrowthMode::MOrder, opts)?;
    let measured = match typed {
        None => {
            if mu >= est.value {
                return Err(Error::Precondition(format!(
                    "mu = {mu} is not below the measured order {}",
                    est.value
                )));
            }
            est.value
        }
        Some((omega, rho)) => {
            let ty = type_estimate(f, t, g, GrowthMode::MOrder, rho, opts)?;
            if omega >= ty.value {
                return Err(Error::Precondition(format!(
                    "omega = {omega} is not below the measured type {}",
                    ty.value
                )));
            }
            ty.value
        }
    };
    let holds: Vec<bool> = est
        .numerators
        .iter()
        .zip(&est.denominators)
        .map(|(n, d)| match (n, typed) {
            (None, _) => false,
            (Some(n), None) => *n > mu * d,
            (Some(n), Some((omega, rho))) => *n > omega.ln() + rho * d,
        })
        .collect();
    let cell = |i: usize| ((1.0 - g.radius(i)) / (1.0 - g.radius(i + 1))).ln();
    let mut cumulative = Vec::with_capacity(holds.len());
    let mut acc = 0.0;
    for (i, &h) in holds.iter().enumerate() {
        if h {
            acc += cell(i);
        }
        cumulative.push(acc);
    }
    let start = cumulative.len().saturating_sub(6);
    let incs: Vec<f64> = cumulative[start..].windows(2).map(|w| w[1] - w[0]).collect();
    let unbounded = acc > 3.0 && incs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    Ok(LowerSetReport {
        radii: g.radii(),
        set: ExceptionalSet::from_grid_cells(g, &holds),
        holds,
        cumulative,
        unbounded,
        measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{diff_n, parse_expr};
    use crate::ode::{manufacture, solve_series};

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn log_measure_examples() {
        let one = ExceptionalSet::new(vec![(0.0, 1.0 - (-1f64).exp())]).unwrap();
        assert!((one.log_measure() - 1.0).abs() < 1e-15);
        let half = ExceptionalSet::new(vec![(0.0, 0.5)]).unwrap();
        assert!((half.log_measure() - 2f64.ln()).abs() < 1e-15);
        let two = ExceptionalSet::new(vec![(0.75, 0.875), (0.0, 0.5)]).unwrap();
        assert!((two.log_measure() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(ExceptionalSet::new(vec![(0.0, 0.5), (0.4, 0.6)]).is_err());
        assert!(ExceptionalSet::new(vec![(0.5, 1.0)]).is_err());
    }

    #[test]
    fn grid_cells_have_constant_measure() {
        let g = RadialGrid::default();
        let s = ExceptionalSet::from_grid_cells(&g, &[false, true, true, false, true]);
        assert_eq!(s.intervals().len(), 2);
        assert!((s.log_measure() - 3.0 * (1.0 / 0.72f64).ln()).abs() < 1e-12);
    }

    fn exp_problem() -> OdeProblem {
        let mut p = OdeProblem::new(
            vec![e("-1"), e("0")],
            Some(vec![LogComplex::ONE, LogComplex::ONE]),
        )
        .unwrap();
        p.solution = Some(e("exp(z)"));
        p
    }

    #[test]
    fn growth_bound_for_exponential() {
        let p = exp_problem();
        let b = growth_bound(&p, 0.7, 0.0, &BoundOptions::default()).unwrap();
        assert_eq!(b.n_c, 1);
        assert!((b.ln_c - 2f64.ln()).abs() < 1e-15);
        assert!((b.integral.to_real() - 0.7).abs() < 1e-12);
        assert!((b.log_bound.to_real() - (2f64.ln() + 0.7)).abs() < 1e-12);
        assert!(b.log_bound.to_real() >= 0.7);
    }

    #[test]
    fn growth_bound_quadrature_against_dense_oracle() {
        let p = manufacture(&e("exp(pow1mz(1))"), &[e("0")], 2).unwrap();
        let r = 0.9;
        let tight = BoundOptions { quad_tol: 1e-8, quad_cap: 1 << 18, ..Default::default() };
        let b = growth_bound(&p, r, 0.0, &tight).unwrap();
        assert!(b.converged);
        // |A_0(t)|^{1/2} = sqrt(2 (1-t)^-3 + (1-t)^-4), midpoint rule on 2^20 cells.
        let n = 1 << 20;
        let h = r / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (2.0 * (1.0 - t).powi(-3) + (1.0 - t).powi(-4)).sqrt() * h
            })
            .sum();
        assert!((b.integral.to_real() / oracle - 1.0).abs() < 1e-6, "{} vs {oracle}", b.integral.to_real());
        let b2 = growth_bound(&p, 0.95, 0.0, &BoundOptions::default()).unwrap();
        assert!(b2.log_bound.to_real() > b.log_bound.to_real());
    }

    #[test]
    fn growth_bound_handles_huge_coefficients() {
        let p = manufacture(&e("tower(3,1,1)"), &[e("tower(2,1,0.5)")], 2).unwrap();
        let b = growth_bound(&p, 0.99, 0.0, &BoundOptions::default()).unwrap();
        // ln|A_0|/2 is about e^{1/(1-r)} = e^100 near t = r.
        let lnln = b.log_bound.logmag.ln();
        assert!(lnln > 99.0 && lnln < 100.5, "{:?}", b);
        assert!(b.converged);
    }

    #[test]
    fn growth_bound_errors() {
        let p = exp_problem();
        let o = BoundOptions::default();
        assert!(growth_bound(&p, 1.0, 0.0, &o).is_err());
        let zero = OdeProblem::new(vec![e("0"), e("0")], None).unwrap();
        assert!(matches!(growth_bound(&zero, 0.5, 0.0, &o), Err(Error::Precondition(_))));
        let z = OdeProblem::new(vec![e("z"), e("0")], None).unwrap();
        assert!(matches!(growth_bound(&z, 0.5, 0.0, &o), Err(Error::Precondition(_))));
        let shifted = BoundOptions { nu: 0.2, ..o };
        assert!(growth_bound(&z, 0.5, 0.0, &shifted).is_err());
        assert!(growth_bound(&p, 0.5, 0.0, &shifted).is_ok());
    }

    #[test]
    fn bound_dominates_series() {
        let p = exp_problem();
        let s = solve_series(&p, 256).unwrap();
        let rep = domination_check(&p, &s, &RadialGrid::default(), 16, &BoundOptions::default()).unwrap();
        assert!(rep.pass && rep.min_margin() >= 0.0, "{rep:?}");
        let m = manufacture(&e("exp(pow1mz(1))"), &[e("0")], 2).unwrap();
        let s = solve_series(&m, 1024).unwrap();
        let rep = domination_check(&m, &s, &RadialGrid::default(), 16, &BoundOptions::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn bound_order_of_constant_problem_is_zero() {
        let p = exp_problem();
        let est = order_of_bound(
            &p,
            &ScaleTriple::canonical(),
            &RadialGrid::default(),
            &BoundOptions::default(),
            &GrowthOptions::default(),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn log_derivative_examples() {
        let o = GrowthOptions::default();
        let g = RadialGrid::default();
        let rep = log_derivative_check(&e("exp(z)"), 1, 0, &g, 0.5, 1.0, &o).unwrap();
        assert!(rep.violations.is_empty());
        assert!(rep.lhs_log.iter().all(|x| x.abs() < 1e-15));
        let (g99, _) = g.trimmed(0.99).unwrap();
        for k in [1, 2] {
            let rep = log_derivative_check(&e("exp(pow1mz(1))"), k, 0, &g99, 0.5, 1.0, &o).unwrap();
            assert!(rep.pass && rep.violations.log_measure() <= VIOLATION_BUDGET, "{rep:?}");
        }
        assert!(log_derivative_check(&e("z"), 1, 0, &g, 0.5, 1.0, &o).is_err());
        assert!(log_derivative_check(&e("exp(z)"), 1, 1, &g, 0.5, 1.0, &o).is_err());
    }

    #[test]
    fn log_derivative_lhs_matches_direct_quotient() {
        let f = e("exp(pow1mz(1))");
        let g = RadialGrid::new(0.5, 0.72, 4).unwrap();
        let rep = log_derivative_check(&f, 2, 1, &g, 0.5, 1.0, &GrowthOptions::default()).unwrap();
        for (i, r) in g.radii().iter().enumerate() {
            let z = Complex64::new(*r, 0.0);
            let q = diff_n(&f, 2).unwrap().eval_complex(z) / diff_n(&f, 1).unwrap().eval_complex(z);
            assert!((rep.lhs_log[i] - q.norm().ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn proximity_examples() {
        let o = GrowthOptions::default();
        let canon = ScaleTriple::canonical();
        let g = RadialGrid::default();
        let rep = proximity_bound_check(&e("exp(z)"), 1, &canon, &g, 1.0, &o).unwrap();
        assert!(rep.bound.pass && rep.bound.violations.is_empty());
        let rep = proximity_bound_check(&e("exp(pow1mz(1))"), 1, &canon, &g, 1.0, &o).unwrap();
        assert!(rep.bound.pass, "{:?}", rep.bound);
        let rep = proximity_bound_check(&e("tower(2,1,1)"), 2, &canon, &g, 1.0, &o).unwrap();
        assert!(rep.bound.pass, "{:?}", rep.bound);
    }

    #[test]
    fn borel_examples() {
        let radii: Vec<f64> = (0..200).map(|i| 1.0 - 0.5 * 0.95f64.powi(i)).collect();
        let same: Vec<f64> = radii.iter().map(|r| r.exp()).collect();
        let rep = borel_shift_check(&radii, &same, &same, &ExceptionalSet::empty(), 0.3, Interpolation::StepLower).unwrap();
        assert!(rep.pass && rep.premise_holds);

        // r <= (1 - 0.1 (1 - r))^2 holds on [0, 1): the difference is 0.01 (1 - r)(81 - r).
        let g: Vec<f64> = radii.clone();
        let h: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let bad = ExceptionalSet::new(vec![(0.0, 0.9)]).unwrap();
        let rep = borel_shift_check(&radii, &g, &h, &bad, 0.1, Interpolation::StepLower).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(!rep.premise_holds);
        assert!(rep.skipped > 0);

        let bumpy = vec![0.0, 1.0, 0.5];
        assert!(borel_shift_check(&radii[..3], &bumpy, &bumpy, &bad, 0.1, Interpolation::Linear).is_err());
    }

    #[test]
    fn borel_reports_violations() {
        let radii: Vec<f64> = (0..50).map(|i| 1.0 - 0.5 * 0.8f64.powi(i)).collect();
        let g: Vec<f64> = radii.iter().map(|r| 10.0 * r).collect();
        let h: Vec<f64> = radii.clone();
        let rep = borel_shift_check(&radii, &g, &h, &ExceptionalSet::empty(), 0.5, Interpolation::Linear).unwrap();
        assert_eq!(rep.first_violation, Some(radii[0]));
    }

    #[test]
    fn lower_set_examples() {
        let o = GrowthOptions::default();
        let canon = ScaleTriple::canonical();
        let g = RadialGrid::default();
        let rep = lower_set_measure(&e("tower(2,1,1)"), &canon, 0.5, &g, None, &o).unwrap();
        assert!(rep.holds.iter().all(|h| *h));
        assert!(rep.unbounded);
        let last = *rep.cumulative.last().unwrap();
        assert!((last - (0.5 / (1.0 - g.radius(24))).ln()).abs() < 1e-9);
        assert!(matches!(
            lower_set_measure(&e("2"), &canon, 0.1, &g, None, &o),
            Err(Error::Precondition(_))
        ));
        let typed = lower_set_measure(&e("tower(2,2,1)"), &canon, 0.0, &g, Some((1.0, 1.0)), &o).unwrap();
        assert!(typed.unbounded && typed.holds[12..].iter().all(|h| *h));
    }
}
