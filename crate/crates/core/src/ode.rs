//! Linear equations `f^(k) + A_{k-1} f^(k-1) + ... + A_0 f = 0` with analytic
//! coefficients: power-series solutions in log-space and manufactured
//! problems with a known closed-form solution.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcs::{eval_log, log_derivative_ratios, taylor, Expr, Node, MAX_TAYLOR_TERMS};
use crate::lognum::{convolution_term, lse_sum, LogComplex, Packed};

/// Terms checked by the reliability guard.
pub const GUARD_TERMS: usize = 16;
/// Relative tail contribution tolerated inside the reliable radius.
pub const GUARD_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_TERMS: usize = 4096;

/// Truncated Taylor series at 0 with log-space coefficients.
#[derive(Debug, Clone)]
pub struct LogSeries {
    pub coeffs: Vec<LogComplex>,
    /// Largest radius at which the truncation tail is negligible.
    pub r_reliable: f64,
}

fn ln_falling(n: usize, j: usize) -> f64 {
    (0..j).map(|i| ((n - i) as f64).ln()).sum()
}

impl LogSeries {
    pub fn new(coeffs: Vec<LogComplex>) -> Self {
        let r_reliable = reliable_radius(&coeffs);
        LogSeries { coeffs, r_reliable }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `n,logmag,phase` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,logmag,phase\n");
        for (n, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{n},{},{}\n", c.logmag, c.phase));
        }
        out
    }
}

fn tail_len(n: usize) -> usize {
    GUARD_TERMS.min(n / 2)
}

/// `ln` of the tail share of `sum |c_n| r^n`.
fn ln_tail_share(coeffs: &[LogComplex], r: f64) -> f64 {
    let lr = r.ln();
    let mags: Vec<LogComplex> = coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if c.is_zero() {
                LogComplex::ZERO
            } else {
                LogComplex::new(c.logmag + n as f64 * lr, 0.0)
            }
        })
        .collect();
    let start = coeffs.len() - tail_len(coeffs.len());
    let tail = lse_sum(&mags[start..]);
    let all = lse_sum(&mags);
    if tail.is_zero() {
        return f64::NEG_INFINITY;
    }
    tail.logmag - all.logmag
}

fn reliable_radius(coeffs: &[LogComplex]) -> f64 {
    if coeffs.iter().all(|c| c.is_zero()) {
        return 1.0;
    }
    let limit = GUARD_TOLERANCE.ln();
    let ok = |r: f64| ln_tail_share(coeffs, r) < limit;
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if !ok(1e-6) {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_guard(s: &LogSeries, radius: f64) -> Result<()> {
    if radius > s.r_reliable * (1.0 + 1e-14) {
        return Err(Error::Reliability {
            radius,
            guard: s.r_reliable,
        });
    }
    Ok(())
}

/// Derivatives `0..=upto` of the series at `z`, without the reliability guard.
pub fn series_derivatives(s: &LogSeries, z: Complex64, upto: usize) -> Vec<LogComplex> {
    let zl = LogComplex::from_complex(z);
    (0..=upto)
        .map(|j| {
            let terms: Vec<LogComplex> = s
                .coeffs
                .iter()
                .enumerate()
                .skip(j)
                .map(|(n, c)| {
                    if c.is_zero() || (zl.is_zero() && n > j) {
                        return LogComplex::ZERO;
                    }
                    let power = if n == j {
                        LogComplex::ONE
                    } else {
                        LogComplex::new(zl.logmag * (n - j) as f64, zl.phase * (n - j) as f64)
                    };
                    (*c * power).scale_log(ln_falling(n, j))
                })
                .collect();
            lse_sum(&terms)
        })
        .collect()
}

/// Value of the truncated series at `z`.
pub fn eval_series(s: &LogSeries, z: Complex64) -> Result<LogComplex> {
    check_guard(s, z.norm())?;
    Ok(series_derivatives(s, z, 0)[0])
}

/// An instance of the linear equation with its initial data.
#[derive(Debug, Clone)]
pub struct OdeProblem {
    pub k: usize,
    /// `A_0 .. A_{k-1}`.
    pub coeffs: Vec<Expr>,
    /// `f(0) .. f^(k-1)(0)`; log-space because a manufactured `f(0)` can exceed `f64`.
    pub initial: Vec<LogComplex>,
    pub solution: Option<Expr>,
}

impl OdeProblem {
    /// With `initial = None` the first canonical basis vector is used.
    pub fn new(coeffs: Vec<Expr>, initial: Option<Vec<LogComplex>>) -> Result<Self> {
        let k = coeffs.len();
        if k < 2 {
            return Err(Error::Argument(format!("order k = {k} must be at least 2")));
        }
        let initial = match initial {
            Some(ic) if ic.len() != k => {
                return Err(Error::Argument(format!(
                    "{} initial conditions for order {k}",
                    ic.len()
                )))
            }
            Some(ic) => ic,
            None => canonical_basis(k).remove(0),
        };
        Ok(OdeProblem {
            k,
            coeffs,
            initial,
            solution: None,
        })
    }

    pub fn with_initial(&self, initial: Vec<LogComplex>) -> Result<Self> {
        let mut p = OdeProblem::new(self.coeffs.clone(), Some(initial))?;
        p.solution = self.solution.clone();
        Ok(p)
    }
}

pub fn canonical_basis(k: usize) -> Vec<Vec<LogComplex>> {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { LogComplex::ONE } else { LogComplex::ZERO })
                .collect()
        })
        .collect()
}

/// Taylor coefficients of the solution from the coefficient recurrence.
pub fn solve_series(p: &OdeProblem, n: usize) -> Result<LogSeries> {
    if n > MAX_TAYLOR_TERMS {
        return Err(Error::Size(format!("{n} terms requested, limit {MAX_TAYLOR_TERMS}")));
    }
    let k = p.k;
    let a: Vec<Packed> = p
        .coeffs
        .iter()
        .map(|e| taylor(e, n).map(|s| Packed::new(&s.coeffs)))
        .collect::<Result<_>>()?;
    let mut c: Vec<LogComplex> = Vec::with_capacity(n);
    // d[j][m] = ((m + j)! / m!) c_{m+j}
    let mut d: Vec<Packed> = vec![Packed::default(); k];
    let push = |c: &mut Vec<LogComplex>, d: &mut Vec<Packed>, v: LogComplex| {
        let t = c.len();
        c.push(v);
        for (j, dj) in d.iter_mut().enumerate() {
            if t >= j {
                dj.push(v.scale_log(ln_falling(t, j)));
            }
        }
    };
    for (i, ic) in p.initial.iter().enumerate().take(n) {
        // c_i = f^(i)(0) / i!
        push(&mut c, &mut d, ic.scale_log(-ln_falling(i, i)));
    }
    let mut m = 0;
    while m + k < n {
        let terms: Vec<LogComplex> = (0..k).map(|j| convolution_term(&a[j], &d[j], m, 0)).collect();
        let rhs = lse_sum(&terms);
        let next = rhs.neg().scale_log(-ln_falling(m + k, k));
        push(&mut c, &mut d, next);
        m += 1;
    }
    Ok(LogSeries::new(c))
}

/// Solutions for every canonical initial vector.
pub fn solve_basis(p: &OdeProblem, n: usize) -> Result<Vec<LogSeries>> {
    canonical_basis(p.k)
        .into_iter()
        .map(|ic| solve_series(&p.with_initial(ic)?, n))
        .collect()
}

fn relative_defect(terms: &[LogComplex]) -> f64 {
    let sum = lse_sum(terms);
    if sum.is_zero() {
        return 0.0;
    }
    let mags: Vec<LogComplex> = terms
        .iter()
        .map(|t| if t.is_zero() { *t } else { LogComplex::new(t.logmag, 0.0) })
        .collect();
    (sum.logmag - lse_sum(&mags).logmag).exp()
}

fn residual_at(p: &OdeProblem, s: &LogSeries, z: Complex64) -> Result<f64> {
    let derivs = series_derivatives(s, z, p.k);
    let mut terms = vec![derivs[p.k]];
    for (j, a) in p.coeffs.iter().enumerate() {
        terms.push(eval_log(a, z)? * derivs[j]);
    }
    Ok(relative_defect(&terms))
}

/// Largest relative defect `|f^(k) + sum A_j f^(j)| / (|f^(k)| + sum |A_j f^(j)|)`
/// over `n_theta` points of the circle `|z| = r_check`.
pub fn residual(p: &OdeProblem, s: &LogSeries, r_check: f64, n_theta: usize) -> Result<f64> {
    check_guard(s, r_check)?;
    residual_unguarded(p, s, r_check, n_theta)
}

/// [`residual`] without the reliability guard, for probing truncated series.
pub fn residual_unguarded(p: &OdeProblem, s: &LogSeries, r_check: f64, n_theta: usize) -> Result<f64> {
    if n_theta == 0 {
        return Err(Error::Argument("n_theta must be positive".into()));
    }
    let values: Vec<f64> = (0..n_theta)
        .into_par_iter()
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / n_theta as f64;
            residual_at(p, s, Complex64::from_polar(r_check, theta))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Problem of order `k` solved by `f = exp(g)`, with `A_1 .. A_{k-1}` given
/// and `A_0 = -(D_k + sum_{j>=1} A_j D_j)`, `D_j = f^(j) / f`.
pub fn manufacture(f: &Expr, higher: &[Expr], k: usize) -> Result<OdeProblem> {
    if !matches!(f.node(), Node::Exp(_)) {
        return Err(Error::Argument(format!("manufacture needs f = exp(g), got {}", f.short())));
    }
    if k < 2 || higher.len() != k - 1 {
        return Err(Error::Argument(format!(
            "order {k} needs {} higher coefficients, got {}",
            k.saturating_sub(1),
            higher.len()
        )));
    }
    let d = log_derivative_ratios(f, k)?;
    let mut sum = d[k].clone();
    for (j, a) in higher.iter().enumerate() {
        sum = sum.add(&a.mul(&d[j + 1]));
    }
    let mut coeffs = vec![sum.neg()];
    coeffs.extend(higher.iter().cloned());
    let zero = Complex64::new(0.0, 0.0);
    let f0 = eval_log(f, zero)?;
    let initial = d
        .iter()
        .take(k)
        .map(|dj| Ok(eval_log(dj, zero)? * f0))
        .collect::<Result<Vec<_>>>()?;
    let mut p = OdeProblem::new(coeffs, Some(initial))?;
    p.solution = Some(f.clone());
    Ok(p)
}

/// Relative defect of the closed-form solution `exp(g)` at `z`, computed from
/// the `D_j` so that `f` itself is never formed.
pub fn closed_form_residual(p: &OdeProblem, z: Complex64) -> Result<f64> {
    let f = p
        .solution
        .as_ref()
        .ok_or_else(|| Error::Argument("problem has no closed-form solution".into()))?;
    let d = log_derivative_ratios(f, p.k)?;
    let mut terms = vec![eval_log(&d[p.k], z)?];
    for (j, a) in p.coeffs.iter().enumerate() {
        terms.push(eval_log(a, z)? * eval_log(&d[j], z)?);
    }
    Ok(relative_defect(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::parse_expr;

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn lcr(x: f64) -> LogComplex {
        LogComplex::from_real(x)
    }

    fn c0() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn trivial_equation_gives_linear_polynomial() {
        let p = OdeProblem::new(vec![e("0"), e("0")], Some(vec![lcr(2.0), lcr(3.0)])).unwrap();
        let s = solve_series(&p, 10).unwrap();
        assert!((s.coeffs[0].to_real() - 2.0).abs() < 1e-15);
        assert!((s.coeffs[1].to_real() - 3.0).abs() < 1e-15);
        assert!(s.coeffs[2..].iter().all(|c| c.is_zero()));
        assert_eq!(s.r_reliable, 1.0);
    }

    #[test]
    fn exponential_solution() {
        let p = OdeProblem::new(vec![e("-1"), e("0")], Some(vec![lcr(1.0), lcr(1.0)])).unwrap();
        let s = solve_series(&p, 40).unwrap();
        let mut lf = 0.0;
        for (n, c) in s.coeffs.iter().enumerate() {
            if n > 0 {
                lf += (n as f64).ln();
            }
            assert!((c.logmag + lf).abs() < 1e-12, "n = {n}");
            assert_eq!(c.phase, 0.0);
        }
        let v = eval_series(&s, Complex64::new(0.5, 0.0)).unwrap();
        assert!((v.logmag - 0.5).abs() < 1e-12 && v.phase.abs() < 1e-15);
        assert!(residual(&p, &s, 0.5, 64).unwrap() <= 1e-12);
    }

    #[test]
    fn geometric_series_evaluation() {
        let s = taylor(&Expr::pow1mz(1.0), 128).unwrap();
        let v = eval_series(&s, Complex64::new(0.5, 0.0)).unwrap();
        assert!((v.logmag - 2f64.ln()).abs() < 1e-12);
        match eval_series(&s, Complex64::new(0.99, 0.0)) {
            Err(Error::Reliability { guard, .. }) => assert!(guard > 0.5 && guard < 0.99),
            other => panic!("expected guard error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_detected() {
        let p = OdeProblem::new(vec![e("-1"), e("0")], Some(vec![lcr(1.0), lcr(1.0)])).unwrap();
        let s = solve_series(&p, 8).unwrap();
        assert!(residual(&p, &s, 0.9, 64).is_err());
        let r = residual_unguarded(&p, &s, 0.9, 256).unwrap();
        // Direct computation: at z = -0.9 the defect is z^6/6! + z^7/7! against
        // |P_5(z)| + |P_7(z)|.
        let z = -0.9f64;
        let p5: f64 = (0..6).map(|n| z.powi(n) / (1..=n).map(|k| k as f64).product::<f64>()).sum();
        let p7 = p5 + z.powi(6) / 720.0 + z.powi(7) / 5040.0;
        let oracle = (z.powi(6) / 720.0 + z.powi(7) / 5040.0).abs() / (p5.abs() + p7.abs());
        assert!(r >= oracle * (1.0 - 1e-9), "{r} vs {oracle}");
        assert!(r > 5e-4);
    }

    #[test]
    fn manufacture_examples() {
        let p = manufacture(&e("exp(pow1mz(1))"), &[e("0")], 2).unwrap();
        let expect = e("-(2*pow1mz(3) + pow1mz(4))");
        for z in [Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.4)] {
            let a = p.coeffs[0].eval_complex(z);
            let b = expect.eval_complex(z);
            assert!((a - b).norm() < 1e-12 * b.norm());
        }
        let ez = manufacture(&e("exp(z)"), &[e("0")], 2).unwrap();
        assert_eq!(ez.coeffs[0].as_const(), Some(Complex64::new(-1.0, 0.0)));
        let ez3 = manufacture(&e("exp(z)"), &[e("0"), e("0")], 3).unwrap();
        assert_eq!(ez3.coeffs[0].as_const(), Some(Complex64::new(-1.0, 0.0)));
        assert!(matches!(manufacture(&e("z"), &[e("0")], 2), Err(Error::Argument(_))));
        assert!(matches!(manufacture(&e("exp(z)"), &[], 2), Err(Error::Argument(_))));
    }

    #[test]
    fn manufactured_series_matches_taylor() {
        let f = e("exp(pow1mz(1))");
        let p = manufacture(&f, &[e("0")], 2).unwrap();
        assert!((p.initial[0].logmag - 1.0).abs() < 1e-15);
        assert!((p.initial[1].logmag - 1.0).abs() < 1e-15);
        let s = solve_series(&p, 512).unwrap();
        let t = taylor(&f, 512).unwrap();
        for (n, (a, b)) in s.coeffs.iter().zip(&t.coeffs).enumerate() {
            let err = ((a.logmag - b.logmag).exp() - 1.0).abs();
            assert!(err <= 1e-8, "n = {n}: {err}");
        }
        let z = Complex64::new(0.3, 0.0);
        let v = eval_series(&s, z).unwrap();
        let w = eval_log(&f, z).unwrap();
        assert!(((v.logmag - w.logmag).exp() - 1.0).abs() < 1e-9);
        assert!(residual(&p, &s, 0.3, 64).unwrap() <= 1e-9);
    }

    #[test]
    fn closed_form_residual_is_tiny() {
        let p = manufacture(&e("tower(3,1,1)"), &[e("tower(2,1,0.5)")], 2).unwrap();
        for z in [Complex64::new(0.5, 0.2), Complex64::new(0.8, 0.0)] {
            assert!(closed_form_residual(&p, z).unwrap() <= 1e-9);
        }
        // f(0) = exp(exp(e)).
        assert!((p.initial[0].logmag - std::f64::consts::E.exp()).abs() < 1e-12);
    }

    #[test]
    fn canonical_basis_leads_with_identity() {
        let p = OdeProblem::new(vec![e("pow1mz(2)"), e("z"), e("exp(z)")], None).unwrap();
        let sols = solve_basis(&p, 12).unwrap();
        for (i, s) in sols.iter().enumerate() {
            for j in 0..3 {
                let v = s.coeffs[j].to_real() * (1..=j).map(|k| k as f64).product::<f64>();
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn problem_validation() {
        assert!(OdeProblem::new(vec![e("1")], None).is_err());
        assert!(OdeProblem::new(vec![e("1"), e("z")], Some(vec![lcr(1.0)])).is_err());
        let p = OdeProblem::new(vec![e("1"), e("z")], None).unwrap();
        assert!(matches!(solve_series(&p, MAX_TAYLOR_TERMS + 1), Err(Error::Size(_))));
        assert!(eval_series(&solve_series(&p, 4).unwrap(), c0()).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn superposition(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0) {
                let base = OdeProblem::new(vec![e("pow1mz(1)"), e("2*z - 1")], None).unwrap();
                let n = 64;
                let s1 = solve_series(&base.with_initial(vec![lcr(a), lcr(b)]).unwrap(), n).unwrap();
                let s2 = solve_series(&base.with_initial(vec![lcr(c), lcr(d)]).unwrap(), n).unwrap();
                let s = solve_series(&base.with_initial(vec![lcr(a + c), lcr(b + d)]).unwrap(), n).unwrap();
                for i in 0..n {
                    let sum = s1.coeffs[i] + s2.coeffs[i];
                    let scale = s1.coeffs[i].to_complex().norm() + s2.coeffs[i].to_complex().norm();
                    let diff = (sum.to_complex() - s.coeffs[i].to_complex()).norm();
                    prop_assert!(diff <= 1e-11 * scale.max(1e-300) + 1e-300, "i = {i}: {diff} vs {scale}");
                }
            }

            #[test]
            fn manufactured_exactness(r in 0.0f64..0.8, t in -3.2f64..3.2) {
                let p = manufacture(&e("exp(pow1mz(1) + z^2)"), &[e("z")], 2).unwrap();
                let z = Complex64::from_polar(r, t);
                prop_assert!(closed_form_residual(&p, z).unwrap() <= 1e-9);
            }
        }
    }
}
