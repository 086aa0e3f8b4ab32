//! Analytic functions on the unit disc as shared expression DAGs:
//! symbolic differentiation, log-space evaluation and Taylor coefficients.

mod parse;
mod taylor;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lognum::{cmp_real, LogComplex};

pub use parse::parse_expr;
pub use taylor::{taylor, MAX_TAYLOR_TERMS};

/// Default DAG node budget for results of [`diff`] and friends.
pub const MAX_NODES: usize = 10_000;

/// Expression node. `PowOneMinusZ(mu)` is `(1 - z)^(-mu)` on the principal branch.
#[derive(Debug)]
pub enum Node {
    Z,
    Const(Complex64),
    Add(Expr, Expr),
    Neg(Expr),
    Mul(Expr, Expr),
    PowOneMinusZ(f64),
    Exp(Expr),
    IntPow(Expr, u32),
}

/// Cheaply clonable handle to an immutable expression node.
#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    fn key(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn z() -> Expr {
        Expr::wrap(Node::Z)
    }

    pub fn constant(c: Complex64) -> Expr {
        Expr::wrap(Node::Const(c))
    }

    pub fn real(x: f64) -> Expr {
        Expr::constant(Complex64::new(x, 0.0))
    }

    pub fn pow1mz(mu: f64) -> Expr {
        if mu == 0.0 {
            return Expr::real(1.0);
        }
        Expr::wrap(Node::PowOneMinusZ(mu))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(Complex64::new(v, 0.0))
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_const(0.0) {
            return other.clone();
        }
        if other.is_const(0.0) {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Expr::constant(a + b);
        }
        Expr::wrap(Node::Add(self.clone(), other.clone()))
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_const(0.0) || other.is_const(0.0) {
            return Expr::real(0.0);
        }
        if self.is_const(1.0) {
            return other.clone();
        }
        if other.is_const(1.0) {
            return self.clone();
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => Expr::constant(a * b),
            (Node::PowOneMinusZ(a), Node::PowOneMinusZ(b)) => Expr::pow1mz(a + b),
            (Node::Const(a), Node::Mul(l, r)) => match l.as_const() {
                Some(b) => Expr::constant(a * b).mul(r),
                None => Expr::wrap(Node::Mul(self.clone(), other.clone())),
            },
            (_, Node::Const(_)) => other.mul(self),
            _ => Expr::wrap(Node::Mul(self.clone(), other.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        Expr::wrap(Node::Exp(self.clone()))
    }

    pub fn powi(&self, n: u32) -> Expr {
        match (n, self.node()) {
            (0, _) => Expr::real(1.0),
            (1, _) => self.clone(),
            (_, Node::Const(c)) => Expr::constant(c.powu(n)),
            (_, Node::PowOneMinusZ(mu)) => Expr::pow1mz(mu * n as f64),
            _ => Expr::wrap(Node::IntPow(self.clone(), n)),
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        fn walk(e: &Expr, seen: &mut HashSet<*const Node>) {
            if !seen.insert(e.key()) {
                return;
            }
            for c in e.children() {
                walk(c, seen);
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Z | Node::Const(_) | Node::PowOneMinusZ(_) => vec![],
            Node::Add(a, b) | Node::Mul(a, b) => vec![a, b],
            Node::Neg(a) | Node::Exp(a) | Node::IntPow(a, _) => vec![a],
        }
    }

    /// Longest chain of nested `Exp` nodes.
    pub fn exp_depth(&self) -> usize {
        let below = self.children().iter().map(|c| c.exp_depth()).max().unwrap_or(0);
        match self.node() {
            Node::Exp(_) => below + 1,
            _ => below,
        }
    }

    fn check_budget(self, budget: usize) -> Result<Expr> {
        let n = self.node_count();
        if n > budget {
            return Err(Error::Size(format!("expression has {n} nodes, budget {budget}")));
        }
        Ok(self)
    }

    /// Plain `f64` evaluation; overflows to infinity where `eval_log` would not.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        match self.node() {
            Node::Z => z,
            Node::Const(c) => *c,
            Node::Add(a, b) => a.eval_complex(z) + b.eval_complex(z),
            Node::Neg(a) => -a.eval_complex(z),
            Node::Mul(a, b) => a.eval_complex(z) * b.eval_complex(z),
            Node::PowOneMinusZ(mu) => (Complex64::new(1.0, 0.0) - z).powf(-mu),
            Node::Exp(a) => a.eval_complex(z).exp(),
            Node::IntPow(a, n) => a.eval_complex(z).powu(*n),
        }
    }

    /// Abbreviated rendering for error messages.
    pub fn short(&self) -> String {
        let s = self.to_string();
        if s.chars().count() <= 60 {
            s
        } else {
            let head: String = s.chars().take(57).collect();
            format!("{head}...")
        }
    }
}

fn check_disc(z: Complex64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} is not inside the unit disc", z.norm())));
    }
    Ok(())
}

fn pow1mz_log(mu: f64, z: Complex64) -> LogComplex {
    let w = Complex64::new(1.0 - z.re, -z.im);
    LogComplex::new(-mu * w.norm().ln(), -mu * w.arg())
}

/// Value of `e` at `z` in log-space.
pub fn eval_log(e: &Expr, z: Complex64) -> Result<LogComplex> {
    check_disc(z)?;
    eval_log_inner(e, z)
}

fn eval_log_inner(e: &Expr, z: Complex64) -> Result<LogComplex> {
    Ok(match e.node() {
        Node::Z => LogComplex::from_complex(z),
        Node::Const(c) => LogComplex::from_complex(*c),
        Node::Add(a, b) => eval_log_inner(a, z)? + eval_log_inner(b, z)?,
        Node::Neg(a) => -eval_log_inner(a, z)?,
        Node::Mul(a, b) => eval_log_inner(a, z)? * eval_log_inner(b, z)?,
        Node::PowOneMinusZ(mu) => pow1mz_log(*mu, z),
        Node::Exp(a) => eval_log_inner(a, z)?
            .exp()
            .map_err(|err| err.with_context(|| e.short()))?,
        Node::IntPow(a, n) => eval_log_inner(a, z)?.powi(*n as i32),
    })
}

/// Gap in `ln|.|` beyond which the smaller summand of an overflowing sum is dropped.
const DOMINANCE_GAP: f64 = 40.0;

/// `ln|e(z)|` as a real-valued `LogComplex`, or `None` where `e(z) = 0`.
///
/// Products, powers and a top-level `Exp` are peeled off before evaluating, so
/// functions whose value overflows `eval_log` (a level-3 tower near the
/// boundary) still have a representable `ln|f|`.
pub fn ln_abs(e: &Expr, z: Complex64) -> Result<Option<LogComplex>> {
    check_disc(z)?;
    ln_abs_inner(e, z)
}

fn ln_abs_inner(e: &Expr, z: Complex64) -> Result<Option<LogComplex>> {
    let from_value = |v: LogComplex| {
        if v.is_zero() {
            None
        } else {
            Some(LogComplex::from_real(v.logmag))
        }
    };
    match e.node() {
        Node::Exp(g) => Ok(Some(
            eval_log_inner(g, z).map_err(|err| err.with_context(|| e.short()))?.re_part(),
        )),
        Node::Mul(a, b) => Ok(match (ln_abs_inner(a, z)?, ln_abs_inner(b, z)?) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        }),
        Node::Neg(a) => ln_abs_inner(a, z),
        Node::IntPow(a, n) => Ok(ln_abs_inner(a, z)?.map(|x| x.scale(*n as f64))),
        Node::Add(a, b) => match eval_log_inner(e, z) {
            Ok(v) => Ok(from_value(v)),
            Err(err) if err.is_overflow() => {
                let (Some(la), Some(lb)) = (ln_abs_inner(a, z)?, ln_abs_inner(b, z)?) else {
                    return Err(err);
                };
                let gap = LogComplex::from_real(DOMINANCE_GAP);
                if cmp_real(&la.sub(lb), &gap).is_ge() {
                    Ok(Some(la))
                } else if cmp_real(&lb.sub(la), &gap).is_ge() {
                    Ok(Some(lb))
                } else {
                    Err(err)
                }
            }
            Err(err) => Err(err),
        },
        _ => Ok(from_value(eval_log_inner(e, z)?)),
    }
}

fn diff_memo(e: &Expr, memo: &mut HashMap<*const Node, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.key()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Z => Expr::real(1.0),
        Node::Const(_) => Expr::real(0.0),
        Node::Add(a, b) => diff_memo(a, memo).add(&diff_memo(b, memo)),
        Node::Neg(a) => diff_memo(a, memo).neg(),
        Node::Mul(a, b) => {
            let da = diff_memo(a, memo);
            let db = diff_memo(b, memo);
            da.mul(b).add(&a.mul(&db))
        }
        Node::PowOneMinusZ(mu) => Expr::real(*mu).mul(&Expr::pow1mz(mu + 1.0)),
        Node::Exp(g) => diff_memo(g, memo).mul(e),
        Node::IntPow(a, n) => Expr::real(*n as f64)
            .mul(&a.powi(n - 1))
            .mul(&diff_memo(a, memo)),
    };
    memo.insert(e.key(), d.clone());
    d
}

/// Exact symbolic derivative.
pub fn diff(e: &Expr) -> Result<Expr> {
    diff_memo(e, &mut HashMap::new()).check_budget(MAX_NODES)
}

/// `j`-th derivative.
pub fn diff_n(e: &Expr, j: usize) -> Result<Expr> {
    let mut d = e.clone();
    for _ in 0..j {
        d = diff(&d)?;
    }
    Ok(d)
}

/// `D_j = f^(j) / f` for `j = 0..=k`, where `f = exp(g)`.
pub fn log_derivative_ratios(f: &Expr, k: usize) -> Result<Vec<Expr>> {
    let Node::Exp(g) = f.node() else {
        return Err(Error::Argument(format!(
            "log-derivative ratios need exp(g), got {}",
            f.short()
        )));
    };
    let dg = diff(g)?;
    let mut out = vec![Expr::real(1.0)];
    for j in 0..k {
        let next = diff(&out[j])?.add(&dg.mul(&out[j])).check_budget(MAX_NODES)?;
        out.push(next);
    }
    Ok(out)
}

/// `exp^[level](c (1 - z)^(-mu))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerSpec {
    pub level: u32,
    pub c: f64,
    pub mu: f64,
}

impl TowerSpec {
    pub fn new(level: u32, c: f64, mu: f64) -> Result<Self> {
        if !(1..=3).contains(&level) {
            return Err(Error::Argument(format!("tower level {level} not in 1..=3")));
        }
        if !(c > 0.0 && c.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Argument(format!("tower needs c > 0 and mu > 0 (got {c}, {mu})")));
        }
        Ok(TowerSpec { level, c, mu })
    }

    /// `c (1 - r)^(-mu)`, the innermost argument on the positive axis.
    pub fn inner(&self, r: f64) -> f64 {
        self.c * (1.0 - r).powf(-self.mu)
    }

    /// Largest radius at which the innermost argument stays below `limit`.
    pub fn max_radius(&self, limit: f64) -> f64 {
        1.0 - (self.c / limit).powf(1.0 / self.mu)
    }
}

pub fn build_tower(t: &TowerSpec) -> Expr {
    let mut e = Expr::real(t.c).mul(&Expr::pow1mz(t.mu));
    for _ in 0..t.level {
        e = e.exp();
    }
    e
}

/// A named catalog function, usable by name in the CLI.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub note: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    let e = |name, source, note| CatalogEntry { name, source, note };
    vec![
        e("const5", "5", "bounded"),
        e("poly", "1 + 2*z + 3*z^2", "polynomial"),
        e("expz", "exp(z)", "entire, bounded in the disc"),
        e("pole1", "pow1mz(1)", "1/(1-z)"),
        e("pole-half", "pow1mz(0.5)", "(1-z)^(-1/2)"),
        e("exp-pole", "exp(pow1mz(1))", "level-1 tower, c = 1, mu = 1"),
        e("tower1", "tower(1,2,0.5)", "level-1 tower"),
        e("tower2", "tower(2,1,1)", "level-2 tower"),
        e("tower2-half", "tower(2,1,0.5)", "level-2 tower"),
        e("tower2-c2", "tower(2,2,1)", "level-2 tower, type 2"),
        e("tower3", "tower(3,1,1)", "level-3 tower"),
        e("tower3-half", "tower(3,1,0.5)", "level-3 tower"),
        e("mixed", "exp(z)*pow1mz(2) - 3*z", "sum and product"),
    ]
}

/// Resolves a catalog name or parses an expression.
pub fn lookup_or_parse(s: &str) -> Result<Expr> {
    match catalog().iter().find(|c| c.name == s.trim()) {
        Some(c) => parse_expr(c.source),
        None => parse_expr(s),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Z => write!(f, "z"),
            Node::Const(c) if c.im == 0.0 && c.re >= 0.0 => write!(f, "{}", fmt_num(c.re)),
            Node::Const(c) => write!(f, "const({},{})", fmt_num(c.re), fmt_num(c.im)),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::PowOneMinusZ(mu) => write!(f, "pow1mz({})", fmt_num(*mu)),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::IntPow(a, n) => write!(f, "({a})^{n}"),
        }
    }
}

impl ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn derivative_examples() {
        let d = diff(&Expr::pow1mz(1.0)).unwrap();
        assert!(matches!(d.node(), Node::PowOneMinusZ(m) if *m == 2.0));
        let g = Expr::z().mul(&Expr::real(3.0));
        let e = g.exp();
        let d = diff(&e).unwrap();
        match d.node() {
            Node::Mul(a, b) => {
                assert_eq!(a.as_const(), Some(c(3.0, 0.0)));
                assert!(Arc::ptr_eq(&b.0, &e.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = Expr::pow1mz(1.0).exp();
        let d = diff(&e).unwrap();
        let z = c(0.3, 0.0);
        let h = 1e-6;
        let fd = (e.eval_complex(z + h) - e.eval_complex(z - h)) / (2.0 * h);
        assert!(rel(fd, d.eval_complex(z)) <= 1e-7);
    }

    #[test]
    fn eval_log_examples() {
        let v = eval_log(&Expr::z().exp(), c(0.5, 0.0)).unwrap();
        assert_eq!((v.logmag, v.phase), (0.5, 0.0));
        let v = eval_log(&Expr::pow1mz(1.0), c(0.9, 0.0)).unwrap();
        assert!((v.logmag - 10f64.ln()).abs() < 1e-14);
        assert_eq!(v.phase, 0.0);
        let t = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let v = eval_log(&t, c(0.9, 0.0)).unwrap();
        // e^10 to 16 digits, computed independently.
        assert!((v.logmag - 22026.465794806718).abs() < 1e-9);
        assert_eq!(v.phase, 0.0);
        assert!(matches!(eval_log(&t, c(1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn overflow_names_subexpression() {
        let t = build_tower(&TowerSpec::new(3, 1.0, 1.0).unwrap());
        match eval_log(&t, c(0.9, 0.0)) {
            Err(Error::TowerOverflow { context: Some(ctx), logmag, .. }) => {
                assert!(ctx.starts_with("exp(exp("), "{ctx}");
                assert!((logmag - 22026.465794806718).abs() < 1e-9);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn ln_abs_reaches_level_three() {
        let t = build_tower(&TowerSpec::new(3, 1.0, 1.0).unwrap());
        let r = 1.0 - 1.0 / 600.0;
        let l = ln_abs(&t, c(r, 0.0)).unwrap().unwrap();
        // ln ln ln |f| = 1 / (1 - r) on the positive axis.
        assert!((l.logmag.ln() - 600.0).abs() < 1e-9);
        let d = diff(&t).unwrap();
        assert!(ln_abs(&d, c(r, 0.0)).unwrap().unwrap().logmag >= l.logmag);
        assert!(ln_abs(&Expr::real(0.0), c(0.1, 0.0)).unwrap().is_none());
    }

    #[test]
    fn ln_abs_drops_dominated_summand() {
        let t = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let e = t.add(&Expr::z());
        let l = ln_abs(&e, c(0.999, 0.0)).unwrap().unwrap();
        assert!((l.logmag - 1000.0).abs() < 1e-9);
        let cancel = t.sub(&t);
        assert!(ln_abs(&cancel, c(0.999, 0.0)).is_err());
    }

    #[test]
    fn log_derivative_ratio_examples() {
        let g = Expr::pow1mz(1.0);
        let f = g.exp();
        let d = log_derivative_ratios(&f, 3).unwrap();
        let z = c(0.2, 0.1);
        let g1 = diff(&g).unwrap().eval_complex(z);
        let g2 = diff_n(&g, 2).unwrap().eval_complex(z);
        let g3 = diff_n(&g, 3).unwrap().eval_complex(z);
        assert!(rel(d[1].eval_complex(z), g1) < 1e-14);
        assert!(rel(d[2].eval_complex(z), g2 + g1 * g1) < 1e-13);
        assert!(rel(d[3].eval_complex(z), g3 + 3.0 * g1 * g2 + g1 * g1 * g1) < 1e-13);
        assert!(matches!(
            log_derivative_ratios(&Expr::z(), 2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn tower_examples() {
        let t = build_tower(&TowerSpec::new(1, 1.0, 1.0).unwrap());
        assert_eq!(t.to_string(), "exp(pow1mz(1))");
        let t2 = build_tower(&TowerSpec::new(2, 1.0, 1.0).unwrap());
        let v = eval_log(&t2, c(0.0, 0.0)).unwrap();
        assert!((v.logmag - std::f64::consts::E).abs() < 1e-15);
        assert!(TowerSpec::new(4, 1.0, 1.0).is_err());
        assert!(TowerSpec::new(2, 0.0, 1.0).is_err());
        let s = TowerSpec::new(3, 1.0, 1.0).unwrap();
        assert!((s.inner(s.max_radius(700.0)) - 700.0).abs() < 1e-9);
    }

    #[test]
    fn node_budget_is_enforced() {
        let mut e = Expr::z();
        for _ in 0..20 {
            e = e.add(&e.mul(&Expr::z())).exp();
        }
        // Sharing keeps the DAG small; the derivative stays within budget.
        assert!(e.node_count() < 100);
        let big = (0..6000).fold(Expr::z(), |acc, i| acc.add(&Expr::z().mul(&Expr::real(i as f64 + 2.0))));
        assert!(matches!(big.check_budget(MAX_NODES), Err(Error::Size(_))));
    }

    #[test]
    fn simplifications() {
        assert!(Expr::pow1mz(1.0).mul(&Expr::pow1mz(2.0)).to_string() == "pow1mz(3)");
        assert!(Expr::pow1mz(1.5).powi(2).to_string() == "pow1mz(3)");
        assert!(Expr::z().neg().neg().to_string() == "z");
        assert!(Expr::real(0.0).mul(&Expr::z().exp()).is_const(0.0));
        assert!(Expr::real(2.0).mul(&Expr::real(3.0).mul(&Expr::z())).to_string() == "(6 * z)");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = Complex64> {
            (0.0f64..0.5, -3.2f64..3.2).prop_map(|(r, t)| Complex64::from_polar(r, t))
        }

        fn catalog_exprs() -> Vec<Expr> {
            catalog().iter().map(|c| parse_expr(c.source).unwrap()).collect()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(20))]

            #[test]
            fn diff_matches_finite_differences(z in point()) {
                for e in catalog_exprs() {
                    let d = diff(&e).unwrap();
                    // Step scaled to the logarithmic derivative keeps both the
                    // truncation and rounding errors near 1e-10.
                    let ratio = (d.eval_complex(z) / e.eval_complex(z)).norm();
                    let h = 1e-5 / ratio.max(1.0);
                    let fd = (e.eval_complex(z + h) - e.eval_complex(z - h)) / (2.0 * h);
                    let exact = d.eval_complex(z);
                    if !exact.norm().is_finite() { continue; }
                    let err = (fd - exact).norm() / exact.norm().max(1.0);
                    prop_assert!(err <= 1e-6, "{e}: {fd} vs {exact}");
                }
            }

            #[test]
            fn exp_times_ratio_is_derivative(z in point()) {
                let g = parse_expr("pow1mz(1) + 2*z^2").unwrap();
                let f = g.exp();
                let ds = log_derivative_ratios(&f, 3).unwrap();
                for (j, dj) in ds.iter().enumerate() {
                    let lhs = f.eval_complex(z) * dj.eval_complex(z);
                    let rhs = diff_n(&f, j).unwrap().eval_complex(z);
                    prop_assert!((lhs - rhs).norm() <= 1e-8 * rhs.norm());
                }
            }

            #[test]
            fn eval_log_matches_plain_evaluation(z in point()) {
                for e in catalog_exprs() {
                    let plain = e.eval_complex(z);
                    if !plain.norm().is_finite() || plain.norm() > 1e300 { continue; }
                    let v = eval_log(&e, z).unwrap().to_complex();
                    prop_assert!((v - plain).norm() <= 1e-12 * plain.norm().max(1e-300) + 1e-300);
                }
            }
        }
    }
}
