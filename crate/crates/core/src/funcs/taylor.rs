use std::collections::HashMap;
use std::rc::Rc;

use super::{Expr, Node};
use crate::error::{Error, Result};
use crate::lognum::{convolution_term, LogComplex, Packed};
use crate::ode::LogSeries;

pub const MAX_TAYLOR_TERMS: usize = 1 << 16;

type Coeffs = Rc<Vec<LogComplex>>;

/// First `n` Taylor coefficients at 0 in log-space.
pub fn taylor(e: &Expr, n: usize) -> Result<LogSeries> {
    if n > MAX_TAYLOR_TERMS {
        return Err(Error::Size(format!(
            "{n} Taylor terms requested, limit {MAX_TAYLOR_TERMS}"
        )));
    }
    if e.exp_depth() >= 3 {
        return Err(Error::Precondition(format!(
            "Taylor extraction needs at most two nested exponentials: {}",
            e.short()
        )));
    }
    let mut memo = HashMap::new();
    let coeffs = coefficients(e, n, &mut memo)?;
    Ok(LogSeries::new(coeffs.as_ref().clone()))
}

fn product(a: &[LogComplex], b: &[LogComplex], n: usize) -> Vec<LogComplex> {
    let (pa, pb) = (Packed::new(a), Packed::new(b));
    (0..n).map(|m| convolution_term(&pa, &pb, m, 0)).collect()
}

fn coefficients(e: &Expr, n: usize, memo: &mut HashMap<*const Node, Coeffs>) -> Result<Coeffs> {
    if let Some(c) = memo.get(&e.key()) {
        return Ok(c.clone());
    }
    let mut out = vec![LogComplex::ZERO; n];
    match e.node() {
        Node::Z => {
            if n > 1 {
                out[1] = LogComplex::ONE;
            }
        }
        Node::Const(c) => {
            if n > 0 {
                out[0] = LogComplex::from_complex(*c);
            }
        }
        Node::Add(a, b) => {
            let (a, b) = (coefficients(a, n, memo)?, coefficients(b, n, memo)?);
            for i in 0..n {
                out[i] = a[i] + b[i];
            }
        }
        Node::Neg(a) => {
            let a = coefficients(a, n, memo)?;
            for i in 0..n {
                out[i] = -a[i];
            }
        }
        Node::Mul(a, b) => {
            let (a, b) = (coefficients(a, n, memo)?, coefficients(b, n, memo)?);
            out = product(&a, &b, n);
        }
        Node::PowOneMinusZ(mu) => {
            // a_m = a_{m-1} (mu + m - 1) / m
            let mut a = LogComplex::ONE;
            for (m, slot) in out.iter_mut().enumerate() {
                if m > 0 {
                    let f = (mu + m as f64 - 1.0) / m as f64;
                    a = a * LogComplex::from_real(f);
                }
                *slot = a;
            }
        }
        Node::Exp(g) => {
            // b = exp(a): m b_m = sum_{j=1}^{m} j a_j b_{m-j}
            let a = coefficients(g, n, memo)?;
            if n > 0 {
                let mut ka = Packed::default();
                for (j, v) in a.iter().enumerate() {
                    ka.push(v.scale(j as f64));
                }
                let mut b = Packed::default();
                out[0] = a[0].exp().map_err(|err| err.with_context(|| e.short()))?;
                b.push(out[0]);
                for m in 1..n {
                    let s = convolution_term(&ka, &b, m, 1).scale(1.0 / m as f64);
                    out[m] = s;
                    b.push(s);
                }
            }
        }
        Node::IntPow(a, k) => {
            let base = coefficients(a, n, memo)?;
            let mut acc: Vec<LogComplex> = (0..n)
                .map(|i| if i == 0 { LogComplex::ONE } else { LogComplex::ZERO })
                .collect();
            let mut sq = base.as_ref().clone();
            let mut k = *k;
            while k > 0 {
                if k & 1 == 1 {
                    acc = product(&acc, &sq, n);
                }
                k >>= 1;
                if k > 0 {
                    sq = product(&sq, &sq, n);
                }
            }
            out = acc;
        }
    }
    let out = Rc::new(out);
    memo.insert(e.key(), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{build_tower, catalog, eval_log, parse_expr, TowerSpec};
    use crate::ode::eval_series;
    use num_complex::Complex64;

    fn factorial(n: u64) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn exp_z_coefficients() {
        let s = taylor(&Expr::z().exp(), 20).unwrap();
        for (n, c) in s.coeffs.iter().enumerate() {
            assert!((c.logmag + factorial(n as u64).ln()).abs() < 1e-13);
            assert_eq!(c.phase, 0.0);
        }
    }

    #[test]
    fn geometric_series() {
        let s = taylor(&Expr::pow1mz(1.0), 50).unwrap();
        assert!(s.coeffs.iter().all(|c| c.logmag.abs() < 1e-13));
    }

    #[test]
    fn exp_of_pole_matches_composition_oracle() {
        // exp(1/(1-z)) = e * exp(z/(1-z)); z/(1-z) = sum_{k>=1} z^k, so the
        // coefficient of z^n in exp(z/(1-z)) is sum_k C(n-1, k-1) / k!.
        let s = taylor(&Expr::pow1mz(1.0).exp(), 30).unwrap();
        for n in 0..30u64 {
            let oracle = if n == 0 {
                1.0
            } else {
                (1..=n).map(|k| binomial(n - 1, k - 1) / factorial(k)).sum()
            };
            let got = s.coeffs[n as usize].to_complex().re / std::f64::consts::E;
            assert!((got - oracle).abs() <= 1e-12 * oracle, "n = {n}: {got} vs {oracle}");
        }
        let head = [1.0, 1.0, 1.5, 13.0 / 6.0];
        for (n, h) in head.iter().enumerate() {
            let got = s.coeffs[n].to_complex().re / std::f64::consts::E;
            assert!((got - h).abs() < 1e-14);
        }
    }

    #[test]
    fn integer_power_matches_repeated_product() {
        let e = parse_expr("(1 + 2*z)^3").unwrap();
        let s = taylor(&e, 6).unwrap();
        let expect = [1.0, 6.0, 12.0, 8.0, 0.0, 0.0];
        for (c, x) in s.coeffs.iter().zip(expect) {
            assert!((c.to_complex().re - x).abs() < 1e-12);
        }
    }

    #[test]
    fn size_and_depth_limits() {
        assert!(matches!(
            taylor(&Expr::z(), MAX_TAYLOR_TERMS + 1),
            Err(Error::Size(_))
        ));
        let t3 = build_tower(&TowerSpec::new(3, 1.0, 1.0).unwrap());
        assert!(matches!(taylor(&t3, 8), Err(Error::Precondition(_))));
    }

    #[test]
    fn partial_sums_match_closed_form() {
        let z = Complex64::from_polar(0.25, 0.7);
        for entry in catalog() {
            let e = parse_expr(entry.source).unwrap();
            if e.exp_depth() >= 3 {
                continue;
            }
            let s = taylor(&e, 512).unwrap();
            let series = eval_series(&s, z).unwrap();
            let closed = eval_log(&e, z).unwrap();
            let err = (series.to_complex() / closed.to_complex() - 1.0).norm();
            assert!(err <= 1e-10, "{}: {err}", entry.name);
        }
    }
}
