//! Complex numbers stored as `(ln|v|, arg v)`.
//!
//! The representation covers magnitudes up to `exp(f64::MAX)`, which is what
//! double-exponential growth needs: `ln M(r, f)` for a second-level tower is
//! itself `exp(c (1-r)^-mu)` and is never materialized. Zero is a distinct value
//! with `logmag == -inf`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Div, Mul, Neg};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest log-magnitude whose exponential is accepted by [`LogComplex::exp`].
pub const EXP_LIMIT: f64 = 700.0;

/// Relative size of a sum below which the result is flagged as cancelled.
pub const CANCELLATION_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub logmag: f64,
    pub phase: f64,
    /// Set when the value came out of a sum that lost more than
    /// [`CANCELLATION_THRESHOLD`] of its relative precision.
    pub cancelled: bool,
}

/// Canonical representative of `x` in `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    if !x.is_finite() {
        return 0.0;
    }
    let p = x.rem_euclid(TAU);
    if p > PI {
        p - TAU
    } else {
        p
    }
}

impl Default for LogComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        logmag: f64::NEG_INFINITY,
        phase: 0.0,
        cancelled: false,
    };
    pub const ONE: LogComplex = LogComplex {
        logmag: 0.0,
        phase: 0.0,
        cancelled: false,
    };

    pub fn new(logmag: f64, phase: f64) -> Self {
        debug_assert!(!logmag.is_nan(), "NaN log-magnitude");
        if logmag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex {
            logmag,
            phase: wrap_phase(phase),
            cancelled: false,
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::new(z.norm().ln(), z.arg())
    }

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else if x > 0.0 {
            Self::new(x.ln(), 0.0)
        } else {
            Self::new((-x).ln(), PI)
        }
    }

    /// Converts back to an ordinary complex number; overflows to infinity
    /// above `ln|v| ~ 709.78`.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.logmag.exp(), self.phase)
    }

    pub fn is_zero(&self) -> bool {
        self.logmag == f64::NEG_INFINITY
    }

    /// `e^{i phase}`.
    pub fn unit(&self) -> Complex64 {
        Complex64::new(self.phase.cos(), self.phase.sin())
    }

    /// Principal logarithm `ln|v| + i arg v`.
    pub fn ln(&self) -> Result<Complex64> {
        if self.is_zero() {
            return Err(Error::Domain("logarithm of zero".into()));
        }
        Ok(Complex64::new(self.logmag, self.phase))
    }

    pub fn mul(self, other: LogComplex) -> LogComplex {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.logmag + other.logmag, self.phase + other.phase)
    }

    pub fn div(self, other: LogComplex) -> Result<LogComplex> {
        if other.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        if self.is_zero() {
            return Ok(Self::ZERO);
        }
        Ok(Self::new(self.logmag - other.logmag, self.phase - other.phase))
    }

    pub fn neg(self) -> LogComplex {
        if self.is_zero() {
            return self;
        }
        LogComplex {
            phase: wrap_phase(self.phase + PI),
            ..self
        }
    }

    /// Multiplies by a positive real given through its logarithm.
    pub fn scale_log(self, ln_factor: f64) -> LogComplex {
        if self.is_zero() {
            return self;
        }
        LogComplex {
            logmag: self.logmag + ln_factor,
            ..self
        }
    }

    pub fn scale(self, factor: f64) -> LogComplex {
        self.mul(LogComplex::from_real(factor))
    }

    pub fn powi(self, n: i32) -> LogComplex {
        if n == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if n > 0 { Self::ZERO } else { Self::new(f64::INFINITY, 0.0) };
        }
        Self::new(self.logmag * n as f64, self.phase * n as f64)
    }

    /// Principal power `v^p = exp(p Log v)`.
    pub fn powf(self, p: f64) -> LogComplex {
        if p == 0.0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.logmag * p, self.phase * p)
    }

    pub fn add(self, other: LogComplex) -> LogComplex {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.logmag >= other.logmag {
            (self, other)
        } else {
            (other, self)
        };
        let e = (small.logmag - big.logmag).exp();
        let (s, c) = exact_sin_cos(wrap_phase(small.phase - big.phase));
        let re = 1.0 + e * c;
        let im = e * s;
        if re == 0.0 && im == 0.0 {
            return Self::ZERO;
        }
        let norm = re.hypot(im);
        let ln_norm = if norm < 0.5 {
            norm.ln()
        } else {
            0.5 * (2.0 * e * c + e * e).ln_1p()
        };
        let mut out = Self::new(big.logmag + ln_norm, big.phase + im.atan2(re));
        out.cancelled = norm < CANCELLATION_THRESHOLD;
        out
    }

    pub fn sub(self, other: LogComplex) -> LogComplex {
        self.add(other.neg())
    }

    /// `exp(v)`: the new log-magnitude is `Re v`, the new phase `Im v` wrapped.
    pub fn exp(self) -> Result<LogComplex> {
        if self.is_zero() {
            return Ok(Self::ONE);
        }
        if self.logmag > EXP_LIMIT {
            return Err(Error::TowerOverflow {
                logmag: self.logmag,
                limit: EXP_LIMIT,
                context: None,
            });
        }
        let m = self.logmag.exp();
        let (s, c) = self.phase.sin_cos();
        Ok(Self::new(m * c, m * s))
    }

    /// `ln(Re v)` computed as `ln|v| + ln cos(arg v)`.
    pub fn log_re(&self) -> Result<f64> {
        let c = self.phase.cos();
        if self.is_zero() || c <= 0.0 {
            return Err(Error::NonPositiveRealPart { phase: self.phase });
        }
        Ok(self.logmag + c.ln())
    }

    /// `Re v` as a real-valued `LogComplex` (phase 0 or pi).
    pub fn re_part(&self) -> LogComplex {
        if self.is_zero() {
            return Self::ZERO;
        }
        let c = self.phase.cos();
        if c == 0.0 {
            return Self::ZERO;
        }
        let phase = if c > 0.0 { 0.0 } else { PI };
        LogComplex {
            logmag: self.logmag + c.abs().ln(),
            phase,
            cancelled: self.cancelled,
        }
    }

    /// Sign of the real part: 1, 0 or -1.
    pub fn real_sign(&self) -> i8 {
        if self.is_zero() {
            return 0;
        }
        let c = self.phase.cos();
        if c > 0.0 {
            1
        } else if c < 0.0 {
            -1
        } else {
            0
        }
    }

    /// Materializes a real-valued number when it fits in an `f64`.
    pub fn to_real(&self) -> f64 {
        match self.real_sign() {
            0 => 0.0,
            1 => self.logmag.exp(),
            _ => -self.logmag.exp(),
        }
    }

    /// Positive part of a real-valued number.
    pub fn positive_part(&self) -> LogComplex {
        if self.real_sign() > 0 {
            LogComplex::new(self.logmag, 0.0)
        } else {
            Self::ZERO
        }
    }
}

/// Total order on real-valued `LogComplex` numbers (sign taken from `cos(phase)`).
pub fn cmp_real(a: &LogComplex, b: &LogComplex) -> Ordering {
    let (sa, sb) = (a.real_sign(), b.real_sign());
    if sa != sb {
        return sa.cmp(&sb);
    }
    match sa {
        0 => Ordering::Equal,
        1 => a.logmag.total_cmp(&b.logmag),
        _ => b.logmag.total_cmp(&a.logmag),
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: LogComplex) -> LogComplex {
        LogComplex::mul(self, rhs)
    }
}

impl Add for LogComplex {
    type Output = LogComplex;
    fn add(self, rhs: LogComplex) -> LogComplex {
        LogComplex::add(self, rhs)
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> LogComplex {
        LogComplex::neg(self)
    }
}

impl Div for LogComplex {
    type Output = Result<LogComplex>;
    fn div(self, rhs: LogComplex) -> Result<LogComplex> {
        LogComplex::div(self, rhs)
    }
}

fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 8 {
        return xs.iter().fold(Complex64::new(0.0, 0.0), |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum of scaled mantissas `exp(l_i - shift) e^{i phi_i}`, returned together with
/// the sum of their moduli. Used by [`lse_sum`] and by convolution kernels that
/// already hold the terms in split form.
/// `sin_cos` that is exact on the real and imaginary axes, so opposite
/// real values cancel to an exact zero.
fn exact_sin_cos(phi: f64) -> (f64, f64) {
    if phi == 0.0 {
        (0.0, 1.0)
    } else if phi == PI || phi == -PI {
        (0.0, -1.0)
    } else if phi == FRAC_PI_2 {
        (1.0, 0.0)
    } else if phi == -FRAC_PI_2 {
        (-1.0, 0.0)
    } else {
        phi.sin_cos()
    }
}

pub fn scaled_sum(terms: &[LogComplex], shift: f64) -> (Complex64, f64) {
    let scaled: Vec<Complex64> = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| {
            let (s, c) = exact_sin_cos(t.phase);
            Complex64::new(c, s) * (t.logmag - shift).exp()
        })
        .collect();
    let abs: Vec<f64> = scaled.iter().map(|c| c.norm()).collect();
    (pairwise_sum(&scaled), pairwise_f64(&abs))
}

fn pairwise_f64(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_f64(&xs[..mid]) + pairwise_f64(&xs[mid..])
}

/// Recombines a scaled sum into a `LogComplex`, flagging cancellation.
pub fn from_scaled(sum: Complex64, abs_sum: f64, shift: f64) -> LogComplex {
    if sum.re == 0.0 && sum.im == 0.0 {
        return LogComplex::ZERO;
    }
    let mut out = LogComplex::new(shift + sum.norm().ln(), sum.arg());
    out.cancelled = sum.norm() < CANCELLATION_THRESHOLD * abs_sum;
    out
}

/// Stable sum of log-space terms: every term is rescaled by the largest
/// magnitude and the mantissas are reduced pairwise in index order.
pub fn lse_sum(terms: &[LogComplex]) -> LogComplex {
    let shift = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| t.logmag)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return LogComplex::ZERO;
    }
    let (s, a) = scaled_sum(terms, shift);
    from_scaled(s, a, shift)
}

/// Log-magnitudes and unit phases of a coefficient sequence, laid out for
/// repeated products.
#[derive(Debug, Clone, Default)]
pub struct Packed {
    pub logmag: Vec<f64>,
    pub unit: Vec<Complex64>,
}

impl Packed {
    pub fn new(values: &[LogComplex]) -> Self {
        let mut p = Packed::default();
        for v in values {
            p.push(*v);
        }
        p
    }

    pub fn push(&mut self, v: LogComplex) {
        if v.is_zero() {
            self.logmag.push(f64::NEG_INFINITY);
            self.unit.push(Complex64::new(0.0, 0.0));
        } else {
            let (s, c) = exact_sin_cos(v.phase);
            self.logmag.push(v.logmag);
            self.unit.push(Complex64::new(c, s));
        }
    }

    pub fn len(&self) -> usize {
        self.logmag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logmag.is_empty()
    }
}

/// `sum_{k=lo}^{n} a_k b_{n-k}` without leaving log-space.
pub fn convolution_term(a: &Packed, b: &Packed, n: usize, lo: usize) -> LogComplex {
    let hi = n.min(a.len().saturating_sub(1));
    let lo = lo.max(n.saturating_sub(b.len().saturating_sub(1)));
    if lo > hi {
        return LogComplex::ZERO;
    }
    let mut shift = f64::NEG_INFINITY;
    for k in lo..=hi {
        shift = shift.max(a.logmag[k] + b.logmag[n - k]);
    }
    if shift == f64::NEG_INFINITY {
        return LogComplex::ZERO;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for k in lo..=hi {
        let w = (a.logmag[k] + b.logmag[n - k] - shift).exp();
        sum += a.unit[k] * b.unit[n - k] * w;
        abs += w;
    }
    from_scaled(sum, abs, shift)
}
