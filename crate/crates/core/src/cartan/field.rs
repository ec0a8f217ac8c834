//! The scalar interface shared by the exact and numeric backends.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::exact::QExact;

/// A field with complex conjugation, as needed for the algebra code.
///
/// `try_inv` may fail in the exact backend for elements outside the
/// cyclotomic-denominator ring; callers choose pivots with `pivot_weight`.
pub trait Field: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_ratio(n: i64, d: i64) -> Self;
    fn imag_unit() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn conj(&self) -> Self;
    fn try_inv(&self) -> Option<Self>;
    /// Quality of `self` as an elimination pivot; `None` if unusable.
    fn pivot_weight(&self) -> Option<f64>;
    /// Principal square root where the backend can represent it.
    fn sqrt(&self) -> Option<Self>;
    /// Numerical value at the given `q`.
    fn eval(&self, q: f64) -> Complex64;

    fn div_ref(&self, o: &Self) -> Self {
        self.mul_ref(&o.try_inv().expect("division by a non-invertible scalar"))
    }

    fn add_assign_ref(&mut self, o: &Self) {
        *self = self.add_ref(o);
    }
}

/// Complex double at a fixed `q`; the value of `q` lives in the backend.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct QNum(pub Complex64);

impl fmt::Debug for QNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Field for QNum {
    fn zero() -> Self {
        QNum(Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        QNum(Complex64::new(1.0, 0.0))
    }
    fn from_i64(n: i64) -> Self {
        QNum(Complex64::new(n as f64, 0.0))
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        QNum(Complex64::new(n as f64 / d as f64, 0.0))
    }
    fn imag_unit() -> Self {
        QNum(Complex64::new(0.0, 1.0))
    }
    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }
    fn add_ref(&self, o: &Self) -> Self {
        QNum(self.0 + o.0)
    }
    fn sub_ref(&self, o: &Self) -> Self {
        QNum(self.0 - o.0)
    }
    fn mul_ref(&self, o: &Self) -> Self {
        QNum(self.0 * o.0)
    }
    fn neg_ref(&self) -> Self {
        QNum(-self.0)
    }
    fn conj(&self) -> Self {
        QNum(self.0.conj())
    }
    fn try_inv(&self) -> Option<Self> {
        (self.0.norm() > 0.0).then(|| QNum(self.0.inv()))
    }
    fn pivot_weight(&self) -> Option<f64> {
        let n = self.0.norm();
        (n > 0.0).then_some(n)
    }
    fn sqrt(&self) -> Option<Self> {
        Some(QNum(self.0.sqrt()))
    }
    fn eval(&self, _q: f64) -> Complex64 {
        self.0
    }
}

impl Field for QExact {
    fn zero() -> Self {
        QExact::zero()
    }
    fn one() -> Self {
        QExact::from_i64(1)
    }
    fn from_i64(n: i64) -> Self {
        QExact::from_i64(n)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        QExact::from_ratio(n, d)
    }
    fn imag_unit() -> Self {
        QExact::gaussian(0, 1)
    }
    fn is_zero(&self) -> bool {
        QExact::is_zero(self)
    }
    fn add_ref(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn neg_ref(&self) -> Self {
        self.neg()
    }
    fn conj(&self) -> Self {
        QExact::conj(self)
    }
    fn try_inv(&self) -> Option<Self> {
        QExact::try_inv(self)
    }
    fn pivot_weight(&self) -> Option<f64> {
        self.try_inv().map(|_| 1.0)
    }
    fn sqrt(&self) -> Option<Self> {
        None
    }
    fn eval(&self, q: f64) -> Complex64 {
        QExact::eval(self, q)
    }
}

/// Which scalar backend a computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BackendKind {
    /// Symbolic in `s = q^{1/2}`.
    Exact,
    /// Complex doubles at the given `q ∈ (0, 1]`.
    Numeric(f64),
}

/// A scalar backend: a field together with the value of `s = q^{1/2}`.
pub trait Backend: Clone + fmt::Debug + Send + Sync + 'static {
    type F: Field;

    fn s_pow(&self, k: i32) -> Self::F;
    fn kind(&self) -> BackendKind;

    /// Whether representation matrices are unitarized (orthonormal weight
    /// bases). Backends without square roots keep divided-power bases and
    /// carry the Gram data instead.
    fn unitarized(&self) -> bool;

    /// The unit-modulus factor `e^{iθw}`, if representable in this backend.
    fn phase(&self, theta: f64, w: i64) -> Option<Self::F>;

    /// `q^k`.
    fn q_pow(&self, k: i32) -> Self::F {
        self.s_pow(2 * k)
    }

    /// The q-integer `[n]_q = Σ_{k<n} q^{n-1-2k}`, with `[-n] = -[n]`.
    fn q_int(&self, n: i64) -> Self::F {
        if n < 0 {
            return self.q_int(-n).neg_ref();
        }
        let mut acc = Self::F::zero();
        for k in 0..n {
            acc = acc.add_ref(&self.q_pow((n - 1 - 2 * k) as i32));
        }
        acc
    }

    /// `[n]_q!`.
    fn q_factorial(&self, n: i64) -> Self::F {
        (1..=n).fold(Self::F::one(), |acc, k| acc.mul_ref(&self.q_int(k)))
    }

    /// Gaussian binomial `[n choose k]_q` in the symmetric normalization.
    fn q_binomial(&self, n: i64, k: i64) -> Self::F {
        if k < 0 || k > n {
            return Self::F::zero();
        }
        // Pascal recursion keeps the exact backend free of divisions.
        let mut row = vec![Self::F::one()];
        for m in 1..=n {
            let mut next = vec![Self::F::one(); (m + 1) as usize];
            for j in 1..m {
                // [m, j] = q^{j-m}[m-1, j-1] + q^j [m-1, j]
                let a = self.q_pow((j - m) as i32).mul_ref(&row[(j - 1) as usize]);
                let b = self.q_pow(j as i32).mul_ref(&row[j as usize]);
                next[j as usize] = a.add_ref(&b);
            }
            row = next;
        }
        row[k as usize].clone()
    }
}

/// Symbolic backend.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Exact;

impl Backend for Exact {
    type F = QExact;
    fn s_pow(&self, k: i32) -> QExact {
        QExact::s_pow(k)
    }
    fn kind(&self) -> BackendKind {
        BackendKind::Exact
    }
    fn unitarized(&self) -> bool {
        false
    }
    /// Only quarter turns are representable (as Gaussian units).
    fn phase(&self, theta: f64, w: i64) -> Option<QExact> {
        let t = theta * w as f64 / std::f64::consts::FRAC_PI_2;
        let k = t.round();
        if (t - k).abs() > 1e-9 {
            return None;
        }
        Some(match (k as i64).rem_euclid(4) {
            0 => QExact::gaussian(1, 0),
            1 => QExact::gaussian(0, 1),
            2 => QExact::gaussian(-1, 0),
            _ => QExact::gaussian(0, -1),
        })
    }
}

/// Floating-point backend at a fixed `q ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numeric {
    pub q: f64,
}

impl Numeric {
    pub fn new(q: f64) -> Self {
        assert!(q > 0.0 && q <= 1.0, "q must lie in (0, 1], got {q}");
        Numeric { q }
    }
}

impl Backend for Numeric {
    type F = QNum;
    fn s_pow(&self, k: i32) -> QNum {
        QNum(Complex64::new(self.q.sqrt().powi(k), 0.0))
    }
    fn kind(&self) -> BackendKind {
        BackendKind::Numeric(self.q)
    }
    fn unitarized(&self) -> bool {
        true
    }
    fn phase(&self, theta: f64, w: i64) -> Option<QNum> {
        Some(QNum(Complex64::from_polar(1.0, theta * w as f64)))
    }
}

/// A scalar from either backend.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(QExact),
    Numeric { value: Complex64, q: f64 },
}

impl Scalar {
    /// Numerical value at `q`. For numeric scalars `q` must match the stored one.
    pub fn evaluate(&self, q: f64) -> Complex64 {
        match self {
            Scalar::Exact(x) => x.eval(q),
            Scalar::Numeric { value, q: q0 } => {
                assert!((q - q0).abs() < 1e-15, "scalar was computed at q = {q0}");
                *value
            }
        }
    }

    /// Image under the evaluation homomorphism to the numeric backend.
    pub fn to_numeric(&self, q: f64) -> Scalar {
        Scalar::Numeric { value: self.evaluate(q), q }
    }

    pub fn conj(&self) -> Scalar {
        match self {
            Scalar::Exact(x) => Scalar::Exact(x.conj()),
            Scalar::Numeric { value, q } => Scalar::Numeric { value: value.conj(), q: *q },
        }
    }

    fn combine(
        &self,
        o: &Scalar,
        fe: impl Fn(&QExact, &QExact) -> QExact,
        fn_: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(fe(a, b)),
            (Scalar::Numeric { value: a, q }, Scalar::Numeric { value: b, q: q2 }) => {
                assert_eq!(q, q2, "numeric scalars at different q");
                Scalar::Numeric { value: fn_(*a, *b), q: *q }
            }
            (Scalar::Exact(a), Scalar::Numeric { value, q })
            | (Scalar::Numeric { value, q }, Scalar::Exact(a)) => {
                let _ = (a, value, q);
                panic!("cannot mix exact and numeric scalars; evaluate first")
            }
        }
    }
}

impl std::ops::Add for &Scalar {
    type Output = Scalar;
    fn add(self, o: &Scalar) -> Scalar {
        self.combine(o, |a, b| a.add(b), |a, b| a + b)
    }
}

impl std::ops::Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, o: &Scalar) -> Scalar {
        self.combine(o, |a, b| a.sub(b), |a, b| a - b)
    }
}

impl std::ops::Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, o: &Scalar) -> Scalar {
        self.combine(o, |a, b| a.mul(b), |a, b| a * b)
    }
}

/// Wrap a backend value as a [`Scalar`].
pub trait IntoScalar {
    fn into_scalar(self, kind: BackendKind) -> Scalar;
}

impl IntoScalar for QExact {
    fn into_scalar(self, _kind: BackendKind) -> Scalar {
        Scalar::Exact(self)
    }
}

impl IntoScalar for QNum {
    fn into_scalar(self, kind: BackendKind) -> Scalar {
        match kind {
            BackendKind::Numeric(q) => Scalar::Numeric { value: self.0, q },
            BackendKind::Exact => panic!("numeric value under the exact backend"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_matches_factorial_form() {
        let b = Numeric::new(0.37);
        for n in 0..7 {
            for k in 0..=n {
                let lhs = b.q_binomial(n, k).0;
                let rhs = b.q_factorial(n).0 / (b.q_factorial(k).0 * b.q_factorial(n - k).0);
                assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
            }
        }
    }

    #[test]
    fn exact_binomial_is_symmetric_polynomial() {
        let e = Exact;
        let x = e.q_binomial(4, 2);
        let y = e.q_factorial(4).div_ref(&e.q_factorial(2).mul_ref(&e.q_factorial(2)));
        assert_eq!(x, y);
    }

    #[test]
    fn q_one_limit() {
        let b = Numeric::new(1.0);
        assert_eq!(b.q_int(5).0.re, 5.0);
        assert_eq!(b.q_binomial(5, 2).0.re, 10.0);
    }
}
