//! Exact scalars: quotients of Laurent polynomials in `s = q^{1/2}` with
//! Gaussian-integer coefficients by an integer times a product of cyclotomic
//! polynomials `Φ_d(s)`.
//!
//! Every q-integer `[n]_q` is a monomial times a product of cyclotomic
//! factors, so this ring is closed under the divisions performed by
//! Clebsch–Gordan projections while keeping equality testing exact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::zi::Zi;

fn gint(re: i64, im: i64) -> Zi {
    Zi::new(re, im)
}

/// Laurent polynomial `Σ c_k s^{lo+k}` over the Gaussian integers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Laurent {
    lo: i32,
    c: Vec<Zi>,
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent { lo: 0, c: Vec::new() }
    }

    pub fn monomial(coeff: Zi, exp: i32) -> Self {
        Laurent { lo: exp, c: vec![coeff] }.trimmed()
    }

    pub fn constant(n: i64) -> Self {
        Self::monomial(gint(n, 0), 0)
    }

    /// From integer coefficients of `s^0, s^1, ...`.
    pub fn from_ints(c: &[i64]) -> Self {
        Laurent { lo: 0, c: c.iter().map(|&x| gint(x, 0)).collect() }.trimmed()
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn low(&self) -> i32 {
        self.lo
    }

    pub fn high(&self) -> i32 {
        self.lo + self.c.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[Zi] {
        &self.c
    }

    fn trimmed(mut self) -> Self {
        while self.c.last().is_some_and(Zi::is_zero) {
            self.c.pop();
        }
        let lead = self.c.iter().take_while(|z| z.is_zero()).count();
        if lead == self.c.len() {
            return Laurent::zero();
        }
        if lead > 0 {
            self.c.drain(..lead);
            self.lo += lead as i32;
        }
        self
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let lo = self.lo.min(o.lo);
        let hi = self.high().max(o.high());
        let mut c = vec![Zi::ZERO; (hi - lo + 1) as usize];
        for (k, z) in self.c.iter().enumerate() {
            c[(self.lo - lo) as usize + k] = z.clone();
        }
        for (k, z) in o.c.iter().enumerate() {
            let slot = &mut c[(o.lo - lo) as usize + k];
            *slot = slot.add(z);
        }
        Laurent { lo, c }.trimmed()
    }

    pub fn neg(&self) -> Self {
        Laurent { lo: self.lo, c: self.c.iter().map(Zi::neg).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Laurent::zero();
        }
        let mut c = vec![Zi::ZERO; self.c.len() + o.c.len() - 1];
        for (a, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (b, y) in o.c.iter().enumerate() {
                if !y.is_zero() {
                    c[a + b] = c[a + b].add(&x.mul(y));
                }
            }
        }
        Laurent { lo: self.lo + o.lo, c }.trimmed()
    }

    pub fn scale(&self, z: &Zi) -> Self {
        Laurent { lo: self.lo, c: self.c.iter().map(|x| x.mul(z)).collect() }.trimmed()
    }

    fn scale_int(&self, n: &BigInt) -> Self {
        if n.is_one() {
            return self.clone();
        }
        Laurent { lo: self.lo, c: self.c.iter().map(|x| x.mul_bigint(n)).collect() }.trimmed()
    }

    pub fn shift(&self, k: i32) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Laurent { lo: self.lo + k, c: self.c.clone() }
    }

    pub fn conj(&self) -> Self {
        Laurent { lo: self.lo, c: self.c.iter().map(Zi::conj).collect() }
    }

    /// Exact quotient by a monic integer polynomial in `s` (coefficients
    /// low to high), or `None` if the division leaves a remainder.
    pub fn div_monic(&self, d: &[i64]) -> Option<Self> {
        let m = d.len() - 1;
        if self.is_zero() {
            return Some(Laurent::zero());
        }
        if self.c.len() <= m {
            return None;
        }
        let mut r = self.c.clone();
        let mut quo = vec![Zi::ZERO; r.len() - m];
        for k in (0..quo.len()).rev() {
            let lead = std::mem::replace(&mut r[k + m], Zi::ZERO);
            if lead.is_zero() {
                continue;
            }
            for (j, &dj) in d[..m].iter().enumerate() {
                if dj != 0 {
                    r[k + j] = r[k + j].sub(&lead.mul_int(dj));
                }
            }
            quo[k] = lead;
        }
        if r.iter().any(|z| !z.is_zero()) {
            return None;
        }
        Some(Laurent { lo: self.lo, c: quo }.trimmed())
    }

    /// Cheap test whether `Φ_d(s)` can divide this polynomial: a floating
    /// evaluation at a primitive `d`-th root of unity that is clearly
    /// non-zero rules it out.
    fn may_vanish_at_root(&self, d: u32) -> bool {
        let zeta = Complex64::from_polar(1.0, std::f64::consts::TAU / d as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for z in self.c.iter().rev() {
            let v = z.to_c64();
            scale += v.re.abs() + v.im.abs();
            acc = acc * zeta + v;
        }
        !(acc.norm_sqr() > 1e-18 * scale * scale) || !scale.is_finite()
    }

    /// Gcd of the real and imaginary parts of all coefficients.
    fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for z in &self.c {
            g = z.gcd_with(&g);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn div_int(&self, n: &BigInt) -> Self {
        Laurent { lo: self.lo, c: self.c.iter().map(|z| z.div_int(n)).collect() }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for z in self.c.iter().rev() {
            acc = acc * s + z.to_c64();
        }
        acc * s.powi(self.lo)
    }
}

impl fmt::Debug for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, z) in self.c.iter().enumerate() {
            if z.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{z}")?;
            let e = self.lo + k as i32;
            if e != 0 {
                write!(f, "*s^{e}")?;
            }
        }
        Ok(())
    }
}

/// Integer coefficients of the cyclotomic polynomial `Φ_d(x)`, low to high.
pub fn cyclotomic(d: u32) -> &'static [i64] {
    static CACHE: OnceLock<Mutex<BTreeMap<u32, &'static [i64]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&d) {
        return p;
    }
    // x^d - 1 divided by Φ_e for every proper divisor e of d.
    let mut p = vec![0i64; d as usize + 1];
    p[0] = -1;
    p[d as usize] = 1;
    for e in 1..d {
        if d % e == 0 {
            p = poly_div_exact_i64(&p, cyclotomic(e));
        }
    }
    let p: &'static [i64] = Box::leak(p.into_boxed_slice());
    *cache.lock().unwrap().entry(d).or_insert(p)
}

fn poly_div_exact_i64(p: &[i64], d: &[i64]) -> Vec<i64> {
    let m = d.len() - 1;
    let mut r = p.to_vec();
    let mut q = vec![0i64; p.len() - m];
    for k in (0..q.len()).rev() {
        let lead = r[k + m];
        q[k] = lead;
        for j in 0..=m {
            r[k + j] -= lead * d[j];
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0));
    q
}

fn euler_phi(mut n: u32) -> u32 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Element `num / (den · Π_d Φ_d(s)^{e_d})` of the field of fractions.
#[derive(Clone)]
pub struct QExact {
    num: Laurent,
    den: BigInt,
    cyc: BTreeMap<u32, u32>,
}

impl QExact {
    pub fn zero() -> Self {
        QExact { num: Laurent::zero(), den: BigInt::one(), cyc: BTreeMap::new() }
    }

    pub fn from_laurent(num: Laurent) -> Self {
        QExact { num, den: BigInt::one(), cyc: BTreeMap::new() }
    }

    pub fn from_i64(n: i64) -> Self {
        Self::from_laurent(Laurent::constant(n))
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        let sign = if d < 0 { -1 } else { 1 };
        QExact {
            num: Laurent::constant(sign * n),
            den: BigInt::from(d.abs()),
            cyc: BTreeMap::new(),
        }
        .normalized()
    }

    pub fn gaussian(re: i64, im: i64) -> Self {
        Self::from_laurent(Laurent::monomial(gint(re, im), 0))
    }

    /// The monomial `s^k`.
    pub fn s_pow(k: i32) -> Self {
        Self::from_laurent(Laurent::monomial(gint(1, 0), k))
    }

    pub fn numerator(&self) -> &Laurent {
        &self.num
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn normalized(mut self) -> Self {
        if self.num.is_zero() {
            return QExact::zero();
        }
        let mut cyc = BTreeMap::new();
        for (&d, &e) in &self.cyc {
            let phi = cyclotomic(d);
            let mut left = e;
            while left > 0 && self.num.may_vanish_at_root(d) {
                match self.num.div_monic(phi) {
                    Some(q) => {
                        self.num = q;
                        left -= 1;
                    }
                    None => break,
                }
            }
            if left > 0 {
                cyc.insert(d, left);
            }
        }
        self.cyc = cyc;
        let g = self.num.content().gcd(&self.den);
        if !g.is_one() {
            self.num = self.num.div_int(&g);
            self.den /= &g;
        }
        if self.den.is_negative() {
            self.den = -self.den;
            self.num = self.num.neg();
        }
        self
    }

    fn cyc_product(factors: &BTreeMap<u32, u32>) -> Laurent {
        let mut p = Laurent::constant(1);
        for (&d, &e) in factors {
            let phi = Laurent::from_ints(cyclotomic(d));
            for _ in 0..e {
                p = p.mul(&phi);
            }
        }
        p
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let mut cyc = self.cyc.clone();
        for (&d, &e) in &o.cyc {
            let x = cyc.entry(d).or_insert(0);
            *x = (*x).max(e);
        }
        let missing = |have: &BTreeMap<u32, u32>| -> BTreeMap<u32, u32> {
            cyc.iter()
                .filter_map(|(&d, &e)| {
                    let h = have.get(&d).copied().unwrap_or(0);
                    (e > h).then_some((d, e - h))
                })
                .collect()
        };
        let l = self.den.lcm(&o.den);
        let a = self
            .num
            .mul(&Self::cyc_product(&missing(&self.cyc)))
            .scale_int(&(&l / &self.den));
        let b = o
            .num
            .mul(&Self::cyc_product(&missing(&o.cyc)))
            .scale_int(&(&l / &o.den));
        QExact { num: a.add(&b), den: l, cyc }.normalized()
    }

    pub fn neg(&self) -> Self {
        QExact { num: self.num.neg(), den: self.den.clone(), cyc: self.cyc.clone() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return QExact::zero();
        }
        let mut cyc = self.cyc.clone();
        for (&d, &e) in &o.cyc {
            *cyc.entry(d).or_insert(0) += e;
        }
        QExact { num: self.num.mul(&o.num), den: &self.den * &o.den, cyc }.normalized()
    }

    pub fn conj(&self) -> Self {
        QExact { num: self.num.conj(), den: self.den.clone(), cyc: self.cyc.clone() }
    }

    /// Inverse, provided the numerator is a unit times a product of
    /// cyclotomic polynomials in `s`.
    pub fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let mut rest = self.num.shift(-self.num.low());
        let mut factors: BTreeMap<u32, u32> = BTreeMap::new();
        let mut d = 1u32;
        while rest.high() > 0 {
            let span = rest.high() as u32;
            if d > 4 * span * span + 8 {
                return None;
            }
            let phi_deg = euler_phi(d);
            if phi_deg <= span {
                let phi = cyclotomic(d);
                while let Some(q) = rest.div_monic(phi) {
                    rest = q;
                    *factors.entry(d).or_insert(0) += 1;
                }
            }
            d += 1;
        }
        let c = rest.coeffs()[0].clone();
        let norm = c.norm_sqr();
        let num = Self::cyc_product(&self.cyc)
            .scale(&c.conj().mul_bigint(&self.den))
            .shift(-self.num.low());
        Some(QExact { num, den: norm, cyc: factors }.normalized())
    }

    /// Evaluate at `s = q^{1/2}`.
    pub fn eval(&self, q: f64) -> Complex64 {
        let s = Complex64::new(q.sqrt(), 0.0);
        let mut den = Complex64::new(self.den.to_f64().unwrap_or(f64::NAN), 0.0);
        for (&d, &e) in &self.cyc {
            let phi = Laurent::from_ints(cyclotomic(d)).eval(s);
            den *= phi.powi(e as i32);
        }
        self.num.eval(s) / den
    }
}

impl PartialEq for QExact {
    fn eq(&self, o: &Self) -> bool {
        self.sub(o).is_zero()
    }
}

impl fmt::Debug for QExact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})", self.num)?;
        if !self.den.is_one() || !self.cyc.is_empty() {
            write!(f, " / ({}", self.den)?;
            for (d, e) in &self.cyc {
                write!(f, "·Φ{d}^{e}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_small() {
        assert_eq!(cyclotomic(1), [-1, 1]);
        assert_eq!(cyclotomic(2), [1, 1]);
        assert_eq!(cyclotomic(4), [1, 0, 1]);
        assert_eq!(cyclotomic(6), [1, -1, 1]);
        assert_eq!(cyclotomic(12), [1, 0, -1, 0, 1]);
    }

    #[test]
    fn inverse_of_q_integer() {
        // [3]_q = s^-4 + 1 + s^4
        let three = QExact::from_laurent(
            Laurent::monomial(gint(1, 0), -4)
                .add(&Laurent::constant(1))
                .add(&Laurent::monomial(gint(1, 0), 4)),
        );
        let inv = three.try_inv().expect("cyclotomic");
        assert_eq!(three.mul(&inv), QExact::from_i64(1));
        let q = 0.3f64;
        let v = q.powi(-2) + 1.0 + q.powi(2);
        assert!((inv.eval(q).re - 1.0 / v).abs() < 1e-14);
    }

    #[test]
    fn non_cyclotomic_is_not_inverted() {
        // 2 + s has no cyclotomic factorisation
        let x = QExact::from_laurent(Laurent::from_ints(&[2, 1]));
        assert!(x.try_inv().is_none());
    }

    #[test]
    fn fractions_cancel() {
        let a = QExact::from_laurent(Laurent::from_ints(&[1, 1]));
        let inv = a.try_inv().unwrap();
        let two = QExact::from_i64(2);
        let x = inv.mul(&two).add(&inv);
        assert_eq!(x.mul(&a), QExact::from_i64(3));
        assert_eq!(QExact::from_ratio(2, 4), QExact::from_ratio(-3, -6));
    }

    #[test]
    fn gaussian_inverse() {
        let z = QExact::gaussian(1, 2).mul(&QExact::s_pow(3));
        let w = z.try_inv().unwrap();
        assert_eq!(z.mul(&w), QExact::from_i64(1));
        assert_eq!(z.conj().eval(0.5), z.eval(0.5).conj());
    }
}
