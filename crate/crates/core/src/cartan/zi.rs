//! Gaussian integers stored inline while they fit in `i64`, promoted to
//! big integers on overflow.

use std::fmt;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Zi {
    Small(i64, i64),
    Big(Box<Complex<BigInt>>),
}

impl Zi {
    pub const ZERO: Zi = Zi::Small(0, 0);

    pub fn new(re: i64, im: i64) -> Self {
        Zi::Small(re, im)
    }

    pub fn from_big(z: Complex<BigInt>) -> Self {
        match (z.re.to_i64(), z.im.to_i64()) {
            (Some(a), Some(b)) => Zi::Small(a, b),
            _ => Zi::Big(Box::new(z)),
        }
    }

    pub fn to_big(&self) -> Complex<BigInt> {
        match self {
            Zi::Small(a, b) => Complex::new(BigInt::from(*a), BigInt::from(*b)),
            Zi::Big(z) => (**z).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Zi::Small(0, 0))
    }

    pub fn is_real(&self) -> bool {
        match self {
            Zi::Small(_, b) => *b == 0,
            Zi::Big(z) => z.im.is_zero(),
        }
    }

    pub fn add(&self, o: &Zi) -> Zi {
        if let (Zi::Small(a, b), Zi::Small(c, d)) = (self, o) {
            if let (Some(x), Some(y)) = (a.checked_add(*c), b.checked_add(*d)) {
                return Zi::Small(x, y);
            }
        }
        Zi::from_big(self.to_big() + o.to_big())
    }

    pub fn sub(&self, o: &Zi) -> Zi {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Zi {
        match self {
            Zi::Small(a, b) if *a != i64::MIN && *b != i64::MIN => Zi::Small(-a, -b),
            _ => Zi::from_big(-self.to_big()),
        }
    }

    pub fn conj(&self) -> Zi {
        match self {
            Zi::Small(a, b) if *b != i64::MIN => Zi::Small(*a, -b),
            _ => Zi::from_big(self.to_big().conj()),
        }
    }

    pub fn mul(&self, o: &Zi) -> Zi {
        if let (Zi::Small(a, b), Zi::Small(c, d)) = (self, o) {
            let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
            let re = a * c - b * d;
            let im = a * d + b * c;
            if let (Ok(x), Ok(y)) = (i64::try_from(re), i64::try_from(im)) {
                return Zi::Small(x, y);
            }
            return Zi::from_big(Complex::new(BigInt::from(re), BigInt::from(im)));
        }
        Zi::from_big(self.to_big() * o.to_big())
    }

    pub fn mul_int(&self, n: i64) -> Zi {
        self.mul(&Zi::Small(n, 0))
    }

    pub fn mul_bigint(&self, n: &BigInt) -> Zi {
        match n.to_i64() {
            Some(k) => self.mul_int(k),
            None => {
                let z = self.to_big();
                Zi::from_big(Complex::new(z.re * n, z.im * n))
            }
        }
    }

    /// `re² + im²`.
    pub fn norm_sqr(&self) -> BigInt {
        let z = self.to_big();
        &z.re * &z.re + &z.im * &z.im
    }

    /// Gcd of `g` with both parts.
    pub fn gcd_with(&self, g: &BigInt) -> BigInt {
        match self {
            Zi::Small(a, b) => {
                if let Some(gs) = g.to_i64() {
                    let r = (gs as i128).gcd(&(*a as i128)).gcd(&(*b as i128));
                    return BigInt::from(r);
                }
                g.gcd(&BigInt::from(*a)).gcd(&BigInt::from(*b))
            }
            Zi::Big(z) => g.gcd(&z.re).gcd(&z.im),
        }
    }

    /// Exact division of both parts by an integer.
    pub fn div_int(&self, n: &BigInt) -> Zi {
        if let (Zi::Small(a, b), Some(k)) = (self, n.to_i64()) {
            if k != 0 && k != -1 {
                return Zi::Small(a / k, b / k);
            }
        }
        let z = self.to_big();
        Zi::from_big(Complex::new(&z.re / n, &z.im / n))
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Zi::Small(a, b) => Complex64::new(*a as f64, *b as f64),
            Zi::Big(z) => Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

impl fmt::Display for Zi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = self.to_big();
        if z.im.is_zero() {
            write!(f, "{}", z.re)
        } else {
            write!(f, "({}+{}i)", z.re, z.im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Zi::new(i64::MAX, 1);
        let s = big.add(&Zi::new(1, 0));
        assert!(matches!(s, Zi::Big(_)));
        assert_eq!(s.sub(&Zi::new(1, 0)), big);
        let p = Zi::new(1 << 40, 3).mul(&Zi::new(1 << 40, -3));
        assert_eq!(p.to_big().re, BigInt::from(1i128 << 80) + 9);
        assert_eq!(Zi::new(6, -4).gcd_with(&BigInt::from(0)), BigInt::from(2));
        assert_eq!(Zi::new(6, -4).div_int(&BigInt::from(2)), Zi::new(3, -2));
    }
}
