//! Dense univariate polynomials over the integers with arbitrary-precision
//! coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// `coeffs[k]` is the coefficient of `x^k`; trailing zeros are trimmed, so
/// the zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        Self::new(vec![c])
    }

    /// `x - root`.
    pub fn linear(root: i64) -> Self {
        Self::from_i64(&[-root, 1])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Coefficient of `x^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> BigInt {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    pub fn is_monic(&self) -> bool {
        self.leading().is_some_and(One::is_one)
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * BigInt::from(k)).collect())
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Gcd of the coefficients (non-negative); zero for the zero polynomial.
    pub fn content(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// `self / content`, normalized to a positive leading coefficient.
    pub fn primitive_part(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = self.content();
        if self.leading().is_some_and(Signed::is_negative) {
            c = -c;
        }
        Self::new(self.coeffs.iter().map(|a| a / &c).collect())
    }

    /// Pseudo-remainder `prem(self, d)`: the remainder of
    /// `lc(d)^(deg self − deg d + 1) · self` divided by `d`.
    pub fn pseudo_rem(&self, d: &Self) -> Self {
        let dd = d.degree().expect("pseudo-remainder by the zero polynomial");
        let lc = d.leading().expect("nonzero divisor").clone();
        let mut r = self.coeffs.clone();
        let Some(mut deg_r) = self.degree() else {
            return Self::zero();
        };
        if deg_r < dd {
            return self.clone();
        }
        let steps = deg_r - dd + 1;
        for _ in 0..steps {
            let top = r[deg_r].clone();
            for c in r.iter_mut().take(deg_r + 1) {
                *c = &*c * &lc;
            }
            let shift = deg_r - dd;
            for (k, dk) in d.coeffs.iter().enumerate() {
                r[shift + k] -= &top * dk;
            }
            r.truncate(deg_r);
            if deg_r == 0 {
                break;
            }
            deg_r -= 1;
            if deg_r < dd {
                break;
            }
        }
        Self::new(r)
    }

    /// Exact quotient by `d`; panics if `d` does not divide `self` in `Z[x]`.
    pub fn div_exact(&self, d: &Self) -> Self {
        let dd = d.degree().expect("division by the zero polynomial");
        let Some(deg) = self.degree() else {
            return Self::zero();
        };
        assert!(deg >= dd, "inexact polynomial division");
        let lc = d.leading().expect("nonzero divisor");
        let mut r = self.coeffs.clone();
        let mut q = vec![BigInt::zero(); deg - dd + 1];
        for shift in (0..=deg - dd).rev() {
            let top = &r[shift + dd];
            let (qc, rem) = top.div_rem(lc);
            assert!(rem.is_zero(), "inexact polynomial division");
            for (k, dk) in d.coeffs.iter().enumerate() {
                r[shift + k] -= &qc * dk;
            }
            q[shift] = qc;
        }
        assert!(r.iter().all(Zero::is_zero), "inexact polynomial division");
        Self::new(q)
    }

    /// Primitive gcd (positive leading coefficient) via the primitive
    /// pseudo-remainder sequence. `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.primitive_part(), other.primitive_part());
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = r.primitive_part();
        }
        a.primitive_part()
    }
}

impl Add for &IntPolynomial {
    type Output = IntPolynomial;
    fn add(self, rhs: &IntPolynomial) -> IntPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &IntPolynomial {
    type Output = IntPolynomial;
    fn sub(self, rhs: &IntPolynomial) -> IntPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &IntPolynomial {
    type Output = IntPolynomial;
    fn mul(self, rhs: &IntPolynomial) -> IntPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return IntPolynomial::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPolynomial::new(out)
    }
}

impl Neg for &IntPolynomial {
    type Output = IntPolynomial;
    fn neg(self) -> IntPolynomial {
        IntPolynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            }
            first = false;
            let show_mag = k == 0 || !mag.is_one();
            if show_mag {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => f.write_str("x")?,
                _ => write!(f, "x^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> IntPolynomial {
        IntPolynomial::from_i64(c)
    }

    #[test]
    fn display() {
        assert_eq!(p(&[0, 3, -4, 1]).to_string(), "x^3 - 4x^2 + 3x");
        assert_eq!(p(&[-1, 0, 2]).to_string(), "2x^2 - 1");
        assert_eq!(p(&[]).to_string(), "0");
        assert_eq!(p(&[0, -1]).to_string(), "-x");
    }

    #[test]
    fn arithmetic() {
        let a = p(&[1, 1]);
        let b = p(&[-1, 1]);
        assert_eq!(&a * &b, p(&[-1, 0, 1]));
        assert_eq!(&a - &a, IntPolynomial::zero());
        assert_eq!((&a + &b).degree(), Some(1));
        assert_eq!(p(&[0, 3, -4, 1]).derivative(), p(&[3, -8, 3]));
        assert_eq!(p(&[-1, 0, 1]).div_exact(&b), a);
        assert_eq!(p(&[1, 2, 3]).eval(&BigInt::from(2)), BigInt::from(17));
    }

    #[test]
    #[should_panic(expected = "inexact")]
    fn inexact_division_panics() {
        p(&[1, 0, 1]).div_exact(&p(&[-1, 1]));
    }

    #[test]
    fn gcd_examples() {
        // (x - 1)(x - 3) and (x - 3)(x + 2)
        let a = &IntPolynomial::linear(1) * &IntPolynomial::linear(3);
        let b = &IntPolynomial::linear(3) * &p(&[2, 1]);
        assert_eq!(a.gcd(&b), IntPolynomial::linear(3));
        assert_eq!(a.gcd(&p(&[5])), p(&[1]));
        // non-monic inputs
        let c = &p(&[2, 4]) * &p(&[1, 3]);
        let d = &p(&[3, 6]) * &p(&[-1, 1]);
        assert_eq!(c.gcd(&d), p(&[1, 2]));
        assert_eq!(IntPolynomial::zero().gcd(&a), a);
    }

    #[test]
    fn pseudo_remainder_matches_definition() {
        let a = p(&[1, 2, 3, 4]);
        let d = p(&[1, 2]);
        // lc(d)^(3-1+1) * a = q*d + r with deg r < 1
        let r = a.pseudo_rem(&d);
        assert!(r.degree().unwrap_or(0) < 1);
        let lhs = a.scale(&BigInt::from(8));
        let q = (&lhs - &r).div_exact(&d);
        assert_eq!(&(&q * &d) + &r, lhs);
    }
}
