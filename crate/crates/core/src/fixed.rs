//! Signed fixed-point numbers with `FRAC_BITS` fractional bits.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

const FRAC_BITS: u32 = 640;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Fixed(BigInt);

impl Fixed {
    pub fn zero() -> Self {
        Fixed(BigInt::zero())
    }

    pub fn one() -> Self {
        Fixed(BigInt::from(1) << FRAC_BITS)
    }

    /// Exact conversion.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite());
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let (mant, e) = if exp == 0 {
            (bits & ((1 << 52) - 1), -1074)
        } else {
            ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075)
        };
        let m = BigInt::from(mant);
        let shift = e + FRAC_BITS as i64;
        let v = if shift >= 0 { m << shift as u32 } else { m >> (-shift) as u32 };
        Fixed(if x < 0.0 { -v } else { v })
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.0.bits() as i64;
        // keep 64 leading bits to stay in f64 range
        let drop = (bits - 64).max(0);
        let top = (&self.0 >> drop as u32).to_f64().unwrap_or(0.0);
        top * 2f64.powi((drop - FRAC_BITS as i64) as i32)
    }

    pub fn div_int(&self, n: u64) -> Self {
        Fixed(&self.0 / BigInt::from(n))
    }

    /// `√(a/b)` for positive integers.
    pub fn sqrt_ratio(a: u64, b: u64) -> Self {
        let scaled = (BigInt::from(a) << (2 * FRAC_BITS)) / BigInt::from(b);
        Fixed(scaled.sqrt())
    }

    /// `e^x`: Taylor series on `x/2^k`, then `k` squarings.
    pub fn exp(x: f64) -> Self {
        let k = if x.abs() > 1e-3 { (x.abs() / 1e-3).log2().ceil() as u32 } else { 0 };
        let r = Fixed(Fixed::from_f64(x).0 >> k);
        let mut term = Fixed::one();
        let mut sum = Fixed::one();
        for n in 1..60 {
            term = (&term * &r).div_int(n);
            if term.0.is_zero() {
                break;
            }
            sum = &sum + &term;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, b: &Fixed) -> Fixed {
        Fixed(&self.0 + &b.0)
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, b: &Fixed) -> Fixed {
        Fixed(&self.0 - &b.0)
    }
}

impl Mul for &Fixed {
    type Output = Fixed;
    fn mul(self, b: &Fixed) -> Fixed {
        Fixed((&self.0 * &b.0) >> FRAC_BITS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [1.0, -0.1, 3.5e-30, 7.25e20, -1e-150] {
            assert_eq!(Fixed::from_f64(x).to_f64(), x);
        }
        let r = Fixed::sqrt_ratio(2, 1);
        let back = &(&r * &r) - &Fixed::from_f64(2.0);
        assert!(back.to_f64().abs() < 1e-180);
    }

    #[test]
    fn exp_matches_reciprocal() {
        for x in [0.2, 1.0, 5.0, 0.013, 12.5] {
            let p = &(&Fixed::exp(x) * &Fixed::exp(-x)) - &Fixed::one();
            assert!(p.to_f64().abs() < 1e-150, "{x}");
        }
        assert!((Fixed::exp(1.0).to_f64() - std::f64::consts::E).abs() < 1e-15);
    }
}
