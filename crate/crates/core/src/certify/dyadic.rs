//! Dyadic rationals and outward-rounded intervals over them.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// `mantissa * 2^exponent`, normalized so the mantissa is odd (or zero with
/// exponent zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

fn pow2(k: u64) -> BigInt {
    BigInt::one() << k
}

/// `floor(m / 2^s)` or `ceil(m / 2^s)`.
fn shift_right(m: &BigInt, s: u64, dir: Round) -> BigInt {
    let d = pow2(s);
    match dir {
        Round::Down => m.div_floor(&d),
        Round::Up => -((-m).div_floor(&d)),
    }
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        if mantissa.is_zero() {
            return Dyadic::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        Dyadic {
            mantissa: mantissa >> tz,
            exponent: exponent + tz as i64,
        }
    }

    pub fn zero() -> Self {
        Dyadic {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    /// Bit length of the mantissa magnitude.
    pub fn precision(&self) -> u64 {
        self.mantissa.bits()
    }

    /// Rounds to at most `prec` mantissa bits in direction `dir`.
    pub fn round(&self, prec: u64, dir: Round) -> Dyadic {
        let bits = self.precision();
        if bits <= prec {
            return self.clone();
        }
        let s = bits - prec;
        Dyadic::new(shift_right(&self.mantissa, s, dir), self.exponent + s as i64)
    }

    /// `1 / self` with `prec` bits, rounded in direction `dir`.
    pub fn recip(&self, prec: u64, dir: Round) -> Dyadic {
        assert!(!self.is_zero(), "reciprocal of zero");
        let k = prec + self.precision();
        let num = pow2(k);
        let q = match dir {
            Round::Down => num.div_floor(&self.mantissa),
            Round::Up => -((-num).div_floor(&self.mantissa)),
        };
        Dyadic::new(q, -(k as i64) - self.exponent).round(prec, dir)
    }

    /// Dyadic bound on a rational: `floor` or `ceil` of `r * 2^prec_frac`.
    pub fn from_rational(r: &BigRational, frac_bits: u64, dir: Round) -> Dyadic {
        let scaled = r * BigRational::from_integer(pow2(frac_bits));
        let m = match dir {
            Round::Down => scaled.floor().to_integer(),
            Round::Up => scaled.ceil().to_integer(),
        };
        Dyadic::new(m, -(frac_bits as i64))
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as u64)
        } else {
            BigRational::new(self.mantissa.clone(), pow2(self.exponent.unsigned_abs()))
        }
    }

    /// Nearest-ish `f64`, for display only.
    pub fn to_f64(&self) -> f64 {
        let bits = self.precision();
        let (m, e) = if bits > 60 {
            let s = bits - 60;
            (&self.mantissa >> s, self.exponent + s as i64)
        } else {
            (self.mantissa.clone(), self.exponent)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        if e > i32::MAX as i64 {
            return m * f64::INFINITY;
        }
        if e < i32::MIN as i64 {
            return 0.0;
        }
        m * 2f64.powi(e.clamp(-1100, 1100) as i32)
    }

    pub fn pow_round(&self, n: &BigUint, prec: u64, dir: Round) -> Dyadic {
        assert!(!self.is_negative(), "directed powering needs a non-negative base");
        let mut result = Dyadic::one();
        let mut base = self.round(prec, dir);
        let bits = n.bits();
        for i in 0..bits {
            if n.bit(i) {
                result = (&result * &base).round(prec, dir);
            }
            if i + 1 < bits {
                base = (&base * &base).round(prec, dir);
            }
        }
        result
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self - other;
        match diff.mantissa.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exponent.min(rhs.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &rhs.mantissa << (rhs.exponent - e) as u64;
        Dyadic::new(a + b, e)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

/// Written as `mantissa*2^exponent`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDyadicError;

impl fmt::Display for ParseDyadicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected `<mantissa>*2^<exponent>`")
    }
}

impl std::error::Error for ParseDyadicError {}

impl FromStr for Dyadic {
    type Err = ParseDyadicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, e) = s.trim().split_once("*2^").ok_or(ParseDyadicError)?;
        let m: BigInt = m.parse().map_err(|_| ParseDyadicError)?;
        let e: i64 = e.parse().map_err(|_| ParseDyadicError)?;
        Ok(Dyadic::new(m, e))
    }
}

/// Closed interval `[lo, hi]` with dyadic endpoints. Every operation rounds
/// `lo` down and `hi` up, so the exact result is always enclosed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicInterval {
    lo: Dyadic,
    hi: Dyadic,
}

impl DyadicInterval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        DyadicInterval { lo, hi }
    }

    pub fn point(v: Dyadic) -> Self {
        DyadicInterval { lo: v.clone(), hi: v }
    }

    pub fn from_int(v: i64) -> Self {
        DyadicInterval::point(Dyadic::from_int(v))
    }

    /// Tightest enclosure of `r` with `frac_bits` fractional bits.
    pub fn from_rational(r: &BigRational, frac_bits: u64) -> Self {
        DyadicInterval {
            lo: Dyadic::from_rational(r, frac_bits, Round::Down),
            hi: Dyadic::from_rational(r, frac_bits, Round::Up),
        }
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn width(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        &self.lo.to_rational() <= r && r <= &self.hi.to_rational()
    }

    pub fn contains_zero(&self) -> bool {
        (self.lo.is_negative() || self.lo.is_zero()) && !self.hi.is_negative()
    }

    pub fn round(&self, prec: u64) -> Self {
        DyadicInterval {
            lo: self.lo.round(prec, Round::Down),
            hi: self.hi.round(prec, Round::Up),
        }
    }

    pub fn add(&self, other: &Self, prec: u64) -> Self {
        DyadicInterval {
            lo: (&self.lo + &other.lo).round(prec, Round::Down),
            hi: (&self.hi + &other.hi).round(prec, Round::Up),
        }
    }

    pub fn sub(&self, other: &Self, prec: u64) -> Self {
        DyadicInterval {
            lo: (&self.lo - &other.hi).round(prec, Round::Down),
            hi: (&self.hi - &other.lo).round(prec, Round::Up),
        }
    }

    pub fn mul(&self, other: &Self, prec: u64) -> Self {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().unwrap().round(prec, Round::Down);
        let hi = products.iter().max().unwrap().round(prec, Round::Up);
        DyadicInterval { lo, hi }
    }

    /// Enclosure of `1 / x` for an interval not containing zero.
    pub fn recip(&self, prec: u64) -> Option<Self> {
        if self.contains_zero() {
            return None;
        }
        Some(DyadicInterval {
            lo: self.hi.recip(prec, Round::Down),
            hi: self.lo.recip(prec, Round::Up),
        })
    }

    /// Enclosure of `x^n` for a non-negative interval.
    pub fn powu(&self, n: &BigUint, prec: u64) -> Self {
        assert!(!self.lo.is_negative(), "powu needs a non-negative interval");
        DyadicInterval {
            lo: self.lo.pow_round(n, prec, Round::Down),
            hi: self.hi.pow_round(n, prec, Round::Up),
        }
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn normalization_and_order() {
        let a = Dyadic::new(BigInt::from(12), -2);
        assert_eq!(a, Dyadic::new(BigInt::from(3), 0));
        assert!(Dyadic::from_int(3) > Dyadic::new(BigInt::from(5), -1));
        assert_eq!(a.to_rational(), rat(3, 1));
        assert_eq!("3*2^0".parse::<Dyadic>().unwrap(), a);
        assert_eq!(a.to_string().parse::<Dyadic>().unwrap(), a);
    }

    #[test]
    fn directed_rounding() {
        let x = Dyadic::new(BigInt::from(0b1011), 0); // 11
        assert_eq!(x.round(2, Round::Down).to_rational(), rat(8, 1));
        assert_eq!(x.round(2, Round::Up).to_rational(), rat(12, 1));
        let n = -&x;
        assert_eq!(n.round(2, Round::Down).to_rational(), rat(-12, 1));
        assert_eq!(n.round(2, Round::Up).to_rational(), rat(-8, 1));
    }

    #[test]
    fn reciprocal_of_three() {
        let three = Dyadic::from_int(3);
        let lo = three.recip(64, Round::Down).to_rational();
        let hi = three.recip(64, Round::Up).to_rational();
        assert!(lo < rat(1, 3) && rat(1, 3) < hi);
        assert!(&hi - &lo < rat(1, 1 << 62));
    }

    #[test]
    fn interval_ops_enclose() {
        let a = DyadicInterval::from_rational(&rat(1, 3), 40);
        let b = DyadicInterval::from_rational(&rat(-2, 7), 40);
        assert!(a.mul(&b, 30).contains_rational(&rat(-2, 21)));
        assert!(a.add(&b, 30).contains_rational(&rat(1, 21)));
        assert!(a.sub(&b, 30).contains_rational(&rat(13, 21)));
        assert!(b.recip(30).unwrap().contains_rational(&rat(-7, 2)));
        let z = DyadicInterval::new(Dyadic::from_int(-1), Dyadic::from_int(1));
        assert!(z.recip(30).is_none());
        assert!(z.contains_zero());
        assert!(!a.contains_zero());
    }

    #[test]
    fn exact_integer_power() {
        let two = DyadicInterval::from_int(2);
        assert_eq!(two.powu(&BigUint::from(3u32), 64), DyadicInterval::from_int(8));
    }
}
