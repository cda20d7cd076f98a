//! Prime-field arithmetic with a runtime modulus.
//!
//! Every element carries its modulus so that values from the default field
//! (2^61 - 1) and the small test field (101) can coexist in one process.
//! Mixing elements of different fields is a logic error and trips a debug
//! assertion.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use thiserror::Error;

/// The Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("field of size {p} too small for {n} parties")]
    FieldTooSmall { p: u64, n: usize },
    #[error("encoded element has {0} bytes, expected 8")]
    BadEncoding(usize),
    #[error("encoded value {value} is not reduced modulo {p}")]
    Unreduced { value: u64, p: u64 },
}

/// Parameters of a prime field: just the modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Field {
    p: u64,
}

impl Field {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(Self { p })
    }

    /// The default runtime field, p = 2^61 - 1.
    pub fn mersenne61() -> Self {
        Self { p: MERSENNE_61 }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Share indices `1..=n` must be distinct nonzero points, so `n < p`.
    pub fn check_parties(&self, n: usize) -> Result<(), FieldError> {
        if (n as u128) >= self.p as u128 {
            return Err(FieldError::FieldTooSmall { p: self.p, n });
        }
        Ok(())
    }

    #[inline]
    pub fn elem(&self, v: u64) -> Fe {
        Fe { v: v % self.p, p: self.p }
    }

    pub fn from_i128(&self, v: i128) -> Fe {
        let r = v.rem_euclid(self.p as i128);
        Fe { v: r as u64, p: self.p }
    }

    #[inline]
    pub fn zero(&self) -> Fe {
        Fe { v: 0, p: self.p }
    }

    #[inline]
    pub fn one(&self) -> Fe {
        self.elem(1)
    }

    /// Uniform element of `[0, p)`.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe { v: rng.gen_range(0..self.p), p: self.p }
    }

    pub fn sum<I: IntoIterator<Item = Fe>>(&self, items: I) -> Fe {
        items.into_iter().fold(self.zero(), |acc, x| acc + x)
    }

    /// Decode the 8-byte big-endian wire encoding.
    pub fn decode(&self, bytes: &[u8]) -> Result<Fe, FieldError> {
        let arr: [u8; 8] = bytes.try_into().map_err(|_| FieldError::BadEncoding(bytes.len()))?;
        let value = u64::from_be_bytes(arr);
        if value >= self.p {
            return Err(FieldError::Unreduced { value, p: self.p });
        }
        Ok(Fe { v: value, p: self.p })
    }
}

impl Default for Field {
    fn default() -> Self {
        Self::mersenne61()
    }
}

/// An element of a prime field.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fe {
    v: u64,
    p: u64,
}

impl Fe {
    #[inline]
    pub fn value(&self) -> u64 {
        self.v
    }

    #[inline]
    pub fn field(&self) -> Field {
        Field { p: self.p }
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.v == 0
    }

    pub fn pow(self, mut exp: u64) -> Fe {
        let mut base = self;
        let mut acc = self.field().one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `None` for zero.
    pub fn inv(self) -> Option<Fe> {
        if self.v == 0 {
            None
        } else {
            Some(self.pow(self.p - 2))
        }
    }

    pub fn to_bytes(&self) -> [u8; 8] {
        self.v.to_be_bytes()
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.v, self.p)
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

impl Add for Fe {
    type Output = Fe;
    #[inline]
    fn add(self, rhs: Fe) -> Fe {
        debug_assert_eq!(self.p, rhs.p, "mixed fields");
        let s = self.v as u128 + rhs.v as u128;
        let p = self.p as u128;
        Fe { v: (if s >= p { s - p } else { s }) as u64, p: self.p }
    }
}

impl Sub for Fe {
    type Output = Fe;
    #[inline]
    fn sub(self, rhs: Fe) -> Fe {
        debug_assert_eq!(self.p, rhs.p, "mixed fields");
        let v = if self.v >= rhs.v { self.v - rhs.v } else { self.p - (rhs.v - self.v) };
        Fe { v, p: self.p }
    }
}

impl Mul for Fe {
    type Output = Fe;
    #[inline]
    fn mul(self, rhs: Fe) -> Fe {
        debug_assert_eq!(self.p, rhs.p, "mixed fields");
        Fe { v: mul_mod(self.v, rhs.v, self.p), p: self.p }
    }
}

impl Neg for Fe {
    type Output = Fe;
    #[inline]
    fn neg(self) -> Fe {
        Fe { v: if self.v == 0 { 0 } else { self.p - self.v }, p: self.p }
    }
}

impl AddAssign for Fe {
    fn add_assign(&mut self, rhs: Fe) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fe {
    fn sub_assign(&mut self, rhs: Fe) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fe {
    fn mul_assign(&mut self, rhs: Fe) {
        *self = *self * rhs;
    }
}
