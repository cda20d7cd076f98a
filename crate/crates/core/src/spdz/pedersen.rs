//! Pedersen commitments `g^s h^r` in the order-`p` subgroup of `Z_q^*`.
//!
//! `q = k*p + 1` for the smallest even `k` making `q` prime, so exponents
//! live in the share field and commitments combine homomorphically with
//! linear operations on shares. `g` and `h` are hashed into the subgroup so
//! nobody knows `log_g h`.

use serde::{Deserialize, Serialize};

use super::SpdzError;
use crate::crypto::hash;
use crate::field::{Fe, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Commitment(pub u128);

// Decimal string on the wire: JSON numbers past 64 bits do not survive
// every decoder.
impl Serialize for Commitment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Commitment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(Commitment).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitParams {
    pub p: u64,
    pub q: u128,
    pub g: u128,
    pub h: u128,
}

impl CommitParams {
    pub fn for_field(field: Field) -> Result<CommitParams, SpdzError> {
        let p = field.modulus();
        let mut k: u128 = 2;
        let q = loop {
            let q = k * p as u128 + 1;
            if q >= 1 << 127 {
                return Err(SpdzError::NoCommitGroup(p));
            }
            if is_prime(q) {
                break q;
            }
            k += 2;
        };
        let g = hash_to_group(b"mpcnet/pedersen/g", p, q);
        let h = hash_to_group(b"mpcnet/pedersen/h", p, q);
        Ok(CommitParams { p, q, g, h })
    }

    /// Both generators lie in the order-`p` subgroup and are not 1.
    pub fn is_valid(&self) -> bool {
        let in_group = |x: u128| x > 1 && x < self.q && pow_mod(x, self.p as u128, self.q) == 1;
        is_prime(self.q) && (self.q - 1).is_multiple_of(self.p as u128) && in_group(self.g) && in_group(self.h) && self.g != self.h
    }

    pub fn commit(&self, s: Fe, r: Fe) -> Commitment {
        Commitment(mul_mod(pow_mod(self.g, s.value() as u128, self.q), pow_mod(self.h, r.value() as u128, self.q), self.q))
    }

    pub fn verify_open(&self, c: Commitment, s: Fe, r: Fe) -> bool {
        self.commit(s, r) == c
    }

    pub fn identity(&self) -> Commitment {
        Commitment(1)
    }

    /// Commitment to `(s1 + s2, r1 + r2)`.
    pub fn combine(&self, a: Commitment, b: Commitment) -> Commitment {
        Commitment(mul_mod(a.0, b.0, self.q))
    }

    /// Commitment to `(k*s, k*r)`.
    pub fn scale(&self, c: Commitment, k: Fe) -> Commitment {
        Commitment(pow_mod(c.0, k.value() as u128, self.q))
    }

    /// `g^k`, a commitment to `k` with zero randomness.
    pub fn public(&self, k: Fe) -> Commitment {
        Commitment(pow_mod(self.g, k.value() as u128, self.q))
    }

    /// `prod c_j^{k_j} * g^constant`.
    pub fn linear(&self, terms: &[(Fe, Commitment)], constant: Option<Fe>) -> Commitment {
        let mut acc = constant.map(|k| self.public(k)).unwrap_or(self.identity());
        for (k, c) in terms {
            acc = self.combine(acc, self.scale(*c, *k));
        }
        acc
    }
}

fn hash_to_group(label: &[u8], p: u64, q: u128) -> u128 {
    let cofactor = (q - 1) / p as u128;
    (0u64..)
        .map(|ctr| {
            let d = hash(&[label, &p.to_be_bytes(), &q.to_be_bytes(), &ctr.to_be_bytes()]);
            let x = u128::from_be_bytes(d.0[..16].try_into().unwrap()) % q;
            pow_mod(x, cofactor, q)
        })
        .find(|&e| e > 1)
        .unwrap()
}

/// `a*b mod m` for `m < 2^127` without a wide multiply.
fn mul_mod(mut a: u128, mut b: u128, m: u128) -> u128 {
    a %= m;
    b %= m;
    if let (Ok(x), Ok(y)) = (u64::try_from(a), u64::try_from(b)) {
        return (x as u128 * y as u128) % m;
    }
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = (acc + a) % m;
        }
        a = (a << 1) % m;
        b >>= 1;
    }
    acc
}

fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
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

/// Miller-Rabin with the first 20 prime bases; deterministic far beyond
/// the sizes searched here.
fn is_prime(n: u128) -> bool {
    const BASES: [u128; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];
    if n < 2 {
        return false;
    }
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn small_group() {
        let f = Field::new(101).unwrap();
        let pp = CommitParams::for_field(f).unwrap();
        assert_eq!(pp.q, 607);
        assert!(pp.is_valid());
        assert_eq!(pow_mod(pp.g, 101, 607), 1);
    }

    #[test]
    fn default_group_is_valid() {
        let pp = CommitParams::for_field(Field::mersenne61()).unwrap();
        assert!(pp.is_valid());
        assert_eq!(pp.q, 52 * pp.p as u128 + 1);
    }

    #[test]
    fn binding_on_toy_group() {
        let f = Field::new(101).unwrap();
        let pp = CommitParams::for_field(f).unwrap();
        let c = pp.commit(f.elem(5), f.elem(9));
        assert!(pp.verify_open(c, f.elem(5), f.elem(9)));
        // Exhaustive over the toy group: no other s opens c with the same r.
        for s in 0..101 {
            if s != 5 {
                assert!(!pp.verify_open(c, f.elem(s), f.elem(9)));
            }
        }
    }

    #[test]
    fn homomorphic() {
        let f = Field::mersenne61();
        let pp = CommitParams::for_field(f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (s1, r1, s2, r2, k) = (f.random(&mut rng), f.random(&mut rng), f.random(&mut rng), f.random(&mut rng), f.random(&mut rng));
            let sum = pp.combine(pp.commit(s1, r1), pp.commit(s2, r2));
            assert_eq!(sum, pp.commit(s1 + s2, r1 + r2));
            assert_eq!(pp.scale(pp.commit(s1, r1), k), pp.commit(k * s1, k * r1));
            assert_eq!(pp.linear(&[(k, pp.commit(s1, r1))], Some(s2)), pp.commit(k * s1 + s2, k * r1));
        }
    }
}
