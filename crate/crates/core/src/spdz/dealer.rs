//! Trusted-dealer preprocessing.
//!
//! Stands in for the SHE-based offline phase. Everything that needs
//! preprocessed material goes through [`Preprocessing`], so a real offline
//! protocol can replace the dealer without touching the online phase.

use rand::Rng;

use super::{additive_split, AuthShare, AuthSharing, BeaverTriple, MacKey, SpdzError};
use crate::field::Fe;

/// Additive `n`-way sharing of `secret` with MAC shares summing to
/// `alpha * secret`.
pub fn deal_authenticated<R: Rng + ?Sized>(
    secret: Fe,
    n: usize,
    key: &MacKey,
    rng: &mut R,
) -> Result<AuthSharing, SpdzError> {
    if n < 2 {
        return Err(SpdzError::TooFewParties(n));
    }
    if n != key.parties() {
        return Err(SpdzError::MismatchedParties(format!(
            "key issued to {} parties, dealing to {n}",
            key.parties()
        )));
    }
    Ok(authenticate(secret, key, rng))
}

fn authenticate<R: Rng + ?Sized>(secret: Fe, key: &MacKey, rng: &mut R) -> AuthSharing {
    let n = key.parties();
    let values = additive_split(secret, n, rng);
    let macs = additive_split(key.alpha * secret, n, rng);
    AuthSharing {
        shares: values
            .into_iter()
            .zip(macs)
            .enumerate()
            .map(|(i, (value, mac))| AuthShare { value, mac, owner: i + 1 })
            .collect(),
    }
}

/// A triple with chosen `a` and `b`.
pub fn deal_triple_with<R: Rng + ?Sized>(a: Fe, b: Fe, key: &MacKey, rng: &mut R) -> BeaverTriple {
    BeaverTriple::new(authenticate(a, key, rng), authenticate(b, key, rng), authenticate(a * b, key, rng))
}

/// `count` independent random triples.
pub fn deal_triples<R: Rng + ?Sized>(count: usize, key: &MacKey, rng: &mut R) -> Vec<BeaverTriple> {
    let field = key.alpha.field();
    (0..count)
        .map(|_| {
            let a = field.random(rng);
            let b = field.random(rng);
            deal_triple_with(a, b, key, rng)
        })
        .collect()
}

/// Source of preprocessed material for the online phase.
pub trait Preprocessing {
    fn parties(&self) -> usize;
    fn alpha_shares(&self) -> Vec<Fe>;
    fn triple(&mut self) -> BeaverTriple;
    fn input(&mut self, secret: Fe) -> AuthSharing;
}

/// Holds the MAC key in the clear; the trust gap is explicit.
pub struct TrustedDealer<R> {
    key: MacKey,
    rng: R,
}

impl<R: Rng> TrustedDealer<R> {
    pub fn new(field: crate::field::Field, n: usize, mut rng: R) -> Result<Self, SpdzError> {
        let key = MacKey::generate(field, n, &mut rng)?;
        Ok(Self { key, rng })
    }

    pub fn key(&self) -> &MacKey {
        &self.key
    }
}

impl<R: Rng> Preprocessing for TrustedDealer<R> {
    fn parties(&self) -> usize {
        self.key.parties()
    }

    fn alpha_shares(&self) -> Vec<Fe> {
        self.key.alpha_shares.clone()
    }

    fn triple(&mut self) -> BeaverTriple {
        deal_triples(1, &self.key, &mut self.rng).remove(0)
    }

    fn input(&mut self, secret: Fe) -> AuthSharing {
        authenticate(secret, &self.key, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    #[test]
    fn authenticated_sums() {
        let f = Field::new(101).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = MacKey { alpha: f.elem(7), alpha_shares: additive_split(f.elem(7), 3, &mut rng) };
        let s = deal_authenticated(f.elem(4), 3, &key, &mut rng).unwrap();
        assert_eq!(s.value_sum().value(), 4);
        assert_eq!(s.mac_sum().value(), 28);

        let z = deal_authenticated(f.zero(), 3, &key, &mut rng).unwrap();
        assert!(z.value_sum().is_zero() && z.mac_sum().is_zero());

        let again = deal_authenticated(f.elem(4), 3, &key, &mut rng).unwrap();
        assert_ne!(again.shares, s.shares);
        assert_eq!(again.value_sum(), s.value_sum());
        assert!(deal_authenticated(f.elem(4), 2, &key, &mut rng).is_err());
    }

    #[test]
    fn triples_are_products_and_distinct() {
        let f = Field::mersenne61();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = MacKey::generate(f, 3, &mut rng).unwrap();
        let triples = deal_triples(100, &key, &mut rng);
        let mut seen = HashSet::new();
        for t in &triples {
            assert_eq!(t.c.value_sum(), t.a.value_sum() * t.b.value_sum());
            assert_eq!(t.c.mac_sum(), key.alpha * t.c.value_sum());
            assert!(!t.is_consumed());
            seen.insert((t.a.value_sum().value(), t.b.value_sum().value()));
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn forced_triple() {
        let f = Field::new(101).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = MacKey::generate(f, 2, &mut rng).unwrap();
        let t = deal_triple_with(f.elem(2), f.elem(3), &key, &mut rng);
        assert_eq!(t.c.value_sum().value(), 6);
    }
}
