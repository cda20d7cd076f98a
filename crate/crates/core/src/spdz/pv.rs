//! Publicly verifiable SPDZ: every value is `<s>`, `<r>` plus one Pedersen
//! commitment per party, and every step is mirrored on the audit trail.

use rand::Rng;

use super::audit::{TrailWriter, WireId};
use super::pedersen::{CommitParams, Commitment};
use super::{AuthSharing, Preprocessing, SpdzEngine, SpdzError};
use crate::field::Fe;
use crate::net::Channel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PvShare {
    pub wire: WireId,
    pub value: AuthSharing,
    pub randomness: AuthSharing,
    pub commitments: Vec<Commitment>,
}

fn party_commitments(params: &CommitParams, value: &AuthSharing, randomness: &AuthSharing) -> Vec<Commitment> {
    value.shares.iter().zip(&randomness.shares).map(|(s, r)| params.commit(s.value, r.value)).collect()
}

/// Shares `secret` with fresh randomness; each party posts the commitment
/// to its own pair of shares.
pub fn pv_share<R: Rng + ?Sized>(
    secret: Fe,
    prep: &mut dyn Preprocessing,
    trail: &mut TrailWriter<'_>,
    rng: &mut R,
) -> Result<PvShare, SpdzError> {
    if prep.parties() != trail.parties() {
        return Err(SpdzError::MismatchedParties(format!(
            "{} preprocessed, {} on trail",
            prep.parties(),
            trail.parties()
        )));
    }
    let value = prep.input(secret);
    let randomness = prep.input(secret.field().random(rng));
    let commitments = party_commitments(&trail.params(), &value, &randomness);
    let wire = trail.fresh_wire();
    trail.post_commit(wire, &commitments)?;
    Ok(PvShare { wire, value, randomness, commitments })
}

#[derive(Debug, Clone)]
pub struct PvTriple {
    pub a: PvShare,
    pub b: PvShare,
    pub c: PvShare,
    consumed: bool,
}

/// SPDZ online phase plus its public trail.
pub struct PvEngine<'a> {
    spdz: SpdzEngine,
    trail: TrailWriter<'a>,
}

impl<'a> PvEngine<'a> {
    pub fn new(spdz: SpdzEngine, trail: TrailWriter<'a>) -> Self {
        Self { spdz, trail }
    }

    pub fn spdz(&self) -> &SpdzEngine {
        &self.spdz
    }

    pub fn spdz_mut(&mut self) -> &mut SpdzEngine {
        &mut self.spdz
    }

    pub fn trail(&self) -> &TrailWriter<'a> {
        &self.trail
    }

    pub fn trail_mut(&mut self) -> &mut TrailWriter<'a> {
        &mut self.trail
    }

    pub fn input<R: Rng + ?Sized>(
        &mut self,
        secret: Fe,
        prep: &mut dyn Preprocessing,
        rng: &mut R,
    ) -> Result<PvShare, SpdzError> {
        pv_share(secret, prep, &mut self.trail, rng)
    }

    pub fn triple<R: Rng + ?Sized>(&mut self, prep: &mut dyn Preprocessing, rng: &mut R) -> Result<PvTriple, SpdzError> {
        let t = prep.triple();
        let mut wrap = |value: AuthSharing| -> Result<PvShare, SpdzError> {
            let randomness = prep.input(value.field().random(rng));
            let commitments = party_commitments(&self.trail.params(), &value, &randomness);
            let wire = self.trail.fresh_wire();
            self.trail.post_commit(wire, &commitments)?;
            Ok(PvShare { wire, value, randomness, commitments })
        };
        Ok(PvTriple { a: wrap(t.a)?, b: wrap(t.b)?, c: wrap(t.c)?, consumed: false })
    }

    pub fn linear(&mut self, terms: &[(Fe, &PvShare)], constant: Fe) -> Result<PvShare, SpdzError> {
        let field = self.spdz.field();
        let vt: Vec<(Fe, &AuthSharing)> = terms.iter().map(|(k, x)| (*k, &x.value)).collect();
        let rt: Vec<(Fe, &AuthSharing)> = terms.iter().map(|(k, x)| (*k, &x.randomness)).collect();
        let value = self.spdz.auth_linear(&vt, constant)?;
        let randomness = self.spdz.auth_linear(&rt, field.zero())?;
        let params = self.trail.params();
        let commitments = (0..self.spdz.parties())
            .map(|i| {
                let cs: Vec<(Fe, Commitment)> = terms.iter().map(|(k, x)| (*k, x.commitments[i])).collect();
                params.linear(&cs, (i == 0).then_some(constant))
            })
            .collect();
        let wire = self.trail.fresh_wire();
        let wired: Vec<(Fe, WireId)> = terms.iter().map(|(k, x)| (*k, x.wire)).collect();
        self.trail.post_linear(wire, &wired, constant)?;
        Ok(PvShare { wire, value, randomness, commitments })
    }

    /// Partial opening; each party also posts its value and randomness
    /// shares so the trail can be checked against the commitments.
    pub fn open(&mut self, x: &PvShare, net: &mut dyn Channel) -> Result<Fe, SpdzError> {
        let v = self.spdz.partial_open(&x.value, net)?;
        let openings: Vec<(Fe, Fe)> =
            x.value.shares.iter().zip(&x.randomness.shares).map(|(s, r)| (s.value, r.value)).collect();
        self.trail.post_open(x.wire, &openings)?;
        Ok(v)
    }

    pub fn mul(
        &mut self,
        x: &PvShare,
        y: &PvShare,
        triple: &mut PvTriple,
        net: &mut dyn Channel,
    ) -> Result<PvShare, SpdzError> {
        if triple.consumed {
            return Err(SpdzError::TripleReuse);
        }
        triple.consumed = true;
        let f = self.spdz.field();
        let (one, zero) = (f.one(), f.zero());
        let eps_sh = self.linear(&[(one, x), (-one, &triple.a)], zero)?;
        let delta_sh = self.linear(&[(one, y), (-one, &triple.b)], zero)?;
        let eps = self.open(&eps_sh, net)?;
        let delta = self.open(&delta_sh, net)?;
        self.linear(&[(one, &triple.c), (eps, &triple.b), (delta, &triple.a)], eps * delta)
    }

    pub fn mac_check<R: Rng + ?Sized>(&mut self, net: &mut dyn Channel, rng: &mut R) -> Result<(), SpdzError> {
        self.spdz.mac_check(net, rng)
    }

    pub fn finish(mut self, outputs: &[(WireId, Fe)]) -> Result<u64, SpdzError> {
        self.trail.post_result(outputs)?;
        Ok(self.trail.steps())
    }
}
