//! Shamir secret sharing over a prime field.
//!
//! Shares sit at the canonical points `1..=n`. Linear operations are local;
//! multiplication goes through a degree-reduction round in which every party
//! re-shares its local degree-2t product point and all parties recombine the
//! received sub-shares with Lagrange weights.

use rand::Rng;
use thiserror::Error;

use crate::field::{Fe, Field, FieldError};
use crate::net::{Channel, NetError, PartyId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SssError {
    #[error("invalid threshold: t = {t} must be below n = {n}")]
    InvalidThreshold { t: usize, n: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("insufficient shares: have {have}, need {need}")]
    InsufficientShares { have: usize, need: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u64),
    #[error("share index 0 is reserved for the secret")]
    ZeroIndex,
    #[error("mismatched parameters: {0}")]
    MismatchedParameters(String),
    #[error("honest majority violated: 2t = {} >= n = {n}", 2 * t)]
    HonestMajorityViolated { t: usize, n: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One party's point on the sharing polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShamirShare {
    pub index: u64,
    pub value: Fe,
    pub threshold: usize,
}

/// Deal `n` shares of `secret` on a uniformly random degree-`t` polynomial.
pub fn share<R: Rng + ?Sized>(
    secret: Fe,
    t: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ShamirShare>, SssError> {
    check_params(secret.field(), t, n)?;
    let field = secret.field();
    let coeffs: Vec<Fe> = (0..t).map(|_| field.random(rng)).collect();
    share_with_coefficients(secret, &coeffs, n)
}

/// Deal with explicit higher coefficients `a_1..a_t`; the degree is
/// `coeffs.len()`.
pub fn share_with_coefficients(
    secret: Fe,
    coeffs: &[Fe],
    n: usize,
) -> Result<Vec<ShamirShare>, SssError> {
    let t = coeffs.len();
    let field = secret.field();
    check_params(field, t, n)?;
    Ok((1..=n as u64)
        .map(|i| {
            let x = field.elem(i);
            // Horner from the top coefficient down to a_0 = secret.
            let mut acc = field.zero();
            for c in coeffs.iter().rev() {
                acc = acc * x + *c;
            }
            acc = acc * x + secret;
            ShamirShare { index: i, value: acc, threshold: t }
        })
        .collect())
}

fn check_params(field: Field, t: usize, n: usize) -> Result<(), SssError> {
    if t >= n {
        return Err(SssError::InvalidThreshold { t, n });
    }
    field.check_parties(n)?;
    Ok(())
}

/// Lagrange basis values at zero for the given distinct nonzero points.
pub fn lagrange_at_zero(field: Field, indices: &[u64]) -> Result<Vec<Fe>, SssError> {
    lagrange_at(field, indices, field.zero())
}

/// Lagrange basis values at `x` for the given distinct nonzero points.
pub fn lagrange_at(field: Field, indices: &[u64], x: Fe) -> Result<Vec<Fe>, SssError> {
    for (k, &i) in indices.iter().enumerate() {
        if i % field.modulus() == 0 {
            return Err(SssError::ZeroIndex);
        }
        if indices[..k].contains(&i) {
            return Err(SssError::DuplicateIndex(i));
        }
    }
    let pts: Vec<Fe> = indices.iter().map(|&i| field.elem(i)).collect();
    let mut out = Vec::with_capacity(pts.len());
    for (k, &xk) in pts.iter().enumerate() {
        let mut num = field.one();
        let mut den = field.one();
        for (m, &xm) in pts.iter().enumerate() {
            if m != k {
                num *= x - xm;
                den *= xk - xm;
            }
        }
        out.push(num * den.inv().expect("distinct points"));
    }
    Ok(out)
}

/// Recover `q(0)` from at least `t + 1` shares of one sharing.
pub fn reconstruct(shares: &[ShamirShare]) -> Result<Fe, SssError> {
    let first = shares.first().ok_or(SssError::InsufficientShares { have: 0, need: 1 })?;
    let t = first.threshold;
    let field = first.value.field();
    if let Some(s) = shares.iter().find(|s| s.threshold != t || s.value.field() != field) {
        return Err(SssError::MismatchedParameters(format!(
            "share {} has threshold {} over p = {}, expected {t} over p = {}",
            s.index,
            s.threshold,
            s.value.field().modulus(),
            field.modulus()
        )));
    }
    if shares.len() <= t {
        return Err(SssError::InsufficientShares { have: shares.len(), need: t + 1 });
    }
    let indices: Vec<u64> = shares.iter().map(|s| s.index).collect();
    let weights = lagrange_at_zero(field, &indices)?;
    Ok(field.sum(weights.iter().zip(shares).map(|(w, s)| *w * s.value)))
}

/// True when every share lies on one polynomial of degree at most `t`.
pub fn consistent(shares: &[ShamirShare], t: usize) -> Result<bool, SssError> {
    if shares.len() <= t + 1 {
        return Ok(true);
    }
    let field = shares[0].value.field();
    let base: Vec<u64> = shares[..=t].iter().map(|s| s.index).collect();
    for extra in &shares[t + 1..] {
        let w = lagrange_at(field, &base, field.elem(extra.index))?;
        let predicted = field.sum(w.iter().zip(&shares[..=t]).map(|(w, s)| *w * s.value));
        if predicted != extra.value {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Party-wise `sum_j coeffs[j] * [s_j] + constant`. Purely local.
pub fn linear_combine(
    share_lists: &[Vec<ShamirShare>],
    coeffs: &[Fe],
    constant: Fe,
) -> Result<Vec<ShamirShare>, SssError> {
    if share_lists.len() != coeffs.len() {
        return Err(SssError::MismatchedParameters(format!(
            "{} sharings but {} coefficients",
            share_lists.len(),
            coeffs.len()
        )));
    }
    let Some(first) = share_lists.first() else {
        return Err(SssError::MismatchedParameters("no sharings to combine".into()));
    };
    let field = constant.field();
    let t = first.first().map(|s| s.threshold).unwrap_or(0);
    for list in share_lists {
        if list.len() != first.len() {
            return Err(SssError::MismatchedParameters("sharings over different party counts".into()));
        }
        for (a, b) in list.iter().zip(first) {
            if a.index != b.index || a.threshold != t || a.value.field() != field {
                return Err(SssError::MismatchedParameters(format!(
                    "share {} does not align with share {}",
                    a.index, b.index
                )));
            }
        }
    }
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let v = share_lists
                .iter()
                .zip(coeffs)
                .fold(constant, |acc, (list, c)| acc + *c * list[i].value);
            ShamirShare { index: s.index, value: v, threshold: t }
        })
        .collect())
}

/// One re-sharing job: every source shares `weight * value` at degree
/// `t_out` to `recipients`, who sum what they receive.
#[derive(Debug, Clone)]
pub struct ReshareGroup {
    pub sources: Vec<(PartyId, Fe)>,
    pub weights: Vec<Fe>,
    pub recipients: Vec<PartyId>,
    pub t_out: usize,
}

/// Each source re-shares its value at degree `t_out` to `recipients`; each
/// recipient outputs `sum_i weights[i] * sub_share(i -> j)`.
///
/// Output share `j` carries index `j + 1`. A source that is also a
/// recipient keeps its own sub-share locally, so one round costs
/// `|sources| * |recipients|` minus the overlap in messages.
pub fn reshare_weighted<R: Rng + ?Sized>(
    sources: &[(PartyId, Fe)],
    weights: &[Fe],
    recipients: &[PartyId],
    t_out: usize,
    net: &mut dyn Channel,
    rng: &mut R,
) -> Result<Vec<ShamirShare>, SssError> {
    let group = ReshareGroup { sources: sources.to_vec(), weights: weights.to_vec(), recipients: recipients.to_vec(), t_out };
    Ok(reshare_many(&[group], net, rng)?.remove(0))
}

/// Runs independent re-sharing jobs in a single communication round.
pub fn reshare_many<R: Rng + ?Sized>(
    groups: &[ReshareGroup],
    net: &mut dyn Channel,
    rng: &mut R,
) -> Result<Vec<Vec<ShamirShare>>, SssError> {
    let mut locals = Vec::with_capacity(groups.len());
    for g in groups {
        if g.sources.is_empty() {
            return Err(SssError::MismatchedParameters("no sources".into()));
        }
        if g.weights.len() != g.sources.len() {
            return Err(SssError::MismatchedParameters("one weight per source required".into()));
        }
        let m = g.recipients.len();
        let mut local: Vec<Vec<Option<Fe>>> = vec![vec![None; m]; g.sources.len()];
        for (si, &(from, v)) in g.sources.iter().enumerate() {
            if net.is_offline(from) {
                continue;
            }
            let subs = share(v, g.t_out, m, rng)?;
            for (j, &to) in g.recipients.iter().enumerate() {
                if to == from {
                    local[si][j] = Some(subs[j].value);
                } else {
                    net.send(from, to, subs[j].value.to_bytes().to_vec());
                }
            }
        }
        locals.push(local);
    }
    net.end_round();
    let mut all = Vec::with_capacity(groups.len());
    for (g, local) in groups.iter().zip(&locals) {
        let field = g.sources[0].1.field();
        let mut out = Vec::with_capacity(g.recipients.len());
        for (j, &to) in g.recipients.iter().enumerate() {
            let mut acc = field.zero();
            for (si, &(from, _)) in g.sources.iter().enumerate() {
                let sub = match local[si][j] {
                    Some(v) => v,
                    None => {
                        let bytes = net.recv(from, to)?;
                        field.decode(&bytes).map_err(|_| NetError::Tampered { from, to })?
                    }
                };
                acc += g.weights[si] * sub;
            }
            out.push(ShamirShare { index: j as u64 + 1, value: acc, threshold: g.t_out });
        }
        all.push(out);
    }
    Ok(all)
}

/// Multiply two degree-`t` sharings into a fresh degree-`t` sharing.
///
/// `net` is addressed by share index. Exactly `n(n-1)` messages are sent.
pub fn mul_with_reduction<R: Rng + ?Sized>(
    x: &[ShamirShare],
    y: &[ShamirShare],
    net: &mut dyn Channel,
    rng: &mut R,
) -> Result<Vec<ShamirShare>, SssError> {
    let n = x.len();
    let t = x.first().map(|s| s.threshold).unwrap_or(0);
    if y.len() != n {
        return Err(SssError::MismatchedParameters("operands over different party counts".into()));
    }
    for (a, b) in x.iter().zip(y) {
        if a.index != b.index || a.threshold != t || b.threshold != t {
            return Err(SssError::MismatchedParameters(format!(
                "operand shares {} and {} do not align",
                a.index, b.index
            )));
        }
    }
    if 2 * t >= n {
        return Err(SssError::HonestMajorityViolated { t, n });
    }
    let field = x[0].value.field();
    let indices: Vec<u64> = x.iter().map(|s| s.index).collect();
    let weights = lagrange_at_zero(field, &indices)?;
    let sources: Vec<(PartyId, Fe)> =
        x.iter().zip(y).map(|(a, b)| (a.index as PartyId, a.value * b.value)).collect();
    let recipients: Vec<PartyId> = indices.iter().map(|&i| i as PartyId).collect();
    let mut out = reshare_weighted(&sources, &weights, &recipients, t, net, rng)?;
    for (s, &i) in out.iter_mut().zip(&indices) {
        s.index = i;
    }
    Ok(out)
}
