//! Committee sampling, the committee tree for hierarchical degree
//! reduction, and party-count reduction between layers.

use rand::Rng;

use super::MpcError;
use crate::dht::NodeInfo;
use crate::net::{Channel, PartyId};
use crate::sss::{lagrange_at_zero, reshare_many, ReshareGroup, ShamirShare};

/// Sampling weight `(1 + reputation) * capacity`.
pub fn committee_weight(info: &NodeInfo) -> f64 {
    (1.0 + info.reputation.max(0.0)) * info.capacity.max(0.0)
}

/// Draws `k` distinct parties, each draw proportional to weight among the
/// remaining candidates. Zero-weight candidates are never drawn.
pub fn select_committee<R: Rng + ?Sized>(
    candidates: &[(PartyId, f64)],
    k: usize,
    rng: &mut R,
) -> Result<Vec<PartyId>, MpcError> {
    let mut pool: Vec<(PartyId, f64)> = candidates.iter().copied().filter(|(_, w)| *w > 0.0 && w.is_finite()).collect();
    if pool.len() < k {
        return Err(MpcError::InsufficientNodes { need: k, have: pool.len() });
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if x < *w {
                pick = i;
                break;
            }
            x -= w;
        }
        out.push(pool.swap_remove(pick).0);
    }
    Ok(out)
}

/// Largest privacy threshold a committee of `size` supports for
/// multiplication.
pub fn committee_threshold(size: usize) -> usize {
    size.saturating_sub(1) / 2
}

/// Committees of size about `c` arranged in a tree; the root ends up holding
/// the product. A node's committee is its first child's committee, so
/// parents never add parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitteeTree {
    c: usize,
    /// `levels[0]` are the leaves. Each entry lists global party ids.
    levels: Vec<Vec<Vec<PartyId>>>,
    /// `children[k][j]`: indices into `levels[k]` merged by `levels[k+1][j]`.
    children: Vec<Vec<Vec<usize>>>,
}

/// Splits `0..len` into runs of `c`; a short tail joins the previous run.
fn groups(len: usize, c: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + c).min(len);
        if end - start < c && !out.is_empty() {
            out.last_mut().unwrap().end = end;
        } else {
            out.push(start..end);
        }
        start = end;
    }
    out
}

impl CommitteeTree {
    pub fn build(parties: &[PartyId], c: usize) -> Result<Self, MpcError> {
        if c < 2 || parties.len() < c {
            return Err(MpcError::InvalidTree { n: parties.len(), c });
        }
        let leaves: Vec<Vec<PartyId>> = groups(parties.len(), c).into_iter().map(|r| parties[r].to_vec()).collect();
        let mut levels = vec![leaves];
        let mut children = Vec::new();
        while levels.last().unwrap().len() > 1 {
            let cur = levels.last().unwrap();
            let gs = groups(cur.len(), c);
            let next: Vec<Vec<PartyId>> = gs.iter().map(|r| cur[r.start].clone()).collect();
            children.push(gs.into_iter().map(|r| r.collect()).collect());
            levels.push(next);
        }
        Ok(Self { c, levels, children })
    }

    pub fn factor(&self) -> usize {
        self.c
    }

    /// Number of levels, which is also the number of rounds.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaves(&self) -> &[Vec<PartyId>] {
        &self.levels[0]
    }

    pub fn level(&self, k: usize) -> &[Vec<PartyId>] {
        &self.levels[k]
    }

    pub fn root(&self) -> &[PartyId] {
        &self.levels.last().unwrap()[0]
    }

    fn smallest_committee(&self) -> usize {
        self.levels.iter().flatten().map(Vec::len).min().unwrap_or(0)
    }
}

/// Multiplies degree-`t` sharings held by `parties` (share `i` belongs to
/// `parties[i]` at point `i + 1`) and reduces the degree up the tree.
///
/// Leaves re-share their members' weighted local products; every internal
/// committee collects its children's re-shared values in one round. The
/// result is a sharing over the root committee at the root's threshold.
pub fn hierarchical_mul<R: Rng + ?Sized>(
    x: &[ShamirShare],
    y: &[ShamirShare],
    parties: &[PartyId],
    tree: &CommitteeTree,
    net: &mut dyn Channel,
    rng: &mut R,
) -> Result<Vec<ShamirShare>, MpcError> {
    let n = parties.len();
    if x.len() != n || y.len() != n {
        return Err(MpcError::Mismatch(format!("{} and {} shares for {n} parties", x.len(), y.len())));
    }
    let t = x.first().map(|s| s.threshold).unwrap_or(0);
    if 2 * t >= n {
        return Err(MpcError::HonestMajorityViolated { t, n });
    }
    let smallest = tree.smallest_committee();
    if t > 0 && committee_threshold(smallest) == 0 {
        return Err(MpcError::HonestMajorityViolated { t: 1, n: smallest });
    }
    let field = x[0].value.field();
    let indices: Vec<u64> = x.iter().map(|s| s.index).collect();
    let lambda = lagrange_at_zero(field, &indices)?;
    let pos = |p: PartyId| parties.iter().position(|&q| q == p);

    let leaf_groups: Vec<ReshareGroup> = tree
        .leaves()
        .iter()
        .map(|leaf| {
            let members: Vec<usize> = leaf.iter().map(|&p| pos(p).expect("tree built from parties")).collect();
            ReshareGroup {
                sources: members.iter().map(|&i| (parties[i], x[i].value * y[i].value)).collect(),
                weights: members.iter().map(|&i| lambda[i]).collect(),
                recipients: leaf.clone(),
                t_out: committee_threshold(leaf.len()),
            }
        })
        .collect();
    let mut held = reshare_many(&leaf_groups, net, rng)?;

    for k in 0..tree.depth() - 1 {
        let below = tree.level(k);
        let mut jobs = Vec::new();
        for (j, kids) in tree.children[k].iter().enumerate() {
            let mut sources = Vec::new();
            let mut weights = Vec::new();
            for &kid in kids {
                let shares = &held[kid];
                let mu = lagrange_at_zero(field, &shares.iter().map(|s| s.index).collect::<Vec<_>>())?;
                for ((p, s), w) in below[kid].iter().zip(shares).zip(mu) {
                    sources.push((*p, s.value));
                    weights.push(w);
                }
            }
            let committee = tree.level(k + 1)[j].clone();
            jobs.push(ReshareGroup { t_out: committee_threshold(committee.len()), sources, weights, recipients: committee });
        }
        held = reshare_many(&jobs, net, rng)?;
    }
    Ok(held.remove(0))
}

/// The committee a stage of `from.len()` parties hands over to: the first
/// `ceil(N / c)` members, never fewer than `floor`.
pub fn reduced_committee(from: &[PartyId], c: usize, floor: usize) -> Result<Vec<PartyId>, MpcError> {
    if c < 2 {
        return Err(MpcError::InvalidTree { n: from.len(), c });
    }
    let m = from.len().div_ceil(c);
    if m < floor {
        return Err(MpcError::BelowQuorum { parties: m, quorum: floor });
    }
    Ok(from[..m].to_vec())
}

/// Moves every sharing in `values` from `from` to `to` in one round. Each
/// source re-shares its Lagrange-weighted share at degree `t_out`.
pub fn reduce_parties<R: Rng + ?Sized>(
    values: &[Vec<ShamirShare>],
    from: &[PartyId],
    to: &[PartyId],
    t_out: usize,
    net: &mut dyn Channel,
    rng: &mut R,
) -> Result<Vec<Vec<ShamirShare>>, MpcError> {
    if t_out >= to.len() {
        return Err(MpcError::BelowQuorum { parties: to.len(), quorum: t_out + 1 });
    }
    let mut jobs = Vec::with_capacity(values.len());
    for v in values {
        if v.len() != from.len() {
            return Err(MpcError::Mismatch(format!("{} shares for {} parties", v.len(), from.len())));
        }
        let field = v[0].value.field();
        let lambda = lagrange_at_zero(field, &v.iter().map(|s| s.index).collect::<Vec<_>>())?;
        jobs.push(ReshareGroup {
            sources: from.iter().zip(v).map(|(p, s)| (*p, s.value)).collect(),
            weights: lambda,
            recipients: to.to_vec(),
            t_out,
        });
    }
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    Ok(reshare_many(&jobs, net, rng)?)
}

/// One row of the scaling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsRow {
    pub n: usize,
    pub baseline_msgs: u64,
    pub hierarchical_msgs: u64,
    pub rounds: u64,
}

/// Measures one multiplication both ways over `n` parties with tree factor
/// `c`, at the largest honest-majority threshold.
pub fn measure_mul<R: Rng + ?Sized>(n: usize, c: usize, field: crate::field::Field, rng: &mut R) -> Result<MetricsRow, MpcError> {
    use crate::net::LocalNet;
    use crate::sss::{mul_with_reduction, reconstruct, share};
    let t = committee_threshold(n);
    let (a, b) = (field.random(rng), field.random(rng));
    let x = share(a, t, n, rng)?;
    let y = share(b, t, n, rng)?;

    let mut base = LocalNet::new();
    let z = mul_with_reduction(&x, &y, &mut base, rng)?;
    if reconstruct(&z)? != a * b {
        return Err(MpcError::Mismatch("baseline product".into()));
    }

    let parties: Vec<PartyId> = (0..n).collect();
    let tree = CommitteeTree::build(&parties, c)?;
    let mut net = LocalNet::new();
    let root = hierarchical_mul(&x, &y, &parties, &tree, &mut net, rng)?;
    if reconstruct(&root)? != a * b {
        return Err(MpcError::Mismatch("hierarchical product".into()));
    }
    Ok(MetricsRow {
        n,
        baseline_msgs: base.messages_sent(),
        hierarchical_msgs: net.messages_sent(),
        rounds: net.stats().rounds.len() as u64,
    })
}

pub fn metrics_table(rows: &[MetricsRow]) -> String {
    let mut s = String::from("n,baseline_msgs,hierarchical_msgs,rounds\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.n, r.baseline_msgs, r.hierarchical_msgs, r.rounds));
    }
    s
}
