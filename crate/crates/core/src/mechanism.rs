//! PIVOT-K: pivotal-prefix bounty allocation over the deterministic
//! resolution order, plus the rank-weight rule class and its removal floors.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Who runs the lane a bundle landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Honest,
    Cartel,
}

/// Synthetic single-use ticket: transaction, slot, lane and draw index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TicketId {
    pub tx: u64,
    pub slot: u32,
    pub lane: u32,
    pub draw: u32,
}

impl TicketId {
    /// Deterministic 64-bit mix standing in for the ticket hash.
    pub fn hash64(&self) -> u64 {
        let mut h = splitmix64(self.tx ^ 0x5ed2_a7c4_91b3_0e6f);
        h = splitmix64(h ^ self.slot as u64);
        h = splitmix64(h ^ ((self.lane as u64) << 32 | self.draw as u64));
        h
    }
}

impl std::fmt::Display for TicketId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}:{}", self.tx, self.slot, self.lane, self.draw)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One on-chain occurrence of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BundleRecord {
    pub slot: u32,
    pub lane: u32,
    pub ticket_id: TicketId,
    pub ticket_hash: u64,
    pub owner: Owner,
    pub admissible: bool,
}

impl BundleRecord {
    pub fn new(ticket_id: TicketId, owner: Owner, admissible: bool) -> Self {
        BundleRecord {
            slot: ticket_id.slot,
            lane: ticket_id.lane,
            ticket_id,
            ticket_hash: ticket_id.hash64(),
            owner,
            admissible,
        }
    }

    fn sort_key(&self) -> (u32, u32, u64, TicketId, Owner) {
        (
            self.slot,
            self.lane,
            self.ticket_hash,
            self.ticket_id,
            self.owner,
        )
    }
}

/// Admissible records in `(slot, lane, ticket_hash)` order, each ticket
/// redeemed at most once.
///
/// Two distinct tickets with equal hashes make the order ambiguous and are
/// rejected.
pub fn resolve_order(records: &[BundleRecord]) -> Result<Vec<BundleRecord>> {
    let mut admissible: Vec<BundleRecord> =
        records.iter().filter(|r| r.admissible).copied().collect();
    admissible.sort_by_key(BundleRecord::sort_key);
    for pair in admissible.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.slot == b.slot
            && a.lane == b.lane
            && a.ticket_hash == b.ticket_hash
            && a.ticket_id != b.ticket_id
        {
            return Err(Error::TicketHashCollision {
                first: a.ticket_id.to_string(),
                second: b.ticket_id.to_string(),
            });
        }
    }
    let mut seen = HashSet::with_capacity(admissible.len());
    admissible.retain(|r| seen.insert(r.ticket_id));
    Ok(admissible)
}

/// Number of cartel-owned bundles among the first `kappa` entries.
pub fn cartel_prefix_count(ordered: &[BundleRecord], kappa: u32) -> u32 {
    ordered
        .iter()
        .take(kappa as usize)
        .filter(|r| r.owner == Owner::Cartel)
        .count() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotalEntry {
    pub rank: u32,
    pub lane: u32,
    pub owner: Owner,
    pub index_count: u32,
    pub payment: BigRational,
}

/// Bounty payments over the first `kappa` resolved bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotalAllocation {
    pub ordered_prefix: Vec<PivotalEntry>,
    pub total_paid: BigRational,
    pub kappa: u32,
    pub final_bundle_indices: u32,
}

/// Exported allocation row; numerator and denominator are decimal strings
/// so arbitrary budgets stay lossless.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub rank: u32,
    pub lane: u32,
    pub owner: Owner,
    pub payment_numerator: String,
    pub payment_denominator: String,
}

impl PivotalAllocation {
    pub fn paid_to(&self, owner: Owner) -> BigRational {
        self.ordered_prefix
            .iter()
            .filter(|e| e.owner == owner)
            .fold(BigRational::zero(), |acc, e| acc + &e.payment)
    }

    pub fn total_paid_f64(&self) -> f64 {
        self.total_paid.to_f64().unwrap_or(f64::NAN)
    }

    pub fn rows(&self) -> Vec<AllocationRow> {
        self.ordered_prefix
            .iter()
            .map(|e| AllocationRow {
                rank: e.rank,
                lane: e.lane,
                owner: e.owner,
                payment_numerator: e.payment.numer().to_string(),
                payment_denominator: e.payment.denom().to_string(),
            })
            .collect()
    }
}

/// PIVOT-K payments: `s B / K` to each of the first `kappa - 1` bundles and
/// `r_idx B / K` to the `kappa`-th, where `r_idx = K - (kappa - 1) s`.
pub fn pivotal_allocation(
    ordered: &[BundleRecord],
    decode_threshold: u32,
    symbols_per_bundle: u32,
    budget: &BigRational,
) -> Result<PivotalAllocation> {
    if decode_threshold == 0 || symbols_per_bundle == 0 {
        return Err(Error::param("K, s", "must be positive"));
    }
    if budget.is_negative() {
        return Err(Error::param("B", "bounty budget must be nonnegative"));
    }
    let kappa = decode_threshold.div_ceil(symbols_per_bundle);
    if ordered.len() < kappa as usize {
        return Err(Error::DecodeNotReached {
            available: ordered.len(),
            required: kappa,
        });
    }
    let r_idx = decode_threshold - (kappa - 1) * symbols_per_bundle;
    let per_index = budget / BigRational::from_integer(BigInt::from(decode_threshold));
    let mut total = BigRational::zero();
    let ordered_prefix = ordered[..kappa as usize]
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let index_count = if i + 1 == kappa as usize {
                r_idx
            } else {
                symbols_per_bundle
            };
            let payment = &per_index * BigRational::from_integer(BigInt::from(index_count));
            total += &payment;
            PivotalEntry {
                rank: i as u32 + 1,
                lane: rec.lane,
                owner: rec.owner,
                index_count,
                payment,
            }
        })
        .collect();
    Ok(PivotalAllocation {
        ordered_prefix,
        total_paid: total,
        kappa,
        final_bundle_indices: r_idx,
    })
}

/// Budget-capped rank weights over the pivotal prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightRule {
    weights: Vec<BigRational>,
}

impl WeightRule {
    /// Nonnegative rational weights summing to exactly 1.
    pub fn new(weights: Vec<BigRational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weights", "need at least one rank"));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::param("weights", "negative weight"));
        }
        let total = weights.iter().fold(BigRational::zero(), |a, w| a + w);
        if !total.is_one() {
            return Err(Error::param(
                "weights",
                format!("weights sum to {total}, not 1"),
            ));
        }
        Ok(WeightRule { weights })
    }

    /// PIVOT-K's flat rule `1 / kappa`.
    pub fn uniform(kappa: u32) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        let w = BigRational::new(BigInt::one(), BigInt::from(kappa));
        Ok(WeightRule {
            weights: vec![w; kappa as usize],
        })
    }

    /// Weights proportional to `decay^(slot-1)` for the slot each rank was
    /// finalised in. Representable only; no incentive analysis is attached.
    pub fn time_decaying(rank_slots: &[u32], decay: &BigRational) -> Result<Self> {
        if rank_slots.is_empty() || rank_slots.contains(&0) {
            return Err(Error::param("rank_slots", "need positive slot numbers"));
        }
        if !decay.is_positive() || decay > &BigRational::one() {
            return Err(Error::param("decay", "must lie in (0, 1]"));
        }
        let raw: Vec<BigRational> = rank_slots
            .iter()
            .map(|&t| num_traits::pow(decay.clone(), t as usize - 1))
            .collect();
        let total = raw.iter().fold(BigRational::zero(), |a, w| a + w);
        WeightRule::new(raw.into_iter().map(|w| w / &total).collect())
    }

    pub fn kappa(&self) -> u32 {
        self.weights.len() as u32
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] == w[1])
    }
}

/// `S_d(w)`: the sum of the `d` smallest weights.
pub fn removal_floor(rule: &WeightRule, d: u32) -> Result<BigRational> {
    if d == 0 || d > rule.kappa() {
        return Err(Error::param(
            "d",
            format!("removal count {d} outside [1, {}]", rule.kappa()),
        ));
    }
    let mut sorted = rule.weights.clone();
    sorted.sort();
    Ok(sorted
        .into_iter()
        .take(d as usize)
        .fold(BigRational::zero(), |a, w| a + w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub kappa: u32,
    pub removals: u32,
    pub rules_checked: usize,
    /// Rules whose floor exceeds `d / kappa`.
    pub bound_violations: usize,
    /// Non-uniform rules attaining `d / kappa` exactly.
    pub non_uniform_equalities: usize,
    /// Uniform rules falling short of `d / kappa`.
    pub uniform_shortfalls: usize,
    pub passed: bool,
}

/// Checks `S_d(w) <= d / kappa` for every trial rule, with equality exactly
/// for the uniform rule, in exact rational arithmetic.
pub fn minimax_certificate(
    kappa: u32,
    d: u32,
    trial_rules: &[WeightRule],
) -> Result<MinimaxReport> {
    let target = BigRational::new(BigInt::from(d), BigInt::from(kappa));
    let mut report = MinimaxReport {
        kappa,
        removals: d,
        rules_checked: trial_rules.len(),
        bound_violations: 0,
        non_uniform_equalities: 0,
        uniform_shortfalls: 0,
        passed: false,
    };
    for rule in trial_rules {
        if rule.kappa() != kappa {
            return Err(Error::param(
                "trial_rules",
                "rule length differs from kappa",
            ));
        }
        let floor = removal_floor(rule, d)?;
        let uniform = rule.is_uniform();
        if floor > target {
            report.bound_violations += 1;
        } else if floor == target && !uniform {
            report.non_uniform_equalities += 1;
        } else if floor < target && uniform {
            report.uniform_shortfalls += 1;
        }
    }
    report.passed = report.bound_violations == 0
        && report.non_uniform_equalities == 0
        && report.uniform_shortfalls == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn rec(slot: u32, lane: u32, draw: u32, owner: Owner) -> BundleRecord {
        BundleRecord::new(
            TicketId {
                tx: 1,
                slot,
                lane,
                draw,
            },
            owner,
            true,
        )
    }

    #[test]
    fn duplicate_ticket_dropped() {
        let a = rec(1, 3, 0, Owner::Honest);
        let out = resolve_order(&[a, a]).unwrap();
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn sorted_input_is_identity() {
        let input: Vec<_> = (1..=6)
            .map(|l| rec(1 + l / 3, l, 0, Owner::Honest))
            .collect();
        let mut sorted = input.clone();
        sorted.sort_by_key(BundleRecord::sort_key);
        assert_eq!(resolve_order(&sorted).unwrap(), sorted);
    }

    #[test]
    fn non_admissible_ignored() {
        let a = rec(1, 1, 0, Owner::Honest);
        let mut b = rec(1, 2, 0, Owner::Cartel);
        b.admissible = false;
        assert_eq!(resolve_order(&[b, a]).unwrap(), vec![a]);
    }

    #[test]
    fn hash_collision_rejected() {
        let a = rec(1, 1, 0, Owner::Honest);
        let mut b = rec(1, 1, 1, Owner::Honest);
        b.ticket_hash = a.ticket_hash;
        assert!(matches!(
            resolve_order(&[a, b]),
            Err(Error::TicketHashCollision { .. })
        ));
    }

    #[test]
    fn divisible_payments() {
        let ordered: Vec<_> = (1..=5).map(|l| rec(1, l, 0, Owner::Honest)).collect();
        let alloc = pivotal_allocation(&ordered, 8, 2, &rat(100, 1)).unwrap();
        assert_eq!(alloc.kappa, 4);
        for e in &alloc.ordered_prefix {
            assert_eq!(e.payment, rat(25, 1));
        }
        assert_eq!(alloc.total_paid, rat(100, 1));
    }

    #[test]
    fn non_divisible_payments() {
        let ordered: Vec<_> = (1..=3).map(|l| rec(1, l, 0, Owner::Honest)).collect();
        let alloc = pivotal_allocation(&ordered, 10, 4, &rat(1, 1)).unwrap();
        let pays: Vec<_> = alloc
            .ordered_prefix
            .iter()
            .map(|e| e.payment.clone())
            .collect();
        assert_eq!(pays, vec![rat(2, 5), rat(2, 5), rat(1, 5)]);
        assert_eq!(alloc.final_bundle_indices, 2);
        let rows = alloc.rows();
        assert_eq!(rows[2].payment_numerator, "1");
        assert_eq!(rows[2].payment_denominator, "5");
    }

    #[test]
    fn short_prefix_is_decode_failure() {
        let ordered: Vec<_> = (1..=2).map(|l| rec(1, l, 0, Owner::Honest)).collect();
        assert!(matches!(
            pivotal_allocation(&ordered, 3, 1, &rat(1, 1)),
            Err(Error::DecodeNotReached { .. })
        ));
    }

    #[test]
    fn removal_floors() {
        let u = WeightRule::uniform(5).unwrap();
        for d in 1..=5 {
            assert_eq!(removal_floor(&u, d).unwrap(), rat(d as i64, 5));
        }
        let mut w = vec![BigRational::zero(); 4];
        w[0] = BigRational::one();
        let spike = WeightRule::new(w).unwrap();
        assert_eq!(removal_floor(&spike, 1).unwrap(), BigRational::zero());
        assert!(removal_floor(&u, 0).is_err());
        assert!(removal_floor(&u, 6).is_err());
    }

    #[test]
    fn removal_floor_matches_subset_minimum() {
        let rule = WeightRule::new(vec![
            rat(1, 10),
            rat(3, 10),
            rat(1, 20),
            rat(7, 20),
            rat(1, 5),
        ])
        .unwrap();
        let w = rule.weights();
        let mut best: Option<BigRational> = None;
        for i in 0..5 {
            for j in i + 1..5 {
                let s = &w[i] + &w[j];
                best = Some(match best {
                    Some(b) if b <= s => b,
                    _ => s,
                });
            }
        }
        assert_eq!(removal_floor(&rule, 2).unwrap(), best.unwrap());
    }

    #[test]
    fn certificate_edges() {
        let one = WeightRule::uniform(1).unwrap();
        let r = minimax_certificate(1, 1, std::slice::from_ref(&one)).unwrap();
        assert!(r.passed);
        assert_eq!(removal_floor(&one, 1).unwrap(), BigRational::one());

        let eps = rat(1, 1000);
        let mut w = WeightRule::uniform(6).unwrap().weights().to_vec();
        w[0] = &w[0] + &eps;
        w[1] = &w[1] - &eps;
        let perturbed = WeightRule::new(w).unwrap();
        assert!(removal_floor(&perturbed, 2).unwrap() < rat(2, 6));
        let r = minimax_certificate(6, 2, &[WeightRule::uniform(6).unwrap(), perturbed]).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn invalid_rules() {
        assert!(WeightRule::new(vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(WeightRule::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(WeightRule::uniform(0).is_err());
    }

    #[test]
    fn time_decaying_rule() {
        let r = WeightRule::time_decaying(&[1, 1, 2], &rat(1, 2)).unwrap();
        assert_eq!(r.weights(), &[rat(2, 5), rat(2, 5), rat(1, 5)]);
        let flat = WeightRule::time_decaying(&[1, 2, 3], &BigRational::one()).unwrap();
        assert!(flat.is_uniform());
    }
}
