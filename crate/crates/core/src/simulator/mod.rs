//! Pathwise Monte-Carlo over the lane-contact process.
//!
//! A trial owns two ChaCha8 streams of the master seed: `2i` drives the
//! contact path (cartel membership and per-slot lane samples) and `2i + 1`
//! drives policy randomness. Every policy evaluated on trial `i` therefore
//! sees the same contacts.

mod policy;
mod trace;
mod verify;

pub use policy::{AdversaryPolicy, SlotView};
pub use trace::{
    payoff_of_trace, pivotal_cartel_count, read_traces_jsonl, replay, write_traces_jsonl,
    MechanismMode, PayoffBreakdown, SlotRecord, Trace, TraceRecord,
};
pub use verify::{
    verify_pathwise_theorems, PathwiseFailure, PathwiseReport, EXHAUSTIVE_PATTERN_LIMIT,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{Cartel, SystemInstance};
use crate::mechanism::{cartel_prefix_count, resolve_order, BundleRecord, Owner, TicketId};
use crate::ratchet::proportion_ci;

/// Slot cap as a multiple of `t*`.
pub const HORIZON_CAP_FACTOR: u32 = 64;

pub(crate) fn trial_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut contacts = ChaCha8Rng::seed_from_u64(seed);
    contacts.set_stream(2 * trial);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(2 * trial + 1);
    (contacts, policy)
}

/// A lazily extended contact path: which lanes are cartel, and the sorted
/// lanes contacted in each slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactPath {
    pub cartel_lanes: Vec<u32>,
    pub slots: Vec<Vec<u32>>,
    #[serde(skip)]
    is_cartel: Vec<bool>,
    #[serde(skip)]
    rng: Option<ChaCha8Rng>,
    #[serde(skip)]
    lanes: u32,
    #[serde(skip)]
    draws: u32,
}

impl ContactPath {
    /// Draws a uniformly random cartel of `cartel.members()` lanes.
    pub fn new(cartel: &Cartel, draws: u32, mut rng: ChaCha8Rng) -> Self {
        let n = cartel.lanes();
        let mut perm: Vec<u32> = (1..=n).collect();
        perm.shuffle(&mut rng);
        let mut is_cartel = vec![false; n as usize + 1];
        let mut cartel_lanes: Vec<u32> = perm[..cartel.members() as usize].to_vec();
        cartel_lanes.sort_unstable();
        for &l in &cartel_lanes {
            is_cartel[l as usize] = true;
        }
        ContactPath {
            cartel_lanes,
            slots: Vec::new(),
            is_cartel,
            rng: Some(rng),
            lanes: n,
            draws,
        }
    }

    pub fn is_cartel(&self, lane: u32) -> bool {
        self.is_cartel[lane as usize]
    }

    /// Contacted lanes in slot `t` (1-based), ascending.
    pub fn slot(&mut self, t: u32) -> &[u32] {
        while self.slots.len() < t as usize {
            let rng = self.rng.as_mut().expect("path generator present");
            let mut lanes: Vec<u32> =
                rand::seq::index::sample(rng, self.lanes as usize, self.draws as usize)
                    .into_iter()
                    .map(|i| i as u32 + 1)
                    .collect();
            lanes.sort_unstable();
            self.slots.push(lanes);
        }
        &self.slots[t as usize - 1]
    }

    pub fn cartel_contacts(&mut self, t: u32) -> u32 {
        let lanes = self.slot(t).to_vec();
        lanes.iter().filter(|&&l| self.is_cartel(l)).count() as u32
    }
}

/// Output of the trace builder: the trace plus the withheld cartel bundles.
pub(crate) struct Simulated {
    pub trace: Trace,
    pub withheld: Vec<BundleRecord>,
}

/// Raw outcome of one path before ordering and scoring.
pub(crate) struct PathRun {
    pub slots: Vec<SlotRecord>,
    pub onchain: Vec<BundleRecord>,
    pub withheld: Vec<BundleRecord>,
    pub inclusion_time: Option<u32>,
    /// Cap reached without decoding.
    pub truncated: bool,
}

/// Runs a path until `max(T, t*)` or the cap. `decide` returns the
/// inclusion mask over the slot's cartel bundles in resolution order.
pub(crate) fn simulate(
    path: &mut ContactPath,
    instance: &SystemInstance,
    tx: u64,
    mut decide: impl FnMut(SlotView, usize) -> Vec<bool>,
) -> Result<PathRun> {
    let kappa = instance.kappa() as u64;
    let t_star = instance.t_star();
    let cap = HORIZON_CAP_FACTOR * t_star;
    let mut onchain = Vec::new();
    let mut withheld = Vec::new();
    let mut slots = Vec::new();
    let (mut u, mut withheld_total) = (0u64, 0u32);
    let mut inclusion_time = None;
    for t in 1..=cap {
        let lanes = path.slot(t).to_vec();
        let mut bundles: Vec<BundleRecord> = lanes
            .iter()
            .map(|&lane| {
                let owner = if path.is_cartel(lane) {
                    Owner::Cartel
                } else {
                    Owner::Honest
                };
                BundleRecord::new(
                    TicketId {
                        tx,
                        slot: t,
                        lane,
                        draw: 0,
                    },
                    owner,
                    true,
                )
            })
            .collect();
        bundles.sort_by_key(|b| (b.lane, b.ticket_hash));
        let cartel_idx: Vec<usize> = (0..bundles.len())
            .filter(|&i| bundles[i].owner == Owner::Cartel)
            .collect();
        let view = SlotView {
            slot: t,
            t_star,
            slack: instance.slack(),
            withheld_so_far: withheld_total,
        };
        let mask = decide(view, cartel_idx.len());
        if mask.len() != cartel_idx.len() {
            return Err(Error::param(
                "policy",
                "inclusion mask length differs from contacts",
            ));
        }
        let mut included = 0u32;
        let mut keep = vec![true; bundles.len()];
        for (&i, &inc) in cartel_idx.iter().zip(&mask) {
            if inc {
                included += 1;
            } else {
                keep[i] = false;
                withheld.push(bundles[i]);
            }
        }
        if t <= t_star {
            withheld_total += cartel_idx.len() as u32 - included;
        }
        let honest = bundles.len() as u32 - cartel_idx.len() as u32;
        onchain.extend(
            bundles
                .into_iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(b, _)| b),
        );
        slots.push(SlotRecord {
            slot: t,
            cartel_contacts: cartel_idx.len() as u32,
            honest_contacts: honest,
            cartel_included: included,
        });
        u += (honest + included) as u64;
        if inclusion_time.is_none() && u >= kappa {
            inclusion_time = Some(t);
        }
        if inclusion_time.is_some() && t >= t_star {
            break;
        }
    }
    Ok(PathRun {
        slots,
        onchain,
        withheld,
        inclusion_time,
        truncated: inclusion_time.is_none(),
    })
}

pub(crate) fn build_trace(
    path: &mut ContactPath,
    instance: &SystemInstance,
    cartel: &Cartel,
    policy: &AdversaryPolicy,
    seed: u64,
    trial: u64,
    policy_rng: &mut ChaCha8Rng,
) -> Result<Simulated> {
    let PathRun {
        slots,
        onchain,
        withheld,
        inclusion_time,
        truncated,
    } = simulate(path, instance, trial, |view, a| {
        policy.decide(view, a, policy_rng)
    })?;
    let inclusion_order = resolve_order(&onchain)?;
    let withheld_at_horizon = slots
        .iter()
        .take(instance.t_star() as usize)
        .map(|s| s.cartel_contacts - s.cartel_included)
        .sum::<u32>();
    let pivotal_cartel_count = if inclusion_time.is_some() {
        cartel_prefix_count(&inclusion_order, instance.kappa())
    } else {
        0
    };
    Ok(Simulated {
        trace: Trace {
            instance: *instance,
            cartel_size: cartel.members(),
            policy: policy.clone(),
            seed,
            trial,
            slots,
            inclusion_order,
            inclusion_time,
            withheld_at_horizon,
            pivotal_cartel_count,
            delayed: inclusion_time.is_none_or(|t| t > instance.t_star()),
            truncated,
        },
        withheld,
    })
}

/// Trial `trial` of `seed` under `policy`.
pub fn run_trace(
    instance: &SystemInstance,
    cartel: &Cartel,
    policy: &AdversaryPolicy,
    seed: u64,
    trial: u64,
) -> Result<Trace> {
    cartel.check_instance(instance)?;
    policy.validate()?;
    let (contacts, mut policy_rng) = trial_rngs(seed, trial);
    let mut path = ContactPath::new(cartel, instance.contacts_per_slot(), contacts);
    Ok(build_trace(
        &mut path,
        instance,
        cartel,
        policy,
        seed,
        trial,
        &mut policy_rng,
    )?
    .trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub policy: AdversaryPolicy,
    pub trials: u64,
    pub seed: u64,
    pub delayed: u64,
    pub frequency: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte-Carlo delay frequency with its binomial standard error.
pub fn estimate_delay(
    instance: &SystemInstance,
    cartel: &Cartel,
    policy: &AdversaryPolicy,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<DelayEstimate> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    cartel.check_instance(instance)?;
    policy.validate()?;
    let flags: Vec<bool> = map_indexed(exec, trials as usize, |i| {
        run_trace(instance, cartel, policy, seed, i as u64).map(|t| t.delayed)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let delayed = flags.iter().filter(|d| **d).count() as u64;
    let (frequency, stderr, ci_low, ci_high) = proportion_ci(delayed, trials);
    Ok(DelayEstimate {
        policy: policy.clone(),
        trials,
        seed,
        delayed,
        frequency,
        stderr,
        ci_low,
        ci_high,
    })
}

/// Runs `trials` traces and scores each one.
#[allow(clippy::too_many_arguments)]
pub fn simulate_records(
    instance: &SystemInstance,
    cartel: &Cartel,
    policy: &AdversaryPolicy,
    econ: &crate::incentives::EconParams,
    mode: MechanismMode,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TraceRecord>> {
    map_indexed(exec, trials as usize, |i| {
        let trace = run_trace(instance, cartel, policy, seed, i as u64)?;
        let payoff = payoff_of_trace(&trace, econ, mode)?;
        Ok(TraceRecord {
            trace,
            econ: econ.clone(),
            mode,
            payoff,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::exact_q0;
    use crate::incentives::EconParams;

    fn setup(kappa: u32) -> (SystemInstance, Cartel) {
        (
            SystemInstance::from_kappa(100, 20, kappa).unwrap(),
            Cartel::from_fraction(100, 0.2).unwrap(),
        )
    }

    #[test]
    fn full_include_is_on_time() {
        let (i, c) = setup(30);
        for trial in 0..200 {
            let t = run_trace(&i, &c, &AdversaryPolicy::FullInclude, 5, trial).unwrap();
            assert_eq!(t.inclusion_time, Some(2));
            assert!(!t.delayed);
            t.check_invariants().unwrap();
        }
    }

    #[test]
    fn knife_edge_full_withhold() {
        let (i, c) = setup(20);
        for trial in 0..200 {
            let t = run_trace(&i, &c, &AdversaryPolicy::FullWithhold, 9, trial).unwrap();
            assert_eq!(t.delayed, t.slots[0].cartel_contacts >= 1);
            t.check_invariants().unwrap();
        }
    }

    #[test]
    fn minimal_sabotage_withholds_slack_plus_one() {
        let (i, c) = setup(30);
        for trial in 0..300 {
            let t = run_trace(&i, &c, &AdversaryPolicy::MinimalSabotage, 2, trial).unwrap();
            let available: u32 = t.slots.iter().take(2).map(|s| s.cartel_contacts).sum();
            assert_eq!(t.withheld_at_horizon, available.min(i.slack() + 1));
            let later: u32 = t
                .slots
                .iter()
                .skip(2)
                .map(|s| s.cartel_contacts - s.cartel_included)
                .sum();
            assert_eq!(later, 0);
            t.check_invariants().unwrap();
        }
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let (i, c) = setup(50);
        let p = AdversaryPolicy::StationaryW { w: 0.5 };
        assert_eq!(
            run_trace(&i, &c, &p, 1, 7).unwrap(),
            run_trace(&i, &c, &p, 1, 7).unwrap()
        );
        let a = estimate_delay(&i, &c, &p, 500, 3, Execution::Sequential).unwrap();
        let b = estimate_delay(&i, &c, &p, 500, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_withhold_matches_exact() {
        let (i, c) = setup(30);
        let est = estimate_delay(
            &i,
            &c,
            &AdversaryPolicy::FullWithhold,
            20_000,
            17,
            Execution::Parallel,
        )
        .unwrap();
        let q0 = exact_q0(&i, &c).unwrap();
        assert!(
            (est.frequency - q0).abs() <= 3.0 * est.stderr,
            "{} vs {q0}",
            est.frequency
        );
    }

    #[test]
    fn empty_cartel_never_delays() {
        let i = SystemInstance::from_kappa(100, 20, 20).unwrap();
        let c = Cartel::from_count(100, 0).unwrap();
        let est = estimate_delay(
            &i,
            &c,
            &AdversaryPolicy::FullWithhold,
            500,
            1,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(est.frequency, 0.0);
    }

    #[test]
    fn payoffs() {
        let (i, c) = setup(30);
        let econ = EconParams::normalized(1.0, 100.0, 0.99, 60.0).unwrap();
        let t = run_trace(&i, &c, &AdversaryPolicy::FullWithhold, 4, 0).unwrap();
        let p = payoff_of_trace(&t, &econ, MechanismMode::ExactRational).unwrap();
        assert_eq!(p.fee_revenue, 0.0);
        assert_eq!(p.bounty_revenue, 0.0);
        let t = run_trace(&i, &c, &AdversaryPolicy::FullInclude, 4, 0).unwrap();
        let exact = payoff_of_trace(&t, &econ, MechanismMode::ExactRational).unwrap();
        let float = payoff_of_trace(&t, &econ, MechanismMode::Float).unwrap();
        assert!((exact.bounty_revenue - float.bounty_revenue).abs() < 1e-12);
        assert_eq!(
            exact.total,
            exact.fee_revenue + exact.bounty_revenue + exact.mev_option
        );
        let zero =
            payoff_of_trace(&t, &econ.with_bounty(0.0), MechanismMode::ExactRational).unwrap();
        assert_eq!(zero.bounty_revenue, 0.0);
    }

    #[test]
    fn jsonl_roundtrip_and_replay() {
        let (i, c) = setup(30);
        let econ = EconParams::normalized(1.0, 100.0, 0.99, 60.0).unwrap();
        let recs = simulate_records(
            &i,
            &c,
            &AdversaryPolicy::StationaryW { w: 0.3 },
            &econ,
            MechanismMode::ExactRational,
            20,
            8,
            Execution::Parallel,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_traces_jsonl(&recs, &mut buf).unwrap();
        let back = read_traces_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        assert_eq!(replay(&back).unwrap(), 20);
        let mut bad = back.clone();
        bad[3].payoff.total += 1e-9;
        assert!(matches!(
            replay(&bad),
            Err(Error::ReplayMismatch { index: 3, .. })
        ));
    }
}
