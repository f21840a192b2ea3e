//! Invariants as properties over randomised inputs.

use num_bigint::BigInt;
use num_rational::BigRational;
use pivotk_core::delay::{exact_q0, fluid_delay_report, knife_edge_q0};
use pivotk_core::incentives::{
    coalition_sufficient_bounty, ic_stationary_check, knapsack_select, knife_edge_bounty_threshold,
    AttackItem, EconParams,
};
use pivotk_core::intra_slot::{q_micro, rho_bar, rho_deadline, ArrivalModel, RaceModel};
use pivotk_core::mechanism::{
    cartel_prefix_count, pivotal_allocation, resolve_order, BundleRecord, Owner, TicketId,
};
use pivotk_core::probability::{chernoff_tail_bound, convolve_iid, HypergeomLaw, TailSide};
use pivotk_core::ratchet::{
    first_slot_withheld_law, honest_miss_delay_bound, q_rat_first_slot, RatchetState,
};
use pivotk_core::simulator::{run_trace, AdversaryPolicy};
use pivotk_core::{Cartel, SystemInstance};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = (u32, u32, u32)> {
    (1u32..=400).prop_flat_map(|n| (Just(n), 0..=n, 0..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_sums_to_one((n, b, m) in (1u32..=10_000).prop_flat_map(|n| (Just(n), 0..=n, 0..=n))) {
        let law = HypergeomLaw::new(n, b, m).unwrap();
        let total: f64 = law.distribution().masses().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_monotone((n, b, m) in law(), r in 0i64..50) {
        let law = HypergeomLaw::new(n, b, m).unwrap();
        prop_assert!(law.tail_ge(r + 1) <= law.tail_ge(r) + 1e-15);
        if b < n {
            let richer = HypergeomLaw::new(n, b + 1, m).unwrap();
            prop_assert!(law.tail_ge(r) <= richer.tail_ge(r) + 1e-12);
        }
    }

    #[test]
    fn convolution_mean((n, b, m) in law(), t in 1u32..8) {
        let law = HypergeomLaw::new(n, b, m).unwrap();
        let sum = convolve_iid(&law, t).unwrap();
        let want = t as f64 * m as f64 * b as f64 / n as f64;
        prop_assert!((sum.mean() - want).abs() < 1e-9 * want.max(1.0));
    }

    #[test]
    fn chernoff_dominates(t in 1u32..6, m in 1u32..25, b in 1u32..50, extra in 1u32..40) {
        let n = 100;
        let beta = b as f64 / n as f64;
        let threshold = ((t * m) as f64 * beta).floor() as u32 + extra.min(t * m);
        let theta = threshold as f64 / (t * m) as f64;
        prop_assume!(theta > beta && theta <= 1.0);
        let exact = convolve_iid(&HypergeomLaw::new(n, b, m).unwrap(), t).unwrap().tail_ge(threshold as i64);
        let bound = chernoff_tail_bound(t, m, theta, beta, TailSide::Upper).unwrap();
        prop_assert!(exact <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn geometry_sawtooth(m in 1u32..40, kappa in 1u32..400) {
        prop_assume!(kappa <= 10 * m);
        let inst = SystemInstance::from_kappa(1000, m, kappa).unwrap();
        prop_assert_eq!(inst.slack() == 0, kappa % m == 0);
        prop_assert_eq!(inst.final_deficit() + inst.slack(), m);
        let next = SystemInstance::from_kappa(1000, m, kappa + 1).unwrap();
        if kappa % m == 0 {
            prop_assert_eq!(next.slack(), m - 1);
        } else {
            prop_assert_eq!(next.slack(), inst.slack() - 1);
        }
    }

    #[test]
    fn bundle_indices(k in 1u32..2000, s in 1u32..64) {
        let inst = SystemInstance::new(4000, 50, s, k).unwrap();
        let r_idx = inst.final_bundle_indices();
        prop_assert!(r_idx >= 1 && r_idx <= s);
        prop_assert_eq!((inst.kappa() - 1) * s + r_idx, k);
    }

    #[test]
    fn q0_monotone_in_beta(kappa in 1u32..120, b in 0u32..99) {
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        let lo = exact_q0(&inst, &Cartel::from_count(100, b).unwrap()).unwrap();
        let hi = exact_q0(&inst, &Cartel::from_count(100, b + 1).unwrap()).unwrap();
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn knife_edge_closed_form(m in 1u32..30, t in 1u32..6, b in 0u32..=300, extra in 0u32..=970) {
        let n = (m + extra).max(b);
        let inst = SystemInstance::from_kappa(n, m, t * m).unwrap();
        let cartel = Cartel::from_count(n, b.min(n)).unwrap();
        let closed = knife_edge_q0(&inst, &cartel).unwrap();
        prop_assert!((closed - exact_q0(&inst, &cartel).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fluid_delay_nonincreasing_in_w(kappa in 1u32..120, w in 0.0f64..0.98) {
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        let cartel = Cartel::from_count(100, 20).unwrap();
        let a = fluid_delay_report(&inst, &cartel, w).unwrap().exact_probability;
        let b = fluid_delay_report(&inst, &cartel, w + 0.01).unwrap().exact_probability;
        prop_assert!(b <= a + 1e-12);
    }
}

fn records(owners: &[bool], slots: &[u32]) -> Vec<BundleRecord> {
    owners
        .iter()
        .zip(slots)
        .enumerate()
        .map(|(i, (&cartel, &slot))| {
            let owner = if cartel { Owner::Cartel } else { Owner::Honest };
            BundleRecord::new(
                TicketId {
                    tx: 9,
                    slot,
                    lane: i as u32,
                    draw: 0,
                },
                owner,
                true,
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn allocation_conserves(k in 1u32..300, s in 1u32..20, num in 0i64..1_000_000, den in 1i64..1000) {
        let kappa = k.div_ceil(s);
        let recs = records(&vec![false; kappa as usize], &vec![1; kappa as usize]);
        let budget = BigRational::new(BigInt::from(num), BigInt::from(den));
        let alloc = pivotal_allocation(&recs, k, s, &budget).unwrap();
        prop_assert_eq!(&alloc.total_paid, &budget);
        let float = alloc.total_paid_f64();
        prop_assert!((float - num as f64 / den as f64).abs() <= 1e-12 * float.abs().max(1.0));
    }

    #[test]
    fn order_is_permutation_invariant(
        owners in prop::collection::vec(any::<bool>(), 1..30),
        seed in any::<u64>(),
    ) {
        let slots: Vec<u32> = (0..owners.len() as u64).map(|i| 1 + ((seed >> (i % 60)) & 3) as u32).collect();
        let recs = records(&owners, &slots);
        let mut shuffled = recs.clone();
        shuffled.reverse();
        shuffled.rotate_left((seed % owners.len() as u64) as usize);
        prop_assert_eq!(resolve_order(&recs).unwrap(), resolve_order(&shuffled).unwrap());
        let budget = BigRational::from_integer(BigInt::from(77));
        let k = owners.len() as u32;
        prop_assert_eq!(
            pivotal_allocation(&resolve_order(&recs).unwrap(), k, 1, &budget).unwrap(),
            pivotal_allocation(&resolve_order(&shuffled).unwrap(), k, 1, &budget).unwrap()
        );
    }

    #[test]
    fn inadmissible_records_ignored(owners in prop::collection::vec(any::<bool>(), 1..20), junk in 1usize..10) {
        let recs = records(&owners, &vec![2; owners.len()]);
        let mut noisy = recs.clone();
        for j in 0..junk {
            // Earlier slot and any owner: would be first if it counted.
            noisy.push(BundleRecord::new(TicketId { tx: 9, slot: 1, lane: 500 + j as u32, draw: 0 }, Owner::Cartel, false));
        }
        prop_assert_eq!(resolve_order(&recs).unwrap(), resolve_order(&noisy).unwrap());
    }

    /// Adding earlier admissible cartel records never lowers the cartel's
    /// pivotal count; all insertion subsets for `kappa <= 6`.
    #[test]
    fn prefix_monotone(owners in prop::collection::vec(any::<bool>(), 1..=6), extra in 1usize..=4) {
        let kappa = owners.len() as u32;
        let base = records(&owners, &vec![3; owners.len()]);
        let before = cartel_prefix_count(&resolve_order(&base).unwrap(), kappa);
        for mask in 1u32..(1 << extra) {
            let mut aug = base.clone();
            for j in 0..extra {
                if mask >> j & 1 == 1 {
                    let slot = 1 + (j as u32 % 3);
                    aug.push(BundleRecord::new(TicketId { tx: 9, slot, lane: 100 + j as u32, draw: 0 }, Owner::Cartel, true));
                }
            }
            let after = cartel_prefix_count(&resolve_order(&aug).unwrap(), kappa);
            prop_assert!(after >= before);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knife_threshold_monotone(av in 10.0f64..1000.0, q0 in 0.05f64..0.99, step in 0.001f64..0.05) {
        let econ = EconParams::normalized(1.0, av, 0.99, 0.0).unwrap();
        let richer = EconParams::normalized(1.0, av * 1.1, 0.99, 0.0).unwrap();
        let at = |e: &EconParams, kappa: u32, q: f64| {
            let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
            knife_edge_bounty_threshold(&inst, 0.2, e, q).unwrap().b_min
        };
        prop_assert!(at(&econ, 40, q0) <= at(&richer, 40, q0));
        prop_assert!(at(&econ, 40, q0) <= at(&econ, 40, (q0 + step).min(1.0)) + 1e-9);
        // Larger kappa dilutes the pivotal share lost by delaying.
        prop_assert!(at(&econ, 40, q0) <= at(&econ, 60, q0) + 1e-9);
    }

    #[test]
    fn coalition_bounty_limits(kappa in 1u32..120, av in 1.0f64..500.0) {
        prop_assume!(kappa % 20 != 0);
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        let g: f64 = 0.99;
        let free = EconParams::normalized(0.0, av, g, 0.0).unwrap();
        let want = kappa as f64 * av * g.powi(inst.t_star() as i32);
        prop_assert!((coalition_sufficient_bounty(&inst, &free).unwrap() - want).abs() <= 1e-9 * want);
        let f = av * g.powi(inst.t_star() as i32) / (inst.slack() + 1) as f64;
        let dear = EconParams::normalized(f * 1.0001, av, g, 0.0).unwrap();
        prop_assert_eq!(coalition_sufficient_bounty(&inst, &dear), Some(0.0));
    }

    #[test]
    fn stationary_ic_monotone_in_bounty(b in 0.0f64..5000.0, w in 0.0f64..0.99, kappa in 200u32..800) {
        let inst = SystemInstance::from_kappa(1000, 20, kappa).unwrap();
        let econ = EconParams::normalized(1.0, 100.0, 0.99, b).unwrap();
        let check = ic_stationary_check(&inst, 0.2, &econ, w, 0.3).unwrap();
        let higher = ic_stationary_check(&inst, 0.2, &econ.with_bounty(b * 1.5 + 1.0), w, 0.3).unwrap();
        if check.satisfied && check.lhs > 0.0 {
            prop_assert!(higher.satisfied);
        }
    }

    #[test]
    fn knapsack_matches_enumeration(
        items in prop::collection::vec((-20i32..100, 0i32..30), 0..=15),
        capacity in 0i32..120,
    ) {
        let items: Vec<AttackItem> = items.iter().map(|&(g, c)| AttackItem { gain: g as f64, cost: c as f64 }).collect();
        let best = (0u32..1 << items.len())
            .filter_map(|mask| {
                let picked = items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1);
                let (g, c) = picked.fold((0.0, 0.0), |(g, c), (_, it)| (g + it.gain, c + it.cost));
                (c <= capacity as f64).then_some(g)
            })
            .fold(0.0, f64::max);
        let got = knapsack_select(&items, capacity as f64, 1.0).unwrap();
        prop_assert!((got.total_gain - best).abs() < 1e-9);
    }

    #[test]
    fn ratchet_below_static(kappa in 21u32..=120) {
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        prop_assume!(inst.slack() > 0);
        let cartel = Cartel::from_count(100, 20).unwrap();
        let q_rat = q_rat_first_slot(&inst.static_schedule(), &cartel).unwrap();
        prop_assert!(q_rat < exact_q0(&inst, &cartel).unwrap());
    }

    #[test]
    fn ratchet_coincides_single_slot(kappa in 1u32..=20, b in 0u32..=100) {
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        let cartel = Cartel::from_count(100, b).unwrap();
        let q_rat = q_rat_first_slot(&inst.static_schedule(), &cartel).unwrap();
        prop_assert!((q_rat - exact_q0(&inst, &cartel).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn honest_miss_monotone(kappa in 21u32..=120, eps in 0.0f64..0.5, b in 5u32..40) {
        let schedule = SystemInstance::from_kappa(100, 20, kappa).unwrap().static_schedule();
        let small = first_slot_withheld_law(&schedule, &Cartel::from_count(100, b).unwrap()).unwrap();
        let large = first_slot_withheld_law(&schedule, &Cartel::from_count(100, b + 5).unwrap()).unwrap();
        let at = |e: f64, law| honest_miss_delay_bound(&schedule, e, law).unwrap();
        prop_assert!(at(eps, &small) <= at(eps + 0.05, &small) + 1e-12);
        prop_assert!(at(eps, &small) <= at(eps, &large) + 1e-12);
    }

    #[test]
    fn ratchet_beta_nonincreasing(seed in any::<u64>(), kappa in 21u32..100) {
        let inst = SystemInstance::from_kappa(100, 20, kappa).unwrap();
        let cartel = Cartel::from_count(100, 20).unwrap();
        let caps = vec![3; inst.t_star() as usize];
        let trace = run_trace(&inst, &cartel, &AdversaryPolicy::RatchetSpread { caps }, seed, 0).unwrap();
        let mut state = RatchetState::new(&cartel);
        let mut prev = state.effective_beta;
        for slot in &trace.slots {
            let withheld = slot.cartel_contacts - slot.cartel_included;
            state.flag(withheld.min(state.cartel_remaining), 0).unwrap();
            prop_assert!(state.effective_beta <= prev);
            prev = state.effective_beta;
        }
    }

    #[test]
    fn rho_monotone(a in 1u32..30, r in 1u32..30, rate in 0.5f64..10.0, reaction in 0.0f64..0.9) {
        prop_assume!(r <= a);
        let race = |rate: f64, reaction: f64| {
            RaceModel::new(1.0, 1.0, reaction, ArrivalModel::Exponential { rate }).unwrap()
        };
        let base = race(rate, reaction);
        let rho = rho_deadline(a, r, &base).unwrap();
        prop_assert!(rho <= rho_deadline(a + 1, r, &base).unwrap() + 1e-12);
        prop_assert!(rho <= rho_deadline(a, r, &race(rate * 1.5, reaction)).unwrap() + 1e-12);
        if r < a {
            prop_assert!(rho_deadline(a, r + 1, &base).unwrap() <= rho + 1e-12);
        }
        prop_assert!(rho_deadline(a, r, &race(rate, (reaction + 0.05).min(1.0))).unwrap() <= rho + 1e-12);
        let m = a.max(r);
        prop_assert!((rho_bar(m, &base) - rho_deadline(m, 1, &base).unwrap()).abs() < 1e-12);
    }
}

/// Hand enumeration of all subsets for small populations.
#[test]
fn pmf_matches_subset_enumeration() {
    for n in 1u32..=12 {
        for b in 0..=n {
            for m in 0..=n {
                let law = HypergeomLaw::new(n, b, m).unwrap();
                let mut counts = vec![0u64; m as usize + 1];
                let mut total = 0u64;
                for mask in 0u32..1 << n {
                    if mask.count_ones() == m {
                        total += 1;
                        counts[(mask & ((1 << b) - 1)).count_ones() as usize] += 1;
                    }
                }
                for (k, c) in counts.iter().enumerate() {
                    let want = *c as f64 / total as f64;
                    assert!(
                        (law.pmf(k as u64) - want).abs() < 1e-12,
                        "n={n} b={b} m={m} k={k}"
                    );
                }
            }
        }
    }
}

#[test]
fn micro_complementarity() {
    let cartel = Cartel::from_count(100, 20).unwrap();
    for t in 1..=5 {
        let roomy = SystemInstance::from_kappa(100, 20, (t - 1) * 20 + 1).unwrap();
        let edge = SystemInstance::from_kappa(100, 20, t * 20).unwrap();
        assert_eq!(roomy.slack(), 19);
        assert!(q_micro(&roomy, &cartel).unwrap().value >= q_micro(&edge, &cartel).unwrap().value);
        assert!(exact_q0(&roomy, &cartel).unwrap() <= exact_q0(&edge, &cartel).unwrap());
    }
}
