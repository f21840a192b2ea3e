//! Adaptive-sender ratchet: lanes whose tickets go unredeemed are flagged
//! and never contacted again, so the cartel's share of the eligible pool
//! shrinks with every withholding.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delay::exact_q0;
use crate::error::{Error, Result};
use crate::exec::{count_indexed, map_slice, Execution};
use crate::geometry::{Cartel, ContactSchedule, SystemInstance};
use crate::probability::{DiscreteDistribution, HypergeomLaw};

/// Eligible-set bookkeeping under perfect flagging of cartel withholdings
/// and noisy flagging of honest lanes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatchetState {
    pub eligible_count: u32,
    pub flagged_count: u32,
    pub effective_beta: f64,
    pub cartel_remaining: u32,
}

impl RatchetState {
    pub fn new(cartel: &Cartel) -> Self {
        RatchetState {
            eligible_count: cartel.lanes(),
            flagged_count: 0,
            effective_beta: cartel.beta(),
            cartel_remaining: cartel.members(),
        }
    }

    /// Removes `cartel_lanes` withholding cartel lanes and `honest_lanes`
    /// honest lanes flagged by mistake. Flagged lanes never re-enter.
    pub fn flag(&mut self, cartel_lanes: u32, honest_lanes: u32) -> Result<()> {
        let honest_remaining = self.eligible_count - self.cartel_remaining;
        if cartel_lanes > self.cartel_remaining || honest_lanes > honest_remaining {
            return Err(Error::param(
                "flagged",
                "more lanes flagged than remain eligible",
            ));
        }
        self.cartel_remaining -= cartel_lanes;
        self.eligible_count -= cartel_lanes + honest_lanes;
        self.flagged_count += cartel_lanes + honest_lanes;
        self.effective_beta = if self.eligible_count == 0 {
            0.0
        } else {
            self.cartel_remaining as f64 / self.eligible_count as f64
        };
        Ok(())
    }
}

/// `beta_t = (beta n - F) / (n - F)` after `flagged` cartel lanes are removed.
pub fn beta_shrink(cartel: &Cartel, flagged: u32) -> Result<f64> {
    if flagged > cartel.members() {
        return Err(Error::param(
            "F_t",
            format!(
                "{flagged} flagged exceeds {} cartel lanes",
                cartel.members()
            ),
        ));
    }
    if flagged == cartel.members() {
        return Ok(0.0);
    }
    Ok((cartel.members() - flagged) as f64 / (cartel.lanes() - flagged) as f64)
}

/// `q_rat = P[A_1 > M_{t*} - kappa]` with `A_1` the first-slot cartel contacts.
pub fn q_rat_first_slot(schedule: &ContactSchedule, cartel: &Cartel) -> Result<f64> {
    schedule.check_lanes(cartel.lanes())?;
    let law = cartel.contact_law(schedule.first_slot_contacts())?;
    Ok(law.tail_gt(schedule.recovery_slack() as i64))
}

/// Law of the first-slot cartel contacts `A_1`.
pub fn first_slot_withheld_law(
    schedule: &ContactSchedule,
    cartel: &Cartel,
) -> Result<DiscreteDistribution> {
    schedule.check_lanes(cartel.lanes())?;
    Ok(cartel
        .contact_law(schedule.first_slot_contacts())?
        .distribution())
}

/// `P[W + Bin(M_{t*}, eps) > M_{t*} - kappa]` by exact convolution.
pub fn honest_miss_delay_bound(
    schedule: &ContactSchedule,
    epsilon: f64,
    withheld_law: &DiscreteDistribution,
) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::param("epsilon", format!("{epsilon} outside [0,1)")));
    }
    let planned = u32::try_from(schedule.planned_contacts())
        .map_err(|_| Error::param("schedule", "planned contacts overflow"))?;
    let misses = DiscreteDistribution::binomial(planned, epsilon)?;
    Ok(withheld_law
        .convolve(&misses)
        .tail_gt(schedule.recovery_slack() as i64))
}

/// Monte-Carlo estimate of the multi-slot ratchet delay probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatchetEstimate {
    pub spread: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    /// Frequency of `sum_t min(w_t, A_t) > slack`.
    pub frequency: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Frequency of `sum_t A_t > slack` over the same shrinking pools.
    pub contact_tail_frequency: f64,
    /// Static-pool exact `q0`, for comparison.
    pub static_q0: f64,
}

/// Binomial proportion with a normal-approximation 95% interval clipped
/// to `[0,1]`.
pub fn proportion_ci(successes: u64, trials: u64) -> (f64, f64, f64, f64) {
    let p = successes as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    (p, se, (p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0))
}

/// Slot-by-slot ratchet path. Returns `(sum W_t, sum A_t)` over `1..=t*`.
fn ratchet_path(
    instance: &SystemInstance,
    cartel: &Cartel,
    spread: &[u32],
    rng: &mut ChaCha8Rng,
) -> (u32, u32) {
    let mut eligible = cartel.lanes();
    let mut cartel_left = cartel.members();
    let (mut withheld, mut contacts) = (0u32, 0u32);
    for t in 0..instance.t_star() as usize {
        let draws = instance.contacts_per_slot().min(eligible);
        // Sequential draws without replacement from the current pool.
        let (mut pool, mut bad) = (eligible, cartel_left);
        let mut a = 0u32;
        for _ in 0..draws {
            if bad > 0 && rng.random_range(0..pool) < bad {
                a += 1;
                bad -= 1;
            }
            pool -= 1;
        }
        let w = a.min(spread.get(t).copied().unwrap_or(0));
        withheld += w;
        contacts += a;
        cartel_left -= w;
        eligible -= w;
    }
    (withheld, contacts)
}

/// Monte-Carlo delay probability when the cartel withholds at most `w_t`
/// contacts in slot `t` and every withholding lane is flagged at once.
///
/// Trial `i` draws from the ChaCha8 stream `i` of `seed`, so the estimate
/// does not depend on the execution mode.
pub fn ratchet_multi_slot_delay(
    instance: &SystemInstance,
    cartel: &Cartel,
    spread: &[u32],
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<RatchetEstimate> {
    cartel.check_instance(instance)?;
    if instance.t_star() < 2 {
        return Err(Error::SingleSlotHorizon);
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let slack = instance.slack();
    let outcomes: Vec<(bool, bool)> = crate::exec::map_indexed(exec, trials as usize, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (w, a) = ratchet_path(instance, cartel, spread, &mut rng);
        (w > slack, a > slack)
    });
    let delayed = outcomes.iter().filter(|o| o.0).count() as u64;
    let contact_tail = outcomes.iter().filter(|o| o.1).count() as u64;
    let (frequency, stderr, ci_low, ci_high) = proportion_ci(delayed, trials);
    Ok(RatchetEstimate {
        spread: spread.to_vec(),
        trials,
        seed,
        frequency,
        stderr,
        ci_low,
        ci_high,
        contact_tail_frequency: contact_tail as f64 / trials as f64,
        static_q0: exact_q0(instance, cartel)?,
    })
}

/// Delay count only; cheaper entry point for sweeps and benches.
pub fn ratchet_delay_count(
    instance: &SystemInstance,
    cartel: &Cartel,
    spread: &[u32],
    trials: u64,
    seed: u64,
    exec: Execution,
) -> u64 {
    let slack = instance.slack();
    count_indexed(exec, trials as usize, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        ratchet_path(instance, cartel, spread, &mut rng).0 > slack
    })
}

/// Row of the ratchet sweep. `q_rat` is the honest-miss bound at `epsilon`
/// (plain `q_rat` when `epsilon = 0`); the Monte-Carlo columns are empty
/// when `t* = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatchetRow {
    pub kappa: u32,
    pub q0: f64,
    pub q_rat: f64,
    pub q_rat_multi_mc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub epsilon: f64,
}

/// Full-withholding ratchet sweep over `kappas`.
#[allow(clippy::too_many_arguments)]
pub fn ratchet_sweep(
    n: u32,
    m: u32,
    cartel: &Cartel,
    kappas: &[u32],
    epsilon: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RatchetRow>> {
    if kappas.is_empty() {
        return Err(Error::param("kappa_range", "empty sweep range"));
    }
    // Rows run sequentially inside; the trials fan out instead.
    map_slice(Execution::Sequential, kappas, |&kappa| {
        let instance = SystemInstance::from_kappa(n, m, kappa)?;
        let schedule = instance.static_schedule();
        let law = first_slot_withheld_law(&schedule, cartel)?;
        let q_rat = honest_miss_delay_bound(&schedule, epsilon, &law)?;
        let (mc, lo, hi) = if instance.t_star() >= 2 {
            let spread = vec![m; instance.t_star() as usize];
            let seed_k = seed ^ (kappa as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let est = ratchet_multi_slot_delay(&instance, cartel, &spread, trials, seed_k, exec)?;
            (Some(est.frequency), Some(est.ci_low), Some(est.ci_high))
        } else {
            (None, None, None)
        };
        Ok(RatchetRow {
            kappa,
            q0: exact_q0(&instance, cartel)?,
            q_rat,
            q_rat_multi_mc: mc,
            ci_low: lo,
            ci_high: hi,
            epsilon,
        })
    })
    .into_iter()
    .collect()
}

/// CSV with header `kappa,q0,q_rat,q_rat_multi_mc,ci_low,ci_high,epsilon`.
pub fn write_ratchet_csv<W: Write>(rows: &[RatchetRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience: the hypergeometric law of a slot drawn from a shrunken pool.
pub fn shrunken_contact_law(cartel: &Cartel, flagged: u32, draws: u32) -> Result<HypergeomLaw> {
    if flagged > cartel.members() {
        return Err(Error::param("F_t", "flagged exceeds cartel size"));
    }
    let pool = cartel.lanes() - flagged;
    HypergeomLaw::new(pool, cartel.members() - flagged, draws.min(pool))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cartel() -> Cartel {
        Cartel::from_fraction(100, 0.2).unwrap()
    }

    #[test]
    fn table_values() {
        let c = cartel();
        let s30 = SystemInstance::from_kappa(100, 20, 30)
            .unwrap()
            .static_schedule();
        let q = q_rat_first_slot(&s30, &c).unwrap();
        assert!((q - 8.0e-5).abs() < 0.05e-5, "{q}");
        let s100 = SystemInstance::from_kappa(100, 20, 100)
            .unwrap()
            .static_schedule();
        let q = q_rat_first_slot(&s100, &c).unwrap();
        assert!((q - 0.993).abs() < 5e-4, "{q}");
    }

    #[test]
    fn slack_beyond_first_slot() {
        let s = crate::geometry::derive_schedule(vec![5, 40], 10).unwrap();
        assert_eq!(s.recovery_slack(), 35);
        assert_eq!(q_rat_first_slot(&s, &cartel()).unwrap(), 0.0);
    }

    #[test]
    fn shrink() {
        let c = cartel();
        assert_eq!(beta_shrink(&c, 0).unwrap(), 0.2);
        assert!((beta_shrink(&c, 5).unwrap() - 15.0 / 95.0).abs() < 1e-15);
        assert_eq!(beta_shrink(&c, 20).unwrap(), 0.0);
        assert!(beta_shrink(&c, 21).is_err());
        let mut prev = 1.0;
        for f in 0..=20 {
            let b = beta_shrink(&c, f).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn state_tracks_shrink() {
        let c = cartel();
        let mut st = RatchetState::new(&c);
        st.flag(5, 0).unwrap();
        assert!((st.effective_beta - beta_shrink(&c, 5).unwrap()).abs() < 1e-15);
        st.flag(0, 3).unwrap();
        assert_eq!(
            (st.eligible_count, st.flagged_count, st.cartel_remaining),
            (92, 8, 15)
        );
        assert!(st.flag(16, 0).is_err());
    }

    #[test]
    fn honest_miss_limits() {
        let c = cartel();
        let s = SystemInstance::from_kappa(100, 20, 30)
            .unwrap()
            .static_schedule();
        let law = first_slot_withheld_law(&s, &c).unwrap();
        let q = q_rat_first_slot(&s, &c).unwrap();
        let e0 = honest_miss_delay_bound(&s, 0.0, &law).unwrap();
        assert!((e0 - q).abs() < 1e-12);
        let e1 = honest_miss_delay_bound(&s, 0.01, &law).unwrap();
        let e5 = honest_miss_delay_bound(&s, 0.05, &law).unwrap();
        assert!(q < e1 && e1 < e5, "{q} {e1} {e5}");
        let hi = honest_miss_delay_bound(&s, 0.999, &law).unwrap();
        assert!(hi > 0.99);
        assert!(honest_miss_delay_bound(&s, 1.0, &law).is_err());
    }

    #[test]
    fn single_slot_rejected() {
        let i = SystemInstance::from_kappa(100, 20, 10).unwrap();
        assert_eq!(
            ratchet_multi_slot_delay(&i, &cartel(), &[20], 10, 1, Execution::Sequential),
            Err(Error::SingleSlotHorizon)
        );
    }

    #[test]
    fn withholding_nothing_never_delays() {
        let i = SystemInstance::from_kappa(100, 20, 30).unwrap();
        let est = ratchet_multi_slot_delay(&i, &cartel(), &[0, 0], 2000, 7, Execution::Sequential)
            .unwrap();
        assert_eq!(est.frequency, 0.0);
    }

    #[test]
    fn first_slot_spread_matches_exact() {
        // kappa = 50: q_rat is large enough to resolve by simulation.
        let c = Cartel::from_fraction(100, 0.3).unwrap();
        let i = SystemInstance::from_kappa(100, 20, 50).unwrap();
        let exact = q_rat_first_slot(&i.static_schedule(), &c).unwrap();
        let est =
            ratchet_multi_slot_delay(&i, &c, &[20, 0, 0], 40_000, 3, Execution::Parallel).unwrap();
        assert!(
            (est.frequency - exact).abs() <= 4.0 * est.stderr.max(1e-4),
            "{} vs {exact}",
            est.frequency
        );
    }

    #[test]
    fn modes_agree() {
        let i = SystemInstance::from_kappa(100, 20, 50).unwrap();
        let a =
            ratchet_multi_slot_delay(&i, &cartel(), &[20, 20, 20], 500, 11, Execution::Sequential)
                .unwrap();
        let b =
            ratchet_multi_slot_delay(&i, &cartel(), &[20, 20, 20], 500, 11, Execution::Parallel)
                .unwrap();
        assert_eq!(a, b);
        assert_eq!(
            ratchet_delay_count(&i, &cartel(), &[20, 20, 20], 500, 11, Execution::Parallel),
            (a.frequency * 500.0).round() as u64
        );
    }

    #[test]
    fn sweep_csv_header() {
        let rows = ratchet_sweep(
            100,
            20,
            &cartel(),
            &[10, 30],
            0.0,
            200,
            1,
            Execution::Sequential,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_ratchet_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "kappa,q0,q_rat,q_rat_multi_mc,ci_low,ci_high,epsilon"
        );
        assert!(lines.next().unwrap().contains(",,,"));
    }
}
