use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{map_indexed, Execution};
use crate::geometry::{Cartel, SystemInstance};
use crate::incentives::EconParams;
use crate::mechanism::{BundleRecord, Owner};

use super::policy::AdversaryPolicy;
use super::trace::{payoff_of_trace, MechanismMode, Trace};
use super::{build_trace, simulate, trial_rngs, ContactPath, PathRun};
use crate::mechanism::resolve_order;

/// Exhaustive minimal-sabotage enumeration runs only when `t* m` is at most
/// this.
pub const EXHAUSTIVE_PATTERN_LIMIT: u32 = 18;

/// Prefix monotonicity is enumerated exhaustively for `kappa` up to this.
const EXHAUSTIVE_KAPPA: u32 = 6;
/// Candidate insertions considered exhaustively per trace.
const MAX_INSERTION_CANDIDATES: usize = 12;
/// Random insertion checks per trace above the exhaustive range.
const SPOT_CHECKS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseFailure {
    pub check: String,
    pub trial: u64,
    pub detail: String,
    /// The contact path as JSON.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseReport {
    pub kappa: u32,
    pub trials: u64,
    pub seed: u64,
    pub policies: Vec<String>,
    pub dominance_comparisons: u64,
    pub dominance_violations: u64,
    pub invariant_violations: u64,
    pub full_include_delays: u64,
    pub monotonicity_checks: u64,
    pub monotonicity_violations: u64,
    pub monotonicity_exhaustive: bool,
    pub sabotage_paths: u64,
    pub sabotage_patterns: u64,
    pub sabotage_violations: u64,
    pub sabotage_skipped: Option<String>,
    pub failures: Vec<PathwiseFailure>,
    pub passed: bool,
}

/// Policies compared against full withholding on every path.
pub fn dominance_battery(instance: &SystemInstance) -> Vec<AdversaryPolicy> {
    let t = instance.t_star() as usize;
    let m = instance.contacts_per_slot();
    vec![
        AdversaryPolicy::FullInclude,
        AdversaryPolicy::StationaryW { w: 0.25 },
        AdversaryPolicy::StationaryW { w: 0.5 },
        AdversaryPolicy::StationaryW { w: 0.75 },
        AdversaryPolicy::MinimalSabotage,
        AdversaryPolicy::RatchetSpread {
            caps: vec![(instance.slack() + 1).div_ceil(t as u32); t],
        },
        AdversaryPolicy::Scripted {
            inclusions: (0..t).map(|i| (i as u32 * 7 + 3) % (m + 1)).collect(),
        },
    ]
}

#[derive(Default)]
struct TrialOutcome {
    dominance_comparisons: u64,
    dominance_violations: u64,
    invariant_violations: u64,
    full_include_delays: u64,
    monotonicity_checks: u64,
    monotonicity_violations: u64,
    sabotage_path: bool,
    sabotage_patterns: u64,
    sabotage_violations: u64,
    failures: Vec<PathwiseFailure>,
}

fn path_json(path: &ContactPath) -> String {
    serde_json::to_string(path).unwrap_or_default()
}

/// Cartel count among the first `kappa` of `merged` restricted to entries
/// whose bit in `present` is set.
fn prefix_cartel(merged: &[BundleRecord], present: &[bool], kappa: usize) -> u32 {
    let mut seen = 0;
    let mut cartel = 0;
    for (r, &p) in merged.iter().zip(present) {
        if !p {
            continue;
        }
        if r.owner == Owner::Cartel {
            cartel += 1;
        }
        seen += 1;
        if seen == kappa {
            break;
        }
    }
    cartel
}

/// Adding cartel bundles never lowers the cartel's pivotal count.
fn check_monotonicity(
    trace: &Trace,
    withheld: &[BundleRecord],
    kappa: u32,
    rng: &mut impl Rng,
) -> Result<(u64, Option<String>)> {
    // Entries past rank kappa can never re-enter the prefix after insertions.
    let base: Vec<BundleRecord> = trace
        .inclusion_order
        .iter()
        .take(kappa as usize)
        .copied()
        .collect();
    let mut pool: Vec<BundleRecord> = base.clone();
    pool.extend_from_slice(withheld);
    let merged = resolve_order(&pool)?;
    let is_candidate: Vec<bool> = merged.iter().map(|r| !base.contains(r)).collect();
    let candidates: Vec<usize> = (0..merged.len()).filter(|&i| is_candidate[i]).collect();
    let k = kappa as usize;
    let mut present: Vec<bool> = is_candidate.iter().map(|c| !c).collect();
    let mut checks = 0u64;

    let check = |present: &mut Vec<bool>, add: usize| -> Option<String> {
        let before = prefix_cartel(&merged, present, k);
        present[add] = true;
        let after = prefix_cartel(&merged, present, k);
        present[add] = false;
        (after < before).then(|| {
            format!(
                "J_kappa fell from {before} to {after} when adding {:?}",
                merged[add].ticket_id
            )
        })
    };

    if kappa <= EXHAUSTIVE_KAPPA && candidates.len() <= MAX_INSERTION_CANDIDATES {
        let c = candidates.len();
        for mask in 0u32..(1 << c) {
            for (j, &idx) in candidates.iter().enumerate() {
                present[idx] = mask >> j & 1 == 1;
            }
            for (j, &idx) in candidates.iter().enumerate() {
                if mask >> j & 1 == 0 {
                    checks += 1;
                    if let Some(msg) = check(&mut present, idx) {
                        return Ok((checks, Some(msg)));
                    }
                }
            }
        }
    } else if !candidates.is_empty() {
        for _ in 0..SPOT_CHECKS {
            for &idx in &candidates {
                present[idx] = rng.random_bool(0.5);
            }
            let absent: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| !present[i])
                .collect();
            if absent.is_empty() {
                continue;
            }
            let add = absent[rng.random_range(0..absent.len())];
            checks += 1;
            if let Some(msg) = check(&mut present, add) {
                return Ok((checks, Some(msg)));
            }
        }
    }
    Ok((checks, None))
}

/// Enumerates every withholding pattern over the cartel's contacts in
/// slots `1..=t*` (inclusion afterwards) and checks that every
/// payoff-maximising delaying pattern withholds exactly `slack + 1`.
fn check_minimal_sabotage(
    path: &mut ContactPath,
    instance: &SystemInstance,
    econ: &EconParams,
    trial: u64,
) -> Result<(u64, Option<String>)> {
    let t_star = instance.t_star();
    let slack = instance.slack();
    let available: u32 = (1..=t_star).map(|t| path.cartel_contacts(t)).sum();
    if available <= slack {
        return Ok((0, None));
    }
    let mut best: Vec<(f64, u32)> = Vec::new();
    let mut patterns = 0u64;
    for mask in 0u64..(1u64 << available) {
        let withheld_count = mask.count_ones();
        if withheld_count <= slack {
            continue;
        }
        patterns += 1;
        let mut bit = 0u32;
        let PathRun {
            slots,
            onchain,
            inclusion_time,
            truncated,
            ..
        } = simulate(path, instance, trial, |view, a| {
            (0..a)
                .map(|_| {
                    if view.slot > view.t_star {
                        return true;
                    }
                    let include = mask >> bit & 1 == 0;
                    bit += 1;
                    include
                })
                .collect()
        })?;
        let inclusion_order = resolve_order(&onchain)?;
        let trace = Trace {
            instance: *instance,
            cartel_size: path.cartel_lanes.len() as u32,
            policy: AdversaryPolicy::Scripted {
                inclusions: Vec::new(),
            },
            seed: 0,
            trial,
            pivotal_cartel_count: 0,
            slots,
            inclusion_order,
            inclusion_time,
            withheld_at_horizon: withheld_count,
            delayed: true,
            truncated,
        };
        let payoff = payoff_of_trace(&trace, econ, MechanismMode::Float)?.total;
        best.push((payoff, withheld_count));
    }
    let top = best.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * top.abs().max(1.0);
    let wrong: Vec<u32> = best
        .iter()
        .filter(|(p, c)| *p >= top - tol && *c != slack + 1)
        .map(|b| b.1)
        .collect();
    let msg = (!wrong.is_empty()).then(|| {
        format!(
            "payoff-maximal delaying pattern withholds {:?} bundles, expected {}",
            wrong,
            slack + 1
        )
    });
    Ok((patterns, msg))
}

/// Pathwise checks on shared contact paths:
/// (a) no policy delays on a path where full withholding does not, and
///     trace invariants hold on every trace;
/// (b) inserting cartel bundles never lowers the pivotal cartel count;
/// (c) when `t* m <= EXHAUSTIVE_PATTERN_LIMIT`, payoff-maximal delaying
///     withholding patterns withhold exactly `slack + 1` bundles.
pub fn verify_pathwise_theorems(
    instance: &SystemInstance,
    cartel: &Cartel,
    econ: &EconParams,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<PathwiseReport> {
    cartel.check_instance(instance)?;
    let battery = dominance_battery(instance);
    let horizon_mass = instance.t_star() * instance.contacts_per_slot();
    let f = econ.proposer_fee(instance.symbols_per_bundle());
    let sabotage_skipped = if horizon_mass > EXHAUSTIVE_PATTERN_LIMIT {
        Some(format!(
            "t* m = {horizon_mass} exceeds {EXHAUSTIVE_PATTERN_LIMIT}"
        ))
    } else if !econ.net_nonneg {
        Some("nonnegative net marginal inclusion payoff not assumed".to_string())
    } else if f <= 0.0 {
        Some("zero proposer fee leaves withholding counts tied".to_string())
    } else {
        None
    };
    let run_sabotage = sabotage_skipped.is_none();
    let kappa = instance.kappa();

    let outcomes: Vec<Result<TrialOutcome>> = map_indexed(exec, trials as usize, |i| {
        let trial = i as u64;
        let (contacts, _) = trial_rngs(seed, trial);
        let mut path = ContactPath::new(cartel, instance.contacts_per_slot(), contacts);
        let mut out = TrialOutcome::default();

        let (_, mut prng) = trial_rngs(seed, trial);
        let reference = build_trace(
            &mut path,
            instance,
            cartel,
            &AdversaryPolicy::FullWithhold,
            seed,
            trial,
            &mut prng,
        )?;
        let reference_delayed = reference.trace.delayed;

        for policy in std::iter::once(&AdversaryPolicy::FullWithhold).chain(battery.iter()) {
            let (_, mut prng) = trial_rngs(seed, trial);
            let sim = build_trace(&mut path, instance, cartel, policy, seed, trial, &mut prng)?;
            if let Err(detail) = sim.trace.check_invariants() {
                out.invariant_violations += 1;
                out.failures.push(PathwiseFailure {
                    check: format!("invariants[{}]", policy.label()),
                    trial,
                    detail,
                    path: path_json(&path),
                });
            }
            if *policy == AdversaryPolicy::FullWithhold {
                continue;
            }
            out.dominance_comparisons += 1;
            if sim.trace.delayed && !reference_delayed {
                out.dominance_violations += 1;
                out.failures.push(PathwiseFailure {
                    check: format!("dominance[{}]", policy.label()),
                    trial,
                    detail: "policy delayed where full withholding did not".into(),
                    path: path_json(&path),
                });
            }
            if *policy == AdversaryPolicy::FullInclude && sim.trace.delayed {
                out.full_include_delays += 1;
            }
            if *policy == (AdversaryPolicy::StationaryW { w: 0.5 }) {
                let (checks, msg) =
                    check_monotonicity(&sim.trace, &sim.withheld, kappa, &mut prng)?;
                out.monotonicity_checks += checks;
                if let Some(detail) = msg {
                    out.monotonicity_violations += 1;
                    out.failures.push(PathwiseFailure {
                        check: "prefix_monotonicity".into(),
                        trial,
                        detail,
                        path: path_json(&path),
                    });
                }
            }
        }

        if run_sabotage {
            out.sabotage_path = true;
            let (patterns, msg) = check_minimal_sabotage(&mut path, instance, econ, trial)?;
            out.sabotage_patterns = patterns;
            if let Some(detail) = msg {
                out.sabotage_violations += 1;
                out.failures.push(PathwiseFailure {
                    check: "minimal_sabotage".into(),
                    trial,
                    detail,
                    path: path_json(&path),
                });
            }
        }
        Ok(out)
    });

    let mut report = PathwiseReport {
        kappa,
        trials,
        seed,
        policies: battery.iter().map(|p| p.label()).collect(),
        dominance_comparisons: 0,
        dominance_violations: 0,
        invariant_violations: 0,
        full_include_delays: 0,
        monotonicity_checks: 0,
        monotonicity_violations: 0,
        monotonicity_exhaustive: kappa <= EXHAUSTIVE_KAPPA,
        sabotage_paths: 0,
        sabotage_patterns: 0,
        sabotage_violations: 0,
        sabotage_skipped,
        failures: Vec::new(),
        passed: false,
    };
    for o in outcomes {
        let o = o?;
        report.dominance_comparisons += o.dominance_comparisons;
        report.dominance_violations += o.dominance_violations;
        report.invariant_violations += o.invariant_violations;
        report.full_include_delays += o.full_include_delays;
        report.monotonicity_checks += o.monotonicity_checks;
        report.monotonicity_violations += o.monotonicity_violations;
        report.sabotage_paths += o.sabotage_path as u64;
        report.sabotage_patterns += o.sabotage_patterns;
        report.sabotage_violations += o.sabotage_violations;
        report.failures.extend(o.failures);
    }
    report.passed = report.dominance_violations == 0
        && report.invariant_violations == 0
        && report.full_include_delays == 0
        && report.monotonicity_violations == 0
        && report.sabotage_violations == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_exhaustive_instance() {
        let i = SystemInstance::from_kappa(10, 3, 6).unwrap();
        let c = Cartel::from_count(10, 3).unwrap();
        let econ = EconParams::normalized(1.0, 100.0, 0.99, 30.0).unwrap();
        let r = verify_pathwise_theorems(&i, &c, &econ, 300, 5, Execution::Parallel).unwrap();
        assert!(r.passed, "{:?}", r.failures.first());
        assert!(r.monotonicity_exhaustive);
        assert!(r.sabotage_patterns > 0);
        assert!(r.monotonicity_checks > 0);
    }

    #[test]
    fn slack_instance() {
        let i = SystemInstance::from_kappa(12, 4, 10).unwrap();
        let c = Cartel::from_count(12, 4).unwrap();
        let econ = EconParams::normalized(1.0, 100.0, 0.95, 20.0).unwrap();
        let r = verify_pathwise_theorems(&i, &c, &econ, 200, 9, Execution::Parallel).unwrap();
        assert!(r.passed, "{:?}", r.failures.first());
        assert!(r.sabotage_skipped.is_none());
    }
}
