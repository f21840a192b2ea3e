//! Property battery behind `verify`. Every suite is a function of explicit
//! sizes and a seed, so a failing run reproduces from its JSON summary.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::AnalysisConfig;
use super::tables::bounds_rows;
use crate::delay::{exact_q0, sawtooth_sweep, DelayRegime};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Cartel, SystemInstance};
use crate::incentives::{
    bayesian_optimal_bounty, default_t0_cap, distribution_of_t0, knapsack_select, AttackItem,
    BountyPrior, EconParams, PriorCdf,
};
use crate::mechanism::{
    minimax_certificate, pivotal_allocation, removal_floor, BundleRecord, Owner, TicketId,
    WeightRule,
};
use crate::ratchet::{first_slot_withheld_law, honest_miss_delay_bound, q_rat_first_slot};
use crate::simulator::{
    estimate_delay, verify_pathwise_theorems, AdversaryPolicy, EXHAUSTIVE_PATTERN_LIMIT,
};

/// Outcome of one suite. `failures` lists individual counterexamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: u64,
    pub failures: Vec<String>,
    pub seconds: f64,
    pub detail: serde_json::Value,
}

impl SuiteResult {
    fn new(
        name: &str,
        checks: u64,
        failures: Vec<String>,
        detail: serde_json::Value,
        start: Instant,
    ) -> Self {
        SuiteResult {
            name: name.into(),
            passed: failures.is_empty(),
            checks,
            failures,
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

impl VerifyReport {
    /// One line per suite, then the verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{} {:<20} {:>8} checks  {:>7.2}s\n",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                s.checks,
                s.seconds
            ));
            for f in s.failures.iter().take(5) {
                out.push_str(&format!("     {f}\n"));
            }
            if s.failures.len() > 5 {
                out.push_str(&format!("     ... {} more\n", s.failures.len() - 5));
            }
        }
        out.push_str(&format!(
            "seed {}: {}\n",
            self.seed,
            if self.passed {
                "all suites passed"
            } else {
                "FAILED"
            }
        ));
        out
    }
}

/// Faults the battery can be asked to plant, to show it detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Perturb the mechanism's uniform weights.
    Minimax,
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimax" => Ok(Fault::Minimax),
            _ => Err(Error::config(
                "inject_fault",
                format!("unknown fault `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub exec: Execution,
    pub inject_fault: Option<Fault>,
    /// Run only suites with these names.
    pub only: Option<Vec<String>>,
}

const MINIMAX_KAPPA: u32 = 12;
const MINIMAX_RULES: usize = 1000;
const CONSERVATION_TRIPLES: usize = 1000;
const KNAPSACK_INSTANCES: usize = 300;
const SMALL_PATHS: u64 = 200;

/// Runs the whole battery on `cfg`.
pub fn cmd_verify(cfg: &AnalysisConfig, options: &VerifyOptions) -> Result<VerifyReport> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let seed = cfg.mc.seed;
    let exec = options.exec;
    let wanted = |name: &str| {
        options
            .only
            .as_ref()
            .is_none_or(|only| only.iter().any(|o| o == name))
    };
    let mut suites = Vec::new();
    if wanted("pathwise") {
        suites.push(suite_pathwise(
            &cfg.instances()?,
            &cartel,
            &econ,
            cfg.mc.verify_paths,
            seed,
            exec,
        )?);
    }
    if wanted("sabotage_exhaustive") {
        suites.push(suite_sabotage_exhaustive(SMALL_PATHS, seed, exec)?);
    }
    if wanted("minimax") {
        suites.push(suite_minimax(
            MINIMAX_KAPPA,
            &[1, 2, 3],
            MINIMAX_RULES,
            seed,
            options.inject_fault,
        )?);
    }
    if wanted("conservation") {
        suites.push(suite_conservation(CONSERVATION_TRIPLES, seed)?);
    }
    if wanted("bound_dominance") {
        suites.push(suite_bound_dominance(cfg, &cartel, exec)?);
    }
    if wanted("ratchet") {
        suites.push(suite_ratchet(
            cfg.n,
            cfg.m,
            &cartel,
            &cfg.sweep_kappas(),
            exec,
        )?);
    }
    if wanted("honest_miss") {
        suites.push(suite_honest_miss(
            cfg.n,
            cfg.m,
            &cartel,
            &cfg.sweep_kappas(),
        )?);
    }
    if wanted("t0_consistency") {
        suites.push(suite_t0_consistency(&cfg.instances()?, &cartel)?);
    }
    if wanted("mc_agreement") {
        suites.push(suite_mc_agreement(
            &cfg.instances()?,
            &cartel,
            cfg.mc.trials,
            seed,
            exec,
        )?);
    }
    if wanted("bayes") {
        suites.push(suite_bayes()?);
    }
    if wanted("knapsack") {
        suites.push(suite_knapsack(KNAPSACK_INSTANCES, 15, seed)?);
    }
    if suites.is_empty() {
        return Err(Error::config(
            "only",
            "no suite matches the requested names",
        ));
    }
    Ok(VerifyReport {
        seed,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

fn detail<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

/// Dominance, invariants and monotonicity over common random paths.
pub fn suite_pathwise(
    instances: &[SystemInstance],
    cartel: &Cartel,
    econ: &EconParams,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut reports = Vec::new();
    for inst in instances {
        let r = verify_pathwise_theorems(inst, cartel, econ, trials, seed, exec)?;
        checks += r.dominance_comparisons + r.monotonicity_checks + r.sabotage_paths;
        for f in &r.failures {
            failures.push(format!(
                "kappa={} trial={} {}: {}",
                inst.kappa(),
                f.trial,
                f.check,
                f.detail
            ));
        }
        if !r.passed && r.failures.is_empty() {
            failures.push(format!("kappa={} reported failure", inst.kappa()));
        }
        reports.push(serde_json::json!({
            "kappa": r.kappa,
            "trials": r.trials,
            "dominance_comparisons": r.dominance_comparisons,
            "dominance_violations": r.dominance_violations,
            "invariant_violations": r.invariant_violations,
            "monotonicity_checks": r.monotonicity_checks,
            "monotonicity_violations": r.monotonicity_violations,
            "sabotage_skipped": r.sabotage_skipped,
        }));
    }
    Ok(SuiteResult::new(
        "pathwise",
        checks,
        failures,
        detail(&reports),
        start,
    ))
}

/// Small instances on which every withholding pattern within `t*` can be
/// enumerated: `(n, cartel members, m)`.
pub const SMALL_FAMILIES: [(u32, u32, u32); 3] = [(10, 3, 3), (12, 4, 4), (8, 2, 6)];

/// Exhaustive minimal-sabotage oracle over all small instances with
/// `t* m <= EXHAUSTIVE_PATTERN_LIMIT`.
pub fn suite_sabotage_exhaustive(paths: u64, seed: u64, exec: Execution) -> Result<SuiteResult> {
    let start = Instant::now();
    let econ = EconParams::normalized(1.0, 100.0, 0.99, 20.0)?;
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut patterns = 0;
    let mut instances = Vec::new();
    for (n, members, m) in SMALL_FAMILIES {
        let cartel = Cartel::from_count(n, members)?;
        for kappa in 1.. {
            let inst = SystemInstance::from_kappa(n, m, kappa)?;
            if inst.t_star() * m > EXHAUSTIVE_PATTERN_LIMIT {
                break;
            }
            let r = verify_pathwise_theorems(&inst, &cartel, &econ, paths, seed, exec)?;
            if let Some(reason) = &r.sabotage_skipped {
                failures.push(format!("n={n} m={m} kappa={kappa}: skipped ({reason})"));
            }
            checks += r.sabotage_paths;
            patterns += r.sabotage_patterns;
            for f in r.failures {
                failures.push(format!(
                    "n={n} m={m} kappa={kappa} trial={} {}: {}",
                    f.trial, f.check, f.detail
                ));
            }
            instances.push((n, m, kappa));
        }
    }
    let info = serde_json::json!({ "instances": instances, "patterns": patterns, "paths_per_instance": paths });
    Ok(SuiteResult::new(
        "sabotage_exhaustive",
        checks,
        failures,
        info,
        start,
    ))
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// The mechanism's own rank weights: payments for `B = 1` over `kappa`
/// single-symbol bundles.
pub fn mechanism_rule(kappa: u32) -> Result<WeightRule> {
    let records: Vec<BundleRecord> = (0..kappa)
        .map(|lane| {
            BundleRecord::new(
                TicketId {
                    tx: 0,
                    slot: 1,
                    lane,
                    draw: 0,
                },
                Owner::Honest,
                true,
            )
        })
        .collect();
    let alloc = pivotal_allocation(&records, kappa, 1, &ratio(1, 1))?;
    WeightRule::new(
        alloc
            .ordered_prefix
            .into_iter()
            .map(|e| e.payment)
            .collect(),
    )
}

/// Random rational rule: integer masses in `0..=span` (not all zero),
/// normalised exactly.
fn random_rule(kappa: u32, span: i64, rng: &mut ChaCha8Rng) -> Result<WeightRule> {
    let mut raw: Vec<i64> = (0..kappa).map(|_| rng.random_range(0..=span)).collect();
    if raw.iter().all(|&x| x == 0) {
        raw[0] = 1;
    }
    let total: i64 = raw.iter().sum();
    WeightRule::new(raw.into_iter().map(|x| ratio(x, total)).collect())
}

/// Random rules, near-uniform perturbations and decaying rules against the
/// `d / kappa` removal bound, plus a check that the mechanism's own rule
/// attains the bound.
pub fn suite_minimax(
    kappa: u32,
    removals: &[u32],
    rules: usize,
    seed: u64,
    fault: Option<Fault>,
) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6d69_6e69);
    let k = kappa as i64;
    let mut pool = vec![WeightRule::uniform(kappa)?];
    while pool.len() < rules {
        let rule = match pool.len() % 4 {
            0 => random_rule(kappa, 1_000, &mut rng)?,
            1 => random_rule(kappa, 3, &mut rng)?,
            2 => {
                // Uniform with one unit of mass moved between two ranks.
                let mut w: Vec<BigRational> = (0..kappa).map(|_| ratio(1, k)).collect();
                let eps = ratio(1, k * rng.random_range(2..=10_000));
                let i = rng.random_range(0..kappa as usize);
                let j = (i + rng.random_range(1..kappa as usize)) % kappa as usize;
                w[i] += &eps;
                w[j] -= &eps;
                WeightRule::new(w)?
            }
            _ => {
                let slots: Vec<u32> = (0..kappa)
                    .map(|i| 1 + i / rng.random_range(1..=kappa))
                    .collect();
                WeightRule::time_decaying(&slots, &ratio(rng.random_range(1..=99), 100))?
            }
        };
        pool.push(rule);
    }
    let mut mech = mechanism_rule(kappa)?;
    if fault == Some(Fault::Minimax) {
        let mut w = mech.weights().to_vec();
        let eps = ratio(1, 1000 * k);
        w[0] += &eps;
        w[1] -= &eps;
        mech = WeightRule::new(w)?;
    }
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    let mut checks = 0;
    for &d in removals {
        let report = minimax_certificate(kappa, d, &pool)?;
        checks += report.rules_checked as u64;
        if !report.passed {
            failures.push(format!(
                "kappa={kappa} d={d}: {} bound violations, {} non-uniform equalities, {} uniform shortfalls",
                report.bound_violations, report.non_uniform_equalities, report.uniform_shortfalls
            ));
        }
        let floor = removal_floor(&mech, d)?;
        checks += 1;
        if floor != ratio(d as i64, k) {
            failures.push(format!(
                "mechanism rule: S_{d} = {floor}, expected {d}/{kappa}"
            ));
        }
        reports.push(report);
    }
    let info = serde_json::json!({ "kappa": kappa, "rules": pool.len(), "reports": reports, "fault": fault });
    Ok(SuiteResult::new("minimax", checks, failures, info, start))
}

/// Exact budget conservation of the pivotal allocation over random
/// `(K, s, B)`, many with `s` not dividing `K`.
pub fn suite_conservation(triples: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x636f_6e73);
    let mut failures = Vec::new();
    let mut non_divisible = 0;
    for i in 0..triples {
        let k: u32 = rng.random_range(1..=400);
        let s: u32 = rng.random_range(1..=k.min(24));
        let budget = ratio(rng.random_range(0..=1_000_000), rng.random_range(1..=997));
        let kappa = k.div_ceil(s);
        non_divisible += u32::from(!k.is_multiple_of(s));
        let records: Vec<BundleRecord> = (0..kappa)
            .map(|j| {
                let owner = if rng.random_bool(0.3) {
                    Owner::Cartel
                } else {
                    Owner::Honest
                };
                BundleRecord::new(
                    TicketId {
                        tx: i as u64,
                        slot: 1 + j / 7,
                        lane: j,
                        draw: 0,
                    },
                    owner,
                    true,
                )
            })
            .collect();
        let alloc = pivotal_allocation(&records, k, s, &budget)?;
        let by_owner = alloc.paid_to(Owner::Cartel) + alloc.paid_to(Owner::Honest);
        if alloc.total_paid != budget || by_owner != budget {
            failures.push(format!("K={k} s={s} B={budget}: paid {}", alloc.total_paid));
        }
        let full = &budget * ratio(s as i64, k as i64);
        let last = &budget * ratio((k - (kappa - 1) * s) as i64, k as i64);
        let shapes_ok = alloc.ordered_prefix.iter().enumerate().all(|(j, e)| {
            if j + 1 == kappa as usize {
                e.payment == last
            } else {
                e.payment == full
            }
        });
        if !shapes_ok {
            failures.push(format!("K={k} s={s} B={budget}: payment shape"));
        }
    }
    let info = serde_json::json!({ "triples": triples, "non_divisible": non_divisible });
    Ok(SuiteResult::new(
        "conservation",
        triples as u64,
        failures,
        info,
        start,
    ))
}

fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + 1e-12) + 1e-300
}

/// Exact tails against their exponential bounds across the sweep range.
pub fn suite_bound_dominance(
    cfg: &AnalysisConfig,
    cartel: &Cartel,
    exec: Execution,
) -> Result<SuiteResult> {
    let start = Instant::now();
    let rows = bounds_rows(cfg, cartel, exec)?;
    let mut failures = Vec::new();
    let mut checks = 0;
    for r in &rows {
        if let Some(bound) = r.kl_bound {
            checks += 1;
            let controlled = match r.regime {
                DelayRegime::DelayRare => r.q0,
                DelayRegime::DelayLikely => r.no_delay,
                _ => continue,
            };
            if exceeds(controlled, bound) {
                failures.push(format!(
                    "kappa={}: {:?} tail {controlled:e} > {bound:e}",
                    r.kappa, r.regime
                ));
            }
        }
        checks += 1;
        if exceeds(r.no_delay, r.no_delay_upper) {
            failures.push(format!(
                "kappa={}: 1-q0 {:e} > {:e}",
                r.kappa, r.no_delay, r.no_delay_upper
            ));
        }
        if let Some(bound) = r.q_micro_kl {
            checks += 1;
            if exceeds(r.q_micro, bound) {
                failures.push(format!(
                    "kappa={}: q_micro {:e} > {bound:e}",
                    r.kappa, r.q_micro
                ));
            }
        }
    }
    let info = serde_json::json!({ "kappas": rows.len() });
    Ok(SuiteResult::new(
        "bound_dominance",
        checks,
        failures,
        info,
        start,
    ))
}

/// `q_rat <= q0` everywhere and strictly below it at every multi-slot
/// threshold with positive slack. Rows where the collapse stays above
/// `1e-2` are reported, not failed: with little slack the first-slot tail
/// `P[A_1 > Delta]` is itself large.
pub fn suite_ratchet(
    n: u32,
    m: u32,
    cartel: &Cartel,
    kappas: &[u32],
    exec: Execution,
) -> Result<SuiteResult> {
    let start = Instant::now();
    let rows = sawtooth_sweep(n, m, cartel, kappas, exec)?;
    let mut failures = Vec::new();
    let mut strict = 0;
    let mut weak_collapse = Vec::new();
    for r in &rows {
        if exceeds(r.q_rat, r.q0) {
            failures.push(format!(
                "kappa={}: q_rat {:e} > q0 {:e}",
                r.kappa, r.q_rat, r.q0
            ));
        }
        if r.t_star >= 2 && !r.knife_edge {
            strict += 1;
            if !(r.q_rat < r.q0) {
                failures.push(format!(
                    "kappa={}: no strict improvement, q_rat = q0 = {:e}",
                    r.kappa, r.q0
                ));
            }
            if !(r.q_rat < 1e-2 * r.q0) {
                weak_collapse.push(serde_json::json!({ "kappa": r.kappa, "delta": r.delta, "ratio": r.q_rat / r.q0 }));
            }
        }
    }
    let info = serde_json::json!({ "kappas": rows.len(), "strict_rows": strict, "ratio_at_least_1e-2": weak_collapse });
    Ok(SuiteResult::new(
        "ratchet",
        rows.len() as u64 + strict,
        failures,
        info,
        start,
    ))
}

/// The honest-miss bound reduces to the first-slot tail at `epsilon = 0`
/// and grows with `epsilon`.
pub fn suite_honest_miss(n: u32, m: u32, cartel: &Cartel, kappas: &[u32]) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_gap = 0.0f64;
    for &kappa in kappas {
        let schedule = SystemInstance::from_kappa(n, m, kappa)?.static_schedule();
        let law = first_slot_withheld_law(&schedule, cartel)?;
        let base = q_rat_first_slot(&schedule, cartel)?;
        let at_zero = honest_miss_delay_bound(&schedule, 0.0, &law)?;
        worst_gap = worst_gap.max((at_zero - base).abs());
        if (at_zero - base).abs() > 1e-12 {
            failures.push(format!("kappa={kappa}: {at_zero:e} vs {base:e}"));
        }
        let mut prev = at_zero;
        for eps in [0.01, 0.05, 0.2] {
            let q = honest_miss_delay_bound(&schedule, eps, &law)?;
            if q < prev - 1e-12 {
                failures.push(format!(
                    "kappa={kappa}: bound falls from {prev:e} to {q:e} at epsilon={eps}"
                ));
            }
            prev = q;
        }
    }
    let info = serde_json::json!({ "kappas": kappas.len(), "worst_gap": worst_gap });
    Ok(SuiteResult::new(
        "honest_miss",
        4 * kappas.len() as u64,
        failures,
        info,
        start,
    ))
}

/// `P[T(0) > t*]` from the inclusion-time law equals `q0`.
pub fn suite_t0_consistency(instances: &[SystemInstance], cartel: &Cartel) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut failures = Vec::new();
    for inst in instances {
        let law = distribution_of_t0(inst, cartel, default_t0_cap(inst))?;
        let q0 = exact_q0(inst, cartel)?;
        let tail = law.tail_gt(inst.t_star());
        if (tail - q0).abs() > 1e-9 {
            failures.push(format!(
                "kappa={}: P[T(0) > t*] = {tail:e}, q0 = {q0:e}",
                inst.kappa()
            ));
        }
        let mass: f64 = law.masses.iter().sum::<f64>() + law.residual;
        if (mass - 1.0).abs() > 1e-9 {
            failures.push(format!("kappa={}: total mass {mass}", inst.kappa()));
        }
    }
    let info = serde_json::json!({ "instances": instances.len() });
    Ok(SuiteResult::new(
        "t0_consistency",
        2 * instances.len() as u64,
        failures,
        info,
        start,
    ))
}

/// Full-withholding delay frequency against exact `q0`, within three
/// binomial standard errors of the exact law, on rows with `q0 >= 1e-4`.
pub fn suite_mc_agreement(
    instances: &[SystemInstance],
    cartel: &Cartel,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for inst in instances {
        let q0 = exact_q0(inst, cartel)?;
        if q0 < 1e-4 {
            skipped.push(inst.kappa());
            continue;
        }
        let est = estimate_delay(
            inst,
            cartel,
            &AdversaryPolicy::FullWithhold,
            trials,
            seed,
            exec,
        )?;
        let se = (q0 * (1.0 - q0) / trials as f64).sqrt();
        let z = if se > 0.0 {
            (est.frequency - q0) / se
        } else {
            0.0
        };
        // A zero-variance law must be hit exactly.
        let ok = if se > 0.0 {
            z.abs() <= 3.0
        } else {
            est.frequency == q0
        };
        if !ok {
            failures.push(format!(
                "kappa={}: frequency {} vs q0 {q0} (z = {z:.2})",
                inst.kappa(),
                est.frequency
            ));
        }
        rows.push(serde_json::json!({
            "kappa": inst.kappa(), "q0": q0, "frequency": est.frequency, "se": se, "z": z
        }));
    }
    let info = serde_json::json!({
        "trials": trials,
        "rows": rows,
        "skipped_below_1e-4": skipped,
        "note": "within-slot tails near 1e-21 are checked analytically only",
    });
    Ok(SuiteResult::new(
        "mc_agreement",
        rows.len() as u64,
        failures,
        info,
        start,
    ))
}

/// Uniform prior on `[0, 1]` with `U_inc = 1`, `U_wh = 0`: optimum `1/2`
/// with utility `1/4`.
pub fn suite_bayes() -> Result<SuiteResult> {
    let start = Instant::now();
    let resolution = 1e-3;
    let prior = BountyPrior::new(
        PriorCdf::Uniform {
            low: 0.0,
            high: 1.0,
        },
        1.0,
        0.0,
    )?;
    let opt = bayesian_optimal_bounty(&prior, resolution)?;
    let mut failures = Vec::new();
    if (opt.bounty - 0.5).abs() > resolution {
        failures.push(format!("B_opt = {}", opt.bounty));
    }
    if (opt.expected_utility - 0.25).abs() > 1e-6 {
        failures.push(format!("U = {}", opt.expected_utility));
    }
    Ok(SuiteResult::new("bayes", 2, failures, detail(&opt), start))
}

fn brute_force_knapsack(items: &[AttackItem], capacity: f64) -> f64 {
    (0u32..1 << items.len())
        .filter_map(|mask| {
            let (gain, cost) = items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .fold((0.0, 0.0), |(g, c), (_, it)| (g + it.gain, c + it.cost));
            (cost <= capacity).then_some(gain)
        })
        .fold(0.0, f64::max)
}

/// Knapsack selection against enumeration on random integer-cost instances.
pub fn suite_knapsack(instances: usize, max_items: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6b6e_6170);
    let mut failures = Vec::new();
    for case in 0..instances {
        let len = rng.random_range(0..=max_items);
        let items: Vec<AttackItem> = (0..len)
            .map(|_| AttackItem {
                gain: rng.random_range(-20..=100) as f64,
                cost: rng.random_range(0..=30) as f64,
            })
            .collect();
        let capacity = rng.random_range(0..=120) as f64;
        let got = knapsack_select(&items, capacity, 1.0)?;
        let want = brute_force_knapsack(&items, capacity);
        if (got.total_gain - want).abs() > 1e-9 || got.total_cost > capacity {
            failures.push(format!(
                "case {case}: gain {} vs {want}, cost {} of {capacity}",
                got.total_gain, got.total_cost
            ));
        }
    }
    let info = serde_json::json!({ "instances": instances, "max_items": max_items });
    Ok(SuiteResult::new(
        "knapsack",
        instances as u64,
        failures,
        info,
        start,
    ))
}
