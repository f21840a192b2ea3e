use serde::{Deserialize, Serialize};

use super::config::AnalysisConfig;
use super::format::{
    bounty, displayed_bounty, grouped, one_decimal, percent, probability, usd_cents, usd_cost,
    usd_quote,
};
use super::Report;
use crate::delay::{exact_q0, fluid_delay_report, no_delay_upper, sawtooth_sweep, DelayRegime};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::geometry::{Cartel, SystemInstance};
use crate::incentives::{
    bounty_proxies, coalition_sufficient_bounty, default_t0_cap, distribution_of_t0, equal_share,
    knife_edge_bounty_threshold, phi_threshold, sender_ir_bound, EconParams,
};
use crate::intra_slot::{q_micro, race_sweep};
use crate::ratchet::{first_slot_withheld_law, honest_miss_delay_bound, ratchet_sweep};

/// Instance with `kappa` bundles at the configured bundle size.
fn instance_at(cfg: &AnalysisConfig, kappa: u32) -> Result<SystemInstance> {
    SystemInstance::new(cfg.n, cfg.m, cfg.s, kappa * cfg.s)
}

/// Ratchet delay bound at the configured honest-miss rate.
fn q_rat_at(instance: &SystemInstance, cartel: &Cartel, epsilon: f64) -> Result<f64> {
    let schedule = instance.static_schedule();
    let law = first_slot_withheld_law(&schedule, cartel)?;
    honest_miss_delay_bound(&schedule, epsilon, &law)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainRow {
    pub kappa: u32,
    pub t_star: u32,
    pub delta: u32,
    pub q0: f64,
    pub q_rat: f64,
    pub q_micro: f64,
    pub b_static: f64,
    pub b_static_usd: f64,
}

/// Delay, ratchet and within-slot probabilities with the static bounty proxy.
pub fn cmd_table_main(cfg: &AnalysisConfig) -> Result<Report> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let instances = cfg.instances()?;
    let rows: Vec<MainRow> = instances
        .iter()
        .map(|inst| {
            let q0 = exact_q0(inst, &cartel)?;
            let q_rat = q_rat_at(inst, &cartel, cfg.mc.epsilon)?;
            let (b_static, _) = bounty_proxies(cartel.beta(), &econ, q0, q_rat)?;
            Ok(MainRow {
                kappa: inst.kappa(),
                t_star: inst.t_star(),
                delta: inst.slack(),
                q0,
                q_rat,
                q_micro: q_micro(inst, &cartel)?.value,
                b_static,
                b_static_usd: b_static * cfg.unit_price_usd,
            })
        })
        .collect::<Result<_>>()?;
    let display = rows
        .iter()
        .map(|r| {
            vec![
                r.kappa.to_string(),
                r.t_star.to_string(),
                r.delta.to_string(),
                probability(r.q0),
                probability(r.q_rat),
                probability(r.q_micro),
                bounty(r.b_static),
                // Priced from the printed bounty so the two columns agree.
                usd_cents(displayed_bounty(r.b_static) * cfg.unit_price_usd),
            ]
        })
        .collect();
    Report::new(
        "table-main",
        vec![
            "kappa",
            "t*",
            "Delta",
            "q0",
            "q_rat",
            "q_micro",
            "B_static",
            "B_static (USD)",
        ],
        display,
        &rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRow {
    pub kappa: u32,
    pub delta: u32,
    pub unilateral_safe: bool,
    pub equal_share: f64,
    /// Empty on knife edges, where the attack is unilateral.
    pub b_coal: Option<f64>,
    pub b_static: f64,
}

/// Unilateral safety, equal-share benchmark and coalition-sufficient bounty.
pub fn cmd_table_coalition(cfg: &AnalysisConfig) -> Result<Report> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let rows: Vec<CoalitionRow> = cfg
        .instances()?
        .iter()
        .map(|inst| {
            let q0 = exact_q0(inst, &cartel)?;
            Ok(CoalitionRow {
                kappa: inst.kappa(),
                delta: inst.slack(),
                unilateral_safe: !inst.is_knife_edge(),
                equal_share: equal_share(&econ, inst),
                b_coal: coalition_sufficient_bounty(inst, &econ),
                b_static: bounty_proxies(cartel.beta(), &econ, q0, 0.0)?.0,
            })
        })
        .collect::<Result<_>>()?;
    let display = rows
        .iter()
        .map(|r| {
            vec![
                r.kappa.to_string(),
                r.delta.to_string(),
                if r.unilateral_safe { "yes" } else { "no" }.to_string(),
                one_decimal(r.equal_share),
                r.b_coal.map_or_else(|| "n/a".to_string(), grouped),
                bounty(r.b_static),
            ]
        })
        .collect();
    Report::new(
        "table-coalition",
        vec![
            "kappa",
            "Delta",
            "Unil. safe",
            "Equal share",
            "B_coal",
            "B_static",
        ],
        display,
        &rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub tier: String,
    pub alpha_v_usd: f64,
    pub b_static_usd: f64,
    pub b_ratchet_usd: f64,
    /// `B_ratchet / alpha v = q_rat / beta`.
    pub ratio: f64,
}

/// Bounty proxies in USD per MEV tier at the cost operating point.
pub fn cmd_table_cost(cfg: &AnalysisConfig) -> Result<Report> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let inst = instance_at(cfg, cfg.cost.kappa)?;
    let q0 = exact_q0(&inst, &cartel)?;
    let q_rat = q_rat_at(&inst, &cartel, cfg.mc.epsilon)?;
    let rows: Vec<CostRow> = cfg
        .cost
        .tiers
        .iter()
        .map(|tier| {
            // Tiers are quoted in USD, so the proxy scales with the tier.
            let tier_econ = EconParams {
                mev_fraction: 1.0,
                tx_value: tier.mev_usd,
                ..econ.clone()
            };
            let (b_static, b_ratchet) = bounty_proxies(cartel.beta(), &tier_econ, q0, q_rat)?;
            Ok(CostRow {
                tier: tier.label.clone(),
                alpha_v_usd: tier.mev_usd,
                b_static_usd: b_static,
                b_ratchet_usd: b_ratchet,
                ratio: q_rat / cartel.beta(),
            })
        })
        .collect::<Result<_>>()?;
    let display = rows
        .iter()
        .map(|r| {
            vec![
                r.tier.clone(),
                usd_quote(r.alpha_v_usd),
                usd_cost(r.b_static_usd),
                usd_cost(r.b_ratchet_usd),
                percent(r.ratio),
            ]
        })
        .collect();
    let mut report = Report::new(
        "table-cost",
        vec![
            "MEV tier",
            "alpha v",
            "B_static",
            "B_ratchet",
            "B_ratchet / alpha v",
        ],
        display,
        &rows,
    )?;
    report.left_columns = vec![0];
    report.notes.push(format!(
        "operating point: kappa={} t*={} Delta={}",
        inst.kappa(),
        inst.t_star(),
        inst.slack()
    ));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// `q0`, `q_rat`, `q_micro` per `kappa`.
    Delay,
    /// Exact `q0`, honest-miss bound and the multi-slot Monte-Carlo estimate.
    Ratchet,
    /// Within-slot race feasibility.
    Race,
    /// Equal share, coalition bounty and the static proxy.
    Coalition,
    /// Exact tails against their exponential bounds.
    Bounds,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delay" => SweepKind::Delay,
            "ratchet" => SweepKind::Ratchet,
            "race" => SweepKind::Race,
            "coalition" => SweepKind::Coalition,
            "bounds" => SweepKind::Bounds,
            _ => return Err(Error::config("kind", format!("unknown sweep kind `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CoalitionSweepRow {
    kappa: u32,
    delta: u32,
    knife_edge: bool,
    equal_share: f64,
    proposer_fee: f64,
    b_coal: Option<f64>,
    b_static: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoundsRow {
    pub kappa: u32,
    pub knife_edge: bool,
    pub q0: f64,
    pub regime: DelayRegime,
    /// Bounds `q0` when the regime is delay-rare and `1 - q0` when delay-likely.
    pub kl_bound: Option<f64>,
    pub no_delay: f64,
    pub no_delay_upper: f64,
    pub q_micro: f64,
    pub q_micro_kl: Option<f64>,
}

pub(crate) fn bounds_rows(
    cfg: &AnalysisConfig,
    cartel: &Cartel,
    exec: Execution,
) -> Result<Vec<BoundsRow>> {
    let kappas = cfg.sweep_kappas();
    map_slice(exec, &kappas, |&kappa| {
        let inst = SystemInstance::from_kappa(cfg.n, cfg.m, kappa)?;
        let fluid = fluid_delay_report(&inst, cartel, 0.0)?;
        let micro = q_micro(&inst, cartel)?.value;
        let r = inst.final_deficit() as f64 / inst.contacts_per_slot() as f64;
        let q_micro_kl = if r > cartel.beta() {
            Some(crate::probability::chernoff_tail_bound(
                1,
                inst.contacts_per_slot(),
                r,
                cartel.beta(),
                crate::probability::TailSide::Upper,
            )?)
        } else {
            None
        };
        Ok(BoundsRow {
            kappa,
            knife_edge: inst.is_knife_edge(),
            q0: fluid.exact_probability,
            regime: fluid.regime,
            kl_bound: fluid.kl_bound,
            no_delay: 1.0 - fluid.exact_probability,
            no_delay_upper: no_delay_upper(&inst, cartel)?,
            q_micro: micro,
            q_micro_kl,
        })
    })
    .into_iter()
    .collect()
}

fn opt_prob(x: Option<f64>) -> String {
    x.map_or_else(String::new, probability)
}

/// Per-`kappa` rows over the configured sweep range for external plotting.
pub fn cmd_sweep(cfg: &AnalysisConfig, kind: SweepKind, exec: Execution) -> Result<Report> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let kappas = cfg.sweep_kappas();
    let knife = |k: u32| if k.is_multiple_of(cfg.m) { "yes" } else { "" }.to_string();
    match kind {
        SweepKind::Delay => {
            let rows = sawtooth_sweep(cfg.n, cfg.m, &cartel, &kappas, exec)?;
            let display = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kappa.to_string(),
                        r.t_star.to_string(),
                        r.delta.to_string(),
                        probability(r.q0),
                        probability(r.q_rat),
                        probability(r.q_micro),
                        knife(r.kappa),
                    ]
                })
                .collect();
            Report::new(
                "sweep-delay",
                vec![
                    "kappa",
                    "t*",
                    "Delta",
                    "q0",
                    "q_rat",
                    "q_micro",
                    "knife edge",
                ],
                display,
                &rows,
            )
        }
        SweepKind::Ratchet => {
            let rows = ratchet_sweep(
                cfg.n,
                cfg.m,
                &cartel,
                &kappas,
                cfg.mc.epsilon,
                cfg.mc.trials,
                cfg.mc.seed,
                exec,
            )?;
            let display = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kappa.to_string(),
                        probability(r.q0),
                        probability(r.q_rat),
                        opt_prob(r.q_rat_multi_mc),
                        opt_prob(r.ci_low),
                        opt_prob(r.ci_high),
                        knife(r.kappa),
                    ]
                })
                .collect();
            Report::new(
                "sweep-ratchet",
                vec![
                    "kappa",
                    "q0",
                    "q_rat",
                    "MC",
                    "CI low",
                    "CI high",
                    "knife edge",
                ],
                display,
                &rows,
            )
        }
        SweepKind::Race => {
            let rows = race_sweep(
                cfg.n,
                cfg.m,
                &cartel,
                &kappas,
                &cfg.race,
                econ.discount,
                exec,
            )?;
            let display = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kappa.to_string(),
                        r.r.to_string(),
                        probability(r.q_micro),
                        probability(r.g_inc_upper),
                        probability(r.g_inc_floor),
                        knife(r.kappa),
                    ]
                })
                .collect();
            Report::new(
                "sweep-race",
                vec![
                    "kappa",
                    "r",
                    "q_micro",
                    "G_inc upper",
                    "G_inc floor",
                    "knife edge",
                ],
                display,
                &rows,
            )
        }
        SweepKind::Coalition => {
            let rows: Vec<CoalitionSweepRow> = map_slice(exec, &kappas, |&kappa| {
                let inst = SystemInstance::from_kappa(cfg.n, cfg.m, kappa)?;
                let q0 = exact_q0(&inst, &cartel)?;
                Ok(CoalitionSweepRow {
                    kappa,
                    delta: inst.slack(),
                    knife_edge: inst.is_knife_edge(),
                    equal_share: equal_share(&econ, &inst),
                    proposer_fee: econ.proposer_fee(inst.symbols_per_bundle()),
                    b_coal: coalition_sufficient_bounty(&inst, &econ),
                    b_static: bounty_proxies(cartel.beta(), &econ, q0, 0.0)?.0,
                })
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let display = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kappa.to_string(),
                        r.delta.to_string(),
                        one_decimal(r.equal_share),
                        r.b_coal.map_or_else(|| "n/a".to_string(), grouped),
                        bounty(r.b_static),
                        knife(r.kappa),
                    ]
                })
                .collect();
            Report::new(
                "sweep-coalition",
                vec![
                    "kappa",
                    "Delta",
                    "Equal share",
                    "B_coal",
                    "B_static",
                    "knife edge",
                ],
                display,
                &rows,
            )
        }
        SweepKind::Bounds => {
            let rows = bounds_rows(cfg, &cartel, exec)?;
            let display = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kappa.to_string(),
                        probability(r.q0),
                        opt_prob(r.kl_bound),
                        probability(r.no_delay),
                        probability(r.no_delay_upper),
                        probability(r.q_micro),
                        opt_prob(r.q_micro_kl),
                        knife(r.kappa),
                    ]
                })
                .collect();
            Report::new(
                "sweep-bounds",
                vec![
                    "kappa",
                    "q0",
                    "KL bound",
                    "1-q0",
                    "1-q0 upper",
                    "q_micro",
                    "q_micro KL",
                    "knife edge",
                ],
                display,
                &rows,
            )
        }
    }
}

/// Everything the advice report states about one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceReport {
    pub kappa: u32,
    pub t_star: u32,
    pub delta: u32,
    pub knife_edge: bool,
    pub verdict: String,
    pub q0: f64,
    pub q_rat: f64,
    pub q_micro: f64,
    pub b_static: f64,
    pub b_ratchet: f64,
    pub phi_star: f64,
    pub fees_alone_feasible: bool,
    /// Knife-edge threshold when `Delta = 0`.
    pub knife_edge_bounty: Option<f64>,
    /// Coalition-sufficient bounty when `Delta > 0`.
    pub coalition_bounty: Option<f64>,
    /// Worst-case individually rational bounty ceiling.
    pub ir_ceiling: f64,
    /// Nearby thresholds with the same `t*` and positive slack.
    pub alternatives: Vec<u32>,
}

/// Recommendation for the `advise_kappa` operating point.
pub fn cmd_advise(cfg: &AnalysisConfig) -> Result<Report> {
    cfg.validate()?;
    let cartel = cfg.cartel()?;
    let econ = cfg.econ_params()?;
    let beta = cartel.beta();
    let inst = instance_at(cfg, cfg.advise_kappa)?;
    let q0 = exact_q0(&inst, &cartel)?;
    let q_rat = q_rat_at(&inst, &cartel, cfg.mc.epsilon)?;
    let micro = q_micro(&inst, &cartel)?.value;
    let (b_static, b_ratchet) = bounty_proxies(beta, &econ, q0, q_rat)?;
    let phi = phi_threshold(&inst, beta, &econ, q0)?;
    let t0 = distribution_of_t0(&inst, &cartel, default_t0_cap(&inst))?;
    let ir_ceiling = sender_ir_bound(&inst, &econ, q0, t0.expected_discount(econ.discount));
    let knife_edge = inst.is_knife_edge();
    let knife_edge_bounty = if knife_edge {
        Some(knife_edge_bounty_threshold(&inst, beta, &econ, q0)?.b_min)
    } else {
        None
    };
    let m = cfg.m;
    let t = inst.t_star();
    let alternatives: Vec<u32> = ((t - 1) * m + 1..t * m)
        .filter(|k| k.abs_diff(inst.kappa()) <= 2 && *k != inst.kappa())
        .collect();
    let verdict = if knife_edge {
        "avoid: knife edge (m divides kappa)".to_string()
    } else if t == 1 {
        "ok: positive slack; single-slot horizon, so keep kappa < m".to_string()
    } else if q_rat < 1e-2 * q0 {
        "ok: positive slack; multi-slot horizon, ratchet collapses delay to one slot".to_string()
    } else {
        // Small slack: one slot's contacts already beat it with high probability.
        format!(
            "caution: thin slack (Delta={}); ratchet only cuts delay {} -> {}",
            inst.slack(),
            probability(q0),
            probability(q_rat)
        )
    };
    let advice = AdviceReport {
        kappa: inst.kappa(),
        t_star: t,
        delta: inst.slack(),
        knife_edge,
        verdict,
        q0,
        q_rat,
        q_micro: micro,
        b_static,
        b_ratchet,
        phi_star: phi.phi_star,
        fees_alone_feasible: phi.feasible,
        knife_edge_bounty,
        coalition_bounty: coalition_sufficient_bounty(&inst, &econ),
        ir_ceiling,
        alternatives,
    };
    let mut display = vec![
        vec!["kappa".to_string(), advice.kappa.to_string()],
        vec!["t*".into(), advice.t_star.to_string()],
        vec!["Delta".into(), advice.delta.to_string()],
        vec!["verdict".into(), advice.verdict.clone()],
        vec!["q0".into(), probability(q0)],
        vec!["q_rat".into(), probability(q_rat)],
        vec!["q_micro".into(), probability(micro)],
        vec!["B_static".into(), bounty(b_static)],
        vec!["B_ratchet".into(), bounty(b_ratchet)],
        vec![
            "phi*".into(),
            if phi.feasible {
                format!("{:.3} (fees alone deter)", phi.phi_star)
            } else {
                format!("{:.3} (fees alone infeasible)", phi.phi_star)
            },
        ],
    ];
    if let Some(b) = advice.knife_edge_bounty {
        display.push(vec!["knife-edge bounty".into(), grouped(b)]);
    }
    if let Some(b) = advice.coalition_bounty {
        display.push(vec!["coalition bounty".into(), grouped(b)]);
    }
    display.push(vec![
        "IR ceiling".into(),
        format!("{:.2}", advice.ir_ceiling),
    ]);
    if !advice.alternatives.is_empty() {
        let alts: Vec<String> = advice.alternatives.iter().map(u32::to_string).collect();
        display.push(vec!["alternatives".into(), alts.join(", ")]);
    }
    // Nested lists do not fit a flat CSV record.
    let mut report = Report::with_csv(
        "advise",
        vec!["item", "value"],
        display,
        std::slice::from_ref(&advice),
        &[AdviceCsv::from(&advice)],
    )?;
    report.left_columns = vec![0, 1];
    Ok(report)
}

#[derive(Serialize)]
struct AdviceCsv<'a> {
    kappa: u32,
    t_star: u32,
    delta: u32,
    knife_edge: bool,
    verdict: &'a str,
    q0: f64,
    q_rat: f64,
    q_micro: f64,
    b_static: f64,
    b_ratchet: f64,
    phi_star: f64,
    fees_alone_feasible: bool,
    knife_edge_bounty: Option<f64>,
    coalition_bounty: Option<f64>,
    ir_ceiling: f64,
}

impl<'a> From<&'a AdviceReport> for AdviceCsv<'a> {
    fn from(a: &'a AdviceReport) -> Self {
        AdviceCsv {
            kappa: a.kappa,
            t_star: a.t_star,
            delta: a.delta,
            knife_edge: a.knife_edge,
            verdict: &a.verdict,
            q0: a.q0,
            q_rat: a.q_rat,
            q_micro: a.q_micro,
            b_static: a.b_static,
            b_ratchet: a.b_ratchet,
            phi_star: a.phi_star,
            fees_alone_feasible: a.fees_alone_feasible,
            knife_edge_bounty: a.knife_edge_bounty,
            coalition_bounty: a.coalition_bounty,
            ir_ceiling: a.ir_ceiling,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn main_table_cells() {
        let report = cmd_table_main(&AnalysisConfig::default()).unwrap();
        let q0: Vec<&str> = report.display.iter().map(|r| r[3].as_str()).collect();
        assert_eq!(q0, ["8.0e-5", "0.993", "0.136", "0.699", "~1"]);
        let usd: Vec<&str> = report.display.iter().map(|r| r[7].as_str()).collect();
        assert_eq!(usd, ["~$0", "$49.70", "$6.80", "$35.00", "$50.00"]);
    }

    #[test]
    fn coalition_marks_knife_edges() {
        let report = cmd_table_coalition(&AnalysisConfig::default()).unwrap();
        for row in &report.display {
            let knife = row[1] == "0";
            assert_eq!(row[2] == "no", knife);
            assert_eq!(row[4] == "n/a", knife);
        }
    }

    #[test]
    fn sweep_row_count_and_kind_parse() {
        let cfg = AnalysisConfig {
            sweep: crate::report::SweepConfig {
                kappa_min: 5,
                kappa_max: 25,
            },
            ..AnalysisConfig::default()
        };
        let report = cmd_sweep(&cfg, SweepKind::Delay, Execution::Sequential).unwrap();
        assert_eq!(report.display.len(), 21);
        assert_eq!(report.csv.lines().count(), 22);
        assert!("nope".parse::<SweepKind>().is_err());
    }

    #[test]
    fn advise_flags_knife_edge() {
        let cfg = AnalysisConfig {
            advise_kappa: 20,
            ..AnalysisConfig::default()
        };
        let report = cmd_advise(&cfg).unwrap();
        assert!(report.display[3][1].starts_with("avoid: knife edge"));
        assert!(report.display.iter().any(|r| r[0] == "knife-edge bounty"));
        let ok = cmd_advise(&AnalysisConfig::default()).unwrap();
        assert_eq!(ok.display[5][1], "8.0e-5");
        assert!(ok.display[3][1].starts_with("ok:"));
    }

    #[test]
    fn advise_warns_on_thin_slack() {
        let cfg = AnalysisConfig {
            advise_kappa: 39,
            ..AnalysisConfig::default()
        };
        let verdict = &cmd_advise(&cfg).unwrap().display[3][1];
        assert!(verdict.starts_with("caution: thin slack (Delta=1)"), "{verdict}");
    }
}
