use std::io::{BufRead, Write};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SystemInstance;
use crate::incentives::EconParams;
use crate::mechanism::{cartel_prefix_count, pivotal_allocation, BundleRecord, Owner};

use super::policy::AdversaryPolicy;

/// Per-slot counts: cartel contacts `A_t`, honest contacts `H_t`, cartel
/// inclusions `X_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u32,
    pub cartel_contacts: u32,
    pub honest_contacts: u32,
    pub cartel_included: u32,
}

/// One simulated sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub instance: SystemInstance,
    pub cartel_size: u32,
    pub policy: AdversaryPolicy,
    pub seed: u64,
    pub trial: u64,
    pub slots: Vec<SlotRecord>,
    pub inclusion_order: Vec<BundleRecord>,
    /// `None` when the slot cap was hit before decoding.
    pub inclusion_time: Option<u32>,
    pub withheld_at_horizon: u32,
    pub pivotal_cartel_count: u32,
    pub delayed: bool,
    pub truncated: bool,
}

impl Trace {
    /// `U_t` for `t = 1..=len`.
    pub fn onchain_counts(&self) -> Vec<u64> {
        let mut total = 0u64;
        self.slots
            .iter()
            .map(|s| {
                total += (s.honest_contacts + s.cartel_included) as u64;
                total
            })
            .collect()
    }

    /// Structural invariants; the message names the first one broken.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let kappa = self.instance.kappa() as u64;
        let t_star = self.instance.t_star();
        let u = self.onchain_counts();
        if u.windows(2).any(|w| w[1] < w[0]) {
            return Err("U_t decreased".into());
        }
        let first = u.iter().position(|&x| x >= kappa).map(|i| i as u32 + 1);
        if first != self.inclusion_time {
            return Err(format!(
                "T = {:?} but first crossing is {first:?}",
                self.inclusion_time
            ));
        }
        if self.delayed != (self.withheld_at_horizon > self.instance.slack()) {
            return Err("delayed does not match W_{t*} > slack".into());
        }
        if self.delayed != self.inclusion_time.is_none_or(|t| t > t_star) {
            return Err("delayed does not match T > t*".into());
        }
        let s_t: u32 = self
            .slots
            .iter()
            .take(t_star as usize)
            .map(|s| s.cartel_contacts)
            .sum();
        if self.withheld_at_horizon > s_t {
            return Err("W_{t*} exceeds S_{t*}".into());
        }
        if self
            .slots
            .iter()
            .any(|s| s.cartel_included > s.cartel_contacts)
        {
            return Err("X_t exceeds A_t".into());
        }
        if self.inclusion_time.is_some() && (self.inclusion_order.len() as u64) < kappa {
            return Err("decoded with fewer than kappa bundles".into());
        }
        if self.pivotal_cartel_count as u64 > kappa {
            return Err("J_kappa exceeds kappa".into());
        }
        Ok(())
    }
}

/// How PIVOT-K payments are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismMode {
    /// Rational payments, converted to float once per trace.
    #[default]
    ExactRational,
    /// `index_count * B / K` in floating point.
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub fee_revenue: f64,
    pub bounty_revenue: f64,
    pub mev_option: f64,
    pub total: f64,
}

/// Cartel payoff on a trace: discounted fees on its inclusions up to `T`,
/// `gamma^T` times its PIVOT-K payments, and `alpha v gamma^{t*}` if delayed.
pub fn payoff_of_trace(
    trace: &Trace,
    econ: &EconParams,
    mode: MechanismMode,
) -> Result<PayoffBreakdown> {
    let inst = &trace.instance;
    let gamma = econ.discount;
    let f = econ.proposer_fee(inst.symbols_per_bundle());
    let last = trace.inclusion_time.unwrap_or(trace.slots.len() as u32);
    let mut fee_revenue = 0.0;
    for s in trace.slots.iter().take(last as usize) {
        fee_revenue += gamma.powi(s.slot as i32 - 1) * f * s.cartel_included as f64;
    }
    let bounty_revenue = match trace.inclusion_time {
        Some(t) if econ.bounty > 0.0 => {
            let paid = match mode {
                MechanismMode::ExactRational => {
                    let budget = BigRational::from_float(econ.bounty)
                        .ok_or_else(|| Error::param("bounty", "not finite"))?;
                    let alloc = pivotal_allocation(
                        &trace.inclusion_order,
                        inst.decode_threshold_symbols(),
                        inst.symbols_per_bundle(),
                        &budget,
                    )?;
                    alloc.paid_to(Owner::Cartel).to_f64().unwrap_or(f64::NAN)
                }
                MechanismMode::Float => {
                    let kappa = inst.kappa() as usize;
                    let per_index = econ.bounty / inst.decode_threshold_symbols() as f64;
                    trace
                        .inclusion_order
                        .iter()
                        .take(kappa)
                        .enumerate()
                        .filter(|(_, r)| r.owner == Owner::Cartel)
                        .map(|(i, _)| {
                            let idx = if i + 1 == kappa {
                                inst.final_bundle_indices()
                            } else {
                                inst.symbols_per_bundle()
                            };
                            idx as f64 * per_index
                        })
                        .sum()
                }
            };
            gamma.powi(t as i32) * paid
        }
        _ => 0.0,
    };
    let mev_option = if trace.delayed {
        econ.mev_exposure() * gamma.powi(inst.t_star() as i32)
    } else {
        0.0
    };
    Ok(PayoffBreakdown {
        fee_revenue,
        bounty_revenue,
        mev_option,
        total: fee_revenue + bounty_revenue + mev_option,
    })
}

/// Cartel-owned entries among the first `kappa` of the trace order.
pub fn pivotal_cartel_count(trace: &Trace) -> u32 {
    cartel_prefix_count(&trace.inclusion_order, trace.instance.kappa())
}

/// One JSONL line: a trace with the economics and payoff it was scored with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trace: Trace,
    pub econ: EconParams,
    pub mode: MechanismMode,
    pub payoff: PayoffBreakdown,
}

pub fn write_traces_jsonl<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_traces_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Recomputes every payoff and requires bit-exact agreement.
pub fn replay(records: &[TraceRecord]) -> Result<usize> {
    for (index, r) in records.iter().enumerate() {
        if let Err(detail) = r.trace.check_invariants() {
            return Err(Error::ReplayMismatch { index, detail });
        }
        let again = payoff_of_trace(&r.trace, &r.econ, r.mode)?;
        let same = [
            (again.fee_revenue, r.payoff.fee_revenue),
            (again.bounty_revenue, r.payoff.bounty_revenue),
            (again.mev_option, r.payoff.mev_option),
            (again.total, r.payoff.total),
        ]
        .iter()
        .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(Error::ReplayMismatch {
                index,
                detail: format!("stored {:?}, recomputed {:?}", r.payoff, again),
            });
        }
    }
    Ok(records.len())
}
