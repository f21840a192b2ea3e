//! Within-slot decode races: can the cartel collect the last `r` bundles of
//! slot `t*` and act before the slot seals?

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::geometry::{Cartel, SystemInstance};
use crate::probability::{binomial_tail_ge, kl_divergence, DualProb};

/// Arrival-time law of a single bundle within the sealing window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalModel {
    /// `F(t) = 1 - exp(-rate t)`, not renormalised to the window.
    Exponential { rate: f64 },
    /// Exponential conditioned on arrival before the seal deadline.
    TruncatedExponential { rate: f64 },
    /// Linear interpolation through `(time, cdf)` knots; flat outside.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl ArrivalModel {
    fn validate(&self) -> Result<()> {
        match self {
            ArrivalModel::Exponential { rate } | ArrivalModel::TruncatedExponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::param("rate", "must be positive and finite"));
                }
            }
            ArrivalModel::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::param("knots", "need at least one knot"));
                }
                for w in knots.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                        return Err(Error::param(
                            "knots",
                            "times must increase and cdf must not decrease",
                        ));
                    }
                }
                if knots
                    .iter()
                    .any(|k| !(0.0..=1.0).contains(&k.1) || k.0 < 0.0)
                {
                    return Err(Error::param(
                        "knots",
                        "cdf values must lie in [0,1] at nonnegative times",
                    ));
                }
            }
        }
        Ok(())
    }

    /// CDF at `t` for a window ending at `seal`.
    pub fn cdf(&self, t: f64, seal: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ArrivalModel::Exponential { rate } => -(-rate * t).exp_m1(),
            ArrivalModel::TruncatedExponential { rate } => {
                let t = t.min(seal);
                (-(-rate * t).exp_m1() / -(-rate * seal).exp_m1()).min(1.0)
            }
            ArrivalModel::PiecewiseLinear { knots } => {
                let first = knots[0];
                if t <= first.0 {
                    return if first.0 == 0.0 {
                        first.1
                    } else {
                        first.1 * t / first.0
                    };
                }
                for w in knots.windows(2) {
                    let ((t0, f0), (t1, f1)) = (w[0], w[1]);
                    if t <= t1 {
                        return f0 + (f1 - f0) * (t - t0) / (t1 - t0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }
}

/// Slot timing and the arrival law; `p = F(seal - reaction)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceModel {
    pub slot_duration: f64,
    pub seal_deadline: f64,
    pub reaction_time: f64,
    pub arrival: ArrivalModel,
}

impl RaceModel {
    pub fn new(
        slot_duration: f64,
        seal_deadline: f64,
        reaction_time: f64,
        arrival: ArrivalModel,
    ) -> Result<Self> {
        if !(seal_deadline > 0.0 && seal_deadline <= slot_duration) {
            return Err(Error::param(
                "seal_deadline",
                "must lie in (0, slot_duration]",
            ));
        }
        if !(reaction_time >= 0.0) {
            return Err(Error::param("reaction_time", "must be nonnegative"));
        }
        arrival.validate()?;
        Ok(RaceModel {
            slot_duration,
            seal_deadline,
            reaction_time,
            arrival,
        })
    }

    /// Probability one contacted bundle arrives early enough to act on.
    pub fn p(&self) -> f64 {
        let window = self.seal_deadline - self.reaction_time;
        if window <= 0.0 {
            return 0.0;
        }
        self.arrival.cdf(window, self.seal_deadline).clamp(0.0, 1.0)
    }
}

/// `P[A >= r]` with `r = m - slack`, kept in log form as well.
pub fn q_micro(instance: &SystemInstance, cartel: &Cartel) -> Result<DualProb> {
    cartel.check_instance(instance)?;
    let law = cartel.contact_law(instance.contacts_per_slot())?;
    Ok(law.tail_ge_dual(instance.final_deficit() as i64))
}

/// `rho(a, r) = P[Bin(a, p) >= r]`.
pub fn rho_deadline(a: u32, r: u32, race: &RaceModel) -> Result<f64> {
    if r == 0 {
        return Err(Error::param("r", "deficit must be at least 1"));
    }
    Ok(binomial_tail_ge(a, race.p(), r as i64))
}

/// Supremum of `rho` over the feasible grid `1 <= r <= a <= m`.
pub fn rho_bar(m: u32, race: &RaceModel) -> f64 {
    let p = race.p();
    let mut best = 0.0f64;
    for r in 1..=m {
        for a in r..=m {
            best = best.max(binomial_tail_ge(a, p, r as i64));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GIncUpper {
    pub bound: f64,
    pub rho_bar: f64,
    pub gamma: f64,
    pub tail: DualProb,
    /// `exp(-m D(r/m || beta))`, present when `r/m > beta`.
    pub kl_tail_bound: Option<f64>,
    /// `C(beta n, m) / C(n, m)` and `beta^m`, present on knife edges.
    pub knife_edge_exact: Option<f64>,
    pub knife_edge_beta_power: Option<f64>,
}

/// `rho_bar * gamma^{t*-1} * P[A_{t*} >= r]` with its alternatives.
pub fn g_inc_upper(
    instance: &SystemInstance,
    cartel: &Cartel,
    rho_bar: f64,
    gamma: f64,
) -> Result<GIncUpper> {
    if !(0.0..=1.0).contains(&rho_bar) {
        return Err(Error::param("rho_bar", "must lie in [0,1]"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", "must lie in (0,1]"));
    }
    let tail = q_micro(instance, cartel)?;
    let m = instance.contacts_per_slot();
    let r = instance.final_deficit();
    let beta = cartel.beta();
    let ratio = r as f64 / m as f64;
    // Exact comparison r/m > members/lanes.
    let above = (r as u64) * (cartel.lanes() as u64) > (cartel.members() as u64) * (m as u64);
    let kl_tail_bound = if above && beta > 0.0 {
        Some((-(m as f64) * kl_divergence(ratio, beta)?).exp())
    } else {
        None
    };
    let (knife_edge_exact, knife_edge_beta_power) = if instance.is_knife_edge() {
        let law = cartel.contact_law(m)?;
        (Some(law.pmf(m as u64)), Some(beta.powi(m as i32)))
    } else {
        (None, None)
    };
    Ok(GIncUpper {
        bound: rho_bar * gamma.powi(instance.t_star() as i32 - 1) * tail.value,
        rho_bar,
        gamma,
        tail,
        kl_tail_bound,
        knife_edge_exact,
        knife_edge_beta_power,
    })
}

/// `gamma^{t*-1} * rho_floor * p_visibility`.
pub fn g_inc_floor(
    instance: &SystemInstance,
    rho_floor: f64,
    p_visibility: f64,
    gamma: f64,
) -> Result<f64> {
    for (name, v) in [
        ("rho_floor", rho_floor),
        ("p_visibility", p_visibility),
        ("gamma", gamma),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, "must lie in [0,1]"));
        }
    }
    Ok(gamma.powi(instance.t_star() as i32 - 1) * rho_floor * p_visibility)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceRow {
    pub kappa: u32,
    pub r: u32,
    pub q_micro: f64,
    pub g_inc_upper: f64,
    pub g_inc_floor: f64,
}

/// Race sweep with `V = A_{t*}` and `rho_floor = rho(r, r)`.
pub fn race_sweep(
    n: u32,
    m: u32,
    cartel: &Cartel,
    kappas: &[u32],
    race: &RaceModel,
    gamma: f64,
    exec: Execution,
) -> Result<Vec<RaceRow>> {
    if kappas.is_empty() {
        return Err(Error::param("kappa_range", "empty sweep range"));
    }
    let bar = rho_bar(m, race);
    map_slice(exec, kappas, |&kappa| {
        let instance = SystemInstance::from_kappa(n, m, kappa)?;
        let r = instance.final_deficit();
        let upper = g_inc_upper(&instance, cartel, bar, gamma)?;
        let floor = g_inc_floor(
            &instance,
            rho_deadline(r, r, race)?,
            upper.tail.value,
            gamma,
        )?;
        Ok(RaceRow {
            kappa,
            r,
            q_micro: upper.tail.value,
            g_inc_upper: upper.bound,
            g_inc_floor: floor,
        })
    })
    .into_iter()
    .collect()
}

/// CSV with header `kappa,r,q_micro,g_inc_upper,g_inc_floor`.
pub fn write_race_csv<W: Write>(rows: &[RaceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
