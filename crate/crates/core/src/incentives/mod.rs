//! Closed-form incentive quantities: payoff bounds, stationary and
//! knife-edge incentive compatibility, coalition budgets, fee-only and
//! sender-side thresholds, and the bounty proxies used in the tables.
//!
//! Margins and thresholds are reported as computed; negative values are
//! findings, not errors.

mod bayes;
mod knapsack;

pub use bayes::{bayesian_optimal_bounty, BayesOptimum, BountyPrior, PriorCdf};
pub use knapsack::{knapsack_select, AttackItem, KnapsackSolution};

use serde::{Deserialize, Serialize};

use crate::delay::fluid_delay_report;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{Cartel, SystemInstance};

/// How fees are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeeModel {
    /// `L(s) = M_h + s (M_s + l_sym)`, `p = c L(s)`, `f = phi p`.
    Bytes {
        header_bytes: u64,
        metadata_bytes: u64,
        symbol_bytes: u64,
        per_byte_price: f64,
        proposer_share: f64,
    },
    /// Fees given directly in normalized units.
    Normalized { proposer_fee: f64, bundle_fee: f64 },
}

/// Fee, bounty and value parameters. Derived fees are computed on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    pub fees: FeeModel,
    pub bounty: f64,
    pub discount: f64,
    pub mev_fraction: f64,
    pub tx_value: f64,
    /// Whether nonnegative net marginal inclusion payoff is assumed; minimal
    /// sabotage conclusions are reported as valid only when set.
    #[serde(default = "default_true")]
    pub net_nonneg: bool,
}

fn default_true() -> bool {
    true
}

impl EconParams {
    /// Normalized economics: `f = p = proposer_fee`, `alpha = 1`, `v = alpha_v`.
    pub fn normalized(proposer_fee: f64, alpha_v: f64, discount: f64, bounty: f64) -> Result<Self> {
        EconParams {
            fees: FeeModel::Normalized {
                proposer_fee,
                bundle_fee: proposer_fee,
            },
            bounty,
            discount,
            mev_fraction: 1.0,
            tx_value: alpha_v,
            net_nonneg: true,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::param("discount", "gamma must lie in (0,1)"));
        }
        if !(0.0..=1.0).contains(&self.mev_fraction) {
            return Err(Error::param("mev_fraction", "alpha must lie in [0,1]"));
        }
        if !(self.tx_value > 0.0) {
            return Err(Error::param("tx_value", "v must be positive"));
        }
        if !(self.bounty >= 0.0) {
            return Err(Error::param("bounty", "B must be nonnegative"));
        }
        match &self.fees {
            FeeModel::Bytes {
                per_byte_price,
                proposer_share,
                ..
            } => {
                if !(*per_byte_price >= 0.0) {
                    return Err(Error::param("per_byte_price", "must be nonnegative"));
                }
                if !(0.0..=1.0).contains(proposer_share) {
                    return Err(Error::param("proposer_share", "phi must lie in [0,1]"));
                }
            }
            FeeModel::Normalized {
                proposer_fee,
                bundle_fee,
            } => {
                if !(*proposer_fee >= 0.0 && proposer_fee <= bundle_fee) {
                    return Err(Error::param("proposer_fee", "need 0 <= f <= p"));
                }
            }
        }
        Ok(self)
    }

    /// `L(s)` in bytes; `None` under normalized fees.
    pub fn bundle_bytes(&self, s: u32) -> Option<u64> {
        match &self.fees {
            FeeModel::Bytes {
                header_bytes,
                metadata_bytes,
                symbol_bytes,
                ..
            } => Some(header_bytes + s as u64 * (metadata_bytes + symbol_bytes)),
            FeeModel::Normalized { .. } => None,
        }
    }

    /// `p = c L(s)`.
    pub fn bundle_fee(&self, s: u32) -> f64 {
        match &self.fees {
            FeeModel::Bytes { per_byte_price, .. } => {
                per_byte_price * self.bundle_bytes(s).unwrap_or(0) as f64
            }
            FeeModel::Normalized { bundle_fee, .. } => *bundle_fee,
        }
    }

    /// `f = phi c L(s)`.
    pub fn proposer_fee(&self, s: u32) -> f64 {
        match &self.fees {
            FeeModel::Bytes { proposer_share, .. } => proposer_share * self.bundle_fee(s),
            FeeModel::Normalized { proposer_fee, .. } => *proposer_fee,
        }
    }

    /// `alpha v`.
    pub fn mev_exposure(&self) -> f64 {
        self.mev_fraction * self.tx_value
    }

    pub fn with_bounty(&self, bounty: f64) -> Self {
        EconParams {
            bounty,
            ..self.clone()
        }
    }
}

/// `pi(w) = w beta / (1 - beta + w beta)`.
pub fn pi_share(w: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::param("w", "must lie in [0,1]"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("beta", "must lie in (0,1)"));
    }
    Ok(w * beta / (1.0 - beta + w * beta))
}

/// `f w beta m / (1 - gamma)`.
pub fn fee_revenue_upper(w: f64, beta: f64, m: u32, f: f64, gamma: f64) -> f64 {
    f * w * beta * m as f64 / (1.0 - gamma)
}

/// `gamma^{t*} (beta - pi(w) - m/kappa) B`; may be negative.
pub fn bounty_gap_lower(
    w: f64,
    instance: &SystemInstance,
    beta: f64,
    bounty: f64,
    gamma: f64,
) -> Result<f64> {
    let share_gap =
        beta - pi_share(w, beta)? - instance.contacts_per_slot() as f64 / instance.kappa() as f64;
    Ok(gamma.powi(instance.t_star() as i32) * share_gap * bounty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcCheck {
    pub w: f64,
    pub beta: f64,
    pub kappa: u32,
    pub m: u32,
    pub bounty: f64,
    pub mev_exposure: f64,
    pub q_w: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

/// Stationary sufficient condition `(beta - pi(w) - m/kappa) B >= alpha v q_w`.
pub fn ic_stationary_check(
    instance: &SystemInstance,
    beta: f64,
    econ: &EconParams,
    w: f64,
    q_w: f64,
) -> Result<IcCheck> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::param("w", "must lie in [0,1)"));
    }
    let m = instance.contacts_per_slot();
    let lhs = (beta - pi_share(w, beta)? - m as f64 / instance.kappa() as f64) * econ.bounty;
    let rhs = econ.mev_exposure() * q_w;
    Ok(IcCheck {
        w,
        beta,
        kappa: instance.kappa(),
        m,
        bounty: econ.bounty,
        mev_exposure: econ.mev_exposure(),
        q_w,
        lhs,
        rhs,
        margin: lhs - rhs,
        satisfied: lhs >= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcSweep {
    pub rows: Vec<IcCheck>,
    pub worst: IcCheck,
    pub satisfied_everywhere: bool,
}

/// Stationary condition over `points` evenly spaced `w in [0, 1)`, with the
/// fluid delay probability as `q_w`. The worst margin is the headline.
pub fn ic_stationary_sweep(
    instance: &SystemInstance,
    cartel: &Cartel,
    econ: &EconParams,
    points: usize,
    exec: Execution,
) -> Result<IcSweep> {
    if points == 0 {
        return Err(Error::param("points", "w-grid must be nonempty"));
    }
    let beta = cartel.beta();
    let rows: Vec<IcCheck> = map_indexed(exec, points, |i| {
        let w = i as f64 / points as f64;
        let q_w = fluid_delay_report(instance, cartel, w)?.exact_probability;
        ic_stationary_check(instance, beta, econ, w, q_w)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .cloned()
        .expect("nonempty grid");
    Ok(IcSweep {
        satisfied_everywhere: rows.iter().all(|r| r.satisfied),
        rows,
        worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnifeEdgeThreshold {
    pub kappa: u32,
    pub t_star: u32,
    pub m: u32,
    pub beta: f64,
    pub gamma: f64,
    pub proposer_fee: f64,
    pub mev_exposure: f64,
    pub q0: f64,
    pub b_min: f64,
    /// `q0 (gamma^{t*-1} f - gamma^{t*} beta m f)`.
    pub net_fee_sacrifice: f64,
    /// `gamma^{t*} (1-gamma) beta B_min`.
    pub bounty_discount_loss: f64,
    /// `gamma^{t*+1} (1-beta) (q0/kappa) B_min`.
    pub lost_pivotal_share: f64,
    /// `alpha v gamma^{t*} q0`, which the three terms sum to at `B_min`.
    pub mev_option: f64,
}

/// Knife-edge bounty threshold
/// `q0 (alpha v - f/gamma + beta m f) / ((1-gamma) beta + gamma (1-beta) q0/kappa)`.
pub fn knife_edge_bounty_threshold(
    instance: &SystemInstance,
    beta: f64,
    econ: &EconParams,
    q0: f64,
) -> Result<KnifeEdgeThreshold> {
    if !instance.is_knife_edge() {
        return Err(Error::NotKnifeEdge {
            slack: instance.slack(),
        });
    }
    let g = econ.discount;
    let f = econ.proposer_fee(instance.symbols_per_bundle());
    let av = econ.mev_exposure();
    let m = instance.contacts_per_slot() as f64;
    let kappa = instance.kappa() as f64;
    let t = instance.t_star() as i32;
    let denom = (1.0 - g) * beta + g * (1.0 - beta) * q0 / kappa;
    if denom <= 0.0 {
        return Err(Error::param("beta", "threshold denominator vanishes"));
    }
    let b_min = q0 * (av - f / g + beta * m * f) / denom;
    Ok(KnifeEdgeThreshold {
        kappa: instance.kappa(),
        t_star: instance.t_star(),
        m: instance.contacts_per_slot(),
        beta,
        gamma: g,
        proposer_fee: f,
        mev_exposure: av,
        q0,
        b_min,
        net_fee_sacrifice: q0 * (g.powi(t - 1) * f - g.powi(t) * beta * m * f),
        bounty_discount_loss: g.powi(t) * (1.0 - g) * beta * b_min,
        lost_pivotal_share: g.powi(t + 1) * (1.0 - beta) * q0 / kappa * b_min,
        mev_option: av * g.powi(t) * q0,
    })
}

/// `kappa max(0, alpha v gamma^{t*} - (slack+1) f)`; `None` on knife edges,
/// where the attack is unilateral.
pub fn coalition_sufficient_bounty(instance: &SystemInstance, econ: &EconParams) -> Option<f64> {
    if instance.is_knife_edge() {
        return None;
    }
    let f = econ.proposer_fee(instance.symbols_per_bundle());
    let option = econ.mev_exposure() * econ.discount.powi(instance.t_star() as i32);
    Some(instance.kappa() as f64 * (option - (instance.slack() + 1) as f64 * f).max(0.0))
}

/// `c f + (c - slack)^+ B / kappa`.
pub fn coalition_loss_floor(withheld: u32, instance: &SystemInstance, econ: &EconParams) -> f64 {
    let f = econ.proposer_fee(instance.symbols_per_bundle());
    let pivotal = withheld.saturating_sub(instance.slack());
    withheld as f64 * f + pivotal as f64 * econ.bounty / instance.kappa() as f64
}

/// `alpha v gamma^{t*} / (slack + 1)`.
pub fn equal_share(econ: &EconParams, instance: &SystemInstance) -> f64 {
    econ.mev_exposure() * econ.discount.powi(instance.t_star() as i32)
        / (instance.slack() + 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiThreshold {
    pub phi_star: f64,
    pub feasible: bool,
    pub bundle_fee: f64,
    pub q0: f64,
}

/// Proposer share needed for fees alone to deter:
/// `alpha v gamma^{t*} q0 (1-gamma) / (c L(s) beta m (1 - gamma^{t*}))`.
pub fn phi_threshold(
    instance: &SystemInstance,
    beta: f64,
    econ: &EconParams,
    q0: f64,
) -> Result<PhiThreshold> {
    let p = econ.bundle_fee(instance.symbols_per_bundle());
    let g = econ.discount;
    let t = instance.t_star() as i32;
    let denom = p * beta * instance.contacts_per_slot() as f64 * (1.0 - g.powi(t));
    if !(denom > 0.0) {
        return Err(Error::param("bundle_fee", "c L(s) beta m must be positive"));
    }
    let phi_star = econ.mev_exposure() * g.powi(t) * q0 * (1.0 - g) / denom;
    Ok(PhiThreshold {
        phi_star,
        feasible: phi_star <= 1.0,
        bundle_fee: p,
        q0,
    })
}

/// Largest individually rational bounty under the worst-case cartel:
/// `v (gamma^{t*} - E[gamma^{T(0)}]) + alpha v gamma^{t*} q0`.
pub fn sender_ir_bound(
    instance: &SystemInstance,
    econ: &EconParams,
    q0: f64,
    expected_discount_t0: f64,
) -> f64 {
    let gt = econ.discount.powi(instance.t_star() as i32);
    econ.tx_value * (gt - expected_discount_t0) + econ.mev_exposure() * gt * q0
}

/// Law of the full-withholding inclusion slot `T(0)`, truncated at a cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionTimeLaw {
    /// Masses on slots `t*, t*+1, ..., cap`.
    pub first_slot: u32,
    pub masses: Vec<f64>,
    /// `P[T(0) > cap]`.
    pub residual: f64,
    pub cap: u32,
}

impl InclusionTimeLaw {
    pub fn pmf(&self, t: u32) -> f64 {
        if t < self.first_slot || t > self.cap {
            return 0.0;
        }
        self.masses[(t - self.first_slot) as usize]
    }

    /// `P[T(0) > t]`, including residual mass.
    pub fn tail_gt(&self, t: u32) -> f64 {
        let above: f64 = (t.max(self.first_slot - 1) + 1..=self.cap)
            .map(|u| self.pmf(u))
            .sum();
        above + self.residual
    }

    /// `E[gamma^{T(0)}]` over the resolved mass; the residual contributes at
    /// most `gamma^{cap+1} residual`.
    pub fn expected_discount(&self, gamma: f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, p)| p * gamma.powi((self.first_slot + i as u32) as i32))
            .sum()
    }
}

/// Residual mass tolerated at the cap.
pub const T0_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Default cap on the `T(0)` dynamic programme.
pub fn default_t0_cap(instance: &SystemInstance) -> u32 {
    (64 * instance.t_star()).max(instance.t_star() + 256)
}

/// Exact law of `T(0)` by dynamic programming over the outstanding deficit
/// `kappa - (t m - S_t)`, which only shrinks.
pub fn distribution_of_t0(
    instance: &SystemInstance,
    cartel: &Cartel,
    cap: u32,
) -> Result<InclusionTimeLaw> {
    cartel.check_instance(instance)?;
    let t_star = instance.t_star();
    if cap < t_star {
        return Err(Error::param(
            "horizon_cap",
            format!("cap {cap} below t* = {t_star}"),
        ));
    }
    let m = instance.contacts_per_slot();
    let kappa = instance.kappa() as usize;
    let law = cartel.contact_law(m)?;
    let (lo, hi) = law.support();
    // Honest contacts per slot H = m - A, with its law.
    let one_slot = law.distribution();
    let honest: Vec<(usize, f64)> = (lo..=hi)
        .map(|a| ((m - a) as usize, one_slot.pmf(a as i64)))
        .collect();

    let mut deficit = vec![0.0f64; kappa + 1];
    deficit[kappa] = 1.0;
    let mut masses = Vec::new();
    let mut residual = 1.0;
    let mut last_ratio = 0.0;
    for t in 1..=cap {
        let mut next = vec![0.0f64; kappa + 1];
        let mut absorbed = 0.0;
        for (d, &p) in deficit.iter().enumerate().skip(1) {
            if p == 0.0 {
                continue;
            }
            for &(h, q) in &honest {
                if h >= d {
                    absorbed += p * q;
                } else {
                    next[d - h] += p * q;
                }
            }
        }
        deficit = next;
        let alive: f64 = deficit.iter().sum();
        if t >= t_star {
            masses.push(absorbed);
            if residual > 0.0 {
                last_ratio = alive / residual;
            }
        }
        residual = alive;
    }
    if residual >= T0_RESIDUAL_TOLERANCE {
        let extra = if last_ratio > 0.0 && last_ratio < 1.0 {
            ((T0_RESIDUAL_TOLERANCE / residual).ln() / last_ratio.ln()).ceil() as u32 + 1
        } else {
            cap
        };
        return Err(Error::HorizonTooShort {
            cap,
            residual,
            suggested: cap.saturating_add(extra),
        });
    }
    Ok(InclusionTimeLaw {
        first_slot: t_star,
        masses,
        residual,
        cap,
    })
}

/// `(B_static, B_ratchet) = (alpha v / beta) (q0, q_rat)`.
pub fn bounty_proxies(beta: f64, econ: &EconParams, q0: f64, q_rat: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let scale = econ.mev_exposure() / beta;
    Ok((scale * q0, scale * q_rat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::exact_q0;

    fn econ() -> EconParams {
        EconParams::normalized(1.0, 100.0, 0.99, 0.0).unwrap()
    }

    fn inst(kappa: u32) -> SystemInstance {
        SystemInstance::from_kappa(100, 20, kappa).unwrap()
    }

    fn cartel() -> Cartel {
        Cartel::from_fraction(100, 0.2).unwrap()
    }

    #[test]
    fn share() {
        assert_eq!(pi_share(1.0, 0.2).unwrap(), 0.2);
        assert_eq!(pi_share(0.0, 0.2).unwrap(), 0.0);
        assert!((pi_share(0.5, 0.2).unwrap() - 0.1 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn fee_bound() {
        assert_eq!(fee_revenue_upper(0.0, 0.2, 20, 1.0, 0.99), 0.0);
        assert!((fee_revenue_upper(1.0, 0.2, 20, 1.0, 0.99) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn gap() {
        let i = inst(100);
        assert!(bounty_gap_lower(1.0, &i, 0.2, 100.0, 0.99).unwrap() <= 0.0);
        assert!(
            bounty_gap_lower(0.0, &i, 0.2, 100.0, 1.0 - 1e-12)
                .unwrap()
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn stationary_check() {
        let e = econ().with_bounty(600.0);
        let c = ic_stationary_check(&inst(100), 0.2, &e, 0.0, 0.993).unwrap();
        assert!(!c.satisfied);
        assert!((c.rhs - 99.3).abs() < 1e-9);
        let c = ic_stationary_check(&inst(400), 0.2, &e, 0.5, 0.0).unwrap();
        assert!(c.satisfied);
    }

    #[test]
    fn knife_edge_thresholds() {
        let c = cartel();
        let e = econ();
        let q = exact_q0(&inst(20), &c).unwrap();
        let k = knife_edge_bounty_threshold(&inst(20), 0.2, &e, q).unwrap();
        assert!((k.b_min - 2475.0).abs() < 10.0, "{}", k.b_min);
        let sum = k.net_fee_sacrifice + k.bounty_discount_loss + k.lost_pivotal_share;
        assert!((sum - k.mev_option).abs() < 1e-9 * k.mev_option);
        let k = knife_edge_bounty_threshold(&inst(100), 0.2, &e, 0.993).unwrap();
        assert!((k.b_min - 10_370.0).abs() < 20.0, "{}", k.b_min);
        assert!(knife_edge_bounty_threshold(&inst(30), 0.2, &e, 0.1).is_err());
    }

    #[test]
    fn coalition() {
        let e = econ();
        assert!((coalition_sufficient_bounty(&inst(10), &e).unwrap() - 880.0).abs() < 1e-9);
        assert!((coalition_sufficient_bounty(&inst(30), &e).unwrap() - 2610.3).abs() < 0.1);
        assert!((coalition_sufficient_bounty(&inst(50), &e).unwrap() - 4301.5).abs() < 0.1);
        assert_eq!(coalition_sufficient_bounty(&inst(20), &e), None);
        let e = econ().with_bounty(60.0);
        assert_eq!(coalition_loss_floor(0, &inst(30), &e), 0.0);
        assert_eq!(coalition_loss_floor(10, &inst(30), &e), 10.0);
        assert!((coalition_loss_floor(11, &inst(30), &e) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn shares() {
        let e = econ();
        assert!((equal_share(&e, &inst(10)) - 9.0).abs() < 0.01);
        assert!((equal_share(&e, &inst(20)) - 99.0).abs() < 1e-9);
        assert!((equal_share(&e, &inst(50)) - 8.82).abs() < 0.01);
    }

    #[test]
    fn phi() {
        let p = phi_threshold(&inst(30), 0.2, &econ(), 0.136).unwrap();
        assert!((p.phi_star - 1.674).abs() < 1e-3, "{}", p.phi_star);
        assert!(!p.feasible);
        assert_eq!(
            phi_threshold(&inst(30), 0.2, &econ(), 0.0)
                .unwrap()
                .phi_star,
            0.0
        );
    }

    #[test]
    fn t0_law() {
        let c = cartel();
        for kappa in [10, 20, 30, 50, 100] {
            let i = inst(kappa);
            let law = distribution_of_t0(&i, &c, default_t0_cap(&i)).unwrap();
            let q0 = exact_q0(&i, &c).unwrap();
            assert!(
                (law.tail_gt(i.t_star()) - q0).abs() < 1e-12,
                "kappa {kappa}"
            );
            assert_eq!(law.pmf(i.t_star() - 1), 0.0);
            let total: f64 = law.masses.iter().sum::<f64>() + law.residual;
            assert!((total - 1.0).abs() < 1e-12);
        }
        let none = Cartel::from_count(100, 0).unwrap();
        let law = distribution_of_t0(&inst(30), &none, 10).unwrap();
        assert_eq!(law.pmf(2), 1.0);
        assert!(matches!(
            distribution_of_t0(&inst(30), &c, 2),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn ir_above_ratchet_proxy() {
        let c = cartel();
        let i = inst(30);
        let q0 = exact_q0(&i, &c).unwrap();
        let law = distribution_of_t0(&i, &c, default_t0_cap(&i)).unwrap();
        let ir = sender_ir_bound(&i, &econ(), q0, law.expected_discount(0.99));
        assert!(ir > 0.04);
        let quiet = distribution_of_t0(&i, &Cartel::from_count(100, 0).unwrap(), 10).unwrap();
        assert!(sender_ir_bound(&i, &econ(), 0.0, quiet.expected_discount(0.99)).abs() < 1e-12);
    }

    #[test]
    fn proxies() {
        let (s, r) = bounty_proxies(0.2, &econ(), 8.0e-5, 8.0e-5).unwrap();
        assert!((s - 0.04).abs() < 1e-12 && (r - 0.04).abs() < 1e-12);
    }

    #[test]
    fn byte_model() {
        let e = EconParams {
            fees: FeeModel::Bytes {
                header_bytes: 100,
                metadata_bytes: 8,
                symbol_bytes: 56,
                per_byte_price: 0.01,
                proposer_share: 0.5,
            },
            bounty: 0.0,
            discount: 0.99,
            mev_fraction: 0.1,
            tx_value: 1000.0,
            net_nonneg: true,
        }
        .validated()
        .unwrap();
        assert_eq!(e.bundle_bytes(2), Some(228));
        assert!((e.bundle_fee(2) - 2.28).abs() < 1e-12);
        assert!(e.proposer_fee(2) <= e.bundle_fee(2));
        assert!((e.mev_exposure() - 100.0).abs() < 1e-12);
    }
}
