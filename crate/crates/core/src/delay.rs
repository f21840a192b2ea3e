//! Delay probabilities for a static sender facing a withholding cartel.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::geometry::{Cartel, SystemInstance};
use crate::intra_slot::q_micro;
use crate::probability::{chernoff_tail_bound, convolve_iid, kl_divergence, TailSide};
use crate::ratchet::q_rat_first_slot;

/// `q0 = P[S_{t*} > slack]`: delay probability under full withholding.
pub fn exact_q0(instance: &SystemInstance, cartel: &Cartel) -> Result<f64> {
    cartel.check_instance(instance)?;
    let law = cartel.contact_law(instance.contacts_per_slot())?;
    let cumulative = convolve_iid(&law, instance.t_star())?;
    Ok(cumulative.tail_gt(instance.slack() as i64))
}

/// Closed form `1 - P[A = 0]^{t*}` valid on knife-edge instances.
pub fn knife_edge_q0(instance: &SystemInstance, cartel: &Cartel) -> Result<f64> {
    cartel.check_instance(instance)?;
    if !instance.is_knife_edge() {
        return Err(Error::NotKnifeEdge {
            slack: instance.slack(),
        });
    }
    let law = cartel.contact_law(instance.contacts_per_slot())?;
    let ln_p0 = law.ln_pmf_zero();
    if ln_p0 == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(-(instance.t_star() as f64 * ln_p0).exp_m1())
}

/// Position of the critical density `theta_w` relative to the cartel fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRegime {
    /// `theta_w > beta`: the bound controls `q`.
    DelayRare,
    /// `theta_w < beta`: the bound controls `1 - q`.
    DelayLikely,
    /// `theta_w >= 1`: the cartel cannot intercept enough mass.
    Impossible,
    /// `theta_w = beta`: no exponential bound.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub inclusion_rate: f64,
    pub theta_w: f64,
    pub regime: DelayRegime,
    pub exact_probability: f64,
    /// `exp{-t* m D(theta_w || beta)}`; bounds `q` when the regime is
    /// [`DelayRegime::DelayRare`] and `1 - q` when it is
    /// [`DelayRegime::DelayLikely`].
    pub kl_bound: Option<f64>,
    /// Smallest cumulative contact count that delays inclusion.
    pub delay_threshold: i64,
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Fluid stationary-model delay report for inclusion rate `w in [0, 1)`.
pub fn fluid_delay_report(
    instance: &SystemInstance,
    cartel: &Cartel,
    w: f64,
) -> Result<DelayReport> {
    cartel.check_instance(instance)?;
    if !(0.0..1.0).contains(&w) {
        return Err(Error::param(
            "w",
            format!("inclusion rate {w} outside [0,1); w = 1 is delay-free"),
        ));
    }
    let w_exact = BigRational::from_float(w).ok_or_else(|| Error::param("w", "not finite"))?;
    let withheld = BigRational::one() - w_exact;
    let slack = BigRational::from_integer(BigInt::from(instance.slack()));
    let horizon_mass = (instance.t_star() * instance.contacts_per_slot()) as i64;

    // (1-w) S > slack  <=>  S >= floor(slack / (1-w)) + 1
    let cut = (&slack / &withheld).floor();
    let delay_threshold = cut
        .to_integer()
        .to_i64()
        .unwrap_or(i64::MAX / 2)
        .saturating_add(1);

    let theta = &slack / (&withheld * BigRational::from_integer(BigInt::from(horizon_mass)));
    let beta = ratio(cartel.members() as i64, cartel.lanes() as i64);
    let theta_w = theta.to_f64().unwrap_or(f64::INFINITY);

    let law = cartel.contact_law(instance.contacts_per_slot())?;
    let cumulative = convolve_iid(&law, instance.t_star())?;

    let (regime, exact, kl_bound) = if theta >= BigRational::one() {
        (DelayRegime::Impossible, 0.0, None)
    } else {
        let exact = cumulative.tail_ge(delay_threshold);
        let diff = &theta - &beta;
        if diff.is_zero() {
            (DelayRegime::Degenerate, exact, None)
        } else if diff.is_positive() {
            let b = chernoff_tail_bound(
                instance.t_star(),
                instance.contacts_per_slot(),
                theta_w,
                cartel.beta(),
                TailSide::Upper,
            )?;
            (DelayRegime::DelayRare, exact, Some(b))
        } else {
            let b = chernoff_tail_bound(
                instance.t_star(),
                instance.contacts_per_slot(),
                theta_w,
                cartel.beta(),
                TailSide::Lower,
            )?;
            (DelayRegime::DelayLikely, exact, Some(b))
        }
    };
    Ok(DelayReport {
        inclusion_rate: w,
        theta_w,
        regime,
        exact_probability: exact,
        kl_bound,
        delay_threshold,
    })
}

/// Upper bound on `1 - q0` from the lower-tail KL exponent; 1 when vacuous.
pub fn no_delay_upper(instance: &SystemInstance, cartel: &Cartel) -> Result<f64> {
    cartel.check_instance(instance)?;
    let horizon_mass = instance.t_star() * instance.contacts_per_slot();
    let theta = instance.slack() as f64 / horizon_mass as f64;
    let beta = cartel.beta();
    // Exact comparison slack / (t* m) < members / lanes.
    let below = (instance.slack() as u64) * (cartel.lanes() as u64)
        < (cartel.members() as u64) * (horizon_mass as u64);
    if !below || beta <= 0.0 || beta >= 1.0 {
        return Ok(1.0);
    }
    let d = kl_divergence(theta, beta)?;
    Ok((-(horizon_mass as f64) * d).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: u32,
    pub t_star: u32,
    pub delta: u32,
    pub q0: f64,
    pub q_rat: f64,
    pub q_micro: f64,
    pub knife_edge: bool,
}

/// One row per `kappa`, in input order.
pub fn sawtooth_sweep(
    n: u32,
    m: u32,
    cartel: &Cartel,
    kappas: &[u32],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if kappas.is_empty() {
        return Err(Error::param("kappa_range", "empty sweep range"));
    }
    map_slice(exec, kappas, |&kappa| {
        let instance = SystemInstance::from_kappa(n, m, kappa)?;
        let q0 = exact_q0(&instance, cartel)?;
        let q_rat = q_rat_first_slot(&instance.static_schedule(), cartel)?;
        let q_micro = q_micro(&instance, cartel)?.value;
        Ok(SweepRow {
            kappa,
            t_star: instance.t_star(),
            delta: instance.slack(),
            q0,
            q_rat,
            q_micro,
            knife_edge: instance.is_knife_edge(),
        })
    })
    .into_iter()
    .collect()
}

/// CSV with header `kappa,t_star,delta,q0,q_rat,q_micro,knife_edge`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(kappa: u32) -> (SystemInstance, Cartel) {
        (
            SystemInstance::from_kappa(100, 20, kappa).unwrap(),
            Cartel::from_fraction(100, 0.2).unwrap(),
        )
    }

    #[test]
    fn q0_table_rows() {
        let (i, c) = table(10);
        let q = exact_q0(&i, &c).unwrap();
        assert!((7.95e-5..8.05e-5).contains(&q));
        let (i, c) = table(30);
        assert!((exact_q0(&i, &c).unwrap() - 0.136).abs() < 5e-4);
        let none = Cartel::from_count(100, 0).unwrap();
        assert_eq!(exact_q0(&i, &none).unwrap(), 0.0);
    }

    #[test]
    fn knife_edge_closed_form() {
        let (i, c) = table(20);
        let k = knife_edge_q0(&i, &c).unwrap();
        assert!((k - 0.993).abs() < 5e-4);
        assert!((k - exact_q0(&i, &c).unwrap()).abs() < 1e-12);
        let (i, c) = table(100);
        let k = knife_edge_q0(&i, &c).unwrap();
        assert!(k > 1.0 - 1e-4 && k < 1.0);
        let (i, _) = table(20);
        assert_eq!(
            knife_edge_q0(&i, &Cartel::from_count(100, 0).unwrap()).unwrap(),
            0.0
        );
        let (i, c) = table(30);
        assert!(matches!(
            knife_edge_q0(&i, &c),
            Err(Error::NotKnifeEdge { .. })
        ));
    }

    #[test]
    fn fluid_report_regimes() {
        let (i, c) = table(20);
        for w in [0.0, 0.3, 0.9] {
            let r = fluid_delay_report(&i, &c, w).unwrap();
            assert_eq!(r.theta_w, 0.0);
            assert_eq!(r.regime, DelayRegime::DelayLikely);
            assert!((r.exact_probability - knife_edge_q0(&i, &c).unwrap()).abs() < 1e-12);
        }
        let (i, c) = table(10);
        // slack 10, t* m = 20: theta_w = 10 / (20 (1-w)) >= 1 once w >= 0.5
        let r = fluid_delay_report(&i, &c, 0.5).unwrap();
        assert_eq!(r.regime, DelayRegime::Impossible);
        assert_eq!(r.exact_probability, 0.0);
        assert!(fluid_delay_report(&i, &c, 1.0).is_err());

        let (i, c) = table(30);
        let r = fluid_delay_report(&i, &c, 0.0).unwrap();
        assert_eq!(r.regime, DelayRegime::DelayRare);
        assert!((r.exact_probability - exact_q0(&i, &c).unwrap()).abs() < 1e-15);
        let expected = (-40.0 * kl_divergence(0.25, 0.2).unwrap()).exp();
        assert!((r.kl_bound.unwrap() - expected).abs() < 1e-15);
        assert!(r.exact_probability <= r.kl_bound.unwrap());
    }

    #[test]
    fn fluid_threshold_is_strict_at_boundary() {
        // slack 10, w = 0.5: (1-w) S > 10 needs S >= 21, not S >= 20.
        let (i, c) = table(30);
        let r = fluid_delay_report(&i, &c, 0.5).unwrap();
        assert_eq!(r.delay_threshold, 21);
        // theta = 10 / (0.5 * 40) = 0.5 > beta
        assert_eq!(r.regime, DelayRegime::DelayRare);
    }

    #[test]
    fn degenerate_regime() {
        // slack 8 over t* m = 40 at w = 0: theta = 0.2 = beta
        let (i, c) = table(32);
        let r = fluid_delay_report(&i, &c, 0.0).unwrap();
        assert_eq!(r.regime, DelayRegime::Degenerate);
        assert!(r.kl_bound.is_none());
    }

    #[test]
    fn no_delay_bound_vacuous_and_decaying() {
        let (i, c) = table(10);
        assert_eq!(no_delay_upper(&i, &c).unwrap(), 1.0);
        let big = SystemInstance::from_kappa(100, 20, 2000).unwrap();
        assert!(no_delay_upper(&big, &c).unwrap() < 1e-30);
    }

    #[test]
    fn sweep_rows_and_csv() {
        let c = Cartel::from_fraction(100, 0.2).unwrap();
        let kappas: Vec<u32> = (1..=40).collect();
        let rows = sawtooth_sweep(100, 20, &c, &kappas, Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows[19].knife_edge && rows[39].knife_edge);
        for r in rows.iter().filter(|r| r.kappa <= 20) {
            assert_eq!(r.q0, r.q_rat);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("kappa,t_star,delta,q0,q_rat,q_micro,knife_edge\n"));
        assert_eq!(text.lines().count(), 41);
        assert!(sawtooth_sweep(100, 20, &c, &[], Execution::Sequential).is_err());
    }
}
