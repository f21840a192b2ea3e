//! Dissemination geometry: decode threshold in bundles, honest horizon,
//! slack and final-slot deficit, for static and time-varying schedules.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::HypergeomLaw;

/// A cartel controlling an integral number of the `lanes` lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cartel {
    lanes: u32,
    members: u32,
}

impl Cartel {
    pub fn from_count(lanes: u32, members: u32) -> Result<Self> {
        if lanes == 0 || members > lanes {
            return Err(Error::param(
                "cartel",
                format!("{members} cartel lanes out of {lanes}"),
            ));
        }
        Ok(Cartel { lanes, members })
    }

    /// Accepts `beta` only when `beta * lanes` is integral (to 1e-9).
    pub fn from_fraction(lanes: u32, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || lanes == 0 {
            return Err(Error::param("beta", format!("{beta} outside [0,1]")));
        }
        let exact = beta * lanes as f64;
        let nearest = exact.round();
        if (exact - nearest).abs() > 1e-9 {
            let suggested = nearest as u32;
            return Err(Error::NonIntegralCartel {
                beta,
                lanes,
                suggested,
                suggested_beta: suggested as f64 / lanes as f64,
            });
        }
        Cartel::from_count(lanes, nearest as u32)
    }

    pub fn lanes(&self) -> u32 {
        self.lanes
    }

    pub fn members(&self) -> u32 {
        self.members
    }

    pub fn beta(&self) -> f64 {
        self.members as f64 / self.lanes as f64
    }

    pub fn beta_ratio(&self) -> Ratio<i64> {
        Ratio::new(self.members as i64, self.lanes as i64)
    }

    /// Per-slot contact law for `draws` contacted lanes.
    pub fn contact_law(&self, draws: u32) -> Result<HypergeomLaw> {
        HypergeomLaw::new(self.lanes, self.members, draws)
    }

    pub(crate) fn check_instance(&self, instance: &SystemInstance) -> Result<()> {
        if self.lanes != instance.lanes() {
            return Err(Error::CartelMismatch {
                cartel_lanes: self.lanes,
                instance_lanes: instance.lanes(),
            });
        }
        Ok(())
    }
}

/// The four primitive parameters; everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub n: u32,
    pub m: u32,
    pub s: u32,
    #[serde(rename = "K")]
    pub k: u32,
}

/// Static-sender dissemination geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceParams", into = "InstanceParams")]
pub struct SystemInstance {
    params: InstanceParams,
    kappa: u32,
    t_star: u32,
    slack: u32,
    final_deficit: u32,
    final_bundle_indices: u32,
}

impl SystemInstance {
    pub fn new(n: u32, m: u32, s: u32, k: u32) -> Result<Self> {
        if n == 0 || m == 0 || s == 0 || k == 0 {
            return Err(Error::InvalidInstance(format!(
                "all of n, m, s, K must be positive (n={n}, m={m}, s={s}, K={k})"
            )));
        }
        if m > n {
            return Err(Error::InvalidInstance(format!(
                "contacts per slot m={m} exceeds lane count n={n}"
            )));
        }
        let kappa = k.div_ceil(s);
        let t_star = kappa.div_ceil(m);
        let slack = t_star * m - kappa;
        Ok(SystemInstance {
            params: InstanceParams { n, m, s, k },
            kappa,
            t_star,
            slack,
            final_deficit: m - slack,
            final_bundle_indices: k - (kappa - 1) * s,
        })
    }

    /// One symbol per bundle, so `K = kappa`.
    pub fn from_kappa(n: u32, m: u32, kappa: u32) -> Result<Self> {
        SystemInstance::new(n, m, 1, kappa)
    }

    pub fn params(&self) -> InstanceParams {
        self.params
    }

    pub fn lanes(&self) -> u32 {
        self.params.n
    }

    pub fn contacts_per_slot(&self) -> u32 {
        self.params.m
    }

    pub fn symbols_per_bundle(&self) -> u32 {
        self.params.s
    }

    pub fn decode_threshold_symbols(&self) -> u32 {
        self.params.k
    }

    /// Bundles needed to decode, `ceil(K / s)`.
    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Honest inclusion horizon `ceil(kappa / m)`.
    pub fn t_star(&self) -> u32 {
        self.t_star
    }

    /// Redundant bundles at the honest horizon, `t* m - kappa`.
    pub fn slack(&self) -> u32 {
        self.slack
    }

    /// Bundles still needed at the start of slot `t*`, `m - slack`.
    pub fn final_deficit(&self) -> u32 {
        self.final_deficit
    }

    /// Pivotal indices carried by the last pivotal bundle, `K - (kappa-1) s`.
    pub fn final_bundle_indices(&self) -> u32 {
        self.final_bundle_indices
    }

    pub fn is_knife_edge(&self) -> bool {
        self.slack == 0
    }

    /// The static schedule `(m, m, ..., m)` up to the honest horizon.
    pub fn static_schedule(&self) -> ContactSchedule {
        ContactSchedule::new(vec![self.params.m; self.t_star as usize], self.kappa)
            .expect("static schedule reaches kappa at t*")
    }
}

impl TryFrom<InstanceParams> for SystemInstance {
    type Error = Error;

    fn try_from(p: InstanceParams) -> Result<Self> {
        SystemInstance::new(p.n, p.m, p.s, p.k)
    }
}

impl From<SystemInstance> for InstanceParams {
    fn from(i: SystemInstance) -> Self {
        i.params
    }
}

/// A finite per-slot contact schedule `m_1, m_2, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactSchedule {
    per_slot: Vec<u32>,
    cumulative: Vec<u64>,
    kappa: u32,
    t_star: u32,
    slack: u32,
}

impl ContactSchedule {
    /// Fails when no prefix of the schedule reaches `kappa`.
    pub fn new(per_slot: Vec<u32>, kappa: u32) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        let mut cumulative = Vec::with_capacity(per_slot.len());
        let mut total = 0u64;
        for m in &per_slot {
            total += *m as u64;
            cumulative.push(total);
        }
        let t_star = cumulative
            .iter()
            .position(|&c| c >= kappa as u64)
            .ok_or(Error::ScheduleTooShort { kappa, total })?;
        let slack = (cumulative[t_star] - kappa as u64) as u32;
        Ok(ContactSchedule {
            per_slot,
            cumulative,
            kappa,
            t_star: t_star as u32 + 1,
            slack,
        })
    }

    pub fn per_slot(&self) -> &[u32] {
        &self.per_slot
    }

    /// `M_t` for `t` in `1..=len`.
    pub fn cumulative(&self, t: u32) -> u64 {
        if t == 0 {
            0
        } else {
            self.cumulative[t as usize - 1]
        }
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn t_star(&self) -> u32 {
        self.t_star
    }

    pub fn slack(&self) -> u32 {
        self.slack
    }

    /// Planned contacts through the horizon, `M_{t*}`.
    pub fn planned_contacts(&self) -> u64 {
        self.cumulative(self.t_star)
    }

    /// Recovery slack `M_{t*} - kappa` used by the first-slot ratchet bound.
    pub fn recovery_slack(&self) -> u32 {
        self.slack
    }

    pub fn first_slot_contacts(&self) -> u32 {
        self.per_slot[0]
    }

    pub fn check_lanes(&self, n: u32) -> Result<()> {
        match self.per_slot.iter().find(|m| **m > n) {
            Some(m) => Err(Error::param(
                "schedule",
                format!("slot contacts {m} exceed lane count {n}"),
            )),
            None => Ok(()),
        }
    }
}

/// Convenience wrapper around [`ContactSchedule::new`].
pub fn derive_schedule(per_slot: Vec<u32>, kappa: u32) -> Result<ContactSchedule> {
    ContactSchedule::new(per_slot, kappa)
}

/// Convenience wrapper around [`SystemInstance::new`].
pub fn derive_instance(n: u32, m: u32, s: u32, k: u32) -> Result<SystemInstance> {
    SystemInstance::new(n, m, s, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_instances() {
        let i = derive_instance(100, 20, 1, 10).unwrap();
        assert_eq!(
            (i.kappa(), i.t_star(), i.slack(), i.final_deficit()),
            (10, 1, 10, 10)
        );
        let i = derive_instance(100, 20, 1, 20).unwrap();
        assert_eq!((i.kappa(), i.t_star(), i.slack()), (20, 1, 0));
        assert!(i.is_knife_edge());
        let i = derive_instance(100, 20, 1, 30).unwrap();
        assert_eq!((i.kappa(), i.t_star(), i.slack()), (30, 2, 10));
        assert!(!i.is_knife_edge());
    }

    #[test]
    fn non_divisible_threshold() {
        let i = derive_instance(50, 5, 4, 10).unwrap();
        assert_eq!(i.kappa(), 3);
        assert_eq!(i.final_bundle_indices(), 2);
    }

    #[test]
    fn invalid_instances() {
        assert!(derive_instance(10, 11, 1, 5).is_err());
        assert!(derive_instance(0, 0, 1, 5).is_err());
        assert!(derive_instance(10, 5, 0, 5).is_err());
        assert!(derive_instance(10, 5, 1, 0).is_err());
    }

    #[test]
    fn sawtooth() {
        let m = 20;
        for kappa in 1..=10 * m {
            let i = SystemInstance::from_kappa(1000, m, kappa).unwrap();
            assert_eq!(i.slack() == 0, kappa % m == 0);
            assert_eq!(i.final_deficit() + i.slack(), m);
            let next = SystemInstance::from_kappa(1000, m, kappa + 1).unwrap();
            if kappa % m == 0 {
                assert_eq!(next.slack(), m - 1);
            } else {
                assert_eq!(next.slack(), i.slack() - 1);
            }
        }
    }

    #[test]
    fn schedules() {
        let s = derive_schedule(vec![20, 20], 30).unwrap();
        assert_eq!(
            (s.t_star(), s.planned_contacts(), s.recovery_slack()),
            (2, 40, 10)
        );
        let s = derive_schedule(vec![25], 20).unwrap();
        assert_eq!((s.t_star(), s.slack()), (1, 5));
        assert!(derive_schedule(vec![5, 5], 11).is_err());
        for kappa in 1..=100 {
            let i = SystemInstance::from_kappa(100, 20, kappa).unwrap();
            let s = i.static_schedule();
            assert_eq!((s.t_star(), s.slack()), (i.t_star(), i.slack()));
        }
    }

    #[test]
    fn cartel_fraction() {
        assert_eq!(Cartel::from_fraction(100, 0.2).unwrap().members(), 20);
        match Cartel::from_fraction(100, 0.205) {
            Err(Error::NonIntegralCartel { suggested, .. }) => {
                assert!(suggested == 20 || suggested == 21)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn instance_json_carries_only_primitives() {
        let i = derive_instance(100, 20, 3, 31).unwrap();
        let text = serde_json::to_string(&i).unwrap();
        assert_eq!(text, r#"{"n":100,"m":20,"s":3,"K":31}"#);
        let back: SystemInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, i);
        assert!(serde_json::from_str::<SystemInstance>(r#"{"n":10,"m":20,"s":1,"K":5}"#).is_err());
    }
}
