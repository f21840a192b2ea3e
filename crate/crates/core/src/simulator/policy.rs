use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartel inclusion policy. Decisions see only the slot, the cartel's own
/// contacts in that slot and its running withheld count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryPolicy {
    FullInclude,
    FullWithhold,
    /// Each cartel bundle included independently with probability `w`.
    StationaryW {
        w: f64,
    },
    /// Withholds until `slack + 1` bundles are withheld within the honest
    /// horizon, then includes everything.
    MinimalSabotage,
    /// Withholds at most `caps[t-1]` bundles in slot `t`; includes all
    /// beyond the vector.
    RatchetSpread {
        caps: Vec<u32>,
    },
    /// Includes at most `inclusions[t-1]` bundles in slot `t`; includes all
    /// beyond the vector.
    Scripted {
        inclusions: Vec<u32>,
    },
}

/// What a policy may condition on.
#[derive(Debug, Clone, Copy)]
pub struct SlotView {
    pub slot: u32,
    pub t_star: u32,
    pub slack: u32,
    pub withheld_so_far: u32,
}

impl AdversaryPolicy {
    pub fn validate(&self) -> Result<()> {
        if let AdversaryPolicy::StationaryW { w } = self {
            if !(0.0..=1.0).contains(w) {
                return Err(Error::param("w", "inclusion probability must lie in [0,1]"));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            AdversaryPolicy::FullInclude => "full_include".into(),
            AdversaryPolicy::FullWithhold => "full_withhold".into(),
            AdversaryPolicy::StationaryW { w } => format!("stationary_w({w})"),
            AdversaryPolicy::MinimalSabotage => "minimal_sabotage".into(),
            AdversaryPolicy::RatchetSpread { caps } => format!("ratchet_spread({caps:?})"),
            AdversaryPolicy::Scripted { inclusions } => format!("scripted({inclusions:?})"),
        }
    }

    /// Inclusion mask over the slot's cartel bundles in resolution order.
    /// Count-based policies keep the earliest bundles.
    pub(crate) fn decide(
        &self,
        view: SlotView,
        contacts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<bool> {
        let keep_first = |x: usize| (0..contacts).map(|i| i < x).collect::<Vec<bool>>();
        let t = view.slot as usize;
        match self {
            AdversaryPolicy::FullInclude => vec![true; contacts],
            AdversaryPolicy::FullWithhold => vec![false; contacts],
            AdversaryPolicy::StationaryW { w } => {
                (0..contacts).map(|_| rng.random_bool(*w)).collect()
            }
            AdversaryPolicy::MinimalSabotage => {
                if view.slot > view.t_star {
                    return vec![true; contacts];
                }
                let need = (view.slack + 1).saturating_sub(view.withheld_so_far) as usize;
                keep_first(contacts - need.min(contacts))
            }
            AdversaryPolicy::RatchetSpread { caps } => match caps.get(t - 1) {
                Some(&cap) => keep_first(contacts - (cap as usize).min(contacts)),
                None => vec![true; contacts],
            },
            AdversaryPolicy::Scripted { inclusions } => match inclusions.get(t - 1) {
                Some(&x) => keep_first((x as usize).min(contacts)),
                None => vec![true; contacts],
            },
        }
    }
}
