use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cartel, SystemInstance};
use crate::incentives::{EconParams, FeeModel};
use crate::intra_slot::{ArrivalModel, RaceModel};
use crate::simulator::{AdversaryPolicy, MechanismMode};

/// Economics as written in a config file. The two modes are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EconConfig {
    Normalized {
        proposer_fee: f64,
        mev_exposure: f64,
        discount: f64,
        #[serde(default)]
        bounty: f64,
    },
    ByteModel {
        header_bytes: u64,
        metadata_bytes: u64,
        symbol_bytes: u64,
        per_byte_price: f64,
        proposer_share: f64,
        discount: f64,
        mev_fraction: f64,
        tx_value: f64,
        #[serde(default)]
        bounty: f64,
    },
}

impl Default for EconConfig {
    fn default() -> Self {
        EconConfig::Normalized {
            proposer_fee: 1.0,
            mev_exposure: 100.0,
            discount: 0.99,
            bounty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// Honest-miss probability for the ratchet sweep.
    pub epsilon: f64,
    /// Paths for the pathwise battery.
    pub verify_paths: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            trials: 20_000,
            seed: 20_240_601,
            epsilon: 0.0,
            verify_paths: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kappa_min: u32,
    pub kappa_max: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kappa_min: 1,
            kappa_max: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub kappa: u32,
    pub tiers: Vec<MevTier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MevTier {
    pub label: String,
    pub mev_usd: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        let tier = |label: &str, mev_usd| MevTier {
            label: label.into(),
            mev_usd,
        };
        CostConfig {
            kappa: 30,
            tiers: vec![
                tier("Routine swap", 5.0),
                tier("Sandwich / arb", 50.0),
                tier("Liquidation", 5000.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub traces: Option<String>,
    pub policy: AdversaryPolicy,
    pub mechanism: MechanismMode,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            traces: None,
            policy: AdversaryPolicy::FullWithhold,
            mechanism: MechanismMode::ExactRational,
        }
    }
}

/// Everything a command needs. Exactly one of `K` and `kappa` may be set;
/// with neither, the default bundle thresholds are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n: u32,
    pub m: u32,
    pub s: u32,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<u32>>,
    pub beta: f64,
    pub econ: EconConfig,
    /// USD per normalized fee unit.
    pub unit_price_usd: f64,
    pub mc: McConfig,
    pub sweep: SweepConfig,
    pub race: RaceModel,
    pub cost: CostConfig,
    /// Operating point for `advise`, in bundles.
    pub advise_kappa: u32,
    pub output: OutputConfig,
}

pub const DEFAULT_KAPPAS: [u32; 5] = [10, 20, 30, 50, 100];

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n: 100,
            m: 20,
            s: 1,
            k_values: None,
            kappa: None,
            beta: 0.2,
            econ: EconConfig::default(),
            unit_price_usd: 0.10,
            mc: McConfig::default(),
            sweep: SweepConfig::default(),
            race: RaceModel {
                slot_duration: 1.0,
                seal_deadline: 1.0,
                reaction_time: 0.25,
                arrival: ArrivalModel::TruncatedExponential { rate: 4.0 },
            },
            cost: CostConfig::default(),
            advise_kappa: 30,
            output: OutputConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        AnalysisConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "lane count must be positive"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::config(
                "m",
                format!("need 1 <= m <= n, got m={} n={}", self.m, self.n),
            ));
        }
        if self.s == 0 {
            return Err(Error::config("s", "symbols per bundle must be positive"));
        }
        if self.k_values.is_some() && self.kappa.is_some() {
            return Err(Error::config(
                "K/kappa",
                "give exactly one of `K` and `kappa`",
            ));
        }
        for (field, list) in [("K", &self.k_values), ("kappa", &self.kappa)] {
            if let Some(list) = list {
                if list.is_empty() || list.contains(&0) {
                    return Err(Error::config(
                        field,
                        "list must be nonempty with positive entries",
                    ));
                }
            }
        }
        self.cartel()?;
        self.econ_params()?;
        if !(self.unit_price_usd >= 0.0) {
            return Err(Error::config("unit_price_usd", "must be nonnegative"));
        }
        if self.mc.trials == 0 {
            return Err(Error::config("mc.trials", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.mc.epsilon) {
            return Err(Error::config("mc.epsilon", "must lie in [0,1)"));
        }
        if self.sweep.kappa_min == 0 || self.sweep.kappa_min > self.sweep.kappa_max {
            return Err(Error::config("sweep", "empty or invalid kappa range"));
        }
        RaceModel::new(
            self.race.slot_duration,
            self.race.seal_deadline,
            self.race.reaction_time,
            self.race.arrival.clone(),
        )
        .map_err(|e| Error::config("race", e.to_string()))?;
        if self.cost.kappa == 0 || self.cost.tiers.is_empty() {
            return Err(Error::config(
                "cost",
                "need a positive kappa and at least one tier",
            ));
        }
        if self.advise_kappa == 0 {
            return Err(Error::config("advise_kappa", "must be positive"));
        }
        self.output
            .policy
            .validate()
            .map_err(|e| Error::config("output.policy", e.to_string()))?;
        Ok(())
    }

    pub fn cartel(&self) -> Result<Cartel> {
        Cartel::from_fraction(self.n, self.beta).map_err(|e| Error::config("beta", e.to_string()))
    }

    pub fn econ_params(&self) -> Result<EconParams> {
        let params = match &self.econ {
            EconConfig::Normalized {
                proposer_fee,
                mev_exposure,
                discount,
                bounty,
            } => EconParams::normalized(*proposer_fee, *mev_exposure, *discount, *bounty),
            EconConfig::ByteModel {
                header_bytes,
                metadata_bytes,
                symbol_bytes,
                per_byte_price,
                proposer_share,
                discount,
                mev_fraction,
                tx_value,
                bounty,
            } => EconParams {
                fees: FeeModel::Bytes {
                    header_bytes: *header_bytes,
                    metadata_bytes: *metadata_bytes,
                    symbol_bytes: *symbol_bytes,
                    per_byte_price: *per_byte_price,
                    proposer_share: *proposer_share,
                },
                bounty: *bounty,
                discount: *discount,
                mev_fraction: *mev_fraction,
                tx_value: *tx_value,
                net_nonneg: true,
            }
            .validated(),
        };
        params.map_err(|e| Error::config("econ", e.to_string()))
    }

    /// One instance per configured threshold.
    pub fn instances(&self) -> Result<Vec<SystemInstance>> {
        let build = |k: u32| {
            SystemInstance::new(self.n, self.m, self.s, k)
                .map_err(|e| Error::config("instance", e.to_string()))
        };
        match (&self.k_values, &self.kappa) {
            (Some(ks), None) => ks.iter().map(|&k| build(k)).collect(),
            (None, Some(kappas)) => kappas.iter().map(|&k| build(k * self.s)).collect(),
            (None, None) => DEFAULT_KAPPAS.iter().map(|&k| build(k * self.s)).collect(),
            _ => Err(Error::config(
                "K/kappa",
                "give exactly one of `K` and `kappa`",
            )),
        }
    }

    pub fn sweep_kappas(&self) -> Vec<u32> {
        (self.sweep.kappa_min..=self.sweep.kappa_max).collect()
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.mc.seed = seed;
        }
        self
    }
}
