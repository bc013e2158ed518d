use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::causal::{CausalLossWeights, EscalationPolicy, InferenceMode};
use crate::data::SplitSetting;
use crate::discovery::{DiscoveryConfig, DEFAULT_J};
use crate::error::{Error, Result};
use crate::predict::LossWeights;

pub const SWEEP_RATIOS: [f64; 4] = [0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "w/o dual-level")]
    WithoutDualLevel,
    #[serde(rename = "w/o specific-level")]
    WithoutSpecificLevel,
    #[serde(rename = "w/o shared-level")]
    WithoutSharedLevel,
    #[serde(rename = "w/o confounder")]
    WithoutConfounder,
    #[serde(rename = "w/ direct-LLM")]
    DirectLlm,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::WithoutDualLevel,
        Ablation::WithoutSpecificLevel,
        Ablation::WithoutSharedLevel,
        Ablation::WithoutConfounder,
        Ablation::DirectLlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutDualLevel => "w/o dual-level",
            Ablation::WithoutSpecificLevel => "w/o specific-level",
            Ablation::WithoutSharedLevel => "w/o shared-level",
            Ablation::WithoutConfounder => "w/o confounder",
            Ablation::DirectLlm => "w/ direct-LLM",
        }
    }

    /// Whether the specific-level structure feeds the target preferences.
    pub fn uses_specific_dag(self) -> bool {
        !matches!(self, Ablation::WithoutDualLevel | Ablation::WithoutSpecificLevel)
    }

    pub fn uses_shared_dag(self) -> bool {
        !matches!(self, Ablation::WithoutDualLevel | Ablation::WithoutSharedLevel)
    }

    pub fn uses_confounders(self) -> bool {
        self != Ablation::WithoutConfounder
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    /// Accepts the display names and a hyphenated form such as `wo-dual-level`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        let compact = |x: &str| x.replace("w/o ", "wo-").replace("w/ ", "w-").replace(' ', "-");
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str().to_lowercase() == key || compact(&a.as_str().to_lowercase()) == key)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub setting: SplitSetting,
    pub region: Option<String>,
    pub shift_ratio: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            setting: SplitSetting::UserDegreeShift,
            region: None,
            shift_ratio: 1.0,
        }
    }
}

impl SplitSpec {
    pub fn label(&self) -> String {
        match (self.setting, &self.region) {
            (SplitSetting::UserDegreeShift, _) => "degree".into(),
            (SplitSetting::RegionShift, Some(r)) => format!("region:{r}"),
            (SplitSetting::RegionShift, None) => "region".into(),
            (SplitSetting::Iid, _) => "iid".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Chat-completions base URL, e.g. `https://host/v1`.
    pub base_url: Option<String>,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub mock: bool,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            base_url: None,
            model: "gpt-4o-mini".into(),
            api_key_env: "CDR_LLM_API_KEY".into(),
            timeout_secs: 120,
            mock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    /// Embeddings endpoint base URL; the hashing encoder is used when absent.
    pub base_url: Option<String>,
    pub model: String,
    pub api_key_env: String,
    pub mock_seed: u64,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            base_url: None,
            model: "all-MiniLM-L6-v2".into(),
            api_key_env: "CDR_ENCODER_API_KEY".into(),
            mock_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source_events: PathBuf,
    pub target_events: PathBuf,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub loss_weights: LossWeights,
    pub causal_weights: CausalLossWeights,
    pub escalation: EscalationPolicy,
    pub inference_mode: InferenceMode,
    pub gcn_layers: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub discovery: DiscoveryConfig,
    pub llm: LlmSettings,
    pub encoder: EncoderSettings,
    pub ablation: Ablation,
    pub split: SplitSpec,
    pub sweep_ratios: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source_events: PathBuf::from("data/source.jsonl"),
            target_events: PathBuf::from("data/target.jsonl"),
            output_dir: PathBuf::from("out"),
            seeds: vec![1, 2, 3, 4, 5],
            k: 64,
            lr: 1e-3,
            batch_size: 256,
            epochs_phase1: 60,
            epochs_phase2: 40,
            loss_weights: LossWeights::default(),
            causal_weights: CausalLossWeights::default(),
            escalation: EscalationPolicy::default(),
            inference_mode: InferenceMode::default(),
            gcn_layers: crate::representation::gcn::DEFAULT_LAYERS,
            j: DEFAULT_J,
            discovery: DiscoveryConfig::default(),
            llm: LlmSettings::default(),
            encoder: EncoderSettings::default(),
            ablation: Ablation::Full,
            split: SplitSpec::default(),
            sweep_ratios: SWEEP_RATIOS.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: RunConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.batch_size == 0 || self.j == 0 || self.gcn_layers == 0 {
            return Err(Error::InvalidInput("k, batch_size, J and gcn_layers must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidInput(format!("learning rate {} must be positive", self.lr)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if let Some(r) = self.sweep_ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidInput(format!("sweep ratio {r} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.split.shift_ratio) {
            return Err(Error::InvalidInput(format!("shift ratio {} outside [0, 1]", self.split.shift_ratio)));
        }
        if self.split.setting == SplitSetting::RegionShift && self.split.region.is_none() {
            return Err(Error::InvalidInput("region shift needs split.region".into()));
        }
        self.loss_weights.validate()?;
        self.causal_weights.validate()
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// First 16 hex digits of [`RunConfig::hash`].
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.k, c.batch_size, c.epochs_phase1, c.epochs_phase2, c.j), (64, 256, 60, 40, 10));
        assert_eq!(c.lr, 1e-3);
        assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(c.sweep_ratios, vec![0.4, 0.6, 0.8, 1.0]);
        assert_eq!(c.discovery.tau_max, 3);
        c.validate().unwrap();
    }

    #[test]
    fn variants_round_trip() {
        for a in Ablation::ALL {
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Ablation>(&json).unwrap(), a);
            assert_eq!(a.as_str().parse::<Ablation>().unwrap(), a);
            let c = RunConfig { ablation: a, ..Default::default() };
            let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert_eq!("wo-dual-level".parse::<Ablation>().unwrap(), Ablation::WithoutDualLevel);
        assert_eq!("w-direct-llm".parse::<Ablation>().unwrap(), Ablation::DirectLlm);
        assert!(matches!("w/o everything".parse::<Ablation>(), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { k: 32, ..Default::default() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.short_hash().len(), 16);
    }

    #[test]
    fn partial_json_fills_defaults_and_rejects_typos() {
        let c: RunConfig = serde_json::from_str(r#"{"k": 16, "ablation": "w/o confounder"}"#).unwrap();
        assert_eq!(c.k, 16);
        assert_eq!(c.ablation, Ablation::WithoutConfounder);
        assert_eq!(c.epochs_phase1, 60);
        assert!(serde_json::from_str::<RunConfig>(r#"{"kk": 16}"#).is_err());
    }
}
