//! Scenario configuration.
//!
//! Scenarios are TOML documents. Every field except `agents` has a default,
//! and [`parse_config`] returns a fully resolved [`SimConfig`] whose
//! serialization ([`SimConfig::to_toml`]) parses back to the same value.
//!
//! ```toml
//! [[agents]]
//! id = 0
//! talkativeness = 0.05
//!
//! [[agents]]
//! id = 1
//! initial_state = "Speaking"
//!
//! [initial_attitudes]
//! default = { liking = 0.0, dominance = 0.0 }
//! overrides = [{ from = 1, to = 0, liking = 0.5, dominance = -0.2 }]
//!
//! [dynamics]
//! delta_dominance = 0.1
//! delta_liking = 0.1
//! yield_threshold = 0.0
//! mean_utterance_ticks = 20.0
//!
//! [perception]
//! mode = "inferred"          # or "oracle"
//! noise_flip = 0.02
//! hmm_stay_probability = 0.8
//! emission_preset = "default" # or "ideal"
//! emission.Speaking = { gaze = 0.8 }
//!
//! [run]
//! ticks = 5000
//! seed = 42
//!
//! [metrics]
//! window = 500
//! epsilon = 0.05
//! k = 4
//! lag = 0
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dialogue::{AgentId, ConversationalState};
use crate::error::{Error, Result};
use crate::perception::{EmissionModel, StateEmission};
use crate::scalar::Scalar;

pub const DEFAULT_TALKATIVENESS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub initial_attitudes: InitialAttitudes,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    #[serde(default = "default_talkativeness")]
    pub talkativeness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<ConversationalState>,
}

fn default_talkativeness() -> f64 {
    DEFAULT_TALKATIVENESS
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeSpec {
    #[serde(default)]
    pub liking: f64,
    #[serde(default)]
    pub dominance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeOverride {
    pub from: AgentId,
    pub to: AgentId,
    #[serde(default)]
    pub liking: f64,
    #[serde(default)]
    pub dominance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialAttitudes {
    #[serde(default)]
    pub default: AttitudeSpec,
    #[serde(default)]
    pub overrides: Vec<AttitudeOverride>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub delta_dominance: f64,
    pub delta_liking: f64,
    /// A speaker yields to a newcomer toward whom its dominance is at least this.
    pub yield_threshold: f64,
    pub mean_utterance_ticks: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            delta_dominance: 0.1,
            delta_liking: 0.1,
            yield_threshold: 0.0,
            mean_utterance_ticks: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionMode {
    /// Agents read each other's true states.
    Oracle,
    /// Agents filter cues through the HMM and act on the MAP state.
    #[default]
    Inferred,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionPreset {
    #[default]
    Default,
    Ideal,
}

/// Channel probabilities for one state. Missing channels fall back to the preset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaking: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backchannel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    pub mode: PerceptionMode,
    pub noise_flip: f64,
    pub hmm_stay_probability: f64,
    pub emission_preset: EmissionPreset,
    /// Keyed by state name. After resolution every state carries all four channels.
    pub emission: BTreeMap<String, EmissionOverride>,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            mode: PerceptionMode::Inferred,
            noise_flip: crate::perception::DEFAULT_NOISE_FLIP,
            hmm_stay_probability: 0.8,
            emission_preset: EmissionPreset::Default,
            emission: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ticks: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ticks: 5000,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Convergence window in ticks.
    pub window: usize,
    /// Convergence band width.
    pub epsilon: f64,
    /// KSG neighbour count.
    pub k: usize,
    /// Shift applied to the second series of every pair, in ticks.
    pub lag: i64,
    /// Add 1e-10 uniform jitter before KSG estimation.
    pub ksg_jitter: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window: 500,
            epsilon: 0.05,
            k: 4,
            lag: 0,
            ksg_jitter: false,
        }
    }
}

/// Parses and validates a TOML scenario, filling in defaults.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.message().trim().to_string()))?;
    let config: SimConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::config(path, inner.message().trim().to_string())
    })?;
    config.resolve()
}

impl SimConfig {
    /// Two agents with every default: the reference dyadic scenario.
    pub fn default_dyad() -> Self {
        let agent = |id| AgentSpec {
            id: AgentId(id),
            talkativeness: DEFAULT_TALKATIVENESS,
            initial_state: None,
        };
        SimConfig {
            agents: vec![agent(0), agent(1)],
            initial_attitudes: InitialAttitudes::default(),
            dynamics: DynamicsConfig::default(),
            perception: PerceptionConfig::default(),
            run: RunConfig::default(),
            metrics: MetricsConfig::default(),
        }
        .resolve()
        .expect("defaults are valid")
    }

    /// Validates every field and expands the emission table.
    pub fn resolve(mut self) -> Result<Self> {
        self.validate()?;
        self.agents.sort_by_key(|a| a.id);
        let base = self.emission_model::<f64>();
        self.perception.emission = ConversationalState::ALL
            .iter()
            .map(|&s| {
                let e = base.state(s);
                let full = EmissionOverride {
                    speaking: Some(e.speaking),
                    gaze: Some(e.gaze),
                    attention: Some(e.attention),
                    backchannel: Some(e.backchannel),
                };
                (s.to_string(), full)
            })
            .collect();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(Error::config("agents", "at least 2 required"));
        }
        let mut ids = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if !ids.insert(a.id) {
                return Err(Error::config(format!("agents[{i}].id"), format!("duplicate id {}", a.id)));
            }
            check_prob(&format!("agents[{i}].talkativeness"), a.talkativeness)?;
        }
        let att = &self.initial_attitudes;
        check_unit("initial_attitudes.default.liking", att.default.liking)?;
        check_unit("initial_attitudes.default.dominance", att.default.dominance)?;
        for (i, o) in att.overrides.iter().enumerate() {
            let p = format!("initial_attitudes.overrides[{i}]");
            for (field, id) in [("from", o.from), ("to", o.to)] {
                if !ids.contains(&id) {
                    return Err(Error::config(format!("{p}.{field}"), format!("unknown agent {id}")));
                }
            }
            if o.from == o.to {
                return Err(Error::config(format!("{p}.to"), "self-attitude is not allowed"));
            }
            check_unit(&format!("{p}.liking"), o.liking)?;
            check_unit(&format!("{p}.dominance"), o.dominance)?;
        }
        let d = &self.dynamics;
        check_positive("dynamics.delta_dominance", d.delta_dominance)?;
        check_positive("dynamics.delta_liking", d.delta_liking)?;
        if !d.yield_threshold.is_finite() {
            return Err(Error::config("dynamics.yield_threshold", "must be finite"));
        }
        if !(d.mean_utterance_ticks >= 1.0 && d.mean_utterance_ticks.is_finite()) {
            return Err(Error::config("dynamics.mean_utterance_ticks", "must be >= 1"));
        }
        let p = &self.perception;
        check_prob("perception.noise_flip", p.noise_flip)?;
        check_prob("perception.hmm_stay_probability", p.hmm_stay_probability)?;
        for (name, o) in &p.emission {
            if !ConversationalState::ALL.iter().any(|s| s.to_string() == *name) {
                return Err(Error::config(format!("perception.emission.{name}"), "unknown state"));
            }
            for (field, v) in [
                ("speaking", o.speaking),
                ("gaze", o.gaze),
                ("attention", o.attention),
                ("backchannel", o.backchannel),
            ] {
                if let Some(v) = v {
                    check_prob(&format!("perception.emission.{name}.{field}"), v)?;
                }
            }
        }
        let m = &self.metrics;
        if m.window < 2 {
            return Err(Error::config("metrics.window", "must be >= 2"));
        }
        check_positive("metrics.epsilon", m.epsilon)?;
        if m.k < 1 {
            return Err(Error::config("metrics.k", "must be >= 1"));
        }
        Ok(())
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        let mut ids: Vec<_> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Preset table with per-state overrides and the configured noise applied.
    pub fn emission_model<T: Scalar>(&self) -> EmissionModel<T> {
        let p = &self.perception;
        let mut model = match p.emission_preset {
            EmissionPreset::Default => EmissionModel::default_table(),
            EmissionPreset::Ideal => EmissionModel::ideal(),
        };
        for s in ConversationalState::ALL {
            if let Some(o) = p.emission.get(&s.to_string()) {
                let e: &mut StateEmission<T> = &mut model.states[s.index()];
                let set = |slot: &mut T, v: Option<f64>| {
                    if let Some(v) = v {
                        *slot = T::of(v);
                    }
                };
                set(&mut e.speaking, o.speaking);
                set(&mut e.gaze, o.gaze);
                set(&mut e.attention, o.attention);
                set(&mut e.backchannel, o.backchannel);
            }
        }
        model.with_noise(T::of(p.noise_flip))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes to JSON")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_prob(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("{v} outside [0, 1]")))
    }
}

fn check_unit(path: &str, v: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("{v} outside [-1, 1]")))
    }
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, "must be > 0"))
    }
}
