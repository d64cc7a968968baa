//! Nonverbal cue emission and hidden-state inference.
//!
//! Agents never see each other's conversational state. Each tick an agent
//! emits a [`CueVector`] sampled from its true state; observers run a
//! forward filter per observed agent to maintain a [`BeliefState`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{AgentId, ConversationalState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const N: usize = ConversationalState::COUNT;

/// Observable signal bundle emitted by one agent in one tick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueVector {
    pub speaking: bool,
    pub gaze_target: Option<AgentId>,
    pub attention_display: bool,
    pub backchannel: bool,
}

/// Per-state channel probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEmission<T> {
    pub speaking: T,
    /// Probability of looking at the current addressee.
    pub gaze: T,
    pub attention: T,
    pub backchannel: T,
}

impl<T: Scalar> StateEmission<T> {
    fn from_f64(speaking: f64, gaze: f64, attention: f64, backchannel: f64) -> Self {
        StateEmission {
            speaking: T::of(speaking),
            gaze: T::of(gaze),
            attention: T::of(attention),
            backchannel: T::of(backchannel),
        }
    }

    fn channels(&self) -> [T; 4] {
        [self.speaking, self.gaze, self.attention, self.backchannel]
    }
}

/// Cue statistics for every state plus a symmetric per-channel flip noise.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionModel<T> {
    pub states: [StateEmission<T>; N],
    pub noise_flip: T,
}

/// Probability used for channels a state does not actively drive.
pub const LOW: f64 = 0.05;

/// Default noise applied to every boolean channel.
pub const DEFAULT_NOISE_FLIP: f64 = 0.02;

impl<T: Scalar> EmissionModel<T> {
    /// The stochastic default table, with [`DEFAULT_NOISE_FLIP`].
    pub fn default_table() -> Self {
        use ConversationalState::*;
        let mut states = [StateEmission::from_f64(LOW, LOW, LOW, LOW); N];
        states[Addressed.index()] = StateEmission::from_f64(LOW, LOW, 0.9, 0.5);
        states[WantToSpeak.index()] = StateEmission::from_f64(0.05, LOW, 0.9, 0.3);
        states[Speaking.index()] = StateEmission::from_f64(0.98, 0.9, 0.8, LOW);
        states[InterruptionOfSpeech.index()] = StateEmission::from_f64(0.5, LOW, 0.9, LOW);
        states[EndOfSpeech.index()] = StateEmission::from_f64(0.1, 0.7, LOW, LOW);
        EmissionModel {
            states,
            noise_flip: T::of(DEFAULT_NOISE_FLIP),
        }
    }

    /// Deterministic model giving each state a unique cue signature, no noise.
    ///
    /// | state                | speaking | gaze | attention | backchannel |
    /// |----------------------|----------|------|-----------|-------------|
    /// | Unaddressed          | 0        | 0    | 0         | 0           |
    /// | Addressed            | 0        | 0    | 1         | 1           |
    /// | WantToSpeak          | 0        | 0    | 1         | 0           |
    /// | Speaking             | 1        | 1    | 1         | 0           |
    /// | InterruptionOfSpeech | 1        | 0    | 1         | 0           |
    /// | EndOfSpeech          | 0        | 1    | 0         | 0           |
    pub fn ideal() -> Self {
        use ConversationalState::*;
        let mut states = [StateEmission::from_f64(0.0, 0.0, 0.0, 0.0); N];
        states[Addressed.index()] = StateEmission::from_f64(0.0, 0.0, 1.0, 1.0);
        states[WantToSpeak.index()] = StateEmission::from_f64(0.0, 0.0, 1.0, 0.0);
        states[Speaking.index()] = StateEmission::from_f64(1.0, 1.0, 1.0, 0.0);
        states[InterruptionOfSpeech.index()] = StateEmission::from_f64(1.0, 0.0, 1.0, 0.0);
        states[EndOfSpeech.index()] = StateEmission::from_f64(0.0, 1.0, 0.0, 0.0);
        EmissionModel {
            states,
            noise_flip: T::zero(),
        }
    }

    pub fn with_noise(mut self, noise_flip: T) -> Self {
        self.noise_flip = noise_flip;
        self
    }

    pub fn state(&self, s: ConversationalState) -> &StateEmission<T> {
        &self.states[s.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        for s in ConversationalState::ALL {
            let names = ["speaking", "gaze", "attention", "backchannel"];
            for (name, p) in names.iter().zip(self.state(s).channels()) {
                if !unit(p) {
                    return Err(Error::config(
                        format!("perception.emission.{s}.{name}"),
                        "probability must lie in [0, 1]",
                    ));
                }
            }
        }
        if !unit(self.noise_flip) {
            return Err(Error::config("perception.noise_flip", "probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Likelihood of `observed` given that the emitter is in `state`, with
    /// channels independent given the state.
    pub fn likelihood(&self, observed: &CueVector, state: ConversationalState) -> T {
        let f = self.noise_flip;
        let bits = [
            observed.speaking,
            observed.gaze_target.is_some(),
            observed.attention_display,
            observed.backchannel,
        ];
        bits.iter()
            .zip(self.state(state).channels())
            .fold(T::one(), |acc, (&bit, p)| {
                let on = p * (T::one() - f) + (T::one() - p) * f;
                acc * if bit { on } else { T::one() - on }
            })
    }
}

/// Samples the cues an agent in `true_state` displays this tick.
///
/// Always consumes exactly eight uniform draws: one per channel, then one
/// flip draw per channel.
pub fn emit_cues<T: Scalar, R: Rng + ?Sized>(
    true_state: ConversationalState,
    addressee: Option<AgentId>,
    model: &EmissionModel<T>,
    rng: &mut R,
) -> CueVector {
    let probs = model.state(true_state).channels();
    let draws: [bool; 4] = std::array::from_fn(|c| T::of(rng.random::<f64>()) < probs[c]);
    let flips: [bool; 4] = std::array::from_fn(|_| T::of(rng.random::<f64>()) < model.noise_flip);
    let bit = |c: usize| draws[c] ^ flips[c];
    CueVector {
        speaking: bit(0),
        gaze_target: if bit(1) { addressee } else { None },
        attention_display: bit(2),
        backchannel: bit(3),
    }
}

/// Row-stochastic 6x6 state transition prior for the forward filter.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmTransition<T> {
    rows: [[T; N]; N],
}

impl<T: Scalar> HmmTransition<T> {
    pub fn new(rows: [[T; N]; N]) -> Result<Self> {
        let tol = T::of(1e-9).max(T::epsilon() * T::of(16.0));
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&p| !(p >= T::zero())) {
                return Err(Error::config(
                    format!("hmm_transition[{i}]"),
                    "entries must be non-negative",
                ));
            }
            let sum = row.iter().fold(T::zero(), |a, &b| a + b);
            if (sum - T::one()).abs() > tol {
                return Err(Error::config(
                    format!("hmm_transition[{i}]"),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(HmmTransition { rows })
    }

    /// Stay with probability `stay`, otherwise move uniformly to another state.
    pub fn sticky(stay: T) -> Result<Self> {
        if !(stay >= T::zero() && stay <= T::one()) {
            return Err(Error::config(
                "perception.hmm_stay_probability",
                "probability must lie in [0, 1]",
            ));
        }
        let off = (T::one() - stay) / T::of_usize(N - 1);
        let rows = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { stay } else { off }));
        Self::new(rows)
    }

    pub fn rows(&self) -> &[[T; N]; N] {
        &self.rows
    }
}

/// Probability distribution over the six conversational states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState<T>(pub [T; N]);

impl<T: Scalar> BeliefState<T> {
    pub fn uniform() -> Self {
        BeliefState([T::one() / T::of_usize(N); N])
    }

    pub fn point(s: ConversationalState) -> Self {
        let mut p = [T::zero(); N];
        p[s.index()] = T::one();
        BeliefState(p)
    }

    pub fn prob(&self, s: ConversationalState) -> T {
        self.0[s.index()]
    }

    pub fn total(&self) -> T {
        self.0.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn is_normalized(&self, tol: T) -> bool {
        self.0.iter().all(|&p| p >= T::zero()) && (self.total() - T::one()).abs() <= tol
    }
}

/// Result of one forward-filter step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeliefUpdate<T> {
    pub belief: BeliefState<T>,
    /// The observation had zero likelihood under every state; the belief was
    /// reset to uniform.
    pub degenerate: bool,
}

/// One forward step: predict through `hmm`, weight by the cue likelihood,
/// renormalize.
pub fn belief_update<T: Scalar>(
    prior: &BeliefState<T>,
    observed: &CueVector,
    model: &EmissionModel<T>,
    hmm: &HmmTransition<T>,
) -> BeliefUpdate<T> {
    let mut post = [T::zero(); N];
    for (j, slot) in post.iter_mut().enumerate() {
        let predicted = (0..N).fold(T::zero(), |acc, i| acc + prior.0[i] * hmm.rows[i][j]);
        let state = ConversationalState::ALL[j];
        *slot = predicted * model.likelihood(observed, state);
    }
    let total = post.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > T::zero()) || !total.is_finite() {
        return BeliefUpdate {
            belief: BeliefState::uniform(),
            degenerate: true,
        };
    }
    for p in &mut post {
        *p = *p / total;
    }
    BeliefUpdate {
        belief: BeliefState(post),
        degenerate: false,
    }
}

/// Most probable state; ties go to the earliest state in declaration order.
pub fn map_state<T: Scalar>(belief: &BeliefState<T>) -> ConversationalState {
    let mut best = 0;
    for i in 1..N {
        if belief.0[i] > belief.0[best] {
            best = i;
        }
    }
    ConversationalState::ALL[best]
}

/// An agent considers itself addressed when somebody is speaking while
/// looking at it and it is attending.
pub fn infer_addressed(
    cues_from_others: &BTreeMap<AgentId, CueVector>,
    own_attention: bool,
    self_id: AgentId,
) -> bool {
    own_attention
        && cues_from_others
            .iter()
            .any(|(&id, c)| id != self_id && c.speaking && c.gaze_target == Some(self_id))
}
