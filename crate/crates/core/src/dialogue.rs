//! Conversational state machine and interpersonal attitudes.
//!
//! Every agent runs the same six-state machine. Transitions out of
//! `WantToSpeak` are governed by the agent's private attitudes toward the
//! agents it currently perceives as speaking; the remaining rows are driven
//! by perception predicates supplied through [`TransitionContext`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Agent identifier. Ordering of ids fixes iteration order and tie-breaks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Conversational state of an agent. The declaration order is the tie-break
/// order used wherever states compete (e.g. MAP estimation).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConversationalState {
    #[default]
    Unaddressed,
    Addressed,
    WantToSpeak,
    Speaking,
    InterruptionOfSpeech,
    EndOfSpeech,
}

impl ConversationalState {
    pub const COUNT: usize = 6;

    pub const ALL: [ConversationalState; Self::COUNT] = [
        ConversationalState::Unaddressed,
        ConversationalState::Addressed,
        ConversationalState::WantToSpeak,
        ConversationalState::Speaking,
        ConversationalState::InterruptionOfSpeech,
        ConversationalState::EndOfSpeech,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// States in which the agent holds an addressee.
    pub fn has_addressee(self) -> bool {
        matches!(self, ConversationalState::Speaking | ConversationalState::EndOfSpeech)
    }

    /// States in which the agent is following someone else's talk.
    pub fn is_listening(self) -> bool {
        matches!(
            self,
            ConversationalState::Unaddressed
                | ConversationalState::Addressed
                | ConversationalState::WantToSpeak
        )
    }
}

impl fmt::Display for ConversationalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Private, directed interpersonal attitude. Both components live in [-1, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Attitude<T> {
    pub liking: T,
    pub dominance: T,
}

impl<T: Scalar> Attitude<T> {
    pub fn new(liking: T, dominance: T) -> Self {
        Attitude { liking, dominance }.clamped()
    }

    pub fn neutral() -> Self {
        Attitude {
            liking: T::zero(),
            dominance: T::zero(),
        }
    }

    pub fn clamped(self) -> Self {
        Attitude {
            liking: clamp_unit(self.liking),
            dominance: clamp_unit(self.dominance),
        }
    }

    pub fn is_valid(&self) -> bool {
        in_unit(self.liking) && in_unit(self.dominance)
    }
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

fn in_unit<T: Scalar>(v: T) -> bool {
    v >= -T::one() && v <= T::one()
}

/// One entry of an [`AttitudeMatrix`] in flat form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeEntry<T> {
    pub from: AgentId,
    pub to: AgentId,
    pub liking: T,
    pub dominance: T,
}

/// Complete set of directed attitudes between distinct agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "Vec<AttitudeEntry<T>>",
    try_from = "Vec<AttitudeEntry<T>>",
    bound = "T: Scalar"
)]
pub struct AttitudeMatrix<T> {
    agents: Vec<AgentId>,
    entries: BTreeMap<(AgentId, AgentId), Attitude<T>>,
}

impl<T: Scalar> AttitudeMatrix<T> {
    /// Builds a complete matrix with every off-diagonal entry set to `initial`.
    pub fn uniform(agents: &[AgentId], initial: Attitude<T>) -> Result<Self> {
        let mut ids = agents.to_vec();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("agents", "duplicate agent id"));
        }
        if !initial.is_valid() {
            return Err(Error::config("attitude", "components must lie in [-1, 1]"));
        }
        let mut entries = BTreeMap::new();
        for &i in &ids {
            for &j in &ids {
                if i != j {
                    entries.insert((i, j), initial);
                }
            }
        }
        Ok(AttitudeMatrix { agents: ids, entries })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn get(&self, from: AgentId, to: AgentId) -> Option<Attitude<T>> {
        self.entries.get(&(from, to)).copied()
    }

    /// Overwrites an existing entry. The value must already be in range.
    pub fn set(&mut self, from: AgentId, to: AgentId, value: Attitude<T>) -> Result<()> {
        if !value.is_valid() {
            return Err(Error::config(
                format!("attitudes[{from}->{to}]"),
                "components must lie in [-1, 1]",
            ));
        }
        match self.entries.get_mut(&(from, to)) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::config(
                format!("attitudes[{from}->{to}]"),
                "no such ordered pair of distinct agents",
            )),
        }
    }

    /// Attitudes held by `from` toward every other agent.
    pub fn row(&self, from: AgentId) -> BTreeMap<AgentId, Attitude<T>> {
        self.entries
            .range((from, AgentId(0))..=(from, AgentId(u32::MAX)))
            .map(|(&(_, to), &a)| (to, a))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = AttitudeEntry<T>> + '_ {
        self.entries.iter().map(|(&(from, to), a)| AttitudeEntry {
            from,
            to,
            liking: a.liking,
            dominance: a.dominance,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// In-place form of [`apply_interruption_update`].
    pub fn apply_interruption(
        &mut self,
        interrupter: AgentId,
        interrupted: AgentId,
        params: &AttitudeUpdateParams<T>,
    ) -> Result<()> {
        if interrupter == interrupted {
            return Err(Error::config(
                "interruption",
                "interrupter and interrupted must differ",
            ));
        }
        for id in [interrupter, interrupted] {
            if self.agents.binary_search(&id).is_err() {
                return Err(Error::config("interruption", format!("unknown agent {id}")));
            }
        }
        let forward = self
            .entries
            .get_mut(&(interrupter, interrupted))
            .expect("complete matrix");
        forward.dominance = clamp_unit(forward.dominance + params.delta_dominance);
        let backward = self
            .entries
            .get_mut(&(interrupted, interrupter))
            .expect("complete matrix");
        backward.liking = clamp_unit(backward.liking - params.delta_liking);
        Ok(())
    }
}

impl<T: Scalar> From<AttitudeMatrix<T>> for Vec<AttitudeEntry<T>> {
    fn from(m: AttitudeMatrix<T>) -> Self {
        m.iter().collect()
    }
}

impl<T: Scalar> TryFrom<Vec<AttitudeEntry<T>>> for AttitudeMatrix<T> {
    type Error = Error;

    fn try_from(list: Vec<AttitudeEntry<T>>) -> Result<Self> {
        let mut agents: Vec<AgentId> = list.iter().flat_map(|e| [e.from, e.to]).collect();
        agents.sort_unstable();
        agents.dedup();
        let mut m = AttitudeMatrix::uniform(&agents, Attitude::neutral())?;
        let mut seen = 0usize;
        for e in &list {
            if e.from == e.to {
                return Err(Error::config(
                    format!("attitudes[{}->{}]", e.from, e.to),
                    "self-attitude is not allowed",
                ));
            }
            m.set(e.from, e.to, Attitude { liking: e.liking, dominance: e.dominance })?;
            seen += 1;
        }
        if seen != m.len() {
            return Err(Error::config(
                "attitudes",
                format!("expected {} entries, found {seen}", m.len()),
            ));
        }
        Ok(m)
    }
}

/// Pure form of the interruption update: the interrupter's dominance toward
/// the interrupted rises, the interrupted's liking toward the interrupter
/// falls, both clamped to [-1, 1].
pub fn apply_interruption_update<T: Scalar>(
    matrix: &AttitudeMatrix<T>,
    interrupter: AgentId,
    interrupted: AgentId,
    params: &AttitudeUpdateParams<T>,
) -> Result<AttitudeMatrix<T>> {
    let mut next = matrix.clone();
    next.apply_interruption(interrupter, interrupted, params)?;
    Ok(next)
}

/// Per-event attitude increments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttitudeUpdateParams<T> {
    pub delta_dominance: T,
    pub delta_liking: T,
}

impl<T: Scalar> AttitudeUpdateParams<T> {
    pub fn new(delta_dominance: T, delta_liking: T) -> Result<Self> {
        if !(delta_dominance > T::zero()) {
            return Err(Error::config("dynamics.delta_dominance", "must be > 0"));
        }
        if !(delta_liking > T::zero()) {
            return Err(Error::config("dynamics.delta_liking", "must be > 0"));
        }
        Ok(AttitudeUpdateParams {
            delta_dominance,
            delta_liking,
        })
    }
}

impl<T: Scalar> Default for AttitudeUpdateParams<T> {
    fn default() -> Self {
        AttitudeUpdateParams {
            delta_dominance: T::of(0.1),
            delta_liking: T::of(0.1),
        }
    }
}

/// Attitude summary over the agents currently perceived as speaking.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpeakerAggregates<T> {
    pub mean_dominance: T,
    pub mean_liking: T,
    pub count_speaking: usize,
}

/// Means of `self_id`'s attitudes toward the agents it perceives as speaking.
/// Both means are zero when nobody is perceived as speaking.
pub fn speaker_aggregates<T: Scalar>(
    perceived_states: &BTreeMap<AgentId, ConversationalState>,
    attitudes_of_self: &BTreeMap<AgentId, Attitude<T>>,
    self_id: AgentId,
) -> Result<SpeakerAggregates<T>> {
    if perceived_states.contains_key(&self_id) || attitudes_of_self.contains_key(&self_id) {
        return Err(Error::config(
            "perceived_states",
            format!("agent {self_id} cannot perceive itself"),
        ));
    }
    if !perceived_states.keys().eq(attitudes_of_self.keys()) {
        return Err(Error::config(
            "perceived_states",
            "perceived states and attitudes cover different agents",
        ));
    }
    let mut sum_dom = T::zero();
    let mut sum_lik = T::zero();
    let mut count = 0usize;
    for (id, state) in perceived_states {
        if *state == ConversationalState::Speaking {
            let a = attitudes_of_self[id];
            sum_dom = sum_dom + a.dominance;
            sum_lik = sum_lik + a.liking;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(SpeakerAggregates::zero());
    }
    let n = T::of_usize(count);
    Ok(SpeakerAggregates {
        mean_dominance: sum_dom / n,
        mean_liking: sum_lik / n,
        count_speaking: count,
    })
}

impl<T: Scalar> SpeakerAggregates<T> {
    pub fn zero() -> Self {
        SpeakerAggregates {
            mean_dominance: T::zero(),
            mean_liking: T::zero(),
            count_speaking: 0,
        }
    }
}

/// Perception-derived predicates consulted by [`transition`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransitionContext {
    /// Someone is speaking toward this agent while it attends.
    pub addressed: bool,
    /// The per-tick speech drive draw succeeded.
    pub drive_fired: bool,
    /// The current utterance has run its sampled length.
    pub utterance_finished: bool,
    /// A new speaker was perceived and the yield rule holds.
    pub yield_fired: bool,
}

/// Floor-taking rule for an agent that wants the turn: it speaks when nobody
/// is speaking, or when its dominance plus the magnitude of its liking toward
/// the current speakers is non-negative.
pub fn takes_floor<T: Scalar>(agg: &SpeakerAggregates<T>) -> bool {
    agg.count_speaking == 0 || agg.mean_dominance + agg.mean_liking.abs() >= T::zero()
}

/// Next conversational state. Pure and total.
pub fn transition<T: Scalar>(
    current: ConversationalState,
    agg: &SpeakerAggregates<T>,
    ctx: &TransitionContext,
) -> ConversationalState {
    use ConversationalState::*;
    match current {
        Unaddressed if ctx.addressed => Addressed,
        Unaddressed if ctx.drive_fired => WantToSpeak,
        Unaddressed => Unaddressed,
        Addressed if ctx.drive_fired => WantToSpeak,
        Addressed if !ctx.addressed => Unaddressed,
        Addressed => Addressed,
        WantToSpeak if takes_floor(agg) => Speaking,
        WantToSpeak => WantToSpeak,
        Speaking if ctx.utterance_finished => EndOfSpeech,
        Speaking if ctx.yield_fired => InterruptionOfSpeech,
        Speaking => Speaking,
        InterruptionOfSpeech | EndOfSpeech => Unaddressed,
    }
}

/// Whether a speaker yields to a newcomer toward whom it feels `dominance`.
pub fn yields_to<T: Scalar>(dominance: T, threshold: T) -> bool {
    dominance >= threshold
}

/// Probability of wanting the turn this tick:
/// `talkativeness * (1 + max liking) / 2`.
pub fn speech_drive<T: Scalar>(
    likings_of_self: impl IntoIterator<Item = T>,
    talkativeness: T,
) -> Result<T> {
    let max = likings_of_self
        .into_iter()
        .fold(None, |acc: Option<T>, l| Some(acc.map_or(l, |m| m.max(l))))
        .ok_or_else(|| Error::config("likings", "at least one other agent required"))?;
    let two = T::one() + T::one();
    let p = talkativeness * (T::one() + clamp_unit(max)) / two;
    Ok(p.max(T::zero()).min(T::one()))
}

/// Addressee chosen on taking the floor: highest liking, lowest id on ties.
pub fn choose_addressee<T: Scalar>(attitudes_of_self: &BTreeMap<AgentId, Attitude<T>>) -> Option<AgentId> {
    let mut best: Option<(AgentId, T)> = None;
    for (&id, a) in attitudes_of_self {
        match best {
            Some((_, l)) if a.liking <= l => {}
            _ => best = Some((id, a.liking)),
        }
    }
    best.map(|(id, _)| id)
}
