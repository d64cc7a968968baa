//! Synchronous tick loop.
//!
//! Each tick every agent emits cues from its current state, filters the cues
//! of the others, and picks its next state from tick-t information only.
//! Writes go to a fresh [`WorldState`], so the order in which agents are
//! processed cannot influence the outcome. All randomness comes from
//! substreams keyed by (seed, agent, tick, purpose).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::config::{PerceptionMode, SimConfig};
use crate::dialogue::{
    choose_addressee, speaker_aggregates, speech_drive, transition, yields_to, AgentId,
    Attitude, AttitudeMatrix, AttitudeUpdateParams, ConversationalState, TransitionContext,
};
use crate::error::{Error, Result};
use crate::perception::{
    belief_update, emit_cues, infer_addressed, map_state, BeliefState, CueVector, EmissionModel,
    HmmTransition,
};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::trace::{TickRecord, Trace, TraceHeader};

use ConversationalState::*;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentRuntime<T> {
    pub id: AgentId,
    pub state: ConversationalState,
    /// Speaking ticks left, counting the current one. Zero unless Speaking.
    pub utterance_remaining: u32,
    pub addressee: Option<AgentId>,
    pub beliefs: BTreeMap<AgentId, BeliefState<T>>,
    /// States this agent attributed to the others on the previous tick.
    pub perceived: BTreeMap<AgentId, ConversationalState>,
    pub talkativeness: T,
    /// Tick at which the current utterance started.
    pub speaking_since: Option<u64>,
}

impl<T: Scalar> AgentRuntime<T> {
    fn new(id: AgentId, others: &[AgentId], talkativeness: T) -> Self {
        AgentRuntime {
            id,
            state: Unaddressed,
            utterance_remaining: 0,
            addressee: None,
            beliefs: others.iter().map(|&j| (j, BeliefState::uniform())).collect(),
            perceived: others.iter().map(|&j| (j, Unaddressed)).collect(),
            talkativeness,
            speaking_since: None,
        }
    }

    /// Checks the countdown/state and addressee/state couplings.
    pub fn is_consistent(&self) -> bool {
        let countdown_ok = (self.utterance_remaining > 0) == (self.state == Speaking);
        let addressee_ok = self.addressee.is_some() == self.state.has_addressee();
        countdown_ok && addressee_ok
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState<T> {
    pub tick: u64,
    /// Sorted by ascending id.
    pub agents: Vec<AgentRuntime<T>>,
    pub attitudes: AttitudeMatrix<T>,
    /// Cues emitted during the step that produced this world.
    pub last_cues: BTreeMap<AgentId, CueVector>,
}

impl<T: Scalar> WorldState<T> {
    /// Initial world: everyone Unaddressed unless the config says otherwise.
    pub fn initial(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let ids = config.agent_ids();
        let d = config.initial_attitudes.default;
        let mut attitudes =
            AttitudeMatrix::uniform(&ids, Attitude::new(T::of(d.liking), T::of(d.dominance)))?;
        for o in &config.initial_attitudes.overrides {
            attitudes.set(o.from, o.to, Attitude::new(T::of(o.liking), T::of(o.dominance)))?;
        }
        let mut specs = config.agents.clone();
        specs.sort_by_key(|a| a.id);
        let mut agents = Vec::with_capacity(specs.len());
        for spec in &specs {
            let others: Vec<_> = ids.iter().copied().filter(|&j| j != spec.id).collect();
            let mut a = AgentRuntime::new(spec.id, &others, T::of(spec.talkativeness));
            let state = spec.initial_state.unwrap_or_default();
            a.state = state;
            if state.has_addressee() {
                a.addressee = choose_addressee(&attitudes.row(spec.id));
            }
            if state == Speaking {
                let mut rng = stream(seed, spec.id, 0, Purpose::Init);
                a.utterance_remaining =
                    sample_utterance_length(&mut rng, config.dynamics.mean_utterance_ticks)?;
                a.speaking_since = Some(0);
            }
            agents.push(a);
        }
        let mut world = WorldState {
            tick: 0,
            agents,
            attitudes,
            last_cues: BTreeMap::new(),
        };
        if config.perception.mode == PerceptionMode::Oracle {
            world.sync_oracle_beliefs();
        }
        Ok(world)
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentRuntime<T>> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut AgentRuntime<T>> {
        self.agents.iter_mut().find(|a| a.id == id)
    }

    pub fn states(&self) -> BTreeMap<AgentId, ConversationalState> {
        self.agents.iter().map(|a| (a.id, a.state)).collect()
    }

    fn sync_oracle_beliefs(&mut self) {
        let truth = self.states();
        for a in &mut self.agents {
            for (j, b) in a.beliefs.iter_mut() {
                *b = BeliefState::point(truth[j]);
            }
        }
    }
}

/// Resolved dynamics parameters in the simulation's scalar type.
#[derive(Clone, Debug)]
pub struct SimParams<T> {
    pub update: AttitudeUpdateParams<T>,
    pub yield_threshold: T,
    pub mean_utterance_ticks: f64,
    pub mode: PerceptionMode,
    pub emission: EmissionModel<T>,
    pub hmm: HmmTransition<T>,
}

impl<T: Scalar> SimParams<T> {
    pub fn from_config(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let d = &config.dynamics;
        let emission = config.emission_model();
        emission.validate()?;
        Ok(SimParams {
            update: AttitudeUpdateParams::new(T::of(d.delta_dominance), T::of(d.delta_liking))?,
            yield_threshold: T::of(d.yield_threshold),
            mean_utterance_ticks: d.mean_utterance_ticks,
            mode: config.perception.mode,
            emission,
            hmm: HmmTransition::sticky(T::of(config.perception.hmm_stay_probability))?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    FloorTaken,
    FloorReleased,
    /// Participants: interrupter, interrupted.
    Interruption,
    /// Participants: observer, observed.
    DegenerateObservation,
}

/// Something that happened while advancing from `tick` to `tick + 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub participants: Vec<AgentId>,
}

impl Event {
    pub fn floor_taken(tick: u64, agent: AgentId) -> Self {
        Event { tick, kind: EventKind::FloorTaken, participants: vec![agent] }
    }

    pub fn floor_released(tick: u64, agent: AgentId) -> Self {
        Event { tick, kind: EventKind::FloorReleased, participants: vec![agent] }
    }

    pub fn interruption(tick: u64, interrupter: AgentId, interrupted: AgentId) -> Self {
        debug_assert_ne!(interrupter, interrupted);
        Event {
            tick,
            kind: EventKind::Interruption,
            participants: vec![interrupter, interrupted],
        }
    }

    pub fn degenerate(tick: u64, observer: AgentId, observed: AgentId) -> Self {
        Event {
            tick,
            kind: EventKind::DegenerateObservation,
            participants: vec![observer, observed],
        }
    }
}

/// Geometric utterance length with the given mean, never below one tick.
pub fn sample_utterance_length<R: Rng + ?Sized>(rng: &mut R, mean_ticks: f64) -> Result<u32> {
    if !(mean_ticks >= 1.0) || !mean_ticks.is_finite() {
        return Err(Error::config("dynamics.mean_utterance_ticks", "must be >= 1"));
    }
    if mean_ticks == 1.0 {
        return Ok(1);
    }
    let geo = Geometric::new(1.0 / mean_ticks)
        .map_err(|e| Error::config("dynamics.mean_utterance_ticks", e.to_string()))?;
    let extra = geo.sample(rng);
    Ok(u32::try_from(extra.saturating_add(1)).unwrap_or(u32::MAX))
}

/// Cues every agent displays in `world`'s current tick.
pub fn emit_all<T: Scalar>(
    world: &WorldState<T>,
    params: &SimParams<T>,
    seed: u64,
) -> BTreeMap<AgentId, CueVector> {
    world
        .agents
        .iter()
        .map(|a| {
            let mut rng = stream(seed, a.id, world.tick, Purpose::Cues);
            (a.id, emit_cues(a.state, a.addressee, &params.emission, &mut rng))
        })
        .collect()
}

/// Advances one tick, processing agents in ascending id order.
pub fn step<T: Scalar>(
    world: &WorldState<T>,
    params: &SimParams<T>,
    seed: u64,
) -> Result<(WorldState<T>, Vec<Event>)> {
    let order: Vec<usize> = (0..world.agents.len()).collect();
    step_in_order(world, params, seed, &order)
}

/// Advances one tick, visiting agents in the given index order. The result
/// does not depend on the order.
pub fn step_in_order<T: Scalar>(
    world: &WorldState<T>,
    params: &SimParams<T>,
    seed: u64,
    order: &[usize],
) -> Result<(WorldState<T>, Vec<Event>)> {
    let n = world.agents.len();
    if n < 2 {
        return Err(Error::config("agents", "at least 2 required"));
    }
    let mut visited = vec![false; n];
    for &i in order {
        if i >= n || std::mem::replace(&mut visited[i], true) {
            return Err(Error::config("order", "must be a permutation of agent indices"));
        }
    }
    if visited.iter().any(|v| !v) {
        return Err(Error::config("order", "must be a permutation of agent indices"));
    }

    let t = world.tick;
    let cues = emit_all(world, params, seed);
    let truth = world.states();
    let mut next_agents: Vec<Option<AgentRuntime<T>>> = vec![None; n];
    let mut events = Vec::new();

    for &idx in order {
        let agent = &world.agents[idx];
        let (next, mut evs) = advance_agent(agent, world, &cues, &truth, params, seed)?;
        next_agents[idx] = Some(next);
        events.append(&mut evs);
    }
    let mut agents: Vec<AgentRuntime<T>> = next_agents.into_iter().map(|a| a.expect("visited")).collect();

    // Interruptions: a speaker yielded while someone who started after it holds the floor.
    let mut attitudes = world.attitudes.clone();
    for (cur, next) in world.agents.iter().zip(&agents) {
        if cur.state != Speaking || next.state != InterruptionOfSpeech {
            continue;
        }
        let started = cur.speaking_since.unwrap_or(0);
        let interrupter = world
            .agents
            .iter()
            .filter(|b| b.id != cur.id && b.state == Speaking)
            .filter_map(|b| b.speaking_since.filter(|&s| s > started).map(|s| (s, b.id)))
            .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))
            .map(|(_, id)| id);
        if let Some(by) = interrupter {
            attitudes.apply_interruption(by, cur.id, &params.update)?;
            events.push(Event::interruption(t, by, cur.id));
        }
    }
    events.sort();

    for a in &mut agents {
        debug_assert!(a.is_consistent(), "agent {} inconsistent: {:?}", a.id, a.state);
    }
    let mut next = WorldState {
        tick: t + 1,
        agents,
        attitudes,
        last_cues: cues,
    };
    if params.mode == PerceptionMode::Oracle {
        // beliefs mirror the states the agents will observe next tick
        next.sync_oracle_beliefs();
    }
    Ok((next, events))
}

fn advance_agent<T: Scalar>(
    agent: &AgentRuntime<T>,
    world: &WorldState<T>,
    cues: &BTreeMap<AgentId, CueVector>,
    truth: &BTreeMap<AgentId, ConversationalState>,
    params: &SimParams<T>,
    seed: u64,
) -> Result<(AgentRuntime<T>, Vec<Event>)> {
    let t = world.tick;
    let id = agent.id;
    let mut events = Vec::new();
    let mut next = agent.clone();

    let perceived: BTreeMap<AgentId, ConversationalState> = match params.mode {
        PerceptionMode::Oracle => truth.iter().filter(|(&j, _)| j != id).map(|(&j, &s)| (j, s)).collect(),
        PerceptionMode::Inferred => {
            for (&j, belief) in next.beliefs.iter_mut() {
                let up = belief_update(belief, &cues[&j], &params.emission, &params.hmm);
                if up.degenerate {
                    events.push(Event::degenerate(t, id, j));
                }
                *belief = up.belief;
            }
            next.beliefs.iter().map(|(&j, b)| (j, map_state(b))).collect()
        }
    };

    let row = world.attitudes.row(id);
    let agg = speaker_aggregates(&perceived, &row, id)?;
    let others_cues: BTreeMap<AgentId, CueVector> =
        cues.iter().filter(|(&j, _)| j != id).map(|(&j, &c)| (j, c)).collect();
    let addressed = infer_addressed(&others_cues, agent.state.is_listening(), id);

    let p = speech_drive(row.values().map(|a| a.liking), agent.talkativeness)?;
    let draw: f64 = stream(seed, id, t, Purpose::Drive).random();
    let drive_fired = T::of(draw) < p;

    let yield_fired = agent.state == Speaking
        && perceived.iter().any(|(j, &s)| {
            s == Speaking
                && agent.perceived.get(j) != Some(&Speaking)
                && yields_to(row[j].dominance, params.yield_threshold)
        });

    let ctx = TransitionContext {
        addressed,
        drive_fired,
        utterance_finished: agent.state == Speaking && agent.utterance_remaining <= 1,
        yield_fired,
    };
    let state = transition(agent.state, &agg, &ctx);

    match (agent.state, state) {
        (Speaking, Speaking) => next.utterance_remaining -= 1,
        (_, Speaking) => {
            let mut rng = stream(seed, id, t, Purpose::Utterance);
            next.utterance_remaining = sample_utterance_length(&mut rng, params.mean_utterance_ticks)?;
            next.addressee = choose_addressee(&row);
            next.speaking_since = Some(t + 1);
            events.push(Event::floor_taken(t, id));
        }
        (_, EndOfSpeech) => {
            next.utterance_remaining = 0;
            next.speaking_since = None;
            events.push(Event::floor_released(t, id));
        }
        _ => {
            next.utterance_remaining = 0;
            next.addressee = None;
            next.speaking_since = None;
        }
    }
    next.state = state;
    next.perceived = perceived;
    Ok((next, events))
}

/// Stateful driver around [`step`].
#[derive(Clone, Debug)]
pub struct Simulation<T> {
    pub params: SimParams<T>,
    pub world: WorldState<T>,
    pub seed: u64,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let seed = config.run.seed;
        Ok(Simulation {
            params: SimParams::from_config(config)?,
            world: WorldState::initial(config, seed)?,
            seed,
        })
    }

    pub fn step(&mut self) -> Result<Vec<Event>> {
        let (next, events) = step(&self.world, &self.params, self.seed)?;
        self.world = next;
        Ok(events)
    }
}

/// Runs `config.run.ticks` steps and records every tick.
pub fn run<T: Scalar>(config: &SimConfig) -> Result<Trace<T>> {
    let order: Vec<usize> = (0..config.agents.len()).collect();
    run_in_order(config, &order)
}

/// [`run`] with a fixed agent processing order applied on every tick.
pub fn run_in_order<T: Scalar>(config: &SimConfig, order: &[usize]) -> Result<Trace<T>> {
    let config = config.clone().resolve()?;
    let mut sim = Simulation::<T>::new(&config)?;
    let mut records = Vec::with_capacity(config.run.ticks as usize + 1);
    for _ in 0..config.run.ticks {
        let (next, events) = step_in_order(&sim.world, &sim.params, sim.seed, order)?;
        records.push(TickRecord::capture(&sim.world, &next.last_cues, events));
        sim.world = next;
    }
    let final_cues = emit_all(&sim.world, &sim.params, sim.seed);
    records.push(TickRecord::capture(&sim.world, &final_cues, Vec::new()));
    Ok(Trace {
        header: TraceHeader { seed: config.run.seed, config },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EmissionPreset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless(mut c: SimConfig) -> SimConfig {
        c.perception.emission_preset = EmissionPreset::Ideal;
        c.perception.emission.clear();
        c.perception.noise_flip = 0.0;
        c.resolve().unwrap()
    }

    #[test]
    fn utterance_length_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_utterance_length(&mut rng, 1.0).unwrap(), 1);
            assert!(sample_utterance_length(&mut rng, 3.5).unwrap() >= 1);
        }
        assert!(sample_utterance_length(&mut rng, 0.99).is_err());
        assert!(sample_utterance_length(&mut rng, f64::NAN).is_err());
    }

    #[test]
    fn utterance_length_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let total: u64 = (0..n).map(|_| u64::from(sample_utterance_length(&mut rng, 20.0).unwrap())).sum();
        let mean = total as f64 / n as f64;
        // sd of the mean is sqrt(380)/sqrt(1e5) ~ 0.062
        assert!((mean - 20.0).abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn step_is_deterministic() {
        let c = SimConfig::default_dyad();
        let sim = Simulation::<f64>::new(&c).unwrap();
        let mut w = sim.world.clone();
        for _ in 0..200 {
            let a = step(&w, &sim.params, sim.seed).unwrap();
            let b = step(&w, &sim.params, sim.seed).unwrap();
            assert_eq!(a, b);
            w = a.0;
        }
    }

    #[test]
    fn zero_talkativeness_is_a_fixed_point() {
        let mut c = SimConfig::default_dyad();
        for a in &mut c.agents {
            a.talkativeness = 0.0;
        }
        c.run.ticks = 2000;
        let trace = run::<f64>(&c).unwrap();
        assert!(trace
            .records
            .iter()
            .all(|r| r.states.values().all(|&s| s == Unaddressed)));
    }

    #[test]
    fn fewer_than_two_agents_rejected() {
        let c = SimConfig::default_dyad();
        let sim = Simulation::<f64>::new(&c).unwrap();
        let mut w = sim.world.clone();
        w.agents.truncate(1);
        assert!(step(&w, &sim.params, 0).is_err());
    }

    /// A speaks with 10 ticks left, B wants the turn, all attitudes 0 and
    /// perception noiseless. Tick 0: B's rule passes (0 + |0| >= 0) so B takes
    /// the floor. Tick 1: A sees B newly speaking, its dominance 0 >= 0 so it
    /// yields; B started after A, so B is the interrupter. Tick 2: attitudes
    /// carry the update and A is back to Unaddressed.
    #[test]
    fn scripted_interruption() {
        let c = noiseless(SimConfig::default_dyad());
        let mut sim = Simulation::<f64>::new(&c).unwrap();
        let (a, b) = (AgentId(0), AgentId(1));
        {
            let w = &mut sim.world;
            let ag = w.agent_mut(a).unwrap();
            ag.state = Speaking;
            ag.utterance_remaining = 10;
            ag.addressee = Some(b);
            ag.speaking_since = Some(0);
            w.agent_mut(b).unwrap().state = WantToSpeak;
        }
        let e0 = sim.step().unwrap();
        assert_eq!(e0, vec![Event::floor_taken(0, b)]);
        assert_eq!(sim.world.agent(a).unwrap().state, Speaking);
        assert_eq!(sim.world.agent(a).unwrap().utterance_remaining, 9);
        assert_eq!(sim.world.agent(b).unwrap().state, Speaking);
        assert_eq!(sim.world.agent(b).unwrap().addressee, Some(a));
        assert_eq!(sim.world.attitudes.get(a, b).unwrap(), Attitude::neutral());

        let e1 = sim.step().unwrap();
        assert!(e1.contains(&Event::interruption(1, b, a)), "{e1:?}");
        assert_eq!(sim.world.agent(a).unwrap().state, InterruptionOfSpeech);
        assert_eq!(sim.world.agent(a).unwrap().addressee, None);
        let ab = sim.world.attitudes.get(a, b).unwrap();
        let ba = sim.world.attitudes.get(b, a).unwrap();
        assert!((ab.liking + 0.1).abs() < 1e-12);
        assert_eq!(ab.dominance, 0.0);
        assert!((ba.dominance - 0.1).abs() < 1e-12);
        assert_eq!(ba.liking, 0.0);

        sim.step().unwrap();
        assert_eq!(sim.world.agent(a).unwrap().state, Unaddressed);
    }

    #[test]
    fn yield_rule_respects_threshold() {
        // A holds the floor and feels dominance -0.5 toward B: no yield at threshold 0.
        let mut c = noiseless(SimConfig::default_dyad());
        c.initial_attitudes.overrides.push(crate::config::AttitudeOverride {
            from: AgentId(0),
            to: AgentId(1),
            liking: 0.0,
            dominance: -0.5,
        });
        let mut sim = Simulation::<f64>::new(&c).unwrap();
        {
            let w = &mut sim.world;
            let ag = w.agent_mut(AgentId(0)).unwrap();
            ag.state = Speaking;
            ag.utterance_remaining = 10;
            ag.addressee = Some(AgentId(1));
            ag.speaking_since = Some(0);
            w.agent_mut(AgentId(1)).unwrap().state = WantToSpeak;
        }
        sim.step().unwrap();
        let e = sim.step().unwrap();
        assert!(e.iter().all(|e| e.kind != EventKind::Interruption));
        assert_eq!(sim.world.agent(AgentId(0)).unwrap().state, Speaking);
    }

    #[test]
    fn invariants_hold_over_a_run() {
        let mut c = SimConfig::default_dyad();
        c.agents.push(crate::config::AgentSpec {
            id: AgentId(2),
            talkativeness: 0.2,
            initial_state: Some(Speaking),
        });
        for a in &mut c.agents {
            a.talkativeness = 0.2;
        }
        let c = c.resolve().unwrap();
        let mut sim = Simulation::<f64>::new(&c).unwrap();
        let ids: Vec<_> = sim.world.agents.iter().map(|a| a.id).collect();
        for _ in 0..3000 {
            let before = sim.world.attitudes.clone();
            let events = sim.step().unwrap();
            assert!(sim.world.agents.iter().all(|a| a.is_consistent()));
            assert_eq!(sim.world.agents.iter().map(|a| a.id).collect::<Vec<_>>(), ids);
            let interruptions: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Interruption).collect();
            let changed: usize = before
                .iter()
                .zip(sim.world.attitudes.iter())
                .map(|(x, y)| usize::from(x.liking != y.liking) + usize::from(x.dominance != y.dominance))
                .sum();
            assert!(changed <= 2 * interruptions.len());
            for e in interruptions {
                assert_ne!(e.participants[0], e.participants[1]);
            }
        }
    }

    #[test]
    fn single_precision_runs() {
        let mut c = SimConfig::default_dyad();
        c.run.ticks = 500;
        let trace = run::<f32>(&c).unwrap();
        assert_eq!(trace.records.len(), 501);
    }
}
