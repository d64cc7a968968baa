//! Synchrony report assembled from a trace.
//!
//! Signals per agent pair:
//! - state MI: plug-in MI between the two conversational-state sequences;
//! - PLV: phase locking between the binary speaking indicators;
//! - attitude MI (directed `i -> j`): KSG MI between `i`'s dominance toward
//!   `j` and `j`'s liking toward `i`, the two values an interruption of `j`
//!   by `i` moves;
//! - convergence: first settling tick of every attitude component.

use serde::{Deserialize, Serialize};

use crate::config::MetricsConfig;
use crate::dialogue::{AgentId, ConversationalState};
use crate::engine::EventKind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::syncmetrics::{
    apply_lag, convergence_tick, discrete_mutual_information, ksg_with_options, phase_locking,
    KsgOptions,
};
use crate::trace::Trace;

/// Seed for KSG jitter when enabled; fixed so reports stay reproducible.
const JITTER_SEED: u64 = 0x5EED;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub a: AgentId,
    pub b: AgentId,
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectedValue {
    pub from: AgentId,
    pub to: AgentId,
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Liking,
    Dominance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub from: AgentId,
    pub to: AgentId,
    pub component: Component,
    pub tick: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynchronyReport {
    pub window: usize,
    pub epsilon: f64,
    pub k: usize,
    pub lag: i64,
    /// Bits.
    pub pairwise_state_mi: Vec<PairValue>,
    pub pairwise_plv: Vec<PairValue>,
    /// Nats.
    pub attitude_mi: Vec<DirectedValue>,
    pub convergence: Vec<ConvergenceEntry>,
}

impl SynchronyReport {
    /// Every attitude component settled.
    pub fn converged(&self) -> bool {
        !self.convergence.is_empty() && self.convergence.iter().all(|c| c.tick.is_some())
    }

    /// Latest settling tick across components, when all settled.
    pub fn convergence_tick(&self) -> Option<usize> {
        if !self.converged() {
            return None;
        }
        self.convergence.iter().filter_map(|c| c.tick).max()
    }

    pub fn mean_state_mi(&self) -> f64 {
        mean(self.pairwise_state_mi.iter().map(|p| p.value))
    }

    pub fn mean_plv(&self) -> f64 {
        mean(self.pairwise_plv.iter().map(|p| p.value))
    }

    /// Flat rows for plotting tools.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.pairwise_state_mi {
            rows.push(CsvRow::new("state_mi_bits", p.a, p.b, "", fmt(Some(p.value)), p.degenerate));
        }
        for p in &self.pairwise_plv {
            rows.push(CsvRow::new("plv", p.a, p.b, "", fmt(Some(p.value)), p.degenerate));
        }
        for d in &self.attitude_mi {
            rows.push(CsvRow::new("attitude_mi_nats", d.from, d.to, "", fmt(Some(d.value)), d.degenerate));
        }
        for c in &self.convergence {
            let comp = match c.component {
                Component::Liking => "liking",
                Component::Dominance => "dominance",
            };
            let tick = c.tick.map(|t| t as f64);
            rows.push(CsvRow::new("convergence_tick", c.from, c.to, comp, fmt(tick), false));
        }
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub metric: String,
    pub from: u32,
    pub to: u32,
    pub component: String,
    /// Empty when absent (e.g. a component that never converged).
    pub value: String,
    pub degenerate: bool,
}

impl CsvRow {
    fn new(metric: &str, from: AgentId, to: AgentId, component: &str, value: String, degenerate: bool) -> Self {
        CsvRow {
            metric: metric.to_string(),
            from: from.0,
            to: to.0,
            component: component.to_string(),
            value,
            degenerate,
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Computes every metric on `trace` with the given detector parameters.
pub fn analyze<T: Scalar>(trace: &Trace<T>, metrics: &MetricsConfig) -> Result<SynchronyReport> {
    if trace.records.is_empty() {
        return Err(Error::usage("trace has no tick records"));
    }
    let ids = trace.agent_ids();
    let states = |id: AgentId| -> Result<Vec<ConversationalState>> {
        trace
            .records
            .iter()
            .map(|r| {
                r.states
                    .get(&id)
                    .copied()
                    .ok_or_else(|| Error::usage(format!("tick {} lacks agent {id}", r.tick)))
            })
            .collect()
    };
    let speaking = |id: AgentId| -> Vec<T> {
        trace
            .records
            .iter()
            .map(|r| if r.speaking.get(&id).copied().unwrap_or(false) { T::one() } else { T::zero() })
            .collect()
    };
    let attitude = |from: AgentId, to: AgentId, c: Component| -> Result<Vec<T>> {
        trace
            .records
            .iter()
            .map(|r| {
                let a = r
                    .attitudes
                    .get(from, to)
                    .ok_or_else(|| Error::usage(format!("tick {} lacks attitude {from}->{to}", r.tick)))?;
                Ok(match c {
                    Component::Liking => a.liking,
                    Component::Dominance => a.dominance,
                })
            })
            .collect()
    };

    let lag = metrics.lag;
    let mut pairwise_state_mi = Vec::new();
    let mut pairwise_plv = Vec::new();
    for (n, &a) in ids.iter().enumerate() {
        for &b in &ids[n + 1..] {
            let (sa, sb) = (states(a)?, states(b)?);
            let (xa, xb) = apply_lag(&sa, &sb, lag)?;
            let mi: T = discrete_mutual_information(xa, xb)?;
            pairwise_state_mi.push(PairValue { a, b, value: mi.as_f64(), degenerate: false });

            let (pa, pb) = (speaking(a), speaking(b));
            let (ya, yb) = apply_lag(&pa, &pb, lag)?;
            let plv = phase_locking(ya, yb)?;
            pairwise_plv.push(PairValue { a, b, value: plv.value.as_f64(), degenerate: plv.degenerate });
        }
    }

    let opts = KsgOptions {
        k: metrics.k,
        jitter_seed: metrics.ksg_jitter.then_some(JITTER_SEED),
    };
    let mut attitude_mi = Vec::new();
    let mut convergence = Vec::new();
    let epsilon = T::of(metrics.epsilon);
    for &from in &ids {
        for &to in ids.iter().filter(|&&j| j != from) {
            let dom = attitude(from, to, Component::Dominance)?;
            let lik_back = attitude(to, from, Component::Liking)?;
            let (x, y) = apply_lag(&dom, &lik_back, lag)?;
            let flat = |s: &[T]| s.windows(2).all(|w| w[0] == w[1]);
            let (value, degenerate) = if flat(x) || flat(y) {
                (0.0, true)
            } else {
                let est = ksg_with_options(x, y, &opts)?;
                (est.value.as_f64(), est.zero_radius_points > 0)
            };
            attitude_mi.push(DirectedValue { from, to, value, degenerate });

            for c in [Component::Liking, Component::Dominance] {
                let series = attitude(from, to, c)?;
                convergence.push(ConvergenceEntry {
                    from,
                    to,
                    component: c,
                    tick: convergence_tick(&series, metrics.window, epsilon)?,
                });
            }
        }
    }

    Ok(SynchronyReport {
        window: metrics.window,
        epsilon: metrics.epsilon,
        k: metrics.k,
        lag,
        pairwise_state_mi,
        pairwise_plv,
        attitude_mi,
        convergence,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub interruptions: usize,
    pub floor_takings: usize,
    pub floor_releases: usize,
    pub degenerate_observations: usize,
}

impl EventCounts {
    pub fn of<T: Scalar>(trace: &Trace<T>) -> Self {
        EventCounts {
            interruptions: trace.count(EventKind::Interruption),
            floor_takings: trace.count(EventKind::FloorTaken),
            floor_releases: trace.count(EventKind::FloorReleased),
            degenerate_observations: trace.count(EventKind::DegenerateObservation),
        }
    }
}

/// Analysis output written by the `analyze` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config_digest: String,
    pub trace_digest: String,
    pub seed: u64,
    pub ticks: usize,
    pub report: SynchronyReport,
    pub event_counts: EventCounts,
    pub wall_time_ms: f64,
}

impl ReportFile {
    /// Analyzes `trace` with the metric parameters from its own header,
    /// overriding the lag when given. `wall_time_ms` is left at 0.
    pub fn build<T: Scalar>(trace: &Trace<T>, lag: Option<i64>) -> Result<Self> {
        let mut metrics = trace.header.config.metrics.clone();
        if let Some(l) = lag {
            metrics.lag = l;
        }
        Ok(ReportFile {
            config_digest: trace.header.config.digest(),
            trace_digest: trace.digest(),
            seed: trace.header.seed,
            ticks: trace.records.len().saturating_sub(1),
            report: analyze(trace, &metrics)?,
            event_counts: EventCounts::of(trace),
            wall_time_ms: 0.0,
        })
    }
}
