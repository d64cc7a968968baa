//! Multi-agent turn-taking simulation with hidden-state perception,
//! interpersonal attitude dynamics and synchrony analysis.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the command-line
//! tool uses; the `*32` aliases are the single-precision counterparts.
//!
//! ```
//! use floorsync::{run, analyze, SimConfig, Trace};
//!
//! let mut config = SimConfig::default_dyad();
//! config.run.ticks = 200;
//! let trace: Trace = run(&config).unwrap();
//! let report = analyze(&trace, &config.metrics).unwrap();
//! assert!(report.mean_plv() <= 1.0);
//! ```

// `!(x >= lo)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dialogue;
pub mod engine;
pub mod error;
pub mod perception;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod syncmetrics;
pub mod trace;

pub use config::{parse_config, PerceptionMode, SimConfig};
pub use dialogue::{AgentId, ConversationalState};
pub use engine::{Event, EventKind};
pub use error::{Error, Result};
pub use perception::CueVector;
pub use report::{analyze, ReportFile, SynchronyReport};
pub use scalar::Scalar;
pub use trace::{read_trace, write_trace};

pub type Attitude = dialogue::Attitude<f64>;
pub type AttitudeMatrix = dialogue::AttitudeMatrix<f64>;
pub type SpeakerAggregates = dialogue::SpeakerAggregates<f64>;
pub type AttitudeUpdateParams = dialogue::AttitudeUpdateParams<f64>;
pub type BeliefState = perception::BeliefState<f64>;
pub type EmissionModel = perception::EmissionModel<f64>;
pub type HmmTransition = perception::HmmTransition<f64>;
pub type WorldState = engine::WorldState<f64>;
pub type SimParams = engine::SimParams<f64>;
pub type Simulation = engine::Simulation<f64>;
pub type TickRecord = trace::TickRecord<f64>;
pub type Trace = trace::Trace<f64>;

pub type Attitude32 = dialogue::Attitude<f32>;
pub type AttitudeMatrix32 = dialogue::AttitudeMatrix<f32>;
pub type BeliefState32 = perception::BeliefState<f32>;
pub type Simulation32 = engine::Simulation<f32>;
pub type Trace32 = trace::Trace<f32>;

/// Runs a scenario in double precision.
pub fn run(config: &SimConfig) -> Result<Trace> {
    engine::run(config)
}
