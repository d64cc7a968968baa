//! Run traces and their JSON Lines encoding.
//!
//! Line 1 is a header carrying the resolved config and master seed; every
//! following line is one [`TickRecord`], ticks contiguous from 0.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, SimConfig};
use crate::dialogue::{AgentId, AttitudeMatrix, ConversationalState};
use crate::engine::{Event, EventKind, WorldState};
use crate::error::{Error, Result};
use crate::perception::CueVector;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub config: SimConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct TickRecord<T> {
    pub tick: u64,
    pub states: BTreeMap<AgentId, ConversationalState>,
    pub speaking: BTreeMap<AgentId, bool>,
    /// Cues displayed during this tick.
    pub cues: BTreeMap<AgentId, CueVector>,
    pub attitudes: AttitudeMatrix<T>,
    /// Events raised while advancing from this tick to the next.
    pub events: Vec<Event>,
}

impl<T: Scalar> TickRecord<T> {
    pub fn capture(world: &WorldState<T>, cues: &BTreeMap<AgentId, CueVector>, events: Vec<Event>) -> Self {
        let states = world.states();
        TickRecord {
            tick: world.tick,
            speaking: states
                .iter()
                .map(|(&id, &s)| (id, s == ConversationalState::Speaking))
                .collect(),
            states,
            cues: cues.clone(),
            attitudes: world.attitudes.clone(),
            events,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    pub header: TraceHeader,
    pub records: Vec<TickRecord<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.header.config.agent_ids()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().flat_map(|r| r.events.iter())
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events().filter(|e| e.kind == kind).count()
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trace(self, &mut buf).expect("writing to memory");
        buf
    }

    /// SHA-256 of the JSONL encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_jsonl())
    }
}

pub fn write_trace<T: Scalar, W: Write>(trace: &Trace<T>, mut sink: W) -> Result<()> {
    serde_json::to_writer(&mut sink, &trace.header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    for r in &trace.records {
        serde_json::to_writer(&mut sink, r).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_trace<T: Scalar, R: BufRead>(source: R) -> Result<Trace<T>> {
    let mut lines = source.lines();
    let header: TraceHeader = match lines.next() {
        None => {
            return Err(Error::TraceFormat { line: 1, message: "missing header".into() });
        }
        Some(line) => serde_json::from_str(&line?).map_err(|e| Error::TraceFormat {
            line: 1,
            message: format!("bad header: {e}"),
        })?,
    };
    let mut records: Vec<TickRecord<T>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let rec: TickRecord<T> = serde_json::from_str(&line).map_err(|e| Error::TraceFormat {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.tick != records.len() as u64 {
            return Err(Error::TraceFormat {
                line: lineno,
                message: format!("expected tick {}, found {}", records.len(), rec.tick),
            });
        }
        records.push(rec);
    }
    Ok(Trace { header, records })
}
