//! Synchrony measures over simulation traces.
//!
//! - [`discrete_mutual_information`]: plug-in MI between symbol sequences, in bits.
//! - [`ksg_mutual_information`]: Kraskov k-NN MI between real series, in nats.
//! - [`analytic_signal`] and [`phase_locking_value`]: phase synchrony.
//! - [`convergence_tick`]: first tick after which a series stays within a band.

mod convergence;
mod discrete;
mod ksg;
mod phase;

pub use convergence::convergence_tick;
pub use discrete::{discrete_mutual_information, entropy};
pub use ksg::{digamma_table, ksg_mutual_information, ksg_with_options, KsgEstimate, KsgOptions};
pub use phase::{analytic_signal, hann, phase_locking, phase_locking_value, PhaseLocking};

use crate::error::{Error, Result};

/// Aligns `a[t]` with `b[t + lag]`, dropping the unmatched ends.
pub fn apply_lag<'a, A, B>(a: &'a [A], b: &'a [B], lag: i64) -> Result<(&'a [A], &'a [B])> {
    if a.len() != b.len() {
        return Err(Error::usage(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    let shift = usize::try_from(lag.unsigned_abs()).unwrap_or(usize::MAX);
    if shift >= a.len() {
        return Err(Error::usage(format!("lag {lag} leaves no overlap for length {}", a.len())));
    }
    let n = a.len() - shift;
    Ok(if lag >= 0 {
        (&a[..n], &b[shift..])
    } else {
        (&a[shift..], &b[..n])
    })
}
