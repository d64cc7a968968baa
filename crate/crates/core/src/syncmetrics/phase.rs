use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of samples dropped at each end before averaging phase differences.
pub const EDGE_DISCARD: f64 = 0.05;

pub const MIN_PLV_LEN: usize = 20;

/// Discrete analytic signal of the mean-removed series.
///
/// The spectrum is kept at DC (and Nyquist for even lengths), doubled on
/// positive frequencies and zeroed on negative ones. The real part of the
/// output reproduces the mean-removed input.
pub fn analytic_signal<T: Scalar>(x: &[T]) -> Result<Vec<Complex<T>>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::usage(format!("analytic signal needs N >= 4, got {n}")));
    }
    let mean = x.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(n);
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v - mean, T::zero())).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let two = T::one() + T::one();
    let half = n / 2;
    for (i, c) in buf.iter_mut().enumerate() {
        let gain = if i == 0 || (n.is_multiple_of(2) && i == half) {
            T::one()
        } else if i <= (n - 1) / 2 {
            two
        } else {
            T::zero()
        };
        *c = *c * gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = T::one() / T::of_usize(n);
    for c in &mut buf {
        *c = *c * scale;
    }
    Ok(buf)
}

/// Periodic Hann window of length `n`.
pub fn hann<T: Scalar>(n: usize) -> Vec<T> {
    let two_pi = T::TAU();
    let half = T::of(0.5);
    (0..n)
        .map(|i| half - half * (two_pi * T::of_usize(i) / T::of_usize(n)).cos())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseLocking<T> {
    /// Phase-locking value in [0, 1].
    pub value: T,
    /// One input was constant, so no phase is defined; `value` is 0.
    pub degenerate: bool,
}

/// PLV with the degeneracy flag. Inputs are mean-removed and Hann tapered
/// before phase extraction; 5% of samples at each end are discarded.
pub fn phase_locking<T: Scalar>(a: &[T], b: &[T]) -> Result<PhaseLocking<T>> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::usage(format!("length mismatch: {} vs {}", n, b.len())));
    }
    if n < MIN_PLV_LEN {
        return Err(Error::usage(format!("PLV needs N >= {MIN_PLV_LEN}, got {n}")));
    }
    if is_constant(a) || is_constant(b) {
        return Ok(PhaseLocking { value: T::zero(), degenerate: true });
    }
    let window = hann::<T>(n);
    let taper = |x: &[T]| -> Vec<T> {
        let mean = x.iter().fold(T::zero(), |s, &v| s + v) / T::of_usize(n);
        x.iter().zip(&window).map(|(&v, &w)| (v - mean) * w).collect()
    };
    let za = analytic_signal(&taper(a))?;
    let zb = analytic_signal(&taper(b))?;
    let skip = (n as f64 * EDGE_DISCARD).floor() as usize;
    let kept = skip..n - skip;
    let count = T::of_usize(kept.len());
    let sum = kept.fold(Complex::new(T::zero(), T::zero()), |acc, i| {
        let dphi = za[i].arg() - zb[i].arg();
        acc + Complex::new(dphi.cos(), dphi.sin())
    });
    let value = (sum / count).norm().max(T::zero()).min(T::one());
    Ok(PhaseLocking { value, degenerate: false })
}

pub fn phase_locking_value<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    phase_locking(a, b).map(|p| p.value)
}

fn is_constant<T: Scalar>(x: &[T]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}
