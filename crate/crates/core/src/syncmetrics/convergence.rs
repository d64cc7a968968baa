use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest `t >= window` such that `max - min` of `x[t - window ..= t]` is
/// below `epsilon`, or `None` if the series never settles.
pub fn convergence_tick<T: Scalar>(x: &[T], window: usize, epsilon: T) -> Result<Option<usize>> {
    if window < 2 {
        return Err(Error::usage(format!("window must be >= 2, got {window}")));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::usage("epsilon must be > 0"));
    }
    // monotone deques of indices holding the running max and min
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    for (t, &v) in x.iter().enumerate() {
        while maxq.back().is_some_and(|&j| x[j] <= v) {
            maxq.pop_back();
        }
        maxq.push_back(t);
        while minq.back().is_some_and(|&j| x[j] >= v) {
            minq.pop_back();
        }
        minq.push_back(t);
        if t < window {
            continue;
        }
        let start = t - window;
        while maxq.front().is_some_and(|&j| j < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < start) {
            minq.pop_front();
        }
        if x[maxq[0]] - x[minq[0]] < epsilon {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(x: &[f64], window: usize, eps: f64) -> Option<usize> {
        (window..x.len()).find(|&t| {
            let w = &x[t - window..=t];
            let hi = w.iter().cloned().fold(f64::MIN, f64::max);
            let lo = w.iter().cloned().fold(f64::MAX, f64::min);
            hi - lo < eps
        })
    }

    #[test]
    fn fixtures() {
        let constant = vec![0.3; 1000];
        assert_eq!(convergence_tick(&constant, 500, 0.05).unwrap(), Some(500));
        let ramp: Vec<f64> = (0..1000).map(|t| 0.001 * t as f64).collect();
        assert_eq!(convergence_tick(&ramp, 500, 0.05).unwrap(), None);
        // e^{-(t-500)/100} - e^{-t/100} < 0.05  <=>  t > 100 ln((e^5 - 1) / 0.05) = 798.9
        let decay: Vec<f64> = (0..2000).map(|t| (-(t as f64) / 100.0).exp()).collect();
        assert_eq!(convergence_tick(&decay, 500, 0.05).unwrap(), Some(799));
        assert_eq!(naive(&decay, 500, 0.05), Some(799));
    }

    #[test]
    fn short_series_and_errors() {
        assert_eq!(convergence_tick(&[1.0; 10], 10, 0.1).unwrap(), None);
        assert_eq!(convergence_tick(&[1.0; 11], 10, 0.1).unwrap(), Some(10));
        assert!(convergence_tick(&[1.0; 10], 1, 0.1).is_err());
        assert!(convergence_tick(&[1.0; 10], 2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_scan(x in prop::collection::vec(-1.0f64..1.0, 0..200), window in 2usize..30, eps in 0.01f64..2.0) {
            prop_assert_eq!(convergence_tick(&x, window, eps).unwrap(), naive(&x, window, eps));
        }

        #[test]
        fn monotone_in_epsilon(x in prop::collection::vec(-1.0f64..1.0, 0..200), window in 2usize..30,
                               e1 in 0.01f64..2.0, e2 in 0.01f64..2.0) {
            let (small, large) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = convergence_tick(&x, window, small).unwrap();
            let b = convergence_tick(&x, window, large).unwrap();
            if let Some(ta) = a {
                prop_assert!(b.is_some_and(|tb| tb <= ta));
            }
        }
    }
}
