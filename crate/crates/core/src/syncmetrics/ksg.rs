use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Jitter amplitude used when [`KsgOptions::jitter_seed`] is set.
pub const JITTER_AMPLITUDE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KsgOptions {
    pub k: usize,
    /// Add uniform noise in [-1e-10, 1e-10] to every value, drawn from this seed.
    pub jitter_seed: Option<u64>,
}

impl Default for KsgOptions {
    fn default() -> Self {
        KsgOptions { k: 4, jitter_seed: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsgEstimate<T> {
    /// Mutual information in nats.
    pub value: T,
    /// Points whose k-th neighbour sits at distance zero (duplicate samples).
    pub zero_radius_points: usize,
}

/// `table[n] = digamma(n)` for `1 <= n <= max`, from the harmonic numbers;
/// `table[0]` is unused.
pub fn digamma_table<T: Scalar>(max: usize) -> Vec<T> {
    let gamma = T::of(0.577_215_664_901_532_9);
    let mut table = Vec::with_capacity(max + 1);
    table.push(T::nan());
    let mut acc = -gamma;
    for n in 1..=max {
        table.push(acc);
        acc = acc + T::one() / T::of_usize(n);
    }
    table
}

/// Kraskov algorithm-1 estimate with max-norm neighbourhoods, in nats.
pub fn ksg_mutual_information<T: Scalar>(a: &[T], b: &[T], k: usize) -> Result<T> {
    ksg_with_options(a, b, &KsgOptions { k, jitter_seed: None }).map(|e| e.value)
}

pub fn ksg_with_options<T: Scalar>(a: &[T], b: &[T], opts: &KsgOptions) -> Result<KsgEstimate<T>> {
    let n = a.len();
    let k = opts.k;
    if b.len() != n {
        return Err(Error::usage(format!("length mismatch: {} vs {}", n, b.len())));
    }
    if k < 1 || n <= k {
        return Err(Error::usage(format!("need N > k >= 1, got N = {n}, k = {k}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::usage("series must be finite"));
    }
    let (xs, ys) = match opts.jitter_seed {
        None => (a.to_vec(), b.to_vec()),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp = JITTER_AMPLITUDE;
            let mut jitter = |v: &T| *v + T::of(rng.random_range(-amp..=amp));
            let xs: Vec<T> = a.iter().map(&mut jitter).collect();
            let ys: Vec<T> = b.iter().map(&mut jitter).collect();
            (xs, ys)
        }
    };

    // points ordered by x (then index) for the neighbour scan
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("finite").then(i.cmp(&j)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted_x: Vec<T> = order.iter().map(|&i| xs[i]).collect();
    let mut sorted_y = ys.clone();
    sorted_y.sort_by(|p, q| p.partial_cmp(q).expect("finite"));

    let psi = digamma_table::<T>(n);
    let mut marginal_sum = T::zero();
    let mut zero_radius = 0usize;
    for i in 0..n {
        let eps = kth_neighbour_distance(&xs, &ys, &order, rank[i], k);
        let (nx, ny) = if eps > T::zero() {
            (count_within(&sorted_x, xs[i], eps), count_within(&sorted_y, ys[i], eps))
        } else {
            zero_radius += 1;
            (0, 0)
        };
        marginal_sum = marginal_sum + (psi[nx + 1] + psi[ny + 1]);
    }
    let value = psi[k] + psi[n] - marginal_sum / T::of_usize(n);
    Ok(KsgEstimate { value, zero_radius_points: zero_radius })
}

/// Max-norm distance to the k-th nearest other point, scanning outward in x order.
fn kth_neighbour_distance<T: Scalar>(xs: &[T], ys: &[T], order: &[usize], pos: usize, k: usize) -> T {
    let i = order[pos];
    let (xi, yi) = (xs[i], ys[i]);
    let mut heap: BinaryHeap<Dist<T>> = BinaryHeap::with_capacity(k + 1);
    let mut lo = pos;
    let mut hi = pos + 1;
    loop {
        let bound = if heap.len() == k { Some(heap.peek().expect("k >= 1").0) } else { None };
        let dx_lo = (lo > 0).then(|| xi - xs[order[lo - 1]]);
        let dx_hi = (hi < order.len()).then(|| xs[order[hi]] - xi);
        let next_lo = dx_lo.filter(|&d| bound.is_none_or(|b| d < b));
        let next_hi = dx_hi.filter(|&d| bound.is_none_or(|b| d < b));
        let take_lo = match (next_lo, next_hi) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(l), Some(h)) => l <= h,
        };
        let j = if take_lo {
            lo -= 1;
            order[lo]
        } else {
            hi += 1;
            order[hi - 1]
        };
        let d = (xs[j] - xi).abs().max((ys[j] - yi).abs());
        if heap.len() < k {
            heap.push(Dist(d));
        } else if d < heap.peek().expect("k >= 1").0 {
            heap.pop();
            heap.push(Dist(d));
        }
    }
    heap.peek().expect("N > k").0
}

/// Number of other values strictly closer than `eps` to `center`.
fn count_within<T: Scalar>(sorted: &[T], center: T, eps: T) -> usize {
    let lo = sorted.partition_point(|&v| center - v >= eps);
    let hi = sorted.partition_point(|&v| v - center < eps);
    hi - lo - 1
}

#[derive(Clone, Copy, PartialEq)]
struct Dist<T>(T);

impl<T: Scalar> Eq for Dist<T> {}

impl<T: Scalar> PartialOrd for Dist<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Dist<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("finite distances")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_pairs(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            xs.push(u);
            ys.push(rho * u + (1.0 - rho * rho).sqrt() * v);
        }
        (xs, ys)
    }

    /// O(N^2) reference: explicit distance lists and direct digamma sums.
    fn brute_force(xs: &[f64], ys: &[f64], k: usize) -> f64 {
        let n = xs.len();
        let psi = |m: usize| -0.577_215_664_901_532_9 + (1..m).map(|j| 1.0 / j as f64).sum::<f64>();
        let mut acc = 0.0;
        for i in 0..n {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (xs[j] - xs[i]).abs().max((ys[j] - ys[i]).abs()))
                .collect();
            d.sort_by(f64::total_cmp);
            let eps = d[k - 1];
            let nx = (0..n).filter(|&j| j != i && (xs[j] - xs[i]).abs() < eps).count();
            let ny = (0..n).filter(|&j| j != i && (ys[j] - ys[i]).abs() < eps).count();
            acc += psi(nx + 1) + psi(ny + 1);
        }
        psi(k) + psi(n) - acc / n as f64
    }

    #[test]
    fn digamma_values() {
        let t = digamma_table::<f64>(3);
        assert!((t[1] + 0.5772156649015329).abs() < 1e-15);
        assert!((t[2] - 0.42278433509846713).abs() < 1e-15);
        assert!((t[3] - 0.9227843350984671).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_small_samples() {
        for (seed, rho) in [(1u64, 0.0), (2, 0.6), (3, 0.95)] {
            let (x, y) = gaussian_pairs(300, rho, seed);
            for k in [1, 3, 4, 7] {
                let fast = ksg_mutual_information(&x, &y, k).unwrap();
                let slow = brute_force(&x, &y, k);
                assert!((fast - slow).abs() < 1e-9, "k={k} {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn gaussian_family() {
        for (rho, seed) in [(0.0, 10u64), (0.5, 11), (0.9, 12)] {
            let (x, y) = gaussian_pairs(5000, rho, seed);
            let est = ksg_mutual_information(&x, &y, 4).unwrap();
            let truth = -0.5 * (1.0 - rho * rho).ln();
            assert!((est - truth).abs() < 0.05, "rho={rho}: {est} vs {truth}");
        }
    }

    #[test]
    fn monotone_marginal_transform() {
        let (x, y) = gaussian_pairs(5000, 0.5, 21);
        let base = ksg_mutual_information(&x, &y, 4).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v + v).collect();
        let warped = ksg_mutual_information(&tx, &ty, 4).unwrap();
        assert!((base - warped).abs() < 0.05, "{base} vs {warped}");
    }

    #[test]
    fn ties_and_jitter() {
        let x: Vec<f64> = (0..200).map(|i| (i / 20) as f64).collect();
        let y: Vec<f64> = (0..200).map(|i| (i / 40) as f64).collect();
        let plain = ksg_with_options(&x, &y, &KsgOptions::default()).unwrap();
        assert!(plain.zero_radius_points > 0);
        let opts = KsgOptions { k: 4, jitter_seed: Some(3) };
        let jittered = ksg_with_options(&x, &y, &opts).unwrap();
        assert_eq!(jittered.zero_radius_points, 0);
        assert_eq!(jittered, ksg_with_options(&x, &y, &opts).unwrap());
    }

    #[test]
    fn errors() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!(ksg_mutual_information(&v, &v, 4).is_err());
        assert!(ksg_mutual_information(&v, &v, 0).is_err());
        assert!(ksg_mutual_information(&v, &v[..3], 1).is_err());
        assert!(ksg_mutual_information(&[1.0, f64::NAN, 2.0], &[1.0, 2.0, 3.0], 1).is_err());
        assert!(ksg_mutual_information(&v, &v, 3).is_ok());
    }

    #[test]
    fn single_precision() {
        let (x, y) = gaussian_pairs(2000, 0.9, 4);
        let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let yf: Vec<f32> = y.iter().map(|&v| v as f32).collect();
        let a = ksg_mutual_information(&xf, &yf, 4).unwrap() as f64;
        let b = ksg_mutual_information(&x, &y, 4).unwrap();
        assert!((a - b).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn symmetric(seed in any::<u64>(), rho in -0.9f64..0.9, k in 1usize..6) {
            let (x, y) = gaussian_pairs(200, rho, seed);
            let ab = ksg_mutual_information(&x, &y, k).unwrap();
            let ba = ksg_mutual_information(&y, &x, k).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
        }
    }
}
