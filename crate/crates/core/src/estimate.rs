//! Monte Carlo estimates and their deterministic parallel reduction.
//!
//! Samples are grouped into fixed blocks of [`BLOCK`] consecutive indices.
//! Each block is accumulated sequentially, blocks run on the rayon pool, and
//! the block results are merged in a fixed pairwise tree over block indices.
//! The result is therefore bit-identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const BLOCK: u64 = 512;

/// A Monte Carlo scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_samples`.
    pub stderr: f64,
    pub n_samples: u64,
    /// Walks cut off at the step limit.
    pub max_steps_hit: u64,
}

impl Estimate {
    pub fn exact(value: f64, n_samples: u64) -> Self {
        Self { mean: value, stderr: 0.0, n_samples, max_steps_hit: 0 }
    }

    /// `|mean - value| ≤ k·stderr`, with a floor of a few ulps so that
    /// zero-variance estimates compare equal to their exact value.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        let slack = k * self.stderr + 8.0 * f64::EPSILON * value.abs().max(self.mean.abs());
        (self.mean - value).abs() <= slack
    }

    pub fn truncation_rate(&self) -> f64 {
        if self.n_samples == 0 {
            0.0
        } else {
            self.max_steps_hit as f64 / self.n_samples as f64
        }
    }
}

/// Running count/mean/second central moment (Welford), mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub truncated: u64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        Self { n, mean, m2, truncated: self.truncated + other.truncated }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn to_estimate(&self) -> Estimate {
        let stderr = if self.n == 0 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        Estimate { mean: self.mean, stderr, n_samples: self.n, max_steps_hit: self.truncated }
    }
}

/// Mean vector and co-moment matrix of vector-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMoments {
    pub n: u64,
    pub mean: Vec<f64>,
    /// Row-major `m × m` sum of centered outer products.
    pub comoment: Vec<f64>,
    pub truncated: u64,
}

impl CoMoments {
    pub fn new(m: usize) -> Self {
        Self { n: 0, mean: vec![0.0; m], comoment: vec![0.0; m * m], truncated: 0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Accumulates a batch of samples (rows of length `m`) with a two-pass
    /// centered update.
    pub fn from_rows(rows: &[Vec<f64>], truncated: u64) -> Self {
        let m = rows.first().map_or(0, |r| r.len());
        let mut out = Self::new(m);
        if rows.is_empty() {
            return out;
        }
        let n = rows.len();
        for r in rows {
            for (acc, v) in out.mean.iter_mut().zip(r) {
                *acc += v;
            }
        }
        out.mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut centered = vec![0.0; m];
        for r in rows {
            for j in 0..m {
                centered[j] = r[j] - out.mean[j];
            }
            for j in 0..m {
                let cj = centered[j];
                let row = &mut out.comoment[j * m..(j + 1) * m];
                for k in j..m {
                    row[k] += cj * centered[k];
                }
            }
        }
        for j in 0..m {
            for k in 0..j {
                out.comoment[j * m + k] = out.comoment[k * m + j];
            }
        }
        out.n = n as u64;
        out.truncated = truncated;
        out
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return other.clone();
        }
        if other.n == 0 {
            return self.clone();
        }
        let m = self.dim();
        let n = self.n + other.n;
        let w = self.n as f64 * other.n as f64 / n as f64;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self
            .mean
            .iter()
            .zip(&delta)
            .map(|(a, d)| a + d * other.n as f64 / n as f64)
            .collect();
        let mut comoment = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                let idx = j * m + k;
                comoment[idx] = self.comoment[idx] + other.comoment[idx] + delta[j] * delta[k] * w;
            }
        }
        Self { n, mean, comoment, truncated: self.truncated + other.truncated }
    }

    /// Estimate of component `j`.
    pub fn component(&self, j: usize) -> Estimate {
        let m = self.dim();
        let var = if self.n < 2 { 0.0 } else { (self.comoment[j * m + j] / (self.n - 1) as f64).max(0.0) };
        Estimate {
            mean: self.mean[j],
            stderr: (var / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
            max_steps_hit: self.truncated,
        }
    }

    /// Estimate of the paired difference `X_j - X_k`.
    pub fn difference(&self, j: usize, k: usize) -> Estimate {
        let m = self.dim();
        let c = &self.comoment;
        let m2 = c[j * m + j] + c[k * m + k] - 2.0 * c[j * m + k];
        let var = if self.n < 2 { 0.0 } else { (m2 / (self.n - 1) as f64).max(0.0) };
        Estimate {
            mean: self.mean[j] - self.mean[k],
            stderr: (var / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
            max_steps_hit: self.truncated,
        }
    }
}

/// Pairwise tree reduction in a fixed order.
pub fn tree_reduce<T, F>(mut items: Vec<T>, merge: F) -> Option<T>
where
    F: Fn(&T, &T) -> T,
{
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(&a, &b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Runs `block(start, end)` over fixed blocks of `[0, total)` in parallel and
/// merges the results in a fixed tree.
pub fn reduce_blocks<T, B, M>(total: u64, block: B, merge: M) -> Option<T>
where
    T: Send,
    B: Fn(u64, u64) -> T + Sync + Send,
    M: Fn(&T, &T) -> T,
{
    let n_blocks = total.div_ceil(BLOCK);
    let parts: Vec<T> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(total);
            block(start, end)
        })
        .collect();
    tree_reduce(parts, merge)
}

/// Runs `f` inside a dedicated pool with the given number of worker threads.
pub fn with_workers<R: Send, F: FnOnce() -> R + Send>(workers: usize, f: F) -> R {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.n, all.n);
        assert!((m.mean - all.mean).abs() < 1e-14);
        assert!((m.m2 - all.m2).abs() < 1e-11);
    }

    #[test]
    fn stderr_definition() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        let e = m.to_estimate();
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr - sd / 2.0).abs() < 1e-14);
    }

    #[test]
    fn comoments_difference() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let whole = CoMoments::from_rows(&rows, 0);
        let split = CoMoments::from_rows(&rows[..17], 0).merge(&CoMoments::from_rows(&rows[17..], 0));
        let d1 = whole.difference(1, 0);
        let d2 = split.difference(1, 0);
        assert!((d1.mean - d2.mean).abs() < 1e-12);
        assert!((d1.stderr - d2.stderr).abs() < 1e-12);
        // X1 - X0 = i + 1 has the same spread as X0
        assert!((d1.stderr - whole.component(0).stderr).abs() < 1e-12);
    }

    #[test]
    fn reduction_is_independent_of_workers() {
        let f = || {
            reduce_blocks(
                10_000,
                |a, b| {
                    let mut m = Moments::default();
                    for i in a..b {
                        m.push(((i as f64) * 0.37).sin());
                    }
                    m
                },
                Moments::merge,
            )
            .unwrap()
        };
        let one = with_workers(1, f);
        let four = with_workers(4, f);
        assert_eq!(one, four);
    }

    #[test]
    fn zero_variance_agreement() {
        let e = Estimate::exact(2.0 / std::f64::consts::PI, 10);
        assert!(e.agrees_with(2.0 / std::f64::consts::PI, 3.0));
    }
}
