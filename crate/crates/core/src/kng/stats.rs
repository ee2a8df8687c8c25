//! Sample statistics on packed symmetric matrices.
//!
//! Covariances are stored as the row-major lower triangle: entry `(i, j)`
//! with `j <= i` lives at `i * (i + 1) / 2 + j`.

use crate::error::{bail, Result};

#[inline]
pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if j > i { (j, i) } else { (i, j) };
    i * (i + 1) / 2 + j
}

/// Expands a packed lower triangle into a dense row-major matrix.
pub fn unpack(packed: &[f64], dim: usize) -> Vec<f64> {
    let mut full = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let v = packed[packed_index(i, j)];
            full[i * dim + j] = v;
            full[j * dim + i] = v;
        }
    }
    full
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased sample covariance, packed; zero when `count == 1`.
    pub cov: Vec<f64>,
    pub count: u64,
}

/// Mean and (N-1)-normalized covariance of a set of vectors, two-pass.
pub fn batch_stats<V: AsRef<[f64]>>(xs: &[V]) -> Result<BatchStats> {
    let Some(first) = xs.first() else {
        bail!(Argument, "batch_stats needs at least one vector");
    };
    let dim = first.as_ref().len();
    let n = xs.len();
    let mut mean = vec![0.0; dim];
    for x in xs {
        let x = x.as_ref();
        if x.len() != dim {
            bail!(Argument, "vector length {} != {dim}", x.len());
        }
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; packed_len(dim)];
    if n > 1 {
        let mut centered = vec![0.0; dim];
        for x in xs {
            for ((c, v), m) in centered.iter_mut().zip(x.as_ref()).zip(&mean) {
                *c = v - m;
            }
            rank_one_update(&mut cov, &centered, 1.0);
        }
        let scale = 1.0 / (n - 1) as f64;
        cov.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(BatchStats {
        mean,
        cov,
        count: n as u64,
    })
}

/// `packed += weight * v vᵀ`
#[inline]
pub fn rank_one_update(packed: &mut [f64], v: &[f64], weight: f64) {
    let mut row_start = 0;
    for (i, &vi) in v.iter().enumerate() {
        let wi = weight * vi;
        let row = &mut packed[row_start..row_start + i + 1];
        for (p, &vj) in row.iter_mut().zip(&v[..=i]) {
            *p += wi * vj;
        }
        row_start += i + 1;
    }
}

/// Pooled statistics of a prior summary `(mean, cov, count)` and a new batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedStats {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub count: u64,
}

/// Combines two sample summaries into the summary of their union:
///
/// `μ = (n_a a + n_b b) / (n_a + n_b)`
///
/// `Σ = [(n_a-1)Σ_a + n_a(μ-a)(μ-a)ᵀ + (n_b-1)Σ_b + n_b(μ-b)(μ-b)ᵀ] / (n_a+n_b-1)`
///
/// A side with zero count contributes nothing; a union of one sample has
/// zero covariance.
pub fn merge_stats(
    prior_mean: &[f64],
    prior_cov: &[f64],
    prior_count: u64,
    batch: &BatchStats,
) -> Result<MergedStats> {
    let dim = batch.mean.len();
    if prior_mean.len() != dim || prior_cov.len() != packed_len(dim) || batch.cov.len() != packed_len(dim) {
        bail!(Argument, "merge_stats dimension mismatch");
    }
    let total = prior_count + batch.count;
    if total == 0 {
        bail!(Argument, "merge_stats with both counts zero");
    }
    let (na, nb) = (prior_count as f64, batch.count as f64);
    let mean: Vec<f64> = prior_mean
        .iter()
        .zip(&batch.mean)
        .map(|(a, b)| (na * a + nb * b) / (na + nb))
        .collect();

    let mut cov = vec![0.0; packed_len(dim)];
    if total >= 2 {
        let mut diff = vec![0.0; dim];
        for (summary_mean, summary_cov, n) in [
            (prior_mean, prior_cov, prior_count),
            (&batch.mean[..], &batch.cov[..], batch.count),
        ] {
            if n == 0 {
                continue;
            }
            if n > 1 {
                let w = (n - 1) as f64;
                for (c, s) in cov.iter_mut().zip(summary_cov) {
                    *c += w * s;
                }
            }
            for ((d, m), s) in diff.iter_mut().zip(&mean).zip(summary_mean) {
                *d = m - s;
            }
            rank_one_update(&mut cov, &diff, n as f64);
        }
        let scale = 1.0 / (total - 1) as f64;
        cov.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(MergedStats {
        mean,
        cov,
        count: total,
    })
}
