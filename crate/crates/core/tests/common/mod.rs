//! Independent reference implementations shared by the integration tests.
//! Each one is written for obviousness, not speed.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kng::kng::sq_dist;
use kng::rng::Xoshiro256;
use kng::{KngModel, MaskTensor};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

pub fn gauss(rng: &mut Xoshiro256) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_rows(rng: &mut Xoshiro256, n: usize, dim: usize, scale: f64, offset: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| offset + scale * gauss(rng)).collect())
        .collect()
}

/// Textbook two-pass mean and dense covariance (denominator `n - 1`, zero
/// for a single row).
pub fn two_pass(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    if n > 1 {
        for r in rows {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= (n - 1) as f64;
            }
        }
    }
    (mean, cov)
}

/// Reads entry `(a, b)` of a packed lower-triangular symmetric matrix.
pub fn packed_at(packed: &[f64], a: usize, b: usize) -> f64 {
    let (i, j) = if a >= b { (a, b) } else { (b, a) };
    packed[i * (i + 1) / 2 + j]
}

pub fn max_abs_packed_vs_dense(packed: &[f64], dense: &[Vec<f64>]) -> f64 {
    let d = dense.len();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            worst = worst.max((packed_at(packed, a, b) - dense[a][b]).abs());
        }
    }
    worst
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// AUC by enumerating every positive/negative pair.
pub fn pair_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Recursive 8-connected flood fill; components as sets of `(row, col)`.
pub fn flood_fill(mask: &MaskTensor) -> Vec<BTreeSet<(usize, usize)>> {
    fn fill(mask: &MaskTensor, seen: &mut [Vec<bool>], r: usize, c: usize, out: &mut BTreeSet<(usize, usize)>) {
        if seen[r][c] || !mask.get(r, c) {
            return;
        }
        seen[r][c] = true;
        out.insert((r, c));
        for dr in [-1i64, 0, 1] {
            for dc in [-1i64, 0, 1] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < mask.height() && (nc as usize) < mask.width() {
                    fill(mask, seen, nr as usize, nc as usize, out);
                }
            }
        }
    }
    let mut seen = vec![vec![false; mask.width()]; mask.height()];
    let mut comps = Vec::new();
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) && !seen[r][c] {
                let mut comp = BTreeSet::new();
                fill(mask, &mut seen, r, c, &mut comp);
                comps.push(comp);
            }
        }
    }
    comps
}

pub fn random_mask(rng: &mut Xoshiro256, h: usize, w: usize, density: f64) -> MaskTensor {
    let data = (0..h * w).map(|_| u8::from(rng.unit_f64() < density)).collect();
    MaskTensor::new(h, w, data).unwrap()
}

/// PRO by evaluating every distinct score as a threshold from scratch.
pub fn pro_brute(maps: &[Vec<f64>], masks: &[MaskTensor], limit: f64) -> f64 {
    let comps: Vec<Vec<BTreeSet<(usize, usize)>>> = masks.iter().map(flood_fill).collect();
    let n_comp: usize = comps.iter().map(|c| c.len()).sum();
    let negatives: usize = masks.iter().map(|m| m.data().iter().filter(|&&v| v == 0).count()).sum();
    let mut thresholds: Vec<f64> = maps.iter().flatten().cloned().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = vec![(0.0, 0.0)];
    for &t in &thresholds {
        let mut fp = 0;
        let mut overlap = 0.0;
        for ((map, mask), cs) in maps.iter().zip(masks).zip(&comps) {
            let w = mask.width();
            for (p, &s) in map.iter().enumerate() {
                if s >= t && !mask.get(p / w, p % w) {
                    fp += 1;
                }
            }
            for comp in cs {
                let hit = comp.iter().filter(|&&(r, c)| map[r * w + c] >= t).count();
                overlap += hit as f64 / comp.len() as f64;
            }
        }
        points.push((fp as f64 / negatives as f64, overlap / n_comp as f64));
    }

    let mut area = 0.0;
    let mut last = points[0];
    for &p in &points[1..] {
        if p.0 > limit {
            break;
        }
        area += (p.0 - last.0) * (p.1 + last.1) / 2.0;
        last = p;
    }
    area += (limit - last.0) * last.1;
    area / limit
}

/// Half-sample symmetric reflection: `... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...`.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Direct 2-D convolution with the full (non-separated) Gaussian kernel.
pub fn dense_gaussian(img: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let mut kernel = vec![vec![0.0; (2 * r + 1) as usize]; (2 * r + 1) as usize];
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            kernel[(dy + r) as usize][(dx + r) as usize] = v;
            total += v;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sy = reflect(y + dy, h as i64);
                    let sx = reflect(x + dx, w as i64);
                    acc += kernel[(dy + r) as usize][(dx + r) as usize] * img[sy * w + sx];
                }
            }
            out[y as usize * w + x as usize] = acc / total;
        }
    }
    out
}

/// Nearest neuron by exhaustive scan, then `sqrt(dᵀ (Σ + εI)⁻¹ d)` by a
/// dense LU solve.
pub fn brute_patch_score(model: &KngModel, x: &[f64]) -> f64 {
    let mut best = 0;
    for (i, n) in model.neurons.iter().enumerate() {
        if sq_dist(x, &n.center) < sq_dist(x, &model.neurons[best].center) {
            best = i;
        }
    }
    let d = model.dim();
    let n = &model.neurons[best];
    let m = DMatrix::from_fn(d, d, |a, b| {
        packed_at(&n.cov, a, b) + if a == b { model.config.epsilon } else { 0.0 }
    });
    let diff = DVector::from_iterator(d, x.iter().zip(&n.center).map(|(a, b)| a - b));
    let sol = m.lu().solve(&diff).expect("regular matrix");
    diff.dot(&sol).max(0.0).sqrt()
}

/// Per-edge age counters bumped on every event.
#[derive(Default)]
pub struct EagerGraph {
    pub ages: BTreeMap<(usize, usize), u64>,
}

impl EagerGraph {
    pub fn touch(&mut self, a: usize, b: usize) {
        let key = (a.min(b), a.max(b));
        for (k, age) in self.ages.iter_mut() {
            if *k != key {
                *age += 1;
            }
        }
        self.ages.insert(key, 0);
    }

    pub fn sweep(&mut self, age_max: u64) {
        self.ages.retain(|_, age| *age <= age_max);
    }
}

/// Plain Lloyd iterations from given initial centers; empty clusters keep
/// their center, ties go to the lowest index.
pub fn lloyd(xs: &[Vec<f64>], mut centers: Vec<Vec<f64>>, iters: usize) -> Vec<Vec<f64>> {
    for _ in 0..iters {
        let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); centers.len()];
        for x in xs {
            let mut best = 0;
            for j in 1..centers.len() {
                if sq_dist(x, &centers[j]) < sq_dist(x, &centers[best]) {
                    best = j;
                }
            }
            groups[best].push(x.clone());
        }
        for (c, g) in centers.iter_mut().zip(&groups) {
            if !g.is_empty() {
                *c = two_pass(g).0;
            }
        }
    }
    centers
}
