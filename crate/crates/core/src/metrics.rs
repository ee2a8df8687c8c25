//! Image- and pixel-level ROCAUC and the per-region-overlap score.

use crate::error::{bail, Result};
use crate::scoring::AnomalyMap;
use crate::tensor::MaskTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub anomalous: bool,
}

pub fn rocauc(samples: &[ScoredSample]) -> Result<f64> {
    let scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.anomalous).collect();
    rocauc_slices(&scores, &labels)
}

/// Exact area under the ROC curve as the normalized Mann-Whitney U
/// statistic; tied scores receive their average rank, i.e. count one half.
pub fn rocauc_slices(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        bail!(Argument, "scores and labels differ in length");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        bail!(Validation, "non-finite score");
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        bail!(UndefinedMetric, "ROCAUC needs both classes ({pos} positive, {neg} negative)");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are 1-based; twice the rank keeps tie averages integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let twice_avg_rank = (i + 1 + j) as u128;
        let tied_pos = order[i..j].iter().filter(|&&o| labels[o]).count() as u128;
        pos_rank_sum2 += twice_avg_rank * tied_pos;
        i = j;
    }
    let pos_u = pos as u128;
    let u2 = pos_rank_sum2 - pos_u * (pos_u + 1);
    Ok(u2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// 8-connected components of the 1-pixels. Each component is a sorted list
/// of flat (row-major) pixel indices; components are ordered by their first
/// pixel.
pub fn connected_components(mask: &MaskTensor) -> Vec<Vec<usize>> {
    let (h, w) = (mask.height(), mask.width());
    let data = mask.data();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if data[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(p) = stack.pop() {
            comp.push(p);
            let (r, c) = ((p / w) as i64, (p % w) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if data[q] == 1 && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// One operating point of the PRO curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProPoint {
    pub fpr: f64,
    pub overlap: f64,
}

/// Operating points for every distinct score used as threshold
/// (`score >= t` predicts anomalous), in descending threshold order,
/// preceded by the empty prediction at `(0, 0)`.
pub fn pro_curve(maps: &[AnomalyMap], masks: &[MaskTensor]) -> Result<Vec<ProPoint>> {
    if maps.len() != masks.len() {
        bail!(Argument, "{} maps but {} masks", maps.len(), masks.len());
    }
    const NORMAL: usize = usize::MAX;
    let mut sizes: Vec<usize> = Vec::new();
    let mut pixels: Vec<(f64, usize)> = Vec::new();
    for (map, mask) in maps.iter().zip(masks) {
        if (map.height, map.width) != (mask.height(), mask.width()) {
            bail!(
                Argument,
                "map {}x{} does not match mask {}x{}",
                map.height,
                map.width,
                mask.height(),
                mask.width()
            );
        }
        let mut owner = vec![NORMAL; map.scores.len()];
        for comp in connected_components(mask) {
            let id = sizes.len();
            sizes.push(comp.len());
            for p in comp {
                owner[p] = id;
            }
        }
        pixels.extend(map.scores.iter().cloned().zip(owner));
    }
    if sizes.is_empty() {
        bail!(UndefinedMetric, "PRO needs at least one anomalous region");
    }
    let negatives = pixels.iter().filter(|p| p.1 == NORMAL).count();
    if negatives == 0 {
        bail!(UndefinedMetric, "PRO needs at least one normal pixel");
    }
    if pixels.iter().any(|p| !p.0.is_finite()) {
        bail!(Validation, "non-finite score in map");
    }
    pixels.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let n_comp = sizes.len() as f64;
    let mut hits = vec![0usize; sizes.len()];
    let mut overlap_sum = 0.0;
    let mut false_pos = 0usize;
    let mut curve = vec![ProPoint {
        fpr: 0.0,
        overlap: 0.0,
    }];
    let mut i = 0;
    while i < pixels.len() {
        let t = pixels[i].0;
        while i < pixels.len() && pixels[i].0 == t {
            match pixels[i].1 {
                NORMAL => false_pos += 1,
                c => {
                    overlap_sum -= hits[c] as f64 / sizes[c] as f64;
                    hits[c] += 1;
                    overlap_sum += hits[c] as f64 / sizes[c] as f64;
                }
            }
            i += 1;
        }
        curve.push(ProPoint {
            fpr: false_pos as f64 / negatives as f64,
            overlap: overlap_sum / n_comp,
        });
    }
    Ok(curve)
}

/// Area under a PRO curve over `[0, limit]`: trapezoids between operating
/// points up to `limit`, then the last reachable overlap held flat to
/// `limit`. A point beyond `limit` is never interpolated toward, since no
/// threshold realizes the FPRs in between.
pub fn integrate_pro(curve: &[ProPoint], limit: f64) -> f64 {
    let mut area = 0.0;
    let mut prev = curve[0];
    for &p in &curve[1..] {
        if p.fpr > limit {
            break;
        }
        area += (p.fpr - prev.fpr) * 0.5 * (prev.overlap + p.overlap);
        prev = p;
    }
    area + (limit - prev.fpr).max(0.0) * prev.overlap
}

/// Normalized PRO area over FPR in `[0, fpr_limit]`.
pub fn pro_score(maps: &[AnomalyMap], masks: &[MaskTensor], fpr_limit: f64) -> Result<f64> {
    if !(fpr_limit > 0.0 && fpr_limit <= 1.0) {
        bail!(Argument, "fpr_limit must be in (0, 1], got {fpr_limit}");
    }
    let curve = pro_curve(maps, masks)?;
    Ok((integrate_pro(&curve, fpr_limit) / fpr_limit).clamp(0.0, 1.0))
}

/// Pixel-level ROCAUC pooled over all maps.
pub fn pixel_rocauc(maps: &[AnomalyMap], masks: &[MaskTensor]) -> Result<f64> {
    if maps.len() != masks.len() {
        bail!(Argument, "{} maps but {} masks", maps.len(), masks.len());
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (map, mask) in maps.iter().zip(masks) {
        if (map.height, map.width) != (mask.height(), mask.width()) {
            bail!(Argument, "map/mask shape mismatch");
        }
        scores.extend_from_slice(&map.scores);
        labels.extend(mask.data().iter().map(|&v| v == 1));
    }
    rocauc_slices(&scores, &labels)
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub(crate) fn population_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    Some((values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt())
}
