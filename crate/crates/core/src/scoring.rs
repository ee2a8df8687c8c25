//! Patch-level Mahalanobis scoring against the nearest neuron, lifted to a
//! pixel anomaly map by bilinear upsampling and Gaussian smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::kng::{gather_embeddings, KngModel};
use crate::tensor::{FeatureTensor, GridTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    pub height: usize,
    pub width: usize,
    pub scores: Vec<f64>,
}

impl AnomalyMap {
    pub fn new(height: usize, width: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != height * width {
            bail!(Argument, "map {height}x{width} needs {} scores", height * width);
        }
        Ok(Self {
            height,
            width,
            scores,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            scores: vec![value; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    pub fn to_grid(&self) -> GridTensor {
        GridTensor {
            height: self.height,
            width: self.width,
            data: self.scores.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_grid(g: &GridTensor) -> Self {
        Self {
            height: g.height,
            width: g.width,
            scores: g.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Gaussian standard deviation in output pixels; 0 disables smoothing.
    pub sigma: f64,
    /// Output `(height, width)`; `None` keeps the patch grid.
    pub target_size: Option<(usize, usize)>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            sigma: 4.0,
            target_size: None,
        }
    }
}

/// `sqrt((x - A_i)ᵀ (Σ_i + εI)⁻¹ (x - A_i))`
pub fn mahalanobis(x: &[f64], model: &KngModel, i: usize) -> Result<f64> {
    let Some(neuron) = model.neurons.get(i) else {
        bail!(Argument, "neuron {i} out of range");
    };
    if x.len() != neuron.dim() {
        bail!(Argument, "vector length {} != model dim {}", x.len(), neuron.dim());
    }
    let factor = neuron.factor(i, model.config.epsilon)?;
    let diff: Vec<f64> = x.iter().zip(&neuron.center).map(|(a, b)| a - b).collect();
    Ok(factor.whitened_norm(&diff))
}

/// Mahalanobis distance of every patch to its Euclidean-nearest neuron, on
/// the patch grid.
pub fn patch_scores(t: &FeatureTensor, model: &KngModel) -> Result<AnomalyMap> {
    model.ensure_ready()?;
    let xs = gather_embeddings(std::slice::from_ref(t), &model.selection)?;
    let dim = model.dim();
    let nearest = model.center_matrix().nearest_two(&xs);
    let score = |(x, n): (&[f64], &crate::kng::Nearest)| mahalanobis(x, model, n.first);
    #[cfg(feature = "parallel")]
    let scores: Result<Vec<f64>> = {
        use rayon::prelude::*;
        xs.par_chunks(dim).zip(nearest.par_iter()).map(score).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Result<Vec<f64>> = xs.chunks(dim).zip(nearest.iter()).map(score).collect();
    AnomalyMap::new(t.height(), t.width(), scores?)
}

pub fn score_map(t: &FeatureTensor, model: &KngModel, cfg: &ScoreConfig) -> Result<AnomalyMap> {
    if !(cfg.sigma >= 0.0) {
        bail!(Argument, "sigma must be non-negative");
    }
    let grid = patch_scores(t, model)?;
    let up = match cfg.target_size {
        Some((h, w)) if (h, w) != (grid.height, grid.width) => bilinear_resize(&grid, h, w)?,
        _ => grid,
    };
    Ok(gaussian_smooth(&up, cfg.sigma))
}

pub fn image_score(m: &AnomalyMap) -> Result<f64> {
    if m.scores.is_empty() {
        bail!(Argument, "empty anomaly map");
    }
    Ok(m.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Corner-aligned bilinear resize: output pixel `y` samples source row
/// `y * (H_in - 1) / (H_out - 1)` (row 0 when `H_out == 1`), likewise for
/// columns, and blends the four surrounding samples with weights
/// `(1-fy)(1-fx), (1-fy)fx, fy(1-fx), fy fx`.
pub fn bilinear_resize(m: &AnomalyMap, height: usize, width: usize) -> Result<AnomalyMap> {
    if m.height == 0 || m.width == 0 || height == 0 || width == 0 {
        bail!(Argument, "cannot resize an empty map");
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|o| {
                let src = if n_out == 1 {
                    0.0
                } else {
                    o as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                };
                let i0 = (src.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let rows = axis(height, m.height);
    let cols = axis(width, m.width);
    let mut scores = Vec::with_capacity(height * width);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let v = (1.0 - fy) * ((1.0 - fx) * m.get(y0, x0) + fx * m.get(y0, x1))
                + fy * ((1.0 - fx) * m.get(y1, x0) + fx * m.get(y1, x1));
            scores.push(v);
        }
    }
    AnomalyMap::new(height, width, scores)
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Separable Gaussian blur with reflect padding; `sigma == 0` is the identity.
pub fn gaussian_smooth(m: &AnomalyMap, sigma: f64) -> AnomalyMap {
    if sigma <= 0.0 || m.scores.is_empty() {
        return m.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (h, w) = (m.height, m.width);
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &m.scores[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                acc += k * row[reflect_index(x as i64 + t as i64 - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                acc += k * tmp[reflect_index(y as i64 + t as i64 - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    AnomalyMap {
        height: h,
        width: w,
        scores: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_mapping() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-1, 1), 0);
        assert_eq!(reflect_index(9, 2), 1);
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.3, 1.0, 4.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (4.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = AnomalyMap::new(2, 3, vec![1.0, 5.0, 2.0, 0.0, 3.0, 9.0]).unwrap();
        assert_eq!(gaussian_smooth(&m, 0.0), m);
    }

    #[test]
    fn constant_map_survives_smoothing() {
        let m = AnomalyMap::constant(9, 5, 2.5);
        for sigma in [0.5, 2.0, 7.0] {
            let s = gaussian_smooth(&m, sigma);
            assert!(s.scores.iter().all(|&v| (v - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn image_score_is_max() {
        assert_eq!(image_score(&AnomalyMap::constant(3, 3, 0.0)).unwrap(), 0.0);
        let mut m = AnomalyMap::constant(4, 4, 1.0);
        m.scores[6] = 7.5;
        assert_eq!(image_score(&m).unwrap(), 7.5);
        assert!(image_score(&AnomalyMap::constant(0, 0, 0.0)).is_err());
    }

    #[test]
    fn resize_single_pixel_is_constant() {
        let m = AnomalyMap::new(1, 1, vec![3.25]).unwrap();
        let up = bilinear_resize(&m, 5, 7).unwrap();
        assert!(up.scores.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn resize_keeps_corners() {
        let m = AnomalyMap::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let up = bilinear_resize(&m, 3, 3).unwrap();
        assert_eq!(up.scores, vec![0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0]);
    }
}
