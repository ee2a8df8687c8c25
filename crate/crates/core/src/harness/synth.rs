//! Desk-scale stand-in for an industrial inspection dataset.
//!
//! Normal patch embeddings live near a low-dimensional linear manifold: a
//! mixture of anisotropic Gaussians in latent space, mapped into the ambient
//! space by a random orthonormal basis, plus isotropic ambient noise.
//! Anomalous images shift a contiguous rectangle of patches off the
//! manifold along one direction orthogonal to it.

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, KngError, Result};
use crate::kng::KngConfig;
use crate::manifest::{Label, Manifest, ManifestItem};
use crate::rng::Xoshiro256;
use crate::scoring::ScoreConfig;
use crate::tensor::{write_tensor, FeatureTensor, MaskTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub ambient_dim: usize,
    /// Patch grid `(rows, cols)`.
    pub grid: (usize, usize),
    pub n_train: usize,
    pub n_sessions: usize,
    pub session_size: usize,
    pub anomaly_ratio: f64,
    pub seed: u64,
    pub latent_dim: usize,
    pub components: usize,
    /// Standard deviation of the isotropic ambient noise.
    pub noise: f64,
    /// Off-manifold displacement of anomalous patches, in units of `noise`.
    pub margin: f64,
    /// Mask pixels per patch along each axis.
    pub pixels_per_patch: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            ambient_dim: 100,
            grid: (14, 14),
            n_train: 10,
            n_sessions: 20,
            session_size: 50,
            anomaly_ratio: 0.1,
            seed: 1,
            latent_dim: 4,
            components: 6,
            noise: 0.1,
            margin: 10.0,
            pixels_per_patch: 4,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.anomaly_ratio > 0.0 && self.anomaly_ratio < 1.0) {
            bail!(Validation, "anomaly_ratio must be in (0, 1), got {}", self.anomaly_ratio);
        }
        if self.ambient_dim < 2 || self.latent_dim == 0 || self.latent_dim >= self.ambient_dim {
            bail!(Validation, "need 0 < latent_dim < ambient_dim");
        }
        if self.grid.0 == 0 || self.grid.1 == 0 || self.n_train == 0 || self.components == 0 {
            bail!(Validation, "grid, n_train and components must be positive");
        }
        if self.pixels_per_patch == 0 || !(self.noise > 0.0) || !(self.margin >= 0.0) {
            bail!(Validation, "invalid noise, margin, or pixels_per_patch");
        }
        Ok(())
    }

    pub fn stream_len(&self) -> usize {
        self.n_sessions * self.session_size
    }

    pub fn mask_size(&self) -> (usize, usize) {
        (self.grid.0 * self.pixels_per_patch, self.grid.1 * self.pixels_per_patch)
    }

    /// Model settings sized for this data: a few dozen neurons instead of one
    /// per training patch, and a regularizer well below the noise variance so
    /// that few-shot covariances are visibly too tight until the stream fills
    /// them in.
    pub fn model_config(&self) -> KngConfig {
        KngConfig {
            k: 64,
            epochs: 10,
            epsilon: 0.1 * self.noise * self.noise,
            dim: self.ambient_dim,
            seed: self.seed,
            ..KngConfig::default()
        }
    }

    /// Smoothing at the same physical scale as the default on a 224 px map.
    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            sigma: self.pixels_per_patch as f64,
            target_size: Some(self.mask_size()),
        }
    }
}

struct Generator {
    spec: SynthSpec,
    /// `latent_dim` orthonormal ambient vectors.
    basis: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    scales: Vec<Vec<f64>>,
}

fn normal(rng: &mut Xoshiro256) -> f64 {
    StandardNormal.sample(rng)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

impl Generator {
    fn new(spec: &SynthSpec, rng: &mut Xoshiro256) -> Self {
        let d = spec.ambient_dim;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < spec.latent_dim {
            let mut v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            normalize(&mut v);
            basis.push(v);
        }
        let means = (0..spec.components)
            .map(|_| (0..spec.latent_dim).map(|_| 5.0 * normal(rng)).collect())
            .collect();
        let scales = (0..spec.components)
            .map(|_| (0..spec.latent_dim).map(|_| 0.8 + 2.0 * rng.unit_f64()).collect())
            .collect();
        Self {
            spec: spec.clone(),
            basis,
            means,
            scales,
        }
    }

    fn off_manifold_direction(&self, rng: &mut Xoshiro256) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.spec.ambient_dim).map(|_| normal(rng)).collect();
        for b in &self.basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        normalize(&mut v);
        v
    }

    fn normal_image(&self, rng: &mut Xoshiro256) -> Vec<f64> {
        let (h, w) = self.spec.grid;
        let d = self.spec.ambient_dim;
        let c = self.spec.components;
        let phase = rng.below(c as u64) as usize;
        let mut data = Vec::with_capacity(h * w * d);
        for r in 0..h {
            for col in 0..w {
                // Banded texture with a random offset per image, so patch
                // statistics depend on content rather than position.
                let comp = if rng.unit_f64() < 0.8 {
                    (r / 3 + col / 5 + phase) % c
                } else {
                    rng.below(c as u64) as usize
                };
                let z: Vec<f64> = self.means[comp]
                    .iter()
                    .zip(&self.scales[comp])
                    .map(|(m, s)| m + s * normal(rng))
                    .collect();
                for k in 0..d {
                    let on: f64 = self.basis.iter().zip(&z).map(|(b, zi)| b[k] * zi).sum();
                    data.push(on + self.spec.noise * normal(rng));
                }
            }
        }
        data
    }

    /// Returns the displaced image and its patch-level region mask.
    fn anomalous_image(&self, rng: &mut Xoshiro256) -> (Vec<f64>, Vec<bool>) {
        let (h, w) = self.spec.grid;
        let d = self.spec.ambient_dim;
        let mut data = self.normal_image(rng);
        let rh = (2 + rng.below(3) as usize).min(h);
        let rw = (2 + rng.below(3) as usize).min(w);
        let r0 = rng.below((h - rh + 1) as u64) as usize;
        let c0 = rng.below((w - rw + 1) as u64) as usize;
        let dir = self.off_manifold_direction(rng);
        let shift = self.spec.margin * self.spec.noise;
        let mut region = vec![false; h * w];
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                region[r * w + c] = true;
                let patch = &mut data[(r * w + c) * d..(r * w + c + 1) * d];
                patch.iter_mut().zip(&dir).for_each(|(x, u)| *x += shift * u);
            }
        }
        (data, region)
    }

    fn pixel_mask(&self, region: &[bool]) -> MaskTensor {
        let (h, w) = self.spec.grid;
        let p = self.spec.pixels_per_patch;
        let (mh, mw) = (h * p, w * p);
        let data = (0..mh * mw)
            .map(|i| region[(i / mw / p) * w + (i % mw) / p] as u8)
            .collect();
        MaskTensor::new(mh, mw, data).expect("mask shape")
    }

    fn tensor(&self, data: Vec<f64>) -> FeatureTensor {
        let (h, w) = self.spec.grid;
        FeatureTensor::new(h, w, self.spec.ambient_dim, data.into_iter().map(|v| v as f32).collect())
            .expect("finite synthetic data")
    }
}

/// In-memory synthetic dataset, before anything touches the filesystem.
pub struct SynthData {
    pub train: Vec<FeatureTensor>,
    pub stream: Vec<(FeatureTensor, MaskTensor, Label)>,
}

pub fn synthesize(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = Xoshiro256::seed_from(spec.seed);
    let gen = Generator::new(spec, &mut rng);
    let train = (0..spec.n_train)
        .map(|_| gen.tensor(gen.normal_image(&mut rng)))
        .collect();

    let total = spec.stream_len();
    let n_anom = ((spec.anomaly_ratio * total as f64).round() as usize).min(total);
    let mut is_anom = vec![false; total];
    for i in rng.partial_shuffle(total, n_anom) {
        is_anom[i] = true;
    }
    let (h, w) = spec.grid;
    let stream = is_anom
        .into_iter()
        .map(|anom| {
            if anom {
                let (data, region) = gen.anomalous_image(&mut rng);
                (gen.tensor(data), gen.pixel_mask(&region), Label::Anomalous)
            } else {
                let data = gen.normal_image(&mut rng);
                (gen.tensor(data), gen.pixel_mask(&vec![false; h * w]), Label::Normal)
            }
        })
        .collect();
    Ok(SynthData { train, stream })
}

/// Writes tensors, masks, and the two manifests; returns their paths.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let out = out_dir.as_ref();
    let data = synthesize(spec)?;
    for sub in ["train", "stream"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| KngError::io(&dir, e))?;
    }
    let mut train = Manifest::default();
    for (i, t) in data.train.into_iter().enumerate() {
        let rel = PathBuf::from(format!("train/train_{i:03}.ften"));
        write_tensor(&t.into(), out.join(&rel))?;
        train.items.push(ManifestItem {
            id: format!("train_{i:03}"),
            features: rel,
            label: Some(Label::Normal),
            mask: None,
        });
    }
    let mut stream = Manifest::default();
    for (i, (t, mask, label)) in data.stream.into_iter().enumerate() {
        let rel = PathBuf::from(format!("stream/img_{i:04}.ften"));
        let rel_mask = PathBuf::from(format!("stream/img_{i:04}_mask.ften"));
        write_tensor(&t.into(), out.join(&rel))?;
        write_tensor(&mask.into(), out.join(&rel_mask))?;
        stream.items.push(ManifestItem {
            id: format!("img_{i:04}"),
            features: rel,
            label: Some(label),
            mask: Some(rel_mask),
        });
    }
    let train_path = out.join("train.json");
    let stream_path = out.join("stream.json");
    train.save(&train_path)?;
    stream.save(&stream_path)?;
    Ok((train_path, stream_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_bounds_enforced() {
        for r in [0.0, 1.0, -0.1] {
            let spec = SynthSpec {
                anomaly_ratio: r,
                ..Default::default()
            };
            assert!(matches!(synthesize(&spec), Err(KngError::Validation(_))));
        }
    }

    #[test]
    fn anomaly_count_and_masks() {
        let spec = SynthSpec {
            n_sessions: 2,
            session_size: 10,
            anomaly_ratio: 0.2,
            ambient_dim: 12,
            grid: (5, 6),
            ..Default::default()
        };
        let data = synthesize(&spec).unwrap();
        assert_eq!(data.train.len(), 10);
        assert_eq!(data.stream.len(), 20);
        let anomalous: Vec<_> = data.stream.iter().filter(|s| s.2 == Label::Anomalous).collect();
        assert_eq!(anomalous.len(), 4);
        for (_, mask, label) in &data.stream {
            assert_eq!((mask.height(), mask.width()), (20, 24));
            assert_eq!(mask.anomalous_pixels() > 0, *label == Label::Anomalous);
        }
    }
}
