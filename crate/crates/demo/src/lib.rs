//! Browser demo: a 2-D network learning a point cloud's topology, and
//! anomaly maps on a small synthetic stream. The `wasm` module is the
//! JavaScript-facing surface; everything else is plain Rust.

use kng::harness::{synthesize, SynthSpec};
use kng::metrics::{pixel_rocauc, pro_score, rocauc_slices};
use kng::rng::Xoshiro256;
use kng::scoring::{image_score, mahalanobis, score_map};
use kng::{make_selection, AnomalyMap, FeatureTensor, KngConfig, KngModel, Label, MaskTensor, ScoreConfig};
use rand_distr::{Distribution, StandardNormal};

/// Half-width of the square the 2-D demo lives in.
pub const EXTENT: f64 = 6.0;

fn normal(rng: &mut Xoshiro256) -> f64 {
    StandardNormal.sample(rng)
}

/// Normal data: a noisy ring around two tight blobs.
fn normal_point(rng: &mut Xoshiro256) -> [f64; 2] {
    match rng.below(4) {
        0 => [-1.2 + 0.3 * normal(rng), 0.3 * normal(rng)],
        1 => [1.2 + 0.3 * normal(rng), 0.3 * normal(rng)],
        _ => {
            let a = rng.unit_f64() * std::f64::consts::TAU;
            let r = 3.5 + 0.2 * normal(rng);
            [r * a.cos(), r * a.sin()]
        }
    }
}

fn outlier(rng: &mut Xoshiro256) -> [f64; 2] {
    [(2.0 * rng.unit_f64() - 1.0) * EXTENT, (2.0 * rng.unit_f64() - 1.0) * EXTENT]
}

/// One streamed point and what the network made of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamedPoint {
    pub xy: [f64; 2],
    pub outlier: bool,
    pub accepted: bool,
}

pub struct Topology {
    pub model: KngModel,
    rng: Xoshiro256,
}

impl Topology {
    pub fn new(seed: u64, k: usize, epochs: usize, n_train: usize) -> kng::Result<Self> {
        let mut rng = Xoshiro256::seed_from(seed);
        let xs: Vec<f64> = (0..n_train).flat_map(|_| normal_point(&mut rng)).collect();
        let cfg = KngConfig { k, epochs, dim: 2, seed, ..KngConfig::default() };
        let model = KngModel::init_from_embeddings(&xs, make_selection(2, 2, seed)?, cfg)?;
        Ok(Self { model, rng })
    }

    /// Draws a batch with the given outlier fraction and feeds it to the
    /// network. Acceptance is judged against the thresholds in force before
    /// the batch, as the update itself does.
    pub fn stream(&mut self, n: usize, outlier_ratio: f64) -> kng::Result<Vec<StreamedPoint>> {
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let is_out = self.rng.unit_f64() < outlier_ratio;
            let xy = if is_out { outlier(&mut self.rng) } else { normal_point(&mut self.rng) };
            pts.push((xy, is_out));
        }
        let xs: Vec<f64> = pts.iter().flat_map(|p| p.0).collect();
        let verdicts: Vec<bool> = self
            .model
            .assign_all(&xs)?
            .iter()
            .map(|a| a.d1 <= self.model.neurons[a.s1].threshold)
            .collect();
        self.model.update_embeddings(&xs)?;
        Ok(pts
            .into_iter()
            .zip(verdicts)
            .map(|((xy, outlier), accepted)| StreamedPoint { xy, outlier, accepted })
            .collect())
    }

    /// Mahalanobis score to the nearest neuron on a `res x res` grid over
    /// the demo square, row-major from the top-left corner.
    pub fn score_field(&self, res: usize) -> kng::Result<Vec<f64>> {
        let step = 2.0 * EXTENT / res as f64;
        let mut xs = Vec::with_capacity(res * res * 2);
        for r in 0..res {
            for c in 0..res {
                xs.push(-EXTENT + (c as f64 + 0.5) * step);
                xs.push(EXTENT - (r as f64 + 0.5) * step);
            }
        }
        self.model
            .assign_all(&xs)?
            .iter()
            .zip(xs.chunks(2))
            .map(|(a, x)| mahalanobis(x, &self.model, a.s1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMetrics {
    pub image_rocauc: f64,
    pub pixel_rocauc: f64,
    pub pro: f64,
}

/// A small synthetic stream with ground-truth masks.
pub struct Maps {
    pub spec: SynthSpec,
    pub model: KngModel,
    images: Vec<(FeatureTensor, MaskTensor, Label)>,
    learned: usize,
}

impl Maps {
    pub fn new(seed: u64) -> kng::Result<Self> {
        let spec = SynthSpec {
            ambient_dim: 24,
            latent_dim: 3,
            n_sessions: 4,
            session_size: 25,
            anomaly_ratio: 0.2,
            seed,
            ..SynthSpec::default()
        };
        let data = synthesize(&spec)?;
        let model = KngModel::init(&data.train, KngConfig { k: 32, ..spec.model_config() })?;
        Ok(Self { spec, model, images: data.stream, learned: 0 })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn anomalous(&self, i: usize) -> bool {
        self.images[i].2.is_anomalous()
    }

    pub fn mask(&self, i: usize) -> &MaskTensor {
        &self.images[i].1
    }

    pub fn map(&self, i: usize, sigma: f64) -> kng::Result<AnomalyMap> {
        let cfg = ScoreConfig { sigma, ..self.spec.score_config() };
        score_map(&self.images[i].0, &self.model, &cfg)
    }

    pub fn metrics(&self, sigma: f64) -> kng::Result<StreamMetrics> {
        let maps = (0..self.len()).map(|i| self.map(i, sigma)).collect::<kng::Result<Vec<_>>>()?;
        let masks: Vec<MaskTensor> = self.images.iter().map(|s| s.1.clone()).collect();
        let scores = maps.iter().map(image_score).collect::<kng::Result<Vec<_>>>()?;
        let labels: Vec<bool> = (0..self.len()).map(|i| self.anomalous(i)).collect();
        Ok(StreamMetrics {
            image_rocauc: rocauc_slices(&scores, &labels)?,
            pixel_rocauc: pixel_rocauc(&maps, &masks)?,
            pro: pro_score(&maps, &masks, 0.3)?,
        })
    }

    /// Feeds the next `batch` stream images to the network, cycling through
    /// the stream. Returns the number of accepted embeddings.
    pub fn learn(&mut self, batch: usize) -> kng::Result<usize> {
        let tensors: Vec<FeatureTensor> = (0..batch)
            .map(|j| self.images[(self.learned + j) % self.len()].0.clone())
            .collect();
        self.learned += batch;
        Ok(self.model.online_update(&tensors)?.accepted)
    }

    pub fn learned(&self) -> usize {
        self.learned
    }
}

#[cfg(target_arch = "wasm32")]
mod wasm;
