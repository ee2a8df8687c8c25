//! The K-NG network: k-means style cluster centers joined by a Neural Gas
//! topology graph, each center carrying a sample covariance and an
//! acceptance threshold derived from its graph neighbors.

mod graph;
mod io;
mod search;
mod stats;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{bail, KngError, Result};
use crate::rng::{splitmix64, Xoshiro256};
use crate::selection::{apply_selection, make_selection, ChannelSelection};
use crate::tensor::FeatureTensor;

pub use graph::TopologyGraph;
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use search::{sq_dist, CenterMatrix, Nearest};
pub use stats::{
    batch_stats, merge_stats, packed_index, packed_len, rank_one_update, unpack, BatchStats,
    MergedStats,
};

/// How neighbor distances combine into a neuron's acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Min,
    Mean,
    Max,
    /// Accept every sample.
    None,
}

impl ThresholdMode {
    pub(crate) fn code(self) -> u8 {
        match self {
            ThresholdMode::Min => 0,
            ThresholdMode::Mean => 1,
            ThresholdMode::Max => 2,
            ThresholdMode::None => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => ThresholdMode::Min,
            1 => ThresholdMode::Mean,
            2 => ThresholdMode::Max,
            3 => ThresholdMode::None,
            _ => return None,
        })
    }
}

impl std::str::FromStr for ThresholdMode {
    type Err = KngError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(ThresholdMode::Min),
            "mean" => Ok(ThresholdMode::Mean),
            "max" => Ok(ThresholdMode::Max),
            "none" => Ok(ThresholdMode::None),
            other => bail!(Argument, "unknown threshold mode {other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KngConfig {
    pub k: usize,
    pub epochs: usize,
    pub age_max: u64,
    pub epsilon: f64,
    pub threshold_mode: ThresholdMode,
    pub dim: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for KngConfig {
    fn default() -> Self {
        Self {
            k: 3136,
            epochs: 10,
            age_max: 25,
            epsilon: 0.01,
            threshold_mode: ThresholdMode::Mean,
            dim: 100,
            seed: 42,
            batch_size: 10,
        }
    }
}

impl KngConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            bail!(Validation, "k must be at least 2, got {}", self.k);
        }
        if self.epochs < 1 {
            bail!(Validation, "epochs must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!(Validation, "epsilon must be positive, got {}", self.epsilon);
        }
        if self.dim < 1 {
            bail!(Validation, "dim must be at least 1");
        }
        if self.batch_size < 1 {
            bail!(Validation, "batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Lower Cholesky factor of `cov + εI`, packed, with the ε that succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    pub lower: Vec<f64>,
    pub epsilon: f64,
}

impl CholeskyFactor {
    /// `|L⁻¹ v|`, i.e. `sqrt(vᵀ (LLᵀ)⁻¹ v)`, by forward substitution.
    pub fn whitened_norm(&self, v: &[f64]) -> f64 {
        let dim = v.len();
        let mut y = vec![0.0; dim];
        let mut acc_sq = 0.0;
        let mut row = 0;
        for i in 0..dim {
            let li = &self.lower[row..row + i + 1];
            let mut s = v[i];
            for (l, yj) in li[..i].iter().zip(&y[..i]) {
                s -= l * yj;
            }
            let yi = s / li[i];
            y[i] = yi;
            acc_sq += yi * yi;
            row += i + 1;
        }
        acc_sq.sqrt()
    }

    /// Dense inverse `(LLᵀ)⁻¹`, row-major.
    pub fn precision(&self, dim: usize) -> Vec<f64> {
        let l = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
            if j <= i {
                self.lower[packed_index(i, j)]
            } else {
                0.0
            }
        });
        let chol = nalgebra::Cholesky::pack_dirty(l);
        let inv = chol.inverse();
        let mut out = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = inv[(i, j)];
            }
        }
        out
    }
}

/// Regularized factorization with escalation: ε, 10ε, 100ε, 1000ε.
pub fn factorize(cov: &[f64], dim: usize, epsilon: f64) -> std::result::Result<CholeskyFactor, String> {
    let mut eps = epsilon;
    for _ in 0..4 {
        let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
            cov[packed_index(i, j)] + if i == j { eps } else { 0.0 }
        });
        if let Some(chol) = m.cholesky() {
            let l = chol.l();
            let mut lower = Vec::with_capacity(packed_len(dim));
            for i in 0..dim {
                for j in 0..=i {
                    lower.push(l[(i, j)]);
                }
            }
            return Ok(CholeskyFactor { lower, epsilon: eps });
        }
        eps *= 10.0;
    }
    Err(format!(
        "covariance not positive definite even with epsilon {}",
        eps / 10.0
    ))
}

#[derive(Debug, Clone)]
pub struct Neuron {
    pub center: Vec<f64>,
    pub count: u64,
    /// Unregularized sample covariance, packed lower triangle.
    pub cov: Vec<f64>,
    pub threshold: f64,
    factor: OnceLock<std::result::Result<CholeskyFactor, String>>,
}

impl PartialEq for Neuron {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center
            && self.count == other.count
            && self.cov == other.cov
            && self.threshold.to_bits() == other.threshold.to_bits()
    }
}

impl Neuron {
    pub fn new(center: Vec<f64>, count: u64, cov: Vec<f64>, threshold: f64) -> Self {
        Self {
            center,
            count,
            cov,
            threshold,
            factor: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Cached factor of `cov + εI`; built once, shared by concurrent readers.
    pub fn factor(&self, index: usize, epsilon: f64) -> Result<&CholeskyFactor> {
        self.factor
            .get_or_init(|| factorize(&self.cov, self.dim(), epsilon))
            .as_ref()
            .map_err(|reason| KngError::Numeric {
                neuron: index,
                reason: reason.clone(),
            })
    }

    pub fn has_cached_factor(&self) -> bool {
        self.factor.get().is_some()
    }

    pub fn invalidate(&mut self) {
        self.factor = OnceLock::new();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub s1: usize,
    pub s2: usize,
    /// Euclidean distance to `s1`.
    pub d1: f64,
}

impl From<Nearest> for Assignment {
    fn from(n: Nearest) -> Self {
        Assignment {
            s1: n.first,
            s2: n.second,
            d1: n.first_sq.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub accepted: usize,
    pub rejected: usize,
    pub edges_removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KngModel {
    pub neurons: Vec<Neuron>,
    pub graph: TopologyGraph,
    pub selection: ChannelSelection,
    pub config: KngConfig,
    pub rng_state: [u64; 4],
}

/// Seed of the generator that draws initial centers; kept apart from the
/// channel-selection stream, which uses `seed` directly.
fn init_stream_seed(seed: u64) -> u64 {
    let mut s = seed ^ 0x4B4E_475F_494E_4954;
    splitmix64(&mut s)
}

/// Indices of the `k` embeddings drawn as initial centers, plus the
/// generator state after the draw.
pub fn draw_initial_indices(m: usize, k: usize, seed: u64) -> (Vec<usize>, [u64; 4]) {
    let mut rng = Xoshiro256::seed_from(init_stream_seed(seed));
    let idx = rng.partial_shuffle(m, k);
    (idx, rng.state())
}

/// Flattens tensors to `f64` rows in the working dimension, applying the
/// channel selection when a tensor still has its raw width.
pub fn gather_embeddings(
    tensors: &[FeatureTensor],
    selection: &ChannelSelection,
) -> Result<Vec<f64>> {
    let dim = selection.target_dim();
    let mut out = Vec::new();
    for t in tensors {
        let reduced;
        let t = if t.dim() == selection.source_dim && !selection.is_identity() {
            reduced = apply_selection(t, selection)?;
            &reduced
        } else if t.dim() == dim {
            t
        } else {
            bail!(
                Argument,
                "tensor has {} channels; model expects {} raw or {} selected",
                t.dim(),
                selection.source_dim,
                dim
            );
        };
        out.extend(t.data().iter().map(|&v| v as f64));
    }
    Ok(out)
}

impl KngModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn k(&self) -> usize {
        self.neurons.len()
    }

    pub fn total_count(&self) -> u64 {
        self.neurons.iter().map(|n| n.count).sum()
    }

    pub fn center_matrix(&self) -> CenterMatrix {
        CenterMatrix::new(self.neurons.iter().map(|n| n.center.as_slice()), self.dim())
    }

    pub(crate) fn ensure_ready(&self) -> Result<()> {
        if self.neurons.len() != self.config.k || self.neurons.len() < 2 {
            bail!(
                State,
                "model has {} neurons, expected {}",
                self.neurons.len(),
                self.config.k
            );
        }
        Ok(())
    }

    /// Nearest and second-nearest neuron by Euclidean distance.
    pub fn assign(&self, x: &[f64]) -> Result<Assignment> {
        self.ensure_ready()?;
        if x.len() != self.dim() {
            bail!(Argument, "vector length {} != model dim {}", x.len(), self.dim());
        }
        let mut best = (0usize, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (j, n) in self.neurons.iter().enumerate() {
            let d = sq_dist(x, &n.center);
            if d < best.1 {
                second = best;
                best = (j, d);
            } else if d < second.1 {
                second = (j, d);
            }
        }
        Ok(Assignment {
            s1: best.0,
            s2: second.0,
            d1: best.1.sqrt(),
        })
    }

    /// Batched [`KngModel::assign`] over row-major embeddings.
    pub fn assign_all(&self, xs: &[f64]) -> Result<Vec<Assignment>> {
        self.ensure_ready()?;
        if !xs.len().is_multiple_of(self.dim()) {
            bail!(Argument, "embedding buffer not a multiple of dim {}", self.dim());
        }
        Ok(self
            .center_matrix()
            .nearest_two(xs)
            .into_iter()
            .map(Assignment::from)
            .collect())
    }

    pub fn compute_threshold(&self, i: usize) -> f64 {
        let adj = self.graph.adjacency(self.k());
        let fallback = if adj[i].is_empty() {
            self.neurons
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, n)| sq_dist(&self.neurons[i].center, &n.center))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        } else {
            f64::NAN
        };
        self.threshold_from(i, &adj[i], fallback)
    }

    fn threshold_from(&self, i: usize, neighbors: &[usize], isolated_min: f64) -> f64 {
        if self.config.threshold_mode == ThresholdMode::None {
            return f64::INFINITY;
        }
        if neighbors.is_empty() {
            return isolated_min;
        }
        let center = &self.neurons[i].center;
        let dists = neighbors
            .iter()
            .map(|&n| sq_dist(center, &self.neurons[n].center).sqrt());
        match self.config.threshold_mode {
            ThresholdMode::Min => dists.fold(f64::INFINITY, f64::min),
            ThresholdMode::Max => dists.fold(0.0, f64::max),
            ThresholdMode::Mean => dists.sum::<f64>() / neighbors.len() as f64,
            ThresholdMode::None => unreachable!(),
        }
    }

    /// Recomputes every neuron's threshold from the current graph.
    pub fn refresh_thresholds(&mut self) {
        let k = self.k();
        let adj = self.graph.adjacency(k);
        let isolated: Vec<usize> = (0..k).filter(|&i| adj[i].is_empty()).collect();
        let mut isolated_min = vec![f64::NAN; k];
        if !isolated.is_empty() && self.config.threshold_mode != ThresholdMode::None {
            let cm = self.center_matrix();
            let mut queries = Vec::with_capacity(isolated.len() * self.dim());
            for &i in &isolated {
                queries.extend_from_slice(&self.neurons[i].center);
            }
            for (&i, (_, d2)) in isolated.iter().zip(cm.nearest_excluding(&queries, &isolated)) {
                isolated_min[i] = d2.sqrt();
            }
        }
        let thresholds: Vec<f64> = (0..k)
            .map(|i| self.threshold_from(i, &adj[i], isolated_min[i]))
            .collect();
        for (n, t) in self.neurons.iter_mut().zip(thresholds) {
            n.threshold = t;
        }
    }

    /// Few-shot initialization: seeded center draw followed by `epochs`
    /// rounds of nearest-neuron assignment, edge refresh and aging, and
    /// per-cluster recomputation of mean, covariance, and threshold.
    pub fn init(train: &[FeatureTensor], cfg: KngConfig) -> Result<Self> {
        cfg.validate()?;
        let Some(first) = train.first() else {
            bail!(Argument, "no training tensors");
        };
        let source_dim = first.dim();
        if let Some(t) = train.iter().find(|t| t.dim() != source_dim) {
            bail!(Argument, "training tensors disagree on dim: {} vs {source_dim}", t.dim());
        }
        let selection = make_selection(source_dim, cfg.dim, cfg.seed)?;
        let xs = gather_embeddings(train, &selection)?;
        Self::init_from_embeddings(&xs, selection, cfg)
    }

    /// [`KngModel::init`] on already-reduced row-major embeddings.
    pub fn init_from_embeddings(
        xs: &[f64],
        selection: ChannelSelection,
        cfg: KngConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.dim;
        if selection.target_dim() != dim {
            bail!(Argument, "selection yields {} channels, config dim is {dim}", selection.target_dim());
        }
        if !xs.len().is_multiple_of(dim) {
            bail!(Argument, "embedding buffer not a multiple of dim {dim}");
        }
        if xs.iter().any(|v| !v.is_finite()) {
            bail!(Validation, "non-finite training embedding");
        }
        let m = xs.len() / dim;
        if m < cfg.k {
            bail!(Argument, "{m} embeddings cannot seed {} clusters", cfg.k);
        }
        let (initial, rng_state) = draw_initial_indices(m, cfg.k, cfg.seed);
        let neurons = initial
            .iter()
            .map(|&i| {
                Neuron::new(
                    xs[i * dim..(i + 1) * dim].to_vec(),
                    0,
                    vec![0.0; packed_len(dim)],
                    0.0,
                )
            })
            .collect();
        let mut model = KngModel {
            neurons,
            graph: TopologyGraph::new(),
            selection,
            config: cfg,
            rng_state,
        };
        for _ in 0..model.config.epochs {
            model.init_epoch(xs)?;
        }
        Ok(model)
    }

    fn init_epoch(&mut self, xs: &[f64]) -> Result<()> {
        let dim = self.dim();
        let assignments = self.center_matrix().nearest_two(xs);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.k()];
        for (l, a) in assignments.iter().enumerate() {
            self.graph.touch(a.first, a.second)?;
            members[a.first].push(l);
        }
        self.graph.sweep(self.config.age_max);
        for (neuron, idx) in self.neurons.iter_mut().zip(&members) {
            neuron.invalidate();
            if idx.is_empty() {
                neuron.count = 0;
                neuron.cov.iter_mut().for_each(|c| *c = 0.0);
                continue;
            }
            let rows: Vec<&[f64]> = idx.iter().map(|&l| &xs[l * dim..(l + 1) * dim]).collect();
            let s = batch_stats(&rows)?;
            neuron.center = s.mean;
            neuron.cov = s.cov;
            neuron.count = s.count;
        }
        self.refresh_thresholds();
        Ok(())
    }

    /// One streaming step over a batch of images. Acceptance uses the
    /// thresholds in force at batch start; accepted embeddings refresh the
    /// edge to their second-nearest neuron and are folded into their
    /// nearest neuron's statistics once the whole batch is seen.
    pub fn online_update(&mut self, batch: &[FeatureTensor]) -> Result<UpdateReport> {
        self.ensure_ready()?;
        let xs = gather_embeddings(batch, &self.selection)?;
        self.update_embeddings(&xs)
    }

    pub fn update_embeddings(&mut self, xs: &[f64]) -> Result<UpdateReport> {
        let dim = self.dim();
        let assignments = self.assign_all(xs)?;
        let mut buffers: Vec<Vec<usize>> = vec![Vec::new(); self.k()];
        let mut report = UpdateReport::default();
        for (l, a) in assignments.iter().enumerate() {
            if a.d1 <= self.neurons[a.s1].threshold {
                buffers[a.s1].push(l);
                self.graph.touch(a.s1, a.s2)?;
                report.accepted += 1;
            } else {
                report.rejected += 1;
            }
        }
        if report.accepted == 0 {
            return Ok(report);
        }
        for (neuron, idx) in self.neurons.iter_mut().zip(&buffers) {
            if idx.is_empty() {
                continue;
            }
            let rows: Vec<&[f64]> = idx.iter().map(|&l| &xs[l * dim..(l + 1) * dim]).collect();
            let batch = batch_stats(&rows)?;
            let merged = merge_stats(&neuron.center, &neuron.cov, neuron.count, &batch)?;
            neuron.center = merged.mean;
            neuron.cov = merged.cov;
            neuron.count = merged.count;
            neuron.invalidate();
        }
        report.edges_removed = self.graph.sweep(self.config.age_max);
        self.refresh_thresholds();
        Ok(report)
    }

    /// Hex SHA-256 of the serialized model.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(encode_model(self)))
    }
}
