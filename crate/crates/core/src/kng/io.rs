//! KNGM model container, little-endian throughout:
//!
//! ```text
//! "KNGM" | u32 version
//! config:    u64 k | u64 epochs | u64 age_max | f64 epsilon | u8 threshold_mode
//!            | u64 dim | u64 seed | u64 batch_size
//! selection: u64 source_dim | u64 seed | u64 n | n x u64 index
//! neurons:   u64 k, then per neuron: dim x f64 center | u64 count
//!            | f64 threshold | dim(dim+1)/2 x f64 covariance lower triangle
//! edges:     u64 n, then per edge: u32 a | u32 b | u64 last_refresh
//! u64 event_counter | 4 x u64 rng state
//! 32-byte SHA-256 of everything above
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{packed_len, KngConfig, KngModel, Neuron, ThresholdMode, TopologyGraph};
use crate::error::{bail, KngError, Result};
use crate::selection::ChannelSelection;
use crate::tensor::Cursor;

pub const MODEL_MAGIC: &[u8; 4] = b"KNGM";
pub const MODEL_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(model: &KngModel) -> Vec<u8> {
    let dim = model.config.dim;
    let mut w = Writer(Vec::with_capacity(
        64 + model.neurons.len() * 8 * (dim + 2 + packed_len(dim)),
    ));
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_VERSION);

    let c = &model.config;
    w.u64(c.k as u64);
    w.u64(c.epochs as u64);
    w.u64(c.age_max);
    w.f64(c.epsilon);
    w.u8(c.threshold_mode.code());
    w.u64(c.dim as u64);
    w.u64(c.seed);
    w.u64(c.batch_size as u64);

    let s = &model.selection;
    w.u64(s.source_dim as u64);
    w.u64(s.seed);
    w.u64(s.indices.len() as u64);
    for &i in &s.indices {
        w.u64(i as u64);
    }

    w.u64(model.neurons.len() as u64);
    for n in &model.neurons {
        for &v in &n.center {
            w.f64(v);
        }
        w.u64(n.count);
        w.f64(n.threshold);
        for &v in &n.cov {
            w.f64(v);
        }
    }

    w.u64(model.graph.edge_count() as u64);
    for (a, b, refresh) in model.graph.edges() {
        w.u32(a as u32);
        w.u32(b as u32);
        w.u64(refresh);
    }
    w.u64(model.graph.event_counter());
    for s in model.rng_state {
        w.u64(s);
    }

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

fn count(cur: &mut Cursor<'_>, what: &str, limit: usize) -> Result<usize> {
    let v = cur.u64()?;
    if v > limit as u64 {
        bail!(Format, "{what} {v} exceeds what the file can hold");
    }
    Ok(v as usize)
}

pub fn decode_model(bytes: &[u8]) -> Result<KngModel> {
    if bytes.len() < 4 + 4 + 32 || &bytes[..4] != MODEL_MAGIC {
        bail!(Format, "bad magic, expected KNGM");
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let mut cur = Cursor { bytes: body, pos: 4 };
    let version = cur.u32()?;
    if version != MODEL_VERSION {
        bail!(Format, "unsupported model version {version}");
    }
    if Sha256::digest(body).as_slice() != digest {
        bail!(Format, "checksum mismatch");
    }
    let limit = body.len();

    let k = count(&mut cur, "k", limit)?;
    let epochs = count(&mut cur, "epochs", usize::MAX)?;
    let age_max = cur.u64()?;
    let epsilon = cur.f64()?;
    let mode_code = cur.take(1)?[0];
    let threshold_mode = ThresholdMode::from_code(mode_code)
        .ok_or_else(|| KngError::Format(format!("unknown threshold mode code {mode_code}")))?;
    let dim = count(&mut cur, "dim", limit)?;
    let seed = cur.u64()?;
    let batch_size = count(&mut cur, "batch_size", usize::MAX)?;
    let config = KngConfig {
        k,
        epochs,
        age_max,
        epsilon,
        threshold_mode,
        dim,
        seed,
        batch_size,
    };
    config
        .validate()
        .map_err(|e| KngError::Format(format!("stored config invalid: {e}")))?;

    let source_dim = count(&mut cur, "source_dim", usize::MAX)?;
    let sel_seed = cur.u64()?;
    let n_idx = count(&mut cur, "selection length", limit)?;
    let mut indices = Vec::with_capacity(n_idx);
    for _ in 0..n_idx {
        indices.push(cur.u64()? as usize);
    }
    let selection = ChannelSelection {
        source_dim,
        indices,
        seed: sel_seed,
    };
    selection
        .validate()
        .map_err(|e| KngError::Format(format!("stored selection invalid: {e}")))?;
    if selection.target_dim() != dim {
        bail!(Format, "selection width {} != dim {dim}", selection.target_dim());
    }

    let n_neurons = count(&mut cur, "neuron count", limit)?;
    if n_neurons != k {
        bail!(Format, "{n_neurons} neurons stored for k = {k}");
    }
    let mut neurons = Vec::with_capacity(n_neurons);
    for _ in 0..n_neurons {
        let mut center = Vec::with_capacity(dim);
        for _ in 0..dim {
            center.push(cur.f64()?);
        }
        let cnt = cur.u64()?;
        let threshold = cur.f64()?;
        let mut cov = Vec::with_capacity(packed_len(dim));
        for _ in 0..packed_len(dim) {
            cov.push(cur.f64()?);
        }
        neurons.push(Neuron::new(center, cnt, cov, threshold));
    }

    let n_edges = count(&mut cur, "edge count", limit)?;
    let mut edges = BTreeMap::new();
    for _ in 0..n_edges {
        let a = cur.u32()? as usize;
        let b = cur.u32()? as usize;
        let refresh = cur.u64()?;
        if a >= b || b >= k {
            bail!(Format, "malformed edge ({a}, {b})");
        }
        edges.insert((a, b), refresh);
    }
    let event_counter = cur.u64()?;
    if edges.values().any(|&r| r > event_counter) {
        bail!(Format, "edge refreshed after the final event");
    }
    let mut rng_state = [0u64; 4];
    for s in &mut rng_state {
        *s = cur.u64()?;
    }
    if cur.pos != body.len() {
        bail!(Format, "{} trailing bytes before checksum", body.len() - cur.pos);
    }
    Ok(KngModel {
        neurons,
        graph: TopologyGraph::from_parts(edges, event_counter),
        selection,
        config,
        rng_state,
    })
}

pub fn save_model(model: &KngModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| KngError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<KngModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KngError::io(path, e))?;
    decode_model(&bytes)
}
