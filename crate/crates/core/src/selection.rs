use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng::Xoshiro256;
use crate::tensor::FeatureTensor;

/// Seeded subset of raw feature channels kept for the working dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSelection {
    pub source_dim: usize,
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl ChannelSelection {
    pub fn target_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn is_identity(&self) -> bool {
        self.indices.len() == self.source_dim
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            bail!(Validation, "channel selection is empty");
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Validation, "channel selection not strictly increasing");
        }
        if self.indices.last().is_some_and(|&i| i >= self.source_dim) {
            bail!(Validation, "channel index out of range for source dim {}", self.source_dim);
        }
        Ok(())
    }
}

/// Draws `target_dim` distinct channels uniformly without replacement by a
/// partial Fisher-Yates shuffle, then sorts them.
pub fn make_selection(source_dim: usize, target_dim: usize, seed: u64) -> Result<ChannelSelection> {
    if target_dim == 0 || target_dim > source_dim {
        bail!(
            Argument,
            "target dim {target_dim} must be in 1..={source_dim}"
        );
    }
    let mut rng = Xoshiro256::seed_from(seed);
    let mut indices = rng.partial_shuffle(source_dim, target_dim);
    indices.sort_unstable();
    Ok(ChannelSelection {
        source_dim,
        indices,
        seed,
    })
}

pub fn apply_selection(t: &FeatureTensor, s: &ChannelSelection) -> Result<FeatureTensor> {
    if t.dim() != s.source_dim {
        bail!(
            Argument,
            "tensor has {} channels, selection expects {}",
            t.dim(),
            s.source_dim
        );
    }
    let mut data = Vec::with_capacity(t.patch_count() * s.indices.len());
    for patch in t.patches() {
        data.extend(s.indices.iter().map(|&i| patch[i]));
    }
    FeatureTensor::new(t.height(), t.width(), s.indices.len(), data)
}
