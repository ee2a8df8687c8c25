//! Shuffled-session evaluation: the stream is shuffled once, cut into
//! equal sessions, and processed batch by batch. Every batch is scored
//! before the model may learn from it, so no image is ever seen in training
//! ahead of its own prediction.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::kng::{KngConfig, KngModel};
use crate::manifest::{Label, Manifest};
use crate::metrics::{mean, pixel_rocauc, population_std, pro_score, rocauc_slices};
use crate::rng::Xoshiro256;
use crate::scoring::{image_score, score_map, AnomalyMap, ScoreConfig};
use crate::tensor::{read_features, read_mask, FeatureTensor, MaskTensor};
use crate::KngError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Online,
    Offline,
}

impl std::str::FromStr for Mode {
    type Err = KngError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Mode::Online),
            "offline" => Ok(Mode::Offline),
            other => bail!(Argument, "unknown mode {other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub shuffle_seed: u64,
    pub session_size: usize,
    pub batch_size: usize,
    pub mode: Mode,
    pub fpr_limit: f64,
    /// Record wall-clock time per image in the report. Off by default so
    /// reports stay byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl Default for SessionPlan {
    fn default() -> Self {
        Self {
            shuffle_seed: 0,
            session_size: 50,
            batch_size: 10,
            mode: Mode::Online,
            fpr_limit: 0.3,
            timing: false,
        }
    }
}

impl SessionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 || self.session_size < self.batch_size {
            bail!(
                Validation,
                "need session_size >= batch_size >= 1 (got {} and {})",
                self.session_size,
                self.batch_size
            );
        }
        if !(self.fpr_limit > 0.0 && self.fpr_limit <= 1.0) {
            bail!(Validation, "fpr_limit must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_index: usize,
    pub n_images: usize,
    pub n_anomalous: usize,
    /// Shorter trailing session; excluded from the averages.
    pub partial: bool,
    pub image_rocauc: Option<f64>,
    pub pixel_rocauc: Option<f64>,
    pub pro: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of neuron counts after the session.
    pub model_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAverages {
    pub image_rocauc: Option<f64>,
    pub pixel_rocauc: Option<f64>,
    pub pro: Option<f64>,
    pub sessions_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub session_index: usize,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model_config: KngConfig,
    pub plan: SessionPlan,
    pub score_config: ScoreConfig,
    pub model_hash_before: String,
    pub model_hash_after: String,
    pub per_session: Vec<SessionResult>,
    pub averages: MetricAverages,
    pub accepted: usize,
    pub rejected: usize,
    /// Set when some item lacked a mask, so pixel metrics were skipped.
    pub pixel_metrics_omitted: bool,
    pub images: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds_per_image: Option<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Averages over complete sessions, skipping sessions where a metric is
/// undefined.
pub fn session_averages(sessions: &[SessionResult]) -> MetricAverages {
    let full: Vec<&SessionResult> = sessions.iter().filter(|s| !s.partial).collect();
    let pick = |f: fn(&SessionResult) -> Option<f64>| -> Option<f64> {
        mean(&full.iter().filter_map(|s| f(s)).collect::<Vec<_>>())
    };
    MetricAverages {
        image_rocauc: pick(|s| s.image_rocauc),
        pixel_rocauc: pick(|s| s.pixel_rocauc),
        pro: pick(|s| s.pro),
        sessions_used: full.len(),
    }
}

/// Any source of labeled stream items; the file-backed manifest is the
/// usual one, in-memory sources serve tests and the demo.
pub trait StreamSource {
    fn len(&self) -> usize;
    fn id(&self, i: usize) -> String;
    fn label(&self, i: usize) -> Option<Label>;
    fn has_mask(&self, i: usize) -> bool;
    fn features(&self, i: usize) -> Result<FeatureTensor>;
    fn mask(&self, i: usize) -> Result<Option<MaskTensor>>;
}

impl StreamSource for Manifest {
    fn len(&self) -> usize {
        self.items.len()
    }
    fn id(&self, i: usize) -> String {
        self.items[i].id.clone()
    }
    fn label(&self, i: usize) -> Option<Label> {
        self.items[i].label
    }
    fn has_mask(&self, i: usize) -> bool {
        self.items[i].mask.is_some()
    }
    fn features(&self, i: usize) -> Result<FeatureTensor> {
        read_features(&self.items[i].features)
    }
    fn mask(&self, i: usize) -> Result<Option<MaskTensor>> {
        self.items[i].mask.as_ref().map(read_mask).transpose()
    }
}

/// In-memory labeled stream.
pub struct MemoryStream {
    pub items: Vec<(String, FeatureTensor, Option<MaskTensor>, Label)>,
}

impl StreamSource for MemoryStream {
    fn len(&self) -> usize {
        self.items.len()
    }
    fn id(&self, i: usize) -> String {
        self.items[i].0.clone()
    }
    fn label(&self, i: usize) -> Option<Label> {
        Some(self.items[i].3)
    }
    fn has_mask(&self, i: usize) -> bool {
        self.items[i].2.is_some()
    }
    fn features(&self, i: usize) -> Result<FeatureTensor> {
        Ok(self.items[i].1.clone())
    }
    fn mask(&self, i: usize) -> Result<Option<MaskTensor>> {
        Ok(self.items[i].2.clone())
    }
}

/// Runs the session protocol, updating `model` in place in online mode.
pub fn run_sessions<S: StreamSource + ?Sized>(
    model: &mut KngModel,
    source: &S,
    plan: &SessionPlan,
    score_cfg: &ScoreConfig,
) -> Result<EvalReport> {
    plan.validate()?;
    model.ensure_ready()?;
    let n = source.len();
    if n == 0 {
        bail!(Validation, "empty evaluation stream");
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        match source.label(i) {
            Some(l) => labels.push(l),
            None => bail!(Validation, "item {:?} has no label", source.id(i)),
        }
    }
    let pixel_metrics = (0..n).all(|i| source.has_mask(i));

    let mut order: Vec<usize> = (0..n).collect();
    Xoshiro256::seed_from(plan.shuffle_seed).shuffle(&mut order);

    let hash_before = model.content_hash();
    let started = plan.timing.then(Instant::now);
    let mut sessions = Vec::new();
    let mut images = Vec::with_capacity(n);
    let (mut accepted, mut rejected) = (0, 0);

    for (s_idx, session) in order.chunks(plan.session_size).enumerate() {
        let mut scores = Vec::with_capacity(session.len());
        let mut maps: Vec<AnomalyMap> = Vec::new();
        let mut masks: Vec<MaskTensor> = Vec::new();
        let (mut s_acc, mut s_rej) = (0, 0);
        for batch in session.chunks(plan.batch_size) {
            let tensors: Vec<FeatureTensor> = batch
                .iter()
                .map(|&i| source.features(i))
                .collect::<Result<_>>()?;
            for (&i, t) in batch.iter().zip(&tensors) {
                let map = score_map(t, model, score_cfg)?;
                let score = image_score(&map)?;
                scores.push(score);
                images.push(ImageRecord {
                    id: source.id(i),
                    session_index: s_idx,
                    label: labels[i],
                    score,
                });
                if pixel_metrics {
                    let mask = source.mask(i)?.expect("checked above");
                    if (mask.height(), mask.width()) != (map.height, map.width) {
                        bail!(
                            Validation,
                            "mask of {:?} is {}x{} but maps are {}x{}; set the target size to match",
                            source.id(i),
                            mask.height(),
                            mask.width(),
                            map.height,
                            map.width
                        );
                    }
                    masks.push(mask);
                    maps.push(map);
                }
            }
            if plan.mode == Mode::Online {
                let r = model.online_update(&tensors)?;
                s_acc += r.accepted;
                s_rej += r.rejected;
            }
        }
        let session_labels: Vec<bool> = session.iter().map(|&i| labels[i].is_anomalous()).collect();
        let defined = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(KngError::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let image_rocauc = defined(rocauc_slices(&scores, &session_labels))?;
        let (pixel_rocauc, pro) = if pixel_metrics {
            (
                defined(pixel_rocauc(&maps, &masks))?,
                defined(pro_score(&maps, &masks, plan.fpr_limit))?,
            )
        } else {
            (None, None)
        };
        accepted += s_acc;
        rejected += s_rej;
        sessions.push(SessionResult {
            session_index: s_idx,
            n_images: session.len(),
            n_anomalous: session_labels.iter().filter(|&&a| a).count(),
            partial: session.len() < plan.session_size,
            image_rocauc,
            pixel_rocauc,
            pro,
            accepted: s_acc,
            rejected: s_rej,
            model_count: model.total_count(),
        });
    }

    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_config: model.config.clone(),
        plan: plan.clone(),
        score_config: *score_cfg,
        model_hash_before: hash_before,
        model_hash_after: model.content_hash(),
        averages: session_averages(&sessions),
        per_session: sessions,
        accepted,
        rejected,
        pixel_metrics_omitted: !pixel_metrics,
        images,
        seconds_per_image: started.map(|t| t.elapsed().as_secs_f64() / n as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            std: population_std(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub schema_version: u32,
    pub repeats: usize,
    pub image_rocauc: Spread,
    pub pixel_rocauc: Spread,
    pub pro: Spread,
    pub runs: Vec<EvalReport>,
}

impl RepeatReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// `repeats` independent shuffles (seeds `shuffle_seed + r`), each starting
/// from a fresh copy of `model`.
pub fn run_repeats<S: StreamSource + ?Sized>(
    model: &KngModel,
    source: &S,
    plan: &SessionPlan,
    score_cfg: &ScoreConfig,
    repeats: usize,
) -> Result<RepeatReport> {
    if repeats == 0 {
        bail!(Validation, "repeats must be at least 1");
    }
    let mut runs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut m = model.clone();
        let p = SessionPlan {
            shuffle_seed: plan.shuffle_seed.wrapping_add(r as u64),
            ..plan.clone()
        };
        runs.push(run_sessions(&mut m, source, &p, score_cfg)?);
    }
    let collect = |f: fn(&MetricAverages) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(|r| f(&r.averages)).collect()
    };
    Ok(RepeatReport {
        schema_version: REPORT_SCHEMA_VERSION,
        repeats,
        image_rocauc: Spread::of(&collect(|a| a.image_rocauc)),
        pixel_rocauc: Spread::of(&collect(|a| a.pixel_rocauc)),
        pro: Spread::of(&collect(|a| a.pro)),
        runs,
    })
}
