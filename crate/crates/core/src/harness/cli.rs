use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::session::{run_repeats, run_sessions, Mode, SessionPlan};
use super::synth::{generate_synthetic, SynthSpec};
use crate::error::{bail, KngError, Result};
use crate::kng::{load_model, save_model, KngConfig, KngModel, ThresholdMode};
use crate::manifest::Manifest;
use crate::scoring::{image_score, score_map, ScoreConfig};
use crate::tensor::{read_features, read_mask, write_tensor};

#[derive(Debug, Parser)]
#[command(name = "kng", version, about = "Few-shot online anomaly detection with a K-NG network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model on a few normal images.
    Init(InitArgs),
    /// Write the anomaly map of one feature tensor.
    Score(ScoreArgs),
    /// Run the shuffled-session protocol over a labeled stream.
    Stream(StreamArgs),
    /// Evaluate a frozen model on a labeled manifest as one block.
    Eval(EvalArgs),
    /// Generate a synthetic train/stream dataset.
    Synth(SynthArgs),
    /// Print model statistics as JSON.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct InitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 3136)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 25)]
    age_max: u64,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "mean")]
    threshold_mode: String,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreOpts {
    /// Gaussian smoothing sigma in output pixels.
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Output map size `HxW`; defaults to the mask size when masks exist,
    /// otherwise the patch grid.
    #[arg(long, value_parser = parse_size)]
    target_size: Option<(usize, usize)>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: ScoreOpts,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Defaults to the batch size stored in the model.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 50)]
    session_size: usize,
    #[arg(long, default_value = "online")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0.3)]
    fpr_limit: f64,
    #[arg(long)]
    report: PathBuf,
    /// Persist the model as it stands after the stream.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Include seconds per image in the report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    opts: ScoreOpts,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    fpr_limit: f64,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    opts: ScoreOpts,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value = "14x14", value_parser = parse_size)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 10)]
    n_train: usize,
    #[arg(long, default_value_t = 20)]
    sessions: usize,
    #[arg(long, default_value_t = 50)]
    session_size: usize,
    #[arg(long, default_value_t = 0.1)]
    anomaly_ratio: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Off-manifold shift of anomalous patches, in noise standard deviations.
    #[arg(long, default_value_t = 10.0)]
    margin: f64,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    let w = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    Ok((h, w))
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| KngError::io(path, e))
}

/// Map size for a manifest: explicit, else the first mask's size.
fn resolve_target(explicit: Option<(usize, usize)>, manifest: &Manifest) -> Result<Option<(usize, usize)>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match manifest.items.iter().find_map(|i| i.mask.as_ref()) {
        Some(p) => {
            let m = read_mask(p)?;
            Ok(Some((m.height(), m.width())))
        }
        None => Ok(None),
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Init(a) => {
            let manifest = Manifest::load(&a.train)?;
            if manifest.is_empty() {
                bail!(Validation, "training manifest is empty");
            }
            let train = manifest
                .items
                .iter()
                .map(|i| read_features(&i.features))
                .collect::<Result<Vec<_>>>()?;
            let cfg = KngConfig {
                k: a.k,
                epochs: a.epochs,
                age_max: a.age_max,
                epsilon: a.epsilon,
                threshold_mode: a.threshold_mode.parse::<ThresholdMode>()?,
                dim: a.dim,
                seed: a.seed,
                batch_size: a.batch_size,
            };
            let model = KngModel::init(&train, cfg)?;
            save_model(&model, &a.out)?;
            println!(
                "{}",
                json!({"out": a.out, "neurons": model.k(), "embeddings": model.total_count(),
                       "edges": model.graph.edge_count(), "hash": model.content_hash()})
            );
            Ok(())
        }
        Command::Score(a) => {
            let model = load_model(&a.model)?;
            let t = read_features(&a.features)?;
            let cfg = ScoreConfig {
                sigma: a.opts.sigma,
                target_size: a.opts.target_size,
            };
            let map = score_map(&t, &model, &cfg)?;
            write_tensor(&map.to_grid().into(), &a.out)?;
            println!(
                "{}",
                json!({"out": a.out, "height": map.height, "width": map.width,
                       "image_score": image_score(&map)?})
            );
            Ok(())
        }
        Command::Stream(a) => {
            let model = load_model(&a.model)?;
            let manifest = Manifest::load(&a.manifest)?;
            let plan = SessionPlan {
                shuffle_seed: a.shuffle_seed,
                session_size: a.session_size,
                batch_size: a.batch_size.unwrap_or(model.config.batch_size),
                mode: a.mode.parse::<Mode>()?,
                fpr_limit: a.fpr_limit,
                timing: a.timing,
            };
            let cfg = ScoreConfig {
                sigma: a.opts.sigma,
                target_size: resolve_target(a.opts.target_size, &manifest)?,
            };
            if a.repeats > 1 {
                if a.save_model.is_some() {
                    bail!(Validation, "--save-model needs a single run (--repeats 1)");
                }
                let report = run_repeats(&model, &manifest, &plan, &cfg, a.repeats)?;
                write_text(&a.report, &report.to_json())?;
                println!(
                    "{}",
                    json!({"report": a.report, "image_rocauc": report.image_rocauc,
                           "pixel_rocauc": report.pixel_rocauc, "pro": report.pro})
                );
            } else {
                let mut model = model;
                let report = run_sessions(&mut model, &manifest, &plan, &cfg)?;
                write_text(&a.report, &report.to_json())?;
                if let Some(p) = &a.save_model {
                    save_model(&model, p)?;
                }
                if report.pixel_metrics_omitted {
                    eprintln!("warning: some items have no mask; pixel metrics omitted");
                }
                println!(
                    "{}",
                    json!({"report": a.report, "averages": report.averages,
                           "accepted": report.accepted, "rejected": report.rejected})
                );
            }
            Ok(())
        }
        Command::Eval(a) => {
            let mut model = load_model(&a.model)?;
            let manifest = Manifest::load(&a.manifest)?;
            let n = manifest.len().max(1);
            let plan = SessionPlan {
                shuffle_seed: 0,
                session_size: n,
                batch_size: n,
                mode: Mode::Offline,
                fpr_limit: a.fpr_limit,
                timing: false,
            };
            let cfg = ScoreConfig {
                sigma: a.opts.sigma,
                target_size: resolve_target(a.opts.target_size, &manifest)?,
            };
            let report = run_sessions(&mut model, &manifest, &plan, &cfg)?;
            write_text(&a.report, &report.to_json())?;
            println!("{}", json!({"report": a.report, "metrics": report.averages}));
            Ok(())
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                ambient_dim: a.dim,
                grid: a.grid,
                n_train: a.n_train,
                n_sessions: a.sessions,
                session_size: a.session_size,
                anomaly_ratio: a.anomaly_ratio,
                seed: a.seed,
                noise: a.noise,
                margin: a.margin,
                ..SynthSpec::default()
            };
            let (train, stream) = generate_synthetic(&spec, &a.out)?;
            let m = spec.model_config();
            let sc = spec.score_config();
            println!(
                "{}",
                json!({"train": train, "stream": stream,
                       "suggested": {"k": m.k, "epochs": m.epochs, "epsilon": m.epsilon,
                                     "dim": m.dim, "sigma": sc.sigma}})
            );
            Ok(())
        }
        Command::Inspect(a) => {
            let model = load_model(&a.model)?;
            println!("{}", serde_json::to_string_pretty(&inspect(&model)).expect("json"));
            Ok(())
        }
    }
}

pub fn inspect(model: &KngModel) -> serde_json::Value {
    let counts: Vec<u64> = model.neurons.iter().map(|n| n.count).collect();
    let finite: Vec<f64> = model
        .neurons
        .iter()
        .map(|n| n.threshold)
        .filter(|t| t.is_finite())
        .collect();
    let adj = model.graph.adjacency(model.k());
    json!({
        "config": model.config,
        "selection": {"source_dim": model.selection.source_dim, "target_dim": model.selection.target_dim(),
                      "seed": model.selection.seed},
        "neurons": model.k(),
        "total_count": model.total_count(),
        "count_min": counts.iter().min(),
        "count_max": counts.iter().max(),
        "empty_neurons": counts.iter().filter(|&&c| c == 0).count(),
        "isolated_neurons": adj.iter().filter(|a| a.is_empty()).count(),
        "edges": model.graph.edge_count(),
        "max_edge_age": model.graph.max_age(),
        "event_counter": model.graph.event_counter(),
        "threshold_min": finite.iter().cloned().reduce(f64::min),
        "threshold_max": finite.iter().cloned().reduce(f64::max),
        "threshold_mean": crate::metrics::mean(&finite),
        "hash": model.content_hash(),
    })
}
