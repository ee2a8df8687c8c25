//! Online vs offline comparison on the synthetic stream, in memory.
//!
//! cargo run --release --example synthetic_stream -- [seed]

use kng::harness::{run_sessions, synthesize, MemoryStream, Mode, SessionPlan, SynthSpec};
use kng::KngModel;

fn main() -> kng::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let data = synthesize(&spec)?;
    let model = KngModel::init(&data.train, spec.model_config())?;
    let stream = MemoryStream {
        items: data
            .stream
            .into_iter()
            .enumerate()
            .map(|(i, (t, m, l))| (format!("img_{i:04}"), t, Some(m), l))
            .collect(),
    };
    for mode in [Mode::Offline, Mode::Online] {
        let mut m = model.clone();
        let plan = SessionPlan { shuffle_seed: seed, mode, ..SessionPlan::default() };
        let report = run_sessions(&mut m, &stream, &plan, &spec.score_config())?;
        let aucs: Vec<f64> = report
            .per_session
            .iter()
            .map(|s| s.image_rocauc.unwrap_or(f64::NAN))
            .collect();
        let first: f64 = aucs[..5].iter().sum::<f64>() / 5.0;
        let last: f64 = aucs[aucs.len() - 5..].iter().sum::<f64>() / 5.0;
        println!(
            "{mode:?}: image {:.4} pixel {:.4} pro {:.4} | first5 {first:.4} last5 {last:.4} | accepted {} rejected {}",
            report.averages.image_rocauc.unwrap_or(f64::NAN),
            report.averages.pixel_rocauc.unwrap_or(f64::NAN),
            report.averages.pro.unwrap_or(f64::NAN),
            report.accepted,
            report.rejected
        );
    }
    Ok(())
}
