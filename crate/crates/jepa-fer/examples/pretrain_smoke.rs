//! Pre-training smoke run on the reference toy configuration: generates a
//! synthetic dataset, runs 200 steps, and reports the loss trajectory.
//!
//!     cargo run --release --example pretrain_smoke

use jepa_fer::config::RunConfig;
use jepa_fer::jepa::{pretrain_run, JepaModel};
use jepa_fer::video::gen_synthetic;

fn main() -> jepa_fer::Result<()> {
    env_logger::init();
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = gen_synthetic(&cfg.synth()?, dir.path())?;
    println!("dataset: {} videos", manifest.records.len());

    let model = JepaModel::<f32>::new(&cfg.arch(), cfg.seed)?;
    let t0 = std::time::Instant::now();
    let stats = pretrain_run(&model, &manifest, &cfg.augment(), &cfg.pretrain(), None)?;
    let steps = stats.losses.len();
    let first = stats.mean_loss(0..20);
    let last = stats.mean_loss(steps - 20..steps);
    println!(
        "{} steps in {:.1}s: first-20 mean {:.5}, final-20 mean {:.5}, ratio {:.3}",
        steps,
        t0.elapsed().as_secs_f64(),
        first,
        last,
        last / first
    );
    for s in (0..steps).step_by(20) {
        println!("  step {s:>4}: loss {:.5} momentum {:.5}", stats.losses[s], stats.momenta[s]);
    }
    Ok(())
}
