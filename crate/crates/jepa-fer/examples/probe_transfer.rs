//! Frozen-encoder probing on held-out subjects: random encoder vs a
//! briefly pre-trained one, on the 3-class / 10-subject synthetic set.
//!
//!     cargo run --release --example probe_transfer

use jepa_fer::config::RunConfig;
use jepa_fer::eval::{EvalSettings, LabelSet, Voting};
use jepa_fer::jepa::{pretrain_run, JepaModel};
use jepa_fer::probe::train_probe;
use jepa_fer::video::{gen_synthetic, make_folds, FoldSource};
use jepa_fer::vit::VideoEncoder;

fn main() -> jepa_fer::Result<()> {
    env_logger::init();
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = gen_synthetic(&cfg.synth()?, dir.path())?;
    let labels = LabelSet::for_manifest(&manifest)?;
    let plan = make_folds(&manifest, cfg.folds, FoldSource::Generated { seed: cfg.fold_seed })?;
    let settings = EvalSettings::new(cfg.augment());

    let random_encoder = VideoEncoder::<f32>::random(&cfg.arch(), 7, false)?;

    println!("pre-training the reference encoder...");
    let model = JepaModel::<f32>::new(&cfg.arch(), cfg.seed)?;
    pretrain_run(&model, &manifest, &cfg.augment(), &cfg.pretrain(), None)?;
    let pretrained = model.export_encoder()?;

    for (name, encoder) in [("random", &random_encoder), ("pretrained", &pretrained)] {
        let t0 = std::time::Instant::now();
        let outcome = train_probe(encoder, &manifest, &labels, &plan, 0, &cfg.augment(), &cfg.probe())?;
        let fold = jepa_fer::eval::evaluate_fold(
            encoder,
            &outcome.probe,
            &manifest,
            &labels,
            &plan,
            0,
            &settings,
        )?;
        let (uar, war) = fold.metrics(Voting::Pbv)?;
        println!(
            "{name}: train war {:.3}, held-out uar {uar:.3} war {war:.3} ({:.0}s)",
            outcome.history.final_train_war().unwrap_or(0.0),
            t0.elapsed().as_secs_f64()
        );
    }
    println!("chance war: {:.3}", 1.0 / labels.len() as f64);
    Ok(())
}
