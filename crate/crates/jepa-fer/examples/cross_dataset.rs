//! Cross-dataset evaluation with label harmonization, on lab-style
//! synthetic stand-ins: probes trained on an 8-class dataset are scored
//! on a 6-class one, with "surprise" dropped and "calm" either dropped or
//! merged into "neutral".
//!
//!     cargo run --release --example cross_dataset

use jepa_fer::eval::{
    cross_evaluate, uar, war, EvalSettings, HarmonizationMode, LabelSet, Voting,
};
use jepa_fer::probe::{train_probe, ProbeTrainConfig};
use jepa_fer::video::{
    gen_synthetic, make_folds, AugmentConfig, DatasetTag, FoldSource, SynthConfig,
};
use jepa_fer::vit::{ArchConfig, TubeletConfig, VideoEncoder};

fn main() -> jepa_fer::Result<()> {
    env_logger::init();
    let base = SynthConfig {
        subjects: 6,
        videos_per_subject_per_class: 1,
        size: (32, 32),
        duration_range: (61, 70),
        ..Default::default()
    };
    let train_dir = tempfile::tempdir().expect("tempdir");
    let train_manifest = gen_synthetic(
        &SynthConfig { classes: 8, dataset_tag: DatasetTag::Ravdess, seed: 1, ..base.clone() },
        train_dir.path(),
    )?;
    let eval_dir = tempfile::tempdir().expect("tempdir");
    let eval_manifest = gen_synthetic(
        &SynthConfig { classes: 6, dataset_tag: DatasetTag::Cremad, seed: 2, ..base },
        eval_dir.path(),
    )?;

    let arch = ArchConfig {
        frame_h: 32,
        frame_w: 32,
        depth: 1,
        heads: 2,
        mlp_ratio: 2,
        predictor_dim: 16,
        predictor_heads: 2,
        tubelet: TubeletConfig { embed_dim: 32, ..Default::default() },
        ..Default::default()
    };
    let encoder = VideoEncoder::<f32>::random(&arch, 0, false)?;
    let aug = AugmentConfig { target_size: (32, 32), ..Default::default() };
    let train_labels = LabelSet::for_dataset(DatasetTag::Ravdess).unwrap();
    let plan = make_folds(&train_manifest, 5, FoldSource::Generated { seed: 0 })?;

    println!("training 5 probes on the 8-class stand-in...");
    let probes: Vec<_> = (0..5)
        .map(|f| {
            train_probe(
                &encoder,
                &train_manifest,
                &train_labels,
                &plan,
                f,
                &aug,
                &ProbeTrainConfig { epochs: 2, clips_per_video: 4, ..Default::default() },
            )
            .map(|o| o.probe)
        })
        .collect::<jepa_fer::Result<_>>()?;

    let settings = EvalSettings::new(aug);
    for mode in [HarmonizationMode::DropOnly, HarmonizationMode::MergeCalmNeutral] {
        let outcome = cross_evaluate(
            &encoder, &probes, &eval_manifest, &train_labels, mode, Voting::Pbv, &settings,
        )?;
        let mut mean_uar = 0.0;
        let mut mean_war = 0.0;
        let mut dropped = 0;
        for h in &outcome.per_probe {
            mean_uar += uar(&h.cm)?.value / outcome.per_probe.len() as f64;
            mean_war += war(&h.cm)?/ outcome.per_probe.len() as f64;
            dropped += h.dropped;
        }
        println!(
            "{:?}: mean uar {mean_uar:.3}, mean war {mean_war:.3}, dropped {dropped} of {} video passes",
            mode,
            outcome.total_videos * outcome.per_probe.len(),
        );
    }
    Ok(())
}
