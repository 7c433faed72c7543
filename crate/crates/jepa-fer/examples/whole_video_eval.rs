//! Whole-video classification on a small setup: train a probe for one
//! fold, evaluate every overlapping clip of the held-out videos, and
//! compare the MV and PBV voting strategies.
//!
//!     cargo run --release --example whole_video_eval

use jepa_fer::eval::{uar, war, EvalSettings, LabelSet, Voting};
use jepa_fer::probe::{train_probe, ProbeTrainConfig};
use jepa_fer::video::{gen_synthetic, make_folds, AugmentConfig, FoldSource, SynthConfig};
use jepa_fer::vit::{ArchConfig, TubeletConfig, VideoEncoder};

fn main() -> jepa_fer::Result<()> {
    env_logger::init();
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = gen_synthetic(
        &SynthConfig {
            size: (32, 32),
            duration_range: (61, 75),
            ..Default::default()
        },
        dir.path(),
    )?;
    let labels = LabelSet::for_manifest(&manifest)?;
    let plan = make_folds(&manifest, 5, FoldSource::Generated { seed: 0 })?;

    let arch = ArchConfig {
        frame_h: 32,
        frame_w: 32,
        depth: 2,
        heads: 2,
        mlp_ratio: 2,
        predictor_dim: 16,
        predictor_heads: 2,
        tubelet: TubeletConfig { embed_dim: 32, ..Default::default() },
        ..Default::default()
    };
    let encoder = VideoEncoder::<f32>::random(&arch, 0, false)?;
    let aug = AugmentConfig { target_size: (32, 32), ..Default::default() };

    let outcome = train_probe(
        &encoder,
        &manifest,
        &labels,
        &plan,
        0,
        &aug,
        &ProbeTrainConfig { epochs: 5, ..Default::default() },
    )?;
    println!("train war after 5 epochs: {:.3}", outcome.history.final_train_war().unwrap());

    let settings = EvalSettings::new(aug);
    let fold = jepa_fer::eval::evaluate_fold(
        &encoder, &outcome.probe, &manifest, &labels, &plan, 0, &settings,
    )?;
    for voting in [Voting::Mv, Voting::Pbv] {
        let cm = fold.matrix(voting);
        println!(
            "{}: uar {:.3}, war {:.3} over {} held-out videos",
            voting.as_str(),
            uar(cm)?.value,
            war(cm)?,
            fold.videos
        );
    }
    Ok(())
}
