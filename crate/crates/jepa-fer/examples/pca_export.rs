//! Project pooled clip embeddings onto their first two principal
//! components and write pca.csv, comparing average pooling against the
//! attentive query.
//!
//!     cargo run --release --example pca_export

use jepa_fer::eval::{pca2, pooled_clip_embeddings, write_pca_csv, EvalSettings};
use jepa_fer::probe::{AttentiveProbe, Pooling};
use jepa_fer::video::{gen_synthetic, AugmentConfig, SynthConfig};
use jepa_fer::vit::{ArchConfig, TubeletConfig, VideoEncoder};

fn main() -> jepa_fer::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = gen_synthetic(
        &SynthConfig {
            subjects: 5,
            videos_per_subject_per_class: 1,
            size: (32, 32),
            duration_range: (61, 66),
            ..Default::default()
        },
        dir.path(),
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
    let probe = AttentiveProbe::<f32>::new(32, 2, 3, 0)?;
    let settings = EvalSettings::new(AugmentConfig { target_size: (32, 32), ..Default::default() });
    let records: Vec<_> = manifest.records.iter().collect();

    for (pooling, name) in [(Pooling::Average, "average"), (Pooling::Attentive, "attentive")] {
        let (embeddings, labels) =
            pooled_clip_embeddings(&encoder, &probe, &manifest, &records, pooling, &settings)?;
        let embeddings: Vec<Vec<f64>> = embeddings
            .into_iter()
            .map(|e| e.into_iter().map(f64::from).collect())
            .collect();
        let (coords, variance) = pca2(&embeddings)?;
        let out = std::env::temp_dir().join(format!("pca_{name}.csv"));
        write_pca_csv(&coords, &labels, &out)?;
        println!(
            "{name}: {} clips, component variances [{:.4}, {:.4}] -> {}",
            coords.len(),
            variance[0],
            variance[1],
            out.display()
        );
    }
    Ok(())
}
