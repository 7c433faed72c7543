//! Generate a synthetic dataset and inspect it: manifest counts, clip
//! enumeration under the padding rule, and subject-independent folds.
//!
//!     cargo run --example synthetic_dataset

use jepa_fer::video::{
    enumerate_clips, gen_synthetic, make_folds, verify_folds, FoldSource, SynthConfig,
};

fn main() -> jepa_fer::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = SynthConfig::default();
    let manifest = gen_synthetic(&cfg, dir.path())?;
    println!(
        "{} videos, {} subjects, labels {:?}",
        manifest.records.len(),
        manifest.subjects().len(),
        manifest.labels()
    );

    for rec in manifest.records.iter().take(4) {
        let clips = enumerate_clips(rec.duration_frames, 16, 4, 1);
        println!(
            "  {} ({} frames): {} overlapping clips{}",
            rec.id,
            rec.duration_frames,
            clips.len(),
            if rec.duration_frames < 61 { " (after last-frame padding)" } else { "" }
        );
    }

    let plan = make_folds(&manifest, 5, FoldSource::Generated { seed: 0 })?;
    let report = verify_folds(&plan, &manifest)?;
    println!("\nsubject-independent folds:\n{report}");
    Ok(())
}
