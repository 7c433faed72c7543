//! Subject-independent fold plans: the built-in CREMA-D table and seeded
//! generated plans, with verification.
//!
//!     cargo run --example fold_plans

use jepa_fer::video::{gen_synthetic, make_folds, verify_folds, FoldPlan, FoldSource, SynthConfig};

fn main() -> jepa_fer::Result<()> {
    let table = FoldPlan::cremad_table();
    println!("built-in CREMA-D plan, fold sizes {:?}:", table.fold_sizes());
    for (i, fold) in table.folds.iter().enumerate() {
        println!("  split {}: {}", i + 1, fold.join(", "));
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = gen_synthetic(
        &SynthConfig {
            subjects: 24,
            videos_per_subject_per_class: 1,
            size: (16, 16),
            duration_range: (61, 62),
            ..Default::default()
        },
        dir.path(),
    )?;
    let plan = make_folds(&manifest, 5, FoldSource::Generated { seed: 7 })?;
    println!("\ngenerated plan over 24 subjects, sizes {:?}", plan.fold_sizes());
    let report = verify_folds(&plan, &manifest)?;
    println!("{report}");
    Ok(())
}
