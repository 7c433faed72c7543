//! Self-supervised video pre-training and frozen-encoder facial-expression
//! classification, end to end on the CPU.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`tensor`] — dense tensors with reverse-mode autodiff, AdamW, and a
//!   finite-difference gradient-check oracle;
//! - [`video`] — the RVT1 raw-video container, manifests, clip sampling,
//!   augmentation, synthetic dataset generation, and subject-independent
//!   cross-validation folds;
//! - [`vit`] — tubelet embedding, 3-D sinusoidal positions, tube masks, and
//!   the transformer encoder/predictor pair;
//! - [`jepa`] — masked latent prediction with an EMA target encoder;
//! - [`probe`] — attentive probing and probe training on a frozen encoder;
//! - [`eval`] — whole-video voting, UAR/WAR, cross-dataset harmonization,
//!   confusion matrices, and PCA export;
//! - [`cli`] — the subcommand implementations behind the `jepa-fer` binary.
//!
//! Every randomized step is driven by explicit seeds; identical seeds give
//! byte-identical artifacts. See the crate README and `examples/` for
//! runnable entry points per capability.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod jepa;
pub mod probe;
pub mod tensor;
pub mod video;
pub mod vit;

pub use error::{Error, Result};

/// Cap rayon worker parallelism from `JEPA_FER_THREADS` (best effort; the
/// global pool can only be configured once per process).
pub fn init_thread_pool_from_env() {
    if let Ok(v) = std::env::var("JEPA_FER_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
