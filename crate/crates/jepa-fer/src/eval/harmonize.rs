//! Cross-dataset label harmonization.
//!
//! The two lab vocabularies differ by "calm" and "surprise". For a probe
//! trained on the larger set and evaluated on the smaller one, harmonization
//! acts on *predictions* (vote first, then drop or merge); in the opposite
//! direction it acts on *ground-truth labels* (skip or relabel the video).
//! Every removed video is counted, so evaluated + dropped always equals the
//! number of videos presented.

use super::{ConfusionMatrix, LabelSet, VideoPrediction};
use crate::error::{Error, Result};
use crate::video::DatasetTag;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarmonizationMode {
    /// Drop videos whose prediction (or truth) is a class the other
    /// vocabulary lacks.
    DropOnly,
    /// Like `DropOnly` for "surprise", but fold "calm" into "neutral".
    MergeCalmNeutral,
}

impl HarmonizationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            HarmonizationMode::DropOnly => "drop",
            HarmonizationMode::MergeCalmNeutral => "merge",
        }
    }
}

/// The class set of the harmonized confusion matrix: always the shared
/// six-class vocabulary (with "calm" absorbed into "neutral" in merge mode).
pub fn harmonized_classes() -> Vec<String> {
    LabelSet::for_dataset(DatasetTag::Cremad)
        .expect("built-in")
        .names()
        .to_vec()
}

/// Accumulates one cross-dataset evaluation.
#[derive(Debug, Clone)]
pub struct HarmonizedEval {
    pub cm: ConfusionMatrix,
    pub dropped: usize,
    pub evaluated: usize,
}

impl HarmonizedEval {
    pub fn new() -> Self {
        HarmonizedEval {
            cm: ConfusionMatrix::new(harmonized_classes()),
            dropped: 0,
            evaluated: 0,
        }
    }

    /// Fold one video into the matrix (or the dropped counter).
    ///
    /// `train_set` is the vocabulary the probe predicts over, `eval_set`
    /// the vocabulary of the ground truth; they must belong to different
    /// datasets.
    pub fn add_video(
        &mut self,
        train_set: &LabelSet,
        eval_set: &LabelSet,
        mode: HarmonizationMode,
        truth_label: &str,
        pred: &VideoPrediction,
    ) -> Result<()> {
        if train_set.dataset == eval_set.dataset {
            return Err(Error::usage(
                "harmonization mode given for a same-dataset evaluation",
            ));
        }
        let pred_name = train_set.name(pred.class);

        // prediction-side handling (probe knows classes the truth lacks)
        if eval_set.index_of(pred_name).is_none() {
            match (pred_name, mode) {
                ("surprise", _) | ("calm", HarmonizationMode::DropOnly) => {
                    self.dropped += 1;
                    return Ok(());
                }
                ("calm", HarmonizationMode::MergeCalmNeutral) => {}
                (other, _) => {
                    return Err(Error::protocol(format!(
                        "prediction '{other}' has no harmonization rule"
                    )))
                }
            }
        }
        let pred_name = if pred_name == "calm" { "neutral" } else { pred_name };

        // truth-side handling (labels the probe was never trained on)
        if train_set.index_of(truth_label).is_none() {
            match (truth_label, mode) {
                ("surprise", _) | ("calm", HarmonizationMode::DropOnly) => {
                    self.dropped += 1;
                    return Ok(());
                }
                ("calm", HarmonizationMode::MergeCalmNeutral) => {}
                (other, _) => {
                    return Err(Error::protocol(format!(
                        "ground-truth label '{other}' has no harmonization rule"
                    )))
                }
            }
        }
        let truth_name = if truth_label == "calm" { "neutral" } else { truth_label };

        let classes = harmonized_classes();
        let t = classes
            .iter()
            .position(|c| c == truth_name)
            .ok_or_else(|| Error::protocol(format!("label '{truth_name}' outside harmonized set")))?;
        let p = classes
            .iter()
            .position(|c| c == pred_name)
            .ok_or_else(|| Error::protocol(format!("label '{pred_name}' outside harmonized set")))?;
        self.cm.add(t, p);
        self.evaluated += 1;
        Ok(())
    }
}

impl Default for HarmonizedEval {
    fn default() -> Self {
        Self::new()
    }
}
