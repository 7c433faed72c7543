//! Whole-video evaluation: every overlapping clip of every validation
//! video is encoded, classified, and voted into a confusion matrix.

use super::{
    uar, vote, war, ConfusionMatrix, HarmonizationMode, HarmonizedEval, LabelSet, Voting,
};
use crate::error::{Error, Result};
use crate::probe::{AttentiveProbe, Pooling};
use crate::tensor::Tensor;
use crate::video::{
    enumerate_clips, extract_and_transform, load_video, AugmentConfig, ClipSpec, FoldPlan,
    Manifest, VideoRecord,
};
use crate::vit::VideoEncoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Clip protocol settings for evaluation.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub aug: AugmentConfig,
    /// Start-frame stride between consecutive evaluated clips.
    pub clip_stride: usize,
}

impl EvalSettings {
    pub fn new(aug: AugmentConfig) -> Self {
        EvalSettings {
            aug: AugmentConfig {
                train_mode: false,
                ..aug
            },
            clip_stride: 1,
        }
    }
}

/// Encoder outputs for every evaluated clip of one video.
fn encode_video_clips(
    encoder: &VideoEncoder<f32>,
    manifest: &Manifest,
    rec: &VideoRecord,
    settings: &EvalSettings,
) -> Result<Vec<Tensor<f32>>> {
    let video = load_video(&manifest.video_path(rec))?;
    if video.frames != rec.duration_frames {
        return Err(Error::protocol(format!(
            "record '{}' declares {} frames but the file holds {}",
            rec.id, rec.duration_frames, video.frames
        )));
    }
    // eval transforms are deterministic; the rng is never consulted
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    enumerate_clips(video.frames, 16, 4, settings.clip_stride)
        .into_iter()
        .map(|start| {
            let clip = extract_and_transform(&video, &ClipSpec::new(start), &settings.aug, &mut rng)?;
            encoder.encode_clip(&clip)
        })
        .collect()
}

/// Per-clip class probabilities for one video.
pub fn clip_probabilities(
    encoder: &VideoEncoder<f32>,
    probe: &AttentiveProbe<f32>,
    manifest: &Manifest,
    rec: &VideoRecord,
    settings: &EvalSettings,
) -> Result<Vec<Vec<f32>>> {
    encode_video_clips(encoder, manifest, rec, settings)?
        .iter()
        .map(|features| probe.probabilities(features))
        .collect()
}

/// One fold's confusion matrices, one per voting strategy, plus metrics.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub voting: Vec<(Voting, ConfusionMatrix)>,
    pub videos: usize,
}

impl FoldOutcome {
    pub fn matrix(&self, v: Voting) -> &ConfusionMatrix {
        &self
            .voting
            .iter()
            .find(|(s, _)| *s == v)
            .expect("both strategies are always evaluated")
            .1
    }

    pub fn metrics(&self, v: Voting) -> Result<(f64, f64)> {
        let cm = self.matrix(v);
        Ok((uar(cm)?.value, war(cm)?))
    }
}

/// Evaluate one fold's validation videos with the given probe. Both voting
/// strategies are computed from the same clip probabilities.
pub fn evaluate_fold(
    encoder: &VideoEncoder<f32>,
    probe: &AttentiveProbe<f32>,
    manifest: &Manifest,
    labels: &LabelSet,
    plan: &FoldPlan,
    fold_index: usize,
    settings: &EvalSettings,
) -> Result<FoldOutcome> {
    let held_out = plan.validation_subjects(fold_index)?;
    let records: Vec<&VideoRecord> = manifest
        .records
        .iter()
        .filter(|r| held_out.contains(r.subject_id.as_str()))
        .collect();
    if records.is_empty() {
        return Err(Error::protocol(format!(
            "fold {fold_index} holds no validation videos"
        )));
    }
    for r in &records {
        if labels.index_of(&r.label).is_none() {
            return Err(Error::protocol(format!(
                "video '{}' label '{}' outside the probe's label set",
                r.id, r.label
            )));
        }
    }

    let probs: Vec<Result<Vec<Vec<f32>>>> = records
        .par_iter()
        .map(|rec| clip_probabilities(encoder, probe, manifest, rec, settings))
        .collect();

    let mut outcome = FoldOutcome {
        voting: vec![
            (Voting::Mv, ConfusionMatrix::new(labels.names().to_vec())),
            (Voting::Pbv, ConfusionMatrix::new(labels.names().to_vec())),
        ],
        videos: records.len(),
    };
    for (rec, clip_probs) in records.iter().zip(probs) {
        let clip_probs = clip_probs?;
        let truth = labels.index_of(&rec.label).expect("validated above");
        for (strategy, cm) in outcome.voting.iter_mut() {
            let pred = vote(*strategy, &clip_probs)?;
            cm.add(truth, pred.class);
        }
    }
    Ok(outcome)
}

/// One probe's harmonized pass over the whole foreign dataset.
#[derive(Debug, Clone)]
pub struct CrossEvalOutcome {
    pub per_probe: Vec<HarmonizedEval>,
    pub total_videos: usize,
}

/// Evaluate source-trained probes on the other dataset's manifest. Every
/// probe sees every video; encoder features per clip are shared across
/// probes. Fails when the manifests belong to the same dataset.
pub fn cross_evaluate(
    encoder: &VideoEncoder<f32>,
    probes: &[AttentiveProbe<f32>],
    eval_manifest: &Manifest,
    train_labels: &LabelSet,
    mode: HarmonizationMode,
    voting: Voting,
    settings: &EvalSettings,
) -> Result<CrossEvalOutcome> {
    let eval_labels = LabelSet::for_manifest(eval_manifest)?;
    if eval_labels.dataset == train_labels.dataset {
        return Err(Error::usage(
            "harmonization mode given for a same-dataset evaluation",
        ));
    }
    if probes.is_empty() {
        return Err(Error::protocol("cross-evaluation without probes"));
    }

    let features: Vec<Result<Vec<Tensor<f32>>>> = eval_manifest
        .records
        .par_iter()
        .map(|rec| encode_video_clips(encoder, eval_manifest, rec, settings))
        .collect();
    let features: Result<Vec<Vec<Tensor<f32>>>> = features.into_iter().collect();
    let features = features?;

    let mut per_probe = Vec::with_capacity(probes.len());
    for probe in probes {
        let mut h = HarmonizedEval::new();
        for (rec, clips) in eval_manifest.records.iter().zip(&features) {
            let clip_probs: Result<Vec<Vec<f32>>> =
                clips.iter().map(|f| probe.probabilities(f)).collect();
            let pred = vote(voting, &clip_probs?)?;
            h.add_video(train_labels, &eval_labels, mode, &rec.label, &pred)?;
        }
        if h.evaluated + h.dropped != eval_manifest.records.len() {
            return Err(Error::protocol(
                "harmonization lost track of a video (evaluated + dropped != total)",
            ));
        }
        per_probe.push(h);
    }
    Ok(CrossEvalOutcome {
        per_probe,
        total_videos: eval_manifest.records.len(),
    })
}

/// Pooled per-clip embeddings for PCA export: one row per evaluated clip,
/// labeled with its video's class.
pub fn pooled_clip_embeddings(
    encoder: &VideoEncoder<f32>,
    probe: &AttentiveProbe<f32>,
    manifest: &Manifest,
    records: &[&VideoRecord],
    pooling: Pooling,
    settings: &EvalSettings,
) -> Result<(Vec<Vec<f32>>, Vec<String>)> {
    let mut embeddings = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        for features in encode_video_clips(encoder, manifest, rec, settings)? {
            let pooled = match pooling {
                Pooling::Attentive => probe.attentive_pool(&features)?,
                Pooling::Average => probe.average_pool(&features)?,
            };
            embeddings.push(pooled.detach().to_vec());
            labels.push(rec.label.clone());
        }
    }
    Ok((embeddings, labels))
}
