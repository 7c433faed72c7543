//! Probe training on a frozen encoder.
//!
//! Per epoch, per training video: draw 8 random clips, run the frozen
//! encoder (nothing is recorded for it), stack the probe's per-clip logits
//! and take one optimizer step on the mean cross-entropy with the video's
//! label. The encoder's weights are digest-checked before and after.

use super::AttentiveProbe;
use crate::error::{Error, Result};
use crate::eval::{vote_pbv, ConfusionMatrix, LabelSet};
use crate::tensor::{backward, clear_grads, AdamW, AdamWConfig, Tensor};
use crate::video::{
    extract_and_transform, load_video, sample_training_clips, AugmentConfig, ClipSpec, FoldPlan,
    Manifest,
};
use crate::vit::VideoEncoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ProbeTrainConfig {
    pub epochs: usize,
    pub clips_per_video: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        ProbeTrainConfig {
            epochs: 20,
            clips_per_video: 8,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Per-epoch training numbers (epoch, mean_loss, train_war).
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub rows: Vec<(usize, f64, f64)>,
}

impl TrainHistory {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = String::from("epoch,mean_loss,train_war\n");
        for (e, l, w) in &self.rows {
            body.push_str(&format!("{e},{l},{w}\n"));
        }
        let tmp = path.with_extension("csv.tmp");
        std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn final_train_war(&self) -> Option<f64> {
        self.rows.last().map(|(_, _, w)| *w)
    }
}

pub struct ProbeTrainOutcome {
    pub probe: AttentiveProbe<f32>,
    pub history: TrainHistory,
    pub encoder_digest: u64,
}

fn derive_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// Train one probe for validation fold `fold_index`: the fold's subjects
/// are held out, everything else trains.
pub fn train_probe(
    encoder: &VideoEncoder<f32>,
    manifest: &Manifest,
    labels: &LabelSet,
    plan: &FoldPlan,
    fold_index: usize,
    aug: &AugmentConfig,
    cfg: &ProbeTrainConfig,
) -> Result<ProbeTrainOutcome> {
    if cfg.epochs == 0 {
        return Err(Error::config("probe training needs at least 1 epoch"));
    }
    let held_out = plan.validation_subjects(fold_index)?;
    let train_records: Vec<usize> = manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| !held_out.contains(r.subject_id.as_str()))
        .map(|(i, _)| i)
        .collect();
    if train_records.is_empty() {
        return Err(Error::protocol(format!(
            "fold {fold_index} leaves no training videos"
        )));
    }

    let digest_before = encoder.digest();
    let encoder_params = encoder.named_params();
    let aug = AugmentConfig {
        train_mode: true,
        ..aug.clone()
    };
    let dim = encoder.arch.tubelet.embed_dim;
    let probe = AttentiveProbe::<f32>::new(
        dim,
        encoder.arch.heads,
        labels.len(),
        derive_seed(cfg.seed, fold_index),
    )?;
    let params = probe.params();
    let mut opt = AdamW::new(
        AdamWConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        &params,
    );
    opt.no_decay(&[0]); // the query token

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed.wrapping_add(0x50BE), fold_index));
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let mut order = train_records.clone();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut cm = ConfusionMatrix::new(labels.names().to_vec());
        for &ri in &order {
            let rec = &manifest.records[ri];
            let label_idx = labels.index_of(&rec.label).ok_or_else(|| {
                Error::protocol(format!(
                    "video '{}' label '{}' outside the probe's label set",
                    rec.id, rec.label
                ))
            })?;
            let video = load_video(&manifest.video_path(rec))?;
            let starts =
                sample_training_clips(video.frames, cfg.clips_per_video, 16, 4, &mut rng)?;
            let mut logit_rows = Vec::with_capacity(starts.len());
            let mut clip_probs = Vec::with_capacity(starts.len());
            for start in starts {
                let clip = extract_and_transform(&video, &ClipSpec::new(start), &aug, &mut rng)?;
                // frozen forward: requires_grad is off for every encoder
                // parameter, so no graph exists to backpropagate through
                let features = encoder.encode_clip(&clip)?;
                debug_assert!(!features.on_tape());
                let logits = probe.classify(&features)?;
                clip_probs.push(
                    logits
                        .softmax(1)?
                        .detach()
                        .to_vec(),
                );
                logit_rows.push(logits);
            }
            let refs: Vec<&Tensor<f32>> = logit_rows.iter().collect();
            let batch = Tensor::concat_rows(&refs)?;
            let loss = batch.cross_entropy_batch(&vec![label_idx; refs.len()])?;
            loss_sum += loss.item() as f64;
            backward(&loss)?;
            opt.step(&params, None)?;
            clear_grads(&params);

            // the frozen contract, asserted every step
            for (name, p) in &encoder_params {
                if p.grad().is_some() {
                    return Err(Error::protocol(format!(
                        "frozen encoder parameter '{name}' accumulated a gradient"
                    )));
                }
            }

            let voted = vote_pbv(&clip_probs)?;
            cm.add(label_idx, voted.class);
        }
        let war = crate::eval::war(&cm)?;
        history
            .rows
            .push((epoch, loss_sum / order.len() as f64, war));
        log::info!(
            "fold {fold_index} epoch {epoch}: loss {:.4}, train war {war:.3}",
            loss_sum / order.len() as f64
        );
    }

    let digest_after = encoder.digest();
    if digest_before != digest_after {
        return Err(Error::protocol(
            "encoder weights changed during probe training",
        ));
    }
    Ok(ProbeTrainOutcome {
        probe,
        history,
        encoder_digest: digest_after,
    })
}
