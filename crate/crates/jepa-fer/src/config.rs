//! Flat key-value run configuration.
//!
//! Every knob of every subcommand lives in one flat TOML table; unknown
//! keys are rejected. Each run writes its fully-resolved configuration
//! next to its outputs, so re-running from that file reproduces the run
//! byte for byte.

use crate::error::{Error, Result};
use crate::jepa::PretrainConfig;
use crate::probe::ProbeTrainConfig;
use crate::video::{AugmentConfig, DatasetTag, FoldSource, SynthConfig};
use crate::vit::{ArchConfig, TubeletConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Dataset tag for generation and label-set selection.
    pub dataset: String,

    // model dimensions
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub predictor_dim: usize,
    pub predictor_depth: usize,
    pub predictor_heads: usize,
    pub patch_t: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub clip_frames: usize,
    pub frame_h: usize,
    pub frame_w: usize,

    // augmentation
    pub crop_scale_min: f64,
    pub crop_scale_max: f64,
    pub norm_mean: [f32; 3],
    pub norm_std: [f32; 3],
    pub eval_clip_stride: usize,

    // synthetic data
    pub synth_classes: usize,
    pub synth_subjects: usize,
    pub synth_videos_per: usize,
    pub synth_min_frames: usize,
    pub synth_max_frames: usize,

    // folds
    pub folds: usize,
    pub fold_source: String,
    pub fold_seed: u64,

    // pre-training
    pub pretrain_steps: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
    pub pretrain_schedule: String,
    pub pretrain_weight_decay: f64,
    pub pretrain_warmup_frac: f64,
    pub mask_ratio: f64,
    pub mask_block_h: usize,
    pub mask_block_w: usize,
    pub ema_start: f64,
    pub ema_end: f64,

    // probe training
    pub probe_epochs: usize,
    pub probe_clips_per_video: usize,
    pub probe_lr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: "SYNTH".into(),
            embed_dim: 128,
            depth: 4,
            heads: 4,
            mlp_ratio: 4,
            predictor_dim: 64,
            predictor_depth: 2,
            predictor_heads: 4,
            patch_t: 2,
            patch_h: 16,
            patch_w: 16,
            clip_frames: 16,
            frame_h: 64,
            frame_w: 64,
            crop_scale_min: 0.3,
            crop_scale_max: 1.0,
            norm_mean: [0.485, 0.456, 0.406],
            norm_std: [0.229, 0.224, 0.225],
            eval_clip_stride: 1,
            synth_classes: 3,
            synth_subjects: 10,
            synth_videos_per: 2,
            synth_min_frames: 50,
            synth_max_frames: 90,
            folds: 5,
            fold_source: "generated".into(),
            fold_seed: 0,
            pretrain_steps: 200,
            pretrain_batch: 2,
            pretrain_lr: 1e-4,
            pretrain_schedule: "cosine".into(),
            pretrain_weight_decay: 0.01,
            pretrain_warmup_frac: 0.05,
            mask_ratio: 0.75,
            mask_block_h: 1,
            mask_block_w: 1,
            ema_start: 0.998,
            ema_end: 1.0,
            probe_epochs: 20,
            probe_clips_per_video: 8,
            probe_lr: 1e-3,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let body =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&body)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Write the fully-resolved configuration (atomic).
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = toml::to_string(self)
            .map_err(|e| Error::config(format!("config serialization: {e}")))?;
        let tmp = path.with_extension("toml.tmp");
        std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn dataset_tag(&self) -> Result<DatasetTag> {
        DatasetTag::parse(&self.dataset)
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            clip_frames: self.clip_frames,
            frame_h: self.frame_h,
            frame_w: self.frame_w,
            tubelet: TubeletConfig {
                patch_t: self.patch_t,
                patch_h: self.patch_h,
                patch_w: self.patch_w,
                embed_dim: self.embed_dim,
            },
            depth: self.depth,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
            predictor_dim: self.predictor_dim,
            predictor_depth: self.predictor_depth,
            predictor_heads: self.predictor_heads,
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            target_size: (self.frame_h, self.frame_w),
            crop_scale_range: (self.crop_scale_min, self.crop_scale_max),
            channel_mean: self.norm_mean,
            channel_std: self.norm_std,
            train_mode: false,
        }
    }

    pub fn synth(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            classes: self.synth_classes,
            subjects: self.synth_subjects,
            videos_per_subject_per_class: self.synth_videos_per,
            duration_range: (self.synth_min_frames, self.synth_max_frames),
            size: (self.frame_h, self.frame_w),
            seed: self.seed,
            dataset_tag: self.dataset_tag()?,
        })
    }

    pub fn fold_source(&self) -> Result<FoldSource> {
        match self.fold_source.as_str() {
            "table" => Ok(FoldSource::Table),
            "generated" => Ok(FoldSource::Generated { seed: self.fold_seed }),
            other => Err(Error::config(format!(
                "fold_source must be 'table' or 'generated', got '{other}'"
            ))),
        }
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            steps: self.pretrain_steps,
            batch_size: self.pretrain_batch,
            lr: self.pretrain_lr,
            schedule: if self.pretrain_schedule == "constant" {
                crate::jepa::LrSchedule::Constant
            } else {
                crate::jepa::LrSchedule::Cosine
            },
            weight_decay: self.pretrain_weight_decay,
            warmup_frac: self.pretrain_warmup_frac,
            mask_ratio: self.mask_ratio,
            mask_block: (self.mask_block_h, self.mask_block_w),
            ema_start: self.ema_start,
            ema_end: self.ema_end,
            seed: self.seed,
        }
    }

    pub fn probe(&self) -> ProbeTrainConfig {
        ProbeTrainConfig {
            epochs: self.probe_epochs,
            clips_per_video: self.probe_clips_per_video,
            lr: self.probe_lr,
            seed: self.seed,
        }
    }
}
