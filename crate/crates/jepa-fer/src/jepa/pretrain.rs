//! The pre-training loop: sample clips, mask tubes, predict latents,
//! step the optimizer, track the EMA target.

use super::{ema_update, jepa_loss, EmaSchedule, JepaModel};
use crate::error::{Error, Result};
use crate::tensor::{backward, clear_grads, AdamW, AdamWConfig};
use crate::video::{
    extract_and_transform, load_video, sample_training_clips, AugmentConfig, ClipSpec, Manifest,
    VideoTensor,
};
use crate::vit::gen_tube_mask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;

/// Learning-rate shape after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the peak rate to zero over the remaining steps.
    Cosine,
}

#[derive(Debug, Clone)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub weight_decay: f64,
    /// Fraction of steps spent on linear learning-rate warmup.
    pub warmup_frac: f64,
    pub mask_ratio: f64,
    pub mask_block: (usize, usize),
    pub ema_start: f64,
    pub ema_end: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 200,
            batch_size: 2,
            lr: 1e-4,
            schedule: LrSchedule::Cosine,
            weight_decay: 0.01,
            warmup_frac: 0.05,
            mask_ratio: 0.75,
            mask_block: (1, 1),
            ema_start: 0.998,
            ema_end: 1.0,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("pretraining needs at least 1 step"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return Err(Error::config("warmup fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-step numbers kept for the loss log and the smoke assertions.
#[derive(Debug, Clone)]
pub struct PretrainStats {
    pub losses: Vec<f64>,
    pub momenta: Vec<f64>,
}

impl PretrainStats {
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.losses[range];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// Run pre-training over the manifest's videos. Writes `loss_log.csv`
/// (step, loss, momentum), the full `checkpoint.vjfc`, and the frozen
/// `encoder.vjfc` into `out_dir` when given.
pub fn pretrain_run(
    model: &JepaModel<f32>,
    manifest: &Manifest,
    aug: &AugmentConfig,
    cfg: &PretrainConfig,
    out_dir: Option<&Path>,
) -> Result<PretrainStats> {
    cfg.validate()?;
    if manifest.records.is_empty() {
        return Err(Error::protocol("pretraining over an empty manifest"));
    }
    let aug = AugmentConfig {
        train_mode: true,
        ..aug.clone()
    };
    let schedule = EmaSchedule::new(cfg.ema_start, cfg.ema_end, cfg.steps)?;
    let params = model.trainable_params();
    let mut opt = AdamW::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        &params,
    );
    let online = model.online_params();
    let target = model.target_params();

    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xDA7A));
    let mut mask_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x3A5C));
    let warmup = ((cfg.steps as f64 * cfg.warmup_frac).ceil() as usize).max(1);
    let (_, gh, gw) = model.grid;

    let mut cache: BTreeMap<String, VideoTensor> = BTreeMap::new();
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut momenta = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let mut batch_loss: Option<crate::tensor::Tensor<f32>> = None;
        let mut witness = 0.0;
        for _ in 0..cfg.batch_size {
            let rec = &manifest.records[data_rng.gen_range(0..manifest.records.len())];
            if !cache.contains_key(&rec.id) {
                let v = load_video(&manifest.video_path(rec))?;
                if v.frames != rec.duration_frames {
                    return Err(Error::protocol(format!(
                        "record '{}' declares {} frames but the file holds {}",
                        rec.id, rec.duration_frames, v.frames
                    )));
                }
                cache.insert(rec.id.clone(), v);
            }
            let video = &cache[&rec.id];
            let start = sample_training_clips(video.frames, 1, 16, 4, &mut data_rng)?[0];
            let clip = extract_and_transform(video, &ClipSpec::new(start), &aug, &mut data_rng)?;
            let mask = gen_tube_mask((gh, gw), cfg.mask_ratio, cfg.mask_block, &mut mask_rng)?;
            let out = jepa_loss(model, &clip, &mask)?;
            witness = out.context_variance;
            batch_loss = Some(match batch_loss {
                None => out.loss,
                Some(acc) => acc.add(&out.loss)?,
            });
        }
        let loss = batch_loss
            .expect("batch_size >= 1")
            .scale(1.0 / cfg.batch_size as f32);
        let loss_val = loss.item() as f64;
        if !loss_val.is_finite() {
            let lr = lr_at(cfg, warmup, step);
            return Err(Error::Numeric(format!(
                "non-finite loss {loss_val} at step {step} (lr {lr:e})"
            )));
        }

        backward(&loss)?;
        opt.step(&params, Some(lr_at(cfg, warmup, step)))?;
        clear_grads(&params);

        let m = schedule.momentum(step);
        ema_update(&target, &online, m)?;

        if step % 20 == 0 {
            log::info!("step {step}: loss {loss_val:.5}, momentum {m:.5}, context variance {witness:.3e}");
        }
        losses.push(loss_val);
        momenta.push(m);
    }

    let stats = PretrainStats { losses, momenta };
    if let Some(dir) = out_dir {
        write_loss_log(&stats, &dir.join("loss_log.csv"))?;
        model.to_checkpoint().save(&dir.join("checkpoint.vjfc"))?;
        model.export_encoder()?.to_checkpoint().save(&dir.join("encoder.vjfc"))?;
    }
    Ok(stats)
}

fn lr_at(cfg: &PretrainConfig, warmup: usize, step: usize) -> f64 {
    if step < warmup {
        return cfg.lr * (step + 1) as f64 / warmup as f64;
    }
    match cfg.schedule {
        LrSchedule::Constant => cfg.lr,
        LrSchedule::Cosine => {
            let span = (cfg.steps - warmup).max(1) as f64;
            let frac = (step - warmup) as f64 / span;
            cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
        }
    }
}

fn write_loss_log(stats: &PretrainStats, path: &Path) -> Result<()> {
    let mut body = String::from("step,loss,momentum\n");
    for (i, (l, m)) in stats.losses.iter().zip(&stats.momenta).enumerate() {
        body.push_str(&format!("{i},{l},{m}\n"));
    }
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{gen_synthetic, SynthConfig};
    use crate::vit::ArchConfig;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            frame_h: 32,
            frame_w: 32,
            depth: 1,
            heads: 2,
            mlp_ratio: 2,
            predictor_dim: 8,
            predictor_depth: 1,
            predictor_heads: 2,
            tubelet: crate::vit::TubeletConfig {
                embed_dim: 16,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn tiny_dataset(dir: &Path) -> Manifest {
        gen_synthetic(
            &SynthConfig {
                subjects: 5,
                videos_per_subject_per_class: 1,
                size: (32, 32),
                duration_range: (61, 70),
                seed: 1,
                ..Default::default()
            },
            dir,
        )
        .unwrap()
    }

    #[test]
    fn short_run_writes_artifacts_and_schedules_momentum() {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(data.path());
        let model = JepaModel::<f32>::new(&tiny_arch(), 0).unwrap();
        let cfg = PretrainConfig {
            steps: 5,
            batch_size: 1,
            ..Default::default()
        };
        let aug = AugmentConfig {
            target_size: (32, 32),
            ..Default::default()
        };
        let stats = pretrain_run(&model, &manifest, &aug, &cfg, Some(out.path())).unwrap();
        assert_eq!(stats.losses.len(), 5);
        assert_eq!(stats.momenta[0], 0.998);
        assert_eq!(*stats.momenta.last().unwrap(), 1.0);
        assert!(out.path().join("loss_log.csv").exists());
        assert!(out.path().join("checkpoint.vjfc").exists());
        assert!(out.path().join("encoder.vjfc").exists());
        let log = std::fs::read_to_string(out.path().join("loss_log.csv")).unwrap();
        assert!(log.starts_with("step,loss,momentum\n"));
        assert_eq!(log.lines().count(), 6);
    }

    #[test]
    fn checkpoint_roundtrip_gives_identical_next_loss() {
        let data = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(data.path());
        let arch = tiny_arch();
        let model = JepaModel::<f32>::new(&arch, 0).unwrap();
        let cfg = PretrainConfig {
            steps: 3,
            batch_size: 1,
            ..Default::default()
        };
        let aug = AugmentConfig {
            target_size: (32, 32),
            ..Default::default()
        };
        pretrain_run(&model, &manifest, &aug, &cfg, None).unwrap();

        let ck = model.to_checkpoint();
        let loaded = JepaModel::<f32>::from_checkpoint(&arch, &ck, 99).unwrap();

        let next_loss = |m: &JepaModel<f32>| {
            let rec = &manifest.records[0];
            let video = load_video(&manifest.video_path(rec)).unwrap();
            let clip = extract_and_transform(
                &video,
                &ClipSpec::new(0),
                &AugmentConfig {
                    target_size: (32, 32),
                    ..Default::default()
                },
                &mut ChaCha8Rng::seed_from_u64(8),
            )
            .unwrap();
            let mask = gen_tube_mask((2, 2), 0.5, (1, 1), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            jepa_loss(m, &clip, &mask).unwrap().loss.item()
        };
        assert_eq!(next_loss(&model), next_loss(&loaded));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let data = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(data.path());
        let arch = tiny_arch();
        let cfg = PretrainConfig {
            steps: 4,
            batch_size: 1,
            seed: 5,
            ..Default::default()
        };
        let aug = AugmentConfig {
            target_size: (32, 32),
            ..Default::default()
        };
        let run = || {
            let model = JepaModel::<f32>::new(&arch, 1).unwrap();
            pretrain_run(&model, &manifest, &aug, &cfg, None).unwrap().losses
        };
        assert_eq!(run(), run());
    }
}
