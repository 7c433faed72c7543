//! Clip extraction and spatial augmentation.
//!
//! Training uses a random square crop (area fraction drawn from
//! `crop_scale_range`, one crop shared by all frames of the clip) followed
//! by bilinear resize; evaluation center-crops the largest square. Pixels
//! are normalized per channel as `(x/255 - mean) / std`.

use super::{ClipSpec, VideoTensor};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Output (height, width).
    pub target_size: (usize, usize),
    /// Area-fraction range for the training crop.
    pub crop_scale_range: (f64, f64),
    pub channel_mean: [f32; 3],
    pub channel_std: [f32; 3],
    pub train_mode: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            target_size: (224, 224),
            crop_scale_range: (0.3, 1.0),
            channel_mean: [0.485, 0.456, 0.406],
            channel_std: [0.229, 0.224, 0.225],
            train_mode: false,
        }
    }
}

impl AugmentConfig {
    /// Desk-scale variant used by the toy pipeline.
    pub fn toy() -> Self {
        AugmentConfig {
            target_size: (64, 64),
            ..Default::default()
        }
    }

    pub fn train(mut self) -> Self {
        self.train_mode = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.crop_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!(
                "crop_scale_range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        if self.target_size.0 == 0 || self.target_size.1 == 0 {
            return Err(Error::config("target_size components must be >= 1"));
        }
        if self.channel_std.iter().any(|&s| s <= 0.0) {
            return Err(Error::config("channel_std components must be > 0"));
        }
        Ok(())
    }
}

/// A normalized float clip: length×H×W×3, frame-major row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatClip {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FloatClip {
    pub fn at(&self, t: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[((t * self.height + y) * self.width + x) * 3 + c]
    }
}

/// Gather frames `start, start+skip, ...` (clamped into the video, which is
/// exactly the last-frame padding rule), crop, resize, and normalize.
pub fn extract_and_transform<R: Rng>(
    v: &VideoTensor,
    spec: &ClipSpec,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<FloatClip> {
    cfg.validate()?;
    if v.channels != 3 {
        return Err(Error::config(format!("expected 3-channel video, got {}", v.channels)));
    }
    let padded = v.frames.max(spec.span());
    if spec.start_frame + spec.span() > padded {
        return Err(Error::protocol(format!(
            "clip start {} with span {} exceeds padded duration {}",
            spec.start_frame,
            spec.span(),
            padded
        )));
    }

    let (h, w) = (v.height, v.width);
    let min_side = h.min(w);
    let (top, left, side) = if cfg.train_mode {
        let (lo, hi) = cfg.crop_scale_range;
        let area = (h * w) as f64;
        if (lo * area).sqrt() > min_side as f64 + 1e-9 {
            return Err(Error::config(format!(
                "crop larger than frame: scale {lo} needs a square side {:.1} on {h}x{w} frames",
                (lo * area).sqrt()
            )));
        }
        let u = rng.gen_range(lo..=hi);
        let side = ((u * area).sqrt().round() as usize).clamp(1, min_side);
        let top = rng.gen_range(0..=h - side);
        let left = rng.gen_range(0..=w - side);
        (top, left, side)
    } else {
        // center crop of the largest square
        ((h - min_side) / 2, (w - min_side) / 2, min_side)
    };

    let (th, tw) = cfg.target_size;
    let mut data = vec![0.0f32; spec.length * th * tw * 3];
    let sy_scale = side as f32 / th as f32;
    let sx_scale = side as f32 / tw as f32;

    for j in 0..spec.length {
        let src_t = spec.frame_index(j).min(v.frames - 1);
        let frame = v.frame(src_t);
        let out = &mut data[j * th * tw * 3..(j + 1) * th * tw * 3];
        for oy in 0..th {
            let sy = ((oy as f32 + 0.5) * sy_scale - 0.5).clamp(0.0, (side - 1) as f32);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(side - 1);
            let fy = sy - y0 as f32;
            for ox in 0..tw {
                let sx = ((ox as f32 + 0.5) * sx_scale - 0.5).clamp(0.0, (side - 1) as f32);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(side - 1);
                let fx = sx - x0 as f32;
                let at = |yy: usize, xx: usize, c: usize| {
                    frame[((top + yy) * w + (left + xx)) * 3 + c] as f32
                };
                for c in 0..3 {
                    let top_row = at(y0, x0, c) * (1.0 - fx) + at(y0, x1, c) * fx;
                    let bot_row = at(y1, x0, c) * (1.0 - fx) + at(y1, x1, c) * fx;
                    let p = top_row * (1.0 - fy) + bot_row * fy;
                    out[(oy * tw + ox) * 3 + c] =
                        (p / 255.0 - cfg.channel_mean[c]) / cfg.channel_std[c];
                }
            }
        }
    }
    Ok(FloatClip {
        frames: spec.length,
        height: th,
        width: tw,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::pad_video;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn const_video(frames: usize, h: usize, w: usize, v: u8) -> VideoTensor {
        VideoTensor::new(frames, h, w, 3, vec![v; frames * h * w * 3]).unwrap()
    }

    #[test]
    fn constant_video_forced_arithmetic() {
        let v = const_video(61, 16, 16, 128);
        let cfg = AugmentConfig {
            target_size: (8, 8),
            channel_mean: [0.5; 3],
            channel_std: [0.25; 3],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clip = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
        let expected: f32 = (128.0 / 255.0 - 0.5) / 0.25;
        assert!((expected - 0.007_843_2).abs() < 1e-5);
        for &x in &clip.data {
            assert!((x - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<u8> = (0..61 * 12 * 20 * 3).map(|i| (i % 251) as u8).collect();
        let v = VideoTensor::new(61, 12, 20, 3, data).unwrap();
        let cfg = AugmentConfig {
            target_size: (8, 8),
            ..Default::default()
        };
        let a = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
        let b = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extracted_frames_follow_skip_rule() {
        // frame t filled with t; identity-size eval transform keeps values
        let h = 8;
        let data: Vec<u8> = (0..100u8).flat_map(|t| vec![t; h * h * 3]).collect();
        let v = VideoTensor::new(100, h, h, 3, data).unwrap();
        let cfg = AugmentConfig {
            target_size: (h, h),
            channel_mean: [0.0; 3],
            channel_std: [1.0; 3],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = 17;
        let clip = extract_and_transform(&v, &ClipSpec::new(start), &cfg, &mut rng).unwrap();
        for j in 0..16 {
            let want = (start + 4 * j) as f32 / 255.0;
            assert!((clip.at(j, 3, 5, 1) - want).abs() < 1e-6, "frame {j}");
        }
    }

    #[test]
    fn index_clamp_equals_explicit_padding() {
        let data: Vec<u8> = (0..30u8).flat_map(|t| vec![t.wrapping_mul(7); 6 * 6 * 3]).collect();
        let v = VideoTensor::new(30, 6, 6, 3, data).unwrap();
        let padded = pad_video(&v, 61);
        let cfg = AugmentConfig {
            target_size: (6, 6),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
        let b = extract_and_transform(&padded, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_crops_stay_in_bounds_across_seeded_draws() {
        let v = const_video(61, 24, 17, 9);
        let cfg = AugmentConfig {
            target_size: (8, 8),
            crop_scale_range: (0.3, 1.0),
            ..Default::default()
        }
        .train();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            // any out-of-bounds crop would panic on slice indexing
            let clip = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap();
            assert!(clip.data.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn infeasible_min_scale_is_config_error() {
        // 4x64 frames: even the smallest allowed area cannot fit a square
        let v = const_video(61, 4, 64, 0);
        let cfg = AugmentConfig {
            target_size: (4, 4),
            crop_scale_range: (0.9, 1.0),
            ..Default::default()
        }
        .train();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = extract_and_transform(&v, &ClipSpec::new(0), &cfg, &mut rng).unwrap_err();
        assert!(err.to_string().contains("crop larger than frame"));
    }
}
