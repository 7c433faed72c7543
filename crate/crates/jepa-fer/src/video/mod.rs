//! Video storage, manifests, clip protocol, augmentation, synthetic data,
//! and subject-independent cross-validation folds.

mod augment;
mod clips;
mod folds;
mod manifest;
mod rvt;
mod synth;

pub use augment::{extract_and_transform, AugmentConfig, FloatClip};
pub use clips::{enumerate_clips, sample_training_clips, ClipSpec, CLIP_LENGTH, CLIP_SKIP, CLIP_SPAN};
pub use folds::{make_folds, verify_folds, FoldPlan, FoldReport, FoldSource};
pub use manifest::{DatasetTag, Manifest, VideoRecord};
pub use rvt::{load_video, store_video};
pub use synth::{gen_synthetic, SynthConfig};

use crate::error::{Error, Result};

/// Raw T×H×W×3 video, 8-bit, frame-major row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
    /// Informational only; the clip protocol works in frame indices.
    pub frame_rate: f32,
}

impl VideoTensor {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::config("video dimensions must all be >= 1"));
        }
        if data.len() != frames * height * width * channels {
            return Err(Error::Dimension {
                op: "video",
                lhs: vec![frames, height, width, channels],
                rhs: vec![data.len()],
            });
        }
        Ok(VideoTensor {
            frames,
            height,
            width,
            channels,
            data,
            frame_rate: 24.0,
        })
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let fs = self.height * self.width * self.channels;
        &self.data[t * fs..(t + 1) * fs]
    }

    pub fn pixel(&self, t: usize, y: usize, x: usize, c: usize) -> u8 {
        self.data[((t * self.height + y) * self.width + x) * self.channels + c]
    }
}

/// Repeat the last frame until the video holds at least `min_frames`.
/// Existing frames are never altered.
pub fn pad_video(v: &VideoTensor, min_frames: usize) -> VideoTensor {
    if v.frames >= min_frames {
        return v.clone();
    }
    let fs = v.height * v.width * v.channels;
    let last = v.frame(v.frames - 1).to_vec();
    let mut data = v.data.clone();
    data.reserve((min_frames - v.frames) * fs);
    for _ in v.frames..min_frames {
        data.extend_from_slice(&last);
    }
    VideoTensor {
        frames: min_frames,
        data,
        ..v.clone()
    }
}
