//! Tubelet tokenization, sinusoidal positions, tube masking, and the
//! transformer encoder/predictor pair.

mod mask;
mod posembed;
mod transformer;

pub use mask::{gen_tube_mask, TubeMask};
pub use posembed::posembed_3d;
pub use transformer::{
    Attention, Block, Encoder, EncoderConfig, LayerNorm, Linear, Predictor, PredictorConfig,
};
pub(crate) use transformer::{NamedParams, ParamInit};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use crate::video::FloatClip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spatiotemporal patch geometry. Each non-overlapping
/// patch_t × patch_h × patch_w × 3 block becomes one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TubeletConfig {
    pub patch_t: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub embed_dim: usize,
}

impl Default for TubeletConfig {
    fn default() -> Self {
        TubeletConfig {
            patch_t: 2,
            patch_h: 16,
            patch_w: 16,
            embed_dim: 128,
        }
    }
}

impl TubeletConfig {
    pub fn input_dim(&self) -> usize {
        self.patch_t * self.patch_h * self.patch_w * 3
    }

    pub fn grid_for(&self, frames: usize, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        if frames % self.patch_t != 0 || height % self.patch_h != 0 || width % self.patch_w != 0 {
            return Err(Error::config(format!(
                "clip {frames}x{height}x{width} not divisible by tubelet {}x{}x{}",
                self.patch_t, self.patch_h, self.patch_w
            )));
        }
        Ok((frames / self.patch_t, height / self.patch_h, width / self.patch_w))
    }
}

/// Tokens plus the (T', H', W') grid they came from.
#[derive(Debug, Clone)]
pub struct TokenGrid<E: Element> {
    pub tokens: Tensor<E>,
    pub grid: (usize, usize, usize),
}

impl<E: Element> TokenGrid<E> {
    pub fn count(&self) -> usize {
        self.grid.0 * self.grid.1 * self.grid.2
    }
}

/// Linear projection of flattened tubelet blocks.
#[derive(Debug, Clone)]
pub struct TubeletEmbed<E: Element> {
    pub cfg: TubeletConfig,
    pub proj: Linear<E>,
}

impl<E: Element> TubeletEmbed<E> {
    pub(crate) fn new(cfg: TubeletConfig, init: &mut ParamInit<'_>) -> Self {
        let proj = Linear::new(cfg.input_dim(), cfg.embed_dim, init);
        TubeletEmbed { cfg, proj }
    }

    /// Flatten each block in (dt, y, x, c) order and project. Token order
    /// is (t, h, w) row-major.
    pub fn forward(&self, clip: &FloatClip) -> Result<TokenGrid<E>> {
        let grid = self.cfg.grid_for(clip.frames, clip.height, clip.width)?;
        let (gt, gh, gw) = grid;
        let n = gt * gh * gw;
        let in_dim = self.cfg.input_dim();
        let mut x = Vec::with_capacity(n * in_dim);
        for bt in 0..gt {
            for bh in 0..gh {
                for bw in 0..gw {
                    for dt in 0..self.cfg.patch_t {
                        let t = bt * self.cfg.patch_t + dt;
                        for dy in 0..self.cfg.patch_h {
                            let y = bh * self.cfg.patch_h + dy;
                            for dx in 0..self.cfg.patch_w {
                                let xx = bw * self.cfg.patch_w + dx;
                                let at = ((t * clip.height + y) * clip.width + xx) * 3;
                                x.push(E::from_f32(clip.data[at]));
                                x.push(E::from_f32(clip.data[at + 1]));
                                x.push(E::from_f32(clip.data[at + 2]));
                            }
                        }
                    }
                }
            }
        }
        let blocks = Tensor::new(&[n, in_dim], x)?;
        Ok(TokenGrid {
            tokens: self.proj.forward(&blocks)?,
            grid,
        })
    }

    pub fn collect_params(&self, prefix: &str, out: &mut NamedParams<E>) {
        out.push((format!("{prefix}weight"), self.proj.weight.clone()));
        out.push((format!("{prefix}bias"), self.proj.bias.clone()));
    }
}

/// Every dimension of the model in one place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchConfig {
    pub clip_frames: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub tubelet: TubeletConfig,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub predictor_dim: usize,
    pub predictor_depth: usize,
    pub predictor_heads: usize,
}

impl Default for ArchConfig {
    /// The desk-scale reference: 64x64 frames, an 8x4x4 = 128-token grid,
    /// dim 128, depth 4 encoder over a depth 2 predictor of half width.
    fn default() -> Self {
        ArchConfig {
            clip_frames: 16,
            frame_h: 64,
            frame_w: 64,
            tubelet: TubeletConfig::default(),
            depth: 4,
            heads: 4,
            mlp_ratio: 4,
            predictor_dim: 64,
            predictor_depth: 2,
            predictor_heads: 4,
        }
    }
}

impl ArchConfig {
    pub fn grid(&self) -> Result<(usize, usize, usize)> {
        self.tubelet.grid_for(self.clip_frames, self.frame_h, self.frame_w)
    }

    pub fn token_count(&self) -> Result<usize> {
        let (t, h, w) = self.grid()?;
        Ok(t * h * w)
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.tubelet.embed_dim,
            depth: self.depth,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
        }
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        PredictorConfig {
            encoder_dim: self.tubelet.embed_dim,
            dim: self.predictor_dim,
            depth: self.predictor_depth,
            heads: self.predictor_heads,
            mlp_ratio: self.mlp_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.tubelet.embed_dim % self.heads != 0 {
            return Err(Error::config("embed_dim must be divisible by heads"));
        }
        if self.predictor_dim % self.predictor_heads != 0 {
            return Err(Error::config("predictor_dim must be divisible by predictor_heads"));
        }
        Ok(())
    }
}

/// Tubelet embedding, position table, and encoder bundled as the frozen
/// feature extractor used by probes and evaluation.
#[derive(Debug, Clone)]
pub struct VideoEncoder<E: Element> {
    pub arch: ArchConfig,
    pub embed: TubeletEmbed<E>,
    pub pos: Tensor<E>,
    pub encoder: Encoder<E>,
    pub grid: (usize, usize, usize),
}

impl<E: Element> VideoEncoder<E> {
    /// Randomly initialized bundle; `trainable` decides whether parameters
    /// participate in autodiff.
    pub fn random(arch: &ArchConfig, seed: u64, trainable: bool) -> Result<Self> {
        arch.validate()?;
        let grid = arch.grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = ParamInit { rng: &mut rng, trainable };
        let embed = TubeletEmbed::new(arch.tubelet, &mut init);
        let encoder = Encoder::new(arch.encoder_config(), &mut init)?;
        let pos = posembed_3d(grid, arch.tubelet.embed_dim);
        Ok(VideoEncoder {
            arch: *arch,
            embed,
            pos,
            encoder,
            grid,
        })
    }

    /// Positioned tokens for a clip: embed(clip) + sinusoidal positions.
    pub fn positioned_tokens(&self, clip: &FloatClip) -> Result<Tensor<E>> {
        let grid = self.embed.cfg.grid_for(clip.frames, clip.height, clip.width)?;
        if grid != self.grid {
            return Err(Error::config(format!(
                "clip grid {grid:?} does not match model grid {:?}",
                self.grid
            )));
        }
        self.embed.forward(clip)?.tokens.add(&self.pos)
    }

    /// Full-sequence encoding of one clip: (token count) x embed_dim.
    pub fn encode_clip(&self, clip: &FloatClip) -> Result<Tensor<E>> {
        let tokens = self.positioned_tokens(clip)?;
        self.encoder.encode(&tokens, None)
    }

    pub fn named_params(&self) -> NamedParams<E> {
        let mut out = Vec::new();
        self.embed.collect_params("embed.", &mut out);
        self.encoder.collect_params("encoder.", &mut out);
        out
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        for (name, t) in self.named_params() {
            ck.push(name, &t);
        }
        ck
    }

    /// Load a frozen bundle (no parameter requires a gradient).
    pub fn from_checkpoint(arch: &ArchConfig, ck: &Checkpoint) -> Result<Self> {
        let enc = Self::random(arch, 0, false)?;
        for (name, t) in enc.named_params() {
            ck.load_into(&name, &t)?;
        }
        Ok(enc)
    }

    /// FNV digest of the serialized weights; probes assert this does not
    /// change across their training.
    pub fn digest(&self) -> u64 {
        self.to_checkpoint().digest()
    }
}
