//! Pre-norm transformer blocks, the encoder, and the narrower predictor.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub(crate) const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

/// Creates parameter leaves in a fixed order from one seeded stream.
/// Frozen models are built with `trainable = false`, so nothing downstream
/// of them is ever recorded on a tape.
pub(crate) struct ParamInit<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub trainable: bool,
}

impl ParamInit<'_> {
    pub fn normal<E: Element>(&mut self, shape: &[usize], std: f64) -> Tensor<E> {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0f64, std).expect("std >= 0");
        let vals: Vec<E> = (0..n)
            .map(|_| E::from_f64(dist.sample(self.rng)))
            .collect();
        self.leaf(shape, vals)
    }

    pub fn constant<E: Element>(&mut self, shape: &[usize], v: f64) -> Tensor<E> {
        let n: usize = shape.iter().product();
        self.leaf(shape, vec![E::from_f64(v); n])
    }

    fn leaf<E: Element>(&self, shape: &[usize], vals: Vec<E>) -> Tensor<E> {
        if self.trainable {
            Tensor::param(shape, vals).expect("shape/value agreement")
        } else {
            Tensor::new(shape, vals).expect("shape/value agreement")
        }
    }

}

pub(crate) type NamedParams<E> = Vec<(String, Tensor<E>)>;

#[derive(Debug, Clone)]
pub struct Linear<E: Element> {
    pub weight: Tensor<E>, // in x out
    pub bias: Tensor<E>,   // out
}

impl<E: Element> Linear<E> {
    pub(crate) fn new(inp: usize, out: usize, init: &mut ParamInit<'_>) -> Self {
        Linear {
            weight: init.normal(&[inp, out], INIT_STD),
            bias: init.constant(&[out], 0.0),
        }
    }

    /// Fan-in-scaled initialization for layers outside residual streams,
    /// where the usual 0.02 init would shrink activations layer by layer.
    pub(crate) fn with_std(inp: usize, out: usize, std: f64, init: &mut ParamInit<'_>) -> Self {
        Linear {
            weight: init.normal(&[inp, out], std),
            bias: init.constant(&[out], 0.0),
        }
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        let n = x.shape()[0];
        x.matmul(&self.weight)?.add(&self.bias.broadcast_rows(n)?)
    }

    fn collect(&self, prefix: &str, out: &mut NamedParams<E>) {
        out.push((format!("{prefix}weight"), self.weight.clone()));
        out.push((format!("{prefix}bias"), self.bias.clone()));
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm<E: Element> {
    pub gain: Tensor<E>,
    pub bias: Tensor<E>,
}

impl<E: Element> LayerNorm<E> {
    pub(crate) fn new(dim: usize, init: &mut ParamInit<'_>) -> Self {
        LayerNorm {
            gain: init.constant(&[dim], 1.0),
            bias: init.constant(&[dim], 0.0),
        }
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        x.layer_norm(&self.gain, &self.bias, LN_EPS)
    }

    fn collect(&self, prefix: &str, out: &mut NamedParams<E>) {
        out.push((format!("{prefix}gain"), self.gain.clone()));
        out.push((format!("{prefix}bias"), self.bias.clone()));
    }
}

/// Multi-head self-attention over a full token sequence.
#[derive(Debug, Clone)]
pub struct Attention<E: Element> {
    pub wq: Linear<E>,
    pub wk: Linear<E>,
    pub wv: Linear<E>,
    pub wo: Linear<E>,
    pub heads: usize,
}

impl<E: Element> Attention<E> {
    pub(crate) fn new(dim: usize, heads: usize, init: &mut ParamInit<'_>) -> Result<Self> {
        if dim % heads != 0 {
            return Err(Error::config(format!("dim {dim} not divisible by {heads} heads")));
        }
        Ok(Attention {
            wq: Linear::new(dim, dim, init),
            wk: Linear::new(dim, dim, init),
            wv: Linear::new(dim, dim, init),
            wo: Linear::new(dim, dim, init),
            heads,
        })
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        let q = self.wq.forward(x)?;
        let k = self.wk.forward(x)?;
        let v = self.wv.forward(x)?;
        let d = q.shape()[1];
        let dh = d / self.heads;
        let scale = E::from_f64(1.0 / (dh as f64).sqrt());
        let mut head_outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = q.slice_cols(lo, hi)?;
            let kh = k.slice_cols(lo, hi)?;
            let vh = v.slice_cols(lo, hi)?;
            let scores = qh.matmul_nt(&kh)?.scale(scale);
            let attn = scores.softmax(1)?;
            head_outs.push(attn.matmul(&vh)?);
        }
        let refs: Vec<&Tensor<E>> = head_outs.iter().collect();
        self.wo.forward(&Tensor::concat_cols(&refs)?)
    }

    fn collect(&self, prefix: &str, out: &mut NamedParams<E>) {
        self.wq.collect(&format!("{prefix}wq."), out);
        self.wk.collect(&format!("{prefix}wk."), out);
        self.wv.collect(&format!("{prefix}wv."), out);
        self.wo.collect(&format!("{prefix}wo."), out);
    }
}

/// One pre-norm block: x + attn(ln(x)), then x + mlp(ln(x)).
#[derive(Debug, Clone)]
pub struct Block<E: Element> {
    pub ln1: LayerNorm<E>,
    pub attn: Attention<E>,
    pub ln2: LayerNorm<E>,
    pub fc1: Linear<E>,
    pub fc2: Linear<E>,
}

impl<E: Element> Block<E> {
    pub(crate) fn new(dim: usize, heads: usize, mlp_ratio: usize, init: &mut ParamInit<'_>) -> Result<Self> {
        Ok(Block {
            ln1: LayerNorm::new(dim, init),
            attn: Attention::new(dim, heads, init)?,
            ln2: LayerNorm::new(dim, init),
            fc1: Linear::new(dim, dim * mlp_ratio, init),
            fc2: Linear::new(dim * mlp_ratio, dim, init),
        })
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<Tensor<E>> {
        let x = x.add(&self.attn.forward(&self.ln1.forward(x)?)?)?;
        let mlp = self.fc2.forward(&self.fc1.forward(&self.ln2.forward(&x)?)?.gelu())?;
        x.add(&mlp)
    }

    fn collect(&self, prefix: &str, out: &mut NamedParams<E>) {
        self.ln1.collect(&format!("{prefix}ln1."), out);
        self.attn.collect(&format!("{prefix}attn."), out);
        self.ln2.collect(&format!("{prefix}ln2."), out);
        self.fc1.collect(&format!("{prefix}mlp.fc1."), out);
        self.fc2.collect(&format!("{prefix}mlp.fc2."), out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

/// A plain stack of blocks. Depth 0 is the identity, which keeps the
/// masked/visible selection logic independently testable.
#[derive(Debug, Clone)]
pub struct Encoder<E: Element> {
    pub cfg: EncoderConfig,
    pub blocks: Vec<Block<E>>,
}

impl<E: Element> Encoder<E> {
    pub(crate) fn new(cfg: EncoderConfig, init: &mut ParamInit<'_>) -> Result<Self> {
        let blocks = (0..cfg.depth)
            .map(|_| Block::new(cfg.embed_dim, cfg.heads, cfg.mlp_ratio, init))
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoder { cfg, blocks })
    }

    /// Run attention over the full sequence, or over `visible` rows only
    /// (dropped, not zeroed: the sequence really shrinks).
    pub fn encode(&self, tokens: &Tensor<E>, visible: Option<&[usize]>) -> Result<Tensor<E>> {
        let mut x = match visible {
            Some(idx) => {
                if idx.is_empty() {
                    return Err(Error::protocol("encode with an empty visible set"));
                }
                tokens.gather_rows(idx)?
            }
            None => tokens.clone(),
        };
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        Ok(x)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut NamedParams<E>) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&format!("{prefix}block{i}."), out);
        }
    }

    pub fn named_params(&self, prefix: &str) -> NamedParams<E> {
        let mut out = Vec::new();
        self.collect_params(prefix, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorConfig {
    pub encoder_dim: usize,
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

/// Narrow transformer that maps visible-token embeddings plus positioned
/// mask tokens to predicted embeddings at the masked positions.
#[derive(Debug, Clone)]
pub struct Predictor<E: Element> {
    pub cfg: PredictorConfig,
    pub in_proj: Linear<E>,
    pub blocks: Vec<Block<E>>,
    pub out_proj: Linear<E>,
    pub mask_token: Tensor<E>, // 1 x dim; the learnable conditioning token
}

impl<E: Element> Predictor<E> {
    pub(crate) fn new(cfg: PredictorConfig, init: &mut ParamInit<'_>) -> Result<Self> {
        if cfg.dim % cfg.heads != 0 {
            return Err(Error::config(format!(
                "predictor dim {} not divisible by {} heads",
                cfg.dim, cfg.heads
            )));
        }
        Ok(Predictor {
            cfg,
            in_proj: Linear::new(cfg.encoder_dim, cfg.dim, init),
            blocks: (0..cfg.depth)
                .map(|_| Block::new(cfg.dim, cfg.heads, cfg.mlp_ratio, init))
                .collect::<Result<Vec<_>>>()?,
            out_proj: Linear::new(cfg.dim, cfg.encoder_dim, init),
            mask_token: init.normal(&[1, cfg.dim], INIT_STD),
        })
    }

    /// `context` rows sit at `context_positions`; predictions are returned
    /// for `masked_positions` in the order given (canonical (t, h, w)).
    /// `pos_table` is the predictor-dim sinusoidal table for the full grid.
    pub fn predict(
        &self,
        context: &Tensor<E>,
        context_positions: &[usize],
        masked_positions: &[usize],
        pos_table: &Tensor<E>,
    ) -> Result<Tensor<E>> {
        if masked_positions.is_empty() {
            return Err(Error::protocol("predict with zero masked positions"));
        }
        if context.shape()[0] != context_positions.len() {
            return Err(Error::Dimension {
                op: "predict",
                lhs: context.shape().to_vec(),
                rhs: vec![context_positions.len()],
            });
        }
        let overlap: Vec<usize> = masked_positions
            .iter()
            .filter(|m| context_positions.contains(m))
            .copied()
            .collect();
        if !overlap.is_empty() {
            return Err(Error::protocol(format!(
                "masked positions overlap context positions: {overlap:?}"
            )));
        }
        let m = masked_positions.len();
        let ctx = self
            .in_proj
            .forward(context)?
            .add(&pos_table.gather_rows(context_positions)?)?;
        let mask_block = self
            .mask_token
            .broadcast_rows(m)?
            .add(&pos_table.gather_rows(masked_positions)?)?;
        let mut x = Tensor::concat_rows(&[&ctx, &mask_block])?;
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        let n = x.shape()[0];
        let masked_rows: Vec<usize> = (n - m..n).collect();
        self.out_proj.forward(&x.gather_rows(&masked_rows)?)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut NamedParams<E>) {
        self.in_proj.collect(&format!("{prefix}in_proj."), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&format!("{prefix}block{i}."), out);
        }
        self.out_proj.collect(&format!("{prefix}out_proj."), out);
        out.push((format!("{prefix}mask_token"), self.mask_token.clone()));
    }
}
