//! Attentive probing: a single learnable query pools token embeddings via
//! cross-attention, and a depth-3 MLP classifies the pooled vector.

mod train;

pub use train::{train_probe, ProbeTrainConfig, ProbeTrainOutcome, TrainHistory};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use crate::vit::{Linear, NamedParams, ParamInit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How token embeddings are reduced to one vector before the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Cross-attention against the learnable query (the default head).
    Attentive,
    /// Global average pooling baseline.
    Average,
}

#[derive(Debug, Clone)]
pub struct AttentiveProbe<E: Element> {
    /// The single learnable query token, 1 x dim.
    pub query: Tensor<E>,
    pub wk: Linear<E>,
    pub wv: Linear<E>,
    pub wo: Linear<E>,
    pub heads: usize,
    /// Exactly three affine layers with GELU between them.
    pub mlp: [Linear<E>; 3],
    pub n_classes: usize,
}

impl<E: Element> AttentiveProbe<E> {
    pub fn new(dim: usize, heads: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if dim % heads != 0 {
            return Err(Error::config(format!("dim {dim} not divisible by {heads} heads")));
        }
        if n_classes < 2 {
            return Err(Error::config("probe needs at least 2 classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = ParamInit { rng: &mut rng, trainable: true };
        // the probe has no residual stream or norms, so weights are
        // fan-in scaled to keep activations at the input's magnitude
        let attn_std = (1.0 / dim as f64).sqrt();
        let mlp_std = (2.0 / dim as f64).sqrt();
        // a near-zero query starts with uniform attention and cannot break
        // the pooled-mean symmetry within the training budget; unit-scale
        // scores make the initial attention patterns structured enough for
        // the classifier to see spatially selective features from step one
        let query = init.normal(&[1, dim], 2.0);
        let wk = Linear::with_std(dim, dim, attn_std, &mut init);
        let wv = Linear::with_std(dim, dim, attn_std, &mut init);
        let wo = Linear::with_std(dim, dim, attn_std, &mut init);
        let fc1 = Linear::with_std(dim, dim, mlp_std, &mut init);
        let fc2 = Linear::with_std(dim, dim, mlp_std, &mut init);
        // zero-initialized final layer: uniform class probabilities at start
        let mut fc3 = Linear::new(dim, n_classes, &mut init);
        fc3.weight = init.constant(&[dim, n_classes], 0.0);
        fc3.bias = init.constant(&[n_classes], 0.0);
        Ok(AttentiveProbe {
            query,
            wk,
            wv,
            wo,
            heads,
            mlp: [fc1, fc2, fc3],
            n_classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.query.shape()[1]
    }

    /// Cross-attention of the query over all N tokens; 1 x dim out.
    pub fn attentive_pool(&self, tokens: &Tensor<E>) -> Result<Tensor<E>> {
        let n = match tokens.shape() {
            [n, d] if *d == self.dim() => *n,
            other => {
                return Err(Error::Dimension {
                    op: "attentive_pool",
                    lhs: other.to_vec(),
                    rhs: vec![0, self.dim()],
                })
            }
        };
        if n == 0 {
            return Err(Error::protocol("attentive_pool over zero tokens"));
        }
        let k = self.wk.forward(tokens)?;
        let v = self.wv.forward(tokens)?;
        let d = self.dim();
        let dh = d / self.heads;
        let scale = E::from_f64(1.0 / (dh as f64).sqrt());
        let mut heads_out = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = self.query.slice_cols(lo, hi)?;
            let kh = k.slice_cols(lo, hi)?;
            let vh = v.slice_cols(lo, hi)?;
            let scores = qh.matmul_nt(&kh)?.scale(scale); // 1 x N
            let attn = scores.softmax(1)?;
            heads_out.push(attn.matmul(&vh)?);
        }
        let refs: Vec<&Tensor<E>> = heads_out.iter().collect();
        self.wo.forward(&Tensor::concat_cols(&refs)?)
    }

    /// Mean of the token embeddings; the linear-pooling baseline.
    pub fn average_pool(&self, tokens: &Tensor<E>) -> Result<Tensor<E>> {
        let n = tokens.shape()[0];
        if n == 0 {
            return Err(Error::protocol("average_pool over zero tokens"));
        }
        let ones = Tensor::new(&[1, n], vec![E::from_f64(1.0 / n as f64); n])?;
        ones.matmul(tokens)
    }

    fn mlp_forward(&self, pooled: &Tensor<E>) -> Result<Tensor<E>> {
        let h1 = self.mlp[0].forward(pooled)?.gelu();
        let h2 = self.mlp[1].forward(&h1)?.gelu();
        self.mlp[2].forward(&h2)
    }

    /// Logits over the label set, shaped 1 x K.
    pub fn classify(&self, encoder_output: &Tensor<E>) -> Result<Tensor<E>> {
        self.classify_pooled(encoder_output, Pooling::Attentive)
    }

    pub fn classify_pooled(&self, encoder_output: &Tensor<E>, pooling: Pooling) -> Result<Tensor<E>> {
        let pooled = match pooling {
            Pooling::Attentive => self.attentive_pool(encoder_output)?,
            Pooling::Average => self.average_pool(encoder_output)?,
        };
        self.mlp_forward(&pooled)
    }

    /// Softmax class probabilities as plain numbers (for voting).
    pub fn probabilities(&self, encoder_output: &Tensor<E>) -> Result<Vec<f32>> {
        let logits = self.classify(encoder_output)?;
        let probs = logits.softmax(1)?;
        let out = probs.values().iter().map(|&v| Element::into_f32(v)).collect();
        Ok(out)
    }

    pub fn named_params(&self) -> NamedParams<E> {
        let mut out = vec![("probe.query".to_string(), self.query.clone())];
        for (name, lin) in [("wk", &self.wk), ("wv", &self.wv), ("wo", &self.wo)] {
            out.push((format!("probe.{name}.weight"), lin.weight.clone()));
            out.push((format!("probe.{name}.bias"), lin.bias.clone()));
        }
        for (i, lin) in self.mlp.iter().enumerate() {
            out.push((format!("probe.mlp.fc{}.weight", i + 1), lin.weight.clone()));
            out.push((format!("probe.mlp.fc{}.bias", i + 1), lin.bias.clone()));
        }
        out
    }

    pub fn params(&self) -> Vec<Tensor<E>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        for (name, t) in self.named_params() {
            ck.push(name, &t);
        }
        ck
    }

    pub fn from_checkpoint(dim: usize, heads: usize, n_classes: usize, ck: &Checkpoint) -> Result<Self> {
        let probe = Self::new(dim, heads, n_classes, 0)?;
        for (name, t) in probe.named_params() {
            ck.load_into(&name, &t)?;
        }
        Ok(probe)
    }

    pub fn digest(&self) -> u64 {
        self.to_checkpoint().digest()
    }
}
