//! Differentiable primitive operations.
//!
//! Shapes are checked eagerly; there is no implicit broadcasting. The only
//! expansion primitive is [`Tensor::broadcast_rows`], whose backward sums
//! over the expanded axis. All reductions accumulate in a fixed sequential
//! order over the row-major index, so results are bit-identical from run
//! to run regardless of worker-thread count.

use super::{BackwardCtx, Element, Tensor};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Below this many multiply-adds a kernel stays single-threaded.
const PAR_FLOPS: usize = 1 << 17;

pub(crate) fn mm<E: Element>(a: &[E], b: &[E], m: usize, k: usize, n: usize) -> Vec<E> {
    let mut c = vec![E::zero(); m * n];
    let row = |i: usize, crow: &mut [E]| {
        let arow = &a[i * k..(i + 1) * k];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + aik * bv;
            }
        }
    };
    if m * n * k >= PAR_FLOPS && rayon::current_num_threads() > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        for (i, crow) in c.chunks_mut(n).enumerate() {
            row(i, crow);
        }
    }
    c
}

/// `x^T · y` where `x` is m×n and `y` is m×k; result n×k.
pub(crate) fn mm_tn<E: Element>(x: &[E], y: &[E], m: usize, n: usize, k: usize) -> Vec<E> {
    let mut c = vec![E::zero(); n * k];
    let row = |i: usize, crow: &mut [E]| {
        for r in 0..m {
            let xv = x[r * n + i];
            let yrow = &y[r * k..(r + 1) * k];
            for (cv, &yv) in crow.iter_mut().zip(yrow) {
                *cv = *cv + xv * yv;
            }
        }
    };
    if m * n * k >= PAR_FLOPS && rayon::current_num_threads() > 1 {
        c.par_chunks_mut(k).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        for (i, crow) in c.chunks_mut(k).enumerate() {
            row(i, crow);
        }
    }
    c
}

pub(crate) fn transpose<E: Element>(x: &[E], rows: usize, cols: usize) -> Vec<E> {
    let mut out = vec![E::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

fn check_rank2<E: Element>(t: &Tensor<E>, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Dimension {
            op,
            lhs: other.to_vec(),
            rhs: vec![],
        }),
    }
}

fn same_shape<E: Element>(a: &Tensor<E>, b: &Tensor<E>, op: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

impl<E: Element> Tensor<E> {
    pub fn add(&self, rhs: &Tensor<E>) -> Result<Tensor<E>> {
        same_shape(self, rhs, "add")?;
        let out = {
            let (a, b) = (self.values(), rhs.values());
            a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "add",
            vec![self.clone(), rhs.clone()],
            Box::new(|ctx: &BackwardCtx<'_, E>| {
                ctx.parents[0].accumulate_grad(ctx.grad);
                ctx.parents[1].accumulate_grad(ctx.grad);
            }),
        ))
    }

    pub fn sub(&self, rhs: &Tensor<E>) -> Result<Tensor<E>> {
        same_shape(self, rhs, "sub")?;
        let out = {
            let (a, b) = (self.values(), rhs.values());
            a.iter().zip(b.iter()).map(|(&x, &y)| x - y).collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "sub",
            vec![self.clone(), rhs.clone()],
            Box::new(|ctx: &BackwardCtx<'_, E>| {
                ctx.parents[0].accumulate_grad(ctx.grad);
                let neg: Vec<E> = ctx.grad.iter().map(|&g| -g).collect();
                ctx.parents[1].accumulate_grad(&neg);
            }),
        ))
    }

    pub fn mul(&self, rhs: &Tensor<E>) -> Result<Tensor<E>> {
        same_shape(self, rhs, "mul")?;
        let out = {
            let (a, b) = (self.values(), rhs.values());
            a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "mul",
            vec![self.clone(), rhs.clone()],
            Box::new(|ctx: &BackwardCtx<'_, E>| {
                let (a, b) = (ctx.parents[0].values(), ctx.parents[1].values());
                let da: Vec<E> = ctx.grad.iter().zip(b.iter()).map(|(&g, &y)| g * y).collect();
                let db: Vec<E> = ctx.grad.iter().zip(a.iter()).map(|(&g, &x)| g * x).collect();
                drop((a, b));
                ctx.parents[0].accumulate_grad(&da);
                ctx.parents[1].accumulate_grad(&db);
            }),
        ))
    }

    /// Multiply every element by a compile-time constant.
    pub fn scale(&self, c: E) -> Tensor<E> {
        let out = self.values().iter().map(|&x| x * c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            "scale",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let dx: Vec<E> = ctx.grad.iter().map(|&g| g * c).collect();
                ctx.parents[0].accumulate_grad(&dx);
            }),
        )
    }

    /// GELU activation (tanh approximation).
    pub fn gelu(&self) -> Tensor<E> {
        let k = E::from_f64(GELU_K);
        let c = E::from_f64(GELU_C);
        let half = E::from_f64(0.5);
        let out = self
            .values()
            .iter()
            .map(|&x| {
                let u = k * (x + c * x * x * x);
                half * x * (E::one() + u.tanh())
            })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            "gelu",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let three = E::from_f64(3.0);
                let x = ctx.parents[0].values();
                let dx: Vec<E> = ctx
                    .grad
                    .iter()
                    .zip(x.iter())
                    .map(|(&g, &x)| {
                        let u = k * (x + c * x * x * x);
                        let t = u.tanh();
                        let sech2 = E::one() - t * t;
                        let du = k * (E::one() + three * c * x * x);
                        g * (half * (E::one() + t) + half * x * sech2 * du)
                    })
                    .collect();
                drop(x);
                ctx.parents[0].accumulate_grad(&dx);
            }),
        )
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&self) -> Tensor<E> {
        let total = self.values().iter().fold(E::zero(), |acc, &x| acc + x);
        let n = self.numel();
        Tensor::from_op(
            vec![],
            vec![total],
            "sum",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let dx = vec![ctx.grad[0]; n];
                ctx.parents[0].accumulate_grad(&dx);
            }),
        )
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&self) -> Tensor<E> {
        let n = self.numel();
        let inv = E::from_f64(1.0 / n as f64);
        let total = self.values().iter().fold(E::zero(), |acc, &x| acc + x);
        Tensor::from_op(
            vec![],
            vec![total * inv],
            "mean",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let dx = vec![ctx.grad[0] * inv; n];
                ctx.parents[0].accumulate_grad(&dx);
            }),
        )
    }

    /// Numerically stable softmax along `axis` (max-subtracted).
    pub fn softmax(&self, axis: usize) -> Result<Tensor<E>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len().max(1) || shape.is_empty() {
            return Err(Error::Dimension {
                op: "softmax",
                lhs: shape,
                rhs: vec![axis],
            });
        }
        let len = shape[axis];
        let pre: usize = shape[..axis].iter().product();
        let post: usize = shape[axis + 1..].iter().product();
        let x = self.values();
        let mut out = vec![E::zero(); x.len()];
        for o in 0..pre {
            for i in 0..post {
                let at = |j: usize| (o * len + j) * post + i;
                let mut mx = x[at(0)];
                for j in 1..len {
                    if x[at(j)] > mx {
                        mx = x[at(j)];
                    }
                }
                let mut denom = E::zero();
                for j in 0..len {
                    let e = (x[at(j)] - mx).exp();
                    out[at(j)] = e;
                    denom = denom + e;
                }
                for j in 0..len {
                    out[at(j)] = out[at(j)] / denom;
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            shape,
            out,
            "softmax",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                // dx = y * (g - sum(g * y)) per lane
                let y = ctx.out;
                let g = ctx.grad;
                let mut dx = vec![E::zero(); y.len()];
                for o in 0..pre {
                    for i in 0..post {
                        let at = |j: usize| (o * len + j) * post + i;
                        let mut dot = E::zero();
                        for j in 0..len {
                            dot = dot + g[at(j)] * y[at(j)];
                        }
                        for j in 0..len {
                            dx[at(j)] = y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Normalize the last axis to zero mean / unit variance (eps-stabilized),
    /// then apply the per-feature affine `gain`/`bias`.
    pub fn layer_norm(&self, gain: &Tensor<E>, bias: &Tensor<E>, eps: f64) -> Result<Tensor<E>> {
        if eps <= 0.0 {
            return Err(Error::config(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let shape = self.shape().to_vec();
        let d = *shape.last().ok_or(Error::Dimension {
            op: "layer_norm",
            lhs: shape.clone(),
            rhs: vec![],
        })?;
        if gain.shape() != [d] || bias.shape() != [d] {
            return Err(Error::Dimension {
                op: "layer_norm",
                lhs: gain.shape().to_vec(),
                rhs: vec![d],
            });
        }
        let lanes = self.numel() / d;
        let eps = E::from_f64(eps);
        let inv_d = E::from_f64(1.0 / d as f64);
        let x = self.values();
        let gv = gain.values();
        let bv = bias.values();
        let mut out = vec![E::zero(); x.len()];
        let mut xhat = vec![E::zero(); x.len()];
        let mut inv_std = vec![E::zero(); lanes];
        for l in 0..lanes {
            let row = &x[l * d..(l + 1) * d];
            let mean = row.iter().fold(E::zero(), |a, &v| a + v) * inv_d;
            let var = row
                .iter()
                .fold(E::zero(), |a, &v| a + (v - mean) * (v - mean))
                * inv_d;
            let r = (var + eps).sqrt().recip();
            inv_std[l] = r;
            for j in 0..d {
                let h = (row[j] - mean) * r;
                xhat[l * d + j] = h;
                out[l * d + j] = h * gv[j] + bv[j];
            }
        }
        drop((x, gv, bv));
        Ok(Tensor::from_op(
            shape,
            out,
            "layer_norm",
            vec![self.clone(), gain.clone(), bias.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let g = ctx.grad;
                let gainv = ctx.parents[1].values();
                let mut dx = vec![E::zero(); g.len()];
                let mut dgain = vec![E::zero(); d];
                let mut dbias = vec![E::zero(); d];
                for l in 0..lanes {
                    let r = inv_std[l];
                    let h = &xhat[l * d..(l + 1) * d];
                    let gl = &g[l * d..(l + 1) * d];
                    let mut sum_dh = E::zero();
                    let mut sum_dh_h = E::zero();
                    for j in 0..d {
                        let dh = gl[j] * gainv[j];
                        sum_dh = sum_dh + dh;
                        sum_dh_h = sum_dh_h + dh * h[j];
                        dgain[j] = dgain[j] + gl[j] * h[j];
                        dbias[j] = dbias[j] + gl[j];
                    }
                    let m1 = sum_dh * inv_d;
                    let m2 = sum_dh_h * inv_d;
                    for j in 0..d {
                        let dh = gl[j] * gainv[j];
                        dx[l * d + j] = r * (dh - m1 - h[j] * m2);
                    }
                }
                drop(gainv);
                ctx.parents[0].accumulate_grad(&dx);
                ctx.parents[1].accumulate_grad(&dgain);
                ctx.parents[2].accumulate_grad(&dbias);
            }),
        ))
    }

    /// Mean absolute difference over mask-selected elements. The target is
    /// treated as a constant: no gradient flows into it.
    pub fn l1_loss(&self, target: &Tensor<E>, mask: &[bool]) -> Result<Tensor<E>> {
        same_shape(self, target, "l1_loss")?;
        if mask.len() != self.numel() {
            return Err(Error::Dimension {
                op: "l1_loss",
                lhs: self.shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::protocol("l1_loss mask selects no elements"));
        }
        let tgt = target.to_vec();
        let msk = mask.to_vec();
        let inv = E::from_f64(1.0 / count as f64);
        let total = {
            let p = self.values();
            let mut acc = E::zero();
            for i in 0..p.len() {
                if msk[i] {
                    acc = acc + (p[i] - tgt[i]).abs();
                }
            }
            acc * inv
        };
        Ok(Tensor::from_op(
            vec![],
            vec![total],
            "l1_loss",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let p = ctx.parents[0].values();
                let g = ctx.grad[0] * inv;
                let dx: Vec<E> = (0..p.len())
                    .map(|i| {
                        if !msk[i] {
                            return E::zero();
                        }
                        let diff = p[i] - tgt[i];
                        if diff > E::zero() {
                            g
                        } else if diff < E::zero() {
                            -g
                        } else {
                            E::zero()
                        }
                    })
                    .collect();
                drop(p);
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Negative log softmax probability of `label` for a rank-1 logit vector.
    pub fn cross_entropy(&self, label: usize) -> Result<Tensor<E>> {
        match self.shape() {
            [k] => {
                let row = self.reshape(&[1, *k])?;
                row.cross_entropy_batch(&[label])
            }
            other => Err(Error::Dimension {
                op: "cross_entropy",
                lhs: other.to_vec(),
                rhs: vec![],
            }),
        }
    }

    /// Mean cross-entropy over rows of an N×K logit matrix.
    pub fn cross_entropy_batch(&self, labels: &[usize]) -> Result<Tensor<E>> {
        let (n, k) = check_rank2(self, "cross_entropy_batch")?;
        if labels.len() != n {
            return Err(Error::Dimension {
                op: "cross_entropy_batch",
                lhs: vec![n, k],
                rhs: vec![labels.len()],
            });
        }
        for &l in labels {
            if l >= k {
                return Err(Error::Index(format!("label {l} out of range for {k} classes")));
            }
        }
        let inv_n = E::from_f64(1.0 / n as f64);
        let total = {
            let x = self.values();
            let mut acc = E::zero();
            for (r, &label) in labels.iter().enumerate() {
                let row = &x[r * k..(r + 1) * k];
                let mx = row.iter().fold(row[0], |a, &v| if v > a { v } else { a });
                let lse = row
                    .iter()
                    .fold(E::zero(), |a, &v| a + (v - mx).exp())
                    .ln()
                    + mx;
                acc = acc + lse - row[label];
            }
            acc * inv_n
        };
        let labels = labels.to_vec();
        Ok(Tensor::from_op(
            vec![],
            vec![total],
            "cross_entropy",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                // d logits = (softmax - one_hot) * g / n, per row
                let x = ctx.parents[0].values();
                let g = ctx.grad[0] * inv_n;
                let mut dx = vec![E::zero(); x.len()];
                for (r, &label) in labels.iter().enumerate() {
                    let row = &x[r * k..(r + 1) * k];
                    let mx = row.iter().fold(row[0], |a, &v| if v > a { v } else { a });
                    let mut denom = E::zero();
                    for j in 0..k {
                        let e = (row[j] - mx).exp();
                        dx[r * k + j] = e;
                        denom = denom + e;
                    }
                    for j in 0..k {
                        let p = dx[r * k + j] / denom;
                        let delta = if j == label { E::one() } else { E::zero() };
                        dx[r * k + j] = (p - delta) * g;
                    }
                }
                drop(x);
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Standard matrix product of an m×k and a k×n tensor.
    pub fn matmul(&self, rhs: &Tensor<E>) -> Result<Tensor<E>> {
        let (m, k) = check_rank2(self, "matmul")?;
        let (k2, n) = check_rank2(rhs, "matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let out = mm(&self.values(), &rhs.values(), m, k, n);
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            "matmul",
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                // dA = G · B^T, dB = A^T · G
                if ctx.parents[0].requires_grad() {
                    let b = ctx.parents[1].values();
                    let bt = transpose(&b, k, n);
                    let da = mm(ctx.grad, &bt, m, n, k);
                    drop(b);
                    ctx.parents[0].accumulate_grad(&da);
                }
                if ctx.parents[1].requires_grad() {
                    let a = ctx.parents[0].values();
                    let db = mm_tn(&a, ctx.grad, m, k, n);
                    drop(a);
                    ctx.parents[1].accumulate_grad(&db);
                }
            }),
        ))
    }

    /// `self · rhs^T` for an m×k and an n×k tensor; result m×n.
    pub fn matmul_nt(&self, rhs: &Tensor<E>) -> Result<Tensor<E>> {
        let (m, k) = check_rank2(self, "matmul_nt")?;
        let (n, k2) = check_rank2(rhs, "matmul_nt")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul_nt",
                lhs: vec![m, k],
                rhs: vec![n, k2],
            });
        }
        let out = {
            let bt = transpose(&rhs.values(), n, k);
            mm(&self.values(), &bt, m, k, n)
        };
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            "matmul_nt",
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                // C = A · B^T  =>  dA = G · B, dB = G^T · A
                if ctx.parents[0].requires_grad() {
                    let b = ctx.parents[1].values();
                    let da = mm(ctx.grad, &b, m, n, k);
                    drop(b);
                    ctx.parents[0].accumulate_grad(&da);
                }
                if ctx.parents[1].requires_grad() {
                    let a = ctx.parents[0].values();
                    let db = mm_tn(ctx.grad, &a, m, n, k);
                    drop(a);
                    ctx.parents[1].accumulate_grad(&db);
                }
            }),
        ))
    }

    /// Select rows of an N×D tensor by index; backward scatter-adds.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor<E>> {
        let (n, d) = check_rank2(self, "gather_rows")?;
        for &i in idx {
            if i >= n {
                return Err(Error::Index(format!("row {i} out of range for {n} rows")));
            }
        }
        let x = self.values();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(&x[i * d..(i + 1) * d]);
        }
        drop(x);
        let idx = idx.to_vec();
        let m = idx.len();
        Ok(Tensor::from_op(
            vec![m, d],
            out,
            "gather_rows",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let mut dx = vec![E::zero(); n * d];
                for (r, &i) in idx.iter().enumerate() {
                    let src = &ctx.grad[r * d..(r + 1) * d];
                    let dst = &mut dx[i * d..(i + 1) * d];
                    for (a, &b) in dst.iter_mut().zip(src) {
                        *a = *a + b;
                    }
                }
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Stack rank-2 tensors along axis 0. All parts must share the column count.
    pub fn concat_rows(parts: &[&Tensor<E>]) -> Result<Tensor<E>> {
        if parts.is_empty() {
            return Err(Error::protocol("concat_rows of zero tensors"));
        }
        let (_, d) = check_rank2(parts[0], "concat_rows")?;
        let mut rows = 0usize;
        let mut sizes = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, dc) = check_rank2(p, "concat_rows")?;
            if dc != d {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    lhs: vec![r, dc],
                    rhs: vec![rows, d],
                });
            }
            rows += r;
            sizes.push(r);
        }
        let mut out = Vec::with_capacity(rows * d);
        for p in parts {
            out.extend_from_slice(&p.values());
        }
        Ok(Tensor::from_op(
            vec![rows, d],
            out,
            "concat_rows",
            parts.iter().map(|p| (*p).clone()).collect(),
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let mut offset = 0;
                for (p, &r) in ctx.parents.iter().zip(&sizes) {
                    p.accumulate_grad(&ctx.grad[offset..offset + r * d]);
                    offset += r * d;
                }
            }),
        ))
    }

    /// Columns `lo..hi` of an N×D tensor.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> Result<Tensor<E>> {
        let (n, d) = check_rank2(self, "slice_cols")?;
        if lo >= hi || hi > d {
            return Err(Error::Index(format!(
                "column slice {lo}..{hi} out of range for {d} columns"
            )));
        }
        let w = hi - lo;
        let x = self.values();
        let mut out = Vec::with_capacity(n * w);
        for r in 0..n {
            out.extend_from_slice(&x[r * d + lo..r * d + hi]);
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, w],
            out,
            "slice_cols",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let mut dx = vec![E::zero(); n * d];
                for r in 0..n {
                    dx[r * d + lo..r * d + hi].copy_from_slice(&ctx.grad[r * w..(r + 1) * w]);
                }
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Concatenate rank-2 tensors along axis 1. All parts share the row count.
    pub fn concat_cols(parts: &[&Tensor<E>]) -> Result<Tensor<E>> {
        if parts.is_empty() {
            return Err(Error::protocol("concat_cols of zero tensors"));
        }
        let (n, _) = check_rank2(parts[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut d = 0usize;
        for p in parts {
            let (r, w) = check_rank2(p, "concat_cols")?;
            if r != n {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    lhs: vec![r, w],
                    rhs: vec![n, d],
                });
            }
            widths.push(w);
            d += w;
        }
        let mut out = vec![E::zero(); n * d];
        let mut offset = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            let x = p.values();
            for r in 0..n {
                out[r * d + offset..r * d + offset + w].copy_from_slice(&x[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        Ok(Tensor::from_op(
            vec![n, d],
            out,
            "concat_cols",
            parts.iter().map(|p| (*p).clone()).collect(),
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let mut offset = 0;
                for (p, &w) in ctx.parents.iter().zip(&widths) {
                    let mut dp = vec![E::zero(); n * w];
                    for r in 0..n {
                        dp[r * w..(r + 1) * w]
                            .copy_from_slice(&ctx.grad[r * d + offset..r * d + offset + w]);
                    }
                    p.accumulate_grad(&dp);
                    offset += w;
                }
            }),
        ))
    }

    /// Explicitly expand a length-D vector (or 1×D matrix) to n×D rows.
    /// Backward sums the gradient over the expanded rows.
    pub fn broadcast_rows(&self, n: usize) -> Result<Tensor<E>> {
        let d = match self.shape() {
            [d] => *d,
            [1, d] => *d,
            other => {
                return Err(Error::Dimension {
                    op: "broadcast_rows",
                    lhs: other.to_vec(),
                    rhs: vec![n],
                })
            }
        };
        let x = self.values();
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            out.extend_from_slice(&x);
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, d],
            out,
            "broadcast_rows",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_, E>| {
                let mut dx = vec![E::zero(); d];
                for r in 0..n {
                    let row = &ctx.grad[r * d..(r + 1) * d];
                    for (a, &b) in dx.iter_mut().zip(row) {
                        *a = *a + b;
                    }
                }
                ctx.parents[0].accumulate_grad(&dx);
            }),
        ))
    }

    /// Reinterpret the value buffer under a new shape of equal element count.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<E>> {
        if new_shape.iter().product::<usize>() != self.numel() {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: new_shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(
            new_shape.to_vec(),
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            Box::new(|ctx: &BackwardCtx<'_, E>| {
                ctx.parents[0].accumulate_grad(ctx.grad);
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::tensor::{backward, Tensor};

    fn close(a: f32, b: f32, tol: f32) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::<f32>::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let eye = Tensor::<f32>::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&eye).unwrap().to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_hand_computed() {
        let a = Tensor::<f32>::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f32>::new(&[2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(
            a.matmul(&b).unwrap().to_vec(),
            vec![19.0, 22.0, 43.0, 50.0]
        );
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "got: {msg}");
    }

    #[test]
    fn matmul_nt_matches_explicit_transpose() {
        let a = Tensor::<f32>::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::<f32>::new(&[2, 3], vec![0.5, -1.0, 2.0, 1.5, 0.0, -2.0]).unwrap();
        let c = a.matmul_nt(&b).unwrap();
        // rows of a dotted with rows of b
        assert_eq!(c.to_vec(), vec![4.5, -4.5, 9.0, -6.0]);
    }

    #[test]
    fn add_zero_is_identity() {
        let x = Tensor::<f32>::new(&[3], vec![1.0, -2.0, 3.5]).unwrap();
        let z = Tensor::<f32>::zeros(&[3]);
        assert_eq!(x.add(&z).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn gelu_zero_is_zero() {
        let x = Tensor::<f32>::new(&[1], vec![0.0]).unwrap();
        assert_eq!(x.gelu().to_vec(), vec![0.0]);
    }

    #[test]
    fn softmax_symmetry_and_forced_value() {
        let x = Tensor::<f32>::new(&[2], vec![0.0, 0.0]).unwrap();
        assert_eq!(x.softmax(0).unwrap().to_vec(), vec![0.5, 0.5]);

        let y = Tensor::<f32>::new(&[2], vec![0.0, 3f32.ln()]).unwrap();
        let s = y.softmax(0).unwrap().to_vec();
        assert!(close(s[0], 0.25, 1e-6) && close(s[1], 0.75, 1e-6));
    }

    #[test]
    fn softmax_shift_invariant() {
        let x = Tensor::<f32>::new(&[4], vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let xc = Tensor::<f32>::new(&[4], vec![5.3, 3.8, 7.0, 5.7]).unwrap();
        let a = x.softmax(0).unwrap().to_vec();
        let b = xc.softmax(0).unwrap().to_vec();
        for (u, v) in a.iter().zip(&b) {
            assert!(close(*u, *v, 1e-6));
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Tensor::<f32>::new(&[2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap();
        let s = x.softmax(1).unwrap().to_vec();
        for r in 0..2 {
            let sum: f32 = s[r * 3..(r + 1) * 3].iter().sum();
            assert!(close(sum, 1.0, 1e-6));
            assert!(s[r * 3..(r + 1) * 3].iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn layer_norm_constant_input_is_bias() {
        let x = Tensor::<f32>::new(&[4], vec![7.0; 4]).unwrap();
        let gain = Tensor::<f32>::new(&[4], vec![1.0; 4]).unwrap();
        let bias = Tensor::<f32>::zeros(&[4]);
        let y = x.layer_norm(&gain, &bias, 1e-5).unwrap().to_vec();
        for v in y {
            assert!(close(v, 0.0, 1e-5));
        }
    }

    #[test]
    fn layer_norm_rejects_nonpositive_eps() {
        let x = Tensor::<f32>::zeros(&[4]);
        let g = Tensor::<f32>::new(&[4], vec![1.0; 4]).unwrap();
        let b = Tensor::<f32>::zeros(&[4]);
        assert!(x.layer_norm(&g, &b, 0.0).is_err());
    }

    #[test]
    fn layer_norm_statistics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = 64;
        let lanes = 8;
        let vals: Vec<f32> = (0..lanes * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Tensor::<f32>::new(&[lanes, d], vals).unwrap();
        let gain = Tensor::<f32>::new(&[d], vec![1.5; d]).unwrap();
        let bias = Tensor::<f32>::new(&[d], vec![0.25; d]).unwrap();
        let y = x.layer_norm(&gain, &bias, 1e-5).unwrap().to_vec();
        for l in 0..lanes {
            let row = &y[l * d..(l + 1) * d];
            let mean: f32 = row.iter().sum::<f32>() / d as f32;
            let var: f32 = row.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / d as f32;
            assert!(close(mean, 0.25, 1e-3), "mean {mean}");
            assert!(close(var, 1.5 * 1.5, 1e-2), "var {var}");
        }
    }

    #[test]
    fn l1_loss_cases() {
        let p = Tensor::<f32>::new(&[2], vec![1.0, 2.0]).unwrap();
        let t = Tensor::<f32>::zeros(&[2]);
        assert!(close(p.l1_loss(&p, &[true, true]).unwrap().item(), 0.0, 1e-7));
        assert!(close(p.l1_loss(&t, &[true, true]).unwrap().item(), 1.5, 1e-7));
        assert!(close(p.l1_loss(&t, &[true, false]).unwrap().item(), 1.0, 1e-7));
        assert!(p.l1_loss(&t, &[false, false]).is_err());
    }

    #[test]
    fn l1_loss_no_grad_into_target() {
        let p = Tensor::<f32>::param(&[2], vec![1.0, 2.0]).unwrap();
        let t = Tensor::<f32>::param(&[2], vec![0.5, 0.5]).unwrap();
        let loss = p.l1_loss(&t, &[true, true]).unwrap();
        backward(&loss).unwrap();
        assert!(p.grad().is_some());
        assert!(t.grad().is_none(), "target must not receive gradient");
    }

    #[test]
    fn cross_entropy_uniform_and_stability() {
        let x = Tensor::<f32>::new(&[2], vec![0.0, 0.0]).unwrap();
        assert!(close(x.cross_entropy(0).unwrap().item(), 2f32.ln(), 1e-6));

        let y = Tensor::<f32>::new(&[2], vec![1000.0, -1000.0]).unwrap();
        let loss = y.cross_entropy(0).unwrap().item();
        assert!(loss.is_finite() && close(loss, 0.0, 1e-6));

        assert!(x.cross_entropy(2).is_err());
    }

    #[test]
    fn gather_scatter_roundtrip_grad() {
        let x = Tensor::<f32>::param(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = x.gather_rows(&[2, 0, 2]).unwrap();
        assert_eq!(g.to_vec(), vec![5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        backward(&g.sum()).unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn concat_slice_cols_roundtrip() {
        let x = Tensor::<f32>::param(&[2, 4], vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        let left = x.slice_cols(0, 2).unwrap();
        let right = x.slice_cols(2, 4).unwrap();
        let back = Tensor::concat_cols(&[&left, &right]).unwrap();
        assert_eq!(back.to_vec(), x.to_vec());
        backward(&back.sum()).unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 8]);
    }

    proptest::proptest! {
        /// softmax outputs are positive, sum to one per lane, and are
        /// invariant to a constant shift
        #[test]
        fn softmax_invariants(vals in proptest::collection::vec(-30.0f32..30.0, 2..24), c in -10.0f32..10.0) {
            let n = vals.len();
            let x = Tensor::<f32>::new(&[n], vals.clone()).unwrap();
            let s = x.softmax(0).unwrap().to_vec();
            let total: f32 = s.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-5);
            proptest::prop_assert!(s.iter().all(|&p| p > 0.0));
            let shifted = Tensor::<f32>::new(&[n], vals.iter().map(|v| v + c).collect()).unwrap();
            let s2 = shifted.softmax(0).unwrap().to_vec();
            for (a, b) in s.iter().zip(&s2) {
                proptest::prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn broadcast_rows_backward_sums() {
        let b = Tensor::<f32>::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let e = b.broadcast_rows(4).unwrap();
        assert_eq!(e.shape(), &[4, 3]);
        backward(&e.sum()).unwrap();
        assert_eq!(b.grad().unwrap(), vec![4.0, 4.0, 4.0]);
    }
}
