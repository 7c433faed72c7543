//! Central finite-difference gradient checking.
//!
//! The oracle perturbs each input element by ±h, re-runs the forward
//! function in f64, and compares the two-sided difference quotient against
//! the analytic gradient from [`backward`]. Error is measured as
//! `|a - n| / max(|a|, |n|, 1e-3)`: a true relative error for gradients of
//! ordinary magnitude, degrading to a scaled absolute error near zero where
//! the quotient itself is dominated by roundoff.

use super::{backward, clear_grads, Tensor};
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ERR_FLOOR: f64 = 1e-3;

/// Check the gradient of `f` with respect to every element of `inputs`.
/// Each input must be a parameter tensor. Returns the worst error observed.
pub fn gradcheck<F>(f: F, inputs: &[Tensor<f64>], h: f64) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    clear_grads(inputs);
    let loss = f(inputs)?;
    backward(&loss)?;
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let mut worst = 0.0f64;
    for (ti, t) in inputs.iter().enumerate() {
        let base = t.to_vec();
        for i in 0..base.len() {
            let mut bumped = base.clone();
            bumped[i] = base[i] + h;
            t.set_values(&bumped)?;
            let up = f(inputs)?.item();
            bumped[i] = base[i] - h;
            t.set_values(&bumped)?;
            let down = f(inputs)?.item();
            t.set_values(&base)?;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[ti][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ERR_FLOOR);
            if err > worst {
                worst = err;
            }
        }
    }
    clear_grads(inputs);
    Ok(worst)
}

/// Outcome of checking one primitive across several random seeds.
#[derive(Debug, Clone)]
pub struct PrimitiveCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub seeds: u64,
}

impl PrimitiveCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checks: Vec<PrimitiveCheck>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

fn rand_param(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let vals = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    Tensor::param(shape, vals).expect("shape/value agreement")
}

/// Run the randomized finite-difference suite over every differentiable
/// primitive, `seeds` independent draws each (central differences, 64-bit).
pub fn gradcheck_report(seeds: u64, h: f64, tolerance: f64) -> Result<GradCheckReport> {
    type CheckFn = fn(&mut ChaCha8Rng, f64) -> Result<f64>;
    let cases: &[(&'static str, CheckFn)] = &[
        ("matmul", |rng, h| {
            let a = rand_param(rng, &[3, 4]);
            let b = rand_param(rng, &[4, 2]);
            gradcheck(|t| Ok(t[0].matmul(&t[1])?.sum()), &[a, b], h)
        }),
        ("matmul_nt", |rng, h| {
            let a = rand_param(rng, &[3, 4]);
            let b = rand_param(rng, &[5, 4]);
            gradcheck(|t| Ok(t[0].matmul_nt(&t[1])?.sum()), &[a, b], h)
        }),
        ("add", |rng, h| {
            let a = rand_param(rng, &[6]);
            let b = rand_param(rng, &[6]);
            gradcheck(|t| Ok(t[0].add(&t[1])?.mul(&t[0].add(&t[1])?)?.sum()), &[a, b], h)
        }),
        ("sub", |rng, h| {
            let a = rand_param(rng, &[6]);
            let b = rand_param(rng, &[6]);
            gradcheck(|t| Ok(t[0].sub(&t[1])?.mul(&t[0])?.sum()), &[a, b], h)
        }),
        ("mul", |rng, h| {
            let a = rand_param(rng, &[6]);
            let b = rand_param(rng, &[6]);
            gradcheck(|t| Ok(t[0].mul(&t[1])?.sum()), &[a, b], h)
        }),
        ("scale", |rng, h| {
            let a = rand_param(rng, &[6]);
            gradcheck(|t| Ok(t[0].scale(-2.5).mul(&t[0])?.sum()), &[a], h)
        }),
        ("gelu", |rng, h| {
            let a = rand_param(rng, &[20]);
            gradcheck(|t| Ok(t[0].gelu().sum()), &[a], h)
        }),
        ("softmax", |rng, h| {
            let a = rand_param(rng, &[2, 5]);
            let w = rand_param(rng, &[2, 5]);
            gradcheck(|t| Ok(t[0].softmax(1)?.mul(&t[1])?.sum()), &[a, w], h)
        }),
        ("layer_norm", |rng, h| {
            let x = rand_param(rng, &[3, 8]);
            let gain = rand_param(rng, &[8]);
            let bias = rand_param(rng, &[8]);
            let w = rand_param(rng, &[3, 8]);
            gradcheck(
                |t| Ok(t[0].layer_norm(&t[1], &t[2], 1e-5)?.mul(&t[3])?.sum()),
                &[x, gain, bias, w],
                h,
            )
        }),
        ("l1_loss", |rng, h| {
            // keep |pred - target| away from the kink at zero
            let pred = rand_param(rng, &[8]);
            let shift: Vec<f64> = pred.to_vec().iter().map(|v| v + 2.0).collect();
            let target = Tensor::new(&[8], shift)?;
            let mask: Vec<bool> = (0..8).map(|i| i % 3 != 0).collect();
            gradcheck(move |t| t[0].l1_loss(&target, &mask), &[pred], h)
        }),
        ("cross_entropy", |rng, h| {
            let logits = rand_param(rng, &[5]);
            let label = rng.gen_range(0..5);
            gradcheck(move |t| t[0].cross_entropy(label), &[logits], h)
        }),
        ("sum", |rng, h| {
            let a = rand_param(rng, &[7]);
            gradcheck(|t| Ok(t[0].mul(&t[0])?.sum()), &[a], h)
        }),
        ("mean", |rng, h| {
            let a = rand_param(rng, &[7]);
            gradcheck(|t| Ok(t[0].mul(&t[0])?.mean()), &[a], h)
        }),
        ("gather_rows", |rng, h| {
            let a = rand_param(rng, &[5, 3]);
            gradcheck(
                |t| Ok(t[0].gather_rows(&[4, 0, 4, 2])?.mul(&t[0].gather_rows(&[1, 1, 3, 2])?)?.sum()),
                &[a],
                h,
            )
        }),
        ("concat_rows", |rng, h| {
            let a = rand_param(rng, &[2, 3]);
            let b = rand_param(rng, &[4, 3]);
            gradcheck(
                |t| {
                    let c = Tensor::concat_rows(&[&t[0], &t[1]])?;
                    Ok(c.mul(&c)?.sum())
                },
                &[a, b],
                h,
            )
        }),
        ("slice_cols", |rng, h| {
            let a = rand_param(rng, &[3, 6]);
            gradcheck(
                |t| Ok(t[0].slice_cols(1, 4)?.mul(&t[0].slice_cols(2, 5)?)?.sum()),
                &[a],
                h,
            )
        }),
        ("concat_cols", |rng, h| {
            let a = rand_param(rng, &[3, 2]);
            let b = rand_param(rng, &[3, 4]);
            gradcheck(
                |t| {
                    let c = Tensor::concat_cols(&[&t[0], &t[1]])?;
                    Ok(c.mul(&c)?.sum())
                },
                &[a, b],
                h,
            )
        }),
        ("broadcast_rows", |rng, h| {
            let a = rand_param(rng, &[4]);
            let w = rand_param(rng, &[3, 4]);
            gradcheck(|t| Ok(t[0].broadcast_rows(3)?.mul(&t[1])?.sum()), &[a, w], h)
        }),
        ("reshape", |rng, h| {
            let a = rand_param(rng, &[2, 6]);
            gradcheck(
                |t| Ok(t[0].reshape(&[3, 4])?.mul(&t[0].reshape(&[3, 4])?)?.sum()),
                &[a],
                h,
            )
        }),
    ];

    let mut checks = Vec::with_capacity(cases.len());
    for (name, case) in cases {
        let mut worst = 0.0f64;
        for s in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9 ^ s);
            let err = case(&mut rng, h)?;
            if err > worst {
                worst = err;
            }
        }
        checks.push(PrimitiveCheck {
            name,
            max_rel_err: worst,
            tolerance,
            seeds,
        });
    }
    Ok(GradCheckReport { checks })
}
