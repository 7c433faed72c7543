//! The tensor core in isolation: forward ops, reverse-mode gradients, a
//! finite-difference check, and a few AdamW steps on a quadratic bowl.
//!
//!     cargo run --example autodiff_basics

use jepa_fer::tensor::{backward, clear_grads, gradcheck, AdamW, AdamWConfig, Tensor};

fn main() -> jepa_fer::Result<()> {
    // forward + backward through a small expression
    let a = Tensor::<f32>::param(&[2, 2], vec![1.0, 2.0, 3.0, 4.0])?;
    let b = Tensor::<f32>::param(&[2, 2], vec![5.0, 6.0, 7.0, 8.0])?;
    let product = a.matmul(&b)?;
    println!("A·B = {:?}", product.to_vec());

    let loss = product.gelu().sum();
    backward(&loss)?;
    println!("dL/dA = {:?}", a.grad().unwrap());
    println!("dL/dB = {:?}", b.grad().unwrap());
    clear_grads(&[a.clone(), b.clone()]);

    // the same gradients, checked against central finite differences in f64
    let a64 = a.cast::<f64>();
    let b64 = b.cast::<f64>();
    let (pa, pb) = (
        Tensor::<f64>::param(&[2, 2], a64.to_vec())?,
        Tensor::<f64>::param(&[2, 2], b64.to_vec())?,
    );
    let err = gradcheck(
        |t| Ok(t[0].matmul(&t[1])?.gelu().sum()),
        &[pa, pb],
        1e-5,
    )?;
    println!("finite-difference max rel err: {err:.3e}");

    // optimize w^2 from w = 1
    let w = Tensor::<f64>::param(&[1], vec![1.0])?;
    let mut opt = AdamW::new(AdamWConfig { lr: 0.05, ..Default::default() }, &[w.clone()]);
    for step in 0..300 {
        w.clear_grad();
        let loss = w.mul(&w)?.sum();
        backward(&loss)?;
        opt.step(&[w.clone()], None)?;
        if step % 100 == 99 {
            println!("step {:>3}: w = {:+.6}", step + 1, w.item());
        }
    }
    Ok(())
}
