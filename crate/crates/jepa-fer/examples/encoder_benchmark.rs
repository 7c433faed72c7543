//! Wall-clock cost of the two hot paths: a full-clip encoder forward and a
//! complete masked-prediction training step at the reference toy size.
//!
//!     cargo run --release --example encoder_benchmark

use jepa_fer::jepa::{jepa_loss, JepaModel};
use jepa_fer::tensor::{backward, clear_grads};
use jepa_fer::video::FloatClip;
use jepa_fer::vit::{gen_tube_mask, ArchConfig, VideoEncoder};
use rand::SeedableRng;
use std::time::Instant;

fn main() -> jepa_fer::Result<()> {
    let arch = ArchConfig::default();
    let enc = VideoEncoder::<f32>::random(&arch, 0, false)?;
    let clip = FloatClip {
        frames: 16,
        height: 64,
        width: 64,
        data: (0..16 * 64 * 64 * 3).map(|i| (i as f32 * 0.001).sin()).collect(),
    };
    for _ in 0..3 {
        enc.encode_clip(&clip)?;
    }
    let n = 30;
    let t0 = Instant::now();
    for _ in 0..n {
        enc.encode_clip(&clip)?;
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    println!(
        "encode_clip (128 tokens, dim 128, depth 4): {:.1} ms  ({:.0} clips/min)",
        dt * 1e3,
        60.0 / dt
    );

    let model = JepaModel::<f32>::new(&arch, 0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let k = 10;
    let t0 = Instant::now();
    for _ in 0..k {
        let mask = gen_tube_mask((4, 4), 0.75, (1, 1), &mut rng)?;
        let out = jepa_loss(&model, &clip, &mask)?;
        backward(&out.loss)?;
        clear_grads(&model.trainable_params());
    }
    let dt = t0.elapsed().as_secs_f64() / k as f64;
    println!("masked-prediction step (forward + backward, 1 clip): {:.1} ms", dt * 1e3);
    Ok(())
}
