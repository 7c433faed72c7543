//! Tokenization arithmetic and tube masks, printed as ASCII grids.
//!
//!     cargo run --example tube_masking

use jepa_fer::vit::{gen_tube_mask, posembed_3d, TubeletConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> jepa_fer::Result<()> {
    let tubelet = TubeletConfig::default();
    for (frames, h, w) in [(16, 224, 224), (16, 64, 64)] {
        let grid = tubelet.grid_for(frames, h, w)?;
        println!(
            "{frames}x{h}x{w} clip with {}x{}x{} tubelets -> grid {:?} = {} tokens",
            tubelet.patch_t,
            tubelet.patch_h,
            tubelet.patch_w,
            grid,
            grid.0 * grid.1 * grid.2
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ratio in [0.5, 0.75, 0.9] {
        let mask = gen_tube_mask((8, 8), ratio, (2, 2), &mut rng)?;
        println!("\nratio {ratio}: {} of 64 spatial cells masked", mask.masked_cells());
        for y in 0..8 {
            let row: String = (0..8).map(|x| if mask.is_masked(y, x) { '#' } else { '.' }).collect();
            println!("  {row}");
        }
        // the tube property: the same spatial slice at every temporal index
        let tokens = mask.masked_tokens(8);
        println!("  {} masked tokens over 8 temporal slices", tokens.len());
    }

    let pe = posembed_3d::<f32>((8, 4, 4), 128);
    println!("\nposition table: {:?}, first row starts {:?}", pe.shape(), &pe.to_vec()[..4]);
    Ok(())
}
