//! 3-D sinusoidal position embeddings.
//!
//! The embedding dimension splits into three equal per-axis blocks (time,
//! height, width), each the standard sinusoid over that axis index: the
//! first half of a block holds sines, the second half cosines over a
//! geometric frequency ladder. When `dim` is not divisible by 6 the
//! trailing remainder channels are zero.

use crate::tensor::{Element, Tensor};

/// Deterministic, parameter-free table for a (T', H', W') token grid,
/// shaped (T'*H'*W') x dim, rows in (t, h, w) row-major order.
pub fn posembed_3d<E: Element>(grid: (usize, usize, usize), dim: usize) -> Tensor<E> {
    let (gt, gh, gw) = grid;
    let per_axis = 2 * (dim / 6);
    let half = per_axis / 2;
    let n = gt * gh * gw;
    let mut vals = vec![E::zero(); n * dim];
    let mut row = 0usize;
    for t in 0..gt {
        for h in 0..gh {
            for w in 0..gw {
                let base = row * dim;
                for (axis, p) in [t, h, w].into_iter().enumerate() {
                    let off = base + axis * per_axis;
                    for i in 0..half {
                        let freq = 1.0 / 10000f64.powf(i as f64 / half as f64);
                        let arg = p as f64 * freq;
                        vals[off + i] = E::from_f64(arg.sin());
                        vals[off + half + i] = E::from_f64(arg.cos());
                    }
                }
                row += 1;
            }
        }
    }
    Tensor::new(&[n, dim], vals).expect("shape/value agreement")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_zero_sines_unit_cosines() {
        let pe = posembed_3d::<f64>((2, 2, 2), 12);
        let row0 = &pe.to_vec()[0..12];
        // layout per axis block of 4: [sin, sin, cos, cos]
        for axis in 0..3 {
            assert_eq!(row0[axis * 4], 0.0);
            assert_eq!(row0[axis * 4 + 1], 0.0);
            assert_eq!(row0[axis * 4 + 2], 1.0);
            assert_eq!(row0[axis * 4 + 3], 1.0);
        }
    }

    #[test]
    fn values_bounded_by_one() {
        let pe = posembed_3d::<f32>((8, 4, 4), 128);
        assert!(pe.to_vec().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn remainder_channels_are_zero() {
        // 128 = 6*21 + 2: the last two channels stay zero everywhere
        let pe = posembed_3d::<f32>((2, 3, 3), 128);
        let v = pe.to_vec();
        for r in 0..18 {
            assert_eq!(v[r * 128 + 126], 0.0);
            assert_eq!(v[r * 128 + 127], 0.0);
        }
    }

    #[test]
    fn toy_grid_positions_pairwise_distinct() {
        let pe = posembed_3d::<f32>((8, 4, 4), 128);
        let v = pe.to_vec();
        let n = 128;
        for a in 0..n {
            for b in (a + 1)..n {
                let d: f32 = (0..128)
                    .map(|c| (v[a * 128 + c] - v[b * 128 + c]).abs())
                    .fold(0.0, f32::max);
                assert!(d > 1e-4, "rows {a} and {b} collide (max diff {d})");
            }
        }
    }
}
