//! Tube masks: a spatial patch mask replicated across every temporal index.

use crate::error::{Error, Result};
use rand::Rng;

/// Boolean mask over the H'×W' spatial patch grid. Token-level masks are
/// produced by expanding the same spatial slice at every temporal index,
/// which is what makes the masked region a space-time tube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TubeMask {
    spatial: Vec<bool>,
    pub grid_h: usize,
    pub grid_w: usize,
}

impl TubeMask {
    pub fn from_spatial(spatial: Vec<bool>, grid_h: usize, grid_w: usize) -> Result<Self> {
        if spatial.len() != grid_h * grid_w {
            return Err(Error::Dimension {
                op: "tube_mask",
                lhs: vec![grid_h, grid_w],
                rhs: vec![spatial.len()],
            });
        }
        Ok(TubeMask { spatial, grid_h, grid_w })
    }

    pub fn is_masked(&self, h: usize, w: usize) -> bool {
        self.spatial[h * self.grid_w + w]
    }

    pub fn masked_cells(&self) -> usize {
        self.spatial.iter().filter(|&&m| m).count()
    }

    /// Token indices of masked positions over a (T', H', W') grid, in
    /// canonical (t, h, w) row-major order.
    pub fn masked_tokens(&self, grid_t: usize) -> Vec<usize> {
        self.token_indices(grid_t, true)
    }

    pub fn visible_tokens(&self, grid_t: usize) -> Vec<usize> {
        self.token_indices(grid_t, false)
    }

    fn token_indices(&self, grid_t: usize, want_masked: bool) -> Vec<usize> {
        let hw = self.grid_h * self.grid_w;
        let mut out = Vec::new();
        for t in 0..grid_t {
            for (cell, &m) in self.spatial.iter().enumerate() {
                if m == want_masked {
                    out.push(t * hw + cell);
                }
            }
        }
        out
    }
}

/// Sample rectangular spatial blocks until at least `ratio` of the grid is
/// masked. The result always leaves at least one masked and one visible
/// cell; if the final block fills the grid, one sampled cell is unmasked.
pub fn gen_tube_mask<R: Rng>(
    grid_hw: (usize, usize),
    ratio: f64,
    block: (usize, usize),
    rng: &mut R,
) -> Result<TubeMask> {
    let (gh, gw) = grid_hw;
    let (bh, bw) = block;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("mask ratio must be in (0, 1), got {ratio}")));
    }
    if bh == 0 || bw == 0 || bh > gh || bw > gw {
        return Err(Error::config(format!(
            "mask block {bh}x{bw} does not fit the {gh}x{gw} grid"
        )));
    }
    let cells = gh * gw;
    if cells < 2 {
        return Err(Error::config("grid too small to mask and keep a visible cell"));
    }
    let target = ((ratio * cells as f64).ceil() as usize).clamp(1, cells - 1);
    let mut spatial = vec![false; cells];
    let mut masked = 0usize;
    while masked < target {
        let top = rng.gen_range(0..=gh - bh);
        let left = rng.gen_range(0..=gw - bw);
        for y in top..top + bh {
            for x in left..left + bw {
                let cell = y * gw + x;
                if !spatial[cell] {
                    spatial[cell] = true;
                    masked += 1;
                }
            }
        }
    }
    if masked == cells {
        // the last block overshot; reopen one cell
        let mut nth = rng.gen_range(0..cells);
        loop {
            if spatial[nth] {
                spatial[nth] = false;
                break;
            }
            nth = (nth + 1) % cells;
        }
    }
    TubeMask::from_spatial(spatial, gh, gw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ratio_half_on_14x14_masks_at_least_98_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = gen_tube_mask((14, 14), 0.5, (4, 4), &mut rng).unwrap();
        assert!(m.masked_cells() >= 98);
        // token arithmetic over 8 temporal indices
        assert!(m.masked_tokens(8).len() >= 98 * 8);
        assert_eq!(m.masked_tokens(8).len() + m.visible_tokens(8).len(), 8 * 14 * 14);
    }

    #[test]
    fn tube_property_holds_at_every_temporal_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gen_tube_mask((4, 4), 0.75, (2, 2), &mut rng).unwrap();
        let grid_t = 8;
        let hw = 16;
        let tokens = m.masked_tokens(grid_t);
        let slice0: Vec<usize> = tokens.iter().filter(|&&i| i < hw).copied().collect();
        for t in 1..grid_t {
            let slice_t: Vec<usize> = tokens
                .iter()
                .filter(|&&i| i >= t * hw && i < (t + 1) * hw)
                .map(|&i| i - t * hw)
                .collect();
            assert_eq!(slice0, slice_t, "spatial slice differs at t={t}");
        }
    }

    #[test]
    fn same_seed_same_mask() {
        let a = gen_tube_mask((6, 6), 0.6, (2, 2), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_tube_mask((6, 6), 0.6, (2, 2), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn always_one_masked_one_visible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..200u64 {
            let _ = seed;
            let m = gen_tube_mask((4, 4), 0.9, (4, 4), &mut rng).unwrap();
            let c = m.masked_cells();
            assert!(c >= 1 && c < 16, "masked {c} of 16");
        }
    }

    #[test]
    fn oversized_block_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_tube_mask((2, 2), 0.5, (4, 4), &mut rng).is_err());
        assert!(gen_tube_mask((4, 4), 1.5, (2, 2), &mut rng).is_err());
    }
}
