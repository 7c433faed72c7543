//! Whole-video voting over per-clip class probabilities.
//!
//! MV: each clip casts one vote for its argmax class, the most-voted class
//! wins. PBV: the per-clip probability vectors are summed and the largest
//! total wins. All ties break toward the lowest class index in canonical
//! label order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voting {
    Mv,
    Pbv,
}

impl Voting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Voting::Mv => "mv",
            Voting::Pbv => "pbv",
        }
    }
}

/// A video-level decision plus the per-class evidence behind it
/// (vote counts for MV, probability sums for PBV).
#[derive(Debug, Clone, PartialEq)]
pub struct VideoPrediction {
    pub class: usize,
    pub evidence: Vec<f64>,
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_clips(clip_probs: &[Vec<f32>]) -> Result<usize> {
    let first = clip_probs
        .first()
        .ok_or_else(|| Error::protocol("voting over an empty clip list"))?;
    let k = first.len();
    for (i, p) in clip_probs.iter().enumerate() {
        if p.len() != k {
            return Err(Error::Dimension {
                op: "vote",
                lhs: vec![k],
                rhs: vec![p.len()],
            });
        }
        if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::protocol(format!("clip {i} has an invalid probability")));
        }
    }
    Ok(k)
}

/// Maximum voting: most frequent per-clip argmax.
pub fn vote_mv(clip_probs: &[Vec<f32>]) -> Result<VideoPrediction> {
    let k = check_clips(clip_probs)?;
    let mut votes = vec![0.0f64; k];
    for p in clip_probs {
        let mut best = 0;
        for (i, &v) in p.iter().enumerate().skip(1) {
            if v > p[best] {
                best = i;
            }
        }
        votes[best] += 1.0;
    }
    Ok(VideoPrediction {
        class: argmax_lowest(&votes),
        evidence: votes,
    })
}

/// Posteriors-based voting: argmax of summed probability vectors.
pub fn vote_pbv(clip_probs: &[Vec<f32>]) -> Result<VideoPrediction> {
    let k = check_clips(clip_probs)?;
    let mut sums = vec![0.0f64; k];
    for p in clip_probs {
        for (s, &v) in sums.iter_mut().zip(p) {
            *s += v as f64;
        }
    }
    Ok(VideoPrediction {
        class: argmax_lowest(&sums),
        evidence: sums,
    })
}

pub fn vote(strategy: Voting, clip_probs: &[Vec<f32>]) -> Result<VideoPrediction> {
    match strategy {
        Voting::Mv => vote_mv(clip_probs),
        Voting::Pbv => vote_pbv(clip_probs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The documented witness where the two strategies disagree.
    #[test]
    fn mv_and_pbv_disagree_on_witness() {
        let clips = vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.4, 0.6]];
        let mv = vote_mv(&clips).unwrap();
        assert_eq!(mv.class, 1, "two argmax votes for class 1 beat one for class 0");
        assert_eq!(mv.evidence, vec![1.0, 2.0]);
        let pbv = vote_pbv(&clips).unwrap();
        assert_eq!(pbv.class, 0, "summed posteriors favor class 0");
        assert!((pbv.evidence[0] - 1.7).abs() < 1e-6);
        assert!((pbv.evidence[1] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn single_clip_agrees_with_its_argmax() {
        let clips = vec![vec![0.2, 0.5, 0.3]];
        assert_eq!(vote_mv(&clips).unwrap().class, 1);
        assert_eq!(vote_pbv(&clips).unwrap().class, 1);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let clips = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(vote_mv(&clips).unwrap().class, 0);
        let uniform = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(vote_pbv(&uniform).unwrap().class, 0);
    }

    #[test]
    fn empty_clip_list_rejected() {
        assert!(vote_mv(&[]).is_err());
        assert!(vote_pbv(&[]).is_err());
    }

    #[test]
    fn strategies_agree_when_all_clips_agree() {
        let clips = vec![vec![0.8, 0.1, 0.1], vec![0.5, 0.3, 0.2], vec![0.9, 0.05, 0.05]];
        assert_eq!(vote_mv(&clips).unwrap().class, vote_pbv(&clips).unwrap().class);
    }
}
