//! Exponential-moving-average tracking of the online encoder.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Linear momentum ramp from `m_start` at step 0 to `m_end` at the final
/// step. Momentum 1.0 freezes the target entirely.
#[derive(Debug, Clone, Copy)]
pub struct EmaSchedule {
    pub m_start: f64,
    pub m_end: f64,
    pub total_steps: usize,
}

impl EmaSchedule {
    pub fn new(m_start: f64, m_end: f64, total_steps: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&m_start) || !(0.0..=1.0).contains(&m_end) || m_end < m_start {
            return Err(Error::config(format!(
                "ema schedule must satisfy 0 <= start <= end <= 1, got {m_start}..{m_end}"
            )));
        }
        Ok(EmaSchedule { m_start, m_end, total_steps })
    }

    pub fn momentum(&self, step: usize) -> f64 {
        if self.total_steps <= 1 {
            return self.m_end;
        }
        let frac = step.min(self.total_steps - 1) as f64 / (self.total_steps - 1) as f64;
        self.m_start + (self.m_end - self.m_start) * frac
    }
}

/// In-place update `target = m * target + (1 - m) * online`, elementwise,
/// entirely outside the autodiff graph.
pub fn ema_update<E: Element>(target: &[Tensor<E>], online: &[Tensor<E>], m: f64) -> Result<()> {
    if target.len() != online.len() {
        return Err(Error::Dimension {
            op: "ema_update",
            lhs: vec![target.len()],
            rhs: vec![online.len()],
        });
    }
    let m_e = E::from_f64(m);
    let one_minus = E::from_f64(1.0 - m);
    for (t, o) in target.iter().zip(online) {
        if t.shape() != o.shape() {
            return Err(Error::Dimension {
                op: "ema_update",
                lhs: t.shape().to_vec(),
                rhs: o.shape().to_vec(),
            });
        }
        let mut tv = t.to_vec();
        let ov = o.values();
        for (tj, &oj) in tv.iter_mut().zip(ov.iter()) {
            *tj = m_e * *tj + one_minus * oj;
        }
        drop(ov);
        t.set_values(&tv)?;
    }
    Ok(())
}
