//! Coverage-preserving greedy filtering of redundant per-frame mask proposals.

use crate::error::{Error, Result};
use crate::model::BinaryMask;

pub const DEFAULT_OVERLAP_THRESH: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub overlap_thresh: f64,
    /// Re-admit rejected proposals that still cover uncovered pixels, so the
    /// selection always reaches the coverage of the full proposal set.
    pub fallback_sweep: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            overlap_thresh: DEFAULT_OVERLAP_THRESH,
            fallback_sweep: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    /// Proposals admitted by the overlap test, in visiting order.
    pub greedy: Vec<usize>,
    /// Proposals re-admitted by the fallback sweep, in visiting order.
    pub fallback: Vec<usize>,
}

impl FilterOutcome {
    pub fn selected(&self) -> Vec<usize> {
        self.greedy.iter().chain(&self.fallback).copied().collect()
    }
}

/// Filter with the default configuration; returns selected input indices in
/// selection order.
pub fn filter_proposals(proposals: &[BinaryMask], overlap_thresh: f64) -> Result<Vec<usize>> {
    let cfg = FilterConfig {
        overlap_thresh,
        ..FilterConfig::default()
    };
    filter_proposals_detailed(proposals, &cfg).map(|o| o.selected())
}

pub fn filter_proposals_detailed(proposals: &[BinaryMask], cfg: &FilterConfig) -> Result<FilterOutcome> {
    let Some(first) = proposals.first() else {
        return Ok(FilterOutcome::default());
    };
    let dims = first.dims();
    if let Some(bad) = proposals.iter().find(|p| p.dims() != dims) {
        return Err(Error::InvalidDimensions(format!(
            "proposal {}x{} among {}x{} proposals",
            bad.width(),
            bad.height(),
            dims.0,
            dims.1
        )));
    }

    let bits: Vec<Vec<bool>> = proposals.iter().map(BinaryMask::to_bits).collect();
    let areas: Vec<usize> = bits.iter().map(|b| b.iter().filter(|&&x| x).count()).collect();
    let n_px = dims.0 * dims.1;
    let full_area = (0..n_px).filter(|&i| bits.iter().any(|b| b[i])).count();

    let mut order: Vec<usize> = (0..proposals.len()).filter(|&i| areas[i] > 0).collect();
    order.sort_by(|&a, &b| areas[b].cmp(&areas[a]).then(a.cmp(&b)));

    let mut covered = vec![false; n_px];
    let mut covered_area = 0usize;
    let mut chosen = vec![false; proposals.len()];
    let mut outcome = FilterOutcome::default();

    let admit = |i: usize, covered: &mut Vec<bool>, covered_area: &mut usize| {
        for (c, &b) in covered.iter_mut().zip(&bits[i]) {
            if b && !*c {
                *c = true;
                *covered_area += 1;
            }
        }
    };

    for &i in &order {
        if covered_area == full_area {
            break;
        }
        let shared = bits[i].iter().zip(&covered).filter(|(&b, &c)| b && c).count();
        let overlap = shared as f64 / areas[i] as f64;
        if overlap < cfg.overlap_thresh {
            admit(i, &mut covered, &mut covered_area);
            chosen[i] = true;
            outcome.greedy.push(i);
        }
    }

    if cfg.fallback_sweep {
        for &i in &order {
            if covered_area == full_area {
                break;
            }
            if chosen[i] {
                continue;
            }
            if bits[i].iter().zip(&covered).any(|(&b, &c)| b && !c) {
                admit(i, &mut covered, &mut covered_area);
                chosen[i] = true;
                outcome.fallback.push(i);
            }
        }
    }
    Ok(outcome)
}
