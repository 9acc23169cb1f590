//! BIC and the warm-started grid search over penalty pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ClampBox, Coefficients, Dataset};
use crate::solver::{self, PenaltyConfig, Solution};

/// An ordered set of (lambda1, lambda2) pairs. Pairs are visited in
/// decreasing max(lambda1, lambda2) so warm starts move from sparse to dense.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaGrid {
    pairs: Vec<(f64, f64)>,
}

impl LambdaGrid {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("lambda grid must be non-empty"));
        }
        for &(l1, l2) in &pairs {
            if !(l1.is_finite() && l2.is_finite() && l1 > 0.0 && l2 > 0.0) {
                return Err(Error::invalid(format!(
                    "lambda grid entries must be finite and positive, got ({l1}, {l2})"
                )));
            }
        }
        pairs.sort_by(|a, b| {
            let (ma, mb) = (a.0.max(a.1), b.0.max(b.1));
            mb.total_cmp(&ma)
                .then(b.0.total_cmp(&a.0))
                .then(b.1.total_cmp(&a.1))
        });
        Ok(LambdaGrid { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub bic: f64,
    pub support_size: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub best: Solution,
    pub best_pair: (f64, f64),
    pub trace: Vec<TraceRow>,
    /// 0-based indices of nonzero mean-block coordinates of `best`.
    pub selected_support1: Vec<usize>,
    /// 0-based indices of nonzero dispersion-block coordinates of `best`.
    pub selected_support2: Vec<usize>,
}

/// BIC = -2 l(theta) + (log n / n) * k, with l the per-observation average
/// log-likelihood (log y! constant dropped) and k the exact support size.
pub fn bic(ds: &Dataset, theta: &Coefficients) -> Result<f64> {
    let loss = model::loss(ds, theta, &ClampBox::default())?;
    let k = support_size(theta);
    let n = ds.n() as f64;
    Ok(2.0 * loss + (n.ln() / n) * k as f64)
}

fn support_size(theta: &Coefficients) -> usize {
    theta
        .theta1
        .iter()
        .chain(&theta.theta2)
        .filter(|&&v| v != 0.0)
        .count()
}

fn support_indices(block: &[f64]) -> Vec<usize> {
    block
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Fit every grid pair (warm-started from the previous pair's solution) and
/// return the BIC argmin. Ties break toward larger max(lambda1, lambda2).
pub fn grid_search(ds: &Dataset, grid: &LambdaGrid, cfg: &PenaltyConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut trace = Vec::with_capacity(grid.len());
    let mut warm: Option<Coefficients> = None;
    let mut best: Option<(Solution, (f64, f64), f64)> = None;
    for &(l1, l2) in grid.pairs() {
        let pair_cfg = PenaltyConfig {
            lambda1: l1,
            lambda2: l2,
            ..cfg.clone()
        };
        let sol = solver::fit_warm(ds, &pair_cfg, warm.as_ref())?;
        let b = bic(ds, &sol.theta)?;
        trace.push(TraceRow {
            lambda1: l1,
            lambda2: l2,
            bic: b,
            support_size: support_size(&sol.theta),
            converged: sol.converged,
        });
        warm = Some(sol.theta.clone());
        // Grid order is decreasing in max(lambda), so a strict `<` keeps the
        // earliest (sparsest) minimizer on ties.
        let better = match &best {
            None => true,
            Some((_, _, best_bic)) => b < *best_bic,
        };
        if better {
            best = Some((sol, (l1, l2), b));
        }
    }
    let (best, best_pair, _) = best.expect("grid is non-empty");
    let selected_support1 = support_indices(&best.theta.theta1);
    let selected_support2 = support_indices(&best.theta.theta2);
    Ok(FitResult {
        best,
        best_pair,
        trace,
        selected_support1,
        selected_support2,
    })
}

/// Default grid: per-block lambda_max from the gradient at zero, a 20-point
/// log ladder down to 0.01 * lambda_max per block, Cartesian product
/// restricted to ratio lambda1/lambda2 in [0.1, 10].
pub fn default_grid(ds: &Dataset) -> Result<LambdaGrid> {
    default_grid_with(ds, 20, 0.01, 10.0)
}

pub fn default_grid_with(
    ds: &Dataset,
    points_per_block: usize,
    min_fraction: f64,
    max_ratio: f64,
) -> Result<LambdaGrid> {
    if points_per_block < 2 {
        return Err(Error::invalid("grid needs at least 2 points per block"));
    }
    if !(min_fraction > 0.0 && min_fraction < 1.0) {
        return Err(Error::invalid("min_fraction must lie in (0, 1)"));
    }
    if !(max_ratio >= 1.0) {
        return Err(Error::invalid("max_ratio must be >= 1"));
    }
    let p = ds.p();
    let g0 = model::grad(ds, &Coefficients::zeros(p), &ClampBox::default())?;
    let max_abs = |s: &[f64]| s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lmax1 = max_abs(&g0[..p]);
    let lmax2 = max_abs(&g0[p..]);
    if lmax1 <= 0.0 || lmax2 <= 0.0 {
        return Err(Error::invalid(
            "degenerate dataset: zero gradient at the origin in one block",
        ));
    }
    let ladder = |lmax: f64| -> Vec<f64> {
        let m = points_per_block;
        (0..m)
            .map(|i| lmax * min_fraction.powf(i as f64 / (m - 1) as f64))
            .collect()
    };
    let l1s = ladder(lmax1);
    let l2s = ladder(lmax2);
    let mut pairs = Vec::new();
    for &l1 in &l1s {
        for &l2 in &l2s {
            let r = l1 / l2;
            if r >= 1.0 / max_ratio && r <= max_ratio {
                pairs.push((l1, l2));
            }
        }
    }
    LambdaGrid::new(pairs)
}
