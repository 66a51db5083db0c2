//! Radon–Nikodym derivatives as piecewise affine interpolants of the
//! Poisson-smoothed measure, and convergence-rate experiments.

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, DecayVector};
use crate::poisson::{richardson, smoothed_density, stage_intervals, MeasureOptions};
use crate::quadrature::{loglog_slope, par_map};
use crate::sets::OpenRealSet;
use crate::C64;

/// Knot placement on each interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KnotSchedule {
    /// Spacing at most `(b - a)^{-1} n^{-3} m^{-2}` on interval `m`.
    Strict,
    /// Spacing at most `eps / k`; far fewer resolvent solves.
    PerEps(f64),
}

impl Default for KnotSchedule {
    fn default() -> Self {
        KnotSchedule::PerEps(8.0)
    }
}

impl KnotSchedule {
    /// Largest admissible spacing on interval `m` (1-based) of length `len`.
    pub fn max_spacing(&self, len: f64, n: usize, m: usize) -> f64 {
        match *self {
            KnotSchedule::Strict => 1.0 / (len * (n as f64).powi(3) * (m as f64).powi(2)),
            KnotSchedule::PerEps(k) => 1.0 / (n as f64 * k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityPiece {
    /// The original interval `(a_m, b_m)`.
    pub interval: (f64, f64),
    pub knots: Vec<f64>,
    pub values: Vec<C64>,
    pub bounds: Vec<f64>,
}

/// A piecewise affine function, zero outside the hulls of its knot lists.
#[derive(Debug, Clone)]
pub struct PiecewiseAffineDensity {
    pub pieces: Vec<DensityPiece>,
    pub epsilon: f64,
}

impl PiecewiseAffineDensity {
    pub fn eval(&self, u: f64) -> C64 {
        for p in &self.pieces {
            let k = &p.knots;
            if k.is_empty() || u < k[0] || u > k[k.len() - 1] {
                continue;
            }
            if k.len() == 1 {
                return p.values[0];
            }
            let j = match k.binary_search_by(|t| t.total_cmp(&u)) {
                Ok(j) => return p.values[j],
                Err(j) => j,
            };
            let t = (u - k[j - 1]) / (k[j] - k[j - 1]);
            return p.values[j - 1] * (1.0 - t) + p.values[j] * t;
        }
        C64::new(0.0, 0.0)
    }

    pub fn knot_count(&self) -> usize {
        self.pieces.iter().map(|p| p.knots.len()).sum()
    }

    pub fn max_bound(&self) -> f64 {
        self.pieces.iter().flat_map(|p| p.bounds.iter().copied()).fold(0.0, f64::max)
    }
}

/// Interpolant of `u -> <K(u + i/n) x, y>` over the first `n` intervals of
/// `u`, each shrunk by `1/n`; intervals too short to shrink get no knots.
pub fn rn_derivative(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    y: &DecayVector,
    u: &OpenRealSet,
    n: usize,
    schedule: KnotSchedule,
    opts: &MeasureOptions,
) -> Result<PiecewiseAffineDensity> {
    if n == 0 {
        return Err(SpecError::InvalidArgument("stage n must be >= 1".into()));
    }
    let eps = 1.0 / n as f64;
    let shrunk = stage_intervals(op, u, n);
    let mut pieces = Vec::new();
    for (m, &(a, b)) in u.intervals().iter().take(n).enumerate() {
        let Some(&(lo, hi)) = shrunk.iter().find(|s| s.0 >= a && s.1 <= b) else {
            pieces.push(DensityPiece { interval: (a, b), knots: Vec::new(), values: Vec::new(), bounds: Vec::new() });
            continue;
        };
        let h = schedule.max_spacing(b - a, n, m + 1);
        let count = ((hi - lo) / h).ceil().max(1.0) as usize;
        let knots: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
        let vals = par_map(knots.len(), |k| smoothed_density(op, x, y, knots[k], eps, opts))?;
        pieces.push(DensityPiece {
            interval: (a, b),
            knots,
            values: vals.iter().map(|v| v.0).collect(),
            bounds: vals.iter().map(|v| v.1).collect(),
        });
    }
    Ok(PiecewiseAffineDensity { pieces, epsilon: eps })
}

/// Smoothed density of `mu_x` at a point, Richardson-extrapolated with the
/// given depth along `eps, eps/2, ..., eps/2^depth`.
pub fn extrapolated_density(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    point: f64,
    eps: f64,
    depth: usize,
    opts: &MeasureOptions,
) -> Result<f64> {
    let eps_k: Vec<f64> = (0..=depth).map(|k| eps / 2f64.powi(k as i32)).collect();
    let vals = par_map(eps_k.len(), |k| Ok(smoothed_density(op, x, x, point, eps_k[k], opts)?.0.re))?;
    if depth == 0 {
        return Ok(vals[0]);
    }
    let pairs: Vec<(f64, f64)> = eps_k.into_iter().zip(vals).collect();
    richardson(&pairs, depth)
}

#[derive(Debug, Clone)]
pub struct RateRow {
    pub point: f64,
    /// Absolute errors along the ladder.
    pub errors: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct RateTable {
    pub eps: Vec<f64>,
    pub depth: usize,
    pub rows: Vec<RateRow>,
    /// Errors and slope of the L1 error over a window, if requested.
    pub l1: Option<RateRow>,
}

/// Options for [`rate_study`].
#[derive(Debug, Clone)]
pub struct RateOptions {
    pub depth: usize,
    /// L1 window and quadrature nodes `(u, w)` on it.
    pub l1_nodes: Option<Vec<(f64, f64)>>,
    /// Errors below this floor are dropped from the slope fit.
    pub floor: f64,
}

/// Fits log-log slopes of the error against `eps` at each point (and in L1
/// when nodes are given), after `depth` Richardson steps.
pub fn rate_study(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    exact: &(dyn Fn(f64) -> f64 + Sync),
    points: &[f64],
    eps_ladder: &[f64],
    ropts: &RateOptions,
    opts: &MeasureOptions,
) -> Result<RateTable> {
    if eps_ladder.len() < 3 {
        return Err(SpecError::InvalidArgument("a rate study needs at least 3 ladder points".into()));
    }
    let fit = |errors: &[f64]| {
        let (e, r): (Vec<f64>, Vec<f64>) =
            eps_ladder.iter().zip(errors).filter(|(_, r)| **r > ropts.floor).map(|(e, r)| (*e, *r)).unzip();
        if e.len() < 2 {
            f64::NAN
        } else {
            loglog_slope(&e, &r)
        }
    };
    let mut rows = Vec::new();
    for &p in points {
        let errors = eps_ladder
            .iter()
            .map(|&eps| Ok((extrapolated_density(op, x, p, eps, ropts.depth, opts)? - exact(p)).abs()))
            .collect::<Result<Vec<f64>>>()?;
        let slope = fit(&errors);
        rows.push(RateRow { point: p, errors, slope });
    }
    let l1 = match &ropts.l1_nodes {
        None => None,
        Some(nodes) => {
            let mut errors = Vec::new();
            for &eps in eps_ladder {
                let errs =
                    par_map(nodes.len(), |k| Ok((extrapolated_density(op, x, nodes[k].0, eps, ropts.depth, opts)? - exact(nodes[k].0)).abs() * nodes[k].1))?;
                errors.push(crate::quadrature::pairwise_sum(&errs));
            }
            let slope = fit(&errors);
            Some(RateRow { point: f64::NAN, errors, slope })
        }
    };
    Ok(RateTable { eps: eps_ladder.to_vec(), depth: ropts.depth, rows, l1 })
}
