//! Resolvent evaluation `R(z,T)x` by rectangular least squares.
//!
//! For a section `P_{f(n)} (T - z) P_n` the least-squares minimizer `y`
//! satisfies
//!
//! ```text
//! ||y - R(z,T)x|| <= (c2 beta_{f(n)} + c1 alpha_n ||y|| + residual) / dist(z, sigma(T))
//! ```
//!
//! which is the certificate reported with every solution.

pub use crate::linalg::pd_test;

use crate::error::{Result, SpecError};
use crate::linalg::{band_least_squares, band_sigma_exceeds};
use crate::operator::{ColumnDecayOperator, DecayVector};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    /// Coefficients of `Gamma_n`, supported in `1..=n_used` (index 0 is `e_1`).
    pub coeffs: Vec<C64>,
    pub n_used: usize,
    pub residual: f64,
    pub bound: f64,
}

impl ResolventSolution {
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<Gamma, y>` for a finite vector `y` (zero-based coefficients).
    pub fn inner(&self, y: &[C64]) -> C64 {
        self.coeffs.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }

    fn zero(n: usize) -> Self {
        Self { coeffs: vec![C64::new(0.0, 0.0); n], n_used: n, residual: f64::INFINITY, bound: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventOptions {
    pub n_start: usize,
    pub n_cap: usize,
    /// Overrides the default `dist(z, sigma(T))` lower bound.
    pub dist_lower_bound: Option<f64>,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self { n_start: 8, n_cap: 1 << 23, dist_lower_bound: None }
    }
}

impl ResolventOptions {
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.n_cap = cap;
        self
    }

    pub fn with_start(mut self, n: usize) -> Self {
        self.n_start = n.max(1);
        self
    }
}

fn dist_for(op: &ColumnDecayOperator, z: C64, opts: &ResolventOptions) -> Result<f64> {
    op.check_z(z)?;
    let d = opts.dist_lower_bound.unwrap_or_else(|| op.dist_lower_bound(z));
    if !(d > 0.0) {
        return Err(SpecError::OnSpectrum { re: z.re, im: z.im, kind: op.kind.label() });
    }
    Ok(d)
}

/// Solves at a fixed truncation `n` for several right-hand sides at once.
pub fn resolvent_multi(
    op: &ColumnDecayOperator,
    xs: &[&DecayVector],
    z: C64,
    n: usize,
    opts: &ResolventOptions,
) -> Result<Vec<ResolventSolution>> {
    let dist = dist_for(op, z, opts)?;
    let n = op.cols_for(n.max(1));
    let a = op.rect_truncation(n, z);
    let m = a.m;
    let rhs: Vec<Vec<C64>> = xs.iter().map(|x| x.head(m)).collect();
    let alpha_term = op.c1 * op.alpha.eval(n);
    let lsq = band_least_squares(a, rhs)?;
    // The singular-value gate can only fail when the section is not exact
    // below f(n); otherwise sigma_min >= dist(z, sigma(T)) holds outright.
    if alpha_term > 0.0 && !band_sigma_exceeds(&lsq.r, 0.5 * dist) {
        return Ok(xs.iter().map(|_| ResolventSolution::zero(n)).collect());
    }
    let mut out = Vec::with_capacity(xs.len());
    for ((y, res), x) in lsq.solutions.into_iter().zip(lsq.residuals).zip(xs) {
        let ynorm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let bound = (x.tail_bound(m) + alpha_term * ynorm + res) / dist;
        out.push(ResolventSolution { coeffs: y, n_used: n, residual: res, bound });
    }
    Ok(out)
}

/// `Gamma_n(T, x, z)` with its certified bound.
pub fn resolvent_action(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    z: C64,
    n: usize,
) -> Result<ResolventSolution> {
    let mut v = resolvent_multi(op, &[x], z, n, &ResolventOptions::default())?;
    Ok(v.remove(0))
}

/// Doubles `n` until every bound is at most `tol`.
pub fn resolvent_adaptive_multi(
    op: &ColumnDecayOperator,
    xs: &[&DecayVector],
    z: C64,
    tol: f64,
    opts: &ResolventOptions,
) -> Result<Vec<ResolventSolution>> {
    if !(tol > 0.0) {
        return Err(SpecError::InvalidArgument("tol must be positive".into()));
    }
    let mut n = opts.n_start.max(1);
    loop {
        let n_eff = op.cols_for(n);
        let sols = resolvent_multi(op, xs, z, n_eff, opts)?;
        let worst = sols.iter().map(|s| s.bound).fold(0.0, f64::max);
        if worst <= tol {
            return Ok(sols);
        }
        let exhausted = op.dim.map_or(false, |d| n_eff >= d);
        if n >= opts.n_cap || exhausted {
            let partial = sols
                .into_iter()
                .max_by(|a, b| a.bound.total_cmp(&b.bound))
                .unwrap_or_else(|| ResolventSolution::zero(n_eff));
            return Err(SpecError::NotConverged { n: n_eff, bound: worst, tol, partial: Box::new(partial) });
        }
        n = (2 * n).min(opts.n_cap.max(n + 1));
    }
}

/// Adaptive solve: smallest `n` in the doubling schedule with `bound <= tol`.
pub fn resolvent_action_adaptive(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    z: C64,
    tol: f64,
    opts: &ResolventOptions,
) -> Result<ResolventSolution> {
    let mut v = resolvent_adaptive_multi(op, &[x], z, tol, opts)?;
    Ok(v.remove(0))
}
