//! Finite stages of the multi-limit towers for the pure point, absolutely
//! continuous and singular continuous parts of a spectral measure, and for
//! the corresponding parts of the spectrum as unions of dyadic intervals.
//!
//! The continuous part uses a time-averaged tail norm
//! `avg_s ||Q_n e^{-iTs} chi(T) x||^2`; the singular part uses the level sets
//! of the boundary values of `Re <R(t + i eps) x, x>`. Everything else follows
//! from `pp = mu - c`, `ac = mu - s` and `sc = s - pp`.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, DecayVector, Kind};
use crate::poisson::{measure_of_set, smoothed_kernel_multi, MeasureOptions};
use crate::quadrature::{adaptive_gk, composite, pairwise_sum, par_map};
use crate::resolvent::{resolvent_action_adaptive, ResolventOptions};
use crate::sets::OpenRealSet;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TowerKind {
    MeasureC,
    MeasureS,
    MeasurePp,
    MeasureAc,
    MeasureSc,
    SetPp,
    SetAc,
    SetSc,
}

impl TowerKind {
    pub fn label(self) -> &'static str {
        match self {
            TowerKind::MeasureC => "measure_c",
            TowerKind::MeasureS => "measure_s",
            TowerKind::MeasurePp => "measure_pp",
            TowerKind::MeasureAc => "measure_ac",
            TowerKind::MeasureSc => "measure_sc",
            TowerKind::SetPp => "set_pp",
            TowerKind::SetAc => "set_ac",
            TowerKind::SetSc => "set_sc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageValue {
    Scalar(f64),
    Intervals(Vec<(f64, f64)>),
}

/// One output of a tower at explicit indices `(n1, n2[, n3])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerStage {
    pub indices: Vec<usize>,
    pub value: StageValue,
    pub kind: TowerKind,
    /// Accumulated resolvent and quadrature error estimate. This does not
    /// cover the distance from the stage value to its limit.
    pub bound: f64,
}

impl TowerStage {
    fn scalar(kind: TowerKind, indices: Vec<usize>, v: f64, bound: f64) -> Self {
        Self { indices, value: StageValue::Scalar(v), kind, bound }
    }

    /// The value of a measure stage; `NaN` for set stages.
    pub fn scalar_value(&self) -> f64 {
        match self.value {
            StageValue::Scalar(v) => v,
            StageValue::Intervals(_) => f64::NAN,
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        match &self.value {
            StageValue::Intervals(v) => v,
            StageValue::Scalar(_) => &[],
        }
    }
}

/// Upper limits on the stage indices accepted by the drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCaps {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Default for StageCaps {
    fn default() -> Self {
        Self { n1: 60, n2: 30, n3: 10 }
    }
}

impl StageCaps {
    fn check(&self, n1: usize, n2: usize, n3: Option<usize>) -> Result<()> {
        if n1 == 0 || n2 == 0 || n3 == Some(0) {
            return Err(SpecError::InvalidArgument("stage indices must be >= 1".into()));
        }
        if n1 > self.n1 || n2 > self.n2 || n3.map_or(false, |k| k > self.n3) {
            return Err(SpecError::InvalidArgument(format!(
                "stages exceed the caps ({}, {}, {})",
                self.n1, self.n2, self.n3
            )));
        }
        Ok(())
    }
}

/// Knobs of the time-averaged tail estimator.
#[derive(Debug, Clone, Copy)]
pub struct RageOptions {
    /// Time unit `kappa`: samples sit at `s_j = j kappa / n1`, `j <= n1^2`.
    /// `None` picks `max(1, n2 / 8)`.
    pub time_scale: Option<f64>,
    /// Average over the second half of the samples only. The averages over
    /// `[t/2, t]` and `[0, t]` have the same limit, and the former skips the
    /// initial transport of mass out of the first `n2` sites.
    pub late_half: bool,
    /// Smoothing distance `eps = 1 / (eps_factor * t_max)`.
    pub eps_factor: f64,
    pub measure: MeasureOptions,
}

impl Default for RageOptions {
    fn default() -> Self {
        Self { time_scale: None, late_half: true, eps_factor: 5.0, measure: MeasureOptions::default().with_tol(1e-8) }
    }
}

impl RageOptions {
    pub fn kappa(&self, n2: usize) -> f64 {
        self.time_scale.unwrap_or((n2 as f64 / 8.0).max(1.0))
    }

    pub fn horizon(&self, n1: usize, n2: usize) -> f64 {
        n1 as f64 * self.kappa(n2)
    }

    pub fn eps(&self, n1: usize, n2: usize) -> f64 {
        1.0 / (self.eps_factor * self.horizon(n1, n2))
    }
}

/// A piecewise affine cutoff: `min((u - lo)/dl, (hi - u)/dr)` clamped to
/// `[0, 1]`, with `dl = 0` or `dr = 0` meaning a hard edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Trapezoid {
    pub lo: f64,
    pub hi: f64,
    pub dl: f64,
    pub dr: f64,
}

impl Trapezoid {
    pub fn eval(&self, u: f64) -> f64 {
        if u < self.lo || u > self.hi {
            return 0.0;
        }
        let l = if self.dl > 0.0 { (u - self.lo) / self.dl } else { 1.0 };
        let r = if self.dr > 0.0 { (self.hi - u) / self.dr } else { 1.0 };
        l.min(r).clamp(0.0, 1.0)
    }

    /// Breakpoints of the affine pieces, sorted.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b = vec![self.lo, self.hi];
        for t in [self.lo + self.dl, self.hi - self.dr] {
            if t > self.lo && t < self.hi {
                b.push(t);
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

fn window(op: &ColumnDecayOperator, n2: usize) -> (f64, f64) {
    let w = n2 as f64;
    match op.bounded_hint {
        Some((lo, hi)) => ((lo - 1.0).max(-w), (hi + 1.0).min(w)),
        None => (-w, w),
    }
}

/// The mollified indicator of the first `n2` intervals of an open set, with
/// shoulders of width `delta` inside each interval, clipped to the window.
fn open_cutoff(op: &ColumnDecayOperator, u: &OpenRealSet, n2: usize, delta: f64) -> Vec<Trapezoid> {
    let (wl, wr) = window(op, n2);
    u.intervals()
        .iter()
        .take(n2)
        .filter_map(|&(a, b)| {
            let (lo, dl) = if a < wl { (wl, 0.0) } else { (a, delta) };
            let (hi, dr) = if b > wr { (wr, 0.0) } else { (b, delta) };
            (hi > lo).then_some(Trapezoid { lo, hi, dl, dr })
        })
        .collect()
}

/// The mollified indicator of a closed interval: one on `[a - delta, b + delta]`
/// and zero outside `[a - 2 delta, b + 2 delta]`. Keeping the plateau a
/// distance `delta` beyond the endpoints keeps endpoint atoms away from the
/// shoulders, where the Poisson tails leak most.
fn closed_cutoff(op: &ColumnDecayOperator, a: f64, b: f64, n2: usize, delta: f64) -> Vec<Trapezoid> {
    let (wl, wr) = window(op, n2);
    let (lo, dl) = if a - 2.0 * delta <= wl { (wl, 0.0) } else { (a - 2.0 * delta, delta) };
    let (hi, dr) = if b + 2.0 * delta >= wr { (wr, 0.0) } else { (b + 2.0 * delta, delta) };
    if hi > lo && b >= wl && a <= wr {
        vec![Trapezoid { lo, hi, dl, dr }]
    } else {
        Vec::new()
    }
}

/// Smoothed-kernel samples on a quadrature grid for the cutoff, reduced to
/// what the tail estimator needs.
struct Evolution {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `heads[x][node * n2 + k]`: component `k` of `w chi K(u) x`.
    heads: Vec<Vec<C64>>,
    /// `Re <K(u) x, x>` at each node, unweighted.
    self_density: Vec<Vec<f64>>,
    /// `int chi^2 d mu_x`, extrapolated in eps.
    y_norm2: Vec<f64>,
    bound: f64,
    eps: f64,
    n2: usize,
}

fn cutoff_grid(cutoff: &[Trapezoid], h: f64, order: usize) -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for t in cutoff {
        for w in t.breaks().windows(2) {
            for (u, wt) in composite(w[0], w[1], h, order) {
                let c = t.eval(u);
                if c > 0.0 {
                    grid.push((u, wt, c));
                }
            }
        }
    }
    grid
}

/// `int chi^2 d(P_eps * mu_x)` for each vector.
fn smoothed_mass(
    op: &ColumnDecayOperator,
    xs: &[&DecayVector],
    cutoff: &[Trapezoid],
    eps: f64,
    opts: &MeasureOptions,
) -> Result<Vec<f64>> {
    let grid = cutoff_grid(cutoff, eps * opts.panel_factor, opts.order);
    let terms = par_map(grid.len(), |g| {
        let (u, w, c) = grid[g];
        let samples = smoothed_kernel_multi(op, xs, u, eps, opts)?;
        Ok(samples.iter().zip(xs).map(|(s, x)| w * c * c * s.inner(&x.head(s.vector_value.len())).re).collect::<Vec<f64>>())
    })?;
    Ok((0..xs.len()).map(|i| pairwise_sum(&terms.iter().map(|t| t[i]).collect::<Vec<f64>>())).collect())
}

fn sample_evolution(
    op: &ColumnDecayOperator,
    xs: &[&DecayVector],
    cutoff: &[Trapezoid],
    eps: f64,
    n2: usize,
    opts: &MeasureOptions,
) -> Result<Evolution> {
    let grid = cutoff_grid(cutoff, eps * opts.panel_factor, opts.order);
    let nx = xs.len();
    const CHUNK: usize = 32;
    let chunks = grid.len().div_ceil(CHUNK);
    type Part = (Vec<Vec<C64>>, Vec<Vec<f64>>, f64);
    let parts: Vec<Part> = par_map(chunks, |c| {
        let range = c * CHUNK..((c + 1) * CHUNK).min(grid.len());
        let mut heads = vec![Vec::with_capacity(range.len() * n2); nx];
        let mut dens = vec![Vec::with_capacity(range.len()); nx];
        let mut bound = 0.0;
        for &(u, w, chi) in &grid[range] {
            let samples = smoothed_kernel_multi(op, xs, u, eps, opts)?;
            for (i, s) in samples.iter().enumerate() {
                let v = &s.vector_value;
                let scale = w * chi;
                heads[i].extend((0..n2).map(|k| v.get(k).copied().unwrap_or_default() * scale));
                dens[i].push(s.inner(&xs[i].head(v.len())).re);
                bound += s.bound * scale;
            }
        }
        Ok((heads, dens, bound))
    })?;
    let mut heads = vec![Vec::with_capacity(grid.len() * n2); nx];
    let mut dens = vec![Vec::with_capacity(grid.len()); nx];
    let mut bounds = Vec::with_capacity(parts.len());
    for (h, d, b) in parts {
        for i in 0..nx {
            heads[i].extend_from_slice(&h[i]);
            dens[i].extend_from_slice(&d[i]);
        }
        bounds.push(b);
    }
    // int chi^2 d(P_eps * mu) leaks O(eps) of each atom through the cutoff;
    // one Richardson step against 2 eps removes the leading term.
    let coarse = smoothed_mass(op, xs, cutoff, 2.0 * eps, opts)?;
    let y_norm2 = (0..nx)
        .map(|i| {
            let fine: Vec<f64> = grid.iter().zip(&dens[i]).map(|(g, d)| g.1 * g.2 * g.2 * d).collect();
            2.0 * pairwise_sum(&fine) - coarse[i]
        })
        .collect();
    Ok(Evolution {
        nodes: grid.iter().map(|g| g.0).collect(),
        weights: grid.iter().map(|g| g.1).collect(),
        heads,
        self_density: dens,
        y_norm2,
        bound: pairwise_sum(&bounds),
        eps,
        n2,
    })
}

/// Time averages of `||P_m e^{-iTs} y||^2` for `m = 1..=n2`, per vector.
fn tail_profile(ev: &Evolution, n1: usize, kappa: f64, late_half: bool) -> Vec<Vec<f64>> {
    let nx = ev.heads.len();
    let n2 = ev.n2;
    let total = n1 * n1;
    let first = if late_half { total / 2 + 1 } else { 1 };
    let count = total - first + 1;
    if ev.nodes.is_empty() {
        return vec![vec![0.0; n2]; nx];
    }
    let rows: Vec<Vec<Vec<f64>>> = (first..=total)
        .into_par_iter()
        .map(|j| {
            let s = j as f64 * kappa / n1 as f64;
            let damp = (ev.eps * s).exp();
            let phases: Vec<C64> = ev.nodes.iter().map(|&u| C64::from_polar(damp, -u * s)).collect();
            (0..nx)
                .map(|i| {
                    let h = &ev.heads[i];
                    let mut p = vec![C64::new(0.0, 0.0); n2];
                    for (node, ph) in phases.iter().enumerate() {
                        let row = &h[node * n2..(node + 1) * n2];
                        for (pk, hk) in p.iter_mut().zip(row) {
                            *pk += hk * ph;
                        }
                    }
                    let mut acc = 0.0;
                    p.iter()
                        .map(|c| {
                            acc += c.norm_sqr();
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (0..nx)
        .map(|i| {
            (0..n2)
                .map(|m| {
                    let col: Vec<f64> = rows.iter().map(|r| r[i][m]).collect();
                    pairwise_sum(&col) / count as f64
                })
                .collect()
        })
        .collect()
}

/// Outcome of the tail estimator for one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TailProfile {
    /// `||chi(T) x||^2 = int chi^2 d mu_x`.
    pub y_norm2: f64,
    /// `kept[m - 1]`: time average of `||P_m e^{-iTs} chi(T) x||^2`.
    pub kept: Vec<f64>,
    pub bound: f64,
}

impl TailProfile {
    /// The continuous-part estimate with tail index `m`.
    pub fn continuous(&self, m: usize) -> f64 {
        self.y_norm2 - self.kept[m - 1]
    }
}

fn profiles(ev: &Evolution, n1: usize, ro: &RageOptions, n2: usize) -> Vec<TailProfile> {
    let kept = tail_profile(ev, n1, ro.kappa(n2), ro.late_half);
    kept.into_iter()
        .zip(&ev.y_norm2)
        .map(|(k, &y)| TailProfile { y_norm2: y, kept: k, bound: ev.bound })
        .collect()
}

fn require_self_adjoint(op: &ColumnDecayOperator) -> Result<()> {
    if op.kind != Kind::SelfAdjoint {
        return Err(SpecError::InvalidArgument("spectral decompositions need a self-adjoint operator".into()));
    }
    Ok(())
}

/// Tail profile of `chi_U(T) x` at stages `(n1, n2)`.
pub fn continuous_profile(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    u: &OpenRealSet,
    n1: usize,
    n2: usize,
    ro: &RageOptions,
) -> Result<TailProfile> {
    require_self_adjoint(op)?;
    if n1 == 0 || n2 == 0 {
        return Err(SpecError::InvalidArgument("stage indices must be >= 1".into()));
    }
    let cutoff = open_cutoff(op, u, n2, 1.0 / n1 as f64);
    let ev = sample_evolution(op, &[x], &cutoff, ro.eps(n1, n2), n2, &ro.measure)?;
    Ok(profiles(&ev, n1, ro, n2).remove(0))
}

/// Continuous part `<P_c E_U x, x>` at stages `(n1, n2)`.
pub fn continuous_part(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    u: &OpenRealSet,
    n1: usize,
    n2: usize,
    ro: &RageOptions,
) -> Result<TowerStage> {
    let p = continuous_profile(op, x, u, n1, n2, ro)?;
    let b = 2.0 * p.y_norm2.sqrt() * p.bound + p.bound * p.bound;
    Ok(TowerStage::scalar(TowerKind::MeasureC, vec![n1, n2], p.continuous(n2), b))
}

/// Knobs of the singular-part estimator.
#[derive(Debug, Clone, Copy)]
pub struct SingularOptions {
    /// Boundary values are taken at `Im z = n1^{-eps_power}`.
    pub eps_power: i32,
    /// Initial panels have width `1 / (panel_density * n2)`.
    pub panel_density: f64,
    /// Resolvent tolerance per evaluation.
    pub tol: f64,
    /// Target error of the adaptive quadrature over all panels.
    pub quad_tol: f64,
    pub resolvent: ResolventOptions,
}

impl Default for SingularOptions {
    fn default() -> Self {
        Self { eps_power: 2, panel_density: 8.0, tol: 1e-8, quad_tol: 1e-6, resolvent: ResolventOptions::default() }
    }
}

/// `chi_n`: zero below `n - 1`, one above `n + 1`, affine between.
fn level_cutoff(n: f64, v: f64) -> f64 {
    ((v - (n - 1.0)) / 2.0).clamp(0.0, 1.0)
}

/// The increasing bumps `f_n` under `chi_U`: for each of the first `n`
/// intervals, zero within `1/sqrt(n)` of the boundary, one beyond `2/sqrt(n)`,
/// and cut off at `|t| = n`.
fn bumps(u: &OpenRealSet, n: usize) -> Vec<(Trapezoid, Trapezoid)> {
    let nf = n as f64;
    let r = 1.0 / nf.sqrt();
    let outer = Trapezoid { lo: -nf, hi: nf, dl: 1.0, dr: 1.0 };
    u.intervals()
        .iter()
        .take(n)
        .filter_map(|&(a, b)| {
            let lo = (a + r).max(-nf);
            let hi = (b - r).min(nf);
            let dl = if a + r >= -nf { r } else { 0.0 };
            let dr = if b - r <= nf { r } else { 0.0 };
            (hi > lo).then_some((Trapezoid { lo, hi, dl, dr }, outer))
        })
        .collect()
}

/// Singular part `<P_s E_U x, x>` at stages `(n1, n2)`:
/// `(pi n2 / 2) int f_{n2}(t) chi_{n2}(|F(t)|) dt` with
/// `F(t) = Re <R(t + i n1^{-p}) x, x> / pi`.
pub fn singular_part(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    u: &OpenRealSet,
    n1: usize,
    n2: usize,
    so: &SingularOptions,
) -> Result<TowerStage> {
    require_self_adjoint(op)?;
    if n1 == 0 || n2 == 0 {
        return Err(SpecError::InvalidArgument("stage indices must be >= 1".into()));
    }
    let eps = (n1 as f64).powi(-so.eps_power);
    let level = n2 as f64;
    let (wl, wr) = window(op, n2);
    let h = 1.0 / (so.panel_density * level);
    let mut panels = Vec::new();
    for (f, outer) in bumps(u, n2) {
        let mut br: Vec<f64> = f.breaks().into_iter().chain(outer.breaks()).collect();
        br.push(wl);
        br.push(wr);
        br.retain(|&t| t >= f.lo.max(wl) && t <= f.hi.min(wr));
        br.sort_by(f64::total_cmp);
        br.dedup();
        for w in br.windows(2) {
            let k = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            for j in 0..k {
                let a = w[0] + (w[1] - w[0]) * j as f64 / k as f64;
                let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / k as f64;
                panels.push((a, b, f, outer));
            }
        }
    }
    if panels.is_empty() {
        return Ok(TowerStage::scalar(TowerKind::MeasureS, vec![n1, n2], 0.0, 0.0));
    }
    let tol_each = so.quad_tol / panels.len() as f64;
    let parts = par_map(panels.len(), |p| {
        let (a, b, f, outer) = panels[p];
        let mut failure: Option<SpecError> = None;
        let mut res_bound: f64 = 0.0;
        let (v, e) = adaptive_gk(
            |t| {
                if failure.is_some() {
                    return C64::new(0.0, 0.0);
                }
                let weight = f.eval(t) * outer.eval(t);
                if weight == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                match resolvent_action_adaptive(op, x, C64::new(t, eps), so.tol, &so.resolvent) {
                    Ok(s) => {
                        let xv = x.head(s.coeffs.len());
                        res_bound = res_bound.max(s.bound);
                        let ft = s.inner(&xv).re / PI;
                        C64::new(weight * level_cutoff(level, ft.abs()), 0.0)
                    }
                    Err(err) => {
                        failure = Some(err);
                        C64::new(0.0, 0.0)
                    }
                }
            },
            a,
            b,
            tol_each,
            200,
        );
        match failure {
            Some(err) => Err(err),
            None => Ok((v.re, e)),
        }
    })?;
    let vals: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let errs: Vec<f64> = parts.iter().map(|p| p.1).collect();
    let scale = PI * level / 2.0;
    Ok(TowerStage::scalar(TowerKind::MeasureS, vec![n1, n2], scale * pairwise_sum(&vals), scale * pairwise_sum(&errs)))
}

/// Options for [`measure_decomposition`].
#[derive(Debug, Clone, Copy)]
pub struct DecompositionOptions {
    pub rage: RageOptions,
    pub singular: SingularOptions,
    /// `mu(U)` is taken from the Stone-formula stage `mu_stage_factor * n1`.
    pub mu_stage_factor: usize,
    pub measure: MeasureOptions,
    pub caps: StageCaps,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        Self {
            rage: RageOptions::default(),
            singular: SingularOptions::default(),
            mu_stage_factor: 4,
            measure: MeasureOptions::default().with_tol(1e-8),
            caps: StageCaps::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub pp: TowerStage,
    pub ac: TowerStage,
    pub sc: TowerStage,
    pub mu: f64,
    pub mu_bound: f64,
    pub continuous: TowerStage,
    pub singular: TowerStage,
}

impl Decomposition {
    /// `|pp + ac + sc - mu|`, which the identities make `|s - ... |`-small
    /// only up to the combined bounds.
    pub fn additivity_defect(&self) -> f64 {
        (self.pp.scalar_value() + self.ac.scalar_value() + self.sc.scalar_value() - self.mu).abs()
    }

    pub fn combined_bound(&self) -> f64 {
        self.mu_bound + self.continuous.bound + self.singular.bound
    }
}

/// `(pp, ac, sc)` parts of `mu_x(U)` at stages `(n1, n2)`.
pub fn measure_decomposition(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    u: &OpenRealSet,
    n1: usize,
    n2: usize,
    opts: &DecompositionOptions,
) -> Result<Decomposition> {
    require_self_adjoint(op)?;
    opts.caps.check(n1, n2, None)?;
    let (mu, mu_bound) = measure_of_set(op, x, x, u, opts.mu_stage_factor * n1, &opts.measure)?;
    let mu = mu.re;
    let c = continuous_part(op, x, u, n1, n2, &opts.rage)?;
    let s = singular_part(op, x, u, n1, n2, &opts.singular)?;
    let (cv, sv) = (c.scalar_value(), s.scalar_value());
    let idx = vec![n1, n2];
    Ok(Decomposition {
        pp: TowerStage::scalar(TowerKind::MeasurePp, idx.clone(), mu - cv, mu_bound + c.bound),
        ac: TowerStage::scalar(TowerKind::MeasureAc, idx.clone(), mu - sv, mu_bound + s.bound),
        sc: TowerStage::scalar(TowerKind::MeasureSc, idx, sv - mu + cv, mu_bound + c.bound + s.bound),
        mu,
        mu_bound,
        continuous: c,
        singular: s,
    })
}

/// A node of an [`IntervalTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub interval: (f64, f64),
    /// Unit intervals have depth 0; each bisection adds one.
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub decision: bool,
    /// The quantity the decision was based on.
    pub score: f64,
}

/// Bisection tree over `[-w, w]`: the unit intervals `[j, j+1]` hang off the
/// root, and each interval with a positive decision is bisected until
/// `max_depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTree {
    pub root: (f64, f64),
    pub max_depth: usize,
    pub nodes: Vec<TreeNode>,
}

impl IntervalTree {
    /// Builds the tree level by level; decisions within a level run in parallel.
    pub fn build<F>(half_width: usize, max_depth: usize, decide: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<(bool, f64)> + Sync,
    {
        let w = half_width as i64;
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut level: Vec<(f64, f64, Option<usize>)> = (-w..w).map(|j| (j as f64, (j + 1) as f64, None)).collect();
        let mut depth = 0;
        while !level.is_empty() {
            let decisions = par_map(level.len(), |k| decide(level[k].0, level[k].1))?;
            let mut next = Vec::new();
            for ((a, b, parent), (d, score)) in level.into_iter().zip(decisions) {
                let id = nodes.len();
                nodes.push(TreeNode { interval: (a, b), depth, parent, children: Vec::new(), decision: d, score });
                if let Some(p) = parent {
                    nodes[p].children.push(id);
                }
                if d && depth < max_depth {
                    let m = 0.5 * (a + b);
                    next.push((a, m, Some(id)));
                    next.push((m, b, Some(id)));
                }
            }
            level = next;
            depth += 1;
        }
        Ok(Self { root: (-(w as f64), w as f64), max_depth, nodes })
    }

    /// Leaves after discarding the leaves with a zero decision: positive
    /// nodes none of whose children are positive.
    pub fn retained_leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                n.decision && n.children.iter().all(|&c| !self.nodes[c].decision)
            })
            .collect()
    }

    /// Union of the retained leaves, with touching intervals merged.
    pub fn union(&self) -> Vec<(f64, f64)> {
        let mut iv: Vec<(f64, f64)> = self.retained_leaves().iter().map(|&i| self.nodes[i].interval).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    /// Every retained leaf and all of its ancestors tested positive, and
    /// only positive nodes were bisected.
    pub fn is_sound(&self) -> bool {
        let chains = self.retained_leaves().into_iter().all(|mut i| loop {
            if !self.nodes[i].decision {
                break false;
            }
            match self.nodes[i].parent {
                Some(p) => i = p,
                None => break true,
            }
        });
        let bisections = self.nodes.iter().all(|n| n.children.is_empty() || (n.decision && n.children.len() == 2));
        chains && self.nodes.iter().all(|n| n.depth <= self.max_depth) && bisections
    }
}

/// The two-interval decision trick: walk `k = n1, n1 - 1, ...` and answer
/// with the first value that lands in `[0, 1/m]` (no) or `[2/m, inf)` (yes).
/// If none does within `max_backtrack` steps, the answer is no.
pub fn gadget_decision<F>(n1: usize, m: f64, max_backtrack: usize, mut upsilon: F) -> Result<(bool, f64)>
where
    F: FnMut(usize) -> Result<f64>,
{
    let stop = n1.saturating_sub(max_backtrack.max(1) - 1).max(1);
    let mut last = 0.0;
    for k in (stop..=n1).rev() {
        let v = upsilon(k)?;
        last = v;
        if v >= 2.0 / m {
            return Ok((true, v));
        }
        if v <= 1.0 / m {
            return Ok((false, v));
        }
    }
    Ok((false, last))
}

/// Options for the spectral-set stages.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub rage: RageOptions,
    /// Smoothing options for the a.c. density decision.
    pub measure: MeasureOptions,
    /// How many stages below `n1` the decision trick may look at.
    pub max_backtrack: usize,
    pub caps: StageCaps,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            rage: RageOptions { eps_factor: 20.0, ..RageOptions::default() },
            measure: MeasureOptions::default().with_tol(1e-8),
            max_backtrack: 8,
            caps: StageCaps::default(),
        }
    }
}

fn basis_vectors(count: usize) -> Vec<DecayVector> {
    (1..=count).map(DecayVector::basis).collect()
}

/// `max_{j <= n2} avg ||P_{n2} e^{-iTs} chi(T) e_j||^2` for a closed interval
/// at stage `k`: the pp mass of `[a, b]` seen through the first `n2` sites.
fn pp_upsilon(
    op: &ColumnDecayOperator,
    xs: &[DecayVector],
    a: f64,
    b: f64,
    k: usize,
    n2: usize,
    ro: &RageOptions,
) -> Result<f64> {
    // Shoulders narrower than the interval keep atoms of neighbouring leaves
    // out, and eps well below the shoulder keeps endpoint atoms whole.
    let delta = (1.0 / k as f64).min(0.25 * (b - a));
    let cutoff = closed_cutoff(op, a, b, n2, delta);
    if cutoff.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<&DecayVector> = xs.iter().collect();
    let ev = sample_evolution(op, &refs, &cutoff, ro.eps(k, n2).min(delta / 16.0), n2, &ro.measure)?;
    let prof = profiles(&ev, k, ro, n2);
    Ok(prof.iter().map(|p| p.kept[n2 - 1]).fold(0.0, f64::max))
}

/// `sigma_pp` at stages `(n1, n2)`: the union of retained leaves of the
/// bisection tree over `[-n2, n2]` with depth `n2`.
pub fn pp_spectrum_stage(op: &ColumnDecayOperator, n1: usize, n2: usize, opts: &SpectrumOptions) -> Result<(TowerStage, IntervalTree)> {
    require_self_adjoint(op)?;
    opts.caps.check(n1, n2, None)?;
    let xs = basis_vectors(n2);
    let tree = IntervalTree::build(n2, n2, |a, b| {
        gadget_decision(n1, n2 as f64, opts.max_backtrack, |k| pp_upsilon(op, &xs, a, b, k, n2, &opts.rage))
    })?;
    let stage = TowerStage { indices: vec![n1, n2], value: StageValue::Intervals(tree.union()), kind: TowerKind::SetPp, bound: 0.0 };
    Ok((stage, tree))
}

/// `chi_n` of the a.c. decision: one up to `n`, zero from `n + 1`.
fn density_cutoff(n: f64, v: f64) -> f64 {
    (n + 1.0 - v).clamp(0.0, 1.0)
}

/// Diagonal smoothed densities `Re <K(u + i eps) e_j, e_j>` on a composite
/// grid over `[a, b]` clipped to the window; returns nodes' weights and values.
fn diagonal_densities(
    op: &ColumnDecayOperator,
    xs: &[DecayVector],
    a: f64,
    b: f64,
    eps: f64,
    window_n: usize,
    opts: &MeasureOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (wl, wr) = window(op, window_n);
    let (lo, hi) = (a.max(wl), b.min(wr));
    let grid = composite(lo, hi, eps * opts.panel_factor, opts.order);
    let refs: Vec<&DecayVector> = xs.iter().collect();
    let vals = par_map(grid.len(), |g| {
        let s = smoothed_kernel_multi(op, &refs, grid[g].0, eps, opts)?;
        Ok(s.iter().enumerate().map(|(j, smp)| smp.vector_value.get(j).map_or(0.0, |c| c.re)).collect::<Vec<f64>>())
    })?;
    let w = grid.iter().map(|g| g.1).collect();
    let per_x = (0..xs.len()).map(|j| vals.iter().map(|v| v[j]).collect()).collect();
    Ok((w, per_x))
}

fn clipped_mass(weights: &[f64], dens: &[f64], n: f64) -> f64 {
    let terms: Vec<f64> = weights.iter().zip(dens).map(|(w, v)| w * v * density_cutoff(n, v.abs())).collect();
    pairwise_sum(&terms)
}

/// `sigma_ac` at stages `(n1, n2)`, deciding each interval by the clipped
/// integral of the smoothed diagonal densities at `eps = 1/n1`.
pub fn ac_spectrum_stage(op: &ColumnDecayOperator, n1: usize, n2: usize, opts: &SpectrumOptions) -> Result<(TowerStage, IntervalTree)> {
    require_self_adjoint(op)?;
    opts.caps.check(n1, n2, None)?;
    let xs = basis_vectors(n2);
    let tree = IntervalTree::build(n2, n2, |a, b| {
        gadget_decision(n1, n2 as f64, opts.max_backtrack, |k| {
            let (w, dens) = diagonal_densities(op, &xs, a, b, 1.0 / k as f64, n2, &opts.measure)?;
            Ok(dens.iter().map(|d| clipped_mass(&w, d, n2 as f64)).fold(0.0, f64::max))
        })
    })?;
    let stage = TowerStage { indices: vec![n1, n2], value: StageValue::Intervals(tree.union()), kind: TowerKind::SetAc, bound: 0.0 };
    Ok((stage, tree))
}

/// Per-interval data of the sc decision at one stage `k`: for each `e_j`,
/// `j <= n3`, and tail/clip index `n <= n2`, the estimate of the sc mass.
fn sc_table(
    op: &ColumnDecayOperator,
    xs: &[DecayVector],
    a: f64,
    b: f64,
    k: usize,
    n2: usize,
    ro: &RageOptions,
) -> Result<Vec<Vec<f64>>> {
    let cutoff = closed_cutoff(op, a, b, n2, 1.0 / k as f64);
    if cutoff.is_empty() {
        return Ok(vec![vec![0.0; n2]; xs.len()]);
    }
    let refs: Vec<&DecayVector> = xs.iter().collect();
    let ev = sample_evolution(op, &refs, &cutoff, ro.eps(k, n2), n2, &ro.measure)?;
    let prof = profiles(&ev, k, ro, n2);
    // The a.c. part uses the same samples, restricted to the plateau [a, b].
    let inside: Vec<usize> = (0..ev.nodes.len()).filter(|&i| ev.nodes[i] >= a && ev.nodes[i] <= b).collect();
    let w: Vec<f64> = inside.iter().map(|&i| ev.weights[i]).collect();
    Ok((0..xs.len())
        .map(|j| {
            let d: Vec<f64> = inside.iter().map(|&i| ev.self_density[j][i]).collect();
            (1..=n2).map(|n| prof[j].continuous(n) - clipped_mass(&w, &d, n as f64)).collect()
        })
        .collect())
}

/// `sigma_sc` at stages `(n1, n2, n3)`: tree over `[-n3, n3]` with depth
/// `n3`, deciding each interval by `max_{m <= n3} min_{n <= n2}` of the
/// two-interval trick applied to `min_{n' <= n} max_{j <= m}` sc masses.
pub fn sc_spectrum_stage(
    op: &ColumnDecayOperator,
    n1: usize,
    n2: usize,
    n3: usize,
    opts: &SpectrumOptions,
) -> Result<(TowerStage, IntervalTree)> {
    require_self_adjoint(op)?;
    opts.caps.check(n1, n2, Some(n3))?;
    let xs = basis_vectors(n3);
    let tree = IntervalTree::build(n3, n3, |a, b| {
        let mut cache: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
        let mut upsilon = |m: usize, n: usize, k: usize| -> Result<f64> {
            if !cache.contains_key(&k) {
                cache.insert(k, sc_table(op, &xs, a, b, k, n2, &opts.rage)?);
            }
            let t = &cache[&k];
            Ok((1..=n)
                .map(|np| (0..m).map(|j| t[j][np - 1]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min))
        };
        let mut best = (false, 0.0);
        for m in 1..=n3 {
            let mut all = true;
            let mut score = f64::INFINITY;
            for n in 1..=n2 {
                let (d, v) = gadget_decision(n1, m as f64, opts.max_backtrack, |k| upsilon(m, n, k))?;
                score = score.min(v);
                if !d {
                    all = false;
                    break;
                }
            }
            if all {
                best = (true, score);
                break;
            }
            best.1 = f64::max(best.1, score);
        }
        Ok(best)
    })?;
    let stage = TowerStage { indices: vec![n1, n2, n3], value: StageValue::Intervals(tree.union()), kind: TowerKind::SetSc, bound: 0.0 };
    Ok((stage, tree))
}
