//! Poisson-smoothed spectral measures, Stone-formula projections and atoms.
//!
//! Half-plane kernel for self-adjoint operators:
//! `K_H(u + i eps) x = (R(u + i eps) - R(u - i eps)) x / (2 pi i)`, whose
//! inner product with `x` is the Poisson convolution `P_H(., eps) * mu_x`.
//!
//! Disk kernel for unitary operators, evaluated at `z = r e^{i theta}` with
//! `r = 1/(1+eps)` and its reflection `w = 1/conj(z)`:
//! `(z R(z) - w R(w)) x / (2 pi)`, which equals `int P_D(r, theta - psi) dE(psi) x`.

use std::f64::consts::PI;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, DecayVector, Kind};
use crate::quadrature::{composite, par_map, par_vector_sum};
use crate::resolvent::{resolvent_adaptive_multi, ResolventOptions};
use crate::sets::OpenRealSet;
use crate::C64;

/// Half-plane Poisson kernel `y / (pi (x^2 + y^2))`.
pub fn poisson_h(x: f64, y: f64) -> f64 {
    y / (PI * (x * x + y * y))
}

/// Disk Poisson kernel `(1 - r^2) / (2 pi (1 - 2 r cos theta + r^2))`.
pub fn poisson_d(r: f64, theta: f64) -> f64 {
    (1.0 - r * r) / (2.0 * PI * (1.0 - 2.0 * r * theta.cos() + r * r))
}

/// `int_a^b P_H(u - lambda, eps) du`.
pub fn poisson_h_mass(a: f64, b: f64, lambda: f64, eps: f64) -> f64 {
    (((b - lambda) / eps).atan() - ((a - lambda) / eps).atan()) / PI
}

/// Radius used for disk smoothing at distance parameter `eps`.
pub fn disk_radius(eps: f64) -> f64 {
    1.0 / (1.0 + eps)
}

#[derive(Debug, Clone)]
pub struct SmoothedMeasureSample {
    /// `u` for self-adjoint operators, `theta` for unitary ones.
    pub point: f64,
    pub epsilon: f64,
    pub vector_value: Vec<C64>,
    pub bound: f64,
}

impl SmoothedMeasureSample {
    /// `<vector_value, y>` for a finite `y`.
    pub fn inner(&self, y: &[C64]) -> C64 {
        self.vector_value.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Shared knobs for smoothed-measure quadrature.
#[derive(Debug, Clone, Copy)]
pub struct MeasureOptions {
    /// Resolvent tolerance per solve.
    pub tol: f64,
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Panel width as a multiple of eps.
    pub panel_factor: f64,
    pub resolvent: ResolventOptions,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self { tol: 1e-10, order: 8, panel_factor: 1.0, resolvent: ResolventOptions::default() }
    }
}

impl MeasureOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() - b.get(i).copied().unwrap_or_default())
        .collect()
}

/// Smoothed kernels for several vectors at one point, sharing factorizations.
pub fn smoothed_kernel_multi(
    op: &ColumnDecayOperator,
    xs: &[&DecayVector],
    point: f64,
    eps: f64,
    opts: &MeasureOptions,
) -> Result<Vec<SmoothedMeasureSample>> {
    if !(eps > 0.0) {
        return Err(SpecError::InvalidArgument("eps must be positive".into()));
    }
    let tol = opts.tol;
    let ro = &opts.resolvent;
    match op.kind {
        Kind::SelfAdjoint => {
            let z = C64::new(point, eps);
            let all_real = op.real_entries && xs.iter().all(|x| x.support.map_or(false, |s| x.is_real(s)));
            let up = resolvent_adaptive_multi(op, xs, z, tol, ro)?;
            let down = if all_real {
                None
            } else {
                Some(resolvent_adaptive_multi(op, xs, z.conj(), tol, ro)?)
            };
            let scale = C64::new(0.0, -1.0 / (2.0 * PI));
            Ok(up
                .into_iter()
                .enumerate()
                .map(|(k, s)| {
                    let (vec, b2) = match &down {
                        Some(d) => (sub(&s.coeffs, &d[k].coeffs), d[k].bound),
                        None => (s.coeffs.iter().map(|c| C64::new(0.0, 2.0 * c.im)).collect(), s.bound),
                    };
                    SmoothedMeasureSample {
                        point,
                        epsilon: eps,
                        vector_value: vec.into_iter().map(|c| c * scale).collect(),
                        bound: (s.bound + b2) / (2.0 * PI),
                    }
                })
                .collect())
        }
        Kind::Unitary => {
            let r = disk_radius(eps);
            let e = C64::from_polar(1.0, point);
            let z = e * r;
            let w = e / r;
            let inside = resolvent_adaptive_multi(op, xs, z, tol, ro)?;
            let outside = resolvent_adaptive_multi(op, xs, w, tol, ro)?;
            Ok(inside
                .into_iter()
                .zip(outside)
                .map(|(a, b)| {
                    let za: Vec<C64> = a.coeffs.iter().map(|c| c * z).collect();
                    let wb: Vec<C64> = b.coeffs.iter().map(|c| c * w).collect();
                    SmoothedMeasureSample {
                        point,
                        epsilon: eps,
                        vector_value: sub(&za, &wb).into_iter().map(|c| c / (2.0 * PI)).collect(),
                        bound: (r * a.bound + b.bound / r) / (2.0 * PI),
                    }
                })
                .collect())
        }
    }
}

pub fn smoothed_kernel(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    point: f64,
    eps: f64,
    opts: &MeasureOptions,
) -> Result<SmoothedMeasureSample> {
    Ok(smoothed_kernel_multi(op, &[x], point, eps, opts)?.remove(0))
}

/// `<K(point) x, y>` with its bound (times `||y||`).
pub fn smoothed_density(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    y: &DecayVector,
    point: f64,
    eps: f64,
    opts: &MeasureOptions,
) -> Result<(C64, f64)> {
    let s = smoothed_kernel(op, x, point, eps, opts)?;
    let yv = y.head(s.vector_value.len());
    let ynorm = y.norm_estimate();
    Ok((s.inner(&yv), s.bound * ynorm + s.vector_value.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * y.tail_bound(yv.len())))
}

fn clip_limit(op: &ColumnDecayOperator, n: usize) -> f64 {
    match op.bounded_hint {
        Some((lo, hi)) => lo.abs().max(hi.abs()) + 1.0,
        None => n as f64,
    }
}

/// The quadrature intervals of stage `n`: the first `n` intervals shrunk
/// by `1/n` and clipped to a window containing the relevant spectrum.
pub fn stage_intervals(op: &ColumnDecayOperator, u: &OpenRealSet, n: usize) -> Vec<(f64, f64)> {
    let s = 1.0 / n as f64;
    if u.circle || op.kind == Kind::Unitary {
        u.shrunk(n, s, 4.0 * PI)
    } else {
        u.shrunk(n, s, clip_limit(op, n))
    }
}

/// Stone-formula approximation of `E_U x` at stage `n` (`eps = 1/n`).
pub fn spectral_projection(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    u: &OpenRealSet,
    n: usize,
    opts: &MeasureOptions,
) -> Result<(Vec<C64>, f64)> {
    if n == 0 {
        return Err(SpecError::InvalidArgument("stage n must be >= 1".into()));
    }
    let eps = 1.0 / n as f64;
    projection_at(op, x, &stage_intervals(op, u, n), eps, opts)
}

/// Quadrature of the smoothed kernel over explicit intervals at a given eps.
pub fn projection_at(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    intervals: &[(f64, f64)],
    eps: f64,
    opts: &MeasureOptions,
) -> Result<(Vec<C64>, f64)> {
    let mut nodes = Vec::new();
    for &(a, b) in intervals {
        nodes.extend(composite(a, b, eps * opts.panel_factor, opts.order));
    }
    par_vector_sum(nodes.len(), |k| {
        let (t, w) = nodes[k];
        let s = smoothed_kernel(op, x, t, eps, opts)?;
        Ok((s.vector_value.into_iter().map(|c| c * w).collect(), s.bound * w))
    })
}

/// `mu_{x,y}(U)` at stage `n`, with a bound.
pub fn measure_of_set(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    y: &DecayVector,
    u: &OpenRealSet,
    n: usize,
    opts: &MeasureOptions,
) -> Result<(C64, f64)> {
    let (v, b) = spectral_projection(op, x, u, n, opts)?;
    let yv = y.head(v.len());
    let val: C64 = v.iter().zip(&yv).map(|(a, c)| a * c.conj()).sum();
    Ok((val, b * y.norm_estimate()))
}

/// Weight of the spectral measure of `x` at a point (self-adjoint) or angle
/// (unitary), from the smoothed kernel at distance `eps`.
pub fn atom_weight(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    point: f64,
    eps: f64,
    opts: &MeasureOptions,
) -> Result<f64> {
    let s = smoothed_kernel(op, x, point, eps, opts)?;
    let xv = x.head(s.vector_value.len());
    let v = s.inner(&xv).re;
    Ok(match op.kind {
        // eps * pi * P_H(0, eps) = 1.
        Kind::SelfAdjoint => eps * PI * v,
        // Divide by P_D(r, 0) so that an isolated unit atom gives exactly 1.
        Kind::Unitary => {
            let r = disk_radius(eps);
            v / poisson_d(r, 0.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: f64,
    pub weight: f64,
}

/// Scans `[a, b]` on a grid of spacing `h` for spikes of the smoothed
/// density, refines each local maximum and keeps those whose weight at `eps`
/// exceeds `10 eps` times the local density estimate.
pub fn detect_atoms(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    a: f64,
    b: f64,
    h: f64,
    eps: f64,
    opts: &MeasureOptions,
) -> Result<Vec<Atom>> {
    let count = ((b - a) / h).ceil() as usize + 1;
    let dens = |t: f64, e: f64| -> Result<f64> {
        let s = smoothed_kernel(op, x, t, e, opts)?;
        let xv = x.head(s.vector_value.len());
        Ok(s.inner(&xv).re)
    };
    let grid: Vec<f64> = (0..count).map(|k| a + k as f64 * h).collect();
    let vals = par_map(count, |k| dens(grid[k], h))?;
    let mut atoms = Vec::new();
    for k in 0..count {
        let left = if k > 0 { vals[k - 1] } else { f64::NEG_INFINITY };
        let right = if k + 1 < count { vals[k + 1] } else { f64::NEG_INFINITY };
        if !(vals[k] >= left && vals[k] > right) {
            continue;
        }
        // Golden-section refinement of the peak at the fine eps.
        let (mut lo, mut hi) = (grid[k] - h, grid[k] + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let mut fc = dens(c, eps)?;
        let mut fd = dens(d, eps)?;
        while hi - lo > eps.max(1e-14 * grid[k].abs().max(1.0)) {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = dens(c, eps)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = dens(d, eps)?;
            }
        }
        let mut p = 0.5 * (lo + hi);
        // Near an isolated atom 1/density is a parabola in t with its vertex
        // at the atom; two vertex steps pin it well inside eps.
        for _ in 0..2 {
            let (fl, f0, fr) = (dens(p - eps, eps)?, dens(p, eps)?, dens(p + eps, eps)?);
            if !(fl > 0.0 && f0 > 0.0 && fr > 0.0) {
                break;
            }
            let (gl, g0, gr) = (1.0 / fl, 1.0 / f0, 1.0 / fr);
            let curv = gl - 2.0 * g0 + gr;
            if !(curv > 0.0) {
                break;
            }
            let step = 0.5 * eps * (gl - gr) / curv;
            if step.abs() > eps {
                break;
            }
            p += step;
        }
        let weight = atom_weight(op, x, p, eps, opts)?;
        let delta = (50.0 * eps).max(4.0 * h);
        let local = 0.5 * (dens(p - delta, h)?.max(0.0) + dens(p + delta, h)?.max(0.0));
        if weight > 10.0 * eps * local && weight > opts.tol.sqrt() {
            atoms.push(Atom { point: p, weight });
        }
    }
    Ok(atoms)
}

/// Richardson table of depth `order` from samples at `eps / 2^k`.
///
/// `values[k] = (eps_k, v_k)`; step `j` eliminates the `eps^j` term:
/// `R_{k,j} = (2^j R_{k+1,j-1} - R_{k,j-1}) / (2^j - 1)`.
pub fn richardson(values: &[(f64, f64)], order: usize) -> Result<f64> {
    let v: Vec<C64> = values.iter().map(|&(_, v)| C64::new(v, 0.0)).collect();
    let eps: Vec<f64> = values.iter().map(|&(e, _)| e).collect();
    Ok(richardson_complex(&eps, &v, order)?.re)
}

pub fn richardson_complex(eps: &[f64], values: &[C64], order: usize) -> Result<C64> {
    if values.len() < order + 1 || eps.len() != values.len() {
        return Err(SpecError::InvalidArgument(format!(
            "richardson of order {order} needs {} samples, got {}",
            order + 1,
            values.len()
        )));
    }
    for k in 1..=order {
        let want = eps[0] / 2f64.powi(k as i32);
        if (eps[k] - want).abs() > 1e-9 * want {
            return Err(SpecError::InvalidArgument(format!(
                "eps ladder must halve: eps[{k}] = {} but expected {want}",
                eps[k]
            )));
        }
    }
    let mut row: Vec<C64> = values[..=order].to_vec();
    for j in 1..=order {
        let p = 2f64.powi(j as i32);
        for k in 0..(row.len() - 1) {
            row[k] = (row[k + 1] * p - row[k]) / (p - 1.0);
        }
        row.pop();
    }
    Ok(row[0])
}
