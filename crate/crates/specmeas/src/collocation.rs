//! Global collocation for a density on a known support.
//!
//! The density is expanded as `rho = sum_m a_m phi_m` and matched through
//! Cauchy transforms `phi^_m(z) = int phi_m(l) / (l - z) dl` (with
//! `l = e^{i theta}` on the circle) against `<R(z) x, y>` at points off the
//! support. Transforms follow the basis recurrence
//! `phi_{m+1} = (alpha_m l + beta_m) phi_m + gamma_m phi_{m-1}`, which gives
//! `phi^_{m+1} = alpha_m (I_m + z phi^_m) + beta_m phi^_m + gamma_m phi^_{m-1}`
//! with `I_m` the integral of `phi_m`.

use std::f64::consts::PI;

use crate::error::{Result, SpecError};
use crate::linalg::{dense_least_squares, DenseMatrix};
use crate::operator::{ColumnDecayOperator, DecayVector, Kind};
use crate::quadrature::{adaptive_gk, par_map};
use crate::resolvent::{resolvent_action_adaptive, ResolventOptions};
use crate::special::exp_integral_e1;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisFamily {
    /// `phi_m = T_{m-1}` on `[-1, 1]`.
    Chebyshev,
    /// `phi_m = L_{m-1}(l) e^{-l/2}` on `[0, inf)`.
    LaguerreFunction,
    /// `phi_m = e^{i k theta}` with `k = m_min + m - 1`, on the circle.
    Fourier { m_min: i64 },
}

impl BasisFamily {
    /// Fourier modes `-(count/2) ..` so that `count` odd is symmetric.
    pub fn fourier_centered(count: usize) -> Self {
        BasisFamily::Fourier { m_min: -((count / 2) as i64) }
    }

    fn mode(&self, m: usize) -> i64 {
        match self {
            BasisFamily::Fourier { m_min } => m_min + m as i64 - 1,
            _ => m as i64 - 1,
        }
    }

    /// `(alpha_m, beta_m, gamma_m)` for `m >= 1`.
    pub fn recurrence(&self, m: usize) -> (f64, f64, f64) {
        match self {
            BasisFamily::Chebyshev => {
                if m == 1 {
                    (1.0, 0.0, 0.0)
                } else {
                    (2.0, 0.0, -1.0)
                }
            }
            BasisFamily::LaguerreFunction => {
                let k = (m - 1) as f64;
                (-1.0 / (k + 1.0), (2.0 * k + 1.0) / (k + 1.0), -k / (k + 1.0))
            }
            BasisFamily::Fourier { .. } => (1.0, 0.0, 0.0),
        }
    }

    /// `int phi_m` over the support (in `theta` for the circle).
    pub fn mass(&self, m: usize) -> f64 {
        match self {
            BasisFamily::Chebyshev => {
                let k = m - 1;
                if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (1.0 - (k * k) as f64)
                }
            }
            BasisFamily::LaguerreFunction => {
                if (m - 1) % 2 == 0 {
                    2.0
                } else {
                    -2.0
                }
            }
            BasisFamily::Fourier { .. } => {
                if self.mode(m) == 0 {
                    2.0 * PI
                } else {
                    0.0
                }
            }
        }
    }

    pub fn on_support(&self, z: C64) -> bool {
        match self {
            BasisFamily::Chebyshev => z.im == 0.0 && z.re.abs() <= 1.0,
            BasisFamily::LaguerreFunction => z.im == 0.0 && z.re >= 0.0,
            BasisFamily::Fourier { .. } => (z.norm() - 1.0).abs() < 1e-14,
        }
    }

    /// Closed form of `phi^_1(z)`.
    pub fn seed(&self, z: C64) -> C64 {
        match self {
            BasisFamily::Chebyshev => ((z - 1.0) / (z + 1.0)).ln(),
            BasisFamily::LaguerreFunction => (-z / 2.0).exp() * exp_integral_e1(-z / 2.0),
            BasisFamily::Fourier { .. } => fourier_transform(self.mode(1), z),
        }
    }

    /// `phi_1, ..., phi_count` at a point of the support (an angle for the circle).
    pub fn eval(&self, count: usize, t: f64) -> Vec<C64> {
        let lam = match self {
            BasisFamily::Fourier { .. } => C64::from_polar(1.0, t),
            _ => C64::new(t, 0.0),
        };
        let first = match self {
            BasisFamily::Chebyshev => C64::new(1.0, 0.0),
            BasisFamily::LaguerreFunction => C64::new((-t / 2.0).exp(), 0.0),
            BasisFamily::Fourier { .. } => C64::from_polar(1.0, self.mode(1) as f64 * t),
        };
        let mut out = Vec::with_capacity(count);
        let mut prev = C64::new(0.0, 0.0);
        let mut cur = first;
        for m in 1..=count {
            out.push(cur);
            let (a, b, g) = self.recurrence(m);
            let next = (lam * a + b) * cur + prev * g;
            prev = cur;
            cur = next;
        }
        out
    }
}

/// `int_{-pi}^{pi} e^{i k theta} / (e^{i theta} - z) dtheta` by residues.
pub fn fourier_transform(k: i64, z: C64) -> C64 {
    let inside = z.norm() < 1.0;
    match (inside, k >= 1) {
        (true, true) => z.powi((k - 1) as i32) * (2.0 * PI),
        (false, false) => -z.powi((k - 1) as i32) * (2.0 * PI),
        _ => C64::new(0.0, 0.0),
    }
}

/// `phi^_1(z), ..., phi^_count(z)` by the forward recurrence.
pub fn cauchy_transforms(basis: &BasisFamily, z: C64, count: usize) -> Result<Vec<C64>> {
    if basis.on_support(z) {
        return Err(SpecError::InvalidArgument(format!("z = {z} lies on the basis support")));
    }
    let mut out = Vec::with_capacity(count);
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = basis.seed(z);
    for m in 1..=count {
        out.push(cur);
        let (a, b, g) = basis.recurrence(m);
        let next = (z * cur + basis.mass(m)) * a + cur * b + prev * g;
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// Direct quadrature of `phi^_m(z)`, used as a drift check on the recurrence.
pub fn cauchy_transform_quadrature(basis: &BasisFamily, z: C64, m: usize) -> C64 {
    let f = |t: f64| {
        let phi = basis.eval(m, t)[m - 1];
        match basis {
            BasisFamily::Fourier { .. } => phi / (C64::from_polar(1.0, t) - z),
            _ => phi / (C64::new(t, 0.0) - z),
        }
    };
    match basis {
        BasisFamily::Chebyshev => {
            // t = cos(s) removes the endpoint behaviour of T_k.
            adaptive_gk(|s: f64| f(s.cos()) * s.sin(), 0.0, PI, 1e-13, 20_000).0
        }
        BasisFamily::LaguerreFunction => {
            let hi = 80.0 + 4.0 * m as f64;
            adaptive_gk(f, 0.0, hi, 1e-13, 40_000).0
        }
        BasisFamily::Fourier { .. } => adaptive_gk(f, -PI, PI, 1e-13, 20_000).0,
    }
}

/// Default collocation points for `count` functions at distance `eps`.
pub fn default_points(basis: &BasisFamily, count: usize, eps: f64) -> Vec<C64> {
    match basis {
        BasisFamily::Chebyshev => (0..count)
            .map(|j| C64::new((PI * (j as f64 + 0.5) / count as f64).cos(), eps))
            .collect(),
        BasisFamily::LaguerreFunction => {
            (1..=count).map(|k| C64::new((k as f64 / count as f64).powi(2), eps)).collect()
        }
        BasisFamily::Fourier { .. } => {
            let mut pts = Vec::with_capacity(2 * count);
            for k in 1..=count {
                let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / count as f64);
                pts.push(e * (1.0 - eps));
                pts.push(e * (1.0 + eps));
            }
            pts
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollocationResult {
    pub coeffs: Vec<C64>,
    /// `||A a - b||` of the stacked system.
    pub residual: f64,
    pub condition_estimate: f64,
    pub rank: usize,
    /// `|recurrence - quadrature|` for `phi^_{M/4}` at the first point.
    pub drift: f64,
}

impl CollocationResult {
    /// Whether the forward recurrence drifted beyond `1e-6` at the check index.
    pub fn drift_warning(&self) -> bool {
        self.drift > 1e-6
    }
}

/// Solves `sum_m a_m phi^_m(z_k) = b(z_k)` in the least-squares sense.
///
/// With `real` set, coefficients are constrained to be real by stacking the
/// real and imaginary parts of each equation.
pub fn solve_collocation(
    basis: &BasisFamily,
    count: usize,
    points: &[C64],
    rhs: &[C64],
    real: bool,
) -> Result<CollocationResult> {
    if rhs.len() != points.len() {
        return Err(SpecError::InvalidArgument("one right-hand side per point".into()));
    }
    let rows: Vec<Vec<C64>> = points.iter().map(|&z| cauchy_transforms(basis, z, count)).collect::<Result<_>>()?;
    let (a, b) = if real {
        let m = 2 * points.len();
        let a = DenseMatrix::from_fn(m, count, |i, j| {
            let v = rows[i / 2][j];
            C64::new(if i % 2 == 0 { v.re } else { v.im }, 0.0)
        });
        let b: Vec<C64> = (0..m)
            .map(|i| C64::new(if i % 2 == 0 { rhs[i / 2].re } else { rhs[i / 2].im }, 0.0))
            .collect();
        (a, b)
    } else {
        (DenseMatrix::from_fn(points.len(), count, |i, j| rows[i][j]), rhs.to_vec())
    };
    if a.rows < count {
        return Err(SpecError::InvalidArgument(format!("{} equations for {count} unknowns", a.rows)));
    }
    let lsq = dense_least_squares(&a, &b, 1e-14)?;
    let check = (count / 4).max(1);
    let drift = (rows[0][check - 1] - cauchy_transform_quadrature(basis, points[0], check)).norm();
    Ok(CollocationResult {
        coeffs: lsq.x,
        residual: lsq.residual,
        condition_estimate: lsq.condition_estimate,
        rank: lsq.rank,
        drift,
    })
}

/// `<R(z) x, x>` minus the Cauchy transforms of known atoms.
pub fn resolvent_rhs(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    points: &[C64],
    atoms: &[(f64, f64)],
    tol: f64,
) -> Result<Vec<C64>> {
    let ro = ResolventOptions::default();
    par_map(points.len(), |k| {
        let z = points[k];
        let s = resolvent_action_adaptive(op, x, z, tol, &ro)?;
        let xv = x.head(s.coeffs.len());
        let mut v = s.inner(&xv);
        for &(p, w) in atoms {
            let l = match op.kind {
                Kind::SelfAdjoint => C64::new(p, 0.0),
                Kind::Unitary => C64::from_polar(1.0, p),
            };
            v -= w / (l - z);
        }
        Ok(v)
    })
}

/// Collocation for the density of `mu_x`, optionally after subtracting atoms.
pub fn collocate(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    basis: &BasisFamily,
    count: usize,
    points: &[C64],
    atoms: &[(f64, f64)],
    tol: f64,
) -> Result<CollocationResult> {
    let rhs = resolvent_rhs(op, x, points, atoms, tol)?;
    let real = !matches!(basis, BasisFamily::Fourier { .. });
    solve_collocation(basis, count, points, &rhs, real)
}

/// `sum_m a_m phi_m` on a grid (angles for the circle).
pub fn reconstruct(basis: &BasisFamily, coeffs: &[C64], grid: &[f64]) -> Vec<C64> {
    grid.iter()
        .map(|&t| basis.eval(coeffs.len(), t).iter().zip(coeffs).map(|(p, a)| p * a).sum())
        .collect()
}
