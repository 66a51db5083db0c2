use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, Dispersion, Kind, RowStart};
use crate::C64;

use super::{GalleryOperator, ReferenceMeasure};

#[derive(Clone)]
pub enum CmvFamily {
    /// `alpha_j = (-1)^j q^{(j+1)/2}`.
    RogersSzego { q: f64 },
    /// `alpha_j = a` for all `j`.
    Geronimus { a: C64 },
    /// Verblunsky coefficients `j -> alpha_j`, `j >= 0`.
    Custom(Arc<dyn Fn(usize) -> C64 + Send + Sync>),
}

impl std::fmt::Debug for CmvFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmvFamily::RogersSzego { q } => write!(f, "rogers_szego({q})"),
            CmvFamily::Geronimus { a } => write!(f, "geronimus({},{})", a.re, a.im),
            CmvFamily::Custom(_) => write!(f, "cmv_custom"),
        }
    }
}

impl CmvFamily {
    pub fn verblunsky(&self, j: usize) -> C64 {
        match self {
            CmvFamily::RogersSzego { q } => {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(s * q.powf((j as f64 + 1.0) / 2.0), 0.0)
            }
            CmvFamily::Geronimus { a } => *a,
            CmvFamily::Custom(f) => f(j),
        }
    }
}

/// Entry `(r, c)` of the 2x2 block `[[conj(a), rho], [rho, -a]]`.
fn theta(a: C64, r: usize, c: usize) -> C64 {
    let rho = C64::new((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
    match (r, c) {
        (0, 0) => a.conj(),
        (1, 1) => -a,
        _ => rho,
    }
}

/// `C = L M` with `L = Theta_0 (+) Theta_2 (+) ...` and
/// `M = 1 (+) Theta_1 (+) Theta_3 (+) ...`; indices are 0-based here.
fn l_entry(alpha: &dyn Fn(usize) -> C64, p: usize, k: usize) -> C64 {
    if p / 2 != k / 2 {
        return C64::new(0.0, 0.0);
    }
    theta(alpha(p / 2 * 2), p % 2, k % 2)
}

fn m_entry(alpha: &dyn Fn(usize) -> C64, k: usize, q: usize) -> C64 {
    if k == 0 || q == 0 {
        return C64::new(if k == q { 1.0 } else { 0.0 }, 0.0);
    }
    if (k - 1) / 2 != (q - 1) / 2 {
        return C64::new(0.0, 0.0);
    }
    theta(alpha((k - 1) / 2 * 2 + 1), (k - 1) % 2, (q - 1) % 2)
}

/// CMV matrix element `<C e_j, e_i>` (1-based).
pub fn cmv_entry(alpha: &dyn Fn(usize) -> C64, i: usize, j: usize) -> C64 {
    let (p, q) = (i - 1, j - 1);
    let base = p / 2 * 2;
    (base..base + 2).map(|k| l_entry(alpha, p, k) * m_entry(alpha, k, q)).sum()
}

/// Rogers–Szegő density: a wrapped Gaussian of variance `log(1/q)`.
pub fn rogers_szego_density(q: f64, theta: f64) -> f64 {
    let s2 = (1.0 / q).ln();
    let norm = 1.0 / (2.0 * PI * s2).sqrt();
    let mut acc = 0.0;
    for m in -40i32..=40 {
        let d = theta - 2.0 * PI * m as f64;
        let t = (-d * d / (2.0 * s2)).exp();
        acc += t;
    }
    norm * acc
}

/// Absolutely continuous part of the Geronimus measure on `[-pi, pi]`.
pub fn geronimus_density(a: C64, theta: f64) -> f64 {
    let theta_a = 2.0 * a.norm().asin();
    let b = 2.0 * (C64::new(1.0, 0.0) + a.conj()).arg();
    let t = wrap(theta);
    if t.abs() <= theta_a {
        return 0.0;
    }
    let num = ((theta_a / 2.0).cos().powi(2) - (t / 2.0).cos().powi(2)).max(0.0).sqrt();
    num / (2.0 * PI * (C64::new(1.0, 0.0) + a).norm() * ((t - b) / 2.0).sin().abs())
}

fn wrap(t: f64) -> f64 {
    let mut v = (t + PI).rem_euclid(2.0 * PI) - PI;
    if v <= -PI {
        v += 2.0 * PI;
    }
    v
}

pub fn make_cmv(family: CmvFamily) -> Result<GalleryOperator> {
    let (reference, real) = match &family {
        CmvFamily::RogersSzego { q } => {
            let q = *q;
            if !(q > 0.0 && q < 1.0) {
                return Err(SpecError::InvalidArgument(format!("rogers_szego needs 0 < q < 1, got {q}")));
            }
            let mut r = ReferenceMeasure::density(Arc::new(move |t| rogers_szego_density(q, t)), (-PI, PI));
            r.circle = true;
            (r, true)
        }
        CmvFamily::Geronimus { a } => {
            let a = *a;
            if !(a.norm() < 1.0) {
                return Err(SpecError::InvalidArgument(format!("geronimus needs |a| < 1, got {a}")));
            }
            let mut r = ReferenceMeasure::density(Arc::new(move |t| geronimus_density(a, t)), (-PI, PI));
            r.circle = true;
            r.singular_unknown = (a + 0.5).norm() > 0.5;
            (r, a.im == 0.0)
        }
        CmvFamily::Custom(_) => {
            let mut r = ReferenceMeasure::unknown();
            r.circle = true;
            r.support = (-PI, PI);
            (r, false)
        }
    };
    for j in 0..64 {
        if !(family.verblunsky(j).norm() < 1.0) {
            return Err(SpecError::InvalidArgument(format!("|alpha_{j}| must be < 1")));
        }
    }
    let fam = family.clone();
    let op = ColumnDecayOperator::new(
        move |i, j| {
            if i.abs_diff(j) > 2 {
                return C64::new(0.0, 0.0);
            }
            cmv_entry(&|k| fam.verblunsky(k), i, j)
        },
        Kind::Unitary,
        Dispersion::Banded(2),
    )
    .with_row_start(RowStart::Offset(2))
    .with_real_entries(real)
    .with_name(format!("{family:?}"));
    Ok(GalleryOperator { op: Arc::new(op), reference })
}
