use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, Dispersion, Kind};
use crate::special::ln_gamma;
use crate::C64;

use super::{GalleryOperator, ReferenceMeasure};

/// Families of Jacobi (tridiagonal) operators with known spectral measures.
#[derive(Clone)]
pub enum JacobiFamily {
    /// Weight `(1-x)^a (1+x)^b` on `[-1, 1]`.
    Jacobi { a: f64, b: f64 },
    /// Weight `x^a e^{-x}` on `[0, inf)`.
    Laguerre { a: f64 },
    /// Poisson weights `e^{-a} a^m / m!` at the nonnegative integers.
    Charlier { a: f64 },
    /// `a_k = 1/2`, `b_k = 0`: semicircle density on `[-1, 1]`.
    Free,
    /// User coefficient rules `k -> (a_k, b_k)`.
    Custom(Arc<dyn Fn(usize) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for JacobiFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JacobiFamily::Jacobi { a, b } => write!(f, "jacobi({a},{b})"),
            JacobiFamily::Laguerre { a } => write!(f, "laguerre({a})"),
            JacobiFamily::Charlier { a } => write!(f, "charlier({a})"),
            JacobiFamily::Free => write!(f, "free"),
            JacobiFamily::Custom(_) => write!(f, "custom"),
        }
    }
}

/// Recurrence coefficients `(a_k, b_k)`, `k >= 1`, of the orthonormal
/// polynomials: `a_k` couples sites `k` and `k+1`, `b_k` is the diagonal.
pub fn jacobi_coefficients(family: &JacobiFamily, k: usize) -> (f64, f64) {
    let kf = k as f64;
    match family {
        JacobiFamily::Jacobi { a, b } => {
            let s = a + b;
            let ak = if k == 1 {
                // The general rule is 0/0 at k = 1 when a + b = -1; cancel (1 + s) first.
                2.0 * ((1.0 + a) * (1.0 + b) / ((2.0 + s).powi(2) * (3.0 + s))).sqrt()
            } else {
                let num = kf * (kf + a) * (kf + b) * (kf + s);
                let den = (2.0 * kf + s - 1.0) * (2.0 * kf + s).powi(2) * (2.0 * kf + s + 1.0);
                2.0 * (num / den).sqrt()
            };
            let bk = if k == 1 {
                (b - a) / (s + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * kf + s) * (2.0 * kf - 2.0 + s))
            };
            (ak, bk)
        }
        JacobiFamily::Laguerre { a } => ((kf * (kf + a)).sqrt(), 2.0 * kf + a - 1.0),
        JacobiFamily::Charlier { a } => ((a * kf).sqrt(), kf + a - 1.0),
        JacobiFamily::Free => (0.5, 0.0),
        JacobiFamily::Custom(rule) => rule(k),
    }
}

fn validate(family: &JacobiFamily) -> Result<()> {
    let bad = |m: String| Err(SpecError::InvalidArgument(m));
    match family {
        JacobiFamily::Jacobi { a, b } if !(*a > -1.0 && *b > -1.0) => bad(format!("jacobi needs a, b > -1, got ({a}, {b})")),
        JacobiFamily::Laguerre { a } if !(*a > -1.0) => bad(format!("laguerre needs a > -1, got {a}")),
        JacobiFamily::Charlier { a } if !(*a > 0.0) => bad(format!("charlier needs a > 0, got {a}")),
        _ => Ok(()),
    }
}

/// `2^{a+b+1} Gamma(a+1) Gamma(b+1) / Gamma(a+b+2)`.
pub fn jacobi_normalization(a: f64, b: f64) -> f64 {
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0)).exp()
}

pub fn make_jacobi(family: JacobiFamily) -> Result<GalleryOperator> {
    validate(&family)?;
    let fam = family.clone();
    let entry = move |i: usize, j: usize| -> C64 {
        if i == j {
            C64::new(jacobi_coefficients(&fam, i).1, 0.0)
        } else if i.abs_diff(j) == 1 {
            C64::new(jacobi_coefficients(&fam, i.min(j)).0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let mut op = ColumnDecayOperator::new(entry, Kind::SelfAdjoint, Dispersion::Banded(1))
        .with_real_entries(true)
        .with_name(format!("{family:?}"));
    let reference = match family {
        JacobiFamily::Jacobi { a, b } => {
            op = op.with_hint(-1.0, 1.0);
            let norm = jacobi_normalization(a, b);
            ReferenceMeasure::density(
                Arc::new(move |x: f64| {
                    if x.abs() >= 1.0 {
                        0.0
                    } else {
                        (1.0 - x).powf(a) * (1.0 + x).powf(b) / norm
                    }
                }),
                (-1.0, 1.0),
            )
        }
        JacobiFamily::Laguerre { a } => {
            let lg = ln_gamma(a + 1.0);
            ReferenceMeasure::density(
                Arc::new(move |x: f64| if x <= 0.0 { 0.0 } else { (a * x.ln() - x - lg).exp() }),
                (0.0, f64::INFINITY),
            )
        }
        JacobiFamily::Charlier { a } => {
            let mut atoms = Vec::new();
            let mut logw = -a;
            for m in 0..400 {
                if m > 0 {
                    logw += a.ln() - (m as f64).ln();
                }
                let w = logw.exp();
                if m as f64 > a && w < 1e-300 {
                    break;
                }
                atoms.push((m as f64, w));
            }
            ReferenceMeasure::atoms(atoms, (0.0, f64::INFINITY))
        }
        JacobiFamily::Free => {
            op = op.with_hint(-1.0, 1.0);
            ReferenceMeasure::density(
                Arc::new(|x: f64| if x.abs() >= 1.0 { 0.0 } else { 2.0 / PI * (1.0 - x * x).sqrt() }),
                (-1.0, 1.0),
            )
        }
        JacobiFamily::Custom(_) => ReferenceMeasure::unknown(),
    };
    Ok(GalleryOperator { op: Arc::new(op), reference })
}

/// `G(z) = <(J - z)^{-1} e_1, e_1>` by backward evaluation of the continued
/// fraction `1/(-z + b_1 - a_1^2/(-z + b_2 - ...))` truncated at depth `depth`.
pub fn continued_fraction(family: &JacobiFamily, z: C64, depth: usize) -> C64 {
    let mut tail = C64::new(0.0, 0.0);
    for k in (1..=depth).rev() {
        let (ak, bk) = jacobi_coefficients(family, k);
        tail = C64::new(1.0, 0.0) / (C64::new(bk, 0.0) - z - tail * ak * ak);
    }
    tail
}
