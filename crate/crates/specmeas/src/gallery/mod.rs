//! Test operators with exactly known spectral measures.

mod cmv;
mod jacobi;
mod penrose;
mod schrodinger;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use cmv::{cmv_entry, geronimus_density, make_cmv, rogers_szego_density, CmvFamily};
pub use jacobi::{continued_fraction, jacobi_coefficients, jacobi_normalization, make_jacobi, JacobiFamily};
pub use penrose::{make_penrose, PenrosePatch};
pub use schrodinger::{make_sparse_schrodinger, CouplingRule, SparseSpec};

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, Dispersion, Kind, RowStart};
use crate::C64;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Exact spectral measure of `e_1`, as far as it is known in closed form.
#[derive(Clone)]
pub struct ReferenceMeasure {
    pub density: Option<DensityFn>,
    /// `(location, weight)` pairs.
    pub atoms: Vec<(f64, f64)>,
    /// Interval (or angle range `(-pi, pi)`) carrying the measure.
    pub support: (f64, f64),
    pub circle: bool,
    /// A singular component is known to exist but is not given here.
    pub singular_unknown: bool,
}

impl std::fmt::Debug for ReferenceMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceMeasure")
            .field("has_density", &self.density.is_some())
            .field("atoms", &self.atoms.len())
            .field("support", &self.support)
            .field("circle", &self.circle)
            .field("singular_unknown", &self.singular_unknown)
            .finish()
    }
}

impl ReferenceMeasure {
    pub fn density(d: DensityFn, support: (f64, f64)) -> Self {
        Self { density: Some(d), atoms: Vec::new(), support, circle: false, singular_unknown: false }
    }

    pub fn atoms(atoms: Vec<(f64, f64)>, support: (f64, f64)) -> Self {
        Self { density: None, atoms, support, circle: false, singular_unknown: false }
    }

    pub fn unknown() -> Self {
        Self {
            density: None,
            atoms: Vec::new(),
            support: (f64::NEG_INFINITY, f64::INFINITY),
            circle: false,
            singular_unknown: true,
        }
    }

    pub fn eval_density(&self, x: f64) -> Option<f64> {
        self.density.as_ref().map(|d| d(x))
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// A gallery operator with its reference measure for `x = e_1`.
#[derive(Clone, Debug)]
pub struct GalleryOperator {
    pub op: Arc<ColumnDecayOperator>,
    pub reference: ReferenceMeasure,
}

fn diagonal_operator(d: impl Fn(usize) -> f64 + Send + Sync + 'static) -> ColumnDecayOperator {
    ColumnDecayOperator::new(
        move |i, j| if i == j { C64::new(d(i), 0.0) } else { C64::new(0.0, 0.0) },
        Kind::SelfAdjoint,
        Dispersion::Banded(1),
    )
    .with_real_entries(true)
    .with_row_start(RowStart::Offset(0))
    .with_name("diag")
}

/// `diag(d_1, d_2, ...)`; the reference measure is the unit atom at `d_1`.
pub fn make_diagonal(d: impl Fn(usize) -> f64 + Send + Sync + 'static) -> GalleryOperator {
    let d1 = d(1);
    GalleryOperator {
        op: Arc::new(diagonal_operator(d)),
        reference: ReferenceMeasure::atoms(vec![(d1, 1.0)], (d1, d1)),
    }
}

/// A finite diagonal `diag(values) (+) 0`.
pub fn make_finite_diagonal(values: Vec<f64>) -> GalleryOperator {
    let lo = values.iter().copied().fold(0.0, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let d1 = values.first().copied().unwrap_or(0.0);
    let op = diagonal_operator(move |i| values.get(i - 1).copied().unwrap_or(0.0)).with_hint(lo, hi);
    GalleryOperator { op: Arc::new(op), reference: ReferenceMeasure::atoms(vec![(d1, 1.0)], (d1, d1)) }
}

pub fn make_zero() -> GalleryOperator {
    let mut g = make_finite_diagonal(Vec::new());
    g.reference = ReferenceMeasure::atoms(vec![(0.0, 1.0)], (0.0, 0.0));
    g
}

/// `diag(e^{i theta_1}, e^{i theta_2}, ...)` continued periodically.
pub fn make_unitary_diagonal(thetas: Vec<f64>) -> Result<GalleryOperator> {
    if thetas.is_empty() {
        return Err(SpecError::InvalidArgument("need at least one angle".into()));
    }
    let t1 = thetas[0];
    let th = Arc::new(thetas);
    let op = ColumnDecayOperator::new(
        move |i, j| if i == j { C64::from_polar(1.0, th[(i - 1) % th.len()]) } else { C64::new(0.0, 0.0) },
        Kind::Unitary,
        Dispersion::Banded(1),
    )
    .with_row_start(RowStart::Offset(0))
    .with_name("unitary_diag");
    let mut reference = ReferenceMeasure::atoms(vec![(t1, 1.0)], (-std::f64::consts::PI, std::f64::consts::PI));
    reference.circle = true;
    Ok(GalleryOperator { op: Arc::new(op), reference })
}

/// Names accepted by [`by_name`], with their parameters and defaults.
pub fn list() -> Vec<(&'static str, &'static str)> {
    vec![
        ("jacobi", "a=0.7,b=0.3"),
        ("legendre", ""),
        ("laguerre", "a=0.5"),
        ("charlier", "a=0.5"),
        ("free", ""),
        ("rogers_szego", "q=0.1"),
        ("geronimus", "a=-0.5,ai=0"),
        ("penrose", "radius=20"),
        ("sparse_schrodinger", "rule=1 (0 const, 1 inverse, 2 geometric), g=1, jmax=6"),
        ("diag", "k-th entry k"),
        ("zero", ""),
    ]
}

fn param(p: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

fn check_keys(p: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in p.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(SpecError::InvalidArgument(format!("unknown parameter `{k}`")));
        }
    }
    Ok(())
}

/// Builds a gallery operator from its name and a numeric parameter map.
pub fn by_name(name: &str, p: &BTreeMap<String, f64>) -> Result<GalleryOperator> {
    match name {
        "jacobi" => {
            check_keys(p, &["a", "b"])?;
            make_jacobi(JacobiFamily::Jacobi { a: param(p, "a", 0.7), b: param(p, "b", 0.3) })
        }
        "legendre" => {
            check_keys(p, &[])?;
            make_jacobi(JacobiFamily::Jacobi { a: 0.0, b: 0.0 })
        }
        "laguerre" => {
            check_keys(p, &["a"])?;
            make_jacobi(JacobiFamily::Laguerre { a: param(p, "a", 0.5) })
        }
        "charlier" => {
            check_keys(p, &["a"])?;
            make_jacobi(JacobiFamily::Charlier { a: param(p, "a", 0.5) })
        }
        "free" => {
            check_keys(p, &[])?;
            make_jacobi(JacobiFamily::Free)
        }
        "rogers_szego" => {
            check_keys(p, &["q"])?;
            make_cmv(CmvFamily::RogersSzego { q: param(p, "q", 0.1) })
        }
        "geronimus" => {
            check_keys(p, &["a", "ai"])?;
            make_cmv(CmvFamily::Geronimus { a: C64::new(param(p, "a", -0.5), param(p, "ai", 0.0)) })
        }
        "penrose" => {
            check_keys(p, &["radius"])?;
            Ok(make_penrose(param(p, "radius", 20.0))?.gallery())
        }
        "sparse_schrodinger" => {
            check_keys(p, &["rule", "g", "jmax"])?;
            let g = param(p, "g", 1.0);
            let rule = match param(p, "rule", 1.0) as i64 {
                0 => CouplingRule::Constant(g),
                1 => CouplingRule::Inverse(g),
                2 => CouplingRule::Geometric(g),
                r => return Err(SpecError::InvalidArgument(format!("unknown coupling rule {r}"))),
            };
            let jmax = param(p, "jmax", 6.0);
            if !(jmax >= 0.0 && jmax <= 12.0) {
                return Err(SpecError::InvalidArgument(format!("jmax must be in 0..=12, got {jmax}")));
            }
            make_sparse_schrodinger(SparseSpec { rule, jmax: jmax as usize })
        }
        "diag" => {
            check_keys(p, &[])?;
            Ok(make_diagonal(|i| i as f64))
        }
        "zero" => {
            check_keys(p, &[])?;
            Ok(make_zero())
        }
        other => Err(SpecError::InvalidArgument(format!("unknown gallery operator `{other}`"))),
    }
}
