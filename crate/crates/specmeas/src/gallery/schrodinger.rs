use std::sync::Arc;

use crate::error::Result;
use crate::operator::{ColumnDecayOperator, Dispersion, Kind};
use crate::C64;

use super::{GalleryOperator, ReferenceMeasure};

/// Coupling strengths `g_j` of the bumps placed at sites `m_j = j!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingRule {
    /// `g_j = g`.
    Constant(f64),
    /// `g_j = g / j`.
    Inverse(f64),
    /// `g_j = g 2^{-j}`.
    Geometric(f64),
}

impl CouplingRule {
    pub fn g(&self, j: usize) -> f64 {
        match *self {
            CouplingRule::Constant(g) => g,
            CouplingRule::Inverse(g) => g / j as f64,
            CouplingRule::Geometric(g) => g * 0.5f64.powi(j as i32),
        }
    }

    /// Whether `sum g_j^2` diverges for the untruncated rule.
    pub fn square_summable(&self) -> bool {
        !matches!(self, CouplingRule::Constant(g) if *g != 0.0)
    }
}

/// Potential `v(n) = sum_{j <= jmax} g_j delta_{n, j!}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSpec {
    pub rule: CouplingRule,
    pub jmax: usize,
}

impl SparseSpec {
    pub fn sites(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut fact = 1usize;
        for j in 1..=self.jmax {
            fact *= j;
            match out.iter_mut().find(|s| s.0 == fact) {
                Some(s) => s.1 += self.rule.g(j),
                None => out.push((fact, self.rule.g(j))),
            }
        }
        out
    }

    /// The expected spectral type on `(0, 4)` for the untruncated potential:
    /// absolutely continuous when the couplings are square summable,
    /// singular continuous otherwise.
    pub fn expected_type(&self) -> &'static str {
        if self.rule.square_summable() {
            "ac"
        } else {
            "sc"
        }
    }
}

/// Half-line discrete Schrödinger operator `H_0 + v` with `H_0` the
/// tridiagonal matrix with 2 on the diagonal and -1 off it.
pub fn make_sparse_schrodinger(spec: SparseSpec) -> Result<GalleryOperator> {
    let sites = Arc::new(spec.sites());
    let vmax = sites.iter().map(|s| s.1).fold(0.0, f64::max);
    let vmin = sites.iter().map(|s| s.1).fold(0.0, f64::min);
    let s2 = sites.clone();
    let op = ColumnDecayOperator::new(
        move |i, j| {
            if i == j {
                let v = s2.iter().find(|s| s.0 == i).map_or(0.0, |s| s.1);
                C64::new(2.0 + v, 0.0)
            } else if i.abs_diff(j) == 1 {
                C64::new(-1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        },
        Kind::SelfAdjoint,
        Dispersion::Banded(1),
    )
    .with_real_entries(true)
    .with_hint(vmin.min(0.0), 4.0 + vmax)
    .with_name(format!("sparse_schrodinger({:?},{})", spec.rule, spec.jmax));
    let mut reference = ReferenceMeasure::unknown();
    reference.support = (vmin.min(0.0), 4.0 + vmax);
    Ok(GalleryOperator { op: Arc::new(op), reference })
}
