//! `F(T) x` for bounded continuous `F` (Poisson smoothing) and for `F`
//! holomorphic near the spectrum (contour quadrature), plus evolution.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, DecayVector, Kind};
use crate::poisson::{smoothed_kernel, MeasureOptions};
use crate::quadrature::{composite_panels, gauss_legendre, par_vector_sum};
use crate::resolvent::{resolvent_action_adaptive, resolvent_multi, ResolventOptions};
use crate::C64;

pub type ScalarFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// A bounded continuous function with a Lipschitz hint used to build the
/// piecewise constant approximants `F_n`.
#[derive(Clone)]
pub struct BoundedFunctionSpec {
    pub f: ScalarFn,
    pub lipschitz: f64,
}

impl std::fmt::Debug for BoundedFunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BoundedFunctionSpec(lip = {})", self.lipschitz)
    }
}

impl BoundedFunctionSpec {
    pub fn new(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), lipschitz: 1.0 }
    }

    pub fn with_lipschitz(mut self, lip: f64) -> Self {
        self.lipschitz = lip.max(1e-12);
        self
    }

    /// Cell width of `F_n`: `1/(2 n Lip)`, so `|F - F_n| <= 1/(4n)` on `[-n, n]`.
    pub fn cell(&self, n: usize) -> f64 {
        1.0 / (2.0 * n as f64 * self.lipschitz)
    }

    /// `F_n(u)`: `F` at the centre of the cell containing `u`, zero off `[-n, n]`.
    pub fn approximant(&self, n: usize, u: f64) -> C64 {
        if u.abs() > n as f64 {
            return C64::new(0.0, 0.0);
        }
        let h = self.cell(n);
        (self.f)(h * ((u / h).floor() + 0.5))
    }
}

/// Stone-type quadrature of `int K_H(u + i/n) F_n(u) du` over `[-n, n]`,
/// restricted to a unit margin around `bounded_hint` when one is known.
pub fn apply_cb_function(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    func: &BoundedFunctionSpec,
    n: usize,
    opts: &MeasureOptions,
) -> Result<(Vec<C64>, f64)> {
    if op.kind != Kind::SelfAdjoint {
        return Err(SpecError::InvalidArgument("bounded functional calculus needs a self-adjoint operator".into()));
    }
    if n == 0 {
        return Err(SpecError::InvalidArgument("stage n must be >= 1".into()));
    }
    let eps = 1.0 / n as f64;
    let nf = n as f64;
    let (lo, hi) = match op.bounded_hint {
        Some((a, b)) => ((a - 1.0).max(-nf), (b + 1.0).min(nf)),
        None => (-nf, nf),
    };
    if !(hi > lo) {
        return Ok((Vec::new(), 0.0));
    }
    // Panels follow the cells of F_n, so each panel sees a constant value.
    let h = func.cell(n);
    let first = (lo / h).floor() as i64;
    let last = (hi / h).ceil() as i64;
    let mut nodes = Vec::new();
    for c in first..last {
        let a = (c as f64 * h).max(lo);
        let b = ((c + 1) as f64 * h).min(hi);
        if b <= a {
            continue;
        }
        let value = func.approximant(n, 0.5 * (a + b));
        let panels = ((b - a) / (eps * opts.panel_factor)).ceil().max(1.0) as usize;
        for (u, w) in composite_panels(a, b, panels, opts.order) {
            nodes.push((u, w, value));
        }
    }
    par_vector_sum(nodes.len(), |k| {
        let (u, w, fv) = nodes[k];
        let s = smoothed_kernel(op, x, u, eps, opts)?;
        Ok((s.vector_value.into_iter().map(|c| c * fv * w).collect(), s.bound * w * fv.norm()))
    })
}

/// A closed polygonal contour, traversed counterclockwise, with Gauss–Legendre
/// nodes on each edge. Edges touching `apex` (if any) are graded toward it.
#[derive(Clone)]
pub struct ContourSpec {
    pub vertices: Vec<C64>,
    pub nodes_per_edge: usize,
    pub apex: Option<C64>,
    /// Geometric refinement levels toward the apex.
    pub grading_levels: usize,
    pub w: ComplexFn,
}

impl std::fmt::Debug for ContourSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContourSpec")
            .field("vertices", &self.vertices)
            .field("nodes_per_edge", &self.nodes_per_edge)
            .field("apex", &self.apex)
            .finish()
    }
}

impl ContourSpec {
    /// Rectangle `[x0, x1] x [-y, y]`.
    pub fn rectangle(x0: f64, x1: f64, y: f64, nodes_per_edge: usize, w: ComplexFn) -> Self {
        Self {
            vertices: vec![C64::new(x0, -y), C64::new(x1, -y), C64::new(x1, y), C64::new(x0, y)],
            nodes_per_edge,
            apex: None,
            grading_levels: 0,
            w,
        }
    }

    /// Contour through `apex` enclosing `[apex, far]` (or `[far, apex]`): two
    /// legs at 45 degrees reach height `c` on the side away from the spectrum,
    /// then a rectangle closes around the far end.
    pub fn notch(apex: f64, far: f64, c: f64, nodes_per_edge: usize, w: ComplexFn) -> Self {
        let s = if far > apex { 1.0 } else { -1.0 };
        let a = C64::new(apex, 0.0);
        let back = apex - s * c;
        let end = far + s * c.max(1.0);
        let mut vertices = vec![
            a,
            C64::new(back, -c),
            C64::new(end, -c),
            C64::new(end, c),
            C64::new(back, c),
        ];
        if s < 0.0 {
            // Keep counterclockwise orientation for the mirrored notch.
            vertices = vec![a, C64::new(back, c), C64::new(end, c), C64::new(end, -c), C64::new(back, -c)];
        }
        Self { vertices, nodes_per_edge, apex: Some(a), grading_levels: 40, w }
    }

    pub fn length(&self) -> f64 {
        let k = self.vertices.len();
        (0..k).map(|i| (self.vertices[(i + 1) % k] - self.vertices[i]).norm()).sum()
    }

    pub fn with_nodes(&self, nodes_per_edge: usize) -> Self {
        let mut c = self.clone();
        c.nodes_per_edge = nodes_per_edge;
        c
    }

    /// Quadrature nodes `(z_k, dz_k)` including the edge direction.
    pub fn nodes(&self) -> Vec<(C64, C64)> {
        let k = self.vertices.len();
        let rule = gauss_legendre(self.nodes_per_edge.max(1));
        let mut out = Vec::new();
        for i in 0..k {
            let (p0, p1) = (self.vertices[i], self.vertices[(i + 1) % k]);
            let dir = p1 - p0;
            let near0 = self.apex.map_or(false, |a| (a - p0).norm() < 1e-15);
            let near1 = self.apex.map_or(false, |a| (a - p1).norm() < 1e-15);
            // Breakpoints in the edge parameter s in [0, 1].
            let mut br = vec![0.0, 1.0];
            let mut t = 1.0;
            for _ in 0..self.grading_levels {
                t *= 0.5;
                if near0 {
                    br.push(t);
                }
                if near1 {
                    br.push(1.0 - t);
                }
            }
            br.sort_by(f64::total_cmp);
            br.dedup();
            for win in br.windows(2) {
                let (s0, s1) = (win[0], win[1]);
                let half = 0.5 * (s1 - s0);
                for (x, wq) in rule.0.iter().zip(&rule.1) {
                    let s = s0 + half * (1.0 + x);
                    out.push((p0 + dir * s, dir * (half * wq)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct HolomorphicResult {
    pub vector: Vec<C64>,
    pub bound: f64,
    pub nodes_per_edge: usize,
}

fn node_error(z: C64, e: SpecError) -> SpecError {
    SpecError::ContourNode { re: z.re, im: z.im, source: Box::new(e) }
}

/// `-(1/(2 pi i)) sum_k w(z_k) R(z_k) x dz_k` at a fixed node count, with
/// each resolvent solved adaptively to its share of `tol`.
fn contour_sum(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    contour: &ContourSpec,
    tol: f64,
    ro: &ResolventOptions,
) -> Result<(Vec<C64>, f64)> {
    let nodes = contour.nodes();
    let count = nodes.len() as f64;
    let scale = C64::new(0.0, 1.0 / (2.0 * PI));
    for &(z, _) in &nodes {
        if !(op.dist_lower_bound(z) > 0.0) {
            return Err(node_error(z, SpecError::InvalidArgument("contour meets the spectrum".into())));
        }
    }
    par_vector_sum(nodes.len(), |k| {
        let (z, dz) = nodes[k];
        let wz = (contour.w)(z) * dz;
        let share = tol * 2.0 * PI / (4.0 * count * wz.norm().max(1e-300));
        let s = resolvent_action_adaptive(op, x, z, share.min(1.0), ro).map_err(|e| node_error(z, e))?;
        let f = wz * scale;
        Ok((s.coeffs.iter().map(|c| c * f).collect(), s.bound * f.norm()))
    })
}

fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or_default() - b.get(i).copied().unwrap_or_default()).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Contour functional calculus with node doubling until the change between
/// successive node counts is below `tol / 4`.
pub fn apply_holomorphic(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    contour: &ContourSpec,
    tol: f64,
    ro: &ResolventOptions,
) -> Result<HolomorphicResult> {
    if !(tol > 0.0) {
        return Err(SpecError::InvalidArgument("tol must be positive".into()));
    }
    let mut nodes = contour.nodes_per_edge.max(2);
    let (mut prev, mut prev_bound) = contour_sum(op, x, &contour.with_nodes(nodes), tol, ro)?;
    for _ in 0..6 {
        nodes *= 2;
        let (cur, bound) = contour_sum(op, x, &contour.with_nodes(nodes), tol, ro)?;
        let delta = diff_norm(&cur, &prev);
        prev = cur;
        prev_bound = bound;
        if delta < tol / 4.0 {
            return Ok(HolomorphicResult { vector: prev, bound: prev_bound + delta, nodes_per_edge: nodes });
        }
    }
    let delta = f64::INFINITY;
    Ok(HolomorphicResult { vector: prev, bound: prev_bound + delta, nodes_per_edge: nodes })
}

/// The same quadrature with every resolvent taken at one fixed truncation
/// `n`; used to study convergence in the truncation size.
pub fn apply_holomorphic_fixed(
    op: &ColumnDecayOperator,
    x: &DecayVector,
    contour: &ContourSpec,
    n: usize,
) -> Result<Vec<C64>> {
    let nodes = contour.nodes();
    let scale = C64::new(0.0, 1.0 / (2.0 * PI));
    let ro = ResolventOptions::default();
    Ok(par_vector_sum(nodes.len(), |k| {
        let (z, dz) = nodes[k];
        let f = (contour.w)(z) * dz * scale;
        let s = resolvent_multi(op, &[x], z, n, &ro).map_err(|e| node_error(z, e))?.remove(0);
        Ok((s.coeffs.iter().map(|c| c * f).collect(), s.bound * f.norm()))
    })?
    .0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equation {
    /// `du/dt = -i T u`.
    Schrodinger,
    /// `du/dt = -A^alpha u` with `A = T` when the spectrum hint lies in
    /// `[0, inf)` and `A = -T` when it lies in `(-inf, 0]`.
    FractionalDiffusion { alpha: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub nodes_per_edge: usize,
    /// Stage used for unbounded Schrödinger evolution via Poisson smoothing.
    pub cb_stage: usize,
    pub resolvent: ResolventOptions,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { nodes_per_edge: 16, cb_stage: 200, resolvent: ResolventOptions::default() }
    }
}

/// Contour and weight for an evolution at time `t`. For integer `alpha` the
/// rectangle keeps a margin of `(2/t)^(1/alpha)` (at least 1) around the hint.
pub fn evolution_contour(op: &ColumnDecayOperator, eq: Equation, t: f64, nodes: usize) -> Result<ContourSpec> {
    let (lo, hi) = op
        .bounded_hint
        .ok_or_else(|| SpecError::InvalidArgument("contour evolution needs a spectrum hint".into()))?;
    match eq {
        Equation::Schrodinger => {
            let w: ComplexFn = Arc::new(move |z: C64| (C64::new(0.0, -t) * z).exp());
            Ok(ContourSpec::rectangle(lo - 1.0, hi + 1.0, 1.0, nodes, w))
        }
        Equation::FractionalDiffusion { alpha } => {
            if !(alpha > 0.0) {
                return Err(SpecError::InvalidArgument("alpha must be positive".into()));
            }
            let positive = lo >= 0.0;
            if !positive && hi > 0.0 {
                return Err(SpecError::InvalidArgument(
                    "fractional diffusion needs a semidefinite operator (hint inside [0,inf) or (-inf,0])".into(),
                ));
            }
            let sign = if positive { 1.0 } else { -1.0 };
            let w: ComplexFn = Arc::new(move |z: C64| {
                let a = z * sign;
                (-(a.powf(alpha)) * t).exp()
            });
            let integer = (alpha - alpha.round()).abs() < 1e-12;
            // Distance from 0 to the spectrum along A.
            let gap = if positive { lo } else { -hi };
            let far = if positive { hi } else { lo };
            if integer {
                // Resolvent sections converge faster the farther the contour
                // sits from the spectrum; keep |w| <= e^2 on it.
                let m = (2.0 / t).powf(1.0 / alpha.round()).clamp(1.0, 100.0 * (hi - lo + 1.0));
                Ok(ContourSpec::rectangle(lo - m, hi + m, m, nodes, w))
            } else if gap > 0.0 {
                let (x0, x1) = if positive { (0.5 * lo, hi + 1.0) } else { (lo - 1.0, 0.5 * hi) };
                Ok(ContourSpec::rectangle(x0, x1, 1.0, nodes, w))
            } else {
                Ok(ContourSpec::notch(0.0, far, 1.0, nodes, w))
            }
        }
    }
}

/// `u(t)` for `u(0) = x0`.
pub fn evolve(
    op: &ColumnDecayOperator,
    x0: &DecayVector,
    eq: Equation,
    t: f64,
    tol: f64,
    opts: &EvolveOptions,
) -> Result<HolomorphicResult> {
    if !(t >= 0.0) {
        return Err(SpecError::InvalidArgument("t must be nonnegative".into()));
    }
    if t == 0.0 {
        let m = x0.support.unwrap_or(1);
        return Ok(HolomorphicResult { vector: x0.head(m), bound: x0.tail_bound(m), nodes_per_edge: 0 });
    }
    if eq == Equation::Schrodinger && op.bounded_hint.is_none() {
        let f = BoundedFunctionSpec::new(move |l| C64::new(0.0, -l * t).exp()).with_lipschitz(t.max(1e-3));
        let mo = MeasureOptions { tol: tol.min(1e-8), resolvent: opts.resolvent, ..MeasureOptions::default() };
        let (v, b) = apply_cb_function(op, x0, &f, opts.cb_stage, &mo)?;
        return Ok(HolomorphicResult { vector: v, bound: b, nodes_per_edge: 0 });
    }
    let contour = evolution_contour(op, eq, t, opts.nodes_per_edge)?;
    apply_holomorphic(op, x0, &contour, tol, &opts.resolvent)
}
