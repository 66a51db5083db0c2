//! Vertex graph of a Penrose rhombus tiling, built by de Bruijn's pentagrid
//! method and ordered in a spiral from the origin.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, Dispersion, Kind};
use crate::C64;

use super::{GalleryOperator, ReferenceMeasure};

/// Grid offsets; generic (no three lines concurrent) and summing to zero.
const GAMMA: [f64; 5] = [0.1, 0.27, -0.13, 0.41, -0.65];

type Key = [i64; 5];

/// A finite patch of the tiling graph and the operator `H_0` on it.
#[derive(Debug, Clone)]
pub struct PenrosePatch {
    pub radius: f64,
    pub positions: Vec<(f64, f64)>,
    /// Sorted 1-based neighbour lists, indexed by 0-based vertex.
    pub neighbours: Vec<Vec<usize>>,
    /// Degree in the whole tiling (not just inside the patch).
    pub degree: Vec<usize>,
    /// Fitted dispersion `f(n) = ceil(n + c sqrt(n) + d)`.
    pub c: f64,
    pub d: f64,
    pub op: Arc<ColumnDecayOperator>,
}

fn directions() -> [(f64, f64); 5] {
    let mut e = [(0.0, 0.0); 5];
    for (j, v) in e.iter_mut().enumerate() {
        let a = 2.0 * PI * j as f64 / 5.0;
        *v = (a.cos(), a.sin());
    }
    e
}

/// All rhombus edges whose mesh points lie within `reach` of the origin.
fn pentagrid_edges(reach: f64) -> Vec<(Key, Key)> {
    let e = directions();
    let kmax = reach.ceil() as i64 + 3;
    let mut edges = Vec::new();
    for r in 0..5 {
        for s in (r + 1)..5 {
            let det = e[r].0 * e[s].1 - e[r].1 * e[s].0;
            for kr in -kmax..=kmax {
                for ks in -kmax..=kmax {
                    let br = kr as f64 - GAMMA[r];
                    let bs = ks as f64 - GAMMA[s];
                    let x = (br * e[s].1 - bs * e[r].1) / det;
                    let y = (e[r].0 * bs - e[s].0 * br) / det;
                    if x.hypot(y) > reach {
                        continue;
                    }
                    let mut k: Key = [0; 5];
                    for j in 0..5 {
                        k[j] = (x * e[j].0 + y * e[j].1 + GAMMA[j]).ceil() as i64;
                    }
                    let corner = |dr: i64, ds: i64| {
                        let mut c = k;
                        c[r] = kr + dr;
                        c[s] = ks + ds;
                        c
                    };
                    let v = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    for q in 0..4 {
                        let (a, b) = (v[q], v[(q + 1) % 4]);
                        edges.push(if a < b { (a, b) } else { (b, a) });
                    }
                }
            }
        }
    }
    edges
}

fn position(k: &Key) -> (f64, f64) {
    let e = directions();
    let mut p = (0.0, 0.0);
    for j in 0..5 {
        p.0 += k[j] as f64 * e[j].0;
        p.1 += k[j] as f64 * e[j].1;
    }
    p
}

/// Builds the patch of vertices within `radius` of the origin.
pub fn make_penrose(radius: f64) -> Result<PenrosePatch> {
    if !(radius >= 2.0 && radius <= 400.0) {
        return Err(SpecError::InvalidArgument(format!("penrose radius must be in [2, 400], got {radius}")));
    }
    // A vertex sits within a bounded distance of 5/2 times its mesh point;
    // generating meshes out to (radius + 10) / 2.5 leaves every kept vertex
    // and all of its neighbours present.
    let edges = pentagrid_edges((radius + 10.0) / 2.5 + 2.0);
    let mut adj: HashMap<Key, HashSet<Key>> = HashMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut kept: Vec<(Key, (f64, f64))> = adj
        .keys()
        .map(|k| (*k, position(k)))
        .filter(|(_, p)| p.0.hypot(p.1) <= radius)
        .collect();
    kept.sort_by(|x, y| {
        let rx = x.1 .0.hypot(x.1 .1);
        let ry = y.1 .0.hypot(y.1 .1);
        rx.total_cmp(&ry)
            .then(x.1 .1.atan2(x.1 .0).total_cmp(&y.1 .1.atan2(y.1 .0)))
            .then(x.0.cmp(&y.0))
    });
    let index: HashMap<Key, usize> = kept.iter().enumerate().map(|(i, (k, _))| (*k, i + 1)).collect();
    let mut neighbours = Vec::with_capacity(kept.len());
    let mut degree = Vec::with_capacity(kept.len());
    for (k, _) in &kept {
        let all = &adj[k];
        degree.push(all.len());
        let mut nb: Vec<usize> = all.iter().filter_map(|q| index.get(q).copied()).collect();
        nb.sort_unstable();
        neighbours.push(nb);
    }
    let n_vert = kept.len();
    // Exact profile g(n) = max row index touched by columns 1..=n, then the
    // smallest c covering it with d = 1.
    let d = 1.0;
    let mut g = 0usize;
    let mut c: f64 = 0.0;
    for n in 1..=n_vert {
        g = g.max(n).max(neighbours[n - 1].last().copied().unwrap_or(0));
        c = c.max((g as f64 - n as f64 - d) / (n as f64).sqrt());
    }
    c += 1e-9;
    let positions: Vec<(f64, f64)> = kept.iter().map(|x| x.1).collect();
    let nb = Arc::new(neighbours.clone());
    let deg = Arc::new(degree.clone());
    let entry = move |i: usize, j: usize| -> C64 {
        if i == j {
            C64::new(-(deg[i - 1] as f64), 0.0)
        } else if nb[i - 1].binary_search(&j).is_ok() {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let maxdeg = degree.iter().copied().max().unwrap_or(0) as f64;
    let op = ColumnDecayOperator::new(entry, Kind::SelfAdjoint, Dispersion::Sqrt { c, d })
        .with_real_entries(true)
        .with_dim(n_vert)
        .with_hint(-2.0 * maxdeg, 0.0)
        .with_name(format!("penrose({radius})"));
    Ok(PenrosePatch { radius, positions, neighbours, degree, c, d, op: Arc::new(op) })
}

impl PenrosePatch {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Unclipped dispersion `ceil(n + c sqrt(n) + d)`.
    pub fn raw_f(&self, n: usize) -> usize {
        Dispersion::Sqrt { c: self.c, d: self.d }.eval(n)
    }

    /// Rejects truncations whose row range would leave the patch, where the
    /// patch operator stops being a section of the infinite tiling operator.
    pub fn check_truncation(&self, n: usize) -> Result<()> {
        let f = self.raw_f(n);
        if f > self.len() {
            return Err(SpecError::PatchTooSmall { n, fn_: f, size: self.len() });
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbours[v] {
                if !seen[w - 1] {
                    seen[w - 1] = true;
                    stack.push(w - 1);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn gallery(&self) -> GalleryOperator {
        GalleryOperator { op: self.op.clone(), reference: ReferenceMeasure::unknown() }
    }
}
