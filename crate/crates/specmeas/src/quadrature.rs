//! Gauss rules, composite panels and order-stable summation.

use std::collections::HashMap;
use std::ops::{Add, Mul};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;

use crate::C64;

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn rule_cache() -> &'static Mutex<HashMap<usize, Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    if let Some(r) = rule_cache().lock().get(&n) {
        return r.clone();
    }
    if n == 1 {
        let r = Arc::new((vec![0.0], vec![2.0]));
        rule_cache().lock().insert(1, r.clone());
        return r;
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    let r = Arc::new((x, w));
    rule_cache().lock().insert(n, r.clone());
    r
}

/// Nodes and weights of a composite Gauss rule with panels no wider than `h`.
pub fn composite(a: f64, b: f64, h: f64, order: usize) -> Vec<(f64, f64)> {
    if !(b > a) {
        return Vec::new();
    }
    let panels = ((b - a) / h).ceil().max(1.0) as usize;
    composite_panels(a, b, panels, order)
}

pub fn composite_panels(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let (xs, ws) = (&rule.0, &rule.1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (x, w) in xs.iter().zip(ws) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

/// Composite Gauss rule on `[a, b]` with panels refined geometrically
/// toward both endpoints, for integrands with endpoint singularities.
pub fn graded(a: f64, b: f64, inner: usize, levels: usize, order: usize) -> Vec<(f64, f64)> {
    let mut breaks = vec![a, b];
    let len = b - a;
    let mut s = 0.5;
    for _ in 0..levels {
        s *= 0.5;
        breaks.push(a + s * len);
        breaks.push(b - s * len);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut out = Vec::new();
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let p = if hi - lo >= 0.25 * len { inner.max(1) } else { 1 };
        out.extend(composite_panels(lo, hi, p, order));
    }
    out
}

/// Pairwise (cascade) summation; the result depends only on input order.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    match xs.len() {
        0 => T::default(),
        1 => xs[0],
        n if n <= 8 => xs[1..].iter().fold(xs[0], |acc, &v| acc + v),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Element-wise pairwise sum of equally long vectors.
pub fn pairwise_sum_vecs(vs: &[Vec<C64>]) -> Vec<C64> {
    match vs.len() {
        0 => Vec::new(),
        1 => vs[0].clone(),
        n => {
            let (l, r) = vs.split_at(n / 2);
            let mut a = pairwise_sum_vecs(l);
            let b = pairwise_sum_vecs(r);
            if b.len() > a.len() {
                a.resize(b.len(), C64::new(0.0, 0.0));
            }
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        }
    }
}

/// `sum w_k f(x_k)` with pairwise reduction.
pub fn integrate<T, F>(nodes: &[(f64, f64)], f: F) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
    F: Fn(f64) -> T,
{
    let terms: Vec<T> = nodes.iter().map(|&(x, w)| f(x) * w).collect();
    pairwise_sum(&terms)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += s * GK_WK[i];
        if i % 2 == 1 {
            g += s * GK_WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss–Kronrod (7/15) integration of a complex integrand.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate is below `tol` or `max_panels` is reached.
pub fn adaptive_gk<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> (C64, f64) {
    if !(b > a) {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol || panels.len() >= max_panels {
            let mut sorted = panels.clone();
            sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
            let vals: Vec<C64> = sorted.iter().map(|p| p.2).collect();
            return (pairwise_sum(&vals), err);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Real-valued convenience wrapper around [`adaptive_gk`].
pub fn adaptive_real<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_gk(|x| C64::new(f(x), 0.0), a, b, tol, 20_000).0.re
}

/// Least-squares slope of `log|err|` against `log eps`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(err)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Parallel weighted sum of vector-valued terms `f(k)` for `k < count`,
/// reduced in fixed-size chunks so the result is independent of threading.
/// Each term also carries a nonnegative error bound, summed alongside.
pub fn par_vector_sum<F>(count: usize, f: F) -> crate::Result<(Vec<C64>, f64)>
where
    F: Fn(usize) -> crate::Result<(Vec<C64>, f64)> + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 64;
    let mut total: Vec<C64> = Vec::new();
    let mut bound = 0.0;
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let terms: crate::Result<Vec<(Vec<C64>, f64)>> = (start..end).into_par_iter().map(&f).collect();
        let terms = terms?;
        let bounds: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let vecs: Vec<Vec<C64>> = terms.into_iter().map(|t| t.0).collect();
        let part = pairwise_sum_vecs(&vecs);
        if part.len() > total.len() {
            total.resize(part.len(), C64::new(0.0, 0.0));
        }
        for (t, p) in total.iter_mut().zip(&part) {
            *t += p;
        }
        bound += pairwise_sum(&bounds);
        start = end;
    }
    Ok((total, bound))
}

/// Parallel map preserving order.
pub fn par_map<T: Send, F>(count: usize, f: F) -> crate::Result<Vec<T>>
where
    F: Fn(usize) -> crate::Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}
