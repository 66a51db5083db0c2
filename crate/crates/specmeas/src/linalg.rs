//! Banded and dense complex least squares.
//!
//! The banded QR is the workhorse behind every resolvent solve: a rectangular
//! `m x n` section with lower bandwidth `kl` and upper bandwidth `ku` is
//! reduced by Householder reflections in `O(n * kl * (kl + ku))` operations.

use crate::error::{Result, SpecError};
use crate::C64;

/// Rectangular band matrix stored column-major with room for QR fill-in.
///
/// Column `j` holds rows `j - (kl + ku) ..= j + kl`; entries outside the
/// original upper band start at zero and are filled by the factorization.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub m: usize,
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(m: usize, n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { m, n, kl, ku, ld, data: vec![C64::new(0.0, 0.0); ld * n] }
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.m && j < self.n && i + self.kl + self.ku >= j && i <= j + self.kl
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ld
    }

    /// Entry `(i, j)`, zero-based; zero outside the stored band.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Sets entry `(i, j)`. Panics if the position is outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_diag(&mut self, shift: C64) {
        for j in 0..self.n.min(self.m) {
            let k = self.idx(j, j);
            self.data[k] += shift;
        }
    }

    /// `A y` for `y` of length `n`.
    pub fn mul_vec(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.kl + self.ku);
            let hi = (j + self.kl).min(self.m - 1);
            for i in lo..=hi {
                out[i] += self.data[self.idx(i, j)] * y[j];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.m, self.n);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.kl + self.ku);
            let hi = (j + self.kl).min(self.m.saturating_sub(1));
            for i in lo..=hi {
                d[(i, j)] = self.data[self.idx(i, j)];
            }
        }
        d
    }
}

/// Result of a banded least-squares solve with several right-hand sides.
#[derive(Debug, Clone)]
pub struct BandLsq {
    pub solutions: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    /// Upper-triangular factor, kept for the singular-value gate.
    pub r: BandMatrix,
}

/// Householder reflector for `x`, returned as `(v, scale, alpha)` with
/// `(I - scale v v^H) x = alpha e_1`.
fn householder(x: &[C64]) -> (Vec<C64>, f64, C64) {
    let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (vec![C64::new(0.0, 0.0); x.len()], 0.0, C64::new(0.0, 0.0));
    }
    let x0 = x[0];
    let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
    let alpha = -phase * norm;
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vv: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let scale = if vv == 0.0 { 0.0 } else { 2.0 / vv };
    (v, scale, alpha)
}

/// Minimizes `||A y - b||` for every `b` in `rhs` (each of length `A.m`).
pub fn band_least_squares(mut a: BandMatrix, mut rhs: Vec<Vec<C64>>) -> Result<BandLsq> {
    let (m, n, kl, ku) = (a.m, a.n, a.kl, a.ku);
    if m < n {
        return Err(SpecError::InvalidArgument(format!("underdetermined band system {m}x{n}")));
    }
    for b in &rhs {
        if b.len() != m {
            return Err(SpecError::InvalidArgument("right-hand side length mismatch".into()));
        }
    }
    let mut x = Vec::with_capacity(kl + 1);
    for k in 0..n {
        let last = (k + kl).min(m - 1);
        x.clear();
        for i in k..=last {
            x.push(a.data[a.idx(i, k)]);
        }
        let (v, scale, alpha) = householder(&x);
        if scale == 0.0 {
            continue;
        }
        let kk = a.idx(k, k);
        a.data[kk] = alpha;
        for i in (k + 1)..=last {
            let id = a.idx(i, k);
            a.data[id] = C64::new(0.0, 0.0);
        }
        let cmax = (k + kl + ku).min(n - 1);
        for c in (k + 1)..=cmax {
            let base = a.idx(k, c);
            let mut dot = C64::new(0.0, 0.0);
            for (t, vt) in v.iter().enumerate() {
                dot += vt.conj() * a.data[base + t];
            }
            let f = dot * scale;
            for (t, vt) in v.iter().enumerate() {
                a.data[base + t] -= vt * f;
            }
        }
        for b in rhs.iter_mut() {
            let mut dot = C64::new(0.0, 0.0);
            for (t, vt) in v.iter().enumerate() {
                dot += vt.conj() * b[k + t];
            }
            let f = dot * scale;
            for (t, vt) in v.iter().enumerate() {
                b[k + t] -= vt * f;
            }
        }
    }
    let w = kl + ku;
    let mut solutions = Vec::with_capacity(rhs.len());
    let mut residuals = Vec::with_capacity(rhs.len());
    for b in rhs {
        let res = b[n..].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut y = b[..n].to_vec();
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..=(i + w).min(n - 1) {
                s -= a.data[a.idx(i, j)] * y[j];
            }
            let d = a.data[a.idx(i, i)];
            if d.norm() == 0.0 {
                return Err(SpecError::Singular(n));
            }
            y[i] = s / d;
        }
        solutions.push(y);
        residuals.push(res);
    }
    Ok(BandLsq { solutions, residuals, r: a })
}

/// Smallest-singular-value test on an upper band factor `R`: true iff
/// `R^H R - eps^2 I` admits a Cholesky factorization.
pub fn band_sigma_exceeds(r: &BandMatrix, eps: f64) -> bool {
    let n = r.n;
    let w = r.kl + r.ku;
    // Lower band of B = R^H R, row-major by (i, i - j) with 0 <= i - j <= w.
    let mut b = vec![C64::new(0.0, 0.0); n * (w + 1)];
    for i in 0..n {
        for j in i.saturating_sub(w)..=i {
            let mut s = C64::new(0.0, 0.0);
            for k in i.saturating_sub(w)..=j {
                if j <= k + w {
                    s += r.get(k, i).conj() * r.get(k, j);
                }
            }
            b[i * (w + 1) + (i - j)] = s;
        }
    }
    for i in 0..n {
        b[i * (w + 1)] -= eps * eps;
    }
    // In-place banded Cholesky, L stored in the same layout.
    for j in 0..n {
        let mut d = b[j * (w + 1)].re;
        for k in j.saturating_sub(w)..j {
            d -= b[j * (w + 1) + (j - k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        b[j * (w + 1)] = C64::new(d, 0.0);
        for i in (j + 1)..=(j + w).min(n - 1) {
            let mut s = b[i * (w + 1) + (i - j)];
            for k in i.saturating_sub(w)..j {
                s -= b[i * (w + 1) + (i - k)] * b[j * (w + 1) + (j - k)].conj();
            }
            b[i * (w + 1) + (i - j)] = s / d;
        }
    }
    true
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut d = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                d[(i, j)] = f(i, j);
            }
        }
        d
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn mul_vec(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for (j, yj) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.col(j)) {
                *o += a * yj;
            }
        }
        out
    }

    /// `A^H A`.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: C64 = self.col(i).iter().zip(self.col(j)).map(|(a, b)| a.conj() * b).sum();
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
        }
        g
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i + j * self.rows]
    }
}

/// Decides `sigma_min(M) > eps` for `B = M^H M` by Cholesky on `B - eps^2 I`.
pub fn pd_test(b: &DenseMatrix, eps: f64) -> Result<bool> {
    if b.rows != b.cols {
        return Err(SpecError::InvalidArgument(format!(
            "pd_test needs a square matrix, got {}x{}",
            b.rows, b.cols
        )));
    }
    if !(eps > 0.0) {
        return Err(SpecError::InvalidArgument("eps must be positive".into()));
    }
    let n = b.rows;
    let mut l = b.clone();
    for i in 0..n {
        l[(i, i)] -= eps * eps;
    }
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Ok(false);
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in (j + 1)..n {
            // Use the Hermitian lower triangle of B.
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(true)
}

/// Outcome of a dense least-squares solve with column pivoting.
#[derive(Debug, Clone)]
pub struct DenseLsq {
    pub x: Vec<C64>,
    pub residual: f64,
    /// `|R_11| / |R_kk|` over the retained pivots.
    pub condition_estimate: f64,
    pub rank: usize,
}

/// Least squares by Householder QR with column pivoting.
///
/// Columns whose pivot falls below `rcond * |R_11|` are dropped (rank
/// truncation); the rank is reported.
pub fn dense_least_squares(a: &DenseMatrix, b: &[C64], rcond: f64) -> Result<DenseLsq> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(SpecError::InvalidArgument("right-hand side length mismatch".into()));
    }
    let mut q = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| q.col(j).iter().map(|c| c.norm_sqr()).sum()).collect();
    let kmax = m.min(n);
    let mut rank = kmax;
    let mut r11 = 0.0;
    let mut rkk = 0.0;
    for k in 0..kmax {
        // Recompute trailing norms exactly; M is small enough for this.
        for j in k..n {
            norms[j] = (k..m).map(|i| q[(i, j)].norm_sqr()).sum();
        }
        let p = (k..n).max_by(|&x, &y| norms[x].total_cmp(&norms[y])).unwrap_or(k);
        if p != k {
            for i in 0..m {
                let t = q[(i, k)];
                q[(i, k)] = q[(i, p)];
                q[(i, p)] = t;
            }
            perm.swap(k, p);
            norms.swap(k, p);
        }
        let x: Vec<C64> = (k..m).map(|i| q[(i, k)]).collect();
        let (v, scale, alpha) = householder(&x);
        if k == 0 {
            r11 = alpha.norm();
        }
        if alpha.norm() <= rcond * r11 || r11 == 0.0 {
            rank = k;
            break;
        }
        rkk = alpha.norm();
        q[(k, k)] = alpha;
        for i in (k + 1)..m {
            q[(i, k)] = C64::new(0.0, 0.0);
        }
        for j in (k + 1)..n {
            let dot: C64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * q[(k + t, j)]).sum();
            let f = dot * scale;
            for (t, vt) in v.iter().enumerate() {
                q[(k + t, j)] -= vt * f;
            }
        }
        let dot: C64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * rhs[k + t]).sum();
        let f = dot * scale;
        for (t, vt) in v.iter().enumerate() {
            rhs[k + t] -= vt * f;
        }
    }
    if rank == 0 {
        return Err(SpecError::RankDeficient(f64::INFINITY));
    }
    let mut y = vec![C64::new(0.0, 0.0); n];
    for i in (0..rank).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..rank {
            s -= q[(i, j)] * y[j];
        }
        y[i] = s / q[(i, i)];
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    let ax = a.mul_vec(&x);
    let residual = ax.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    Ok(DenseLsq { x, residual, condition_estimate: r11 / rkk, rank })
}

/// Smallest singular value of a dense matrix via one-sided Jacobi sweeps.
/// Used as an independent oracle and for condition reporting.
pub fn smallest_singular_value(a: &DenseMatrix) -> f64 {
    let (m, n) = (a.rows, a.cols);
    let mut u = a.clone();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..m {
                    alpha += u[(i, p)].norm_sqr();
                    beta += u[(i, q)].norm_sqr();
                    gamma += u[(i, p)].conj() * u[(i, q)];
                }
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                off = off.max(g / (alpha * beta).sqrt());
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = up * c - uq * phase.conj() * s;
                    u[(i, q)] = up * phase * s + uq * c;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    (0..n)
        .map(|j| u.col(j).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}
