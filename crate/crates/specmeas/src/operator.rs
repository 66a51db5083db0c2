//! Operators presented as infinite matrices with a known column-decay profile.
//!
//! All indices are 1-based: `entry(i, j) = <T e_j, e_i>`.

use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::error::{Result, SpecError};
use crate::linalg::BandMatrix;
use crate::C64;

pub type EntryFn = Arc<dyn Fn(usize, usize) -> C64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    SelfAdjoint,
    Unitary,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::SelfAdjoint => "sa",
            Kind::Unitary => "u",
        }
    }
}

/// The dispersion `f` bounding where column `n` stops being significant.
#[derive(Debug, Clone, PartialEq)]
pub enum Dispersion {
    /// `f(n) = n + b`.
    Banded(usize),
    /// `f(n) = ceil(n + c sqrt(n) + d)`, never below `n + 1`.
    Sqrt { c: f64, d: f64 },
    /// `f(n) = table[n-1]`; beyond the table the last offset is kept.
    Table(Vec<usize>),
}

impl Dispersion {
    pub fn eval(&self, n: usize) -> usize {
        match self {
            Dispersion::Banded(b) => n + (*b).max(1),
            Dispersion::Sqrt { c, d } => {
                let v = (n as f64 + c * (n as f64).sqrt() + d).ceil();
                (v.max(0.0) as usize).max(n + 1)
            }
            Dispersion::Table(t) => {
                if t.is_empty() {
                    return n + 1;
                }
                let v = if n <= t.len() {
                    t[n - 1]
                } else {
                    let last = t.len();
                    t[last - 1].saturating_sub(last) + n
                };
                v.max(n + 1)
            }
        }
    }

    /// Parses `n+b`, `sqrt(c,d)` or `table(f1,f2,...)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SpecError::Parse(format!("bad dispersion form `{s}`"));
        if s == "n" {
            return Ok(Dispersion::Banded(0));
        }
        if let Some(rest) = s.strip_prefix("n+") {
            return rest.trim().parse().map(Dispersion::Banded).map_err(|_| bad());
        }
        if let Some(args) = strip_call(s, "sqrt") {
            let v = parse_floats(args).map_err(|_| bad())?;
            if v.len() != 2 {
                return Err(bad());
            }
            return Ok(Dispersion::Sqrt { c: v[0], d: v[1] });
        }
        if let Some(args) = strip_call(s, "table") {
            let v: std::result::Result<Vec<usize>, _> =
                args.split(',').map(|t| t.trim().parse::<usize>()).collect();
            return v.map(Dispersion::Table).map_err(|_| bad());
        }
        Err(bad())
    }
}

impl fmt::Display for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dispersion::Banded(b) => write!(f, "n+{b}"),
            Dispersion::Sqrt { c, d } => write!(f, "sqrt({c},{d})"),
            Dispersion::Table(t) => {
                let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
                write!(f, "table({})", parts.join(","))
            }
        }
    }
}

/// A nonnegative null sequence (column or vector tail decay).
#[derive(Debug, Clone, PartialEq)]
pub enum NullSeq {
    Zero,
    /// `n^(-p)`.
    Power(f64),
    /// `r^n`.
    Geometric(f64),
    /// Explicit values; the last value is repeated beyond the table.
    Table(Vec<f64>),
}

impl NullSeq {
    pub fn eval(&self, n: usize) -> f64 {
        let n = n.max(1);
        match self {
            NullSeq::Zero => 0.0,
            NullSeq::Power(p) => (n as f64).powf(-p),
            NullSeq::Geometric(r) => r.powi(n.min(i32::MAX as usize) as i32),
            NullSeq::Table(t) => t.get(n - 1).or(t.last()).copied().unwrap_or(0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NullSeq::Zero => true,
            NullSeq::Table(t) => t.iter().all(|v| *v == 0.0),
            _ => false,
        }
    }

    /// Parses `0`, `pow(p)`, `geom(r)` or `table(v1,...)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SpecError::Parse(format!("bad decay form `{s}`"));
        if s == "0" {
            return Ok(NullSeq::Zero);
        }
        let one = |args: &str| -> Result<f64> {
            let v = parse_floats(args).map_err(|_| bad())?;
            if v.len() == 1 {
                Ok(v[0])
            } else {
                Err(bad())
            }
        };
        if let Some(a) = strip_call(s, "pow") {
            return Ok(NullSeq::Power(one(a)?));
        }
        if let Some(a) = strip_call(s, "geom") {
            return Ok(NullSeq::Geometric(one(a)?));
        }
        if let Some(a) = strip_call(s, "table") {
            return Ok(NullSeq::Table(parse_floats(a).map_err(|_| bad())?));
        }
        Err(bad())
    }
}

impl fmt::Display for NullSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullSeq::Zero => write!(f, "0"),
            NullSeq::Power(p) => write!(f, "pow({p})"),
            NullSeq::Geometric(r) => write!(f, "geom({r})"),
            NullSeq::Table(t) => {
                let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
                write!(f, "table({})", parts.join(","))
            }
        }
    }
}

fn strip_call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|t| t.trim().parse::<f64>()).collect()
}

/// Where the possibly nonzero part of column `j` starts.
#[derive(Debug, Clone, PartialEq)]
pub enum RowStart {
    /// Mirror of the dispersion: first `i` with `f(i) >= j` (self-adjoint).
    FromDispersion,
    /// `max(1, j - k)`.
    Offset(usize),
    /// Every row from 1.
    Dense,
}

/// Cached columns `1..=n_max`, each over a contiguous row range.
#[derive(Default)]
struct ColumnStore {
    row_lo: Vec<usize>,
    cols: Vec<Vec<C64>>,
    /// Rows covered when `alpha` is nonzero (columns are then cut at `f(n)`).
    dense_rows: usize,
}

/// An operator on `l^2(N)` with column decay `||(I - P_f(n)) T P_n|| <= c1 alpha_n`.
pub struct ColumnDecayOperator {
    entry: EntryFn,
    pub kind: Kind,
    pub dispersion: Dispersion,
    pub alpha: NullSeq,
    pub c1: f64,
    pub bounded_hint: Option<(f64, f64)>,
    pub row_start: RowStart,
    /// All entries real: lets `R(conj z) x` be obtained from `R(z) conj(x)`.
    pub real_entries: bool,
    /// Finite-dimensional operators (e.g. a graph patch) embed as `T (+) 0`.
    pub dim: Option<usize>,
    pub name: String,
    store: RwLock<ColumnStore>,
}

impl fmt::Debug for ColumnDecayOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ColumnDecayOperator")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("dispersion", &self.dispersion)
            .field("alpha", &self.alpha)
            .field("c1", &self.c1)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ColumnDecayOperator {
    pub fn new(
        entry: impl Fn(usize, usize) -> C64 + Send + Sync + 'static,
        kind: Kind,
        dispersion: Dispersion,
    ) -> Self {
        let row_start = match kind {
            Kind::SelfAdjoint => RowStart::FromDispersion,
            Kind::Unitary => RowStart::Dense,
        };
        Self {
            entry: Arc::new(entry),
            kind,
            dispersion,
            alpha: NullSeq::Zero,
            c1: 0.0,
            bounded_hint: None,
            row_start,
            real_entries: false,
            dim: None,
            name: "custom".into(),
            store: RwLock::new(ColumnStore::default()),
        }
    }

    pub fn with_alpha(mut self, alpha: NullSeq, c1: f64) -> Self {
        self.alpha = alpha;
        self.c1 = c1;
        self
    }

    pub fn with_hint(mut self, lo: f64, hi: f64) -> Self {
        self.bounded_hint = Some((lo, hi));
        self
    }

    pub fn with_row_start(mut self, rs: RowStart) -> Self {
        self.row_start = rs;
        self
    }

    pub fn with_real_entries(mut self, real: bool) -> Self {
        self.real_entries = real;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Raw matrix element `<T e_j, e_i>` (1-based); zero outside `dim`.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if let Some(d) = self.dim {
            if i > d || j > d {
                return C64::new(0.0, 0.0);
            }
        }
        (self.entry)(i, j)
    }

    /// The dispersion, clipped to the dimension of finite operators.
    pub fn f(&self, n: usize) -> usize {
        let v = self.dispersion.eval(n);
        match self.dim {
            Some(d) => v.min(d.max(n)),
            None => v,
        }
    }

    /// Effective column count for truncation `n` (clipped to `dim`).
    pub fn cols_for(&self, n: usize) -> usize {
        match self.dim {
            Some(d) => n.min(d),
            None => n,
        }
    }

    pub fn first_row(&self, j: usize) -> usize {
        match &self.row_start {
            RowStart::Dense => 1,
            RowStart::Offset(k) => j.saturating_sub(*k).max(1),
            RowStart::FromDispersion => {
                // f is nondecreasing in practice; binary search the first i with f(i) >= j.
                if j <= 1 {
                    return 1;
                }
                let (mut lo, mut hi) = (1usize, j);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if self.dispersion.eval(mid) >= j {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                lo
            }
        }
    }

    /// Last row retained in column `j` of the section with `n` columns.
    fn last_row(&self, j: usize, n: usize) -> usize {
        let m = self.f(n);
        if self.alpha.is_zero() {
            self.f(j).min(m)
        } else {
            m
        }
    }

    fn ensure_columns(&self, n: usize) {
        {
            let st = self.store.read();
            let need_rows = if self.alpha.is_zero() { 0 } else { self.f(n) };
            if st.cols.len() >= n && st.dense_rows >= need_rows {
                return;
            }
        }
        let mut st = self.store.write();
        let dense = !self.alpha.is_zero();
        let need_rows = if dense { self.f(n) } else { 0 };
        if dense && st.dense_rows < need_rows {
            st.cols.clear();
            st.row_lo.clear();
            st.dense_rows = need_rows;
        }
        let target = n.max(st.cols.len());
        let rows_cap = st.dense_rows;
        for j in (st.cols.len() + 1)..=target {
            let lo = self.first_row(j);
            let hi = if dense { rows_cap } else { self.f(j) };
            let col: Vec<C64> = (lo..=hi).map(|i| self.entry(i, j)).collect();
            st.row_lo.push(lo);
            st.cols.push(col);
        }
    }

    /// The section `P_{f(n)} (T - z) P_n` as a band matrix (zero-based).
    pub fn rect_truncation(&self, n: usize, z: C64) -> BandMatrix {
        let n = self.cols_for(n).max(1);
        self.ensure_columns(n);
        let m = self.f(n).max(n);
        let st = self.store.read();
        let mut kl = 0usize;
        let mut ku = 0usize;
        for j in 1..=n {
            let lo = st.row_lo[j - 1];
            let hi = self.last_row(j, n);
            ku = ku.max(j - lo.min(j));
            kl = kl.max(hi.saturating_sub(j));
        }
        let mut a = BandMatrix::zeros(m, n, kl, ku);
        for j in 1..=n {
            let lo = st.row_lo[j - 1];
            let hi = self.last_row(j, n);
            for (t, v) in st.cols[j - 1].iter().enumerate() {
                let i = lo + t;
                if i > hi {
                    break;
                }
                if *v != C64::new(0.0, 0.0) {
                    a.set(i - 1, j - 1, *v);
                }
            }
        }
        drop(st);
        a.add_diag(-z);
        a
    }

    /// `||(P_cutoff - P_f(n)) T P_n||` via the Frobenius norm of the block,
    /// a computable stand-in for the tail the decay constants must dominate.
    pub fn tail_norm_estimate(&self, n: usize, cutoff: usize) -> f64 {
        let m = self.f(n);
        let mut s = 0.0;
        for j in 1..=n {
            for i in (m + 1)..=cutoff {
                s += self.entry(i, j).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Largest deviation from Hermitian symmetry over the given index pairs.
    pub fn hermiticity_defect(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs
            .iter()
            .map(|&(i, j)| (self.entry(i, j) - self.entry(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Default lower bound on `dist(z, sigma(T))`.
    pub fn dist_lower_bound(&self, z: C64) -> f64 {
        match self.kind {
            Kind::SelfAdjoint => {
                let mut d = z.im.abs();
                if let Some((lo, hi)) = self.bounded_hint {
                    let dx = if z.re < lo {
                        lo - z.re
                    } else if z.re > hi {
                        z.re - hi
                    } else {
                        0.0
                    };
                    d = d.max((dx * dx + z.im * z.im).sqrt());
                }
                d
            }
            Kind::Unitary => (z.norm() - 1.0).abs(),
        }
    }

    pub fn check_z(&self, z: C64) -> Result<()> {
        let ok = match self.kind {
            Kind::SelfAdjoint => z.im != 0.0 || self.dist_lower_bound(z) > 0.0,
            Kind::Unitary => z.norm() != 1.0 && z.norm() != 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SpecError::OnSpectrum { re: z.re, im: z.im, kind: self.kind.label() })
        }
    }
}

/// A vector `x` with tail bound `||P_n x - x|| <= c2 beta_n`.
#[derive(Clone)]
pub struct DecayVector {
    coeff: Arc<dyn Fn(usize) -> C64 + Send + Sync>,
    /// Known finite support length, if any.
    pub support: Option<usize>,
    pub beta: NullSeq,
    pub c2: f64,
}

impl fmt::Debug for DecayVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecayVector")
            .field("support", &self.support)
            .field("beta", &self.beta)
            .field("c2", &self.c2)
            .finish()
    }
}

impl DecayVector {
    /// The standard basis vector `e_j` (1-based).
    pub fn basis(j: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); j];
        v[j - 1] = C64::new(1.0, 0.0);
        Self::finite(v)
    }

    /// A finitely supported vector with coefficients `v[0] = x_1, ...`.
    pub fn finite(v: Vec<C64>) -> Self {
        let len = v.len();
        let v = Arc::new(v);
        Self {
            coeff: Arc::new(move |i| if i >= 1 && i <= v.len() { v[i - 1] } else { C64::new(0.0, 0.0) }),
            support: Some(len),
            beta: NullSeq::Zero,
            c2: 0.0,
        }
    }

    pub fn from_oracle(
        coeff: impl Fn(usize) -> C64 + Send + Sync + 'static,
        beta: NullSeq,
        c2: f64,
    ) -> Self {
        Self { coeff: Arc::new(coeff), support: None, beta, c2 }
    }

    pub fn coeff(&self, i: usize) -> C64 {
        (self.coeff)(i)
    }

    /// `P_m x` as a dense vector of length `m`.
    pub fn head(&self, m: usize) -> Vec<C64> {
        (1..=m).map(|i| self.coeff(i)).collect()
    }

    /// Certified bound on `||x - P_m x||`.
    pub fn tail_bound(&self, m: usize) -> f64 {
        match self.support {
            Some(s) if m >= s => 0.0,
            Some(s) => ((m + 1)..=s).map(|i| self.coeff(i).norm_sqr()).sum::<f64>().sqrt(),
            None => self.c2 * self.beta.eval(m),
        }
    }

    pub fn is_real(&self, m: usize) -> bool {
        self.head(m).iter().all(|c| c.im == 0.0)
    }

    pub fn conj(&self) -> Self {
        let inner = self.coeff.clone();
        Self {
            coeff: Arc::new(move |i| inner(i).conj()),
            support: self.support,
            beta: self.beta.clone(),
            c2: self.c2,
        }
    }

    /// Norm of the known head `P_m x`.
    pub fn head_norm(&self, m: usize) -> f64 {
        self.head(m).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_estimate(&self) -> f64 {
        let m = self.support.unwrap_or(4096);
        self.head_norm(m) + self.tail_bound(m)
    }
}

/// Interleaving map identifying `l^2(Z)` with `l^2(N)`:
/// `0, 1, -1, 2, -2, ...` map to `1, 2, 3, 4, 5, ...`.
pub fn interleave_z_to_n(k: i64) -> usize {
    if k > 0 {
        (2 * k) as usize
    } else {
        (1 - 2 * k) as usize
    }
}

pub fn interleave_n_to_z(n: usize) -> i64 {
    if n % 2 == 0 {
        (n / 2) as i64
    } else {
        -((n as i64 - 1) / 2)
    }
}
