//! Plain-text matrix format.
//!
//! ```text
//! # kind=sa f=n+1 alpha=0 c1=0
//! 1 1 2 0
//! 1 2 -1 0
//! ```
//!
//! The header fixes the kind (`sa` or `u`), the dispersion form, the column
//! decay form and its constant; each further line is `i j re im` (1-based).
//! Lines starting with `#` after the header are comments. A matrix read this
//! way is finite, embedded as `T (+) 0`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::operator::{ColumnDecayOperator, Dispersion, Kind, NullSeq};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct TextHeader {
    pub kind: Kind,
    pub dispersion: Dispersion,
    pub alpha: NullSeq,
    pub c1: f64,
}

fn parse_header(line: &str) -> Result<TextHeader> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| SpecError::Parse("matrix file must start with a `# kind=...` header".into()))?;
    let mut kind = None;
    let mut dispersion = None;
    let mut alpha = NullSeq::Zero;
    let mut c1 = 0.0;
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| SpecError::Parse(format!("header token `{tok}` is not key=value")))?;
        match k {
            "kind" => {
                kind = Some(match v {
                    "sa" => Kind::SelfAdjoint,
                    "u" => Kind::Unitary,
                    _ => return Err(SpecError::Parse(format!("kind must be sa or u, got `{v}`"))),
                })
            }
            "f" => dispersion = Some(Dispersion::parse(v)?),
            "alpha" => alpha = NullSeq::parse(v)?,
            "c1" => c1 = v.parse().map_err(|_| SpecError::Parse(format!("bad c1 `{v}`")))?,
            _ => return Err(SpecError::Parse(format!("unknown header key `{k}`"))),
        }
    }
    Ok(TextHeader {
        kind: kind.ok_or_else(|| SpecError::Parse("header lacks kind=".into()))?,
        dispersion: dispersion.ok_or_else(|| SpecError::Parse("header lacks f=".into()))?,
        alpha,
        c1,
    })
}

/// Reads the text format into a finite operator. Self-adjoint matrices get a
/// Gershgorin enclosure as their spectrum hint.
pub fn read_text_matrix(text: &str) -> Result<ColumnDecayOperator> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| SpecError::Parse("empty matrix file".into()))?;
    let header = parse_header(first.trim())?;
    let mut entries: HashMap<(usize, usize), C64> = HashMap::new();
    let mut dim = 0;
    for (no, line) in lines {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let bad = || SpecError::Parse(format!("line {}: expected `i j re im`, got `{line}`", no + 1));
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 {
            return Err(bad());
        }
        let i: usize = t[0].parse().map_err(|_| bad())?;
        let j: usize = t[1].parse().map_err(|_| bad())?;
        let re: f64 = t[2].parse().map_err(|_| bad())?;
        let im: f64 = t[3].parse().map_err(|_| bad())?;
        if i == 0 || j == 0 {
            return Err(SpecError::Parse(format!("line {}: indices are 1-based", no + 1)));
        }
        dim = dim.max(i).max(j);
        *entries.entry((i, j)).or_default() += C64::new(re, im);
    }
    let real = entries.values().all(|c| c.im == 0.0);
    let mut radius = vec![0.0; dim + 1];
    let mut diag = vec![0.0; dim + 1];
    for (&(i, j), v) in &entries {
        if i == j {
            diag[i] = v.re;
        } else {
            radius[i] += v.norm();
        }
    }
    let lo = (1..=dim).map(|i| diag[i] - radius[i]).fold(0.0, f64::min);
    let hi = (1..=dim).map(|i| diag[i] + radius[i]).fold(0.0, f64::max);
    let entries = Arc::new(entries);
    let mut op = ColumnDecayOperator::new(
        move |i, j| entries.get(&(i, j)).copied().unwrap_or_default(),
        header.kind,
        header.dispersion,
    )
    .with_alpha(header.alpha, header.c1)
    .with_real_entries(real)
    .with_dim(dim.max(1))
    .with_name("matrix_file");
    if header.kind == Kind::SelfAdjoint {
        op = op.with_hint(lo, hi);
    }
    Ok(op)
}

/// Writes the nonzero entries of the section `P_{f(n)} T P_n`.
pub fn write_text_matrix(op: &ColumnDecayOperator, n: usize) -> String {
    let kind = match op.kind {
        Kind::SelfAdjoint => "sa",
        Kind::Unitary => "u",
    };
    let mut out = format!("# kind={kind} f={} alpha={} c1={}\n", op.dispersion, op.alpha, op.c1);
    let rows = op.f(n);
    for j in 1..=n {
        for i in 1..=rows {
            let v = op.entry(i, j);
            if v.re != 0.0 || v.im != 0.0 {
                let _ = writeln!(out, "{i} {j} {:e} {:e}", v.re, v.im);
            }
        }
    }
    out
}
