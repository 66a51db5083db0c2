use std::fmt;

use crate::error::{Result, SpecError};

/// An open subset of the line (or of the circle, in angle coordinates) as a
/// disjoint union of open intervals, kept sorted by left endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenRealSet {
    intervals: Vec<(f64, f64)>,
    pub circle: bool,
}

impl OpenRealSet {
    pub fn new(mut intervals: Vec<(f64, f64)>, circle: bool) -> Result<Self> {
        for &(a, b) in &intervals {
            if a.is_nan() || b.is_nan() || !(a < b) {
                return Err(SpecError::InvalidArgument(format!("empty interval ({a},{b})")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(SpecError::InvalidArgument(format!(
                    "intervals ({},{}) and ({},{}) overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals, circle })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)], false)
    }

    pub fn arc(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)], true)
    }

    /// Parses `(a,b);(c,d)` with `inf`/`-inf` allowed as endpoints.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let inner = part
                .strip_prefix('(')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| SpecError::Parse(format!("expected (a,b), got `{part}`")))?;
            let mut it = inner.split(',');
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(SpecError::Parse(format!("expected two endpoints in `{part}`")));
            };
            let p = |t: &str| {
                t.trim().parse::<f64>().map_err(|_| SpecError::Parse(format!("bad endpoint `{t}`")))
            };
            out.push((p(a)?, p(b)?));
        }
        if out.is_empty() {
            return Err(SpecError::Parse("empty set string".into()));
        }
        Self::new(out, false)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// The first `n` intervals, each shrunk by `s` at both ends (dropped when
    /// nothing remains) and clipped to `[-clip, clip]`.
    pub fn shrunk(&self, n: usize, s: f64, clip: f64) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .take(n)
            .filter_map(|&(a, b)| {
                let lo = (a + s).max(-clip);
                let hi = (b - s).min(clip);
                (lo < hi).then_some((lo, hi))
            })
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }

    pub fn union(&self, other: &OpenRealSet) -> Result<Self> {
        let mut v = self.intervals.clone();
        v.extend_from_slice(&other.intervals);
        Self::new(v, self.circle)
    }
}

impl fmt::Display for OpenRealSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.intervals.iter().map(|(a, b)| format!("({a},{b})")).collect();
        write!(f, "{}", parts.join(";"))
    }
}
