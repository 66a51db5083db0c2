use thiserror::Error;

use crate::resolvent::ResolventSolution;

pub type Result<T> = std::result::Result<T, SpecError>;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("z = {re}{im:+}i lies on the spectral locus of a {kind} operator")]
    OnSpectrum { re: f64, im: f64, kind: &'static str },

    #[error("not converged at cap n = {n}: bound {bound:.3e} > tol {tol:.3e}")]
    NotConverged {
        n: usize,
        bound: f64,
        tol: f64,
        partial: Box<ResolventSolution>,
    },

    #[error("singular least-squares system at n = {0}; increase n")]
    Singular(usize),

    #[error("contour node {re}{im:+}i failed: {source}")]
    ContourNode {
        re: f64,
        im: f64,
        #[source]
        source: Box<SpecError>,
    },

    #[error("rank-deficient system (condition estimate {0:.3e})")]
    RankDeficient(f64),

    #[error("truncation n = {n} exceeds the constructed patch (f(n) = {fn_} > {size})")]
    PatchTooSmall { n: usize, fn_: usize, size: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
