//! Subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use specmeas::collocation::{collocate, default_points, reconstruct, BasisFamily};
use specmeas::decompositions::{
    ac_spectrum_stage, measure_decomposition, pp_spectrum_stage, sc_spectrum_stage, DecompositionOptions,
    SpectrumOptions, TowerStage,
};
use specmeas::density::{extrapolated_density, rn_derivative, KnotSchedule};
use specmeas::funcalc::{apply_cb_function, evolve, BoundedFunctionSpec, Equation, EvolveOptions};
use specmeas::gallery::{self, make_penrose, GalleryOperator};
use specmeas::poisson::{detect_atoms, smoothed_density, spectral_projection, stage_intervals, MeasureOptions};
use specmeas::quadrature::composite;
use specmeas::resolvent::{resolvent_action, resolvent_action_adaptive, ResolventOptions};
use specmeas::textio::{read_text_matrix, write_text_matrix};
use specmeas::{ColumnDecayOperator, DecayVector, Kind, OpenRealSet, C64};

use crate::output::{emit, io_err, write_file, Csv};
use crate::{config, expr, reproduce, CliError};

#[derive(Debug, Parser)]
#[command(name = "specmeas", version, about = "Spectral measures and functional calculus of infinite matrices")]
pub struct Cli {
    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OpArgs {
    /// Gallery operator name (see `gallery list`).
    #[arg(long = "op")]
    pub op: Option<String>,
    /// Gallery parameters, `k=v,k=v`.
    #[arg(long, default_value = "")]
    pub params: String,
    /// Operator in the text matrix format instead of a gallery name.
    #[arg(long, conflicts_with = "op")]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VecArgs {
    /// Vector `e_j`, written `e1`, `e2`, ...
    #[arg(long, default_value = "e1")]
    pub x: String,
    /// Vector file: one `re [im]` pair per line.
    #[arg(long, conflicts_with = "x")]
    pub x_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EquationArg {
    Schrodinger,
    Diffusion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpectrumType {
    Pp,
    Ac,
    Sc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    Chebyshev,
    Laguerre,
    Fourier,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// R(z)x with its certified error bound; CSV `index,re,im`.
    Resolve {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        /// Spectral parameter, e.g. `0.5+1e-2i`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Fixed truncation instead of the adaptive solve.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadrature contributions to mu_{x,y}(U); CSV `u,value_re,value_im,bound`.
    Measure {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long)]
        y: Option<String>,
        /// Open set `(a,b);(c,d)`.
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// E_U x at stage n; CSV `index,re,im`.
    Project {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Atoms of mu_x in [lo, hi]; CSV `point,weight`.
    Atoms {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        /// Scan grid spacing.
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smoothed Radon-Nikodym derivative; CSV `u,re,im`.
    Density {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long)]
        y: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Richardson depth (x = y only).
        #[arg(long, default_value_t = 0)]
        richardson: usize,
        /// `strict` or `pereps:K`.
        #[arg(long, default_value = "pereps:8")]
        schedule: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// F(T)x for a bounded continuous F given as an expression in `l` and `t`.
    Funcalc {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long = "f", allow_hyphen_values = true)]
        f: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        /// Stage of the approximation.
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Lipschitz constant of F; estimated on a grid when omitted.
        #[arg(long)]
        lipschitz: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// u(t) for du/dt = -iTu, or du/dt = -A^alpha u when --alpha is given.
    Evolve {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long, value_enum)]
        equation: Option<EquationArg>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t: f64,
        /// Snapshots at t k / snapshots, k = 1..snapshots.
        #[arg(long, default_value_t = 1)]
        snapshots: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// (pp, ac, sc) parts of mu_x(U) at stages n1,n2; JSON.
    Decompose {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long, default_value = "20,10")]
        stages: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral-set stage as an interval list; JSON.
    Spectrum {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long = "type", value_enum)]
        kind: SpectrumType,
        /// `n1,n2` (pp, ac) or `n1,n2,n3` (sc).
        #[arg(long, default_value = "16,4")]
        stages: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collocation for the density of mu_x in a basis; CSV `m,re,im`.
    Collocate {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        x: VecArgs,
        #[arg(long, value_enum)]
        basis: BasisArg,
        /// Number of basis functions.
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Known atoms `point:weight;point:weight`, subtracted first.
        #[arg(long, allow_hyphen_values = true)]
        atoms: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampled density CSV `u,re,im`.
        #[arg(long)]
        density_out: Option<PathBuf>,
    },
    /// Gallery operators.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
    /// Recomputes one of the reference experiments with a pass/fail summary.
    Reproduce {
        #[arg(long)]
        figure: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Runs a JSON run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GalleryAction {
    /// Names with parameters and defaults; CSV `name,params`.
    List {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The section `P_{f(n)} T P_n` in the text matrix format.
    Dump {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("parameter `{part}` is not k=v")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage(format!("parameter `{k}` has non-numeric value `{v}`")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Parses `a+bi`, `a-bi`, `bi`, `a`.
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || usage(format!("bad complex number `{s}` (expected a+bi)"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let im_of = |p: &str| -> Result<f64, CliError> {
        match p {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => p.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok(C64::new(body[..k].parse().map_err(|_| bad())?, im_of(&body[k..])?)),
        None => Ok(C64::new(0.0, im_of(body)?)),
    }
}

fn parse_stages(s: &str, count: &[usize]) -> Result<Vec<usize>, CliError> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad stage list `{s}`")))?;
    if !count.contains(&v.len()) {
        return Err(usage(format!("expected {count:?} stage indices, got `{s}`")));
    }
    Ok(v)
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("SPECMEAS_CACHE_DIR").map(PathBuf::from)
}

/// Gallery operator by name, reading and writing the Penrose patch through
/// the entry cache when `SPECMEAS_CACHE_DIR` is set.
pub fn gallery_operator(name: &str, params: &BTreeMap<String, f64>) -> Result<GalleryOperator, CliError> {
    if name == "penrose" {
        let radius = params.get("radius").copied().unwrap_or(20.0);
        if params.keys().any(|k| k != "radius") {
            return Err(usage("penrose takes only `radius`"));
        }
        if let Some(dir) = cache_dir() {
            let path = dir.join(format!("penrose_r{radius}.txt"));
            if let Ok(text) = std::fs::read_to_string(&path) {
                let op = read_text_matrix(&text)?.with_name(format!("penrose({radius})"));
                return Ok(GalleryOperator { op: Arc::new(op), reference: gallery::ReferenceMeasure::unknown() });
            }
            let patch = make_penrose(radius)?;
            write_file(&path, &write_text_matrix(&patch.op, patch.len()))?;
            return Ok(patch.gallery());
        }
        return Ok(make_penrose(radius)?.gallery());
    }
    Ok(gallery::by_name(name, params)?)
}

pub fn load_operator(a: &OpArgs) -> Result<Arc<ColumnDecayOperator>, CliError> {
    match (&a.op, &a.matrix) {
        (Some(name), None) => Ok(gallery_operator(name, &parse_params(&a.params)?)?.op),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Ok(Arc::new(read_text_matrix(&text)?))
        }
        _ => Err(usage("give exactly one of --op NAME or --matrix FILE")),
    }
}

fn parse_basis_vector(s: &str) -> Result<DecayVector, CliError> {
    let j: usize = s
        .trim()
        .strip_prefix('e')
        .and_then(|d| d.parse().ok())
        .filter(|&j| j >= 1)
        .ok_or_else(|| usage(format!("vector must be e1, e2, ..., got `{s}`")))?;
    Ok(DecayVector::basis(j))
}

pub fn load_vector(a: &VecArgs) -> Result<DecayVector, CliError> {
    let Some(path) = &a.x_file else {
        return parse_basis_vector(&a.x);
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut v = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("{}:{}: expected `re [im]`", path.display(), no + 1)))?;
        match nums.as_slice() {
            [re] => v.push(C64::new(*re, 0.0)),
            [re, im] => v.push(C64::new(*re, *im)),
            _ => return Err(usage(format!("{}:{}: expected `re [im]`", path.display(), no + 1))),
        }
    }
    if v.is_empty() {
        return Err(usage(format!("{} holds no coefficients", path.display())));
    }
    Ok(DecayVector::finite(v))
}

fn op_meta(csv: &mut Csv, op: &ColumnDecayOperator) {
    csv.meta("operator", &op.name).meta("kind", op.kind.label()).meta("dispersion", &op.dispersion);
}

fn vector_csv(coeffs: &[C64]) -> Csv {
    let mut csv = Csv::new(&["index", "re", "im"]);
    for (k, c) in coeffs.iter().enumerate() {
        csv.row(&[(k + 1) as f64, c.re, c.im]);
    }
    csv
}

/// Largest slope of `f` on a grid over `[lo, hi]`, with a safety factor.
fn estimate_lipschitz(f: &dyn Fn(f64) -> C64, lo: f64, hi: f64) -> f64 {
    let m = 4096;
    let h = (hi - lo) / m as f64;
    let mut best: f64 = 0.0;
    let mut prev = f(lo);
    for k in 1..=m {
        let cur = f(lo + k as f64 * h);
        best = best.max((cur - prev).norm() / h);
        prev = cur;
    }
    (1.5 * best).max(1e-3)
}

fn stage_json(s: &TowerStage) -> serde_json::Value {
    json!({ "value": s.scalar_value(), "bound": s.bound, "indices": s.indices, "kind": s.kind.label() })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // A pool may already exist when `run` re-enters for a config file.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    execute(cli.command)
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Resolve { op, x, z, tol, n, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let z = parse_complex(&z)?;
            let sol = match n {
                Some(n) => resolvent_action(&opr, &xv, z, n)?,
                None => resolvent_action_adaptive(&opr, &xv, z, tol, &ResolventOptions::default())?,
            };
            let mut csv = vector_csv(&sol.coeffs);
            op_meta(&mut csv, &opr);
            csv.meta("z", format!("{}{:+}i", z.re, z.im))
                .meta("n_used", sol.n_used)
                .meta("residual", sol.residual)
                .meta("bound", sol.bound)
                .meta("units", "index 1-based; re,im of the coefficient");
            emit(&csv.render(), out.as_deref())
        }
        Command::Measure { op, x, y, set, n, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let yv = match &y {
                Some(s) => parse_basis_vector(s)?,
                None => xv.clone(),
            };
            let u = OpenRealSet::parse(&set)?;
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let mo = MeasureOptions::default().with_tol(tol);
            let eps = 1.0 / n as f64;
            let mut nodes = Vec::new();
            for (a, b) in stage_intervals(&opr, &u, n) {
                nodes.extend(composite(a, b, eps * mo.panel_factor, mo.order));
            }
            let vals = specmeas::quadrature::par_map(nodes.len(), |k| {
                smoothed_density(&opr, &xv, &yv, nodes[k].0, eps, &mo)
            })?;
            let mut csv = Csv::new(&["u", "value_re", "value_im", "bound"]);
            op_meta(&mut csv, &opr);
            let mut total = C64::new(0.0, 0.0);
            let mut total_bound = 0.0;
            for (&(t, w), (v, b)) in nodes.iter().zip(&vals) {
                csv.row(&[t, w * v.re, w * v.im, w * b]);
                total += v * w;
                total_bound += w * b;
            }
            csv.meta("set", &u)
                .meta("stage", n)
                .meta("eps", eps)
                .meta("total", format!("{}{:+}i", total.re, total.im))
                .meta("total_bound", total_bound)
                .meta("units", "u spectral parameter; value quadrature contribution to mu(U)");
            emit(&csv.render(), out.as_deref())
        }
        Command::Project { op, x, set, n, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let u = OpenRealSet::parse(&set)?;
            let (v, b) = spectral_projection(&opr, &xv, &u, n, &MeasureOptions::default().with_tol(tol))?;
            let mut csv = vector_csv(&v);
            op_meta(&mut csv, &opr);
            csv.meta("set", &u).meta("stage", n).meta("bound", b).meta("units", "index 1-based; re,im of E_U x");
            emit(&csv.render(), out.as_deref())
        }
        Command::Atoms { op, x, lo, hi, h, eps, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            if !(hi > lo && h > 0.0 && eps > 0.0) {
                return Err(usage("need lo < hi, h > 0 and eps > 0"));
            }
            let atoms = detect_atoms(&opr, &xv, lo, hi, h, eps, &MeasureOptions::default().with_tol(tol))?;
            let mut csv = Csv::new(&["point", "weight"]);
            op_meta(&mut csv, &opr);
            csv.meta("window", format!("[{lo}, {hi}]")).meta("eps", eps).meta("units", "point spectral parameter; weight mass");
            for a in atoms {
                csv.row(&[a.point, a.weight]);
            }
            emit(&csv.render(), out.as_deref())
        }
        Command::Density { op, x, y, set, n, richardson, schedule, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let yv = match &y {
                Some(s) => Some(parse_basis_vector(s)?),
                None => None,
            };
            let u = OpenRealSet::parse(&set)?;
            let sched = if schedule == "strict" {
                KnotSchedule::Strict
            } else if let Some(k) = schedule.strip_prefix("pereps:") {
                KnotSchedule::PerEps(k.parse().map_err(|_| usage(format!("bad schedule `{schedule}`")))?)
            } else {
                return Err(usage(format!("schedule must be strict or pereps:K, got `{schedule}`")));
            };
            let mo = MeasureOptions::default().with_tol(tol);
            let dens = rn_derivative(&opr, &xv, yv.as_ref().unwrap_or(&xv), &u, n, sched, &mo)?;
            let mut csv = Csv::new(&["u", "re", "im"]);
            op_meta(&mut csv, &opr);
            csv.meta("set", &u).meta("stage", n).meta("eps", dens.epsilon).meta("richardson", richardson);
            if richardson > 0 {
                if yv.is_some() {
                    return Err(usage("--richardson needs y = x"));
                }
                let knots: Vec<f64> = dens.pieces.iter().flat_map(|p| p.knots.iter().copied()).collect();
                let vals = specmeas::quadrature::par_map(knots.len(), |k| {
                    extrapolated_density(&opr, &xv, knots[k], dens.epsilon, richardson, &mo)
                })?;
                for (t, v) in knots.iter().zip(vals) {
                    csv.row(&[*t, v, 0.0]);
                }
            } else {
                csv.meta("max_bound", dens.max_bound());
                for p in &dens.pieces {
                    for (t, v) in p.knots.iter().zip(&p.values) {
                        csv.row(&[*t, v.re, v.im]);
                    }
                }
            }
            csv.meta("units", "u spectral parameter; re,im of the smoothed density");
            emit(&csv.render(), out.as_deref())
        }
        Command::Funcalc { op, x, f, t, n, lipschitz, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            if opr.kind != Kind::SelfAdjoint {
                return Err(usage("funcalc needs a self-adjoint operator"));
            }
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let e = expr::parse(&f, &["t"])?;
            let vars = BTreeMap::from([("t".to_string(), t)]);
            let func = {
                let (e, vars) = (e.clone(), vars.clone());
                move |l: f64| expr::eval(&e, C64::new(l, 0.0), &vars)
            };
            let nf = n as f64;
            let (lo, hi) = opr.bounded_hint.map_or((-nf, nf), |(a, b)| ((a - 1.0).max(-nf), (b + 1.0).min(nf)));
            let lip = match lipschitz {
                Some(l) => l,
                None => estimate_lipschitz(&func, lo, hi),
            };
            let spec = BoundedFunctionSpec::new(func).with_lipschitz(lip);
            let (v, b) = apply_cb_function(&opr, &xv, &spec, n, &MeasureOptions::default().with_tol(tol))?;
            let mut csv = vector_csv(&v);
            op_meta(&mut csv, &opr);
            csv.meta("f", &f).meta("t", t).meta("stage", n).meta("lipschitz", lip).meta("bound", b);
            csv.meta("units", "index 1-based; re,im of F(T)x");
            emit(&csv.render(), out.as_deref())
        }
        Command::Evolve { op, x, equation, alpha, t, snapshots, tol, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let eq = match (equation, alpha) {
                (Some(EquationArg::Schrodinger), None) | (None, None) => Equation::Schrodinger,
                (Some(EquationArg::Schrodinger), Some(_)) => return Err(usage("--alpha applies to diffusion only")),
                (Some(EquationArg::Diffusion), None) => Equation::FractionalDiffusion { alpha: 1.0 },
                (_, Some(a)) => Equation::FractionalDiffusion { alpha: a },
            };
            if snapshots == 0 || !(t >= 0.0) {
                return Err(usage("need t >= 0 and at least one snapshot"));
            }
            let opts = EvolveOptions::default();
            let mut csv = Csv::new(&["snapshot", "t", "index", "re", "im"]);
            op_meta(&mut csv, &opr);
            let mut bounds = Vec::new();
            for k in 1..=snapshots {
                let tk = t * k as f64 / snapshots as f64;
                let r = evolve(&opr, &xv, eq, tk, tol, &opts)?;
                bounds.push(r.bound.to_string());
                for (i, c) in r.vector.iter().enumerate() {
                    csv.row(&[k as f64, tk, (i + 1) as f64, c.re, c.im]);
                }
            }
            let eq_label = match eq {
                Equation::Schrodinger => "schrodinger".to_string(),
                Equation::FractionalDiffusion { alpha } => format!("fractional_diffusion(alpha={alpha})"),
            };
            csv.meta("equation", eq_label).meta("bounds", bounds.join(" "));
            csv.meta("units", "t time; index 1-based; re,im of u(t)");
            emit(&csv.render(), out.as_deref())
        }
        Command::Decompose { op, x, set, stages, out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            let u = OpenRealSet::parse(&set)?;
            let st = parse_stages(&stages, &[2])?;
            let d = measure_decomposition(&opr, &xv, &u, st[0], st[1], &DecompositionOptions::default())?;
            let doc = json!({
                "pp": stage_json(&d.pp),
                "ac": stage_json(&d.ac),
                "sc": stage_json(&d.sc),
                "mu": { "value": d.mu, "bound": d.mu_bound },
                "stage_meta": {
                    "operator": opr.name,
                    "set": u.to_string(),
                    "n1": st[0],
                    "n2": st[1],
                    "continuous": stage_json(&d.continuous),
                    "singular": stage_json(&d.singular),
                    "additivity_defect": d.additivity_defect(),
                    "combined_bound": d.combined_bound(),
                },
            });
            emit(&(serde_json::to_string_pretty(&doc).unwrap_or_default() + "\n"), out.as_deref())
        }
        Command::Spectrum { op, kind, stages, out } => {
            let opr = load_operator(&op)?;
            let opts = SpectrumOptions::default();
            let (stage, tree, st) = match kind {
                SpectrumType::Pp => {
                    let st = parse_stages(&stages, &[2])?;
                    let (s, t) = pp_spectrum_stage(&opr, st[0], st[1], &opts)?;
                    (s, t, st)
                }
                SpectrumType::Ac => {
                    let st = parse_stages(&stages, &[2])?;
                    let (s, t) = ac_spectrum_stage(&opr, st[0], st[1], &opts)?;
                    (s, t, st)
                }
                SpectrumType::Sc => {
                    let st = parse_stages(&stages, &[3])?;
                    let (s, t) = sc_spectrum_stage(&opr, st[0], st[1], st[2], &opts)?;
                    (s, t, st)
                }
            };
            let intervals: Vec<[f64; 2]> = stage.intervals().iter().map(|&(a, b)| [a, b]).collect();
            let doc = json!({
                "type": stage.kind.label(),
                "operator": opr.name,
                "stages": st,
                "intervals": intervals,
                "retained_leaves": tree.retained_leaves().len(),
                "nodes": tree.nodes.len(),
            });
            emit(&(serde_json::to_string_pretty(&doc).unwrap_or_default() + "\n"), out.as_deref())
        }
        Command::Collocate { op, x, basis, m, eps, atoms, tol, samples, out, density_out } => {
            let opr = load_operator(&op)?;
            let xv = load_vector(&x)?;
            if m == 0 || !(eps > 0.0) {
                return Err(usage("need M >= 1 and eps > 0"));
            }
            let fam = match basis {
                BasisArg::Chebyshev => BasisFamily::Chebyshev,
                BasisArg::Laguerre => BasisFamily::LaguerreFunction,
                BasisArg::Fourier => BasisFamily::fourier_centered(m),
            };
            let atom_list = parse_atoms(atoms.as_deref())?;
            let pts = default_points(&fam, m, eps);
            let r = collocate(&opr, &xv, &fam, m, &pts, &atom_list, tol)?;
            let mut csv = Csv::new(&["m", "re", "im"]);
            op_meta(&mut csv, &opr);
            csv.meta("basis", format!("{fam:?}"))
                .meta("eps", eps)
                .meta("residual", r.residual)
                .meta("condition_estimate", r.condition_estimate)
                .meta("rank", r.rank)
                .meta("drift_warning", r.drift_warning())
                .meta("units", "m 1-based basis index; re,im of the coefficient");
            for (k, c) in r.coeffs.iter().enumerate() {
                csv.row(&[(k + 1) as f64, c.re, c.im]);
            }
            emit(&csv.render(), out.as_deref())?;
            if let Some(path) = density_out {
                let (lo, hi) = match fam {
                    BasisFamily::Chebyshev => (-1.0, 1.0),
                    BasisFamily::LaguerreFunction => (0.0, 20.0),
                    BasisFamily::Fourier { .. } => (-std::f64::consts::PI, std::f64::consts::PI),
                };
                let grid: Vec<f64> =
                    (0..samples.max(2)).map(|k| lo + (hi - lo) * k as f64 / (samples.max(2) - 1) as f64).collect();
                let vals = reconstruct(&fam, &r.coeffs, &grid);
                let mut d = Csv::new(&["u", "re", "im"]);
                d.meta("basis", format!("{fam:?}")).meta("units", "u spectral parameter (angle on the circle)");
                for (t, v) in grid.iter().zip(vals) {
                    d.row(&[*t, v.re, v.im]);
                }
                write_file(&path, &d.render())?;
            }
            Ok(())
        }
        Command::Gallery { action } => match action {
            GalleryAction::List { out } => {
                let mut csv = Csv::new(&["name", "params"]);
                csv.meta("units", "params as k=default");
                for (name, params) in gallery::list() {
                    csv.row_labeled(&[name, &format!("\"{params}\"")], &[]);
                }
                emit(&csv.render(), out.as_deref())
            }
            GalleryAction::Dump { name, params, n, out } => {
                let g = gallery_operator(&name, &parse_params(&params)?)?;
                if n == 0 {
                    return Err(usage("--n must be at least 1"));
                }
                emit(&write_text_matrix(&g.op, n), out.as_deref())
            }
        },
        Command::Reproduce { figure, out_dir } => reproduce::reproduce(&figure, &out_dir),
        Command::Run { config } => config::run_config(&config),
    }
}

fn parse_atoms(s: Option<&str>) -> Result<Vec<(f64, f64)>, CliError> {
    let Some(s) = s else { return Ok(Vec::new()) };
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| usage(format!("atom `{p}` is not point:weight")))?;
            let pa = a.trim().parse().map_err(|_| usage(format!("bad atom point `{a}`")))?;
            let pb = b.trim().parse().map_err(|_| usage(format!("bad atom weight `{b}`")))?;
            Ok((pa, pb))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.5+1e-3i").unwrap(), C64::new(0.5, 1e-3));
        assert_eq!(parse_complex("1-2i").unwrap(), C64::new(1.0, -2.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("2.5").unwrap(), C64::new(2.5, 0.0));
        assert_eq!(parse_complex("1e-2-1e-3i").unwrap(), C64::new(1e-2, -1e-3));
        assert!(parse_complex("1+2j").is_err());
    }

    #[test]
    fn params_and_stages() {
        let p = parse_params("a=0.7, b=0.3").unwrap();
        assert_eq!(p["a"], 0.7);
        assert!(parse_params("a").is_err());
        assert_eq!(parse_stages("4,2,1", &[3]).unwrap(), vec![4, 2, 1]);
        assert!(parse_stages("4,2", &[3]).is_err());
    }
}
