//! Problem definitions, generators with planted solutions, and file I/O.
//!
//! A problem instance couples a constraint set, a map `F` over its ambient
//! space, and optionally a planted solution pair `(x*, y*)` used to measure
//! solver error.  Instances travel as a small TOML manifest referencing
//! Matrix Market payloads (`M`, `q`, and polyhedron data) plus CSV
//! solution side files:
//!
//! ```text
//!   schema = "vineq-problem/1"
//!   name   = "lcp-n10-strict-s42"
//!   seed   = 42
//!
//!   [set]                    # kind = orthant | psd | polyhedron |
//!   kind = "orthant"         #   linf_epigraph | opnorm_epigraph |
//!   n = 10                   #   nuclear_epigraph | soc3
//!
//!   [map]                    # kind = affine | affine_plus_logsumexp |
//!   kind = "affine"          #   affine_plus_arctan
//!   m_file = "lcp-n10-strict-s42-M.mtx"
//!   q_file = "lcp-n10-strict-s42-q.mtx"
//!
//!   [planted]                # optional
//!   x_file = "lcp-n10-strict-s42-x.csv"
//!   y_file = "lcp-n10-strict-s42-y.csv"
//! ```
//!
//! File references are resolved relative to the manifest's directory.
//! Payload floats are written in shortest round-trip scientific notation,
//! so generate → save → load reproduces `M` and `q` bit for bit.  Planted
//! coordinates are the flat layout of the ambient point (row-major for
//! matrix shapes, `[t, vec]` for epigraphs).
//!
//! The generators plant solutions by choosing `x*` on a face of the set,
//! `y*` in the outward normal cone at `x*` (so `x* = Π_X(x* − y*)` holds
//! exactly), and then absorbing both into the affine map's offset:
//! `q = y* − ℳ x*` makes `F(x*) = y*`.  Strict complementarity — positive
//! margins on both sides of the face — is what makes the projector
//! differentiable at `z* = x* − y*` and is controlled per generator.

use std::io::{BufRead, Write as IoWrite};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sets::{SetError, SmoothedSet};
use crate::space::{sym_eigen, AmbientPoint, PairPoint};
use crate::vi::{Monotonicity, ViMap, ViProblem};

/// Problem construction and file-ingestion failures.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Malformed payload or manifest content, with position context.
    #[error("parse error in {path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    /// Sizes disagree between the set, the map, and the planted solution.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },
    /// The constraint set itself could not be built (e.g. empty polyhedron).
    #[error(transparent)]
    Set(#[from] SetError),
    /// A planted pair fails the complementarity contract `x* = Π(x* − y*)`,
    /// `F(x*) = y*` beyond tolerance.
    #[error("planted solution residual {residual:.3e} exceeds {tolerance:.3e}")]
    Plant { residual: f64, tolerance: f64 },
}

fn io_err(path: &Path, source: std::io::Error) -> ProblemError {
    ProblemError::Io { path: path.display().to_string(), source }
}

/// Which analytic map family the manifest names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// `F(x) = M x + q`.
    Affine,
    /// `F(x) = M x + q + ∇(log Σ exp(xᵢ))`; the softmax gradient is the
    /// gradient of a smooth convex potential, so monotonicity of `M` is
    /// preserved.
    AffinePlusLogSumExp,
    /// `F(x) = M x + q + 0.3·arctan(x)` elementwise; same reasoning.
    AffinePlusArctan,
}

impl MapKind {
    fn as_str(self) -> &'static str {
        match self {
            MapKind::Affine => "affine",
            MapKind::AffinePlusLogSumExp => "affine_plus_logsumexp",
            MapKind::AffinePlusArctan => "affine_plus_arctan",
        }
    }

    fn parse(s: &str) -> Option<MapKind> {
        match s {
            "affine" => Some(MapKind::Affine),
            "affine_plus_logsumexp" => Some(MapKind::AffinePlusLogSumExp),
            "affine_plus_arctan" => Some(MapKind::AffinePlusArctan),
            _ => None,
        }
    }
}

/// Map payload of a manifest: the affine part plus the named nonlinearity.
#[derive(Debug, Clone)]
pub struct MapSpec {
    pub kind: MapKind,
    pub m: DMatrix<f64>,
    pub q: DVector<f64>,
}

/// Set descriptor with payloads held in memory.
#[derive(Debug, Clone)]
pub enum SetSpec {
    Orthant { n: usize },
    Psd { n: usize },
    Polyhedron { a: DMatrix<f64>, b: DVector<f64> },
    LinfEpigraph { n: usize },
    OpNormEpigraph { m: usize, n: usize },
    NuclearEpigraph { m: usize, n: usize },
    Soc3,
}

impl SetSpec {
    pub fn build(&self) -> Result<SmoothedSet, SetError> {
        match self {
            SetSpec::Orthant { n } => Ok(SmoothedSet::orthant(*n)),
            SetSpec::Psd { n } => Ok(SmoothedSet::psd_cone(*n)),
            SetSpec::Polyhedron { a, b } => SmoothedSet::polyhedron(a.clone(), b.clone()),
            SetSpec::LinfEpigraph { n } => Ok(SmoothedSet::linf_epigraph(*n)),
            SetSpec::OpNormEpigraph { m, n } => Ok(SmoothedSet::opnorm_epigraph(*m, *n)),
            SetSpec::NuclearEpigraph { m, n } => Ok(SmoothedSet::nuclear_epigraph(*m, *n)),
            SetSpec::Soc3 => Ok(SmoothedSet::second_order_cone3()),
        }
    }
}

/// A `ViMap` acting on the flat coordinates of any ambient shape: the
/// affine part `M x + q` plus the manifest-named nonlinearity.  The strong
/// monotonicity modulus is taken from the symmetric part of `M` (the
/// nonlinear terms only add positive-semidefinite Jacobian contributions).
pub struct FlatMap {
    kind: MapKind,
    m: DMatrix<f64>,
    q: DVector<f64>,
    monotonicity: Monotonicity,
}

impl FlatMap {
    pub fn new(kind: MapKind, m: DMatrix<f64>, q: DVector<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "map matrix must be square");
        assert_eq!(m.nrows(), q.len(), "offset length must match the matrix");
        let sym = 0.5 * (&m + m.transpose());
        let monotonicity = match sym_eigen(&sym) {
            Ok(f) => {
                let lambda_min = f.lambda[f.lambda.len() - 1];
                if lambda_min > 0.0 {
                    Monotonicity::Strongly(lambda_min)
                } else if lambda_min > -1e-12 {
                    Monotonicity::Monotone
                } else {
                    Monotonicity::None
                }
            }
            Err(_) => Monotonicity::None,
        };
        FlatMap { kind, m, q, monotonicity }
    }

    pub fn affine(m: DMatrix<f64>, q: DVector<f64>) -> Self {
        FlatMap::new(MapKind::Affine, m, q)
    }

    fn nonlinear_value(&self, f: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            MapKind::Affine => DVector::zeros(f.len()),
            MapKind::AffinePlusLogSumExp => softmax(f),
            MapKind::AffinePlusArctan => f.map(|v| 0.3 * v.atan()),
        }
    }

    fn nonlinear_jacobian_apply(&self, f: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            MapKind::Affine => DVector::zeros(f.len()),
            MapKind::AffinePlusLogSumExp => {
                let s = softmax(f);
                let su = s.dot(u);
                DVector::from_fn(f.len(), |i, _| s[i] * (u[i] - su))
            }
            MapKind::AffinePlusArctan => {
                DVector::from_fn(f.len(), |i, _| 0.3 / (1.0 + f[i] * f[i]) * u[i])
            }
        }
    }
}

fn softmax(f: &DVector<f64>) -> DVector<f64> {
    let max = f.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let exps = f.map(|v| (v - max).exp());
    let total: f64 = exps.iter().sum();
    exps / total
}

impl ViMap for FlatMap {
    fn eval(&self, x: &AmbientPoint) -> AmbientPoint {
        let f = x.to_flat();
        let out = &self.m * &f + &self.q + self.nonlinear_value(&f);
        x.from_flat_like(&out)
    }

    fn jacobian_apply(&self, x: &AmbientPoint, u: &AmbientPoint) -> AmbientPoint {
        let f = x.to_flat();
        let uf = u.to_flat();
        let out = &self.m * &uf + self.nonlinear_jacobian_apply(&f, &uf);
        x.from_flat_like(&out)
    }

    fn is_affine(&self) -> bool {
        self.kind == MapKind::Affine
    }

    fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }
}

/// A fully specified problem instance with payloads in memory.
#[derive(Debug, Clone)]
pub struct ProblemManifest {
    pub name: String,
    pub seed: u64,
    pub set: SetSpec,
    pub map: MapSpec,
    pub planted: Option<PairPoint>,
}

impl ProblemManifest {
    /// Builds the runnable problem: constructs the set, checks all
    /// dimensions, and verifies the planted pair satisfies
    /// `x* = Π_X(x* − y*)` and `F(x*) = y*` to `1e-10·(1+‖w*‖)`.
    pub fn instantiate(&self) -> Result<ViProblem, ProblemError> {
        let set = self.set.build()?;
        let dim = set.dim();
        if self.map.m.nrows() != self.map.m.ncols() {
            return Err(ProblemError::DimensionMismatch {
                context: format!("{}: map matrix shape", self.name),
                expected: self.map.m.nrows(),
                found: self.map.m.ncols(),
            });
        }
        if self.map.m.nrows() != dim {
            return Err(ProblemError::DimensionMismatch {
                context: format!("{}: map matrix vs set", self.name),
                expected: dim,
                found: self.map.m.nrows(),
            });
        }
        if self.map.q.len() != dim {
            return Err(ProblemError::DimensionMismatch {
                context: format!("{}: map offset vs set", self.name),
                expected: dim,
                found: self.map.q.len(),
            });
        }
        let map = FlatMap::new(self.map.kind, self.map.m.clone(), self.map.q.clone());

        let mut problem = ViProblem::new(self.name.clone(), set, Box::new(map));
        if let Some(w) = &self.planted {
            if w.x.dim() != dim || w.y.dim() != dim {
                return Err(ProblemError::DimensionMismatch {
                    context: format!("{}: planted solution vs set", self.name),
                    expected: dim,
                    found: w.x.dim().min(w.y.dim()),
                });
            }
            let tolerance = 1e-10 * (1.0 + w.norm());
            let z = w.x.sub(&w.y);
            let proj = problem.set.exact_project(&z)?;
            let comp = w.x.sub(&proj).norm();
            let fgap = problem.map.eval(&w.x).sub(&w.y).norm();
            let residual = comp.max(fgap);
            if residual > tolerance {
                return Err(ProblemError::Plant { residual, tolerance });
            }
            problem = problem.with_known_solution(w.clone());
        }
        Ok(problem)
    }

    /// Writes `{name}.toml` plus payload files into `dir` and returns the
    /// manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, ProblemError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let stem = &self.name;
        let m_file = format!("{stem}-M.mtx");
        let q_file = format!("{stem}-q.mtx");
        write_matrix_market(&dir.join(&m_file), &self.map.m)?;
        write_matrix_market(&dir.join(&q_file), &DMatrix::from_column_slice(self.map.q.len(), 1, self.map.q.as_slice()))?;

        let set = match &self.set {
            SetSpec::Orthant { n } => SetDoc::Orthant { n: *n },
            SetSpec::Psd { n } => SetDoc::Psd { n: *n },
            SetSpec::Polyhedron { a, b } => {
                let a_file = format!("{stem}-A.mtx");
                let b_file = format!("{stem}-b.mtx");
                write_matrix_market(&dir.join(&a_file), a)?;
                write_matrix_market(&dir.join(&b_file), &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
                SetDoc::Polyhedron { a_file, b_file }
            }
            SetSpec::LinfEpigraph { n } => SetDoc::LinfEpigraph { n: *n },
            SetSpec::OpNormEpigraph { m, n } => SetDoc::OpnormEpigraph { m: *m, n: *n },
            SetSpec::NuclearEpigraph { m, n } => SetDoc::NuclearEpigraph { m: *m, n: *n },
            SetSpec::Soc3 => SetDoc::Soc3 {},
        };

        let planted = match &self.planted {
            Some(w) => {
                let x_file = format!("{stem}-x.csv");
                let y_file = format!("{stem}-y.csv");
                write_value_column(&dir.join(&x_file), &w.x.to_flat())?;
                write_value_column(&dir.join(&y_file), &w.y.to_flat())?;
                Some(PlantedDoc { x_file, y_file })
            }
            None => None,
        };

        let doc = ManifestDoc {
            schema: SCHEMA.to_string(),
            name: self.name.clone(),
            seed: self.seed,
            set,
            map: MapDoc { kind: self.map.kind.as_str().to_string(), m_file, q_file },
            planted,
        };
        let path = dir.join(format!("{stem}.toml"));
        let text = toml::to_string_pretty(&doc).expect("manifest serialization cannot fail");
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

const SCHEMA: &str = "vineq-problem/1";

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    schema: String,
    name: String,
    seed: u64,
    set: SetDoc,
    map: MapDoc,
    planted: Option<PlantedDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SetDoc {
    Orthant { n: usize },
    Psd { n: usize },
    Polyhedron { a_file: String, b_file: String },
    LinfEpigraph { n: usize },
    OpnormEpigraph { m: usize, n: usize },
    NuclearEpigraph { m: usize, n: usize },
    Soc3 {},
}

#[derive(Serialize, Deserialize)]
struct MapDoc {
    kind: String,
    m_file: String,
    q_file: String,
}

#[derive(Serialize, Deserialize)]
struct PlantedDoc {
    x_file: String,
    y_file: String,
}

/// Reads a manifest file and its payloads back into memory.
pub fn read_manifest(path: &Path) -> Result<ProblemManifest, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let doc: ManifestDoc = toml::from_str(&text).map_err(|e| ProblemError::Parse {
        path: path.display().to_string(),
        line: e.span().map(|s| text[..s.start].lines().count()).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    if doc.schema != SCHEMA {
        return Err(ProblemError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("unsupported schema {:?}, expected {SCHEMA:?}", doc.schema),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let set = match doc.set {
        SetDoc::Orthant { n } => SetSpec::Orthant { n },
        SetDoc::Psd { n } => SetSpec::Psd { n },
        SetDoc::Polyhedron { a_file, b_file } => {
            let a = read_matrix_market(&base.join(&a_file))?;
            let b = read_matrix_market(&base.join(&b_file))?;
            if b.ncols() != 1 {
                return Err(ProblemError::Parse {
                    path: b_file,
                    line: 0,
                    message: "right-hand side must be a single column".into(),
                });
            }
            if b.nrows() != a.nrows() {
                return Err(ProblemError::DimensionMismatch {
                    context: "polyhedron right-hand side vs rows".into(),
                    expected: a.nrows(),
                    found: b.nrows(),
                });
            }
            SetSpec::Polyhedron { a, b: DVector::from_column_slice(b.as_slice()) }
        }
        SetDoc::LinfEpigraph { n } => SetSpec::LinfEpigraph { n },
        SetDoc::OpnormEpigraph { m, n } => SetSpec::OpNormEpigraph { m, n },
        SetDoc::NuclearEpigraph { m, n } => SetSpec::NuclearEpigraph { m, n },
        SetDoc::Soc3 {} => SetSpec::Soc3,
    };

    let kind = MapKind::parse(&doc.map.kind).ok_or_else(|| ProblemError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("unknown map kind {:?}", doc.map.kind),
    })?;
    let m = read_matrix_market(&base.join(&doc.map.m_file))?;
    let q_mat = read_matrix_market(&base.join(&doc.map.q_file))?;
    if q_mat.ncols() != 1 {
        return Err(ProblemError::Parse {
            path: doc.map.q_file.clone(),
            line: 0,
            message: "map offset must be a single column".into(),
        });
    }
    if q_mat.nrows() != m.nrows() {
        return Err(ProblemError::DimensionMismatch {
            context: "map offset vs matrix".into(),
            expected: m.nrows(),
            found: q_mat.nrows(),
        });
    }
    let q = DVector::from_column_slice(q_mat.as_slice());

    let planted = match doc.planted {
        Some(p) => {
            let xf = read_value_column(&base.join(&p.x_file))?;
            let yf = read_value_column(&base.join(&p.y_file))?;
            let built = set.build()?;
            let template = built.canonical_interior();
            if xf.len() != template.dim() || yf.len() != template.dim() {
                return Err(ProblemError::DimensionMismatch {
                    context: "planted solution vs set".into(),
                    expected: template.dim(),
                    found: xf.len().min(yf.len()),
                });
            }
            Some(PairPoint::new(template.from_flat_like(&xf), template.from_flat_like(&yf)))
        }
        None => None,
    };

    Ok(ProblemManifest {
        name: doc.name,
        seed: doc.seed,
        set,
        map: MapSpec { kind, m, q },
        planted,
    })
}

/// One-call ingestion: read the manifest and build the runnable problem
/// with the planted solution attached.
pub fn load_manifest(path: &Path) -> Result<ViProblem, ProblemError> {
    read_manifest(path)?.instantiate()
}

// ---------------------------------------------------------------------------
// Payload formats
// ---------------------------------------------------------------------------

/// Dense Matrix Market array format, column-major, shortest round-trip
/// float formatting (so saved payloads reload bit for bit).
fn write_matrix_market(path: &Path, m: &DMatrix<f64>) -> Result<(), ProblemError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix array real general")?;
        writeln!(out, "{} {}", m.nrows(), m.ncols())?;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                writeln!(out, "{:e}", m[(i, j)])?;
            }
        }
        Ok(())
    };
    write(&mut out).map_err(|e| io_err(path, e))
}

fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>, ProblemError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);
    let display = path.display().to_string();
    let parse = |line: usize, message: String| ProblemError::Parse {
        path: display.clone(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let (n0, header) = match lines.next() {
        Some((n, Ok(l))) => (n + 1, l),
        Some((n, Err(e))) => return Err(parse(n + 1, e.to_string())),
        None => return Err(parse(1, "empty file".into())),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5
        || !tokens[0].starts_with("%%matrixmarket")
        || tokens[1] != "matrix"
        || tokens[2] != "array"
        || tokens[3] != "real"
        || tokens[4] != "general"
    {
        return Err(parse(n0, format!("unsupported header {header:?}; need 'matrix array real general'")));
    }

    let mut dims: Option<(usize, usize)> = None;
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| parse(idx + 1, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        match dims {
            None => {
                let mut parts = trimmed.split_whitespace();
                let rows: usize = parts
                    .next()
                    .ok_or_else(|| parse(idx + 1, "missing row count".into()))?
                    .parse()
                    .map_err(|e| parse(idx + 1, format!("bad row count: {e}")))?;
                let cols: usize = parts
                    .next()
                    .ok_or_else(|| parse(idx + 1, "missing column count".into()))?
                    .parse()
                    .map_err(|e| parse(idx + 1, format!("bad column count: {e}")))?;
                dims = Some((rows, cols));
                values.reserve(rows * cols);
            }
            Some((rows, cols)) => {
                for tok in trimmed.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|e| parse(idx + 1, format!("bad value {tok:?}: {e}")))?;
                    values.push(v);
                    if values.len() > rows * cols {
                        return Err(parse(idx + 1, format!("more than {} values", rows * cols)));
                    }
                }
            }
        }
    }
    let (rows, cols) = dims.ok_or_else(|| parse(0, "missing size line".into()))?;
    if values.len() != rows * cols {
        return Err(parse(0, format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

fn write_value_column(path: &Path, v: &DVector<f64>) -> Result<(), ProblemError> {
    let mut text = String::from("value\n");
    for x in v.iter() {
        text.push_str(&format!("{x:e}\n"));
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_value_column(path: &Path) -> Result<DVector<f64>, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if idx == 0 || trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|e| ProblemError::Parse {
            path: display.clone(),
            line: idx + 1,
            message: format!("bad value {trimmed:?}: {e}"),
        })?;
        values.push(v);
    }
    Ok(DVector::from_vec(values))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `GᵀG/d + I + ½(C − Cᵀ)`: strongly monotone with modulus ≥ 1 and a
/// generic nonsymmetric part.
fn strongly_monotone_matrix<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    let c = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    g.transpose() * &g / d as f64 + DMatrix::identity(d, d) + 0.5 * (&c - c.transpose())
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    g.qr().q()
}

fn assert_planted(manifest: &ProblemManifest) {
    let problem = manifest
        .instantiate()
        .expect("generated manifest must instantiate");
    let w = problem.known_solution.as_ref().expect("generator plants a solution");
    let z = w.x.sub(&w.y);
    let proj = problem.set.exact_project(&z).expect("projection of planted point");
    let comp = w.x.sub(&proj).norm();
    let fgap = problem.map.eval(&w.x).sub(&w.y).norm();
    let tol = 1e-12 * (1.0 + w.norm());
    assert!(
        comp <= tol && fgap <= tol,
        "planted pair violates complementarity: comp {comp:.3e}, fgap {fgap:.3e}"
    );
}

/// Linear complementarity problem over `Orthant(n)` with a planted pair:
/// `M = AᵀA + δI + S` (`S` skew, `δ = 1` iff `strong_mono`), `x*` positive
/// on the first half of the coordinates, `y* = Mx* + q` forced to zero
/// there.  With `strictly_complementary`, every zero coordinate of `x*` has
/// `y* = 1`; otherwise a designated subset gets `x*ᵢ = y*ᵢ = 0`, which puts
/// the solution on a projector kink.
pub fn generate_lcp(n: usize, strong_mono: bool, strictly_complementary: bool, seed: u64) -> ProblemManifest {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let c = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let delta = if strong_mono { 1.0 } else { 0.0 };
    let m = a.transpose() * &a + delta * DMatrix::identity(n, n) + (&c - c.transpose());

    // P = support of x*; with a degenerate plant, shrink P so the designated
    // degenerate coordinates exist even at n = 1.
    let positive = if strictly_complementary { n.div_ceil(2) } else { n / 2 };
    let zero_count = n - positive;
    let degenerate = if strictly_complementary { 0 } else { zero_count.div_ceil(2).max(1) };
    let xs = DVector::from_fn(n, |i, _| if i < positive { uniform(&mut rng, 0.5, 2.0) } else { 0.0 });
    let ys = DVector::from_fn(n, |i, _| {
        if i < positive || i < positive + degenerate {
            0.0
        } else {
            1.0
        }
    });
    let q = &ys - &m * &xs;

    let label = if strictly_complementary { "strict" } else { "degenerate" };
    let manifest = ProblemManifest {
        name: format!("lcp-n{n}-{label}-s{seed}"),
        seed,
        set: SetSpec::Orthant { n },
        map: MapSpec { kind: MapKind::Affine, m, q },
        planted: Some(PairPoint::new(AmbientPoint::vector(xs), AmbientPoint::vector(ys))),
    };
    assert_planted(&manifest);
    manifest
}

/// Semidefinite complementarity problem over `PsdCone(n)`: `X*` and `Y*`
/// share a random eigenbasis with complementary positive spectra (`X*` of
/// rank `rank_r`), and `F(X) = ℳ(X) + Q₀` for a random strongly monotone
/// linear operator `ℳ` on symmetric matrices.  A degenerate instance zeroes
/// one of `Y*`'s eigenvalues, producing a zero-zero eigenpair.
pub fn generate_sdcp(n: usize, rank_r: usize, strictly_complementary: bool, seed: u64) -> ProblemManifest {
    assert!(rank_r <= n);
    assert!(
        strictly_complementary || rank_r < n,
        "a degenerate instance needs at least one zero eigenvalue pair"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_orthogonal(&mut rng, n);
    let plus = DVector::from_fn(n, |i, _| if i < rank_r { uniform(&mut rng, 0.5, 2.0) } else { 0.0 });
    let mut minus = DVector::from_fn(n, |i, _| if i >= rank_r { uniform(&mut rng, 0.5, 2.0) } else { 0.0 });
    if !strictly_complementary {
        minus[rank_r] = 0.0;
    }
    let sym = |d: &DVector<f64>| {
        let raw = &basis * DMatrix::from_diagonal(d) * basis.transpose();
        0.5 * (&raw + raw.transpose())
    };
    let xs = AmbientPoint::sym_matrix(sym(&plus));
    let ys = AmbientPoint::sym_matrix(sym(&minus));

    // The flat coordinates of a symmetric matrix are already isometric
    // (svec), so a strongly monotone matrix on them is a strongly monotone
    // linear operator on the symmetric space.
    let d = n * (n + 1) / 2;
    let m_big = strongly_monotone_matrix(&mut rng, d);
    let q0 = ys.to_flat() - &m_big * xs.to_flat();

    let label = if strictly_complementary { "strict" } else { "degenerate" };
    let manifest = ProblemManifest {
        name: format!("sdcp-n{n}-r{rank_r}-{label}-s{seed}"),
        seed,
        set: SetSpec::Psd { n },
        map: MapSpec { kind: MapKind::Affine, m: m_big, q: q0 },
        planted: Some(PairPoint::new(xs, ys)),
    };
    assert_planted(&manifest);
    manifest
}

/// VI over a random polyhedron `{x : Ax ≥ b}` with a planted solution on a
/// face: three constraints are active at `x*` with positive multipliers
/// (`y* = A_Iᵀ ν`, ν > 0) and the rest have slack ≥ 0.5, so the projector
/// is differentiable at `z* = x* − y*`.
pub fn generate_polyhedral_vi(n: usize, m_rows: usize, seed: u64) -> ProblemManifest {
    assert!(n >= 2 && m_rows >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m_rows, n, |_, _| rng.random::<f64>() - 0.5);
    let xbar = DVector::from_fn(n, |_, _| uniform(&mut rng, -1.0, 1.0));
    let active = 3.min(m_rows).min(n - 1);
    let b = DVector::from_fn(m_rows, |i, _| {
        let tight = a.row(i).transpose().dot(&xbar);
        if i < active {
            tight
        } else {
            tight - uniform(&mut rng, 0.5, 2.0)
        }
    });
    let mut ystar = DVector::zeros(n);
    for i in 0..active {
        let nu = uniform(&mut rng, 0.5, 2.0);
        ystar += nu * a.row(i).transpose();
    }
    let mm = strongly_monotone_matrix(&mut rng, n);
    let q = &ystar - &mm * &xbar;

    let manifest = ProblemManifest {
        name: format!("poly-n{n}-m{m_rows}-s{seed}"),
        seed,
        set: SetSpec::Polyhedron { a, b },
        map: MapSpec { kind: MapKind::Affine, m: mm, q },
        planted: Some(PairPoint::new(AmbientPoint::vector(xbar), AmbientPoint::vector(ystar))),
    };
    assert_planted(&manifest);
    manifest
}

/// VI over the operator-norm epigraph `{(t, Z) : ‖Z‖ ≤ t}` with the planted
/// solution on the boundary: `t* = σ₁(Z*)` with a simple top singular value
/// and `y* = λ·(1, −u₁v₁ᵀ)` in the (negated) normal cone, λ > 0.
pub fn generate_opnorm_vi(m: usize, n: usize, seed: u64) -> ProblemManifest {
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(&mut rng, m);
    let v = random_orthogonal(&mut rng, n);
    let k = m.min(n);
    let mut sigma = DVector::zeros(k);
    sigma[0] = uniform(&mut rng, 1.5, 2.0);
    for i in 1..k {
        sigma[i] = sigma[i - 1] * uniform(&mut rng, 0.4, 0.8);
    }
    let mut z = DMatrix::zeros(m, n);
    for i in 0..k {
        z += sigma[i] * u.column(i) * v.column(i).transpose();
    }
    let lambda = uniform(&mut rng, 0.5, 2.0);
    let top = u.column(0) * v.column(0).transpose();
    let xs = AmbientPoint::scalar_matrix(sigma[0], z);
    let ys = AmbientPoint::scalar_matrix(lambda, -lambda * top);

    let d = 1 + m * n;
    let mm = strongly_monotone_matrix(&mut rng, d);
    let q = ys.to_flat() - &mm * xs.to_flat();

    let manifest = ProblemManifest {
        name: format!("opnorm-{m}x{n}-s{seed}"),
        seed,
        set: SetSpec::OpNormEpigraph { m, n },
        map: MapSpec { kind: MapKind::Affine, m: mm, q },
        planted: Some(PairPoint::new(xs, ys)),
    };
    assert_planted(&manifest);
    manifest
}

/// VI over the nuclear-norm epigraph with the planted solution on the
/// boundary: `Z*` of full rank `min(m, n)` (making the nuclear-norm
/// subgradient `UVᵀ` unique), `t* = ‖Z*‖_*`, `y* = λ·(1, −UVᵀ)`.
pub fn generate_nuclear_vi(m: usize, n: usize, seed: u64) -> ProblemManifest {
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(&mut rng, m);
    let v = random_orthogonal(&mut rng, n);
    let k = m.min(n);
    let sigma = DVector::from_fn(k, |_, _| uniform(&mut rng, 0.5, 2.0));
    let mut z = DMatrix::zeros(m, n);
    let mut subgrad = DMatrix::zeros(m, n);
    for i in 0..k {
        z += sigma[i] * u.column(i) * v.column(i).transpose();
        subgrad += u.column(i) * v.column(i).transpose();
    }
    let lambda = uniform(&mut rng, 0.5, 2.0);
    let xs = AmbientPoint::scalar_matrix(sigma.sum(), z);
    let ys = AmbientPoint::scalar_matrix(lambda, -lambda * subgrad);

    let d = 1 + m * n;
    let mm = strongly_monotone_matrix(&mut rng, d);
    let q = ys.to_flat() - &mm * xs.to_flat();

    let manifest = ProblemManifest {
        name: format!("nuclear-{m}x{n}-s{seed}"),
        seed,
        set: SetSpec::NuclearEpigraph { m, n },
        map: MapSpec { kind: MapKind::Affine, m: mm, q },
        planted: Some(PairPoint::new(xs, ys)),
    };
    assert_planted(&manifest);
    manifest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::fd_jacobian;
    use crate::vi::smoothed_residual;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("vineq-problems-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn lcp_generator_examples() {
        // n = 1 strict: the single coordinate carries the positive x*, so
        // y* = 0 and q = -M x*.
        let strict = generate_lcp(1, true, true, 64);
        let x = strict.planted.as_ref().unwrap().x.as_vector()[0];
        let y = strict.planted.as_ref().unwrap().y.as_vector()[0];
        assert!((0.5..=2.0).contains(&x));
        assert_eq!(y, 0.0);
        assert_eq!(strict.map.q[0], -(strict.map.m[(0, 0)] * x));

        // n = 1 degenerate: x* = y* = 0 forces q = 0.
        let degen = generate_lcp(1, true, false, 64);
        assert_eq!(degen.planted.as_ref().unwrap().x.as_vector()[0], 0.0);
        assert_eq!(degen.planted.as_ref().unwrap().y.as_vector()[0], 0.0);
        assert_eq!(degen.map.q[0], 0.0);

        let manifest = generate_lcp(12, true, true, 65);
        let w = manifest.planted.as_ref().unwrap();
        let (xs, ys) = (w.x.as_vector(), w.y.as_vector());
        assert_eq!(xs.dot(ys), 0.0);
        for i in 0..12 {
            assert!(xs[i] >= 0.0 && ys[i] >= 0.0);
            // Strict complementarity: exactly one of the pair is zero.
            assert!((xs[i] == 0.0) != (ys[i] == 0.0), "coordinate {i}");
        }
    }

    #[test]
    fn strong_monotonicity_on_random_directions() {
        let manifest = generate_lcp(10, true, true, 66);
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..1000 {
            let u = DVector::from_fn(10, |_, _| rng.random::<f64>() - 0.5);
            let mu = &manifest.map.m * &u;
            assert!(u.dot(&mu) >= u.norm_squared() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn sdcp_generator_structure() {
        let strict = generate_sdcp(4, 2, true, 68);
        let w = strict.planted.as_ref().unwrap();
        let (xs, ys) = (w.x.as_sym(), w.y.as_sym());
        // Complementary spectra in a shared eigenbasis: X*Y* = 0 and both PSD.
        assert!((xs * ys).norm() <= 1e-12);
        assert!(w.x.inner(&w.y).abs() <= 1e-12);
        let problem = strict.instantiate().unwrap();
        let z = w.x.sub(&w.y);
        let diag = problem.set.diagnose(&z, None).unwrap();
        assert!(diag.differentiable);
        assert_eq!(diag.strictly_complementary, Some(true));

        // Degenerate n=2, r=1: the lone complementary eigenvalue is zeroed,
        // so Y* vanishes entirely.
        let degen = generate_sdcp(2, 1, false, 68);
        assert!(degen.planted.as_ref().unwrap().y.as_sym().norm() == 0.0);
        let problem = degen.instantiate().unwrap();
        let w = degen.planted.as_ref().unwrap();
        let diag = problem.set.diagnose(&w.x.sub(&w.y), None).unwrap();
        assert!(!diag.differentiable);
    }

    #[test]
    fn lcp_diagnose_tracks_strict_complementarity() {
        let strict = generate_lcp(10, true, true, 69).instantiate().unwrap();
        let w = strict.known_solution.as_ref().unwrap();
        let diag = strict.set.diagnose(&w.x.sub(&w.y), None).unwrap();
        assert!(diag.differentiable);

        let degen = generate_lcp(10, true, false, 69).instantiate().unwrap();
        let w = degen.known_solution.as_ref().unwrap();
        let diag = degen.set.diagnose(&w.x.sub(&w.y), None).unwrap();
        assert!(!diag.differentiable);
    }

    #[test]
    fn spectral_generators_plant_boundary_solutions() {
        let op = generate_opnorm_vi(3, 4, 70);
        let w = op.planted.as_ref().unwrap();
        let (t, zm) = w.x.as_scalar_matrix();
        let problem = op.instantiate().unwrap();
        let sv = crate::space::thin_svd(&zm.clone()).unwrap();
        assert!((sv.sigma[0] - t).abs() <= 1e-12, "t* must equal the top singular value");
        let diag = problem.set.diagnose(&w.x.sub(&w.y), None).unwrap();
        assert!(diag.differentiable);

        let nuc = generate_nuclear_vi(3, 4, 70);
        let w = nuc.planted.as_ref().unwrap();
        let (t, zm) = w.x.as_scalar_matrix();
        let sv = crate::space::thin_svd(&zm.clone()).unwrap();
        assert!((sv.sigma.sum() - t).abs() <= 1e-12, "t* must equal the nuclear norm");
        nuc.instantiate().unwrap();
    }

    #[test]
    fn manifest_roundtrip_is_bit_for_bit() {
        let dir = temp_dir("roundtrip");
        for manifest in [
            generate_lcp(10, true, true, 71),
            generate_polyhedral_vi(6, 8, 71),
            generate_opnorm_vi(3, 4, 71),
        ] {
            let path = manifest.save(&dir).unwrap();
            let back = read_manifest(&path).unwrap();
            assert_eq!(back.name, manifest.name);
            assert_eq!(back.seed, manifest.seed);
            assert_eq!(back.map.kind, manifest.map.kind);
            assert_eq!(back.map.m, manifest.map.m, "{}: M must round-trip exactly", manifest.name);
            assert_eq!(back.map.q, manifest.map.q);
            let (w0, w1) = (manifest.planted.as_ref().unwrap(), back.planted.as_ref().unwrap());
            assert_eq!(w0.x.to_flat(), w1.x.to_flat());
            assert_eq!(w0.y.to_flat(), w1.y.to_flat());
            if let (SetSpec::Polyhedron { a: a0, b: b0 }, SetSpec::Polyhedron { a: a1, b: b1 }) =
                (&manifest.set, &back.set)
            {
                assert_eq!(a0, a1);
                assert_eq!(b0, b1);
            }
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn load_manifest_attaches_planted_solution() {
        let dir = temp_dir("load");
        let manifest = generate_lcp(8, true, true, 72);
        let path = manifest.save(&dir).unwrap();
        let problem = load_manifest(&path).unwrap();
        assert_eq!(problem.set.dim(), 8);
        assert!(problem.map.is_affine());
        let w = problem.known_solution.as_ref().expect("planted solution");
        let res = smoothed_residual(&problem, w, 0.0).unwrap();
        assert!(res.h0_norm <= 1e-12, "planted pair solves the problem: {:.3e}", res.h0_norm);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn dimension_mismatch_is_detected() {
        let dir = temp_dir("mismatch");
        std::fs::create_dir_all(&dir).unwrap();
        write_matrix_market(&dir.join("M.mtx"), &DMatrix::identity(3, 3)).unwrap();
        write_matrix_market(&dir.join("q.mtx"), &DMatrix::zeros(2, 1)).unwrap();
        let text = r#"
schema = "vineq-problem/1"
name = "mismatch"
seed = 0

[set]
kind = "orthant"
n = 3

[map]
kind = "affine"
m_file = "M.mtx"
q_file = "q.mtx"
"#;
        let path = dir.join("bad.toml");
        std::fs::write(&path, text).unwrap();
        match load_manifest(&path) {
            Err(ProblemError::DimensionMismatch { expected, found, .. }) => {
                assert_eq!((expected, found), (3, 2));
            }
            Err(other) => panic!("expected DimensionMismatch, got {other}"),
            Ok(_) => panic!("expected DimensionMismatch, got a problem"),
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn malformed_payloads_report_line_context() {
        let dir = temp_dir("malformed");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.mtx");
        std::fs::write(&path, "%%MatrixMarket matrix coordinate real general\n2 2\n").unwrap();
        match read_matrix_market(&path) {
            Err(ProblemError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected Parse, got {other:?}"),
        }
        let path = dir.join("short.mtx");
        std::fs::write(&path, "%%MatrixMarket matrix array real general\n2 2\n1.0\n2.0\n").unwrap();
        match read_matrix_market(&path) {
            Err(ProblemError::Parse { message, .. }) => assert!(message.contains("expected 4")),
            other => panic!("expected Parse, got {other:?}"),
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn nonlinear_map_kinds_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let n = 5;
        for kind in [MapKind::AffinePlusLogSumExp, MapKind::AffinePlusArctan] {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j { 2.0 } else { 0.3 * (rng.random::<f64>() - 0.5) }
            });
            let q = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let map = FlatMap::new(kind, m, q);
            let at = AmbientPoint::vector(DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0));
            let fd = fd_jacobian(|p| map.eval(p), &at, None);
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                let col = map.jacobian_apply(&at, &AmbientPoint::vector(e)).to_flat();
                for i in 0..n {
                    assert!(
                        (col[i] - fd[(i, j)]).abs() <= 1e-6 * (1.0 + fd[(i, j)].abs()),
                        "{kind:?} jacobian ({i},{j})"
                    );
                }
            }
            assert!(matches!(map.monotonicity(), Monotonicity::Strongly(_)));
        }
    }

    #[test]
    fn logsumexp_vi_solves_end_to_end() {
        // Strongly monotone nonlinear VI: orthant, F = 2I·x + q + softmax(x).
        let n = 4;
        let m = 2.0 * DMatrix::identity(n, n);
        let q = DVector::from_column_slice(&[-1.0, 0.5, -0.25, 0.1]);
        let manifest = ProblemManifest {
            name: "logsumexp-smoke".into(),
            seed: 0,
            set: SetSpec::Orthant { n },
            map: MapSpec { kind: MapKind::AffinePlusLogSumExp, m, q },
            planted: None,
        };
        let problem = manifest.instantiate().unwrap();
        let report = crate::continuation::solve(&problem, &crate::continuation::SolverConfig::default()).unwrap();
        assert_eq!(report.status, crate::continuation::SolverStatus::Solved);
        assert!(crate::continuation::audit_trace(&report).is_empty());
    }
}
