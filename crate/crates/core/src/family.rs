//! Parametrized matrix families H(a) with linear diagonals and constant coupling.
//!
//! Level k contributes the complex diagonal entry
//! `eps_k(a) = e_k(a) - (i/2) c_k(a)` with `e_k(a) = e0 + e_slope * a` and
//! `c_k(a) = c0 + c_slope * a`. Off-diagonal entries are the coupling matrix
//! V, which does not depend on `a`. The parameter may be complex; the linear
//! formulas are continued analytically.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    pub e0: f64,
    pub e_slope: f64,
    pub c0: f64,
    pub c_slope: f64,
}

impl LevelSpec {
    pub fn new(e0: f64, e_slope: f64, c0: f64, c_slope: f64) -> Self {
        LevelSpec {
            e0,
            e_slope,
            c0,
            c_slope,
        }
    }

    /// Bound level with no width.
    pub fn bound(e0: f64, e_slope: f64) -> Self {
        LevelSpec::new(e0, e_slope, 0.0, 0.0)
    }

    pub fn energy(&self, a: Complex64) -> Complex64 {
        self.e0 + a * self.e_slope
    }

    pub fn width(&self, a: Complex64) -> Complex64 {
        self.c0 + a * self.c_slope
    }

    /// `e(a) - (i/2) c(a)`.
    pub fn complex_energy(&self, a: Complex64) -> Complex64 {
        self.energy(a) - 0.5 * I * self.width(a)
    }

    /// Value and slope of the complex energy, as (offset, slope).
    fn complex_line(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.e0, -0.5 * self.c0),
            Complex64::new(self.e_slope, -0.5 * self.c_slope),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    /// Every off-diagonal entry equals `v`.
    Uniform(Complex64),
    /// Explicit symmetric matrix with zero diagonal.
    Full(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    levels: Vec<LevelSpec>,
    coupling: CouplingSpec,
}

impl FamilySpec {
    pub fn new(levels: Vec<LevelSpec>, coupling: CouplingSpec) -> std::result::Result<Self, ConfigError> {
        let n = levels.len();
        if n < 2 {
            return Err(ConfigError::semantic("n", format!("need at least 2 levels, got {n}")));
        }
        for (k, level) in levels.iter().enumerate() {
            for (name, x) in [
                ("e0", level.e0),
                ("e_slope", level.e_slope),
                ("c0", level.c0),
                ("c_slope", level.c_slope),
            ] {
                if !x.is_finite() {
                    return Err(ConfigError::semantic(format!("levels[{k}].{name}"), "not finite"));
                }
            }
            if level.c0 < 0.0 {
                return Err(ConfigError::semantic(
                    format!("levels[{k}].c0"),
                    format!("width offset must be >= 0, got {}", level.c0),
                ));
            }
        }
        match &coupling {
            CouplingSpec::Uniform(v) => {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(ConfigError::semantic("coupling.v", "not finite"));
                }
            }
            CouplingSpec::Full(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(ConfigError::semantic(
                        "coupling.matrix",
                        format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
                    ));
                }
                for i in 0..n {
                    if m[(i, i)] != Complex64::new(0.0, 0.0) {
                        return Err(ConfigError::semantic(
                            format!("coupling.matrix[{i}][{i}]"),
                            "diagonal entries must be zero",
                        ));
                    }
                    for j in 0..n {
                        let x = m[(i, j)];
                        if !(x.re.is_finite() && x.im.is_finite()) {
                            return Err(ConfigError::semantic(format!("coupling.matrix[{i}][{j}]"), "not finite"));
                        }
                        if x != m[(j, i)] {
                            return Err(ConfigError::semantic(
                                format!("coupling.matrix[{i}][{j}]"),
                                format!("asymmetric: {} != matrix[{j}][{i}] = {}", x, m[(j, i)]),
                            ));
                        }
                    }
                }
            }
        }
        Ok(FamilySpec { levels, coupling })
    }

    /// Same levels, uniform coupling `v`.
    pub fn uniform(levels: Vec<LevelSpec>, v: f64) -> std::result::Result<Self, ConfigError> {
        FamilySpec::new(levels, CouplingSpec::Uniform(Complex64::new(v, 0.0)))
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn with_coupling(&self, coupling: CouplingSpec) -> std::result::Result<Self, ConfigError> {
        FamilySpec::new(self.levels.clone(), coupling)
    }

    pub fn with_uniform_coupling(&self, v: Complex64) -> Self {
        FamilySpec {
            levels: self.levels.clone(),
            coupling: CouplingSpec::Uniform(v),
        }
    }

    /// Materialized V with zero diagonal.
    pub fn coupling_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n();
        match &self.coupling {
            CouplingSpec::Uniform(v) => DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(0.0, 0.0) } else { *v }),
            CouplingSpec::Full(m) => m.clone(),
        }
    }

    pub fn is_decoupled(&self) -> bool {
        self.coupling_matrix().iter().all(|x| *x == Complex64::new(0.0, 0.0))
    }

    /// No widths and real coupling: H(a) is real symmetric for real a.
    pub fn is_hermitian_regime(&self) -> bool {
        self.levels.iter().all(|l| l.c0 == 0.0 && l.c_slope == 0.0)
            && self.coupling_matrix().iter().all(|x| x.im == 0.0)
    }

    /// All level parameters are real by construction; with real coupling the
    /// discriminant has real coefficients and its zeros come in conjugate pairs.
    pub fn has_real_coefficients(&self) -> bool {
        self.coupling_matrix().iter().all(|x| x.im == 0.0)
    }

    /// max_k (|e_slope| + |c_slope|/2) + 2 ||V||, with the max-row-sum norm.
    pub fn lipschitz_bound(&self) -> f64 {
        let slope = self
            .levels
            .iter()
            .map(|l| l.e_slope.abs() + 0.5 * l.c_slope.abs())
            .fold(0.0, f64::max);
        slope + 2.0 * max_row_sum(&self.coupling_matrix())
    }

    pub fn complex_energies(&self, a: Complex64) -> Vec<Complex64> {
        self.levels.iter().map(|l| l.complex_energy(a)).collect()
    }
}

/// Complex symmetric (not Hermitian) square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSymmetric(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let scale = max_row_sum(&m).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).norm() > 1e-14 * scale {
                    return Err(Error::NotSymmetric(format!("entry ({i},{j}) differs from ({j},{i})")));
                }
            }
        }
        Ok(ComplexMatrix(m))
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        ComplexMatrix::new(DMatrix::from_fn(n, n, f))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.diagonal().iter().sum()
    }

    /// Max-row-sum norm.
    pub fn norm(&self) -> f64 {
        max_row_sum(&self.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == Complex64::new(0.0, 0.0)))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

pub(crate) fn max_row_sum(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// H(a): diagonal `e_k(a) - (i/2) c_k(a)`, off-diagonal V.
pub fn build_matrix(spec: &FamilySpec, a: Complex64) -> ComplexMatrix {
    let mut m = spec.coupling_matrix();
    for (k, level) in spec.levels.iter().enumerate() {
        m[(k, k)] = level.complex_energy(a);
    }
    ComplexMatrix(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossingKind {
    /// The two unperturbed levels meet at this parameter value.
    At(Complex64),
    /// Equal slopes, different offsets: never meet.
    Parallel,
    /// Same line: degenerate for every a.
    Identical,
}

/// Crossing of unperturbed levels `i < j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCrossing {
    pub i: usize,
    pub j: usize,
    pub kind: CrossingKind,
}

impl LevelCrossing {
    pub fn location(&self) -> Option<Complex64> {
        match self.kind {
            CrossingKind::At(a) => Some(a),
            _ => None,
        }
    }
}

/// Crossings of the v = 0 levels. Finite crossings come first ordered by
/// real part, then parallel and identical pairs in index order.
pub fn unperturbed_crossings(spec: &FamilySpec) -> Vec<LevelCrossing> {
    let n = spec.n();
    let mut finite = Vec::new();
    let mut degenerate = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (oi, si) = spec.levels[i].complex_line();
            let (oj, sj) = spec.levels[j].complex_line();
            let offset = oi - oj;
            let slope = si - sj;
            let kind = if slope == Complex64::new(0.0, 0.0) {
                if offset == Complex64::new(0.0, 0.0) {
                    CrossingKind::Identical
                } else {
                    CrossingKind::Parallel
                }
            } else {
                CrossingKind::At(-offset / slope)
            };
            let c = LevelCrossing { i, j, kind };
            match kind {
                CrossingKind::At(_) => finite.push(c),
                _ => degenerate.push(c),
            }
        }
    }
    finite.sort_by(|x, y| {
        let (ax, ay) = (x.location().unwrap(), y.location().unwrap());
        ax.re
            .total_cmp(&ay.re)
            .then(ax.im.total_cmp(&ay.im))
            .then((x.i, x.j).cmp(&(y.i, y.j)))
    });
    finite.extend(degenerate);
    finite
}

// ---------------------------------------------------------------------------
// Config text
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum RawComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<RawComplex> for Complex64 {
    fn from(r: RawComplex) -> Self {
        match r {
            RawComplex::Real(x) => Complex64::new(x, 0.0),
            RawComplex::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for RawComplex {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            RawComplex::Real(z.re)
        } else {
            RawComplex::Pair([z.re, z.im])
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevel {
    e0: f64,
    e_slope: f64,
    c0: f64,
    c_slope: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum RawCoupling {
    Uniform { v: RawComplex },
    Full { matrix: Vec<Vec<RawComplex>> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    n: i64,
    levels: Vec<RawLevel>,
    coupling: RawCoupling,
}

/// Parses the TOML family description.
///
/// ```toml
/// n = 2
/// [[levels]]
/// e0 = 1.0
/// e_slope = -0.5
/// c0 = 0.0
/// c_slope = 0.0
/// [[levels]]
/// e0 = 0.0
/// e_slope = 1.0
/// c0 = 0.0
/// c_slope = 0.0
/// [coupling]
/// mode = "uniform"
/// v = 0.05        # or [re, im]
/// ```
pub fn parse_family(config_text: &str) -> std::result::Result<FamilySpec, ConfigError> {
    let raw: RawFamily = toml::from_str(config_text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    if raw.n < 2 {
        return Err(ConfigError::semantic("n", format!("need at least 2 levels, got {}", raw.n)));
    }
    let n = raw.n as usize;
    if raw.levels.len() != n {
        return Err(ConfigError::semantic(
            "levels",
            format!("n = {n} but {} level entries given", raw.levels.len()),
        ));
    }
    let levels = raw
        .levels
        .iter()
        .map(|l| LevelSpec::new(l.e0, l.e_slope, l.c0, l.c_slope))
        .collect();
    let coupling = match raw.coupling {
        RawCoupling::Uniform { v } => CouplingSpec::Uniform(v.into()),
        RawCoupling::Full { matrix } => {
            if matrix.len() != n {
                return Err(ConfigError::semantic(
                    "coupling.matrix",
                    format!("expected {n} rows, got {}", matrix.len()),
                ));
            }
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != n {
                    return Err(ConfigError::semantic(
                        format!("coupling.matrix[{i}]"),
                        format!("expected {n} entries, got {}", row.len()),
                    ));
                }
            }
            CouplingSpec::Full(DMatrix::from_fn(n, n, |i, j| matrix[i][j].into()))
        }
    };
    FamilySpec::new(levels, coupling)
}

/// Renders `spec` in the format accepted by [`parse_family`].
pub fn family_to_config(spec: &FamilySpec) -> String {
    let n = spec.n();
    let raw = RawFamily {
        n: n as i64,
        levels: spec
            .levels
            .iter()
            .map(|l| RawLevel {
                e0: l.e0,
                e_slope: l.e_slope,
                c0: l.c0,
                c_slope: l.c_slope,
            })
            .collect(),
        coupling: match &spec.coupling {
            CouplingSpec::Uniform(v) => RawCoupling::Uniform { v: (*v).into() },
            CouplingSpec::Full(m) => RawCoupling::Full {
                matrix: (0..n).map(|i| (0..n).map(|j| m[(i, j)].into()).collect()).collect(),
            },
        },
    };
    toml::to_string(&raw).expect("family serializes to TOML")
}
