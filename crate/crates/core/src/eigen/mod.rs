//! Eigendecomposition of small complex symmetric matrices.
//!
//! Right eigenvectors of a complex symmetric matrix are orthogonal under the
//! bilinear c-product `(x, y) = sum_k x_k y_k` (no conjugation), so they are
//! normalized with `(x)^2 = 1`. Their Hermitian norms `<x|x>` are then at
//! least one and diverge where two states coalesce.

pub mod poly;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::family::{build_matrix, ComplexMatrix, FamilySpec};
use crate::tolerances::Tolerances;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which algorithm produces the eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Closed form for n = 2, characteristic polynomial up to n = 4, Schur above.
    #[default]
    Auto,
    /// Characteristic polynomial roots (any n, practical for small n).
    CharPoly,
    /// Complex Schur reduction (any n).
    Schur,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EigenOptions {
    pub strategy: Strategy,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Complex energy `E - (i/2) C`.
    pub value: Complex64,
    /// c-normalized right eigenvector; Hermitian-unit when `defective`.
    pub vector: DVector<Complex64>,
    /// `(x)^2` of the Hermitian-unit eigenvector before c-normalization.
    pub c_norm_sq: Complex64,
    pub defective: bool,
}

impl EigenPair {
    /// Hermitian self-overlap `<x|x>`.
    pub fn hermitian_norm_sq(&self) -> f64 {
        self.vector.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub matrix: ComplexMatrix,
    /// Ordered by descending real part, ties by descending imaginary part.
    pub pairs: Vec<EigenPair>,
    /// Parameter value the matrix was built at, when known.
    pub parameter: Option<Complex64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn is_defective(&self) -> bool {
        self.pairs.iter().any(|p| p.defective)
    }

    /// Rows are the eigenvectors.
    pub fn vector_rows(&self) -> DMatrix<Complex64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |r, k| self.pairs[r].vector[k])
    }

    /// `B B^T`; the identity for a non-defective system.
    pub fn c_gram(&self) -> DMatrix<Complex64> {
        let b = self.vector_rows();
        &b * b.transpose()
    }
}

/// Eigenvalues of `[[eps1, v], [v, eps2]]`:
/// `(eps1 + eps2)/2 +- sqrt((eps1 - eps2)^2 + 4 v^2)/2`, with the square root
/// taken on the branch with argument in (-pi/2, pi/2].
pub fn closed_form_2x2(eps1: Complex64, eps2: Complex64, v: Complex64) -> (Complex64, Complex64) {
    let mean = 0.5 * (eps1 + eps2);
    let diff = eps1 - eps2;
    let mut root = (diff * diff + 4.0 * v * v).sqrt();
    if root.re == 0.0 && root.im < 0.0 {
        root = -root;
    }
    (mean + 0.5 * root, mean - 0.5 * root)
}

pub fn eigendecompose(m: &ComplexMatrix) -> Result<EigenSystem> {
    eigendecompose_with(m, &EigenOptions::default())
}

pub fn eigendecompose_with(m: &ComplexMatrix, opts: &EigenOptions) -> Result<EigenSystem> {
    let n = m.n();
    if !(2..=64).contains(&n) {
        return Err(Error::Dimension(n));
    }
    let a = m.as_matrix();
    let norm = m.norm();

    let raw: Vec<(Complex64, DVector<Complex64>)> = if m.is_diagonal() {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| cmp_values(a[(i, i)], a[(j, j)]).then(i.cmp(&j)));
        idx.into_iter()
            .map(|k| (a[(k, k)], DVector::from_fn(n, |i, _| if i == k { ONE } else { ZERO })))
            .collect()
    } else if n == 2 && opts.strategy == Strategy::Auto {
        let (p, q, v) = (a[(0, 0)], a[(1, 1)], a[(0, 1)]);
        let (l1, l2) = closed_form_2x2(p, q, v);
        let mut values = vec![l1, l2];
        values.sort_by(|x, y| cmp_values(*x, *y));
        values
            .into_iter()
            .map(|l| {
                let x1 = DVector::from_vec(vec![v, l - p]);
                let x2 = DVector::from_vec(vec![l - q, v]);
                let x = if x1.norm() >= x2.norm() { x1 } else { x2 };
                let h = x.norm();
                (l, x / Complex64::new(h, 0.0))
            })
            .collect()
    } else {
        let use_poly = match opts.strategy {
            Strategy::Auto => n <= 4,
            Strategy::CharPoly => true,
            Strategy::Schur => false,
        };
        let mut values = if use_poly {
            let coeffs = poly::characteristic_polynomial(a);
            poly::polynomial_roots(&coeffs).ok_or_else(|| no_convergence(a))?
        } else {
            schur_eigenvalues(a)?
        };
        values.sort_by(|x, y| cmp_values(*x, *y));
        vectors_by_inverse_iteration(a, &values, norm, opts.tolerances.defect_ratio)
    };

    let pairs = raw
        .into_iter()
        .map(|(value, x)| finish_pair(value, x, opts.tolerances.defect_ratio))
        .collect();
    Ok(EigenSystem {
        matrix: m.clone(),
        pairs,
        parameter: None,
    })
}

/// Eigenvalues only, in the same order as [`eigendecompose_with`] reports them.
pub fn eigenvalues(m: &ComplexMatrix, strategy: Strategy) -> Result<Vec<Complex64>> {
    let n = m.n();
    if !(2..=64).contains(&n) {
        return Err(Error::Dimension(n));
    }
    let a = m.as_matrix();
    let mut values = if n == 2 && strategy == Strategy::Auto {
        let (l1, l2) = closed_form_2x2(a[(0, 0)], a[(1, 1)], a[(0, 1)]);
        vec![l1, l2]
    } else if m.is_diagonal() {
        a.diagonal().iter().copied().collect()
    } else if strategy == Strategy::CharPoly || (strategy == Strategy::Auto && n <= 4) {
        poly::polynomial_roots(&poly::characteristic_polynomial(a)).ok_or_else(|| no_convergence(a))?
    } else {
        schur_eigenvalues(a)?
    };
    values.sort_by(|x, y| cmp_values(*x, *y));
    Ok(values)
}

/// Builds H(a) and decomposes it.
pub fn eigensystem_at(spec: &FamilySpec, a: Complex64, opts: &EigenOptions) -> Result<EigenSystem> {
    let m = build_matrix(spec, a);
    let mut sys = eigendecompose_with(&m, opts)?;
    sys.parameter = Some(a);
    Ok(sys)
}

fn no_convergence(a: &DMatrix<Complex64>) -> Error {
    Error::NoConvergence {
        n: a.nrows(),
        matrix: a.iter().copied().collect(),
    }
}

/// Descending real part, ties by descending imaginary part.
pub(crate) fn cmp_values(x: Complex64, y: Complex64) -> std::cmp::Ordering {
    y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im))
}

fn schur_eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 1000 * n).ok_or_else(|| no_convergence(a))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

fn c_dot(x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

fn residual(a: &DMatrix<Complex64>, lambda: Complex64, x: &DVector<Complex64>) -> f64 {
    (a * x - x * lambda).norm()
}

fn start_vector(n: usize, seed: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |k, _| {
        let t = (k + 1) as f64 * (1.0 + 0.37 * seed as f64);
        Complex64::new(1.0 + 0.5 * t.sin(), 0.3 * (1.7 * t).cos())
    })
}

/// Shifted inverse iteration for each eigenvalue. Eigenvalues that repeat to
/// working precision are separated by c-projecting out the vectors already
/// found for the same cluster.
fn vectors_by_inverse_iteration(
    a: &DMatrix<Complex64>,
    values: &[Complex64],
    norm: f64,
    defect_ratio: f64,
) -> Vec<(Complex64, DVector<Complex64>)> {
    let n = a.nrows();
    // Multiple roots of the characteristic polynomial are only accurate to
    // about sqrt(eps).
    let cluster_tol = 1e-6 * (1.0 + norm);
    let mut out: Vec<(Complex64, DVector<Complex64>)> = Vec::with_capacity(n);
    for (idx, &lambda0) in values.iter().enumerate() {
        let deflate: Vec<DVector<Complex64>> = values[..idx]
            .iter()
            .zip(out.iter())
            .filter(|(l, (_, x))| (*l - lambda0).norm() <= cluster_tol && c_dot(x, x).norm() > 1e-3)
            .map(|(_, (_, x))| x.clone())
            .collect();
        let start = start_vector(n, deflate.len());
        let x = inverse_iteration(a, lambda0, start, &deflate, norm, 3);
        let mut best = (lambda0, x);
        let xx = c_dot(&best.1, &best.1);
        if xx.norm() > defect_ratio {
            let rq = c_dot(&best.1, &(a * &best.1)) / xx;
            if residual(a, rq, &best.1) < residual(a, lambda0, &best.1) {
                let x = inverse_iteration(a, rq, best.1.clone(), &deflate, norm, 1);
                best = (rq, x);
            }
        }
        out.push(best);
    }
    out
}

fn inverse_iteration(
    a: &DMatrix<Complex64>,
    lambda: Complex64,
    start: DVector<Complex64>,
    deflate: &[DVector<Complex64>],
    norm: f64,
    steps: usize,
) -> DVector<Complex64> {
    let n = a.nrows();
    let mut shift = lambda;
    let mut lu = None;
    for attempt in 0..8 {
        let shifted = a - DMatrix::<Complex64>::identity(n, n) * shift;
        let candidate = shifted.lu();
        if candidate.u().diagonal().iter().all(|d| *d != ZERO) {
            lu = Some(candidate);
            break;
        }
        let bump = f64::EPSILON * (1.0 + norm) * 10f64.powi(attempt);
        shift = lambda + Complex64::new(bump, bump);
    }
    let Some(lu) = lu else {
        return start;
    };
    let mut x = start;
    for _ in 0..steps {
        for u in deflate {
            let coef = c_dot(u, &x) / c_dot(u, u);
            x -= u * coef;
        }
        let Some(y) = lu.solve(&x) else { break };
        let h = y.norm();
        if !(h.is_finite() && h > 0.0) {
            break;
        }
        x = y / Complex64::new(h, 0.0);
    }
    for u in deflate {
        let coef = c_dot(u, &x) / c_dot(u, u);
        x -= u * coef;
    }
    let h = x.norm();
    x / Complex64::new(h, 0.0)
}

/// Sign convention: the largest-modulus component (lowest index on ties) gets
/// a positive real part.
fn fix_sign(x: &mut DVector<Complex64>) {
    let max = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(k) = x.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)) {
        let z = x[k];
        if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
            x.neg_mut();
        }
    }
}

fn finish_pair(value: Complex64, x: DVector<Complex64>, defect_ratio: f64) -> EigenPair {
    let h = x.norm();
    let mut unit = x / Complex64::new(h, 0.0);
    let c = c_dot(&unit, &unit);
    if c.norm() < defect_ratio {
        fix_sign(&mut unit);
        return EigenPair {
            value,
            vector: unit,
            c_norm_sq: c,
            defective: true,
        };
    }
    let mut vector = unit / c.sqrt();
    fix_sign(&mut vector);
    EigenPair {
        value,
        vector,
        c_norm_sq: c,
        defective: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiorthMetrics {
    /// `<x_R|x_R>` per state; infinite for defective states.
    pub norms: Vec<f64>,
    /// `overlaps[(r2, r)] = <x_r2|x_r>`.
    pub overlaps: DMatrix<Complex64>,
    pub max_norm: f64,
}

impl BiorthMetrics {
    /// Largest |Re <x_R'|x_R>| over R' != R. Zero when every off-diagonal
    /// overlap is purely imaginary.
    pub fn off_diagonal_real_part(&self) -> f64 {
        let n = self.overlaps.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.overlaps[(i, j)].re.abs());
                }
            }
        }
        worst
    }
}

pub fn biorthogonality_metrics(sys: &EigenSystem) -> BiorthMetrics {
    let n = sys.n();
    let overlaps = DMatrix::from_fn(n, n, |r2, r| sys.pairs[r2].vector.dotc(&sys.pairs[r].vector));
    let norms: Vec<f64> = sys
        .pairs
        .iter()
        .map(|p| if p.defective { f64::INFINITY } else { p.hermitian_norm_sq() })
        .collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    BiorthMetrics {
        norms,
        overlaps,
        max_norm,
    }
}

/// `min_s || u1 - s i u2 ||` over s = +-1, for the Hermitian-unit copies u1, u2
/// of the two eigenvectors. Zero when the states have coalesced.
pub fn coalescence_residual(p1: &EigenPair, p2: &EigenPair) -> Result<f64> {
    let (h1, h2) = (p1.vector.norm(), p2.vector.norm());
    if h1 == 0.0 || h2 == 0.0 || !h1.is_finite() || !h2.is_finite() {
        return Err(Error::ZeroVector);
    }
    let u1 = &p1.vector / Complex64::new(h1, 0.0);
    let u2 = &p2.vector / Complex64::new(h2, 0.0);
    let plus = (&u1 - &u2 * I).norm();
    let minus = (&u1 + &u2 * I).norm();
    Ok(plus.min(minus))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    /// `b[(r, i)]`: component of state r on basis state i.
    pub b: DMatrix<Complex64>,
    /// Elementwise `b^2` (no conjugation).
    pub b_sq: DMatrix<Complex64>,
}

impl MixingMatrix {
    pub fn row_sums(&self) -> Vec<Complex64> {
        self.b_sq.row_iter().map(|r| r.iter().sum()).collect()
    }

    /// Basis index with the largest |b^2| for state r.
    pub fn dominant(&self, r: usize) -> usize {
        dominant_index(self.b_sq.row(r).iter().map(|z| z.norm()))
    }
}

pub(crate) fn dominant_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, x) in values.enumerate() {
        if x > best.1 {
            best = (k, x);
        }
    }
    best.0
}

/// Expansion coefficients of each eigenvector in a real orthonormal basis
/// (basis vectors are the columns of `basis`).
pub fn mixing_coefficients(sys: &EigenSystem, basis: &DMatrix<f64>) -> Result<MixingMatrix> {
    mixing_coefficients_with(sys, basis, Tolerances::default().basis_orthonormality)
}

pub fn mixing_coefficients_with(sys: &EigenSystem, basis: &DMatrix<f64>, tol: f64) -> Result<MixingMatrix> {
    let n = sys.n();
    if basis.nrows() != n || basis.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "basis is {}x{}, system has n = {n}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let gram = basis.transpose() * basis;
    let deviation = (gram - DMatrix::<f64>::identity(n, n)).amax();
    if !(deviation <= tol) {
        return Err(Error::NonOrthonormalBasis { deviation });
    }
    let b = DMatrix::from_fn(n, n, |r, i| {
        (0..n).map(|k| sys.pairs[r].vector[k] * basis[(k, i)]).sum::<Complex64>()
    });
    let b_sq = b.map(|z| z * z);
    Ok(MixingMatrix { b, b_sq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{FamilySpec, LevelSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn two_level(v: f64) -> FamilySpec {
        FamilySpec::uniform(vec![LevelSpec::bound(1.0, -0.5), LevelSpec::bound(0.0, 1.0)], v).unwrap()
    }

    fn sym2(p: Complex64, q: Complex64, v: Complex64) -> ComplexMatrix {
        ComplexMatrix::new(DMatrix::from_row_slice(2, 2, &[p, v, v, q])).unwrap()
    }

    #[test]
    fn degenerate_diagonal_with_coupling() {
        let m = sym2(c(2.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0), c(0.05, 0.0));
        let sys = eigendecompose(&m).unwrap();
        assert!((sys.pairs[0].value - c(2.0 / 3.0 + 0.05, 0.0)).norm() < 1e-15);
        assert!((sys.pairs[1].value - c(2.0 / 3.0 - 0.05, 0.0)).norm() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = &sys.pairs[0].vector;
        let v1 = &sys.pairs[1].vector;
        assert!((v0[0] - c(s, 0.0)).norm() < 1e-15 && (v0[1] - c(s, 0.0)).norm() < 1e-15);
        assert!((v1[0] - c(s, 0.0)).norm() < 1e-15 && (v1[1] - c(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_matrix_gives_unit_vectors() {
        let m = ComplexMatrix::from_fn(3, |i, j| if i == j { c(i as f64 * 0.3, -0.1) } else { c(0.0, 0.0) }).unwrap();
        let sys = eigendecompose(&m).unwrap();
        let order: Vec<usize> = sys.pairs.iter().map(|p| dominant_index(p.vector.iter().map(|z| z.norm()))).collect();
        assert_eq!(order, vec![2, 1, 0]);
        for p in &sys.pairs {
            assert!(!p.defective);
            assert_eq!(p.vector.iter().filter(|z| **z == ONE).count(), 1);
        }
    }

    #[test]
    fn closed_form_examples() {
        let (l1, l2) = closed_form_2x2(c(2.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0), c(0.05, 0.0));
        assert!((l1 - c(2.0 / 3.0 + 0.05, 0.0)).norm() < 1e-15);
        assert!((l2 - c(2.0 / 3.0 - 0.05, 0.0)).norm() < 1e-15);

        let (e1, e2) = (c(0.3, -0.2), c(-0.1, 0.05));
        let (l1, l2) = closed_form_2x2(e1, e2, c(0.0, 0.0));
        assert!((l1 - e1).norm() < 1e-15 && (l2 - e2).norm() < 1e-15);

        // eps1 - eps2 = 2 i v: both values at the mean
        let v = c(0.05, 0.0);
        let e2 = c(0.4, -0.03);
        let e1 = e2 + 2.0 * I * v;
        let (l1, l2) = closed_form_2x2(e1, e2, v);
        assert!((l1 - 0.5 * (e1 + e2)).norm() < 1e-15);
        assert!((l2 - 0.5 * (e1 + e2)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_branch_is_right_half_plane() {
        // (eps1 - eps2)^2 + 4 v^2 = -1 + 0i and -1 - 0i
        for im in [0.0, -0.0] {
            let (l1, l2) = closed_form_2x2(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.5) + c(0.0, im));
            assert!((l1 - c(0.0, 0.5)).norm() < 1e-15, "{l1}");
            assert!((l2 - c(0.0, -0.5)).norm() < 1e-15, "{l2}");
        }
    }

    #[test]
    fn branch_point_matrix_is_flagged_defective() {
        let v = 0.05;
        let spec = two_level(v);
        let a_bp = c(2.0 / 3.0, 4.0 / 3.0 * v);
        let sys = eigensystem_at(&spec, a_bp, &EigenOptions::default()).unwrap();
        let expected = c(2.0 / 3.0, v / 3.0);
        for p in &sys.pairs {
            assert!((p.value - expected).norm() < 1e-7, "{}", p.value);
            assert!(p.defective);
        }
        let metrics = biorthogonality_metrics(&sys);
        assert!(metrics.max_norm.is_infinite());
    }

    #[test]
    fn c_normalization_and_residual() {
        let m = ComplexMatrix::from_fn(3, |i, j| {
            let s = (i + j) as f64;
            c((1.0 + s).sin(), if i == j { -0.2 * s } else { 0.1 * s.cos() })
        })
        .unwrap();
        for strategy in [Strategy::Auto, Strategy::CharPoly, Strategy::Schur] {
            let sys = eigendecompose_with(&m, &EigenOptions { strategy, ..Default::default() }).unwrap();
            for p in &sys.pairs {
                let sq: Complex64 = p.vector.iter().map(|z| z * z).sum();
                assert!((sq - ONE).norm() < 1e-10);
                let r = (m.as_matrix() * &p.vector - &p.vector * p.value).norm() / p.vector.norm();
                assert!(r <= 1e-9 * m.norm(), "{strategy:?} residual {r}");
            }
            let gram = sys.c_gram();
            assert!(max_abs(&(gram - DMatrix::identity(3, 3))) < 1e-8);
        }
    }

    #[test]
    fn repeated_eigenvalue_gets_independent_vectors() {
        // at a = 0 the three upper levels coincide; 1 - v is a double eigenvalue
        let v = 0.03;
        let spec = FamilySpec::uniform(
            vec![
                LevelSpec::bound(1.0, -1.0 / 3.0),
                LevelSpec::bound(1.0, -5.0 / 12.0),
                LevelSpec::bound(1.0, -0.5),
                LevelSpec::bound(0.0, 1.0),
            ],
            v,
        )
        .unwrap();
        let sys = eigensystem_at(&spec, c(0.0, 0.0), &EigenOptions::default()).unwrap();
        let doubles = sys.pairs.iter().filter(|p| (p.value - c(1.0 - v, 0.0)).norm() < 1e-9).count();
        assert_eq!(doubles, 2);
        assert!(max_abs(&(sys.c_gram() - DMatrix::identity(4, 4))) < 1e-8);
    }

    #[test]
    fn hermitian_limit_metrics() {
        let sys = eigensystem_at(&two_level(0.05), c(0.3, 0.0), &EigenOptions::default()).unwrap();
        let m = biorthogonality_metrics(&sys);
        for x in &m.norms {
            assert!((x - 1.0).abs() < 1e-12);
        }
        assert!(m.overlaps[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn norms_grow_toward_branch_point() {
        let v = 0.05;
        let spec = two_level(v);
        let a = c(2.0 / 3.0, 4.0 / 3.0 * v * (1.0 - 1e-3));
        let sys = eigensystem_at(&spec, a, &EigenOptions::default()).unwrap();
        let m = biorthogonality_metrics(&sys);
        assert!(m.max_norm > 10.0, "{}", m.max_norm);
        for x in &m.norms {
            assert!(*x >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn coalescence_follows_square_root_law() {
        // along the ray toward the branch point, residual ~ sqrt(2 (1 - t))
        let v = 0.05;
        let spec = two_level(v);
        let mut last = f64::INFINITY;
        for d in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let a = c(2.0 / 3.0, 4.0 / 3.0 * v * (1.0 - d));
            let sys = eigensystem_at(&spec, a, &EigenOptions::default()).unwrap();
            let r = coalescence_residual(&sys.pairs[0], &sys.pairs[1]).unwrap();
            let law = (2.0 * d).sqrt();
            assert!((r - law).abs() < 0.06 * law, "d = {d}: {r} vs {law}");
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn off_diagonal_overlap_is_imaginary_with_widths() {
        let spec = FamilySpec::uniform(vec![LevelSpec::new(1.0, -0.5, 0.2, 0.0), LevelSpec::bound(0.0, 1.0)], 0.05).unwrap();
        let sys = eigensystem_at(&spec, c(2.0 / 3.0, 0.0), &EigenOptions::default()).unwrap();
        let m = biorthogonality_metrics(&sys);
        assert!(m.overlaps[(0, 1)].norm() > 1e-3);
        assert!(m.off_diagonal_real_part() < 1e-8);
    }

    #[test]
    fn coalescence_residual_examples() {
        let u = DVector::from_vec(vec![c(0.6, 0.1), c(-0.2, 0.7)]);
        let p1 = finish_pair(ONE, u.clone(), 1e-6);
        let p2 = EigenPair {
            vector: &p1.vector * (-I),
            ..p1.clone()
        };
        assert!(coalescence_residual(&p1, &p2).unwrap() < 1e-15);

        let e = |k: usize| EigenPair {
            value: ONE,
            vector: DVector::from_fn(2, |i, _| if i == k { ONE } else { ZERO }),
            c_norm_sq: ONE,
            defective: false,
        };
        let r = coalescence_residual(&e(0), &e(1)).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);

        let zero = EigenPair {
            vector: DVector::zeros(2),
            ..e(0)
        };
        assert!(matches!(coalescence_residual(&zero, &e(1)), Err(Error::ZeroVector)));
    }

    #[test]
    fn mixing_at_crossing_is_half() {
        let sys = eigensystem_at(&two_level(0.05), c(2.0 / 3.0, 0.0), &EigenOptions::default()).unwrap();
        let mix = mixing_coefficients(&sys, &DMatrix::identity(2, 2)).unwrap();
        for r in 0..2 {
            for i in 0..2 {
                assert!((mix.b_sq[(r, i)] - c(0.5, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mixing_unperturbed_is_identity_pattern() {
        let sys = eigensystem_at(&two_level(0.0), c(0.2, 0.0), &EigenOptions::default()).unwrap();
        let mix = mixing_coefficients(&sys, &DMatrix::identity(2, 2)).unwrap();
        for r in 0..2 {
            let d = mix.dominant(r);
            assert_eq!(mix.b[(r, d)], ONE);
            assert_eq!(mix.b[(r, 1 - d)], ZERO);
        }
    }

    #[test]
    fn mixing_far_from_crossing_is_nearly_pure() {
        let v = 0.05;
        let sys = eigensystem_at(&two_level(v), c(0.0, 0.0), &EigenOptions::default()).unwrap();
        let mix = mixing_coefficients(&sys, &DMatrix::identity(2, 2)).unwrap();
        // state 0 is the upper one, dominated by level 0 (e1(0) = 1)
        // 2x2 oracle: b^2 = (1 + |d| / sqrt(d^2 + v^2)) / 2 with d = (e1 - e2) / 2
        let d: f64 = 0.5;
        let oracle = 0.5 * (1.0 + d / (d * d + v * v).sqrt());
        assert!((mix.b_sq[(0, 0)].re - oracle).abs() < 1e-12);
        assert!(mix.b_sq[(0, 0)].re > 0.99);
    }

    #[test]
    fn rotated_basis_and_bad_basis() {
        let sys = eigensystem_at(&two_level(0.05), c(0.4, 0.0), &EigenOptions::default()).unwrap();
        let (s, co) = 0.3f64.sin_cos();
        let basis = DMatrix::from_row_slice(2, 2, &[co, -s, s, co]);
        let mix = mixing_coefficients(&sys, &basis).unwrap();
        for z in mix.row_sums() {
            assert!((z - ONE).norm() < 1e-12);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(mixing_coefficients(&sys, &bad), Err(Error::NonOrthonormalBasis { .. })));
    }

    #[test]
    fn rejects_out_of_range_dimension() {
        let m = ComplexMatrix::from_fn(65, |i, j| if i == j { ONE } else { ZERO }).unwrap();
        assert!(matches!(eigendecompose(&m), Err(Error::Dimension(65))));
    }
}
