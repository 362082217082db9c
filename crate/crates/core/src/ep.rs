//! Branch points (exceptional points) of H(a) in the complex parameter plane.
//!
//! A branch point is a zero of the discriminant
//! `D(a) = prod_{R < R'} (E_R(a) - E_R'(a))^2`, which is analytic in `a`. For
//! two levels it reduces to `(eps1 - eps2)^2 + 4 v^2`. Zeros are located with
//! Müller's method and certified by following the eigenvalues once around a
//! small circle: a simple branch point exchanges exactly two of them.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::{eigensystem_at, eigenvalues, coalescence_residual, EigenOptions, EigenSystem};
use crate::error::{Error, Result};
use crate::family::{build_matrix, FamilySpec};
use crate::sweep::match_states_with;

#[derive(Debug, Clone, Copy)]
pub struct EpOptions {
    pub eigen: EigenOptions,
    pub max_iter: usize,
    /// Steps of the certification loop.
    pub loop_steps: usize,
    /// Upper bound on the certification loop radius.
    pub max_loop_radius: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        EpOptions {
            eigen: EigenOptions::default(),
            max_iter: 200,
            loop_steps: 256,
            max_loop_radius: 0.05,
        }
    }
}

pub fn discriminant(spec: &FamilySpec, a: Complex64) -> Result<Complex64> {
    discriminant_with(spec, a, &EigenOptions::default())
}

pub fn discriminant_with(spec: &FamilySpec, a: Complex64, opts: &EigenOptions) -> Result<Complex64> {
    let m = build_matrix(spec, a);
    if m.n() == 2 {
        let d = m[(0, 0)] - m[(1, 1)];
        let v = m[(0, 1)];
        return Ok(d * d + 4.0 * v * v);
    }
    let values = eigenvalues(&m, opts.strategy)?;
    Ok(pair_product(&values))
}

fn pair_product(values: &[Complex64]) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for (k, x) in values.iter().enumerate() {
        for y in &values[k + 1..] {
            let d = x - y;
            p *= d * d;
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootIterate {
    pub a: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub a_bp: Complex64,
    /// Mean of the two coalescing eigenvalues.
    pub value_bp: Complex64,
    /// Indices (in descending-real-part order at `a_bp`) of the coalescing states.
    pub pair: (usize, usize),
    /// |D(a_bp)|.
    pub disc_residual: f64,
    /// Reference magnitude: (max_{R<R'} |E_R - E_R'|^2)^(pairs) at the seed.
    pub scale: f64,
    /// Coalescence residual of the pair at the closest non-defective sample.
    pub coalescence: f64,
    pub history: Vec<RootIterate>,
}

/// Locates a zero of the discriminant starting at `seed`. `tol` is the
/// relative step size at which Müller iteration stops.
pub fn find_branch_point(spec: &FamilySpec, seed: Complex64, tol: f64) -> Result<BranchPoint> {
    find_branch_point_with(spec, seed, tol, &EpOptions::default())
}

pub fn find_branch_point_with(spec: &FamilySpec, seed: Complex64, tol: f64, opts: &EpOptions) -> Result<BranchPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let f = |a: Complex64| discriminant_with(spec, a, &opts.eigen);

    let seed_values = eigenvalues(&build_matrix(spec, seed), opts.eigen.strategy)?;
    let n = seed_values.len();
    let max_gap_sq = seed_values
        .iter()
        .enumerate()
        .flat_map(|(k, x)| seed_values[k + 1..].iter().map(move |y| (x - y).norm_sqr()))
        .fold(0.0, f64::max);
    let scale = max_gap_sq.powi((n * (n - 1) / 2) as i32);

    let (root, history) = muller(&f, seed, tol, opts.max_iter)?;
    let (root, history) = secant_polish(&f, root, history)?;
    let disc_residual = history.last().map(|h| h.residual).unwrap_or(f64::INFINITY);
    if !(disc_residual <= opts.eigen.tolerances.disc_residual * scale) {
        return Err(Error::RootNotConverged {
            history: history.iter().map(|h| h.a).collect(),
        });
    }

    let sys = eigensystem_at(spec, root, &opts.eigen)?;
    let (pair, value_bp) = coalescing_pair(&sys)?;
    let coalescence = nearby_coalescence(spec, root, &opts.eigen)?;
    Ok(BranchPoint {
        a_bp: root,
        value_bp,
        pair,
        disc_residual,
        scale,
        coalescence,
        history,
    })
}

type History = Vec<RootIterate>;

fn muller(
    f: &impl Fn(Complex64) -> Result<Complex64>,
    seed: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, History)> {
    let h = 1e-3 * seed.norm().max(1.0);
    let mut x = [seed - h, seed + Complex64::new(0.0, h), seed];
    let mut fx = [f(x[0])?, f(x[1])?, f(x[2])?];
    let mut history = vec![RootIterate {
        a: seed,
        residual: fx[2].norm(),
    }];
    if fx[2] == Complex64::new(0.0, 0.0) {
        return Ok((seed, history));
    }
    for _ in 0..max_iter {
        let h1 = x[1] - x[0];
        let h2 = x[2] - x[1];
        let d1 = (fx[1] - fx[0]) / h1;
        let d2 = (fx[2] - fx[1]) / h2;
        let dd = (d2 - d1) / (h2 + h1);
        let b = d2 + h2 * dd;
        let root = (b * b - 4.0 * fx[2] * dd).sqrt();
        let den = if (b + root).norm() >= (b - root).norm() { b + root } else { b - root };
        let step = if den.norm() > 0.0 {
            -2.0 * fx[2] / den
        } else {
            // flat model: nudge and retry
            h2 * 0.5 + Complex64::new(0.0, h2.norm() * 0.5)
        };
        let next = x[2] + step;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        let fnext = f(next)?;
        history.push(RootIterate {
            a: next,
            residual: fnext.norm(),
        });
        x = [x[1], x[2], next];
        fx = [fx[1], fx[2], fnext];
        if fnext == Complex64::new(0.0, 0.0) || step.norm() <= tol * (1.0 + next.norm()) {
            return Ok((next, history));
        }
    }
    Err(Error::RootNotConverged {
        history: history.iter().map(|h| h.a).collect(),
    })
}

/// A few secant steps, each kept only if it lowers |D|.
fn secant_polish(
    f: &impl Fn(Complex64) -> Result<Complex64>,
    root: Complex64,
    mut history: History,
) -> Result<(Complex64, History)> {
    let mut best = *history.last().expect("history holds the root");
    debug_assert_eq!(best.a, root);
    if best.residual == 0.0 || history.len() < 2 {
        return Ok((root, history));
    }
    let mut prev = history[history.len() - 2];
    let mut fprev = f(prev.a)?;
    let mut fbest = f(best.a)?;
    for _ in 0..3 {
        let denom = fbest - fprev;
        if denom.norm() == 0.0 {
            break;
        }
        let next = best.a - fbest * (best.a - prev.a) / denom;
        let fnext = f(next)?;
        if !(fnext.norm() < best.residual) {
            break;
        }
        prev = best;
        fprev = fbest;
        best = RootIterate {
            a: next,
            residual: fnext.norm(),
        };
        fbest = fnext;
        history.push(best);
    }
    Ok((best.a, history))
}

/// Closest pair of eigenvalues; rejects points where a third one joins them.
fn coalescing_pair(sys: &EigenSystem) -> Result<((usize, usize), Complex64)> {
    let values = sys.values();
    let n = values.len();
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (values[i] - values[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, d) = best;
    let mean = 0.5 * (values[i] + values[j]);
    let radius = (10.0 * d).max(1e-4 * (1.0 + sys.matrix.norm()));
    let count = values.iter().filter(|x| (*x - mean).norm() <= radius).count();
    if count > 2 {
        return Err(Error::HigherOrderDegeneracy {
            a: sys.parameter.unwrap_or_default(),
            count,
        });
    }
    Ok(((i, j), mean))
}

/// Coalescence residual of the closest pair at the nearest sample around `a`
/// where both states are non-defective.
fn nearby_coalescence(spec: &FamilySpec, a: Complex64, opts: &EigenOptions) -> Result<f64> {
    let mut r = 1e-8 * (1.0 + a.norm());
    for _ in 0..40 {
        let sys = eigensystem_at(spec, a + r, opts)?;
        let ((i, j), _) = closest(&sys);
        if !sys.pairs[i].defective && !sys.pairs[j].defective {
            return coalescence_residual(&sys.pairs[i], &sys.pairs[j]);
        }
        r *= 2.0;
    }
    Ok(f64::NAN)
}

fn closest(sys: &EigenSystem) -> ((usize, usize), f64) {
    let values = sys.values();
    let mut best = ((0, 1), f64::INFINITY);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let d = (values[i] - values[j]).norm();
            if d < best.1 {
                best = ((i, j), d);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub loop_center: Complex64,
    pub loop_radius: f64,
    pub steps: usize,
    /// `permutation[l]`: position (descending real part at the loop start) reached
    /// after one counter-clockwise turn by the state that started at position `l`.
    pub permutation: Vec<usize>,
    /// Worst matching confidence along the loop.
    pub min_confidence: f64,
    /// Largest eigenvalue jump of a tracked state between consecutive loop points.
    pub max_tracking_gap: f64,
}

impl MonodromyResult {
    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// The swapped positions if the permutation is a single transposition.
    pub fn transposition(&self) -> Option<(usize, usize)> {
        let moved: Vec<usize> = (0..self.permutation.len()).filter(|&i| self.permutation[i] != i).collect();
        match moved.as_slice() {
            [i, j] if self.permutation[*i] == *j && self.permutation[*j] == *i => Some((*i, *j)),
            _ => None,
        }
    }
}

pub fn encircle(spec: &FamilySpec, center: Complex64, radius: f64, steps: usize) -> Result<MonodromyResult> {
    encircle_with(spec, center, radius, steps, &EpOptions::default())
}

pub fn encircle_with(
    spec: &FamilySpec,
    center: Complex64,
    radius: f64,
    steps: usize,
    opts: &EpOptions,
) -> Result<MonodromyResult> {
    if steps < 64 {
        return Err(Error::InvalidArgument(format!("loop needs at least 64 steps, got {steps}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let points: Vec<Complex64> = (0..steps)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / steps as f64))
        .collect();
    let systems: Vec<EigenSystem> = points
        .par_iter()
        .map(|&a| eigensystem_at(spec, a, &opts.eigen))
        .collect::<Result<_>>()?;

    // clearance: first-order distance |D / D'| to the nearest zero
    let disc: Vec<Complex64> = systems
        .iter()
        .map(|s| if s.n() == 2 { discriminant_with(spec, s.parameter.unwrap(), &opts.eigen).unwrap() } else { pair_product(&s.values()) })
        .collect();
    let clearance = opts.eigen.tolerances.loop_clearance;
    for k in 0..steps {
        let (p, q) = ((k + steps - 1) % steps, (k + 1) % steps);
        let slope = (disc[q] - disc[p]) / (points[q] - points[p]);
        let distance = if disc[k].norm() == 0.0 { 0.0 } else { disc[k].norm() / slope.norm() };
        if distance < clearance {
            return Err(Error::LoopTooClose {
                near: points[k],
                distance,
            });
        }
    }

    let n = systems[0].n();
    let mut position: Vec<usize> = (0..n).collect();
    let mut min_confidence = 1.0_f64;
    let mut max_gap = 0.0_f64;
    for k in 0..steps {
        let prev = &systems[k];
        let cur = &systems[(k + 1) % steps];
        let m = match_states_with(prev, cur, opts.eigen.tolerances.match_tie)?;
        min_confidence = min_confidence.min(m.confidence);
        for p in position.iter_mut() {
            let q = m.permutation[*p];
            max_gap = max_gap.max((prev.pairs[*p].value - cur.pairs[q].value).norm());
            *p = q;
        }
    }
    Ok(MonodromyResult {
        loop_center: center,
        loop_radius: radius,
        steps,
        permutation: position,
        min_confidence,
        max_tracking_gap: max_gap,
    })
}

/// Closed rectangle in the complex parameter plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region {
            re: (re_min, re_max),
            im: (im_min, im_max),
        }
    }

    pub fn contains(&self, a: Complex64) -> bool {
        let slack = 1e-12 * (1.0 + a.norm());
        a.re >= self.re.0 - slack && a.re <= self.re.1 + slack && a.im >= self.im.0 - slack && a.im <= self.im.1 + slack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScannedBranchPoint {
    pub point: BranchPoint,
    pub monodromy: Option<MonodromyResult>,
    /// The certification loop exchanged exactly the coalescing pair.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPointScan {
    /// Ordered by (Re a, Im a).
    pub points: Vec<ScannedBranchPoint>,
    /// The coupling vanishes identically: degeneracies are the real
    /// unperturbed crossings and the discriminant factorizes into squares.
    pub decoupled: bool,
}

pub fn list_branch_points(spec: &FamilySpec, region: Region, grid: usize) -> Result<BranchPointScan> {
    list_branch_points_with(spec, region, grid, &EpOptions::default())
}

pub fn list_branch_points_with(spec: &FamilySpec, region: Region, grid: usize, opts: &EpOptions) -> Result<BranchPointScan> {
    if grid < 4 {
        return Err(Error::InvalidArgument(format!("grid must be >= 4, got {grid}")));
    }
    if spec.is_decoupled() {
        return Ok(BranchPointScan {
            points: Vec::new(),
            decoupled: true,
        });
    }
    let seeds: Vec<Complex64> = (0..grid)
        .flat_map(|i| {
            (0..grid).map(move |j| {
                Complex64::new(
                    region.re.0 + (region.re.1 - region.re.0) * (i as f64 + 0.5) / grid as f64,
                    region.im.0 + (region.im.1 - region.im.0) * (j as f64 + 0.5) / grid as f64,
                )
            })
        })
        .collect();
    let tol = opts.eigen.tolerances.root_step;
    let mut found: Vec<BranchPoint> = seeds
        .par_iter()
        .filter_map(|&s| find_branch_point_with(spec, s, tol, opts).ok())
        .filter(|bp| region.contains(bp.a_bp))
        .collect();
    found.sort_by(|x, y| x.a_bp.re.total_cmp(&y.a_bp.re).then(x.a_bp.im.total_cmp(&y.a_bp.im)));

    let dedup = opts.eigen.tolerances.dedup_radius;
    let mut unique: Vec<BranchPoint> = Vec::new();
    for bp in found {
        match unique.iter_mut().find(|u| (u.a_bp - bp.a_bp).norm() < dedup) {
            Some(u) => {
                if bp.disc_residual < u.disc_residual {
                    *u = bp;
                }
            }
            None => unique.push(bp),
        }
    }
    unique.sort_by(|x, y| x.a_bp.re.total_cmp(&y.a_bp.re).then(x.a_bp.im.total_cmp(&y.a_bp.im)));

    let mut known: Vec<Complex64> = unique.iter().map(|b| b.a_bp).collect();
    if spec.has_real_coefficients() {
        known.extend(unique.iter().map(|b| b.a_bp.conj()));
    }
    let points = unique
        .into_iter()
        .map(|bp| {
            let nearest = known
                .iter()
                .map(|k| (k - bp.a_bp).norm())
                .filter(|d| *d > dedup)
                .fold(f64::INFINITY, f64::min);
            let radius = (0.5 * nearest).min(opts.max_loop_radius);
            let monodromy = encircle_with(spec, bp.a_bp, radius, opts.loop_steps, opts).ok();
            let certified = monodromy.as_ref().is_some_and(|m| certifies(spec, &bp, m, opts));
            ScannedBranchPoint {
                point: bp,
                monodromy,
                certified,
            }
        })
        .collect();
    Ok(BranchPointScan {
        points,
        decoupled: false,
    })
}

/// The loop exchanges exactly two states, and those are the two eigenvalues
/// closest to the degenerate value at the loop start.
fn certifies(spec: &FamilySpec, bp: &BranchPoint, m: &MonodromyResult, opts: &EpOptions) -> bool {
    let Some((i, j)) = m.transposition() else {
        return false;
    };
    let start = m.loop_center + m.loop_radius;
    let Ok(values) = eigenvalues(&build_matrix(spec, start), opts.eigen.strategy) else {
        return false;
    };
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&x, &y| (values[x] - bp.value_bp).norm().total_cmp(&(values[y] - bp.value_bp).norm()));
    let nearest = (idx[0].min(idx[1]), idx[0].max(idx[1]));
    nearest == (i.min(j), i.max(j))
}

/// Number of discriminant zeros (with multiplicity) inside `region`, from the
/// winding of D(a) along its boundary.
pub fn winding_count(spec: &FamilySpec, region: Region) -> Result<i64> {
    winding_count_with(spec, region, &EigenOptions::default())
}

pub fn winding_count_with(spec: &FamilySpec, region: Region, opts: &EigenOptions) -> Result<i64> {
    let corners = [
        Complex64::new(region.re.0, region.im.0),
        Complex64::new(region.re.1, region.im.0),
        Complex64::new(region.re.1, region.im.1),
        Complex64::new(region.re.0, region.im.1),
    ];
    let f = |a: Complex64| -> Result<Complex64> {
        let d = discriminant_with(spec, a, opts)?;
        if d.norm() == 0.0 {
            return Err(Error::ZeroOnContour(a));
        }
        Ok(d)
    };
    let mut total = 0.0;
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let segments = 64;
        let mut a0 = p;
        let mut f0 = f(a0)?;
        for s in 1..=segments {
            let a1 = p + (q - p) * (s as f64 / segments as f64);
            let f1 = f(a1)?;
            total += arg_change(&f, a0, f0, a1, f1, 0)?;
            a0 = a1;
            f0 = f1;
        }
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

fn arg_change(
    f: &impl Fn(Complex64) -> Result<Complex64>,
    a0: Complex64,
    f0: Complex64,
    a1: Complex64,
    f1: Complex64,
    depth: u32,
) -> Result<f64> {
    let d = (f1 / f0).arg();
    if d.abs() <= std::f64::consts::FRAC_PI_4 {
        return Ok(d);
    }
    if depth >= 40 {
        return Err(Error::ZeroOnContour(0.5 * (a0 + a1)));
    }
    let am = 0.5 * (a0 + a1);
    let fm = f(am)?;
    Ok(arg_change(f, a0, f0, am, fm, depth + 1)? + arg_change(f, am, fm, a1, f1, depth + 1)?)
}
