//! Real-parameter sweeps with eigenvector-continuity labeling.
//!
//! States are followed by their eigenvector overlaps rather than by their
//! eigenvalues: at a narrow avoided crossing the eigenvalues almost touch while
//! the eigenvectors still rotate smoothly. Mixing coefficients are taken with
//! respect to the uncoupled (v = 0) basis, which is the identity for the
//! families handled here because H(a) at v = 0 is diagonal.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::{dominant_index, eigensystem_at, mixing_coefficients_with, EigenOptions, EigenSystem};
use crate::error::{Error, Result};
use crate::family::{unperturbed_crossings, CouplingSpec, FamilySpec};

/// Result of matching the states of two neighbouring eigensystems.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatch {
    /// `permutation[r]` is the index in the new system that continues state `r`.
    pub permutation: Vec<usize>,
    /// `(best - second_best) / best` of the overlap score.
    pub confidence: f64,
}

impl StateMatch {
    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Assignment maximizing `sum_r |<x_prev_r | x_cur_pi(r)>|` over Hermitian-unit
/// eigenvectors. Exact enumeration up to n = 8, greedy with pairwise swaps
/// above. Ties in the score are broken by the smaller total eigenvalue jump.
pub fn match_states(prev: &EigenSystem, cur: &EigenSystem) -> Result<StateMatch> {
    match_states_with(prev, cur, crate::tolerances::Tolerances::default().match_tie)
}

pub fn match_states_with(prev: &EigenSystem, cur: &EigenSystem, tie: f64) -> Result<StateMatch> {
    let n = prev.n();
    if cur.n() != n {
        return Err(Error::InvalidArgument(format!("cannot match n = {n} with n = {}", cur.n())));
    }
    let unit = |sys: &EigenSystem| -> Vec<nalgebra::DVector<Complex64>> {
        sys.pairs
            .iter()
            .map(|p| {
                let h = p.vector.norm();
                &p.vector / Complex64::new(h, 0.0)
            })
            .collect()
    };
    let (up, uc) = (unit(prev), unit(cur));
    let weights = DMatrix::from_fn(n, n, |r, s| up[r].dotc(&uc[s]).norm());
    let jumps = DMatrix::from_fn(n, n, |r, s| (prev.pairs[r].value - cur.pairs[s].value).norm());

    let (best, best_score, second) = if n <= 8 {
        enumerate_assignments(&weights, &jumps)
    } else {
        greedy_assignment(&weights)
    };
    let confidence = if best_score > 0.0 {
        ((best_score - second) / best_score).max(0.0)
    } else {
        0.0
    };
    if !(confidence >= tie) {
        return Err(Error::AmbiguousMatch { confidence });
    }
    Ok(StateMatch {
        permutation: best,
        confidence,
    })
}

/// (best permutation, best score, second-best score)
fn enumerate_assignments(weights: &DMatrix<f64>, jumps: &DMatrix<f64>) -> (Vec<usize>, f64, f64) {
    let n = weights.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_jump = f64::INFINITY;
    let mut second = f64::NEG_INFINITY;

    let mut consider = |p: &[usize]| {
        let score: f64 = p.iter().enumerate().map(|(r, &s)| weights[(r, s)]).sum();
        let jump: f64 = p.iter().enumerate().map(|(r, &s)| jumps[(r, s)]).sum();
        let same = (score - best_score).abs() <= 1e-12 * best_score.abs().max(1e-300);
        if score > best_score && !same {
            second = best_score;
            best_score = score;
            best_jump = jump;
            best.copy_from_slice(p);
        } else if same {
            // equal score: both count, keep the smaller eigenvalue jump as best
            second = second.max(score.min(best_score));
            if jump < best_jump {
                best_score = best_score.max(score);
                best_jump = jump;
                best.copy_from_slice(p);
            }
        } else if score > second {
            second = score;
        }
    };

    // Heap's algorithm
    let mut c = vec![0usize; n];
    consider(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            consider(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    if n == 1 {
        second = 0.0;
    }
    (best, best_score, second.max(0.0))
}

fn greedy_assignment(weights: &DMatrix<f64>) -> (Vec<usize>, f64, f64) {
    let n = weights.nrows();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut entries: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |s| (r, s))).collect();
    entries.sort_by(|x, y| weights[*y].total_cmp(&weights[*x]).then(x.cmp(y)));
    for (r, s) in entries {
        if perm[r] == usize::MAX && !used[s] {
            perm[r] = s;
            used[s] = true;
        }
    }
    let score = |p: &[usize]| p.iter().enumerate().map(|(r, &s)| weights[(r, s)]).sum::<f64>();
    let mut best_score = score(&perm);
    loop {
        let mut improved = false;
        for i in 0..n {
            for j in (i + 1)..n {
                perm.swap(i, j);
                let s = score(&perm);
                if s > best_score + 1e-15 {
                    best_score = s;
                    improved = true;
                } else {
                    perm.swap(i, j);
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut second = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            perm.swap(i, j);
            second = second.max(score(&perm));
            perm.swap(i, j);
        }
    }
    (perm, best_score, second)
}

/// One sample of a sweep, with states in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub a: f64,
    /// Tracked complex energies; label `l` continues the state that was
    /// dominated by unperturbed level `l` at the start of the sweep.
    pub values: Vec<Complex64>,
    pub norms: Vec<f64>,
    /// `b_sq[l][i]`: mixing square of tracked state `l` on level `i`.
    pub b_sq: Vec<Vec<Complex64>>,
    /// Matching confidence of the step that produced this record (1 for the first).
    pub match_confidence: f64,
}

impl SweepRecord {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dominant(&self, label: usize) -> usize {
        dominant_index(self.b_sq[label].iter().map(|z| z.norm()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub eigen: EigenOptions,
    /// Maximal bisection depth per base interval.
    pub max_depth: u32,
    /// Adaptive refinement threshold on max |delta b^2|.
    pub refine_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            eigen: EigenOptions::default(),
            max_depth: 12,
            refine_threshold: 0.05,
        }
    }
}

struct Sample {
    a: f64,
    sys: EigenSystem,
    /// `order[l]` = index of label `l` in `sys.pairs`.
    order: Vec<usize>,
    b_sq: DMatrix<Complex64>,
    confidence: f64,
}

pub fn sweep(spec: &FamilySpec, a_from: f64, a_to: f64, steps: usize, adaptive: bool) -> Result<Vec<SweepRecord>> {
    sweep_with(spec, a_from, a_to, steps, adaptive, &SweepOptions::default())
}

pub fn sweep_with(
    spec: &FamilySpec,
    a_from: f64,
    a_to: f64,
    steps: usize,
    adaptive: bool,
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    if !(a_from < a_to) {
        return Err(Error::InvalidArgument(format!("need a_from < a_to, got {a_from} >= {a_to}")));
    }
    let n = spec.n();
    let identity = DMatrix::<f64>::identity(n, n);
    let grid: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { a_to } else { a_from + (a_to - a_from) * (k as f64 / steps as f64) })
        .collect();
    let systems: Vec<EigenSystem> = grid
        .par_iter()
        .map(|&a| eigensystem_at(spec, Complex64::new(a, 0.0), &opts.eigen))
        .collect::<Result<_>>()?;

    let ctx = Ctx {
        spec,
        opts,
        adaptive,
        identity: &identity,
        lipschitz: spec.lipschitz_bound(),
    };

    let mut systems = systems.into_iter();
    let first_sys = systems.next().expect("at least two grid points");
    let first_b = ctx.b_sq(&first_sys)?;
    let order = initial_labels(&first_b);
    let mut prev = Sample {
        a: grid[0],
        sys: first_sys,
        order,
        b_sq: first_b,
        confidence: 1.0,
    };
    let mut records = vec![record(&prev)];
    for (&a, sys) in grid[1..].iter().zip(systems) {
        let b_sq = ctx.b_sq(&sys)?;
        let next = Sample {
            a,
            sys,
            order: Vec::new(),
            b_sq,
            confidence: 0.0,
        };
        let mut produced = Vec::new();
        ctx.advance(&prev, next, 0, &mut produced)?;
        records.extend(produced.iter().map(record));
        prev = produced.pop().expect("advance yields the interval end");
    }
    Ok(records)
}

struct Ctx<'a> {
    spec: &'a FamilySpec,
    opts: &'a SweepOptions,
    adaptive: bool,
    identity: &'a DMatrix<f64>,
    lipschitz: f64,
}

impl Ctx<'_> {
    fn b_sq(&self, sys: &EigenSystem) -> Result<DMatrix<Complex64>> {
        let tol = self.opts.eigen.tolerances.basis_orthonormality;
        Ok(mixing_coefficients_with(sys, self.identity, tol)?.b_sq)
    }

    fn sample(&self, a: f64) -> Result<Sample> {
        let sys = eigensystem_at(self.spec, Complex64::new(a, 0.0), &self.opts.eigen)?;
        let b_sq = self.b_sq(&sys)?;
        Ok(Sample {
            a,
            sys,
            order: Vec::new(),
            b_sq,
            confidence: 0.0,
        })
    }

    /// Labels `next` from `prev`, bisecting when the step is ambiguous, breaks
    /// continuity, or (adaptive) changes the mixing too much. Appends every
    /// accepted sample after `prev`, ending with `next`.
    fn advance(&self, prev: &Sample, mut next: Sample, depth: u32, out: &mut Vec<Sample>) -> Result<()> {
        let tols = &self.opts.eigen.tolerances;
        let matched = match_states_with(&prev.sys, &next.sys, tols.match_tie);
        let mut fault: Option<Error> = None;
        let mut refine = false;
        match &matched {
            Err(e) => {
                fault = Some(match e {
                    Error::AmbiguousMatch { confidence } => Error::AmbiguousMatch { confidence: *confidence },
                    _ => Error::InvalidArgument(e.to_string()),
                });
            }
            Ok(m) => {
                next.order = prev.order.iter().map(|&s| m.permutation[s]).collect();
                next.confidence = m.confidence;
                let da = next.a - prev.a;
                let scale = 1.0 + next.sys.matrix.norm();
                let bound = self.lipschitz * da + tols.continuity * scale;
                let jump = prev
                    .order
                    .iter()
                    .zip(&next.order)
                    .map(|(&p, &q)| (prev.sys.pairs[p].value - next.sys.pairs[q].value).norm())
                    .fold(0.0, f64::max);
                if jump > bound {
                    fault = Some(Error::TrackingFault {
                        a_from: prev.a,
                        a_to: next.a,
                        jump,
                        bound,
                    });
                }
                if self.adaptive {
                    let n = prev.order.len();
                    let mut db = 0.0_f64;
                    for l in 0..n {
                        for i in 0..n {
                            let d = prev.b_sq[(prev.order[l], i)] - next.b_sq[(next.order[l], i)];
                            db = db.max(d.norm());
                        }
                    }
                    refine = db > self.opts.refine_threshold;
                }
            }
        }
        if (fault.is_some() || refine) && depth < self.opts.max_depth {
            let mid = self.sample(0.5 * (prev.a + next.a))?;
            self.advance(prev, mid, depth + 1, out)?;
            let mid = out.pop().expect("midpoint accepted");
            let at = out.len();
            self.advance(&mid, next, depth + 1, out)?;
            out.insert(at, mid);
            return Ok(());
        }
        if let Some(e) = fault {
            return Err(e);
        }
        out.push(next);
        Ok(())
    }
}

fn record(s: &Sample) -> SweepRecord {
    let n = s.order.len();
    SweepRecord {
        a: s.a,
        values: s.order.iter().map(|&k| s.sys.pairs[k].value).collect(),
        norms: s
            .order
            .iter()
            .map(|&k| {
                let p = &s.sys.pairs[k];
                if p.defective {
                    f64::INFINITY
                } else {
                    p.hermitian_norm_sq()
                }
            })
            .collect(),
        b_sq: s.order.iter().map(|&k| (0..n).map(|i| s.b_sq[(k, i)]).collect()).collect(),
        match_confidence: s.confidence,
    }
}

/// Assigns label `l` to the state with the largest weight on level `l`
/// (maximal total |b^2| over assignments).
fn initial_labels(b_sq: &DMatrix<Complex64>) -> Vec<usize> {
    let n = b_sq.nrows();
    // weights[(level, state)]
    let weights = DMatrix::from_fn(n, n, |l, s| b_sq[(s, l)].norm());
    let (perm, _, _) = if n <= 8 {
        enumerate_assignments(&weights, &DMatrix::zeros(n, n))
    } else {
        greedy_assignment(&weights)
    };
    perm
}

/// Local minimum of the eigenvalue distance between two tracked states.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEvent {
    pub a_min: f64,
    /// Tracked labels of the two states.
    pub pair: (usize, usize),
    pub gap_min: f64,
    /// The two states swap their unperturbed character across the event.
    pub exchanged: bool,
    /// The two unperturbed levels carrying most of the pair's weight at the
    /// minimum; `levels.0` dominates `pair.0` before the event.
    pub levels: (usize, usize),
    /// Half-width of the region with mixing >= 0.25.
    pub mixing_halfwidth: f64,
    /// Index of the record at the discrete minimum.
    pub record_index: usize,
}

pub const DEFAULT_MIXING_THRESHOLD: f64 = 0.25;

/// Every interior local minimum of the gap between two states that are
/// adjacent in energy, with parabolic refinement of its location.
pub fn detect_avoided_crossings(records: &[SweepRecord]) -> Vec<CrossingEvent> {
    if records.len() < 3 {
        return Vec::new();
    }
    let n = records[0].n();
    let mut events = Vec::new();
    for r in 0..n {
        for s in (r + 1)..n {
            let gap: Vec<f64> = records.iter().map(|rec| (rec.values[r] - rec.values[s]).norm()).collect();
            for k in 1..records.len() - 1 {
                // ignore rounding-level wiggles on flat gaps
                let noise = 1e-12 * (1.0 + gap[k]);
                if !(gap[k - 1] - gap[k] > noise && gap[k + 1] - gap[k] >= -noise) {
                    continue;
                }
                let rec = &records[k];
                let (lo, hi) = {
                    let (x, y) = (rec.values[r].re, rec.values[s].re);
                    (x.min(y), x.max(y))
                };
                let adjacent = (0..n).filter(|&t| t != r && t != s).all(|t| {
                    let x = rec.values[t].re;
                    !(x > lo && x < hi)
                });
                if !adjacent {
                    continue;
                }
                let (a_min, gap_min) = parabolic_vertex(
                    (records[k - 1].a, gap[k - 1]),
                    (records[k].a, gap[k]),
                    (records[k + 1].a, gap[k + 1]),
                );
                let (i, j) = pair_levels(rec, r, s);
                let lean: Vec<f64> = records.iter().map(|rec| rec.b_sq[r][i].norm() - rec.b_sq[r][j].norm()).collect();
                let (kl, kr) = shoulders(&gap, &lean, k);
                let (before, after) = (lean[kl], lean[kr]);
                let exchanged = before * after < 0.0;
                let levels = if before >= 0.0 { (i, j) } else { (j, i) };
                let mut event = CrossingEvent {
                    a_min,
                    pair: (r, s),
                    gap_min,
                    exchanged,
                    levels,
                    mixing_halfwidth: 0.0,
                    record_index: k,
                };
                if let Ok(region) = mixing_region_width(records, &event, DEFAULT_MIXING_THRESHOLD) {
                    event.mixing_halfwidth = region.half_width;
                }
                events.push(event);
            }
        }
    }
    events.sort_by(|x, y| x.a_min.total_cmp(&y.a_min).then(x.pair.cmp(&y.pair)));
    events
}

/// The two levels with the largest combined weight in states `r` and `s`.
fn pair_levels(rec: &SweepRecord, r: usize, s: usize) -> (usize, usize) {
    let n = rec.n();
    let mut idx: Vec<usize> = (0..n).collect();
    let w = |i: usize| rec.b_sq[r][i].norm() + rec.b_sq[s][i].norm();
    idx.sort_by(|&x, &y| w(y).total_cmp(&w(x)).then(x.cmp(&y)));
    (idx[0], idx[1])
}

/// Nearest records on either side of `k` beyond which the gap stops growing or
/// the lean of the state stops moving in its direction at `k`.
fn shoulders(gap: &[f64], lean: &[f64], k: usize) -> (usize, usize) {
    let dir = if k > 0 && k + 1 < lean.len() { (lean[k + 1] - lean[k - 1]).signum() } else { 0.0 };
    // `to` lies further from k than `from`, on the side given by `side` (+1 right, -1 left)
    let outward = |from: usize, to: usize, side: f64| {
        gap[to] >= gap[from] && side * dir * (lean[to] - lean[from]) >= -1e-12
    };
    let mut l = k;
    while l > 0 && outward(l, l - 1, -1.0) {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < gap.len() && outward(r, r + 1, 1.0) {
        r += 1;
    }
    (l, r)
}

/// Vertex of the parabola through three points, clamped to their span.
fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !(curvature > 0.0) {
        return (x1, y1);
    }
    // y = y1 + slope (x - x1) + curvature (x - x1)^2 with slope at x1
    let slope = d01 + curvature * (x1 - x0);
    let x = (x1 - slope / (2.0 * curvature)).clamp(x0, x2);
    let y = y1 + slope * (x - x1) + curvature * (x - x1) * (x - x1);
    (x, y.clamp(0.0, y1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRegion {
    pub a_left: f64,
    pub a_right: f64,
    pub half_width: f64,
    /// The region reaches the first or last record.
    pub truncated: bool,
}

/// Interval around the event where one of the two states carries at least
/// `threshold` of each of the two exchanged levels, i.e.
/// `max_{R in pair} min(|b^2_{R,i}|, |b^2_{R,j}|) >= threshold`.
pub fn mixing_region_width(records: &[SweepRecord], event: &CrossingEvent, threshold: f64) -> Result<MixingRegion> {
    if !(threshold > 0.0 && threshold < 0.5) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0, 0.5), got {threshold}")));
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    let (r, s) = event.pair;
    let (i, j) = event.levels;
    let mix = |rec: &SweepRecord| {
        let one = |t: usize| rec.b_sq[t][i].norm().min(rec.b_sq[t][j].norm());
        one(r).max(one(s))
    };
    let k0 = records
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1.a - event.a_min).abs().total_cmp(&(y.1.a - event.a_min).abs()))
        .map(|(k, _)| k)
        .unwrap();
    if mix(&records[k0]) < threshold {
        return Ok(MixingRegion {
            a_left: event.a_min,
            a_right: event.a_min,
            half_width: 0.0,
            truncated: false,
        });
    }
    let crossing = |inside: &SweepRecord, outside: &SweepRecord| {
        let (mi, mo) = (mix(inside), mix(outside));
        let t = (mi - threshold) / (mi - mo);
        inside.a + t * (outside.a - inside.a)
    };
    let mut truncated = false;
    let mut k = k0;
    while k > 0 && mix(&records[k - 1]) >= threshold {
        k -= 1;
    }
    let a_left = if k == 0 {
        truncated = true;
        records[0].a
    } else {
        crossing(&records[k], &records[k - 1])
    };
    let mut k = k0;
    while k + 1 < records.len() && mix(&records[k + 1]) >= threshold {
        k += 1;
    }
    let a_right = if k + 1 == records.len() {
        truncated = true;
        records[k].a
    } else {
        crossing(&records[k], &records[k + 1])
    };
    Ok(MixingRegion {
        a_left,
        a_right,
        half_width: 0.5 * (a_right - a_left),
        truncated,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct OnsetOptions {
    /// Sweep window; derived from the two-level crossings when `None`.
    pub window: Option<(f64, f64)>,
    pub steps: usize,
    pub sweep: SweepOptions,
}

impl Default for OnsetOptions {
    fn default() -> Self {
        OnsetOptions {
            window: None,
            steps: 1000,
            sweep: SweepOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetSample {
    pub v: f64,
    /// max over neighbouring events of (right edge of one - left edge of the next);
    /// non-negative once two regions overlap.
    pub overlap: f64,
    pub regions: Vec<(CrossingEvent, MixingRegion)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapOnset {
    /// Interpolated onset coupling, `None` when no sample overlaps.
    pub onset: Option<f64>,
    pub window: (f64, f64),
    pub samples: Vec<OnsetSample>,
}

/// Window spanning the crossings where exactly two unperturbed levels meet,
/// padded by half their spread. Fails when there are fewer than two.
pub fn crossing_window(spec: &FamilySpec) -> Result<(f64, f64)> {
    let points = simple_real_crossings(spec);
    if points.len() < 2 {
        return Err(Error::Precondition(format!(
            "need at least two distinct two-level crossings, found {}",
            points.len()
        )));
    }
    let (lo, hi) = (points[0], points[points.len() - 1]);
    let pad = 0.5 * (hi - lo);
    Ok((lo - pad, hi + pad))
}

fn simple_real_crossings(spec: &FamilySpec) -> Vec<f64> {
    let real: Vec<f64> = unperturbed_crossings(spec)
        .iter()
        .filter_map(|c| c.location())
        .filter(|a| a.im.abs() <= 1e-12 * (1.0 + a.re.abs()))
        .map(|a| a.re)
        .collect();
    // real is sorted; a location shared by several pairs is a multi-level crossing
    let mut out = Vec::new();
    let mut k = 0;
    while k < real.len() {
        let mut m = k + 1;
        while m < real.len() && (real[m] - real[k]).abs() <= 1e-9 * (1.0 + real[k].abs()) {
            m += 1;
        }
        if m - k == 1 {
            out.push(real[k]);
        }
        k = m;
    }
    out
}

/// Smallest uniform coupling at which the mixing regions of two neighbouring
/// crossings meet, linearly interpolated between the bracketing samples.
pub fn overlap_onset(spec4: &FamilySpec, v_values: &[f64], threshold: f64) -> Result<OverlapOnset> {
    overlap_onset_with(spec4, v_values, threshold, &OnsetOptions::default())
}

pub fn overlap_onset_with(
    spec4: &FamilySpec,
    v_values: &[f64],
    threshold: f64,
    opts: &OnsetOptions,
) -> Result<OverlapOnset> {
    if !matches!(spec4.coupling(), CouplingSpec::Uniform(_)) {
        return Err(Error::Precondition("overlap onset needs a uniform coupling".into()));
    }
    if v_values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("v values must be strictly ascending".into()));
    }
    let window = match opts.window {
        Some(w) => {
            let inside = simple_real_crossings(spec4).iter().filter(|a| **a > w.0 && **a < w.1).count();
            if inside < 2 {
                return Err(Error::Precondition(format!(
                    "need at least two distinct two-level crossings in [{}, {}], found {inside}",
                    w.0, w.1
                )));
            }
            w
        }
        None => crossing_window(spec4)?,
    };

    let samples: Vec<OnsetSample> = v_values
        .iter()
        .map(|&v| {
            let spec = spec4.with_uniform_coupling(Complex64::new(v, 0.0));
            let records = sweep_with(&spec, window.0, window.1, opts.steps, false, &opts.sweep)?;
            let mut regions = Vec::new();
            for event in detect_avoided_crossings(&records) {
                let region = mixing_region_width(&records, &event, threshold)?;
                regions.push((event, region));
            }
            let overlap = regions
                .windows(2)
                .map(|w| w[0].1.a_right - w[1].1.a_left)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(OnsetSample { v, overlap, regions })
        })
        .collect::<Result<_>>()?;

    let onset = samples.iter().position(|s| s.overlap >= 0.0).map(|k| {
        if k == 0 || !samples[k - 1].overlap.is_finite() {
            samples[k].v
        } else {
            let (s0, s1) = (&samples[k - 1], &samples[k]);
            s0.v + (s1.v - s0.v) * (-s0.overlap) / (s1.overlap - s0.overlap)
        }
    });
    Ok(OverlapOnset { onset, window, samples })
}
