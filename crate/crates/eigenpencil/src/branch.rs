//! Eigenvalue-branch tracking: eigendecompositions of `L(lambda)` on a grid,
//! matched across samples into analytic branches, root location and
//! refinement for real characteristic values, and finite-difference branch
//! derivatives at a characteristic value.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Error;
use crate::linalg::{self, adjoint, inner, solve_hermitian};
use crate::pencil::{GridSpec, PolyPencil, TAU_CLUSTER};
use crate::Result;

/// Matched overlap below this triggers grid refinement between two samples.
const OVERLAP_OK: f64 = 0.75;
/// Matched overlap below this at maximum refinement is an error.
const OVERLAP_AMBIGUOUS: f64 = 0.5;
/// Maximum bisection depth when refining an interval for matching.
const MAX_MATCH_DEPTH: u32 = 20;
/// Hard cap on eigendecompositions per tracking call.
const SOLVE_BUDGET: usize = 2_000_000;

/// Options for tracking and local sampling.
#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// When set, every eigenvector coming out of the eigensolver is
    /// multiplied by a pseudo-random unit phase derived from this seed and
    /// the sample position. Counts must not depend on it.
    pub phase_seed: Option<u64>,
    /// Step width below which matching refinement gives up.
    pub refine_tol: f64,
    /// Relative eigenvalue-gap threshold that triggers refinement when the
    /// matching is not already clean.
    pub gap_tol_rel: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            phase_seed: None,
            refine_tol: 1e-10,
            gap_tol_rel: 1e-5,
        }
    }
}

/// One matched eigendecomposition: entry `i` of `values`/`vectors` belongs to
/// branch `i` (branch labels are fixed across the whole family, so values are
/// generally not in ascending order).
#[derive(Debug, Clone)]
pub struct Sample {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub vectors: Vec<Array1<C64>>,
}

/// Analytic eigenvalue branches sampled on an ascending grid.
#[derive(Debug, Clone)]
pub struct BranchFamily {
    pub grid: Vec<f64>,
    /// `values[j][k]` is branch j at grid point k.
    pub values: Vec<Vec<f64>>,
    /// `vectors[j][k]` is the unit eigenvector of branch j at grid point k,
    /// phase-aligned so consecutive inner products are real and nonnegative.
    pub vectors: Vec<Vec<Array1<C64>>>,
}

impl BranchFamily {
    pub fn n_branches(&self) -> usize {
        self.values.len()
    }

    fn from_samples(samples: Vec<Sample>) -> BranchFamily {
        let nb = samples.first().map(|s| s.values.len()).unwrap_or(0);
        let mut grid = Vec::with_capacity(samples.len());
        let mut values = vec![Vec::with_capacity(samples.len()); nb];
        let mut vectors = vec![Vec::with_capacity(samples.len()); nb];
        for s in samples {
            grid.push(s.lambda);
            for j in 0..nb {
                values[j].push(s.values[j]);
                vectors[j].push(s.vectors[j].clone());
            }
        }
        BranchFamily {
            grid,
            values,
            vectors,
        }
    }

    fn sample(&self, k: usize) -> Sample {
        Sample {
            lambda: self.grid[k],
            values: self.values.iter().map(|v| v[k]).collect(),
            vectors: self.vectors.iter().map(|v| v[k].clone()).collect(),
        }
    }

    /// Index of the grid point closest to `lambda`.
    fn nearest_index(&self, lambda: f64) -> usize {
        match self
            .grid
            .binary_search_by(|g| g.partial_cmp(&lambda).unwrap())
        {
            Ok(k) => k,
            Err(k) => {
                if k == 0 {
                    0
                } else if k >= self.grid.len() {
                    self.grid.len() - 1
                } else if (self.grid[k] - lambda).abs() < (lambda - self.grid[k - 1]).abs() {
                    k
                } else {
                    k - 1
                }
            }
        }
    }

    /// Eigencurve table: one row per (sample, branch) with the eigenvalue and
    /// the eigenvector components at 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self
            .vectors
            .first()
            .and_then(|v| v.first())
            .map(|u| u.len())
            .unwrap_or(0);
        let mut header = String::from("lambda,branch,mu");
        for i in 0..n {
            header.push_str(&format!(",re_u_{i},im_u_{i}"));
        }
        writeln!(w, "{header}")?;
        for k in 0..self.grid.len() {
            for j in 0..self.n_branches() {
                let mut line = format!(
                    "{:.16e},{},{:.16e}",
                    self.grid[k], j, self.values[j][k]
                );
                for z in self.vectors[j][k].iter() {
                    line.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// A real characteristic value together with everything the analysis learns
/// about it. Location fields are filled by `find_characteristic_values`; the
/// counting fields are filled by the kernel recursion and the local crossing
/// counts.
#[derive(Debug, Clone)]
pub struct CharacteristicValue {
    pub lambda0: f64,
    /// Branch labels vanishing at `lambda0`.
    pub branch_ids: Vec<usize>,
    /// dim Ker L(lambda0).
    pub geo_mult: usize,
    /// `(|K_m^+|, |K_m^-|)` for m = 1, 2, ... (entry m-1).
    pub kcounts: Vec<(usize, usize)>,
    /// Sum of m (|K_m^+| + |K_m^-|).
    pub alg_mult: usize,
    pub kappa_plus: usize,
    pub kappa_minus: usize,
    /// Crossing counts (down-left, down-right, up-left, up-right), i.e. the
    /// number of vanishing branches negative/positive just left/right of
    /// `lambda0`.
    pub z: [usize; 4],
    /// The same four counts read directly off branch signs at
    /// `lambda0 +- eps`; must agree with `z`.
    pub z_sampled: [usize; 4],
    pub warnings: Vec<String>,
}

impl CharacteristicValue {
    fn located(lambda0: f64, branch_ids: Vec<usize>, geo_mult: usize) -> Self {
        CharacteristicValue {
            lambda0,
            branch_ids,
            geo_mult,
            kcounts: Vec::new(),
            alg_mult: 0,
            kappa_plus: 0,
            kappa_minus: 0,
            z: [0; 4],
            z_sampled: [0; 4],
            warnings: Vec::new(),
        }
    }

    pub fn kappa(&self) -> i64 {
        self.kappa_plus as i64 - self.kappa_minus as i64
    }
}

fn scramble_phases(vecs: &mut Array2<C64>, seed: u64, lambda: f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ lambda.to_bits());
    for mut col in vecs.columns_mut() {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let phase = C64::from_polar(1.0, theta);
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

/// Ascending eigendecomposition of `L(lambda)` with optional phase scramble.
fn solve_at(pencil: &PolyPencil, lambda: f64, opts: &TrackOptions) -> Result<(Vec<f64>, Array2<C64>)> {
    let a = pencil.eval(lambda, 0);
    let (vals, mut vecs) = solve_hermitian(&a)?;
    if let Some(seed) = opts.phase_seed {
        scramble_phases(&mut vecs, seed, lambda);
    }
    Ok((vals.to_vec(), vecs))
}

/// Rotate eigenvector columns within clusters of (numerically) equal
/// eigenvalues so that the cluster basis best aligns with the previous
/// sample's vectors. Any orthonormal basis of a degenerate eigenspace is
/// valid, so this is a free gauge choice that keeps repeated branches
/// smooth.
fn align_clusters(
    vals: &[f64],
    vecs: &mut Array2<C64>,
    prev: &[Array1<C64>],
    cluster_tol: f64,
) {
    let n = vals.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[end - 1]).abs() <= cluster_tol {
            end += 1;
        }
        let c = end - start;
        if c >= 2 {
            // pick the c previous vectors with the largest projection onto
            // the cluster subspace
            let mut proj: Vec<(f64, usize)> = prev
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let p: f64 = (start..end)
                        .map(|k| {
                            let col = vecs.column(k).to_owned();
                            inner(&col, u).norm_sqr()
                        })
                        .sum();
                    (p, i)
                })
                .collect();
            proj.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let sel: Vec<usize> = proj.iter().take(c).map(|&(_, i)| i).collect();
            // M[k][s] = <v_k, u_sel_s>; replace cluster columns by V * polar(M)
            let mut m = Array2::<C64>::zeros((c, c));
            for (kk, k) in (start..end).enumerate() {
                let col = vecs.column(k).to_owned();
                for (ss, &s) in sel.iter().enumerate() {
                    m[[kk, ss]] = inner(&col, &prev[s]);
                }
            }
            if let Ok(r) = polar_unitary(&m) {
                let dim = vecs.nrows();
                let mut block = Array2::<C64>::zeros((dim, c));
                for (kk, k) in (start..end).enumerate() {
                    block.column_mut(kk).assign(&vecs.column(k));
                }
                let rotated = block.dot(&r);
                for (kk, k) in (start..end).enumerate() {
                    vecs.column_mut(k).assign(&rotated.column(kk));
                }
            }
        }
        start = end;
    }
}

/// Unitary polar factor of a small square matrix via SVD.
fn polar_unitary(m: &Array2<C64>) -> Result<Array2<C64>> {
    use ndarray_linalg::SVD;
    let (u, _s, vt) = m
        .svd(true, true)
        .map_err(|e| Error::EigenFailure(format!("{e}")))?;
    Ok(u.unwrap().dot(&vt.unwrap()))
}

/// Solve at `lambda` and match the eigenpairs to the branch labels of
/// `prev`. Returns the matched sample and the minimum assignment overlap.
fn matched_step(
    pencil: &PolyPencil,
    prev: &Sample,
    lambda: f64,
    opts: &TrackOptions,
) -> Result<(Sample, f64)> {
    let (vals, mut vecs) = solve_at(pencil, lambda, opts)?;
    let nb = vals.len();
    let cluster_tol = 1e-9 * pencil.scale().max(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    align_clusters(&vals, &mut vecs, &prev.vectors, cluster_tol);
    // overlap[i][j] = |<prev_i, new_j>|^2
    let mut overlap = Array2::<f64>::zeros((nb, nb));
    for i in 0..nb {
        for j in 0..nb {
            let col = vecs.column(j).to_owned();
            overlap[[i, j]] = inner(&prev.vectors[i], &col).norm_sqr();
        }
    }
    // greedy row-argmax; fall back to optimal assignment on conflict or weak
    // overlap
    let mut perm = vec![usize::MAX; nb];
    let mut used = vec![false; nb];
    let mut greedy_ok = true;
    for i in 0..nb {
        let mut best = 0;
        let mut bv = -1.0;
        for j in 0..nb {
            if overlap[[i, j]] > bv {
                bv = overlap[[i, j]];
                best = j;
            }
        }
        if bv < OVERLAP_OK || used[best] {
            greedy_ok = false;
            break;
        }
        used[best] = true;
        perm[i] = best;
    }
    if !greedy_ok {
        perm = linalg::assignment_max(&overlap);
    }
    let min_ov = (0..nb)
        .map(|i| overlap[[i, perm[i]]])
        .fold(f64::INFINITY, f64::min);
    let mut values = vec![0.0; nb];
    let mut vectors = Vec::with_capacity(nb);
    for i in 0..nb {
        let j = perm[i];
        values[i] = vals[j];
        let mut v = vecs.column(j).to_owned();
        // phase gauge: <prev_i, v> real and nonnegative
        let ip = inner(&prev.vectors[i], &v);
        if ip.norm() > 0.0 {
            let phase = ip / ip.norm();
            v.mapv_inplace(|z| z / phase);
        }
        vectors.push(v);
    }
    Ok((
        Sample {
            lambda,
            values,
            vectors,
        },
        min_ov,
    ))
}

fn min_gap(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Walk from `from` to `to`, inserting intermediate samples wherever the
/// assignment is ambiguous or the spectrum is nearly degenerate, and append
/// every accepted sample (including the final one) to `out`.
fn advance_adaptive(
    pencil: &PolyPencil,
    from: &Sample,
    to: f64,
    opts: &TrackOptions,
    out: &mut Vec<Sample>,
    budget: &mut usize,
) -> Result<()> {
    let mut current = from.clone();
    let mut targets = vec![to];
    let gap_tol = opts.gap_tol_rel * pencil.scale();
    while let Some(target) = targets.pop() {
        if *budget == 0 {
            return Err(Error::Numerical("refinement budget exhausted".into()));
        }
        *budget -= 1;
        let (cand, ov) = matched_step(pencil, &current, target, opts)?;
        let width = (target - current.lambda).abs();
        let depth_floor = width <= opts.refine_tol
            || width <= 2.0_f64.powi(-(MAX_MATCH_DEPTH as i32)) * (to - from.lambda).abs();
        let needs_refine =
            ov < OVERLAP_OK || (min_gap(&cand.values) < gap_tol && ov < 0.95);
        if needs_refine && !depth_floor {
            targets.push(target);
            targets.push(0.5 * (current.lambda + target));
            continue;
        }
        if ov < OVERLAP_AMBIGUOUS {
            return Err(Error::UnresolvableCrossing {
                lo: current.lambda.min(target),
                hi: current.lambda.max(target),
                overlap: ov,
            });
        }
        out.push(cand.clone());
        current = cand;
    }
    Ok(())
}

/// Track the eigenvalue branches of the pencil over the grid.
pub fn track_branches(pencil: &PolyPencil, grid: &GridSpec) -> Result<BranchFamily> {
    track_branches_on(pencil, &grid.points(), &TrackOptions {
        refine_tol: grid.refine_tol,
        ..TrackOptions::default()
    })
}

/// Track over an explicit ascending list of sample points.
pub fn track_branches_on(
    pencil: &PolyPencil,
    points: &[f64],
    opts: &TrackOptions,
) -> Result<BranchFamily> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 grid points".into()));
    }
    let (vals, vecs) = solve_at(pencil, points[0], opts)?;
    let nb = vals.len();
    let first = Sample {
        lambda: points[0],
        values: vals,
        vectors: (0..nb).map(|j| vecs.column(j).to_owned()).collect(),
    };
    let mut samples = vec![first];
    let mut budget = SOLVE_BUDGET;
    for &to in &points[1..] {
        let from = samples.last().unwrap().clone();
        advance_adaptive(pencil, &from, to, opts, &mut samples, &mut budget)?;
    }
    Ok(BranchFamily::from_samples(samples))
}

/// Branch-labelled eigendecompositions at arbitrary points, anchored on a
/// tracked family. Newly computed samples are cached and reused as anchors
/// for later queries.
pub struct PathSampler<'a> {
    pencil: &'a PolyPencil,
    opts: TrackOptions,
    anchors: BTreeMap<u64, Sample>,
    budget: usize,
}

/// Monotone bijection f64 -> u64 preserving order, for use as a BTreeMap key.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 0 {
        b | 0x8000_0000_0000_0000
    } else {
        !b
    }
}

impl<'a> PathSampler<'a> {
    pub fn new(pencil: &'a PolyPencil, family: &BranchFamily, opts: TrackOptions) -> Self {
        let mut anchors = BTreeMap::new();
        for k in 0..family.grid.len() {
            anchors.insert(ordered_bits(family.grid[k]), family.sample(k));
        }
        PathSampler {
            pencil,
            opts,
            anchors,
            budget: SOLVE_BUDGET,
        }
    }

    fn nearest_anchor(&self, lambda: f64) -> Sample {
        let key = ordered_bits(lambda);
        let below = self.anchors.range(..=key).next_back().map(|(_, s)| s);
        let above = self.anchors.range(key..).next().map(|(_, s)| s);
        match (below, above) {
            (Some(b), Some(a)) => {
                if (lambda - b.lambda).abs() <= (a.lambda - lambda).abs() {
                    b.clone()
                } else {
                    a.clone()
                }
            }
            (Some(b), None) => b.clone(),
            (None, Some(a)) => a.clone(),
            (None, None) => unreachable!("sampler always has anchors"),
        }
    }

    /// Matched sample at `lambda`.
    pub fn at(&mut self, lambda: f64) -> Result<Sample> {
        let key = ordered_bits(lambda);
        if let Some(s) = self.anchors.get(&key) {
            return Ok(s.clone());
        }
        let anchor = self.nearest_anchor(lambda);
        let mut chain = Vec::new();
        advance_adaptive(
            self.pencil,
            &anchor,
            lambda,
            &self.opts,
            &mut chain,
            &mut self.budget,
        )?;
        let result = chain.last().cloned().expect("advance produced samples");
        for s in chain {
            self.anchors.insert(ordered_bits(s.lambda), s);
        }
        Ok(result)
    }

    /// Value of one branch at `lambda`.
    pub fn value(&mut self, branch: usize, lambda: f64) -> Result<f64> {
        Ok(self.at(lambda)?.values[branch])
    }
}

/// Locate all real characteristic values covered by the family's grid:
/// every sign change is bracketed and bisected, every candidate tangency is
/// polished by a sign-bisection of the local slope, and nearby roots merge
/// into a single characteristic value.
pub fn find_characteristic_values(
    pencil: &PolyPencil,
    family: &BranchFamily,
) -> Result<Vec<CharacteristicValue>> {
    let tol_root = pencil.zero_tol();
    let mut sampler = PathSampler::new(pencil, family, TrackOptions::default());
    let mut roots: Vec<(f64, usize)> = Vec::new();
    let nb = family.n_branches();
    for j in 0..nb {
        // direct grid hits
        for k in 0..family.grid.len() {
            if family.values[j][k].abs() <= tol_root {
                roots.push((family.grid[k], j));
            }
        }
        for k in 0..family.grid.len() - 1 {
            scan_interval(
                pencil,
                &mut sampler,
                j,
                family.grid[k],
                family.values[j][k],
                family.grid[k + 1],
                family.values[j][k + 1],
                tol_root,
                0,
                &mut roots,
            )?;
        }
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // merge clusters closer than the clustering tolerance
    let mut cvs: Vec<CharacteristicValue> = Vec::new();
    let mut i = 0;
    while i < roots.len() {
        let mut k = i + 1;
        while k < roots.len() && roots[k].0 - roots[k - 1].0 <= TAU_CLUSTER * (1.0 + roots[k - 1].0.abs())
        {
            k += 1;
        }
        let cluster = &roots[i..k];
        let lambda0 = cluster[cluster.len() / 2].0;
        // vanishing branches and kernel dimension read off the matched sample
        let s = sampler.at(lambda0)?;
        let mut branch_ids: Vec<usize> = (0..nb)
            .filter(|&j| s.values[j].abs() <= tol_root)
            .collect();
        if branch_ids.is_empty() {
            // all cluster members were marginal; keep the branches that
            // produced the bracketed roots
            branch_ids = cluster.iter().map(|&(_, j)| j).collect();
            branch_ids.sort_unstable();
            branch_ids.dedup();
        }
        let geo = branch_ids.len();
        cvs.push(CharacteristicValue::located(lambda0, branch_ids, geo));
        i = k;
    }
    Ok(cvs)
}

#[allow(clippy::too_many_arguments)]
fn scan_interval(
    pencil: &PolyPencil,
    sampler: &mut PathSampler,
    branch: usize,
    a: f64,
    mu_a: f64,
    b: f64,
    mu_b: f64,
    tol_root: f64,
    depth: u32,
    roots: &mut Vec<(f64, usize)>,
) -> Result<()> {
    if mu_a.abs() <= tol_root || mu_b.abs() <= tol_root {
        return Ok(()); // endpoint roots are recorded by the caller
    }
    if mu_a.signum() != mu_b.signum() {
        let lambda0 = bisect_root(sampler, branch, a, mu_a, b, mu_b)?;
        roots.push((lambda0, branch));
        return Ok(());
    }
    let width = b - a;
    let slope = pencil.slope_bound(a.abs().max(b.abs()));
    if mu_a.abs().min(mu_b.abs()) > 0.5 * slope * width + tol_root {
        return Ok(()); // the branch cannot reach zero inside [a, b]
    }
    if depth >= 44 || width < 1e-11 * (1.0 + a.abs()) {
        if let Some(lambda0) = polish_tangency(sampler, branch, a, b, tol_root)? {
            roots.push((lambda0, branch));
        }
        return Ok(());
    }
    let mid = 0.5 * (a + b);
    let mu_mid = sampler.value(branch, mid)?;
    if mu_mid.abs() <= tol_root {
        roots.push((mid, branch));
        // continue on both sides in case more roots hide here
    }
    scan_interval(pencil, sampler, branch, a, mu_a, mid, mu_mid, tol_root, depth + 1, roots)?;
    scan_interval(pencil, sampler, branch, mid, mu_mid, b, mu_b, tol_root, depth + 1, roots)
}

fn bisect_root(
    sampler: &mut PathSampler,
    branch: usize,
    mut a: f64,
    mut mu_a: f64,
    mut b: f64,
    mut mu_b: f64,
) -> Result<f64> {
    for _ in 0..128 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // interval at floating-point resolution
        }
        let mu = sampler.value(branch, mid)?;
        if mu == 0.0 {
            return Ok(mid);
        }
        if mu.signum() == mu_a.signum() {
            a = mid;
            mu_a = mu;
        } else {
            b = mid;
            mu_b = mu;
        }
    }
    let _ = (mu_a, mu_b);
    Ok(0.5 * (a + b))
}

/// Even-order roots do not change sign; find them as interior zeros of the
/// branch slope and accept when the branch value there is below the zero
/// tolerance.
fn polish_tangency(
    sampler: &mut PathSampler,
    branch: usize,
    a: f64,
    b: f64,
    tol_root: f64,
) -> Result<Option<f64>> {
    let h = (b - a) / 16.0;
    let slope_at = |s: &mut PathSampler, x: f64| -> Result<f64> {
        Ok((s.value(branch, x + h)? - s.value(branch, x - h)?) / (2.0 * h))
    };
    let mut lo = a;
    let mut hi = b;
    let mut d_lo = slope_at(sampler, lo)?;
    let d_hi = slope_at(sampler, hi)?;
    if d_lo.signum() == d_hi.signum() {
        return Ok(None);
    }
    for _ in 0..96 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = slope_at(sampler, mid)?;
        if d == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if d.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
        }
    }
    let lambda0 = 0.5 * (lo + hi);
    if sampler.value(branch, lambda0)?.abs() <= tol_root {
        Ok(Some(lambda0))
    } else {
        Ok(None)
    }
}

/// Finite-difference derivatives of the vanishing branches at a
/// characteristic value, with Richardson extrapolation over step halvings
/// and per-order error estimates.
#[derive(Debug, Clone)]
pub struct BranchJet {
    pub lambda0: f64,
    pub branch_ids: Vec<usize>,
    pub max_order: usize,
    /// `mu[b][r]` = r-th derivative of branch `branch_ids[b]` at lambda0
    /// (r = 0 entry is exactly 0).
    pub mu: Vec<Vec<f64>>,
    pub mu_err: Vec<Vec<f64>>,
    /// `u[b][r]` = r-th derivative of the gauge-fixed eigenvector curve.
    pub u: Vec<Vec<Array1<C64>>>,
    pub u_err: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl BranchJet {
    /// Smallest r >= 1 with a clearly nonzero mu^(r); `None` if all orders
    /// up to max_order vanish within their error estimates.
    pub fn vanishing_order(&self, b: usize, tol: f64) -> Option<usize> {
        (1..=self.max_order).find(|&r| self.mu[b][r].abs() > tol.max(10.0 * self.mu_err[b][r]))
    }
}

/// Step size for estimating an r-th derivative: roundoff in an r-th
/// difference grows like eps/h^r, so higher orders need larger steps.
fn step_for_order(r: usize) -> f64 {
    let h = 10f64.powf(-12.0 / (r as f64 + 2.0));
    h.max(1e-3)
}

pub fn branch_derivatives(
    pencil: &PolyPencil,
    family: &BranchFamily,
    cv: &CharacteristicValue,
    max_order: usize,
) -> Result<BranchJet> {
    let lambda0 = cv.lambda0;
    let mut sampler = PathSampler::new(pencil, family, TrackOptions::default());
    let nb = cv.branch_ids.len();
    let mut warnings = Vec::new();

    // gauge pass: reference vectors at lambda0 from a two-sided interpolation
    let h_ref = step_for_order(1) * (1.0 + lambda0.abs());
    let ref_offsets: Vec<f64> = vec![-2.0, -1.0, 1.0, 2.0]
        .into_iter()
        .map(|k| k * h_ref / 4.0)
        .collect();
    let w0 = linalg::fd_weights(&ref_offsets, 0.0, 0);
    let mut u0: Vec<Array1<C64>> = Vec::with_capacity(nb);
    {
        let mut samples = Vec::new();
        for &off in &ref_offsets {
            samples.push(sampler.at(lambda0 + off)?);
        }
        for (bi, &j) in cv.branch_ids.iter().enumerate() {
            let _ = bi;
            let n = samples[0].vectors[j].len();
            let mut v = Array1::<C64>::zeros(n);
            for (si, s) in samples.iter().enumerate() {
                v.scaled_add(C64::new(w0[[0, si]], 0.0), &s.vectors[j]);
            }
            let nrm = linalg::norm2(&v);
            if nrm > 0.0 {
                v.mapv_inplace(|z| z / C64::new(nrm, 0.0));
            }
            u0.push(v);
        }
    }

    // phase gauge relative to u0: <u0, u(lambda)> real and positive
    let rephase = |u0: &Array1<C64>, v: &Array1<C64>| -> Array1<C64> {
        let ip = inner(u0, v);
        if ip.norm() > 0.0 {
            let phase = ip / ip.norm();
            v.mapv(|z| z / phase)
        } else {
            v.clone()
        }
    };

    let scale = pencil.scale();
    let eps_mu = 1e-15 * scale;
    let mut mu = vec![vec![0.0; max_order + 1]; nb];
    let mut mu_err = vec![vec![0.0; max_order + 1]; nb];
    let mut u: Vec<Vec<Array1<C64>>> = vec![Vec::new(); nb];
    let mut u_err = vec![vec![0.0; max_order + 1]; nb];
    for bi in 0..nb {
        u[bi] = vec![u0[bi].clone(); max_order + 1];
        u_err[bi][0] = 0.0;
    }

    for r in 1..=max_order {
        let h = step_for_order(r) * (1.0 + lambda0.abs());
        // eigenvalue stencil: minimal symmetric; the center value is exactly 0
        let half = (r + 1) / 2;
        let mu_offsets: Vec<f64> = if r % 2 == 0 {
            (-(half as i64)..=half as i64).map(|k| k as f64).collect()
        } else {
            ((-(half as i64))..=(half as i64))
                .filter(|&k| k != 0)
                .map(|k| k as f64)
                .collect()
        };
        // eigenvector stencil: symmetric without the center (the kernel
        // eigenvectors at lambda0 itself are not branch-resolved)
        let s_vec = if r % 2 == 0 { (r + 2) / 2 } else { (r + 3) / 2 };
        let vec_offsets: Vec<f64> = ((-(s_vec as i64))..=(s_vec as i64))
            .filter(|&k| k != 0)
            .map(|k| k as f64)
            .collect();

        let mut mu_tab: Vec<Vec<f64>> = vec![Vec::new(); nb]; // per scale
        let mut u_tab: Vec<Vec<Array1<C64>>> = vec![Vec::new(); nb];
        let mut wsum_final = 0.0;
        for level in 0..3 {
            let step = h / 2f64.powi(level);
            let pts_mu: Vec<f64> = mu_offsets.iter().map(|&k| k * step).collect();
            let pts_vec: Vec<f64> = vec_offsets.iter().map(|&k| k * step).collect();
            let wm = linalg::fd_weights(&pts_mu, 0.0, r);
            let wv = linalg::fd_weights(&pts_vec, 0.0, r);
            wsum_final = wm.row(r).iter().map(|w| w.abs()).sum::<f64>();
            let mut mu_est = vec![0.0; nb];
            for (pi, &off) in pts_mu.iter().enumerate() {
                if off == 0.0 {
                    continue; // branch value at the root is exactly zero
                }
                let s = sampler.at(lambda0 + off)?;
                for (bi, &j) in cv.branch_ids.iter().enumerate() {
                    mu_est[bi] += wm[[r, pi]] * s.values[j];
                }
            }
            let n = u0[0].len();
            let mut u_est = vec![Array1::<C64>::zeros(n); nb];
            for (pi, &off) in pts_vec.iter().enumerate() {
                let s = sampler.at(lambda0 + off)?;
                for (bi, &j) in cv.branch_ids.iter().enumerate() {
                    let v = rephase(&u0[bi], &s.vectors[j]);
                    u_est[bi].scaled_add(C64::new(wv[[r, pi]], 0.0), &v);
                }
            }
            for bi in 0..nb {
                mu_tab[bi].push(mu_est[bi]);
                u_tab[bi].push(u_est[bi].clone());
            }
        }
        for bi in 0..nb {
            let (val, err) = richardson3(&mu_tab[bi]);
            mu[bi][r] = val;
            mu_err[bi][r] = err + eps_mu * wsum_final;
            let (vval, verr) = richardson3_vec(&u_tab[bi]);
            u[bi][r] = vval;
            u_err[bi][r] = verr + eps_mu * wsum_final;
            let scale_r = 1.0 + mu[bi][r].abs();
            if mu_err[bi][r] > 1e-5 * scale_r.max(scale) {
                warnings.push(format!(
                    "branch {} order {r}: derivative error estimate {:.2e} above budget",
                    cv.branch_ids[bi], mu_err[bi][r]
                ));
            }
        }
    }

    Ok(BranchJet {
        lambda0,
        branch_ids: cv.branch_ids.clone(),
        max_order,
        mu,
        mu_err,
        u,
        u_err,
        warnings,
    })
}

/// Two-step Richardson extrapolation for an h^2 error series sampled at
/// h, h/2, h/4. Returns (value, error estimate).
fn richardson3(d: &[f64]) -> (f64, f64) {
    let t1 = (4.0 * d[1] - d[0]) / 3.0;
    let t2 = (4.0 * d[2] - d[1]) / 3.0;
    let f = (16.0 * t2 - t1) / 15.0;
    (f, (f - t2).abs())
}

fn richardson3_vec(d: &[Array1<C64>]) -> (Array1<C64>, f64) {
    let t1 = d[1].mapv(|z| z * 4.0 / 3.0) - d[0].mapv(|z| z / 3.0);
    let t2 = d[2].mapv(|z| z * 4.0 / 3.0) - d[1].mapv(|z| z / 3.0);
    let f = t2.mapv(|z| z * 16.0 / 15.0) - t1.mapv(|z| z / 15.0);
    let err = linalg::norm2(&(&f - &t2));
    (f, err)
}

/// Signs of the vanishing branches just left and right of a characteristic
/// value: (down-left, down-right, up-left, up-right). Reads the geo_mult
/// smallest-magnitude eigenvalues at `lambda0 +- eps`, which needs no branch
/// matching.
pub fn crossing_counts_sampled(
    pencil: &PolyPencil,
    cv: &CharacteristicValue,
    eps_hint: f64,
) -> Result<[usize; 4]> {
    let tol_root = pencil.zero_tol();
    let mut eps = eps_hint.max(1e-6 * (1.0 + cv.lambda0.abs()));
    let opts = TrackOptions::default();
    for _ in 0..24 {
        let (vl, _) = solve_at(pencil, cv.lambda0 - eps, &opts)?;
        let (vr, _) = solve_at(pencil, cv.lambda0 + eps, &opts)?;
        let small = |vals: &[f64]| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap());
            idx.iter().take(cv.geo_mult).map(|&i| vals[i]).collect()
        };
        let left = small(&vl);
        let right = small(&vr);
        let resolved = left
            .iter()
            .chain(right.iter())
            .all(|v| v.abs() > 10.0 * tol_root);
        if resolved {
            let dl = left.iter().filter(|&&v| v < 0.0).count();
            let dr = right.iter().filter(|&&v| v < 0.0).count();
            return Ok([dl, dr, cv.geo_mult - dl, cv.geo_mult - dr]);
        }
        eps *= 2.0;
    }
    Err(Error::Numerical(format!(
        "could not resolve branch signs near lambda0 = {}",
        cv.lambda0
    )))
}

/// Multiset equality of tracked values against a fresh eigendecomposition at
/// every grid point; used by validation tests.
pub fn validate_family(pencil: &PolyPencil, family: &BranchFamily) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, &lambda) in family.grid.iter().enumerate() {
        let a = pencil.eval(lambda, 0);
        let (vals, _) = solve_hermitian(&a)?;
        let mut tracked: Vec<f64> = (0..family.n_branches())
            .map(|j| family.values[j][k])
            .collect();
        tracked.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (t, v) in tracked.iter().zip(vals.iter()) {
            worst = worst.max((t - v).abs());
        }
        // residual of the eigenpairs
        for j in 0..family.n_branches() {
            let u = &family.vectors[j][k];
            let mut r = a.dot(u);
            r.scaled_add(C64::new(-family.values[j][k], 0.0), u);
            worst = worst.max(linalg::norm2(&r) / (1.0 + family.values[j][k].abs()));
        }
    }
    Ok(worst)
}

/// Projector onto the kernel of `L(lambda0)` together with the kernel basis.
pub fn kernel_projector(pencil: &PolyPencil, lambda0: f64) -> Result<(Array2<C64>, Array2<C64>)> {
    let sd = linalg::SpectralData::new(&pencil.eval(lambda0, 0), crate::pencil::TAU_ZERO)?;
    let b = sd.kernel_basis();
    Ok((b.clone(), b.dot(&adjoint(&b))))
}
