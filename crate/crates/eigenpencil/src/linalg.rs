//! Dense linear-algebra helpers: Hermitian eigendecomposition, inertia,
//! kernel bases, the regularized inverse of a singular Hermitian matrix,
//! optimal assignment, and finite-difference weights.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Error;
use crate::Result;

/// `x^H y`, conjugate-linear in the first argument.
pub fn inner(x: &Array1<C64>, y: &Array1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &Array1<C64>) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]].conj());
        }
    }
    h
}

/// Departure from Hermitian symmetry, `max |A - A^H|`.
pub fn hermitian_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            d = d.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    d
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending, eigenvectors as orthonormal columns with
/// a deterministic phase (largest-magnitude component real and positive).
pub fn solve_hermitian(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let h = hermitian_part(a);
    let (vals, mut vecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e}")))?;
    for mut col in vecs.columns_mut() {
        let mut best = 0usize;
        let mut mag = -1.0f64;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > mag {
                mag = z.norm();
                best = i;
            }
        }
        if mag > 0.0 {
            let phase = col[best] / col[best].norm();
            for z in col.iter_mut() {
                *z /= phase;
            }
        }
    }
    Ok((vals, vecs))
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues_general(a: &Array2<C64>) -> Result<Vec<C64>> {
    let (vals, _) = a
        .eig()
        .map_err(|e| Error::EigenFailure(format!("{e}")))?;
    Ok(vals.to_vec())
}

/// Counts of (negative, zero, positive) eigenvalues given a zero tolerance.
pub fn inertia_of_values(vals: &[f64], tol: f64) -> (usize, usize, usize) {
    let mut neg = 0;
    let mut zero = 0;
    let mut pos = 0;
    for &v in vals {
        if v < -tol {
            neg += 1;
        } else if v > tol {
            pos += 1;
        } else {
            zero += 1;
        }
    }
    (neg, zero, pos)
}

/// Inertia of a Hermitian matrix with an absolute zero tolerance.
pub fn inertia(a: &Array2<C64>, tol: f64) -> Result<(usize, usize, usize)> {
    let (vals, _) = solve_hermitian(a)?;
    Ok(inertia_of_values(vals.as_slice().unwrap(), tol))
}

/// Spectral decomposition of a Hermitian matrix reused for kernel projection
/// and for the regularized inverse `-(A + Pi)^{-1}` where `Pi` projects onto
/// the numerical kernel.
pub struct SpectralData {
    pub vals: Array1<f64>,
    pub vecs: Array2<C64>,
    pub kernel_dim: usize,
    /// Indices (into `vals`) of the kernel eigenvalues.
    kernel_idx: Vec<usize>,
}

impl SpectralData {
    /// Decompose `a`; eigenvalues with `|v| <= rel_tol * max(1, max|v|)` are
    /// treated as zero.
    pub fn new(a: &Array2<C64>, rel_tol: f64) -> Result<Self> {
        let (vals, vecs) = solve_hermitian(a)?;
        let vmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = rel_tol * vmax.max(1.0);
        let kernel_idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= tol).collect();
        Ok(SpectralData {
            kernel_dim: kernel_idx.len(),
            vals,
            vecs,
            kernel_idx,
        })
    }

    /// Orthonormal kernel basis, one column per kernel direction.
    pub fn kernel_basis(&self) -> Array2<C64> {
        let n = self.vecs.nrows();
        let mut b = Array2::zeros((n, self.kernel_idx.len()));
        for (c, &i) in self.kernel_idx.iter().enumerate() {
            b.column_mut(c).assign(&self.vecs.column(i));
        }
        b
    }

    /// Orthogonal projector onto the kernel.
    pub fn kernel_projector(&self) -> Array2<C64> {
        let b = self.kernel_basis();
        b.dot(&adjoint(&b))
    }

    /// `-(A + Pi)^{-1}` assembled spectrally, so that applying it to a kernel
    /// vector gives exactly minus the vector.
    pub fn regularized_inverse(&self) -> Array2<C64> {
        let n = self.vecs.nrows();
        let mut m = Array2::zeros((n, n));
        for i in 0..self.vals.len() {
            let w = if self.kernel_idx.contains(&i) {
                -1.0
            } else {
                -1.0 / self.vals[i]
            };
            let v = self.vecs.column(i);
            for r in 0..n {
                for c in 0..n {
                    m[[r, c]] += C64::new(w, 0.0) * v[r] * v[c].conj();
                }
            }
        }
        m
    }
}

/// Orthonormal basis of the column span of `a` (singular vectors with
/// relative singular value above `rel_tol`).
pub fn orth(a: &Array2<C64>, rel_tol: f64) -> Result<Array2<C64>> {
    use ndarray_linalg::SVD;
    let (u, s, _) = a
        .svd(true, false)
        .map_err(|e| Error::EigenFailure(format!("{e}")))?;
    let u = u.expect("left singular vectors requested");
    let smax = s.iter().fold(0.0f64, |m, &v| m.max(v));
    let rank = s.iter().filter(|&&v| v > rel_tol * smax.max(1e-300)).count();
    Ok(u.slice(ndarray::s![.., ..rank]).to_owned())
}

/// Orthonormal basis of the null space of `a` via SVD, with the rank decision
/// made at `rel_tol` relative to the largest singular value.
pub fn null_space(a: &Array2<C64>, rel_tol: f64) -> Result<Array2<C64>> {
    use ndarray_linalg::SVD;
    let (_, s, vt) = a
        .svd(false, true)
        .map_err(|e| Error::EigenFailure(format!("{e}")))?;
    let vt = vt.expect("right singular vectors requested");
    let smax = s.iter().fold(0.0f64, |m, &v| m.max(v));
    let tol = rel_tol * smax.max(1e-300);
    let cols = a.ncols();
    let mut keep = Vec::new();
    for i in 0..cols {
        let sv = if i < s.len() { s[i] } else { 0.0 };
        if sv <= tol {
            keep.push(i);
        }
    }
    let mut b = Array2::zeros((cols, keep.len()));
    for (c, &i) in keep.iter().enumerate() {
        for r in 0..cols {
            b[[r, c]] = vt[[i, r]].conj();
        }
    }
    Ok(b)
}

/// Maximum-weight assignment between rows and columns of a square weight
/// matrix (Jonker-Volgenant style shortest augmenting paths on the
/// negated weights). Returns `perm` with `perm[row] = col`.
pub fn assignment_max(w: &Array2<f64>) -> Vec<usize> {
    let n = w.nrows();
    assert_eq!(n, w.ncols());
    if n == 0 {
        return Vec::new();
    }
    // Hungarian algorithm on cost = -w, O(n^3), 1-based internal arrays.
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[col] = row assigned to col; col 0 is virtual
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = -w[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

/// Finite-difference weights on an arbitrary stencil (Fornberg's recursion).
///
/// Returns a `(max_order + 1) x points.len()` matrix whose row `r` holds the
/// weights approximating the r-th derivative at `x0` from samples at
/// `points`.
pub fn fd_weights(points: &[f64], x0: f64, max_order: usize) -> Array2<f64> {
    let n = points.len();
    assert!(n > max_order, "need more stencil points than derivative order");
    let m = max_order;
    let mut c = Array2::<f64>::zeros((m + 1, n));
    let mut c1 = 1.0f64;
    let mut c4 = points[0] - x0;
    c[[0, 0]] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0f64;
        let c5 = c4;
        c4 = points[i] - x0;
        for j in 0..i {
            let c3 = points[i] - points[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[[k, i]] = c1 * ((k as f64) * c[[k - 1, i - 1]] - c5 * c[[k, i - 1]]) / c2;
                }
                c[[0, i]] = -c1 * c5 * c[[0, i - 1]] / c2;
            }
            for k in (1..=mn).rev() {
                c[[k, j]] = (c4 * c[[k, j]] - (k as f64) * c[[k - 1, j]]) / c3;
            }
            c[[0, j]] = c4 * c[[0, j]] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitian_eigen_diagonal_permutes() {
        let a = array![
            [c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]
        ];
        let (vals, vecs) = solve_hermitian(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-14);
        // columns are (signed) unit coordinate vectors
        for j in 0..3 {
            let col = vecs.column(j);
            let nrm: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            assert_abs_diff_eq!(nrm, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn hermitian_eigen_symmetric_swap() {
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let (vals, vecs) = solve_hermitian(&a).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let v0 = vecs.column(0);
        assert_abs_diff_eq!((v0[0] + v0[1]).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn hermitian_eigen_reconstructs_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
        let n = 6;
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let a = hermitian_part(&a);
        let (vals, vecs) = solve_hermitian(&a).unwrap();
        let mut rec = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            let v = vecs.column(k);
            for i in 0..n {
                for j in 0..n {
                    rec[[i, j]] += c(vals[k], 0.0) * v[i] * v[j].conj();
                }
            }
        }
        let scale = max_abs(&a);
        assert!(max_abs(&(&rec - &a)) <= 1e-12 * scale);
    }

    #[test]
    fn regularized_inverse_negates_kernel() {
        // A = diag(0, 2): Pi = diag(1,0), -(A+Pi)^{-1} = diag(-1, -1/2)
        let a = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let s = SpectralData::new(&a, 1e-10).unwrap();
        assert_eq!(s.kernel_dim, 1);
        let g = s.regularized_inverse();
        assert_abs_diff_eq!(g[[0, 0]].re, -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g[[1, 1]].re, -0.5, epsilon = 1e-13);
        let pi = s.kernel_projector();
        let gp = g.dot(&pi);
        assert!(max_abs(&(&gp + &pi)) < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for n in 1..=6usize {
            for _ in 0..20 {
                let w = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..1.0));
                let perm = assignment_max(&w);
                let got: f64 = (0..n).map(|i| w[[i, perm[i]]]).sum();
                // brute force over all permutations
                let mut idx: Vec<usize> = (0..n).collect();
                let mut best = f64::NEG_INFINITY;
                permute(&mut idx, 0, &mut |p| {
                    let s: f64 = (0..n).map(|i| w[[i, p[i]]]).sum();
                    if s > best {
                        best = s;
                    }
                });
                assert!((got - best).abs() < 1e-12, "n={n} got={got} best={best}");
            }
        }
    }

    fn permute(idx: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == idx.len() {
            f(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(idx, k + 1, f);
            idx.swap(k, i);
        }
    }

    #[test]
    fn fd_weights_match_central_tables() {
        // first derivative, stencil {-1,0,1}: weights {-1/2, 0, 1/2}
        let w = fd_weights(&[-1.0, 0.0, 1.0], 0.0, 2);
        assert_abs_diff_eq!(w[[1, 0]], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[1, 1]], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[1, 2]], 0.5, epsilon = 1e-14);
        // second derivative: {1, -2, 1}
        assert_abs_diff_eq!(w[[2, 0]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[2, 1]], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[2, 2]], 1.0, epsilon = 1e-14);
        // no-center stencil reproduces derivatives of a cubic
        let pts = [-2.0, -1.0, 1.0, 2.0];
        let w = fd_weights(&pts, 0.0, 3);
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x * x * x;
        let d1: f64 = pts.iter().zip(w.row(1)).map(|(&x, &c)| c * f(x)).sum();
        let d2: f64 = pts.iter().zip(w.row(2)).map(|(&x, &c)| c * f(x)).sum();
        let d3: f64 = pts.iter().zip(w.row(3)).map(|(&x, &c)| c * f(x)).sum();
        assert_abs_diff_eq!(d1, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d2, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d3, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)]];
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 1);
        let av = a.dot(&ns);
        assert!(max_abs(&av) < 1e-12);
    }
}
