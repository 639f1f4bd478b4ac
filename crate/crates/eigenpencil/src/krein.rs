//! Krein indices of a real characteristic value, computed three ways:
//! from the local shape of the vanishing eigenvalue branches (graphical),
//! from Gram matrices of root-vector chains (algebraic), and from a
//! recursion over nested kernel subspaces that needs only pencil derivatives
//! plus projected eigenvector-derivative data.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::branch::{BranchJet, CharacteristicValue};
use crate::error::Error;
use crate::linalg::{self, adjoint, inner, solve_hermitian, SpectralData};
use crate::pencil::{PolyPencil, TAU_ZERO};
use crate::Result;

/// Graphical Krein indices of a single branch vanishing to order `m` with
/// leading sign `eta`: `(m/2, m/2)` for even m, `((m + eta)/2, (m - eta)/2)`
/// for odd m.
pub fn graphical_krein(m: usize, eta: i32) -> (usize, usize) {
    assert!(m >= 1, "vanishing order must be at least 1");
    assert!(eta == 1 || eta == -1, "eta must be +1 or -1");
    if m % 2 == 0 {
        (m / 2, m / 2)
    } else if eta > 0 {
        ((m + 1) / 2, (m - 1) / 2)
    } else {
        ((m - 1) / 2, (m + 1) / 2)
    }
}

/// How a root chain was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSource {
    BranchDerivatives,
    Manual,
}

/// A maximal chain of root vectors `u^[0], ..., u^[m-1]` at a real
/// characteristic value: the cascading relations
/// `sum_{j<=s} L^(s-j)(lambda0)/(s-j)! u^[j] = 0` hold for s < m.
#[derive(Debug, Clone)]
pub struct RootChain {
    pub lambda0: f64,
    pub vectors: Vec<Array1<C64>>,
    pub source: ChainSource,
}

impl RootChain {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest residual norm of the chain relations.
    pub fn residual(&self, pencil: &PolyPencil) -> f64 {
        let n = self.vectors[0].len();
        let mut worst = 0.0f64;
        for s in 0..self.len() {
            let mut r = Array1::<C64>::zeros(n);
            for j in 0..=s {
                let d = pencil.eval(self.lambda0, s - j);
                let scale = 1.0 / factorial(s - j);
                r.scaled_add(C64::new(scale, 0.0), &d.dot(&self.vectors[j]));
            }
            worst = worst.max(linalg::norm2(&r));
        }
        worst
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>().max(1.0)
}

/// Chain of root vectors generated by the derivatives of an eigenvector
/// branch: `u^[j] = u^(j)(lambda0) / j!`. The first vector has unit norm.
pub fn chain_from_branch(
    pencil: &PolyPencil,
    jet: &BranchJet,
    branch_id: usize,
    m: usize,
) -> Result<RootChain> {
    let b = jet
        .branch_ids
        .iter()
        .position(|&id| id == branch_id)
        .ok_or_else(|| Error::InvalidInput(format!("branch {branch_id} not in jet")))?;
    if m == 0 || m > jet.max_order + 1 || jet.u[b].len() < m {
        return Err(Error::InvalidInput(format!(
            "chain of length {m} needs derivatives to order {}",
            m.saturating_sub(1)
        )));
    }
    let vectors: Vec<Array1<C64>> = (0..m)
        .map(|j| jet.u[b][j].mapv(|z| z / C64::new(factorial(j), 0.0)))
        .collect();
    let chain = RootChain {
        lambda0: jet.lambda0,
        vectors,
        source: ChainSource::BranchDerivatives,
    };
    let res = chain.residual(pencil);
    let budget = 1e-6 * pencil.scale();
    if res > budget {
        return Err(Error::UnreliableDerivative(format!(
            "chain residual {res:.3e} exceeds {budget:.3e} at lambda0 = {}",
            jet.lambda0
        )));
    }
    Ok(chain)
}

/// Gram matrix of the form `(., -K .)` on the span of a chain from the
/// linear pencil `L - lambda K`: `W_ij = (u^[i], -K u^[j])`.
pub fn gram_matrix_linear(k: &Array2<C64>, chain: &RootChain) -> Array2<C64> {
    let m = chain.len();
    let mut w = Array2::<C64>::zeros((m, m));
    for i in 0..m {
        let kv: Vec<Array1<C64>> = chain.vectors.iter().map(|u| k.dot(u)).collect();
        for j in 0..m {
            w[[i, j]] = -inner(&chain.vectors[i], &kv[j]);
        }
    }
    linalg::hermitian_part(&w)
}

/// Gram matrix for a chain of the quadratic pencil `M + lambda L + lambda^2 I`
/// at `lambda0 = 0`:
/// `W_ij = (u^[i-1], L u^[j-1]) + (u^[i-2], u^[j-1]) + (u^[i-1], u^[j-2])`
/// with `u^[-1] = 0`. For a full chain of length 3 the signature of the
/// characteristic value is `-sign det W`.
pub fn gram_matrix_quadratic(
    l: &Array2<C64>,
    chain: &RootChain,
) -> Result<(Array2<C64>, i32, (usize, usize))> {
    let m = chain.len();
    if m > 3 {
        return Err(Error::InvalidInput(
            "quadratic-pencil Gram form applies to chains of length <= 3".into(),
        ));
    }
    let u = &chain.vectors;
    let mut w = Array2::<C64>::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            let mut v = inner(&u[a], &l.dot(&u[b]));
            if a >= 1 {
                v += inner(&u[a - 1], &u[b]);
            }
            if b >= 1 {
                v += inner(&u[a], &u[b - 1]);
            }
            w[[a, b]] = v;
        }
    }
    let w = linalg::hermitian_part(&w);
    let (vals, _) = solve_hermitian(&w)?;
    let wnorm = vals.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = TAU_ZERO * wnorm.max(1.0);
    let det: f64 = vals.iter().product();
    if m == 3 && det.abs() < tol.powi(3).max(TAU_ZERO) {
        return Err(Error::Numerical(format!(
            "Gram determinant {det:.3e} too small to decide a signature"
        )));
    }
    let (neg, _zero, pos) = linalg::inertia_of_values(vals.as_slice().unwrap(), tol);
    let kappa = if m == 3 {
        if det < 0.0 {
            1
        } else {
            -1
        }
    } else {
        (pos as i32 - neg as i32).signum()
    };
    Ok((w, kappa, (pos, neg)))
}

/// State of the nested-kernel recursion at one characteristic value.
#[derive(Debug, Clone)]
pub struct KernelRecursionState {
    pub lambda0: f64,
    /// Orthonormal bases of the nested subspaces `U_0 \supseteq U_1 ...`.
    pub u_list: Vec<Array2<C64>>,
    /// The compressed Hermitian forms decided at each stage m = 1, 2, ...
    pub h_forms: Vec<Array2<C64>>,
    /// Eigenvalues of each compressed form (stage m entry times m! carries
    /// the m-th branch derivatives of the branches resolved at stage m).
    pub stage_eigs: Vec<Vec<f64>>,
    /// `(|K_m^+|, |K_m^-|)` per stage.
    pub kcounts: Vec<(usize, usize)>,
    /// Projector onto Ker L(lambda0).
    pub pi: Array2<C64>,
    /// `-(L(lambda0) + Pi)^{-1}`.
    pub ltilde_inv: Array2<C64>,
    pub warnings: Vec<String>,
}

impl KernelRecursionState {
    pub fn geo_mult(&self) -> usize {
        self.u_list[0].ncols()
    }

    pub fn alg_mult(&self) -> usize {
        self.kcounts
            .iter()
            .enumerate()
            .map(|(i, &(p, n))| (i + 1) * (p + n))
            .sum()
    }
}

/// Interleaved derivative/regularized-inverse products summed over all
/// compositions of m: for composition (a_1, ..., a_s),
/// `T_{a_1} G T_{a_2} G ... G T_{a_s}` with `T_r = L^(r)(lambda0)/r!` and
/// `G` the regularized inverse.
fn lambda_matrix(t: &[Array2<C64>], g: &Array2<C64>, m: usize) -> Array2<C64> {
    let n = g.nrows();
    let mut sum = Array2::<C64>::zeros((n, n));
    // compositions of m as bitmasks over the m-1 possible cut points
    for mask in 0u64..(1u64 << (m - 1)) {
        let mut parts = Vec::new();
        let mut run = 1usize;
        for bit in 0..(m - 1) {
            if mask >> bit & 1 == 1 {
                parts.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        parts.push(run);
        let mut term = t[parts[0]].clone();
        for &p in &parts[1..] {
            term = term.dot(g);
            term = term.dot(&t[p]);
        }
        sum += &term;
    }
    linalg::hermitian_part(&sum)
}

/// Run the kernel recursion at `cv.lambda0`.
///
/// `jet_provider(order)` must return branch-derivative data for the
/// vanishing branches with eigenvector derivatives up to `order`; it is only
/// called when the recursion reaches stage 3 or later, where the correction
/// form needs the projected eigenvector derivatives.
pub fn kernel_recursion(
    pencil: &PolyPencil,
    cv: &CharacteristicValue,
    jet_provider: &mut dyn FnMut(usize) -> Result<BranchJet>,
) -> Result<KernelRecursionState> {
    let lambda0 = cv.lambda0;
    let scale = pencil.scale();
    let sd = SpectralData::new(&pencil.eval(lambda0, 0), TAU_ZERO)?;
    let mut warnings = Vec::new();
    if sd.kernel_dim == 0 {
        return Err(Error::InvalidInput(format!(
            "lambda0 = {lambda0} is not a characteristic value (trivial kernel)"
        )));
    }
    if sd.kernel_dim != cv.geo_mult {
        warnings.push(format!(
            "kernel dimension {} disagrees with located geometric multiplicity {}",
            sd.kernel_dim, cv.geo_mult
        ));
    }
    let pi = sd.kernel_projector();
    let g = sd.regularized_inverse();
    let u0 = sd.kernel_basis();

    let depth_cap = pencil.dim() * (pencil.p() + pencil.q()) + 2;
    let mut t: Vec<Array2<C64>> = vec![Array2::zeros((pencil.dim(), pencil.dim()))];
    let mut lambdas: Vec<Array2<C64>> = vec![Array2::zeros((pencil.dim(), pencil.dim()))];
    let mut u_list = vec![u0];
    let mut h_forms = Vec::new();
    let mut stage_eigs = Vec::new();
    let mut kcounts = Vec::new();
    let mut jet: Option<BranchJet> = None;

    let mut m = 1usize;
    loop {
        let u = u_list.last().unwrap().clone();
        if u.ncols() == 0 {
            break;
        }
        if m > depth_cap {
            return Err(Error::Numerical(format!(
                "kernel recursion did not terminate by stage {depth_cap} at lambda0 = {lambda0}"
            )));
        }
        while t.len() <= m {
            let r = t.len();
            let d = pencil.eval(lambda0, r).mapv(|z| z / C64::new(factorial(r), 0.0));
            t.push(d);
        }
        while lambdas.len() <= m {
            let mm = lambdas.len();
            lambdas.push(lambda_matrix(&t, &g, mm));
        }
        let mut form = adjoint(&u).dot(&lambdas[m]).dot(&u);
        if m >= 3 {
            // correction form from projected eigenvector derivatives
            let need = m - 2;
            let have = jet.as_ref().map(|j| j.max_order).unwrap_or(0);
            if jet.is_none() || have < need {
                jet = Some(jet_provider(need.max(2))?);
            }
            let jet = jet.as_ref().unwrap();
            let nb = jet.branch_ids.len();
            // projected, factorial-scaled derivative data per branch
            let mut w: Vec<Vec<Array1<C64>>> = Vec::with_capacity(nb);
            for b in 0..nb {
                let mut per = Vec::with_capacity(m - 1);
                for s in 0..=(m - 2).min(jet.u[b].len() - 1) {
                    per.push(pi.dot(&jet.u[b][s]).mapv(|z| z / C64::new(factorial(s), 0.0)));
                }
                w.push(per);
            }
            // which branches still live in span(U): their lambda0 vectors
            // project fully into it
            let pu = u.dot(&adjoint(&u));
            let mut alive = Vec::new();
            for b in 0..nb {
                let v0 = &jet.u[b][0];
                let res = linalg::norm2(&(v0 - &pu.dot(v0)));
                if res < 0.3 {
                    alive.push(b);
                }
            }
            if alive.len() != u.ncols() {
                warnings.push(format!(
                    "stage {m}: {} branch vectors matched a subspace of dimension {}",
                    alive.len(),
                    u.ncols()
                ));
            }
            if alive.len() == u.ncols() && !alive.is_empty() {
                let l = alive.len();
                let nrows = pencil.dim();
                let mut bmat = Array2::<C64>::zeros((nrows, l));
                for (c, &b) in alive.iter().enumerate() {
                    bmat.column_mut(c).assign(&jet.u[b][0]);
                }
                let cmat = adjoint(&bmat).dot(&u); // branch coords of U columns
                let mut dt = Array2::<C64>::zeros((l, l));
                for (jj, &bj) in alive.iter().enumerate() {
                    for (ii, &bi) in alive.iter().enumerate() {
                        let mut v = C64::new(0.0, 0.0);
                        for a1 in 1..=(m - 2) {
                            for a3 in 1..=(m - 1 - a1) {
                                let a2 = m - a1 - a3;
                                if a2 < 1 {
                                    continue;
                                }
                                if a1 >= w[bj].len() || a3 >= w[bi].len() {
                                    continue;
                                }
                                v += inner(&lambdas[a2].dot(&w[bj][a1]), &w[bi][a3]);
                            }
                        }
                        dt[[jj, ii]] -= v;
                    }
                }
                let dt = linalg::hermitian_part(&dt);
                form += &adjoint(&cmat).dot(&dt).dot(&cmat);
            }
        }
        let form = linalg::hermitian_part(&form);
        let (vals, vecs) = solve_hermitian(&form)?;
        let fnorm = vals.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let thr = TAU_ZERO * fnorm.max(scale);
        for v in vals.iter() {
            if v.abs() > thr / 10.0 && v.abs() < 10.0 * thr {
                warnings.push(format!(
                    "stage {m}: eigenvalue {v:.3e} sits at the rank-decision boundary {thr:.3e}"
                ));
            }
        }
        let (neg, zero, pos) = linalg::inertia_of_values(vals.as_slice().unwrap(), thr);
        kcounts.push((pos, neg));
        stage_eigs.push(vals.to_vec());
        h_forms.push(form);
        // U_{m} = U_{m-1} * (kernel columns of the compressed form)
        let mut knext = Array2::<C64>::zeros((u.ncols(), zero));
        let mut c = 0;
        for i in 0..vals.len() {
            if vals[i].abs() <= thr {
                knext.column_mut(c).assign(&vecs.column(i));
                c += 1;
            }
        }
        u_list.push(u.dot(&knext));
        if zero == 0 {
            break;
        }
        m += 1;
    }

    Ok(KernelRecursionState {
        lambda0,
        u_list,
        h_forms,
        stage_eigs,
        kcounts,
        pi,
        ltilde_inv: g,
        warnings,
    })
}

/// Krein indices of the characteristic value from the per-order counts: each
/// branch of order m and sign eta contributes its graphical indices, summed
/// over all orders.
pub fn krein_signature_of_counts(kcounts: &[(usize, usize)]) -> (usize, usize, i64) {
    let mut kp = 0usize;
    let mut kn = 0usize;
    for (i, &(p, n)) in kcounts.iter().enumerate() {
        let m = i + 1;
        let (pp, pn) = graphical_krein(m, 1);
        let (np, nn) = graphical_krein(m, -1);
        kp += p * pp + n * np;
        kn += p * pn + n * nn;
    }
    (kp, kn, kp as i64 - kn as i64)
}

/// Krein indices from a completed recursion.
pub fn krein_signature_of_cv(state: &KernelRecursionState) -> (usize, usize, i64) {
    krein_signature_of_counts(&state.kcounts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{branch_derivatives, find_characteristic_values, track_branches};
    use crate::pencil::GridSpec;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn graphical_indices_match_definition() {
        assert_eq!(graphical_krein(1, 1), (1, 0));
        assert_eq!(graphical_krein(2, -1), (1, 1));
        assert_eq!(graphical_krein(2, 1), (1, 1));
        assert_eq!(graphical_krein(3, -1), (1, 2));
        assert_eq!(graphical_krein(3, 1), (2, 1));
        assert_eq!(graphical_krein(4, 1), (2, 2));
    }

    #[test]
    fn signature_of_mixed_orders() {
        // one rising simple crossing, one falling, one rising cubic
        let (kp, kn, k) = krein_signature_of_counts(&[(1, 1), (0, 0), (1, 0)]);
        assert_eq!((kp, kn, k), (3, 2, 1));
    }

    #[test]
    fn scalar_square_recursion_by_hand() {
        // L(lambda) = lambda^2: U_0 = [1], H_1 = 0, H_2 = 1
        let (p, _) = PolyPencil::new(
            vec![array![[c(0.0, 0.0)]], array![[c(0.0, 0.0)]], array![[c(1.0, 0.0)]]],
            vec![0.0],
        )
        .unwrap();
        let grid = GridSpec::new(-2.0, 2.0, 33, 1e-10).unwrap();
        let fam = track_branches(&p, &grid).unwrap();
        let cvs = find_characteristic_values(&p, &fam).unwrap();
        assert_eq!(cvs.len(), 1);
        let mut provider = |order: usize| branch_derivatives(&p, &fam, &cvs[0], order);
        let state = kernel_recursion(&p, &cvs[0], &mut provider).unwrap();
        assert_eq!(state.kcounts, vec![(0, 0), (1, 0)]);
        assert_abs_diff_eq!(state.ltilde_inv[[0, 0]].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.h_forms[0][[0, 0]].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.h_forms[1][[0, 0]].re, 1.0, epsilon = 1e-12);
        let (kp, kn, kappa) = krein_signature_of_cv(&state);
        assert_eq!((kp, kn, kappa), (1, 1, 0));
        assert_eq!(state.alg_mult(), 2);
    }

    #[test]
    fn simple_crossing_sign_from_first_derivative() {
        // diag(lambda - 1, 2 lambda - 6): at lambda0 = 1, (u, L' u) = 1 > 0
        let l0 = array![[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-6.0, 0.0)]];
        let l1 = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let (p, _) = PolyPencil::new(vec![l0, l1], vec![0.0]).unwrap();
        let grid = GridSpec::new(0.0, 4.0, 17, 1e-10).unwrap();
        let fam = track_branches(&p, &grid).unwrap();
        let cvs = find_characteristic_values(&p, &fam).unwrap();
        let mut provider = |order: usize| branch_derivatives(&p, &fam, &cvs[0], order);
        let state = kernel_recursion(&p, &cvs[0], &mut provider).unwrap();
        assert_eq!(state.kcounts, vec![(1, 0)]);
        let (kp, kn, kappa) = krein_signature_of_cv(&state);
        assert_eq!((kp, kn, kappa), (1, 0, 1));
    }

    #[test]
    fn chain_of_scalar_square() {
        let (p, _) = PolyPencil::new(
            vec![array![[c(0.0, 0.0)]], array![[c(0.0, 0.0)]], array![[c(1.0, 0.0)]]],
            vec![0.0],
        )
        .unwrap();
        let grid = GridSpec::new(-2.0, 2.0, 33, 1e-10).unwrap();
        let fam = track_branches(&p, &grid).unwrap();
        let cvs = find_characteristic_values(&p, &fam).unwrap();
        let jet = branch_derivatives(&p, &fam, &cvs[0], 2).unwrap();
        let chain = chain_from_branch(&p, &jet, cvs[0].branch_ids[0], 2).unwrap();
        assert_eq!(chain.len(), 2);
        assert_abs_diff_eq!(linalg::norm2(&chain.vectors[0]), 1.0, epsilon = 1e-10);
        assert!(linalg::norm2(&chain.vectors[1]) < 1e-7);
        assert!(chain.residual(&p) < 1e-6 * p.scale());
    }

    #[test]
    fn chain_of_affine_pencil_is_single_vector() {
        let l0 = array![[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-6.0, 0.0)]];
        let l1 = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let (p, _) = PolyPencil::new(vec![l0, l1], vec![0.0]).unwrap();
        let grid = GridSpec::new(0.0, 4.0, 17, 1e-10).unwrap();
        let fam = track_branches(&p, &grid).unwrap();
        let cvs = find_characteristic_values(&p, &fam).unwrap();
        let jet = branch_derivatives(&p, &fam, &cvs[0], 2).unwrap();
        let chain = chain_from_branch(&p, &jet, cvs[0].branch_ids[0], 1).unwrap();
        assert_eq!(chain.len(), 1);
        // kernel vector is e_1 up to phase
        assert_abs_diff_eq!(chain.vectors[0][0].norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn linear_gram_matrix_signs() {
        // K = iJ with J = [[0,-1],[1,0]]; u = (1, i)/sqrt(2) is a unit
        // eigenvector of K with eigenvalue 1, so W = [-(u, K u)] = [-1]
        let k = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        let s = 1.0 / 2.0f64.sqrt();
        let chain = RootChain {
            lambda0: 0.0,
            vectors: vec![array![c(s, 0.0), c(0.0, s)]],
            source: ChainSource::Manual,
        };
        let w = gram_matrix_linear(&k, &chain);
        assert_abs_diff_eq!(w[[0, 0]].re, -1.0, epsilon = 1e-12);
        // chain (e_1) with K = I gives [-1], with K = -I gives [+1]
        let e1 = RootChain {
            lambda0: 0.0,
            vectors: vec![array![c(1.0, 0.0), c(0.0, 0.0)]],
            source: ChainSource::Manual,
        };
        let w = gram_matrix_linear(&Array2::eye(2), &e1);
        assert_abs_diff_eq!(w[[0, 0]].re, -1.0, epsilon = 1e-12);
        let w = gram_matrix_linear(&Array2::eye(2).mapv(|z: C64| -z), &e1);
        assert_abs_diff_eq!(w[[0, 0]].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_gram_degenerate_chain_is_indeterminate() {
        // chain (u, 0, 0) evaluates literally to [[a,1,0],[1,0,0],[0,0,0]]
        let l = array![[c(0.7, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let zero = array![c(0.0, 0.0), c(0.0, 0.0)];
        let chain = RootChain {
            lambda0: 0.0,
            vectors: vec![array![c(1.0, 0.0), c(0.0, 0.0)], zero.clone(), zero],
            source: ChainSource::Manual,
        };
        let err = gram_matrix_quadratic(&l, &chain).unwrap_err();
        assert!(format!("{err}").contains("determinant"));
    }

    #[test]
    fn quadratic_gram_scaling_invariance() {
        // engineered cubic tangency: M = diag(0, 1), L = [[0,1],[1,1]]
        let m = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let l = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)]];
        let i2 = Array2::<C64>::eye(2);
        let (p, _) = PolyPencil::new(vec![m, l.clone(), i2], vec![0.0]).unwrap();
        let grid = GridSpec::new(-0.6, 0.6, 25, 1e-10).unwrap();
        let fam = track_branches(&p, &grid).unwrap();
        let cvs = find_characteristic_values(&p, &fam).unwrap();
        let cv0 = cvs
            .iter()
            .find(|cv| cv.lambda0.abs() < 1e-6)
            .expect("characteristic value at 0");
        let jet = branch_derivatives(&p, &fam, cv0, 3).unwrap();
        let chain = chain_from_branch(&p, &jet, cv0.branch_ids[0], 3).unwrap();
        let (_, kappa, _) = gram_matrix_quadratic(&l, &chain).unwrap();
        // mu ~ lambda^3 with positive leading coefficient
        assert_eq!(kappa, 1);
        let scaled = RootChain {
            lambda0: 0.0,
            vectors: chain.vectors.iter().map(|v| v.mapv(|z| z * 2.0)).collect(),
            source: ChainSource::Manual,
        };
        let (_, kappa2, _) = gram_matrix_quadratic(&l, &scaled).unwrap();
        assert_eq!(kappa, kappa2);
    }
}
