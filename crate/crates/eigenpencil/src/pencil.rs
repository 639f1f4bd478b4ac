//! Problem data: polynomial Hermitian pencils, linearized Hamiltonian
//! problems, grids, and the JSON problem-file format.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde_json::Value;

use crate::error::Error;
use crate::linalg::{self, hermitian_defect, hermitian_part, max_abs};
use crate::Result;

/// Relative tolerance for accepting nearly-Hermitian input; anything within
/// it is symmetrized with a warning, anything beyond it is rejected.
pub const TAU_HERM: f64 = 1e-12;
/// Base relative tolerance for rank / zero decisions.
pub const TAU_ZERO: f64 = 1e-8;
/// Relative eigensolver tolerance.
pub const TAU_EIG: f64 = 1e-10;
/// Characteristic values closer than `TAU_CLUSTER * (1 + |lambda|)` merge.
pub const TAU_CLUSTER: f64 = 1e-6;
/// Real/imaginary axis classification band, relative to `1 + |lambda|`.
pub const TAU_CLASS: f64 = 1e-7;
/// Condition-number cap for inverting `J`.
pub const COND_CAP: f64 = 1e12;

/// `L(lambda) = sum_k lambda^k L_k - g(lambda) I` with Hermitian `L_k` and
/// real `g_k`. The matrix part and the scalar part are stored separately;
/// the asymptotic sign counts depend on the split, so it is never
/// canonicalized.
#[derive(Debug, Clone)]
pub struct PolyPencil {
    n: usize,
    coeffs: Vec<Array2<C64>>,
    g: Vec<f64>,
}

impl PolyPencil {
    /// Validate and build. Coefficients within the Hermitian tolerance are
    /// symmetrized (a note per symmetrized matrix lands in `warnings`);
    /// anything worse is rejected, as are constant pencils.
    pub fn new(coeffs: Vec<Array2<C64>>, g: Vec<f64>) -> Result<(Self, Vec<String>)> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("pencil needs at least L_0".into()));
        }
        let n = coeffs[0].nrows();
        if n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be >= 1".into()));
        }
        let mut warnings = Vec::new();
        let mut fixed = Vec::with_capacity(coeffs.len());
        for (k, a) in coeffs.into_iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "coefficient L_{k} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            let defect = hermitian_defect(&a);
            let scale = max_abs(&a).max(1e-300);
            if defect > TAU_HERM * scale && defect > 1e-300 {
                return Err(Error::InvalidInput(format!(
                    "coefficient L_{k} is not Hermitian: |L - L^H| = {defect:.3e} exceeds {:.3e}",
                    TAU_HERM * scale
                )));
            }
            if defect > 0.0 {
                warnings.push(format!(
                    "coefficient L_{k} symmetrized (defect {defect:.3e})"
                ));
            }
            fixed.push(hermitian_part(&a));
        }
        let g = if g.is_empty() { vec![0.0] } else { g };
        let pencil = PolyPencil { n, coeffs: fixed, g };
        // Constant pencils carry no lambda dependence at all.
        let dep = (1..=pencil.max_degree()).any(|k| {
            let mut a = pencil.coeff(k);
            let gk = pencil.g_coeff(k);
            for i in 0..n {
                a[[i, i]] -= C64::new(gk, 0.0);
            }
            max_abs(&a) > 0.0
        });
        if !dep {
            return Err(Error::InvalidInput(
                "constant pencil: no lambda-dependent term survives in L(lambda) - g(lambda) I"
                    .into(),
            ));
        }
        Ok((pencil, warnings))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored matrix-polynomial degree (index of the last stored coefficient).
    pub fn p(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Stored scalar-polynomial degree.
    pub fn q(&self) -> usize {
        self.g.len() - 1
    }

    /// Degree of the last nonzero matrix coefficient (0 if all vanish).
    pub fn p_effective(&self) -> usize {
        (0..self.coeffs.len())
            .rev()
            .find(|&k| max_abs(&self.coeffs[k]) > 0.0)
            .unwrap_or(0)
    }

    /// Degree of the last nonzero scalar coefficient (0 if `g` vanishes).
    pub fn q_effective(&self) -> usize {
        (0..self.g.len()).rev().find(|&k| self.g[k] != 0.0).unwrap_or(0)
    }

    pub fn coeff(&self, k: usize) -> Array2<C64> {
        if k < self.coeffs.len() {
            self.coeffs[k].clone()
        } else {
            Array2::zeros((self.n, self.n))
        }
    }

    pub fn coeffs(&self) -> &[Array2<C64>] {
        &self.coeffs
    }

    pub fn g_coeff(&self, k: usize) -> f64 {
        self.g.get(k).copied().unwrap_or(0.0)
    }

    pub fn g_coeffs(&self) -> &[f64] {
        &self.g
    }

    pub fn max_degree(&self) -> usize {
        self.p().max(self.q())
    }

    /// Scale used for absolute zero thresholds on eigenvalue branches.
    pub fn scale(&self) -> f64 {
        let m = self
            .coeffs
            .iter()
            .map(max_abs)
            .fold(0.0f64, f64::max)
            .max(self.g.iter().fold(0.0f64, |m, g| m.max(g.abs())));
        1.0 + m
    }

    /// Absolute tolerance below which a branch value counts as zero.
    pub fn zero_tol(&self) -> f64 {
        TAU_ZERO * self.scale()
    }

    /// `d^r/dlambda^r [ L(lambda) - g(lambda) I ]`, exact polynomial
    /// differentiation. Orders beyond the degree give the zero matrix.
    pub fn eval(&self, lambda: f64, deriv_order: usize) -> Array2<C64> {
        let n = self.n;
        let mut out = Array2::<C64>::zeros((n, n));
        let r = deriv_order;
        for k in r..self.coeffs.len() {
            let c = falling_factorial(k, r) * lambda.powi((k - r) as i32);
            if c != 0.0 {
                out.scaled_add(C64::new(c, 0.0), &self.coeffs[k]);
            }
        }
        let mut gval = 0.0;
        for k in r..self.g.len() {
            gval += falling_factorial(k, r) * lambda.powi((k - r) as i32) * self.g[k];
        }
        for i in 0..n {
            out[[i, i]] -= C64::new(gval, 0.0);
        }
        out
    }

    /// Upper bound on `|d/dlambda mu_j(lambda)|` for `|lambda| <= abs_l`,
    /// from the coefficient norms (eigenvalues are 1-Lipschitz in the
    /// matrix).
    pub fn slope_bound(&self, abs_l: f64) -> f64 {
        let mut s = 0.0;
        for k in 1..self.coeffs.len() {
            s += (k as f64) * linalg::frobenius(&self.coeffs[k]) * abs_l.powi((k - 1) as i32);
        }
        for k in 1..self.g.len() {
            s += (k as f64) * self.g[k].abs() * abs_l.powi((k - 1) as i32);
        }
        s
    }

    /// The pencil in the shifted variable: `L~(lambda) = L(lambda + c)`.
    pub fn translate(&self, c: f64) -> PolyPencil {
        let n = self.n;
        let p = self.p();
        let mut coeffs = vec![Array2::<C64>::zeros((n, n)); p + 1];
        for k in 0..=p {
            for j in 0..=k {
                let b = binomial(k, j) * c.powi((k - j) as i32);
                coeffs[j].scaled_add(C64::new(b, 0.0), &self.coeffs[k]);
            }
        }
        let q = self.q();
        let mut g = vec![0.0; q + 1];
        for k in 0..=q {
            for j in 0..=k {
                g[j] += binomial(k, j) * c.powi((k - j) as i32) * self.g[k];
            }
        }
        PolyPencil { n, coeffs, g }
    }

    /// The pencil multiplied by a scalar.
    pub fn scaled(&self, c: f64) -> PolyPencil {
        PolyPencil {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .map(|a| a.mapv(|z| z * C64::new(c, 0.0)))
                .collect(),
            g: self.g.iter().map(|g| g * c).collect(),
        }
    }

    /// Folded coefficients `A_k = L_k - g_k I` of the full matrix polynomial.
    pub fn folded_coeffs(&self) -> Vec<Array2<C64>> {
        let d = self.max_degree();
        let mut out = Vec::with_capacity(d + 1);
        for k in 0..=d {
            let mut a = self.coeff(k);
            let gk = self.g_coeff(k);
            for i in 0..self.n {
                a[[i, i]] -= C64::new(gk, 0.0);
            }
            out.push(a);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "type": "pencil",
            "n": self.n,
            "p": self.p(),
            "coeffs": self.coeffs.iter().map(matrix_to_json).collect::<Vec<_>>(),
            "g": self.g.clone(),
        })
    }
}

fn falling_factorial(k: usize, r: usize) -> f64 {
    let mut f = 1.0;
    for i in 0..r {
        f *= (k - i) as f64;
    }
    f
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * ((n - i) as f64) / ((i + 1) as f64);
    }
    b
}

/// Linearized Hamiltonian problem `J L u = nu u` with `J` invertible
/// skew-Hermitian and `L` Hermitian, optionally carrying the canonical
/// block structure `J = [[0, -I], [I, 0]]`, `L = diag(L_plus, L_minus)`.
#[derive(Debug, Clone)]
pub struct HamiltonianProblem {
    pub j: Array2<C64>,
    pub l: Array2<C64>,
    pub canonical: Option<(Array2<C64>, Array2<C64>)>,
}

impl HamiltonianProblem {
    pub fn new(
        j: Array2<C64>,
        l: Array2<C64>,
        canonical: Option<(Array2<C64>, Array2<C64>)>,
    ) -> Result<(Self, Vec<String>)> {
        let n = j.nrows();
        if n == 0 || j.ncols() != n || l.nrows() != n || l.ncols() != n {
            return Err(Error::InvalidInput("J and L must be square of equal size".into()));
        }
        let mut warnings = Vec::new();
        // J skew-Hermitian: iJ Hermitian.
        let ij = j.mapv(|z| C64::new(0.0, 1.0) * z);
        let defect = hermitian_defect(&ij);
        let jscale = max_abs(&j).max(1e-300);
        if defect > TAU_HERM * jscale {
            return Err(Error::InvalidInput(format!(
                "J is not skew-Hermitian: |J + J^H| = {defect:.3e}"
            )));
        }
        let ldefect = hermitian_defect(&l);
        let lscale = max_abs(&l).max(1e-300);
        if ldefect > TAU_HERM * lscale {
            return Err(Error::InvalidInput(format!(
                "L is not Hermitian: |L - L^H| = {ldefect:.3e}"
            )));
        }
        if ldefect > 0.0 {
            warnings.push(format!("L symmetrized (defect {ldefect:.3e})"));
        }
        let j = ij.mapv(|z| C64::new(0.0, -1.0) * z); // re-skew the symmetrized iJ
        let j = {
            let h = hermitian_part(&j.mapv(|z| C64::new(0.0, 1.0) * z));
            h.mapv(|z| C64::new(0.0, -1.0) * z)
        };
        let l = hermitian_part(&l);
        // J singular check via the Hermitian matrix iJ.
        let (vals, _) = linalg::solve_hermitian(&j.mapv(|z| C64::new(0.0, 1.0) * z))?;
        let smin = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let smax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if smin <= smax.max(1.0) / COND_CAP {
            return Err(Error::InvalidInput("J singular".into()));
        }
        if let Some((lp, lm)) = &canonical {
            let d = lp.nrows();
            if lm.nrows() != d || 2 * d != n {
                return Err(Error::InvalidInput(
                    "canonical blocks must be d x d with 2d = n".into(),
                ));
            }
            let mut jc = Array2::<C64>::zeros((n, n));
            let mut lc = Array2::<C64>::zeros((n, n));
            for i in 0..d {
                jc[[i, d + i]] = C64::new(-1.0, 0.0);
                jc[[d + i, i]] = C64::new(1.0, 0.0);
                for k in 0..d {
                    lc[[i, k]] = lp[[i, k]];
                    lc[[d + i, d + k]] = lm[[i, k]];
                }
            }
            if max_abs(&(&jc - &j)) > 1e-12 * jscale || max_abs(&(&lc - &l)) > 1e-12 * lscale {
                return Err(Error::InvalidInput(
                    "canonical blocks do not reconstruct J and L".into(),
                ));
            }
        }
        Ok((HamiltonianProblem { j, l, canonical }, warnings))
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// `K = (iJ)^{-1}`, a Hermitian matrix; also reports cond(iJ).
    pub fn k_matrix(&self) -> Result<(Array2<C64>, f64)> {
        let ij = self.j.mapv(|z| C64::new(0.0, 1.0) * z);
        let (vals, vecs) = linalg::solve_hermitian(&ij)?;
        let n = self.dim();
        let mut k = Array2::<C64>::zeros((n, n));
        for idx in 0..n {
            let w = 1.0 / vals[idx];
            let v = vecs.column(idx);
            for r in 0..n {
                for c in 0..n {
                    k[[r, c]] += C64::new(w, 0.0) * v[r] * v[c].conj();
                }
            }
        }
        let smax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let smin = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        Ok((k, smax / smin))
    }

    /// The pencil `L - lambda K` whose real characteristic values are the
    /// real spectrum of `i J L`.
    pub fn pencil(&self) -> Result<PolyPencil> {
        let (k, cond) = self.k_matrix()?;
        if cond > COND_CAP {
            return Err(Error::Unsupported(format!(
                "cond(J) = {cond:.3e} exceeds {COND_CAP:.0e}"
            )));
        }
        let (p, _) = PolyPencil::new(vec![self.l.clone(), k.mapv(|z| -z)], vec![0.0])?;
        Ok(p)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::json!({
            "type": "hamiltonian",
            "J": matrix_to_json(&self.j),
            "L": matrix_to_json(&self.l),
        });
        if let Some((lp, lm)) = &self.canonical {
            obj["canonical"] = serde_json::json!({
                "L_plus": matrix_to_json(lp),
                "L_minus": matrix_to_json(lm),
            });
        }
        obj
    }
}

/// A lambda-window with a sample budget and a refinement floor.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
    pub refine_tol: f64,
}

impl GridSpec {
    pub fn new(lambda_min: f64, lambda_max: f64, samples: usize, refine_tol: f64) -> Result<Self> {
        if !(lambda_min < lambda_max) {
            return Err(Error::InvalidInput("grid needs lambda_min < lambda_max".into()));
        }
        if samples < 3 {
            return Err(Error::InvalidInput("grid needs at least 3 samples".into()));
        }
        if !(refine_tol > 0.0) {
            return Err(Error::InvalidInput("refine_tol must be positive".into()));
        }
        Ok(GridSpec {
            lambda_min,
            lambda_max,
            samples,
            refine_tol,
        })
    }

    /// Evenly spaced sample points including both endpoints.
    pub fn points(&self) -> Vec<f64> {
        let m = self.samples;
        (0..m)
            .map(|i| {
                self.lambda_min
                    + (self.lambda_max - self.lambda_min) * (i as f64) / ((m - 1) as f64)
            })
            .collect()
    }

    /// Sample points spaced uniformly in asinh(lambda), denser near zero.
    /// Used for symmetric windows around the origin where the action
    /// concentrates well inside the root bound.
    pub fn points_asinh(&self) -> Vec<f64> {
        let m = self.samples;
        let a = self.lambda_min.asinh();
        let b = self.lambda_max.asinh();
        let mut pts: Vec<f64> = (0..m)
            .map(|i| (a + (b - a) * (i as f64) / ((m - 1) as f64)).sinh())
            .collect();
        pts[0] = self.lambda_min;
        pts[m - 1] = self.lambda_max;
        pts
    }
}

/// Either kind of problem file.
#[derive(Debug, Clone)]
pub enum Problem {
    Pencil(PolyPencil),
    Hamiltonian(HamiltonianProblem),
}

/// Parse a problem from its JSON text.
pub fn parse_problem(text: &str) -> Result<(Problem, Vec<String>)> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("{e}")))?;
    let ty = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("missing \"type\" field".into()))?;
    match ty {
        "pencil" => {
            let coeffs_v = v
                .get("coeffs")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("pencil needs \"coeffs\"".into()))?;
            let coeffs = coeffs_v
                .iter()
                .map(matrix_from_json)
                .collect::<Result<Vec<_>>>()?;
            let g = match v.get("g") {
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Parse("bad g entry".into())))
                    .collect::<Result<Vec<f64>>>()?,
                None => vec![0.0],
                _ => return Err(Error::Parse("\"g\" must be an array of numbers".into())),
            };
            if let Some(n) = v.get("n").and_then(Value::as_u64) {
                if coeffs.first().map(|m| m.nrows() as u64) != Some(n) {
                    return Err(Error::Parse("declared n does not match coeffs".into()));
                }
            }
            if let Some(p) = v.get("p").and_then(Value::as_u64) {
                if coeffs.len() as u64 != p + 1 {
                    return Err(Error::Parse("declared p does not match coeffs".into()));
                }
            }
            let (pencil, warnings) = PolyPencil::new(coeffs, g)?;
            Ok((Problem::Pencil(pencil), warnings))
        }
        "hamiltonian" => {
            let j = matrix_from_json(
                v.get("J").ok_or_else(|| Error::Parse("hamiltonian needs \"J\"".into()))?,
            )?;
            let l = matrix_from_json(
                v.get("L").ok_or_else(|| Error::Parse("hamiltonian needs \"L\"".into()))?,
            )?;
            let canonical = match v.get("canonical") {
                Some(c) if !c.is_null() => {
                    let lp = matrix_from_json(
                        c.get("L_plus")
                            .ok_or_else(|| Error::Parse("canonical needs \"L_plus\"".into()))?,
                    )?;
                    let lm = matrix_from_json(
                        c.get("L_minus")
                            .ok_or_else(|| Error::Parse("canonical needs \"L_minus\"".into()))?,
                    )?;
                    Some((lp, lm))
                }
                _ => None,
            };
            let (h, warnings) = HamiltonianProblem::new(j, l, canonical)?;
            Ok((Problem::Hamiltonian(h), warnings))
        }
        other => Err(Error::Parse(format!("unknown problem type {other:?}"))),
    }
}

/// Load a problem file.
pub fn load_problem(path: &std::path::Path) -> Result<(Problem, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    parse_problem(&text)
}

/// n-list of n-lists of `[re, im]` pairs.
pub fn matrix_to_json(a: &Array2<C64>) -> Value {
    Value::Array(
        (0..a.nrows())
            .map(|i| {
                Value::Array(
                    (0..a.ncols())
                        .map(|j| serde_json::json!([a[[i, j]].re, a[[i, j]].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value) -> Result<Array2<C64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
    let n = rows.len();
    let mut a = Array2::<C64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse("matrix row must be an array".into()))?;
        if row.len() != n {
            return Err(Error::Parse("matrix must be square".into()));
        }
        for (j, e) in row.iter().enumerate() {
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Parse("matrix entry must be [re, im]".into()))?;
            let re = pair[0].as_f64().ok_or_else(|| Error::Parse("bad re".into()))?;
            let im = pair[1].as_f64().ok_or_else(|| Error::Parse("bad im".into()))?;
            a[[i, j]] = C64::new(re, im);
        }
    }
    Ok(a)
}

/// Eigenvector of a 1x1-style vector as an Array1 constructor shorthand
/// used in tests.
pub fn col(entries: &[C64]) -> Array1<C64> {
    Array1::from_vec(entries.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_pencil(coeffs: &[f64], g: &[f64]) -> PolyPencil {
        let cs = coeffs.iter().map(|&x| array![[c(x, 0.0)]]).collect();
        PolyPencil::new(cs, g.to_vec()).unwrap().0
    }

    #[test]
    fn parse_scalar_pencil() {
        let text = r#"{"type":"pencil","n":1,"p":2,
            "coeffs":[[[[-1.0,0.0]]],[[[0.0,0.0]]],[[[1.0,0.0]]]],"g":[0.0]}"#;
        let (p, w) = parse_problem(text).unwrap();
        assert!(w.is_empty());
        match p {
            Problem::Pencil(p) => {
                assert_eq!(p.dim(), 1);
                assert_eq!(p.p(), 2);
                assert_abs_diff_eq!(p.eval(2.0, 0)[[0, 0]].re, 3.0, epsilon = 1e-15);
            }
            _ => panic!("expected pencil"),
        }
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized_with_warning() {
        let mut l0 = array![[c(1.0, 0.0), c(1e-20, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        l0[[0, 1]] = c(1e-20, 0.0);
        let l1 = Array2::<C64>::eye(2);
        let (_, warnings) = PolyPencil::new(vec![l0, l1], vec![0.0]).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("symmetrized"));
    }

    #[test]
    fn genuinely_nonhermitian_rejected() {
        let l0 = array![[c(1.0, 0.0), c(0.5, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let l1 = Array2::<C64>::eye(2);
        let err = PolyPencil::new(vec![l0, l1], vec![0.0]).unwrap_err();
        assert!(format!("{err}").contains("not Hermitian"));
    }

    #[test]
    fn constant_pencil_rejected() {
        let l0 = Array2::<C64>::eye(2);
        let err = PolyPencil::new(vec![l0], vec![1.0]).unwrap_err();
        assert!(format!("{err}").contains("constant"));
        // identical leading terms cancel everywhere: also constant
        let l0 = Array2::<C64>::eye(2);
        let l1 = Array2::<C64>::eye(2);
        let err = PolyPencil::new(vec![l0, l1], vec![0.0, 1.0]).unwrap_err();
        assert!(format!("{err}").contains("constant"));
    }

    #[test]
    fn singular_j_rejected() {
        let j = Array2::<C64>::zeros((2, 2));
        let l = Array2::<C64>::eye(2);
        let err = HamiltonianProblem::new(j, l, None).unwrap_err();
        assert!(format!("{err}").contains("J singular"));
    }

    #[test]
    fn eval_diagonal_plus_lambda() {
        let l0 = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let l1 = Array2::<C64>::eye(2);
        let (p, _) = PolyPencil::new(vec![l0.clone(), l1], vec![0.0]).unwrap();
        let at0 = p.eval(0.0, 0);
        assert_abs_diff_eq!(max_abs(&(&at0 - &l0)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_scalar_derivatives() {
        // lambda^2 - 1 at lambda = 2: value 3, first derivative 4, second 2
        let p = scalar_pencil(&[-1.0, 0.0, 1.0], &[0.0]);
        assert_abs_diff_eq!(p.eval(2.0, 0)[[0, 0]].re, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(2.0, 1)[[0, 0]].re, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(2.0, 2)[[0, 0]].re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_order_beyond_degree_is_zero() {
        let m = array![[c(0.3, 0.0), c(0.0, 0.1)], [c(0.0, -0.1), c(-0.2, 0.0)]];
        let l = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let i2 = Array2::<C64>::eye(2);
        let (p, _) = PolyPencil::new(vec![m, l, i2], vec![0.0]).unwrap();
        assert_eq!(max_abs(&p.eval(1.3, 3)), 0.0);
    }

    #[test]
    fn translate_matches_direct_evaluation() {
        let p = scalar_pencil(&[-1.0, 0.5, 1.0], &[0.0, 0.0, 0.0, 2.0]);
        let t = p.translate(0.7);
        for &x in &[-1.5, 0.0, 0.3, 2.0] {
            assert_abs_diff_eq!(
                t.eval(x, 0)[[0, 0]].re,
                p.eval(x + 0.7, 0)[[0, 0]].re,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn fd_matches_exact_derivative() {
        let p = scalar_pencil(&[0.3, -0.8, 0.0, 1.2], &[0.0, 0.4]);
        for &lambda in &[-0.9, 0.2, 1.4] {
            for r in 0..3usize {
                for &h in &[1e-4, 1e-5] {
                    let fd = (p.eval(lambda + h, r)[[0, 0]].re
                        - p.eval(lambda - h, r)[[0, 0]].re)
                        / (2.0 * h);
                    let exact = p.eval(lambda, r + 1)[[0, 0]].re;
                    assert!((fd - exact).abs() <= 1e-5 + 1e-4 * exact.abs());
                }
            }
        }
    }

    #[test]
    fn problem_json_roundtrip() {
        let m = array![[c(0.3, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(-0.2, 0.0)]];
        let l = array![[c(1.0, 0.0), c(0.0, 0.5)], [c(0.0, -0.5), c(2.0, 0.0)]];
        let (p, _) = PolyPencil::new(vec![m, l], vec![0.0, 0.0, -1.0]).unwrap();
        let text = p.to_json().to_string();
        let (back, _) = parse_problem(&text).unwrap();
        match back {
            Problem::Pencil(b) => {
                for k in 0..=1 {
                    assert!(max_abs(&(&b.coeff(k) - &p.coeff(k))) == 0.0);
                }
                assert_eq!(b.g_coeffs(), p.g_coeffs());
            }
            _ => panic!(),
        }
    }
}
