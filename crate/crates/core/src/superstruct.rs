//! Correction systems of the asymmetric M-decompositions, residual
//! polynomials, superconvergence point sets and the superclose fields
//! `u_I,Super` and `u_I,Ultra`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteField;
use crate::dualscheme::{DirectionStrategy, DualStrategy};
use crate::error::{FveError, Result};
use crate::meshgen::{DofMap, ElementIndex, RectMesh};
use crate::pdemodel::ManufacturedProblem;
use crate::refbasis::{
    gauss_lobatto_nodes, gauss_rule, legendre, legendre_eval, mfunction_eval, Basis1D, Polynomial1D,
};

/// Condition numbers above this are reported as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e8;
const CONDITION_FAIL: f64 = 1e12;
const IMAG_TOL: f64 = 1e-10;
const ROOT_RESIDUAL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Super,
    Ultra,
}

/// Corrections normalized by a unit leading coefficient, index `s - 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmdCoefficients {
    pub b_star: Vec<f64>,
    pub b1_star: Vec<f64>,
    pub condition: f64,
}

impl AmdCoefficients {
    pub fn well_conditioned(&self) -> bool {
        self.condition < CONDITION_WARN
    }
}

fn constraint_matrix(dir: &DirectionStrategy) -> DMatrix<f64> {
    let k = dir.k;
    DMatrix::from_fn(k - 1, k - 1, |m, s| legendre(s + 1, dir.alpha[m]))
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `sum_{s=2..k} c_s L_{s-1}(alpha_m) = -L_lead(alpha_m)`, `m = 1..k-1`.
fn solve_corrections(dir: &DirectionStrategy, lead: usize) -> Result<(Vec<f64>, f64)> {
    let k = dir.k;
    if k < 2 {
        return Ok((Vec::new(), 1.0));
    }
    let a = constraint_matrix(dir);
    let cond = condition_number(&a);
    if !(cond < CONDITION_FAIL) {
        return Err(FveError::SingularConstraintSystem(cond));
    }
    let rhs = DVector::from_fn(k - 1, |m, _| -legendre(lead, dir.alpha[m]));
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(FveError::SingularConstraintSystem(cond))?;
    Ok((sol.iter().copied().collect(), cond))
}

pub fn amd_super_corrections(dir: &DirectionStrategy) -> Result<Vec<f64>> {
    Ok(solve_corrections(dir, dir.k)?.0)
}

pub fn amd_ultra_corrections(dir: &DirectionStrategy) -> Result<Vec<f64>> {
    Ok(solve_corrections(dir, dir.k + 1)?.0)
}

pub fn amd_coefficients(dir: &DirectionStrategy) -> Result<AmdCoefficients> {
    let (b_star, condition) = solve_corrections(dir, dir.k)?;
    let (b1_star, _) = solve_corrections(dir, dir.k + 1)?;
    Ok(AmdCoefficients {
        b_star,
        b1_star,
        condition,
    })
}

fn lead_index(k: usize, mode: Mode) -> usize {
    match mode {
        Mode::Super => k + 1,
        Mode::Ultra => k + 2,
    }
}

/// Constraint residuals at every dual parameter `alpha_1..alpha_k`; the last
/// entry is the `m = k` extension.
pub fn constraint_residuals(dir: &DirectionStrategy, mode: Mode) -> Result<Vec<f64>> {
    let poly = residual_polynomial(dir, mode)?;
    let d = poly.derivative();
    Ok(dir.alpha.iter().map(|&a| d.eval(a)).collect())
}

/// `sum_s c_s M_s + M_{k+1}` (Super) or `sum_s c_s M_s + M_{k+2}` (Ultra) in the
/// M-function basis.
pub fn residual_polynomial(dir: &DirectionStrategy, mode: Mode) -> Result<Polynomial1D> {
    let k = dir.k;
    let lead = lead_index(k, mode);
    let corr = match mode {
        Mode::Super => amd_super_corrections(dir)?,
        Mode::Ultra => amd_ultra_corrections(dir)?,
    };
    let mut coeffs = vec![0.0; lead + 1];
    for (i, c) in corr.into_iter().enumerate() {
        coeffs[i + 2] = c;
    }
    coeffs[lead] = 1.0;
    Ok(Polynomial1D::new(Basis1D::MFunction, coeffs))
}

/// The `k + 1` real roots of the Super residual polynomial, sorted.
pub fn super_points(dir: &DirectionStrategy) -> Result<Vec<f64>> {
    let poly = residual_polynomial(dir, Mode::Super)?;
    polynomial_roots(&poly)
}

/// Real roots in `[-1, 1]` of a polynomial whose roots are all real and lie there.
pub fn polynomial_roots(poly: &Polynomial1D) -> Result<Vec<f64>> {
    let mono = poly.to_monomial();
    let n = mono.degree();
    if n == 0 {
        return Ok(Vec::new());
    }
    let c = &mono.coeffs;
    let lead = c[n];
    let comp = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[n - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = comp.complex_eigenvalues();
    let d = mono.derivative();
    let mut roots = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > IMAG_TOL {
            return Err(FveError::ComplexOrOutOfRangeRoot(format!(
                "{} + {}i",
                z.re, z.im
            )));
        }
        let mut x = z.re;
        for _ in 0..2 {
            let dv = d.eval(x);
            if dv != 0.0 {
                x -= mono.eval(x) / dv;
            }
        }
        if x.abs() > 1.0 + 1e-10 {
            return Err(FveError::ComplexOrOutOfRangeRoot(format!("{x} outside [-1, 1]")));
        }
        let res = mono.eval(x).abs();
        if res > ROOT_RESIDUAL_TOL {
            return Err(FveError::ComplexOrOutOfRangeRoot(format!(
                "root {x} has residual {res:e}"
            )));
        }
        roots.push(x.clamp(-1.0, 1.0));
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    if roots.windows(2).any(|w| w[1] - w[0] <= 1e-10) {
        return Err(FveError::ComplexOrOutOfRangeRoot(format!(
            "repeated root in {roots:?}"
        )));
    }
    Ok(roots)
}

/// Reference-element point sets of a dual strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperPointSets {
    pub alpha_x: Vec<f64>,
    pub ps_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
    pub ps_y: Vec<f64>,
}

impl SuperPointSets {
    /// `P^S_x x P^S_y`, x fastest.
    pub fn value_grid(&self) -> Vec<(f64, f64)> {
        tensor(&self.ps_x, &self.ps_y)
    }

    /// Points for x-derivative ultraconvergence: `alpha_x x P^S_y`.
    pub fn ultra_grid_x(&self) -> Vec<(f64, f64)> {
        tensor(&self.alpha_x, &self.ps_y)
    }

    /// Points for y-derivative ultraconvergence: `P^S_x x alpha_y`.
    pub fn ultra_grid_y(&self) -> Vec<(f64, f64)> {
        tensor(&self.ps_x, &self.alpha_y)
    }

    /// Maps a reference grid onto element `e`.
    pub fn mapped(
        &self,
        mesh: &RectMesh,
        e: ElementIndex,
        grid: &[(f64, f64)],
    ) -> Result<Vec<(f64, f64)>> {
        grid.iter().map(|&(a, b)| mesh.map_to_element(e, a, b)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn tensor(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
}

pub fn point_sets(strategy: &DualStrategy) -> Result<SuperPointSets> {
    Ok(SuperPointSets {
        alpha_x: strategy.x.alpha.clone(),
        ps_x: super_points(&strategy.x)?,
        alpha_y: strategy.y.alpha.clone(),
        ps_y: super_points(&strategy.y)?,
    })
}

/// Point sets used for a scheme that has no dual strategy of its own, such as
/// the Galerkin comparison: Gauss points with Gauss-Lobatto transverse points.
pub fn gaussian_point_sets(k: usize) -> Result<SuperPointSets> {
    let g = gauss_rule(k)?.nodes;
    let l = gauss_lobatto_nodes(k);
    Ok(SuperPointSets {
        alpha_x: g.clone(),
        ps_x: l.clone(),
        alpha_y: g,
        ps_y: l,
    })
}

/// `∫_{-1}^{1}` of the Super residual polynomial.
pub fn verify_vanishing_means(dir: &DirectionStrategy) -> Result<f64> {
    Ok(residual_polynomial(dir, Mode::Super)?.integral().abs())
}

/// Coefficients `b_{s,t}`, `0 <= s, t <= degree`, of a function in the
/// M-function tensor basis on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct MDecomposition {
    pub element: ElementIndex,
    pub degree: usize,
    /// `b_{s,t}` at `s + t (degree + 1)`.
    pub coeffs: Vec<f64>,
}

impl MDecomposition {
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.coeffs[s + t * (self.degree + 1)]
    }

    /// Value of the truncated expansion at a reference point.
    pub fn value_ref(&self, xr: f64, yr: f64) -> f64 {
        let n = self.degree + 1;
        let mx: Vec<f64> = (0..n).map(|s| mfunction_eval(s, xr)).collect();
        let my: Vec<f64> = (0..n).map(|t| mfunction_eval(t, yr)).collect();
        let mut v = 0.0;
        for t in 0..n {
            for s in 0..n {
                v += self.get(s, t) * mx[s] * my[t];
            }
        }
        v
    }
}

/// Dual functionals of the M-functions on `[-1, 1]` as point evaluations:
/// `Λ_0 g = (g(-1) + g(1))/2`, `Λ_1 g = (g(1) - g(-1))/2` and, for `s >= 2`,
/// `Λ_s g = (2s - 1)/2 ∫ g' L_{s-1}`, integrated by parts.
struct MFunctionals {
    points: Vec<f64>,
    // weights[s][i] applies to points[i]
    weights: Vec<Vec<f64>>,
}

impl MFunctionals {
    fn new(degree: usize) -> Result<Self> {
        let rule = gauss_rule(degree + 2)?;
        let mut points = vec![-1.0, 1.0];
        points.extend_from_slice(&rule.nodes);
        let np = points.len();
        let mut weights = Vec::with_capacity(degree + 1);
        for s in 0..=degree {
            let mut w = vec![0.0; np];
            match s {
                0 => {
                    w[0] = 0.5;
                    w[1] = 0.5;
                }
                1 => {
                    w[0] = -0.5;
                    w[1] = 0.5;
                }
                _ => {
                    let c = (2 * s - 1) as f64 / 2.0;
                    let sign = if (s - 1) % 2 == 0 { 1.0 } else { -1.0 };
                    w[0] = -c * sign;
                    w[1] = c;
                    for (i, (&x, &wq)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                        w[2 + i] = -c * wq * legendre_eval(s - 1, x).1;
                    }
                }
            }
            weights.push(w);
        }
        Ok(MFunctionals { points, weights })
    }
}

/// Expansion coefficients `b_{s,t}` of `u` on element `e` up to `degree` in
/// each direction.
pub fn mdecompose_element(
    u: &dyn Fn(f64, f64) -> f64,
    mesh: &RectMesh,
    e: ElementIndex,
    degree: usize,
) -> Result<MDecomposition> {
    let f = MFunctionals::new(degree)?;
    mdecompose_with(u, mesh, e, &f)
}

fn mdecompose_with(
    u: &dyn Fn(f64, f64) -> f64,
    mesh: &RectMesh,
    e: ElementIndex,
    f: &MFunctionals,
) -> Result<MDecomposition> {
    let np = f.points.len();
    let degree = f.weights.len() - 1;
    let mut samples = vec![0.0; np * np];
    for (j, &yr) in f.points.iter().enumerate() {
        for (i, &xr) in f.points.iter().enumerate() {
            let (x, y) = mesh.map_to_element(e, xr, yr)?;
            samples[i + j * np] = u(x, y);
        }
    }
    // contract x first, then y
    let n = degree + 1;
    let mut partial = vec![0.0; n * np];
    for j in 0..np {
        for s in 0..n {
            partial[s + j * n] = (0..np).map(|i| f.weights[s][i] * samples[i + j * np]).sum();
        }
    }
    let mut coeffs = vec![0.0; n * n];
    for t in 0..n {
        for s in 0..n {
            coeffs[s + t * n] = (0..np).map(|j| f.weights[t][j] * partial[s + j * n]).sum();
        }
    }
    Ok(MDecomposition {
        element: e,
        degree,
        coeffs,
    })
}

/// Coefficient table of `u_I` on one element in the M tensor basis, indexed
/// `s + t (k + 1)`.
pub fn superclose_coefficients(
    b: &MDecomposition,
    k: usize,
    amd_x: &AmdCoefficients,
    amd_y: &AmdCoefficients,
    mode: Mode,
) -> Vec<f64> {
    let n = k + 1;
    let limit = match mode {
        Mode::Super => k + 1,
        Mode::Ultra => k + 2,
    };
    let mut out = vec![0.0; n * n];
    for t in 0..=k {
        for s in 0..=k {
            if s + t > limit {
                continue;
            }
            let mut v = b.get(s, t);
            if s <= 1 && t >= 2 {
                v -= b.get(s, k + 1) * amd_y.b_star[t - 2];
                if mode == Mode::Ultra {
                    v -= b.get(s, k + 2) * amd_y.b1_star[t - 2];
                }
            } else if t <= 1 && s >= 2 {
                v -= b.get(k + 1, t) * amd_x.b_star[s - 2];
                if mode == Mode::Ultra {
                    v -= b.get(k + 2, t) * amd_x.b1_star[s - 2];
                }
            }
            out[s + t * n] = v;
        }
    }
    out
}

/// Superclose field of `u` with the largest mismatch seen between element
/// copies of a shared node.
pub fn superclose_from_fn(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    mesh: &RectMesh,
    strategy: &DualStrategy,
    mode: Mode,
) -> Result<(DiscreteField, f64)> {
    let k = strategy.k();
    let amd_x = amd_coefficients(&strategy.x)?;
    let amd_y = amd_coefficients(&strategy.y)?;
    let f = MFunctionals::new(lead_index(k, mode))?;
    let nodes = gauss_lobatto_nodes(k);
    let n = k + 1;
    let mx: Vec<Vec<f64>> = nodes.iter().map(|&x| (0..n).map(|s| mfunction_eval(s, x)).collect()).collect();
    let elements: Vec<ElementIndex> = mesh.elements().collect();
    let locals: Vec<Vec<f64>> = elements
        .par_iter()
        .map(|&e| -> Result<Vec<f64>> {
            let b = mdecompose_with(u, mesh, e, &f)?;
            let c = superclose_coefficients(&b, k, &amd_x, &amd_y, mode);
            let mut vals = vec![0.0; n * n];
            for q in 0..n {
                for p in 0..n {
                    let mut v = 0.0;
                    for t in 0..n {
                        for s in 0..n {
                            v += c[s + t * n] * mx[p][s] * mx[q][t];
                        }
                    }
                    vals[p + q * n] = v;
                }
            }
            Ok(vals)
        })
        .collect::<Result<_>>()?;
    let dofs = DofMap::new(mesh, k)?;
    let mut coeffs = vec![f64::NAN; dofs.node_count()];
    let mut defect: f64 = 0.0;
    for (&e, vals) in elements.iter().zip(&locals) {
        for (l, &g) in dofs.element_nodes(e).iter().enumerate() {
            if coeffs[g].is_nan() {
                coeffs[g] = vals[l];
            } else {
                defect = defect.max((coeffs[g] - vals[l]).abs());
            }
        }
    }
    for (g, c) in coeffs.iter_mut().enumerate() {
        if dofs.is_boundary(g) {
            *c = 0.0;
        }
    }
    let field = DiscreteField::from_nodal(mesh, k, coeffs)?.with_strategy(strategy.clone());
    Ok((field, defect))
}

/// `u_I,Super` or `u_I,Ultra` of the exact solution of `problem`.
pub fn build_superclose(
    problem: &ManufacturedProblem,
    mesh: &RectMesh,
    strategy: &DualStrategy,
    mode: Mode,
) -> Result<DiscreteField> {
    let u = problem.exact.u.clone();
    let g = move |x: f64, y: f64| u(x, y);
    Ok(superclose_from_fn(&g, mesh, strategy, mode)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualscheme::{gaussian_duality, preset, solve_strategy};
    use crate::meshgen::{perturbed_mesh, uniform_mesh};
    use crate::pdemodel::benchmark_solution;

    #[test]
    fn gaussian_corrections_vanish() {
        for k in 2..=6 {
            let g = gaussian_duality(k).unwrap();
            let c = amd_super_corrections(&g).unwrap();
            assert!(c.iter().all(|v| v.abs() < 1e-12), "k={k}: {c:?}");
            let pts = super_points(&g).unwrap();
            let lob = gauss_lobatto_nodes(k);
            for (a, b) in pts.iter().zip(&lob) {
                assert!((a - b).abs() < 1e-12, "k={k}: {pts:?} vs {lob:?}");
            }
            assert!(verify_vanishing_means(&g).unwrap() < 1e-12);
        }
        let g3 = gaussian_duality(3).unwrap();
        let pts = super_points(&g3).unwrap();
        let r5 = 1.0 / 5f64.sqrt();
        for (a, b) in pts.iter().zip([-1.0, -r5, r5, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = amd_ultra_corrections(&g3).unwrap();
        assert!(u.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn k2_closed_forms() {
        let dir = solve_strategy(2, 1, &[(1, 0.1)], &[-0.4, 0.5], &[]).unwrap();
        let a1 = dir.alpha[0];
        let s = amd_super_corrections(&dir).unwrap();
        assert!((s[0] + legendre(2, a1) / a1).abs() < 1e-12);
        let u = amd_ultra_corrections(&dir).unwrap();
        assert!((u[0] + legendre(3, a1) / a1).abs() < 1e-12);
        let pts = super_points(&dir).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[0] + 1.0).abs() < 1e-12 && (pts[2] - 1.0).abs() < 1e-12);
        let cubic = residual_polynomial(&dir, Mode::Super).unwrap();
        assert!(cubic.eval(pts[1]).abs() < 1e-13);
    }

    #[test]
    fn preset_structure() {
        for name in crate::dualscheme::preset_names() {
            let st = preset(name).unwrap();
            for dir in [&st.x, &st.y] {
                let amd = amd_coefficients(dir).unwrap();
                assert!(amd.well_conditioned(), "{name}: {}", amd.condition);
                let poly = residual_polynomial(dir, Mode::Super).unwrap();
                assert!(poly.eval(-1.0).abs() < 1e-12 && poly.eval(1.0).abs() < 1e-12);
                let res = constraint_residuals(dir, Mode::Super).unwrap();
                // r >= k - 1 for every preset, so the m = k extension holds
                assert!(res.iter().all(|v| v.abs() < 1e-12), "{name}: {res:?}");
                if dir.r >= dir.k {
                    let res = constraint_residuals(dir, Mode::Ultra).unwrap();
                    assert!(res.iter().all(|v| v.abs() < 1e-12), "{name}: {res:?}");
                }
                if dir.r >= dir.k {
                    assert_eq!(super_points(dir).unwrap().len(), dir.k + 1);
                    assert!(verify_vanishing_means(dir).unwrap() < 1e-12, "{name}");
                }
            }
        }
        let st = preset("FVE-3-3").unwrap();
        let pts = super_points(&st.x).unwrap();
        let asym = (0..4).map(|i| (pts[i] + pts[3 - i]).abs()).fold(0.0, f64::max);
        assert!(asym > 1e-3);
        let st = preset("FVE-3-2").unwrap();
        let neg = verify_vanishing_means(&st.x).unwrap();
        assert!(neg.is_finite());
        // with only r = k - 1 the x residual quartic has a complex root pair
        assert!(matches!(super_points(&st.x), Err(FveError::ComplexOrOutOfRangeRoot(_))));
        assert_eq!(super_points(&st.y).unwrap().len(), 4);
    }

    #[test]
    fn point_set_counts() {
        let sets = point_sets(&preset("FVE-3-3").unwrap()).unwrap();
        assert_eq!(sets.value_grid().len(), 16);
        assert_eq!(sets.ultra_grid_x().len(), 12);
        assert_eq!(sets.ultra_grid_y().len(), 12);
        let v: serde_json::Value = serde_json::from_str(&sets.to_json().unwrap()).unwrap();
        for key in ["alpha_x", "ps_x", "alpha_y", "ps_y"] {
            assert!(v[key].is_array());
        }
        let g = point_sets(&DualStrategy::isotropic(gaussian_duality(3).unwrap())).unwrap();
        let gauss = gauss_rule(3).unwrap().nodes;
        assert_eq!(g.ultra_grid_x()[1].0, gauss[1]);
    }

    #[test]
    fn decomposition_of_members() {
        let mesh = perturbed_mesh(4, 4, 0.2, 2).unwrap();
        let e = (1, 2);
        let xc = mesh.x_coords().to_vec();
        let yc = mesh.y_coords().to_vec();
        let (x0, x1, y0, y1) = (xc[1], xc[2], yc[2], yc[3]);
        let u = move |x: f64, y: f64| {
            let xr = 2.0 * (x - x0) / (x1 - x0) - 1.0;
            let yr = 2.0 * (y - y0) / (y1 - y0) - 1.0;
            mfunction_eval(2, xr) * mfunction_eval(3, yr)
        };
        let b = mdecompose_element(&u, &mesh, e, 5).unwrap();
        for t in 0..6 {
            for s in 0..6 {
                let want = if (s, t) == (2, 3) { 1.0 } else { 0.0 };
                assert!((b.get(s, t) - want).abs() < 1e-12, "({s},{t}) {}", b.get(s, t));
            }
        }
        let one = mdecompose_element(&|_, _| 1.0, &mesh, e, 4).unwrap();
        assert!((one.get(0, 0) - 1.0).abs() < 1e-14);
        assert!(one.coeffs.iter().skip(1).all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn decomposition_error_order() {
        let u = benchmark_solution().u;
        let k = 3;
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                let mesh = uniform_mesh(n, n).unwrap();
                let e = (3 * n / 8, n / 2);
                let b = mdecompose_element(&|x, y| u(x, y), &mesh, e, k + 2).unwrap();
                let mut m: f64 = 0.0;
                for j in 0..5 {
                    for i in 0..5 {
                        let (xr, yr) = (-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64);
                        let (x, y) = mesh.map_to_element(e, xr, yr).unwrap();
                        m = m.max((b.value_ref(xr, yr) - u(x, y)).abs());
                    }
                }
                m
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > k as f64 + 3.0 - 0.4, "{errs:?}");
        }
    }

    #[test]
    fn superclose_of_member_is_exact() {
        let mesh = uniform_mesh(3, 3).unwrap();
        let st = preset("FVE-3-3").unwrap();
        // (x(1-x) y(1-y)) is in Q^2, below every truncation
        let u = |x: f64, y: f64| x * (1.0 - x) * y * (1.0 - y);
        for mode in [Mode::Super, Mode::Ultra] {
            let (f, defect) = superclose_from_fn(&u, &mesh, &st, mode).unwrap();
            assert!(defect < 1e-14);
            for g in 0..f.dofs().node_count() {
                let (x, y) = f.node_coords(g);
                assert!((f.coefficients()[g] - u(x, y)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn superclose_is_continuous() {
        let u = benchmark_solution().u;
        let g = |x: f64, y: f64| u(x, y);
        let mesh = perturbed_mesh(6, 6, 0.25, 9).unwrap();
        for name in ["FVE-3-3", "FVE-4-4", "FVE-3-2"] {
            let st = preset(name).unwrap();
            for mode in [Mode::Super, Mode::Ultra] {
                let (_, defect) = superclose_from_fn(&g, &mesh, &st, mode).unwrap();
                assert!(defect < 1e-12, "{name} {mode:?}: {defect}");
            }
        }
    }

    #[test]
    fn superclose_gaussian_is_truncation() {
        let u = benchmark_solution().u;
        let g = |x: f64, y: f64| u(x, y);
        let mesh = uniform_mesh(4, 4).unwrap();
        let st = DualStrategy::isotropic(gaussian_duality(3).unwrap());
        let (f, _) = superclose_from_fn(&g, &mesh, &st, Mode::Super).unwrap();
        let e = (1, 2);
        let b = mdecompose_element(&g, &mesh, e, 4).unwrap();
        let nodes = gauss_lobatto_nodes(3);
        let mut trunc = b.clone();
        for t in 0..5 {
            for s in 0..5 {
                if s > 3 || t > 3 || s + t > 4 {
                    trunc.coeffs[s + t * 5] = 0.0;
                }
            }
        }
        let (xr, yr) = (nodes[1], nodes[2]);
        assert!((f.value_ref(e, xr, yr) - trunc.value_ref(xr, yr)).abs() < 1e-13);
    }
}
