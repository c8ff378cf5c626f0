//! Element-wise assembly of the finite volume element system and of the
//! comparison Galerkin system, Dirichlet elimination, the linear solve and
//! the discrete trial-space field.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dualscheme::DualStrategy;
use crate::error::{FveError, Result};
use crate::meshgen::{element_dual_geometry, DofMap, ElementIndex, RectMesh};
use crate::pdemodel::ManufacturedProblem;
use crate::refbasis::{gauss_rule, LagrangeBasis1D, QuadratureRule};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;
pub const DEFAULT_REFINE_STEPS: usize = 3;

/// Square sparse system in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub dimension: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed in insertion order on `finish`.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    dimension: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(dimension: usize) -> Self {
        TripletBuilder {
            dimension,
            entries: Vec::new(),
            rhs: vec![0.0; dimension],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.dimension && col < self.dimension);
        self.entries.push((row, col, value));
    }

    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] += value;
    }

    pub fn finish(mut self) -> SparseSystem {
        // stable sort keeps insertion order among duplicates
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let n = self.dimension;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSystem {
            dimension: n,
            row_ptr,
            col_idx,
            values,
            rhs: self.rhs,
        }
    }
}

impl SparseSystem {
    pub fn identity(rhs: Vec<f64>) -> Self {
        let n = rhs.len();
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 1.0);
            b.add_rhs(i, rhs[i]);
        }
        b.finish()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dimension)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `||A x - b|| / ||b||` (absolute residual when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let num = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = norm2(&self.rhs);
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dimension {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lower and upper bandwidth.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.dimension {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// MatrixMarket coordinate text of the matrix.
    pub fn matrix_market(&self) -> String {
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.dimension, self.dimension, self.nnz());
        for i in 0..self.dimension {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.matrix_market().as_bytes())?;
        Ok(())
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dense element contribution: matrix indexed `[row * n + col]` over local
/// nodes `p + q (k + 1)`, plus the load vector.
#[derive(Debug, Clone)]
pub struct ElementSystem {
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

struct RefTables {
    basis: LagrangeBasis1D,
    rule: QuadratureRule,
}

impl RefTables {
    fn new(k: usize) -> Result<Self> {
        Ok(RefTables {
            basis: LagrangeBasis1D::lobatto(k),
            rule: gauss_rule(2 * k + 3)?,
        })
    }
}

fn element_box(mesh: &RectMesh, (i, j): ElementIndex) -> (f64, f64, f64, f64) {
    let xc = mesh.x_coords();
    let yc = mesh.y_coords();
    (xc[i], xc[i + 1] - xc[i], yc[j], yc[j + 1] - yc[j])
}

fn to_ref(x0: f64, h: f64, x: f64) -> f64 {
    2.0 * (x - x0) / h - 1.0
}

/// Finite volume element contribution of one element.
pub fn fve_element(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
    e: ElementIndex,
) -> Result<ElementSystem> {
    let tables = RefTables::new(strategy.k())?;
    fve_element_with(mesh, strategy, problem, e, &tables)
}

fn fve_element_with(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
    e: ElementIndex,
    tables: &RefTables,
) -> Result<ElementSystem> {
    let k = strategy.k();
    let n1 = k + 1;
    let nl = n1 * n1;
    let geo = element_dual_geometry(mesh, strategy, e)?;
    let (x0, hx, y0, hy) = element_box(mesh, e);
    let c = &problem.coefficients;
    let basis = &tables.basis;
    let rule = &tables.rule;
    let mut mat = vec![0.0; nl * nl];
    let mut rhs = vec![0.0; nl];
    let mut flux = vec![0.0; nl];

    for seg in geo.segments() {
        flux.iter_mut().for_each(|v| *v = 0.0);
        let (pts, wts) = rule.mapped(seg.from, seg.to);
        if seg.vertical {
            let xr = to_ref(x0, hx, seg.at);
            let lx = basis.values(xr);
            let dlx: Vec<f64> = basis.derivatives(xr).iter().map(|d| d * 2.0 / hx).collect();
            for (&y, &w) in pts.iter().zip(&wts) {
                let yr = to_ref(y0, hy, y);
                let ly = basis.values(yr);
                let dly: Vec<f64> = basis.derivatives(yr).iter().map(|d| d * 2.0 / hy).collect();
                let d11 = (c.d11)(seg.at, y) * w;
                let d12 = if c.diagonal { 0.0 } else { (c.d12)(seg.at, y) * w };
                for q in 0..n1 {
                    for p in 0..n1 {
                        flux[p + q * n1] += d11 * dlx[p] * ly[q] + d12 * lx[p] * dly[q];
                    }
                }
            }
        } else {
            let yr = to_ref(y0, hy, seg.at);
            let ly = basis.values(yr);
            let dly: Vec<f64> = basis.derivatives(yr).iter().map(|d| d * 2.0 / hy).collect();
            for (&x, &w) in pts.iter().zip(&wts) {
                let xr = to_ref(x0, hx, x);
                let lx = basis.values(xr);
                let dlx: Vec<f64> = basis.derivatives(xr).iter().map(|d| d * 2.0 / hx).collect();
                let d22 = (c.d22)(x, seg.at) * w;
                let d12 = if c.diagonal { 0.0 } else { (c.d12)(x, seg.at) * w };
                for q in 0..n1 {
                    for p in 0..n1 {
                        flux[p + q * n1] += d12 * dlx[p] * ly[q] + d22 * lx[p] * dly[q];
                    }
                }
            }
        }
        // -(D grad u).n out of `minus` is -F, out of `plus` is +F
        let rm = seg.minus.0 + seg.minus.1 * n1;
        let rp = seg.plus.0 + seg.plus.1 * n1;
        for j in 0..nl {
            mat[rm * nl + j] -= flux[j];
            mat[rp * nl + j] += flux[j];
        }
    }

    for t in 0..n1 {
        for s in 0..n1 {
            let row = s + t * n1;
            let (sx0, sx1, sy0, sy1) = geo.sub_cell(s, t);
            let (xs, wx) = rule.mapped(sx0, sx1);
            let (ys, wy) = rule.mapped(sy0, sy1);
            for (&y, &wyv) in ys.iter().zip(&wy) {
                let yr = to_ref(y0, hy, y);
                let ly = basis.values(yr);
                let dly = basis.derivatives(yr);
                for (&x, &wxv) in xs.iter().zip(&wx) {
                    let w = wxv * wyv;
                    rhs[row] += w * (problem.f)(x, y);
                    let xr = to_ref(x0, hx, x);
                    let lx = basis.values(xr);
                    let rr = (c.r)(x, y) * w;
                    let (q1, q2) = if c.convection_free {
                        (0.0, 0.0)
                    } else {
                        ((c.q1)(x, y) * w * 2.0 / hx, (c.q2)(x, y) * w * 2.0 / hy)
                    };
                    let dlx = if c.convection_free { Vec::new() } else { basis.derivatives(xr) };
                    let m = &mut mat[row * nl..(row + 1) * nl];
                    for q in 0..n1 {
                        for p in 0..n1 {
                            let mut v = rr * lx[p] * ly[q];
                            if !c.convection_free {
                                v += q1 * dlx[p] * ly[q] + q2 * lx[p] * dly[q];
                            }
                            m[p + q * n1] += v;
                        }
                    }
                }
            }
        }
    }
    Ok(ElementSystem { matrix: mat, rhs })
}

/// Galerkin contribution of one element.
pub fn fem_element(
    mesh: &RectMesh,
    k: usize,
    problem: &ManufacturedProblem,
    e: ElementIndex,
) -> Result<ElementSystem> {
    let tables = RefTables::new(k)?;
    Ok(fem_element_with(mesh, k, problem, e, &tables))
}

fn fem_element_with(
    mesh: &RectMesh,
    k: usize,
    problem: &ManufacturedProblem,
    e: ElementIndex,
    tables: &RefTables,
) -> ElementSystem {
    let n1 = k + 1;
    let nl = n1 * n1;
    let (x0, hx, y0, hy) = element_box(mesh, e);
    let c = &problem.coefficients;
    let basis = &tables.basis;
    let rule = &tables.rule;
    let mut mat = vec![0.0; nl * nl];
    let mut rhs = vec![0.0; nl];
    let mut phi = vec![0.0; nl];
    let mut gx = vec![0.0; nl];
    let mut gy = vec![0.0; nl];
    let jac = 0.25 * hx * hy;
    for (&yr, &wy) in rule.nodes.iter().zip(&rule.weights) {
        let ly = basis.values(yr);
        let dly = basis.derivatives(yr);
        for (&xr, &wx) in rule.nodes.iter().zip(&rule.weights) {
            let lx = basis.values(xr);
            let dlx = basis.derivatives(xr);
            let x = x0 + 0.5 * hx * (xr + 1.0);
            let y = y0 + 0.5 * hy * (yr + 1.0);
            let w = wx * wy * jac;
            for q in 0..n1 {
                for p in 0..n1 {
                    let l = p + q * n1;
                    phi[l] = lx[p] * ly[q];
                    gx[l] = dlx[p] * ly[q] * 2.0 / hx;
                    gy[l] = lx[p] * dly[q] * 2.0 / hy;
                }
            }
            let d11 = (c.d11)(x, y);
            let d12 = if c.diagonal { 0.0 } else { (c.d12)(x, y) };
            let d22 = (c.d22)(x, y);
            let (q1, q2) = if c.convection_free {
                (0.0, 0.0)
            } else {
                ((c.q1)(x, y), (c.q2)(x, y))
            };
            let rr = (c.r)(x, y);
            let fv = (problem.f)(x, y);
            for i in 0..nl {
                rhs[i] += w * fv * phi[i];
                let row = &mut mat[i * nl..(i + 1) * nl];
                for j in 0..nl {
                    let flux_x = d11 * gx[j] + d12 * gy[j];
                    let flux_y = d12 * gx[j] + d22 * gy[j];
                    let lower = q1 * gx[j] + q2 * gy[j] + rr * phi[j];
                    row[j] += w * (flux_x * gx[i] + flux_y * gy[i] + lower * phi[i]);
                }
            }
        }
    }
    ElementSystem { matrix: mat, rhs }
}

fn scatter(
    dofs: &DofMap,
    mesh: &RectMesh,
    locals: Vec<ElementSystem>,
    reduce: bool,
) -> SparseSystem {
    let dim = if reduce {
        dofs.interior_count()
    } else {
        dofs.node_count()
    };
    let mut b = TripletBuilder::new(dim);
    let index = |g: usize| -> Option<usize> {
        if reduce {
            dofs.interior(g)
        } else {
            Some(g)
        }
    };
    for (e, local) in mesh.elements().zip(locals) {
        let nodes = dofs.element_nodes(e);
        let nl = nodes.len();
        for (a, &ga) in nodes.iter().enumerate() {
            let Some(row) = index(ga) else { continue };
            b.add_rhs(row, local.rhs[a]);
            for (bb, &gb) in nodes.iter().enumerate() {
                if let Some(col) = index(gb) {
                    b.add(row, col, local.matrix[a * nl + bb]);
                }
            }
        }
    }
    b.finish()
}

fn fve_locals(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
) -> Result<Vec<ElementSystem>> {
    let tables = RefTables::new(strategy.k())?;
    let elements: Vec<ElementIndex> = mesh.elements().collect();
    elements
        .par_iter()
        .map(|&e| fve_element_with(mesh, strategy, problem, e, &tables))
        .collect()
}

fn fem_locals(mesh: &RectMesh, k: usize, problem: &ManufacturedProblem) -> Result<Vec<ElementSystem>> {
    let tables = RefTables::new(k)?;
    let elements: Vec<ElementIndex> = mesh.elements().collect();
    Ok(elements
        .par_iter()
        .map(|&e| fem_element_with(mesh, k, problem, e, &tables))
        .collect())
}

/// Finite volume element system on the interior nodes.
pub fn assemble_fve(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
) -> Result<SparseSystem> {
    let dofs = DofMap::new(mesh, strategy.k())?;
    Ok(scatter(&dofs, mesh, fve_locals(mesh, strategy, problem)?, true))
}

/// Finite volume element system over all nodes, before boundary elimination.
pub fn assemble_fve_unreduced(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
) -> Result<SparseSystem> {
    let dofs = DofMap::new(mesh, strategy.k())?;
    Ok(scatter(&dofs, mesh, fve_locals(mesh, strategy, problem)?, false))
}

pub fn assemble_fem(mesh: &RectMesh, k: usize, problem: &ManufacturedProblem) -> Result<SparseSystem> {
    let dofs = DofMap::new(mesh, k)?;
    Ok(scatter(&dofs, mesh, fem_locals(mesh, k, problem)?, true))
}

pub fn assemble_fem_unreduced(
    mesh: &RectMesh,
    k: usize,
    problem: &ManufacturedProblem,
) -> Result<SparseSystem> {
    let dofs = DofMap::new(mesh, k)?;
    Ok(scatter(&dofs, mesh, fem_locals(mesh, k, problem)?, false))
}

/// Banded LU factorization with partial pivoting.
struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // row i holds columns i - kl ..= i + ku + kl
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    fn idx(&self, i: usize, c: usize) -> usize {
        i * self.width + (c + self.kl - i)
    }

    fn factor(sys: &SparseSystem) -> std::result::Result<Self, String> {
        let n = sys.dimension;
        let (kl, ku) = sys.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            width,
            data: vec![0.0; n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in sys.row(i) {
                let p = lu.idx(i, j);
                lu.data[p] = v;
            }
        }
        let scale = sys.max_abs_entry();
        let tiny = scale * f64::EPSILON * n as f64;
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = lu.data[lu.idx(j, j)].abs();
            for r in j + 1..=last_row {
                let v = lu.data[lu.idx(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(format!("zero pivot in column {j}"));
            }
            lu.piv[j] = p;
            let last_col = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let a = lu.idx(j, c);
                    let b = lu.idx(p, c);
                    lu.data.swap(a, b);
                }
            }
            let pivot = lu.data[lu.idx(j, j)];
            for r in j + 1..=last_row {
                let rj = lu.idx(r, j);
                let l = lu.data[rj] / pivot;
                lu.data[rj] = l;
                if l != 0.0 {
                    let jrow = j * width + kl - j;
                    let rrow = r * width + kl - r;
                    for c in j + 1..=last_col {
                        lu.data[rrow + c] -= l * lu.data[jrow + c];
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            if xj != 0.0 {
                for r in j + 1..=(j + self.kl).min(n.saturating_sub(1)) {
                    x[r] -= self.data[self.idx(r, j)] * xj;
                }
            }
        }
        let ku_total = self.width - self.kl - 1;
        for i in (0..n).rev() {
            let mut s = x[i];
            let last = (i + ku_total).min(n - 1);
            let base = i * self.width + self.kl - i;
            for c in i + 1..=last {
                s -= self.data[base + c] * x[c];
            }
            x[i] = s / self.data[base + i];
        }
        x
    }
}

/// Solves `A x = b` to relative residual `tol` with a banded direct solver and
/// up to `max_iter` refinement sweeps.
pub fn solve(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = system.dimension;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = BandedLu::factor(system).map_err(|detail| FveError::SolverFailure {
        residual: f64::INFINITY,
        detail,
    })?;
    let mut x = lu.solve(&system.rhs);
    let mut res = system.relative_residual(&x);
    let mut it = 0;
    while !(res <= tol) && it < max_iter {
        let ax = system.matvec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let cres = system.relative_residual(&cand);
        if cres < res {
            x = cand;
            res = cres;
        }
        it += 1;
    }
    if !(res <= tol) || x.iter().any(|v| !v.is_finite()) {
        return Err(FveError::SolverFailure {
            residual: res,
            detail: format!("after {it} refinement sweeps on {n} unknowns"),
        });
    }
    Ok(x)
}

/// Continuous piecewise bi-k field on a rectangular mesh.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    mesh: RectMesh,
    dofs: DofMap,
    basis: LagrangeBasis1D,
    coeffs: Vec<f64>,
    strategy: Option<DualStrategy>,
}

impl DiscreteField {
    /// Field from nodal values over all nodes.
    pub fn from_nodal(mesh: &RectMesh, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        let dofs = DofMap::new(mesh, k)?;
        if coeffs.len() != dofs.node_count() {
            return Err(FveError::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                dofs.node_count(),
                coeffs.len()
            )));
        }
        Ok(DiscreteField {
            mesh: mesh.clone(),
            dofs,
            basis: LagrangeBasis1D::lobatto(k),
            coeffs,
            strategy: None,
        })
    }

    /// Field from interior values, boundary set to zero.
    pub fn from_interior(mesh: &RectMesh, k: usize, interior: &[f64]) -> Result<Self> {
        let dofs = DofMap::new(mesh, k)?;
        if interior.len() != dofs.interior_count() {
            return Err(FveError::InvalidArgument(format!(
                "expected {} interior values, got {}",
                dofs.interior_count(),
                interior.len()
            )));
        }
        let coeffs = (0..dofs.node_count())
            .map(|g| dofs.interior(g).map_or(0.0, |i| interior[i]))
            .collect();
        Self::from_nodal(mesh, k, coeffs)
    }

    pub fn with_strategy(mut self, strategy: DualStrategy) -> Self {
        self.strategy = Some(strategy);
        self
    }

    pub fn strategy(&self) -> Option<&DualStrategy> {
        self.strategy.as_ref()
    }

    pub fn mesh(&self) -> &RectMesh {
        &self.mesh
    }

    pub fn k(&self) -> usize {
        self.dofs.k
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interior_values(&self) -> Vec<f64> {
        (0..self.dofs.node_count())
            .filter(|&g| !self.dofs.is_boundary(g))
            .map(|g| self.coeffs[g])
            .collect()
    }

    /// Physical coordinates of global node `g`.
    pub fn node_coords(&self, g: usize) -> (f64, f64) {
        node_coords(&self.mesh, &self.basis, g)
    }

    pub fn element_coefficients(&self, e: ElementIndex) -> Vec<f64> {
        self.dofs.element_nodes(e).iter().map(|&g| self.coeffs[g]).collect()
    }

    /// Value at reference point `(xr, yr)` of element `e`.
    pub fn value_ref(&self, e: ElementIndex, xr: f64, yr: f64) -> f64 {
        let lx = self.basis.values(xr);
        let ly = self.basis.values(yr);
        let n1 = self.k() + 1;
        let mut s = 0.0;
        for q in 0..n1 {
            let mut row = 0.0;
            for p in 0..n1 {
                row += self.coeffs[self.dofs.global(e, p, q)] * lx[p];
            }
            s += row * ly[q];
        }
        s
    }

    /// Physical gradient at reference point `(xr, yr)` of element `e`.
    pub fn gradient_ref(&self, e: ElementIndex, xr: f64, yr: f64) -> (f64, f64) {
        let lx = self.basis.values(xr);
        let ly = self.basis.values(yr);
        let dlx = self.basis.derivatives(xr);
        let dly = self.basis.derivatives(yr);
        let n1 = self.k() + 1;
        let (mut gx, mut gy) = (0.0, 0.0);
        for q in 0..n1 {
            for p in 0..n1 {
                let c = self.coeffs[self.dofs.global(e, p, q)];
                gx += c * dlx[p] * ly[q];
                gy += c * lx[p] * dly[q];
            }
        }
        (2.0 * gx / self.mesh.hx(e.0), 2.0 * gy / self.mesh.hy(e.1))
    }

    pub fn evaluate_in(&self, e: ElementIndex, x: f64, y: f64) -> Result<f64> {
        let (xr, yr) = self.mesh.map_from_element(e, x, y)?;
        Ok(self.value_ref(e, xr, yr))
    }

    pub fn gradient_in(&self, e: ElementIndex, x: f64, y: f64) -> Result<(f64, f64)> {
        let (xr, yr) = self.mesh.map_from_element(e, x, y)?;
        Ok(self.gradient_ref(e, xr, yr))
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        let e = self.mesh.locate(x, y)?;
        self.evaluate_in(e, x, y)
    }

    pub fn evaluate_gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let e = self.mesh.locate(x, y)?;
        self.gradient_in(e, x, y)
    }

    /// Pointwise difference of two fields on the same mesh and order.
    pub fn minus(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if self.k() != other.k() || self.mesh != other.mesh {
            return Err(FveError::InvalidArgument(
                "fields live on different spaces".into(),
            ));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        let mut f = DiscreteField::from_nodal(&self.mesh, self.k(), coeffs)?;
        f.strategy = self.strategy.clone();
        Ok(f)
    }

    pub fn max_nodal_difference(&self, other: &DiscreteField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn node_coords(mesh: &RectMesh, basis: &LagrangeBasis1D, g: usize) -> (f64, f64) {
    let k = basis.order();
    let gx = k * mesh.nx() + 1;
    let (ii, jj) = (g % gx, g / gx);
    let coord = |c: &[f64], idx: usize| -> f64 {
        let cell = (idx / k).min(c.len() - 2);
        let p = idx - cell * k;
        let t = basis.nodes()[p];
        if p == 0 {
            c[cell]
        } else if p == k {
            c[cell + 1]
        } else {
            c[cell] + 0.5 * (c[cell + 1] - c[cell]) * (t + 1.0)
        }
    };
    (coord(mesh.x_coords(), ii), coord(mesh.y_coords(), jj))
}

/// Nodal interpolant of `f`; with `zero_boundary` the boundary nodes are set
/// to zero.
pub fn interpolate(
    mesh: &RectMesh,
    k: usize,
    f: impl Fn(f64, f64) -> f64,
    zero_boundary: bool,
) -> Result<DiscreteField> {
    let dofs = DofMap::new(mesh, k)?;
    let basis = LagrangeBasis1D::lobatto(k);
    let coeffs = (0..dofs.node_count())
        .map(|g| {
            if zero_boundary && dofs.is_boundary(g) {
                0.0
            } else {
                let (x, y) = node_coords(mesh, &basis, g);
                f(x, y)
            }
        })
        .collect();
    DiscreteField::from_nodal(mesh, k, coeffs)
}

/// Assembles and solves the finite volume element scheme.
pub fn solve_fve(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    problem: &ManufacturedProblem,
) -> Result<DiscreteField> {
    let sys = assemble_fve(mesh, strategy, problem)?;
    let x = solve(&sys, DEFAULT_SOLVE_TOL, DEFAULT_REFINE_STEPS)?;
    Ok(DiscreteField::from_interior(mesh, strategy.k(), &x)?.with_strategy(strategy.clone()))
}

/// Assembles and solves the Galerkin scheme.
pub fn solve_fem(mesh: &RectMesh, k: usize, problem: &ManufacturedProblem) -> Result<DiscreteField> {
    let sys = assemble_fem(mesh, k, problem)?;
    let x = solve(&sys, DEFAULT_SOLVE_TOL, DEFAULT_REFINE_STEPS)?;
    DiscreteField::from_interior(mesh, k, &x)
}
