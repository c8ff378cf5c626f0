//! Discrete super/ultraconvergence norms, global error norms and observed
//! convergence orders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteField;
use crate::error::{FveError, Result};
use crate::meshgen::{ElementIndex, RectMesh};
use crate::pdemodel::ExactSolution;
use crate::refbasis::gauss_rule;

pub const H1X_SUPER: &str = "h1x-super";
pub const L2_SUPER: &str = "l2-super";
pub const H1X_ULTRA: &str = "h1x-ultra";
pub const L2: &str = "l2";
pub const H1_SEMI: &str = "h1";

pub const NORM_NAMES: &[&str] = &[H1X_SUPER, L2_SUPER, H1X_ULTRA, L2, H1_SEMI];

/// A scalar quantity on the mesh evaluated from a given element, at a
/// reference point `(xr, yr)` of that element.
pub type ElementFn<'a> = dyn Fn(ElementIndex, f64, f64) -> f64 + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub dofs: usize,
    pub norms: BTreeMap<String, f64>,
    pub wall_time: f64,
}

/// `u - u_h` with its gradient, evaluated element by element.
pub struct FieldError<'a> {
    pub field: &'a DiscreteField,
    pub exact: &'a ExactSolution,
}

impl FieldError<'_> {
    pub fn value(&self, e: ElementIndex, xr: f64, yr: f64) -> f64 {
        let (x, y) = self.field.mesh().map_to_element(e, xr, yr).expect("element in mesh");
        (self.exact.u)(x, y) - self.field.value_ref(e, xr, yr)
    }

    pub fn dx(&self, e: ElementIndex, xr: f64, yr: f64) -> f64 {
        let (x, y) = self.field.mesh().map_to_element(e, xr, yr).expect("element in mesh");
        (self.exact.u_x)(x, y) - self.field.gradient_ref(e, xr, yr).0
    }

    pub fn dy(&self, e: ElementIndex, xr: f64, yr: f64) -> f64 {
        let (x, y) = self.field.mesh().map_to_element(e, xr, yr).expect("element in mesh");
        (self.exact.u_y)(x, y) - self.field.gradient_ref(e, xr, yr).1
    }
}

/// Difference of two discrete fields on the same space.
pub struct FieldDifference<'a> {
    pub a: &'a DiscreteField,
    pub b: &'a DiscreteField,
}

impl FieldDifference<'_> {
    pub fn value(&self, e: ElementIndex, xr: f64, yr: f64) -> f64 {
        self.a.value_ref(e, xr, yr) - self.b.value_ref(e, xr, yr)
    }

    pub fn gradient(&self, e: ElementIndex, xr: f64, yr: f64) -> (f64, f64) {
        let ga = self.a.gradient_ref(e, xr, yr);
        let gb = self.b.gradient_ref(e, xr, yr);
        (ga.0 - gb.0, ga.1 - gb.1)
    }
}

/// `( sum_K h_x ∫ sum_s (de/dx(alpha_s, y))^2 dy )^{1/2}` with a `quad_points`-point
/// Gauss rule along each line.
pub fn norm_h1x_super(dx: &ElementFn, mesh: &RectMesh, alpha_x: &[f64], quad_points: usize) -> Result<f64> {
    let rule = gauss_rule(quad_points)?;
    let mut total = 0.0;
    for e in mesh.elements() {
        let (hx, hy) = (mesh.hx(e.0), mesh.hy(e.1));
        let mut line = 0.0;
        for &a in alpha_x {
            for (&yr, &w) in rule.nodes.iter().zip(&rule.weights) {
                let v = dx(e, a, yr);
                line += w * v * v;
            }
        }
        total += hx * 0.5 * hy * line;
    }
    Ok(total.sqrt())
}

/// `( sum_K |K|/(k+1)^2 sum_{P^S_x x P^S_y} e^2 )^{1/2}`.
pub fn norm_l2_super(value: &ElementFn, mesh: &RectMesh, ps_x: &[f64], ps_y: &[f64]) -> f64 {
    let count = (ps_x.len() * ps_y.len()) as f64;
    let mut total = 0.0;
    for e in mesh.elements() {
        let mut s = 0.0;
        for &yr in ps_y {
            for &xr in ps_x {
                let v = value(e, xr, yr);
                s += v * v;
            }
        }
        total += mesh.area(e) / count * s;
    }
    total.sqrt()
}

/// `( sum_K |K|/(k(k+1)) sum_{alpha_x x P^S_y} (de/dx)^2 )^{1/2}`.
pub fn norm_h1x_ultra(dx: &ElementFn, mesh: &RectMesh, alpha_x: &[f64], ps_y: &[f64]) -> f64 {
    let count = (alpha_x.len() * ps_y.len()) as f64;
    let mut total = 0.0;
    for e in mesh.elements() {
        let mut s = 0.0;
        for &yr in ps_y {
            for &xr in alpha_x {
                let v = dx(e, xr, yr);
                s += v * v;
            }
        }
        total += mesh.area(e) / count * s;
    }
    total.sqrt()
}

/// `(||e||_{L^2}, |e|_{H^1})` by tensor Gauss quadrature on every element.
pub fn global_norms(
    value: &ElementFn,
    gradient: &(dyn Fn(ElementIndex, f64, f64) -> (f64, f64) + Sync),
    mesh: &RectMesh,
    quad_points: usize,
) -> Result<(f64, f64)> {
    let rule = gauss_rule(quad_points)?;
    let (mut l2, mut h1) = (0.0, 0.0);
    for e in mesh.elements() {
        let jac = mesh.jacobian(e);
        for (&yr, &wy) in rule.nodes.iter().zip(&rule.weights) {
            for (&xr, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let w = wx * wy * jac;
                let v = value(e, xr, yr);
                let (gx, gy) = gradient(e, xr, yr);
                l2 += w * v * v;
                h1 += w * (gx * gx + gy * gy);
            }
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Observed order between two rows.
pub fn order_between(e1: f64, h1: f64, e2: f64, h2: f64, norm: &str) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(FveError::ZeroError(norm.to_string()));
    }
    Ok((e1 / e2).ln() / (h1 / h2).ln())
}

/// Orders per norm; entry `i` relates rows `i - 1` and `i`, the first entry is
/// always `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderTable {
    pub orders: BTreeMap<String, Vec<Option<f64>>>,
    /// Norms that underflowed somewhere; their orders there are omitted.
    pub zero_norms: Vec<String>,
}

impl OrderTable {
    pub fn get(&self, norm: &str) -> Option<&[Option<f64>]> {
        self.orders.get(norm).map(Vec::as_slice)
    }

    /// Order at the finest pair.
    pub fn last(&self, norm: &str) -> Option<f64> {
        self.orders.get(norm).and_then(|v| v.last().copied().flatten())
    }
}

/// Orders between consecutive reports, which must be sorted by decreasing `h`.
pub fn estimate_orders(reports: &[ErrorReport]) -> Result<OrderTable> {
    if reports.len() < 2 {
        return Err(FveError::InvalidArgument(
            "at least two meshes are needed for orders".into(),
        ));
    }
    if reports.windows(2).any(|w| !(w[1].h < w[0].h)) {
        return Err(FveError::InvalidArgument(
            "reports must have distinct mesh sizes in decreasing order".into(),
        ));
    }
    let mut table = OrderTable::default();
    for name in reports[0].norms.keys() {
        let mut col = vec![None];
        for w in reports.windows(2) {
            let (Some(&e1), Some(&e2)) = (w[0].norms.get(name), w[1].norms.get(name)) else {
                col.push(None);
                continue;
            };
            match order_between(e1, w[0].h, e2, w[1].h, name) {
                Ok(o) => col.push(Some(o)),
                Err(_) => {
                    if !table.zero_norms.contains(name) {
                        table.zero_norms.push(name.clone());
                    }
                    col.push(None);
                }
            }
        }
        table.orders.insert(name.clone(), col);
    }
    Ok(table)
}
