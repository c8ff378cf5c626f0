//! Coefficient fields and manufactured problems for
//! `-div(D grad u) + Q . grad u + r u = f` on the unit square with `u = 0` on
//! the boundary.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{FveError, Result};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_, _| c)
}

fn zero() -> ScalarFn {
    constant(0.0)
}

/// Diffusion tensor, convection vector and reaction, with the first partials
/// the source term needs.
#[derive(Clone)]
pub struct CoefficientField {
    pub d11: ScalarFn,
    pub d12: ScalarFn,
    pub d22: ScalarFn,
    pub d11_x: ScalarFn,
    pub d12_x: ScalarFn,
    pub d12_y: ScalarFn,
    pub d22_y: ScalarFn,
    pub q1: ScalarFn,
    pub q2: ScalarFn,
    pub q1_x: ScalarFn,
    pub q2_y: ScalarFn,
    pub r: ScalarFn,
    /// `d12 == 0` identically.
    pub diagonal: bool,
    /// `Q == 0` identically.
    pub convection_free: bool,
}

impl CoefficientField {
    /// Constant diffusion tensor, no convection, no reaction.
    pub fn constant_diffusion(d11: f64, d12: f64, d22: f64) -> Self {
        CoefficientField {
            d11: constant(d11),
            d12: constant(d12),
            d22: constant(d22),
            d11_x: zero(),
            d12_x: zero(),
            d12_y: zero(),
            d22_y: zero(),
            q1: zero(),
            q2: zero(),
            q1_x: zero(),
            q2_y: zero(),
            r: zero(),
            diagonal: d12 == 0.0,
            convection_free: true,
        }
    }

    pub fn laplacian() -> Self {
        Self::constant_diffusion(1.0, 0.0, 1.0)
    }

    /// `r - (dq1/dx + dq2/dy) / 2` at a point.
    pub fn coercivity(&self, x: f64, y: f64) -> f64 {
        (self.r)(x, y) - 0.5 * ((self.q1_x)(x, y) + (self.q2_y)(x, y))
    }

    /// Samples positive definiteness and coercivity on a Halton point set.
    pub fn sample_bounds(&self, samples: usize) -> CoefficientBounds {
        let mut b = CoefficientBounds {
            min_d11: f64::INFINITY,
            min_det: f64::INFINITY,
            kappa: f64::INFINITY,
        };
        for n in 1..=samples {
            let x = halton(n, 2);
            let y = halton(n, 3);
            let d11 = (self.d11)(x, y);
            let d12 = (self.d12)(x, y);
            let d22 = (self.d22)(x, y);
            b.min_d11 = b.min_d11.min(d11);
            b.min_det = b.min_det.min(d11 * d22 - d12 * d12);
            b.kappa = b.kappa.min(self.coercivity(x, y));
        }
        b
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("diagonal", &self.diagonal)
            .field("convection_free", &self.convection_free)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub min_d11: f64,
    pub min_det: f64,
    /// Sampled lower bound of `r - div(Q)/2`.
    pub kappa: f64,
}

fn halton(mut n: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while n > 0 {
        f /= base as f64;
        r += f * (n % base) as f64;
        n /= base;
    }
    r
}

/// Exact solution with the derivatives used by the source term and the norms.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub u_x: ScalarFn,
    pub u_y: ScalarFn,
    pub u_xx: ScalarFn,
    pub u_xy: ScalarFn,
    pub u_yy: ScalarFn,
}

#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: String,
    pub coefficients: CoefficientField,
    pub exact: ExactSolution,
    pub f: ScalarFn,
}

impl fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("name", &self.name)
            .field("coefficients", &self.coefficients)
            .finish_non_exhaustive()
    }
}

impl ManufacturedProblem {
    /// Source term recomposed from the coefficient partials and the exact
    /// solution's derivatives.
    pub fn composed_source(&self, x: f64, y: f64) -> f64 {
        let c = &self.coefficients;
        let e = &self.exact;
        let (ux, uy) = ((e.u_x)(x, y), (e.u_y)(x, y));
        let (uxx, uxy, uyy) = ((e.u_xx)(x, y), (e.u_xy)(x, y), (e.u_yy)(x, y));
        let flux_x_dx = (c.d11_x)(x, y) * ux + (c.d11)(x, y) * uxx + (c.d12_x)(x, y) * uy + (c.d12)(x, y) * uxy;
        let flux_y_dy = (c.d12_y)(x, y) * ux + (c.d12)(x, y) * uxy + (c.d22_y)(x, y) * uy + (c.d22)(x, y) * uyy;
        -flux_x_dx - flux_y_dy + (c.q1)(x, y) * ux + (c.q2)(x, y) * uy + (c.r)(x, y) * (e.u)(x, y)
    }

    /// Max `|f - composed_source|` over a Halton sample.
    pub fn source_consistency(&self, samples: usize) -> f64 {
        (1..=samples)
            .map(|n| {
                let (x, y) = (halton(n, 2), halton(n, 3));
                ((self.f)(x, y) - self.composed_source(x, y)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max `|u|` over equispaced points on the four edges.
    pub fn boundary_max(&self, per_edge: usize) -> f64 {
        let mut m: f64 = 0.0;
        for n in 0..=per_edge {
            let t = n as f64 / per_edge as f64;
            for (x, y) in [(t, 0.0), (t, 1.0), (0.0, t), (1.0, t)] {
                m = m.max((self.exact.u)(x, y).abs());
            }
        }
        m
    }
}

/// `u = sin(pi x) sin(2 pi y) exp(x - 0.5 + y^2)` and its derivatives.
pub fn benchmark_solution() -> ExactSolution {
    fn parts(x: f64, y: f64) -> (f64, f64, f64, f64, f64) {
        let (s, c) = (PI * x).sin_cos();
        let (t, w) = (2.0 * PI * y).sin_cos();
        let e = (x - 0.5 + y * y).exp();
        (s, c, t, w, e)
    }
    ExactSolution {
        u: Arc::new(|x, y| {
            let (s, _, t, _, e) = parts(x, y);
            s * t * e
        }),
        u_x: Arc::new(|x, y| {
            let (s, c, t, _, e) = parts(x, y);
            (PI * c + s) * t * e
        }),
        u_y: Arc::new(|x, y| {
            let (s, _, t, w, e) = parts(x, y);
            s * e * (2.0 * PI * w + 2.0 * y * t)
        }),
        u_xx: Arc::new(|x, y| {
            let (s, c, t, _, e) = parts(x, y);
            ((1.0 - PI * PI) * s + 2.0 * PI * c) * t * e
        }),
        u_xy: Arc::new(|x, y| {
            let (s, c, t, w, e) = parts(x, y);
            (PI * c + s) * e * (2.0 * PI * w + 2.0 * y * t)
        }),
        u_yy: Arc::new(|x, y| {
            let (s, _, t, w, e) = parts(x, y);
            s * e * (8.0 * PI * y * w + (4.0 * y * y + 2.0 - 4.0 * PI * PI) * t)
        }),
    }
}

/// Pure unit diffusion.
pub fn bvp_d() -> ManufacturedProblem {
    let exact = benchmark_solution();
    let (uxx, uyy) = (exact.u_xx.clone(), exact.u_yy.clone());
    ManufacturedProblem {
        name: "BVP-D".into(),
        coefficients: CoefficientField::laplacian(),
        exact,
        f: Arc::new(move |x, y| -uxx(x, y) - uyy(x, y)),
    }
}

fn dr_coefficients() -> CoefficientField {
    CoefficientField {
        d11: Arc::new(|x: f64, y| y * x.exp() + 1.0),
        d12: zero(),
        d22: Arc::new(|x, y: f64| x * y.exp() + 1.0),
        d11_x: Arc::new(|x: f64, y| y * x.exp()),
        d12_x: zero(),
        d12_y: zero(),
        d22_y: Arc::new(|x, y: f64| x * y.exp()),
        q1: zero(),
        q2: zero(),
        q1_x: zero(),
        q2_y: zero(),
        r: Arc::new(|x, y| (x + 1.0) * (y + 1.0)),
        diagonal: true,
        convection_free: true,
    }
}

/// Diagonal variable diffusion with reaction.
pub fn bvp_dr() -> ManufacturedProblem {
    let exact = benchmark_solution();
    let e = exact.clone();
    let f = Arc::new(move |x: f64, y: f64| {
        let (ex, ey) = (x.exp(), y.exp());
        -(y * ex * (e.u_x)(x, y) + (y * ex + 1.0) * (e.u_xx)(x, y))
            - (x * ey * (e.u_y)(x, y) + (x * ey + 1.0) * (e.u_yy)(x, y))
            + (x + 1.0) * (y + 1.0) * (e.u)(x, y)
    });
    ManufacturedProblem {
        name: "BVP-DR".into(),
        coefficients: dr_coefficients(),
        exact,
        f,
    }
}

/// Full tensor diffusion with convection and reaction.
pub fn bvp_dqr() -> ManufacturedProblem {
    let exact = benchmark_solution();
    let mut c = dr_coefficients();
    c.d12 = Arc::new(|x, y| x * y);
    c.d12_x = Arc::new(|_, y| y);
    c.d12_y = Arc::new(|x, _| x);
    c.q1 = Arc::new(|x: f64, _| x.cos());
    c.q2 = Arc::new(|_, y: f64| y.cos());
    c.q1_x = Arc::new(|x: f64, _| -x.sin());
    c.q2_y = Arc::new(|_, y: f64| -y.sin());
    c.diagonal = false;
    c.convection_free = false;
    let e = exact.clone();
    let f = Arc::new(move |x: f64, y: f64| {
        let (ex, ey) = (x.exp(), y.exp());
        let (ux, uy, uxy) = ((e.u_x)(x, y), (e.u_y)(x, y), (e.u_xy)(x, y));
        -((y * ex + 1.0) * (e.u_xx)(x, y) + (x * ey + 1.0) * (e.u_yy)(x, y) + 2.0 * x * y * uxy)
            - (y * ex + x) * ux
            - (x * ey + y) * uy
            + x.cos() * ux
            + y.cos() * uy
            + (x + 1.0) * (y + 1.0) * (e.u)(x, y)
    });
    ManufacturedProblem {
        name: "BVP-DQR".into(),
        coefficients: c,
        exact,
        f,
    }
}

/// Polynomial patch-test problem `u = p(x) p(y)`, `p(t) = t (1 - t)^{k-1}`,
/// which lies in `Q^k` and vanishes on the boundary.
pub fn polynomial_problem(k: usize, d11: f64, d12: f64, d22: f64) -> Result<ManufacturedProblem> {
    if k < 2 {
        return Err(FveError::InvalidArgument(
            "no nonzero Q^1 function vanishes on the boundary; patch test needs k >= 2".into(),
        ));
    }
    let m = (k - 1) as i32;
    let mf = m as f64;
    let p = move |t: f64| t * (1.0 - t).powi(m);
    let dp = move |t: f64| (1.0 - t).powi(m) - mf * t * (1.0 - t).powi(m - 1);
    let ddp = move |t: f64| {
        let second = if m >= 2 {
            mf * (mf - 1.0) * t * (1.0 - t).powi(m - 2)
        } else {
            0.0
        };
        -2.0 * mf * (1.0 - t).powi(m - 1) + second
    };
    let exact = ExactSolution {
        u: Arc::new(move |x, y| p(x) * p(y)),
        u_x: Arc::new(move |x, y| dp(x) * p(y)),
        u_y: Arc::new(move |x, y| p(x) * dp(y)),
        u_xx: Arc::new(move |x, y| ddp(x) * p(y)),
        u_xy: Arc::new(move |x, y| dp(x) * dp(y)),
        u_yy: Arc::new(move |x, y| p(x) * ddp(y)),
    };
    let f = Arc::new(move |x, y| {
        -(d11 * ddp(x) * p(y) + 2.0 * d12 * dp(x) * dp(y) + d22 * p(x) * ddp(y))
    });
    Ok(ManufacturedProblem {
        name: format!("POLY-{k}"),
        coefficients: CoefficientField::constant_diffusion(d11, d12, d22),
        exact,
        f,
    })
}

pub const PROBLEM_NAMES: &[&str] = &["BVP-D", "BVP-DR", "BVP-DQR"];

pub fn problem_by_name(name: &str) -> Result<ManufacturedProblem> {
    match name.to_ascii_uppercase().as_str() {
        "BVP-D" => Ok(bvp_d()),
        "BVP-DR" => Ok(bvp_dr()),
        "BVP-DQR" => Ok(bvp_dqr()),
        _ => Err(FveError::UnknownProblem(name.to_string())),
    }
}
