//! Reference-element machinery on `[-1, 1]`: Legendre polynomials, M-functions,
//! Gauss rules and one-dimensional Lagrange bases.
//!
//! The M-functions are `M_0 = 1`, `M_1 = x` and, for `n >= 2`, the antiderivative
//! of `L_{n-1}` that vanishes at `-1`. They are evaluated through the identity
//! `M_n = (L_n - L_{n-2}) / (2n - 1)`, which avoids the factorials of the
//! Rodrigues-type definition.

use crate::error::{FveError, Result};

/// Returns `(L_n(x), L_n'(x))` using the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        // derivative recurrence: L'_{j+1} = L'_{j-1} + (2j+1) L_j
        let d2 = d0 + (2.0 * jf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Value of the Legendre polynomial `L_n(x)`.
pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_eval(n, x).0
}

/// Value of the M-function `M_i(x)`.
pub fn mfunction_eval(i: usize, x: f64) -> f64 {
    match i {
        0 => 1.0,
        1 => x,
        _ => (legendre(i, x) - legendre(i - 2, x)) / (2 * i - 1) as f64,
    }
}

/// Derivative `M_i'(x)`, equal to `L_{i-1}(x)` for `i >= 1`.
pub fn mfunction_deriv(i: usize, x: f64) -> f64 {
    if i == 0 {
        0.0
    } else {
        legendre(i - 1, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Nodes and weights mapped onto `[a, b]` (weights scaled by the Jacobian).
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let nodes = self.nodes.iter().map(|&x| mid + half * x).collect();
        let weights = self.weights.iter().map(|&w| half * w).collect();
        (nodes, weights)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Legendre rule with `n` points, exact for degree `2n - 1`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    if !(1..=20).contains(&n) {
        return Err(FveError::InvalidArgument(format!(
            "gauss rule needs 1..=20 points, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // roots are symmetric; find the nonnegative half and mirror
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(FveError::NonConvergence(format!(
                "gauss node {i} of {n} points"
            )));
        }
        let (_, dp) = legendre_eval(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        exactness_degree: 2 * n - 1,
    })
}

/// The `n + 1` Gauss-Lobatto points: `±1` and the roots of `L_n'`.
pub fn gauss_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 1, "lobatto set needs at least two points");
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    let nf = n as f64;
    for i in 1..n {
        // Chebyshev-Lobatto seed, Newton on L_n' using the Legendre ODE for L_n''
        let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
    }
    for i in 1..n {
        let j = n - i;
        if i < j {
            let m = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -m;
            nodes[j] = m;
        } else if i == j {
            nodes[i] = 0.0;
        }
    }
    nodes
}

/// One-dimensional Lagrange basis `{phi_0, ..., phi_k}` on a node set containing `±1`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis1D {
    nodes: Vec<f64>,
    denoms: Vec<f64>,
}

impl LagrangeBasis1D {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(FveError::InvalidArgument(
                "lagrange basis needs at least two nodes".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FveError::InvalidArgument(
                "lagrange nodes must be strictly increasing without duplicates".into(),
            ));
        }
        let first = nodes[0];
        let last = nodes[nodes.len() - 1];
        if (first + 1.0).abs() > 1e-14 || (last - 1.0).abs() > 1e-14 {
            return Err(FveError::InvalidArgument(
                "lagrange nodes must include the endpoints -1 and 1".into(),
            ));
        }
        let denoms = (0..nodes.len())
            .map(|i| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &xj)| nodes[i] - xj)
                    .product()
            })
            .collect();
        Ok(LagrangeBasis1D {
            nodes: nodes.to_vec(),
            denoms,
        })
    }

    /// Lobatto-node basis of order `k`.
    pub fn lobatto(k: usize) -> Self {
        Self::new(&gauss_lobatto_nodes(k)).expect("lobatto nodes are valid")
    }

    pub fn order(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `phi_i(x)`.
    pub fn value(&self, i: usize, x: f64) -> f64 {
        let num: f64 = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &xj)| x - xj)
            .product();
        num / self.denoms[i]
    }

    /// `phi_i'(x)`.
    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let n = self.nodes.len();
        let mut sum = 0.0;
        for m in (0..n).filter(|&m| m != i) {
            let prod: f64 = (0..n)
                .filter(|&j| j != i && j != m)
                .map(|j| x - self.nodes[j])
                .product();
            sum += prod;
        }
        sum / self.denoms[i]
    }

    /// All basis values at `x`.
    pub fn values(&self, x: f64) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.value(i, x)).collect()
    }

    /// All basis derivatives at `x`.
    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.derivative(i, x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis1D {
    Monomial,
    Legendre,
    MFunction,
}

/// A univariate polynomial on the reference interval, stored in a declared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial1D {
    pub basis: Basis1D,
    pub coeffs: Vec<f64>,
}

/// Monomial coefficients of `L_0..=L_n`, row `i` holding `L_i`.
fn legendre_monomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; n + 1]; n + 1];
    rows[0][0] = 1.0;
    if n >= 1 {
        rows[1][1] = 1.0;
    }
    for j in 1..n {
        let jf = j as f64;
        for p in 0..=n {
            let shifted = if p > 0 { rows[j][p - 1] } else { 0.0 };
            rows[j + 1][p] = ((2.0 * jf + 1.0) * shifted - jf * rows[j - 1][p]) / (jf + 1.0);
        }
    }
    rows
}

/// Monomial coefficients of `M_0..=M_n`, row `i` holding `M_i`.
fn mfunction_monomial_table(n: usize) -> Vec<Vec<f64>> {
    let leg = legendre_monomial_table(n.max(1));
    let mut rows = vec![vec![0.0; n + 1]; n + 1];
    rows[0][0] = 1.0;
    if n >= 1 {
        rows[1][1] = 1.0;
    }
    for i in 2..=n {
        // integrate L_{i-1} and fix M_i(-1) = 0
        let src = &leg[i - 1];
        let mut row = vec![0.0; n + 1];
        for p in 0..i {
            row[p + 1] = src[p] / (p + 1) as f64;
        }
        let at_minus_one: f64 = row
            .iter()
            .enumerate()
            .map(|(p, &c)| if p % 2 == 0 { c } else { -c })
            .sum();
        row[0] -= at_minus_one;
        rows[i] = row;
    }
    rows
}

fn basis_table(basis: Basis1D, n: usize) -> Vec<Vec<f64>> {
    match basis {
        Basis1D::Monomial => (0..=n)
            .map(|i| {
                let mut r = vec![0.0; n + 1];
                r[i] = 1.0;
                r
            })
            .collect(),
        Basis1D::Legendre => legendre_monomial_table(n),
        Basis1D::MFunction => mfunction_monomial_table(n),
    }
}

impl Polynomial1D {
    pub fn new(basis: Basis1D, coeffs: Vec<f64>) -> Self {
        Polynomial1D { basis, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.basis {
            Basis1D::Monomial => self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c),
            Basis1D::Legendre => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| c * legendre(i, x))
                .sum(),
            Basis1D::MFunction => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| c * mfunction_eval(i, x))
                .sum(),
        }
    }

    pub fn to_monomial(&self) -> Polynomial1D {
        let n = self.coeffs.len().saturating_sub(1);
        let table = basis_table(self.basis, n);
        let mut out = vec![0.0; n + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            for (p, &t) in table[i].iter().enumerate() {
                out[p] += c * t;
            }
        }
        Polynomial1D::new(Basis1D::Monomial, out)
    }

    /// Re-expresses the polynomial in `basis`.
    pub fn convert(&self, basis: Basis1D) -> Polynomial1D {
        let mono = self.to_monomial();
        if basis == Basis1D::Monomial {
            return mono;
        }
        let n = mono.coeffs.len().saturating_sub(1);
        let table = basis_table(basis, n);
        // table is lower triangular in (basis index, power); back-substitute on powers
        let mut rem = mono.coeffs.clone();
        let mut out = vec![0.0; n + 1];
        for i in (0..=n).rev() {
            let c = rem[i] / table[i][i];
            out[i] = c;
            for (p, &t) in table[i].iter().enumerate().take(i + 1) {
                rem[p] -= c * t;
            }
        }
        Polynomial1D::new(basis, out)
    }

    /// Derivative, returned in the monomial basis.
    pub fn derivative(&self) -> Polynomial1D {
        let mono = self.to_monomial();
        let d: Vec<f64> = mono
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(p, &c)| p as f64 * c)
            .collect();
        Polynomial1D::new(Basis1D::Monomial, if d.is_empty() { vec![0.0] } else { d })
    }

    /// `∫_{-1}^{1}` of the polynomial.
    pub fn integral(&self) -> f64 {
        self.to_monomial()
            .coeffs
            .iter()
            .enumerate()
            .map(|(p, &c)| if p % 2 == 0 { 2.0 * c / (p + 1) as f64 } else { 0.0 })
            .sum()
    }
}
