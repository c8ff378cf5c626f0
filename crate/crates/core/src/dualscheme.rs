//! Dual strategies and the k-r-order orthogonality condition.
//!
//! A direction strategy places `k` dual points `alpha` inside the reference
//! interval and `k + 1` interpolation parameters `a` with `a_0 = -1`, `a_k = 1`.
//! The orthogonality condition of order `r` asks the `k`-point rule with nodes
//! `alpha` and weights `A_s = a_s - a_{s-1}` to integrate every polynomial of
//! degree `r + 1` exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FveError, Result};
use crate::refbasis::gauss_rule;

/// Residual tolerance accepted for strategies read from disk.
pub const LOADED_RESIDUAL_TOL: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 50;
const FD_STEP: f64 = 1e-7;
const MAX_JACOBIAN_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionStrategy {
    pub k: usize,
    pub r: usize,
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
}

impl DirectionStrategy {
    /// Builds a strategy after checking lengths, order bounds and ordering.
    pub fn new(k: usize, r: usize, alpha: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let s = DirectionStrategy { k, r, alpha, a };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(FveError::InvalidArgument("k must be at least 1".into()));
        }
        if self.r + 1 < k || self.r > 2 * k - 2 {
            return Err(FveError::InvalidArgument(format!(
                "orthogonality order r={} outside [{}, {}]",
                self.r,
                k - 1,
                2 * k - 2
            )));
        }
        if self.alpha.len() != k || self.a.len() != k + 1 {
            return Err(FveError::InvalidArgument(format!(
                "expected {k} dual and {} interpolation parameters, got {} and {}",
                k + 1,
                self.alpha.len(),
                self.a.len()
            )));
        }
        check_ordering(&self.alpha, &self.a)
    }

    /// Dual quadrature weights `A_s = a_s - a_{s-1}`.
    pub fn weights(&self) -> Vec<f64> {
        self.a.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn residual(&self) -> Vec<f64> {
        orthogonality_residual(&self.alpha, &self.a, self.r)
    }

    pub fn max_residual(&self) -> f64 {
        max_abs(&self.residual())
    }

    /// Dual breakpoints `-1, alpha_1, ..., alpha_k, 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.k + 2);
        b.push(-1.0);
        b.extend_from_slice(&self.alpha);
        b.push(1.0);
        b
    }
}

fn check_ordering(alpha: &[f64], a: &[f64]) -> Result<()> {
    let k = alpha.len();
    if alpha.iter().any(|&x| !(x > -1.0 && x < 1.0)) {
        return Err(FveError::OrderingViolation(format!(
            "dual parameters {alpha:?} not inside (-1, 1)"
        )));
    }
    if alpha.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FveError::OrderingViolation(format!(
            "dual parameters {alpha:?} not strictly increasing"
        )));
    }
    if a.len() != k + 1 || a[0] != -1.0 || a[k] != 1.0 {
        return Err(FveError::OrderingViolation(format!(
            "interpolation parameters {a:?} must run from -1 to 1"
        )));
    }
    if a.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FveError::OrderingViolation(format!(
            "interpolation parameters {a:?} not strictly increasing"
        )));
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualStrategy {
    pub x: DirectionStrategy,
    pub y: DirectionStrategy,
}

impl DualStrategy {
    pub fn new(x: DirectionStrategy, y: DirectionStrategy) -> Result<Self> {
        if x.k != y.k {
            return Err(FveError::InvalidArgument(format!(
                "direction orders differ: {} vs {}",
                x.k, y.k
            )));
        }
        Ok(DualStrategy { x, y })
    }

    /// Same strategy in both directions.
    pub fn isotropic(s: DirectionStrategy) -> Self {
        DualStrategy { x: s.clone(), y: s }
    }

    pub fn k(&self) -> usize {
        self.x.k
    }

    /// The order satisfied in both directions.
    pub fn r(&self) -> usize {
        self.x.r.min(self.y.r)
    }
}

/// Residuals `sum_s A_s alpha_s^{i+1} - (1 - (-1)^i)/(i + 2)` for `i = 0..=r`.
pub fn orthogonality_residual(alpha: &[f64], a: &[f64], r: usize) -> Vec<f64> {
    (0..=r)
        .map(|i| {
            let quad: f64 = alpha
                .iter()
                .enumerate()
                .map(|(s, &x)| (a[s + 1] - a[s]) * x.powi(i as i32 + 1))
                .sum();
            let exact = if i % 2 == 0 { 0.0 } else { 2.0 / (i + 2) as f64 };
            quad - exact
        })
        .collect()
}

/// Solves the orthogonality system of order `r` with Newton's method.
///
/// `fixed` lists interior interpolation parameters `(index, value)` with
/// `1 <= index <= k - 1`; the remaining interior parameters are unknowns seeded
/// from `guess_free_a` in increasing index order. Together with the `k` dual
/// parameters the unknown count must equal `r + 1`.
pub fn solve_strategy(
    k: usize,
    r: usize,
    fixed: &[(usize, f64)],
    guess_alpha: &[f64],
    guess_free_a: &[f64],
) -> Result<DirectionStrategy> {
    if k == 0 || r + 1 < k || r > 2 * k - 2 {
        return Err(FveError::InvalidArgument(format!(
            "order pair (k={k}, r={r}) outside k-1 <= r <= 2k-2"
        )));
    }
    if guess_alpha.len() != k {
        return Err(FveError::InvalidArgument(format!(
            "expected {k} dual seeds, got {}",
            guess_alpha.len()
        )));
    }
    let mut is_fixed = vec![None; k + 1];
    for &(idx, val) in fixed {
        if idx == 0 || idx >= k {
            return Err(FveError::InvalidArgument(format!(
                "interpolation index {idx} is not interior"
            )));
        }
        is_fixed[idx] = Some(val);
    }
    let free_idx: Vec<usize> = (1..k).filter(|&i| is_fixed[i].is_none()).collect();
    if free_idx.len() != guess_free_a.len() {
        return Err(FveError::InvalidArgument(format!(
            "{} free interpolation parameters but {} seeds",
            free_idx.len(),
            guess_free_a.len()
        )));
    }
    let n_unknowns = k + free_idx.len();
    if n_unknowns != r + 1 {
        return Err(FveError::InvalidArgument(format!(
            "{n_unknowns} unknowns for {} equations; free exactly {} interpolation parameters",
            r + 1,
            r + 1 - k
        )));
    }

    let unpack = |z: &DVector<f64>| -> (Vec<f64>, Vec<f64>) {
        let alpha = z.as_slice()[..k].to_vec();
        let mut a = vec![0.0; k + 1];
        a[0] = -1.0;
        a[k] = 1.0;
        for i in 1..k {
            if let Some(v) = is_fixed[i] {
                a[i] = v;
            }
        }
        for (j, &i) in free_idx.iter().enumerate() {
            a[i] = z[k + j];
        }
        (alpha, a)
    };
    let eval = |z: &DVector<f64>| -> DVector<f64> {
        let (alpha, a) = unpack(z);
        DVector::from_vec(orthogonality_residual(&alpha, &a, r))
    };

    let mut z = DVector::from_iterator(
        n_unknowns,
        guess_alpha.iter().chain(guess_free_a).copied(),
    );
    let mut f = eval(&z);
    let mut norm = f.amax();
    for _ in 0..NEWTON_MAX_ITER {
        if norm <= 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(n_unknowns, n_unknowns);
        for c in 0..n_unknowns {
            let mut zp = z.clone();
            zp[c] += FD_STEP;
            let mut zm = z.clone();
            zm[c] -= FD_STEP;
            let col = (eval(&zp) - eval(&zm)) / (2.0 * FD_STEP);
            jac.set_column(c, &col);
        }
        let sv = jac.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if cond > MAX_JACOBIAN_COND {
            return Err(FveError::NonConvergence(format!(
                "jacobian condition number {cond:e} exceeds {MAX_JACOBIAN_COND:e}"
            )));
        }
        let step = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| FveError::NonConvergence("singular jacobian".into()))?;
        // backtracking keeps the iteration monotone in the max-norm
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = &z - &step * lambda;
            let ft = eval(&trial);
            let nt = ft.amax();
            if nt < norm || nt <= 1e-15 {
                z = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(norm <= 1e-12) {
        return Err(FveError::NonConvergence(format!(
            "max residual {norm:e} after {NEWTON_MAX_ITER} iterations"
        )));
    }
    let (alpha, a) = unpack(&z);
    check_ordering(&alpha, &a)?;
    Ok(DirectionStrategy { k, r, alpha, a })
}

/// Dual points at the Gauss nodes, interpolation parameters from cumulative weights.
pub fn gaussian_duality(k: usize) -> Result<DirectionStrategy> {
    if !(1..=10).contains(&k) {
        return Err(FveError::InvalidArgument(format!(
            "gaussian duality supports 1 <= k <= 10, got {k}"
        )));
    }
    let rule = gauss_rule(k)?;
    let mut a = Vec::with_capacity(k + 1);
    a.push(-1.0);
    let mut acc = -1.0;
    for &w in &rule.weights[..k - 1] {
        acc += w;
        a.push(acc);
    }
    a.push(1.0);
    DirectionStrategy::new(k, 2 * k - 2, rule.nodes, a)
}

/// Midpoint duality for `k = 1`.
pub fn midpoint_duality() -> DirectionStrategy {
    DirectionStrategy {
        k: 1,
        r: 0,
        alpha: vec![0.0],
        a: vec![-1.0, 1.0],
    }
}

/// Printed seeds for one direction of a named scheme.
#[derive(Debug, Clone, Copy)]
pub struct PresetSeed {
    pub alpha: &'static [f64],
    /// Interior interpolation parameters; `None` entries are Newton unknowns.
    pub interior_a: &'static [(f64, bool)],
}

pub struct PresetDef {
    pub name: &'static str,
    pub k: usize,
    pub r: usize,
    /// `None` marks Gaussian duality.
    pub seeds: Option<(PresetSeed, PresetSeed)>,
}

// (value, is_fixed); unfixed values are the printed four-digit seeds.
pub const PRESETS: &[PresetDef] = &[
    PresetDef {
        name: "FVE-3-2",
        k: 3,
        r: 2,
        seeds: Some((
            PresetSeed {
                alpha: &[-0.6406, -0.0748, 0.6255],
                interior_a: &[(-1.0 / 5.0, true), (7.0 / 50.0, true)],
            },
            PresetSeed {
                alpha: &[-0.7622, -0.2073, 0.6577],
                interior_a: &[(-1.0 / 2.0, true), (1.0 / 5.0, true)],
            },
        )),
    },
    PresetDef {
        name: "FVE-3-3",
        k: 3,
        r: 3,
        seeds: Some((
            PresetSeed {
                alpha: &[-0.8563, -0.1534, 0.7243],
                interior_a: &[(-3.0 / 5.0, true), (0.3301, false)],
            },
            PresetSeed {
                alpha: &[-0.9380, -0.2435, 0.7011],
                interior_a: &[(-5.0 / 7.0, true), (0.2744, false)],
            },
        )),
    },
    PresetDef {
        name: "FVE-3-4",
        k: 3,
        r: 4,
        seeds: None,
    },
    PresetDef {
        name: "FVE-4-3",
        k: 4,
        r: 3,
        seeds: Some((
            PresetSeed {
                alpha: &[-0.9156, -0.2698, 0.5678, 0.8838],
                interior_a: &[(-7.0 / 10.0, true), (1.0 / 5.0, true), (4.0 / 5.0, true)],
            },
            PresetSeed {
                alpha: &[-0.9020, -0.3187, 0.4628, 0.8990],
                interior_a: &[(-7.0 / 10.0, true), (1.0 / 10.0, true), (3.0 / 4.0, true)],
            },
        )),
    },
    PresetDef {
        name: "FVE-4-4",
        k: 4,
        r: 4,
        seeds: Some((
            PresetSeed {
                alpha: &[-0.9579, -0.4479, 0.3699, 0.9093],
                interior_a: &[(-4.0 / 5.0, true), (-1.0 / 25.0, true), (0.7270, false)],
            },
            PresetSeed {
                alpha: &[-0.8598, -0.2885, 0.4744, 0.9452],
                interior_a: &[(-16.0 / 25.0, true), (1.0 / 10.0, true), (0.7960, false)],
            },
        )),
    },
    PresetDef {
        name: "FVE-4-6",
        k: 4,
        r: 6,
        seeds: None,
    },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

fn find_preset(name: &str) -> Result<&'static PresetDef> {
    PRESETS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| FveError::UnknownPreset(name.to_string()))
}

fn solve_seed(k: usize, r: usize, seed: &PresetSeed) -> Result<DirectionStrategy> {
    let fixed: Vec<(usize, f64)> = seed
        .interior_a
        .iter()
        .enumerate()
        .filter(|(_, &(_, f))| f)
        .map(|(i, &(v, _))| (i + 1, v))
        .collect();
    let free: Vec<f64> = seed
        .interior_a
        .iter()
        .filter(|&&(_, f)| !f)
        .map(|&(v, _)| v)
        .collect();
    solve_strategy(k, r, &fixed, seed.alpha, &free)
}

/// The strategy exactly as printed (four-digit seeds), without re-solving.
pub fn preset_printed(name: &str) -> Result<DualStrategy> {
    let def = find_preset(name)?;
    match &def.seeds {
        None => preset(name),
        Some((sx, sy)) => {
            let build = |s: &PresetSeed| {
                let mut a = vec![-1.0];
                a.extend(s.interior_a.iter().map(|&(v, _)| v));
                a.push(1.0);
                DirectionStrategy::new(def.k, def.r, s.alpha.to_vec(), a)
            };
            DualStrategy::new(build(sx)?, build(sy)?)
        }
    }
}

/// Named scheme re-solved to machine precision from its printed seeds.
pub fn preset(name: &str) -> Result<DualStrategy> {
    let def = find_preset(name)?;
    match &def.seeds {
        None => Ok(DualStrategy::isotropic(gaussian_duality(def.k)?)),
        Some((sx, sy)) => DualStrategy::new(solve_seed(def.k, def.r, sx)?, solve_seed(def.k, def.r, sy)?),
    }
}

/// Max quadrature error of the dual rule over monomials of degree `0..=r+1`.
pub fn verify_dual_quadrature(strategy: &DirectionStrategy) -> f64 {
    dual_quadrature_error(strategy, strategy.r + 1)
}

/// Max quadrature error of the dual rule over monomials up to `degree`.
pub fn dual_quadrature_error(strategy: &DirectionStrategy, degree: usize) -> f64 {
    let w = strategy.weights();
    (0..=degree)
        .map(|p| {
            let quad: f64 = strategy
                .alpha
                .iter()
                .zip(&w)
                .map(|(&x, &ws)| ws * x.powi(p as i32))
                .sum();
            let exact = if p % 2 == 0 { 2.0 / (p + 1) as f64 } else { 0.0 };
            (quad - exact).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSpec {
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
}

/// On-disk scheme definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeFile {
    pub k: usize,
    pub r: usize,
    pub x: DirectionSpec,
    pub y: DirectionSpec,
}

impl SchemeFile {
    pub fn from_strategy(s: &DualStrategy) -> Self {
        SchemeFile {
            k: s.k(),
            r: s.r(),
            x: DirectionSpec {
                alpha: s.x.alpha.clone(),
                a: s.x.a.clone(),
            },
            y: DirectionSpec {
                alpha: s.y.alpha.clone(),
                a: s.y.a.clone(),
            },
        }
    }

    /// Validates ordering and the orthogonality residual.
    pub fn to_strategy(&self) -> Result<DualStrategy> {
        let x = DirectionStrategy::new(self.k, self.r, self.x.alpha.clone(), self.x.a.clone())?;
        let y = DirectionStrategy::new(self.k, self.r, self.y.alpha.clone(), self.y.a.clone())?;
        for (d, s) in [("x", &x), ("y", &y)] {
            let res = s.max_residual();
            if res > LOADED_RESIDUAL_TOL {
                return Err(FveError::InvalidArgument(format!(
                    "{d}-direction orthogonality residual {res:e} exceeds {LOADED_RESIDUAL_TOL:e}"
                )));
            }
        }
        DualStrategy::new(x, y)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_examples() {
        assert_eq!(orthogonality_residual(&[0.0], &[-1.0, 1.0], 0), vec![0.0]);
        let t = (0.6f64).sqrt();
        let res = orthogonality_residual(&[-t, 0.0, t], &[-1.0, -4.0 / 9.0, 4.0 / 9.0, 1.0], 4);
        assert_eq!(res.len(), 5);
        assert!(max_abs(&res) <= 1e-15, "{res:?}");
        let printed = orthogonality_residual(
            &[-0.6406, -0.0748, 0.6255],
            &[-1.0, -0.2, 0.14, 1.0],
            2,
        );
        assert!(max_abs(&printed) <= 5e-4);
    }

    #[test]
    fn solve_k1_midpoint() {
        let s = solve_strategy(1, 0, &[], &[0.3], &[]).unwrap();
        assert!(s.alpha[0].abs() < 1e-15);
        assert_eq!(s.a, vec![-1.0, 1.0]);
    }

    #[test]
    fn solve_fve_3_2() {
        let s = solve_strategy(3, 2, &[(1, -0.2), (2, 0.14)], &[-0.64, -0.07, 0.62], &[]).unwrap();
        for (x, p) in s.alpha.iter().zip([-0.6406, -0.0748, 0.6255]) {
            assert!((x - p).abs() < 6e-5, "{x} vs {p}");
        }
        assert!(s.max_residual() <= 1e-12);
    }

    #[test]
    fn solve_fve_3_3() {
        let s = solve_strategy(3, 3, &[(1, -0.6)], &[-0.8563, -0.1534, 0.7243], &[0.33]).unwrap();
        for (x, p) in s.alpha.iter().zip([-0.8563, -0.1534, 0.7243]) {
            assert!((x - p).abs() < 6e-5, "{x} vs {p}");
        }
        assert!((s.a[2] - 0.3301).abs() < 6e-5);
    }

    #[test]
    fn solve_rejects_bad_unknown_count() {
        let err = solve_strategy(3, 3, &[(1, -0.6), (2, 0.33)], &[-0.8, -0.1, 0.7], &[]);
        assert!(matches!(err, Err(FveError::InvalidArgument(_))));
    }

    #[test]
    fn solve_reports_infeasible_or_bad_seed() {
        // three Gauss-type conditions with an absurd fixing have no ordered solution nearby
        let err = solve_strategy(2, 1, &[(1, 0.99)], &[-0.9, -0.8], &[]);
        assert!(err.is_err());
    }

    #[test]
    fn solve_is_deterministic() {
        let a = solve_strategy(3, 3, &[(1, -0.6)], &[-0.85, -0.15, 0.72], &[0.33]).unwrap();
        let b = solve_strategy(3, 3, &[(1, -0.6)], &[-0.85, -0.15, 0.72], &[0.33]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_examples() {
        let g3 = gaussian_duality(3).unwrap();
        let t = (0.6f64).sqrt();
        for (x, e) in g3.alpha.iter().zip([-t, 0.0, t]) {
            assert!((x - e).abs() < 1e-15);
        }
        assert_eq!(g3.r, 4);
        let g1 = gaussian_duality(1).unwrap();
        assert_eq!(g1.alpha, vec![0.0]);
        assert_eq!(g1.a, vec![-1.0, 1.0]);
        for k in 1..=10 {
            let g = gaussian_duality(k).unwrap();
            assert!(dual_quadrature_error(&g, 2 * k - 1) <= 1e-12, "k={k}");
        }
        assert!(gaussian_duality(11).is_err());
    }

    #[test]
    fn dual_quadrature_examples() {
        let g3 = gaussian_duality(3).unwrap();
        let w = g3.weights();
        let q: f64 = g3.alpha.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((q - 0.4).abs() < 1e-14);
        assert!(verify_dual_quadrature(&midpoint_duality()) < 1e-15);
        let s = preset("FVE-3-3").unwrap();
        let w = s.x.weights();
        let q: f64 = s.x.alpha.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((q - 0.4).abs() < 1e-12);
    }

    #[test]
    fn presets_resolve_and_match_print() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            let printed = preset_printed(name).unwrap();
            for (d, p) in [(&s.x, &printed.x), (&s.y, &printed.y)] {
                assert!(d.max_residual() <= 1e-12, "{name}");
                assert!(d.weights().iter().all(|&w| w > 0.0), "{name}");
                assert!(verify_dual_quadrature(d) <= 1e-12);
                for (x, e) in d.alpha.iter().zip(&p.alpha) {
                    assert!((x - e).abs() <= 6e-5, "{name}: {x} vs {e}");
                }
                assert!(p.max_residual() <= 5e-4, "{name} printed residual");
            }
        }
        assert!(matches!(preset("FVE-9-9"), Err(FveError::UnknownPreset(_))));
    }

    #[test]
    fn preset_specifics() {
        let s = preset("FVE-4-4").unwrap();
        assert_eq!(s.x.a[1], -0.8);
        assert_eq!(s.x.a[2], -0.04);
        let g = preset("FVE-3-4").unwrap();
        assert_eq!(g.x, gaussian_duality(3).unwrap());
        assert_eq!(g.y, gaussian_duality(3).unwrap());
        let s = preset("FVE-4-3").unwrap();
        assert_eq!(s.y.a, vec![-1.0, -0.7, 0.1, 0.75, 1.0]);
    }

    #[test]
    fn scheme_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("fve-scheme-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.json");
        let s = preset("FVE-3-3").unwrap();
        SchemeFile::from_strategy(&s).write(&path).unwrap();
        let back = SchemeFile::read(&path).unwrap().to_strategy().unwrap();
        assert_eq!(back, s);
        let mut bad = SchemeFile::from_strategy(&s);
        bad.x.alpha[0] += 1e-3;
        assert!(bad.to_strategy().is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
