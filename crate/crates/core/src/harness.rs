//! Convergence studies: configuration, execution, reference comparison and
//! table output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{solve_fem, solve_fve, DiscreteField};
use crate::dualscheme::{preset, DualStrategy, SchemeFile};
use crate::errnorms::{
    estimate_orders, global_norms, norm_h1x_super, norm_h1x_ultra, norm_l2_super, ErrorReport,
    FieldError, OrderTable, H1X_SUPER, H1X_ULTRA, H1_SEMI, L2, L2_SUPER, NORM_NAMES,
};
use crate::error::{FveError, Result};
use crate::meshgen::{perturbed_mesh, MeshSpec, RectMesh};
use crate::pdemodel::{problem_by_name, ManufacturedProblem};
use crate::superstruct::{gaussian_point_sets, super_points};

pub const DEFAULT_TOLERANCE_FACTOR: f64 = 2.0;
pub const DEFAULT_ORDER_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Fve,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for Format {
    type Err = FveError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(FveError::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

fn default_factor() -> f64 {
    DEFAULT_TOLERANCE_FACTOR
}

fn default_order_tol() -> f64 {
    DEFAULT_ORDER_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: String,
    /// Preset name, `FE-k`, or path to a scheme JSON file.
    pub scheme: String,
    /// Inferred from the scheme when absent.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub mesh_sizes: Vec<usize>,
    /// Explicit meshes; used instead of `mesh_sizes` when non-empty.
    #[serde(default)]
    pub meshes: Vec<MeshSpec>,
    #[serde(default)]
    pub perturb: f64,
    #[serde(default)]
    pub seed: u64,
    pub norms: Vec<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub check_reference: bool,
    #[serde(default = "default_factor")]
    pub tolerance_factor: f64,
    #[serde(default = "default_order_tol")]
    pub order_tolerance: f64,
}

impl StudyConfig {
    pub fn new(problem: &str, scheme: &str, mesh_sizes: &[usize], norms: &[&str]) -> Self {
        StudyConfig {
            problem: problem.to_string(),
            scheme: scheme.to_string(),
            kind: None,
            mesh_sizes: mesh_sizes.to_vec(),
            meshes: Vec::new(),
            perturb: 0.0,
            seed: 0,
            norms: norms.iter().map(|s| s.to_string()).collect(),
            out: None,
            format: Format::Csv,
            check_reference: false,
            tolerance_factor: DEFAULT_TOLERANCE_FACTOR,
            order_tolerance: DEFAULT_ORDER_TOLERANCE,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        let count = if self.meshes.is_empty() {
            self.mesh_sizes.len()
        } else {
            self.meshes.len()
        };
        if count < 2 {
            return Err(FveError::InvalidArgument(
                "a study needs at least two meshes".into(),
            ));
        }
        if self.norms.is_empty() {
            return Err(FveError::InvalidArgument("no norms requested".into()));
        }
        for n in &self.norms {
            if !NORM_NAMES.contains(&n.as_str()) {
                return Err(FveError::InvalidArgument(format!(
                    "unknown norm `{n}`; expected one of {NORM_NAMES:?}"
                )));
            }
        }
        if self.tolerance_factor < 1.0 || self.order_tolerance < 0.0 {
            return Err(FveError::InvalidArgument("tolerances must be factor >= 1 and order band >= 0".into()));
        }
        Ok(())
    }

    fn build_meshes(&self) -> Result<Vec<RectMesh>> {
        if !self.meshes.is_empty() {
            return self.meshes.iter().map(MeshSpec::build).collect();
        }
        self.mesh_sizes
            .iter()
            .map(|&n| perturbed_mesh(n, n, self.perturb, self.seed))
            .collect()
    }
}

/// A resolved discretization.
#[derive(Debug, Clone)]
pub enum Scheme {
    Fve { name: String, strategy: DualStrategy },
    Fem { k: usize },
}

impl Scheme {
    pub fn name(&self) -> String {
        match self {
            Scheme::Fve { name, .. } => name.clone(),
            Scheme::Fem { k } => format!("FE-{k}"),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Scheme::Fve { strategy, .. } => strategy.k(),
            Scheme::Fem { k } => *k,
        }
    }

    pub fn resolve(scheme: &str, kind: Option<Kind>) -> Result<Self> {
        let fem_order = scheme
            .strip_prefix("FE-")
            .or_else(|| scheme.strip_prefix("fe-"))
            .and_then(|k| k.parse::<usize>().ok());
        match (kind, fem_order) {
            (Some(Kind::Fem) | None, Some(k)) => {
                if k == 0 {
                    return Err(FveError::InvalidArgument("FE order must be at least 1".into()));
                }
                Ok(Scheme::Fem { k })
            }
            (Some(Kind::Fve), Some(_)) => Err(FveError::InvalidArgument(format!(
                "`{scheme}` is a Galerkin scheme but kind fve was requested"
            ))),
            (Some(Kind::Fem), None) => {
                // Galerkin on the order of a finite volume scheme
                Ok(Scheme::Fem {
                    k: Self::resolve_fve(scheme)?.k(),
                })
            }
            (_, None) => Self::resolve_fve(scheme),
        }
    }

    fn resolve_fve(scheme: &str) -> Result<Self> {
        let path = Path::new(scheme);
        if path.extension().is_some_and(|e| e == "json") || path.exists() {
            let strategy = SchemeFile::read(path)?.to_strategy()?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| scheme.to_string());
            return Ok(Scheme::Fve { name, strategy });
        }
        let strategy = preset(scheme)?;
        Ok(Scheme::Fve {
            name: scheme.to_ascii_uppercase(),
            strategy,
        })
    }

    fn solve(&self, mesh: &RectMesh, problem: &ManufacturedProblem) -> Result<DiscreteField> {
        match self {
            Scheme::Fve { strategy, .. } => solve_fve(mesh, strategy, problem),
            Scheme::Fem { k } => solve_fem(mesh, *k, problem),
        }
    }

    /// `(alpha_x, P^S_x, P^S_y)` as needed by `norms`; Galerkin uses Gauss
    /// points with Gauss-Lobatto transverse points.
    fn points(&self, norms: &[String]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        match self {
            Scheme::Fem { k } => {
                let s = gaussian_point_sets(*k)?;
                Ok((s.alpha_x, s.ps_x, s.ps_y))
            }
            Scheme::Fve { strategy, .. } => {
                let need_x = norms.iter().any(|n| n == L2_SUPER);
                let need_y = need_x || norms.iter().any(|n| n == H1X_ULTRA);
                let ps_x = if need_x { super_points(&strategy.x)? } else { Vec::new() };
                let ps_y = if need_y { super_points(&strategy.y)? } else { Vec::new() };
                Ok((strategy.x.alpha.clone(), ps_x, ps_y))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub problem: String,
    pub scheme: String,
    pub k: usize,
    /// `N` per row when the meshes come from `mesh_sizes`.
    pub mesh_sizes: Vec<Option<usize>>,
    pub uniform: bool,
    pub norms: Vec<String>,
    pub reports: Vec<ErrorReport>,
    pub orders: OrderTable,
}

fn evaluate_norms(
    field: &DiscreteField,
    problem: &ManufacturedProblem,
    norms: &[String],
    points: &(Vec<f64>, Vec<f64>, Vec<f64>),
) -> Result<BTreeMap<String, f64>> {
    let mesh = field.mesh();
    let k = field.k();
    let err = FieldError {
        field,
        exact: &problem.exact,
    };
    let value = |e, x, y| err.value(e, x, y);
    let dx = |e, x, y| err.dx(e, x, y);
    let (alpha_x, ps_x, ps_y) = points;
    let mut out = BTreeMap::new();
    let mut globals = None;
    for n in norms {
        let v = match n.as_str() {
            H1X_SUPER => norm_h1x_super(&dx, mesh, alpha_x, 2 * k + 3)?,
            L2_SUPER => norm_l2_super(&value, mesh, ps_x, ps_y),
            H1X_ULTRA => norm_h1x_ultra(&dx, mesh, alpha_x, ps_y),
            L2 | H1_SEMI => {
                let (l2, h1) = match globals {
                    Some(g) => g,
                    None => {
                        let g = global_norms(&value, &|e, x, y| (err.dx(e, x, y), err.dy(e, x, y)), mesh, 2 * k + 3)?;
                        globals = Some(g);
                        g
                    }
                };
                if n == L2 {
                    l2
                } else {
                    h1
                }
            }
            other => return Err(FveError::InvalidArgument(format!("unknown norm `{other}`"))),
        };
        out.insert(n.clone(), v);
    }
    Ok(out)
}

fn name_mesh(err: FveError, mesh: &RectMesh) -> FveError {
    let tag = format!("mesh {}x{}", mesh.nx(), mesh.ny());
    match err {
        FveError::SolverFailure { residual, detail } => FveError::SolverFailure {
            residual,
            detail: format!("{detail} on {tag}"),
        },
        FveError::InvalidArgument(m) => FveError::InvalidArgument(format!("{m} on {tag}")),
        other => other,
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let problem = problem_by_name(&config.problem)?;
    let scheme = Scheme::resolve(&config.scheme, config.kind)?;
    let points = scheme.points(&config.norms)?;
    let meshes = config.build_meshes()?;
    let mut reports = Vec::with_capacity(meshes.len());
    for mesh in &meshes {
        let start = Instant::now();
        let field = scheme.solve(mesh, &problem).map_err(|e| name_mesh(e, mesh))?;
        let norms = evaluate_norms(&field, &problem, &config.norms, &points)?;
        reports.push(ErrorReport {
            h: mesh.h(),
            nx: mesh.nx(),
            ny: mesh.ny(),
            dofs: field.dofs().interior_count(),
            norms,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let orders = estimate_orders(&reports)?;
    let mesh_sizes = if config.meshes.is_empty() {
        config.mesh_sizes.iter().map(|&n| Some(n)).collect()
    } else {
        meshes
            .iter()
            .map(|m| (m.nx() == m.ny()).then_some(m.nx()))
            .collect()
    };
    Ok(StudyResult {
        problem: problem.name.clone(),
        scheme: scheme.name(),
        k: scheme.k(),
        mesh_sizes,
        uniform: config.meshes.is_empty() && config.perturb == 0.0,
        norms: config.norms.clone(),
        reports,
        orders,
    })
}

/// One published value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub scheme: &'static str,
    pub problem: &'static str,
    pub norm: &'static str,
    pub n: usize,
    /// Verbatim printed text of the error.
    pub value_text: &'static str,
    pub order_text: Option<&'static str>,
}

impl ReferenceEntry {
    pub fn value(&self) -> f64 {
        self.value_text.parse().expect("reference values are numeric")
    }

    pub fn order(&self) -> Option<f64> {
        self.order_text.map(|t| t.parse().expect("reference orders are numeric"))
    }
}

const fn col(
    scheme: &'static str,
    problem: &'static str,
    norm: &'static str,
    ns: [usize; 4],
    values: [&'static str; 4],
    orders: [&'static str; 3],
) -> [ReferenceEntry; 4] {
    [
        ReferenceEntry { scheme, problem, norm, n: ns[0], value_text: values[0], order_text: None },
        ReferenceEntry { scheme, problem, norm, n: ns[1], value_text: values[1], order_text: Some(orders[0]) },
        ReferenceEntry { scheme, problem, norm, n: ns[2], value_text: values[2], order_text: Some(orders[1]) },
        ReferenceEntry { scheme, problem, norm, n: ns[3], value_text: values[3], order_text: Some(orders[2]) },
    ]
}

const N3: [usize; 4] = [12, 16, 20, 24];
const N4: [usize; 4] = [8, 12, 16, 20];

const REFERENCE_COLUMNS: [[ReferenceEntry; 4]; 12] = [
    col("FVE-3-3", "BVP-DR", H1X_ULTRA, N3, ["2.9363E-06", "6.9806E-07", "2.2896E-07", "9.2071E-08"], ["4.9937", "4.9956", "4.9967"]),
    col("FVE-3-2", "BVP-D", H1X_ULTRA, N3, ["2.9634E-05", "9.4196E-06", "3.8683E-06", "1.8686E-06"], ["3.9840", "3.9884", "3.9909"]),
    col("FVE-3-4", "BVP-D", H1X_ULTRA, N3, ["1.1170E-06", "2.6538E-07", "8.7028E-08", "3.4993E-08"], ["4.9957", "4.9965", "4.9971"]),
    col("FE-3", "BVP-D", H1X_ULTRA, N3, ["3.0922E-06", "9.3570E-07", "3.7495E-07", "1.7861E-07"], ["4.1551", "4.0983", "4.0673"]),
    col("FVE-4-4", "BVP-DR", H1X_ULTRA, N4, ["3.0479e-07", "2.6831e-08", "4.7817e-09", "1.2659e-09"], ["5.9933", "5.9954", "5.9557"]),
    col("FVE-4-3", "BVP-D", H1X_ULTRA, N4, ["3.7555e-06", "4.8851e-07", "1.1519e-07", "3.7590e-08"], ["5.0303", "5.0220", "5.0186"]),
    col("FVE-4-6", "BVP-D", H1X_ULTRA, N4, ["1.0251e-07", "9.1740e-09", "1.6476e-09", "4.4636e-10"], ["5.9527", "5.9685", "5.8526"]),
    col("FE-4", "BVP-D", H1X_ULTRA, N4, ["3.3702e-07", "4.1182e-08", "9.4836e-09", "3.0657e-09"], ["5.1845", "5.1044", "5.0608"]),
    col("FVE-3-2", "BVP-DQR", H1X_SUPER, N3, ["1.6249E-04", "5.1237E-05", "2.0937E-05", "1.0080E-05"], ["4.0119", "4.0106", "4.0093"]),
    col("FVE-3-3", "BVP-DQR", L2_SUPER, N3, ["1.1808E-06", "2.8391E-07", "9.3771E-08", "3.7885E-08"], ["4.9545", "4.9646", "4.9708"]),
    col("FVE-4-3", "BVP-DQR", H1X_SUPER, N3, ["4.2542E-06", "1.0062E-06", "3.2908E-07", "1.3210E-07"], ["5.0116", "5.0085", "5.0063"]),
    col("FVE-4-4", "BVP-DQR", L2_SUPER, N3, ["1.2039E-08", "2.1846E-09", "5.7937E-10", "1.9586E-10"], ["5.9328", "5.9479", "5.9485"]),
];

/// Published error tables keyed by `(scheme, problem, N, norm)`.
#[derive(Debug, Clone)]
pub struct ReferenceTable {
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceTable {
    pub fn embedded() -> Self {
        ReferenceTable {
            entries: REFERENCE_COLUMNS.iter().flat_map(|c| c.iter().cloned()).collect(),
        }
    }

    pub fn lookup(&self, scheme: &str, problem: &str, n: usize, norm: &str) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| {
            e.scheme.eq_ignore_ascii_case(scheme)
                && e.problem.eq_ignore_ascii_case(problem)
                && e.n == n
                && e.norm == norm
        })
    }

    /// Column for a study, in mesh order.
    pub fn column(&self, scheme: &str, problem: &str, norm: &str) -> Vec<&ReferenceEntry> {
        self.entries
            .iter()
            .filter(|e| e.scheme.eq_ignore_ascii_case(scheme) && e.problem.eq_ignore_ascii_case(problem) && e.norm == norm)
            .collect()
    }

    /// FNV-1a hash of the canonical text `scheme|problem|norm|N|value|order` per line.
    pub fn checksum(&self) -> u64 {
        let mut text = String::new();
        for e in &self.entries {
            let _ = writeln!(
                text,
                "{}|{}|{}|{}|{}|{}",
                e.scheme,
                e.problem,
                e.norm,
                e.n,
                e.value_text,
                e.order_text.unwrap_or("-")
            );
        }
        fnv1a(text.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub n: usize,
    pub norm: String,
    pub computed: f64,
    pub reference: f64,
    pub value_pass: bool,
    pub computed_order: Option<f64>,
    pub reference_order: Option<f64>,
    /// `None` when the two rows are not consecutive in both tables.
    pub order_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub cells: Vec<CellCheck>,
    pub passed: bool,
}

impl Comparison {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.cells {
            let order = match (c.computed_order, c.reference_order, c.order_pass) {
                (Some(a), Some(b), Some(p)) => {
                    format!("order {a:.4} vs {b:.4} {}", if p { "ok" } else { "FAIL" })
                }
                _ => String::from("order -"),
            };
            let _ = writeln!(
                s,
                "N={:<3} {:<10} {:.4e} vs {:.4e} {}  {}",
                c.n,
                c.norm,
                c.computed,
                c.reference,
                if c.value_pass { "ok" } else { "FAIL" },
                order
            );
        }
        let _ = writeln!(s, "{}", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}

/// Checks every reported value against the table: errors within `factor`,
/// orders within `order_tol`.
pub fn compare_reference(
    result: &StudyResult,
    table: &ReferenceTable,
    factor: f64,
    order_tol: f64,
) -> Result<Comparison> {
    let mut cells = Vec::new();
    for norm in &result.norms {
        let orders = result.orders.get(norm).unwrap_or(&[]);
        for (row, report) in result.reports.iter().enumerate() {
            let n = result.mesh_sizes[row].ok_or_else(|| {
                FveError::MissingReferenceCell(format!("{} x {} mesh", report.nx, report.ny))
            })?;
            let key = || format!("{} / {} / N={} / {}", result.scheme, result.problem, n, norm);
            let entry = table
                .lookup(&result.scheme, &result.problem, n, norm)
                .ok_or_else(|| FveError::MissingReferenceCell(key()))?;
            let computed = report.norms[norm];
            let reference = entry.value();
            let ratio = computed / reference;
            let value_pass = ratio <= factor && ratio >= 1.0 / factor;
            // orders compare only when the previous rows coincide
            let prev_matches = row > 0
                && result.mesh_sizes[row - 1].is_some_and(|p| {
                    let col = table.column(&result.scheme, &result.problem, norm);
                    col.iter()
                        .position(|e| e.n == n)
                        .is_some_and(|i| i > 0 && col[i - 1].n == p)
                });
            let computed_order = orders.get(row).copied().flatten();
            let reference_order = entry.order();
            let order_pass = match (prev_matches, computed_order, reference_order) {
                (true, Some(a), Some(b)) => Some((a - b).abs() <= order_tol),
                _ => None,
            };
            cells.push(CellCheck {
                n,
                norm: norm.clone(),
                computed,
                reference,
                value_pass,
                computed_order,
                reference_order,
                order_pass,
            });
        }
    }
    let passed = cells.iter().all(|c| c.value_pass && c.order_pass != Some(false));
    Ok(Comparison { cells, passed })
}

fn h_label(result: &StudyResult, row: usize) -> String {
    match (result.uniform, result.mesh_sizes[row]) {
        (true, Some(n)) => format!("1/{n}"),
        _ => format!("{:.6}", result.reports[row].h),
    }
}

/// Text of the study table in `format`.
pub fn render(result: &StudyResult, format: Format) -> Result<String> {
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("h,dofs");
            for n in &result.norms {
                let _ = write!(s, ",{n}");
            }
            for n in &result.norms {
                let _ = write!(s, ",{n}_order");
            }
            s.push('\n');
            for (row, r) in result.reports.iter().enumerate() {
                let _ = write!(s, "{:e},{}", r.h, r.dofs);
                for n in &result.norms {
                    let _ = write!(s, ",{:e}", r.norms[n]);
                }
                for n in &result.norms {
                    match result.orders.get(n).and_then(|c| c.get(row).copied().flatten()) {
                        Some(o) => {
                            let _ = write!(s, ",{o:.6}");
                        }
                        None => s.push(','),
                    }
                }
                s.push('\n');
            }
        }
        Format::Markdown => {
            let _ = writeln!(s, "{} on {} (k = {})", result.scheme, result.problem, result.k);
            s.push('\n');
            s.push_str("| h | dofs |");
            for n in &result.norms {
                let _ = write!(s, " {n} | Order |");
            }
            s.push('\n');
            s.push_str("|---|---:|");
            for _ in &result.norms {
                s.push_str("---:|---:|");
            }
            s.push('\n');
            for (row, r) in result.reports.iter().enumerate() {
                let _ = write!(s, "| {} | {} |", h_label(result, row), r.dofs);
                for n in &result.norms {
                    let order = result
                        .orders
                        .get(n)
                        .and_then(|c| c.get(row).copied().flatten())
                        .map_or_else(|| "\\".to_string(), |o| format!("{o:.4}"));
                    let _ = write!(s, " {:.4E} | {} |", r.norms[n], order);
                }
                s.push('\n');
            }
        }
        Format::Json => {
            s = serde_json::to_string_pretty(result)?;
            s.push('\n');
        }
    }
    Ok(s)
}

/// Writes the rendered table to `path`.
pub fn emit(result: &StudyResult, format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, render(result, format)?)?;
    Ok(())
}

/// Worker count from `FVE_THREADS`; `0` or unset means automatic.
pub fn worker_threads() -> usize {
    std::env::var("FVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Sizes the global worker pool from `FVE_THREADS`. Later calls are no-ops.
pub fn init_thread_pool() {
    let n = worker_threads();
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}
