//! Rectangular primary meshes of the unit square, affine element maps and
//! the per-element dual geometry induced by a dual strategy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dualscheme::DualStrategy;
use crate::error::{FveError, Result};

pub const DEFAULT_C1_BOUND: f64 = 3.0;
pub const DEFAULT_PERTURBATION: f64 = 0.3;

/// Element index `(i, j)`, zero-based: element `(i, j)` is
/// `[x_i, x_{i+1}] x [y_j, y_{j+1}]`.
pub type ElementIndex = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectMesh {
    x_coords: Vec<f64>,
    y_coords: Vec<f64>,
}

fn check_coords(c: &[f64], axis: &str) -> Result<()> {
    if c.len() < 3 {
        return Err(FveError::InvalidArgument(format!(
            "{axis}-direction needs at least two cells"
        )));
    }
    if c[0] != 0.0 || c[c.len() - 1] != 1.0 {
        return Err(FveError::InvalidArgument(format!(
            "{axis}-coordinates must start at 0 and end at 1"
        )));
    }
    if c.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FveError::InvalidArgument(format!(
            "{axis}-coordinates must be strictly increasing"
        )));
    }
    Ok(())
}

impl RectMesh {
    pub fn from_coords(x_coords: Vec<f64>, y_coords: Vec<f64>) -> Result<Self> {
        Self::with_c1_bound(x_coords, y_coords, DEFAULT_C1_BOUND)
    }

    /// Builds a mesh whose quasi-uniformity ratio must not exceed `bound`.
    pub fn with_c1_bound(x_coords: Vec<f64>, y_coords: Vec<f64>, bound: f64) -> Result<Self> {
        check_coords(&x_coords, "x")?;
        check_coords(&y_coords, "y")?;
        let mesh = RectMesh { x_coords, y_coords };
        let c1 = mesh.c1();
        if c1 > bound {
            return Err(FveError::InvalidArgument(format!(
                "quasi-uniformity ratio {c1} exceeds {bound}"
            )));
        }
        Ok(mesh)
    }

    pub fn nx(&self) -> usize {
        self.x_coords.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y_coords.len() - 1
    }

    pub fn x_coords(&self) -> &[f64] {
        &self.x_coords
    }

    pub fn y_coords(&self) -> &[f64] {
        &self.y_coords
    }

    pub fn hx(&self, i: usize) -> f64 {
        self.x_coords[i + 1] - self.x_coords[i]
    }

    pub fn hy(&self, j: usize) -> f64 {
        self.y_coords[j + 1] - self.y_coords[j]
    }

    /// Global mesh size: the largest cell extent in either direction.
    pub fn h(&self) -> f64 {
        let mx = (0..self.nx()).map(|i| self.hx(i)).fold(0.0, f64::max);
        let my = (0..self.ny()).map(|j| self.hy(j)).fold(0.0, f64::max);
        mx.max(my)
    }

    /// Quasi-uniformity ratio `max(h / h_i^x, h / h_j^y)`.
    pub fn c1(&self) -> f64 {
        let h = self.h();
        let mx = (0..self.nx()).map(|i| h / self.hx(i)).fold(0.0, f64::max);
        let my = (0..self.ny()).map(|j| h / self.hy(j)).fold(0.0, f64::max);
        mx.max(my)
    }

    pub fn element_count(&self) -> usize {
        self.nx() * self.ny()
    }

    /// Elements in row-major order (x fastest).
    pub fn elements(&self) -> impl Iterator<Item = ElementIndex> + '_ {
        (0..self.ny()).flat_map(move |j| (0..self.nx()).map(move |i| (i, j)))
    }

    pub fn area(&self, (i, j): ElementIndex) -> f64 {
        self.hx(i) * self.hy(j)
    }

    fn check_element(&self, (i, j): ElementIndex) -> Result<()> {
        if i >= self.nx() || j >= self.ny() {
            return Err(FveError::InvalidArgument(format!(
                "element ({i}, {j}) outside {}x{} mesh",
                self.nx(),
                self.ny()
            )));
        }
        Ok(())
    }

    /// Affine map from the reference square onto element `e`.
    pub fn map_to_element(&self, e: ElementIndex, xr: f64, yr: f64) -> Result<(f64, f64)> {
        self.check_element(e)?;
        Ok(self.map_unchecked(e, xr, yr))
    }

    pub(crate) fn map_unchecked(&self, (i, j): ElementIndex, xr: f64, yr: f64) -> (f64, f64) {
        let (x0, x1) = (self.x_coords[i], self.x_coords[i + 1]);
        let (y0, y1) = (self.y_coords[j], self.y_coords[j + 1]);
        (
            0.5 * (x1 - x0) * xr + 0.5 * (x1 + x0),
            0.5 * (y1 - y0) * yr + 0.5 * (y1 + y0),
        )
    }

    /// Inverse element map; rejects points outside the closed element.
    pub fn map_from_element(&self, e: ElementIndex, x: f64, y: f64) -> Result<(f64, f64)> {
        self.check_element(e)?;
        let (i, j) = e;
        let (x0, x1) = (self.x_coords[i], self.x_coords[i + 1]);
        let (y0, y1) = (self.y_coords[j], self.y_coords[j + 1]);
        let xr = (2.0 * x - (x1 + x0)) / (x1 - x0);
        let yr = (2.0 * y - (y1 + y0)) / (y1 - y0);
        const TOL: f64 = 1e-12;
        if xr.abs() > 1.0 + TOL || yr.abs() > 1.0 + TOL {
            return Err(FveError::OutsideDomain(x, y));
        }
        Ok((xr.clamp(-1.0, 1.0), yr.clamp(-1.0, 1.0)))
    }

    /// Jacobian determinant of the element map, `h_i^x h_j^y / 4`.
    pub fn jacobian(&self, (i, j): ElementIndex) -> f64 {
        0.25 * self.hx(i) * self.hy(j)
    }

    /// An element containing `(x, y)`; ties on shared edges go to the lower index.
    pub fn locate(&self, x: f64, y: f64) -> Result<ElementIndex> {
        let tol = 1e-12;
        if !(-tol..=1.0 + tol).contains(&x) || !(-tol..=1.0 + tol).contains(&y) {
            return Err(FveError::OutsideDomain(x, y));
        }
        Ok((locate_1d(&self.x_coords, x), locate_1d(&self.y_coords, y)))
    }
}

fn locate_1d(c: &[f64], x: f64) -> usize {
    let n = c.len() - 1;
    // first cell whose right end is >= x
    let idx = c[1..].partition_point(|&right| right < x);
    idx.min(n - 1)
}

pub fn uniform_mesh(nx: usize, ny: usize) -> Result<RectMesh> {
    if nx < 2 || ny < 2 {
        return Err(FveError::InvalidArgument(format!(
            "mesh needs at least 2 cells per direction, got {nx}x{ny}"
        )));
    }
    let coords = |n: usize| -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    };
    RectMesh::from_coords(coords(nx), coords(ny))
}

/// Uniform mesh with every interior coordinate jittered by an independent
/// uniform draw in `[-delta/N, delta/N]`.
///
/// Cell widths then lie in `[(1 - 2 delta)/N, (1 + 2 delta)/N]`, so the mesh is
/// checked against `max(3, (1 + 2 delta)/(1 - 2 delta))` times the ratio
/// `max(N) / min(N)` of the two cell counts.
pub fn perturbed_mesh(nx: usize, ny: usize, delta: f64, seed: u64) -> Result<RectMesh> {
    if !(0.0..0.5).contains(&delta) {
        return Err(FveError::InvalidArgument(format!(
            "perturbation must lie in [0, 1/2), got {delta}"
        )));
    }
    let base = uniform_mesh(nx, ny)?;
    if delta == 0.0 {
        return Ok(base);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |n: usize| -> Vec<f64> {
        let step = 1.0 / n as f64;
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    i as f64 * step
                } else {
                    i as f64 * step + rng.gen_range(-delta..=delta) * step
                }
            })
            .collect()
    };
    let x = jitter(nx);
    let y = jitter(ny);
    let aspect = nx.max(ny) as f64 / nx.min(ny) as f64;
    let bound = DEFAULT_C1_BOUND.max(perturbed_c1_bound(delta) * aspect);
    RectMesh::with_c1_bound(x, y, bound)
}

/// Worst-case quasi-uniformity ratio of a square perturbed mesh.
pub fn perturbed_c1_bound(delta: f64) -> f64 {
    (1.0 + 2.0 * delta) / (1.0 - 2.0 * delta)
}

/// Mesh description as read from JSON: either a generated family member or
/// explicit coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSpec {
    Generated {
        nx: usize,
        ny: usize,
        #[serde(default)]
        perturb: f64,
        #[serde(default)]
        seed: u64,
    },
    Explicit {
        x_coords: Vec<f64>,
        y_coords: Vec<f64>,
    },
}

impl MeshSpec {
    pub fn build(&self) -> Result<RectMesh> {
        match self {
            MeshSpec::Generated {
                nx,
                ny,
                perturb,
                seed,
            } => perturbed_mesh(*nx, *ny, *perturb, *seed),
            MeshSpec::Explicit { x_coords, y_coords } => {
                RectMesh::from_coords(x_coords.clone(), y_coords.clone())
            }
        }
    }
}

/// Dual geometry inside one element.
#[derive(Debug, Clone)]
pub struct ElementDualGeometry {
    pub element: ElementIndex,
    /// `x_i, alpha^x_{1,K}, ..., alpha^x_{k,K}, x_{i+1}`.
    pub x_breaks: Vec<f64>,
    /// `y_j, alpha^y_{1,K}, ..., alpha^y_{k,K}, y_{j+1}`.
    pub y_breaks: Vec<f64>,
}

/// One piece of a dual line inside an element: the segment separates sub-cell
/// `minus` from sub-cell `plus`, and the normal points from `minus` into `plus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSegment {
    /// `true` for a line `x = const` (normal along +x).
    pub vertical: bool,
    /// Fixed coordinate of the line.
    pub at: f64,
    /// Extent along the line.
    pub from: f64,
    pub to: f64,
    pub minus: (usize, usize),
    pub plus: (usize, usize),
}

impl ElementDualGeometry {
    pub fn k(&self) -> usize {
        self.x_breaks.len() - 2
    }

    /// Dual abscissae `alpha^x_{s,K}`.
    pub fn dual_x(&self) -> &[f64] {
        &self.x_breaks[1..self.x_breaks.len() - 1]
    }

    pub fn dual_y(&self) -> &[f64] {
        &self.y_breaks[1..self.y_breaks.len() - 1]
    }

    /// Sub-cell `(s, t)`, `0 <= s, t <= k`, as `(x0, x1, y0, y1)`. It belongs to
    /// the control volume of local trial node `(s, t)`.
    pub fn sub_cell(&self, s: usize, t: usize) -> (f64, f64, f64, f64) {
        (
            self.x_breaks[s],
            self.x_breaks[s + 1],
            self.y_breaks[t],
            self.y_breaks[t + 1],
        )
    }

    pub fn sub_cell_area(&self, s: usize, t: usize) -> f64 {
        let (x0, x1, y0, y1) = self.sub_cell(s, t);
        (x1 - x0) * (y1 - y0)
    }

    /// The `2k (k + 1)` interior dual-line segments with orientation.
    pub fn segments(&self) -> Vec<DualSegment> {
        let k = self.k();
        let mut out = Vec::with_capacity(2 * k * (k + 1));
        for s in 1..=k {
            for t in 0..=k {
                out.push(DualSegment {
                    vertical: true,
                    at: self.x_breaks[s],
                    from: self.y_breaks[t],
                    to: self.y_breaks[t + 1],
                    minus: (s - 1, t),
                    plus: (s, t),
                });
            }
        }
        for t in 1..=k {
            for s in 0..=k {
                out.push(DualSegment {
                    vertical: false,
                    at: self.y_breaks[t],
                    from: self.x_breaks[s],
                    to: self.x_breaks[s + 1],
                    minus: (s, t - 1),
                    plus: (s, t),
                });
            }
        }
        out
    }
}

pub fn element_dual_geometry(
    mesh: &RectMesh,
    strategy: &DualStrategy,
    e: ElementIndex,
) -> Result<ElementDualGeometry> {
    mesh.check_element(e)?;
    let (i, j) = e;
    let map1 = |lo: f64, hi: f64, br: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = br.iter().map(|&t| 0.5 * (hi - lo) * t + 0.5 * (hi + lo)).collect();
        let n = v.len();
        v[0] = lo;
        v[n - 1] = hi;
        v
    };
    Ok(ElementDualGeometry {
        element: e,
        x_breaks: map1(mesh.x_coords[i], mesh.x_coords[i + 1], &strategy.x.breakpoints()),
        y_breaks: map1(mesh.y_coords[j], mesh.y_coords[j + 1], &strategy.y.breakpoints()),
    })
}

/// Global numbering of the tensor Lagrange nodes of order `k`.
///
/// Node `(I, J)` with `0 <= I <= k N_x`, `0 <= J <= k N_y` has global index
/// `I + J (k N_x + 1)`; interior nodes additionally get a compact index.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
    interior_index: Vec<Option<usize>>,
    interior_count: usize,
}

impl DofMap {
    pub fn new(mesh: &RectMesh, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(FveError::InvalidArgument("k must be at least 1".into()));
        }
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let (gx, gy) = (k * nx + 1, k * ny + 1);
        let mut interior_index = vec![None; gx * gy];
        let mut next = 0;
        for jj in 0..gy {
            for ii in 0..gx {
                if ii != 0 && jj != 0 && ii != gx - 1 && jj != gy - 1 {
                    interior_index[ii + jj * gx] = Some(next);
                    next += 1;
                }
            }
        }
        Ok(DofMap {
            k,
            nx,
            ny,
            interior_index,
            interior_count: next,
        })
    }

    pub fn grid_x(&self) -> usize {
        self.k * self.nx + 1
    }

    pub fn grid_y(&self) -> usize {
        self.k * self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.grid_x() * self.grid_y()
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    /// Global index of local node `(p, q)` of element `(i, j)`.
    pub fn global(&self, (i, j): ElementIndex, p: usize, q: usize) -> usize {
        (self.k * i + p) + (self.k * j + q) * self.grid_x()
    }

    /// Grid coordinates `(I, J)` of a global node.
    pub fn grid_coords(&self, g: usize) -> (usize, usize) {
        (g % self.grid_x(), g / self.grid_x())
    }

    pub fn is_boundary(&self, g: usize) -> bool {
        self.interior_index[g].is_none()
    }

    pub fn interior(&self, g: usize) -> Option<usize> {
        self.interior_index[g]
    }

    /// Boundary mask over all global nodes.
    pub fn boundary_mask(&self) -> Vec<bool> {
        self.interior_index.iter().map(Option::is_none).collect()
    }

    /// Local node indices of element `e` in `(p, q)` order, `p` fastest.
    pub fn element_nodes(&self, e: ElementIndex) -> Vec<usize> {
        let k = self.k;
        let mut v = Vec::with_capacity((k + 1) * (k + 1));
        for q in 0..=k {
            for p in 0..=k {
                v.push(self.global(e, p, q));
            }
        }
        v
    }
}

pub fn global_dof_map(mesh: &RectMesh, k: usize) -> Result<DofMap> {
    DofMap::new(mesh, k)
}
