//! Uniform grids on intervals, rectangles and masked disks.
//!
//! Grids are immutable after construction; solvers share them behind `Arc`.
//! Disk domains are represented by masking a tensor grid: nodes outside the
//! disk are exterior, in-disk nodes missing part of their 9-point stencil form
//! the staircase boundary ring, the rest are interior.

use crate::error::{Error, Result};
use crate::real::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    /// Tensor node outside a masked domain; carries no unknown.
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridShape<T> {
    Interval { a: T, b: T },
    Rectangle { x0: T, x1: T, y0: T, y1: T },
    Disk { cx: T, cy: T, radius: T },
}

#[derive(Debug, Clone)]
pub struct Grid<T> {
    dim: usize,
    shape: GridShape<T>,
    /// subdivisions per axis; `[n, 0]` in 1D
    n: [usize; 2],
    spacing: [T; 2],
    coords: Vec<[T; 2]>,
    kind: Vec<NodeKind>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// inward grid direction per node (meaningful on boundary nodes)
    inward: Vec<[i32; 2]>,
    dist: Vec<T>,
}

/// Interval grid with `n` subdivisions; endpoints are the boundary.
pub fn build_interval_grid<T: Real>(a: T, b: T, n: usize) -> Result<Grid<T>> {
    if !(a < b) {
        return Err(Error::Config(format!("interval requires a < b, got [{a}, {b}]")));
    }
    if n < 3 {
        return Err(Error::Config(format!("interval grid needs n >= 3, got {n}")));
    }
    let h = (b - a) / real::<T>(n as f64);
    let count = n + 1;
    let mut coords = Vec::with_capacity(count);
    let mut kind = Vec::with_capacity(count);
    let mut inward = Vec::with_capacity(count);
    for i in 0..count {
        let x = a + h * real::<T>(i as f64);
        coords.push([x, T::zero()]);
        if i == 0 {
            kind.push(NodeKind::Boundary);
            inward.push([1, 0]);
        } else if i == n {
            kind.push(NodeKind::Boundary);
            inward.push([-1, 0]);
        } else {
            kind.push(NodeKind::Interior);
            inward.push([0, 0]);
        }
    }
    let interior = (1..n).collect();
    let boundary = vec![0, n];
    let mut grid = Grid {
        dim: 1,
        shape: GridShape::Interval { a, b },
        n: [n, 0],
        spacing: [h, T::zero()],
        coords,
        kind,
        interior,
        boundary,
        inward,
        dist: Vec::new(),
    };
    grid.dist = grid.compute_distances();
    Ok(grid)
}

/// Planar tensor grid over a rectangle, or over the bounding square of a disk
/// with exterior nodes masked out.
pub fn build_planar_grid<T: Real>(shape: GridShape<T>, n: usize) -> Result<Grid<T>> {
    match shape {
        GridShape::Interval { .. } => Err(Error::Config(
            "build_planar_grid expects a rectangle or disk".into(),
        )),
        GridShape::Rectangle { x0, x1, y0, y1 } => {
            if !(x0 < x1 && y0 < y1) {
                return Err(Error::Config("degenerate rectangle extents".into()));
            }
            if n < 3 {
                return Err(Error::Config(format!("planar grid needs n >= 3, got {n}")));
            }
            build_rectangle(x0, x1, y0, y1, n)
        }
        GridShape::Disk { cx, cy, radius } => {
            if !(radius > T::zero()) {
                return Err(Error::Config("disk radius must be positive".into()));
            }
            if n < 8 {
                return Err(Error::Config(format!(
                    "disk mask needs n >= 8 subdivisions, got {n}"
                )));
            }
            build_disk(cx, cy, radius, n)
        }
    }
}

fn build_rectangle<T: Real>(x0: T, x1: T, y0: T, y1: T, n: usize) -> Result<Grid<T>> {
    let hx = (x1 - x0) / real::<T>(n as f64);
    let hy = (y1 - y0) / real::<T>(n as f64);
    let side = n + 1;
    let count = side * side;
    let mut coords = Vec::with_capacity(count);
    let mut kind = Vec::with_capacity(count);
    let mut inward = Vec::with_capacity(count);
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for j in 0..side {
        for i in 0..side {
            let idx = j * side + i;
            coords.push([
                x0 + hx * real::<T>(i as f64),
                y0 + hy * real::<T>(j as f64),
            ]);
            let on_edge = i == 0 || i == n || j == 0 || j == n;
            if on_edge {
                kind.push(NodeKind::Boundary);
                boundary.push(idx);
                let di = if i == 0 {
                    1
                } else if i == n {
                    -1
                } else {
                    0
                };
                let dj = if j == 0 {
                    1
                } else if j == n {
                    -1
                } else {
                    0
                };
                inward.push([di, dj]);
            } else {
                kind.push(NodeKind::Interior);
                interior.push(idx);
                inward.push([0, 0]);
            }
        }
    }
    let mut grid = Grid {
        dim: 2,
        shape: GridShape::Rectangle { x0, x1, y0, y1 },
        n: [n, n],
        spacing: [hx, hy],
        coords,
        kind,
        interior,
        boundary,
        inward,
        dist: Vec::new(),
    };
    grid.dist = grid.compute_distances();
    Ok(grid)
}

fn build_disk<T: Real>(cx: T, cy: T, radius: T, n: usize) -> Result<Grid<T>> {
    let x0 = cx - radius;
    let y0 = cy - radius;
    let h = (radius + radius) / real::<T>(n as f64);
    let side = n + 1;
    let count = side * side;
    let mut coords = Vec::with_capacity(count);
    let mut in_disk = Vec::with_capacity(count);
    for j in 0..side {
        for i in 0..side {
            let x = x0 + h * real::<T>(i as f64);
            let y = y0 + h * real::<T>(j as f64);
            coords.push([x, y]);
            let dx = x - cx;
            let dy = y - cy;
            in_disk.push(dx * dx + dy * dy <= radius * radius);
        }
    }
    let at = |i: i64, j: i64| -> bool {
        if i < 0 || j < 0 || i as usize > n || j as usize > n {
            false
        } else {
            in_disk[j as usize * side + i as usize]
        }
    };
    let mut kind = vec![NodeKind::Exterior; count];
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut inward = vec![[0i32; 2]; count];
    for j in 0..side {
        for i in 0..side {
            let idx = j * side + i;
            if !in_disk[idx] {
                continue;
            }
            let mut full = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if !at(i as i64 + di, j as i64 + dj) {
                        full = false;
                    }
                }
            }
            if full {
                kind[idx] = NodeKind::Interior;
                interior.push(idx);
            } else {
                kind[idx] = NodeKind::Boundary;
                boundary.push(idx);
            }
        }
    }
    if interior.is_empty() {
        return Err(Error::Config(
            "disk mask produced no interior nodes; increase n".into(),
        ));
    }
    // inward direction: 8-neighbor offset toward the center, landing in-disk
    for &idx in &boundary {
        let i = (idx % side) as i64;
        let j = (idx / side) as i64;
        let tx = cx - coords[idx][0];
        let ty = cy - coords[idx][1];
        let mut best: Option<([i32; 2], T)> = None;
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                if !at(i + di, j + dj) {
                    continue;
                }
                let len = ((di * di + dj * dj) as f64).sqrt();
                let dot = (tx * real::<T>(di as f64) + ty * real::<T>(dj as f64))
                    / real::<T>(len);
                match best {
                    Some((_, d)) if d >= dot => {}
                    _ => best = Some(([di as i32, dj as i32], dot)),
                }
            }
        }
        inward[idx] = best.map(|(d, _)| d).unwrap_or([0, 0]);
    }
    let mut grid = Grid {
        dim: 2,
        shape: GridShape::Disk { cx, cy, radius },
        n: [n, n],
        spacing: [h, h],
        coords,
        kind,
        interior,
        boundary,
        inward,
        dist: Vec::new(),
    };
    grid.dist = grid.compute_distances();
    Ok(grid)
}

impl<T: Real> Grid<T> {
    fn compute_distances(&self) -> Vec<T> {
        let mut dist = vec![T::zero(); self.coords.len()];
        for idx in 0..self.coords.len() {
            match self.kind[idx] {
                NodeKind::Boundary => dist[idx] = T::zero(),
                NodeKind::Exterior => dist[idx] = T::zero(),
                NodeKind::Interior => {
                    let mut best = T::infinity();
                    let p = self.coords[idx];
                    for &b in &self.boundary {
                        let q = self.coords[b];
                        let dx = p[0] - q[0];
                        let dy = p[1] - q[1];
                        let d = (dx * dx + dy * dy).sqrt();
                        if d < best {
                            best = d;
                        }
                    }
                    dist[idx] = best;
                }
            }
        }
        dist
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> GridShape<T> {
        self.shape
    }

    pub fn subdivisions(&self) -> usize {
        self.n[0]
    }

    /// total tensor nodes, including exterior ones on masked grids
    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn spacing(&self) -> [T; 2] {
        self.spacing
    }

    pub fn coords(&self, idx: usize) -> [T; 2] {
        self.coords[idx]
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kind[idx]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.kind[idx] == NodeKind::Interior
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.kind[idx] == NodeKind::Boundary
    }

    pub fn distance_to_boundary(&self, idx: usize) -> T {
        self.dist[idx]
    }

    /// Tensor indices `(i, j)` of a node (`j = 0` in 1D).
    pub fn tensor_indices(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            let side = self.n[0] + 1;
            (idx % side, idx / side)
        }
    }

    /// Node at tensor offset `(di, dj)`; `None` off the tensor or exterior.
    pub fn neighbor(&self, idx: usize, di: i32, dj: i32) -> Option<usize> {
        let (i, j) = self.tensor_indices(idx);
        let ni = i as i64 + di as i64;
        let nj = j as i64 + dj as i64;
        if ni < 0 || ni as usize > self.n[0] {
            return None;
        }
        if self.dim == 1 {
            if nj != 0 {
                return None;
            }
            return Some(ni as usize);
        }
        if nj < 0 || nj as usize > self.n[1] {
            return None;
        }
        let side = self.n[0] + 1;
        let nidx = nj as usize * side + ni as usize;
        if self.kind[nidx] == NodeKind::Exterior {
            None
        } else {
            Some(nidx)
        }
    }

    /// Inward grid direction at a boundary node.
    pub fn inward_direction(&self, idx: usize) -> [i32; 2] {
        self.inward[idx]
    }

    /// Inward neighbor of a boundary node and the Euclidean step to it.
    pub fn inward_neighbor(&self, idx: usize) -> Option<(usize, T)> {
        let [di, dj] = self.inward[idx];
        if di == 0 && dj == 0 {
            return None;
        }
        let nb = self.neighbor(idx, di, dj)?;
        let len = real::<T>(((di * di + dj * dj) as f64).sqrt());
        let step = if self.dim == 1 {
            self.spacing[0]
        } else {
            // uniform per-axis spacing on planar grids built here
            self.spacing[0] * len
        };
        Some((nb, step))
    }

    /// Grid node nearest the domain centroid; default probe for diagnostics.
    pub fn centroid_node(&self) -> usize {
        let c = match self.shape {
            GridShape::Interval { a, b } => [(a + b) / real::<T>(2.0), T::zero()],
            GridShape::Rectangle { x0, x1, y0, y1 } => {
                [(x0 + x1) / real::<T>(2.0), (y0 + y1) / real::<T>(2.0)]
            }
            GridShape::Disk { cx, cy, .. } => [cx, cy],
        };
        let mut best = self.interior[0];
        let mut best_d = T::infinity();
        for &idx in &self.interior {
            let p = self.coords[idx];
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        best
    }

    /// Centered second-difference weights along one axis: `(1, -2, 1) / h^2`.
    pub fn second_difference_weights(&self, axis: usize) -> [T; 3] {
        let h = self.spacing[axis];
        let w = T::one() / (h * h);
        [w, -(w + w), w]
    }
}
