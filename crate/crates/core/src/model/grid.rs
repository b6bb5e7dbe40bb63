use crate::error::{Error, Result};

/// Regular lattice of cuboid cells. Cell `(i, j, k)` has its centroid at
/// `origin + (i·dx, j·dy, k·dz)`; linear indices run x-fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Centroid of cell (0, 0, 0), meters.
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(format!("cell sizes must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(Self { nx: dims[0], ny: dims[1], nz: dims[2], dx: spacing[0], dy: spacing[1], dz: spacing[2], origin })
    }

    /// Cubic cells of size `h`, with the lattice centered on `center`.
    pub fn centered(dims: [usize; 3], h: f64, center: [f64; 3]) -> Result<Self> {
        let origin = [0, 1, 2].map(|a| center[a] - 0.5 * (dims[a] as f64 - 1.0) * h);
        Self::new(dims, [h, h, h], origin)
    }

    /// Builds a grid from explicit centroid coordinates along each axis.
    /// Only uniformly spaced coordinates are accepted.
    pub fn from_centroid_coords(xs: &[f64], ys: &[f64], zs: &[f64]) -> Result<Self> {
        fn axis_spacing(name: &str, c: &[f64]) -> Result<f64> {
            match c.len() {
                0 => Err(Error::InvalidParameter(format!("axis {name} has no cells"))),
                1 => Err(Error::InvalidParameter(format!("axis {name} has a single centroid; spacing is undefined"))),
                _ => {
                    let h = c[1] - c[0];
                    let tol = 1e-9 * h.abs().max(1.0);
                    if c.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
                        return Err(Error::InvalidParameter(format!("axis {name} is not uniformly spaced")));
                    }
                    Ok(h)
                }
            }
        }
        let spacing = [axis_spacing("x", xs)?, axis_spacing("y", ys)?, axis_spacing("z", zs)?];
        Self::new([xs.len(), ys.len(), zs.len()], spacing, [xs[0], ys[0], zs[0]])
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }

    #[inline]
    pub fn centroid(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.origin[0] + i as f64 * self.dx, self.origin[1] + j as f64 * self.dy, self.origin[2] + k as f64 * self.dz]
    }

    #[inline]
    pub fn centroid_of(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.coords(idx);
        self.centroid(i, j, k)
    }

    /// Index triple of the cell containing `p`, if any. Points on a shared
    /// face resolve to the upper cell.
    pub fn locate(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let dims = self.dims();
        let h = self.spacing();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let t = (p[a] - self.origin[a]) / h[a] + 0.5;
            if !(t >= 0.0) || t >= dims[a] as f64 {
                return None;
            }
            out[a] = t.floor() as usize;
        }
        Some(out)
    }

    /// Like [`Grid::locate`] but clamps to the nearest boundary cell.
    /// The flag reports whether clamping happened.
    pub fn locate_clamped(&self, p: [f64; 3]) -> ([usize; 3], bool) {
        let dims = self.dims();
        let h = self.spacing();
        let mut out = [0usize; 3];
        let mut clamped = false;
        for a in 0..3 {
            let t = ((p[a] - self.origin[a]) / h[a] + 0.5).floor();
            let max = (dims[a] - 1) as f64;
            if t < 0.0 || t > max || t.is_nan() {
                clamped = true;
            }
            out[a] = t.clamp(0.0, max) as usize;
        }
        (out, clamped)
    }

    /// True if both grids share dimensions and geometry.
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self == other
    }

    /// Sub-grid covering `bx`, sharing spacing with `self`.
    pub fn sub_grid(&self, bx: &IndexBox) -> Grid {
        let o = self.centroid(bx.lo[0], bx.lo[1], bx.lo[2]);
        Grid { nx: bx.extent(0), ny: bx.extent(1), nz: bx.extent(2), dx: self.dx, dy: self.dy, dz: self.dz, origin: o }
    }
}

/// Half-open box of cell indices `[lo, hi)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| hi[a] <= lo[a]) {
            return Err(Error::InvalidParameter(format!("empty index box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full(grid: &Grid) -> Self {
        Self { lo: [0; 3], hi: grid.dims() }
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.extent(0), self.extent(1), self.extent(2)]
    }

    pub fn num_cells(&self) -> usize {
        self.extent(0) * self.extent(1) * self.extent(2)
    }

    pub fn fits(&self, grid: &Grid) -> bool {
        let d = grid.dims();
        (0..3).all(|a| self.hi[a] <= d[a])
    }

    #[inline]
    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| c[a] >= self.lo[a] && c[a] < self.hi[a])
    }

    pub fn intersects(&self, other: &IndexBox) -> bool {
        (0..3).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    /// Global linear indices of the box cells, in box-local x-fastest order.
    pub fn global_indices(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_cells());
        for k in self.lo[2]..self.hi[2] {
            for j in self.lo[1]..self.hi[1] {
                for i in self.lo[0]..self.hi[0] {
                    out.push(grid.index(i, j, k));
                }
            }
        }
        out
    }
}
