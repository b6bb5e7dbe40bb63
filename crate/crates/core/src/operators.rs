//! Complex vector fields, FFT convolution with Green's kernels, the system
//! operator `I − 𝒢Δσ`, and box-to-box scattering.
//!
//! Box-local arrays are stored component-major: all x components in
//! x-fastest cell order, then all y, then all z.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{Background, GreenKernel, KernelKind, PairGeometry, DEFAULT_KERNEL_BYTES_LIMIT};
use crate::krylov::{norm, LinearOperator};
use crate::model::{write_grid_file, ContrastField, Grid, IndexBox, Tensor3x3};

/// A complex 3-vector per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVectorField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ComplexVectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { data: vec![Complex64::default(); 3 * grid.num_cells()], grid }
    }

    pub fn from_data(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != 3 * grid.num_cells() {
            return Err(Error::Dimension(format!(
                "field data of length {} for a grid of {} cells",
                data.len(),
                grid.num_cells()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize) -> [Complex64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for c in 0..grid.num_cells() {
            out.set(c, f(c));
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.num_cells();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, cell: usize) -> [Complex64; 3] {
        let n = self.num_cells();
        [self.data[cell], self.data[n + cell], self.data[2 * n + cell]]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, v: [Complex64; 3]) {
        let n = self.num_cells();
        self.data[cell] = v[0];
        self.data[n + cell] = v[1];
        self.data[2 * n + cell] = v[2];
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    /// L2 norm over the cells flagged in `cells`.
    pub fn norm_on(&self, cells: &[bool]) -> f64 {
        let n = self.num_cells();
        let mut acc = 0.0;
        for (idx, _) in cells.iter().enumerate().filter(|(_, &b)| b) {
            for c in 0..3 {
                acc += self.data[c * n + idx].norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Copy of the values inside `bx`, on the corresponding sub-grid.
    pub fn restrict(&self, bx: &IndexBox) -> Result<ComplexVectorField> {
        if !bx.fits(&self.grid) {
            return Err(Error::Dimension("box exceeds the field's grid".into()));
        }
        let sub = self.grid.sub_grid(bx);
        let cells = bx.global_indices(&self.grid);
        Ok(Self::from_fn(sub, |c| self.get(cells[c])))
    }

    /// Writes `values` into the cells of `bx`.
    pub fn insert(&mut self, bx: &IndexBox, values: &ComplexVectorField) -> Result<()> {
        if !bx.fits(&self.grid) || values.num_cells() != bx.num_cells() {
            return Err(Error::Dimension("box does not match the inserted field".into()));
        }
        for (local, global) in bx.global_indices(&self.grid).into_iter().enumerate() {
            self.set(global, values.get(local));
        }
        Ok(())
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Writes the field in the binary grid format as
    /// `[Re x, Im x, Re y, Im y, Re z, Im z]` per cell.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let cells = (0..self.num_cells()).map(|c| {
            let v = self.get(c);
            [v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im]
        });
        write_grid_file(path, &self.grid, cells)
    }
}

/// Relative L2 difference `‖a − b‖ / ‖b‖`.
pub fn relative_difference(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    num.sqrt() / norm(b)
}

/// Contrast tensors of one rectangular box, with the anomalous cells listed
/// in box-local order.
#[derive(Clone, Debug)]
pub struct SubdomainContrast {
    bx: IndexBox,
    grid: Grid,
    tensors: Vec<Tensor3x3>,
    mask: Vec<bool>,
    active: Vec<usize>,
}

impl SubdomainContrast {
    pub fn new(contrast: &ContrastField, bx: IndexBox) -> Result<Self> {
        if !bx.fits(&contrast.grid) {
            return Err(Error::UnsupportedLayout(format!("box {bx:?} exceeds the model grid")));
        }
        let cells = bx.global_indices(&contrast.grid);
        let tensors: Vec<Tensor3x3> = cells.iter().map(|&c| contrast.tensors[c]).collect();
        let mask: Vec<bool> = cells.iter().map(|&c| contrast.mask.get(c)).collect();
        let active = mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect();
        Ok(Self { bx, grid: contrast.grid.sub_grid(&bx), tensors, mask, active })
    }

    /// The whole model grid as a single box.
    pub fn full(contrast: &ContrastField) -> Result<Self> {
        Self::new(contrast, IndexBox::full(&contrast.grid))
    }

    pub fn index_box(&self) -> &IndexBox {
        &self.bx
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tensors(&self) -> &[Tensor3x3] {
        &self.tensors
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Box-local indices of anomalous cells.
    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    /// Compresses a box-local field to its anomalous cells.
    pub fn gather(&self, full: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.num_cells();
        let m = self.active.len();
        let mut out = vec![Complex64::default(); 3 * m];
        for c in 0..3 {
            for (k, &cell) in self.active.iter().enumerate() {
                out[c * m + k] = full[c * n + cell];
            }
        }
        out
    }

    /// Expands compressed values to a box-local field, zero elsewhere.
    pub fn scatter(&self, compressed: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.num_cells();
        let m = self.active.len();
        let mut out = vec![Complex64::default(); 3 * n];
        for c in 0..3 {
            for (k, &cell) in self.active.iter().enumerate() {
                out[c * n + cell] = compressed[c * m + k];
            }
        }
        out
    }

    /// Contrast source `Δσ·E` on the box from compressed `E`, zero outside
    /// anomalous cells.
    pub fn source_from_compressed(&self, e: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.num_cells();
        let m = self.active.len();
        let mut out = vec![Complex64::default(); 3 * n];
        for (k, &cell) in self.active.iter().enumerate() {
            let v = self.tensors[cell].apply([e[k], e[m + k], e[2 * m + k]]);
            for c in 0..3 {
                out[c * n + cell] = v[c];
            }
        }
        out
    }

    /// Contrast source from a box-local field.
    pub fn source_from_full(&self, e: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.num_cells();
        let mut out = vec![Complex64::default(); 3 * n];
        for &cell in &self.active {
            let v = self.tensors[cell].apply([e[cell], e[n + cell], e[2 * n + cell]]);
            for c in 0..3 {
                out[c * n + cell] = v[c];
            }
        }
        out
    }
}

/// Box-pair kernels on one lattice, shared by every pair with the same
/// target/source geometry.
pub struct KernelCache {
    kind: KernelKind,
    spacing: [f64; 3],
    background: Background,
    limit_bytes: u64,
    kernels: Mutex<HashMap<PairGeometry, Arc<GreenKernel>>>,
}

impl KernelCache {
    pub fn new(kind: KernelKind, spacing: [f64; 3], background: Background) -> Self {
        Self { kind, spacing, background, limit_bytes: DEFAULT_KERNEL_BYTES_LIMIT, kernels: Mutex::new(HashMap::new()) }
    }

    pub fn with_limit(mut self, limit_bytes: u64) -> Self {
        self.limit_bytes = limit_bytes;
        self
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    /// Kernel mapping sources in `source` to fields in `target`.
    pub fn pair(&self, target: &IndexBox, source: &IndexBox) -> Result<Arc<GreenKernel>> {
        let geometry = PairGeometry {
            target: target.dims(),
            source: source.dims(),
            offset: [0, 1, 2].map(|a| target.lo[a] as i64 - source.lo[a] as i64),
        };
        self.get(geometry)
    }

    pub fn get(&self, geometry: PairGeometry) -> Result<Arc<GreenKernel>> {
        if let Some(k) = self.kernels.lock().expect("kernel cache poisoned").get(&geometry) {
            return Ok(Arc::clone(k));
        }
        let k = Arc::new(GreenKernel::assemble(self.kind, geometry, self.spacing, &self.background, self.limit_bytes)?);
        self.kernels.lock().expect("kernel cache poisoned").entry(geometry).or_insert_with(|| Arc::clone(&k));
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.kernels.lock().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `Σ_q 𝒢_pq source_q` on the source's own grid.
pub fn convolve(kernel: &GreenKernel, source: &ComplexVectorField) -> Result<ComplexVectorField> {
    let geom = kernel.geometry();
    let dims = source.grid().dims();
    if geom.target != dims || geom.source != dims || geom.offset != [0; 3] {
        return Err(Error::Dimension(format!("kernel geometry {geom:?} does not match a field of dims {dims:?}")));
    }
    check_spacing(kernel, source.grid())?;
    let mut out = ComplexVectorField::zeros(*source.grid());
    kernel.convolve(source.data(), out.data_mut(), false);
    Ok(out)
}

fn check_spacing(kernel: &GreenKernel, grid: &Grid) -> Result<()> {
    let s = grid.spacing();
    let k = kernel.key().spacing;
    if (0..3).any(|a| (s[a] - k[a]).abs() > 1e-12 * k[a]) {
        return Err(Error::Dimension("kernel spacing differs from the grid spacing".into()));
    }
    Ok(())
}

/// Scattered field on box `target` from contrast sources `Δσ_j E_j` in the
/// box of `contrast_j`. `e_j` is the box-local field on `Ω_j`.
pub fn cross_domain_scatter(
    kernel_ij: &GreenKernel,
    target: &IndexBox,
    contrast_j: &SubdomainContrast,
    e_j: &ComplexVectorField,
) -> Result<ComplexVectorField> {
    let geom = kernel_ij.geometry();
    let src_box = contrast_j.index_box();
    let expected = PairGeometry {
        target: target.dims(),
        source: src_box.dims(),
        offset: [0, 1, 2].map(|a| target.lo[a] as i64 - src_box.lo[a] as i64),
    };
    if *geom != expected {
        return Err(Error::UnsupportedLayout(format!(
            "kernel geometry {geom:?} does not match the box pair {expected:?}"
        )));
    }
    if e_j.grid().dims() != src_box.dims() {
        return Err(Error::Dimension("source field does not cover its sub-domain box".into()));
    }
    check_spacing(kernel_ij, contrast_j.grid())?;
    let source = contrast_j.source_from_full(e_j.data());
    let h = contrast_j.grid().spacing();
    let o = contrast_j.grid().origin;
    let origin = [0, 1, 2].map(|a| o[a] + expected.offset[a] as f64 * h[a]);
    let grid = Grid::new(target.dims(), h, origin)?;
    let mut out = ComplexVectorField::zeros(grid);
    kernel_ij.convolve(&source, out.data_mut(), false);
    Ok(out)
}

/// `I − 𝒢Δσ` on one box.
#[derive(Clone)]
pub struct SystemOperator {
    kernel: Arc<GreenKernel>,
    contrast: Arc<SubdomainContrast>,
}

impl SystemOperator {
    pub fn new(kernel: Arc<GreenKernel>, contrast: Arc<SubdomainContrast>) -> Result<Self> {
        let dims = contrast.grid().dims();
        if *kernel.geometry() != PairGeometry::same(dims) || kernel.kind() != KernelKind::Electric {
            return Err(Error::Dimension("system operator needs the box's own electric kernel".into()));
        }
        check_spacing(&kernel, contrast.grid())?;
        Ok(Self { kernel, contrast })
    }

    /// Full-grid operator for a contrast field.
    pub fn for_model(contrast: &ContrastField, bg: &Background) -> Result<Self> {
        let sub = SubdomainContrast::full(contrast)?;
        let kernel = GreenKernel::electric(PairGeometry::same(contrast.grid.dims()), contrast.grid.spacing(), bg)?;
        Self::new(Arc::new(kernel), Arc::new(sub))
    }

    pub fn kernel(&self) -> &Arc<GreenKernel> {
        &self.kernel
    }

    pub fn contrast(&self) -> &Arc<SubdomainContrast> {
        &self.contrast
    }

    fn check(&self, e: &ComplexVectorField) -> Result<()> {
        if e.grid().dims() != self.contrast.grid().dims() {
            return Err(Error::Dimension("field grid differs from the operator grid".into()));
        }
        Ok(())
    }

    /// `E − 𝒢(Δσ·E)` on every cell of the box.
    pub fn apply_system(&self, e: &ComplexVectorField) -> Result<ComplexVectorField> {
        self.check(e)?;
        let source = self.contrast.source_from_full(e.data());
        let mut out = ComplexVectorField::zeros(*e.grid());
        self.kernel.convolve(&source, out.data_mut(), false);
        for (o, v) in out.data_mut().iter_mut().zip(e.data()) {
            *o = v - *o;
        }
        Ok(out)
    }

    /// `‖E0 − (I − 𝒢Δσ)E‖ / ‖E0‖` with both norms over anomalous cells.
    pub fn relative_residual(&self, e: &ComplexVectorField, e0: &ComplexVectorField) -> Result<f64> {
        self.check(e0)?;
        let mask = self.contrast.mask();
        let denom = e0.norm_on(mask);
        if denom == 0.0 {
            return Err(Error::UndefinedResidual);
        }
        let mut r = self.apply_system(e)?;
        for (ri, bi) in r.data_mut().iter_mut().zip(e0.data()) {
            *ri = bi - *ri;
        }
        Ok(r.norm_on(mask) / denom)
    }

    /// The operator restricted to anomalous cells, acting on compressed
    /// vectors of length `3 × active cells`.
    pub fn masked(&self) -> MaskedOperator<'_> {
        MaskedOperator { op: self }
    }
}

pub struct MaskedOperator<'a> {
    op: &'a SystemOperator,
}

impl LinearOperator for MaskedOperator<'_> {
    fn dim(&self) -> usize {
        3 * self.op.contrast.num_active()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let c = &self.op.contrast;
        let source = c.source_from_compressed(x);
        let mut full = vec![Complex64::default(); source.len()];
        self.op.kernel.convolve(&source, &mut full, false);
        let scattered = c.gather(&full);
        for ((yi, xi), si) in y.iter_mut().zip(x).zip(&scattered) {
            *yi = xi - si;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConductivityModel;

    fn bg() -> Background {
        Background::new(0.1, 24_000.0).unwrap()
    }

    fn field(grid: Grid, seed: f64) -> ComplexVectorField {
        let n = grid.num_cells();
        let data = (0..3 * n)
            .map(|i| Complex64::new(((i as f64 + seed) * 0.71).sin(), ((i as f64 - seed) * 0.29).cos()))
            .collect();
        ComplexVectorField::from_data(grid, data).unwrap()
    }

    #[test]
    fn zero_contrast_system_is_identity() {
        let g = Grid::new([3, 2, 2], [0.5; 3], [0.0; 3]).unwrap();
        let m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.1), 0.1).unwrap();
        let op = SystemOperator::for_model(&m.contrast(), &bg()).unwrap();
        let e = field(g, 1.0);
        assert_eq!(op.apply_system(&e).unwrap(), e);
        assert_eq!(op.relative_residual(&e, &e).unwrap_err().to_string(), Error::UndefinedResidual.to_string());
    }

    #[test]
    fn residual_of_zero_field_is_one() {
        let g = Grid::new([3, 2, 2], [0.5; 3], [0.0; 3]).unwrap();
        let mut m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.1), 0.1).unwrap();
        m.set_tensor(3, Tensor3x3::isotropic(0.02));
        let op = SystemOperator::for_model(&m.contrast(), &bg()).unwrap();
        let e0 = field(g, 2.0);
        let r = op.relative_residual(&ComplexVectorField::zeros(g), &e0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn masked_operator_matches_full_operator_on_mask() {
        let g = Grid::new([4, 3, 2], [0.5; 3], [0.0; 3]).unwrap();
        let mut m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.1), 0.1).unwrap();
        for c in [1, 5, 7, 20] {
            m.set_tensor(c, Tensor3x3::diagonal(0.3, 0.2, 0.05));
        }
        let op = SystemOperator::for_model(&m.contrast(), &bg()).unwrap();
        let mut e = field(g, 3.0);
        let mask = op.contrast().mask().to_vec();
        for cell in 0..g.num_cells() {
            if !mask[cell] {
                e.set(cell, [Complex64::default(); 3]);
            }
        }
        let full = op.apply_system(&e).unwrap();
        let x = op.contrast().gather(e.data());
        let mut y = vec![Complex64::default(); x.len()];
        op.masked().apply(&x, &mut y);
        let want = op.contrast().gather(full.data());
        assert!(relative_difference(&y, &want) < 1e-14);
    }

    #[test]
    fn kernel_cache_shares_geometries() {
        let cache = KernelCache::new(KernelKind::Electric, [1.0; 3], bg());
        let a = IndexBox::new([0, 0, 0], [2, 2, 2]).unwrap();
        let b = IndexBox::new([0, 0, 4], [2, 2, 6]).unwrap();
        let c = IndexBox::new([0, 0, 8], [2, 2, 10]).unwrap();
        let k1 = cache.pair(&a, &b).unwrap();
        let k2 = cache.pair(&b, &c).unwrap();
        assert!(Arc::ptr_eq(&k1, &k2));
        cache.pair(&b, &a).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn restrict_insert_roundtrip() {
        let g = Grid::new([4, 3, 2], [1.0; 3], [0.0; 3]).unwrap();
        let e = field(g, 0.5);
        let bx = IndexBox::new([1, 1, 0], [3, 3, 2]).unwrap();
        let part = e.restrict(&bx).unwrap();
        assert_eq!(part.grid().origin, [1.0, 1.0, 0.0]);
        let mut z = ComplexVectorField::zeros(g);
        z.insert(&bx, &part).unwrap();
        assert_eq!(z.get(g.index(2, 1, 1)), e.get(g.index(2, 1, 1)));
        assert_eq!(z.get(0), [Complex64::default(); 3]);
    }
}
