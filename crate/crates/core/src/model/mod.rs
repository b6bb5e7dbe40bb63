//! Grids, anisotropic conductivity models, and conductivity contrasts.
//!
//! Tensors are kept in the six-entry symmetric layout and only expanded to
//! full 3×3 form where an operator needs it.

mod benchmarks;
mod grid;
mod io;
mod tensor;

pub use benchmarks::{build_benchmark_model, BenchmarkCase, BenchmarkName, FaultedFormation};
pub use grid::{Grid, IndexBox};
pub use io::{read_grid_file, write_grid_file, GridFileHeader};
pub use tensor::{rotate_vti_tensor, Tensor3x3};

use crate::error::{Error, Result};

/// Default absolute threshold separating intentional zero contrast from
/// floating-point noise, S/m.
pub const DEFAULT_ANOMALY_THRESHOLD: f64 = 1e-12;

/// Per-cell conductivity tensors over a grid plus the isotropic background.
#[derive(Clone, Debug)]
pub struct ConductivityModel {
    grid: Grid,
    tensors: Vec<Tensor3x3>,
    sigma0: f64,
}

impl ConductivityModel {
    pub fn new(grid: Grid, tensors: Vec<Tensor3x3>, sigma0: f64) -> Result<Self> {
        if tensors.len() != grid.num_cells() {
            return Err(Error::Dimension(format!(
                "{} tensors for a grid of {} cells",
                tensors.len(),
                grid.num_cells()
            )));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("background conductivity must be positive, got {sigma0}")));
        }
        Ok(Self { grid, tensors, sigma0 })
    }

    pub fn homogeneous(grid: Grid, sigma: Tensor3x3, sigma0: f64) -> Result<Self> {
        Self::new(grid, vec![sigma; grid.num_cells()], sigma0)
    }

    /// Fills each cell by evaluating `f` at its centroid.
    pub fn from_fn(grid: Grid, sigma0: f64, mut f: impl FnMut([f64; 3]) -> Tensor3x3) -> Result<Self> {
        let tensors = (0..grid.num_cells()).map(|c| f(grid.centroid_of(c))).collect();
        Self::new(grid, tensors, sigma0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn tensors(&self) -> &[Tensor3x3] {
        &self.tensors
    }

    pub fn tensor(&self, idx: usize) -> Tensor3x3 {
        self.tensors[idx]
    }

    pub fn set_tensor(&mut self, idx: usize, t: Tensor3x3) {
        self.tensors[idx] = t;
    }

    pub fn with_sigma0(mut self, sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("background conductivity must be positive, got {sigma0}")));
        }
        self.sigma0 = sigma0;
        Ok(self)
    }

    pub fn contrast(&self) -> ContrastField {
        contrast_field(self)
    }

    pub fn write_binary(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let data = self.tensors.iter().map(|t| t.to_array());
        write_grid_file(path, &self.grid, data)
    }
}

/// Cells whose contrast exceeds the anomaly threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMask {
    cells: Vec<bool>,
    threshold: f64,
}

impl AnomalyMask {
    pub fn from_cells(cells: Vec<bool>, threshold: f64) -> Self {
        Self { cells, threshold }
    }

    pub fn empty(n: usize) -> Self {
        Self { cells: vec![false; n], threshold: DEFAULT_ANOMALY_THRESHOLD }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn indices(&self) -> Vec<usize> {
        self.cells.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }
}

/// Contrast `Δσ = σ − σ₀·I` per cell together with its anomaly mask.
#[derive(Clone, Debug)]
pub struct ContrastField {
    pub grid: Grid,
    pub sigma0: f64,
    pub tensors: Vec<Tensor3x3>,
    pub mask: AnomalyMask,
}

impl ContrastField {
    /// Restores the conductivity model the contrast was taken from.
    pub fn to_model(&self) -> Result<ConductivityModel> {
        let tensors = self.tensors.iter().map(|t| t.add_isotropic(self.sigma0)).collect();
        ConductivityModel::new(self.grid, tensors, self.sigma0)
    }
}

pub fn contrast_field(model: &ConductivityModel) -> ContrastField {
    contrast_field_with_threshold(model, DEFAULT_ANOMALY_THRESHOLD)
}

pub fn contrast_field_with_threshold(model: &ConductivityModel, threshold: f64) -> ContrastField {
    let tensors: Vec<Tensor3x3> = model.tensors.iter().map(|t| t.add_isotropic(-model.sigma0)).collect();
    let cells = tensors.iter().map(|t| !t.is_zero_within(threshold)).collect();
    ContrastField { grid: model.grid, sigma0: model.sigma0, tensors, mask: AnomalyMask::from_cells(cells, threshold) }
}

/// Componentwise `σ = σᵘ + α·σᵘ·exp(−|r − r_c|/γ)` on the cells selected by `mask`.
pub fn apply_exponential_perturbation(
    model: &ConductivityModel,
    mask: &AnomalyMask,
    r_c: [f64; 3],
    alpha: f64,
    gamma: f64,
) -> Result<ConductivityModel> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation range must be positive, got {gamma}")));
    }
    if mask.len() != model.grid.num_cells() {
        return Err(Error::Dimension("perturbation mask does not match the model grid".into()));
    }
    let mut out = model.clone();
    for idx in 0..model.grid.num_cells() {
        if mask.get(idx) {
            let r = model.grid.centroid_of(idx);
            out.tensors[idx] = perturbed(&model.tensors[idx], r, r_c, alpha, gamma);
        }
    }
    Ok(out)
}

pub(crate) fn perturbed(base: &Tensor3x3, r: [f64; 3], r_c: [f64; 3], alpha: f64, gamma: f64) -> Tensor3x3 {
    let dist = ((r[0] - r_c[0]).powi(2) + (r[1] - r_c[1]).powi(2) + (r[2] - r_c[2]).powi(2)).sqrt();
    base.scale(1.0 + alpha * (-dist / gamma).exp())
}

/// Anything that can report a conductivity tensor at a point in space.
pub trait ConductivitySource: Sync {
    /// Tensor at `p` and whether the lookup had to be clamped to the
    /// source's domain.
    fn sample(&self, p: [f64; 3]) -> (Tensor3x3, bool);
}

impl ConductivitySource for ConductivityModel {
    fn sample(&self, p: [f64; 3]) -> (Tensor3x3, bool) {
        let ([i, j, k], clamped) = self.grid.locate_clamped(p);
        (self.tensors[self.grid.index(i, j, k)], clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new([3, 2, 2], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn homogeneous_background_has_no_contrast() {
        let m = ConductivityModel::homogeneous(grid(), Tensor3x3::isotropic(0.1), 0.1).unwrap();
        let c = m.contrast();
        assert_eq!(c.mask.count(), 0);
        assert!(c.tensors.iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn isotropic_and_vti_contrast_values() {
        let m = ConductivityModel::homogeneous(grid(), Tensor3x3::isotropic(0.01), 0.1).unwrap();
        let c = m.contrast();
        let t = c.tensors[0];
        assert!((t.xx + 0.09).abs() < 1e-15 && (t.yy + 0.09).abs() < 1e-15 && (t.zz + 0.09).abs() < 1e-15);
        assert_eq!(c.mask.count(), 12);

        let m = ConductivityModel::homogeneous(grid(), Tensor3x3::diagonal(0.2, 0.2, 0.1), 0.01).unwrap();
        let t = m.contrast().tensors[5];
        assert!((t.xx - 0.19).abs() < 1e-15 && (t.yy - 0.19).abs() < 1e-15 && (t.zz - 0.09).abs() < 1e-15);
    }

    #[test]
    fn contrast_roundtrip_restores_model() {
        let mut m = ConductivityModel::homogeneous(grid(), Tensor3x3::isotropic(0.1), 0.1).unwrap();
        m.set_tensor(4, rotate_vti_tensor(0.5, 0.2, 0.7, 0.3));
        let back = m.contrast().to_model().unwrap();
        for (a, b) in m.tensors().iter().zip(back.tensors()) {
            assert!(a.to_array().iter().zip(b.to_array()).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }

    #[test]
    fn mask_respects_threshold() {
        let mut m = ConductivityModel::homogeneous(grid(), Tensor3x3::isotropic(0.1), 0.1).unwrap();
        m.set_tensor(1, Tensor3x3::isotropic(0.1 + 1e-14));
        m.set_tensor(2, Tensor3x3::isotropic(0.1 + 1e-6));
        let c = m.contrast();
        assert!(!c.mask.get(1));
        assert!(c.mask.get(2));
        assert_eq!(c.mask.indices(), vec![2]);
    }

    #[test]
    fn rejects_wrong_tensor_count() {
        assert!(ConductivityModel::new(grid(), vec![Tensor3x3::ZERO; 3], 0.1).is_err());
        assert!(ConductivityModel::homogeneous(grid(), Tensor3x3::ZERO, 0.0).is_err());
    }

    #[test]
    fn perturbation_peak_and_unit_distance() {
        let g = Grid::new([3, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.05), 0.1).unwrap();
        let mask = AnomalyMask::from_cells(vec![true, true, false], 0.0);
        let p = apply_exponential_perturbation(&m, &mask, [0.0, 0.0, 0.0], 4.0, 1.0).unwrap();
        assert!((p.tensor(0).xx - 0.25).abs() < 1e-15);
        assert!((p.tensor(1).xx - 0.05 * (1.0 + 4.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(p.tensor(2), m.tensor(2));

        let unchanged = apply_exponential_perturbation(&m, &mask, [0.0; 3], 0.0, 1.0).unwrap();
        assert_eq!(unchanged.tensors(), m.tensors());
        assert!(apply_exponential_perturbation(&m, &mask, [0.0; 3], 4.0, 0.0).is_err());
    }

    #[test]
    fn nearest_sampling_clamps() {
        let mut m = ConductivityModel::homogeneous(grid(), Tensor3x3::isotropic(0.1), 0.1).unwrap();
        m.set_tensor(2, Tensor3x3::isotropic(0.3));
        let (t, clamped) = m.sample([2.2, 0.0, 0.0]);
        assert_eq!(t.xx, 0.3);
        assert!(!clamped);
        let (t, clamped) = m.sample([9.0, -4.0, -1.0]);
        assert_eq!(t.xx, 0.3);
        assert!(clamped);
    }
}
