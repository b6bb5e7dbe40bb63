//! Builders for the three reference models: two isolated resistive blocks,
//! a faulted resistive layer inside a VTI medium, and a faulted shale/sand
//! formation for logging runs.
//!
//! `scale` shrinks the cell counts. For the block and VTI models the cell
//! size stays at 0.25 m, so the geometry shrinks with the grid and the
//! suggested frequency grows by `1/scale²` to keep every length in the same
//! ratio to the skin depth. The formation model keeps its physical extent
//! and coarsens the cells instead.

use std::str::FromStr;

use super::{perturbed, ConductivityModel, ConductivitySource, Grid, IndexBox, Tensor3x3};
use crate::error::{Error, Result};

const CELL: f64 = 0.25;
const BASE_FREQUENCY: f64 = 24_000.0;
const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkName {
    TwoBlocks,
    FaultedVti,
    FaultedFormation,
}

impl BenchmarkName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TwoBlocks => "two_blocks",
            Self::FaultedVti => "faulted_vti",
            Self::FaultedFormation => "faulted_formation",
        }
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_blocks" => Ok(Self::TwoBlocks),
            "faulted_vti" => Ok(Self::FaultedVti),
            "faulted_formation" => Ok(Self::FaultedFormation),
            other => Err(Error::UnknownBenchmark(other.to_string())),
        }
    }
}

/// A benchmark model with the acquisition settings that go with it.
#[derive(Clone, Debug)]
pub struct BenchmarkCase {
    pub name: BenchmarkName,
    pub model: ConductivityModel,
    /// Transmitter frequency matched to the model scale, Hz.
    pub frequency: f64,
    pub source_position: [f64; 3],
    pub source_moment: [f64; 3],
    /// Suggested sub-domain boxes in sweep order.
    pub boxes: Vec<IndexBox>,
    /// Receiver points located in background cells.
    pub receivers: Vec<(String, [f64; 3])>,
}

pub fn build_benchmark_model(name: BenchmarkName, scale: f64) -> Result<BenchmarkCase> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParameter(format!("scale must lie in (0, 1], got {scale}")));
    }
    match name {
        BenchmarkName::TwoBlocks => two_blocks(scale),
        BenchmarkName::FaultedVti => faulted_vti(scale),
        BenchmarkName::FaultedFormation => faulted_formation(scale),
    }
}

fn inside(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo - MEMBERSHIP_TOL && v <= hi + MEMBERSHIP_TOL
}

fn two_blocks(scale: f64) -> Result<BenchmarkCase> {
    let n = ((128.0 * scale).round() as usize).max(4);
    let s = n as f64 / 128.0;
    let grid = Grid::centered([n, n, n], CELL, [0.0; 3])?;
    let half_width = 15.0 * s;
    let (z_near, z_far) = (5.0 * s, 12.5 * s);
    let in_block = |p: [f64; 3]| {
        inside(p[0], -half_width, half_width)
            && inside(p[1], -half_width, half_width)
            && (inside(p[2], z_near, z_far) || inside(p[2], -z_far, -z_near))
    };
    let model = ConductivityModel::from_fn(grid, 0.1, |p| Tensor3x3::isotropic(if in_block(p) { 0.01 } else { 0.1 }))?;

    // Each box spans the full x-y extent and a quarter of the z cells, centered on its block.
    let box_len = (n / 4).max(1);
    let mut boxes = Vec::new();
    for (lo_z, hi_z) in [(-z_far, -z_near), (z_near, z_far)] {
        let ks: Vec<usize> = (0..n).filter(|&k| inside(grid.centroid(0, 0, k)[2], lo_z, hi_z)).collect();
        let (k0, k1) = (ks[0], ks[ks.len() - 1] + 1);
        let len = box_len.max(k1 - k0);
        let lo = k0.saturating_sub((len - (k1 - k0)) / 2).min(n - len);
        boxes.push(IndexBox::new([0, 0, lo], [n, n, lo + len])?);
    }

    let w = 0.5 * n as f64 * CELL;
    let receivers = vec![
        ("gap_x-".to_string(), [-0.5 * w, 0.0, 0.0]),
        ("gap_x+".to_string(), [0.5 * w, 0.0, 0.0]),
        ("gap_x++".to_string(), [0.75 * w, 0.0, 0.0]),
        ("gap_y+".to_string(), [0.0, 0.5 * w, 0.0]),
        ("above".to_string(), [0.0, 0.0, 15.0 * s]),
        ("below".to_string(), [0.0, 0.0, -15.0 * s]),
    ];

    Ok(BenchmarkCase {
        name: BenchmarkName::TwoBlocks,
        model,
        frequency: BASE_FREQUENCY / (s * s),
        source_position: [0.0; 3],
        source_moment: [1.0, 0.0, 0.0],
        boxes,
        receivers,
    })
}

fn faulted_vti(scale: f64) -> Result<BenchmarkCase> {
    // Three equal sub-domains along z need a cell count divisible by three.
    let n = 3 * ((40.0 * scale).round() as usize).max(1);
    let s = n as f64 / 120.0;
    let grid = Grid::centered([n, n, n], CELL, [0.0; 3])?;
    let layer = |p: [f64; 3]| {
        let (top, bottom) = if p[0] < 0.0 { (-12.0 * s, -8.0 * s) } else { (-10.0 * s, -6.0 * s) };
        p[2] >= top && p[2] < bottom
    };
    let vti = Tensor3x3::diagonal(0.2, 0.2, 0.1);
    let model = ConductivityModel::from_fn(grid, 0.01, |p| if layer(p) { Tensor3x3::isotropic(0.01) } else { vti })?;
    let third = n / 3;
    let boxes =
        (0..3).map(|b| IndexBox::new([0, 0, b * third], [n, n, (b + 1) * third])).collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkCase {
        name: BenchmarkName::FaultedVti,
        model,
        frequency: BASE_FREQUENCY / (s * s),
        source_position: [0.0; 3],
        source_moment: [1.0, 0.0, 0.0],
        boxes,
        receivers: Vec::new(),
    })
}

fn faulted_formation(scale: f64) -> Result<BenchmarkCase> {
    let formation = FaultedFormation::default();
    let h = 4.0 / scale;
    let (lo, hi) = ([-100.0, -100.0, -60.0], [1000.0, 100.0, 140.0]);
    let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / h).ceil() as usize).max(1));
    let origin = [0, 1, 2].map(|a| lo[a] + 0.5 * h);
    let grid = Grid::new(dims, [h; 3], origin)?;
    let model = ConductivityModel::from_fn(grid, 0.1, |p| formation.sample(p).0)?;
    Ok(BenchmarkCase {
        name: BenchmarkName::FaultedFormation,
        model,
        frequency: BASE_FREQUENCY,
        source_position: [0.0; 3],
        source_moment: [0.0, 0.0, 1.0],
        boxes: Vec::new(),
        receivers: Vec::new(),
    })
}

/// Horizontally layered VTI shale with isotropic sand layers, a vertical
/// normal fault, and an exponential conductivity bump inside the sand.
/// Defined in continuous coordinates; z is the vertical axis.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultedFormation {
    pub shale_sigma_h: f64,
    pub shale_sigma_v: f64,
    pub sand_sigma: f64,
    /// Sand intervals `[top, bottom)` in z on the side `x < fault_x`.
    pub sand_layers: Vec<[f64; 2]>,
    pub fault_x: f64,
    /// Downward displacement of every layer for `x ≥ fault_x`.
    pub fault_throw: f64,
    pub perturbation_center: [f64; 3],
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FaultedFormation {
    fn default() -> Self {
        Self {
            shale_sigma_h: 0.5,
            shale_sigma_v: 0.2,
            sand_sigma: 0.05,
            sand_layers: vec![[20.0, 45.0], [52.0, 70.0]],
            fault_x: 650.0,
            fault_throw: 12.0,
            perturbation_center: [500.0, 0.0, 40.0],
            alpha: 4.0,
            gamma: 50.0,
        }
    }
}

impl FaultedFormation {
    pub fn is_sand(&self, p: [f64; 3]) -> bool {
        let shift = if p[0] >= self.fault_x { self.fault_throw } else { 0.0 };
        let z = p[2] - shift;
        self.sand_layers.iter().any(|&[top, bottom]| z >= top && z < bottom)
    }
}

impl ConductivitySource for FaultedFormation {
    fn sample(&self, p: [f64; 3]) -> (Tensor3x3, bool) {
        let t = if self.is_sand(p) {
            perturbed(&Tensor3x3::isotropic(self.sand_sigma), p, self.perturbation_center, self.alpha, self.gamma)
        } else {
            Tensor3x3::diagonal(self.shale_sigma_h, self.shale_sigma_h, self.shale_sigma_v)
        };
        (t, false)
    }
}
