#![allow(dead_code)]

use ie_core::model::{ConductivityModel, ContrastField, Grid, IndexBox, Tensor3x3};
use ie_core::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

/// Rows of the dense `3N × 3N` system belonging to the anomalous cells of
/// each box, in the component-major compressed order the solver uses.
pub fn block_rows(contrast: &ContrastField, boxes: &[IndexBox]) -> Vec<Vec<usize>> {
    let grid = contrast.grid;
    let n = grid.num_cells();
    boxes
        .iter()
        .map(|b| {
            let active: Vec<usize> = b.global_indices(&grid).into_iter().filter(|&c| contrast.mask.get(c)).collect();
            (0..3).flat_map(|c| active.iter().map(move |&cell| c * n + cell)).collect()
        })
        .collect()
}

pub fn pick(v: &[Complex64], rows: &[usize]) -> Vec<Complex64> {
    rows.iter().map(|&r| v[r]).collect()
}

pub fn random_vec(rng: &mut StdRng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Three 4³ boxes side by side along x with distinct anisotropic anomalies;
/// every cell is anomalous.
pub fn three_box_model() -> (ConductivityModel, Vec<IndexBox>) {
    let grid = Grid::new([12, 4, 4], [0.5; 3], [0.0; 3]).unwrap();
    let model = ConductivityModel::from_fn(grid, 0.1, |p| {
        let band = (p[0] / 2.0).floor() as usize;
        match band {
            0 => Tensor3x3::isotropic(0.5),
            1 => Tensor3x3::diagonal(0.02, 0.04, 0.01),
            _ => Tensor3x3::from_array([1.0, 0.8, 0.3, 0.1, 0.05, 0.0]),
        }
    })
    .unwrap();
    let boxes = (0..3).map(|b| IndexBox::new([4 * b, 0, 0], [4 * b + 4, 4, 4]).unwrap()).collect();
    (model, boxes)
}
