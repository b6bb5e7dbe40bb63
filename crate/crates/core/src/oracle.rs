//! Brute-force references for testing: dense system matrices, direct
//! convolution sums, dense LU solves, and one dense block Gauss-Seidel step.
//!
//! Everything here is `O(N²)` or worse and guarded by a cell-count cap.
//! Kernel entries come straight from the point formulas, never from the
//! FFT path they are meant to check.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{electric_kernel_sample, Background};
use crate::model::{ContrastField, Grid, IndexBox};
use crate::operators::ComplexVectorField;

pub const DEFAULT_CELL_CAP: usize = 1728;

fn check_cap(cells: usize, cap: usize) -> Result<()> {
    if cells > cap {
        return Err(Error::Size { cells, cap });
    }
    Ok(())
}

/// Kernel samples memoized per offset; near-field entries are quadratures.
struct Samples<'a> {
    spacing: [f64; 3],
    bg: &'a Background,
    memo: HashMap<[i64; 3], [Complex64; 6]>,
}

impl<'a> Samples<'a> {
    fn new(spacing: [f64; 3], bg: &'a Background) -> Self {
        Self { spacing, bg, memo: HashMap::new() }
    }

    fn get(&mut self, off: [i64; 3]) -> [Complex64; 6] {
        let (spacing, bg) = (self.spacing, self.bg);
        *self.memo.entry(off).or_insert_with(|| electric_kernel_sample(off, spacing, bg))
    }
}

fn sym(s: &[Complex64; 6], p: usize, q: usize) -> Complex64 {
    s[crate::greens::sym_index(p, q)]
}

/// `(I − 𝒢Δσ)` as a `3N × 3N` matrix; row and column `c·N + cell` match
/// the component-major field layout.
pub fn dense_assemble(grid: &Grid, bg: &Background, contrast: &ContrastField) -> Result<DMatrix<Complex64>> {
    dense_assemble_with_cap(grid, bg, contrast, DEFAULT_CELL_CAP)
}

pub fn dense_assemble_with_cap(
    grid: &Grid,
    bg: &Background,
    contrast: &ContrastField,
    cap: usize,
) -> Result<DMatrix<Complex64>> {
    let n = grid.num_cells();
    check_cap(n, cap)?;
    if contrast.grid.dims() != grid.dims() {
        return Err(Error::Dimension("contrast does not match the grid".into()));
    }
    let mut a = DMatrix::<Complex64>::identity(3 * n, 3 * n);
    let mut samples = Samples::new(grid.spacing(), bg);
    for col in 0..n {
        if !contrast.mask.get(col) {
            continue;
        }
        let ds = contrast.tensors[col];
        let cc = grid.coords(col);
        for row in 0..n {
            let rc = grid.coords(row);
            let off = [0, 1, 2].map(|k| rc[k] as i64 - cc[k] as i64);
            let g = samples.get(off);
            for p in 0..3 {
                for q in 0..3 {
                    let v: Complex64 = (0..3).map(|r| sym(&g, p, r) * ds.get(r, q)).sum();
                    a[(p * n + row, q * n + col)] -= v;
                }
            }
        }
    }
    Ok(a)
}

/// Direct sum `Σ_{c′} G(c − c′)·source(c′)` from the cells of `source_box`
/// to those of `target_box`, both on a lattice with the given spacing.
/// Arrays are component-major over their boxes.
pub fn direct_box_convolve(
    spacing: [f64; 3],
    bg: &Background,
    target_box: &IndexBox,
    source_box: &IndexBox,
    source: &[Complex64],
    cap: usize,
) -> Result<Vec<Complex64>> {
    let nt = target_box.num_cells();
    let ns = source_box.num_cells();
    check_cap(nt.max(ns), cap)?;
    if source.len() != 3 * ns {
        return Err(Error::Dimension("source does not cover its box".into()));
    }
    let td = target_box.dims();
    let sd = source_box.dims();
    let mut out = vec![Complex64::default(); 3 * nt];
    let mut samples = Samples::new(spacing, bg);
    for t in 0..nt {
        let ti = [t % td[0], (t / td[0]) % td[1], t / (td[0] * td[1])];
        for s in 0..ns {
            let si = [s % sd[0], (s / sd[0]) % sd[1], s / (sd[0] * sd[1])];
            let off = [0, 1, 2].map(|k| (target_box.lo[k] + ti[k]) as i64 - (source_box.lo[k] + si[k]) as i64);
            let g = samples.get(off);
            for p in 0..3 {
                for q in 0..3 {
                    out[p * nt + t] += sym(&g, p, q) * source[q * ns + s];
                }
            }
        }
    }
    Ok(out)
}

/// Direct-sum counterpart of [`crate::operators::convolve`].
pub fn direct_convolve(bg: &Background, source: &ComplexVectorField) -> Result<ComplexVectorField> {
    let grid = *source.grid();
    let full = IndexBox::full(&grid);
    let out = direct_box_convolve(grid.spacing(), bg, &full, &full, source.data(), DEFAULT_CELL_CAP)?;
    ComplexVectorField::from_data(grid, out)
}

/// Solves `A·x = b` by LU with partial pivoting.
pub fn dense_solve(a: &DMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::Dimension("dense system is not square or rhs length differs".into()));
    }
    let lu = a.clone().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singularity("dense matrix is singular".into()))
}

/// Extracts blocks `A[rows_i, cols_j]` for the given index sets.
pub fn split_blocks(a: &DMatrix<Complex64>, parts: &[Vec<usize>]) -> Vec<Vec<DMatrix<Complex64>>> {
    parts
        .iter()
        .map(|ri| parts.iter().map(|cj| DMatrix::from_fn(ri.len(), cj.len(), |r, c| a[(ri[r], cj[c])])).collect())
        .collect()
}

/// One block Gauss-Seidel step by forward substitution:
/// `E⁽ⁱ⁾ ← A_ii⁻¹ (E⁽ⁱ'⁰⁾ − Σ_{j<i} A_ij E⁽ʲ⁾_new − Σ_{j>i} A_ij E⁽ʲ⁾_old)`.
pub fn dense_gs_step(
    blocks: &[Vec<DMatrix<Complex64>>],
    e0: &[Vec<Complex64>],
    e: &[Vec<Complex64>],
) -> Result<Vec<Vec<Complex64>>> {
    let m = blocks.len();
    if e0.len() != m || e.len() != m || blocks.iter().any(|row| row.len() != m) {
        return Err(Error::Dimension("block structure is inconsistent".into()));
    }
    let mut new: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut rhs = DVector::from_column_slice(&e0[i]);
        for j in 0..m {
            if j == i {
                continue;
            }
            let x = if j < i { &new[j] } else { &e[j] };
            rhs -= &blocks[i][j] * DVector::from_column_slice(x);
        }
        new.push(dense_solve(&blocks[i][i], rhs.as_slice())?);
    }
    Ok(new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConductivityModel, Tensor3x3};

    #[test]
    fn zero_contrast_assembles_identity() {
        let g = Grid::new([2, 2, 1], [1.0; 3], [0.0; 3]).unwrap();
        let m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.1), 0.1).unwrap();
        let bg = Background::new(0.1, 1000.0).unwrap();
        let a = dense_assemble(&g, &bg, &m.contrast()).unwrap();
        assert_eq!(a, DMatrix::identity(12, 12));
    }

    #[test]
    fn cap_is_enforced() {
        let g = Grid::new([13, 13, 11], [1.0; 3], [0.0; 3]).unwrap();
        let m = ConductivityModel::homogeneous(g, Tensor3x3::isotropic(0.1), 0.1).unwrap();
        let bg = Background::new(0.1, 1000.0).unwrap();
        assert!(matches!(dense_assemble(&g, &bg, &m.contrast()), Err(Error::Size { .. })));
    }

    #[test]
    fn single_block_step_is_a_solve() {
        let a = DMatrix::from_fn(3, 3, |r, c| Complex64::new(if r == c { 4.0 } else { 0.5 }, (r + c) as f64 * 0.1));
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(2.0, -1.0)];
        let out = dense_gs_step(&[vec![a.clone()]], &[b.clone()], &[vec![Complex64::default(); 3]]).unwrap();
        let back = &a * DVector::from_column_slice(&out[0]);
        for (x, y) in back.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let a = DMatrix::<Complex64>::zeros(2, 2);
        let err = dense_gs_step(&[vec![a]], &[vec![Complex64::new(1.0, 0.0); 2]], &[vec![Complex64::default(); 2]]);
        assert!(matches!(err, Err(Error::Singularity(_))));
    }
}
