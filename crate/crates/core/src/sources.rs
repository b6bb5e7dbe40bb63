//! Magnetic-dipole transmitters, their fields in the homogeneous background,
//! and total magnetic fields at receivers.
//!
//! For a dipole of moment `m` at `r_s`, with `R = r − r_s`:
//!
//! ```text
//! E⁰(r) = iωμ₀ ∇g(R) × m
//! H⁰(r) = g(R)·[ m(k₀² + ik₀/R − 1/R²) + R̂(R̂·m)(−k₀² − 3ik₀/R + 3/R²) ]
//! ```
//!
//! so that `H⁰ = (iωμ₀)⁻¹ ∇×E⁰`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{grad_green, green_at, Background, GAUSS_6};
use crate::model::{ContrastField, Grid};
use crate::operators::ComplexVectorField;

#[derive(Clone, Debug, PartialEq)]
pub struct DipoleSource {
    pub position: [f64; 3],
    pub moment: [f64; 3],
    pub frequency: f64,
}

impl DipoleSource {
    pub fn new(position: [f64; 3], moment: [f64; 3], frequency: f64) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!("source frequency must be positive, got {frequency}")));
        }
        if moment.iter().all(|&m| m == 0.0) || moment.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("dipole moment must be finite and nonzero".into()));
        }
        Ok(Self { position, moment, frequency })
    }

    fn check_background(&self, bg: &Background) -> Result<()> {
        if (bg.frequency() - self.frequency).abs() > 1e-9 * self.frequency {
            return Err(Error::InvalidParameter(format!(
                "source frequency {} Hz differs from background frequency {} Hz",
                self.frequency,
                bg.frequency()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Receiver {
    pub id: String,
    pub position: [f64; 3],
}

impl Receiver {
    pub fn new(id: impl Into<String>, position: [f64; 3]) -> Self {
        Self { id: id.into(), position }
    }
}

fn cross(a: [Complex64; 3], b: [Complex64; 3]) -> [Complex64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn real3(v: [f64; 3]) -> [Complex64; 3] {
    v.map(|x| Complex64::new(x, 0.0))
}

fn offset(p: [f64; 3], src: &DipoleSource) -> Result<[f64; 3]> {
    let d = [p[0] - src.position[0], p[1] - src.position[1], p[2] - src.position[2]];
    if d == [0.0; 3] {
        return Err(Error::Singularity(format!("field requested at the dipole position {p:?}")));
    }
    Ok(d)
}

fn e_at(d: [f64; 3], src: &DipoleSource, bg: &Background) -> [Complex64; 3] {
    let g = grad_green(d, bg.k0);
    cross(g, real3(src.moment)).map(|v| v * bg.i_omega_mu())
}

fn h_at(d: [f64; 3], src: &DipoleSource, bg: &Background) -> [Complex64; 3] {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let k = bg.k0;
    let g = green_at(r, k);
    let u = d.map(|x| x / r);
    let m = src.moment;
    let um = u[0] * m[0] + u[1] * m[1] + u[2] * m[2];
    let a = g * (k * k + Complex64::i() * k / r - 1.0 / (r * r));
    let b = g * (-k * k - 3.0 * Complex64::i() * k / r + 3.0 / (r * r)) * um;
    [0, 1, 2].map(|c| a * m[c] + b * u[c])
}

/// Background electric field of the dipole at each point.
pub fn background_e(src: &DipoleSource, points: &[[f64; 3]], bg: &Background) -> Result<Vec<[Complex64; 3]>> {
    src.check_background(bg)?;
    points.iter().map(|&p| Ok(e_at(offset(p, src)?, src, bg))).collect()
}

/// Background magnetic field of the dipole at each point.
pub fn background_h(src: &DipoleSource, points: &[[f64; 3]], bg: &Background) -> Result<Vec<[Complex64; 3]>> {
    src.check_background(bg)?;
    points.iter().map(|&p| Ok(h_at(offset(p, src)?, src, bg))).collect()
}

/// `E⁰` at every cell centroid. A cell whose centroid coincides with the
/// source takes the mean of the field at the six face-adjacent centroids.
pub fn background_e_on_grid(src: &DipoleSource, grid: &Grid, bg: &Background) -> Result<ComplexVectorField> {
    src.check_background(bg)?;
    let h = grid.spacing();
    let tiny = 1e-9 * h.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = ComplexVectorField::zeros(*grid);
    for cell in 0..grid.num_cells() {
        let p = grid.centroid_of(cell);
        let d = [0, 1, 2].map(|a| p[a] - src.position[a]);
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let v = if dist < tiny {
            let mut acc = [Complex64::default(); 3];
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut q = d;
                    q[axis] += sign * h[axis];
                    let e = e_at(q, src, bg);
                    for c in 0..3 {
                        acc[c] += e[c] / 6.0;
                    }
                }
            }
            acc
        } else {
            e_at(d, src, bg)
        };
        out.set(cell, v);
    }
    Ok(out)
}

/// How receivers inside anomalous cells are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReceiverPlacement {
    /// Receivers inside an anomalous cell are rejected.
    #[default]
    Strict,
    /// The containing cell contributes the cell integral of the magnetic
    /// kernel instead of the point value.
    AllowInside,
}

/// Total magnetic field `H⁰ + Σ G^H·Δσ·E·Δv` at each receiver, summing over
/// anomalous cells of `contrast`. `e` must live on the contrast grid; only
/// its anomalous cells are read.
pub fn receiver_h(
    e: &ComplexVectorField,
    contrast: &ContrastField,
    receivers: &[Receiver],
    src: &DipoleSource,
    bg: &Background,
) -> Result<Vec<[Complex64; 3]>> {
    receiver_h_with(e, contrast, receivers, src, bg, ReceiverPlacement::Strict)
}

pub fn receiver_h_with(
    e: &ComplexVectorField,
    contrast: &ContrastField,
    receivers: &[Receiver],
    src: &DipoleSource,
    bg: &Background,
    placement: ReceiverPlacement,
) -> Result<Vec<[Complex64; 3]>> {
    let grid = &contrast.grid;
    if e.grid().dims() != grid.dims() {
        return Err(Error::Dimension("field grid differs from the contrast grid".into()));
    }
    let active = contrast.mask.indices();
    let sources: Vec<[Complex64; 3]> = active.iter().map(|&c| contrast.tensors[c].apply(e.get(c))).collect();
    let dv = grid.cell_volume();
    let mut out = Vec::with_capacity(receivers.len());
    for rx in receivers {
        let containing =
            grid.locate(rx.position).map(|[i, j, k]| grid.index(i, j, k)).filter(|&c| contrast.mask.get(c));
        if containing.is_some() && placement == ReceiverPlacement::Strict {
            return Err(Error::Placement(rx.id.clone()));
        }
        let mut h = background_h(src, &[rx.position], bg)?[0];
        for (&cell, j) in active.iter().zip(&sources) {
            let p = grid.centroid_of(cell);
            let grad = if Some(cell) == containing {
                cell_integrated_grad(rx.position, p, grid.spacing(), bg)
            } else {
                let d = [0, 1, 2].map(|a| rx.position[a] - p[a]);
                grad_green(d, bg.k0).map(|v| v * dv)
            };
            let s = cross(grad, *j);
            for c in 0..3 {
                h[c] += s[c];
            }
        }
        out.push(h);
    }
    Ok(out)
}

/// `∫_cell ∇_r g(r − r′) dV′` for `r` inside the cell, evaluated as the
/// surface integral `−∮ g n dS′` with panelled Gauss-Legendre rules.
pub(crate) fn cell_integrated_grad(r: [f64; 3], center: [f64; 3], h: [f64; 3], bg: &Background) -> [Complex64; 3] {
    const PANELS: usize = 4;
    let mut out = [Complex64::default(); 3];
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            let mut acc = Complex64::default();
            for pu in 0..PANELS {
                for pv in 0..PANELS {
                    for &(xu, wu) in &GAUSS_6 {
                        for &(xv, wv) in &GAUSS_6 {
                            let su = ((pu as f64 + 0.5 * (xu + 1.0)) / PANELS as f64 - 0.5) * h[u];
                            let sv = ((pv as f64 + 0.5 * (xv + 1.0)) / PANELS as f64 - 0.5) * h[v];
                            let mut q = center;
                            q[axis] += sign * 0.5 * h[axis];
                            q[u] += su;
                            q[v] += sv;
                            let d = [0, 1, 2].map(|a| r[a] - q[a]);
                            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                            let w = wu * wv * 0.25 * h[u] * h[v] / (PANELS * PANELS) as f64;
                            acc += green_at(dist, bg.k0) * w;
                        }
                    }
                }
            }
            out[axis] -= acc * sign;
        }
    }
    out
}
