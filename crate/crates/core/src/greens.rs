//! Green's functions of a homogeneous isotropic conducting background and
//! their discretized, FFT-ready kernels.
//!
//! Time dependence is `e^{-iωt}`, so `k₀ = √(iωμ₀σ₀)` with the root in the
//! first quadrant and `g(R) = e^{ik₀R}/(4πR)` decays with distance.
//!
//! The electric kernel between two cells separated by `d ≠ 0` is the
//! point value `G^E(d)·Δv`. The self cell uses the integral of `G^E` over
//! the sphere of equal volume centered on the observation point:
//!
//! ```text
//! ∫ G^E dV = (1/σ₀)·[ (2/3)(1 − ik₀a)e^{ik₀a} − 1 ]·I,   a = (3Δv/4π)^{1/3}
//! ```
//!
//! obtained from `∫ g dV = ((1 − ik₀a)e^{ik₀a} − 1)/k₀²` and the
//! distributional identity `∇²g = −k₀²g − δ` averaged over the sphere.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::model::Grid;

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * PI;

/// Upper bound on the memory a single kernel may allocate, bytes.
pub const DEFAULT_KERNEL_BYTES_LIMIT: u64 = 3 << 30;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Background {
    pub sigma0: f64,
    pub omega: f64,
    pub k0: Complex64,
}

impl Background {
    pub fn new(sigma0: f64, frequency: f64) -> Result<Self> {
        Self::from_omega(sigma0, 2.0 * PI * frequency)
    }

    pub fn from_omega(sigma0: f64, omega: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("background conductivity must be positive, got {sigma0}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("angular frequency must be positive, got {omega}")));
        }
        let k = (0.5 * omega * MU0 * sigma0).sqrt();
        Ok(Self { sigma0, omega, k0: Complex64::new(k, k) })
    }

    /// `iωμ₀`.
    pub fn i_omega_mu(&self) -> Complex64 {
        I * (self.omega * MU0)
    }

    pub fn frequency(&self) -> f64 {
        self.omega / (2.0 * PI)
    }

    pub fn skin_depth(&self) -> f64 {
        (2.0 / (self.omega * MU0 * self.sigma0)).sqrt()
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn scalar_green(r: [f64; 3], r_prime: [f64; 3], bg: &Background) -> Result<Complex64> {
    let d = [r[0] - r_prime[0], r[1] - r_prime[1], r[2] - r_prime[2]];
    let dist = norm3(d);
    if dist == 0.0 {
        return Err(Error::Singularity("scalar Green's function at coincident points".into()));
    }
    Ok(green_at(dist, bg.k0))
}

#[inline]
pub(crate) fn green_at(dist: f64, k0: Complex64) -> Complex64 {
    (I * k0 * dist).exp() / (4.0 * PI * dist)
}

/// `∇g` with respect to the observation point, for separation `d = r − r′ ≠ 0`.
#[inline]
pub fn grad_green(d: [f64; 3], k0: Complex64) -> [Complex64; 3] {
    let r = norm3(d);
    let g = green_at(r, k0);
    let radial = g * (I * k0 - 1.0 / r) / r;
    [radial * d[0], radial * d[1], radial * d[2]]
}

/// Second derivatives `∂_p ∂_q g` for `d ≠ 0`.
pub fn hessian_green(d: [f64; 3], k0: Complex64) -> [[Complex64; 3]; 3] {
    let r = norm3(d);
    let g = green_at(r, k0);
    let iso = g * (I * k0 - 1.0 / r) / r;
    let dyad = g * (-k0 * k0 - 3.0 * I * k0 / r + 3.0 / (r * r));
    let u = [d[0] / r, d[1] / r, d[2] / r];
    let mut out = [[Complex64::default(); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            out[p][q] = dyad * (u[p] * u[q]) + if p == q { iso } else { Complex64::default() };
        }
    }
    out
}

/// Electric Green's tensor `(iωμ₀ I + ∇∇/σ₀) g` at separation `d ≠ 0`, in
/// symmetric layout `[xx, yy, zz, xy, xz, yz]`.
#[inline]
pub fn electric_tensor(d: [f64; 3], bg: &Background) -> [Complex64; 6] {
    let r = norm3(d);
    let k = bg.k0;
    let g = green_at(r, k) / bg.sigma0;
    let iso = g * (k * k + I * k / r - 1.0 / (r * r));
    let dyad = g * (-k * k - 3.0 * I * k / r + 3.0 / (r * r));
    let u = [d[0] / r, d[1] / r, d[2] / r];
    [
        iso + dyad * (u[0] * u[0]),
        iso + dyad * (u[1] * u[1]),
        iso + dyad * (u[2] * u[2]),
        dyad * (u[0] * u[1]),
        dyad * (u[0] * u[2]),
        dyad * (u[1] * u[2]),
    ]
}

/// Magnetic Green's tensor `(iωμ₀)⁻¹ ∇×G^E`, whose `(p, q)` entry is
/// `ε_{plq} ∂_l g`.
pub fn magnetic_tensor(d: [f64; 3], k0: Complex64) -> [[Complex64; 3]; 3] {
    let [gx, gy, gz] = grad_green(d, k0);
    let z = Complex64::default();
    [[z, -gz, gy], [gz, z, -gx], [-gy, gx, z]]
}

/// Radius of the sphere with the volume of one cell.
pub fn equivalent_radius(volume: f64) -> f64 {
    (3.0 * volume / (4.0 * PI)).cbrt()
}

/// Integral of `G^E` over the equal-volume sphere around the observation
/// point; the tensor is this value times the identity.
pub fn self_cell_term(volume: f64, bg: &Background) -> Complex64 {
    let a = equivalent_radius(volume);
    let ika = I * bg.k0 * a;
    ((2.0 / 3.0) * (1.0 - ika) * ika.exp() - 1.0) / bg.sigma0
}

#[inline]
pub(crate) fn sym_index(p: usize, q: usize) -> usize {
    match (p.min(q), p.max(q)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        (1, 2) => 5,
        _ => unreachable!("component index out of range"),
    }
}

/// Offsets up to this many cells along every axis are integrated over the
/// source cell instead of sampled at its centroid.
pub const NEAR_FIELD_CELLS: i64 = 1;

pub(crate) const GAUSS_6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152, 0.171_324_492_379_170),
    (-0.661_209_386_466_265, 0.360_761_573_048_139),
    (-0.238_619_186_083_197, 0.467_913_934_572_691),
    (0.238_619_186_083_197, 0.467_913_934_572_691),
    (0.661_209_386_466_265, 0.360_761_573_048_139),
    (0.932_469_514_203_152, 0.171_324_492_379_170),
];

/// Electric kernel entry for a lattice offset in cells: the cell-integrated
/// Green's tensor in symmetric layout.
///
/// The zero offset uses the equal-volume sphere. Immediate neighbours are
/// integrated over the source cell by quadrature; a centroid sample there
/// misrepresents the near-field coupling badly enough to make the system
/// indefinite at contrasts of order twenty. Farther cells use the centroid
/// value times the cell volume.
pub fn electric_kernel_sample(offset: [i64; 3], spacing: [f64; 3], bg: &Background) -> [Complex64; 6] {
    let volume = spacing[0] * spacing[1] * spacing[2];
    if offset == [0, 0, 0] {
        let s = self_cell_term(volume, bg);
        let z = Complex64::default();
        return [s, s, s, z, z, z];
    }
    let d = [0, 1, 2].map(|a| offset[a] as f64 * spacing[a]);
    if offset.iter().all(|m| m.abs() <= NEAR_FIELD_CELLS) {
        return cell_integrated_electric(d, spacing, bg);
    }
    electric_tensor(d, bg).map(|v| v * volume)
}

/// `∫_cell G^E(d − s) ds` over a cell centred at the origin, for a target
/// offset `d` outside the cell; 4 panels of 6-point Gauss-Legendre per axis.
pub fn cell_integrated_electric(d: [f64; 3], spacing: [f64; 3], bg: &Background) -> [Complex64; 6] {
    const PANELS: usize = 4;
    let nodes: Vec<[(f64, f64); 3]> = {
        let axis = |a: usize| -> Vec<(f64, f64)> {
            let h = spacing[a] / PANELS as f64;
            (0..PANELS)
                .flat_map(|p| {
                    GAUSS_6
                        .iter()
                        .map(move |&(x, w)| ((p as f64 + 0.5 * (x + 1.0)) * h - 0.5 * spacing[a], 0.5 * w * h))
                })
                .collect()
        };
        let (xs, ys, zs) = (axis(0), axis(1), axis(2));
        let mut v = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &z in &zs {
            for &y in &ys {
                for &x in &xs {
                    v.push([x, y, z]);
                }
            }
        }
        v
    };
    let mut acc = [Complex64::default(); 6];
    for [(x, wx), (y, wy), (z, wz)] in nodes {
        let t = electric_tensor([d[0] - x, d[1] - y, d[2] - z], bg);
        let w = wx * wy * wz;
        for (a, v) in acc.iter_mut().zip(t) {
            *a += v * w;
        }
    }
    acc
}

/// Magnetic kernel entry for a lattice offset: `∇g·Δv`, zero at zero offset.
pub fn magnetic_kernel_sample(offset: [i64; 3], spacing: [f64; 3], bg: &Background) -> [Complex64; 3] {
    if offset == [0, 0, 0] {
        return [Complex64::default(); 3];
    }
    let volume = spacing[0] * spacing[1] * spacing[2];
    let d = [0, 1, 2].map(|a| offset[a] as f64 * spacing[a]);
    grad_green(d, bg.k0).map(|v| v * volume)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Electric,
    Magnetic,
}

/// Relative placement of a target box and a source box on one lattice.
/// `offset` is the target's lower corner minus the source's, in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairGeometry {
    pub target: [usize; 3],
    pub source: [usize; 3],
    pub offset: [i64; 3],
}

impl PairGeometry {
    /// A box interacting with itself.
    pub fn same(dims: [usize; 3]) -> Self {
        Self { target: dims, source: dims, offset: [0; 3] }
    }

    /// Padded transform size: the sum of both extents on every axis, which
    /// is twice the grid when target and source coincide.
    pub fn padded(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.target[a] + self.source[a])
    }

    /// Lattice offset stored at circulant position `m` along `axis`, or
    /// `None` for the one unused slot.
    fn offset_at(&self, axis: usize, m: usize) -> Option<i64> {
        let nt = self.target[axis];
        let p = nt + self.source[axis];
        if m < nt {
            Some(self.offset[axis] + m as i64)
        } else if m > nt {
            Some(self.offset[axis] + m as i64 - p as i64)
        } else {
            None
        }
    }
}

/// Identifies a kernel for caching: geometry, spacing, and background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelKey {
    pub kind: KernelKind,
    pub geometry: PairGeometry,
    pub spacing: [f64; 3],
    pub sigma0: f64,
    pub omega: f64,
}

/// Precomputed spectra of a translation-invariant Green's kernel for one
/// target/source box geometry.
///
/// Electric kernels keep the six distinct spectra of the symmetric tensor;
/// magnetic kernels keep the three gradient spectra from which the
/// antisymmetric curl tensor is formed.
pub struct GreenKernel {
    key: KernelKey,
    fft: Fft3,
    spectra: Vec<Vec<Complex64>>,
    self_term: Complex64,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel").field("key", &self.key).finish()
    }
}

pub fn assemble_electric_kernel(grid: &Grid, bg: &Background) -> Result<GreenKernel> {
    GreenKernel::electric(PairGeometry::same(grid.dims()), grid.spacing(), bg)
}

pub fn assemble_magnetic_kernel(grid: &Grid, bg: &Background) -> Result<GreenKernel> {
    GreenKernel::magnetic(PairGeometry::same(grid.dims()), grid.spacing(), bg)
}

impl GreenKernel {
    pub fn electric(geometry: PairGeometry, spacing: [f64; 3], bg: &Background) -> Result<Self> {
        Self::assemble(KernelKind::Electric, geometry, spacing, bg, DEFAULT_KERNEL_BYTES_LIMIT)
    }

    pub fn magnetic(geometry: PairGeometry, spacing: [f64; 3], bg: &Background) -> Result<Self> {
        Self::assemble(KernelKind::Magnetic, geometry, spacing, bg, DEFAULT_KERNEL_BYTES_LIMIT)
    }

    pub fn assemble(
        kind: KernelKind,
        geometry: PairGeometry,
        spacing: [f64; 3],
        bg: &Background,
        limit_bytes: u64,
    ) -> Result<Self> {
        let n_spectra = Self::spectra_count(kind);
        let padded = geometry.padded();
        let len = padded.iter().product::<usize>();
        // Spectra plus the three convolution work buffers.
        let required_bytes = (len as u64) * 16 * (n_spectra as u64 + 3);
        if required_bytes > limit_bytes {
            return Err(Error::Resource { required_bytes, limit_bytes });
        }
        let fft = Fft3::new(padded);
        let mut spectra = vec![vec![Complex64::default(); len]; n_spectra];
        let [px, py, pz] = padded;
        for mz in 0..pz {
            let Some(dz) = geometry.offset_at(2, mz) else { continue };
            for my in 0..py {
                let Some(dy) = geometry.offset_at(1, my) else { continue };
                for mx in 0..px {
                    let Some(dx) = geometry.offset_at(0, mx) else { continue };
                    let idx = mx + px * (my + py * mz);
                    let off = [dx, dy, dz];
                    match kind {
                        KernelKind::Electric => {
                            let s = electric_kernel_sample(off, spacing, bg);
                            for c in 0..6 {
                                spectra[c][idx] = s[c];
                            }
                        }
                        KernelKind::Magnetic => {
                            let s = magnetic_kernel_sample(off, spacing, bg);
                            for c in 0..3 {
                                spectra[c][idx] = s[c];
                            }
                        }
                    }
                }
            }
        }
        for s in &mut spectra {
            fft.forward(s);
        }
        let self_term = match kind {
            KernelKind::Electric => self_cell_term(spacing.iter().product(), bg),
            KernelKind::Magnetic => Complex64::default(),
        };
        let key = KernelKey { kind, geometry, spacing, sigma0: bg.sigma0, omega: bg.omega };
        Ok(Self { key, fft, spectra, self_term })
    }

    fn spectra_count(kind: KernelKind) -> usize {
        match kind {
            KernelKind::Electric => 6,
            KernelKind::Magnetic => 3,
        }
    }

    pub fn key(&self) -> &KernelKey {
        &self.key
    }

    pub fn kind(&self) -> KernelKind {
        self.key.kind
    }

    pub fn geometry(&self) -> &PairGeometry {
        &self.key.geometry
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.fft.dims()
    }

    pub fn self_term(&self) -> Complex64 {
        self.self_term
    }

    /// Spectrum of tensor component `(p, q)` with its sign, or `None` where
    /// the component vanishes identically (magnetic diagonal).
    pub fn component_spectrum(&self, p: usize, q: usize) -> Option<(&[Complex64], f64)> {
        match self.key.kind {
            KernelKind::Electric => Some((&self.spectra[sym_index(p, q)], 1.0)),
            KernelKind::Magnetic => {
                if p == q {
                    return None;
                }
                // (p, q) entry is ε_{plq} ∂_l g.
                let l = 3 - p - q;
                let sign = if (p + 1) % 3 == l { 1.0 } else { -1.0 };
                Some((&self.spectra[l], sign))
            }
        }
    }

    /// Raw stored spectra (six symmetric or three gradient components).
    pub fn spectra(&self) -> &[Vec<Complex64>] {
        &self.spectra
    }

    /// Discrete convolution of a source box field with this kernel.
    ///
    /// `source` holds three components, each `source.len()/3` values laid
    /// out x-fastest over the source box; `out` likewise over the target box.
    /// With `accumulate` the result is added to `out`.
    pub fn convolve(&self, source: &[Complex64], out: &mut [Complex64], accumulate: bool) {
        let geom = &self.key.geometry;
        let ns: usize = geom.source.iter().product();
        let nt: usize = geom.target.iter().product();
        assert_eq!(source.len(), 3 * ns, "source length does not match the kernel geometry");
        assert_eq!(out.len(), 3 * nt, "target length does not match the kernel geometry");
        let [px, py, _] = self.fft.dims();
        let len = self.fft.len();

        let mut bufs: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        let mut live = [false; 3];
        for q in 0..3 {
            let comp = &source[q * ns..(q + 1) * ns];
            let mut buf = vec![Complex64::default(); len];
            if comp.iter().any(|v| *v != Complex64::default()) {
                live[q] = true;
                scatter_box(comp, geom.source, &mut buf, px, py);
                self.fft.forward_pruned(&mut buf, geom.source);
            }
            bufs.push(buf);
        }
        if !live.iter().any(|&b| b) {
            if !accumulate {
                out.fill(Complex64::default());
            }
            return;
        }

        let (b0, rest) = bufs.split_at_mut(1);
        let (b1, b2) = rest.split_at_mut(1);
        let (b0, b1, b2) = (&mut b0[0], &mut b1[0], &mut b2[0]);
        match self.key.kind {
            KernelKind::Electric => {
                let [kxx, kyy, kzz, kxy, kxz, kyz] = [0, 1, 2, 3, 4, 5].map(|c| &self.spectra[c]);
                for m in 0..len {
                    let (sx, sy, sz) = (b0[m], b1[m], b2[m]);
                    b0[m] = kxx[m] * sx + kxy[m] * sy + kxz[m] * sz;
                    b1[m] = kxy[m] * sx + kyy[m] * sy + kyz[m] * sz;
                    b2[m] = kxz[m] * sx + kyz[m] * sy + kzz[m] * sz;
                }
            }
            KernelKind::Magnetic => {
                let [gx, gy, gz] = [0, 1, 2].map(|c| &self.spectra[c]);
                for m in 0..len {
                    let (sx, sy, sz) = (b0[m], b1[m], b2[m]);
                    b0[m] = gy[m] * sz - gz[m] * sy;
                    b1[m] = gz[m] * sx - gx[m] * sz;
                    b2[m] = gx[m] * sy - gy[m] * sx;
                }
            }
        }
        for (p, buf) in [b0, b1, b2].into_iter().enumerate() {
            self.fft.inverse_pruned(buf, geom.target);
            gather_box(buf, geom.target, &mut out[p * nt..(p + 1) * nt], px, py, accumulate);
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        write_key(&mut w, &self.key)?;
        w.write_all(&(self.spectra.len() as u64).to_le_bytes())?;
        for s in &self.spectra {
            for v in s {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a cached kernel, failing unless it was built for `expected`.
    pub fn load(path: impl AsRef<Path>, expected: &KernelKey) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != CACHE_MAGIC {
            return Err(Error::Format("not a kernel cache file".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported kernel cache version {version}")));
        }
        let key = read_key(&mut cur)?;
        if key != *expected {
            return Err(Error::Format("kernel cache key does not match the requested geometry".into()));
        }
        let count = cur.u64()? as usize;
        if count != Self::spectra_count(key.kind) {
            return Err(Error::Format(format!("unexpected spectra count {count}")));
        }
        let fft = Fft3::new(key.geometry.padded());
        let len = fft.len();
        let mut spectra = Vec::with_capacity(count);
        for _ in 0..count {
            let mut s = Vec::with_capacity(len);
            for _ in 0..len {
                let re = cur.f64()?;
                let im = cur.f64()?;
                s.push(Complex64::new(re, im));
            }
            spectra.push(s);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes in kernel cache".into()));
        }
        let bg = Background::from_omega(key.sigma0, key.omega)?;
        let self_term = match key.kind {
            KernelKind::Electric => self_cell_term(key.spacing.iter().product(), &bg),
            KernelKind::Magnetic => Complex64::default(),
        };
        Ok(Self { key, fft, spectra, self_term })
    }
}

const CACHE_MAGIC: &[u8; 4] = b"IEGK";
const CACHE_VERSION: u32 = 1;

fn write_key(w: &mut impl Write, key: &KernelKey) -> std::io::Result<()> {
    let kind: u64 = match key.kind {
        KernelKind::Electric => 0,
        KernelKind::Magnetic => 1,
    };
    w.write_all(&kind.to_le_bytes())?;
    for v in key.geometry.target.iter().chain(&key.geometry.source) {
        w.write_all(&(*v as u64).to_le_bytes())?;
    }
    for v in key.geometry.offset {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in key.spacing.iter().chain([&key.sigma0, &key.omega]) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("kernel cache truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_key(cur: &mut Cursor<'_>) -> Result<KernelKey> {
    let kind = match cur.u64()? {
        0 => KernelKind::Electric,
        1 => KernelKind::Magnetic,
        k => return Err(Error::Format(format!("unknown kernel kind {k}"))),
    };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = cur.u64()? as usize;
    }
    let mut offset = [0i64; 3];
    for o in &mut offset {
        *o = cur.u64()? as i64;
    }
    let spacing = [cur.f64()?, cur.f64()?, cur.f64()?];
    let sigma0 = cur.f64()?;
    let omega = cur.f64()?;
    Ok(KernelKey {
        kind,
        geometry: PairGeometry { target: [dims[0], dims[1], dims[2]], source: [dims[3], dims[4], dims[5]], offset },
        spacing,
        sigma0,
        omega,
    })
}

fn scatter_box(src: &[Complex64], dims: [usize; 3], buf: &mut [Complex64], px: usize, py: usize) {
    let [nx, ny, nz] = dims;
    for k in 0..nz {
        for j in 0..ny {
            let s = nx * (j + ny * k);
            let d = px * (j + py * k);
            buf[d..d + nx].copy_from_slice(&src[s..s + nx]);
        }
    }
}

fn gather_box(buf: &[Complex64], dims: [usize; 3], out: &mut [Complex64], px: usize, py: usize, accumulate: bool) {
    let [nx, ny, nz] = dims;
    for k in 0..nz {
        for j in 0..ny {
            let s = px * (j + py * k);
            let d = nx * (j + ny * k);
            if accumulate {
                for (o, v) in out[d..d + nx].iter_mut().zip(&buf[s..s + nx]) {
                    *o += *v;
                }
            } else {
                out[d..d + nx].copy_from_slice(&buf[s..s + nx]);
            }
        }
    }
}
