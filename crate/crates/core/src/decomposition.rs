//! Domain decomposition of the anomalous region into rectangular boxes and
//! the block Gauss-Seidel / Jacobi fixed-point sweeps that couple them.
//!
//! For boxes `Ω_1 … Ω_M` the field in box `i` satisfies
//!
//! ```text
//! (I − 𝒢⁽ⁱⁱ⁾Δσ⁽ⁱ⁾) E⁽ⁱ⁾ = E⁽ⁱ'⁰⁾ + Σ_{j≠i} 𝒢⁽ⁱʲ⁾Δσ⁽ʲ⁾ E⁽ʲ⁾
//! ```
//!
//! The interaction terms `S_ij = 𝒢⁽ⁱʲ⁾Δσ⁽ʲ⁾E⁽ʲ⁾` are kept for every pair,
//! including `i = j`, so the full-domain residual can be formed without
//! extra convolutions. Unknowns are the field values on anomalous cells.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{Background, GreenKernel, KernelKind};
use crate::krylov::{gmres, norm, GmresConfig, SolveStats};
use crate::model::{AnomalyMask, ConductivityModel, ContrastField, Grid, IndexBox};
use crate::operators::{ComplexVectorField, KernelCache, SubdomainContrast, SystemOperator};
use crate::sources::{background_e_on_grid, DipoleSource};

pub type SubdomainBox = IndexBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    FullDomain,
    GsFixed,
    GsAdaptive,
    JacobiAdaptive,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::FullDomain, Scheme::GsFixed, Scheme::GsAdaptive, Scheme::JacobiAdaptive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::FullDomain => "full_domain",
            Scheme::GsFixed => "gs_fixed",
            Scheme::GsAdaptive => "gs_adaptive",
            Scheme::JacobiAdaptive => "jacobi_adaptive",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Scheme::GsAdaptive | Scheme::JacobiAdaptive)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "full_domain" | "full" => Ok(Scheme::FullDomain),
            "gs_fixed" | "ie_dd_gs_f" => Ok(Scheme::GsFixed),
            "gs_adaptive" | "ie_dd_gs_a" => Ok(Scheme::GsAdaptive),
            "jacobi_adaptive" | "ie_dd_jacobi_a" => Ok(Scheme::JacobiAdaptive),
            _ => Err(Error::InvalidParameter(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionPlan {
    /// Boxes in sweep order.
    pub boxes: Vec<SubdomainBox>,
    pub scheme: Scheme,
    pub outer_tol: f64,
    /// Inner GMRES tolerance for [`Scheme::GsFixed`].
    pub inner_tol_fixed: f64,
    pub max_sweeps: usize,
}

impl DecompositionPlan {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_outer_tol(mut self, tol: f64) -> Self {
        self.outer_tol = tol;
        self
    }

    pub fn with_inner_tol_fixed(mut self, tol: f64) -> Self {
        self.inner_tol_fixed = tol;
        self
    }

    pub fn with_max_sweeps(mut self, n: usize) -> Self {
        self.max_sweeps = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.outer_tol < 1.0) {
            return Err(Error::InvalidParameter(format!("outer tolerance must lie in (0, 1), got {}", self.outer_tol)));
        }
        if !(self.inner_tol_fixed > 0.0 && self.inner_tol_fixed < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inner tolerance must lie in (0, 1), got {}",
                self.inner_tol_fixed
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of cells discretized by the plan.
    pub fn num_cells(&self) -> usize {
        self.boxes.iter().map(|b| b.num_cells()).sum()
    }
}

/// Builds a plan from disjoint boxes, dropping boxes without anomalous
/// cells. Defaults: adaptive Gauss-Seidel, tolerances 10⁻⁶, 50 sweeps.
pub fn partition(grid: &Grid, mask: &AnomalyMask, boxes: &[SubdomainBox]) -> Result<DecompositionPlan> {
    if mask.len() != grid.num_cells() {
        return Err(Error::Dimension("mask does not match the grid".into()));
    }
    for (i, b) in boxes.iter().enumerate() {
        if !b.fits(grid) {
            return Err(Error::InvalidPartition(format!("box {i} exceeds the grid")));
        }
        for (j, c) in boxes.iter().enumerate().skip(i + 1) {
            if b.intersects(c) {
                return Err(Error::InvalidPartition(format!("boxes {i} and {j} overlap")));
            }
        }
    }
    let mut covered = vec![false; grid.num_cells()];
    let mut kept = Vec::new();
    for b in boxes {
        let cells = b.global_indices(grid);
        let mut any = false;
        for c in cells {
            covered[c] = true;
            any |= mask.get(c);
        }
        if any {
            kept.push(*b);
        }
    }
    let uncovered = (0..grid.num_cells()).filter(|&c| mask.get(c) && !covered[c]).count();
    if uncovered > 0 {
        return Err(Error::Coverage { uncovered });
    }
    Ok(DecompositionPlan {
        boxes: kept,
        scheme: Scheme::GsAdaptive,
        outer_tol: 1e-6,
        inner_tol_fixed: 1e-6,
        max_sweeps: 50,
    })
}

/// Splits the bounding box of the anomalous cells into `n` slabs of nearly
/// equal thickness along the grid's longest axis (z on ties).
pub fn auto_axis_split(grid: &Grid, mask: &AnomalyMask, n: usize) -> Result<Vec<SubdomainBox>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one box".into()));
    }
    let dims = grid.dims();
    let mut lo = dims;
    let mut hi = [0usize; 3];
    for c in mask.indices() {
        let ijk = grid.coords(c);
        for a in 0..3 {
            lo[a] = lo[a].min(ijk[a]);
            hi[a] = hi[a].max(ijk[a] + 1);
        }
    }
    if mask.count() == 0 {
        return Ok(Vec::new());
    }
    let axis = (0..3).rev().max_by_key(|&a| dims[a]).expect("three axes");
    let len = hi[axis] - lo[axis];
    if n > len {
        return Err(Error::InvalidParameter(format!("cannot split {len} cells into {n} boxes")));
    }
    let mut boxes = Vec::with_capacity(n);
    for b in 0..n {
        let mut blo = lo;
        let mut bhi = hi;
        blo[axis] = lo[axis] + b * len / n;
        bhi[axis] = lo[axis] + (b + 1) * len / n;
        boxes.push(IndexBox::new(blo, bhi)?);
    }
    Ok(boxes)
}

/// Inner GMRES tolerance one order of magnitude below the full-domain
/// residual.
pub fn adaptive_inner_tol(e_full: f64) -> f64 {
    e_full / 10.0
}

/// Diagnostics of one outer sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    /// GMRES iterations per sub-domain, in plan order.
    pub subdomain_iterations: Vec<usize>,
    pub inner_tol: f64,
    pub full_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SweepState {
    /// Field on the anomalous cells of each box.
    pub fields: Vec<Vec<Complex64>>,
    /// `interactions[i][j]` is `𝒢⁽ⁱʲ⁾Δσ⁽ʲ⁾E⁽ʲ⁾` on the anomalous cells of box `i`.
    pub interactions: Vec<Vec<Vec<Complex64>>>,
    pub sweep: usize,
    pub residual: f64,
    /// Full-domain residual before the first sweep and after every sweep.
    pub history: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

impl SweepState {
    pub fn total_gmres_iterations(&self) -> usize {
        self.records.iter().flat_map(|r| &r.subdomain_iterations).sum()
    }
}

/// Operators, couplings, and right-hand sides for one decomposition.
pub struct DdSystem {
    grid: Grid,
    subdomains: Vec<Arc<SubdomainContrast>>,
    operators: Vec<SystemOperator>,
    couplings: Vec<Vec<Arc<GreenKernel>>>,
    e0: Vec<Vec<Complex64>>,
    e0_norm: f64,
    gmres: GmresConfig,
}

impl DdSystem {
    /// `e0` is the incident field on the whole model grid.
    pub fn new(
        contrast: &ContrastField,
        boxes: &[SubdomainBox],
        cache: &KernelCache,
        e0: &ComplexVectorField,
        gmres: GmresConfig,
    ) -> Result<Self> {
        if e0.grid().dims() != contrast.grid.dims() {
            return Err(Error::Dimension("incident field does not match the model grid".into()));
        }
        check_cache(cache, &contrast.grid)?;
        let subdomains: Vec<Arc<SubdomainContrast>> =
            boxes.iter().map(|b| SubdomainContrast::new(contrast, *b).map(Arc::new)).collect::<Result<_>>()?;
        let mut couplings = Vec::with_capacity(boxes.len());
        for bi in boxes {
            couplings.push(boxes.iter().map(|bj| cache.pair(bi, bj)).collect::<Result<Vec<_>>>()?);
        }
        let operators = subdomains
            .iter()
            .enumerate()
            .map(|(i, s)| SystemOperator::new(Arc::clone(&couplings[i][i]), Arc::clone(s)))
            .collect::<Result<Vec<_>>>()?;
        let e0: Vec<Vec<Complex64>> = subdomains
            .iter()
            .map(|s| {
                let local = e0.restrict(s.index_box())?;
                Ok(s.gather(local.data()))
            })
            .collect::<Result<_>>()?;
        let e0_norm = e0.iter().map(|v| norm(v).powi(2)).sum::<f64>().sqrt();
        gmres.validate()?;
        Ok(Self { grid: contrast.grid, subdomains, operators, couplings, e0, e0_norm, gmres })
    }

    pub fn num_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn subdomain(&self, i: usize) -> &SubdomainContrast {
        &self.subdomains[i]
    }

    pub fn operator(&self, i: usize) -> &SystemOperator {
        &self.operators[i]
    }

    pub fn incident(&self, i: usize) -> &[Complex64] {
        &self.e0[i]
    }

    /// `S_ti` for every target box `t` from the field of box `j`.
    fn interactions_from(&self, j: usize, field: &[Complex64]) -> Vec<Vec<Complex64>> {
        let source = self.subdomains[j].source_from_compressed(field);
        (0..self.num_subdomains())
            .map(|t| {
                let target = &self.subdomains[t];
                let mut full = vec![Complex64::default(); 3 * target.grid().num_cells()];
                self.couplings[t][j].convolve(&source, &mut full, false);
                target.gather(&full)
            })
            .collect()
    }

    /// State with the given per-box fields and freshly computed
    /// interactions and residual.
    pub fn state_from(&self, fields: Vec<Vec<Complex64>>) -> Result<SweepState> {
        if self.e0_norm == 0.0 {
            return Err(Error::UndefinedResidual);
        }
        if fields.len() != self.num_subdomains() || fields.iter().zip(&self.e0).any(|(f, e)| f.len() != e.len()) {
            return Err(Error::Dimension("per-box fields do not match the decomposition".into()));
        }
        let by_source: Vec<Vec<Vec<Complex64>>> =
            fields.par_iter().enumerate().map(|(j, f)| self.interactions_from(j, f)).collect();
        let m = self.num_subdomains();
        let mut interactions = vec![Vec::with_capacity(m); m];
        for col in by_source {
            for (t, s) in col.into_iter().enumerate() {
                interactions[t].push(s);
            }
        }
        let mut state =
            SweepState { fields, interactions, sweep: 0, residual: 0.0, history: Vec::new(), records: Vec::new() };
        state.residual = self.full_residual(&state);
        state.history.push(state.residual);
        Ok(state)
    }

    /// Algorithm start: every box holds its incident field.
    pub fn initial_state(&self) -> Result<SweepState> {
        self.state_from(self.e0.clone())
    }

    fn rhs(&self, state: &SweepState, i: usize) -> Vec<Complex64> {
        let mut rhs = self.e0[i].clone();
        for (j, s) in state.interactions[i].iter().enumerate() {
            if j != i {
                for (r, v) in rhs.iter_mut().zip(s) {
                    *r += v;
                }
            }
        }
        rhs
    }

    /// `‖E⁰ − E + Σ_j S_ij‖ / ‖E⁰‖` over all anomalous cells.
    pub fn full_residual(&self, state: &SweepState) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.num_subdomains() {
            let mut r: Vec<Complex64> = self.e0[i].iter().zip(&state.fields[i]).map(|(a, b)| a - b).collect();
            for s in &state.interactions[i] {
                for (ri, v) in r.iter_mut().zip(s) {
                    *ri += v;
                }
            }
            acc += norm(&r).powi(2);
        }
        acc.sqrt() / self.e0_norm
    }

    fn solve_box(&self, state: &SweepState, i: usize, tol: f64) -> Result<(Vec<Complex64>, SolveStats)> {
        let rhs = self.rhs(state, i);
        let cfg = self.gmres.with_tol(tol);
        gmres(&self.operators[i].masked(), &rhs, Some(&state.fields[i]), &cfg)
    }

    fn finish_sweep(&self, state: &mut SweepState, iterations: Vec<usize>, inner_tol: f64) {
        state.sweep += 1;
        let previous = state.residual;
        state.residual = self.full_residual(state);
        state.history.push(state.residual);
        if state.residual > previous {
            log::warn!(
                "full-domain residual rose from {previous:.3e} to {:.3e} in sweep {}",
                state.residual,
                state.sweep
            );
        }
        state.records.push(SweepRecord {
            sweep: state.sweep,
            subdomain_iterations: iterations,
            inner_tol,
            full_residual: state.residual,
        });
    }

    /// One block Gauss-Seidel sweep in plan order; each box solve sees the
    /// fields already updated in this sweep.
    pub fn gauss_seidel_sweep(&self, state: &mut SweepState, inner_tol: f64) -> Result<()> {
        let mut iterations = Vec::with_capacity(self.num_subdomains());
        for i in 0..self.num_subdomains() {
            let (x, stats) = self.solve_box(state, i, inner_tol)?;
            if !stats.converged {
                return Err(Error::SweepFailure { sweep: state.sweep + 1, subdomain: i, stats });
            }
            iterations.push(stats.iterations);
            let updated = self.interactions_from(i, &x);
            for (t, s) in updated.into_iter().enumerate() {
                state.interactions[t][i] = s;
            }
            state.fields[i] = x;
        }
        self.finish_sweep(state, iterations, inner_tol);
        Ok(())
    }

    /// One block Jacobi sweep: all box solves use the previous iterate and
    /// run concurrently; interactions are refreshed afterwards.
    pub fn jacobi_sweep(&self, state: &mut SweepState, inner_tol: f64) -> Result<()> {
        let results: Vec<Result<(Vec<Complex64>, SolveStats)>> =
            (0..self.num_subdomains()).into_par_iter().map(|i| self.solve_box(state, i, inner_tol)).collect();
        let mut fields = Vec::with_capacity(results.len());
        let mut iterations = Vec::with_capacity(results.len());
        for (i, r) in results.into_iter().enumerate() {
            let (x, stats) = r?;
            if !stats.converged {
                return Err(Error::SweepFailure { sweep: state.sweep + 1, subdomain: i, stats });
            }
            iterations.push(stats.iterations);
            fields.push(x);
        }
        let by_source: Vec<Vec<Vec<Complex64>>> =
            fields.par_iter().enumerate().map(|(j, f)| self.interactions_from(j, f)).collect();
        for (j, col) in by_source.into_iter().enumerate() {
            for (t, s) in col.into_iter().enumerate() {
                state.interactions[t][j] = s;
            }
        }
        state.fields = fields;
        self.finish_sweep(state, iterations, inner_tol);
        Ok(())
    }

    /// Global field: solved values on anomalous cells, `e0` elsewhere.
    pub fn stitch(&self, state: &SweepState, e0: &ComplexVectorField) -> ComplexVectorField {
        let mut out = e0.clone();
        for (s, f) in self.subdomains.iter().zip(&state.fields) {
            let m = s.num_active();
            let cells = s.index_box().global_indices(&self.grid);
            for (k, &local) in s.active_cells().iter().enumerate() {
                out.set(cells[local], [f[k], f[m + k], f[2 * m + k]]);
            }
        }
        out
    }
}

fn check_cache(cache: &KernelCache, grid: &Grid) -> Result<()> {
    let s = grid.spacing();
    let c = cache.spacing();
    if (0..3).any(|a| (s[a] - c[a]).abs() > 1e-12 * s[a]) {
        return Err(Error::Dimension("kernel cache spacing differs from the model grid".into()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DdSolution {
    /// Total electric field; cells outside the anomaly carry the incident field.
    pub field: ComplexVectorField,
    pub state: SweepState,
    pub converged: bool,
}

impl DdSolution {
    pub fn total_gmres_iterations(&self) -> usize {
        self.state.total_gmres_iterations()
    }

    pub fn sweeps(&self) -> usize {
        self.state.sweep
    }
}

/// Runs the scheme selected by `plan` for incident field `e0`. Running out
/// of sweeps yields `converged == false` rather than an error.
pub fn solve_dd_with(
    contrast: &ContrastField,
    plan: &DecompositionPlan,
    e0: &ComplexVectorField,
    gmres_cfg: &GmresConfig,
    cache: &KernelCache,
) -> Result<DdSolution> {
    plan.validate()?;
    let boxes: Vec<IndexBox> = match plan.scheme {
        Scheme::FullDomain => vec![IndexBox::full(&contrast.grid)],
        _ => plan.boxes.clone(),
    };
    let active: Vec<IndexBox> = boxes
        .into_iter()
        .filter(|b| b.global_indices(&contrast.grid).into_iter().any(|c| contrast.mask.get(c)))
        .collect();
    let uncovered = contrast
        .mask
        .indices()
        .into_iter()
        .filter(|&c| !active.iter().any(|b| b.contains(contrast.grid.coords(c))))
        .count();
    if uncovered > 0 {
        return Err(Error::Coverage { uncovered });
    }
    if active.is_empty() {
        let state = SweepState {
            fields: Vec::new(),
            interactions: Vec::new(),
            sweep: 0,
            residual: 0.0,
            history: vec![0.0],
            records: Vec::new(),
        };
        return Ok(DdSolution { field: e0.clone(), state, converged: true });
    }
    let system = DdSystem::new(contrast, &active, cache, e0, *gmres_cfg)?;

    let mut state = system.initial_state()?;
    if plan.scheme == Scheme::FullDomain {
        // A single box solved once to the outer tolerance.
        if state.residual > plan.outer_tol {
            system.gauss_seidel_sweep(&mut state, plan.outer_tol)?;
        }
        let converged = state.residual <= plan.outer_tol * (1.0 + 1e-9);
        let field = system.stitch(&state, e0);
        return Ok(DdSolution { field, state, converged });
    }

    while state.residual > plan.outer_tol && state.sweep < plan.max_sweeps {
        let inner = match plan.scheme {
            Scheme::GsFixed => plan.inner_tol_fixed,
            _ => adaptive_inner_tol(state.residual).max(plan.outer_tol / 10.0),
        };
        match plan.scheme {
            Scheme::JacobiAdaptive => system.jacobi_sweep(&mut state, inner)?,
            _ => system.gauss_seidel_sweep(&mut state, inner)?,
        }
        // Every warm start already met the inner tolerance, so further
        // sweeps would repeat this one exactly.
        let idle = state.records.last().is_some_and(|r| r.subdomain_iterations.iter().all(|&n| n == 0));
        if idle && state.residual > plan.outer_tol {
            log::warn!(
                "sweeps stalled at residual {:.3e} above the target {:.1e}; the inner tolerance {inner:.1e} is too loose",
                state.residual,
                plan.outer_tol
            );
            break;
        }
    }
    let converged = state.residual <= plan.outer_tol;
    let field = system.stitch(&state, e0);
    Ok(DdSolution { field, state, converged })
}

/// Solves the model's integral equation for a dipole source with the plan's
/// scheme; failure to converge within `max_sweeps`, or a sweep that leaves
/// every sub-domain untouched, is an error carrying the
/// residual history.
pub fn solve_dd(
    model: &ConductivityModel,
    plan: &DecompositionPlan,
    source: &DipoleSource,
    gmres_cfg: &GmresConfig,
) -> Result<DdSolution> {
    let bg = Background::new(model.sigma0(), source.frequency)?;
    let contrast = model.contrast();
    let e0 = background_e_on_grid(source, model.grid(), &bg)?;
    let cache = KernelCache::new(KernelKind::Electric, model.grid().spacing(), bg);
    let sol = solve_dd_with(&contrast, plan, &e0, gmres_cfg, &cache)?;
    if !sol.converged {
        return Err(Error::NonConvergence {
            sweeps: sol.state.sweep,
            target: plan.outer_tol,
            history: sol.state.history,
        });
    }
    Ok(sol)
}
