//! Run configuration: a TOML document deserialized into plain structs, then
//! resolved against the core library into ready-to-run inputs.
//!
//! All quantities are SI. Angles are radians.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use ie_core::decomposition::{auto_axis_split, partition, DecompositionPlan, Scheme};
use ie_core::greens::Background;
use ie_core::krylov::GmresConfig;
use ie_core::logsim::{LogConfig, ToolConfig, Trajectory, WindowSpec};
use ie_core::model::{
    build_benchmark_model, rotate_vti_tensor, BenchmarkCase, BenchmarkName, ConductivityModel, ConductivitySource,
    FaultedFormation, Grid, IndexBox, Tensor3x3,
};
use ie_core::sources::{DipoleSource, Receiver};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub background: Option<BackgroundSection>,
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub receivers: Vec<ReceiverSection>,
    #[serde(default)]
    pub decomposition: DecompositionSection,
    #[serde(default)]
    pub gmres: GmresSection,
    pub logsim: Option<LogsimSection>,
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Name of a reference model; excludes `grid`.
    pub benchmark: Option<String>,
    #[serde(default = "one")]
    pub scale: f64,
    pub grid: Option<GridSection>,
    /// Conductivity of cells outside every region; defaults to `sigma0`.
    pub fill: Option<TensorSpec>,
    #[serde(default)]
    pub regions: Vec<RegionSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dims: [usize; 3],
    pub spacing: Spacing,
    /// Center of the grid; ignored when `origin` is given.
    #[serde(default)]
    pub center: [f64; 3],
    /// Centroid of the first cell.
    pub origin: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Uniform(f64),
    PerAxis([f64; 3]),
}

/// Axis-aligned region `[lo, hi]`; a cell belongs to it when its centroid
/// does. Later regions override earlier ones.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub sigma: TensorSpec,
}

/// A scalar (isotropic), three diagonal values, six values
/// `[xx, yy, zz, xy, xz, yz]`, or a rotated VTI tensor.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Scalar(f64),
    Values(Vec<f64>),
    Vti {
        sigma_h: f64,
        sigma_v: f64,
        #[serde(default)]
        dip: f64,
        #[serde(default)]
        azimuth: f64,
    },
}

impl TensorSpec {
    fn resolve(&self) -> Result<Tensor3x3> {
        let t = match self {
            TensorSpec::Scalar(s) => Tensor3x3::isotropic(*s),
            TensorSpec::Values(v) => match v.as_slice() {
                &[xx, yy, zz] => Tensor3x3::diagonal(xx, yy, zz),
                &[a, b, c, d, e, f] => Tensor3x3::from_array([a, b, c, d, e, f]),
                _ => bail!("a conductivity tensor takes 1, 3, or 6 values, got {}", v.len()),
            },
            TensorSpec::Vti { sigma_h, sigma_v, dip, azimuth } => {
                ensure!(*sigma_h > 0.0 && *sigma_v > 0.0, "VTI conductivities must be positive");
                rotate_vti_tensor(*sigma_h, *sigma_v, *dip, *azimuth)
            }
        };
        ensure!(t.to_array().iter().all(|v| v.is_finite()), "conductivity values must be finite");
        ensure!((0..3).all(|a| t.get(a, a) >= 0.0), "diagonal conductivities must be non-negative");
        Ok(t)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    pub sigma0: f64,
    pub frequency: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub position: [f64; 3],
    pub moment: [f64; 3],
}

/// Either an absolute `position` or an `offset` from the source.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    pub id: String,
    pub position: Option<[f64; 3]>,
    pub offset: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSection {
    pub scheme: Option<String>,
    /// Schemes run by `compare`.
    #[serde(default)]
    pub schemes: Vec<String>,
    pub boxes: Option<Vec<BoxSection>>,
    pub auto_axis_split: Option<usize>,
    pub outer_tol: Option<f64>,
    /// Fixed inner tolerance of `gs_fixed`.
    pub inner_tol: Option<f64>,
    pub max_sweeps: Option<usize>,
}

/// Half-open cell index ranges.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmresSection {
    pub restart: Option<usize>,
    pub max_outer: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogsimSection {
    pub trajectory: TrajectorySection,
    pub window: WindowSection,
    #[serde(default)]
    pub tool: ToolSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub station_spacing: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub extent: [f64; 3],
    pub cell_size: f64,
    #[serde(default = "two")]
    pub boxes: usize,
}

fn two() -> usize {
    2
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSection {
    pub moment: Option<[f64; 3]>,
    pub frequency: Option<f64>,
    pub offsets: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Fields,
    Logs,
    Report,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    #[serde(default = "all_artifacts")]
    pub what: Vec<Artifact>,
}

fn all_artifacts() -> Vec<Artifact> {
    vec![Artifact::Fields, Artifact::Logs, Artifact::Report]
}

impl OutputSection {
    pub fn wants(&self, a: Artifact) -> bool {
        self.what.contains(&a)
    }
}

/// Reads and parses a configuration file. Relative output directories are
/// taken relative to the file.
pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut cfg: Config = toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    if cfg.output.directory.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.output.directory = dir.join(&cfg.output.directory);
        }
    }
    Ok(cfg)
}

/// Everything a solve or comparison needs, validated.
pub struct SolveSetup {
    pub model: ConductivityModel,
    pub background: Background,
    pub source: DipoleSource,
    pub receivers: Vec<Receiver>,
    pub plan: DecompositionPlan,
    pub gmres: GmresConfig,
}

impl Config {
    fn benchmark(&self) -> Result<Option<BenchmarkCase>> {
        let m = &self.model;
        match (&m.benchmark, &m.grid) {
            (Some(_), Some(_)) => bail!("model takes either a benchmark name or a grid, not both"),
            (None, None) => bail!("model needs a benchmark name or a grid"),
            (Some(name), None) => {
                ensure!(m.regions.is_empty() && m.fill.is_none(), "benchmark models take no regions or fill");
                let name: BenchmarkName = name.parse()?;
                Ok(Some(build_benchmark_model(name, m.scale)?))
            }
            (None, Some(_)) => Ok(None),
        }
    }

    fn gridded_model(&self, sigma0: f64) -> Result<ConductivityModel> {
        let g = self.model.grid.as_ref().ok_or_else(|| anyhow!("model needs a grid"))?;
        let spacing = match g.spacing {
            Spacing::Uniform(h) => [h; 3],
            Spacing::PerAxis(s) => s,
        };
        ensure!(spacing.iter().all(|&h| h > 0.0 && h.is_finite()), "grid spacing must be positive");
        let origin =
            g.origin.unwrap_or_else(|| [0, 1, 2].map(|a| g.center[a] - 0.5 * (g.dims[a] as f64 - 1.0) * spacing[a]));
        let grid = Grid::new(g.dims, spacing, origin)?;
        let fill = match &self.model.fill {
            Some(t) => t.resolve()?,
            None => Tensor3x3::isotropic(sigma0),
        };
        let regions = self
            .model
            .regions
            .iter()
            .map(|r| {
                ensure!((0..3).all(|a| r.lo[a] <= r.hi[a]), "region lo must not exceed hi");
                Ok((r.lo, r.hi, r.sigma.resolve()?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConductivityModel::from_fn(grid, sigma0, |p| {
            regions
                .iter()
                .rev()
                .find(|(lo, hi, _)| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
                .map_or(fill, |r| r.2)
        })?)
    }

    fn gmres_config(&self) -> Result<GmresConfig> {
        let d = GmresConfig::default();
        let cfg = GmresConfig {
            restart: self.gmres.restart.unwrap_or(d.restart),
            max_outer: self.gmres.max_outer.unwrap_or(d.max_outer),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn scheme(&self) -> Result<Scheme> {
        Ok(self.decomposition.scheme.as_deref().map(str::parse).transpose()?.unwrap_or(Scheme::GsAdaptive))
    }

    /// Schemes listed for a comparison; at least two, no repeats.
    pub fn compare_schemes(&self) -> Result<Vec<Scheme>> {
        let schemes = self.decomposition.schemes.iter().map(|s| s.parse()).collect::<ie_core::Result<Vec<Scheme>>>()?;
        ensure!(schemes.len() >= 2, "compare needs at least two schemes in decomposition.schemes");
        for (i, s) in schemes.iter().enumerate() {
            ensure!(!schemes[..i].contains(s), "scheme {s} is listed twice");
        }
        Ok(schemes)
    }

    pub fn solve_setup(&self) -> Result<SolveSetup> {
        let case = self.benchmark()?;
        let sigma0 = match (&self.background, &case) {
            (Some(b), _) => b.sigma0,
            (None, Some(c)) => c.model.sigma0(),
            (None, None) => bail!("missing [background] section"),
        };
        ensure!(sigma0 > 0.0 && sigma0.is_finite(), "sigma0 must be positive");
        let frequency = match (self.background.as_ref().and_then(|b| b.frequency), &case) {
            (Some(f), _) => f,
            (None, Some(c)) => c.frequency,
            (None, None) => bail!("background.frequency is required"),
        };
        let background = Background::new(sigma0, frequency)?;
        let model = match &case {
            Some(c) => c.model.clone().with_sigma0(sigma0)?,
            None => self.gridded_model(sigma0)?,
        };
        let (position, moment) = match (&self.source, &case) {
            (Some(s), _) => (s.position, s.moment),
            (None, Some(c)) => (c.source_position, c.source_moment),
            (None, None) => bail!("missing [source] section"),
        };
        let source = DipoleSource::new(position, moment, frequency)?;

        let receivers = if self.receivers.is_empty() {
            case.as_ref()
                .map_or_else(Vec::new, |c| c.receivers.iter().map(|(id, p)| Receiver::new(id.clone(), *p)).collect())
        } else {
            self.receivers
                .iter()
                .map(|r| match (r.position, r.offset) {
                    (Some(p), None) => Ok(Receiver::new(r.id.clone(), p)),
                    (None, Some(o)) => Ok(Receiver::new(r.id.clone(), [0, 1, 2].map(|a| position[a] + o[a]))),
                    _ => bail!("receiver '{}' needs exactly one of position and offset", r.id),
                })
                .collect::<Result<Vec<_>>>()?
        };
        for (i, r) in receivers.iter().enumerate() {
            ensure!(!receivers[..i].iter().any(|o| o.id == r.id), "receiver id '{}' is used twice", r.id);
        }

        let contrast = model.contrast();
        let grid = *model.grid();
        for r in &receivers {
            if let Some([i, j, k]) = grid.locate(r.position) {
                ensure!(!contrast.mask.get(grid.index(i, j, k)), "receiver '{}' lies inside an anomalous cell", r.id);
            }
        }

        let d = &self.decomposition;
        let boxes = match (&d.boxes, d.auto_axis_split) {
            (Some(_), Some(_)) => bail!("decomposition takes either boxes or auto_axis_split, not both"),
            (Some(b), None) => b.iter().map(|b| IndexBox::new(b.lo, b.hi)).collect::<ie_core::Result<Vec<_>>>()?,
            (None, Some(n)) => auto_axis_split(&grid, &contrast.mask, n)?,
            (None, None) => match &case {
                Some(c) => c.boxes.clone(),
                None => vec![IndexBox::full(&grid)],
            },
        };
        let mut plan = partition(&grid, &contrast.mask, &boxes)?.with_scheme(self.scheme()?);
        if let Some(t) = d.outer_tol {
            plan = plan.with_outer_tol(t);
        }
        if let Some(t) = d.inner_tol {
            plan = plan.with_inner_tol_fixed(t);
        }
        if let Some(n) = d.max_sweeps {
            plan = plan.with_max_sweeps(n);
        }
        plan.validate()?;
        let uncovered = contrast
            .mask
            .indices()
            .into_iter()
            .filter(|&c| !plan.boxes.iter().any(|b| b.contains(grid.coords(c))))
            .count();
        ensure!(uncovered == 0, "partition leaves {uncovered} anomalous cells uncovered");
        if plan.scheme == Scheme::FullDomain {
            ensure!(plan.boxes.len() <= 1, "full_domain needs a single box");
        }

        Ok(SolveSetup { model, background, source, receivers, plan, gmres: self.gmres_config()? })
    }

    pub fn log_setup(&self) -> Result<LogSetup> {
        let sec = self.logsim.as_ref().ok_or_else(|| anyhow!("missing [logsim] section"))?;
        let defaults = ToolConfig::default();
        let tool = ToolConfig {
            transmitter_moment: sec.tool.moment.unwrap_or(defaults.transmitter_moment),
            frequency: sec
                .tool
                .frequency
                .or_else(|| self.background.as_ref().and_then(|b| b.frequency))
                .unwrap_or(defaults.frequency),
            receiver_offsets: sec.tool.offsets.clone().unwrap_or(defaults.receiver_offsets),
        };
        tool.validate()?;
        let trajectory = Trajectory {
            start: sec.trajectory.start,
            end: sec.trajectory.end,
            station_spacing: sec.trajectory.station_spacing,
        };
        trajectory.stations()?;
        let window = WindowSpec { extent: sec.window.extent, cell_size: sec.window.cell_size, boxes: sec.window.boxes };
        window.dims()?;

        let formation = self.model.benchmark.as_deref() == Some(BenchmarkName::FaultedFormation.as_str());
        let sigma0 = match &self.background {
            Some(b) => b.sigma0,
            None if formation => LogConfig::default().sigma0,
            None => bail!("missing [background] section"),
        };
        ensure!(sigma0 > 0.0 && sigma0.is_finite(), "sigma0 must be positive");
        // The formation is sampled from its continuous definition; other
        // models through their grid.
        let global: Box<dyn ConductivitySource> = if formation {
            ensure!(self.model.grid.is_none(), "model takes either a benchmark name or a grid, not both");
            Box::new(FaultedFormation::default())
        } else {
            match self.benchmark()? {
                Some(c) => Box::new(c.model),
                None => Box::new(self.gridded_model(sigma0)?),
            }
        };
        let d = &self.decomposition;
        let base = LogConfig::default();
        let cfg = LogConfig {
            sigma0,
            scheme: self.scheme()?,
            outer_tol: d.outer_tol.unwrap_or(base.outer_tol),
            inner_tol_fixed: d.inner_tol.unwrap_or(base.inner_tol_fixed),
            max_sweeps: d.max_sweeps.unwrap_or(base.max_sweeps),
            gmres: self.gmres_config()?,
        };
        ensure!(cfg.outer_tol > 0.0 && cfg.outer_tol < 1.0, "outer_tol must lie in (0, 1)");
        ensure!(cfg.inner_tol_fixed > 0.0 && cfg.inner_tol_fixed < 1.0, "inner_tol must lie in (0, 1)");
        ensure!(cfg.max_sweeps > 0, "max_sweeps must be at least 1");
        Ok(LogSetup { global, trajectory, tool, window, cfg })
    }
}

pub struct LogSetup {
    pub global: Box<dyn ConductivitySource>,
    pub trajectory: Trajectory,
    pub tool: ToolConfig,
    pub window: WindowSpec,
    pub cfg: LogConfig,
}
