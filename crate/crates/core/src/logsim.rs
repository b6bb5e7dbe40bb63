//! Moving-window logging simulation along a straight trajectory.
//!
//! At every station a tool-aligned window is cut out of the global model,
//! its tensors are rotated into the tool frame, and the window is solved
//! with the decomposition solver. The transmitter sits at the window's
//! central cell; receivers trail it along the tool axis.
//!
//! Tool-frame axes for a trajectory direction with polar angle `θ` and
//! azimuth `φ` are the rows of
//!
//! ```text
//! x′ = ( cosθ cosφ,  cosθ sinφ, −sinθ)
//! y′ = (−sinφ,       cosφ,       0   )
//! z′ = ( sinθ cosφ,  sinθ sinφ,  cosθ)
//! ```

use std::io::Write;

use num_complex::Complex64;

use crate::decomposition::{partition, solve_dd_with, Scheme};
use crate::error::{Error, Result};
use crate::greens::{Background, KernelKind};
use crate::krylov::GmresConfig;
use crate::model::{ConductivityModel, ConductivitySource, Grid, IndexBox};
use crate::operators::KernelCache;
use crate::sources::{background_e_on_grid, receiver_h_with, DipoleSource, Receiver, ReceiverPlacement};

#[derive(Clone, Debug, PartialEq)]
pub struct ToolConfig {
    /// Transmitter moment in the tool frame, A·m².
    pub transmitter_moment: [f64; 3],
    pub frequency: f64,
    /// Receiver distances behind the transmitter, m.
    pub receiver_offsets: Vec<f64>,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self { transmitter_moment: [0.0, 0.0, 1.0], frequency: 24_000.0, receiver_offsets: vec![7.0, 15.0, 30.0] }
    }
}

impl ToolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.receiver_offsets.is_empty() {
            return Err(Error::InvalidParameter("tool needs at least one receiver".into()));
        }
        if self.receiver_offsets[0] <= 0.0 || self.receiver_offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("receiver offsets must be positive and increasing".into()));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::InvalidParameter("tool frequency must be positive".into()));
        }
        Ok(())
    }

    /// Coupling labels `tx` + receiver component for the three field
    /// components; `z` when the transmitter points along the tool axis.
    pub fn component_labels(&self) -> [String; 3] {
        let m = self.transmitter_moment;
        let tx = match m {
            [0.0, 0.0, z] if z != 0.0 => "z",
            [x, 0.0, 0.0] if x != 0.0 => "x",
            [0.0, y, 0.0] if y != 0.0 => "y",
            _ => "t",
        };
        ["x", "y", "z"].map(|r| format!("{tx}{r}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    /// Window size along the tool-frame axes, m.
    pub extent: [f64; 3],
    pub cell_size: f64,
    /// Sub-domain count along the tool axis.
    pub boxes: usize,
}

impl WindowSpec {
    pub fn dims(&self) -> Result<[usize; 3]> {
        if !(self.cell_size > 0.0) {
            return Err(Error::InvalidParameter("window cell size must be positive".into()));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let n = self.extent[a] / self.cell_size;
            if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 * n {
                return Err(Error::InvalidParameter(format!(
                    "window extent {} is not a whole number of {} m cells",
                    self.extent[a], self.cell_size
                )));
            }
            dims[a] = n.round() as usize;
        }
        if self.boxes == 0 || dims[2] % self.boxes != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} boxes do not divide {} cells along the tool axis",
                self.boxes, dims[2]
            )));
        }
        Ok(dims)
    }

    /// Tool-frame grid with the central cell's centroid at the origin.
    pub fn grid(&self) -> Result<Grid> {
        let dims = self.dims()?;
        let h = self.cell_size;
        Grid::new(dims, [h; 3], dims.map(|n| -((n / 2) as f64) * h))
    }

    /// Equal slabs along the tool axis, in increasing z′ order.
    pub fn sub_boxes(&self) -> Result<Vec<IndexBox>> {
        let [nx, ny, nz] = self.dims()?;
        let len = nz / self.boxes;
        (0..self.boxes).map(|b| IndexBox::new([0, 0, b * len], [nx, ny, (b + 1) * len])).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub station_spacing: f64,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        let d = [0, 1, 2].map(|a| self.end[a] - self.start[a]);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn direction(&self) -> Result<[f64; 3]> {
        let l = self.length();
        if !(l > 0.0) {
            return Err(Error::InvalidParameter("trajectory start and end coincide".into()));
        }
        Ok([0, 1, 2].map(|a| (self.end[a] - self.start[a]) / l))
    }

    /// Angle between the drilling direction and the vertical z axis.
    pub fn dip(&self) -> Result<f64> {
        Ok(self.direction()?[2].clamp(-1.0, 1.0).acos())
    }

    pub fn azimuth(&self) -> Result<f64> {
        let t = self.direction()?;
        Ok(t[1].atan2(t[0]))
    }

    pub fn stations(&self) -> Result<Vec<[f64; 3]>> {
        if !(self.station_spacing > 0.0) {
            return Err(Error::InvalidParameter("station spacing must be positive".into()));
        }
        let t = self.direction()?;
        let count = (self.length() / self.station_spacing + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|k| {
                let s = k as f64 * self.station_spacing;
                [0, 1, 2].map(|a| self.start[a] + s * t[a])
            })
            .collect())
    }

    /// Rows are the tool-frame axes in global coordinates.
    pub fn rotation(&self) -> Result<[[f64; 3]; 3]> {
        Ok(tool_rotation(self.dip()?, self.azimuth()?))
    }
}

pub fn tool_rotation(theta: f64, phi: f64) -> [[f64; 3]; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [[ct * cp, ct * sp, -st], [-sp, cp, 0.0], [st * cp, st * sp, ct]]
}

/// Global position of a tool-frame point.
pub fn to_global(station: [f64; 3], rot: &[[f64; 3]; 3], local: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|a| station[a] + (0..3).map(|r| rot[r][a] * local[r]).sum::<f64>())
}

/// Conductivity of the tool-aligned window around `station`, tensors
/// rotated into the tool frame. Points outside the source's domain take
/// the nearest value.
pub fn extract_window(
    global: &dyn ConductivitySource,
    station: [f64; 3],
    trajectory: &Trajectory,
    window: &WindowSpec,
    sigma0: f64,
) -> Result<ConductivityModel> {
    let grid = window.grid()?;
    let rot = trajectory.rotation()?;
    let mut clamped = 0usize;
    let tensors = (0..grid.num_cells())
        .map(|c| {
            let (t, was_clamped) = global.sample(to_global(station, &rot, grid.centroid_of(c)));
            clamped += was_clamped as usize;
            t.similarity(&rot)
        })
        .collect();
    if clamped > 0 {
        log::warn!("window at {station:?}: {clamped} cells fall outside the global model and use nearest values");
    }
    ConductivityModel::new(grid, tensors, sigma0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogConfig {
    pub sigma0: f64,
    pub scheme: Scheme,
    pub outer_tol: f64,
    pub inner_tol_fixed: f64,
    pub max_sweeps: usize,
    pub gmres: GmresConfig,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.1,
            scheme: Scheme::GsAdaptive,
            outer_tol: 1e-3,
            inner_tol_fixed: 1e-3,
            max_sweeps: 50,
            gmres: GmresConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverRecord {
    pub id: String,
    pub offset: f64,
    /// Receiver position in global coordinates.
    pub position: [f64; 3],
    /// Total magnetic field in the tool frame.
    pub h: [Complex64; 3],
    /// Background field in the tool frame.
    pub h_background: [Complex64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationRecord {
    pub index: usize,
    pub position: [f64; 3],
    pub receivers: Vec<ReceiverRecord>,
    pub sweeps: usize,
    pub residual: f64,
    pub gmres_iterations: usize,
    pub residual_history: Vec<f64>,
    /// Why the station has no receiver values, if it failed.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogResult {
    pub labels: [String; 3],
    pub stations: Vec<StationRecord>,
}

impl LogResult {
    pub fn failed_stations(&self) -> usize {
        self.stations.iter().filter(|s| s.error.is_some()).count()
    }

    /// Log rows as CSV with one line per station, receiver, and coupling.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "station,x,y,z,receiver_id,offset_m,component,real,imag,magnitude")?;
        for st in &self.stations {
            for rx in &st.receivers {
                for (label, v) in self.labels.iter().zip(rx.h) {
                    writeln!(
                        w,
                        "{},{:.6},{:.6},{:.6},{},{},{},{:.12e},{:.12e},{:.12e}",
                        st.index,
                        st.position[0],
                        st.position[1],
                        st.position[2],
                        rx.id,
                        rx.offset,
                        label,
                        v.re,
                        v.im,
                        v.norm()
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Runs the moving-window simulation. Station failures are recorded and
/// the log continues.
pub fn simulate_log(
    global: &dyn ConductivitySource,
    trajectory: &Trajectory,
    tool: &ToolConfig,
    window: &WindowSpec,
    cfg: &LogConfig,
) -> Result<LogResult> {
    tool.validate()?;
    let grid = window.grid()?;
    let boxes = window.sub_boxes()?;
    let stations = trajectory.stations()?;
    let rot = trajectory.rotation()?;
    let back = window.dims()?[2] / 2;
    let reach = back as f64 * window.cell_size;
    if let Some(&far) = tool.receiver_offsets.last() {
        if far > reach + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "receiver offset {far} m lies outside the window ({reach} m behind the transmitter)"
            )));
        }
    }
    let bg = Background::new(cfg.sigma0, tool.frequency)?;
    let src = DipoleSource::new([0.0; 3], tool.transmitter_moment, tool.frequency)?;
    let receivers: Vec<Receiver> = tool
        .receiver_offsets
        .iter()
        .enumerate()
        .map(|(i, &o)| Receiver::new(format!("R{}", i + 1), [0.0, 0.0, -o]))
        .collect();
    let e0 = background_e_on_grid(&src, &grid, &bg)?;
    let cache = KernelCache::new(KernelKind::Electric, grid.spacing(), bg);

    let mut records = Vec::with_capacity(stations.len());
    for (index, &station) in stations.iter().enumerate() {
        let mut record = StationRecord {
            index,
            position: station,
            receivers: Vec::new(),
            sweeps: 0,
            residual: f64::NAN,
            gmres_iterations: 0,
            residual_history: Vec::new(),
            error: None,
        };
        let outcome = (|| -> Result<()> {
            let model = extract_window(global, station, trajectory, window, cfg.sigma0)?;
            let contrast = model.contrast();
            let plan = partition(&grid, &contrast.mask, &boxes)?
                .with_scheme(cfg.scheme)
                .with_outer_tol(cfg.outer_tol)
                .with_inner_tol_fixed(cfg.inner_tol_fixed)
                .with_max_sweeps(cfg.max_sweeps);
            let sol = solve_dd_with(&contrast, &plan, &e0, &cfg.gmres, &cache)?;
            record.sweeps = sol.sweeps();
            record.residual = sol.state.residual;
            record.gmres_iterations = sol.total_gmres_iterations();
            record.residual_history = sol.state.history.clone();
            if !sol.converged {
                return Err(Error::NonConvergence {
                    sweeps: sol.sweeps(),
                    target: cfg.outer_tol,
                    history: sol.state.history,
                });
            }
            let h = receiver_h_with(&sol.field, &contrast, &receivers, &src, &bg, ReceiverPlacement::AllowInside)?;
            let h0 =
                crate::sources::background_h(&src, &receivers.iter().map(|r| r.position).collect::<Vec<_>>(), &bg)?;
            for ((rx, &offset), (hv, h0v)) in receivers.iter().zip(&tool.receiver_offsets).zip(h.into_iter().zip(h0)) {
                record.receivers.push(ReceiverRecord {
                    id: rx.id.clone(),
                    offset,
                    position: to_global(station, &rot, rx.position),
                    h: hv,
                    h_background: h0v,
                });
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            log::warn!("station {index} at {station:?} failed: {e}");
            record.error = Some(e.to_string());
        }
        log::info!(
            "station {index}: {} sweeps, residual {:.3e}, {} GMRES iterations",
            record.sweeps,
            record.residual,
            record.gmres_iterations
        );
        records.push(record);
    }
    Ok(LogResult { labels: tool.component_labels(), stations: records })
}
