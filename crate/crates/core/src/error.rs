use crate::krylov::SolveStats;

/// Errors raised by the modeling, operator, and solver layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("padded workspace needs {required_bytes} bytes, above the {limit_bytes} byte limit")]
    Resource { required_bytes: u64, limit_bytes: u64 },

    #[error("relative residual undefined: reference field has zero norm on the evaluation cells")]
    UndefinedResidual,

    #[error("GMRES breakdown after {iterations} iterations with relative residual {residual:.3e}")]
    Breakdown { iterations: usize, residual: f64 },

    #[error("GMRES produced non-finite values after {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partition leaves {uncovered} anomalous cells uncovered")]
    Coverage { uncovered: usize },

    #[error("unsupported sub-domain layout: {0}")]
    UnsupportedLayout(String),

    #[error("sub-domain {subdomain} solve did not converge in sweep {sweep} (residual {:.3e})", stats.final_residual())]
    SweepFailure { sweep: usize, subdomain: usize, stats: SolveStats },

    #[error("outer iteration did not reach {target:.1e} in {sweeps} sweeps (last residual {:.3e})", history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { sweeps: usize, target: f64, history: Vec<f64> },

    #[error("receiver '{0}' lies inside an anomalous cell")]
    Placement(String),

    #[error("unknown benchmark model '{0}'")]
    UnknownBenchmark(String),

    #[error("oracle size cap exceeded: {cells} cells > {cap}")]
    Size { cells: usize, cap: usize },

    #[error("malformed binary file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
