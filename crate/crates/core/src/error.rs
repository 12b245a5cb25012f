use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("diffusion matrix is not diagonally dominant at node {node} (coords {coords:?}): {detail}")]
    NotDiagonallyDominant {
        node: usize,
        coords: [usize; 2],
        detail: String,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("horizon {t} is not an integer multiple of the time step {dt}")]
    HorizonNotAligned { t: f64, dt: f64 },

    #[error("large-time profile did not converge by t = {t_final}: best c = {c}, last gap = {gap:e}")]
    NotConverged { t_final: f64, c: f64, gap: f64 },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("marginal mismatch when concatenating measures: max discrepancy {0:e}")]
    MarginalMismatch(f64),

    #[error("audit failed: {0}")]
    Audit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
