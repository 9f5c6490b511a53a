use thiserror::Error;

/// Errors raised by the toolkit. Variants are grouped by the module that
/// raises them; `code()` yields a stable module-qualified identifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // mmspace
    #[error("metric violation: {0}")]
    MetricViolation(String),
    #[error("graph is disconnected: node {0} unreachable from node 0")]
    DisconnectedGraph(usize),
    #[error("space has no points")]
    EmptySpace,
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("diameter {diameter} exceeds the Bonnet-Myers bound {bound}")]
    BadDiameter { diameter: f64, bound: f64 },
    #[error("dimension N = {0} must be >= 1")]
    BadDimension(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    // w1solve
    #[error("marginals carry different mass (difference {0:e})")]
    UnbalancedMarginals(f64),
    #[error("min-cost flow failed: {0}")]
    SolverFailure(String),
    #[error("tolerance {tol:e} excludes plan pair ({from}, {to}) with slack {slack:e}")]
    TolTooSmall { tol: f64, from: usize, to: usize, slack: f64 },

    // disint
    #[error("function is not mean zero: sum f dm = {0:e}")]
    NotMeanZero(f64),

    // monge1d
    #[error("source and target masses differ ({source_mass} vs {target_mass})")]
    MassMismatch { source_mass: u64, target_mass: u64 },
    #[error("ray {ray}: source mass {source_mass:e} and target mass {target_mass:e} disagree")]
    RayMarginalMismatch { ray: usize, source_mass: f64, target_mass: f64 },

    // curvature
    #[error("density vanishes at interior point t = {0} while its neighbours are positive")]
    DegenerateDensity(f64),
    #[error("invalid density: {0}")]
    BadDensity(String),

    // isoperim
    #[error("volume fraction {0} outside [0, 1]")]
    BadVolume(f64),
    #[error("smallest eps {eps} is below twice the mesh size {mesh}")]
    MeshTooCoarse { eps: f64, mesh: f64 },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::MetricViolation(_) => "mmspace.metric_violation",
            Error::DisconnectedGraph(_) => "mmspace.disconnected_graph",
            Error::EmptySpace => "mmspace.empty_space",
            Error::BadWeights(_) => "mmspace.bad_weights",
            Error::BadDiameter { .. } => "mmspace.bad_diameter",
            Error::BadDimension(_) => "mmspace.bad_dimension",
            Error::Unsupported(_) => "mmspace.unsupported",
            Error::InvalidInput(_) => "input.invalid",
            Error::UnbalancedMarginals(_) => "w1solve.unbalanced_marginals",
            Error::SolverFailure(_) => "w1solve.solver_failure",
            Error::TolTooSmall { .. } => "w1solve.tol_too_small",
            Error::NotMeanZero(_) => "disint.not_mean_zero",
            Error::MassMismatch { .. } => "monge1d.mass_mismatch",
            Error::RayMarginalMismatch { .. } => "monge1d.ray_marginal_mismatch",
            Error::DegenerateDensity(_) => "curvature.degenerate_density",
            Error::BadDensity(_) => "curvature.bad_density",
            Error::BadVolume(_) => "isoperim.bad_volume",
            Error::MeshTooCoarse { .. } => "isoperim.mesh_too_coarse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
