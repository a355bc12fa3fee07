use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("z = {z} outside profile domain |z| <= {z_max}")]
    OutOfDomain { z: f64, z_max: f64 },

    #[error("profile parameter {name} = {value} must be positive")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("flatness order k = {k} must be an even nonnegative integer; use RevolutionProfile::with_flatness_override for nonstandard k")]
    InvalidFlatness { k: f64 },

    #[error("integration step too large: Clairaut drift {drift:.3e} exceeds {bound:.3e}")]
    StepTooLarge { drift: f64, bound: f64 },

    #[error("two-point shooting failed: {reason}")]
    NoConvergence { reason: String },

    #[error("busemann horizon {horizon} below the minimum 20")]
    HorizonTooShort { horizon: f64 },

    #[error("power-law fit needs at least {needed} samples strictly inside the window, found {found}")]
    FitWindow { needed: usize, found: usize },

    #[error("degenerate power-law fit: r_squared = {r_squared:.6} < 0.99")]
    DegenerateFit { r_squared: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("stencil reach insufficient: needs {needed:.2} cells along {axis}, stencil radius is {radius}")]
    StencilReach {
        axis: &'static str,
        needed: f64,
        radius: usize,
    },

    #[error("critical-value drift has the same sign at both probe values ({drift_lo:.3e}, {drift_hi:.3e}); stencil too small")]
    NoBracket { drift_lo: f64, drift_hi: f64 },

    #[error("weak-KAM iteration did not converge within {max_iter} iterations (oscillation {oscillation:.3e})")]
    NonConvergence { max_iter: usize, oscillation: f64 },

    #[error("empty Aubry set at tolerance {tol:.3e}; tolerance below the discretization floor")]
    EmptyAubrySet { tol: f64 },

    #[error("eigen solver did not converge within {max_iter} iterations (residual {residual:.3e})")]
    NotConverged { max_iter: usize, residual: f64 },

    #[error("principal eigenvector not strictly positive (min/max = {ratio:.3e}); reduce grid spacing")]
    NonPositiveEigenvector { ratio: f64 },

    #[error("eigenvalue mismatch |Lambda_plus - Lambda_minus| = {diff:.3e} exceeds {tol:.3e}")]
    EigenvalueMismatch { diff: f64, tol: f64 },

    #[error("grid too coarse for lambda = {lambda}: eigenfunction half-width spans {cells:.1} cells < 8")]
    GridTooCoarse { lambda: f64, cells: f64 },

    #[error("ln(measure) is not decreasing over the fit window for band [{z_lo}, {z_hi}]")]
    InsufficientDecay { z_lo: f64, z_hi: f64 },

    #[error("solver error at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("triangle mesh failure: enclosed-region boundary self-intersects")]
    MeshFailure,

    #[error("angle comparison violated at trial {trial}: alpha2 - alpha1 = {margin:.3e}")]
    ComparisonViolation { trial: usize, margin: f64 },

    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
