//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A grid or mode parameter violates its invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two values that must share geometry (samples, pitch) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Requested OAM index cannot be represented on the grid.
    #[error("OAM index {ell} exceeds the anti-aliasing bound |l| <= {max} for this grid")]
    AliasingBound { ell: i32, max: i32 },

    /// Generic invalid-argument rejection.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A least-squares fit has more unknowns than samples.
    #[error("underdetermined fit: {pixels} in-aperture pixels for {coefficients} coefficients")]
    Underdetermined { pixels: usize, coefficients: usize },

    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
