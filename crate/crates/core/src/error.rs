use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("requested spacing {spacing} yields an empty grid (N' < 1)")]
    EmptyGrid { spacing: f64 },

    #[error("signal length {signal} does not match grid count {grid}")]
    LengthMismatch { signal: usize, grid: usize },

    #[error("invalid slice profile: {0}")]
    InvalidProfile(String),

    #[error("profile tap spacing {tap_spacing} does not match grid spacing {grid_spacing}")]
    TapSpacingMismatch { tap_spacing: f64, grid_spacing: f64 },

    #[error("invalid acquisition spec: {0}")]
    InvalidSpec(String),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("axis {axis} is not a valid volume axis")]
    InvalidAxis { axis: usize },

    #[error("through-plane axis is ambiguous (no strictly largest spacing); pass --axis")]
    AmbiguousAxis,

    #[error("slice thickness {thickness} mm is below the source spacing {spacing} mm")]
    ThicknessBelowSpacing { thickness: f64, spacing: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid network config: {0}")]
    InvalidConfig(String),

    #[error("network was trained for ratio {net} but the volume requires {requested}")]
    RatioMismatch { net: f64, requested: f64 },

    #[error(
        "non-finite loss at step {step} (lr={lr:.3e}, batch mean={batch_mean:.3e}, batch max={batch_max:.3e})"
    )]
    NonFiniteLoss {
        step: usize,
        lr: f64,
        batch_mean: f64,
        batch_max: f64,
    },

    #[error("volume too small for patch geometry: {0}")]
    VolumeTooSmall(String),

    #[error("unsupported volume container: {0}")]
    UnsupportedContainer(String),

    #[error("volume file carries no voxel spacing metadata: {0}")]
    MissingSpacing(String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
