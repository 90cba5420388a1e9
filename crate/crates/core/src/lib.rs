//! Self-supervised through-plane super-resolution for anisotropic
//! multi-slice volumes.
//!
//! A 2D multi-slice acquisition samples thick, possibly gapped slices
//! along one axis while the in-plane content stays high resolution.
//! This crate models that acquisition (slice profile convolution plus
//! FOV-aware subsampling), trains a small residual CNN on patch pairs
//! simulated from the volume's own in-plane slices, and applies it
//! across both canonical through-plane orientations to restore an
//! isotropic volume. Reference-based metrics (PSNR, SSIM, consistency
//! Dice) and a simulation harness are included for validation.

pub mod acquisition;
pub mod cli;
pub mod error;
pub mod grid;
pub mod inference;
pub mod interp;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod nn;
pub mod phantom;
pub mod profile;
pub mod trainer;
pub mod volume;

pub use acquisition::AcquisitionSpec;
pub use error::Error;
pub use grid::GridSpec1D;
pub use interp::{Boundary, InterpKernel};
pub use nn::{SRNetwork, SRNetworkConfig};
pub use profile::SliceProfile;
pub use trainer::TrainConfig;
pub use volume::Volume;

pub type Result<T> = std::result::Result<T, Error>;
