//! Reconstruction toolkit for 3D ill-posed inverse problems.
//!
//! Sparse-view CT and undersampled MRI volumes are recovered by annealed
//! Langevin sampling driven by a two-and-a-half-order (TOSM) score: a single
//! 2D score network evaluated along the three orthogonal slice stacks of the
//! volume, with the per-axis fields combined by a weighted sum into one 3D
//! score. Sampling steps are interleaved with physics-based data consistency
//! (SIRT for CT sinograms, masked k-space replacement for MRI).
//!
//! Module layout:
//! - [`volume`]: 3D scalar/complex fields, phantoms, slicing, padding, TVOL i/o.
//! - [`projector`]: Siddon ray-driven forward/back projection and FBP/FDK.
//! - [`sirt`]: simultaneous iterative reconstruction and the CT DC operator.
//! - [`score`]: noise schedule, analytic score oracles, trainable 2D score
//!   network with denoising score matching.
//! - [`tosm`]: three-axis score combination, Langevin / predictor-corrector
//!   samplers, and the full CT/MRI reconstruction loops.
//! - [`mri`]: centered Fourier transforms, undersampling masks, k-space DC.
//! - [`metrics`]: PSNR/SSIM/RMSE, noise power spectra, histogram similarity.

pub mod error;
pub mod metrics;
pub mod mri;
pub mod projector;
pub mod score;
pub mod sirt;
pub mod tosm;
pub mod volume;

pub use error::{ReconError, Result};
