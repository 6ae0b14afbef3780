//! Sampled data, STFT and its inverse, metaplectic transforms and wave-front
//! detection.

mod detect;
mod metaplectic;
mod sampled;
mod transform;

pub use detect::{detect_wf, direction_grid, gauss_legendre, DetectParams, DetectedFan, WFReport};
pub use metaplectic::{metaplectic, Metaplectic};
pub use sampled::{Datum, Grid, SampledDistribution, NARROW_WIDTH};
pub use transform::{
    istft, nyquist_fraction, stft, stft_strided, window, DirectField, PhaseSpaceField, ProductField, STFTField,
};
