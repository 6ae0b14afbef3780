//! Hamilton maps and singular spaces of complex quadratic forms, propagation of
//! isotropic wave-front sets under `e^{-tA}`, and their numerical detection
//! through the short-time Fourier transform.

// `!(x > y)` comparisons are kept so that NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod propagator;
pub mod quantization;
pub mod stft;
pub mod symplectic;
pub mod wavefront;

pub use error::{Error, Result};

/// Order-preserving map, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
