//! Dense row-major embedding matrices.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CasoError, Result};

/// Rows are entities (users or communities), columns are latent dimensions.
pub type Embedding = Array2<f64>;

/// Errors if any entry is NaN or infinite.
pub fn ensure_finite(context: &str, m: &Embedding) -> Result<()> {
    for (idx, v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(CasoError::NonFinite {
                context: context.to_string(),
                detail: Some(format!("entry ({}, {}) = {v}", idx.0, idx.1)),
            });
        }
    }
    Ok(())
}

/// I.i.d. Gaussian entries with standard deviation 1/√dim.
pub fn gaussian_init(rng: &mut impl Rng, rows: usize, dim: usize) -> Embedding {
    let std = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_fn((rows, dim), |_| {
        let z: f64 = rng.sample(StandardNormal);
        z * std
    })
}
