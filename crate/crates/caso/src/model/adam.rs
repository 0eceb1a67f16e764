//! Adam optimizer over dense embedding matrices.

use crate::embedding::Embedding;
use ndarray::Zip;

/// First and second moment accumulators for one parameter matrix.
#[derive(Debug, Clone)]
pub struct AdamMoments {
    pub m: Embedding,
    pub v: Embedding,
}

impl AdamMoments {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AdamMoments {
            m: Embedding::zeros((rows, cols)),
            v: Embedding::zeros((rows, cols)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    /// The standard constants: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// p ← p − lr·m̂/(√v̂ + ε) with bias-corrected moments; `step` is the
    /// 1-based count including this update. A zero gradient leaves both
    /// moments and the parameter bitwise unchanged.
    pub fn update(
        &self,
        step: usize,
        param: &mut Embedding,
        moments: &mut AdamMoments,
        grad: &Embedding,
    ) {
        debug_assert_eq!(param.dim(), grad.dim());
        let bc1 = 1.0 - self.beta1.powi(step as i32);
        let bc2 = 1.0 - self.beta2.powi(step as i32);
        let lr = self.learning_rate;
        Zip::from(param)
            .and(&mut moments.m)
            .and(&mut moments.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            });
    }
}
