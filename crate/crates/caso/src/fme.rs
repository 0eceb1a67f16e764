//! Feature mutual exclusion between social and collaborative embeddings.
//!
//! Redundancy is measured by a simplified empirical HSIC with linear
//! kernels, ‖SᵀX‖_F², and suppressed by simultaneous penalized updates
//! anchored at the row-normalized inputs:
//!
//!   S⁽ⁱ⁺¹⁾ = S⁰ − λ·X⁽ⁱ⁾(X⁽ⁱ⁾ᵀS⁽ⁱ⁾)
//!   X⁽ⁱ⁺¹⁾ = X⁰ − λ·S⁽ⁱ⁾(S⁽ⁱ⁾ᵀX⁽ⁱ⁾)
//!
//! The d×d inner contraction comes first, so one iteration costs O(n·d²).
//! The pass is differentiable: `FmePass` records every iterate and plays
//! the chain rule backwards, including the row-normalization Jacobian
//! (I − ŝŝᵀ)/‖s‖.

use ndarray::{Array1, Array2};

use crate::embedding::Embedding;
use crate::error::{CasoError, Result};

#[derive(Debug, Clone, Copy)]
pub struct FmeConfig {
    /// Penalty weight λ ≥ 0.
    pub lambda: f64,
    /// Number of update iterations; one is enough in practice.
    pub iterations: usize,
}

impl Default for FmeConfig {
    fn default() -> Self {
        FmeConfig {
            lambda: 0.01,
            iterations: 1,
        }
    }
}

/// Euclidean norm of every row.
pub fn row_norms(m: &Embedding) -> Array1<f64> {
    m.rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect()
}

/// Scales every nonzero row to unit norm; zero rows stay zero.
pub fn row_normalize(m: &Embedding) -> Embedding {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// ‖SᵀX‖_F², never forming the n×n Gram matrix. For a square d×d product
/// the squares are accumulated symmetrically, so swapping the arguments
/// reproduces the value bit for bit.
pub fn hsic_simplified(s: &Embedding, x: &Embedding) -> f64 {
    assert_eq!(s.nrows(), x.nrows(), "row count mismatch");
    let a = s.t().dot(x);
    let (r, c) = (a.nrows(), a.ncols());
    if r == c {
        let mut acc = 0.0;
        for i in 0..r {
            acc += a[[i, i]] * a[[i, i]];
            for j in i + 1..c {
                acc += a[[i, j]] * a[[i, j]] + a[[j, i]] * a[[j, i]];
            }
        }
        acc
    } else {
        a.iter().map(|v| v * v).sum()
    }
}

/// Full centered empirical HSIC, (1/(n−1)²)·trace(K⁽ˢ⁾EK⁽ˣ⁾E) with linear
/// kernels and E = I − (1/n)·11ᵀ. Test oracle only: forms n×n matrices.
pub fn hsic_centered_oracle(s: &Embedding, x: &Embedding) -> Result<f64> {
    assert_eq!(s.nrows(), x.nrows(), "row count mismatch");
    let n = s.nrows();
    if n < 2 {
        return Err(CasoError::invalid(
            "n",
            "centered HSIC needs at least 2 rows",
        ));
    }
    let ks = s.dot(&s.t());
    let kx = x.dot(&x.t());
    let e = Array2::from_shape_fn((n, n), |(i, j)| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64
    });
    let prod = ks.dot(&e).dot(&kx).dot(&e);
    let trace = (0..n).map(|i| prod[[i, i]]).sum::<f64>();
    let nm1 = (n - 1) as f64;
    Ok(trace / (nm1 * nm1))
}

/// Row-normalizes the inputs and runs the simultaneous updates.
pub fn fme_update(s0: &Embedding, x0: &Embedding, cfg: &FmeConfig) -> (Embedding, Embedding) {
    let pass = FmePass::forward(s0, x0, cfg);
    (pass.s_out().clone(), pass.x_out().clone())
}

/// Forward pass with recorded iterates, enabling the exact backward pass.
#[derive(Debug, Clone)]
pub struct FmePass {
    lambda: f64,
    s_norms: Array1<f64>,
    x_norms: Array1<f64>,
    /// states[i] = (S⁽ⁱ⁾, X⁽ⁱ⁾); states[0] holds the normalized anchors.
    states: Vec<(Embedding, Embedding)>,
}

impl FmePass {
    pub fn forward(s0: &Embedding, x0: &Embedding, cfg: &FmeConfig) -> Self {
        assert_eq!(s0.dim(), x0.dim(), "shape mismatch");
        let s_norms = row_norms(s0);
        let x_norms = row_norms(x0);
        let s_hat = row_normalize(s0);
        let x_hat = row_normalize(x0);
        let mut states = vec![(s_hat, x_hat)];
        for i in 0..cfg.iterations {
            let (s_i, x_i) = &states[i];
            let (s_anchor, x_anchor) = (&states[0].0, &states[0].1);
            let xt_s = x_i.t().dot(s_i);
            let st_x = s_i.t().dot(x_i);
            let s_next = s_anchor - &(x_i.dot(&xt_s) * cfg.lambda);
            let x_next = x_anchor - &(s_i.dot(&st_x) * cfg.lambda);
            states.push((s_next, x_next));
        }
        FmePass {
            lambda: cfg.lambda,
            s_norms,
            x_norms,
            states,
        }
    }

    pub fn s_out(&self) -> &Embedding {
        &self.states.last().unwrap().0
    }

    pub fn x_out(&self) -> &Embedding {
        &self.states.last().unwrap().1
    }

    /// Transports output gradients to the un-normalized inputs. With
    /// `through_normalization` false the normalization is treated as
    /// identity (stop-gradient comparison mode).
    pub fn backward(
        &self,
        d_s_out: &Embedding,
        d_x_out: &Embedding,
        through_normalization: bool,
    ) -> (Embedding, Embedding) {
        let iterations = self.states.len() - 1;
        let mut g = d_s_out.clone();
        let mut h = d_x_out.clone();
        // Gradients w.r.t. the anchors S⁰, X⁰ accumulated over iterations.
        let mut d_s_anchor = Array2::zeros(g.dim());
        let mut d_x_anchor = Array2::zeros(h.dim());
        for i in (0..iterations).rev() {
            let (s_i, x_i) = &self.states[i];
            d_s_anchor += &g;
            d_x_anchor += &h;
            // S⁽ⁱ⁺¹⁾ = S⁰ − λ·X(XᵀS), X⁽ⁱ⁺¹⁾ = X⁰ − λ·S(SᵀX) at iterate i.
            let st_x = s_i.t().dot(x_i);
            let xt_s = x_i.t().dot(s_i);
            let xt_g = x_i.t().dot(&g);
            let gt_x = g.t().dot(x_i);
            let st_h = s_i.t().dot(&h);
            let ht_s = h.t().dot(s_i);
            // dS⁽ⁱ⁾ = −λ[X(XᵀG) + H(XᵀS) + X(HᵀS)]
            // dX⁽ⁱ⁾ = −λ[G(SᵀX) + S(GᵀX) + S(SᵀH)]
            let d_s = -self.lambda * &(x_i.dot(&xt_g) + h.dot(&xt_s) + x_i.dot(&ht_s));
            let d_x = -self.lambda * &(g.dot(&st_x) + s_i.dot(&gt_x) + s_i.dot(&st_h));
            g = d_s;
            h = d_x;
        }
        d_s_anchor += &g;
        d_x_anchor += &h;
        if !through_normalization {
            return (d_s_anchor, d_x_anchor);
        }
        let (s_hat, x_hat) = &self.states[0];
        let back = |grad: &Embedding, hat: &Embedding, norms: &Array1<f64>| -> Embedding {
            let mut out = Array2::zeros(grad.dim());
            for r in 0..grad.nrows() {
                let norm = norms[r];
                if norm > 0.0 {
                    let gr = grad.row(r);
                    let hr = hat.row(r);
                    let dot = gr.dot(&hr);
                    let mut or = out.row_mut(r);
                    or.assign(&gr);
                    or.scaled_add(-dot, &hr);
                    or /= norm;
                }
            }
            out
        };
        (
            back(&d_s_anchor, s_hat, &self.s_norms),
            back(&d_x_anchor, x_hat, &self.x_norms),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(seed: u64, n: usize, d: usize) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn normalize_examples() {
        let m = array![[3.0, 4.0], [0.0, 0.0]];
        let n = row_normalize(&m);
        assert_eq!(n, array![[0.6, 0.8], [0.0, 0.0]]);
        let r = random_matrix(5, 7, 3);
        for norm in row_norms(&row_normalize(&r)).iter() {
            assert!(norm.abs() < 1e-12 || (norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hsic_orthogonal_columns_vanish() {
        let s = array![[1.0, 0.0], [1.0, 0.0]];
        let x = array![[0.0, 1.0], [0.0, -1.0]];
        // SᵀX = 0 because S rows live in the first coordinate and X rows in
        // the second.
        assert_eq!(hsic_simplified(&s, &x), 0.0);
    }

    #[test]
    fn hsic_identical_orthonormal_columns() {
        let s = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(hsic_simplified(&s, &s), 2.0);
    }

    #[test]
    fn hsic_matches_dense_trace_oracle() {
        let s = random_matrix(11, 6, 3);
        let x = random_matrix(13, 6, 3);
        let got = hsic_simplified(&s, &x);
        // trace(SᵀXXᵀS) with the n×n Gram formed explicitly.
        let m = s.t().dot(&x).dot(&x.t()).dot(&s);
        let want = (0..3).map(|i| m[[i, i]]).sum::<f64>();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn hsic_swap_is_exact() {
        let s = random_matrix(17, 9, 4);
        let x = random_matrix(19, 9, 4);
        assert_eq!(hsic_simplified(&s, &x), hsic_simplified(&x, &s));
    }

    #[test]
    fn centered_oracle_near_zero_for_independent_gaussians() {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = Array2::from_shape_fn((500, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let x = Array2::from_shape_fn((500, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let v = hsic_centered_oracle(&s, &x).unwrap();
        assert!(v.abs() < 0.05, "v = {v}");
    }

    #[test]
    fn centered_oracle_annihilates_constants() {
        let s = Array2::from_elem((6, 3), 0.7);
        let v = hsic_centered_oracle(&s, &s).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn centered_oracle_matches_naive_loops() {
        let s = random_matrix(29, 5, 2);
        let x = random_matrix(31, 5, 2);
        let got = hsic_centered_oracle(&s, &x).unwrap();
        let n = 5usize;
        let e = |i: usize, j: usize| (if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64;
        let ks = |i: usize, j: usize| s.row(i).dot(&s.row(j));
        let kx = |i: usize, j: usize| x.row(i).dot(&x.row(j));
        let mut trace = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        trace += ks((a, b).0, (a, b).1) * e(b, c) * kx(c, d) * e(d, a);
                    }
                }
            }
        }
        let want = trace / ((n - 1) as f64).powi(2);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn centered_oracle_needs_two_rows() {
        let s = random_matrix(3, 1, 2);
        assert!(hsic_centered_oracle(&s, &s).is_err());
    }

    #[test]
    fn simplified_and_centered_forms_differ_in_general() {
        // The simplified form drops centering; on mean-shifted data the two
        // measures diverge, which is exactly what the oracle quantifies.
        let s = random_matrix(37, 20, 3) + 2.0;
        let x = random_matrix(41, 20, 3) + 2.0;
        let simplified = hsic_simplified(&row_normalize(&s), &row_normalize(&x));
        let centered = hsic_centered_oracle(&s, &x).unwrap();
        assert!((simplified - centered).abs() > 0.1);
    }

    #[test]
    fn update_with_zero_lambda_only_normalizes() {
        let s0 = random_matrix(43, 5, 3);
        let x0 = random_matrix(47, 5, 3);
        let cfg = FmeConfig {
            lambda: 0.0,
            iterations: 1,
        };
        let (s, x) = fme_update(&s0, &x0, &cfg);
        assert_eq!(s, row_normalize(&s0));
        assert_eq!(x, row_normalize(&x0));
    }

    #[test]
    fn single_row_update_by_hand() {
        let s0 = array![[1.0, 0.0]];
        let x0 = array![[0.0, 1.0]];
        let cfg = FmeConfig {
            lambda: 0.1,
            iterations: 1,
        };
        let (s, x) = fme_update(&s0, &x0, &cfg);
        assert_eq!(s, array![[0.9, 0.0]]);
        assert_eq!(x, array![[0.0, 0.9]]);
    }

    #[test]
    fn one_iteration_matches_dense_direct_evaluation() {
        let s0 = random_matrix(53, 4, 2);
        let x0 = random_matrix(59, 4, 2);
        let cfg = FmeConfig {
            lambda: 0.05,
            iterations: 1,
        };
        let (s, x) = fme_update(&s0, &x0, &cfg);
        let sh = row_normalize(&s0);
        let xh = row_normalize(&x0);
        let s_want = &sh - &(xh.dot(&xh.t()).dot(&sh) * 0.05);
        let x_want = &xh - &(sh.dot(&sh.t()).dot(&xh) * 0.05);
        for (a, b) in s.iter().zip(s_want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in x.iter().zip(x_want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_iteration_anchors_at_normalized_inputs() {
        let s0 = random_matrix(61, 6, 3);
        let x0 = random_matrix(67, 6, 3);
        let cfg = FmeConfig {
            lambda: 0.03,
            iterations: 3,
        };
        let (s, x) = fme_update(&s0, &x0, &cfg);
        // Reference loop, dense, re-reading iteration-i values.
        let sh = row_normalize(&s0);
        let xh = row_normalize(&x0);
        let (mut si, mut xi) = (sh.clone(), xh.clone());
        for _ in 0..3 {
            let s_next = &sh - &(xi.dot(&xi.t()).dot(&si) * 0.03);
            let x_next = &xh - &(si.dot(&si.t()).dot(&xi) * 0.03);
            si = s_next;
            xi = x_next;
        }
        for (a, b) in s.iter().zip(si.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in x.iter().zip(xi.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn update_does_not_increase_hsic() {
        for seed in 0..50u64 {
            let n = 5 + (seed as usize % 6) * 8;
            let d = 2 + (seed as usize % 4);
            let s0 = random_matrix(1000 + seed, n, d);
            let x0 = random_matrix(2000 + seed, n, d);
            for lambda in [0.001, 0.01] {
                let cfg = FmeConfig {
                    lambda,
                    iterations: 1,
                };
                let (s, x) = fme_update(&s0, &x0, &cfg);
                let before = hsic_simplified(&row_normalize(&s0), &row_normalize(&x0));
                let after = hsic_simplified(&s, &x);
                assert!(
                    after <= before + 1e-9,
                    "seed {seed} λ={lambda}: {after} > {before}"
                );
            }
        }
    }

    #[test]
    fn swapping_arguments_swaps_outputs_exactly() {
        let s0 = random_matrix(71, 5, 3);
        let x0 = random_matrix(73, 5, 3);
        let cfg = FmeConfig {
            lambda: 0.02,
            iterations: 2,
        };
        let (s, x) = fme_update(&s0, &x0, &cfg);
        let (xs, ss) = fme_update(&x0, &s0, &cfg);
        assert_eq!(s, ss);
        assert_eq!(x, xs);
    }

    /// Central-difference check of the full backward pass through the
    /// iterations and the normalization Jacobian.
    #[test]
    fn backward_matches_finite_differences() {
        let s0 = random_matrix(79, 5, 3);
        let x0 = random_matrix(83, 5, 3);
        let ws = random_matrix(89, 5, 3);
        let wx = random_matrix(97, 5, 3);
        for iterations in [1usize, 3] {
            let cfg = FmeConfig {
                lambda: 0.05,
                iterations,
            };
            let phi = |s: &Embedding, x: &Embedding| -> f64 {
                let pass = FmePass::forward(s, x, &cfg);
                (pass.s_out() * &ws).sum() + (pass.x_out() * &wx).sum()
            };
            let pass = FmePass::forward(&s0, &x0, &cfg);
            let (ds, dx) = pass.backward(&ws, &wx, true);
            let h = 1e-6;
            for (analytic, base) in [(&ds, &s0), (&dx, &x0)] {
                for r in 0..5 {
                    for c in 0..3 {
                        let mut plus = base.clone();
                        plus[[r, c]] += h;
                        let mut minus = base.clone();
                        minus[[r, c]] -= h;
                        let fd = if std::ptr::eq(base, &s0) {
                            (phi(&plus, &x0) - phi(&minus, &x0)) / (2.0 * h)
                        } else {
                            (phi(&s0, &plus) - phi(&s0, &minus)) / (2.0 * h)
                        };
                        let got = analytic[[r, c]];
                        assert!(
                            (got - fd).abs() / fd.abs().max(1.0) < 1e-6,
                            "iter {iterations} ({r},{c}): {got} vs {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn stop_gradient_mode_skips_normalization_jacobian() {
        let s0 = random_matrix(101, 4, 2) * 3.0;
        let x0 = random_matrix(103, 4, 2) * 3.0;
        let cfg = FmeConfig {
            lambda: 0.05,
            iterations: 1,
        };
        let pass = FmePass::forward(&s0, &x0, &cfg);
        let ws = random_matrix(107, 4, 2);
        let wx = random_matrix(109, 4, 2);
        let (full_s, _) = pass.backward(&ws, &wx, true);
        let (stop_s, _) = pass.backward(&ws, &wx, false);
        // With rows far from unit norm the two differ.
        let diff = (&full_s - &stop_s).mapv(f64::abs).sum();
        assert!(diff > 1e-6);
    }
}
