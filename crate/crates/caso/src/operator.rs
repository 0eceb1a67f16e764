//! Lazy sparse + rank-one linear operators.
//!
//! Encoders work with operators of the form  sparse + Σ c·a·bᵀ  and never
//! materialize a dense n×n matrix; the rank-one parts are applied as two
//! vector products per term.

use ndarray::{Array1, Array2, ArrayView2};

use crate::graph::SocialGraph;
use crate::sparse::Csr;

#[derive(Debug, Clone)]
struct RankOne {
    scale: f64,
    left: Array1<f64>,
    right: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearOperator {
    rows: usize,
    cols: usize,
    sparse: Option<Csr>,
    rank_one: Vec<RankOne>,
}

impl LinearOperator {
    pub fn from_sparse(sparse: Csr) -> Self {
        LinearOperator {
            rows: sparse.n_rows(),
            cols: sparse.n_cols(),
            sparse: Some(sparse),
            rank_one: Vec::new(),
        }
    }

    /// Adds the term `scale · left · rightᵀ`.
    pub fn push_rank_one(&mut self, scale: f64, left: Array1<f64>, right: Array1<f64>) {
        assert_eq!(left.len(), self.rows, "rank-one left length mismatch");
        assert_eq!(right.len(), self.cols, "rank-one right length mismatch");
        self.rank_one.push(RankOne { scale, left, right });
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// self · v, shape (rows, d).
    pub fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(v.nrows(), self.cols, "operand row count mismatch");
        let mut out = match &self.sparse {
            Some(s) => s.apply(v),
            None => Array2::zeros((self.rows, v.ncols())),
        };
        for term in &self.rank_one {
            // right'·v is a d-vector; out += scale · left ⊗ (rightᵀv)
            let rv = term.right.dot(v);
            for (r, &l) in term.left.iter().enumerate() {
                if l != 0.0 {
                    out.row_mut(r).scaled_add(term.scale * l, &rv);
                }
            }
        }
        out
    }

    /// selfᵀ · v, shape (cols, d); rank-one terms swap left and right.
    pub fn apply_transpose(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(v.nrows(), self.rows, "operand row count mismatch");
        let mut out = match &self.sparse {
            Some(s) => s.apply_transpose(v),
            None => Array2::zeros((self.cols, v.ncols())),
        };
        for term in &self.rank_one {
            let lv = term.left.dot(v);
            for (r, &rt) in term.right.iter().enumerate() {
                if rt != 0.0 {
                    out.row_mut(r).scaled_add(term.scale * rt, &lv);
                }
            }
        }
        out
    }

    /// Dense realization for small-instance test oracles.
    pub fn densify(&self) -> Array2<f64> {
        assert!(
            self.rows <= 64 && self.cols <= 64,
            "densify is reserved for small test oracles (≤ 64)"
        );
        let mut out = match &self.sparse {
            Some(s) => s.to_dense(),
            None => Array2::zeros((self.rows, self.cols)),
        };
        for term in &self.rank_one {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    out[[r, c]] += term.scale * term.left[r] * term.right[c];
                }
            }
        }
        out
    }
}

/// Ã with Ã_{ij} = A_{ij}/√(d_i d_j); rows of isolated users are zero.
pub fn normalized_adjacency(g: &SocialGraph) -> LinearOperator {
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
        .collect();
    let tilde = g
        .adjacency()
        .map_values(|i, j, _| inv_sqrt[i] * inv_sqrt[j]);
    LinearOperator::from_sparse(tilde)
}

/// √d as a column vector (0 for isolated users).
pub fn sqrt_degrees(g: &SocialGraph) -> Array1<f64> {
    g.degrees().iter().map(|&d| (d as f64).sqrt()).collect()
}

/// M = Ã − √d√dᵀ/|E|, as a sparse part plus one rank-one term.
pub fn modularity_operator(g: &SocialGraph) -> LinearOperator {
    let sqrt_d = sqrt_degrees(g);
    let mut op = normalized_adjacency(g);
    op.push_rank_one(-1.0 / g.n_edges() as f64, sqrt_d.clone(), sqrt_d);
    op
}
