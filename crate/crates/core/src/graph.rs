//! Cosine kNN similarity graphs and graph Laplacians for the manifold
//! regularizers.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Which side of a `d×n` feature matrix forms the graph vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// One vertex per column (sample).
    Instances,
    /// One vertex per row (feature dimension).
    Features,
}

/// Symmetric weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub weights: Matrix,
    pub neighbor_count: usize,
}

/// Vertex vectors as the rows of a matrix.
fn vertex_rows(h: &Matrix, axis: Axis) -> Matrix {
    match axis {
        Axis::Instances => h.transpose(),
        Axis::Features => h.clone(),
    }
}

/// Pairwise cosine similarities between the rows of `v`, exactly symmetric.
/// Rows with zero norm get similarity 0 to everything when `allow_zero`.
pub(crate) fn cosine_matrix(v: &Matrix, allow_zero: bool) -> Result<Matrix> {
    let n = v.rows();
    let mut sq = Vec::with_capacity(n);
    for i in 0..n {
        let nrm = dot(v.row(i), v.row(i));
        if nrm == 0.0 && !allow_zero {
            return Err(Error::ZeroVector { vertex: i });
        }
        sq.push(nrm);
    }
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let c = if sq[i] == 0.0 || sq[j] == 0.0 {
                0.0
            } else {
                (dot(v.row(i), v.row(j)) / libm::sqrt(sq[i] * sq[j])).clamp(-1.0, 1.0)
            };
            s.set(i, j, c);
            s.set(j, i, c);
        }
    }
    Ok(s)
}

/// Symmetric 0/1 mask: `mask[k,l] = 1` iff `l` is among the `k` most
/// similar vertices of `k` or vice versa. Ties go to the lower index.
pub(crate) fn knn_mask(similarity: &Matrix, k: usize) -> Matrix {
    let n = similarity.rows();
    let mut mask = Matrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for v in 0..n {
        order.clear();
        order.extend((0..n).filter(|&u| u != v));
        order.sort_by(|&a, &b| {
            similarity.get(v, b).total_cmp(&similarity.get(v, a)).then(a.cmp(&b))
        });
        for &u in order.iter().take(k) {
            mask.set(v, u, 1.0);
            mask.set(u, v, 1.0);
        }
    }
    mask
}

/// Builds the cosine kNN graph over the columns (`Instances`) or rows
/// (`Features`) of `h`.
///
/// `W[k,l] = cos(v_k, v_l)` when either vertex is among the other's `k`
/// nearest neighbors by cosine, else 0. Negative cosines are kept.
pub fn knn_cosine_graph(h: &Matrix, k: usize, axis: Axis) -> Result<SimilarityGraph> {
    let v = vertex_rows(h, axis);
    let n = v.rows();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, vertices: n });
    }
    let s = cosine_matrix(&v, false)?;
    let mask = knn_mask(&s, k);
    Ok(SimilarityGraph { weights: s.hadamard(&mask), neighbor_count: k })
}

/// `Q − W` with `Q = diag(row sums of W)`.
pub fn graph_laplacian(w: &SimilarityGraph) -> Matrix {
    laplacian(&w.weights)
}

pub(crate) fn laplacian(w: &Matrix) -> Matrix {
    let n = w.rows();
    let mut l = w.scale(-1.0);
    for i in 0..n {
        let d: f64 = w.row(i).iter().sum();
        l.set(i, i, l.get(i, i) + d);
    }
    l
}
