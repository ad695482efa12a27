//! Positional encodings: per-relation degrees, normalized-Laplacian
//! eigenvectors with random signs, and a three-state label embedding that
//! hides the labels currently being trained on.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::eigen;
use crate::error::{Error, Result};
use crate::graph::{MultiRelationGraph, SplitMask};
use crate::tensor::Tensor;

const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// `n x R` matrix of node degrees, one column per relation.
pub fn degree_pe(graph: &MultiRelationGraph) -> Tensor {
    let n = graph.num_nodes();
    let r = graph.num_relations();
    let mut out = Tensor::zeros(n, r);
    for v in 0..n {
        for rel in 0..r {
            out.set(v, rel, graph.degree(v, rel) as f64);
        }
    }
    out
}

/// Normalized Laplacian `I - D^{-1/2} A D^{-1/2}` of one relation; the
/// degree factor of an isolated node is taken as zero.
pub fn normalized_laplacian(graph: &MultiRelationGraph, relation: usize) -> Tensor {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| {
            let d = graph.degree(v, relation);
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();
    let mut l = Tensor::identity(n);
    for v in 0..n {
        for &u in graph.neighbors(relation, v) {
            l.set(v, u, -inv_sqrt[v] * inv_sqrt[u]);
        }
    }
    l
}

/// `n x (R * k_pe)` matrix: per relation, the `k_pe` eigenvectors of the
/// normalized Laplacian with smallest eigenvalue excluding the trivial
/// smallest one, each multiplied by an independent random sign, concatenated
/// across relations.
pub fn laplacian_pe(
    graph: &MultiRelationGraph,
    k_pe: usize,
    sign_rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let n = graph.num_nodes();
    if n <= k_pe {
        return Err(Error::validation(format!(
            "laplacian positional encoding needs n > k_pe, got n = {n}, k_pe = {k_pe}"
        )));
    }
    let r = graph.num_relations();
    let mut out = Tensor::zeros(n, r * k_pe);
    for rel in 0..r {
        let lap = normalized_laplacian(graph, rel);
        let eig = eigen::symmetric_eigen(&lap)?;
        let residual = eigen::max_residual(&lap, &eig);
        if residual > EIGEN_RESIDUAL_TOLERANCE {
            return Err(Error::numeric(format!(
                "eigensolver residual {residual:.3e} exceeds {EIGEN_RESIDUAL_TOLERANCE:.0e} \
                 on relation {rel}"
            )));
        }
        for k in 0..k_pe {
            let sign = if sign_rng.random::<f64>() < 0.5 {
                -1.0
            } else {
                1.0
            };
            // Column k+1: skip the trivial smallest eigenvector.
            for v in 0..n {
                out.set(v, rel * k_pe + k, sign * eig.vectors.get(v, k + 1));
            }
        }
    }
    Ok(out)
}

/// Label code per node: the true label for train nodes whose label may be
/// revealed this epoch, and the "unknown" code `K` for everything else
/// (validation, test, unlabeled, and the nodes currently being trained on).
pub fn label_codes(
    graph: &MultiRelationGraph,
    split: &SplitMask,
    epoch_train_subset: &[usize],
) -> Vec<usize> {
    let unknown = graph.label_arity();
    let mut codes = vec![unknown; graph.num_nodes()];
    for &v in &split.train {
        if let Some(l) = graph.label(v) {
            codes[v] = l;
        }
    }
    for &v in epoch_train_subset {
        codes[v] = unknown;
    }
    codes
}

/// `n x d_e` label encoding: row `v` is the embedding-table row selected by
/// the node's label code.
pub fn label_pe(table: &Tensor, codes: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(codes.len(), table.cols());
    for (v, &code) in codes.iter().enumerate() {
        out.row_mut(v).copy_from_slice(table.row(code));
    }
    out
}

/// `Concat(X, degree_pe, laplacian_pe)`; the label encoding is added on top
/// of this, so the embedding width must match the concatenation width.
pub fn fuse_pe(
    features: &Tensor,
    degree: &Tensor,
    laplacian: &Tensor,
    label: &Tensor,
) -> Result<Tensor> {
    let n = features.rows();
    let width = features.cols() + degree.cols() + laplacian.cols();
    if label.cols() != width || label.rows() != n {
        return Err(Error::validation(format!(
            "label encoding is {}x{} but the concatenation is {n}x{width}",
            label.rows(),
            label.cols()
        )));
    }
    let mut out = Tensor::zeros(n, width);
    for v in 0..n {
        let row = out.row_mut(v);
        let mut cursor = 0;
        for src in [features, degree, laplacian] {
            row[cursor..cursor + src.cols()].copy_from_slice(src.row(v));
            cursor += src.cols();
        }
        for (x, &l) in row.iter_mut().zip(label.row(v)) {
            *x += l;
        }
    }
    Ok(out)
}
