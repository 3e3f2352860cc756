//! Shared helpers for the integration suites: an explicit dense-inverse
//! solver oracle (independent of the library's Cholesky path) and small
//! dataset builders.
#![allow(dead_code)] // each test binary uses its own subset

use halfsplit::svm::GramAccumulator;

/// Invert a dense row-major `dim×dim` matrix by Gauss-Jordan elimination
/// with partial pivoting. Panics on a singular matrix; the oracle only
/// sees ridge-regularized SPD systems.
pub fn invert_dense(matrix: &[f64], dim: usize) -> Vec<f64> {
    let mut a = matrix.to_vec();
    let mut inv = vec![0.0; dim * dim];
    for i in 0..dim {
        inv[i * dim + i] = 1.0;
    }
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r, &s| {
                a[r * dim + col]
                    .abs()
                    .partial_cmp(&a[s * dim + col].abs())
                    .unwrap()
            })
            .unwrap();
        assert!(a[pivot_row * dim + col] != 0.0, "singular matrix");
        if pivot_row != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot_row * dim + j);
                inv.swap(col * dim + j, pivot_row * dim + j);
            }
        }
        let pivot = a[col * dim + col];
        for j in 0..dim {
            a[col * dim + j] /= pivot;
            inv[col * dim + j] /= pivot;
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = a[row * dim + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..dim {
                a[row * dim + j] -= factor * a[col * dim + j];
                inv[row * dim + j] -= factor * inv[col * dim + j];
            }
        }
    }
    inv
}

/// Solve `(I/mu + EᵀE) z = EᵀDe` by explicit inversion and return
/// `(w, gamma)`.
pub fn oracle_plane(acc: &GramAccumulator, mu: f64) -> (Vec<f64>, f64) {
    let dim = acc.feature_count() + 1;
    let mut system = acc.ete_dense();
    for i in 0..dim {
        system[i * dim + i] += 1.0 / mu;
    }
    let inv = invert_dense(&system, dim);
    let mut z: Vec<f64> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| inv[i * dim + j] * acc.etde()[j])
                .sum::<f64>()
        })
        .collect();
    let gamma = z.pop().unwrap();
    (z, gamma)
}

/// Relative closeness at tolerance `tol`: |a - b| <= tol * (1 + |b|).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

pub fn iris_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("..")
        .join("..")
        .join("data")
        .join("iris.csv")
}
