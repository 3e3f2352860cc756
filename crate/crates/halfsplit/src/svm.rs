//! Closed-form linear proximal SVM.
//!
//! Each labeled row `x` with sign `s = ±1` contributes the augmented row
//! `e = (x, -1)` to two Gram statistics: the outer-product sum `EᵀE` and the
//! signed column sum `EᵀDe`. Those sums split freely across shards and merge
//! by addition, so training parallelizes map-reduce style. The separator
//! `z = (w, gamma)` then solves the symmetric positive-definite system
//! `(I/mu + EᵀE) z = EᵀDe` and a sample classifies by `sign(xᵀw - gamma)`.
//!
//! Feature vectors are plain `&[f64]` slices. Accumulation enforces
//! finiteness and length; prediction checks length only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trained binary separator: weights `w`, offset `gamma`, and the
/// regularization weight `mu` it was solved with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmPlane {
    pub w: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
}

impl SvmPlane {
    pub fn feature_count(&self) -> usize {
        self.w.len()
    }

    /// `xᵀw - gamma`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch(format!(
                "plane expects {} features, sample has {}",
                self.w.len(),
                x.len()
            )));
        }
        let dot: f64 = self.w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
        Ok(dot - self.gamma)
    }

    /// Sign classifier. A decision value of exactly 0 maps to +1, so
    /// prediction is deterministic on the boundary.
    pub fn classify_sign(&self, x: &[f64]) -> Result<i8> {
        let value = self.decision_value(x)?;
        Ok(if value >= 0.0 { 1 } else { -1 })
    }
}

/// Shard-local Gram statistics: `Σ eᵢeᵢᵀ` and `Σ sᵢeᵢ` over augmented rows
/// `eᵢ = (xᵢ, -1)`, plus the number of rows absorbed.
///
/// `EᵀE` is kept as a packed upper triangle, so entry (i, j) and (j, i) are
/// the same storage slot and the matrix cannot drift asymmetric under
/// accumulation or merging; the dense mirror is produced on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct GramAccumulator {
    /// d + 1: feature count plus the augmentation column.
    dim: usize,
    /// Packed upper triangle of `EᵀE`, row-major, `dim * (dim + 1) / 2` slots.
    upper: Vec<f64>,
    /// `EᵀDe`, length `dim`.
    etde: Vec<f64>,
    row_count: u64,
}

impl GramAccumulator {
    pub fn zero(feature_count: usize) -> Self {
        let dim = feature_count + 1;
        GramAccumulator {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
            etde: vec![0.0; dim],
            row_count: 0,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.dim - 1
    }

    pub fn row_count(&self) -> u64 {
        self.row_count
    }

    pub fn etde(&self) -> &[f64] {
        &self.etde
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    /// `EᵀE` entry (i, j); symmetric by construction.
    pub fn ete(&self, i: usize, j: usize) -> f64 {
        self.upper[self.slot(i, j)]
    }

    /// Dense row-major `(d+1)×(d+1)` copy of `EᵀE`, mirrored from the
    /// packed triangle.
    pub fn ete_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.upper[self.slot(i, j)];
                dense[i * self.dim + j] = v;
                dense[j * self.dim + i] = v;
            }
        }
        dense
    }

    /// Absorb one labeled row. `x` must match the accumulator's feature
    /// count with every entry finite, and `sign` must be +1 or -1.
    pub fn add_row(&mut self, x: &[f64], sign: i8) -> Result<()> {
        if x.len() + 1 != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "accumulator expects {} features, row has {}",
                self.dim - 1,
                x.len()
            )));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidParameter(format!(
                "row sign must be +1 or -1, got {sign}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "feature vector contains a non-finite value".into(),
            ));
        }
        let aug = |k: usize| if k < x.len() { x[k] } else { -1.0 };
        for i in 0..self.dim {
            let ei = aug(i);
            let base = self.slot(i, i);
            for j in i..self.dim {
                self.upper[base + (j - i)] += ei * aug(j);
            }
            self.etde[i] += f64::from(sign) * ei;
        }
        self.row_count += 1;
        Ok(())
    }

    /// Element-wise sum with another accumulator of the same dimension.
    pub fn merge(&self, other: &GramAccumulator) -> Result<GramAccumulator> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// In-place variant of [`merge`](Self::merge), used by the reducer.
    pub fn merge_from(&mut self, other: &GramAccumulator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge accumulators of {} and {} features",
                self.dim - 1,
                other.dim - 1
            )));
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += *b;
        }
        for (a, b) in self.etde.iter_mut().zip(&other.etde) {
            *a += *b;
        }
        self.row_count += other.row_count;
        Ok(())
    }
}

/// Accumulate a whole shard of labeled rows (the mapper step). `rows` and
/// `signs` must have equal length and every row must have `feature_count`
/// entries.
pub fn accumulate_shard<'a, I>(rows: I, signs: &[i8], feature_count: usize) -> Result<GramAccumulator>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = GramAccumulator::zero(feature_count);
    let mut rows = rows.into_iter();
    for &sign in signs {
        match rows.next() {
            Some(row) => acc.add_row(row, sign)?,
            None => {
                return Err(Error::DimensionMismatch(format!(
                    "{} signs but only {} rows",
                    signs.len(),
                    acc.row_count
                )))
            }
        }
    }
    if rows.next().is_some() {
        return Err(Error::DimensionMismatch(format!(
            "more rows than the {} signs provided",
            signs.len()
        )));
    }
    Ok(acc)
}

/// Solve `(I/mu + EᵀE) z = EᵀDe` and split `z` into `(w, gamma)`.
///
/// The system matrix is symmetric positive definite for every `mu > 0`
/// (the ridge term bounds its smallest eigenvalue below by `1/mu`), so the
/// Cholesky factorization cannot meet a non-positive pivot in exact
/// arithmetic; if rounding ever produces one we refuse instead of
/// emitting NaN. An empty accumulator is refused as well: a silent zero
/// plane would mask partitioning bugs upstream.
pub fn solve_plane(acc: &GramAccumulator, mu: f64) -> Result<SvmPlane> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive and finite, got {mu}"
        )));
    }
    if acc.row_count() == 0 {
        return Err(Error::DegenerateInput(
            "cannot solve a plane from an empty accumulator".into(),
        ));
    }
    let dim = acc.dim;
    let mut system = acc.ete_dense();
    let ridge = 1.0 / mu;
    for i in 0..dim {
        system[i * dim + i] += ridge;
    }
    let mut z = cholesky_solve(&mut system, dim, acc.etde())?;
    let gamma = z.pop().expect("dim >= 1");
    Ok(SvmPlane { w: z, gamma, mu })
}

/// In-place lower-Cholesky factorization followed by the two triangular
/// solves. `matrix` is dense row-major `dim×dim` and is clobbered.
fn cholesky_solve(matrix: &mut [f64], dim: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    for i in 0..dim {
        for j in 0..=i {
            let mut s = matrix[i * dim + j];
            for k in 0..j {
                s -= matrix[i * dim + k] * matrix[j * dim + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Numerical(format!(
                        "Cholesky pivot {s} at row {i} is not positive"
                    )));
                }
                matrix[i * dim + i] = s.sqrt();
            } else {
                matrix[i * dim + j] = s / matrix[j * dim + j];
            }
        }
    }
    // forward: L y = rhs
    let mut y = vec![0.0; dim];
    for i in 0..dim {
        let mut s = rhs[i];
        for k in 0..i {
            s -= matrix[i * dim + k] * y[k];
        }
        y[i] = s / matrix[i * dim + i];
    }
    // backward: Lᵀ z = y
    let mut z = vec![0.0; dim];
    for i in (0..dim).rev() {
        let mut s = y[i];
        for k in (i + 1)..dim {
            s -= matrix[k * dim + i] * z[k];
        }
        z[i] = s / matrix[i * dim + i];
    }
    Ok(z)
}
