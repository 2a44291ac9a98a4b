use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Constraint matrix `A` (m × n) stored row-wise, one row per LP variable.
///
/// Column `j` is hosted at network node `col_nodes[j]`; row `i` is owned by
/// `owners[i]`. A dense copy is kept because every instance here is
/// desk-sized.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    cols: usize,
    owners: Vec<usize>,
    col_nodes: Vec<usize>,
    dense: DMatrix<f64>,
}

impl ConstraintMatrix {
    /// Columns are hosted one per node (`col_nodes[j] = j`), rows owned by the
    /// host of their first nonzero column.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let owners = rows.iter().map(|r| r.iter().find(|e| e.1 != 0.0).map_or(0, |e| e.0)).collect();
        Self::new(cols, rows, owners, (0..cols).collect())
    }

    pub fn new(
        cols: usize,
        rows: Vec<Vec<(usize, f64)>>,
        owners: Vec<usize>,
        col_nodes: Vec<usize>,
    ) -> Result<Self> {
        if owners.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: owners.len() });
        }
        if col_nodes.len() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: col_nodes.len() });
        }
        let mut dense = DMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= cols {
                    return Err(Error::DimensionMismatch { expected: cols, got: j + 1 });
                }
                if !v.is_finite() {
                    return Err(Error::DomainError(format!("non-finite entry in row {i}")));
                }
                dense[(i, j)] += v;
            }
        }
        Ok(Self { rows, cols, owners, col_nodes, dense })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(m.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn owner(&self, i: usize) -> usize {
        self.owners[i]
    }

    pub fn col_node(&self, j: usize) -> usize {
        self.col_nodes[j]
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// Numerical rank by singular values, relative tolerance `1e-10`.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.dense)
    }

    pub fn ensure_full_column_rank(&self) -> Result<()> {
        let rank = self.rank();
        if rank == self.cols {
            Ok(())
        } else {
            Err(Error::RankDeficient { rank, cols: self.cols })
        }
    }

    /// `Aᵀ diag(w) A` as a dense n × n matrix.
    pub fn gram(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.cols, self.cols);
        for (i, row) in self.rows.iter().enumerate() {
            let wi = w[i];
            for &(j, aj) in row {
                for &(k, ak) in row {
                    s[(j, k)] += wi * aj * ak;
                }
            }
        }
        s
    }

    /// Every row that touches a column is owned by that column's host or
    /// by a node the caller considers adjacent (`shares`).
    pub fn ownership_consistent(&self, shares: impl Fn(usize, usize) -> bool) -> bool {
        self.rows.iter().zip(&self.owners).all(|(row, &owner)| {
            row.iter().all(|&(j, _)| self.col_nodes[j] == owner || shares(owner, self.col_nodes[j]))
        })
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_gram_agree() {
        let a = ConstraintMatrix::from_rows(2, vec![vec![(0, 1.0), (1, -1.0)], vec![(1, 2.0)]]).unwrap();
        let w = DVector::from_vec(vec![3.0, 0.5]);
        let d = a.dense();
        let expect = d.transpose() * DMatrix::from_diagonal(&w) * d;
        assert!((a.gram(&w) - expect).norm() < 1e-12);
        assert_eq!(a.rank(), 2);
        assert_eq!(a.owner(1), 1);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = ConstraintMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]]).unwrap();
        assert_eq!(a.ensure_full_column_rank().unwrap_err(), Error::RankDeficient { rank: 1, cols: 2 });
    }

    #[test]
    fn out_of_range_column_rejected() {
        assert!(ConstraintMatrix::from_rows(1, vec![vec![(1, 1.0)]]).is_err());
    }
}
