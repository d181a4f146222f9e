//! Minimal compressed-sparse-row matrix: assembly from triplets, matvec,
//! and densification. Enough for the desk-scale systems used here; no
//! attempt at a general sparse toolkit.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from (row, col, value) triplets, summing
    /// duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in triplets {
            let k = cursor[r];
            cols[k] = c;
            vals[k] = v;
            cursor[r] += 1;
        }
        // Sort each row by column and merge duplicates.
        let mut row_ptr = vec![0usize; n + 1];
        let mut out_col = Vec::with_capacity(triplets.len());
        let mut out_val = Vec::with_capacity(triplets.len());
        for r in 0..n {
            let lo = counts[r];
            let hi = counts[r + 1];
            let mut row: Vec<(usize, f64)> =
                (lo..hi).map(|k| (cols[k], vals[k])).collect();
            row.sort_unstable_by_key(|e| e.0);
            for (c, v) in row {
                if let Some(last) = out_col.last() {
                    if *last == c && out_col.len() > row_ptr[r] {
                        *out_val.last_mut().unwrap() += v;
                        continue;
                    }
                }
                out_col.push(c);
                out_val.push(v);
            }
            row_ptr[r + 1] = out_col.len();
        }
        CsrMatrix { n, row_ptr, col: out_col, val: out_val }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col[k])] += self.val[k];
            }
        }
        m
    }

    /// Largest entrywise asymmetry `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.to_dense();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((d[(i, j)] - d[(j, i)]).abs());
            }
        }
        worst
    }

    /// Row sums (useful for kernel checks on pure-Neumann operators).
    pub fn row_sums(&self) -> DVector<f64> {
        let ones = DVector::from_element(self.n, 1.0);
        self.matvec(&ones)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_multiply() {
        let m = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (0, 0, 1.0), (0, 2, 3.0), (1, 1, 5.0), (2, 0, -1.0)],
        );
        let x = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let y = m.matvec(&x);
        assert_eq!(y, DVector::from_row_slice(&[2.0 + 9.0, 10.0, -1.0]));
        assert_eq!(m.to_dense()[(0, 0)], 2.0);
    }
}
