//! Dense row-major matrices, a blocked LU factorization with partial pivoting
//! and a small compressed sparse row type for the projection operators.

use crate::{Error, Result};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Build a matrix from complete rows; every row must have `cols` entries.
    pub fn from_rows(cols: usize, rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row length mismatch");
            data.extend_from_slice(&r);
        }
        DenseMatrix {
            rows: n,
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Write the matrix as whitespace-separated text, one row per line.
    pub fn write_text(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let mut line = String::with_capacity(self.cols * 18);
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

const BLOCK: usize = 96;

/// LU factors `P A = L U` of a square matrix, stored in place.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factor `a` with partial pivoting. Fails on an exactly zero pivot or on
    /// a pivot that is negligible relative to the largest matrix entry.
    pub fn new(a: DenseMatrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let scale = a.max_abs();
        let mut lu = a.data;
        let mut perm = vec![0usize; n];
        let tiny = scale * f64::EPSILON * 1e-3;

        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            let kend = k0 + kb;
            for j in k0..kend {
                let mut p = j;
                let mut best = lu[j * n + j].abs();
                for i in j + 1..n {
                    let v = lu[i * n + j].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if !(best > tiny) {
                    return Err(Error::SingularMatrix { column: j });
                }
                perm[j] = p;
                if p != j {
                    for c in 0..n {
                        lu.swap(j * n + c, p * n + c);
                    }
                }
                let piv = lu[j * n + j];
                let (head, tail) = lu.split_at_mut((j + 1) * n);
                let prow = &head[j * n..j * n + n];
                for i in 0..n - j - 1 {
                    let row = &mut tail[i * n..i * n + n];
                    let l = row[j] / piv;
                    row[j] = l;
                    if l != 0.0 {
                        for c in j + 1..kend {
                            row[c] -= l * prow[c];
                        }
                    }
                }
            }
            if kend < n {
                // U12 = L11⁻¹ A12
                for j in k0..kend {
                    let (head, tail) = lu.split_at_mut((j + 1) * n);
                    let prow = &head[j * n..j * n + n];
                    for i in j + 1..kend {
                        let row = &mut tail[(i - j - 1) * n..(i - j) * n];
                        let l = row[j];
                        if l != 0.0 {
                            for c in kend..n {
                                row[c] -= l * prow[c];
                            }
                        }
                    }
                }
                // A22 -= L21 U12
                let m = n - kend;
                let base = lu.as_mut_ptr();
                unsafe {
                    let l21 = base.add(kend * n + k0);
                    let u12 = base.add(k0 * n + kend);
                    let a22 = base.add(kend * n + kend);
                    matrixmultiply::dgemm(
                        m,
                        kb,
                        m,
                        -1.0,
                        l21,
                        n as isize,
                        1,
                        u12,
                        n as isize,
                        1,
                        1.0,
                        a22,
                        n as isize,
                        1,
                    );
                }
            }
            k0 = kend;
        }
        Ok(LuFactors { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.perm[j];
            if p != j {
                b.swap(j, p);
            }
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&b[i + 1..]).map(|(u, x)| u * x).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Ratio of largest to smallest pivot magnitude, a cheap lower bound on
    /// the condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.n {
            let d = self.lu[i * self.n + i].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi / lo
    }
}

/// Compressed sparse row matrix assembled from triplets.
#[derive(Clone, Debug, Default)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed. Column order within a row is ascending.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row_entries(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                d[(i, j)] += v;
            }
        }
        d
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pseudo_random(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        DenseMatrix::from_fn(n, n, |i, j| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
            r + if i == j { 0.1 } else { 0.0 }
        })
    }

    #[test]
    fn lu_solves_across_block_boundaries() {
        for &n in &[1, 5, 95, 96, 97, 250] {
            let a = pseudo_random(n, n as u64 + 3);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.mul_vec(&x);
            let lu = LuFactors::new(a).unwrap();
            let got = lu.solve(&b);
            let err = got.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n = {n}, err = {err}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_rows(2, vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            LuFactors::new(a),
            Err(Error::SingularMatrix { column: 1 })
        ));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_rows(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let lu = LuFactors::new(a).unwrap();
        assert_eq!(lu.solve(&[3.0, 4.0]), vec![4.0, 3.0]);
    }

    #[test]
    fn csr_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, -1.0]);
    }

    proptest! {
        #[test]
        fn lu_residual_is_small(n in 1usize..40, seed in 0u64..1000) {
            let a = pseudo_random(n, seed);
            let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let lu = LuFactors::new(a.clone()).unwrap();
            let x = lu.solve(&b);
            let r = a.mul_vec(&x);
            let scale = norm_inf(&b) * (1.0 + a.max_abs() * norm_inf(&x));
            prop_assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-10 * scale));
        }
    }
}
