use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::rng::Rng;
use crate::scalar::Scalar;

/// Dense row-major matrix.
///
/// Every product accumulates each output cell sequentially over the inner
/// index, so results do not depend on how rows are batched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Row norms and the global max-absolute entry of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Norms<T> {
    pub l2_per_row: Vec<T>,
    pub linf: T,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols} = {}",
                data.len(),
                rows * cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    /// Entries drawn independently and uniformly from `[lo, hi)`.
    pub fn random_uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| T::lit(rng.uniform_range(lo, hi)))
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, and a zero-column matrix has no row data anyway.
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for (c, &v) in self.row(r).iter().enumerate() {
                out.data[c * self.rows + r] = v;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows gathered in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Contiguous row range `[start, end)`.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape("hadamard", other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape("sub", other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same_shape("axpy", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// Standard product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        gemm_accumulate(&self.data, self.cols, &rhs.data, rhs.cols, &mut out.data);
        Ok(out)
    }

    /// `self * rhs^T`, with the same per-cell accumulation order as [`Matrix::matmul`].
    pub fn matmul_bt(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::Shape {
                op: "matmul_bt",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        self.matmul(&rhs.transpose())
    }

    /// `self^T * rhs`, with the same per-cell accumulation order as [`Matrix::matmul`].
    pub fn matmul_at(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::Shape {
                op: "matmul_at",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        self.transpose().matmul(rhs)
    }

    /// Per-row Euclidean norms and the max-absolute entry.
    pub fn norms(&self) -> Norms<T> {
        let l2_per_row = self
            .row_iter()
            .map(|r| r.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
            .collect::<Vec<_>>();
        let l2_per_row = if self.cols == 0 {
            vec![T::zero(); self.rows]
        } else {
            l2_per_row
        };
        let linf = self
            .data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()));
        Norms { l2_per_row, linf }
    }

    /// Induced infinity norm: the largest absolute row sum.
    pub fn max_abs_row_sum(&self) -> T {
        self.row_iter()
            .map(|r| r.iter().fold(T::zero(), |acc, &v| acc + v.abs()))
            .fold(T::zero(), T::max)
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// `c += a * b` for row-major `a` (m x k) and `b` (k x n).
///
/// Each output cell accumulates its `k` products in ascending order. Exact zeros
/// in `a` are skipped; for finite `b` this leaves every cell bit-identical.
fn gemm_accumulate<T: Scalar>(a: &[T], k: usize, b: &[T], n: usize, c: &mut [T]) {
    if n == 0 || k == 0 {
        return;
    }
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (&aik, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
            if aik == T::zero() {
                continue;
            }
            for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                *cj += aik * bj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_times_a_is_a() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = Rng::new(7);
        let a = Matrix::<f64>::random_uniform(5, 7, -1.0, 1.0, &mut rng);
        let b = Matrix::<f64>::random_uniform(7, 3, -1.0, 1.0, &mut rng);
        let fast = a.matmul(&b).unwrap();
        let slow = naive(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn transposed_variants_agree() {
        let mut rng = Rng::new(11);
        let a = Matrix::<f64>::random_uniform(4, 6, -1.0, 1.0, &mut rng);
        let b = Matrix::<f64>::random_uniform(5, 6, -1.0, 1.0, &mut rng);
        assert_eq!(a.matmul_bt(&b).unwrap(), naive(&a, &b.transpose()));
        let c = Matrix::<f64>::random_uniform(4, 3, -1.0, 1.0, &mut rng);
        assert_eq!(a.matmul_at(&c).unwrap(), naive(&a.transpose(), &c));
    }

    #[test]
    fn mismatch_reports_both_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)"), "{err}");
    }

    #[test]
    fn zero_skipping_is_bit_identical() {
        let mut rng = Rng::new(3);
        let mut a = Matrix::<f64>::random_uniform(6, 9, -1.0, 1.0, &mut rng);
        for i in (0..a.as_slice().len()).step_by(3) {
            a.as_mut_slice()[i] = 0.0;
        }
        let b = Matrix::<f64>::random_uniform(9, 4, -1.0, 1.0, &mut rng);
        assert_eq!(a.matmul(&b).unwrap(), naive(&a, &b));
    }

    #[test]
    fn norms_of_zero_and_345() {
        let z = Matrix::<f64>::zeros(3, 2).norms();
        assert_eq!(z.l2_per_row, vec![0.0; 3]);
        assert_eq!(z.linf, 0.0);
        let m = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap().norms();
        assert_eq!(m.l2_per_row, vec![5.0]);
        assert_eq!(m.linf, 4.0);
    }

    #[test]
    fn norms_match_naive_loops() {
        let mut rng = Rng::new(5);
        let m = Matrix::<f64>::random_uniform(10, 10, -3.0, 3.0, &mut rng);
        let n = m.norms();
        let mut linf = 0.0f64;
        for i in 0..10 {
            let mut s = 0.0;
            for j in 0..10 {
                s += m.get(i, j) * m.get(i, j);
                linf = linf.max(m.get(i, j).abs());
            }
            assert!((n.l2_per_row[i] - s.sqrt()).abs() <= 1e-12 * s.sqrt());
        }
        assert_eq!(n.linf, linf);
    }

    #[test]
    fn associativity_within_tolerance() {
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let a = Matrix::<f64>::random_uniform(4, 5, -1.0, 1.0, &mut rng);
            let b = Matrix::<f64>::random_uniform(5, 6, -1.0, 1.0, &mut rng);
            let c = Matrix::<f64>::random_uniform(6, 3, -1.0, 1.0, &mut rng);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.norms().linf.max(1.0);
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn from_vec_rejects_nan_and_bad_length() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0f64; 3]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let a = Matrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::<f32>::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().as_slice(), &[3.0f32, 7.0]);
    }
}
