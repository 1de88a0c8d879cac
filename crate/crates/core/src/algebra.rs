//! Dense matrix algebra for multi-order fractional calculus: Hadamard
//! products, row/column-constant lifts of order vectors and the small
//! interchange identities used by the transition-matrix machinery.

use crate::error::{FracError, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn ones(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![1.0; rows * cols] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Matrix {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Matrix {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(FracError::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| c * x).collect() }
    }

    pub fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(FracError::Dimension(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    /// Euclidean norm of a column vector.
    pub fn norm_euclid(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Vector of fractional orders, each in (0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorOrder {
    values: Vec<f64>,
}

impl VectorOrder {
    pub fn new(values: Vec<f64>) -> Result<VectorOrder> {
        if values.is_empty() {
            return Err(FracError::Argument("order vector must be nonempty".into()));
        }
        for &a in &values {
            if !(a > 0.0 && a <= 1.0) {
                return Err(FracError::UnsupportedOrder(a));
            }
        }
        Ok(VectorOrder { values })
    }

    pub fn uniform(m: usize, alpha: f64) -> Result<VectorOrder> {
        VectorOrder::new(vec![alpha; m])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Complementary orders 1 - alpha_i (entries may be 0; callers route
    /// zero orders through the identity path).
    pub fn complement(&self) -> Vec<f64> {
        self.values.iter().map(|a| 1.0 - a).collect()
    }
}

/// How a matrix of orders was constructed. Duhamel and duality operations
/// only accept row-constant orders.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderProvenance {
    General,
    RowConstant(VectorOrder),
    ColConstant(VectorOrder),
}

/// Square matrix of fractional orders in (0,1] with provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOrder {
    values: Matrix,
    provenance: OrderProvenance,
}

impl MatrixOrder {
    pub fn general(values: Matrix) -> Result<MatrixOrder> {
        if !values.is_square() {
            return Err(FracError::Dimension("order matrix must be square".into()));
        }
        for &a in values.data() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(FracError::UnsupportedOrder(a));
            }
        }
        Ok(MatrixOrder { values, provenance: OrderProvenance::General })
    }

    pub fn row_constant(v: &VectorOrder) -> MatrixOrder {
        MatrixOrder {
            values: row_lift(v.values()),
            provenance: OrderProvenance::RowConstant(v.clone()),
        }
    }

    pub fn col_constant(v: &VectorOrder) -> MatrixOrder {
        MatrixOrder {
            values: col_lift(v.values()),
            provenance: OrderProvenance::ColConstant(v.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn provenance(&self) -> &OrderProvenance {
        &self.provenance
    }

    /// The generating vector when the order is row constant.
    pub fn row_vector(&self) -> Option<&VectorOrder> {
        match &self.provenance {
            OrderProvenance::RowConstant(v) => Some(v),
            _ => None,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.data().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Transpose swaps row-constant and column-constant provenance.
    pub fn transpose(&self) -> MatrixOrder {
        let provenance = match &self.provenance {
            OrderProvenance::General => OrderProvenance::General,
            OrderProvenance::RowConstant(v) => OrderProvenance::ColConstant(v.clone()),
            OrderProvenance::ColConstant(v) => OrderProvenance::RowConstant(v.clone()),
        };
        MatrixOrder { values: self.values.transpose(), provenance }
    }
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.zip_with(b, |x, y| x * y)
}

/// m x m matrix whose row i is constantly v[i].
pub fn row_lift(v: &[f64]) -> Matrix {
    let m = v.len();
    Matrix::from_fn(m, m, |i, _| v[i])
}

/// m x m matrix whose column j is constantly v[j]; transpose of `row_lift`.
pub fn col_lift(v: &[f64]) -> Matrix {
    let m = v.len();
    Matrix::from_fn(m, m, |_, j| v[j])
}
