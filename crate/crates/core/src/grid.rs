//! Time grids (uniform or graded toward the left endpoint) and
//! matrix-valued functions sampled on them.

use std::sync::Arc;

use crate::algebra::Matrix;
use crate::error::{FracError, Result};
use crate::special::gamma;

/// Strictly increasing set of time nodes on [a, b].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Graded grid t_k = a + (b-a)(k/(n-1))^grading; grading 1 is uniform.
    pub fn graded(a: f64, b: f64, n: usize, grading: f64) -> Result<Arc<TimeGrid>> {
        if !(b > a) {
            return Err(FracError::Argument(format!("need b > a, got a={a}, b={b}")));
        }
        if n < 2 {
            return Err(FracError::GridTooCoarse { needed: 2, got: n });
        }
        if !(grading >= 1.0) {
            return Err(FracError::Argument(format!("grading must be >= 1, got {grading}")));
        }
        let mut nodes = Vec::with_capacity(n);
        for k in 0..n {
            let s = (k as f64 / (n - 1) as f64).powf(grading);
            nodes.push(a + (b - a) * s);
        }
        // endpoints exact regardless of rounding in powf
        nodes[0] = a;
        nodes[n - 1] = b;
        Ok(Arc::new(TimeGrid { a, b, nodes }))
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Arc<TimeGrid>> {
        TimeGrid::graded(a, b, n, 1.0)
    }

    /// Grid from explicit nodes; must be strictly increasing with >= 2 nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<TimeGrid>> {
        if nodes.len() < 2 {
            return Err(FracError::GridTooCoarse { needed: 2, got: nodes.len() });
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FracError::Argument("nodes must be strictly increasing".into()));
        }
        let a = nodes[0];
        let b = *nodes.last().unwrap();
        Ok(Arc::new(TimeGrid { a, b, nodes }))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Grid for the reflected variable sigma = a + b - t.
    pub fn reflected(&self) -> Arc<TimeGrid> {
        let mut nodes: Vec<f64> = self.nodes.iter().map(|&t| self.a + self.b - t).collect();
        nodes.reverse();
        Arc::new(TimeGrid { a: self.a, b: self.b, nodes })
    }
}

/// Matrix-valued function known at every grid node.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<TimeGrid>,
    rows: usize,
    cols: usize,
    samples: Vec<Matrix>,
}

impl GridFunction {
    pub fn new(grid: Arc<TimeGrid>, samples: Vec<Matrix>) -> Result<GridFunction> {
        if samples.len() != grid.len() {
            return Err(FracError::Dimension(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        let (rows, cols) = samples[0].shape();
        if samples.iter().any(|s| s.shape() != (rows, cols)) {
            return Err(FracError::Dimension("inconsistent sample shapes".into()));
        }
        Ok(GridFunction { grid, rows, cols, samples })
    }

    pub fn from_fn(
        grid: Arc<TimeGrid>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(f64) -> Matrix,
    ) -> Result<GridFunction> {
        let samples: Vec<Matrix> = grid.nodes().iter().map(|&t| f(t)).collect();
        if samples.iter().any(|s| s.shape() != (rows, cols)) {
            return Err(FracError::Dimension("sample shape mismatch".into()));
        }
        Ok(GridFunction { grid, rows, cols, samples })
    }

    pub fn scalar_from_fn(grid: Arc<TimeGrid>, mut f: impl FnMut(f64) -> f64) -> GridFunction {
        let samples = grid.nodes().iter().map(|&t| Matrix::col_vec(&[f(t)])).collect();
        GridFunction { grid, rows: 1, cols: 1, samples }
    }

    pub fn constant(grid: Arc<TimeGrid>, value: Matrix) -> GridFunction {
        let n = grid.len();
        let (rows, cols) = value.shape();
        GridFunction { grid, rows, cols, samples: vec![value; n] }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sample(&self, k: usize) -> &Matrix {
        &self.samples[k]
    }

    pub fn sample_mut(&mut self, k: usize) -> &mut Matrix {
        &mut self.samples[k]
    }

    pub fn samples(&self) -> &[Matrix] {
        &self.samples
    }

    /// Scalar entry (i, j) at node k.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.samples[k][(i, j)]
    }

    pub fn scalar_at(&self, k: usize) -> f64 {
        self.samples[k][(0, 0)]
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            rows: self.rows,
            cols: self.cols,
            samples: self.samples.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|m| m.scale(c))
    }

    fn zip(
        &self,
        other: &GridFunction,
        f: impl Fn(&Matrix, &Matrix) -> Result<Matrix>,
    ) -> Result<GridFunction> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid != other.grid {
            return Err(FracError::Argument("grid mismatch".into()));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(self.grid.clone(), samples)
    }

    /// Max over nodes of the max-abs entry.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }

    /// Function of the reflected variable: samples reversed on the
    /// reflected grid, so reflect(q)(sigma) = q(a + b - sigma).
    pub fn reflected(&self) -> GridFunction {
        let mut samples = self.samples.clone();
        samples.reverse();
        GridFunction {
            grid: self.grid.reflected(),
            rows: self.rows,
            cols: self.cols,
            samples,
        }
    }
}

/// Power evaluation with the conventions needed for weakly singular
/// kernels at the base point: 0^0 = 1, 0^e = 0 for e > 0, +inf for e < 0.
pub fn pow0(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        x.powf(e)
    }
}

/// Function of the form  t |-> [(t-a)^(w_order-1) / Gamma(w_order)] * weight + regular(t),
/// entrywise. The singular factor is carried symbolically and never
/// sampled at t = a.
#[derive(Debug, Clone)]
pub struct SingularGridFunction {
    /// per-entry exponent parameter, in (0, 2]
    orders: Matrix,
    weight: Matrix,
    regular: GridFunction,
}

impl SingularGridFunction {
    pub fn new(orders: Matrix, weight: Matrix, regular: GridFunction) -> Result<SingularGridFunction> {
        if orders.shape() != weight.shape()
            || orders.shape() != (regular.rows(), regular.cols())
        {
            return Err(FracError::Dimension("singular part shape mismatch".into()));
        }
        if orders.data().iter().any(|&o| !(o > 0.0 && o <= 2.0)) {
            return Err(FracError::Argument("singular orders must lie in (0, 2]".into()));
        }
        Ok(SingularGridFunction { orders, weight, regular })
    }

    pub fn from_regular(regular: GridFunction, orders: Matrix) -> Result<SingularGridFunction> {
        let weight = Matrix::zeros(regular.rows(), regular.cols());
        SingularGridFunction::new(orders, weight, regular)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.regular.grid()
    }

    pub fn orders(&self) -> &Matrix {
        &self.orders
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn regular(&self) -> &GridFunction {
        &self.regular
    }

    pub fn regular_mut(&mut self) -> &mut GridFunction {
        &mut self.regular
    }

    /// Entry (i, j) evaluated at node k. At k = 0 this is +/-inf when the
    /// entry order is < 1 and the weight is nonzero.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> f64 {
        let dt = self.regular.grid().node(k) - self.regular.grid().a();
        let o = self.orders[(i, j)];
        let w = self.weight[(i, j)];
        let sing = if w == 0.0 {
            0.0
        } else {
            w * pow0(dt, o - 1.0) / gamma(o).expect("orders validated positive")
        };
        sing + self.regular.entry(k, i, j)
    }

    /// Full sample at node k, singular part included.
    pub fn value(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.regular.rows(), self.regular.cols(), |i, j| self.entry(k, i, j))
    }

    /// Collapses to a plain grid function when every entry is finite at
    /// the base node (all orders >= 1 or weight zero).
    pub fn to_grid_function(&self) -> Result<GridFunction> {
        let ok = self
            .orders
            .data()
            .iter()
            .zip(self.weight.data())
            .all(|(&o, &w)| o >= 1.0 || w == 0.0);
        if !ok {
            return Err(FracError::Domain(
                "singular part unbounded at the base node".into(),
            ));
        }
        let samples = (0..self.regular.grid().len()).map(|k| self.value(k)).collect();
        GridFunction::new(self.regular.grid().clone(), samples)
    }
}
