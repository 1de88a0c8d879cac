//! Fractional integrals and derivatives on time grids.
//!
//! Integrals use product-trapezoid quadrature: on each subinterval the
//! integrand is replaced by its linear interpolant and the weakly singular
//! kernel is integrated exactly, so piecewise-linear inputs are handled
//! exactly and all weights are nonnegative.

use crate::algebra::Matrix;
use crate::error::{FracError, Result};
use crate::grid::{GridFunction, SingularGridFunction};
use crate::special::gamma;

/// Treatment of the first subinterval when the integrand has no usable
/// value at the base node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstInterval {
    /// linear interpolation from both endpoint samples (the default)
    #[default]
    Interpolate,
    /// constant extrapolation of the right endpoint sample; the base
    /// node sample is ignored entirely
    ConstantFromRight,
}

/// Moments of the kernel (t - tau)^(eps-1) over [tk, tk1] with t >= tk1:
/// m0 integrates the kernel itself, m1 integrates kernel * (tau - tk).
fn kernel_moments(t: f64, tk: f64, tk1: f64, eps: f64) -> (f64, f64) {
    let a = t - tk;
    let b = t - tk1;
    let pa = a.powf(eps);
    let pb = b.powf(eps);
    let m0 = (pa - pb) / eps;
    let m1 = a * m0 - (pa * a - pb * b) / (eps + 1.0);
    (m0, m1)
}

/// Cumulative convolution v_i = int_{t_{j0}}^{t_i} (t_i - tau)^(eps-1) g(tau) dtau
/// for eps > 0 and piecewise-linear g given by `vals` (indexed from j0).
/// No Gamma normalization is applied.
pub(crate) fn conv_power(
    nodes: &[f64],
    j0: usize,
    vals: &[f64],
    eps: f64,
    policy: FirstInterval,
) -> Vec<f64> {
    let n = nodes.len() - j0;
    debug_assert_eq!(vals.len(), n);
    let mut out = vec![0.0; n];
    for i in 1..n {
        let t = nodes[j0 + i];
        let mut acc = 0.0;
        for k in 0..i {
            let tk = nodes[j0 + k];
            let tk1 = nodes[j0 + k + 1];
            let (m0, m1) = kernel_moments(t, tk, tk1, eps);
            if k == 0 && policy == FirstInterval::ConstantFromRight {
                acc += vals[1] * m0;
            } else {
                let h = tk1 - tk;
                let w1 = m1 / h;
                acc += vals[k] * (m0 - w1) + vals[k + 1] * w1;
            }
        }
        out[i] = acc;
    }
    out
}

fn check_order(o: f64) -> Result<()> {
    if !(o >= 0.0 && o <= 1.0) {
        return Err(FracError::UnsupportedOrder(o));
    }
    Ok(())
}

fn order_matrix_for(q: &GridFunction, orders: &Matrix) -> Result<()> {
    if orders.shape() != (q.rows(), q.cols()) {
        return Err(FracError::Dimension(format!(
            "orders shape {:?} does not match samples shape {:?}",
            orders.shape(),
            (q.rows(), q.cols())
        )));
    }
    for &o in orders.data() {
        check_order(o)?;
    }
    Ok(())
}

/// Left fractional integral of order `orders` entrywise, each in [0, 1].
/// Order 0 is the identity and bypasses quadrature entirely.
pub fn frac_integral_left(
    q: &GridFunction,
    orders: &Matrix,
    policy: FirstInterval,
) -> Result<GridFunction> {
    order_matrix_for(q, orders)?;
    let n = q.grid().len();
    let nodes = q.grid().nodes();
    let mut samples = vec![Matrix::zeros(q.rows(), q.cols()); n];
    for i in 0..q.rows() {
        for j in 0..q.cols() {
            let o = orders[(i, j)];
            if o == 0.0 {
                for k in 0..n {
                    samples[k][(i, j)] = q.entry(k, i, j);
                }
                continue;
            }
            let vals: Vec<f64> = (0..n).map(|k| q.entry(k, i, j)).collect();
            let g = gamma(o)?;
            let conv = conv_power(nodes, 0, &vals, o, policy);
            for k in 0..n {
                samples[k][(i, j)] = conv[k] / g;
            }
        }
    }
    GridFunction::new(q.grid().clone(), samples)
}

/// Right fractional integral, computed by reflection from the left one.
pub fn frac_integral_right(
    q: &GridFunction,
    orders: &Matrix,
    policy: FirstInterval,
) -> Result<GridFunction> {
    Ok(frac_integral_left(&q.reflected(), orders, policy)?.reflected())
}

/// Derivative of the parabola through (xs[0..3], ys[0..3]) at x.
fn deriv3(x: f64, xs: [f64; 3], ys: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

/// Nodewise derivative by three-point difference quotients on a
/// non-uniform grid; needs at least 3 nodes.
pub fn grid_derivative(q: &GridFunction) -> Result<GridFunction> {
    let n = q.grid().len();
    if n < 3 {
        return Err(FracError::GridTooCoarse { needed: 3, got: n });
    }
    let nodes = q.grid().nodes();
    let samples = (0..n)
        .map(|k| {
            let c = k.clamp(1, n - 2);
            let xs = [nodes[c - 1], nodes[c], nodes[c + 1]];
            Matrix::from_fn(q.rows(), q.cols(), |i, j| {
                let ys = [
                    q.entry(c - 1, i, j),
                    q.entry(c, i, j),
                    q.entry(c + 1, i, j),
                ];
                deriv3(nodes[k], xs, ys)
            })
        })
        .collect();
    GridFunction::new(q.grid().clone(), samples)
}

fn check_derivative_orders(q: &GridFunction, orders: &Matrix) -> Result<()> {
    if orders.shape() != (q.rows(), q.cols()) {
        return Err(FracError::Dimension("orders shape mismatch".into()));
    }
    for &o in orders.data() {
        if !(o > 0.0 && o <= 1.0) {
            return Err(FracError::UnsupportedOrder(o));
        }
    }
    Ok(())
}

/// Left Riemann-Liouville derivative: d/dt applied to the left integral
/// of complementary order. Values at the first node are unreliable when
/// the input does not vanish at the base point.
pub fn rl_derivative_left(q: &GridFunction, orders: &Matrix) -> Result<GridFunction> {
    check_derivative_orders(q, orders)?;
    let comp = Matrix::from_fn(q.rows(), q.cols(), |i, j| 1.0 - orders[(i, j)]);
    let inner = frac_integral_left(q, &comp, FirstInterval::Interpolate)?;
    grid_derivative(&inner)
}

/// Left Caputo derivative: the Riemann-Liouville derivative of q - q(a).
pub fn caputo_derivative_left(q: &GridFunction, orders: &Matrix) -> Result<GridFunction> {
    let base = q.sample(0).clone();
    let shifted = q.map(|m| m.sub(&base).expect("same shape"));
    rl_derivative_left(&shifted, orders)
}

/// Right Riemann-Liouville derivative (with its built-in sign), via
/// reflection: the reflected function is differentiated on the left.
pub fn rl_derivative_right(q: &GridFunction, orders: &Matrix) -> Result<GridFunction> {
    Ok(rl_derivative_left(&q.reflected(), orders)?.reflected())
}

/// Right Caputo derivative: right derivative of q - q(b).
pub fn caputo_derivative_right(q: &GridFunction, orders: &Matrix) -> Result<GridFunction> {
    Ok(caputo_derivative_left(&q.reflected(), orders)?.reflected())
}

/// Left fractional integral of a function carrying a singular part.
/// The singular term maps exactly: the weight is unchanged and its order
/// grows by the integration order, while the regular part goes through
/// quadrature. Output entry orders must stay within (0, 2].
pub fn frac_integral_left_singular(
    q: &SingularGridFunction,
    orders: &Matrix,
    policy: FirstInterval,
) -> Result<SingularGridFunction> {
    order_matrix_for(q.regular(), orders)?;
    let new_orders = q.orders().add(orders)?;
    if new_orders.data().iter().any(|&o| o > 2.0) {
        return Err(FracError::Domain(
            "combined singular order exceeds the representable range (0, 2]".into(),
        ));
    }
    let reg = frac_integral_left(q.regular(), orders, policy)?;
    SingularGridFunction::new(new_orders, q.weight().clone(), reg)
}

/// Plain cumulative trapezoid integral from the left endpoint, nodewise.
pub fn trapezoid_cumulative(nodes: &[f64], vals: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for k in 1..nodes.len() {
        out[k] = out[k - 1] + 0.5 * (nodes[k] - nodes[k - 1]) * (vals[k] + vals[k - 1]);
    }
    out
}
