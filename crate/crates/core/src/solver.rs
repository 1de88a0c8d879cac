//! Picard solvers for multi-order fractional initial value problems.
//!
//! Both solvers iterate the integral form of the problem with the
//! product-trapezoid operator. Convergence is certified in exponentially
//! weighted (Bielecki) norms whose parameter is chosen large enough to
//! force a contraction factor of at most 1/2.

use std::sync::Arc;

use crate::algebra::{Matrix, VectorOrder};
use crate::calculus::{frac_integral_left, FirstInterval};
use crate::error::{FracError, Result};
use crate::grid::{GridFunction, SingularGridFunction, TimeGrid};

/// Right-hand side f(x, t) of a first-order system, with optional
/// Lipschitz constant and state-domain restriction.
pub struct Dynamic {
    dim: usize,
    f: Box<dyn Fn(&[f64], f64) -> Vec<f64>>,
    lipschitz: Option<f64>,
    domain: Option<Box<dyn Fn(&[f64]) -> bool>>,
}

impl Dynamic {
    pub fn new(dim: usize, f: impl Fn(&[f64], f64) -> Vec<f64> + 'static) -> Dynamic {
        Dynamic { dim, f: Box::new(f), lipschitz: None, domain: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Dynamic {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_domain(mut self, test: impl Fn(&[f64]) -> bool + 'static) -> Dynamic {
        self.domain = Some(Box::new(test));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.f)(x, t)
    }

    pub fn has_domain(&self) -> bool {
        self.domain.is_some()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.as_ref().map_or(true, |d| d(x))
    }
}

/// Iteration diagnostics. `final_residual` is the Bielecki distance of
/// the last two iterates and never exceeds the tolerance on success.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Bielecki distances of successive iterates, one per sweep
    pub residual_history: Vec<f64>,
    pub bielecki_k: u64,
    /// contraction factor bound ell = L * sum_i k^(-alpha_i), <= 1/2
    pub contraction_bound: f64,
    pub lipschitz: f64,
    pub lipschitz_estimated: bool,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 200 }
    }
}

/// Weighted L1 norm: integral of e^(-k(t-a)) * |q(t)|_2 over the grid
/// (trapezoid rule).
pub fn bielecki_norm_l1(q: &GridFunction, k: f64) -> f64 {
    let a = q.grid().a();
    let nodes = q.grid().nodes();
    let vals: Vec<f64> = (0..nodes.len())
        .map(|i| (-k * (nodes[i] - a)).exp() * q.sample(i).norm_euclid())
        .collect();
    let mut acc = 0.0;
    for i in 1..nodes.len() {
        acc += 0.5 * (nodes[i] - nodes[i - 1]) * (vals[i] + vals[i - 1]);
    }
    acc
}

/// Weighted sup norm: max over nodes of e^(-k(t-a)) * |q(t)|_2.
pub fn bielecki_norm_sup(q: &GridFunction, k: f64) -> f64 {
    let a = q.grid().a();
    q.grid()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &t)| (-k * (t - a)).exp() * q.sample(i).norm_euclid())
        .fold(0.0, f64::max)
}

/// Smallest integer k >= 1 with L * sum_i k^(-alpha_i) <= 1/2, together
/// with the attained bound.
pub fn choose_k(lipschitz: f64, alpha: &VectorOrder) -> Result<(u64, f64)> {
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(FracError::Argument(format!(
            "Lipschitz constant must be finite and nonnegative, got {lipschitz}"
        )));
    }
    let ell = |k: u64| -> f64 {
        let kf = k as f64;
        lipschitz * alpha.values().iter().map(|&a| kf.powf(-a)).sum::<f64>()
    };
    if ell(1) <= 0.5 {
        return Ok((1, ell(1)));
    }
    // exponential bracket, then bisection on the integer k
    let mut hi = 2u64;
    while ell(hi) > 0.5 {
        hi = hi.checked_mul(2).ok_or_else(|| {
            FracError::Argument("no feasible Bielecki parameter in u64 range".into())
        })?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ell(mid) <= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, ell(hi)))
}

/// Crude Lipschitz estimate for f near the initial state: max difference
/// quotient over pseudo-random probe pairs in a box around q_a, inflated
/// by a safety factor.
fn estimate_lipschitz(f: &Dynamic, q_a: &[f64], a: f64, b: f64) -> f64 {
    let m = q_a.len();
    let radius = 1.0 + 2.0 * q_a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let mut state: u64 = 0x9e3779b97f4a7c15;
    let mut unit = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut lmax = 0.0f64;
    for _ in 0..64 {
        let t = a + (b - a) * unit();
        let x: Vec<f64> = q_a.iter().map(|&c| c + radius * (2.0 * unit() - 1.0)).collect();
        let y: Vec<f64> = q_a.iter().map(|&c| c + radius * (2.0 * unit() - 1.0)).collect();
        let dx: f64 = x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        if dx < 1e-12 {
            continue;
        }
        let fx = f.eval(&x, t);
        let fy = f.eval(&y, t);
        debug_assert_eq!(fx.len(), m);
        let df: f64 = fx.iter().zip(&fy).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        lmax = lmax.max(df / dx);
    }
    2.0 * lmax
}

fn validate_problem(f: &Dynamic, alpha: &VectorOrder, q_a: &[f64]) -> Result<()> {
    if alpha.len() != f.dim() || q_a.len() != f.dim() {
        return Err(FracError::Dimension(format!(
            "dimension mismatch: f has dim {}, alpha has {}, q_a has {}",
            f.dim(),
            alpha.len(),
            q_a.len()
        )));
    }
    Ok(())
}

fn orders_column(alpha: &VectorOrder) -> Matrix {
    Matrix::col_vec(alpha.values())
}

struct PicardSetup {
    k: u64,
    ell: f64,
    lip: f64,
    estimated: bool,
}

fn picard_setup(
    f: &Dynamic,
    alpha: &VectorOrder,
    q_a: &[f64],
    grid: &TimeGrid,
) -> Result<PicardSetup> {
    let (lip, estimated) = match f.lipschitz {
        Some(l) => (l, false),
        None => (estimate_lipschitz(f, q_a, grid.a(), grid.b()), true),
    };
    let (k, ell) = choose_k(lip, alpha)?;
    Ok(PicardSetup { k, ell, lip, estimated })
}

/// Solves c-type problems (derivative taken after subtracting the initial
/// state): q(t) = q_a + I^alpha[f(q, .)](t), by Picard iteration from the
/// constant initial guess.
pub fn picard_caputo(
    f: &Dynamic,
    alpha: &VectorOrder,
    q_a: &[f64],
    grid: &Arc<TimeGrid>,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    validate_problem(f, alpha, q_a)?;
    let setup = picard_setup(f, alpha, q_a, grid)?;
    let orders = orders_column(alpha);
    let base = GridFunction::constant(grid.clone(), Matrix::col_vec(q_a));
    let mut y = base.clone();
    let mut history = Vec::new();
    for iter in 1..=opts.max_iter {
        let fs = sample_rhs(f, &y)?;
        let w = frac_integral_left(&fs, &orders, FirstInterval::Interpolate)?;
        let y_new = base.add(&w)?;
        let diff = y_new.sub(&y)?;
        let plain = diff.max_abs();
        let weighted = bielecki_norm_sup(&diff, setup.k as f64);
        history.push(weighted);
        y = y_new;
        if plain <= opts.tol {
            check_domain(f, &y)?;
            let report = SolveReport {
                converged: true,
                iterations: iter,
                final_residual: weighted,
                residual_history: history,
                bielecki_k: setup.k,
                contraction_bound: setup.ell,
                lipschitz: setup.lip,
                lipschitz_estimated: setup.estimated,
            };
            return Ok((y, report));
        }
    }
    Err(FracError::NonConvergence {
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

fn sample_rhs(f: &Dynamic, y: &GridFunction) -> Result<GridFunction> {
    let m = f.dim();
    let samples = (0..y.grid().len())
        .map(|k| {
            let x: Vec<f64> = (0..m).map(|i| y.entry(k, i, 0)).collect();
            Matrix::col_vec(&f.eval(&x, y.grid().node(k)))
        })
        .collect();
    GridFunction::new(y.grid().clone(), samples)
}

fn check_domain(f: &Dynamic, y: &GridFunction) -> Result<()> {
    if !f.has_domain() {
        return Ok(());
    }
    let m = f.dim();
    for k in 0..y.grid().len() {
        let x: Vec<f64> = (0..m).map(|i| y.entry(k, i, 0)).collect();
        if !f.in_domain(&x) {
            return Err(FracError::DomainExit { time: y.grid().node(k) });
        }
    }
    Ok(())
}

/// Solves r-type problems (derivative of the function itself) with
/// weighted initial data: q(t) = q_a (t-a)^(alpha-1)/Gamma(alpha) + y(t)
/// where the regular part satisfies y = I^alpha[f(q, .)].
///
/// State-domain restrictions are rejected: the solution is unbounded at
/// the initial time for nonzero q_a, so no fixed state set contains it.
pub fn picard_rl(
    f: &Dynamic,
    alpha: &VectorOrder,
    q_a: &[f64],
    grid: &Arc<TimeGrid>,
    opts: &SolveOptions,
) -> Result<(SingularGridFunction, SolveReport)> {
    validate_problem(f, alpha, q_a)?;
    if f.has_domain() {
        return Err(FracError::UnsupportedDomain(
            "state-domain restrictions are not meaningful for weighted initial data".into(),
        ));
    }
    let setup = picard_setup(f, alpha, q_a, grid)?;
    let orders = orders_column(alpha);
    let m = f.dim();
    let trivial_weight = q_a.iter().all(|&v| v == 0.0);
    let policy = if trivial_weight {
        FirstInterval::Interpolate
    } else {
        FirstInterval::ConstantFromRight
    };
    let zero = Matrix::zeros(m, 1);
    let mut reg = GridFunction::constant(grid.clone(), zero.clone());
    let make_solution = |reg: &GridFunction| -> Result<SingularGridFunction> {
        SingularGridFunction::new(orders_column(alpha), Matrix::col_vec(q_a), reg.clone())
    };
    let mut history = Vec::new();
    for iter in 1..=opts.max_iter {
        let current = make_solution(&reg)?;
        // sample f along the iterate; the first node is skipped when the
        // singular part makes the state unbounded there
        let samples = (0..grid.len())
            .map(|k| {
                if k == 0 && !trivial_weight {
                    return zero.clone();
                }
                let x: Vec<f64> = (0..m).map(|i| current.entry(k, i, 0)).collect();
                Matrix::col_vec(&f.eval(&x, grid.node(k)))
            })
            .collect();
        let fs = GridFunction::new(grid.clone(), samples)?;
        let reg_new = frac_integral_left(&fs, &orders, policy)?;
        let diff = reg_new.sub(&reg)?;
        let plain = diff.max_abs();
        let weighted = bielecki_norm_l1(&diff, setup.k as f64);
        history.push(weighted);
        reg = reg_new;
        if plain <= opts.tol {
            let report = SolveReport {
                converged: true,
                iterations: iter,
                final_residual: weighted,
                residual_history: history,
                bielecki_k: setup.k,
                contraction_bound: setup.ell,
                lipschitz: setup.lip,
                lipschitz_estimated: setup.estimated,
            };
            return Ok((make_solution(&reg)?, report));
        }
    }
    Err(FracError::NonConvergence {
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Outcome of pushing a c-type solution as far to the right as possible
/// while it stays inside the closed ball |x|_2 <= radius.
#[derive(Debug)]
pub enum MaximalVerdict {
    /// the solution exists on all of [a, b_max] inside the ball
    Global { solution: GridFunction, report: SolveReport },
    /// an iterate left the ball; time and state of the first exit node
    Escaped { time: f64, witness: Vec<f64>, window_end: f64 },
}

/// Window-extension policy for `extend_maximal`.
#[derive(Debug, Clone, Copy)]
pub struct ExtendOptions {
    pub windows: usize,
    pub nodes_per_window: usize,
    pub grading: f64,
    pub solve: SolveOptions,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        ExtendOptions {
            windows: 40,
            nodes_per_window: 129,
            grading: 2.0,
            solve: SolveOptions::default(),
        }
    }
}

/// Extends the c-type solution over successively longer windows [a, b_w],
/// re-solving from a each time (the dynamics are nonlocal, so windows
/// cannot be chained). Stops at b_max or at the first Picard iterate node
/// leaving the ball.
pub fn extend_maximal(
    f: &Dynamic,
    alpha: &VectorOrder,
    q_a: &[f64],
    a: f64,
    b_max: f64,
    radius: f64,
    opts: &ExtendOptions,
) -> Result<MaximalVerdict> {
    validate_problem(f, alpha, q_a)?;
    if !(b_max > a) || !(radius > 0.0) || opts.windows == 0 {
        return Err(FracError::Argument("need b_max > a, radius > 0, windows >= 1".into()));
    }
    let initial_norm: f64 = q_a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if initial_norm > radius {
        return Err(FracError::Argument("initial state lies outside the ball".into()));
    }
    let m = f.dim();
    let mut last: Option<(GridFunction, SolveReport)> = None;
    for w in 1..=opts.windows {
        let b_w = a + (b_max - a) * w as f64 / opts.windows as f64;
        let grid = TimeGrid::graded(a, b_w, opts.nodes_per_window, opts.grading)?;
        let setup = picard_setup(f, alpha, q_a, &grid)?;
        let orders = orders_column(alpha);
        let base = GridFunction::constant(grid.clone(), Matrix::col_vec(q_a));
        let mut y = base.clone();
        let mut converged = false;
        let mut history = Vec::new();
        'sweeps: for iter in 1..=opts.solve.max_iter {
            let fs = sample_rhs(f, &y)?;
            let y_new = base.add(&frac_integral_left(&fs, &orders, FirstInterval::Interpolate)?)?;
            // scan the fresh iterate for a ball exit in time order
            for k in 0..grid.len() {
                let x: Vec<f64> = (0..m).map(|i| y_new.entry(k, i, 0)).collect();
                let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius || !f.in_domain(&x) {
                    return Ok(MaximalVerdict::Escaped {
                        time: grid.node(k),
                        witness: x,
                        window_end: b_w,
                    });
                }
            }
            let diff = y_new.sub(&y)?;
            let plain = diff.max_abs();
            history.push(bielecki_norm_sup(&diff, setup.k as f64));
            y = y_new;
            if plain <= opts.solve.tol {
                converged = true;
                last = Some((
                    y.clone(),
                    SolveReport {
                        converged: true,
                        iterations: iter,
                        final_residual: *history.last().unwrap(),
                        residual_history: history.clone(),
                        bielecki_k: setup.k,
                        contraction_bound: setup.ell,
                        lipschitz: setup.lip,
                        lipschitz_estimated: setup.estimated,
                    },
                ));
                break 'sweeps;
            }
        }
        if !converged {
            return Err(FracError::NonConvergence {
                iterations: opts.solve.max_iter,
                residual: *history.last().unwrap_or(&f64::NAN),
            });
        }
    }
    let (solution, report) = last.expect("windows >= 1");
    Ok(MaximalVerdict::Global { solution, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ml_scalar, MLParams};

    #[test]
    fn choose_k_examples() {
        let a1 = VectorOrder::new(vec![1.0]).unwrap();
        assert_eq!(choose_k(1.0, &a1).unwrap(), (2, 0.5));
        assert_eq!(choose_k(0.0, &a1).unwrap().0, 1);
        let a2 = VectorOrder::new(vec![0.5]).unwrap();
        let (k, ell) = choose_k(1.0, &a2).unwrap();
        assert_eq!(k, 4);
        assert!((ell - 0.5).abs() < 1e-15);
        // two orders share the budget
        let a3 = VectorOrder::new(vec![0.5, 1.0]).unwrap();
        let (k, ell) = choose_k(1.0, &a3).unwrap();
        assert!(ell <= 0.5 && k >= 4);
        let km = (k - 1) as f64;
        assert!(km.powf(-0.5) + km.powf(-1.0) > 0.5);
    }

    #[test]
    fn bielecki_sandwich() {
        let g = TimeGrid::uniform(0.0, 2.0, 33).unwrap();
        let q = GridFunction::scalar_from_fn(g.clone(), |t| (3.0 * t).sin() + 0.3);
        let sup: f64 = (0..g.len()).map(|k| q.scalar_at(k).abs()).fold(0.0, f64::max);
        for &k in &[1.0, 4.0, 16.0] {
            let w = bielecki_norm_sup(&q, k);
            assert!(w <= sup + 1e-15);
            assert!(w >= (-k * 2.0f64).exp() * sup - 1e-15);
            // weighted L1 is dominated by the unweighted one
            let l1w = bielecki_norm_l1(&q, k);
            let l1 = bielecki_norm_l1(&q, 0.0);
            assert!(l1w <= l1 + 1e-15);
            assert!(l1w >= (-k * 2.0f64).exp() * l1 - 1e-15);
        }
        // weights decrease with k
        assert!(bielecki_norm_sup(&q, 8.0) <= bielecki_norm_sup(&q, 2.0));
    }

    #[test]
    fn caputo_order_one_is_classical() {
        // q' = -q, q(0) = 1
        let f = Dynamic::new(1, |x, _| vec![-x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![1.0]).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 1025).unwrap();
        let (q, rep) = picard_caputo(&f, &alpha, &[1.0], &grid, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.final_residual <= 1e-10);
        for k in 0..grid.len() {
            assert!((q.scalar_at(k) - (-grid.node(k)).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn caputo_linear_half_order() {
        // cD^0.5 q = -q has solution E_{0.5,1}(-t^0.5)
        let f = Dynamic::new(1, |x, _| vec![-x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![0.5]).unwrap();
        let grid = TimeGrid::graded(0.0, 1.0, 513, 3.0).unwrap();
        let (q, _) = picard_caputo(&f, &alpha, &[1.0], &grid, &SolveOptions::default()).unwrap();
        let p = MLParams::new(0.5, 1.0).unwrap();
        for k in 0..grid.len() {
            let exact = ml_scalar(p, -grid.node(k).sqrt()).unwrap();
            assert!((q.scalar_at(k) - exact).abs() < 2e-3, "node {k}");
        }
    }

    #[test]
    fn rl_linear_half_order() {
        // weighted-data problem with rhs -q: solution t^{-0.5} E_{0.5,0.5}(-t^0.5)
        let f = Dynamic::new(1, |x, _| vec![-x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![0.5]).unwrap();
        let grid = TimeGrid::graded(0.0, 1.0, 513, 3.0).unwrap();
        let (q, rep) = picard_rl(&f, &alpha, &[1.0], &grid, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(q.weight()[(0, 0)], 1.0);
        let p = MLParams::new(0.5, 0.5).unwrap();
        for k in 8..grid.len() {
            let t = grid.node(k);
            let exact = t.powf(-0.5) * ml_scalar(p, -t.sqrt()).unwrap();
            let err = (q.entry(k, 0, 0) - exact).abs() / exact.abs().max(1.0);
            assert!(err < 5e-3, "node {k}: {err}");
        }
    }

    #[test]
    fn rl_rejects_domain_restriction() {
        let f = Dynamic::new(1, |x, _| vec![x[0]]).with_domain(|x| x[0].abs() < 10.0);
        let alpha = VectorOrder::new(vec![0.5]).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 17).unwrap();
        assert!(matches!(
            picard_rl(&f, &alpha, &[1.0], &grid, &SolveOptions::default()),
            Err(FracError::UnsupportedDomain(_))
        ));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let f = Dynamic::new(1, |x, _| vec![-x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![0.5]).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 65).unwrap();
        let opts = SolveOptions { tol: 1e-12, max_iter: 1 };
        match picard_caputo(&f, &alpha, &[1.0], &grid, &opts) {
            Err(FracError::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn residuals_contract() {
        let f = Dynamic::new(1, |x, _| vec![-x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![0.7]).unwrap();
        let grid = TimeGrid::graded(0.0, 1.0, 257, 2.0).unwrap();
        let (_, rep) = picard_caputo(&f, &alpha, &[1.0], &grid, &SolveOptions::default()).unwrap();
        let h = &rep.residual_history;
        assert!(h.len() >= 4);
        // once past the first sweeps the ratio respects the bound
        for w in h.windows(2).skip(1) {
            if w[0] > 1e-13 {
                assert!(w[1] / w[0] <= rep.contraction_bound + 0.1, "{:?}", w);
            }
        }
    }

    #[test]
    fn escape_of_quadratic_growth() {
        // x' = x^2, x(0) = 1 blows up at t = 1 and crosses |x| = 10 at 0.9
        let f = Dynamic::new(1, |x, _| vec![x[0] * x[0]]).with_lipschitz(20.0);
        let alpha = VectorOrder::new(vec![1.0]).unwrap();
        match extend_maximal(&f, &alpha, &[1.0], 0.0, 1.0, 10.0, &ExtendOptions::default()).unwrap()
        {
            MaximalVerdict::Escaped { time, witness, .. } => {
                assert!((0.85..=0.95).contains(&time), "time {time}");
                assert!(witness[0] > 10.0);
            }
            MaximalVerdict::Global { .. } => panic!("expected escape"),
        }
    }

    #[test]
    fn global_when_ball_is_large() {
        let f = Dynamic::new(1, |x, _| vec![x[0]]).with_lipschitz(1.0);
        let alpha = VectorOrder::new(vec![0.5]).unwrap();
        let verdict =
            extend_maximal(&f, &alpha, &[1.0], 0.0, 1.0, 1e6, &ExtendOptions::default()).unwrap();
        match verdict {
            MaximalVerdict::Global { solution, report } => {
                assert!(report.converged);
                let g = solution.grid();
                assert!((g.b() - 1.0).abs() < 1e-14);
                let p = MLParams::new(0.5, 1.0).unwrap();
                let exact = ml_scalar(p, 1.0).unwrap();
                let last = solution.scalar_at(g.len() - 1);
                assert!((last - exact).abs() < 5e-3 * exact, "{last} vs {exact}");
            }
            MaximalVerdict::Escaped { .. } => panic!("expected global existence"),
        }
    }
}
