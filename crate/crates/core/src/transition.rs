//! State-transition tableaus for linear multi-order systems, the Theta
//! majorant bound, Duhamel reconstruction, mixed representations, and
//! left/right duality checks.
//!
//! Each tableau column (source node s = t_j) solves a weakly singular
//! matrix Volterra equation. The leading singular behavior is peeled off
//! in closed form: with the coefficient frozen at A(t_j), repeated
//! kernel lifts produce terms c (t-s)^(eps-1) whose exponents and
//! amplitudes are exact Beta-moment images of each other. Quadrature only
//! ever touches the smooth remainder and the frozen-coefficient defect,
//! which is what keeps near-diagonal blocks accurate.

use std::sync::Arc;

use crate::algebra::{Matrix, MatrixOrder, VectorOrder};
use crate::calculus::{conv_power, frac_integral_left, trapezoid_cumulative, FirstInterval};
use crate::error::{FracError, Result};
use crate::grid::{pow0, GridFunction, SingularGridFunction, TimeGrid};
use crate::special::{gamma, ln_gamma};

/// Which defining equation a tableau solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableauKind {
    /// kernel-weighted data: diagonal blocks are singular as t -> s
    Rl,
    /// identity data: diagonal blocks are exactly Id
    Caputo,
}

#[derive(Debug, Clone, Copy)]
pub struct TableauOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TableauOptions {
    fn default() -> Self {
        TableauOptions { tol: 1e-10, max_iter: 400 }
    }
}

/// terms[i * m + k] lists (coefficient, eps) pairs meaning
/// coefficient * (t - s)^(eps - 1) at block entry (i, k).
type LevelTerms = Vec<Vec<(f64, f64)>>;

/// One tableau column: closed-form singular levels plus the quadratured
/// remainder on the grid tail t >= t_j.
#[derive(Debug, Clone)]
struct Column {
    /// levels[p][i*m+k]; every stored level belongs to the block value
    levels: Vec<LevelTerms>,
    /// remainder at sub-nodes, y[l] is the m x m matrix at t_{j+l}
    y: Vec<Matrix>,
}

impl Column {
    fn term_sum(&self, m: usize, i: usize, k: usize, delta: f64) -> f64 {
        let mut acc = 0.0;
        for level in &self.levels {
            for &(c, eps) in &level[i * m + k] {
                if c != 0.0 {
                    acc += c * pow0(delta, eps - 1.0);
                }
            }
        }
        acc
    }

    fn block(&self, m: usize, delta: f64, l: usize) -> Matrix {
        Matrix::from_fn(m, m, |i, k| self.term_sum(m, i, k, delta) + self.y[l][(i, k)])
    }
}

/// Lower-triangular family of transition blocks on a shared grid.
pub struct TransitionTableau {
    grid: Arc<TimeGrid>,
    m: usize,
    kind: TableauKind,
    order: MatrixOrder,
    columns: Vec<Column>,
}

impl TransitionTableau {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> TableauKind {
        self.kind
    }

    pub fn order(&self) -> &MatrixOrder {
        &self.order
    }

    /// Block value at (t_i, t_j) for i >= j. For kernel-weighted tableaus
    /// the diagonal i == j is unbounded and rejected.
    pub fn block(&self, i: usize, j: usize) -> Result<Matrix> {
        if j > i || i >= self.grid.len() {
            return Err(FracError::Argument(format!(
                "block requires j <= i < {}, got ({i}, {j})",
                self.grid.len()
            )));
        }
        if i == j && self.kind == TableauKind::Rl {
            return Err(FracError::Domain(
                "kernel-weighted blocks are unbounded on the diagonal".into(),
            ));
        }
        let delta = self.grid.node(i) - self.grid.node(j);
        Ok(self.columns[j].block(self.m, delta, i - j))
    }

    /// Leading singular amplitude of column j: entry (i, k) coefficient
    /// of (t - t_j)^(eps - 1) at the lowest level.
    pub fn leading_amplitude(&self, j: usize) -> Matrix {
        Matrix::from_fn(self.m, self.m, |i, k| {
            self.columns[j].levels[0][i * self.m + k]
                .first()
                .map_or(0.0, |&(c, _)| c)
        })
    }

    /// Quadratured remainder of block (i, j), excluding all closed-form
    /// singular levels.
    pub fn remainder(&self, i: usize, j: usize) -> &Matrix {
        &self.columns[j].y[i - j]
    }

    /// Nodewise re-substitution defect of the remainder equation of
    /// column j; converged columns stay within a small multiple of tol.
    pub fn column_defect(&self, a: &GridFunction, j: usize, opts: &TableauOptions) -> Result<f64> {
        let ctx = ColumnContext::new(self, a, j)?;
        let g = ctx.forcing()?;
        let y = &self.columns[j].y;
        let wy = ctx.apply_kernel_quadrature(y)?;
        let mut defect = 0.0f64;
        for l in 0..y.len() {
            let r = y[l].sub(&g[l].add(&wy[l])?)?;
            defect = defect.max(r.max_abs());
        }
        let _ = opts;
        Ok(defect)
    }

    /// Quadrature of int_a^{t_i} |Z(t_i, s)| ds entrywise (max over
    /// entries of the integral of the absolute value). The weakly
    /// singular factor near s = t_i is integrated by exact power moments
    /// on closed-form levels and trapezoid on the remainder.
    pub fn l1_in_s(&self, i: usize) -> Result<f64> {
        if i == 0 || i >= self.grid.len() {
            return Err(FracError::Argument("need 0 < i < n".into()));
        }
        let nodes = self.grid.nodes();
        let t = nodes[i];
        let m = self.m;
        let mut best = 0.0f64;
        for r in 0..m {
            for k in 0..m {
                let mut acc = 0.0;
                // closed-form levels, coefficient interpolated linearly in s
                for level_idx in 0..self.columns[0].levels.len() {
                    let nterms = self.columns[0].levels[level_idx][r * m + k].len();
                    for idx in 0..nterms {
                        let eps = self.columns[0].levels[level_idx][r * m + k][idx].1;
                        let g: Vec<f64> = (0..=i)
                            .map(|j| {
                                self.columns[j].levels[level_idx][r * m + k][idx].0.abs()
                            })
                            .collect();
                        let conv = conv_power(&nodes[..=i], 0, &g, eps, FirstInterval::Interpolate);
                        acc += conv[i];
                    }
                }
                // remainder by plain trapezoid in s
                let h: Vec<f64> = (0..=i).map(|j| self.columns[j].y[i - j][(r, k)].abs()).collect();
                let tr = trapezoid_cumulative(&nodes[..=i], &h);
                acc += tr[i];
                let _ = t;
                best = best.max(acc);
            }
        }
        Ok(best)
    }
}

fn base_level(order: &MatrixOrder, kind: TableauKind) -> Result<LevelTerms> {
    let m = order.dim();
    let mut base: LevelTerms = vec![Vec::new(); m * m];
    for i in 0..m {
        base[i * m + i].push(match kind {
            TableauKind::Rl => (1.0 / gamma(order.get(i, i))?, order.get(i, i)),
            TableauKind::Caputo => (1.0, 1.0),
        });
    }
    Ok(base)
}

/// Level templates for the closed-form expansion (the last one is the
/// forcing level). Each template carries coefficient majorants, obtained
/// by running the lift recursion on |A| bounds; terms whose majorant is
/// negligible at the span are pruned, and every column later lifts into
/// the same pruned exponent layout so term lists stay aligned across
/// columns. The expansion stops once the remainder is twice
/// differentiable at the source node; with an affine coefficient it is
/// pushed until its own tail is negligible, which makes the remainder
/// essentially zero.
fn expansion_plan(
    order: &MatrixOrder,
    kind: TableauKind,
    a0_maj: &Matrix,
    a1_maj: &Matrix,
    span: f64,
    deep: bool,
) -> Result<Vec<LevelTerms>> {
    const CAP: usize = 60;
    let base = base_level(order, kind)?;
    if a0_maj.max_abs() == 0.0 && a1_maj.max_abs() == 0.0 {
        let forcing = lift_level(&base, a0_maj, a1_maj, order)?;
        return Ok(vec![base, forcing]);
    }
    let measure = |lv: &LevelTerms| -> f64 {
        lv.iter()
            .map(|list| list.iter().map(|&(c, e)| c * span.powf(e - 1.0)).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut plan = vec![base];
    let mut scale = measure(&plan[0]).max(1.0);
    for p in 1..=CAP {
        let mut level = lift_level(plan.last().unwrap(), a0_maj, a1_maj, order)?;
        for list in level.iter_mut() {
            list.retain(|&(c, e)| c * span.powf(e - 1.0) > 1e-16 * scale);
        }
        let eps_min = level
            .iter()
            .flat_map(|l| l.iter())
            .map(|&(_, e)| e)
            .fold(f64::INFINITY, f64::min);
        let tail = measure(&level);
        scale = scale.max(tail);
        plan.push(level);
        let smooth = eps_min >= 2.0 && p >= 2;
        if smooth && (!deep || tail <= 1e-15 * scale || p == CAP) {
            return Ok(plan);
        }
    }
    Err(FracError::Convergence { terms: CAP })
}

/// Same lift as `lift_level`, but accumulated into the template's
/// exponent layout; contributions to pruned exponents are dropped.
fn lift_into_template(
    prev: &LevelTerms,
    a0: &Matrix,
    a1: &Matrix,
    order: &MatrixOrder,
    template: &LevelTerms,
) -> Result<LevelTerms> {
    let m = order.dim();
    let mut next: LevelTerms = template
        .iter()
        .map(|list| list.iter().map(|&(_, e)| (0.0, e)).collect())
        .collect();
    for i in 0..m {
        for k in 0..m {
            let alpha = order.get(i, k);
            let idx = i * m + k;
            let mut add = |c2: f64, e2: f64| {
                if let Some(pos) =
                    template[idx].iter().position(|&(_, e)| (e - e2).abs() < 1e-9)
                {
                    next[idx][pos].0 += c2;
                }
            };
            for r in 0..m {
                for &(c, eps) in &prev[r * m + k] {
                    add(a0[(i, r)] * c * gamma(eps)? / gamma(eps + alpha)?, eps + alpha);
                    add(
                        a1[(i, r)] * c * gamma(eps + 1.0)? / gamma(eps + alpha + 1.0)?,
                        eps + alpha + 1.0,
                    );
                }
            }
        }
    }
    Ok(next)
}

/// One affine-frozen kernel lift. The coefficient is frozen to first
/// order at the column base, A(tau) ~ a0 + a1 tau, and both parts pass
/// through the kernel in closed form: entry (i, k) of the next level
/// collects a0[i][r] * c * Gamma(eps)/Gamma(eps + alpha_ik) at exponent
/// eps + alpha_ik, and a1[i][r] * c * Gamma(eps + 1)/Gamma(eps + alpha_ik
/// + 1) at exponent eps + alpha_ik + 1, over all r and all terms below.
fn lift_level(
    prev: &LevelTerms,
    a0: &Matrix,
    a1: &Matrix,
    order: &MatrixOrder,
) -> Result<LevelTerms> {
    let m = order.dim();
    let mut next: LevelTerms = vec![Vec::new(); m * m];
    for i in 0..m {
        for k in 0..m {
            let alpha = order.get(i, k);
            let list = &mut next[i * m + k];
            let mut push = |c2: f64, e2: f64| {
                match list.iter_mut().find(|(_, e)| (*e - e2).abs() < 1e-9) {
                    Some(slot) => slot.0 += c2,
                    None => list.push((c2, e2)),
                }
            };
            for r in 0..m {
                for &(c, eps) in &prev[r * m + k] {
                    push(a0[(i, r)] * c * gamma(eps)? / gamma(eps + alpha)?, eps + alpha);
                    push(
                        a1[(i, r)] * c * gamma(eps + 1.0)? / gamma(eps + alpha + 1.0)?,
                        eps + alpha + 1.0,
                    );
                }
            }
        }
    }
    Ok(next)
}

/// The linear part of the affine freeze at a column base: the secant of
/// the first sub-interval, which is the exact slope whenever the
/// coefficient is affine in time.
fn column_slope(nodes: &[f64], a_vals: &[Matrix]) -> Matrix {
    let m = a_vals[0].rows();
    if nodes.len() < 2 {
        return Matrix::zeros(m, m);
    }
    a_vals[1]
        .sub(&a_vals[0])
        .expect("same shape")
        .scale(1.0 / (nodes[1] - nodes[0]))
}

/// Majorants driving the level-depth choice: entrywise sups of |A| and
/// of the secant slopes, plus whether A is affine on the grid (in which
/// case the expansion alone can represent the column and is pushed much
/// deeper). Entrywise bounds keep the recursion sharp for structured
/// coefficients such as triangular ones.
fn expansion_profile(a: &GridFunction) -> (Matrix, Matrix, bool) {
    let m = a.rows();
    let nodes = a.grid().nodes();
    let mut a0_maj = Matrix::zeros(m, m);
    for k in 0..nodes.len() {
        a0_maj = a0_maj.zip_with(a.sample(k), |b, v| b.max(v.abs())).expect("same shape");
    }
    let mut a1_maj = Matrix::zeros(m, m);
    let mut affine = true;
    let mut first: Option<Matrix> = None;
    for k in 1..nodes.len() {
        let sec = a
            .sample(k)
            .sub(a.sample(k - 1))
            .expect("same shape")
            .scale(1.0 / (nodes[k] - nodes[k - 1]));
        a1_maj = a1_maj.zip_with(&sec, |b, v| b.max(v.abs())).expect("same shape");
        match &first {
            None => first = Some(sec),
            Some(f) => {
                let scale = 1.0 + a1_maj.max_abs();
                if sec.sub(f).expect("same shape").max_abs() > 1e-12 * scale {
                    affine = false;
                }
            }
        }
    }
    (a0_maj, a1_maj, affine)
}

fn level_value(level: &LevelTerms, m: usize, i: usize, k: usize, delta: f64) -> f64 {
    level[i * m + k]
        .iter()
        .filter(|&&(c, _)| c != 0.0)
        .map(|&(c, eps)| c * pow0(delta, eps - 1.0))
        .sum()
}

/// Everything needed to assemble and iterate one column.
struct ColumnContext<'a> {
    nodes: &'a [f64],
    a_vals: Vec<Matrix>,
    a1: Matrix,
    order: &'a MatrixOrder,
    levels: Vec<LevelTerms>,
    m: usize,
}

impl<'a> ColumnContext<'a> {
    fn new(tab: &'a TransitionTableau, a: &GridFunction, j: usize) -> Result<ColumnContext<'a>> {
        let nodes = &tab.grid.nodes()[j..];
        let a_vals: Vec<Matrix> = (j..tab.grid.len()).map(|l| a.sample(l).clone()).collect();
        let a1 = column_slope(nodes, &a_vals);
        let mut levels = tab.columns[j].levels.clone();
        // rebuild the forcing level, dropped after construction
        let last = lift_level(levels.last().unwrap(), &a_vals[0], &a1, &tab.order)?;
        levels.push(last);
        Ok(ColumnContext { nodes, a_vals, a1, order: &tab.order, levels, m: tab.m })
    }

    /// Remainder forcing: the first dropped level evaluated pointwise,
    /// plus kernel quadrature of the frozen-coefficient defect applied to
    /// every retained level.
    fn forcing(&self) -> Result<Vec<Matrix>> {
        let m = self.m;
        let n = self.nodes.len();
        let s = self.nodes[0];
        let forcing_level = self.levels.last().unwrap();
        let mut g: Vec<Matrix> = (0..n)
            .map(|l| {
                let d = self.nodes[l] - s;
                Matrix::from_fn(m, m, |i, k| level_value(forcing_level, m, i, k, d))
            })
            .collect();
        let a_s = &self.a_vals[0];
        // defect of the affine freeze; identically zero for affine A
        let das: Vec<Matrix> = (0..n)
            .map(|l| {
                let d = self.nodes[l] - s;
                self.a_vals[l]
                    .sub(a_s)
                    .expect("same shape")
                    .sub(&self.a1.scale(d))
                    .expect("same shape")
            })
            .collect();
        // rounding in the secant leaves ~1e-16 dust on affine data; the
        // corrections it would drive are far below every tolerance
        let a_scale = self.a_vals.iter().map(Matrix::max_abs).fold(0.0f64, f64::max);
        if das.iter().all(|da| da.max_abs() <= 1e-13 * a_scale) {
            return Ok(g);
        }
        for level in &self.levels[..self.levels.len() - 1] {
            for i in 0..m {
                for k in 0..m {
                    let eps_ok = level.iter().any(|l| !l.is_empty());
                    if !eps_ok {
                        continue;
                    }
                    let vals: Vec<f64> = (0..n)
                        .map(|l| {
                            if l == 0 {
                                return 0.0;
                            }
                            let d = self.nodes[l] - s;
                            (0..m)
                                .map(|r| das[l][(i, r)] * level_value(level, m, r, k, d))
                                .sum()
                        })
                        .collect();
                    let alpha = self.order.get(i, k);
                    let conv =
                        conv_power(self.nodes, 0, &vals, alpha, FirstInterval::Interpolate);
                    let ga = gamma(alpha)?;
                    for l in 0..n {
                        g[l][(i, k)] += conv[l] / ga;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Entrywise kernel quadrature of A(tau) x Y(tau) along the column.
    fn apply_kernel_quadrature(&self, y: &[Matrix]) -> Result<Vec<Matrix>> {
        let m = self.m;
        let n = self.nodes.len();
        let prods: Vec<Matrix> =
            (0..n).map(|l| self.a_vals[l].matmul(&y[l]).expect("square")).collect();
        let mut out = vec![Matrix::zeros(m, m); n];
        for i in 0..m {
            for k in 0..m {
                let vals: Vec<f64> = (0..n).map(|l| prods[l][(i, k)]).collect();
                let alpha = self.order.get(i, k);
                let conv = conv_power(self.nodes, 0, &vals, alpha, FirstInterval::Interpolate);
                let ga = gamma(alpha)?;
                for l in 0..n {
                    out[l][(i, k)] = conv[l] / ga;
                }
            }
        }
        Ok(out)
    }
}

fn solve_column(
    nodes: &[f64],
    a_vals: Vec<Matrix>,
    order: &MatrixOrder,
    kind: TableauKind,
    plan: &[LevelTerms],
    opts: &TableauOptions,
    col_id: usize,
) -> Result<Column> {
    let m = order.dim();
    let a_s = a_vals[0].clone();
    let a1 = column_slope(nodes, &a_vals);
    // retained levels follow the shared template; the forcing level is
    // rebuilt unpruned by the column context
    let mut retained: Vec<LevelTerms> = Vec::with_capacity(plan.len() - 1);
    retained.push(base_level(order, kind)?);
    for template in &plan[1..plan.len() - 1] {
        let next = lift_into_template(retained.last().unwrap(), &a_s, &a1, order, template)?;
        retained.push(next);
    }
    let n = nodes.len();
    if n == 1 {
        return Ok(Column { levels: retained, y: vec![Matrix::zeros(m, m)] });
    }
    let stub = TransitionTableau {
        grid: TimeGrid::from_nodes(nodes.to_vec())?,
        m,
        kind,
        order: order.clone(),
        columns: vec![Column { levels: retained.clone(), y: vec![Matrix::zeros(m, m); n] }],
    };
    let a_grid = GridFunction::new(stub.grid.clone(), a_vals)?;
    let ctx = ColumnContext::new(&stub, &a_grid, 0)?;
    let g = ctx.forcing()?;
    let mut y = g.clone();
    let mut last_residual = f64::NAN;
    for _iter in 1..=opts.max_iter {
        let wy = ctx.apply_kernel_quadrature(&y)?;
        let mut diff = 0.0f64;
        let mut scale = 1.0f64;
        let mut y_new = Vec::with_capacity(n);
        for l in 0..n {
            let v = g[l].add(&wy[l])?;
            diff = diff.max(v.sub(&y[l])?.max_abs());
            scale = scale.max(v.max_abs());
            y_new.push(v);
        }
        y = y_new;
        last_residual = diff;
        if diff <= opts.tol * scale {
            return Ok(Column { levels: retained, y });
        }
    }
    Err(FracError::ColumnNonConvergence { column: col_id, residual: last_residual })
}

fn validate_coefficient(a: &GridFunction, order: &MatrixOrder) -> Result<()> {
    if a.rows() != a.cols() || a.rows() != order.dim() {
        return Err(FracError::Dimension(format!(
            "coefficient is {}x{} but order dimension is {}",
            a.rows(),
            a.cols(),
            order.dim()
        )));
    }
    Ok(())
}

fn build_tableau(
    a: &GridFunction,
    order: &MatrixOrder,
    kind: TableauKind,
    opts: &TableauOptions,
) -> Result<TransitionTableau> {
    validate_coefficient(a, order)?;
    let grid = a.grid().clone();
    let (a0_maj, a1_maj, affine) = expansion_profile(a);
    let span = grid.b() - grid.a();
    let plan = expansion_plan(order, kind, &a0_maj, &a1_maj, span, affine)?;
    let n = grid.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let nodes = &grid.nodes()[j..];
        let a_vals: Vec<Matrix> = (j..n).map(|l| a.sample(l).clone()).collect();
        columns.push(solve_column(nodes, a_vals, order, kind, &plan, opts, j)?);
    }
    Ok(TransitionTableau { grid, m: order.dim(), kind, order: order.clone(), columns })
}

/// Kernel-weighted transition tableau: column j solves
/// Z(t, t_j) = kernel term + I^alpha[A x Z] on the grid tail.
pub fn transition_rl(
    a: &GridFunction,
    order: &MatrixOrder,
    opts: &TableauOptions,
) -> Result<TransitionTableau> {
    build_tableau(a, order, TableauKind::Rl, opts)
}

/// Identity-data transition tableau: cZ(t, t_j) = Id + I^alpha[A x cZ].
pub fn transition_caputo(
    a: &GridFunction,
    order: &MatrixOrder,
    opts: &TableauOptions,
) -> Result<TransitionTableau> {
    build_tableau(a, order, TableauKind::Caputo, opts)
}

/// Majorant data for the entrywise bound |Z_ij(t,s)| <= (t-s)^(alpha_ij - 1) * theta.
#[derive(Debug, Clone)]
pub struct ThetaBound {
    pub theta: f64,
    pub b: f64,
    pub terms_used: usize,
    pub m_bound: f64,
    pub beta_min: f64,
    pub gamma_max: f64,
    pub delta: f64,
}

/// Sums the majorant series sum_p (M (b-a)^delta)^p sum over length-p
/// order paths of 1/Gamma(alpha_ij + path sum), where delta is the
/// smallest order if b-a < 1 and the largest otherwise. Path sums are
/// accumulated by dynamic programming over merged partial sums.
pub fn theta_bound(m_bound: f64, order: &MatrixOrder, a: f64, b: f64) -> Result<ThetaBound> {
    if !(m_bound >= 0.0) || !(b > a) {
        return Err(FracError::Argument("need M >= 0 and b > a".into()));
    }
    let m = order.dim();
    let vals = order.values();
    let beta_min = vals.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let gamma_max = vals.data().iter().cloned().fold(0.0f64, f64::max);
    let delta = if b - a < 1.0 { beta_min } else { gamma_max };
    let x = m_bound * (b - a).powf(delta);
    let inv_gamma = |s: f64| -> Result<f64> {
        if s < 170.0 {
            Ok(1.0 / gamma(s)?)
        } else {
            Ok((-ln_gamma(s)?).exp())
        }
    };
    let mut theta = 0.0f64;
    let mut terms_used = 0usize;
    for j in 0..m {
        // partial path sums over k_1..k_p drawn from column j orders
        let mut states: Vec<(f64, f64)> = vec![(0.0, 1.0)]; // (sum, multiplicity)
        let mut partial = vec![0.0f64; m];
        let mut xp = 1.0f64;
        for p in 0..10_000 {
            let mut level_max = 0.0f64;
            for i in 0..m {
                let aij = order.get(i, j);
                let term: f64 = states
                    .iter()
                    .map(|&(s, w)| w * inv_gamma(aij + s).unwrap_or(0.0))
                    .sum::<f64>()
                    * xp;
                partial[i] += term;
                level_max = level_max.max(term / partial[i].max(f64::MIN_POSITIVE));
            }
            terms_used = terms_used.max(p + 1);
            if p > 0 && (level_max < 1e-14 || xp == 0.0) {
                break;
            }
            // advance one path step
            let mut next: Vec<(f64, f64)> = Vec::with_capacity(states.len() * m);
            for &(s, w) in &states {
                for k in 0..m {
                    let s2 = s + order.get(k, j);
                    match next.iter_mut().find(|(e, _)| (*e - s2).abs() < 1e-9) {
                        Some(slot) => slot.1 += w,
                        None => next.push((s2, w)),
                    }
                }
            }
            states = next;
            xp *= x;
        }
        for i in 0..m {
            theta = theta.max(partial[i]);
        }
    }
    Ok(ThetaBound { theta, b, terms_used, m_bound, beta_min, gamma_max, delta })
}

/// Max over stored strictly-lower blocks and entries of
/// |Z_ik(t,s)| (t-s)^(1 - alpha_ik) - theta. Nonpositive output means the
/// bound is respected everywhere.
pub fn check_theta(tab: &TransitionTableau, bound: &ThetaBound) -> Result<f64> {
    if tab.kind != TableauKind::Rl {
        return Err(FracError::Argument(
            "the bound applies to kernel-weighted tableaus only".into(),
        ));
    }
    let n = tab.grid.len();
    let m = tab.m;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..n {
        for i in (j + 1)..n {
            let delta = tab.grid.node(i) - tab.grid.node(j);
            let z = tab.block(i, j)?;
            for r in 0..m {
                for k in 0..m {
                    let scaled = z[(r, k)].abs() * delta.powf(1.0 - tab.order.get(r, k));
                    worst = worst.max(scaled - bound.theta);
                }
            }
        }
    }
    Ok(worst)
}

/// Convolution u(t_i) = int_a^{t_i} Z(t_i, s) x B(s) ds. Closed-form
/// levels integrate their kernel powers exactly against the piecewise
/// linear interpolant of amplitude x B; the remainder uses trapezoid.
fn convolve(tab: &TransitionTableau, b: &GridFunction) -> Result<GridFunction> {
    if b.rows() != tab.m || b.cols() != 1 {
        return Err(FracError::Dimension("forcing must be an m-vector grid function".into()));
    }
    if b.grid() != &tab.grid {
        return Err(FracError::Argument("forcing grid differs from tableau grid".into()));
    }
    let n = tab.grid.len();
    let m = tab.m;
    let nodes = tab.grid.nodes();
    let mut u = vec![Matrix::zeros(m, 1); n];
    for r in 0..m {
        for k in 0..m {
            let nlev = tab.columns[0].levels.len();
            for lv in 0..nlev {
                let nterms = tab.columns[0].levels[lv][r * m + k].len();
                for idx in 0..nterms {
                    let eps = tab.columns[0].levels[lv][r * m + k][idx].1;
                    let g: Vec<f64> = (0..n)
                        .map(|j| tab.columns[j].levels[lv][r * m + k][idx].0 * b.entry(j, k, 0))
                        .collect();
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let conv = conv_power(nodes, 0, &g, eps, FirstInterval::Interpolate);
                    for i in 0..n {
                        u[i][(r, 0)] += conv[i];
                    }
                }
            }
        }
        // remainder: for each target node integrate Y(t_i, s) x B(s)
        for i in 1..n {
            let h: Vec<f64> = (0..=i)
                .map(|j| {
                    (0..m).map(|k| tab.columns[j].y[i - j][(r, k)] * b.entry(j, k, 0)).sum()
                })
                .collect();
            let tr = trapezoid_cumulative(&nodes[..=i], &h);
            u[i][(r, 0)] += tr[i];
        }
    }
    GridFunction::new(tab.grid.clone(), u)
}

fn require_row_constant(order: &MatrixOrder) -> Result<&VectorOrder> {
    order.row_vector().ok_or_else(|| {
        FracError::UnsupportedOrder(order.get(0, 0))
    })
}

/// Homogeneous part of column 0 applied to q_a, split into the leading
/// kernel weight (returned separately for Rl) and the finite rest.
fn homogeneous_parts(
    tab: &TransitionTableau,
    q_a: &[f64],
    skip_leading: bool,
) -> Vec<Matrix> {
    let n = tab.grid.len();
    let m = tab.m;
    let col = &tab.columns[0];
    let a0 = tab.grid.a();
    (0..n)
        .map(|i| {
            let d = tab.grid.node(i) - a0;
            Matrix::from_fn(m, 1, |r, _| {
                let mut acc = 0.0;
                let from = if skip_leading { 1 } else { 0 };
                for level in &col.levels[from..] {
                    for k in 0..m {
                        for &(c, eps) in &level[r * m + k] {
                            if c != 0.0 {
                                acc += c * pow0(d, eps - 1.0) * q_a[k];
                            }
                        }
                    }
                }
                for k in 0..m {
                    acc += col.y[i][(r, k)] * q_a[k];
                }
                acc
            })
        })
        .collect()
}

/// Solution of the kernel-weighted linear problem by the transition
/// formula: q(t) = Z(t, a) x q_a + int_a^t Z(t, s) x B(s) ds, returned
/// with the leading singular weight q_a carried symbolically.
pub fn duhamel_rl(
    a: &GridFunction,
    b: &GridFunction,
    q_a: &[f64],
    alpha: &VectorOrder,
    opts: &TableauOptions,
) -> Result<SingularGridFunction> {
    let order = MatrixOrder::row_constant(alpha);
    require_row_constant(&order)?;
    if q_a.len() != alpha.len() {
        return Err(FracError::Dimension("q_a length must match order length".into()));
    }
    let tab = transition_rl(a, &order, opts)?;
    let u = convolve(&tab, b)?;
    let homog = homogeneous_parts(&tab, q_a, true);
    let reg_samples: Vec<Matrix> =
        (0..tab.grid.len()).map(|i| homog[i].add(u.sample(i)).expect("shape")).collect();
    let reg = GridFunction::new(tab.grid.clone(), reg_samples)?;
    SingularGridFunction::new(
        Matrix::col_vec(alpha.values()),
        Matrix::col_vec(q_a),
        reg,
    )
}

/// Solution of the c-type linear problem:
/// q(t) = cZ(t, a) x q_a + int_a^t Z(t, s) x B(s) ds; the convolution
/// kernel is the kernel-weighted tableau even though the data propagates
/// through the identity-data one.
pub fn duhamel_caputo(
    a: &GridFunction,
    b: &GridFunction,
    q_a: &[f64],
    alpha: &VectorOrder,
    opts: &TableauOptions,
) -> Result<GridFunction> {
    let order = MatrixOrder::row_constant(alpha);
    require_row_constant(&order)?;
    if q_a.len() != alpha.len() {
        return Err(FracError::Dimension("q_a length must match order length".into()));
    }
    let ctab = transition_caputo(a, &order, opts)?;
    let ztab = transition_rl(a, &order, opts)?;
    let u = convolve(&ztab, b)?;
    let homog = homogeneous_parts(&ctab, q_a, false);
    let samples: Vec<Matrix> =
        (0..ctab.grid.len()).map(|i| homog[i].add(u.sample(i)).expect("shape")).collect();
    GridFunction::new(ctab.grid().clone(), samples)
}

/// Which mixed representation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedKind {
    /// kernel-weighted data with identity-data convolution
    Q1,
    /// identity data with identity-data convolution
    Q2,
}

/// Mixed representations q1(t) = Z(t,a) x q_a + int cZ(t,s) x B(s) ds and
/// q2(t) = cZ(t,a) x q_a + int cZ(t,s) x B(s) ds, together with the
/// nodewise defect of the associated integral representation whose
/// forcing is I^(1-alpha)[B]:
///   q1 = kernel term of q_a + I^alpha[A q1 + I^(1-alpha)[B]]
///   q2 = q_a + I^alpha[A q2 + I^(1-alpha)[B]]
/// The defect integral peels known power terms off the integrand and
/// quadratures only the rest, which keeps the residual at solver scale
/// when A and B are constant.
pub fn mixed_duhamel(
    a: &GridFunction,
    b: &GridFunction,
    q_a: &[f64],
    alpha: &VectorOrder,
    which: MixedKind,
    opts: &TableauOptions,
) -> Result<(SingularGridFunction, f64)> {
    let order = MatrixOrder::row_constant(alpha);
    require_row_constant(&order)?;
    let m = alpha.len();
    if q_a.len() != m {
        return Err(FracError::Dimension("q_a length must match order length".into()));
    }
    let ctab = transition_caputo(a, &order, opts)?;
    let u = convolve(&ctab, b)?;
    let htab = match which {
        MixedKind::Q1 => transition_rl(a, &order, opts)?,
        MixedKind::Q2 => transition_caputo(a, &order, opts)?,
    };
    let n = htab.grid().len();
    // the leading level is carried by the singular weight below, so it is
    // skipped here for both kinds
    let homog = homogeneous_parts(&htab, q_a, true);
    let reg_samples: Vec<Matrix> =
        (0..n).map(|i| homog[i].add(u.sample(i)).expect("shape")).collect();
    let reg = GridFunction::new(htab.grid().clone(), reg_samples)?;
    let (weight, orders) = match which {
        MixedKind::Q1 => (Matrix::col_vec(q_a), Matrix::col_vec(alpha.values())),
        MixedKind::Q2 => {
            // constant data: represent q_a as an order-1 "singular" term so
            // both cases share one carrier type
            (Matrix::col_vec(q_a), Matrix::from_fn(m, 1, |_, _| 1.0))
        }
    };
    let q = SingularGridFunction::new(orders, weight, reg)?;
    let residual = mixed_residual(a, b, q_a, alpha, which, &q, &htab, &ctab)?;
    Ok((q, residual))
}

/// Power term list: value(t) = sum coef * (t - a)^(eps - 1), per component.
type PowerList = Vec<(Vec<f64>, f64)>;

fn push_power(list: &mut PowerList, coef: Vec<f64>, eps: f64) {
    if coef.iter().all(|&c| c == 0.0) {
        return;
    }
    match list.iter_mut().find(|(_, e)| (*e - eps).abs() < 1e-9) {
        Some((cs, _)) => {
            for (s, c) in cs.iter_mut().zip(&coef) {
                *s += c;
            }
        }
        None => list.push((coef, eps)),
    }
}

fn eval_powers(list: &PowerList, m: usize, d: f64) -> Matrix {
    Matrix::from_fn(m, 1, |r, _| {
        list.iter()
            .filter(|(cs, _)| cs[r] != 0.0)
            .map(|(cs, eps)| cs[r] * pow0(d, eps - 1.0))
            .sum()
    })
}

#[allow(clippy::too_many_arguments)]
fn mixed_residual(
    a: &GridFunction,
    b: &GridFunction,
    q_a: &[f64],
    alpha: &VectorOrder,
    which: MixedKind,
    q: &SingularGridFunction,
    htab: &TransitionTableau,
    ctab: &TransitionTableau,
) -> Result<f64> {
    let m = alpha.len();
    let grid = htab.grid();
    let n = grid.len();
    let nodes = grid.nodes();
    let const_a = a.samples().iter().all(|s| s.sub(a.sample(0)).unwrap().max_abs() == 0.0);
    let const_b = b.samples().iter().all(|s| s.sub(b.sample(0)).unwrap().max_abs() == 0.0);

    // forcing C = I^(1-alpha)[B]
    let comp = Matrix::col_vec(&alpha.complement());
    let c_fn = frac_integral_left(b, &comp, FirstInterval::Interpolate)?;

    // known power structure of q (exact when A, B are constant)
    let mut q_powers: PowerList = Vec::new();
    if const_a && const_b {
        let col = &htab.columns[0];
        for level in &col.levels {
            for r in 0..m {
                for k in 0..m {
                    for &(c, eps) in &level[r * m + k] {
                        let mut coef = vec![0.0; m];
                        coef[r] = c * q_a[k];
                        push_power(&mut q_powers, coef, eps);
                    }
                }
            }
        }
        // convolution levels: int_0^t c (t-s)^(eps-1) B_k ds = c B_k t^eps / eps
        let ccol = &ctab.columns[0];
        for level in &ccol.levels {
            for r in 0..m {
                for k in 0..m {
                    for &(c, eps) in &level[r * m + k] {
                        let mut coef = vec![0.0; m];
                        coef[r] = c * b.entry(0, k, 0) / eps;
                        push_power(&mut q_powers, coef, eps + 1.0);
                    }
                }
            }
        }
        // forcing powers: for constant B the complement integral is the
        // exact power B (t-a)^(1-alpha)/Gamma(2-alpha)
    }

    // integrand g = A q + C with its power part split off
    let a0 = a.sample(0).clone();
    let mut g_powers: PowerList = Vec::new();
    for (coef, eps) in &q_powers {
        let lifted = a0.matmul(&Matrix::col_vec(coef))?;
        push_power(&mut g_powers, (0..m).map(|r| lifted[(r, 0)]).collect(), *eps);
    }
    if const_b {
        for r in 0..m {
            let al = alpha.get(r);
            let mut coef = vec![0.0; m];
            coef[r] = b.entry(0, r, 0) / gamma(2.0 - al)?;
            push_power(&mut g_powers, coef, 2.0 - al);
        }
    }
    let g_samples: Vec<Matrix> = (0..n)
        .map(|i| {
            if i == 0 && which == MixedKind::Q1 {
                // the power list captures the unbounded part exactly
                return Matrix::zeros(m, 1);
            }
            let d = nodes[i] - grid.a();
            let qv = q.value(i);
            let gv = a.sample(i).matmul(&qv).expect("square").add(c_fn.sample(i)).expect("shape");
            gv.sub(&eval_powers(&g_powers, m, d)).expect("shape")
        })
        .collect();
    let g_rest = GridFunction::new(grid.clone(), g_samples)?;
    let orders = Matrix::col_vec(alpha.values());
    let w_rest = frac_integral_left(&g_rest, &orders, FirstInterval::Interpolate)?;

    let mut worst = 0.0f64;
    for i in 1..n {
        let d = nodes[i] - grid.a();
        // exact kernel lift of the power part
        let lifted = Matrix::from_fn(m, 1, |r, _| {
            let al = alpha.get(r);
            g_powers
                .iter()
                .filter(|(cs, _)| cs[r] != 0.0)
                .map(|(cs, eps)| {
                    cs[r] * (gamma(*eps).unwrap() / gamma(eps + al).unwrap())
                        * pow0(d, eps + al - 1.0)
                })
                .sum()
        });
        let rhs_data = Matrix::from_fn(m, 1, |r, _| match which {
            MixedKind::Q1 => {
                let al = alpha.get(r);
                q_a[r] * pow0(d, al - 1.0) / gamma(al).unwrap()
            }
            MixedKind::Q2 => q_a[r],
        });
        let rhs = rhs_data.add(&lifted)?.add(w_rest.sample(i))?;
        let lhs = q.value(i);
        worst = worst.max(lhs.sub(&rhs)?.max_abs());
    }
    Ok(worst)
}

fn right_column(
    a: &GridFunction,
    order: &MatrixOrder,
    kind: TableauKind,
    i: usize,
    plan: &[LevelTerms],
    opts: &TableauOptions,
) -> Result<(Vec<f64>, Column)> {
    let grid = a.grid();
    let t = grid.node(i);
    let rho: Vec<f64> = (0..=i).map(|l| t - grid.node(i - l)).collect();
    let a_vals: Vec<Matrix> = (0..=i).map(|l| a.sample(i - l).transpose()).collect();
    let col = solve_column(&rho, a_vals, order, kind, plan, opts, i)?;
    Ok((rho, col))
}

fn duality_scan(
    a: &GridFunction,
    order: &MatrixOrder,
    kind: TableauKind,
    opts: &TableauOptions,
) -> Result<f64> {
    let left = build_tableau(a, order, kind, opts)?;
    let grid = a.grid();
    let n = grid.len();
    // right columns lift the transposed coefficient, so their majorants
    // are the transposed ones
    let (a0_maj, a1_maj, affine) = expansion_profile(a);
    let plan = expansion_plan(
        order,
        kind,
        &a0_maj.transpose(),
        &a1_maj.transpose(),
        grid.b() - grid.a(),
        affine,
    )?;
    let m = order.dim();
    let mut worst = 0.0f64;
    for i in 1..n {
        let (rho, col) = right_column(a, order, kind, i, &plan, opts)?;
        for j in 0..i {
            let l = i - j;
            let t_block = col.block(m, rho[l], l).transpose();
            let z_block = left.block(i, j)?;
            worst = worst.max(t_block.sub(&z_block)?.max_abs());
        }
        if kind == TableauKind::Caputo {
            // diagonal: right solve at rho = 0 must reproduce Id exactly
            let t0 = col.block(m, 0.0, 0).transpose();
            worst = worst.max(t0.sub(&Matrix::identity(m))?.max_abs());
        }
    }
    Ok(worst)
}

/// Max block discrepancy between the kernel-weighted left tableau and the
/// independently solved right-sided transition family, over all shared
/// node pairs. The right problem is reflected onto the left machinery:
/// with rho = t - s the transposed unknown satisfies the left column
/// equation with coefficient A(t - rho) transposed.
pub fn duality_residual_rl(
    a: &GridFunction,
    alpha: &VectorOrder,
    opts: &TableauOptions,
) -> Result<f64> {
    let order = MatrixOrder::row_constant(alpha);
    duality_scan(a, &order, TableauKind::Rl, opts)
}

/// Same two-sided comparison for the identity-data family; only constant
/// coefficients are accepted (the identity fails for time-varying ones).
pub fn duality_residual_caputo(
    a_const: &Matrix,
    alpha: &VectorOrder,
    grid: &Arc<TimeGrid>,
    opts: &TableauOptions,
) -> Result<f64> {
    if !a_const.is_square() || a_const.rows() != alpha.len() {
        return Err(FracError::Dimension("coefficient must be m x m".into()));
    }
    let a = GridFunction::constant(grid.clone(), a_const.clone());
    let order = MatrixOrder::row_constant(alpha);
    duality_scan(&a, &order, TableauKind::Caputo, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ml_scalar, MLParams};

    fn scalar_order(alpha: f64) -> (VectorOrder, MatrixOrder) {
        let v = VectorOrder::new(vec![alpha]).unwrap();
        let m = MatrixOrder::row_constant(&v);
        (v, m)
    }

    #[test]
    fn zero_coefficient_is_pure_kernel() {
        let grid = TimeGrid::graded(0.0, 1.0, 17, 2.0).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let a = GridFunction::constant(grid.clone(), Matrix::zeros(2, 2));
        let tab = transition_rl(&a, &order, &TableauOptions::default()).unwrap();
        for j in 0..grid.len() {
            for i in (j + 1)..grid.len() {
                let d = grid.node(i) - grid.node(j);
                let z = tab.block(i, j).unwrap();
                for r in 0..2 {
                    let al = v.get(r);
                    let expect = d.powf(al - 1.0) / gamma(al).unwrap();
                    assert!((z[(r, r)] - expect).abs() < 1e-13 * expect.abs().max(1.0));
                }
                assert_eq!(z[(0, 1)], 0.0);
                assert_eq!(z[(1, 0)], 0.0);
                assert!(tab.remainder(i, j).max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn caputo_zero_coefficient_is_identity() {
        let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
        let (_, order) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::zeros(1, 1));
        let tab = transition_caputo(&a, &order, &TableauOptions::default()).unwrap();
        for j in 0..grid.len() {
            for i in j..grid.len() {
                let z = tab.block(i, j).unwrap();
                assert!((z[(0, 0)] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn caputo_diagonal_blocks_are_identity_exactly() {
        let grid = TimeGrid::graded(0.0, 1.0, 17, 2.0).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let a = GridFunction::from_fn(grid.clone(), 2, 2, |t| {
            Matrix::from_rows(&[&[0.5, t], &[-0.3, 0.2]])
        })
        .unwrap();
        let tab = transition_caputo(&a, &order, &TableauOptions::default()).unwrap();
        for j in 0..grid.len() {
            let z = tab.block(j, j).unwrap();
            assert!(z.sub(&Matrix::identity(2)).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn rl_diagonal_blocks_are_rejected() {
        let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
        let (_, order) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let tab = transition_rl(&a, &order, &TableauOptions::default()).unwrap();
        assert!(tab.block(3, 3).is_err());
        assert!(tab.block(2, 5).is_err());
    }

    #[test]
    fn leading_amplitude_is_inverse_gamma_diagonal() {
        let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let a = GridFunction::constant(grid.clone(), Matrix::ones(2, 2));
        let tab = transition_rl(&a, &order, &TableauOptions::default()).unwrap();
        for j in 0..grid.len() {
            let amp = tab.leading_amplitude(j);
            for r in 0..2 {
                assert!((amp[(r, r)] - 1.0 / gamma(v.get(r)).unwrap()).abs() < 1e-15);
            }
            assert_eq!(amp[(0, 1)], 0.0);
        }
    }

    #[test]
    fn scalar_constant_coefficient_closed_forms() {
        let grid = TimeGrid::graded(0.0, 1.0, 65, 3.0).unwrap();
        let (_, order) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let opts = TableauOptions::default();
        let ctab = transition_caputo(&a, &order, &opts).unwrap();
        let ztab = transition_rl(&a, &order, &opts).unwrap();
        let p1 = MLParams::new(0.5, 1.0).unwrap();
        let paa = MLParams::new(0.5, 0.5).unwrap();
        for i in 1..grid.len() {
            let t = grid.node(i);
            let cexp = ml_scalar(p1, t.sqrt()).unwrap();
            let cgot = ctab.block(i, 0).unwrap()[(0, 0)];
            assert!((cgot - cexp).abs() < 1e-8 * cexp, "node {i}: {cgot} vs {cexp}");
            let zexp = t.powf(-0.5) * ml_scalar(paa, t.sqrt()).unwrap();
            let zgot = ztab.block(i, 0).unwrap()[(0, 0)];
            assert!((zgot - zexp).abs() < 1e-8 * zexp, "node {i}: {zgot} vs {zexp}");
        }
    }

    /// scaling-and-squaring exponential, test-only oracle.
    fn expm_oracle(m: &Matrix) -> Matrix {
        let mut s = 0u32;
        let mut norm = m.norm_inf();
        while norm > 0.25 {
            norm /= 2.0;
            s += 1;
        }
        let msc = m.scale(0.5f64.powi(s as i32));
        let n = m.rows();
        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..30 {
            term = term.matmul(&msc).unwrap().scale(1.0 / k as f64);
            sum = sum.add(&term).unwrap();
        }
        for _ in 0..s {
            sum = sum.matmul(&sum).unwrap();
        }
        sum
    }

    #[test]
    fn classical_limit_matches_matrix_exponential() {
        let grid = TimeGrid::uniform(0.0, 1.0, 33).unwrap();
        let v = VectorOrder::new(vec![1.0, 1.0]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let a0 = Matrix::from_rows(&[&[0.3, -0.6], &[0.4, 0.1]]);
        let a = GridFunction::constant(grid.clone(), a0.clone());
        let tab = transition_rl(&a, &order, &TableauOptions::default()).unwrap();
        for j in 0..grid.len() {
            for i in (j + 1)..grid.len() {
                let d = grid.node(i) - grid.node(j);
                let e = expm_oracle(&a0.scale(d));
                let z = tab.block(i, j).unwrap();
                assert!(z.sub(&e).unwrap().max_abs() < 1e-9, "({i},{j})");
            }
        }
        // flow property holds at order one
        let z31 = tab.block(24, 8).unwrap();
        let z32 = tab.block(24, 16).unwrap();
        let z21 = tab.block(16, 8).unwrap();
        let prod = z32.matmul(&z21).unwrap();
        assert!(z31.sub(&prod).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn column_defects_stay_small() {
        let grid = TimeGrid::graded(0.0, 1.0, 33, 2.0).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let a = GridFunction::from_fn(grid.clone(), 2, 2, |t| {
            Matrix::from_rows(&[&[0.5, 0.2 * t], &[-0.1, 0.3]])
        })
        .unwrap();
        let opts = TableauOptions::default();
        let tab = transition_rl(&a, &order, &opts).unwrap();
        for j in (0..grid.len()).step_by(8) {
            let d = tab.column_defect(&a, j, &opts).unwrap();
            assert!(d <= 10.0 * opts.tol, "column {j}: defect {d}");
        }
    }

    #[test]
    fn theta_bound_basics() {
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let order = MatrixOrder::row_constant(&v);
        let b0 = theta_bound(0.0, &order, 0.0, 1.0).unwrap();
        let expect = (1.0 / gamma(0.4).unwrap()).max(1.0 / gamma(0.7).unwrap());
        assert_eq!(b0.theta, expect);
        // monotone in M and in b - a
        let b1 = theta_bound(1.0, &order, 0.0, 1.0).unwrap();
        let b2 = theta_bound(2.0, &order, 0.0, 1.0).unwrap();
        let b3 = theta_bound(1.0, &order, 0.0, 2.0).unwrap();
        assert!(b1.theta >= b0.theta && b2.theta >= b1.theta && b3.theta >= b1.theta);
        // span < 1 takes the smallest order, otherwise the largest
        let b_short = theta_bound(1.0, &order, 0.0, 0.5).unwrap();
        assert!((b_short.delta - 0.4).abs() < 1e-15);
        assert!((b1.delta - 0.7).abs() < 1e-15);
        assert!((b3.delta - 0.7).abs() < 1e-15);
    }

    #[test]
    fn theta_scalar_series_oracle() {
        // m=1, alpha=0.5, M=1, b-a=1: sum_p 1/Gamma(0.5(p+1)),
        // frozen from an extended-precision 200-term summation
        let (_, order) = scalar_order(0.5);
        let b = theta_bound(1.0, &order, 0.0, 1.0).unwrap();
        assert!((b.theta - 5.573169664310039753).abs() < 1e-12);
    }

    #[test]
    fn check_theta_pass_and_fail() {
        let grid = TimeGrid::graded(0.0, 1.0, 33, 2.0).unwrap();
        let (_, order) = scalar_order(0.5);
        let a0 = GridFunction::constant(grid.clone(), Matrix::zeros(1, 1));
        let tab = transition_rl(&a0, &order, &TableauOptions::default()).unwrap();
        let bound = theta_bound(0.0, &order, 0.0, 1.0).unwrap();
        let v = check_theta(&tab, &bound).unwrap();
        assert!(v <= 1e-13, "violation {v}");
        // an artificially tiny theta must be flagged
        let tiny = ThetaBound { theta: 1e-6, ..bound };
        assert!(check_theta(&tab, &tiny).unwrap() > 0.0);
        // kind mismatch
        let ctab = transition_caputo(&a0, &order, &TableauOptions::default()).unwrap();
        assert!(check_theta(&ctab, &bound).is_err());
    }

    #[test]
    fn duhamel_zero_coefficient_reduces_to_forced_kernel() {
        use crate::calculus::{frac_integral_left, FirstInterval};
        let grid = TimeGrid::graded(0.0, 1.0, 65, 2.0).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let a = GridFunction::constant(grid.clone(), Matrix::zeros(2, 2));
        let b = GridFunction::from_fn(grid.clone(), 2, 1, |t| {
            Matrix::col_vec(&[1.0, t.sin()])
        })
        .unwrap();
        let q_a = [0.5, -0.2];
        let opts = TableauOptions::default();
        let q = duhamel_rl(&a, &b, &q_a, &v, &opts).unwrap();
        assert_eq!(q.weight()[(0, 0)], 0.5);
        let ib = frac_integral_left(&b, &Matrix::col_vec(v.values()), FirstInterval::Interpolate)
            .unwrap();
        assert!(q.regular().sub(&ib).unwrap().max_abs() < 1e-13);

        let qc = duhamel_caputo(&a, &b, &q_a, &v, &opts).unwrap();
        for i in 0..grid.len() {
            for r in 0..2 {
                let expect = q_a[r] + ib.entry(i, r, 0);
                assert!((qc.entry(i, r, 0) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn duhamel_scalar_constant_series_oracle() {
        // q(t) = q_a t^{a-1}E_{a,a}(A t^a) + B t^a E_{a,a+1}(A t^a)
        let grid = TimeGrid::graded(0.0, 1.0, 65, 3.0).unwrap();
        let (v, _) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[0.8]));
        let b = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.5]));
        let opts = TableauOptions::default();
        let q = duhamel_rl(&a, &b, &[2.0], &v, &opts).unwrap();
        let paa = MLParams::new(0.5, 0.5).unwrap();
        let pa1 = MLParams::new(0.5, 1.5).unwrap();
        for i in 1..grid.len() {
            let t = grid.node(i);
            let z = 0.8 * t.sqrt();
            let exact = 2.0 * t.powf(-0.5) * ml_scalar(paa, z).unwrap()
                + 1.5 * t.sqrt() * ml_scalar(pa1, z).unwrap();
            let got = q.entry(i, 0, 0);
            assert!((got - exact).abs() < 1e-7 * exact.abs().max(1.0), "node {i}: {got} vs {exact}");
        }
        // Caputo variant: q_a E_{a,1} + B t^a E_{a,a+1}
        let qc = duhamel_caputo(&a, &b, &[2.0], &v, &opts).unwrap();
        let p1 = MLParams::new(0.5, 1.0).unwrap();
        for i in 0..grid.len() {
            let t = grid.node(i);
            let z = 0.8 * t.sqrt();
            let exact =
                2.0 * ml_scalar(p1, z).unwrap() + 1.5 * t.sqrt() * ml_scalar(pa1, z).unwrap();
            let got = qc.entry(i, 0, 0);
            assert!((got - exact).abs() < 1e-7 * exact.abs().max(1.0), "node {i}");
        }
    }

    #[test]
    fn duhamel_degenerate_data_gives_zero() {
        let grid = TimeGrid::uniform(0.0, 1.0, 17).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let a = GridFunction::from_fn(grid.clone(), 2, 2, |t| {
            Matrix::from_rows(&[&[t, 1.0], &[0.5, -t]])
        })
        .unwrap();
        let b = GridFunction::constant(grid.clone(), Matrix::zeros(2, 1));
        let opts = TableauOptions::default();
        let q = duhamel_rl(&a, &b, &[0.0, 0.0], &v, &opts).unwrap();
        assert_eq!(q.weight().max_abs(), 0.0);
        assert_eq!(q.regular().max_abs(), 0.0);
        let qc = duhamel_caputo(&a, &b, &[0.0, 0.0], &v, &opts).unwrap();
        assert_eq!(qc.max_abs(), 0.0);
    }

    #[test]
    fn duhamel_rejects_mismatched_data() {
        let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
        let v = VectorOrder::new(vec![0.5, 0.5]).unwrap();
        let a = GridFunction::constant(grid.clone(), Matrix::zeros(2, 2));
        let b = GridFunction::constant(grid.clone(), Matrix::zeros(2, 1));
        assert!(duhamel_rl(&a, &b, &[1.0], &v, &TableauOptions::default()).is_err());
    }

    #[test]
    fn mixed_homogeneous_reduction() {
        // B = 0: q1 is the homogeneous kernel-weighted solution, q2 the
        // homogeneous identity-data solution
        let grid = TimeGrid::graded(0.0, 1.0, 65, 3.0).unwrap();
        let (v, _) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let b = GridFunction::constant(grid.clone(), Matrix::zeros(1, 1));
        let opts = TableauOptions::default();
        let (q1, r1) = mixed_duhamel(&a, &b, &[1.0], &v, MixedKind::Q1, &opts).unwrap();
        let (q2, r2) = mixed_duhamel(&a, &b, &[1.0], &v, MixedKind::Q2, &opts).unwrap();
        assert!(r1 < 1e-8, "q1 residual {r1}");
        assert!(r2 < 1e-8, "q2 residual {r2}");
        let paa = MLParams::new(0.5, 0.5).unwrap();
        let p1 = MLParams::new(0.5, 1.0).unwrap();
        for i in 1..grid.len() {
            let t = grid.node(i);
            let e1 = t.powf(-0.5) * ml_scalar(paa, t.sqrt()).unwrap();
            let e2 = ml_scalar(p1, t.sqrt()).unwrap();
            assert!((q1.entry(i, 0, 0) - e1).abs() < 1e-7 * e1.abs().max(1.0));
            assert!((q2.entry(i, 0, 0) - e2).abs() < 1e-7 * e2);
        }
    }

    #[test]
    fn mixed_residuals_on_constant_scalar_data() {
        let grid = TimeGrid::graded(0.0, 1.0, 129, 4.0).unwrap();
        let (v, _) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let b = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let opts = TableauOptions::default();
        let (_, r1) = mixed_duhamel(&a, &b, &[1.0], &v, MixedKind::Q1, &opts).unwrap();
        let (_, r2) = mixed_duhamel(&a, &b, &[1.0], &v, MixedKind::Q2, &opts).unwrap();
        assert!(r1 <= 1e-6, "q1 residual {r1}");
        assert!(r2 <= 1e-6, "q2 residual {r2}");
    }

    #[test]
    fn duality_zero_coefficient() {
        let grid = TimeGrid::graded(0.0, 1.0, 17, 2.0).unwrap();
        let v = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let a = GridFunction::constant(grid.clone(), Matrix::zeros(2, 2));
        let d = duality_residual_rl(&a, &v, &TableauOptions::default()).unwrap();
        assert!(d <= 1e-13, "discrepancy {d}");
        let dc = duality_residual_caputo(&Matrix::zeros(2, 2), &v, &grid, &TableauOptions::default())
            .unwrap();
        assert!(dc <= 1e-14, "discrepancy {dc}");
    }

    #[test]
    fn duality_scalar_constant() {
        let grid = TimeGrid::graded(0.0, 1.0, 65, 2.0).unwrap();
        let (v, _) = scalar_order(0.5);
        let a = GridFunction::constant(grid.clone(), Matrix::col_vec(&[1.0]));
        let d = duality_residual_rl(&a, &v, &TableauOptions::default()).unwrap();
        assert!(d <= 1e-7, "discrepancy {d}");
        let dc =
            duality_residual_caputo(&Matrix::col_vec(&[1.0]), &v, &grid, &TableauOptions::default())
                .unwrap();
        assert!(dc <= 1e-7, "discrepancy {dc}");
    }

    #[test]
    fn duality_caputo_diagonal_decouples() {
        let grid = TimeGrid::graded(0.0, 1.0, 33, 2.0).unwrap();
        let v2 = VectorOrder::new(vec![0.5, 0.5]).unwrap();
        let a2 = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d2 =
            duality_residual_caputo(&a2, &v2, &grid, &TableauOptions::default()).unwrap();
        let (v1, _) = scalar_order(0.5);
        let d1 = duality_residual_caputo(&Matrix::col_vec(&[1.0]), &v1, &grid,
            &TableauOptions::default())
            .unwrap();
        assert!((d1 - d2).abs() < 1e-14, "{d1} vs {d2}");
    }

    // The identity-data duality needs the coefficient structure to commute
    // with the order mix: a coupled A under distinct orders attaches a
    // different order to the path endpoints on each side, and the gap does
    // not vanish under refinement. Pin the behavior so the domain of
    // validity stays visible.
    #[test]
    fn duality_caputo_coupled_mixed_orders_has_stable_gap() {
        let alpha = VectorOrder::new(vec![0.4, 0.7]).unwrap();
        let a = Matrix::from_rows(&[&[0.3, -0.2], &[0.1, 0.4]]);
        let mut gaps = Vec::new();
        for n in [17usize, 33] {
            let grid = TimeGrid::graded(0.0, 1.0, n, 2.0).unwrap();
            let d = duality_residual_caputo(&a, &alpha, &grid, &TableauOptions::default())
                .unwrap();
            gaps.push(d);
        }
        assert!(gaps[0] > 1e-3, "{:?}", gaps);
        assert!((gaps[0] - gaps[1]).abs() < 1e-4 * gaps[0], "{:?}", gaps);
        // same coupling under a uniform order closes the gap
        let uni = VectorOrder::new(vec![0.6, 0.6]).unwrap();
        let grid = TimeGrid::graded(0.0, 1.0, 33, 2.0).unwrap();
        let d = duality_residual_caputo(&a, &uni, &grid, &TableauOptions::default()).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn l1_in_s_is_finite_and_stable() {
        let (_, order) = scalar_order(0.4);
        let opts = TableauOptions::default();
        let mut prev = None;
        for &n in &[33usize, 65] {
            let grid = TimeGrid::graded(0.0, 1.0, n, 2.0).unwrap();
            let a = GridFunction::scalar_from_fn(grid.clone(), |t| 1.0 + 0.5 * t);
            let tab = transition_rl(&a, &order, &opts).unwrap();
            let v = tab.l1_in_s(grid.len() - 1).unwrap();
            assert!(v.is_finite() && v > 0.0);
            if let Some(p) = prev {
                let ratio: f64 = v / p;
                assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
            }
            prev = Some(v);
        }
    }
}
