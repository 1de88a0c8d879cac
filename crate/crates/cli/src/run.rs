//! Command dispatch: turn a loaded problem into library calls and CSV files.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use fractus_core::{
    check_theta, duality_residual_caputo, duality_residual_rl, duhamel_caputo, duhamel_rl,
    picard_caputo, picard_rl, theta_bound, transition_caputo, transition_rl, Dynamic, FracError,
    GridFunction, Matrix, MatrixOrder, SingularGridFunction, SolveOptions, SolveReport,
    TableauKind, TableauOptions, TimeGrid, VectorOrder,
};

use crate::expr::eval_expr;
use crate::problem::{Dynamics, ProblemKind, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliCommand {
    Solve,
    Transition,
    Duhamel,
    Duality,
    Theta,
}

pub struct CliFailure {
    pub code: i32,
    pub msg: String,
}

fn usage(msg: impl Into<String>) -> CliFailure {
    CliFailure { code: 1, msg: msg.into() }
}

fn from_lib(e: FracError) -> CliFailure {
    let code = match e {
        FracError::NonConvergence { .. }
        | FracError::ColumnNonConvergence { .. }
        | FracError::Convergence { .. }
        | FracError::DomainExit { .. } => 2,
        _ => 1,
    };
    CliFailure { code, msg: e.to_string() }
}

/// 17 significant digits, enough to reproduce any f64 exactly.
fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(out: &Path, name: &str, body: &str) -> Result<(), CliFailure> {
    std::fs::create_dir_all(out)
        .map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    std::fs::write(&path, body)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn order_vector(spec: &ProblemSpec) -> Result<VectorOrder, CliFailure> {
    VectorOrder::new(spec.alpha.clone()).map_err(from_lib)
}

fn build_grid(spec: &ProblemSpec) -> Result<Arc<TimeGrid>, CliFailure> {
    TimeGrid::graded(spec.a, spec.b, spec.n, spec.grading).map_err(from_lib)
}

fn linear_parts(
    spec: &ProblemSpec,
    grid: &Arc<TimeGrid>,
    command: &str,
) -> Result<(GridFunction, GridFunction), CliFailure> {
    let Dynamics::Linear { a, b } = &spec.dynamics else {
        return Err(usage(format!("{command} requires linear dynamics")));
    };
    let m = spec.m;
    let eval_at = |exprs: &[crate::expr::ExprAst], rows: usize, cols: usize| {
        let mut samples = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let t = grid.node(k);
            let mut vals = Vec::with_capacity(exprs.len());
            for e in exprs {
                vals.push(eval_expr(e, &[], t).map_err(|e| usage(e.to_string()))?);
            }
            samples.push(Matrix::from_fn(rows, cols, |i, j| vals[i * cols + j]));
        }
        GridFunction::new(grid.clone(), samples).map_err(from_lib)
    };
    let a_fn = eval_at(a, m, m)?;
    let b_fn = eval_at(b, m, 1)?;
    Ok((a_fn, b_fn))
}

fn make_dynamic(spec: &ProblemSpec) -> Result<Dynamic, CliFailure> {
    let m = spec.m;
    // reject obviously bad dynamics up front rather than mid-iteration
    let probe = |exprs: &Vec<crate::expr::ExprAst>| -> Result<(), CliFailure> {
        for e in exprs {
            eval_expr(e, &spec.qa, spec.a).map_err(|e| usage(e.to_string()))?;
        }
        Ok(())
    };
    let mut dyn_f = match &spec.dynamics {
        Dynamics::Nonlinear(fs) => {
            probe(fs)?;
            let fs = fs.clone();
            Dynamic::new(m, move |x, t| {
                fs.iter()
                    .map(|e| eval_expr(e, x, t).unwrap_or(f64::NAN))
                    .collect()
            })
        }
        Dynamics::Linear { a, b } => {
            probe(a)?;
            probe(b)?;
            let a = a.clone();
            let b = b.clone();
            Dynamic::new(m, move |x, t| {
                (0..m)
                    .map(|i| {
                        let mut acc = eval_expr(&b[i], x, t).unwrap_or(f64::NAN);
                        for j in 0..m {
                            acc += eval_expr(&a[i * m + j], x, t).unwrap_or(f64::NAN) * x[j];
                        }
                        acc
                    })
                    .collect()
            })
        }
    };
    if let Some(l) = spec.lipschitz {
        dyn_f = dyn_f.with_lipschitz(l);
    }
    if let Some(r) = spec.ball_radius {
        dyn_f = dyn_f.with_domain(move |x| {
            x.iter().map(|v| v * v).sum::<f64>().sqrt() <= r
        });
    }
    Ok(dyn_f)
}

fn regular_csv(q: &GridFunction) -> String {
    let grid = q.grid();
    let m = q.rows();
    let mut body = String::from("t");
    for r in 1..=m {
        write!(body, ",q{r}").unwrap();
    }
    body.push('\n');
    for k in 0..grid.len() {
        body.push_str(&fmt_num(grid.node(k)));
        for r in 0..m {
            body.push(',');
            body.push_str(&fmt_num(q.entry(k, r, 0)));
        }
        body.push('\n');
    }
    body
}

fn singular_csv(q: &SingularGridFunction) -> String {
    let reg = q.regular();
    let grid = reg.grid();
    let m = reg.rows();
    let mut body = String::from("t");
    for r in 1..=m {
        write!(body, ",q{r}").unwrap();
    }
    for r in 1..=m {
        write!(body, ",w{r}").unwrap();
    }
    body.push('\n');
    for k in 0..grid.len() {
        body.push_str(&fmt_num(grid.node(k)));
        for r in 0..m {
            body.push(',');
            body.push_str(&fmt_num(reg.entry(k, r, 0)));
        }
        for r in 0..m {
            body.push(',');
            body.push_str(&fmt_num(q.weight()[(r, 0)]));
        }
        body.push('\n');
    }
    body
}

fn report_line(what: &str, rep: &SolveReport) -> String {
    format!(
        "{what}: converged in {} iterations, residual {:e}",
        rep.iterations, rep.final_residual
    )
}

fn cmd_solve(spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    let grid = build_grid(spec)?;
    let alpha = order_vector(spec)?;
    let f = make_dynamic(spec)?;
    let opts = SolveOptions { tol: spec.tol, max_iter: spec.max_iter as usize };
    match spec.kind {
        ProblemKind::Caputo => {
            let (q, rep) = picard_caputo(&f, &alpha, &spec.qa, &grid, &opts).map_err(from_lib)?;
            write_file(out, "solution.csv", &regular_csv(&q))?;
            Ok(report_line("solve", &rep))
        }
        ProblemKind::Rl => {
            let (q, rep) = picard_rl(&f, &alpha, &spec.qa, &grid, &opts).map_err(from_lib)?;
            write_file(out, "solution.csv", &singular_csv(&q))?;
            Ok(report_line("solve", &rep))
        }
    }
}

fn tableau_opts(spec: &ProblemSpec) -> TableauOptions {
    TableauOptions { tol: spec.tol, max_iter: spec.max_iter as usize }
}

fn cmd_transition(spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    let grid = build_grid(spec)?;
    let (a_fn, _) = linear_parts(spec, &grid, "transition")?;
    let alpha = order_vector(spec)?;
    let order = MatrixOrder::row_constant(&alpha);
    let opts = tableau_opts(spec);
    let tab = match spec.kind {
        ProblemKind::Rl => transition_rl(&a_fn, &order, &opts).map_err(from_lib)?,
        ProblemKind::Caputo => transition_caputo(&a_fn, &order, &opts).map_err(from_lib)?,
    };
    let m = spec.m;
    let n = grid.len();
    let last = n - 1;
    let mut body = String::from("s");
    for i in 1..=m {
        for j in 1..=m {
            write!(body, ",z{i}{j}").unwrap();
        }
    }
    body.push('\n');
    // last column of the tableau: blocks at the final time against every s
    let j_end = if tab.kind() == TableauKind::Rl { last } else { last + 1 };
    let mut rows = 0usize;
    for j in 0..j_end {
        let z = tab.block(last, j).map_err(from_lib)?;
        body.push_str(&fmt_num(grid.node(j)));
        for i in 0..m {
            for k in 0..m {
                body.push(',');
                body.push_str(&fmt_num(z[(i, k)]));
            }
        }
        body.push('\n');
        rows += 1;
    }
    write_file(out, "transition.csv", &body)?;
    Ok(format!("transition: {rows} blocks at t = {}", grid.node(last)))
}

fn cmd_duhamel(spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    let grid = build_grid(spec)?;
    let (a_fn, b_fn) = linear_parts(spec, &grid, "duhamel")?;
    let alpha = order_vector(spec)?;
    let opts = tableau_opts(spec);
    match spec.kind {
        ProblemKind::Rl => {
            let q = duhamel_rl(&a_fn, &b_fn, &spec.qa, &alpha, &opts).map_err(from_lib)?;
            write_file(out, "solution.csv", &singular_csv(&q))?;
        }
        ProblemKind::Caputo => {
            let q = duhamel_caputo(&a_fn, &b_fn, &spec.qa, &alpha, &opts).map_err(from_lib)?;
            write_file(out, "solution.csv", &regular_csv(&q))?;
        }
    }
    Ok(format!("duhamel: wrote solution.csv ({} rows)", grid.len()))
}

fn cmd_duality(spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    let grid = build_grid(spec)?;
    let (a_fn, _) = linear_parts(spec, &grid, "duality")?;
    let alpha = order_vector(spec)?;
    let opts = tableau_opts(spec);
    let d = match spec.kind {
        ProblemKind::Rl => duality_residual_rl(&a_fn, &alpha, &opts).map_err(from_lib)?,
        ProblemKind::Caputo => {
            let a0 = a_fn.sample(0).clone();
            for k in 1..grid.len() {
                if a_fn.sample(k).sub(&a0).map_err(from_lib)?.max_abs() > 0.0 {
                    return Err(usage(
                        "duality for identity-data dynamics requires a constant coefficient",
                    ));
                }
            }
            duality_residual_caputo(&a0, &alpha, &grid, &opts).map_err(from_lib)?
        }
    };
    write_file(out, "duality.csv", &format!("discrepancy\n{}\n", fmt_num(d)))?;
    Ok(format!("duality: max discrepancy {d:e}"))
}

fn cmd_theta(spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    let grid = build_grid(spec)?;
    let (a_fn, _) = linear_parts(spec, &grid, "theta")?;
    let alpha = order_vector(spec)?;
    let order = MatrixOrder::row_constant(&alpha);
    let m_bound = (0..grid.len())
        .map(|k| a_fn.sample(k).norm_inf())
        .fold(0.0f64, f64::max);
    let bound = theta_bound(m_bound, &order, spec.a, spec.b).map_err(from_lib)?;
    let mut body = String::from("theta,delta,m_bound,terms_used\n");
    writeln!(
        body,
        "{},{},{},{}",
        fmt_num(bound.theta),
        fmt_num(bound.delta),
        fmt_num(bound.m_bound),
        bound.terms_used
    )
    .unwrap();
    write_file(out, "theta.csv", &body)?;
    let mut summary = format!("theta: bound {:e} with exponent {}", bound.theta, bound.delta);
    if spec.kind == ProblemKind::Rl {
        let tab = transition_rl(&a_fn, &order, &tableau_opts(spec)).map_err(from_lib)?;
        let v = check_theta(&tab, &bound).map_err(from_lib)?;
        write!(summary, ", tableau check {v:e}").unwrap();
    }
    Ok(summary)
}

pub fn execute(cmd: CliCommand, spec: &ProblemSpec, out: &Path) -> Result<String, CliFailure> {
    match cmd {
        CliCommand::Solve => cmd_solve(spec, out),
        CliCommand::Transition => cmd_transition(spec, out),
        CliCommand::Duhamel => cmd_duhamel(spec, out),
        CliCommand::Duality => cmd_duality(spec, out),
        CliCommand::Theta => cmd_theta(spec, out),
    }
}

/// Runs a command against a spec, printing the summary or the error.
/// Returns the process exit code: 0 success, 1 usage or spec error,
/// 2 numerical non-convergence.
pub fn run(cmd: CliCommand, spec: &ProblemSpec, out: &Path) -> i32 {
    match execute(cmd, spec, out) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}
