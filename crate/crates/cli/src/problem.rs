//! Problem files: a flat, line-oriented `key = value` format with bracketed
//! section headers. Sections are `[problem]`, `[dynamics]`, `[solver]` and
//! `[domain]`; see the repository README for the full key list.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::expr::{is_time_only, parse_expr, ExprAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Rl,
    Caputo,
}

#[derive(Debug, Clone)]
pub enum Dynamics {
    /// m right-hand sides in (x1..xm, t)
    Nonlinear(Vec<ExprAst>),
    /// row-major m*m coefficient entries plus m forcing entries, all in t only
    Linear { a: Vec<ExprAst>, b: Vec<ExprAst> },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub m: usize,
    pub alpha: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub qa: Vec<f64>,
    pub dynamics: Dynamics,
    pub n: usize,
    pub grading: f64,
    pub tol: f64,
    pub max_iter: u64,
    pub lipschitz: Option<f64>,
    pub ball_radius: Option<f64>,
}

#[derive(Debug)]
pub struct LoadError(pub String);

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for LoadError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, LoadError> {
    Err(LoadError(msg.into()))
}

struct Raw {
    entries: HashMap<(String, String), (String, usize)>,
}

impl Raw {
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v)
    }

    fn require(&mut self, section: &str, key: &str) -> Result<String, LoadError> {
        self.take(section, key)
            .ok_or_else(|| LoadError(format!("missing key '{key}' in [{section}]")))
    }
}

fn parse_raw(text: &str) -> Result<Raw, LoadError> {
    let mut entries = HashMap::new();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return fail(format!("line {line_no}: unterminated section header"));
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return fail(format!("line {line_no}: expected 'key = value'"));
        };
        if section.is_empty() {
            return fail(format!("line {line_no}: key before any section header"));
        }
        let key = key.trim().to_string();
        let prev = entries.insert(
            (section.clone(), key.clone()),
            (value.trim().to_string(), line_no),
        );
        if prev.is_some() {
            return fail(format!("line {line_no}: duplicate key '{key}'"));
        }
    }
    Ok(Raw { entries })
}

fn parse_f64(field: &str, s: &str) -> Result<f64, LoadError> {
    s.parse::<f64>()
        .map_err(|_| LoadError(format!("{field}: not a number: '{s}'")))
}

fn parse_list(field: &str, s: &str, m: usize) -> Result<Vec<f64>, LoadError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|p| parse_f64(field, p.trim())).collect();
    let vals = vals?;
    if vals.len() != m {
        return fail(format!("{field}: expected {m} comma-separated values, got {}", vals.len()));
    }
    Ok(vals)
}

fn parse_dynamics(raw: &mut Raw, m: usize) -> Result<Dynamics, LoadError> {
    let has_f = raw.entries.keys().any(|(s, k)| s == "dynamics" && k.starts_with('f'));
    if has_f {
        let mut fs = Vec::with_capacity(m);
        for i in 1..=m {
            let key = format!("f{i}");
            let src = raw.require("dynamics", &key)?;
            let ast = parse_expr(&src, m).map_err(|e| LoadError(format!("{key}: {e}")))?;
            fs.push(ast);
        }
        return Ok(Dynamics::Nonlinear(fs));
    }
    let mut a = Vec::with_capacity(m * m);
    for i in 1..=m {
        for j in 1..=m {
            let key = format!("A{i}{j}");
            let src = raw.require("dynamics", &key)?;
            let ast = parse_expr(&src, m).map_err(|e| LoadError(format!("{key}: {e}")))?;
            if !is_time_only(&ast) {
                return fail(format!("{key}: coefficient entries may depend on t only"));
            }
            a.push(ast);
        }
    }
    let mut b = Vec::with_capacity(m);
    for i in 1..=m {
        let key = format!("B{i}");
        let src = raw.require("dynamics", &key)?;
        let ast = parse_expr(&src, m).map_err(|e| LoadError(format!("{key}: {e}")))?;
        if !is_time_only(&ast) {
            return fail(format!("{key}: forcing entries may depend on t only"));
        }
        b.push(ast);
    }
    Ok(Dynamics::Linear { a, b })
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, LoadError> {
    let mut raw = parse_raw(text)?;

    let kind = match raw.require("problem", "kind")?.as_str() {
        "rl" => ProblemKind::Rl,
        "caputo" => ProblemKind::Caputo,
        other => return fail(format!("kind: expected 'rl' or 'caputo', got '{other}'")),
    };
    let m: usize = raw
        .require("problem", "m")?
        .parse()
        .map_err(|_| LoadError("m: not a positive integer".into()))?;
    if m == 0 {
        return fail("m: must be at least 1");
    }
    let alpha = parse_list("alpha", &raw.require("problem", "alpha")?, m)?;
    for &al in &alpha {
        if !(al > 0.0 && al <= 1.0) {
            return fail(format!("alpha out of (0,1]: {al}"));
        }
    }
    let a = parse_f64("a", &raw.require("problem", "a")?)?;
    let b = parse_f64("b", &raw.require("problem", "b")?)?;
    if !(b > a) {
        return fail(format!("b: must exceed a (got a={a}, b={b})"));
    }
    let qa = parse_list("qa", &raw.require("problem", "qa")?, m)?;

    let dynamics = parse_dynamics(&mut raw, m)?;

    let n = match raw.take("solver", "n") {
        Some(s) => s.parse().map_err(|_| LoadError("n: not a positive integer".into()))?,
        None => 129,
    };
    if n < 2 {
        return fail("n: need at least 2 grid nodes");
    }
    let grading = match raw.take("solver", "grading") {
        Some(s) => parse_f64("grading", &s)?,
        None => 1.0,
    };
    if !(grading >= 1.0) {
        return fail(format!("grading: must be at least 1, got {grading}"));
    }
    let tol = match raw.take("solver", "tol") {
        Some(s) => parse_f64("tol", &s)?,
        None => 1e-10,
    };
    if !(tol > 0.0) {
        return fail("tol: must be positive");
    }
    let max_iter = match raw.take("solver", "max_iter") {
        Some(s) => s.parse().map_err(|_| LoadError("max_iter: not a positive integer".into()))?,
        None => 200,
    };
    if max_iter == 0 {
        return fail("max_iter: must be at least 1");
    }
    let lipschitz = match raw.take("solver", "lipschitz") {
        Some(s) => {
            let l = parse_f64("lipschitz", &s)?;
            if !(l >= 0.0) {
                return fail("lipschitz: must be nonnegative");
            }
            Some(l)
        }
        None => None,
    };
    let ball_radius = match raw.take("domain", "ball_radius") {
        Some(s) => {
            let r = parse_f64("ball_radius", &s)?;
            if !(r > 0.0) {
                return fail("ball_radius: must be positive");
            }
            Some(r)
        }
        None => None,
    };

    if let Some(((section, key), (_, line_no))) = raw.entries.drain().next() {
        return fail(format!("line {line_no}: unknown key '{key}' in [{section}]"));
    }

    Ok(ProblemSpec {
        kind,
        m,
        alpha,
        a,
        b,
        qa,
        dynamics,
        n,
        grading,
        tol,
        max_iter,
        lipschitz,
        ball_radius,
    })
}
