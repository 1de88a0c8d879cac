//! A small expression language for dynamics: variables t and x1..xm,
//! the usual arithmetic, and a handful of unary functions. Trees are
//! interpreted directly; evaluation cost is negligible next to the
//! quadrature work in the library.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Time,
    /// zero-based state index, printed as x{k+1}
    State(usize),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    /// power with a constant exponent
    Pow(Box<ExprAst>, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ExprError {}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    m: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { pos, msg: msg.into() })
    }

    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => BinOp::Add,
                b'-' => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => BinOp::Mul,
                b'/' => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg = if self.src.get(self.pos) == Some(&b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let n = self.number()?;
            return Ok(ExprAst::Pow(Box::new(base), if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprAst, ExprError> {
        match self.peek() {
            None => self.err(self.pos, "unexpected end of expression"),
            Some(b'-') => {
                self.pos += 1;
                let inner = self.base()?;
                Ok(ExprAst::Unary(UnaryOp::Neg, Box::new(inner)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err(self.pos, "expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number().map(ExprAst::Const),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(self.pos, format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .map_or(false, |&c| c.is_ascii_digit() || c == b'.')
        {
            self.pos += 1;
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).map_or(false, |c| c.is_ascii_digit()) {
                while self.src.get(self.pos).map_or(false, |c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        if self.pos == start {
            return self.err(start, "expected a number");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or(ExprError { pos: start, msg: "malformed number".into() })
    }

    fn ident(&mut self) -> Result<ExprAst, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .map_or(false, |&c| c.is_ascii_alphanumeric())
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let func = match name {
            "t" => return Ok(ExprAst::Time),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            _ => None,
        };
        if let Some(op) = func {
            if self.peek() != Some(b'(') {
                return self.err(self.pos, format!("expected '(' after {name}"));
            }
            self.pos += 1;
            let inner = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected ')'");
            }
            self.pos += 1;
            return Ok(ExprAst::Unary(op, Box::new(inner)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 && k <= self.m {
                    return Ok(ExprAst::State(k - 1));
                }
                return self.err(start, format!("unknown identifier '{name}' (dimension is {})", self.m));
            }
        }
        self.err(start, format!("unknown identifier '{name}'"))
    }
}

pub fn parse_expr(src: &str, m: usize) -> Result<ExprAst, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, m };
    let ast = p.expr()?;
    if p.peek().is_some() {
        return Err(ExprError { pos: p.pos, msg: "trailing input".into() });
    }
    Ok(ast)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError(pub String);

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "evaluation error: {}", self.0)
    }
}

impl std::error::Error for EvalError {}

pub fn eval_expr(ast: &ExprAst, x: &[f64], t: f64) -> Result<f64, EvalError> {
    let v = match ast {
        ExprAst::Const(c) => *c,
        ExprAst::Time => t,
        ExprAst::State(k) => *x
            .get(*k)
            .ok_or_else(|| EvalError(format!("state x{} out of range", k + 1)))?,
        ExprAst::Unary(op, e) => {
            let v = eval_expr(e, x, t)?;
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
                UnaryOp::Abs => v.abs(),
            }
        }
        ExprAst::Binary(op, l, r) => {
            let a = eval_expr(l, x, t)?;
            let b = eval_expr(r, x, t)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError("division by zero".into()));
                    }
                    a / b
                }
            }
        }
        ExprAst::Pow(e, n) => {
            let v = eval_expr(e, x, t)?;
            let r = v.powf(*n);
            if !r.is_finite() {
                return Err(EvalError(format!("{v}^{n} is not finite")));
            }
            r
        }
    };
    Ok(v)
}

/// True when no state variable occurs anywhere in the tree.
pub fn is_time_only(ast: &ExprAst) -> bool {
    match ast {
        ExprAst::Const(_) | ExprAst::Time => true,
        ExprAst::State(_) => false,
        ExprAst::Unary(_, e) => is_time_only(e),
        ExprAst::Binary(_, l, r) => is_time_only(l) && is_time_only(r),
        ExprAst::Pow(e, _) => is_time_only(e),
    }
}

impl fmt::Display for ExprAst {
    // fully parenthesized, so printing then reparsing returns the same tree
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Const(c) => write!(f, "{c}"),
            ExprAst::Time => write!(f, "t"),
            ExprAst::State(k) => write!(f, "x{}", k + 1),
            ExprAst::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            ExprAst::Unary(op, e) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({e})")
            }
            ExprAst::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({l} {sym} {r})")
            }
            ExprAst::Pow(e, n) => write!(f, "({e})^{n}"),
        }
    }
}
