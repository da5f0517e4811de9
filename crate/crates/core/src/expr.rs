//! Arithmetic expressions over the variables `t, x, u, v, w, r`.
//!
//! Coefficients, boundary functions and initial data are supplied as short
//! formulas in configuration files. They are parsed once into a tree, then
//! compiled to a postfix program that the solvers evaluate in their inner
//! loops.
//!
//! Precedence, tightest first: `^` (right-associative), unary `-`, `* /`,
//! `+ -`. So `-2^2` is `-(2^2)` and `2^-1` is `2^(-1)`.

use std::fmt;

use thiserror::Error;

/// One of the six names an expression may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
    U,
    V,
    W,
    R,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::T, Var::X, Var::U, Var::V, Var::W, Var::R];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::U => "u",
            Var::V => "v",
            Var::W => "w",
            Var::R => "r",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, a: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => {
                if a <= 0.0 || a.is_nan() {
                    return Err(EvalError::Domain { op: "log", arg: a });
                }
                a.ln()
            }
            Func::Sqrt => {
                if a < 0.0 || a.is_nan() {
                    return Err(EvalError::Domain { op: "sqrt", arg: a });
                }
                a.sqrt()
            }
            Func::Abs => a.abs(),
            Func::Tanh => a.tanh(),
        })
    }
}

/// Syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(n) => write!(f, "{n:?}"),
            Node::Var(v) => f.write_str(v.name()),
            Node::Neg(e) => write!(f, "(-{e})"),
            Node::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Node::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Unexpected token; `expected` describes what the grammar wanted.
    Syntax { expected: &'static str, found: String },
    UnknownIdentifier(String),
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax { expected, found } => {
                write!(f, "syntax error: expected {expected}, found {found}")
            }
            ParseErrorKind::UnknownIdentifier(id) => write!(f, "unknown identifier `{id}`"),
            ParseErrorKind::BadNumber(s) => write!(f, "invalid number literal `{s}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {op} of {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("variable `{}` is not bound", .0.name())]
    Unbound(Var),
}

/// Variable bindings for checked evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    slots: [Option<f64>; 6],
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.slots[var.index()] = Some(value);
        self
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.slots[var.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(u8),
    Neg,
    Bin(BinOp),
    Call(Func),
}

const INLINE_STACK: usize = 32;

/// A parsed and compiled expression. Immutable; cheap to evaluate from many
/// threads at once.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    program: Vec<Op>,
    depth: usize,
    uses: [bool; 6],
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let root = Parser::new(source).parse_all()?;
        Ok(Self::compile(root))
    }

    pub fn constant(value: f64) -> Self {
        Self::compile(Node::Num(value))
    }

    pub fn compile(root: Node) -> Self {
        let mut program = Vec::new();
        let mut uses = [false; 6];
        emit(&root, &mut program, &mut uses);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &program {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Bin(_) => depth -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            max_depth = max_depth.max(depth);
        }
        Expression {
            root,
            program,
            depth: max_depth,
            uses,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn uses(&self, var: Var) -> bool {
        self.uses[var.index()]
    }

    pub fn is_constant(&self) -> bool {
        !self.uses.iter().any(|&u| u)
    }

    /// Checked evaluation: every variable the expression mentions must be
    /// bound in `env`.
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        let mut vars = [0.0; 6];
        for var in Var::ALL {
            if self.uses(var) {
                vars[var.index()] = env.get(var).ok_or(EvalError::Unbound(var))?;
            }
        }
        self.eval_slots(&vars)
    }

    /// Evaluation with all six slots bound, in the order `t, x, u, v, w, r`.
    #[inline]
    pub fn eval_slots(&self, vars: &[f64; 6]) -> Result<f64, EvalError> {
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            run(&self.program, vars, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            run(&self.program, vars, &mut stack)
        }
    }
}

fn emit(node: &Node, out: &mut Vec<Op>, uses: &mut [bool; 6]) {
    match node {
        Node::Num(n) => out.push(Op::Const(*n)),
        Node::Var(v) => {
            uses[v.index()] = true;
            out.push(Op::Load(v.index() as u8));
        }
        Node::Neg(e) => {
            emit(e, out, uses);
            out.push(Op::Neg);
        }
        Node::Binary(op, l, r) => {
            emit(l, out, uses);
            emit(r, out, uses);
            out.push(Op::Bin(*op));
        }
        Node::Call(f, a) => {
            emit(a, out, uses);
            out.push(Op::Call(*f));
        }
    }
}

#[inline]
fn run(program: &[Op], vars: &[f64; 6], stack: &mut [f64]) -> Result<f64, EvalError> {
    let mut sp = 0usize;
    for op in program {
        match *op {
            Op::Const(c) => {
                stack[sp] = c;
                sp += 1;
            }
            Op::Load(i) => {
                stack[sp] = vars[i as usize];
                sp += 1;
            }
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Call(f) => stack[sp - 1] = f.apply(stack[sp - 1])?,
            Op::Bin(b) => {
                let r = stack[sp - 1];
                let l = stack[sp - 2];
                sp -= 1;
                stack[sp - 1] = match b {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::Domain {
                                op: "division",
                                arg: r,
                            });
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        let p = l.powf(r);
                        if p.is_nan() && !l.is_nan() && !r.is_nan() {
                            return Err(EvalError::Domain { op: "pow", arg: l });
                        }
                        p
                    }
                };
            }
        }
    }
    Ok(stack[0])
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
        }
    }

    fn parse_all(mut self) -> Result<Node, ParseError> {
        self.advance()?;
        let node = self.expr()?;
        if self.tok != Tok::End {
            return Err(self.syntax("operator or end of input"));
        }
        Ok(node)
    }

    fn syntax(&self, expected: &'static str) -> ParseError {
        ParseError {
            offset: self.tok_start,
            kind: ParseErrorKind::Syntax {
                expected,
                found: self.tok.describe(),
            },
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let b = bytes[self.pos];
        if b.is_ascii_digit() || b == b'.' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
                self.pos += 1;
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut p = self.pos + 1;
                if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                    p += 1;
                }
                if p < bytes.len() && bytes[p].is_ascii_digit() {
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                    self.pos = p;
                }
            }
            let text = &self.src[start..self.pos];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                kind: ParseErrorKind::BadNumber(text.to_string()),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                });
            }
            self.tok = Tok::Num(value);
        } else if b.is_ascii_alphabetic() || b == b'_' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else {
            // Non-ASCII characters are reported whole.
            let ch = self.src[self.pos..].chars().next().unwrap_or('\0');
            self.pos += ch.len_utf8();
            self.tok = Tok::Sym(ch);
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.tok == Tok::Sym('-') {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Sym('^') {
            self.advance()?;
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(n) => {
                self.advance()?;
                Ok(Node::Num(n))
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                if let Some(var) = Var::from_name(&name) {
                    return Ok(Node::Var(var));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        offset: start,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    });
                };
                if self.tok != Tok::Sym('(') {
                    return Err(self.syntax("`(` after function name"));
                }
                self.advance()?;
                let arg = self.expr()?;
                if self.tok != Tok::Sym(')') {
                    return Err(self.syntax("`)`"));
                }
                self.advance()?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Tok::Sym('(') => {
                self.advance()?;
                let inner = self.expr()?;
                if self.tok != Tok::Sym(')') {
                    return Err(self.syntax("`)`"));
                }
                self.advance()?;
                Ok(inner)
            }
            other => {
                self.tok = other;
                Err(self.syntax("operand"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn eval_at(src: &str, env: Env) -> Result<f64, EvalError> {
        Expression::parse(src).unwrap().eval(&env)
    }

    #[test]
    fn literal() {
        let e = Expression::parse("1").unwrap();
        assert_eq!(e.root(), &Node::Num(1.0));
        assert!(e.is_constant());
    }

    #[test]
    fn precedence_of_sum_and_product() {
        let e = Expression::parse("2 + t*x").unwrap();
        let expected = Node::Binary(
            BinOp::Add,
            Box::new(Node::Num(2.0)),
            Box::new(Node::Binary(
                BinOp::Mul,
                Box::new(Node::Var(Var::T)),
                Box::new(Node::Var(Var::X)),
            )),
        );
        assert_eq!(e.root(), &expected);
        let env = Env::new().with(Var::T, 3.0).with(Var::X, 4.0);
        assert_eq!(e.eval(&env).unwrap(), 14.0);
    }

    #[test]
    fn incomplete_input_reports_offset() {
        let err = Expression::parse("u +").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(matches!(
            err.kind,
            ParseErrorKind::Syntax { expected: "operand", .. }
        ));
    }

    #[test]
    fn unknown_identifier() {
        let err = Expression::parse("2*y").unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert!(Expression::parse("pi").is_err());
        assert!(Expression::parse("sin x").is_err());
        assert!(Expression::parse("(1").is_err());
        assert!(Expression::parse("1 2").is_err());
        assert!(Expression::parse("").is_err());
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        assert_eq!(eval_at("-2^2", Env::new()).unwrap(), -4.0);
        assert_eq!(eval_at("2^3^2", Env::new()).unwrap(), 512.0);
        assert_eq!(eval_at("2^-1", Env::new()).unwrap(), 0.5);
        assert_eq!(eval_at("8/2/2", Env::new()).unwrap(), 2.0);
        assert_eq!(eval_at("1-2-3", Env::new()).unwrap(), -4.0);
        assert_eq!(eval_at("1.5e2 + 2E-1", Env::new()).unwrap(), 150.2);
    }

    #[test]
    fn functions() {
        assert_eq!(eval_at("sin(x)", Env::new().with(Var::X, 0.0)).unwrap(), 0.0);
        let v = eval_at("2 + 0.5*sin(t)", Env::new().with(Var::T, PI / 2.0)).unwrap();
        assert_eq!(v, 2.5);
        let v = eval_at("exp(log(3)) + sqrt(16) + abs(-1) + tanh(0) + cos(0)", Env::new()).unwrap();
        assert!((v - 9.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let env = Env::new().with(Var::X, 0.0);
        assert!(matches!(eval_at("1/x", env), Err(EvalError::Domain { op: "division", .. })));
        assert!(matches!(eval_at("log(x)", env), Err(EvalError::Domain { op: "log", .. })));
        assert!(matches!(eval_at("sqrt(x-1)", env), Err(EvalError::Domain { op: "sqrt", .. })));
        assert!(matches!(eval_at("(x-1)^0.5", env), Err(EvalError::Domain { op: "pow", .. })));
    }

    #[test]
    fn unbound_variable() {
        let err = eval_at("u + 1", Env::new().with(Var::X, 1.0)).unwrap_err();
        assert_eq!(err, EvalError::Unbound(Var::U));
    }

    #[test]
    fn deep_expressions_fall_back_to_heap_stack() {
        let src = (0..40).map(|_| "(1+").collect::<String>() + "1" + &")".repeat(40);
        let deep_right: String = (0..40).fold("x".to_string(), |acc, _| format!("1+({acc})"));
        assert_eq!(eval_at(&src, Env::new()).unwrap(), 41.0);
        assert_eq!(eval_at(&deep_right, Env::new().with(Var::X, 0.0)).unwrap(), 40.0);
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Node::Num),
            prop::sample::select(Var::ALL.to_vec()).prop_map(Node::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Node::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Node::Binary(op, Box::new(l), Box::new(r))),
                (prop::sample::select(Func::ALL.to_vec()), inner)
                    .prop_map(|(f, a)| Node::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(node in arb_node()) {
            let printed = node.to_string();
            let reparsed = Expression::parse(&printed).unwrap();
            prop_assert_eq!(reparsed.root(), &node);
        }

        #[test]
        fn binary_ops_match_host_arithmetic(a in -1e3f64..1e3, b in 0.5f64..1e3) {
            let env = Env::new().with(Var::U, a).with(Var::V, b);
            prop_assert_eq!(eval_at("u + v", env).unwrap(), a + b);
            prop_assert_eq!(eval_at("u - v", env).unwrap(), a - b);
            prop_assert_eq!(eval_at("u * v", env).unwrap(), a * b);
            prop_assert_eq!(eval_at("u / v", env).unwrap(), a / b);
            prop_assert_eq!(eval_at("v ^ 1.5", env).unwrap(), b.powf(1.5));
        }
    }
}
