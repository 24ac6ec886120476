//! Arithmetic expressions over phase-space coordinates.
//!
//! Grammar: `+ - * / ^`, parentheses, numeric literals, the functions
//! `sin cos exp ln sqrt tanh`, and the variables `x<i>`, `v<i>`, `p<i>`
//! (1-based). Surface expressions use `u<i>` instead. `^` binds tightest and
//! is right-associative, then unary minus, then `* /`, then `+ -`.

use std::fmt;

use crate::error::{EvalError, ParseError};
use crate::jet::{jet_arithmetic, Dual, Jet2, JetOp, Scalar};
use crate::phase::{PhasePoint, Rep};

pub mod random;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    X,
    V,
    P,
    U,
}

impl VarKind {
    fn letter(self) -> char {
        match self {
            VarKind::X => 'x',
            VarKind::V => 'v',
            VarKind::P => 'p',
            VarKind::U => 'u',
        }
    }
}

/// A variable reference; `index` is 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.letter(), self.index + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Sqrt, Func::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => " * ",
            BinOp::Div => " / ",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn jet_op(self) -> JetOp {
        match self {
            BinOp::Add => JetOp::Add,
            BinOp::Sub => JetOp::Sub,
            BinOp::Mul => JetOp::Mul,
            BinOp::Div => JetOp::Div,
            BinOp::Pow => JetOp::Pow,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

const NEG_PREC: u8 = 3;
const ATOM_PREC: u8 = 5;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Num(c) if c.is_sign_negative() => NEG_PREC,
            Node::Num(_) | Node::Var(_) | Node::Call(..) => ATOM_PREC,
            Node::Neg(_) => NEG_PREC,
            Node::Bin(op, ..) => op.precedence(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Num(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Call(_, a) => 1 + a.depth(),
            Node::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Node::Num(_) => {}
            Node::Var(v) => f(*v),
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(f),
            Node::Bin(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(c) => write!(f, "{c:?}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f)?;
                write!(f, ")")
            }
            // `-c` reads back as a negative literal, so negation of a
            // literal keeps its parentheses
            Node::Neg(a) => {
                write!(f, "-")?;
                let literal = matches!(**a, Node::Num(c) if !c.is_sign_negative());
                a.write_wrapped(f, literal || a.precedence() < NEG_PREC)
            }
            Node::Bin(op, a, b) => {
                let p = op.precedence();
                let (left, right) = match op {
                    BinOp::Pow => (a.precedence() < ATOM_PREC, b.precedence() < NEG_PREC),
                    _ => (a.precedence() < p, b.precedence() <= p),
                };
                a.write_wrapped(f, left)?;
                write!(f, "{}", op.symbol())?;
                b.write_wrapped(f, right)
            }
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, paren: bool) -> fmt::Result {
        if paren {
            write!(f, "(")?;
            self.write(f)?;
            write!(f, ")")
        } else {
            self.write(f)
        }
    }
}

/// Which variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// `x<i>` plus one of `v<i>` or `p<i>`, with `i <= dimension`.
    Phase { dimension: usize },
    /// `u<i>` with `i <= parameters`.
    Surface { parameters: usize },
}

/// A parsed expression together with the variables it may reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Node,
    scope: Scope,
    fiber: Option<Rep>,
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}

/// Parses a phase-space expression for an `n`-dimensional configuration space.
pub fn parse(source: &str, dimension: usize) -> Result<Expression, ParseError> {
    parse_in(source, Scope::Phase { dimension })
}

/// Parses an expression in the given scope.
pub fn parse_in(source: &str, scope: Scope) -> Result<Expression, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0, scope, fiber: None };
    let root = p.expr()?;
    let tok = p.peek();
    if tok.kind != Tok::End {
        return Err(syntax(tok, format!("unexpected {}", tok.kind.describe())));
    }
    Ok(Expression { root, scope, fiber: p.fiber })
}

impl Expression {
    /// Builds an expression from a syntax tree, checking variable bounds.
    pub fn from_node(root: Node, scope: Scope) -> Result<Expression, ParseError> {
        let mut fiber = None;
        let mut err = None;
        root.visit_vars(&mut |v| {
            if err.is_some() {
                return;
            }
            match check_var(v, scope, &mut fiber) {
                Ok(()) => {}
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e(0, 0)),
            None => Ok(Expression { root, scope, fiber }),
        }
    }

    pub fn constant(c: f64, dimension: usize) -> Expression {
        Expression { root: Node::Num(c), scope: Scope::Phase { dimension }, fiber: None }
    }

    pub fn zero(dimension: usize) -> Expression {
        Expression::constant(0.0, dimension)
    }

    /// `a + b` as a new syntax tree.
    ///
    /// # Panics
    /// If the scopes differ or the two sides use different fiber variables.
    pub fn sum(a: &Expression, b: &Expression) -> Expression {
        assert_eq!(a.scope, b.scope, "cannot add expressions from different scopes");
        let fiber = match (a.fiber, b.fiber) {
            (Some(x), Some(y)) => {
                assert_eq!(x, y, "cannot add expressions in different representations");
                Some(x)
            }
            (x, y) => x.or(y),
        };
        let root = Node::Bin(BinOp::Add, Box::new(a.root.clone()), Box::new(b.root.clone()));
        Expression { root, scope: a.scope, fiber }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    /// The fiber representation the expression refers to, if any.
    pub fn fiber(&self) -> Option<Rep> {
        self.fiber
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self.root, Node::Num(c) if c == 0.0)
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    fn dimension(&self) -> usize {
        match self.scope {
            Scope::Phase { dimension } => dimension,
            Scope::Surface { parameters } => parameters,
        }
    }

    fn check_point(&self, point: &PhasePoint) -> Result<(), EvalError> {
        let n = self.dimension();
        if !matches!(self.scope, Scope::Phase { .. }) || point.dim() != n {
            return Err(EvalError::DimensionMismatch { expected: n, found: point.dim() });
        }
        if let Some(rep) = self.fiber {
            if rep != point.rep {
                return Err(EvalError::RepresentationMismatch {
                    expected: rep.letter(),
                    found: point.rep.letter(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates with caller-supplied variable values.
    ///
    /// `zero` fixes the derivative shape used for literals.
    pub fn eval_with<T: Scalar>(
        &self,
        leaf: &dyn Fn(Var) -> T,
        zero: &T,
    ) -> Result<T, EvalError> {
        eval_node(&self.root, leaf, zero)
    }

    /// Plain value at a phase point.
    pub fn eval(&self, point: &PhasePoint) -> Result<f64, EvalError> {
        self.check_point(point)?;
        let n = point.dim();
        self.eval_with(&|v| phase_coord(point, n, v), &0.0)
    }

    /// First-order jet over `(x, fiber)` at a phase point.
    pub fn eval_dual(&self, point: &PhasePoint) -> Result<Dual, EvalError> {
        self.check_point(point)?;
        let n = point.dim();
        let m = 2 * n;
        self.eval_with(
            &|v| Dual::variable(phase_coord(point, n, v), slot(n, v), m),
            &Dual::constant(0.0, m),
        )
    }

    /// Second-order jet over `(x, fiber)` at a phase point.
    pub fn eval_jet(&self, point: &PhasePoint) -> Result<Jet2, EvalError> {
        self.check_point(point)?;
        let n = point.dim();
        let m = 2 * n;
        self.eval_with(
            &|v| Jet2::variable(phase_coord(point, n, v), slot(n, v), m),
            &Jet2::constant(0.0, m),
        )
    }

    /// Evaluates a surface expression at parameter values of any scalar type.
    pub fn eval_params<T: Scalar>(&self, u: &[T]) -> Result<T, EvalError> {
        let Some(first) = u.first() else {
            return Err(EvalError::DimensionMismatch { expected: self.dimension(), found: 0 });
        };
        if u.len() != self.dimension() {
            return Err(EvalError::DimensionMismatch { expected: self.dimension(), found: u.len() });
        }
        let zero = first.constant_like(0.0);
        self.eval_with(&|v| u[v.index].clone(), &zero)
    }
}

fn phase_coord(point: &PhasePoint, n: usize, v: Var) -> f64 {
    match v.kind {
        VarKind::X => point.x[v.index],
        _ => point.fiber[v.index.min(n - 1)],
    }
}

fn slot(n: usize, v: Var) -> usize {
    match v.kind {
        VarKind::X => v.index,
        _ => n + v.index,
    }
}

fn eval_node<T: Scalar>(node: &Node, leaf: &dyn Fn(Var) -> T, zero: &T) -> Result<T, EvalError> {
    Ok(match node {
        Node::Num(c) => zero.constant_like(*c),
        Node::Var(v) => leaf(*v),
        Node::Neg(a) => eval_node(a, leaf, zero)?.neg(),
        Node::Bin(op, a, b) => {
            let a = eval_node(a, leaf, zero)?;
            let b = eval_node(b, leaf, zero)?;
            jet_arithmetic(&a, &b, op.jet_op())?
        }
        Node::Call(func, a) => {
            let a = eval_node(a, leaf, zero)?;
            let x = a.re();
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Tanh => a.tanh(),
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(EvalError::Domain { function: "ln", argument: x });
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 || (x == 0.0 && !a.is_constant()) {
                        return Err(EvalError::Domain { function: "sqrt", argument: x });
                    }
                    a.sqrt()
                }
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(c) => format!("number {c}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: Tok,
    line: usize,
    column: usize,
}

fn syntax(tok: &Token, message: String) -> ParseError {
    ParseError::Syntax { line: tok.line, column: tok.column, message }
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let err = |message: String| ParseError::Syntax { line: start.0, column: start.1, message };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let begin = i;
        let kind = if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| err(format!("malformed number '{text}'")))?;
            if !value.is_finite() {
                return Err(err(format!("number '{text}' is out of range")));
            }
            Tok::Num(value)
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[begin..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(format!("unexpected character '{c}'"))),
            }
        };
        col += i - begin;
        out.push(Token { kind, line: start.0, column: start.1 });
    }
    out.push(Token { kind: Tok::End, line, column: col });
    Ok(out)
}

type VarCheck = Box<dyn Fn(usize, usize) -> ParseError>;

fn check_var(v: Var, scope: Scope, fiber: &mut Option<Rep>) -> Result<(), VarCheck> {
    let name = v.to_string();
    let bound = match (scope, v.kind) {
        (Scope::Phase { dimension }, VarKind::X | VarKind::V | VarKind::P) => dimension,
        (Scope::Surface { parameters }, VarKind::U) => parameters,
        _ => {
            return Err(Box::new(move |line, column| ParseError::Syntax {
                line,
                column,
                message: format!("variable '{name}' is not allowed here"),
            }))
        }
    };
    if v.index >= bound {
        return Err(Box::new(move |line, column| ParseError::Dimension {
            name: name.clone(),
            line,
            column,
            dimension: bound,
        }));
    }
    let rep = match v.kind {
        VarKind::V => Some(Rep::V),
        VarKind::P => Some(Rep::P),
        _ => None,
    };
    if let Some(rep) = rep {
        match fiber {
            Some(r) if *r != rep => {
                return Err(Box::new(|line, column| ParseError::MixedRepresentation { line, column }))
            }
            _ => *fiber = Some(rep),
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Scope,
    fiber: Option<Rep>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek().kind {
            Tok::Op(c) if ops.contains(&c) => {
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat_op(&['-']).is_some() {
            if let Tok::Num(c) = self.peek().kind {
                if self.tokens.get(self.pos + 1).map(|t| &t.kind) != Some(&Tok::Op('^')) {
                    self.pos += 1;
                    return Ok(Node::Num(-c));
                }
            }
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let tok = self.next();
        match &tok.kind {
            Tok::Num(c) => Ok(Node::Num(*c)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    let open = self.next();
                    if open.kind != Tok::LParen {
                        return Err(syntax(&open, format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                let var = parse_var(name)
                    .ok_or_else(|| syntax(&tok, format!("unknown identifier '{name}'")))?;
                check_var(var, self.scope, &mut self.fiber).map_err(|e| e(tok.line, tok.column))?;
                Ok(Node::Var(var))
            }
            other => Err(syntax(&tok, format!("unexpected {}", other.describe()))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let t = self.next();
        if t.kind == Tok::RParen {
            Ok(())
        } else {
            Err(syntax(&t, format!("expected ')' but found {}", t.kind.describe())))
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let mut chars = name.chars();
    let kind = match chars.next()? {
        'x' => VarKind::X,
        'v' => VarKind::V,
        'p' => VarKind::P,
        'u' => VarKind::U,
        _ => return None,
    };
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let index: usize = digits.parse().ok()?;
    Some(Var { kind, index: index - 1 })
}
