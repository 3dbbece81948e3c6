//! Arithmetic expressions over named real variables: parsing, printing,
//! constant folding and evaluation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Nesting beyond this depth is rejected instead of recursing further.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 10] =
        [Func::Sin, Func::Cos, Func::Tan, Func::Sinh, Func::Cosh, Func::Tanh, Func::Exp, Func::Log, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        match self {
            Func::Log if !(x > 0.0) => return Err(EvalError::Domain(format!("log of {x}"))),
            Func::Sqrt if !(x >= 0.0) => return Err(EvalError::Domain(format!("sqrt of {x}"))),
            _ => {}
        }
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        };
        finite(y, || format!("{}({x})", self.name()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64, EvalError> {
        let y = match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div if b == 0.0 => return Err(EvalError::Domain(format!("division of {a} by zero"))),
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        };
        finite(y, || format!("{a} {} {b}", self.symbol()))
    }
}

fn finite(y: f64, what: impl FnOnce() -> String) -> Result<f64, EvalError> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(EvalError::Domain(format!("{} is not a finite real number", what())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// Tokens that would have been accepted at this position.
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Named constants available wherever a variable of that name is not bound.
pub fn constant(name: &str) -> Option<f64> {
    match name {
        "pi" => Some(std::f64::consts::PI),
        "e" => Some(std::f64::consts::E),
        _ => None,
    }
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
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn error_at(src: &str, offset: usize, message: impl Into<String>, expected: &[&str]) -> ParseError {
    let (line, column) = position(src, offset);
    ParseError { line, column, message: message.into(), expected: expected.iter().map(|s| s.to_string()).collect() }
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let mut chars = src.char_indices().peekable();
        while let Some(&(at, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if c.is_ascii_digit() || c == '.' {
                let end = lx.number_end(at);
                let text = &src[at..end];
                let value: f64 = text.parse().map_err(|_| error_at(src, at, format!("malformed number '{text}'"), &["number"]))?;
                if !value.is_finite() {
                    return Err(error_at(src, at, format!("number '{text}' is out of range"), &[]));
                }
                lx.toks.push((Tok::Num(value), at));
                while chars.peek().is_some_and(|&(i, _)| i < end) {
                    chars.next();
                }
            } else if c.is_alphabetic() || c == '_' {
                let mut end = at;
                while let Some(&(i, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        end = i + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                lx.toks.push((Tok::Ident(src[at..end].to_string()), at));
            } else {
                let sym = match c {
                    '+' | '-' | '*' | '/' | '^' | '(' | ')' => c,
                    '−' => '-',
                    '×' | '·' => '*',
                    '÷' => '/',
                    _ => {
                        return Err(error_at(
                            src,
                            at,
                            format!("unexpected character '{c}'"),
                            &["number", "identifier", "operator", "'('", "')'"],
                        ))
                    }
                };
                lx.toks.push((Tok::Sym(sym), at));
                chars.next();
            }
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    /// End of a numeric literal `digits[.digits][(e|E)[+-]digits]`.
    fn number_end(&self, start: usize) -> usize {
        let b = self.src.as_bytes();
        let digits = |mut i: usize| {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut i = digits(start);
        if i < b.len() && b[i] == b'.' {
            i = digits(i + 1);
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            // a bare "e" after a number is left for the next token
            if j < b.len() && b[j].is_ascii_digit() {
                i = digits(j);
            }
        }
        i
    }
}

const OPERAND: [&str; 4] = ["number", "identifier", "'('", "'-'"];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        error_at(self.src, self.offset(), message, expected)
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.fail(format!("expression nested deeper than {MAX_DEPTH} levels"), &[]));
        }
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == &Tok::Sym('-') {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == &Tok::Sym('^') {
            self.bump();
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn closing(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Sym(')') => {
                self.bump();
                Ok(())
            }
            t => Err(self.fail(
                format!("unexpected {}, unclosed parenthesis", t.describe()),
                &["')'", "'+'", "'-'", "'*'", "'/'", "'^'"],
            )),
        }
    }

    fn group(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let inner = self.sum()?;
        self.closing()?;
        self.depth -= 1;
        Ok(inner)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.pos;
        match self.bump() {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Sym('(') => self.group(),
            Tok::Ident(name) => {
                let call = self.peek() == &Tok::Sym('(');
                match (Func::from_name(&name), call) {
                    (Some(f), true) => {
                        self.bump();
                        Ok(Expr::Call(f, Box::new(self.group()?)))
                    }
                    (Some(_), false) => Err(self.fail(format!("function '{name}' needs a parenthesized argument"), &["'('"])),
                    (None, true) => {
                        let names: Vec<&str> = Func::ALL.iter().map(|f| f.name()).collect();
                        Err(error_at(self.src, self.toks[at].1, format!("unknown function '{name}'"), &names))
                    }
                    (None, false) => Ok(Expr::Var(name)),
                }
            }
            t => {
                self.pos = at;
                Err(self.fail(format!("unexpected {}", t.describe()), &OPERAND))
            }
        }
    }
}

/// Parses an expression. Precedence from tightest: `^` (right
/// associative), unary `-`, `* /`, `+ -`; so `-x^2` is `-(x^2)`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::run(text)?;
    if toks.len() == 1 {
        return Err(error_at(text, text.len(), "empty expression", &OPERAND));
    }
    let mut p = Parser { src: text, toks, pos: 0, depth: 0 };
    let e = p.sum()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::Sym(')') => Err(p.fail("unmatched ')'", &["operator", "end of input"])),
        t => Err(p.fail(format!("unexpected {}", t.describe()), &["'+'", "'-'", "'*'", "'/'", "'^'", "end of input"])),
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse(s)
    }
}

/// Binding strength used by the printer.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Binary(BinOp::Pow, ..) => 4,
        Expr::Num(x) if x.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the fewest parentheses that parse back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if x.is_sign_negative() => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_operand(f, inner, level(inner) < 3)
            }
            Expr::Binary(BinOp::Pow, a, b) => {
                write_operand(f, a, level(a) <= 4)?;
                f.write_str("^")?;
                write_operand(f, b, level(b) < 3)
            }
            Expr::Binary(op, a, b) => {
                let own = level(self);
                write_operand(f, a, level(a) < own)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, level(b) <= own)
            }
        }
    }
}

impl Expr {
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_variables(out),
            Expr::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Evaluates with variables looked up by name, falling back on the
    /// named constants.
    pub fn eval(&self, vars: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Var(v) => vars(v).or_else(|| constant(v)).ok_or_else(|| EvalError::Unbound(v.clone())),
            Expr::Neg(a) => Ok(-a.eval(vars)?),
            Expr::Call(func, a) => func.apply(a.eval(vars)?),
            Expr::Binary(op, a, b) => op.apply(a.eval(vars)?, b.eval(vars)?),
        }
    }

    fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            Expr::Neg(a) => match **a {
                Expr::Num(x) => Some(-x),
                _ => None,
            },
            _ => None,
        }
    }

    /// A constant as the parser would produce it: negative values become a
    /// negated literal.
    fn literal(x: f64) -> Expr {
        if x.is_sign_negative() {
            Expr::Neg(Box::new(Expr::Num(-x)))
        } else {
            Expr::Num(x)
        }
    }

    /// Replaces variable-free subtrees by their value. Subtrees whose
    /// evaluation fails are kept so the error surfaces at evaluation time.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Num(_) | Expr::Var(_) => return self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.fold())),
            Expr::Call(func, a) => Expr::Call(*func, Box::new(a.fold())),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.fold()), Box::new(b.fold())),
        };
        let value = match &folded {
            Expr::Neg(a) => a.as_constant().map(|x| Ok(-x)),
            Expr::Call(func, a) => a.as_constant().map(|x| func.apply(x)),
            Expr::Binary(op, a, b) => a.as_constant().zip(b.as_constant()).map(|(x, y)| op.apply(x, y)),
            _ => None,
        };
        match value {
            Some(Ok(v)) => Expr::literal(v),
            _ => folded,
        }
    }

    /// Resolves variable names to argument positions. Names outside
    /// `names` must be named constants.
    pub fn bind(&self, names: &[String]) -> Result<BoundExpr, EvalError> {
        Ok(BoundExpr { root: self.fold().resolve(names)? })
    }

    fn resolve(&self, names: &[String]) -> Result<Node, EvalError> {
        Ok(match self {
            Expr::Num(x) => Node::Num(*x),
            Expr::Var(v) => match names.iter().position(|n| n == v) {
                Some(i) => Node::Slot(i),
                None => Node::Num(constant(v).ok_or_else(|| EvalError::Unbound(v.clone()))?),
            },
            Expr::Neg(a) => Node::Neg(Box::new(a.resolve(names)?)),
            Expr::Call(func, a) => Node::Call(*func, Box::new(a.resolve(names)?)),
            Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(a.resolve(names)?), Box::new(b.resolve(names)?)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        match self {
            Node::Num(x) => Ok(*x),
            Node::Slot(i) => Ok(args[*i]),
            Node::Neg(a) => Ok(-a.eval(args)?),
            Node::Call(func, a) => func.apply(a.eval(args)?),
            Node::Binary(op, a, b) => op.apply(a.eval(args)?, b.eval(args)?),
        }
    }
}

/// A folded expression whose variables are positions in an argument slice.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr {
    root: Node,
}

impl BoundExpr {
    /// `args` must be as long as the name list given to [`Expr::bind`].
    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        self.root.eval(args)
    }

    /// Evaluation with failures mapped to NaN, for use inside fields.
    pub fn value(&self, args: &[f64]) -> f64 {
        self.eval(args).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn at(text: &str, vars: &[(&str, f64)]) -> Result<f64, EvalError> {
        parse(text).unwrap().eval(&|n| vars.iter().find(|(k, _)| *k == n).map(|(_, v)| *v))
    }

    #[test]
    fn documented_examples() {
        assert!((at("1 - cos(sqrt(b)*t)", &[("b", 1.0), ("t", PI / 3.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(at("x^2 + y^2", &[("x", 3.0), ("y", 4.0)]).unwrap(), 25.0);
        let e = parse("cot(").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        assert!(e.message.contains("unknown function"));
        assert!(e.expected.contains(&"cos".to_string()));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("2^3^2", &[]).unwrap(), 512.0);
        assert_eq!(at("-x^2", &[("x", 3.0)]).unwrap(), -9.0);
        assert_eq!(at("2^-1", &[]).unwrap(), 0.5);
        assert_eq!(at("8 / 4 / 2", &[]).unwrap(), 1.0);
        assert_eq!(at("1 - 2 - 3", &[]).unwrap(), -4.0);
        assert_eq!(at("2 * -3", &[]).unwrap(), -6.0);
        assert_eq!(at("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(at("(-2)^2", &[]).unwrap(), 4.0);
        assert_eq!(parse("-x^2").unwrap(), Expr::Neg(Box::new(parse("x^2").unwrap())));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("1 +\n  * 2").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(parse("").is_err());
        assert!(parse("(1 + 2").unwrap_err().message.contains("unclosed"));
        assert!(parse("1 + 2)").is_err());
        assert!(parse("2 x").is_err());
        assert!(parse("sin x").is_err());
        assert!(parse("1e999").is_err());
        assert!(parse("3 $ 4").unwrap_err().message.contains("unexpected character"));
        assert!(parse(&"(".repeat(500)).unwrap_err().message.contains("nested"));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(at("log(0)", &[]), Err(EvalError::Domain(_))));
        assert!(matches!(at("sqrt(-1)", &[]), Err(EvalError::Domain(_))));
        assert!(matches!(at("1/x", &[("x", 0.0)]), Err(EvalError::Domain(_))));
        assert!(matches!(at("(-8)^0.5", &[]), Err(EvalError::Domain(_))));
        assert!(matches!(at("y + 1", &[]), Err(EvalError::Unbound(_))));
        assert!((at("cos(pi)", &[]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn printing_round_trips() {
        for text in ["-x^2", "(-x)^2", "2^3^2", "(2^3)^2", "a - (b - c)", "a - b - c", "a / (b * c)", "--x", "2^-x^2", "sin(x)^2 + cos(y) * -z", "1e-7 * x", "x - -1"] {
            let e = parse(text).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{text} printed as {e}");
        }
        assert_eq!(parse("( a+b )*c").unwrap().to_string(), "(a + b) * c");
    }

    #[test]
    fn folding_and_binding() {
        let e = parse("x * (2 + 3) - sqrt(4) + log(0)").unwrap();
        let f = e.fold();
        assert_eq!(f.to_string(), "x * 5 - 2 + log(0)");
        assert_eq!(parse("1 - 4").unwrap().fold(), parse("-3").unwrap());
        assert_eq!(parse(&f.to_string()).unwrap(), f);
        let b = parse("x^2 + y * pi").unwrap().bind(&["x".into(), "y".into()]).unwrap();
        assert!((b.eval(&[3.0, 1.0]).unwrap() - 9.0 - PI).abs() < 1e-14);
        assert!(matches!(parse("z").unwrap().bind(&["x".into()]), Err(EvalError::Unbound(_))));
        assert_eq!(parse("sin(x) + x").unwrap().variables().into_iter().collect::<Vec<_>>(), vec!["x".to_string()]);
    }
}
