//! Line-oriented program syntax:
//!
//! ```text
//! d = centroid(target) - centroid(anchor)
//! local = express_in(ref_frame, d, "direction")
//! return {A: local.x < 0 and local.z > 0, B: local.x > 0 and local.z > 0}
//! ```
//!
//! Bindings and a single `return`; `#` starts a comment; newlines inside
//! brackets are ignored. There are no loops and no user functions.

use std::collections::BTreeSet;
use std::fmt;

/// Deepest expression nesting accepted by the parser.
pub const MAX_NESTING: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

macro_rules! builtins {
    ($($v:ident => $s:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Builtin { $($v),* }

        impl Builtin {
            pub const ALL: &'static [Builtin] = &[$(Builtin::$v),*];

            pub fn name(&self) -> &'static str {
                match self { $(Builtin::$v => $s),* }
            }

            pub fn from_name(s: &str) -> Option<Builtin> {
                match s { $($s => Some(Builtin::$v),)* _ => None }
            }
        }
    };
}

builtins! {
    Vec3 => "vec3",
    Dot => "dot",
    Cross => "cross",
    Normalize => "normalize",
    Norm => "norm",
    Inv => "inv",
    Compose => "compose",
    Apply => "apply",
    Rotvec => "rotvec",
    Euler => "euler",
    RelativeRotation => "relative_rotation",
    Angle => "angle",
    Centroid => "centroid",
    ExpressIn => "express_in",
    Frame => "frame",
    Axis => "axis",
    CardinalAxes => "cardinal_axes",
    ClassifyCardinal => "classify_cardinal",
    ClassifyRotation => "classify_rotation",
    Relation => "relation",
    Distance => "distance",
    ScaleBy => "scale_by",
    Argmax => "argmax",
    Argmin => "argmin",
    CountUnique => "count_unique",
    Min => "min",
    Max => "max",
    Abs => "abs",
    Sign => "sign",
    Sqrt => "sqrt",
    Degrees => "degrees",
    Len => "len",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    Bool(bool),
    Name(String, Pos),
    List(Vec<Expr>),
    Record(Vec<(String, Expr)>),
    Call {
        func: Builtin,
        args: Vec<Expr>,
        pos: Pos,
    },
    Field {
        base: Box<Expr>,
        name: String,
        pos: Pos,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
        pos: Pos,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
        pos: Pos,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: Pos,
    },
}

impl Expr {
    /// Variable names referenced anywhere in the expression.
    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Str(_) | Expr::Bool(_) => {}
            Expr::Name(n, _) => {
                out.insert(n.clone());
            }
            Expr::List(items) => items.iter().for_each(|e| e.names(out)),
            Expr::Record(fields) => fields.iter().for_each(|(_, e)| e.names(out)),
            Expr::Call { args, .. } => args.iter().for_each(|e| e.names(out)),
            Expr::Field { base, .. } => base.names(out),
            Expr::Index { base, index, .. } => {
                base.names(out);
                index.names(out);
            }
            Expr::Unary { expr, .. } => expr.names(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.names(out);
                rhs.names(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Bind { name: String, expr: Expr, pos: Pos },
    Return { expr: Expr, pos: Pos },
}

impl Stmt {
    pub fn pos(&self) -> Pos {
        match self {
            Stmt::Bind { pos, .. } | Stmt::Return { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoProgram {
    pub stmts: Vec<Stmt>,
}

impl GeoProgram {
    /// Program root plus one node per statement.
    pub fn node_count(&self) -> usize {
        1 + self.stmts.len()
    }

    /// Names read before any binding of the same name, i.e. the names the
    /// evaluation context must supply.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut bound = BTreeSet::new();
        let mut free = BTreeSet::new();
        for s in &self.stmts {
            let (expr, name) = match s {
                Stmt::Bind { name, expr, .. } => (expr, Some(name)),
                Stmt::Return { expr, .. } => (expr, None),
            };
            let mut used = BTreeSet::new();
            expr.names(&mut used);
            free.extend(used.into_iter().filter(|n| !bound.contains(n)));
            if let Some(n) = name {
                bound.insert(n.clone());
            }
        }
        free
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Sym(&'static str),
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

const SYMBOLS: &[&str] = &[
    "==", "!=", "<=", ">=", "(", ")", "[", "]", "{", "}", ",", ".", ":", "=", "<", ">", "+", "-",
    "*", "/",
];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let mut depth = 0i32;
    let pos_at = |i: usize, line: usize, line_start: usize| Pos {
        line,
        col: src[line_start..i].chars().count() + 1,
        offset: i,
    };
    while i < bytes.len() {
        let c = bytes[i];
        let pos = pos_at(i, line, line_start);
        match c {
            b'\n' => {
                if depth <= 0 {
                    out.push(Token { tok: Tok::Newline, pos });
                }
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| SyntaxError {
                    pos,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Token { tok: Tok::Num(v), pos });
            }
            b'"' | b'\'' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(SyntaxError {
                            pos,
                            message: "unterminated string".into(),
                        });
                    };
                    if ch == '\n' {
                        return Err(SyntaxError {
                            pos,
                            message: "unterminated string".into(),
                        });
                    }
                    i += ch.len_utf8();
                    if ch as u32 == quote as u32 {
                        break;
                    }
                    s.push(ch);
                }
                out.push(Token { tok: Tok::Str(s), pos });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    pos,
                });
            }
            _ => {
                let rest = &src[i..];
                let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(SyntaxError {
                        pos,
                        message: format!("unexpected character `{ch}`"),
                    });
                };
                match *sym {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    _ => {}
                }
                i += sym.len();
                out.push(Token { tok: Tok::Sym(sym), pos });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: pos_at(src.len(), line, line_start),
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    nesting: usize,
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "and" | "or" | "not" | "return" | "true" | "false")
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn program(&mut self) -> Result<GeoProgram, SyntaxError> {
        let mut stmts = Vec::new();
        let mut returned = false;
        loop {
            while matches!(self.peek(), Tok::Newline) {
                self.bump();
            }
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            if returned {
                return self.err("statement after `return`");
            }
            let pos = self.pos();
            let stmt = if self.is_kw("return") {
                self.bump();
                returned = true;
                Stmt::Return {
                    expr: self.expr()?,
                    pos,
                }
            } else {
                let name = match self.peek().clone() {
                    Tok::Ident(n) if !is_keyword(&n) => n,
                    other => return self.err(format!("expected a binding, found {}", describe(&other))),
                };
                self.bump();
                self.expect_sym("=")?;
                if Builtin::from_name(&name).is_some() {
                    return Err(SyntaxError {
                        pos,
                        message: format!("cannot rebind built-in `{name}`"),
                    });
                }
                Stmt::Bind {
                    name,
                    expr: self.expr()?,
                    pos,
                }
            };
            stmts.push(stmt);
            match self.peek() {
                Tok::Newline | Tok::Eof => {}
                other => return self.err(format!("expected end of line, found {}", describe(other))),
            }
        }
        if !returned {
            return self.err("program has no `return` statement");
        }
        Ok(GeoProgram { stmts })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return self.err("expression nested too deeply");
        }
        let r = self.or_expr();
        self.nesting -= 1;
        r
    }

    fn binary_chain(
        &mut self,
        next: fn(&mut Parser) -> Result<Expr, SyntaxError>,
        ops: &[(&str, BinOp)],
        keyword: bool,
    ) -> Result<Expr, SyntaxError> {
        let mut lhs = next(self)?;
        loop {
            let found = ops.iter().find(|(s, _)| {
                if keyword {
                    self.is_kw(s)
                } else {
                    self.is_sym(s)
                }
            });
            let Some(&(_, op)) = found else { break };
            let pos = self.pos();
            self.bump();
            let rhs = next(self)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            };
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_chain(Parser::and_expr, &[("or", BinOp::Or)], true)
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_chain(Parser::not_expr, &[("and", BinOp::And)], true)
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_kw("not") {
            let pos = self.pos();
            self.bump();
            self.guard()?;
            let e = self.not_expr();
            self.nesting -= 1;
            return Ok(Expr::Unary {
                op: UnOp::Not,
                expr: Box::new(e?),
                pos,
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.additive()?;
        let ops = [
            ("==", BinOp::Eq),
            ("!=", BinOp::Ne),
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ];
        if let Some(&(_, op)) = ops.iter().find(|(s, _)| self.is_sym(s)) {
            let pos = self.pos();
            self.bump();
            let rhs = self.additive()?;
            if ops.iter().any(|(s, _)| self.is_sym(s)) {
                return self.err("comparisons cannot be chained");
            }
            return Ok(Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            });
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_chain(
            Parser::multiplicative,
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            false,
        )
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_chain(Parser::unary, &[("*", BinOp::Mul), ("/", BinOp::Div)], false)
    }

    fn guard(&mut self) -> Result<(), SyntaxError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return self.err("expression nested too deeply");
        }
        Ok(())
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_sym("-") {
            let pos = self.pos();
            self.bump();
            self.guard()?;
            let e = self.unary();
            self.nesting -= 1;
            let e = e?;
            // fold literal negation so `-1` stays a number
            if let Expr::Num(v) = e {
                return Ok(Expr::Num(-v));
            }
            return Ok(Expr::Unary {
                op: UnOp::Neg,
                expr: Box::new(e),
                pos,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.primary()?;
        loop {
            let pos = self.pos();
            if self.is_sym(".") {
                self.bump();
                let name = match self.bump().tok {
                    Tok::Ident(n) => n,
                    other => {
                        return Err(SyntaxError {
                            pos,
                            message: format!("expected a field name, found {}", describe(&other)),
                        })
                    }
                };
                e = Expr::Field {
                    base: Box::new(e),
                    name,
                    pos,
                };
            } else if self.is_sym("[") {
                self.bump();
                let index = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::Index {
                    base: Box::new(e),
                    index: Box::new(index),
                    pos,
                };
            } else if self.is_sym("(") {
                return self.err("only built-in functions can be called");
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let Token { tok, pos } = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Ident(n) if n == "true" => Ok(Expr::Bool(true)),
            Tok::Ident(n) if n == "false" => Ok(Expr::Bool(false)),
            Tok::Ident(n) if is_keyword(&n) => Err(SyntaxError {
                pos,
                message: format!("unexpected keyword `{n}`"),
            }),
            Tok::Ident(n) => {
                if self.is_sym("(") {
                    let Some(func) = Builtin::from_name(&n) else {
                        return Err(SyntaxError {
                            pos,
                            message: format!("unknown function `{n}`"),
                        });
                    };
                    self.bump();
                    let args = self.items(")")?;
                    Ok(Expr::Call { func, args, pos })
                } else {
                    Ok(Expr::Name(n, pos))
                }
            }
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => Ok(Expr::List(self.items("]")?)),
            Tok::Sym("{") => {
                let mut fields: Vec<(String, Expr)> = Vec::new();
                while !self.is_sym("}") {
                    let kpos = self.pos();
                    let key = match self.bump().tok {
                        Tok::Ident(k) => k,
                        Tok::Str(k) => k,
                        other => {
                            return Err(SyntaxError {
                                pos: kpos,
                                message: format!("expected a record key, found {}", describe(&other)),
                            })
                        }
                    };
                    if fields.iter().any(|(k, _)| *k == key) {
                        return Err(SyntaxError {
                            pos: kpos,
                            message: format!("duplicate record key `{key}`"),
                        });
                    }
                    self.expect_sym(":")?;
                    fields.push((key, self.expr()?));
                    if !self.is_sym("}") {
                        self.expect_sym(",")?;
                    }
                }
                self.bump();
                Ok(Expr::Record(fields))
            }
            other => Err(SyntaxError {
                pos,
                message: format!("expected an expression, found {}", describe(&other)),
            }),
        }
    }

    /// Comma-separated expressions up to `close`; a trailing comma is allowed.
    fn items(&mut self, close: &str) -> Result<Vec<Expr>, SyntaxError> {
        let mut out = Vec::new();
        while !self.is_sym(close) {
            out.push(self.expr()?);
            if !self.is_sym(close) {
                self.expect_sym(",")?;
            }
        }
        self.bump();
        Ok(out)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Ident(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Newline => "end of line".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(text: &str) -> Result<GeoProgram, SyntaxError> {
    if text.trim().is_empty() {
        return Err(SyntaxError {
            pos: Pos {
                line: 1,
                col: 1,
                offset: 0,
            },
            message: "empty program".into(),
        });
    }
    let toks = lex(text)?;
    Parser {
        toks,
        i: 0,
        nesting: 0,
    }
    .program()
}

/// Parses a standalone expression (no bindings, no `return`).
pub fn parse_expression(text: &str) -> Result<Expr, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        nesting: 0,
    };
    while matches!(p.peek(), Tok::Newline) {
        p.bump();
    }
    let e = p.expr()?;
    while matches!(p.peek(), Tok::Newline) {
        p.bump();
    }
    if !matches!(p.peek(), Tok::Eof) {
        return p.err(format!("unexpected {} after expression", describe(p.peek())));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(parse_program("return dot(a, b)").unwrap().node_count(), 2);
        let p = parse_program("x = cross(a,b)\nreturn normalize(x)").unwrap();
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.free_names().into_iter().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn unbalanced_parens_report_position() {
        let e = parse_program("x = dot(a, b\nreturn x").unwrap_err();
        assert_eq!(e.pos.line, 2);
        let e = parse_program("return (a + b))").unwrap_err();
        assert_eq!((e.pos.line, e.pos.col), (1, 15));
    }

    #[test]
    fn unknown_builtin_rejected_free_names_deferred() {
        let e = parse_program("return frobnicate(a)").unwrap_err();
        assert!(e.message.contains("frobnicate"));
        assert!(parse_program("return whatever_name").is_ok());
    }

    #[test]
    fn precedence() {
        let e = parse_expression("1 + 2 * 3 < 8 and not false").unwrap();
        let Expr::Binary { op: BinOp::And, lhs, .. } = e else {
            panic!("top node should be `and`")
        };
        assert!(matches!(*lhs, Expr::Binary { op: BinOp::Lt, .. }));
    }

    #[test]
    fn multiline_records_and_comments() {
        let src = "# header\nd = vec3(1, 0, 0) # trailing\nreturn {\n  A: d.x > 0,\n  B: d.x < 0,\n}\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.stmts.len(), 2);
    }

    #[test]
    fn structural_errors() {
        assert!(parse_program("").is_err());
        assert!(parse_program("x = 1").is_err());
        assert!(parse_program("return 1\nreturn 2").is_err());
        assert!(parse_program("return 1 < 2 < 3").is_err());
        assert!(parse_program("dot = 1\nreturn dot").is_err());
        assert!(parse_program("return {A: 1, A: 2}").is_err());
        let deep = format!("return {}1{}", "(".repeat(200), ")".repeat(200));
        assert!(parse_program(&deep).is_err());
    }
}
