//! Parser for reference-frame formalizations such as
//! `+Z_ref = Centroid(owen) - Centroid(sink) = North`.
//!
//! LaTeX-style decoration (`$`, `\text{}`, `_{}`, `\left(`, `\vec{}`) is
//! stripped first; every character of the plain text remembers its byte
//! offset in the original input so errors point at what the caller wrote.

use crate::geometry::{Axis, Cardinal};

use super::{FrameSpec, FrameVariant, ParseError, Sign, SignedAxis};

struct Plain {
    chars: Vec<char>,
    offsets: Vec<usize>,
    end: usize,
}

impl Plain {
    fn offset(&self, i: usize) -> usize {
        self.offsets.get(i).copied().unwrap_or(self.end)
    }
}

/// Removes math-mode decoration. `\vec{..}` becomes a placeholder term that
/// the chain parser skips.
fn strip_decoration(src: &str) -> Plain {
    let mut chars = Vec::new();
    let mut offsets = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some((i, c)) = it.next() {
        match c {
            '$' | '{' | '}' => {}
            '\\' => {
                let mut name = String::new();
                while let Some(&(_, n)) = it.peek() {
                    if n.is_ascii_alphabetic() {
                        name.push(n);
                        it.next();
                    } else {
                        break;
                    }
                }
                match name.as_str() {
                    "vec" | "overrightarrow" => {
                        // swallow the braced argument, leave a marker
                        if matches!(it.peek(), Some(&(_, '{'))) {
                            let mut depth = 0i32;
                            for (_, n) in it.by_ref() {
                                if n == '{' {
                                    depth += 1;
                                } else if n == '}' {
                                    depth -= 1;
                                    if depth == 0 {
                                        break;
                                    }
                                }
                            }
                        }
                        chars.push('§');
                        offsets.push(i);
                    }
                    "" => {
                        // `\,` `\;` `\ ` spacing escapes
                        if let Some(&(_, n)) = it.peek() {
                            if matches!(n, ',' | ';' | ' ' | '!') {
                                it.next();
                            }
                        }
                    }
                    "pm" => {
                        chars.push('±');
                        offsets.push(i);
                    }
                    _ => {} // \text \mathrm \left \right \mathbf ...
                }
            }
            _ => {
                chars.push(c);
                offsets.push(i);
            }
        }
    }
    Plain {
        chars,
        offsets,
        end: src.len(),
    }
}

struct Cursor<'a> {
    p: &'a Plain,
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, at: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            position: self.p.offset(at),
            message: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.end && self.p.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        (self.pos < self.end).then(|| self.p.chars[self.pos])
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(self.pos, format!("expected `{c}`")))
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.end
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start || !self.p.chars[start].is_alphabetic() {
            return Err(self.err(start, "expected an identifier"));
        }
        Ok(self.p.chars[start..self.pos].iter().collect())
    }

    fn sign(&mut self) -> Option<Sign> {
        self.skip_ws();
        match self.peek() {
            Some('+') => {
                self.pos += 1;
                Some(Sign::Plus)
            }
            Some('-') | Some('−') => {
                self.pos += 1;
                Some(Sign::Minus)
            }
            _ => None,
        }
    }
}

enum Term {
    Geometric(FrameVariant),
    Cardinal(Cardinal),
    Placeholder,
}

/// Splits the plain text on top-level `=` into `(start, end)` index pairs.
fn split_terms(p: &Plain) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, &c) in p.chars.iter().enumerate() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            '=' if depth == 0 => {
                out.push((start, i));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((start, p.chars.len()));
    out
}

fn parse_axis_letter(c: Option<char>) -> Option<Axis> {
    match c {
        Some('x') | Some('X') => Some(Axis::X),
        Some('y') | Some('Y') => Some(Axis::Y),
        Some('z') | Some('Z') => Some(Axis::Z),
        _ => None,
    }
}

fn parse_ref(cur: &mut Cursor) -> Result<(), ParseError> {
    let start = {
        cur.skip_ws();
        cur.pos
    };
    let sign = cur.sign().unwrap_or(Sign::Plus);
    cur.skip_ws();
    let axis = parse_axis_letter(cur.peek())
        .ok_or_else(|| cur.err(cur.pos, "expected a reference axis such as `+Z_ref`"))?;
    cur.pos += 1;
    cur.expect('_')?;
    let name = cur.ident()?;
    if !name.eq_ignore_ascii_case("ref") {
        return Err(cur.err(start, format!("left-hand side must be `+Z_ref`, found `{name}`")));
    }
    if sign != Sign::Plus || axis != Axis::Z {
        return Err(cur.err(start, "only `+Z_ref` may be constrained"));
    }
    if !cur.at_end() {
        return Err(cur.err(cur.pos, "unexpected text after reference axis"));
    }
    Ok(())
}

fn is_keyword(name: &str, kw: &str) -> bool {
    name.eq_ignore_ascii_case(kw)
}

/// `Centroid(A) - Centroid(B)` or `normalize(<vector_expr>)`; returns `(to, from)`.
fn parse_vector_expr(cur: &mut Cursor) -> Result<(String, String), ParseError> {
    let at = {
        cur.skip_ws();
        cur.pos
    };
    let head = cur.ident()?;
    if is_keyword(&head, "normalize") {
        cur.expect('(')?;
        let inner = parse_vector_expr(cur)?;
        cur.expect(')')?;
        return Ok(inner);
    }
    if !is_keyword(&head, "centroid") {
        return Err(cur.err(at, format!("unknown vector form `{head}`")));
    }
    cur.expect('(')?;
    let to = cur.ident()?;
    cur.expect(')')?;
    if cur.sign() != Some(Sign::Minus) {
        return Err(cur.err(cur.pos, "expected `-` between centroids"));
    }
    let at2 = {
        cur.skip_ws();
        cur.pos
    };
    let head2 = cur.ident()?;
    if !is_keyword(&head2, "centroid") {
        return Err(cur.err(at2, format!("expected `Centroid(..)`, found `{head2}`")));
    }
    cur.expect('(')?;
    let from = cur.ident()?;
    cur.expect(')')?;
    Ok((to, from))
}

fn camera_index(anchor: &str) -> Option<Result<usize, ()>> {
    let rest = anchor.strip_prefix("cam")?;
    if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some(rest.parse().map_err(|_| ()))
}

fn parse_term(p: &Plain, span: (usize, usize)) -> Result<Term, ParseError> {
    let mut cur = Cursor {
        p,
        pos: span.0,
        end: span.1,
    };
    if cur.at_end() {
        return Err(cur.err(span.0, "empty term"));
    }
    if cur.peek() == Some('§') {
        cur.pos += 1;
        if !cur.at_end() {
            return Err(cur.err(cur.pos, "unexpected text after vector name"));
        }
        return Ok(Term::Placeholder);
    }
    let start = cur.pos;
    if let Some(sign) = cur.sign() {
        let sign = if let Some('±') = cur.peek() {
            return Err(cur.err(cur.pos, "ambiguous sign `±`"));
        } else {
            sign
        };
        cur.skip_ws();
        let axis = parse_axis_letter(cur.peek())
            .ok_or_else(|| cur.err(cur.pos, "expected axis letter X, Y or Z"))?;
        cur.pos += 1;
        cur.expect('_')?;
        let anchor_at = cur.pos;
        let anchor = cur.ident()?;
        let axis = SignedAxis { sign, axis };
        let variant = if let Some(idx) = camera_index(&anchor) {
            let camera = idx.map_err(|_| cur.err(anchor_at, "camera index out of range"))?;
            FrameVariant::CameraBased { camera, axis }
        } else if anchor == "cam" && cur.eat('[') {
            cur.skip_ws();
            let ds = cur.pos;
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.pos += 1;
            }
            let digits: String = p.chars[ds..cur.pos].iter().collect();
            let camera = digits
                .parse()
                .map_err(|_| cur.err(ds, "expected a camera index"))?;
            cur.expect(']')?;
            FrameVariant::CameraBased { camera, axis }
        } else if anchor.eq_ignore_ascii_case("ref") {
            return Err(cur.err(anchor_at, "reference frame cannot anchor itself"));
        } else {
            FrameVariant::ObjectBased {
                object: anchor,
                axis,
            }
        };
        if !cur.at_end() {
            return Err(cur.err(cur.pos, "unexpected text after axis anchor"));
        }
        return Ok(Term::Geometric(variant));
    }
    if cur.peek() == Some('±') {
        return Err(cur.err(start, "ambiguous sign `±`"));
    }
    // either a cardinal word or a vector expression
    let save = cur.pos;
    let word = cur.ident()?;
    if cur.at_end() {
        if let Ok(c) = word.parse::<Cardinal>() {
            if word.len() > 1 {
                return Ok(Term::Cardinal(c));
            }
        }
        return Err(cur.err(save, format!("unknown anchor form `{word}`")));
    }
    cur.pos = save;
    let (to, from) = parse_vector_expr(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err(cur.pos, "unexpected text after vector expression"));
    }
    Ok(Term::Geometric(FrameVariant::DirectionBased { from, to }))
}

pub fn parse_frame_spec(text: &str) -> Result<FrameSpec, ParseError> {
    let plain = strip_decoration(text);
    if plain.chars.iter().all(|c| c.is_whitespace()) {
        return Err(ParseError {
            position: 0,
            message: "empty formalization".into(),
        });
    }
    let spans = split_terms(&plain);
    if spans.len() < 2 {
        return Err(ParseError {
            position: plain.end,
            message: "expected `=` after the reference axis".into(),
        });
    }
    let mut head = Cursor {
        p: &plain,
        pos: spans[0].0,
        end: spans[0].1,
    };
    parse_ref(&mut head)?;
    let mut variant = None;
    let mut cardinal = None;
    for &span in &spans[1..] {
        match parse_term(&plain, span)? {
            Term::Placeholder => {}
            Term::Geometric(v) => {
                if variant.is_some() {
                    return Err(ParseError {
                        position: plain.offset(span.0),
                        message: "more than one geometric anchor".into(),
                    });
                }
                variant = Some(v);
            }
            Term::Cardinal(c) => {
                if cardinal.is_some() {
                    return Err(ParseError {
                        position: plain.offset(span.0),
                        message: "more than one cardinal binding".into(),
                    });
                }
                cardinal = Some(c);
            }
        }
    }
    let variant = variant.ok_or(ParseError {
        position: plain.end,
        message: "no geometric anchor on the right-hand side".into(),
    })?;
    Ok(FrameSpec { variant, cardinal })
}
