//! Text format for function and sequence definitions.
//!
//! ```text
//! file     := item*            items end at a newline or ';'; '#' comments
//! item     := fn | piece | family | seq
//! fn       := "fn" NAME "on" "(" BOUND "," BOUND ")" ["continuous"] ":" [piece | family]
//! piece    := "piece" "(" BOUND "," BOUND ("]" | ")") ":" EXPR
//! family   := "family" "n" ">=" INT "on" "(" P "," Q "]" [offset] ":" EXPR ("|" EXPR)*
//! offset   := "continuous" | "offset" CONST "step" EXPR ("|" EXPR)*
//! seq      := "seq" NAME ":" EXPR
//!           | "seq" NAME "data" [":"] NEWLINE (INT REAL NEWLINE)* "end"
//! BOUND    := "inf" | "+inf" | "-inf" | constant EXPR
//! ```
//!
//! `piece` and `family` items belong to the nearest preceding `fn`. `P` and
//! `Q` are expressions in `n` and `Q` must be `P` with `n` replaced by
//! `n + 1`. Bodies and offset steps are cycled by `n mod count`. A `fn`
//! marked `continuous` is rejected unless it is continuous at every checked
//! junction.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::{Family, Offset, PiecewiseFn, RegError};
use crate::expr::{parse, Expr, ExprError};
use crate::extreal::ExtReal;
use crate::sequence::Sequence;

#[derive(Debug, Clone, Default)]
pub struct Definitions {
    pub functions: BTreeMap<String, PiecewiseFn>,
    pub sequences: BTreeMap<String, Sequence>,
}

#[derive(Debug, Error)]
pub enum DefError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: definition `{name}`: {source}")]
    Build { line: usize, name: String, source: RegError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Definitions {
    pub fn function(&self, name: &str) -> Option<&PiecewiseFn> {
        self.functions.get(name)
    }

    pub fn sequence(&self, name: &str) -> Option<&Sequence> {
        self.sequences.get(name)
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Definitions, DefError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|source| DefError::Io { path: path.display().to_string(), source })?;
    parse_definitions(&src)
}

struct FnDraft {
    line: usize,
    name: String,
    a: ExtReal,
    b: ExtReal,
    continuous: bool,
    pieces: Vec<(f64, f64, Expr)>,
    family: Option<Family>,
}

struct DataDraft {
    line: usize,
    name: String,
    values: BTreeMap<i64, f64>,
}

#[derive(Default)]
struct State {
    defs: Definitions,
    current: Option<FnDraft>,
    data: Option<DataDraft>,
}

fn syntax(line: usize, message: impl Into<String>) -> DefError {
    DefError::Syntax { line, message: message.into() }
}

pub fn parse_definitions(src: &str) -> Result<Definitions, DefError> {
    let mut st = State::default();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if let Some(data) = st.data.as_mut() {
            if text.is_empty() {
                continue;
            }
            if text == "end" {
                let d = st.data.take().expect("inside a data block");
                st.insert_seq(d.line, d.name, Sequence::Data(d.values))?;
                continue;
            }
            let mut parts = text.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(syntax(line, format!("expected `index value` or `end`, found `{text}`")));
            };
            let k: i64 = k.parse().map_err(|_| syntax(line, format!("`{k}` is not an integer index")))?;
            let v: f64 = v.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| syntax(line, format!("`{v}` is not a finite number")))?;
            if data.values.insert(k, v).is_some() {
                return Err(syntax(line, format!("index {k} given twice")));
            }
            continue;
        }
        for item in text.split(';') {
            st.item(line, item.trim())?;
        }
    }
    if let Some(d) = st.data {
        return Err(syntax(d.line, format!("data for `{}` is missing its `end`", d.name)));
    }
    st.finish_fn()?;
    Ok(st.defs)
}

fn keyword<'a>(text: &'a str, word: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(word)?;
    (rest.is_empty() || rest.starts_with(|c: char| c.is_whitespace() || c == '(')).then(|| rest.trim_start())
}

fn ident(line: usize, text: &str) -> Result<(String, &str), DefError> {
    let end = text.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '\'')).unwrap_or(text.len());
    let name = &text[..end];
    if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        return Err(syntax(line, format!("expected a name, found `{text}`")));
    }
    Ok((name.to_string(), text[end..].trim_start()))
}

fn expr(line: usize, text: &str) -> Result<Expr, DefError> {
    parse(text.trim()).map_err(|e| syntax(line, format!("in `{}`: {e}", text.trim())))
}

fn bound(line: usize, text: &str) -> Result<ExtReal, DefError> {
    match text.trim() {
        "inf" | "+inf" => Ok(ExtReal::PosInf),
        "-inf" => Ok(ExtReal::NegInf),
        t => {
            let v = expr(line, t)?.eval_const().map_err(|e: ExprError| syntax(line, format!("bound `{t}`: {e}")))?;
            Ok(ExtReal::Finite(v))
        }
    }
}

/// Splits `"(L, R]rest"` into `L`, `R`, `rest`. Either bracket may close.
fn interval(line: usize, text: &str) -> Result<(String, String, String), DefError> {
    let body = text
        .strip_prefix('(')
        .ok_or_else(|| syntax(line, format!("expected `(`, found `{text}`")))?;
    // a bound may itself contain parentheses: close at the first bracket at depth 0
    let mut depth = 0i32;
    let mut end = None;
    let mut comma = None;
    for (i, c) in body.char_indices() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            ',' if depth == 0 && comma.is_none() => comma = Some(i),
            ']' | ')' if depth == 0 => {
                end = Some(i);
                break;
            }
            _ => {}
        }
    }
    let end = end.ok_or_else(|| syntax(line, "unclosed interval"))?;
    let comma = comma.filter(|&c| c < end).ok_or_else(|| syntax(line, "interval needs two bounds separated by `,`"))?;
    Ok((body[..comma].to_string(), body[comma + 1..end].to_string(), body[end + 1..].to_string()))
}

impl State {
    fn item(&mut self, line: usize, text: &str) -> Result<(), DefError> {
        if text.is_empty() {
            return Ok(());
        }
        if let Some(rest) = keyword(text, "fn") {
            self.finish_fn()?;
            return self.fn_header(line, rest);
        }
        if let Some(rest) = keyword(text, "seq") {
            self.finish_fn()?;
            return self.seq(line, rest);
        }
        if let Some(rest) = keyword(text, "piece") {
            return self.piece(line, rest);
        }
        if let Some(rest) = keyword(text, "family") {
            return self.family(line, rest);
        }
        Err(syntax(line, format!("expected `fn`, `piece`, `family` or `seq`, found `{text}`")))
    }

    fn draft(&mut self, line: usize, what: &str) -> Result<&mut FnDraft, DefError> {
        self.current
            .as_mut()
            .ok_or_else(|| syntax(line, format!("`{what}` outside a `fn` definition")))
    }

    fn taken(&self, name: &str) -> bool {
        self.defs.functions.contains_key(name)
            || self.defs.sequences.contains_key(name)
            || self.current.as_ref().is_some_and(|d| d.name == name)
    }

    fn fn_header(&mut self, line: usize, text: &str) -> Result<(), DefError> {
        let (name, rest) = ident(line, text)?;
        if self.taken(&name) {
            return Err(syntax(line, format!("`{name}` is defined twice")));
        }
        let rest = keyword(rest, "on").ok_or_else(|| syntax(line, format!("expected `on` after `fn {name}`")))?;
        let (a, b, rest) = interval(line, rest)?;
        let (a, b) = (bound(line, &a)?, bound(line, &b)?);
        let rest = rest.trim_start();
        let (flags, tail) = rest.split_once(':').ok_or_else(|| syntax(line, format!("expected `:` after the domain of `{name}`")))?;
        let continuous = match flags.trim() {
            "" => false,
            "continuous" => true,
            other => return Err(syntax(line, format!("unknown option `{other}` for `fn {name}`"))),
        };
        self.current = Some(FnDraft { line, name, a, b, continuous, pieces: Vec::new(), family: None });
        self.item(line, tail.trim())
    }

    fn piece(&mut self, line: usize, text: &str) -> Result<(), DefError> {
        let (l, r, rest) = interval(line, text)?;
        let body = rest.trim_start().strip_prefix(':').ok_or_else(|| syntax(line, "expected `:` before the piece body"))?;
        let (l, r, body) = (bound(line, &l)?, bound(line, &r)?, expr(line, body)?);
        let d = self.draft(line, "piece")?;
        if d.family.is_some() {
            return Err(syntax(line, "pieces must come before the family"));
        }
        d.pieces.push((l.to_f64(), r.to_f64(), body));
        Ok(())
    }

    fn family(&mut self, line: usize, text: &str) -> Result<(), DefError> {
        let rest = text.strip_prefix('n').ok_or_else(|| syntax(line, "expected `n>=K` after `family`"))?;
        let rest = rest.trim_start().strip_prefix(">=").ok_or_else(|| syntax(line, "expected `>=` after `family n`"))?.trim_start();
        let end = rest.find(|c: char| !(c.is_ascii_digit() || c == '-')).unwrap_or(rest.len());
        let start: i64 = rest[..end].parse().map_err(|_| syntax(line, "family start must be an integer"))?;
        let rest = keyword(rest[end..].trim_start(), "on").ok_or_else(|| syntax(line, "expected `on` after the family start"))?;
        let (p, q, rest) = interval(line, rest)?;
        let (p, q) = (expr(line, &p)?, expr(line, &q)?);
        let shifted = p.subst_n(&Expr::add(Expr::N, Expr::Num(1.0)));
        for n in start..start + 8 {
            match (q.eval_n(n), shifted.eval_n(n)) {
                (Ok(u), Ok(v)) if (u - v).abs() <= 1e-12 * (1.0 + u.abs()) => {}
                _ => return Err(syntax(line, format!("family cell must be (p(n), p(n+1)]; `{q}` differs from p(n+1) at n = {n}"))),
            }
        }
        let (opts, bodies) = rest.split_once(':').ok_or_else(|| syntax(line, "expected `:` before the family bodies"))?;
        let offset = offset(line, opts.trim())?;
        let bodies = bodies.split('|').map(|b| expr(line, b)).collect::<Result<Vec<_>, _>>()?;
        let d = self.draft(line, "family")?;
        if d.family.is_some() {
            return Err(syntax(line, "a function has at most one family"));
        }
        d.family = Some(Family::new(start, p, bodies, offset));
        Ok(())
    }

    fn seq(&mut self, line: usize, text: &str) -> Result<(), DefError> {
        let (name, rest) = ident(line, text)?;
        if self.taken(&name) {
            return Err(syntax(line, format!("`{name}` is defined twice")));
        }
        if rest.strip_prefix("data").is_some_and(|r| matches!(r.trim(), "" | ":")) {
            self.data = Some(DataDraft { line, name, values: BTreeMap::new() });
            return Ok(());
        }
        let body = rest.strip_prefix(':').ok_or_else(|| syntax(line, format!("expected `:` or `data` after `seq {name}`")))?;
        let e = expr(line, body)?;
        if e.uses_x() {
            return Err(syntax(line, format!("sequence `{name}` may only use n")));
        }
        self.insert_seq(line, name, Sequence::Closed(e))
    }

    fn insert_seq(&mut self, line: usize, name: String, s: Sequence) -> Result<(), DefError> {
        if let Sequence::Data(d) = &s {
            if d.is_empty() {
                return Err(syntax(line, format!("sequence `{name}` has no data")));
            }
        }
        self.defs.sequences.insert(name, s);
        Ok(())
    }

    fn finish_fn(&mut self) -> Result<(), DefError> {
        let Some(d) = self.current.take() else {
            return Ok(());
        };
        let mut b = PiecewiseFn::builder(d.name.clone(), d.a, d.b).continuous(d.continuous);
        for (l, r, body) in d.pieces {
            b = b.piece(l, r, body);
        }
        if let Some(fam) = d.family {
            b = b.family(fam);
        }
        let f = b.build().map_err(|source| DefError::Build { line: d.line, name: d.name.clone(), source })?;
        self.defs.functions.insert(d.name, f);
        Ok(())
    }
}

fn offset(line: usize, text: &str) -> Result<Offset, DefError> {
    if text.is_empty() {
        return Ok(Offset::None);
    }
    if text == "continuous" {
        return Ok(Offset::Continuous);
    }
    let rest = keyword(text, "offset").ok_or_else(|| syntax(line, format!("unknown family option `{text}`")))?;
    let (init, steps) = rest.split_once(" step ").ok_or_else(|| syntax(line, "expected `offset C step EXPR`"))?;
    let init = expr(line, init)?.eval_const().map_err(|e| syntax(line, format!("offset start: {e}")))?;
    let steps = steps.split('|').map(|s| expr(line, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(Offset::Recurrence { init, steps })
}
