//! Text format:
//!
//! ```text
//! # comment
//! in x
//! in y
//! m = mul x y
//! s = smul -3 m
//! out s
//! ```
//!
//! Statements are separated by newlines or `;`. Wires may be used before the
//! line that defines them; the parser sorts gates topologically and rejects
//! cycles.

use std::collections::HashMap;

use thiserror::Error;

use super::{Circuit, Gate, GateId, GateKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: reference to undefined wire `{name}`")]
    DanglingReference { line: usize, col: usize, name: String },
    #[error("{line}:{col}: wire `{name}` depends on itself")]
    CycleDetected { line: usize, col: usize, name: String },
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug)]
struct Tok<'a> {
    text: &'a str,
    pos: Pos,
}

#[derive(Debug)]
enum Op {
    Input,
    Add,
    ScalarMul(i128),
    Mul,
    Select,
    Output,
}

#[derive(Debug)]
struct Stmt<'a> {
    name: Option<Tok<'a>>,
    op: Op,
    args: Vec<Tok<'a>>,
    pos: Pos,
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn tokens(line_no: usize, offset: usize, text: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Tok { text: &text[s..i], pos: Pos { line: line_no, col: offset + s + 1 } });
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn statement<'a>(toks: Vec<Tok<'a>>) -> Result<Stmt<'a>, ParseError> {
    let pos = toks[0].pos;
    let ident = |t: &Tok| if is_ident(t.text) { Ok(()) } else { Err(syntax(t.pos, format!("bad wire name `{}`", t.text))) };
    match toks[0].text {
        kw @ ("in" | "out") => {
            if toks.len() != 2 {
                return Err(syntax(pos, format!("`{kw}` takes exactly one wire")));
            }
            ident(&toks[1])?;
            let mut toks = toks;
            let w = toks.pop().unwrap();
            Ok(if kw == "in" {
                Stmt { name: Some(w), op: Op::Input, args: vec![], pos }
            } else {
                Stmt { name: None, op: Op::Output, args: vec![w], pos }
            })
        }
        _ => {
            if toks.len() < 3 || toks[1].text != "=" {
                return Err(syntax(pos, "expected `in`, `out` or `<name> = <op> ...`"));
            }
            ident(&toks[0])?;
            let mut it = toks.into_iter();
            let name = it.next().unwrap();
            it.next();
            let op_tok = it.next().unwrap();
            let mut args: Vec<Tok> = it.collect();
            let (op, arity) = match op_tok.text {
                "add" => (Op::Add, 2),
                "mul" => (Op::Mul, 2),
                "select" => (Op::Select, 3),
                "smul" => {
                    if args.is_empty() {
                        return Err(syntax(op_tok.pos, "`smul` needs a scalar and a wire"));
                    }
                    let k = args.remove(0);
                    let v: i128 =
                        k.text.parse().map_err(|_| syntax(k.pos, format!("bad scalar `{}`", k.text)))?;
                    (Op::ScalarMul(v), 1)
                }
                other => return Err(syntax(op_tok.pos, format!("unknown operation `{other}`"))),
            };
            if args.len() != arity {
                return Err(syntax(op_tok.pos, format!("`{}` takes {arity} wire(s), got {}", op_tok.text, args.len())));
            }
            for a in &args {
                ident(a)?;
            }
            Ok(Stmt { name: Some(name), op, args, pos })
        }
    }
}

pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut stmts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for piece in line.split(';') {
            let toks = tokens(i + 1, offset, piece);
            offset += piece.len() + 1;
            if !toks.is_empty() {
                stmts.push(statement(toks)?);
            }
        }
    }

    let mut defs: HashMap<&str, usize> = HashMap::new();
    for (i, s) in stmts.iter().enumerate() {
        if let Some(n) = &s.name {
            if defs.insert(n.text, i).is_some() {
                return Err(syntax(n.pos, format!("wire `{}` defined twice", n.text)));
            }
        }
    }
    let mut deps: Vec<Vec<usize>> = Vec::with_capacity(stmts.len());
    for s in &stmts {
        let mut d = Vec::with_capacity(s.args.len());
        for a in &s.args {
            let &j = defs.get(a.text).ok_or_else(|| ParseError::DanglingReference {
                line: a.pos.line,
                col: a.pos.col,
                name: a.text.to_string(),
            })?;
            d.push(j);
        }
        deps.push(d);
    }

    // Inputs first in declaration order, then everything else depth-first in
    // declaration order.
    let mut order: Vec<usize> = Vec::with_capacity(stmts.len());
    let mut state = vec![0u8; stmts.len()];
    for (i, s) in stmts.iter().enumerate() {
        if matches!(s.op, Op::Input) {
            state[i] = 2;
            order.push(i);
        }
    }
    for root in 0..stmts.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&d) = deps[node].get(*next) {
                *next += 1;
                match state[d] {
                    0 => {
                        state[d] = 1;
                        stack.push((d, 0));
                    }
                    1 => {
                        let s = &stmts[d];
                        let n = s.name.as_ref().map(|t| t.text).unwrap_or("?");
                        return Err(ParseError::CycleDetected { line: s.pos.line, col: s.pos.col, name: n.to_string() });
                    }
                    _ => {}
                }
            } else {
                state[node] = 2;
                order.push(node);
                stack.pop();
            }
        }
    }

    let mut index = vec![0 as GateId; stmts.len()];
    for (g, &s) in order.iter().enumerate() {
        index[s] = g;
    }
    let gates = order
        .iter()
        .map(|&s| {
            let st = &stmts[s];
            let a = |k: usize| index[deps[s][k]];
            let kind = match st.op {
                Op::Input => GateKind::Input,
                Op::Add => GateKind::Add(a(0), a(1)),
                Op::ScalarMul(v) => GateKind::ScalarMul(v, a(0)),
                Op::Mul => GateKind::Mul(a(0), a(1)),
                Op::Select => GateKind::Select(a(0), a(1), a(2)),
                Op::Output => GateKind::Output(a(0)),
            };
            let name = st.name.as_ref().map(|t| t.text.to_string()).unwrap_or_else(|| format!("out{s}"));
            Gate { kind, name }
        })
        .collect();
    Ok(Circuit::new(gates).expect("sorted above"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    #[test]
    fn identity() {
        let c = parse_circuit("in x; out x").unwrap();
        assert_eq!(c.arity(), (1, 1));
    }

    #[test]
    fn forward_refs_and_comments() {
        let c = parse_circuit("# demo\nout s\ns = smul -1 m   # negate\nm = mul x y\nin x\nin y\n").unwrap();
        let f = Field::new(101).unwrap();
        assert_eq!(super::super::eval_plain(&c, f, &[f.elem(2), f.elem(3)]).unwrap(), vec![f.elem(95)]);
    }

    #[test]
    fn diagnostics() {
        assert_eq!(
            parse_circuit("in x\nm = mul x zz\n"),
            Err(ParseError::DanglingReference { line: 2, col: 11, name: "zz".into() })
        );
        assert!(matches!(
            parse_circuit("in x; a = add x b; b = add a x; out b"),
            Err(ParseError::CycleDetected { line: 1, .. })
        ));
        assert!(matches!(parse_circuit("in x\ny = pow x x"), Err(ParseError::Syntax { line: 2, col: 5, .. })));
        assert!(matches!(parse_circuit("in 9x"), Err(ParseError::Syntax { col: 4, .. })));
        assert!(matches!(parse_circuit("in x; in x"), Err(ParseError::Syntax { col: 10, .. })));
        assert!(matches!(parse_circuit("in x; y = smul q x"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_circuit("in x; y = add x"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_circuit("in x; a = add a x"), Err(ParseError::CycleDetected { .. })));
    }
}
