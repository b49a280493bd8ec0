//! Prompt DSL.
//!
//! ```text
//! prompt := stmt (";" stmt)*
//! stmt   := group | rel | cnst
//! group  := INT "[" attrs? "]" WORD
//! attrs  := WORD ("," WORD)*
//! rel    := "@rel(" INT "," WORD "," INT ")"
//! cnst   := "@count" | "@global(" WORD ")" | "@text(" STRING ")" | "@neg(" WORD ")"
//! ```
//!
//! Whitespace may separate any two tokens. Relation indices are 1-based group
//! positions. An empty or all-whitespace input is the empty graph.

use std::collections::BTreeSet;

use super::{Constraint, ConstraintKind, EntityGroup, ProbeError, Relation, SemanticGraph};

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn location(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut column = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        (line, column)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> ProbeError {
        let (line, column) = self.location(pos);
        ProbeError::Syntax { line, column, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn expect(&mut self, want: char) -> Result<(), ProbeError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.error_at(self.pos, format!("expected {want:?}, found {c:?}"))),
            None => Err(self.error_at(self.pos, format!("expected {want:?}, found end of input"))),
        }
    }

    fn int(&mut self) -> Result<u32, ProbeError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error_at(start, "expected an integer"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.error_at(start, format!("integer {text} out of range")))
    }

    fn word(&mut self) -> Result<String, ProbeError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => self.pos += 1,
            Some(c) => return Err(self.error_at(start, format!("expected a word, found {c:?}"))),
            None => return Err(self.error_at(start, "expected a word, found end of input")),
        }
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '\'')
        {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn string(&mut self) -> Result<String, ProbeError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() != Some('"') {
            return Err(self.error_at(start, "expected a quoted string"));
        }
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error_at(start, "unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c @ ('"' | '\\')) => out.push(c),
                        Some('n') => out.push('\n'),
                        _ => return Err(self.error_at(self.pos, "bad escape")),
                    }
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn group(&mut self) -> Result<EntityGroup, ProbeError> {
        let start = self.pos;
        let count = self.int()?;
        if count == 0 {
            return Err(self.error_at(start, "group count must be at least 1"));
        }
        self.expect('[')?;
        let mut attributes = BTreeSet::new();
        self.skip_ws();
        if self.peek() != Some(']') {
            attributes.insert(self.word()?);
            loop {
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.pos += 1;
                    attributes.insert(self.word()?);
                } else {
                    break;
                }
            }
        }
        self.expect(']')?;
        let label = self.word()?;
        Ok(EntityGroup { label, count, attributes })
    }

    fn tag(&mut self, graph: &mut SemanticGraph, rel_positions: &mut Vec<usize>) -> Result<(), ProbeError> {
        let at = self.pos;
        self.pos += 1; // '@'
        let name = self.word()?;
        match name.as_str() {
            "rel" => {
                self.expect('(')?;
                let from_pos = self.pos;
                let from = self.int()?;
                self.expect(',')?;
                let word = self.word()?;
                self.expect(',')?;
                let to = self.int()?;
                self.expect(')')?;
                rel_positions.push(from_pos);
                // 1-based in the surface syntax; 0 becomes an out-of-range marker.
                let idx = |i: u32| (i as usize).checked_sub(1).unwrap_or(usize::MAX);
                graph.relations.push(Relation { from: idx(from), word, to: idx(to) });
            }
            "count" => graph.constraints.push(Constraint { kind: ConstraintKind::Count, arg: None }),
            "global" | "neg" => {
                self.expect('(')?;
                let arg = self.word()?;
                self.expect(')')?;
                let kind = if name == "global" { ConstraintKind::Global } else { ConstraintKind::Neg };
                graph.constraints.push(Constraint { kind, arg: Some(arg) });
            }
            "text" => {
                self.expect('(')?;
                let arg = self.string()?;
                self.expect(')')?;
                graph.constraints.push(Constraint { kind: ConstraintKind::Text, arg: Some(arg) });
            }
            _ => {
                let (line, column) = self.location(at);
                return Err(ProbeError::UnknownConstraint { tag: name, line, column });
            }
        }
        Ok(())
    }
}

pub fn parse_dsl(text: &str) -> Result<SemanticGraph, ProbeError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    let mut graph = SemanticGraph {
        word_count: text.split_whitespace().count() as u32,
        ..Default::default()
    };
    let mut rel_positions = Vec::new();

    if !p.at_end() {
        loop {
            p.skip_ws();
            match p.peek() {
                Some('@') => p.tag(&mut graph, &mut rel_positions)?,
                Some(c) if c.is_ascii_digit() => {
                    let group = p.group()?;
                    graph.groups.push(group);
                }
                Some(c) => return Err(p.error_at(p.pos, format!("unexpected {c:?} at start of statement"))),
                None => return Err(p.error_at(p.pos, "expected a statement")),
            }
            if p.at_end() {
                break;
            }
            p.expect(';')?;
        }
    }

    let n = graph.groups.len();
    for r in &graph.relations {
        for idx in [r.from, r.to] {
            if idx >= n {
                let index = idx.checked_add(1).unwrap_or(0);
                return Err(ProbeError::DanglingRelation { index, groups: n });
            }
        }
    }
    Ok(graph)
}
