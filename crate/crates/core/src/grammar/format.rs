//! Text and structured serializations of a [`Grammar`].
//!
//! Text form, one rule per line:
//!
//! ```text
//! S0 -> R1 | R1 t2
//! R1 -> t0 t1
//! ```
//!
//! Terminals are `t<id>`, rule references `R<id>`, the episode boundary `|`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Grammar, Symbol};
use crate::error::{Error, Result};

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad grammar symbol {s:?}"));
        if s == "|" {
            return Ok(Symbol::Boundary);
        }
        let (head, num) = s.split_at(1.min(s.len()));
        let id: u32 = num.parse().map_err(|_| bad())?;
        match head {
            "t" => Ok(Symbol::Terminal(id)),
            "R" => Ok(Symbol::NonTerminal(id)),
            _ => Err(bad()),
        }
    }
}

fn join(body: &[Symbol]) -> String {
    body.iter().map(Symbol::to_string).collect::<Vec<_>>().join(" ")
}

impl Grammar {
    pub fn to_text(&self) -> String {
        let mut out = format!("S0 -> {}\n", join(&self.start));
        for (id, body) in &self.rules {
            let _ = writeln!(out, "R{id} -> {}", join(body));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut start = None;
        let mut rules = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, body) = line
                .split_once("->")
                .ok_or_else(|| Error::invalid(format!("line {}: missing '->'", lineno + 1)))?;
            let body = body
                .split_whitespace()
                .map(Symbol::from_str)
                .collect::<Result<Vec<_>>>()?;
            match head.trim() {
                "S0" => start = Some(body),
                h => match Symbol::from_str(h)? {
                    Symbol::NonTerminal(id) if id > 0 => {
                        rules.insert(id, body);
                    }
                    _ => return Err(Error::invalid(format!("line {}: bad rule name", lineno + 1))),
                },
            }
        }
        let start = start.ok_or_else(|| Error::invalid("grammar has no S0 line"))?;
        let next_rule_id = rules.keys().next_back().map_or(1, |k| k + 1);
        Ok(Grammar {
            start,
            rules,
            next_rule_id,
        })
    }

    pub fn to_document(&self) -> GrammarDocument {
        let names = |b: &[Symbol]| b.iter().map(Symbol::to_string).collect();
        GrammarDocument {
            start: names(&self.start),
            rules: self
                .rules
                .iter()
                .map(|(id, body)| (format!("R{id}"), names(body)))
                .collect(),
        }
    }
}

/// Structured export: `{"start": [...], "rules": {"R1": [...], ...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarDocument {
    pub start: Vec<String>,
    pub rules: BTreeMap<String, Vec<String>>,
}

impl GrammarDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("string maps serialize")
    }
}
