//! Multi-episode corpus construction, boundary-aware Sequitur induction,
//! grammar expansion and per-episode derivation trees.

mod format;
mod sequitur;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::SkillSequence;

pub use format::GrammarDocument;
pub use sequitur::induce;
pub use tree::{parse_trees, to_dot};

/// A grammar symbol. `Boundary` separates episodes and only ever appears in the start body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(u32),
    NonTerminal(u32),
    Boundary,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => write!(f, "t{t}"),
            Symbol::NonTerminal(r) => write!(f, "R{r}"),
            Symbol::Boundary => f.write_str("|"),
        }
    }
}

/// Episodes concatenated with a single boundary between consecutive episodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    symbols: Vec<Symbol>,
    episode_count: usize,
}

impl Corpus {
    /// Validates a raw symbol list: terminals and boundaries only, no empty episode.
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyEpisode);
        }
        let mut prev_boundary = true;
        for s in &symbols {
            match s {
                Symbol::Boundary if prev_boundary => return Err(Error::EmptyEpisode),
                Symbol::Boundary => prev_boundary = true,
                Symbol::Terminal(_) => prev_boundary = false,
                Symbol::NonTerminal(_) => {
                    return Err(Error::invalid("corpus may not contain non-terminals"))
                }
            }
        }
        if prev_boundary {
            return Err(Error::EmptyEpisode);
        }
        let episode_count = 1 + symbols.iter().filter(|s| **s == Symbol::Boundary).count();
        Ok(Self {
            symbols,
            episode_count,
        })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn episode_count(&self) -> usize {
        self.episode_count
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Terminal ids of each episode.
    pub fn episodes(&self) -> Vec<Vec<usize>> {
        self.symbols
            .split(|s| *s == Symbol::Boundary)
            .map(|ep| {
                ep.iter()
                    .map(|s| match s {
                        Symbol::Terminal(t) => *t as usize,
                        _ => unreachable!("validated corpus"),
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn build_corpus(sequences: &[SkillSequence]) -> Result<Corpus> {
    if sequences.is_empty() {
        return Err(Error::invalid("no episodes to build a corpus from"));
    }
    let mut symbols = Vec::new();
    for (i, seq) in sequences.iter().enumerate() {
        if seq.symbols.is_empty() {
            return Err(Error::EmptyEpisode);
        }
        if i > 0 {
            symbols.push(Symbol::Boundary);
        }
        for &t in &seq.symbols {
            let t = u32::try_from(t).map_err(|_| Error::invalid("skill id too large"))?;
            symbols.push(Symbol::Terminal(t));
        }
    }
    Corpus::new(symbols)
}

/// An induced context-free grammar. Rule `0` is implicit: it is the start body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub start: Vec<Symbol>,
    pub rules: BTreeMap<u32, Vec<Symbol>>,
    pub next_rule_id: u32,
}

impl Grammar {
    /// Sum of all body lengths, start included.
    pub fn size(&self) -> usize {
        self.start.len() + self.rules.values().map(Vec::len).sum::<usize>()
    }

    pub fn episode_count(&self) -> usize {
        1 + self.start.iter().filter(|s| **s == Symbol::Boundary).count()
    }

    fn body(&self, rule: u32) -> Result<&[Symbol]> {
        self.rules
            .get(&rule)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("reference to undefined rule R{rule}")))
    }

    /// Reject undefined references and cycles.
    pub fn check_acyclic(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<u32, Mark> = BTreeMap::new();
        for &root in self.rules.keys() {
            if marks.contains_key(&root) {
                continue;
            }
            // iterative DFS: (rule, next child index)
            let mut stack = vec![(root, 0usize)];
            marks.insert(root, Mark::Open);
            while let Some(&mut (rule, ref mut idx)) = stack.last_mut() {
                let body = self.body(rule)?;
                if let Some(sym) = body.get(*idx) {
                    *idx += 1;
                    if let Symbol::NonTerminal(child) = *sym {
                        self.body(child)?;
                        match marks.get(&child) {
                            Some(Mark::Open) => return Err(Error::CyclicGrammar),
                            Some(Mark::Done) => {}
                            None => {
                                marks.insert(child, Mark::Open);
                                stack.push((child, 0));
                            }
                        }
                    }
                } else {
                    marks.insert(rule, Mark::Done);
                    stack.pop();
                }
            }
        }
        for s in &self.start {
            if let Symbol::NonTerminal(r) = s {
                self.body(*r)?;
            }
        }
        Ok(())
    }

    /// Depth-first, left-to-right expansion of a symbol list into terminals and boundaries.
    fn expand_into(&self, symbols: &[Symbol], out: &mut Vec<Symbol>) -> Result<()> {
        let mut stack: Vec<std::slice::Iter<'_, Symbol>> = vec![symbols.iter()];
        while let Some(iter) = stack.last_mut() {
            match iter.next() {
                Some(Symbol::NonTerminal(r)) => {
                    let body = self.body(*r)?;
                    stack.push(body.iter());
                }
                Some(s) => out.push(*s),
                None => {
                    stack.pop();
                }
            }
        }
        Ok(())
    }
}

/// Full scan of the grammar invariants. Returns one message per violation:
/// a repeated non-overlapping digram, a rule used fewer than twice, a rule
/// body shorter than two symbols, or a boundary inside a rule body.
pub fn invariant_violations(grammar: &Grammar) -> Vec<String> {
    let mut problems = Vec::new();
    let mut uses: BTreeMap<u32, usize> = grammar.rules.keys().map(|&r| (r, 0)).collect();
    let mut seen: HashMap<(Symbol, Symbol), Vec<(u32, usize)>> = HashMap::new();
    let bodies = std::iter::once((0u32, &grammar.start)).chain(grammar.rules.iter().map(|(k, v)| (*k, v)));
    for (id, body) in bodies {
        if id != 0 {
            if body.len() < 2 {
                problems.push(format!("R{id} has a body of length {}", body.len()));
            }
            if body.contains(&Symbol::Boundary) {
                problems.push(format!("R{id} contains the boundary"));
            }
        }
        for s in body {
            if let Symbol::NonTerminal(r) = s {
                *uses.entry(*r).or_default() += 1;
            }
        }
        for (i, pair) in body.windows(2).enumerate() {
            if pair.contains(&Symbol::Boundary) {
                continue;
            }
            seen.entry((pair[0], pair[1])).or_default().push((id, i));
        }
    }
    for (r, n) in uses {
        if n < 2 {
            problems.push(format!("R{r} is referenced {n} time(s)"));
        }
    }
    for ((a, b), at) in seen {
        let overlapping =
            at.len() == 2 && a == b && at[0].0 == at[1].0 && at[0].1 + 1 == at[1].1;
        if at.len() > 1 && !overlapping {
            problems.push(format!("digram {a} {b} occurs {} times", at.len()));
        }
    }
    problems.sort();
    problems
}

/// Expand the start body back into the corpus it encodes.
pub fn expand(grammar: &Grammar) -> Result<Corpus> {
    grammar.check_acyclic()?;
    let mut out = Vec::new();
    grammar.expand_into(&grammar.start, &mut out)?;
    Corpus::new(out)
}
