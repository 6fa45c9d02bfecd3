//! Sequitur over an arena of doubly linked symbols.
//!
//! Every rule body is a circular list closed by a guard node. The digram
//! index maps each eligible pair of adjacent symbols to the node holding its
//! first symbol. Pairs touching a guard or a boundary are never indexed, so a
//! boundary can never be pulled into a rule body.

use std::collections::{BTreeMap, HashMap};

use super::{Corpus, Grammar, Symbol};

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    Terminal(u32),
    Rule(u32),
    Boundary,
    Guard(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    T(u32),
    R(u32),
}

impl Sym {
    fn key(self) -> Option<Key> {
        match self {
            Sym::Terminal(t) => Some(Key::T(t)),
            Sym::Rule(r) => Some(Key::R(r)),
            Sym::Boundary | Sym::Guard(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    sym: Sym,
    prev: usize,
    next: usize,
    live: bool,
}

#[derive(Debug, Clone)]
struct Rule {
    guard: usize,
    uses: usize,
    live: bool,
}

struct Sequitur {
    nodes: Vec<Node>,
    rules: Vec<Rule>,
    digrams: HashMap<(Key, Key), usize>,
    /// Junction nodes created by rule expansion whose digram still needs a check.
    pending: Vec<usize>,
}

impl Sequitur {
    fn with_capacity(len: usize) -> Self {
        let mut s = Self {
            nodes: Vec::with_capacity(2 * len + 2),
            rules: Vec::new(),
            digrams: HashMap::with_capacity(len),
            pending: Vec::new(),
        };
        s.new_rule();
        s
    }

    fn new_rule(&mut self) -> u32 {
        let id = self.rules.len() as u32;
        let guard = self.nodes.len();
        self.nodes.push(Node {
            sym: Sym::Guard(id),
            prev: guard,
            next: guard,
            live: true,
        });
        self.rules.push(Rule {
            guard,
            uses: 0,
            live: true,
        });
        id
    }

    fn new_node(&mut self, sym: Sym) -> usize {
        if let Sym::Rule(r) = sym {
            self.rules[r as usize].uses += 1;
        }
        self.nodes.push(Node {
            sym,
            prev: NIL,
            next: NIL,
            live: true,
        });
        self.nodes.len() - 1
    }

    fn next(&self, n: usize) -> usize {
        self.nodes[n].next
    }

    fn prev(&self, n: usize) -> usize {
        self.nodes[n].prev
    }

    fn is_guard(&self, n: usize) -> bool {
        matches!(self.nodes[n].sym, Sym::Guard(_))
    }

    fn first(&self, r: u32) -> usize {
        self.next(self.rules[r as usize].guard)
    }

    fn last(&self, r: u32) -> usize {
        self.prev(self.rules[r as usize].guard)
    }

    fn digram(&self, n: usize) -> Option<(Key, Key)> {
        let nx = self.nodes[n].next;
        if nx == NIL {
            return None;
        }
        Some((self.nodes[n].sym.key()?, self.nodes[nx].sym.key()?))
    }

    /// Same indexable symbol (never true for guards or boundaries).
    fn same(&self, a: usize, b: usize) -> bool {
        self.nodes[a].sym.key().is_some() && self.nodes[a].sym == self.nodes[b].sym
    }

    fn delete_digram(&mut self, n: usize) {
        if let Some(d) = self.digram(n) {
            if self.digrams.get(&d) == Some(&n) {
                self.digrams.remove(&d);
            }
        }
    }

    fn set_digram(&mut self, n: usize) {
        if let Some(d) = self.digram(n) {
            self.digrams.insert(d, n);
        }
    }

    fn join(&mut self, left: usize, right: usize) {
        if self.nodes[left].next != NIL {
            self.delete_digram(left);
            // Re-index the surviving half of an overlapping run such as `x x x`.
            let (rp, rn) = (self.nodes[right].prev, self.nodes[right].next);
            if rp != NIL && rn != NIL && self.same(right, rp) && self.same(right, rn) {
                self.set_digram(right);
            }
            let (lp, ln) = (self.nodes[left].prev, self.nodes[left].next);
            if lp != NIL && ln != NIL && self.same(left, ln) && self.same(left, lp) {
                self.set_digram(lp);
            }
        }
        self.nodes[left].next = right;
        self.nodes[right].prev = left;
    }

    fn insert_after(&mut self, at: usize, node: usize) {
        let nx = self.next(at);
        self.join(node, nx);
        self.join(at, node);
    }

    fn remove(&mut self, n: usize) {
        let (p, nx) = (self.prev(n), self.next(n));
        self.join(p, nx);
        self.delete_digram(n);
        if let Sym::Rule(r) = self.nodes[n].sym {
            self.rules[r as usize].uses -= 1;
        }
        self.nodes[n].live = false;
    }

    /// Enforce digram uniqueness for the digram starting at `n`.
    /// Returns true when the structure around `n` was rewritten.
    fn check(&mut self, n: usize) -> bool {
        if !self.nodes[n].live || self.is_guard(n) || self.is_guard(self.next(n)) {
            return false;
        }
        let Some(d) = self.digram(n) else {
            return false;
        };
        match self.digrams.get(&d).copied() {
            None => {
                self.digrams.insert(d, n);
                false
            }
            Some(m) if m == n => false,
            // overlapping occurrence
            Some(m) if self.next(m) == n || self.next(n) == m => false,
            Some(m) => {
                self.match_digram(n, m);
                true
            }
        }
    }

    /// Replace the digram at `n` (and its next) by a reference to rule `r`.
    fn substitute(&mut self, n: usize, r: u32) {
        let q = self.prev(n);
        let a = self.next(q);
        self.remove(a);
        let b = self.next(q);
        self.remove(b);
        let node = self.new_node(Sym::Rule(r));
        self.insert_after(q, node);
        if !self.check(q) {
            let nx = self.next(q);
            self.check(nx);
        }
    }

    /// `new` repeats the already indexed digram at `old`.
    fn match_digram(&mut self, new: usize, old: usize) {
        let r = if self.is_guard(self.prev(old)) && self.is_guard(self.next(self.next(old))) {
            // the earlier occurrence is a complete rule body: reuse it
            let Sym::Guard(r) = self.nodes[self.prev(old)].sym else {
                unreachable!()
            };
            self.substitute(new, r);
            r
        } else {
            let r = self.new_rule();
            let a = self.new_node(self.nodes[new].sym);
            let b = self.new_node(self.nodes[self.next(new)].sym);
            let guard = self.rules[r as usize].guard;
            self.insert_after(guard, a);
            self.insert_after(a, b);
            self.substitute(old, r);
            self.substitute(new, r);
            let f = self.first(r);
            self.set_digram(f);
            r
        };
        // rule utility: a rule referenced from the new body may now be used once
        if !self.rules[r as usize].live {
            return;
        }
        for pos in [self.first(r), self.last(r)] {
            if !self.nodes[pos].live {
                continue;
            }
            if let Sym::Rule(inner) = self.nodes[pos].sym {
                if self.rules[inner as usize].live && self.rules[inner as usize].uses == 1 {
                    self.expand(pos);
                }
            }
        }
    }

    /// Inline the body of the once-used rule referenced at `n`.
    fn expand(&mut self, n: usize) {
        let Sym::Rule(r) = self.nodes[n].sym else {
            unreachable!("expand on a terminal")
        };
        let left = self.prev(n);
        let right = self.next(n);
        let f = self.first(r);
        let l = self.last(r);
        self.delete_digram(n);
        self.join(left, f);
        self.join(l, right);
        let guard = self.rules[r as usize].guard;
        self.nodes[guard].live = false;
        self.rules[r as usize].live = false;
        self.rules[r as usize].uses = 0;
        self.nodes[n].live = false;
        self.pending.push(left);
        self.pending.push(l);
    }

    fn drain_pending(&mut self) {
        while let Some(n) = self.pending.pop() {
            self.check(n);
        }
    }

    fn push(&mut self, sym: Sym) {
        let guard = self.rules[0].guard;
        let last = self.prev(guard);
        let node = self.new_node(sym);
        self.insert_after(last, node);
        let before = self.prev(node);
        self.check(before);
        self.drain_pending();
    }

    fn body(&self, r: u32) -> Vec<Sym> {
        let guard = self.rules[r as usize].guard;
        let mut out = Vec::new();
        let mut n = self.next(guard);
        while n != guard {
            out.push(self.nodes[n].sym);
            n = self.next(n);
        }
        out
    }

    fn into_grammar(self) -> Grammar {
        // live rules renumbered densely in creation order
        let mut ids = BTreeMap::new();
        for (r, rule) in self.rules.iter().enumerate().skip(1) {
            if rule.live {
                let dense = ids.len() as u32 + 1;
                ids.insert(r as u32, dense);
            }
        }
        let convert = |body: Vec<Sym>| -> Vec<Symbol> {
            body.into_iter()
                .map(|s| match s {
                    Sym::Terminal(t) => Symbol::Terminal(t),
                    Sym::Rule(r) => Symbol::NonTerminal(ids[&r]),
                    Sym::Boundary => Symbol::Boundary,
                    Sym::Guard(_) => unreachable!("guards are not part of bodies"),
                })
                .collect()
        };
        let start = convert(self.body(0));
        let rules = ids
            .iter()
            .map(|(&old, &new)| (new, convert(self.body(old))))
            .collect();
        Grammar {
            start,
            rules,
            next_rule_id: ids.len() as u32 + 1,
        }
    }
}

/// Induce a grammar whose start body expands back to `corpus`.
///
/// After every appended symbol no non-overlapping digram of non-boundary
/// symbols occurs twice across all bodies, and every rule is referenced at
/// least twice. Boundaries stay in the start body.
pub fn induce(corpus: &Corpus) -> Grammar {
    let mut s = Sequitur::with_capacity(corpus.len());
    for sym in corpus.symbols() {
        s.push(match *sym {
            Symbol::Terminal(t) => Sym::Terminal(t),
            Symbol::Boundary => Sym::Boundary,
            Symbol::NonTerminal(_) => unreachable!("validated corpus holds no non-terminals"),
        });
    }
    s.into_grammar()
}
