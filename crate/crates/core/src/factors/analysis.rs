//! Analytic factor computation: CFG reachability plus path-clear def-use
//! queries, without enumerating paths.

use super::{assemble, AnalysisOptions, DepKind, DepsMode, FactorSet, PairFact};
use crate::minisol::{ProgramUnit, VarPath};
use std::collections::{BTreeSet, VecDeque};

pub(crate) struct Graph {
    pub succ: Vec<Vec<usize>>,
    /// reach[a][b]: a path of at least one edge leads from a to b.
    pub reach: Vec<Vec<bool>>,
    pub live: Vec<bool>,
}

pub(crate) fn graph(p: &ProgramUnit) -> Graph {
    let n = p.stmt_count();
    let mut succ = vec![Vec::new(); n];
    let mut live = vec![false; n];
    for cfg in &p.cfgs {
        for (s, next) in cfg.stmt_successors() {
            succ[s] = next;
        }
        for (b, alive) in cfg.live_blocks().into_iter().enumerate() {
            if alive {
                for &s in &cfg.blocks[b] {
                    live[s] = true;
                }
            }
        }
    }
    let mut reach = vec![vec![false; n]; n];
    // statement indices are a topological order, so a reverse sweep suffices
    for a in (0..n).rev() {
        for &b in &succ[a].clone() {
            reach[a][b] = true;
            let row = reach[b].clone();
            for (k, r) in row.into_iter().enumerate() {
                if r {
                    reach[a][k] = true;
                }
            }
        }
    }
    Graph { succ, reach, live }
}

pub(crate) fn call_stmts(p: &ProgramUnit) -> Vec<usize> {
    (0..p.stmt_count()).filter(|&s| p.stmts[s].call.is_some()).collect()
}

pub(crate) fn update_stmts(p: &ProgramUnit) -> Vec<usize> {
    (0..p.stmt_count()).filter(|&s| p.is_state_update(s)).collect()
}

/// Paths that carry data out of a statement: everything it reads or writes.
pub(crate) fn frontier(p: &ProgramUnit, s: usize) -> BTreeSet<VarPath> {
    let du = &p.defuse.stmts[s];
    du.reads_all().into_iter().chain(du.writes.iter().cloned()).collect()
}

pub(crate) fn local_writes(p: &ProgramUnit, s: usize) -> BTreeSet<VarPath> {
    let f = p.stmts[s].func;
    p.defuse.stmts[s].writes.iter().filter(|w| !p.defuse.is_state(f, w)).cloned().collect()
}

struct Ctx<'a> {
    p: &'a ProgramUnit,
    g: Graph,
}

impl<'a> Ctx<'a> {
    /// A path from `a` to `b` exists on which no statement strictly between
    /// them writes `v`.
    fn clear(&self, a: usize, b: usize, v: &VarPath) -> bool {
        let mut seen = vec![false; self.g.succ.len()];
        let mut queue: VecDeque<usize> = self.g.succ[a].iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            if x == b {
                return true;
            }
            if seen[x] {
                continue;
            }
            seen[x] = true;
            if self.p.defuse.stmts[x].writes.contains(v) {
                continue;
            }
            if !self.g.reach[x][b] {
                continue;
            }
            queue.extend(self.g.succ[x].iter().copied());
        }
        false
    }

    /// Intermediate statements transitively fed by `src` seeded with `vars`,
    /// each lying strictly between `src` and `dst`.
    fn intermediates(&self, src: usize, vars: &BTreeSet<VarPath>, dst: usize) -> Vec<usize> {
        let mut found: Vec<usize> = Vec::new();
        let mut queue = VecDeque::from([(src, vars.clone())]);
        let mut done = vec![false; self.g.succ.len()];
        while let Some((x, vx)) = queue.pop_front() {
            for y in 0..self.g.succ.len() {
                if done[y] || y == src || y == dst || !self.g.reach[x][y] || !self.g.reach[y][dst] {
                    continue;
                }
                let lw = local_writes(self.p, y);
                if lw.is_empty() {
                    continue;
                }
                let reads = self.p.defuse.stmts[y].reads_all();
                if vx.iter().any(|v| reads.contains(v) && self.clear(x, y, v)) {
                    done[y] = true;
                    found.push(y);
                    queue.push_back((y, lw));
                }
            }
        }
        found
    }

    fn reads_from(&self, src: usize, vars: &BTreeSet<VarPath>, dst: usize) -> Option<String> {
        let reads = self.p.defuse.stmts[dst].reads_all();
        vars.iter().find(|v| reads.contains(*v) && self.clear(src, dst, v)).map(|v| v.text.clone())
    }

    /// Strongest data flow from `a` to a later statement `b`.
    fn flow(&self, a: usize, b: usize, vars: &BTreeSet<VarPath>) -> (DepKind, String) {
        if !self.g.reach[a][b] {
            return (DepKind::None, String::new());
        }
        if let Some(v) = self.reads_from(a, vars, b) {
            return (DepKind::Direct, v);
        }
        for m in self.intermediates(a, vars, b) {
            if let Some(w) = self.reads_from(m, &local_writes(self.p, m), b) {
                return (DepKind::Indirect, format!("line {} -> {}", self.p.stmts[m].line, w));
            }
        }
        (DepKind::None, String::new())
    }

    /// The call's result decides a branch enclosing `u`.
    fn ctrl(&self, c: usize, u: usize) -> Option<String> {
        let ret = &self.p.defuse.stmts[c].writes;
        for &i in &self.p.stmts[u].enclosing_ifs {
            if i == c {
                return Some("call in branch condition".into());
            }
            if ret.is_empty() || !self.g.reach[c][i] {
                continue;
            }
            let (k, via) = self.flow(c, i, ret);
            if k != DepKind::None {
                return Some(format!("return value decides branch at line {} ({})", self.p.stmts[i].line, via));
            }
        }
        None
    }

    fn pair(&self, c: usize, u: usize, opts: &AnalysisOptions) -> Option<PairFact> {
        if !(self.g.live[c] && self.g.live[u]) || self.p.stmts[c].func != self.p.stmts[u].func {
            return None;
        }
        if c == u {
            return Some(PairFact { c, u, kind: DepKind::Direct, order: -1, via: "same statement".into() });
        }
        let (k1, v1) = self.flow(c, u, &frontier(self.p, c));
        let (k2, v2) = self.flow(u, c, &frontier(self.p, u));
        let (mut kind, mut via) = if k2 > k1 { (k2, v2) } else { (k1, v1) };
        if kind == DepKind::None && opts.deps == DepsMode::All {
            if let Some(v) = self.ctrl(c, u) {
                kind = DepKind::Ctrl;
                via = v;
            }
        }
        if kind == DepKind::None {
            return None;
        }
        let order = if self.g.reach[c][u] { -1 } else { 1 };
        Some(PairFact { c, u, kind, order, via })
    }
}

pub(crate) fn pair_facts(p: &ProgramUnit, opts: &AnalysisOptions) -> Vec<PairFact> {
    let ctx = Ctx { p, g: graph(p) };
    let calls = call_stmts(p);
    let updates = update_stmts(p);
    let mut out = Vec::new();
    for &c in &calls {
        for &u in &updates {
            if let Some(pf) = ctx.pair(c, u, opts) {
                out.push(pf);
            }
        }
    }
    out
}

pub fn analyze(p: &ProgramUnit, opts: &AnalysisOptions) -> FactorSet {
    assemble(p, &pair_facts(p, opts))
}

pub fn external_call_units(p: &ProgramUnit) -> Vec<bool> {
    let mut v = vec![false; p.n_lines()];
    for s in call_stmts(p) {
        v[p.stmts[s].line - 1] = true;
    }
    v
}

pub fn state_update_units(p: &ProgramUnit) -> Vec<bool> {
    let mut v = vec![false; p.n_lines()];
    for s in update_stmts(p) {
        v[p.stmts[s].line - 1] = true;
    }
    v
}

pub fn dependency_matrix(p: &ProgramUnit, opts: &AnalysisOptions) -> (Vec<Vec<bool>>, Vec<Vec<DepKind>>) {
    let fs = analyze(p, opts);
    (fs.phi_d, fs.dep_kind.expect("line analysis records kinds"))
}

/// φ_O restricted to the given dependency matrix.
pub fn ordering_matrix(p: &ProgramUnit, d: &[Vec<bool>]) -> Vec<Vec<i8>> {
    let g = graph(p);
    let n = p.n_lines();
    let mut o = vec![vec![0i8; n]; n];
    for c in call_stmts(p) {
        for u in update_stmts(p) {
            let (cl, ul) = (p.stmts[c].line - 1, p.stmts[u].line - 1);
            if !d[cl][ul] || !g.live[c] || !g.live[u] || p.stmts[c].func != p.stmts[u].func {
                continue;
            }
            let bad = c == u || g.reach[c][u];
            if bad {
                o[cl][ul] = -1;
            } else if o[cl][ul] == 0 {
                o[cl][ul] = 1;
            }
        }
    }
    o
}

/// Some call statement precedes some state update on a feasible path,
/// irrespective of any dependency between them.
pub fn call_precedes_update(p: &ProgramUnit) -> bool {
    let g = graph(p);
    let ups = update_stmts(p);
    call_stmts(p).into_iter().any(|c| g.live[c] && ups.iter().any(|&u| g.live[u] && (c == u || g.reach[c][u])))
}
