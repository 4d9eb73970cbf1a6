//! Path-enumeration oracle: walks every acyclic entry-to-exit path and
//! simulates value flow statement by statement.

use super::analysis::{call_stmts, frontier, local_writes, update_stmts};
use super::{assemble, AnalysisOptions, DepKind, DepsMode, FactorSet, PairFact};
use crate::minisol::{ProgramUnit, VarPath};
use std::collections::BTreeSet;

pub const ORACLE_MAX_BRANCHES: usize = 2;
pub const ORACLE_MAX_LINES: usize = 25;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("program too large for path enumeration: {lines} lines, {branches} branches")]
    TooLarge { lines: usize, branches: usize },
}

#[derive(Default)]
struct Taint {
    direct: BTreeSet<VarPath>,
    derived: BTreeSet<VarPath>,
}

impl Taint {
    fn kill(&mut self, writes: &BTreeSet<VarPath>) {
        for w in writes {
            self.direct.remove(w);
            self.derived.remove(w);
        }
    }

    fn touches(&self, reads: &BTreeSet<VarPath>) -> (bool, bool) {
        (reads.iter().any(|r| self.direct.contains(r)), reads.iter().any(|r| self.derived.contains(r)))
    }
}

pub fn brute_force_oracle(p: &ProgramUnit, opts: &AnalysisOptions) -> Result<FactorSet, OracleError> {
    let lines = p.n_lines();
    let branches = p.branch_count();
    if lines > ORACLE_MAX_LINES || branches > ORACLE_MAX_BRANCHES {
        return Err(OracleError::TooLarge { lines, branches });
    }
    let n = p.stmt_count();
    // flow[a][b]: strongest value flow from a to b observed on any path
    let mut flow = vec![vec![DepKind::None; n]; n];
    let mut ctrl = vec![vec![false; n]; n];
    let mut before = vec![vec![false; n]; n];
    let mut on_path = vec![false; n];

    for cfg in &p.cfgs {
        for path in cfg.statement_paths() {
            for (i, &a) in path.iter().enumerate() {
                on_path[a] = true;
                let mut data = Taint { direct: frontier(p, a), derived: BTreeSet::new() };
                let ret = &p.defuse.stmts[a].writes;
                let mut result = Taint { direct: ret.clone(), derived: BTreeSet::new() };
                let mut deciding: BTreeSet<usize> = BTreeSet::new();
                if p.stmts[a].is_if && p.stmts[a].call.is_some() {
                    deciding.insert(a);
                }
                for &b in &path[i + 1..] {
                    before[a][b] = true;
                    let du = &p.defuse.stmts[b];
                    let reads = du.reads_all();
                    let (d, x) = data.touches(&reads);
                    let k = if d {
                        DepKind::Direct
                    } else if x {
                        DepKind::Indirect
                    } else {
                        DepKind::None
                    };
                    flow[a][b] = flow[a][b].max(k);
                    let (rd, rx) = result.touches(&reads);
                    if p.stmts[b].is_if && (rd || rx) {
                        deciding.insert(b);
                    }
                    if p.stmts[b].enclosing_ifs.iter().any(|e| deciding.contains(e)) {
                        ctrl[a][b] = true;
                    }
                    data.kill(&du.writes);
                    result.kill(&du.writes);
                    let lw = local_writes(p, b);
                    if d || x {
                        data.derived.extend(lw.iter().cloned());
                    }
                    if rd || rx {
                        result.derived.extend(lw.iter().cloned());
                    }
                }
            }
        }
    }

    let mut pairs = Vec::new();
    for c in call_stmts(p) {
        for u in update_stmts(p) {
            if !on_path[c] || !on_path[u] || p.stmts[c].func != p.stmts[u].func {
                continue;
            }
            if c == u {
                pairs.push(PairFact { c, u, kind: DepKind::Direct, order: -1, via: "same statement".into() });
                continue;
            }
            let mut kind = flow[c][u].max(flow[u][c]);
            if kind == DepKind::None && opts.deps == DepsMode::All && ctrl[c][u] {
                kind = DepKind::Ctrl;
            }
            if kind == DepKind::None {
                continue;
            }
            let order = if before[c][u] { -1 } else { 1 };
            pairs.push(PairFact { c, u, kind, order, via: "path enumeration".into() });
        }
    }
    Ok(assemble(p, &pairs))
}
