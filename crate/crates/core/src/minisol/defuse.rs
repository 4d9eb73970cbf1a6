//! Read/write sets per statement over normalized access paths.

use super::ast::*;
use super::printer::expr_str;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt;

/// Normalized access path such as `m[from][i]` or `vaults[id].asset`.
/// Two paths alias iff their normalized strings are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarPath {
    pub text: String,
    pub base: String,
}

impl VarPath {
    pub fn of(e: &Expr) -> Option<VarPath> {
        if !e.is_path() {
            return None;
        }
        Some(VarPath { text: expr_str(e), base: e.path_base()?.to_string() })
    }

    pub fn ident(name: &str) -> VarPath {
        VarPath { text: name.to_string(), base: name.to_string() }
    }

    pub fn is_indexed(&self) -> bool {
        self.text.contains('[')
    }
}

impl fmt::Display for VarPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StmtDefUse {
    /// Maximal paths read (the value, not the index sub-expressions).
    pub reads: BTreeSet<VarPath>,
    /// Paths read inside index expressions of accessed locations.
    pub index_reads: BTreeSet<VarPath>,
    pub writes: BTreeSet<VarPath>,
    /// Names declared by this statement.
    pub declares: BTreeSet<String>,
}

impl StmtDefUse {
    pub fn reads_all(&self) -> BTreeSet<VarPath> {
        self.reads.union(&self.index_reads).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefUse {
    /// Indexed by global (pre-order) statement index.
    pub stmts: Vec<StmtDefUse>,
    pub state_vars: BTreeSet<String>,
    /// Parameters, return names and locals declared per function.
    pub locals: Vec<BTreeSet<String>>,
}

impl DefUse {
    /// True when `p` denotes contract storage inside function `func`.
    pub fn is_state(&self, func: usize, p: &VarPath) -> bool {
        self.state_vars.contains(&p.base) && !self.locals[func].contains(&p.base)
    }
}

/// Splits the reads of `e` into maximal paths and index-position paths.
fn split_reads(e: &Expr, du: &mut StmtDefUse) {
    let mut all = BTreeSet::new();
    collect(e, &mut all, &mut du.index_reads);
    du.reads.extend(all);
}

fn collect(e: &Expr, value: &mut BTreeSet<VarPath>, index: &mut BTreeSet<VarPath>) {
    if let Some(p) = VarPath::of(e) {
        value.insert(p);
        collect_index(e, index);
        return;
    }
    match e {
        Expr::Ident(_) | Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) => {}
        Expr::Member(b, _) => collect(b, value, index),
        Expr::Index(b, i) => {
            collect(b, value, index);
            collect(i, value, index);
        }
        Expr::Unary(_, x) | Expr::Cast(_, x) => collect(x, value, index),
        Expr::Binary(_, a, b) => {
            collect(a, value, index);
            collect(b, value, index);
        }
        Expr::Ternary(a, b, c) => {
            collect(a, value, index);
            collect(b, value, index);
            collect(c, value, index);
        }
        Expr::FnCall(_, args) | Expr::New(_, args) => args.iter().for_each(|a| collect(a, value, index)),
        Expr::ExtCall(c) => {
            collect(&c.target, value, index);
            c.options.iter().for_each(|(_, v)| collect(v, value, index));
            c.args.iter().for_each(|a| collect(a, value, index));
        }
    }
}

/// Paths used inside the index positions of a location expression.
fn collect_index(e: &Expr, index: &mut BTreeSet<VarPath>) {
    match e {
        Expr::Member(b, _) => collect_index(b, index),
        Expr::Index(b, i) => {
            collect_index(b, index);
            let mut inner = BTreeSet::new();
            collect(i, &mut inner, index);
            index.extend(inner);
        }
        _ => {}
    }
}

fn lvalue(e: &Expr, du: &mut StmtDefUse, compound: bool) {
    if let Some(p) = VarPath::of(e) {
        if compound {
            du.reads.insert(p.clone());
        }
        du.writes.insert(p);
        collect_index(e, &mut du.index_reads);
    }
}

pub fn stmt_defuse(s: &Stmt) -> StmtDefUse {
    let mut du = StmtDefUse::default();
    match &s.kind {
        StmtKind::VarDecl { name, init, .. } => {
            if let Some(i) = init {
                split_reads(i, &mut du);
            }
            du.writes.insert(VarPath::ident(name));
            du.declares.insert(name.clone());
        }
        StmtKind::Assign { lhs, op, rhs } => {
            split_reads(rhs, &mut du);
            lvalue(lhs, &mut du, *op != AssignOp::Plain);
        }
        StmtKind::Require { cond, message } => {
            split_reads(cond, &mut du);
            if let Some(m) = message {
                split_reads(m, &mut du);
            }
        }
        StmtKind::If { cond, .. } => split_reads(cond, &mut du),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                split_reads(e, &mut du);
            }
        }
        StmtKind::ExternalCall { call, capture } => {
            split_reads(&Expr::ExtCall(call.clone()), &mut du);
            match capture {
                None => {}
                Some(Capture::Decl { name, .. }) => {
                    du.writes.insert(VarPath::ident(name));
                    du.declares.insert(name.clone());
                }
                Some(Capture::Assign { lhs }) => lvalue(lhs, &mut du, false),
                Some(Capture::Tuple(slots)) => {
                    for slot in slots.iter().flatten() {
                        lvalue(&slot.name, &mut du, false);
                        if slot.ty.is_some() {
                            if let Expr::Ident(n) = &slot.name {
                                du.declares.insert(n.clone());
                            }
                        }
                    }
                }
            }
        }
        StmtKind::Expr(e) => split_reads(e, &mut du),
    }
    du
}

pub fn build_defuse(ast: &Ast) -> DefUse {
    let flat = flatten(ast);
    let stmts: Vec<StmtDefUse> = flat.iter().map(|f| stmt_defuse(f.stmt)).collect();
    let state_vars = ast.state_vars.iter().map(|v| v.name.clone()).collect();
    let mut locals: Vec<BTreeSet<String>> = ast
        .functions
        .iter()
        .map(|f| f.params.iter().chain(&f.returns).filter_map(|p| p.name.clone()).collect())
        .collect();
    for (f, du) in flat.iter().zip(&stmts) {
        locals[f.func].extend(du.declares.iter().cloned());
    }
    DefUse { stmts, state_vars, locals }
}

/// Names appearing anywhere in the unit (used by generators to avoid clashes).
pub fn all_identifiers(ast: &Ast) -> HashSet<String> {
    let mut out = HashSet::new();
    for f in flatten(ast) {
        for e in f.stmt.own_exprs() {
            e.visit(&mut |x| {
                if let Expr::Ident(n) = x {
                    out.insert(n.clone());
                }
            });
        }
    }
    out
}
