//! Per-function control-flow graphs over flattened statement indices.

use super::ast::{flatten, Ast, Stmt, StmtKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    Entry,
    Exit,
    Block(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Fallthrough,
    Then,
    Else,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub func: usize,
    /// Each block lists global statement indices in execution order.
    pub blocks: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    pub entry: Node,
    pub exit: Node,
}

struct Builder {
    blocks: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    next_idx: usize,
}

impl Builder {
    fn new_block(&mut self, preds: &[(Node, EdgeKind)]) -> usize {
        let b = self.blocks.len();
        self.blocks.push(Vec::new());
        for &(from, kind) in preds {
            self.edges.push(Edge { from, to: Node::Block(b), kind });
        }
        b
    }

    /// Returns dangling exits of the sequence.
    fn seq(&mut self, stmts: &[Stmt], mut preds: Vec<(Node, EdgeKind)>) -> Vec<(Node, EdgeKind)> {
        let mut cur: Option<usize> = None;
        for s in stmts {
            let idx = self.next_idx;
            self.next_idx += 1;
            let b = match cur {
                Some(b) => b,
                None => {
                    let b = self.new_block(&preds);
                    preds.clear();
                    b
                }
            };
            self.blocks[b].push(idx);
            match &s.kind {
                StmtKind::If { then_branch, else_branch, .. } => {
                    let mut outs = self.seq(then_branch, vec![(Node::Block(b), EdgeKind::Then)]);
                    match else_branch {
                        Some(e) => outs.extend(self.seq(e, vec![(Node::Block(b), EdgeKind::Else)])),
                        None => outs.push((Node::Block(b), EdgeKind::Else)),
                    }
                    preds = outs;
                    cur = None;
                }
                StmtKind::Return(_) => {
                    self.edges.push(Edge { from: Node::Block(b), to: Node::Exit, kind: EdgeKind::Return });
                    preds = Vec::new();
                    cur = None;
                }
                _ => cur = Some(b),
            }
        }
        match cur {
            Some(b) => vec![(Node::Block(b), EdgeKind::Fallthrough)],
            None => preds,
        }
    }
}

/// One CFG per function, in declaration order.
pub fn build_cfg(ast: &Ast) -> Vec<Cfg> {
    let mut out = Vec::new();
    let mut next_idx = 0;
    for (fi, f) in ast.functions.iter().enumerate() {
        let mut b = Builder { blocks: Vec::new(), edges: Vec::new(), next_idx };
        let outs = b.seq(&f.body, vec![(Node::Entry, EdgeKind::Fallthrough)]);
        for (from, kind) in outs {
            b.edges.push(Edge { from, to: Node::Exit, kind });
        }
        next_idx = b.next_idx;
        out.push(Cfg { func: fi, blocks: b.blocks, edges: b.edges, entry: Node::Entry, exit: Node::Exit });
    }
    debug_assert_eq!(next_idx, flatten(ast).len());
    out
}

impl Cfg {
    pub fn successors(&self, n: Node) -> Vec<Node> {
        self.edges.iter().filter(|e| e.from == n).map(|e| e.to).collect()
    }

    /// All acyclic entry-to-exit paths as block sequences.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn dfs(cfg: &Cfg, n: Node, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if n == Node::Exit {
                out.push(cur.clone());
                return;
            }
            for s in cfg.successors(n) {
                if let Node::Block(b) = s {
                    cur.push(b);
                    dfs(cfg, s, cur, out);
                    cur.pop();
                } else {
                    dfs(cfg, s, cur, out);
                }
            }
        }
        let mut out = Vec::new();
        dfs(self, Node::Entry, &mut Vec::new(), &mut out);
        out
    }

    /// Statement sequences of every entry-to-exit path.
    pub fn statement_paths(&self) -> Vec<Vec<usize>> {
        self.paths().into_iter().map(|p| p.into_iter().flat_map(|b| self.blocks[b].iter().copied()).collect()).collect()
    }

    pub fn statements(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().flatten().copied()
    }

    /// Statement-level successor lists keyed by global statement index.
    pub fn stmt_successors(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (k, &s) in b.iter().enumerate() {
                let succ = if k + 1 < b.len() {
                    vec![b[k + 1]]
                } else {
                    self.successors(Node::Block(bi))
                        .into_iter()
                        .filter_map(|n| match n {
                            Node::Block(t) => self.blocks[t].first().copied(),
                            _ => None,
                        })
                        .collect()
                };
                out.push((s, succ));
            }
        }
        out
    }

    /// Blocks reachable from the entry node.
    pub fn live_blocks(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![Node::Entry];
        while let Some(n) = stack.pop() {
            for s in self.successors(n) {
                if let Node::Block(b) = s {
                    if !seen[b] {
                        seen[b] = true;
                        stack.push(s);
                    }
                }
            }
        }
        seen
    }
}
