//! Parser, CFG and def-use construction for the contract subset emitted by
//! the corpus generators (declarations, assignments, `require`, one-level
//! `if/else`, early `return`, interface and low-level calls).

pub mod ast;
pub mod cfg;
pub mod defuse;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{Ast, CallKind, Expr, Stmt, StmtKind};
pub use cfg::{build_cfg, Cfg, EdgeKind, Node};
pub use defuse::{build_defuse, DefUse, StmtDefUse, VarPath};
pub use diag::{DiagCode, Diagnostic, ParseError};
pub use parser::{parse, AnchorKind, Parsed, SourceUnit};

/// Per-statement structural facts, indexed like `DefUse::stmts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StmtInfo {
    pub func: usize,
    pub line: usize,
    pub enclosing_ifs: Vec<usize>,
    pub call: Option<CallKind>,
    pub is_if: bool,
    pub is_require: bool,
    pub is_return: bool,
    pub compound: bool,
    /// Statement indices of each enclosing `if`'s then-branch or else-branch
    /// membership: `(if_idx, then?)`.
    pub branch_of: Vec<(usize, bool)>,
}

/// A parsed program with its derived graphs: the carrier of every factor
/// computation.
#[derive(Debug, Clone)]
pub struct ProgramUnit {
    pub source: SourceUnit,
    pub ast: Ast,
    pub cfgs: Vec<Cfg>,
    pub defuse: DefUse,
    pub stmts: Vec<StmtInfo>,
    pub warnings: Vec<Diagnostic>,
}

impl ProgramUnit {
    pub fn parse(src: &str) -> Result<ProgramUnit, ParseError> {
        let Parsed { source, ast, warnings } = parse(src)?;
        Ok(ProgramUnit::from_parts(source, ast, warnings))
    }

    pub fn from_parts(source: SourceUnit, ast: Ast, warnings: Vec<Diagnostic>) -> ProgramUnit {
        let cfgs = build_cfg(&ast);
        let defuse = build_defuse(&ast);
        let stmts = stmt_infos(&ast);
        ProgramUnit { source, ast, cfgs, defuse, stmts, warnings }
    }

    pub fn n_lines(&self) -> usize {
        self.source.n_lines()
    }

    pub fn stmt_count(&self) -> usize {
        self.stmts.len()
    }

    /// Indices of statements that write contract storage.
    pub fn is_state_update(&self, s: usize) -> bool {
        let f = self.stmts[s].func;
        self.defuse.stmts[s].writes.iter().any(|p| self.defuse.is_state(f, p))
    }

    pub fn branch_count(&self) -> usize {
        self.stmts.iter().filter(|s| s.is_if).count()
    }
}

fn stmt_infos(ast: &Ast) -> Vec<StmtInfo> {
    fn walk(stmts: &[Stmt], func: usize, ctx: &mut Vec<(usize, bool)>, out: &mut Vec<StmtInfo>) {
        for s in stmts {
            let idx = out.len();
            out.push(StmtInfo {
                func,
                line: s.line,
                enclosing_ifs: ctx.iter().map(|c| c.0).collect(),
                call: s.ext_call().map(|c| c.kind),
                is_if: s.is_branch(),
                is_require: matches!(s.kind, StmtKind::Require { .. }),
                is_return: matches!(s.kind, StmtKind::Return(_)),
                compound: matches!(
                    s.kind,
                    StmtKind::Assign { op: ast::AssignOp::PlusAssign | ast::AssignOp::MinusAssign, .. }
                ),
                branch_of: ctx.clone(),
            });
            if let StmtKind::If { then_branch, else_branch, .. } = &s.kind {
                ctx.push((idx, true));
                walk(then_branch, func, ctx, out);
                ctx.pop();
                if let Some(e) = else_branch {
                    ctx.push((idx, false));
                    walk(e, func, ctx, out);
                    ctx.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    for (fi, f) in ast.functions.iter().enumerate() {
        walk(&f.body, fi, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    fn unit(body: &str) -> ProgramUnit {
        let src = format!(
            "contract C {{\n    mapping(address => uint256) public ledger;\n    function f(address a, uint256 v, address t) external {{\n{}\n    }}\n}}\n",
            body
        );
        ProgramUnit::parse(&src).unwrap_or_else(|e| panic!("{}: {}", e, src))
    }

    fn names(set: &std::collections::BTreeSet<VarPath>) -> Vec<String> {
        set.iter().map(|p| p.text.clone()).collect()
    }

    #[test]
    fn compound_assignment_reads_and_writes_same_path() {
        let src = "contract C {\n uint256[] values;\n mapping(address => mapping(uint256 => uint256)) mainLedger;\n function f(address from, uint256 i) external {\n mainLedger[from][i] -= values[i];\n }\n}";
        let u = ProgramUnit::parse(src).unwrap();
        let du = &u.defuse.stmts[0];
        assert_eq!(names(&du.reads), vec!["mainLedger[from][i]", "values[i]"]);
        assert_eq!(names(&du.writes), vec!["mainLedger[from][i]"]);
        assert_eq!(names(&du.index_reads), vec!["from", "i"]);
        match &u.ast.functions[0].body[0].kind {
            StmtKind::Assign { op, .. } => assert_eq!(*op, AssignOp::MinusAssign),
            k => panic!("{:?}", k),
        }
    }

    #[test]
    fn empty_function_has_no_statements() {
        let u = ProgramUnit::parse("contract C {\n function f() external {\n }\n}").unwrap();
        assert_eq!(u.stmt_count(), 0);
        assert!(u.source.anchors.is_empty());
        assert_eq!(u.cfgs[0].blocks.len(), 0);
        assert_eq!(u.cfgs[0].paths().len(), 1);
    }

    #[test]
    fn capture_declaration_defuse() {
        let u = unit("        uint256 x = IERC20(t).balanceOf(a);");
        assert_eq!(names(&u.defuse.stmts[0].reads), vec!["a", "t"]);
        assert_eq!(names(&u.defuse.stmts[0].writes), vec!["x"]);
        let u = unit("        IERC20 tk = IERC20(t);\n        uint256 x = tk.balanceOf(a);");
        assert_eq!(names(&u.defuse.stmts[1].reads), vec!["a", "tk"]);
        assert!(u.stmts[1].call.is_some() && u.stmts[0].call.is_none());
    }

    #[test]
    fn require_is_pure_read() {
        let u = unit("        require(v > 0);");
        assert_eq!(names(&u.defuse.stmts[0].reads), vec!["v"]);
        assert!(u.defuse.stmts[0].writes.is_empty());
    }

    #[test]
    fn low_level_tuple_capture() {
        let u = unit("        (bool success, ) = a.call{value: v}(\"\");");
        assert_eq!(names(&u.defuse.stmts[0].reads), vec!["a", "v"]);
        assert_eq!(names(&u.defuse.stmts[0].writes), vec!["success"]);
        assert_eq!(u.stmts[0].call, Some(CallKind::LowLevel));
    }

    #[test]
    fn nested_and_multiple_calls_rejected() {
        let e = ProgramUnit::parse(
            "contract C {\n function f(address t, address a) external {\n IERC20(t).transfer(a, IERC20(t).balanceOf(a));\n }\n}",
        )
        .unwrap_err();
        assert!(e.has(DiagCode::NestedExternalCall));
        let e = ProgramUnit::parse(
            "contract C {\n function f(address t, address a) external {\n uint256 x = IERC20(t).balanceOf(a) + IERC20(a).balanceOf(t);\n }\n}",
        )
        .unwrap_err();
        assert!(e.has(DiagCode::NestedExternalCall));
    }

    #[test]
    fn unsupported_constructs() {
        for body in [
            "for (uint256 i = 0; i < 3; i++) { x = 1; }",
            "assembly { }",
            "unchecked { x = 1; }",
            "try t.f() { } catch { }",
            "emit E();",
        ] {
            let src = format!("contract C {{\n uint256 x;\n function f(address t) external {{\n {}\n }}\n}}", body);
            let e = ProgramUnit::parse(&src).unwrap_err();
            assert!(e.has(DiagCode::UnsupportedConstruct), "{}: {:?}", body, e);
        }
        let e = ProgramUnit::parse("contract C is D {\n}").unwrap_err();
        assert!(e.has(DiagCode::UnsupportedConstruct));
        let e = ProgramUnit::parse("contract C {\n modifier m() { _; }\n}").unwrap_err();
        assert!(e.has(DiagCode::UnsupportedConstruct));
    }

    #[test]
    fn dangling_anchor_and_sibling_lines() {
        let e = ProgramUnit::parse("contract C {\n uint256 x;\n function f() external {\n //s\n\n x = 1;\n }\n}")
            .unwrap_err();
        assert!(e.has(DiagCode::DanglingAnchor));
        assert_eq!(e.diagnostics[0].line, 4);
        let e = ProgramUnit::parse("contract C {\n uint256 x;\n function f() external {\n x = 1; x = 2;\n }\n}")
            .unwrap_err();
        assert!(e.has(DiagCode::MultipleStatementsPerLine));
        let js = e.to_json();
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        assert_eq!(v[0]["line"], 4);
        assert_eq!(v[0]["code"], "MultipleStatementsPerLine");
    }

    #[test]
    fn single_line_if_is_allowed() {
        let u = unit("        if (IERC20(t).balanceOf(a) == 0) return;\n        ledger[a] = v;");
        assert_eq!(u.stmt_count(), 3);
        assert_eq!(u.stmts[0].line, u.stmts[1].line);
        assert!(u.stmts[0].call.is_some());
    }

    #[test]
    fn cfg_shapes() {
        let u = unit("        uint256 x = v;\n        uint256 y = x;\n        ledger[a] = y;");
        let g = &u.cfgs[0];
        assert_eq!(g.blocks.len(), 1);
        assert_eq!(g.edges.len(), 2);
        let u = unit("        uint256 x = v;\n        if (v > 1) {\n            x = 2;\n        } else {\n            x = 3;\n        }\n        ledger[a] = x;");
        let g = &u.cfgs[0];
        assert_eq!(g.blocks.len(), 4);
        assert_eq!(g.paths().len(), 2);
        let u = unit("        if (v == 0) return;\n        uint256 x = v;\n        ledger[a] = x;");
        let g = &u.cfgs[0];
        assert_eq!(g.paths().len(), 2);
        assert!(g.edges.iter().any(|e| e.kind == EdgeKind::Return));
    }

    #[test]
    fn dead_code_is_a_warning() {
        let u = unit("        return;\n        ledger[a] = v;");
        assert!(u.warnings.iter().any(|w| w.code == DiagCode::DeadCode));
        assert!(!u.cfgs[0].live_blocks()[1]);
    }

    #[test]
    fn round_trip_through_printer() {
        let u = unit("        (bool ok, ) = a.call{value: v * 2}(\"\");\n        require(ok && v > 0, \"x\");\n        if (!ok) {\n            ledger[a] += (v - 1) * 3;\n        } else {\n            ledger[a] = v > 2 ? v : 0;\n        }\n        ledger[a]++;");
        let printed = printer::print_ast(&u.ast);
        let again = ProgramUnit::parse(&printed).unwrap();
        assert_eq!(u.ast.erase_lines(), again.ast.erase_lines());
    }

    #[test]
    fn state_update_excludes_locals_and_shadowing() {
        let src = "contract C {\n uint256 total;\n mapping(address => uint256) ledger;\n function f(uint256 total2) external {\n uint256 ledger2 = 1;\n ledger[msg.sender] = ledger2;\n total = total2;\n }\n function g(uint256 total) external {\n total = 3;\n }\n}";
        let u = ProgramUnit::parse(src).unwrap();
        assert!(!u.is_state_update(0));
        assert!(u.is_state_update(1));
        assert!(u.is_state_update(2));
        assert!(!u.is_state_update(3));
    }
}
