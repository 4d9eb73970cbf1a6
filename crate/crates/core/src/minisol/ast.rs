use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeName {
    Elementary(String),
    Named(String),
    Mapping(Box<TypeName>, Box<TypeName>),
    Array(Box<TypeName>, Option<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CallKind {
    /// Interface-style call `x.f(...)` (Slither's HIGH_LEVEL_CALL).
    HighLevel,
    /// `.call{...}(...)`, `.transfer(v)`, `.send(v)`.
    LowLevel,
    Delegate,
    Static,
}

impl CallKind {
    pub fn index(self) -> usize {
        match self {
            CallKind::HighLevel => 0,
            CallKind::LowLevel => 1,
            CallKind::Delegate => 2,
            CallKind::Static => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallExpr {
    pub target: Box<Expr>,
    pub method: String,
    pub options: Vec<(String, Expr)>,
    pub args: Vec<Expr>,
    pub kind: CallKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Ident(String),
    Number(String),
    Str(String),
    Bool(bool),
    Member(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Unary(String, Box<Expr>),
    Binary(String, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Type conversion `T(x)`, including interface casts `IERC20(addr)`.
    Cast(TypeName, Box<Expr>),
    /// Internal or builtin function call; never crosses the contract boundary.
    FnCall(String, Vec<Expr>),
    New(TypeName, Vec<Expr>),
    ExtCall(CallExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignOp {
    Plain,
    PlusAssign,
    MinusAssign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSlot {
    pub ty: Option<TypeName>,
    pub location: Option<String>,
    pub name: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capture {
    Decl { ty: TypeName, location: Option<String>, name: String },
    Assign { lhs: Expr },
    Tuple(Vec<Option<TupleSlot>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    VarDecl {
        ty: TypeName,
        location: Option<String>,
        name: String,
        init: Option<Expr>,
    },
    Assign {
        lhs: Expr,
        op: AssignOp,
        rhs: Expr,
    },
    Require {
        cond: Expr,
        message: Option<Expr>,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    Return(Option<Expr>),
    ExternalCall {
        call: CallExpr,
        capture: Option<Capture>,
    },
    /// Expression statement without an external call (e.g. an internal call).
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    External,
    Public,
    Internal,
    Private,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub ty: TypeName,
    pub location: Option<String>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Option<String>,
    pub returns: Vec<Param>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

impl FunctionDef {
    pub fn externally_visible(&self) -> bool {
        matches!(self.visibility, Visibility::External | Visibility::Public)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVar {
    pub ty: TypeName,
    pub name: String,
    pub attrs: Vec<String>,
    pub init: Option<Expr>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<(TypeName, String)>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    pub contract_name: String,
    pub imports: Vec<String>,
    pub interfaces: Vec<String>,
    pub structs: Vec<StructDef>,
    pub state_vars: Vec<StateVar>,
    pub functions: Vec<FunctionDef>,
}

impl Stmt {
    /// Expressions evaluated by this statement itself (not by nested branches).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::VarDecl { init, .. } => init.iter().collect(),
            StmtKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            StmtKind::Require { cond, message } => {
                let mut v = vec![cond];
                v.extend(message.iter());
                v
            }
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::ExternalCall { capture, .. } => match capture {
                Some(Capture::Assign { lhs }) => vec![lhs],
                Some(Capture::Tuple(slots)) => slots.iter().flatten().map(|s| &s.name).collect(),
                _ => vec![],
            },
            StmtKind::Expr(e) => vec![e],
        }
    }

    /// The external call performed by this statement, if any.
    pub fn ext_call(&self) -> Option<&CallExpr> {
        if let StmtKind::ExternalCall { call, .. } = &self.kind {
            return Some(call);
        }
        self.own_exprs().into_iter().find_map(Expr::find_ext_call)
    }

    pub fn is_branch(&self) -> bool {
        matches!(self.kind, StmtKind::If { .. })
    }
}

impl Expr {
    /// Pre-order visit of this expression and all sub-expressions.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Ident(_) | Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) => {}
            Expr::Member(b, _) => b.visit(f),
            Expr::Index(b, i) => {
                b.visit(f);
                i.visit(f);
            }
            Expr::Unary(_, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Ternary(a, b, c) => {
                a.visit(f);
                b.visit(f);
                c.visit(f);
            }
            Expr::Cast(_, e) => e.visit(f),
            Expr::FnCall(_, args) | Expr::New(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::ExtCall(c) => {
                c.target.visit(f);
                c.options.iter().for_each(|(_, e)| e.visit(f));
                c.args.iter().for_each(|a| a.visit(f));
            }
        }
    }

    pub fn find_ext_call(&self) -> Option<&CallExpr> {
        match self {
            Expr::ExtCall(c) => Some(c),
            Expr::Ident(_) | Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) => None,
            Expr::Member(b, _) | Expr::Unary(_, b) | Expr::Cast(_, b) => b.find_ext_call(),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => a.find_ext_call().or_else(|| b.find_ext_call()),
            Expr::Ternary(a, b, c) => a.find_ext_call().or_else(|| b.find_ext_call()).or_else(|| c.find_ext_call()),
            Expr::FnCall(_, args) | Expr::New(_, args) => args.iter().find_map(Expr::find_ext_call),
        }
    }

    pub fn count_ext_calls(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::ExtCall(_)) {
                n += 1
            }
        });
        n
    }

    /// True for identifier/member/index chains, i.e. storage or memory locations.
    pub fn is_path(&self) -> bool {
        match self {
            Expr::Ident(_) => true,
            Expr::Member(b, _) => b.is_path(),
            Expr::Index(b, _) => b.is_path(),
            _ => false,
        }
    }

    pub fn path_base(&self) -> Option<&str> {
        match self {
            Expr::Ident(n) => Some(n),
            Expr::Member(b, _) | Expr::Index(b, _) => b.path_base(),
            _ => None,
        }
    }
}

/// Statement in pre-order over all function bodies, with structural context.
#[derive(Debug, Clone)]
pub struct FlatStmt<'a> {
    pub idx: usize,
    pub func: usize,
    pub stmt: &'a Stmt,
    /// Enclosing `if` statements, innermost last.
    pub enclosing_ifs: Vec<usize>,
}

pub fn flatten(ast: &Ast) -> Vec<FlatStmt<'_>> {
    fn walk<'a>(stmts: &'a [Stmt], func: usize, ifs: &mut Vec<usize>, out: &mut Vec<FlatStmt<'a>>) {
        for s in stmts {
            let idx = out.len();
            out.push(FlatStmt { idx, func, stmt: s, enclosing_ifs: ifs.clone() });
            if let StmtKind::If { then_branch, else_branch, .. } = &s.kind {
                ifs.push(idx);
                walk(then_branch, func, ifs, out);
                if let Some(e) = else_branch {
                    walk(e, func, ifs, out);
                }
                ifs.pop();
            }
        }
    }
    let mut out = Vec::new();
    for (fi, f) in ast.functions.iter().enumerate() {
        walk(&f.body, fi, &mut Vec::new(), &mut out);
    }
    out
}

impl Ast {
    /// Copy with every line number zeroed, for layout-insensitive comparison.
    pub fn erase_lines(&self) -> Ast {
        fn stmts(v: &[Stmt]) -> Vec<Stmt> {
            v.iter()
                .map(|s| {
                    let kind = match &s.kind {
                        StmtKind::If { cond, then_branch, else_branch } => StmtKind::If {
                            cond: cond.clone(),
                            then_branch: stmts(then_branch),
                            else_branch: else_branch.as_ref().map(|e| stmts(e)),
                        },
                        k => k.clone(),
                    };
                    Stmt { kind, line: 0 }
                })
                .collect()
        }
        let mut a = self.clone();
        for f in &mut a.functions {
            f.line = 0;
            f.body = stmts(&f.body);
        }
        for v in &mut a.state_vars {
            v.line = 0;
        }
        for s in &mut a.structs {
            s.line = 0;
        }
        a
    }

    pub fn statement_count(&self) -> usize {
        flatten(self).len()
    }
}
