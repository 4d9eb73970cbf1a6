//! Canonical pretty printer. Output re-parses to the same AST modulo line
//! numbers; it is also the normal form used for `VarPath` strings.

use super::ast::*;

pub fn type_str(t: &TypeName) -> String {
    match t {
        TypeName::Elementary(s) | TypeName::Named(s) => s.clone(),
        TypeName::Mapping(k, v) => format!("mapping({} => {})", type_str(k), type_str(v)),
        TypeName::Array(b, n) => format!("{}[{}]", type_str(b), n.as_deref().unwrap_or("")),
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Ternary(..) => 0,
        Expr::Binary(op, ..) => match op.as_str() {
            "||" => 1,
            "&&" => 2,
            "==" | "!=" => 3,
            "<" | ">" | "<=" | ">=" => 4,
            "|" => 5,
            "^" => 6,
            "&" => 7,
            "<<" | ">>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => 11,
        },
        Expr::Unary(..) => 12,
        _ => 13,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    let s = expr_str(e);
    if prec(e) < min {
        format!("({})", s)
    } else {
        s
    }
}

fn list(args: &[Expr]) -> String {
    args.iter().map(expr_str).collect::<Vec<_>>().join(", ")
}

pub fn expr_str(e: &Expr) -> String {
    match e {
        Expr::Ident(s) | Expr::Number(s) => s.clone(),
        Expr::Str(s) => format!("\"{}\"", s),
        Expr::Bool(b) => b.to_string(),
        Expr::Member(b, m) => format!("{}.{}", wrap(b, 13), m),
        Expr::Index(b, i) => format!("{}[{}]", wrap(b, 13), expr_str(i)),
        Expr::Unary(op, x) => format!("{}{}", op, wrap(x, 12)),
        Expr::Binary(op, a, b) => {
            let p = prec(e);
            // left-associative: the right operand needs strictly higher precedence
            if op == "**" {
                format!("{} ** {}", wrap(a, p + 1), wrap(b, p))
            } else {
                format!("{} {} {}", wrap(a, p), op, wrap(b, p + 1))
            }
        }
        Expr::Ternary(c, a, b) => format!("{} ? {} : {}", wrap(c, 1), expr_str(a), expr_str(b)),
        Expr::Cast(t, x) => format!("{}({})", type_str(t), expr_str(x)),
        Expr::FnCall(n, args) => format!("{}({})", n, list(args)),
        Expr::New(t, args) => format!("new {}({})", type_str(t), list(args)),
        Expr::ExtCall(c) => call_str(c),
    }
}

pub fn call_str(c: &CallExpr) -> String {
    let opts = if c.options.is_empty() {
        String::new()
    } else {
        let inner: Vec<String> = c.options.iter().map(|(k, v)| format!("{}: {}", k, expr_str(v))).collect();
        format!("{{{}}}", inner.join(", "))
    };
    format!("{}.{}{}({})", wrap(&c.target, 13), c.method, opts, list(&c.args))
}

fn decl_str(ty: &TypeName, loc: &Option<String>, name: &str) -> String {
    match loc {
        Some(l) => format!("{} {} {}", type_str(ty), l, name),
        None => format!("{} {}", type_str(ty), name),
    }
}

/// Single-line rendering of a statement's own text (branches elided).
pub fn stmt_head(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::VarDecl { ty, location, name, init } => match init {
            Some(i) => format!("{} = {};", decl_str(ty, location, name), expr_str(i)),
            None => format!("{};", decl_str(ty, location, name)),
        },
        StmtKind::Assign { lhs, op, rhs } => {
            let o = match op {
                AssignOp::Plain => "=",
                AssignOp::PlusAssign => "+=",
                AssignOp::MinusAssign => "-=",
            };
            format!("{} {} {};", expr_str(lhs), o, expr_str(rhs))
        }
        StmtKind::Require { cond, message } => match message {
            Some(m) => format!("require({}, {});", expr_str(cond), expr_str(m)),
            None => format!("require({});", expr_str(cond)),
        },
        StmtKind::If { cond, .. } => format!("if ({})", expr_str(cond)),
        StmtKind::Return(e) => match e {
            Some(e) => format!("return {};", expr_str(e)),
            None => "return;".into(),
        },
        StmtKind::ExternalCall { call, capture } => {
            let c = call_str(call);
            match capture {
                None => format!("{};", c),
                Some(Capture::Decl { ty, location, name }) => format!("{} = {};", decl_str(ty, location, name), c),
                Some(Capture::Assign { lhs }) => format!("{} = {};", expr_str(lhs), c),
                Some(Capture::Tuple(slots)) => {
                    let inner: Vec<String> = slots
                        .iter()
                        .map(|s| match s {
                            None => String::new(),
                            Some(TupleSlot { ty: Some(t), location, name }) => decl_str(t, location, &expr_str(name)),
                            Some(TupleSlot { ty: None, name, .. }) => expr_str(name),
                        })
                        .collect();
                    format!("({}) = {};", inner.join(", "), c)
                }
            }
        }
        StmtKind::Expr(e) => format!("{};", expr_str(e)),
    }
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    let ind = "    ".repeat(depth);
    for s in body {
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                out.push_str(&format!("{}{} {{\n", ind, stmt_head(s)));
                stmts(out, then_branch, depth + 1);
                match else_branch {
                    Some(e) => {
                        out.push_str(&format!("{}}} else {{\n", ind));
                        stmts(out, e, depth + 1);
                        out.push_str(&format!("{}}}\n", ind));
                    }
                    None => out.push_str(&format!("{}}}\n", ind)),
                }
            }
            _ => out.push_str(&format!("{}{}\n", ind, stmt_head(s))),
        }
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| {
            let mut s = type_str(&p.ty);
            if let Some(l) = &p.location {
                s.push(' ');
                s.push_str(l);
            }
            if let Some(n) = &p.name {
                s.push(' ');
                s.push_str(n);
            }
            s
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_ast(ast: &Ast) -> String {
    let mut out = String::new();
    for i in &ast.imports {
        out.push_str(&format!("import \"{}\";\n", i));
    }
    for i in &ast.interfaces {
        out.push_str(&format!("interface {} {{}}\n", i));
    }
    out.push_str(&format!("contract {} {{\n", ast.contract_name));
    for s in &ast.structs {
        out.push_str(&format!("    struct {} {{\n", s.name));
        for (t, n) in &s.fields {
            out.push_str(&format!("        {} {};\n", type_str(t), n));
        }
        out.push_str("    }\n");
    }
    for v in &ast.state_vars {
        let mut head = type_str(&v.ty);
        for a in &v.attrs {
            head.push(' ');
            head.push_str(a);
        }
        match &v.init {
            Some(i) => out.push_str(&format!("    {} {} = {};\n", head, v.name, expr_str(i))),
            None => out.push_str(&format!("    {} {};\n", head, v.name)),
        }
    }
    for f in &ast.functions {
        let vis = match f.visibility {
            Visibility::External => "external",
            Visibility::Public => "public",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        };
        let mut head = if f.name == "constructor" {
            format!("    constructor({}) {}", params(&f.params), vis)
        } else {
            format!("    function {}({}) {}", f.name, params(&f.params), vis)
        };
        if let Some(m) = &f.mutability {
            head.push(' ');
            head.push_str(m);
        }
        if !f.returns.is_empty() {
            head.push_str(&format!(" returns ({})", params(&f.returns)));
        }
        out.push_str(&format!("{} {{\n", head));
        stmts(&mut out, &f.body, 2);
        out.push_str("    }\n");
    }
    out.push_str("}\n");
    out
}
