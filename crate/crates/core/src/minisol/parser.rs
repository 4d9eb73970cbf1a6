//! Recursive-descent parser for the contract subset.

use super::ast::*;
use super::diag::{DiagCode, Diagnostic, ParseError};
use super::lexer::{tokenize, Tok, Token};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnchorKind {
    ExtCall,
    StateUpd,
    Check,
    Effect,
    Interaction,
}

impl AnchorKind {
    pub fn from_comment(text: &str) -> Option<AnchorKind> {
        match text.trim() {
            "//e" => Some(AnchorKind::ExtCall),
            "//s" => Some(AnchorKind::StateUpd),
            "//CHECK" => Some(AnchorKind::Check),
            "//EFFECT" => Some(AnchorKind::Effect),
            "//INTERACTION" => Some(AnchorKind::Interaction),
            _ => None,
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            AnchorKind::ExtCall => "//e",
            AnchorKind::StateUpd => "//s",
            AnchorKind::Check => "//CHECK",
            AnchorKind::Effect => "//EFFECT",
            AnchorKind::Interaction => "//INTERACTION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub text: String,
    /// Raw lines; `lines[0]` is line 1.
    pub lines: Vec<String>,
    /// Anchor comment line -> kind. The anchor binds line + 1.
    pub anchors: BTreeMap<usize, AnchorKind>,
}

impl SourceUnit {
    pub fn new(text: &str) -> SourceUnit {
        let text = text.replace("\r\n", "\n");
        let lines: Vec<String> = text.split('\n').map(str::to_string).collect();
        let anchors =
            lines.iter().enumerate().filter_map(|(i, l)| AnchorKind::from_comment(l).map(|k| (i + 1, k))).collect();
        SourceUnit { text, lines, anchors }
    }

    pub fn line(&self, n: usize) -> &str {
        self.lines.get(n.wrapping_sub(1)).map(String::as_str).unwrap_or("")
    }

    pub fn n_lines(&self) -> usize {
        // a trailing newline does not open a new line
        if self.text.ends_with('\n') {
            self.lines.len() - 1
        } else {
            self.lines.len()
        }
    }

    /// Statement lines bound by anchors of `kind`, ascending.
    pub fn anchored_lines(&self, kind: AnchorKind) -> Vec<usize> {
        self.anchors.iter().filter(|(_, k)| **k == kind).map(|(l, _)| l + 1).collect()
    }
}

/// Parse result: the source table, the AST and non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub source: SourceUnit,
    pub ast: Ast,
    pub warnings: Vec<Diagnostic>,
}

pub fn parse(src: &str) -> Result<Parsed, ParseError> {
    let source = SourceUnit::new(src);
    let toks = tokenize(&source.text).map_err(ParseError::single)?;
    let mut p = Parser { toks: &toks, pos: 0, warnings: Vec::new() };
    let ast = p.source_unit().map_err(ParseError::single)?;
    let mut warnings = p.warnings;
    let mut errors = Vec::new();
    post_checks(&source, &ast, &mut errors, &mut warnings);
    if !errors.is_empty() {
        return Err(ParseError { diagnostics: errors });
    }
    Ok(Parsed { source, ast, warnings })
}

fn post_checks(src: &SourceUnit, ast: &Ast, errors: &mut Vec<Diagnostic>, warnings: &mut Vec<Diagnostic>) {
    fn siblings(stmts: &[Stmt], errors: &mut Vec<Diagnostic>, warnings: &mut Vec<Diagnostic>) {
        let mut returned = false;
        for (i, s) in stmts.iter().enumerate() {
            if i > 0 && stmts[i - 1].line == s.line {
                errors.push(Diagnostic::new(
                    s.line,
                    DiagCode::MultipleStatementsPerLine,
                    "more than one statement on a line",
                ));
            }
            if returned {
                warnings.push(Diagnostic::new(s.line, DiagCode::DeadCode, "statement after return is unreachable"));
                returned = false;
            }
            let calls: usize = s.own_exprs().iter().map(|e| e.count_ext_calls()).sum::<usize>()
                + match &s.kind {
                    StmtKind::ExternalCall { call, .. } => Expr::ExtCall(call.clone()).count_ext_calls(),
                    _ => 0,
                };
            if calls > 1 {
                errors.push(Diagnostic::new(
                    s.line,
                    DiagCode::NestedExternalCall,
                    "statement contains more than one external call",
                ));
            }
            match &s.kind {
                StmtKind::If { then_branch, else_branch, .. } => {
                    siblings(then_branch, errors, warnings);
                    if let Some(e) = else_branch {
                        siblings(e, errors, warnings);
                    }
                }
                StmtKind::Return(_) => returned = true,
                _ => {}
            }
        }
    }
    for f in &ast.functions {
        siblings(&f.body, errors, warnings);
    }
    let starts: std::collections::BTreeSet<usize> = flatten(ast).iter().map(|f| f.stmt.line).collect();
    for (&line, kind) in &src.anchors {
        if !starts.contains(&(line + 1)) {
            errors.push(Diagnostic::new(
                line,
                DiagCode::DanglingAnchor,
                format!("anchor {} is not immediately followed by a statement", kind.marker()),
            ));
        }
    }
    let visible = ast.functions.iter().filter(|f| f.externally_visible()).count();
    if visible > 1 {
        let line = ast.functions.iter().filter(|f| f.externally_visible()).nth(1).map_or(0, |f| f.line);
        warnings.push(Diagnostic::new(
            line,
            DiagCode::MultipleExternalFunctions,
            format!("{} externally visible functions", visible),
        ));
    }
}

const UNSUPPORTED_STMT: &[&str] = &[
    "for",
    "while",
    "do",
    "assembly",
    "unchecked",
    "try",
    "catch",
    "emit",
    "revert",
    "break",
    "continue",
    "delete",
    "throw",
];
const UNSUPPORTED_MEMBER: &[&str] = &["event", "modifier", "receive", "fallback", "using", "error", "enum"];
const LOCATIONS: &[&str] = &["memory", "storage", "calldata"];
const NUMBER_UNITS: &[&str] = &["wei", "gwei", "ether", "seconds", "minutes", "hours", "days", "weeks"];
const BUILTIN_FNS: &[&str] =
    &["keccak256", "sha256", "ripemd160", "ecrecover", "addmod", "mulmod", "blockhash", "gasleft", "assert"];
const BUILTIN_BASES: &[&str] = &["abi", "msg", "block", "tx", "string", "bytes", "type"];

pub fn is_elementary(name: &str) -> bool {
    fn sized(name: &str, prefix: &str) -> bool {
        name.strip_prefix(prefix).is_some_and(|r| !r.is_empty() && r.chars().all(|c| c.is_ascii_digit()))
    }
    matches!(name, "address" | "bool" | "string" | "bytes" | "uint" | "int" | "byte")
        || sized(name, "uint")
        || sized(name, "int")
        || sized(name, "bytes")
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    warnings: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or_else(|| self.toks.last()).map_or(1, |t| t.line)
    }

    fn err<T>(&self, code: DiagCode, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::new(self.line(), code, msg))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(DiagCode::SyntaxError, format!("expected `{}`, found {}", p, self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(DiagCode::SyntaxError, format!("expected identifier, found {}", self.describe())),
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Ident(s)) | Some(Tok::Number(s)) => format!("`{}`", s),
            Some(Tok::Str(s)) => format!("\"{}\"", s),
            Some(Tok::Punct(p)) => format!("`{}`", p),
        }
    }

    fn skip_until_semicolon(&mut self) -> PResult<()> {
        while !self.eat_punct(";") {
            if self.peek().is_none() {
                return self.err(DiagCode::SyntaxError, "expected `;`");
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_braced(&mut self) -> PResult<()> {
        while !self.is_punct("{") {
            if self.peek().is_none() {
                return self.err(DiagCode::SyntaxError, "expected `{`");
            }
            self.pos += 1;
        }
        let mut depth = 0;
        loop {
            match self.peek() {
                None => return self.err(DiagCode::SyntaxError, "unbalanced braces"),
                Some(Tok::Punct("{")) => depth += 1,
                Some(Tok::Punct("}")) => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Ok(());
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn source_unit(&mut self) -> PResult<Ast> {
        let mut imports = Vec::new();
        let mut interfaces = Vec::new();
        let mut contract: Option<Ast> = None;
        while let Some(tok) = self.peek().cloned() {
            match tok {
                Tok::Ident(kw) if kw == "pragma" => self.skip_until_semicolon()?,
                Tok::Ident(kw) if kw == "import" => {
                    self.pos += 1;
                    if let Some(Tok::Str(path)) = self.peek() {
                        imports.push(path.clone());
                    }
                    self.skip_until_semicolon()?;
                }
                Tok::Ident(kw) if kw == "interface" || kw == "library" => {
                    self.pos += 1;
                    interfaces.push(self.ident()?);
                    self.skip_braced()?;
                }
                Tok::Ident(kw) if kw == "contract" || kw == "abstract" => {
                    if contract.is_some() {
                        return self.err(DiagCode::MultipleContracts, "more than one contract in unit");
                    }
                    self.eat_kw("abstract");
                    if !self.eat_kw("contract") {
                        return self.err(DiagCode::SyntaxError, "expected `contract`");
                    }
                    contract = Some(self.contract()?);
                }
                _ => return self.err(DiagCode::SyntaxError, format!("unexpected {} at top level", self.describe())),
            }
        }
        let mut ast = contract.ok_or_else(|| Diagnostic::new(1, DiagCode::SyntaxError, "no contract found"))?;
        ast.imports = imports;
        ast.interfaces = interfaces;
        Ok(ast)
    }

    fn contract(&mut self) -> PResult<Ast> {
        let name = self.ident()?;
        if self.is_kw("is") {
            return self.err(DiagCode::UnsupportedConstruct, "inheritance is not supported");
        }
        self.expect_punct("{")?;
        let mut ast = Ast {
            contract_name: name,
            imports: vec![],
            interfaces: vec![],
            structs: vec![],
            state_vars: vec![],
            functions: vec![],
        };
        while !self.eat_punct("}") {
            let line = self.line();
            match self.peek().cloned() {
                None => return self.err(DiagCode::SyntaxError, "unterminated contract body"),
                Some(Tok::Ident(kw)) if UNSUPPORTED_MEMBER.contains(&kw.as_str()) => {
                    return self.err(DiagCode::UnsupportedConstruct, format!("`{}` is not supported", kw));
                }
                Some(Tok::Ident(kw)) if kw == "struct" => {
                    self.pos += 1;
                    let sname = self.ident()?;
                    self.expect_punct("{")?;
                    let mut fields = Vec::new();
                    while !self.eat_punct("}") {
                        let ty = self.type_name()?;
                        let f = self.ident()?;
                        self.expect_punct(";")?;
                        fields.push((ty, f));
                    }
                    ast.structs.push(StructDef { name: sname, fields, line });
                }
                Some(Tok::Ident(kw)) if kw == "function" || kw == "constructor" => {
                    self.pos += 1;
                    let fname = if kw == "constructor" { "constructor".to_string() } else { self.ident()? };
                    ast.functions.push(self.function(fname, line)?);
                }
                Some(_) => {
                    let ty = self.type_name()?;
                    let mut attrs = Vec::new();
                    while let Some(Tok::Ident(a)) = self.peek() {
                        if matches!(a.as_str(), "public" | "private" | "internal" | "constant" | "immutable") {
                            attrs.push(a.clone());
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    let vname = self.ident()?;
                    let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                    self.expect_punct(";")?;
                    ast.state_vars.push(StateVar { ty, name: vname, attrs, init, line });
                }
            }
        }
        if self.peek().is_some()
            && !self.is_kw("interface")
            && !self.is_kw("library")
            && (self.is_kw("contract") || self.is_kw("abstract"))
        {
            return self.err(DiagCode::MultipleContracts, "more than one contract in unit");
        }
        Ok(ast)
    }

    fn function(&mut self, name: String, line: usize) -> PResult<FunctionDef> {
        let params = self.param_list()?;
        let mut visibility = None;
        let mut mutability = None;
        let mut returns = Vec::new();
        loop {
            match self.peek().cloned() {
                Some(Tok::Ident(a)) => match a.as_str() {
                    "external" => visibility = Some(Visibility::External),
                    "public" => visibility = Some(Visibility::Public),
                    "internal" => visibility = Some(Visibility::Internal),
                    "private" => visibility = Some(Visibility::Private),
                    "view" | "pure" | "payable" => mutability = Some(a.clone()),
                    "virtual" | "override" => {}
                    "returns" => {
                        self.pos += 1;
                        returns = self.param_list()?;
                        continue;
                    }
                    _ => {
                        return self.err(DiagCode::UnsupportedConstruct, format!("modifier `{}` is not supported", a));
                    }
                },
                _ => break,
            }
            self.pos += 1;
        }
        let body = if self.eat_punct(";") {
            Vec::new()
        } else {
            self.expect_punct("{")?;
            self.block_body()?
        };
        Ok(FunctionDef {
            name,
            params,
            visibility: visibility.unwrap_or(Visibility::Public),
            mutability,
            returns,
            body,
            line,
        })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            let ty = self.type_name()?;
            let location = self.location();
            let name = match self.peek() {
                Some(Tok::Ident(_)) => Some(self.ident()?),
                _ => None,
            };
            out.push(Param { ty, location, name });
            if self.eat_punct(")") {
                return Ok(out);
            }
            self.expect_punct(",")?;
        }
    }

    fn location(&mut self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if LOCATIONS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => None,
        }
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let mut ty = if self.eat_kw("mapping") {
            self.expect_punct("(")?;
            let k = self.type_name()?;
            self.expect_punct("=>")?;
            let v = self.type_name()?;
            self.expect_punct(")")?;
            TypeName::Mapping(Box::new(k), Box::new(v))
        } else {
            let n = self.ident()?;
            if is_elementary(&n) {
                if n == "address" && self.eat_kw("payable") {
                    TypeName::Elementary("address payable".into())
                } else {
                    TypeName::Elementary(n)
                }
            } else {
                TypeName::Named(n)
            }
        };
        while self.is_punct("[") {
            let size = match (self.peek_at(1), self.peek_at(2)) {
                (Some(Tok::Punct("]")), _) => None,
                (Some(Tok::Number(n)), Some(Tok::Punct("]"))) => Some(n.clone()),
                _ => return self.err(DiagCode::SyntaxError, "not an array type"),
            };
            self.pos += if size.is_some() { 3 } else { 2 };
            ty = TypeName::Array(Box::new(ty), size);
        }
        Ok(ty)
    }

    fn block_body(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.eat_punct("}") {
            if self.peek().is_none() {
                return self.err(DiagCode::SyntaxError, "unterminated block");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_punct("{") {
            self.block_body()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    /// Attempts `Type [location] name`; restores position on failure.
    fn try_decl_head(&mut self) -> Option<(TypeName, Option<String>, String)> {
        let save = self.pos;
        let starts_type = match self.peek() {
            Some(Tok::Ident(s)) => !matches!(s.as_str(), "true" | "false" | "new" | "payable" | "type"),
            _ => false,
        };
        if starts_type {
            if let Ok(ty) = self.type_name() {
                let location = self.location();
                if let Some(Tok::Ident(n)) = self.peek() {
                    let n = n.clone();
                    self.pos += 1;
                    return Some((ty, location, n));
                }
            }
        }
        self.pos = save;
        None
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        let kind = match self.peek().cloned() {
            Some(Tok::Ident(kw)) if UNSUPPORTED_STMT.contains(&kw.as_str()) => {
                return self.err(DiagCode::UnsupportedConstruct, format!("`{}` is not supported", kw));
            }
            Some(Tok::Punct("{")) => {
                return self.err(DiagCode::UnsupportedConstruct, "bare blocks are not supported");
            }
            Some(Tok::Ident(kw)) if kw == "if" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = self.branch()?;
                let else_branch = if self.eat_kw("else") {
                    if self.is_kw("if") {
                        return self.err(DiagCode::UnsupportedConstruct, "`else if` chains are not supported");
                    }
                    Some(self.branch()?)
                } else {
                    None
                };
                return Ok(Stmt { kind: StmtKind::If { cond, then_branch, else_branch }, line });
            }
            Some(Tok::Ident(kw)) if kw == "require" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.expr()?;
                let message = if self.eat_punct(",") { Some(self.expr()?) } else { None };
                self.expect_punct(")")?;
                StmtKind::Require { cond, message }
            }
            Some(Tok::Ident(kw)) if kw == "return" => {
                self.pos += 1;
                if self.is_punct(";") {
                    StmtKind::Return(None)
                } else {
                    StmtKind::Return(Some(self.expr()?))
                }
            }
            Some(Tok::Punct("(")) if self.looks_like_tuple_capture() => {
                let slots = self.tuple_slots()?;
                self.expect_punct("=")?;
                let rhs = self.expr()?;
                match rhs {
                    Expr::ExtCall(call) => StmtKind::ExternalCall { call, capture: Some(Capture::Tuple(slots)) },
                    _ => {
                        return self.err(
                            DiagCode::UnsupportedConstruct,
                            "tuple destructuring is only supported for external call results",
                        )
                    }
                }
            }
            _ => {
                if let Some((ty, location, name)) = self.try_decl_head() {
                    let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                    match init {
                        Some(Expr::ExtCall(call)) => {
                            StmtKind::ExternalCall { call, capture: Some(Capture::Decl { ty, location, name }) }
                        }
                        init => StmtKind::VarDecl { ty, location, name, init },
                    }
                } else {
                    self.expr_stmt()?
                }
            }
        };
        self.expect_punct(";")?;
        Ok(Stmt { kind, line })
    }

    fn looks_like_tuple_capture(&self) -> bool {
        let mut depth = 0;
        let mut k = self.pos;
        while let Some(t) = self.toks.get(k) {
            match &t.tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(self.toks.get(k + 1).map(|t| &t.tok), Some(Tok::Punct("=")));
                    }
                }
                Tok::Punct(";") => return false,
                _ => {}
            }
            k += 1;
        }
        false
    }

    fn tuple_slots(&mut self) -> PResult<Vec<Option<TupleSlot>>> {
        self.expect_punct("(")?;
        let mut slots = Vec::new();
        loop {
            if self.is_punct(",") || self.is_punct(")") {
                slots.push(None);
            } else if let Some((ty, location, name)) = self.try_decl_head() {
                slots.push(Some(TupleSlot { ty: Some(ty), location, name: Expr::Ident(name) }));
            } else {
                let e = self.postfix()?;
                if !e.is_path() {
                    return self.err(DiagCode::SyntaxError, "tuple slot must be a variable");
                }
                slots.push(Some(TupleSlot { ty: None, location: None, name: e }));
            }
            if self.eat_punct(")") {
                return Ok(slots);
            }
            self.expect_punct(",")?;
        }
    }

    fn expr_stmt(&mut self) -> PResult<StmtKind> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Punct("=")) => Some(AssignOp::Plain),
            Some(Tok::Punct("+=")) => Some(AssignOp::PlusAssign),
            Some(Tok::Punct("-=")) => Some(AssignOp::MinusAssign),
            Some(Tok::Punct("++")) | Some(Tok::Punct("--")) => {
                let inc = self.is_punct("++");
                self.pos += 1;
                if !lhs.is_path() {
                    return self.err(DiagCode::SyntaxError, "increment target must be a variable");
                }
                let op = if inc { AssignOp::PlusAssign } else { AssignOp::MinusAssign };
                return Ok(StmtKind::Assign { lhs, op, rhs: Expr::Number("1".into()) });
            }
            Some(Tok::Punct(p)) if p.ends_with('=') && !matches!(*p, "==" | "!=" | "<=" | ">=") => {
                return self
                    .err(DiagCode::UnsupportedConstruct, format!("assignment operator `{}` is not supported", p));
            }
            _ => None,
        };
        match op {
            Some(op) => {
                self.pos += 1;
                if !lhs.is_path() {
                    return self.err(DiagCode::SyntaxError, "assignment target must be a variable");
                }
                let rhs = self.expr()?;
                if op == AssignOp::Plain {
                    if let Expr::ExtCall(call) = rhs {
                        return Ok(StmtKind::ExternalCall { call, capture: Some(Capture::Assign { lhs }) });
                    }
                }
                Ok(StmtKind::Assign { lhs, op, rhs })
            }
            None => match lhs {
                Expr::ExtCall(call) => Ok(StmtKind::ExternalCall { call, capture: None }),
                e => Ok(StmtKind::Expr(e)),
            },
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let c = self.binary(0)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["|"],
            &["^"],
            &["&"],
            &["<<", ">>"],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.power();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct(p)) if LEVELS[level].contains(p) => *p,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(op.to_string(), Box::new(lhs), Box::new(rhs));
        }
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.unary()?;
        if self.eat_punct("**") {
            let exp = self.power()?;
            return Ok(Expr::Binary("**".into(), Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> PResult<Expr> {
        for op in ["!", "-", "~"] {
            if self.eat_punct(op) {
                let e = self.unary()?;
                return Ok(Expr::Unary(op.into(), Box::new(e)));
            }
        }
        if self.is_punct("++") || self.is_punct("--") {
            return self.err(DiagCode::UnsupportedConstruct, "prefix increment is not supported");
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_punct(")") {
                return Ok(out);
            }
            self.expect_punct(",")?;
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let m = self.ident()?;
                e = Expr::Member(Box::new(e), m);
            } else if self.eat_punct("[") {
                let i = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index(Box::new(e), Box::new(i));
            } else if self.is_punct("{") && matches!(e, Expr::Member(..)) && self.looks_like_call_options() {
                self.pos += 1;
                let mut opts = Vec::new();
                loop {
                    let k = self.ident()?;
                    self.expect_punct(":")?;
                    let v = self.expr()?;
                    opts.push((k, v));
                    if self.eat_punct("}") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
                if !self.is_punct("(") {
                    return self.err(DiagCode::SyntaxError, "call options must be followed by arguments");
                }
                let args = self.args()?;
                e = self.make_call(e, opts, args)?;
            } else if self.is_punct("(") {
                let args = self.args()?;
                e = self.make_call(e, Vec::new(), args)?;
            } else {
                return Ok(e);
            }
        }
    }

    fn looks_like_call_options(&self) -> bool {
        matches!((self.peek_at(1), self.peek_at(2)), (Some(Tok::Ident(_)), Some(Tok::Punct(":"))))
    }

    fn make_call(&mut self, callee: Expr, options: Vec<(String, Expr)>, args: Vec<Expr>) -> PResult<Expr> {
        match callee {
            Expr::Ident(name) => {
                if is_elementary(&name) || name == "payable" {
                    return self.single_arg_cast(TypeName::Elementary(name), args);
                }
                if BUILTIN_FNS.contains(&name.as_str()) {
                    return Ok(Expr::FnCall(name, args));
                }
                if name == "this" || name == "super" || name == "selfdestruct" {
                    return self.err(DiagCode::UnsupportedConstruct, format!("`{}` is not supported", name));
                }
                if name.chars().next().is_some_and(|c| c.is_ascii_uppercase()) && args.len() == 1 {
                    return Ok(Expr::Cast(TypeName::Named(name), Box::new(args.into_iter().next().unwrap())));
                }
                Ok(Expr::FnCall(name, args))
            }
            Expr::Member(base, method) => {
                if let Expr::Ident(b) = base.as_ref() {
                    if BUILTIN_BASES.contains(&b.as_str()) {
                        return Ok(Expr::FnCall(format!("{}.{}", b, method), args));
                    }
                    if b == "this" || b == "super" {
                        return self
                            .err(DiagCode::UnsupportedConstruct, format!("calls through `{}` are not supported", b));
                    }
                }
                if matches!(method.as_str(), "push" | "pop") {
                    return self.err(DiagCode::UnsupportedConstruct, "array push/pop is not supported");
                }
                let kind = match method.as_str() {
                    "call" => CallKind::LowLevel,
                    "delegatecall" => CallKind::Delegate,
                    "staticcall" => CallKind::Static,
                    "transfer" | "send" if args.len() == 1 => CallKind::LowLevel,
                    _ => CallKind::HighLevel,
                };
                Ok(Expr::ExtCall(CallExpr { target: base, method, options, args, kind }))
            }
            Expr::New(ty, _) => Ok(Expr::New(ty, args)),
            _ => self.err(DiagCode::UnsupportedConstruct, "unsupported call form"),
        }
    }

    fn single_arg_cast(&self, ty: TypeName, args: Vec<Expr>) -> PResult<Expr> {
        if args.len() != 1 {
            return self.err(DiagCode::SyntaxError, "type conversion takes exactly one argument");
        }
        Ok(Expr::Cast(ty, Box::new(args.into_iter().next().unwrap())))
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::Ident(u)) if NUMBER_UNITS.contains(&u.as_str()) => {
                        let text = format!("{} {}", n, u);
                        self.pos += 1;
                        Ok(Expr::Number(text))
                    }
                    _ => Ok(Expr::Number(n)),
                }
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.is_punct(",") {
                    return self.err(DiagCode::UnsupportedConstruct, "tuple expressions are not supported");
                }
                self.expect_punct(")")?;
                Ok(e)
            }
            Some(Tok::Ident(kw)) if kw == "true" || kw == "false" => {
                self.pos += 1;
                Ok(Expr::Bool(kw == "true"))
            }
            Some(Tok::Ident(kw)) if kw == "new" => {
                self.pos += 1;
                let ty = self.type_name()?;
                Ok(Expr::New(ty, Vec::new()))
            }
            Some(Tok::Ident(kw)) if UNSUPPORTED_STMT.contains(&kw.as_str()) && kw != "delete" => {
                self.err(DiagCode::UnsupportedConstruct, format!("`{}` is not supported", kw))
            }
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                Ok(Expr::Ident(n))
            }
            _ => self.err(DiagCode::SyntaxError, format!("expected expression, found {}", self.describe())),
        }
    }
}
