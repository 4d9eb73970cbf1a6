use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagCode {
    SyntaxError,
    UnsupportedConstruct,
    DanglingAnchor,
    NestedExternalCall,
    MultipleStatementsPerLine,
    MultipleContracts,
    MultipleExternalFunctions,
    DeadCode,
}

impl DiagCode {
    /// Warnings do not fail a parse.
    pub fn is_warning(self) -> bool {
        matches!(self, DiagCode::MultipleExternalFunctions | DiagCode::DeadCode)
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub code: DiagCode,
    pub msg: String,
}

impl Diagnostic {
    pub fn new(line: usize, code: DiagCode, msg: impl Into<String>) -> Self {
        Diagnostic { line, code, msg: msg.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.code, self.msg)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{} diagnostic(s); first: {}", .diagnostics.len(), .diagnostics.first().map(|d| d.to_string()).unwrap_or_default())]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn single(d: Diagnostic) -> Self {
        ParseError { diagnostics: vec![d] }
    }

    pub fn has(&self, code: DiagCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.diagnostics).unwrap_or_default()
    }
}
