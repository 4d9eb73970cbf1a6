//! Tokenizer. Comments are dropped here; anchor comments are recovered from
//! the raw line table by the parser.

use super::diag::{DiagCode, Diagnostic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

const PUNCT3: &[&str] = &["**=", "<<=", ">>="];
const PUNCT2: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "++", "--", "=>", "<<", ">>",
    "**",
];
const PUNCT1: &[&str] = &[
    "(", ")", "{", "}", "[", "]", ";", ",", ".", "=", "+", "-", "*", "/", "%", "<", ">", "!", "?", ":", "&", "|", "^",
    "~",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let ch = chars[i];
        if ch == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'*') {
            let start = line;
            i += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(Diagnostic::new(start, DiagCode::SyntaxError, "unterminated block comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' || ch == '$' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[s..i].iter().collect()), line });
            continue;
        }
        if ch.is_ascii_digit() {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                if chars[i] == '.' && !chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
                    break;
                }
                i += 1;
            }
            out.push(Token { tok: Tok::Number(chars[s..i].iter().collect()), line });
            continue;
        }
        if ch == '"' || ch == '\'' {
            let q = ch;
            let s = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != q {
                if chars[i] == '\\' {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '\n' {
                    return Err(Diagnostic::new(line, DiagCode::SyntaxError, "newline in string literal"));
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(Diagnostic::new(line, DiagCode::SyntaxError, "unterminated string literal"));
            }
            out.push(Token { tok: Tok::Str(chars[s..i].iter().collect()), line });
            i += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let p = PUNCT3.iter().chain(PUNCT2).chain(PUNCT1).find(|p| rest.starts_with(**p));
        match p {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), line });
                i += p.len();
            }
            None => {
                return Err(Diagnostic::new(line, DiagCode::SyntaxError, format!("unexpected character `{}`", ch)));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_call_with_options() {
        let toks = tokenize("(bool ok, ) = to.call{value: amt}(\"\"); // tail\nx -= 1;").unwrap();
        assert_eq!(toks[0].tok, Tok::Punct("("));
        assert!(toks.iter().any(|t| t.tok == Tok::Str(String::new())));
        let last_line = toks.last().unwrap().line;
        assert_eq!(last_line, 2);
        assert!(toks.iter().any(|t| t.tok == Tok::Punct("-=")));
    }

    #[test]
    fn rejects_stray_character() {
        assert!(tokenize("a # b").is_err());
    }
}
