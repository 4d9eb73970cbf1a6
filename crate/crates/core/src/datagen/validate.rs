//! Structural validation of generated samples, closed by re-deriving the
//! labels with the factor analysis.

use super::dependency::{DepRule, Direction};
use super::factorial::realized_bits;
use super::ordering::{CeiLabel, CeiType};
use super::{LabeledSample, Task, AVOIDED_IDENTIFIERS, HEADER_LICENSE, HEADER_PRAGMA};
use crate::factors::{analyze, AnalysisOptions};
use crate::minisol::{AnchorKind, DiagCode, ProgramUnit};
use crate::scoring::boolean_rule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationCode {
    HeaderMismatch,
    AnchorNotWhitelisted,
    DanglingAnchor,
    AnchorCount,
    AnchorOrder,
    /// Anchor bound to a statement of the wrong kind.
    AnchorBinding,
    CallCount,
    UpdateCount,
    NonAdjacency,
    AnchorOnGuard,
    ForbiddenConstruct,
    EmptyLine,
    LineCount,
    ParseError,
    LabelMismatch,
    AvoidedIdentifier,
    BranchCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: ValidationCode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn has(&self, code: ValidationCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

const FORBIDDEN: &[&str] =
    &["assembly", "delegatecall", "selfdestruct", "for", "while", "do", "unchecked", "try", "catch", "tx"];

/// Contract-body line range for the dependency task.
pub const DEP_LINES: std::ops::RangeInclusive<usize> = 8..=20;

/// Byte offset of a comment opener outside string literals.
fn comment_start(line: &str) -> Option<usize> {
    let b = line.as_bytes();
    let mut in_str = false;
    for i in 0..b.len() {
        match b[i] {
            b'"' => in_str = !in_str,
            b'/' if !in_str && i + 1 < b.len() && (b[i + 1] == b'/' || b[i + 1] == b'*') => return Some(i),
            _ => {}
        }
    }
    None
}

fn strip_strings(line: &str) -> String {
    let mut out = String::new();
    let mut in_str = false;
    for ch in line.chars() {
        if ch == '"' {
            in_str = !in_str;
            out.push(' ');
        } else if !in_str {
            out.push(ch);
        }
    }
    match out.find("//") {
        Some(i) => out[..i].to_string(),
        None => out,
    }
}

/// Identifiers after the header, outside string literals and comments.
pub fn identifiers(source: &str) -> Vec<String> {
    source
        .lines()
        .skip(3)
        .flat_map(|l| {
            strip_strings(l)
                .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .filter(|w| w.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_'))
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

fn allowed_anchors(task: Task) -> &'static [AnchorKind] {
    match task {
        Task::E => &[AnchorKind::ExtCall],
        Task::D => &[AnchorKind::ExtCall, AnchorKind::StateUpd],
        Task::O => &[AnchorKind::Check, AnchorKind::Effect, AnchorKind::Interaction],
        Task::Full => &[],
    }
}

struct Checker {
    issues: Vec<ValidationIssue>,
}

impl Checker {
    fn fail(&mut self, code: ValidationCode, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(ValidationIssue { code, line, message: message.into() });
    }
}

pub fn validate(sample: &LabeledSample) -> ValidationReport {
    let mut ck = Checker { issues: Vec::new() };
    check(sample, &mut ck);
    ValidationReport { passed: ck.issues.is_empty(), issues: ck.issues }
}

fn check(sample: &LabeledSample, ck: &mut Checker) {
    use ValidationCode::*;
    let src = &sample.source;
    let lines: Vec<&str> = src.lines().collect();
    let import_ok = lines
        .get(2)
        .is_some_and(|l| l.starts_with("import \"") && l.ends_with("\";") && l.len() > "import \"\";".len());
    if lines.first() != Some(&HEADER_LICENSE) || lines.get(1) != Some(&HEADER_PRAGMA) || !import_ok {
        ck.fail(HeaderMismatch, Some(1), "the first three lines must be the license, pragma and import lines");
    }
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            ck.fail(EmptyLine, Some(i + 1), "empty line");
        }
    }
    let allowed = allowed_anchors(sample.task);
    for (i, l) in lines.iter().enumerate().skip(3) {
        if comment_start(l).is_none() {
            continue;
        }
        match AnchorKind::from_comment(l) {
            Some(k) if allowed.contains(&k) && l.trim() == k.marker() => {}
            _ => ck.fail(AnchorNotWhitelisted, Some(i + 1), format!("comment not allowed here: {}", l.trim())),
        }
    }
    let idents = identifiers(src);
    for f in FORBIDDEN {
        if idents.iter().any(|w| w == f) {
            ck.fail(ForbiddenConstruct, None, format!("forbidden construct `{f}`"));
        }
    }
    if sample.task == Task::D && idents.iter().any(|w| w == "msg") {
        ck.fail(ForbiddenConstruct, None, "implicit transaction inputs would link the anchored statements");
    }
    if sample.task == Task::O {
        for w in &idents {
            if AVOIDED_IDENTIFIERS.contains(&w.as_str()) {
                ck.fail(AvoidedIdentifier, None, format!("identifier `{w}` is reserved"));
            }
        }
    }

    let p = match ProgramUnit::parse(src) {
        Ok(p) => p,
        Err(e) => {
            let code = if e.has(DiagCode::DanglingAnchor) { DanglingAnchor } else { ParseError };
            for d in &e.diagnostics {
                ck.fail(code, Some(d.line), d.msg.clone());
            }
            return;
        }
    };
    let fs = analyze(&p, &AnalysisOptions::default());
    let calls: Vec<usize> = fs.call_units().iter().map(|u| u + 1).collect();
    let updates: Vec<usize> = fs.update_units().iter().map(|u| u + 1).collect();
    let stmt_at = |line: usize| p.stmts.iter().find(|s| s.line == line);
    let anchored = |k: AnchorKind| p.source.anchored_lines(k);
    let sequence: Vec<AnchorKind> = p.source.anchors.values().copied().collect();
    let labels = &sample.labels;

    match sample.task {
        Task::E => {
            let e = anchored(AnchorKind::ExtCall);
            if e.len() != labels.call_lines.len() || e.len() > 1 {
                ck.fail(
                    AnchorCount,
                    None,
                    format!("expected {} //e anchor(s), found {}", labels.call_lines.len(), e.len()),
                );
            }
            if calls.len() > 1 || calls.len() != e.len() {
                ck.fail(CallCount, None, format!("{} external calls", calls.len()));
            }
            if e != calls {
                ck.fail(AnchorBinding, e.first().copied(), "//e is not bound to the external call");
            }
            if sample.provenance.axes.get("read_only").map(String::as_str) == Some("true") && !updates.is_empty() {
                ck.fail(UpdateCount, updates.first().copied(), "read-only call sample writes state");
            }
        }
        Task::D => {
            let (e, s) = (anchored(AnchorKind::ExtCall), anchored(AnchorKind::StateUpd));
            if e.len() != 1 || s.len() != 1 {
                ck.fail(AnchorCount, None, format!("{} //e and {} //s anchors", e.len(), s.len()));
            }
            if calls.len() != 1 {
                ck.fail(CallCount, None, format!("{} external calls", calls.len()));
            }
            if updates.len() != 1 {
                ck.fail(UpdateCount, None, format!("{} state updates", updates.len()));
            }
            if let (Some(&el), Some(&sl)) = (e.first(), s.first()) {
                if stmt_at(sl).is_some_and(|st| st.is_require || st.is_if) {
                    ck.fail(AnchorOnGuard, Some(sl), "//s is placed on a guard statement");
                }
                if e != calls {
                    ck.fail(AnchorBinding, Some(el), "//e is not bound to the external call");
                }
                if s != updates {
                    ck.fail(AnchorBinding, Some(sl), "//s is not bound to the state update");
                }
                let (lo, hi) = (el.min(sl), el.max(sl));
                if !p.stmts.iter().any(|st| st.line > lo && st.line < hi) {
                    ck.fail(NonAdjacency, Some(hi), "//e and //s statements are adjacent");
                }
                if let Some(dep) = &labels.dependency {
                    let want_first = if dep.direction == Direction::EToS { el < sl } else { sl < el };
                    if !want_first {
                        ck.fail(AnchorOrder, Some(hi), "anchor order contradicts the labeled direction");
                    }
                    let rule = DepRule::new(dep.rule, dep.direction);
                    let upd = lines.get(sl - 1).copied().unwrap_or("");
                    let rhs = upd.split_once('=').map_or("", |x| x.1);
                    for pat in &rule.forbidden_patterns {
                        if rhs.contains(pat.as_str()) {
                            ck.fail(ForbiddenConstruct, Some(sl), format!("`{pat}` transforms a direct flow"));
                        }
                    }
                    let got = fs.kind(el - 1, sl - 1);
                    if got != dep.kind {
                        ck.fail(LabelMismatch, None, format!("dependency kind {:?}, labeled {:?}", got, dep.kind));
                    }
                }
            }
            let body = p.n_lines().saturating_sub(3);
            if !DEP_LINES.contains(&body) {
                ck.fail(LineCount, None, format!("{body} contract lines"));
            }
        }
        Task::O => {
            let Some(cei) = &labels.cei else {
                ck.fail(LabelMismatch, None, "missing ordering label");
                return;
            };
            if sequence != cei.anchor_sequence {
                let mut a = sequence.clone();
                let mut b = cei.anchor_sequence.clone();
                a.sort();
                b.sort();
                let code = if a == b { AnchorOrder } else { AnchorCount };
                ck.fail(code, None, format!("anchor sequence {:?}, expected {:?}", sequence, cei.anchor_sequence));
            }
            if calls.len() != 1 {
                ck.fail(CallCount, None, format!("{} external calls", calls.len()));
            }
            let effects = anchored(AnchorKind::Effect);
            if updates.len() != effects.len() {
                ck.fail(UpdateCount, None, format!("{} state updates for {} effects", updates.len(), effects.len()));
            }
            for &l in &anchored(AnchorKind::Check) {
                if !stmt_at(l).is_some_and(|s| s.is_require) {
                    ck.fail(AnchorBinding, Some(l), "//CHECK must bind a require");
                }
            }
            for &l in &effects {
                if stmt_at(l).is_some_and(|s| s.is_require || s.is_if) {
                    ck.fail(AnchorOnGuard, Some(l), "//EFFECT is placed on a guard statement");
                }
            }
            if effects != updates {
                ck.fail(AnchorBinding, effects.first().copied(), "//EFFECT anchors do not bind the state updates");
            }
            if anchored(AnchorKind::Interaction) != calls {
                ck.fail(AnchorBinding, None, "//INTERACTION is not bound to the external call");
            }
            let want = usize::from(cei.type_id == CeiType::PathSensitiveIBeforeE);
            if p.branch_count() != want {
                ck.fail(BranchCount, None, format!("{} branches, expected {want}", p.branch_count()));
            }
            if (cei.label == CeiLabel::Risk) != boolean_rule(&fs).vulnerable {
                ck.fail(LabelMismatch, None, format!("{} disagrees with the boolean rule", cei.type_id.name()));
            }
        }
        Task::Full => {
            if !sequence.is_empty() {
                ck.fail(AnchorCount, None, "factorial samples carry no anchors");
            }
            if fs.summary_bits() != realized_bits(labels.bits) {
                ck.fail(LabelMismatch, None, format!("realized bits {:?}", fs.summary_bits()));
            }
        }
    }

    if calls != labels.call_lines {
        ck.fail(LabelMismatch, None, format!("call lines {:?}, labeled {:?}", calls, labels.call_lines));
    }
    if updates != labels.update_lines {
        ck.fail(LabelMismatch, None, format!("update lines {:?}, labeled {:?}", updates, labels.update_lines));
    }
    let verdict = boolean_rule(&fs);
    let witnesses: Vec<(usize, usize)> = verdict.witnesses.iter().map(|&(c, u)| (c + 1, u + 1)).collect();
    if verdict.vulnerable != labels.vulnerable || witnesses != labels.witnesses {
        ck.fail(LabelMismatch, None, format!("witnesses {:?}, labeled {:?}", witnesses, labels.witnesses));
    }
    if sample.task != Task::Full && fs.summary_bits() != labels.bits {
        ck.fail(LabelMismatch, None, format!("summary bits {:?}, labeled {:?}", fs.summary_bits(), labels.bits));
    }
}

#[cfg(test)]
mod tests {
    use super::super::dependency::{gen_dependency, DepId};
    use super::super::interfaces::{catalog, transfer_like};
    use super::super::ordering::{gen_ordering, CeiPattern};
    use super::*;

    fn dep_sample() -> LabeledSample {
        let spec = catalog().into_iter().find(|s| s.id() == "IERC20.transfer").unwrap();
        gen_dependency(&DepRule::new(DepId::ADirect, Direction::EToS), &spec, 0).unwrap()
    }

    #[test]
    fn generated_sample_passes() {
        let r = validate(&dep_sample());
        assert!(r.passed, "{:?}", r.issues);
    }

    #[test]
    fn update_anchor_on_require_fails() {
        let mut s = dep_sample();
        let sl = s.labels.update_lines[0];
        let mut lines: Vec<String> = s.source.lines().map(str::to_string).collect();
        let upd = lines[sl - 1].clone();
        let indent = &upd[..upd.len() - upd.trim_start().len()];
        lines[sl - 1] = format!("{indent}require(true);");
        lines.insert(sl, upd);
        s.source = lines.join("\n");
        let r = validate(&s);
        assert!(r.has(ValidationCode::AnchorOnGuard), "{:?}\n{}", r.issues, s.source);
    }

    #[test]
    fn adjacent_anchors_fail() {
        let mut s = dep_sample();
        let (el, sl) = (s.labels.call_lines[0], s.labels.update_lines[0]);
        let lines: Vec<&str> = s.source.lines().collect();
        let kept: Vec<&str> = lines
            .iter()
            .enumerate()
            .filter(|(i, l)| !(*i + 1 > el && *i + 1 < sl - 1 && !l.trim().starts_with("//")))
            .map(|(_, l)| *l)
            .collect();
        s.source = kept.join("\n");
        let r = validate(&s);
        assert!(r.has(ValidationCode::NonAdjacency), "{:?}\n{}", r.issues, s.source);
    }

    #[test]
    fn header_and_comment_rules() {
        let mut s = dep_sample();
        s.source = s.source.replacen("pragma solidity ^0.8.20;", "pragma solidity ^0.8.0;", 1);
        assert!(validate(&s).has(ValidationCode::HeaderMismatch));
        let mut s = dep_sample();
        s.source = s.source.replacen("//e", "//EFFECT", 1);
        assert!(validate(&s).has(ValidationCode::AnchorNotWhitelisted));
        let mut s = dep_sample();
        s.source = s.source.replacen("//s", "//note", 1);
        assert!(validate(&s).has(ValidationCode::AnchorNotWhitelisted));
        let mut s = dep_sample();
        s.source = s.source.replacen("    }\n}", "\n    }\n}", 1);
        assert!(validate(&s).has(ValidationCode::EmptyLine));
    }

    #[test]
    fn label_tampering_is_caught() {
        let mut s = dep_sample();
        s.labels.dependency.as_mut().unwrap().kind = crate::factors::DepKind::Indirect;
        assert!(validate(&s).has(ValidationCode::LabelMismatch));
        let pat = CeiPattern::new(CeiType::CeiOk);
        let mut o = gen_ordering(&pat, &transfer_like()[0], 0).unwrap();
        o.labels.cei.as_mut().unwrap().label = CeiLabel::Risk;
        assert!(validate(&o).has(ValidationCode::LabelMismatch));
    }

    #[test]
    fn dangling_anchor_is_reported() {
        let mut s = dep_sample();
        s.source = s.source.replacen("\n    }\n}", "\n        //s\n    }\n}", 1);
        assert!(validate(&s).has(ValidationCode::DanglingAnchor), "{}", s.source);
    }

    #[test]
    fn identifiers_skip_strings_and_header() {
        let src = "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.20;\nimport \"token.sol\";\nstring constant FP = \"token\";\n";
        assert_eq!(identifiers(src), vec!["string", "constant", "FP"]);
    }
}
