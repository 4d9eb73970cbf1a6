//! Dependency task: one anchored call (`//e`) and one anchored state update
//! (`//s`) separated by unrelated statements, linked by a chosen kind of
//! flow in a chosen direction.

use super::external::{arg_params, bind_args, call_expr, call_target, label, truthy, Arg, TargetForm};
use super::interfaces::InterfaceSpec;
use super::{axes, rng, select, DepLabel, GenError, LabeledSample, Labels, Names, Provenance, Src, Task};
use crate::factors::DepKind;
use crate::minisol::AnchorKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepId {
    #[serde(rename = "A_DIRECT")]
    ADirect,
    #[serde(rename = "B_INDIRECT")]
    BIndirect,
    #[serde(rename = "C_CTRL")]
    CCtrl,
    #[serde(rename = "Z_NONE")]
    ZNone,
}

impl DepId {
    pub const ALL: [DepId; 4] = [DepId::ADirect, DepId::BIndirect, DepId::CCtrl, DepId::ZNone];

    pub fn name(self) -> &'static str {
        match self {
            DepId::ADirect => "A_DIRECT",
            DepId::BIndirect => "B_INDIRECT",
            DepId::CCtrl => "C_CTRL",
            DepId::ZNone => "Z_NONE",
        }
    }

    pub fn kind(self) -> DepKind {
        match self {
            DepId::ADirect => DepKind::Direct,
            DepId::BIndirect => DepKind::Indirect,
            DepId::CCtrl => DepKind::Ctrl,
            DepId::ZNone => DepKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "E_TO_S")]
    EToS,
    #[serde(rename = "S_TO_E")]
    SToE,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::EToS, Direction::SToE];

    pub fn name(self) -> &'static str {
        match self {
            Direction::EToS => "E_TO_S",
            Direction::SToE => "S_TO_E",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepRule {
    pub dep_id: DepId,
    pub direction: Direction,
    pub requires_transformation: bool,
    /// Substrings that must not appear on the right-hand side of the
    /// anchored update.
    pub forbidden_patterns: Vec<String>,
}

impl DepRule {
    pub fn new(dep_id: DepId, direction: Direction) -> DepRule {
        let forbidden: &[&str] = match dep_id {
            DepId::ADirect => &["*", "/", "%", "+", "keccak256", "!"],
            _ => &[],
        };
        DepRule {
            dep_id,
            direction,
            requires_transformation: dep_id == DepId::BIndirect,
            forbidden_patterns: forbidden.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn all() -> Vec<DepRule> {
        DepId::ALL.iter().flat_map(|&d| Direction::ALL.iter().map(move |&dir| DepRule::new(d, dir))).collect()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.requires_transformation != (self.dep_id == DepId::BIndirect) {
            return Err(GenError::IncompatibleRule(format!(
                "{} with requires_transformation = {}",
                self.dep_id.name(),
                self.requires_transformation
            )));
        }
        if self.dep_id == DepId::CCtrl && self.direction == Direction::SToE {
            return Err(GenError::IncompatibleRule("a control dependency runs from the call's result".into()));
        }
        Ok(())
    }

    pub fn template_id(&self) -> String {
        format!("D/{}/{}", self.dep_id.name(), self.direction.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Return,
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    Scale,
    Offset,
    Modulo,
    Compare,
    Negate,
    Hash,
}

impl Transform {
    fn applicable(ty: &str) -> &'static [Transform] {
        use Transform::*;
        match ty {
            "uint256" => &[Scale, Offset, Modulo, Compare, Hash],
            "bool" => &[Negate, Hash],
            "address" => &[Compare, Hash],
            _ => &[],
        }
    }

    /// (result type, expression)
    fn apply(self, ty: &str, e: &str) -> (String, String) {
        match self {
            Transform::Identity => (ty.to_string(), e.to_string()),
            Transform::Scale => ("uint256".into(), format!("{e} * 3")),
            Transform::Offset => ("uint256".into(), format!("{e} + 7")),
            Transform::Modulo => ("uint256".into(), format!("{e} % 97")),
            Transform::Compare if ty == "address" => ("bool".into(), format!("{e} != address(0)")),
            Transform::Compare => ("bool".into(), format!("{e} > 10")),
            Transform::Negate => ("bool".into(), format!("!{e}")),
            Transform::Hash => ("bytes32".into(), format!("keccak256(abi.encodePacked({e}))")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepCombo {
    pub target: TargetForm,
    pub source: Source,
    pub transform: Transform,
    /// For indirect flows: the intermediate comes before the unrelated
    /// statements.
    pub mid_first: bool,
    pub lead_pad: bool,
    pub guard: bool,
    pub pads: u8,
}

/// Argument of the call that carries the flow: first amount, else first
/// address.
fn link_slot(spec: &InterfaceSpec) -> Option<usize> {
    let sig = spec.sig();
    sig.first_of("uint256").or_else(|| sig.first_of("address"))
}

pub fn dep_combos(rule: &DepRule, spec: &InterfaceSpec) -> Vec<DepCombo> {
    if rule.validate().is_err() {
        return vec![];
    }
    let sig = spec.sig();
    let rt = spec.return_type.as_deref();
    let link_ty = link_slot(spec).map(|i| sig.params[i].0.clone());
    let mut sources: Vec<(Source, Vec<Transform>)> = Vec::new();
    let push = |src: Source, ty: Option<&str>, out: &mut Vec<(Source, Vec<Transform>)>| {
        let Some(ty) = ty else { return };
        let ts = match rule.dep_id {
            DepId::BIndirect => Transform::applicable(ty).to_vec(),
            _ => vec![Transform::Identity],
        };
        if !ts.is_empty() {
            out.push((src, ts));
        }
    };
    match (rule.direction, rule.dep_id) {
        (Direction::EToS, DepId::CCtrl) => push(Source::Return, rt, &mut sources),
        (Direction::EToS, _) => {
            push(Source::Return, rt, &mut sources);
            push(Source::Input, link_ty.as_deref(), &mut sources);
        }
        (Direction::SToE, DepId::BIndirect) => {
            if sig.first_of("uint256").is_some() {
                sources.push((Source::Input, vec![Transform::Scale, Transform::Offset, Transform::Modulo]));
            }
        }
        (Direction::SToE, _) => push(Source::Input, link_ty.as_deref(), &mut sources),
    }
    let mut out = Vec::new();
    for target in TargetForm::STAGE_ONE {
        for (source, ts) in &sources {
            for &transform in ts {
                for mid_first in [false, true] {
                    if mid_first && rule.dep_id != DepId::BIndirect {
                        continue;
                    }
                    for lead_pad in [false, true] {
                        for guard in [false, true] {
                            for pads in 1..=2 {
                                out.push(DepCombo {
                                    target,
                                    source: *source,
                                    transform,
                                    mid_first,
                                    lead_pad,
                                    guard,
                                    pads,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn gen_dependency(rule: &DepRule, spec: &InterfaceSpec, seed: u64) -> Result<LabeledSample, GenError> {
    spec.validate().map_err(GenError::IncompatibleRule)?;
    rule.validate()?;
    let combo = select(&dep_combos(rule, spec), seed).ok_or_else(|| {
        GenError::IncompatibleRule(format!("{} cannot be realized with {}", rule.template_id(), spec.id()))
    })?;
    Ok(build(rule, spec, combo, seed))
}

fn build(rule: &DepRule, spec: &InterfaceSpec, c: DepCombo, seed: u64) -> LabeledSample {
    let mut names = Names::new(rng(seed, 11), false);
    let contract = names.pick(&["Flow", "Keeper", "Ledger", "Bridge"]);
    let func = names.pick(&["settle", "sync", "apply", "record"]);
    let site = call_target(spec, c.target, &mut names);
    let mut args: Vec<Arg> = bind_args(spec, &mut names);
    let ledger = names.pick(&["book", "records", "credits", "stakes"]);
    let key = names.pick(&["account", "payee", "member", "beneficiary"]);
    let free = names.pick(&["fee", "rate", "epoch", "quota"]);
    let rt = spec.return_type.clone().unwrap_or_default();

    let mut pads: Vec<String> = (0..c.pads)
        .map(|i| {
            let l = names.pick(&["tmp", "pad", "tick", "memo"]);
            format!("uint256 {l} = {free} * {};", i + 2)
        })
        .collect();
    let lead = if c.lead_pad {
        let l = names.pick(&["tmp", "pad", "tick", "memo"]);
        Some(format!("uint256 {l} = {free} + 1;"))
    } else {
        None
    };

    let mut value_ty = "uint256".to_string();
    let mut extra_params: Vec<String> = vec![format!("address {key}"), format!("uint256 {free}")];
    let mut src = Src::new(&spec.import_path);
    let mut decls = site.decls.clone();
    let mut body: Vec<(usize, Option<AnchorKind>, String)> = Vec::new();
    if c.guard {
        body.push((2, None, format!("require({free} > 0);")));
    }
    if let Some(l) = lead {
        body.push((2, None, l));
    }

    match rule.direction {
        Direction::EToS => {
            let slot = link_slot(spec);
            let (src_ty, src_expr, e_line) = match c.source {
                Source::Return => {
                    let r = names.pick(&["result", "out", "got", "res"]);
                    (rt.clone(), r.clone(), format!("{rt} {r} = {};", call_expr(spec, &site.target, &args)))
                }
                Source::Input => {
                    let a = &args[slot.expect("combo has a link")];
                    (a.ty.clone(), a.expr.clone(), format!("{};", call_expr(spec, &site.target, &args)))
                }
            };
            body.push((2, Some(AnchorKind::ExtCall), e_line));
            match rule.dep_id {
                DepId::ADirect => {
                    value_ty = src_ty.clone();
                    body.extend(pads.drain(..).map(|p| (2, None, p)));
                    body.push((2, Some(AnchorKind::StateUpd), format!("{ledger}[{key}] = {src_expr};")));
                }
                DepId::BIndirect => {
                    let q = names.pick(&["derived", "scaled", "mixed", "folded"]);
                    let (ty, e) = c.transform.apply(&src_ty, &src_expr);
                    let mid = format!("{ty} {q} = {e};");
                    value_ty = ty;
                    if c.mid_first {
                        body.push((2, None, mid));
                        body.extend(pads.drain(..).map(|p| (2, None, p)));
                    } else {
                        body.extend(pads.drain(..).map(|p| (2, None, p)));
                        body.push((2, None, mid));
                    }
                    body.push((2, Some(AnchorKind::StateUpd), format!("{ledger}[{key}] = {q};")));
                }
                DepId::CCtrl => {
                    body.extend(pads.drain(..).map(|p| (2, None, p)));
                    body.push((2, None, format!("if ({}) {{", truthy(&src_ty, &src_expr))));
                    body.push((3, Some(AnchorKind::StateUpd), format!("{ledger}[{key}] = {free};")));
                    body.push((2, None, "}".into()));
                }
                DepId::ZNone => {
                    body.extend(pads.drain(..).map(|p| (2, None, p)));
                    body.push((2, Some(AnchorKind::StateUpd), format!("{ledger}[{key}] = {free};")));
                }
            }
        }
        Direction::SToE => {
            let slot = match rule.dep_id {
                DepId::BIndirect => spec.sig().first_of("uint256"),
                _ => link_slot(spec),
            }
            .expect("combo has a link");
            let link_ty = args[slot].ty.clone();
            value_ty = link_ty.clone();
            let w = names.pick(&["incoming", "fresh", "pending", "staged"]);
            extra_params.push(format!("{link_ty} {w}"));
            body.push((2, Some(AnchorKind::StateUpd), format!("{ledger}[{key}] = {w};")));
            let cell = format!("{ledger}[{key}]");
            match rule.dep_id {
                DepId::ADirect => {
                    args[slot] = Arg { ty: link_ty.clone(), expr: cell, param: None };
                    body.extend(pads.drain(..).map(|p| (2, None, p)));
                }
                DepId::BIndirect => {
                    let q = names.pick(&["derived", "scaled", "mixed", "folded"]);
                    let (ty, e) = c.transform.apply(&link_ty, &cell);
                    let mid = (2, None, format!("{ty} {q} = {e};"));
                    args[slot] = Arg { ty: link_ty.clone(), expr: q, param: None };
                    if c.mid_first {
                        body.push(mid);
                        body.extend(pads.drain(..).map(|p| (2, None, p)));
                    } else {
                        body.extend(pads.drain(..).map(|p| (2, None, p)));
                        body.push(mid);
                    }
                }
                _ => body.extend(pads.drain(..).map(|p| (2, None, p))),
            }
            body.push((2, Some(AnchorKind::ExtCall), format!("{};", call_expr(spec, &site.target, &args))));
        }
    }

    decls.push(format!("mapping(address => {value_ty}) public {ledger};"));
    let mut params = site.params.clone();
    params.extend(arg_params(&args));
    params.extend(extra_params);

    src.push(0, format!("contract {contract} {{"));
    for d in &decls {
        src.push(1, d);
    }
    src.push(1, format!("function {func}({}) external {{", params.join(", ")));
    for p in &site.prelude {
        src.push(2, p);
    }
    let (mut e_line, mut s_line) = (0, 0);
    for (depth, anchor, text) in &body {
        match anchor {
            Some(k) => {
                let l = src.anchored(*depth, *k, text);
                if *k == AnchorKind::ExtCall {
                    e_line = l;
                } else {
                    s_line = l;
                }
            }
            None => {
                src.push(*depth, text);
            }
        }
    }
    src.push(1, "}");
    src.push(0, "}");

    let kind = rule.dep_id.kind();
    let vulnerable = kind != DepKind::None && rule.direction == Direction::EToS;
    let labels = Labels {
        call_lines: vec![e_line],
        update_lines: vec![s_line],
        dependency: Some(DepLabel { rule: rule.dep_id, direction: rule.direction, kind }),
        cei: None,
        vulnerable,
        witnesses: if vulnerable { vec![(e_line, s_line)] } else { vec![] },
        bits: [true, true, kind != DepKind::None, vulnerable],
    };
    let provenance = Provenance {
        seed,
        template_id: rule.template_id(),
        axes: axes(&[
            ("iface", spec.id()),
            ("target", label(c.target)),
            ("source", label(c.source)),
            ("transform", label(c.transform)),
            ("mid_first", c.mid_first.to_string()),
            ("lead_pad", c.lead_pad.to_string()),
            ("guard", c.guard.to_string()),
            ("pads", c.pads.to_string()),
        ]),
        with_cfg_context: None,
    };
    LabeledSample { source: src.finish(), task: Task::D, labels, provenance }
}

#[cfg(test)]
mod tests {
    use super::super::interfaces::catalog;
    use super::*;
    use crate::factors::{analyze, AnalysisOptions};
    use crate::minisol::ProgramUnit;

    fn spec(id: &str) -> InterfaceSpec {
        catalog().into_iter().find(|s| s.id() == id).unwrap()
    }

    fn kind_of(s: &LabeledSample) -> (DepKind, i8) {
        let p = ProgramUnit::parse(&s.source).unwrap_or_else(|e| panic!("{e:?}\n{}", s.source));
        let fs = analyze(&p, &AnalysisOptions::default());
        let (c, u) = (s.labels.call_lines[0] - 1, s.labels.update_lines[0] - 1);
        (fs.kind(c, u), fs.phi_o[c][u])
    }

    #[test]
    fn direct_uses_the_return_unmodified() {
        let rule = DepRule::new(DepId::ADirect, Direction::EToS);
        let s = gen_dependency(&rule, &spec("IERC20.transfer"), 0).unwrap();
        assert_eq!(s.provenance.axes["source"], "Return");
        let upd = s.source.lines().nth(s.labels.update_lines[0] - 1).unwrap();
        let rhs = upd.split('=').nth(1).unwrap().trim().trim_end_matches(';');
        assert!(s.source.contains(&format!("bool {rhs} = ")), "{}", s.source);
        assert_eq!(kind_of(&s), (DepKind::Direct, -1));
    }

    #[test]
    fn each_rule_yields_its_kind() {
        for rule in DepRule::all() {
            for sp in catalog() {
                for seed in 0..12 {
                    match gen_dependency(&rule, &sp, seed) {
                        Ok(s) => {
                            let (k, o) = kind_of(&s);
                            assert_eq!(k, rule.dep_id.kind(), "{}\n{}", rule.template_id(), s.source);
                            if k != DepKind::None {
                                let want = if rule.direction == Direction::EToS { -1 } else { 1 };
                                assert_eq!(o, want);
                            }
                        }
                        Err(GenError::IncompatibleRule(_)) => {}
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn void_return_rejects_control_rule() {
        let rule = DepRule::new(DepId::CCtrl, Direction::EToS);
        let void = spec("IERC721.safeTransferFrom");
        assert!(matches!(gen_dependency(&rule, &void, 0), Err(GenError::IncompatibleRule(_))));
        let rule = DepRule::new(DepId::CCtrl, Direction::SToE);
        assert!(matches!(gen_dependency(&rule, &spec("IERC20.transfer"), 0), Err(GenError::IncompatibleRule(_))));
    }

    #[test]
    fn no_dependency_means_empty_phi_d() {
        let rule = DepRule::new(DepId::ZNone, Direction::EToS);
        for seed in 0..20 {
            let s = gen_dependency(&rule, &spec("IERC4626.deposit"), seed).unwrap();
            let fs = analyze(&ProgramUnit::parse(&s.source).unwrap(), &AnalysisOptions::default());
            assert!(fs.phi_d.iter().flatten().all(|&b| !b));
        }
    }

    #[test]
    fn indirect_goes_through_one_transformed_local() {
        let rule = DepRule::new(DepId::BIndirect, Direction::EToS);
        let s = gen_dependency(&rule, &spec("IERC20.balanceOf"), 5).unwrap();
        assert_ne!(s.provenance.axes["transform"], "Identity");
        assert_eq!(kind_of(&s).0, DepKind::Indirect);
    }

    #[test]
    fn inconsistent_rule_is_rejected() {
        let mut rule = DepRule::new(DepId::ADirect, Direction::EToS);
        rule.requires_transformation = true;
        assert!(gen_dependency(&rule, &spec("IERC20.transfer"), 0).is_err());
    }
}
