//! Ordering task: check / effect / interaction sequences drawn from the
//! four CEI behaviour types, with anchors on every labeled statement.

use super::external::{call_target, label, TargetForm};
use super::interfaces::InterfaceSpec;
use super::{axes, rng, select, GenError, LabeledSample, Labels, Names, Provenance, Src, Task};
use super::{AMOUNT_LIKE, OPERATOR_LIKE, TOKEN_LIKE};
use crate::minisol::AnchorKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CeiLabel {
    #[serde(rename = "GOOD")]
    Good,
    #[serde(rename = "RISK")]
    Risk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CeiType {
    #[serde(rename = "CEI_OK")]
    CeiOk,
    #[serde(rename = "SIMPLE_INT_BEFORE_EFFECT")]
    SimpleIntBeforeEffect,
    #[serde(rename = "POST_INTERACTION_EFFECTS")]
    PostInteractionEffects,
    #[serde(rename = "PATH_SENSITIVE_I_BEFORE_E")]
    PathSensitiveIBeforeE,
}

impl CeiType {
    pub const ALL: [CeiType; 4] = [
        CeiType::CeiOk,
        CeiType::SimpleIntBeforeEffect,
        CeiType::PostInteractionEffects,
        CeiType::PathSensitiveIBeforeE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CeiType::CeiOk => "CEI_OK",
            CeiType::SimpleIntBeforeEffect => "SIMPLE_INT_BEFORE_EFFECT",
            CeiType::PostInteractionEffects => "POST_INTERACTION_EFFECTS",
            CeiType::PathSensitiveIBeforeE => "PATH_SENSITIVE_I_BEFORE_E",
        }
    }

    pub fn label(self) -> CeiLabel {
        if self == CeiType::CeiOk {
            CeiLabel::Good
        } else {
            CeiLabel::Risk
        }
    }

    pub fn anchor_sequence(self) -> Vec<AnchorKind> {
        use AnchorKind::{Check, Effect, Interaction};
        match self {
            CeiType::CeiOk => vec![Check, Effect, Interaction],
            CeiType::SimpleIntBeforeEffect | CeiType::PathSensitiveIBeforeE => vec![Check, Interaction, Effect],
            CeiType::PostInteractionEffects => vec![Check, Effect, Interaction, Effect],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeiPattern {
    pub label: CeiLabel,
    pub type_id: CeiType,
    pub anchor_sequence: Vec<AnchorKind>,
}

impl CeiPattern {
    pub fn new(type_id: CeiType) -> CeiPattern {
        CeiPattern { label: type_id.label(), type_id, anchor_sequence: type_id.anchor_sequence() }
    }

    pub fn all() -> Vec<CeiPattern> {
        CeiType::ALL.iter().map(|&t| CeiPattern::new(t)).collect()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.label != self.type_id.label() || self.anchor_sequence != self.type_id.anchor_sequence() {
            return Err(GenError::InvalidCombination(format!("inconsistent pattern for {}", self.type_id.name())));
        }
        Ok(())
    }
}

/// Ground truth of an ordering sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeiTruth {
    pub type_id: CeiType,
    pub label: CeiLabel,
    pub anchor_sequence: Vec<AnchorKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckKind {
    Covered,
    Positive,
    NonZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectOp {
    Decrement,
    Rewrite,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionForm {
    Statement,
    Capture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    None,
    IfElse,
    EarlyReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderCombo {
    /// `InterfaceVar` (state variable) or `LocalVar` (cast of an address
    /// parameter).
    pub form: TargetForm,
    pub check: CheckKind,
    pub effect: EffectOp,
    pub interaction: InteractionForm,
    pub branch: BranchKind,
    pub lead_pad: bool,
}

pub fn order_combos(pattern: &CeiPattern, spec: &InterfaceSpec) -> Vec<OrderCombo> {
    let branches: &[BranchKind] = if pattern.type_id == CeiType::PathSensitiveIBeforeE {
        &[BranchKind::IfElse, BranchKind::EarlyReturn]
    } else {
        &[BranchKind::None]
    };
    let interactions: &[InteractionForm] = if spec.is_void() {
        &[InteractionForm::Statement]
    } else {
        &[InteractionForm::Statement, InteractionForm::Capture]
    };
    let mut out = Vec::new();
    for form in [TargetForm::InterfaceVar, TargetForm::LocalVar] {
        for check in [CheckKind::Covered, CheckKind::Positive, CheckKind::NonZero] {
            for effect in [EffectOp::Decrement, EffectOp::Rewrite, EffectOp::Clear] {
                for &interaction in interactions {
                    for &branch in branches {
                        for lead_pad in [false, true] {
                            out.push(OrderCombo { form, check, effect, interaction, branch, lead_pad });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn gen_ordering(pattern: &CeiPattern, spec: &InterfaceSpec, seed: u64) -> Result<LabeledSample, GenError> {
    pattern.validate()?;
    spec.validate().map_err(GenError::InvalidCombination)?;
    if spec.read_only {
        return Err(GenError::InvalidCombination(format!("{} cannot act as an interaction", spec.id())));
    }
    let combo = select(&order_combos(pattern, spec), seed).expect("non-empty");
    Ok(build(pattern, spec, combo, seed))
}

fn build(pattern: &CeiPattern, spec: &InterfaceSpec, c: OrderCombo, seed: u64) -> LabeledSample {
    let mut names = Names::new(rng(seed, 21), true);
    let contract = names.pick(&["Vault", "Escrow", "Treasury", "Pool"]);
    let func = names.pick(&["withdraw", "claim", "release", "redeemFor"]);
    let credits = names.pick(&["credits", "deposits", "stakes", "claims"]);
    let user = names.pick(OPERATOR_LIKE);
    let amt = names.pick(AMOUNT_LIKE);
    let site = match c.form {
        TargetForm::LocalVar => call_target(spec, TargetForm::LocalVar, &mut names),
        _ => {
            let v = names.pick(TOKEN_LIKE);
            super::external::CallSite {
                decls: vec![format!("{} public {v};", spec.standard_name)],
                params: vec![],
                prelude: vec![],
                target: v.clone(),
                reads: vec![v],
            }
        }
    };
    let sig = spec.sig();
    let user_slot = sig
        .params
        .iter()
        .position(|(t, n)| {
            t == "address" && ["to", "receiver", "recipient", "spender", "operator"].contains(&n.as_str())
        })
        .or_else(|| sig.first_of("address"));
    let args: Vec<String> = sig
        .params
        .iter()
        .enumerate()
        .map(|(i, (t, _))| match t.as_str() {
            "address" if Some(i) == user_slot => user.clone(),
            "address" => "address(this)".into(),
            "uint256" => amt.clone(),
            "bool" => "true".into(),
            _ => "\"\"".into(),
        })
        .collect();
    let call = format!("{}.{}({})", site.target, sig.name, args.join(", "));
    let interaction = match c.interaction {
        InteractionForm::Statement => format!("{call};"),
        InteractionForm::Capture => {
            let s = names.pick(&["sent", "done", "moved", "paid"]);
            format!("{} {s} = {call};", spec.return_type.as_deref().unwrap_or("bool"))
        }
    };
    let check = match c.check {
        CheckKind::Covered => format!("require({credits}[{user}] >= {amt});"),
        CheckKind::Positive => format!("require({amt} > 0);"),
        CheckKind::NonZero => format!("require({user} != address(0));"),
    };
    let effect = match c.effect {
        EffectOp::Decrement => format!("{credits}[{user}] -= {amt};"),
        EffectOp::Rewrite => format!("{credits}[{user}] = {credits}[{user}] - {amt};"),
        EffectOp::Clear => format!("{credits}[{user}] = 0;"),
    };
    let total = (pattern.type_id == CeiType::PostInteractionEffects)
        .then(|| names.pick(&["paidOut", "outflow", "released", "totalSent"]));
    let mode = (c.branch != BranchKind::None).then(|| names.pick(&["mode", "route", "lane", "variant"]));

    let fp = [
        pattern.type_id.name().to_string(),
        label(c.form),
        label(c.check),
        label(c.effect),
        label(c.interaction),
        label(c.branch),
        c.lead_pad.to_string(),
    ]
    .join("|");

    let mut params = vec![format!("address {user}"), format!("uint256 {amt}")];
    params.extend(site.params.iter().cloned());
    if let Some(m) = &mode {
        params.push(format!("uint256 {m}"));
    }

    let mut src = Src::new(&spec.import_path);
    src.push(0, format!("contract {contract} {{"));
    src.push(1, format!("string constant FP = \"{fp}\";"));
    src.push(1, format!("mapping(address => uint256) public {credits};"));
    if let Some(t) = &total {
        src.push(1, format!("uint256 public {t};"));
    }
    for d in &site.decls {
        src.push(1, d);
    }
    src.push(1, format!("function {func}({}) external {{", params.join(", ")));
    for p in &site.prelude {
        src.push(2, p);
    }
    if c.lead_pad {
        let f = names.pick(&["fee", "cut", "tip", "levy"]);
        src.push(2, format!("uint256 {f} = {amt} / 100;"));
    }
    let mut depth = 2;
    match c.branch {
        BranchKind::IfElse => {
            src.push(2, format!("if ({} > 0) {{", mode.as_ref().unwrap()));
            depth = 3;
        }
        BranchKind::EarlyReturn => {
            src.push(2, format!("if ({} == 0) return;", mode.as_ref().unwrap()));
        }
        BranchKind::None => {}
    }
    let mut call_line = 0;
    let mut effect_lines = Vec::new();
    let mut effects_seen = 0;
    for kind in &pattern.anchor_sequence {
        let text = match kind {
            AnchorKind::Check => check.clone(),
            AnchorKind::Interaction => interaction.clone(),
            _ => {
                effects_seen += 1;
                if effects_seen == 1 {
                    effect.clone()
                } else {
                    let t = total.as_ref().expect("second effect has a total");
                    if sig.first_of("uint256").is_some() {
                        format!("{t} += {amt};")
                    } else {
                        // the call carries no amount; tie the effect to its recipient
                        format!("{t} += {credits}[{user}];")
                    }
                }
            }
        };
        let l = src.anchored(depth, *kind, text);
        match kind {
            AnchorKind::Interaction => call_line = l,
            AnchorKind::Effect => effect_lines.push(l),
            _ => {}
        }
    }
    if c.branch == BranchKind::IfElse {
        let skip = names.pick(&["skip", "idle", "noop"]);
        src.push(2, "} else {");
        src.push(3, format!("uint256 {skip} = {} + 1;", mode.as_ref().unwrap()));
        src.push(2, "}");
    }
    src.push(1, "}");
    src.push(0, "}");

    let witnesses: Vec<(usize, usize)> =
        effect_lines.iter().filter(|&&e| e > call_line).map(|&e| (call_line, e)).collect();
    let vulnerable = !witnesses.is_empty();
    debug_assert_eq!(vulnerable, pattern.label == CeiLabel::Risk);
    let labels = Labels {
        call_lines: vec![call_line],
        update_lines: effect_lines,
        dependency: None,
        cei: Some(CeiTruth {
            type_id: pattern.type_id,
            label: pattern.label,
            anchor_sequence: pattern.anchor_sequence.clone(),
        }),
        vulnerable,
        witnesses,
        bits: [true, true, true, vulnerable],
    };
    let provenance = Provenance {
        seed,
        template_id: format!("O/{}", pattern.type_id.name()),
        axes: axes(&[
            ("iface", spec.id()),
            ("form", if c.form == TargetForm::LocalVar { "B".into() } else { "A".into() }),
            ("check", label(c.check)),
            ("effect", label(c.effect)),
            ("interaction", label(c.interaction)),
            ("branch", label(c.branch)),
            ("lead_pad", c.lead_pad.to_string()),
        ]),
        with_cfg_context: None,
    };
    LabeledSample { source: src.finish(), task: Task::O, labels, provenance }
}

#[cfg(test)]
mod tests {
    use super::super::interfaces::transfer_like;
    use super::*;
    use crate::factors::{analyze, AnalysisOptions};
    use crate::minisol::ProgramUnit;
    use crate::scoring::boolean_rule;

    fn verdict(s: &LabeledSample) -> crate::scoring::Verdict {
        let p = ProgramUnit::parse(&s.source).unwrap_or_else(|e| panic!("{e:?}\n{}", s.source));
        boolean_rule(&analyze(&p, &AnalysisOptions::default()))
    }

    #[test]
    fn taxonomy_matches_verdicts() {
        for pat in CeiPattern::all() {
            for spec in transfer_like() {
                for seed in 0..8 {
                    let s = gen_ordering(&pat, &spec, seed).unwrap();
                    let v = verdict(&s);
                    assert_eq!(v.vulnerable, pat.label == CeiLabel::Risk, "{}", s.source);
                    let lines: Vec<(usize, usize)> = v.witnesses.iter().map(|&(c, u)| (c + 1, u + 1)).collect();
                    assert_eq!(lines, s.labels.witnesses, "{}", s.source);
                }
            }
        }
    }

    #[test]
    fn post_interaction_write_has_negative_order() {
        let pat = CeiPattern::new(CeiType::PostInteractionEffects);
        let s = gen_ordering(&pat, &transfer_like()[0], 0).unwrap();
        let p = ProgramUnit::parse(&s.source).unwrap();
        let fs = analyze(&p, &AnalysisOptions::default());
        let c = s.labels.call_lines[0] - 1;
        let post = s.labels.update_lines[1] - 1;
        let pre = s.labels.update_lines[0] - 1;
        assert_eq!(fs.phi_o[c][post], -1);
        assert_eq!(fs.phi_o[c][pre], 1);
        assert_eq!(verdict(&s).witnesses.len(), 1);
    }

    #[test]
    fn path_sensitive_has_one_branch() {
        let pat = CeiPattern::new(CeiType::PathSensitiveIBeforeE);
        for seed in 0..16 {
            let s = gen_ordering(&pat, &transfer_like()[1], seed).unwrap();
            let p = ProgramUnit::parse(&s.source).unwrap();
            assert_eq!(p.branch_count(), 1);
        }
    }

    #[test]
    fn avoided_identifiers_never_appear() {
        for pat in CeiPattern::all() {
            for seed in 0..40 {
                let s = gen_ordering(&pat, &transfer_like()[(seed % 5) as usize], seed).unwrap();
                for w in super::super::validate::identifiers(&s.source) {
                    assert!(!super::super::AVOIDED_IDENTIFIERS.contains(&w.as_str()), "{w}\n{}", s.source);
                }
            }
        }
    }

    #[test]
    fn inconsistent_pattern_is_rejected() {
        let mut pat = CeiPattern::new(CeiType::CeiOk);
        pat.label = CeiLabel::Risk;
        assert!(gen_ordering(&pat, &transfer_like()[0], 0).is_err());
    }
}
