//! External-call task: one call statement built from a target form, a
//! context structure and a parameter-source form.

use super::interfaces::InterfaceSpec;
use super::{axes, rng, select, GenError, LabeledSample, Labels, Names, Provenance, Src, Task};
use super::{AMOUNT_LIKE, MISC, OPERATOR_LIKE, RECEIVER_LIKE, TOKEN_LIKE};
use crate::minisol::AnchorKind;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetForm {
    InterfaceVar,
    MappingElem,
    StructField,
    Cast,
    /// `I t = I(tokenAddr);` inside the function body.
    LocalVar,
}

impl TargetForm {
    pub const STAGE_ONE: [TargetForm; 4] =
        [TargetForm::InterfaceVar, TargetForm::MappingElem, TargetForm::StructField, TargetForm::Cast];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CallContext {
    Assignment,
    Require,
    SingleLineIf,
    Statement,
    IndexWrite,
}

impl CallContext {
    pub const ALL: [CallContext; 5] = [
        CallContext::Assignment,
        CallContext::Require,
        CallContext::SingleLineIf,
        CallContext::Statement,
        CallContext::IndexWrite,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamForm {
    Direct,
    Scaled,
    Modulo,
    Cast,
}

impl ParamForm {
    pub const ALL: [ParamForm; 4] = [ParamForm::Direct, ParamForm::Scaled, ParamForm::Modulo, ParamForm::Cast];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageOneCombo {
    pub target: TargetForm,
    pub context: CallContext,
    pub param: ParamForm,
    pub guard: bool,
}

pub(crate) fn label<T: std::fmt::Debug>(x: T) -> String {
    format!("{x:?}")
}

/// A call target plus the declarations it needs.
pub(crate) struct CallSite {
    pub decls: Vec<String>,
    pub params: Vec<String>,
    pub prelude: Vec<String>,
    pub target: String,
    /// Variables the target expression reads.
    pub reads: Vec<String>,
}

pub(crate) fn call_target(spec: &InterfaceSpec, form: TargetForm, names: &mut Names) -> CallSite {
    let i = &spec.standard_name;
    let mut cs = CallSite { decls: vec![], params: vec![], prelude: vec![], target: String::new(), reads: vec![] };
    match form {
        TargetForm::InterfaceVar => {
            let v = names.pick(TOKEN_LIKE);
            cs.decls.push(format!("{i} public {v};"));
            cs.target = v.clone();
            cs.reads.push(v);
        }
        TargetForm::MappingElem => {
            let m = names.pick(&["pools", "registry", "markets", "routes"]);
            let k = names.pick(&["slot", "index", "poolId", "marketId"]);
            cs.decls.push(format!("mapping(uint256 => {i}) public {m};"));
            cs.params.push(format!("uint256 {k}"));
            cs.target = format!("{m}[{k}]");
            cs.reads.extend([m, k]);
        }
        TargetForm::StructField => {
            let s = names.pick(&["Route", "Leg", "Hop", "Lane"]);
            let v = names.claim(&s.to_lowercase());
            let f = names.pick(TOKEN_LIKE);
            cs.decls.push(format!("struct {s} {{ {i} {f}; uint256 cap; }}"));
            cs.decls.push(format!("{s} public {v};"));
            cs.target = format!("{v}.{f}");
            cs.reads.push(v);
        }
        TargetForm::Cast => {
            let p = names.claim(spec.cast_param_name());
            cs.params.push(format!("address {p}"));
            cs.target = format!("{i}({p})");
            cs.reads.push(p);
        }
        TargetForm::LocalVar => {
            let p = names.claim("tokenAddr");
            let t = names.claim("t");
            cs.params.push(format!("address {p}"));
            cs.prelude.push(format!("{i} {t} = {i}({p});"));
            cs.target = t.clone();
            cs.reads.extend([p, t]);
        }
    }
    cs
}

#[derive(Debug, Clone)]
pub(crate) struct Arg {
    pub ty: String,
    pub expr: String,
    /// Function parameter introduced for this argument.
    pub param: Option<String>,
}

fn pool_for(ty: &str, name: &str) -> &'static [&'static str] {
    let n = name.to_ascii_lowercase();
    match ty {
        "address" if n.contains("token") => TOKEN_LIKE,
        "address" if n == "to" || n.contains("receiver") || n.contains("recipient") => RECEIVER_LIKE,
        "address" => OPERATOR_LIKE,
        _ if n.contains("id") => &MISC[..5],
        _ => AMOUNT_LIKE,
    }
}

/// One fresh parameter per address or amount argument; literals otherwise.
pub(crate) fn bind_args(spec: &InterfaceSpec, names: &mut Names) -> Vec<Arg> {
    spec.sig()
        .params
        .iter()
        .map(|(ty, n)| match ty.as_str() {
            "bool" => Arg { ty: ty.clone(), expr: "true".into(), param: None },
            "bytes" => Arg { ty: ty.clone(), expr: "\"\"".into(), param: None },
            _ => {
                let p = names.pick(pool_for(ty, n));
                Arg { ty: ty.clone(), expr: p.clone(), param: Some(p) }
            }
        })
        .collect()
}

pub(crate) fn arg_params(args: &[Arg]) -> Vec<String> {
    args.iter().filter_map(|a| a.param.as_ref().map(|p| format!("{} {}", a.ty, p))).collect()
}

pub(crate) fn call_expr(spec: &InterfaceSpec, target: &str, args: &[Arg]) -> String {
    let list: Vec<&str> = args.iter().map(|a| a.expr.as_str()).collect();
    format!("{target}.{}({})", spec.sig().name, list.join(", "))
}

/// Boolean condition over a value of type `rt`.
pub(crate) fn truthy(rt: &str, e: &str) -> String {
    match rt {
        "bool" => e.to_string(),
        "address" => format!("{e} != address(0)"),
        _ => format!("{e} > 0"),
    }
}

fn param_slot(spec: &InterfaceSpec, form: ParamForm) -> Option<usize> {
    let sig = spec.sig();
    match form {
        ParamForm::Direct => Some(usize::MAX),
        ParamForm::Scaled | ParamForm::Modulo => sig.first_of("uint256"),
        ParamForm::Cast => sig.first_of("uint256").or_else(|| sig.first_of("address")),
    }
}

fn check_combo(spec: &InterfaceSpec, c: &StageOneCombo) -> Result<(), GenError> {
    let bad = |m: &str| Err(GenError::InvalidCombination(format!("{}: {m}", spec.id())));
    if spec.is_void() && c.context != CallContext::Statement {
        return bad("a call without return value can only stand as a statement");
    }
    if spec.read_only && c.context == CallContext::IndexWrite {
        return bad("read-only function in a state-writing context");
    }
    if param_slot(spec, c.param).is_none() {
        return bad("no argument for the parameter form");
    }
    let typed = spec.sig().params.iter().any(|(t, _)| t == "address" || t == "uint256");
    if c.guard && !typed && matches!(c.target, TargetForm::InterfaceVar | TargetForm::StructField) {
        return bad("nothing to guard");
    }
    Ok(())
}

/// Valid axis combinations for `spec`, in a fixed order.
pub fn stage_one_combos(spec: &InterfaceSpec) -> Vec<StageOneCombo> {
    let mut out = Vec::new();
    for target in TargetForm::STAGE_ONE {
        for context in CallContext::ALL {
            for param in ParamForm::ALL {
                for guard in [false, true] {
                    let c = StageOneCombo { target, context, param, guard };
                    if check_combo(spec, &c).is_ok() {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Positive sample: exactly one external call, anchored with `//e`.
pub fn gen_external_call(spec: &InterfaceSpec, variant_seed: u64) -> Result<LabeledSample, GenError> {
    spec.validate().map_err(GenError::InvalidCombination)?;
    let combo = select(&stage_one_combos(spec), variant_seed)
        .ok_or_else(|| GenError::InvalidCombination(format!("{}: no valid combination", spec.id())))?;
    stage_one(spec, combo, variant_seed, true)
}

/// Explicit-combination variant of [`gen_external_call`].
pub fn gen_external_call_with(
    spec: &InterfaceSpec,
    combo: StageOneCombo,
    seed: u64,
) -> Result<LabeledSample, GenError> {
    spec.validate().map_err(GenError::InvalidCombination)?;
    check_combo(spec, &combo)?;
    stage_one(spec, combo, seed, true)
}

/// Negative twin: same structure with the call replaced by a local
/// expression of the same type.
pub fn gen_external_call_absent(spec: &InterfaceSpec, variant_seed: u64) -> Result<LabeledSample, GenError> {
    spec.validate().map_err(GenError::InvalidCombination)?;
    let combo = select(&stage_one_combos(spec), variant_seed)
        .ok_or_else(|| GenError::InvalidCombination(format!("{}: no valid combination", spec.id())))?;
    stage_one(spec, combo, variant_seed, false)
}

fn stub(rt: &str, args: &[Arg]) -> String {
    let num = args.iter().find(|a| a.ty == "uint256").map(|a| a.expr.clone());
    let addr = args.iter().find(|a| a.ty == "address").map(|a| a.expr.clone());
    match rt {
        "bool" => match (num, addr) {
            (Some(n), _) => format!("{n} > 1"),
            (None, Some(a)) => format!("{a} != address(0)"),
            _ => "true".into(),
        },
        "address" => addr.unwrap_or_else(|| "address(0)".into()),
        _ => num.map_or_else(|| "1".into(), |n| format!("{n} + 1")),
    }
}

fn stage_one(spec: &InterfaceSpec, c: StageOneCombo, seed: u64, present: bool) -> Result<LabeledSample, GenError> {
    let mut names = Names::new(rng(seed, 1), false);
    let with_cfg_context = rng(seed, 2).gen_bool(0.7);
    let contract = names.pick(&["Probe", "Relay", "Desk", "Router"]);
    let func = names.pick(&["run", "execute", "process", "route"]);
    let site = call_target(spec, c.target, &mut names);
    let mut args = bind_args(spec, &mut names);
    if c.param != ParamForm::Direct {
        let slot = param_slot(spec, c.param).expect("checked");
        let x = args[slot].expr.clone();
        args[slot].expr = match (c.param, args[slot].ty.as_str()) {
            (ParamForm::Scaled, _) => format!("{x} * 2"),
            (ParamForm::Modulo, _) => format!("{x} % 100"),
            (_, "address") => format!("address(uint160({x}))"),
            _ => format!("uint128({x})"),
        };
    }
    let rt = spec.return_type.clone().unwrap_or_default();
    let value = if present { call_expr(spec, &site.target, &args) } else { stub(&rt, &args) };

    let mut params = site.params.clone();
    params.extend(arg_params(&args));
    let mut decls = site.decls.clone();
    let mut body: Vec<String> = site.prelude.clone();
    if c.guard {
        let first = params.first().expect("guardable combos have a parameter");
        let (ty, name) = first.split_once(' ').expect("typed parameter");
        body.push(format!("require({});", truthy(ty, name)));
    }
    let line = match c.context {
        CallContext::Assignment => {
            let r = names.pick(&["result", "out", "got", "res"]);
            format!("{rt} {r} = {value};")
        }
        CallContext::Require => format!("require({});", truthy(&rt, &value)),
        CallContext::SingleLineIf => format!("if ({}) return;", truthy(&rt, &value)),
        CallContext::Statement if present => format!("{value};"),
        CallContext::Statement => {
            let s = names.pick(&["stub", "probe", "mark"]);
            format!("uint256 {s} = {};", stub("uint256", &args))
        }
        CallContext::IndexWrite => {
            let l = names.pick(&["ledger", "records", "receipts", "book"]);
            let k = names.pick(&["account", "payee", "member", "beneficiary"]);
            decls.push(format!("mapping(address => {rt}) public {l};"));
            params.push(format!("address {k}"));
            format!("{l}[{k}] = {value};")
        }
    };

    let mut src = Src::new(&spec.import_path);
    src.push(0, format!("contract {contract} {{"));
    for d in &decls {
        src.push(1, d);
    }
    src.push(1, format!("function {func}({}) external {{", params.join(", ")));
    for b in &body {
        src.push(2, b);
    }
    let call_line = if present { src.anchored(2, AnchorKind::ExtCall, &line) } else { src.push(2, &line) };
    src.push(1, "}");
    src.push(0, "}");

    let writes_state = c.context == CallContext::IndexWrite;
    let mut labels = Labels::default();
    if present {
        labels.call_lines = vec![call_line];
    }
    if writes_state {
        labels.update_lines = vec![call_line];
    }
    // a call inside its own write both reads and precedes the write
    labels.vulnerable = present && writes_state;
    if labels.vulnerable {
        labels.witnesses = vec![(call_line, call_line)];
    }
    labels.bits = [present, writes_state, labels.vulnerable, labels.vulnerable];

    let template_id = format!("E/{}/{}", if present { "present" } else { "absent" }, spec.id());
    let provenance = Provenance {
        seed,
        template_id,
        axes: axes(&[
            ("iface", spec.id()),
            ("target", label(c.target)),
            ("context", label(c.context)),
            ("param", label(c.param)),
            ("guard", c.guard.to_string()),
            ("read_only", spec.read_only.to_string()),
        ]),
        with_cfg_context: Some(with_cfg_context),
    };
    Ok(LabeledSample { source: src.finish(), task: Task::E, labels, provenance })
}

#[cfg(test)]
mod tests {
    use super::super::interfaces::catalog;
    use super::*;
    use crate::factors::{analyze, AnalysisOptions};
    use crate::minisol::ProgramUnit;

    fn transfer() -> InterfaceSpec {
        catalog().into_iter().find(|s| s.id() == "IERC20.transfer").unwrap()
    }

    fn balance_of() -> InterfaceSpec {
        catalog().into_iter().find(|s| s.id() == "IERC20.balanceOf").unwrap()
    }

    #[test]
    fn variant_zero_is_a_single_interface_variable_assignment() {
        let s = gen_external_call(&transfer(), 0).unwrap();
        assert_eq!(s.provenance.axes["target"], "InterfaceVar");
        assert_eq!(s.provenance.axes["context"], "Assignment");
        let p = ProgramUnit::parse(&s.source).unwrap();
        let fs = analyze(&p, &AnalysisOptions::default());
        let lines: Vec<usize> = fs.call_units().iter().map(|u| u + 1).collect();
        assert_eq!(lines, s.labels.call_lines);
        assert_eq!(lines.len(), 1);
    }

    #[test]
    fn read_only_require_has_no_state_write() {
        let combo = StageOneCombo {
            target: TargetForm::Cast,
            context: CallContext::Require,
            param: ParamForm::Direct,
            guard: false,
        };
        let s = gen_external_call_with(&balance_of(), combo, 3).unwrap();
        let p = ProgramUnit::parse(&s.source).unwrap();
        let fs = analyze(&p, &AnalysisOptions::default());
        assert!(fs.update_units().is_empty());
        assert_eq!(fs.call_units().len(), 1);
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let combo = StageOneCombo {
            target: TargetForm::Cast,
            context: CallContext::IndexWrite,
            param: ParamForm::Direct,
            guard: false,
        };
        assert!(matches!(gen_external_call_with(&balance_of(), combo, 0), Err(GenError::InvalidCombination(_))));
        let void = catalog().into_iter().find(|s| s.is_void()).unwrap();
        let combo = StageOneCombo { context: CallContext::Assignment, ..combo };
        assert!(gen_external_call_with(&void, combo, 0).is_err());
    }

    #[test]
    fn distinct_seeds_differ_structurally() {
        let spec = transfer();
        let n = stage_one_combos(&spec).len() as u64;
        let all: Vec<_> = (0..n).map(|s| gen_external_call(&spec, s).unwrap().provenance.axes).collect();
        let uniq: std::collections::BTreeSet<_> = all.iter().collect();
        assert_eq!(uniq.len(), all.len());
    }

    #[test]
    fn deterministic() {
        let a = gen_external_call(&transfer(), 17).unwrap();
        let b = gen_external_call(&transfer(), 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn absent_twin_has_no_call() {
        for spec in catalog() {
            for seed in 0..6 {
                let s = gen_external_call_absent(&spec, seed).unwrap();
                let p = ProgramUnit::parse(&s.source).unwrap_or_else(|e| panic!("{e:?}\n{}", s.source));
                assert!(analyze(&p, &AnalysisOptions::default()).call_units().is_empty(), "{}", s.source);
            }
        }
    }
}
