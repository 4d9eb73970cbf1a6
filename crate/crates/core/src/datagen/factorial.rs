//! Latent factorial family: four independent structural toggles.
//!
//! | bit | on                                   | off                          |
//! |-----|--------------------------------------|------------------------------|
//! | E   | interface call                       | local arithmetic             |
//! | S   | write to a storage mapping           | write to a local             |
//! | D   | the write uses the call's amount     | the write uses an unrelated parameter |
//! | O   | call statement precedes the write    | write precedes the call      |
//!
//! The realized factors follow from the bits: a dependency exists iff
//! E, S and D are on, and the sample is vulnerable iff all four are.

use super::external::{arg_params, bind_args, call_expr, call_target, label, TargetForm};
use super::interfaces::{transfer_like, InterfaceSpec};
use super::{axes, rng, select, LabeledSample, Labels, Names, Provenance, Src, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct FactorialCombo {
    spec: usize,
    target: TargetForm,
    guard: bool,
    pads: u8,
    scaled: bool,
    capture: bool,
}

fn combos(specs: &[InterfaceSpec]) -> Vec<FactorialCombo> {
    let mut out = Vec::new();
    for (spec, s) in specs.iter().enumerate() {
        for target in TargetForm::STAGE_ONE {
            for guard in [false, true] {
                for pads in 0..=2 {
                    for scaled in [false, true] {
                        for capture in [false, true] {
                            if capture && s.is_void() {
                                continue;
                            }
                            out.push(FactorialCombo { spec, target, guard, pads, scaled, capture });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn bits_name(bits: [bool; 4]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// One sample with latent bits (E, S, D, O).
pub fn gen_factorial(bits: [bool; 4], seed: u64) -> LabeledSample {
    let specs = transfer_like();
    let c = select(&combos(&specs), seed).expect("non-empty");
    let spec = &specs[c.spec];
    let [e, s, d, o] = bits;
    let mut names = Names::new(rng(seed, 31), false);
    let contract = names.pick(&["Mix", "Desk", "Hub", "Switch"]);
    let func = names.pick(&["step", "apply", "route", "tick"]);
    let site = call_target(spec, c.target, &mut names);
    let args = bind_args(spec, &mut names);
    let amt = args.iter().find(|a| a.ty == "uint256").and_then(|a| a.param.clone()).expect("transfer-like");
    let ledger = names.pick(&["book", "records", "credits", "stakes"]);
    let key = names.pick(&["account", "payee", "member", "beneficiary"]);
    let fee = names.pick(&["fee", "rate", "epoch", "quota"]);

    let call_stmt = if e {
        let call = call_expr(spec, &site.target, &args);
        if c.capture {
            let r = names.pick(&["result", "out", "got", "res"]);
            format!("{} {r} = {call};", spec.return_type.as_deref().unwrap_or_default())
        } else {
            format!("{call};")
        }
    } else {
        let q = names.pick(&["quote", "est", "preview"]);
        format!("uint256 {q} = {amt} * 2;")
    };
    let src_var = if d { &amt } else { &fee };
    let value = if c.scaled { format!("{src_var} * 2") } else { src_var.clone() };
    let write_stmt = if s {
        format!("{ledger}[{key}] = {value};")
    } else {
        let w = names.pick(&["draft", "staged", "tmp"]);
        format!("uint256 {w} = {value};")
    };
    let pads: Vec<String> = (0..c.pads)
        .map(|i| {
            let l = names.pick(&["pad", "tick", "memo", "mark"]);
            format!("uint256 {l} = {};", (i as u32 + 2) * 5)
        })
        .collect();

    let mut params = site.params.clone();
    params.extend(arg_params(&args));
    params.push(format!("address {key}"));
    params.push(format!("uint256 {fee}"));

    let mut src = Src::new(&spec.import_path);
    src.push(0, format!("contract {contract} {{"));
    for dcl in &site.decls {
        src.push(1, dcl);
    }
    src.push(1, format!("mapping(address => uint256) public {ledger};"));
    src.push(1, format!("function {func}({}) external {{", params.join(", ")));
    for p in &site.prelude {
        src.push(2, p);
    }
    if c.guard {
        src.push(2, format!("require({fee} > 0);"));
    }
    let (first, second) = if o { (&call_stmt, &write_stmt) } else { (&write_stmt, &call_stmt) };
    let l1 = src.push(2, first);
    for p in &pads {
        src.push(2, p);
    }
    let l2 = src.push(2, second);
    src.push(1, "}");
    src.push(0, "}");
    let (call_line, write_line) = if o { (l1, l2) } else { (l2, l1) };

    let vulnerable = e && s && d && o;
    let labels = Labels {
        call_lines: if e { vec![call_line] } else { vec![] },
        update_lines: if s { vec![write_line] } else { vec![] },
        dependency: None,
        cei: None,
        vulnerable,
        witnesses: if vulnerable { vec![(call_line, write_line)] } else { vec![] },
        bits,
    };
    let provenance = Provenance {
        seed,
        template_id: "FULL".into(),
        axes: axes(&[
            ("bits", bits_name(bits)),
            ("iface", spec.id()),
            ("target", label(c.target)),
            ("guard", c.guard.to_string()),
            ("pads", c.pads.to_string()),
            ("scaled", c.scaled.to_string()),
            ("capture", c.capture.to_string()),
        ]),
        with_cfg_context: None,
    };
    LabeledSample { source: src.finish(), task: Task::Full, labels, provenance }
}

/// Realized summary bits implied by latent bits.
pub fn realized_bits(bits: [bool; 4]) -> [bool; 4] {
    let [e, s, d, o] = bits;
    let dep = e && s && d;
    [e, s, dep, dep && o]
}

pub fn all_bits() -> Vec<[bool; 4]> {
    (0..16u8).map(|m| [m & 8 != 0, m & 4 != 0, m & 2 != 0, m & 1 != 0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{analyze, brute_force_oracle, AnalysisOptions};
    use crate::minisol::ProgramUnit;

    #[test]
    fn realized_factors_follow_the_bits() {
        for bits in all_bits() {
            for seed in 0..10 {
                let s = gen_factorial(bits, seed * 37 + 1);
                let p = ProgramUnit::parse(&s.source).unwrap_or_else(|e| panic!("{e:?}\n{}", s.source));
                let fs = analyze(&p, &AnalysisOptions::default());
                assert_eq!(fs.summary_bits(), realized_bits(bits), "{}", s.source);
                let oracle = brute_force_oracle(&p, &AnalysisOptions::default()).unwrap();
                assert!(oracle.same_factors(&fs));
            }
        }
    }

    #[test]
    fn bit_order_is_e_s_d_o() {
        assert_eq!(all_bits()[15], [true; 4]);
        assert_eq!(all_bits()[8], [true, false, false, false]);
        assert_eq!(bits_name([true, false, true, false]), "1010");
    }
}
