use super::*;
use crate::minisol::ProgramUnit;
use proptest::prelude::*;

fn pu(src: &str) -> ProgramUnit {
    ProgramUnit::parse(src).unwrap_or_else(|e| panic!("{e:?}\n{src}"))
}

fn all(src: &str) -> FactorSet {
    analyze(&pu(src), &AnalysisOptions::default())
}

const WITHDRAW: &str = "contract Vault {
    mapping(address => uint256) public credit;
    function withdraw(address token, uint256 amount) external {
        require(amount > 0);
        require(credit[msg.sender] >= amount);
        IERC20(token).transfer(msg.sender, amount);
        credit[msg.sender] -= amount;
    }
}";

#[test]
fn withdraw_factors() {
    let fs = all(WITHDRAW);
    fs.check().unwrap();
    assert_eq!(fs.n_units, 9);
    assert_eq!(fs.call_units(), vec![5]);
    assert_eq!(fs.update_units(), vec![6]);
    assert!(fs.phi_d[5][6]);
    assert_eq!(fs.kind(5, 6), DepKind::Direct);
    assert_eq!(fs.phi_o[5][6], -1);
    assert_eq!(fs.summary_bits(), [true, true, true, true]);
    let w = &fs.witnesses[0];
    assert_eq!((w.c, w.u, w.order), (5, 6, -1));
    assert!(!w.path_sensitive);
}

#[test]
fn checks_effects_interactions_is_plus_one() {
    let src = "contract Vault {
    mapping(address => uint256) public credit;
    function withdraw(address token, uint256 amount) external {
        credit[msg.sender] -= amount;
        IERC20(token).transfer(msg.sender, amount);
    }
}";
    let fs = all(src);
    assert!(fs.phi_d[4][3]);
    assert_eq!(fs.phi_o[4][3], 1);
    assert_eq!(fs.summary_bits(), [true, true, true, false]);
}

#[test]
fn two_calls_one_update() {
    let src = "contract Pair {
    mapping(address => uint256) public credit;
    function settle(address a, address b, uint256 v) external {
        IERC20(a).transfer(msg.sender, v);
        credit[msg.sender] -= v;
        uint256 rest = credit[msg.sender];
        IERC20(b).transfer(msg.sender, rest);
    }
}";
    let fs = all(src);
    assert_eq!(fs.call_units(), vec![3, 6]);
    assert_eq!(fs.update_units(), vec![4]);
    assert_eq!(fs.phi_o[3][4], -1);
    assert_eq!(fs.kind(3, 4), DepKind::Direct);
    // the second call shares msg.sender with the update
    assert!(fs.phi_d[6][4]);
    assert_eq!(fs.phi_o[6][4], 1);
    assert_eq!(fs.kind(6, 4), DepKind::Direct);
}

#[test]
fn indirect_through_a_local() {
    let src = "contract C {
    mapping(address => uint256) public ledger;
    function f(address t, address k) external {
        uint256 r = IERC20(t).balanceOf(address(this));
        uint256 half = r / 2;
        ledger[k] = half;
    }
}";
    let fs = all(src);
    assert_eq!(fs.kind(3, 5), DepKind::Indirect);
    assert_eq!(fs.phi_o[3][5], -1);
}

#[test]
fn unrelated_update_has_no_dependency() {
    let src = "contract C {
    uint256 public nonce;
    function f(address t, uint256 v) external {
        IERC20(t).transfer(msg.sender, v);
        nonce = nonce + 1;
    }
}";
    let fs = all(src);
    assert!(fs.phi_e[3] && fs.phi_s[4]);
    assert!(!fs.phi_d[3][4]);
    assert_eq!(fs.phi_o[3][4], 0);
    assert!(fs.witnesses.is_empty());
}

#[test]
fn control_dependency_through_return_value() {
    let src = "contract C {
    mapping(address => uint256) public ledger;
    uint256 public stamp;
    function f(address t, address a, uint256 v, address k) external {
        bool ok = IERC20(t).transfer(a, v);
        if (ok) {
            ledger[k] = stamp;
        }
    }
}";
    let p = pu(src);
    let fs = analyze(&p, &AnalysisOptions::default());
    assert_eq!(fs.kind(4, 6), DepKind::Ctrl);
    assert_eq!(fs.phi_o[4][6], -1);
    let data = analyze(&p, &AnalysisOptions { deps: DepsMode::DataOnly });
    assert!(!data.phi_d[4][6]);
    assert_eq!(data.phi_o[4][6], 0);
}

#[test]
fn shared_inputs_outrank_control() {
    // the update reuses the call's arguments, which is a data dependency
    let src = "contract C {
    mapping(address => uint256) public ledger;
    function f(address t, address a, uint256 v) external {
        bool ok = IERC20(t).transfer(a, v);
        if (ok) {
            ledger[a] += v;
        }
    }
}";
    let fs = all(src);
    assert_eq!(fs.kind(3, 5), DepKind::Direct);
}

#[test]
fn call_inside_condition_is_control() {
    let src = "contract C {
    uint256 public stamp;
    mapping(address => uint256) public ledger;
    function f(address t, address a, uint256 v, address k) external {
        if (IERC20(t).transfer(a, v)) {
            ledger[k] = stamp;
        }
    }
}";
    let fs = all(src);
    assert_eq!(fs.kind(4, 5), DepKind::Ctrl);
}

#[test]
fn same_line_call_and_update() {
    let src = "contract C {
    mapping(address => uint256) public got;
    function f(address t, address a) external {
        got[a] = IERC20(t).balanceOf(a);
    }
}";
    let fs = all(src);
    assert!(fs.phi_e[3] && fs.phi_s[3]);
    assert_eq!(fs.kind(3, 3), DepKind::Direct);
    assert_eq!(fs.phi_o[3][3], -1);
}

#[test]
fn branch_sensitive_order() {
    let src = "contract C {
    mapping(address => uint256) public credit;
    function f(address t, uint256 v, bool flag) external {
        if (flag) {
            IERC20(t).transfer(msg.sender, v);
        } else {
            return;
        }
        credit[msg.sender] -= v;
    }
}";
    let fs = all(src);
    assert_eq!(fs.phi_o[4][8], -1);
    assert!(fs.witnesses.iter().any(|w| w.c == 4 && w.u == 8 && w.path_sensitive));
}

#[test]
fn sibling_branches_never_order() {
    let src = "contract C {
    mapping(address => uint256) public credit;
    function f(address t, uint256 v, bool flag) external {
        if (flag) {
            IERC20(t).transfer(msg.sender, v);
        } else {
            credit[msg.sender] -= v;
        }
    }
}";
    let fs = all(src);
    // no path runs both, so there is nothing to flow either way
    assert!(!fs.phi_d[4][6]);
}

#[test]
fn diamond_matches_oracle() {
    let src = "contract C {
    mapping(address => uint256) public credit;
    uint256 public total;
    function f(address t, uint256 v, bool flag) external {
        uint256 amt = v;
        if (flag) {
            amt = v + 1;
        } else {
            amt = 0;
        }
        IERC20(t).transfer(msg.sender, amt);
        credit[msg.sender] = amt;
        total = total + 1;
    }
}";
    let p = pu(src);
    let a = analyze(&p, &AnalysisOptions::default());
    let o = brute_force_oracle(&p, &AnalysisOptions::default()).unwrap();
    assert!(a.same_factors(&o), "analytic {:?}\noracle {:?}", a.phi_d, o.phi_d);
    assert_eq!(a.kind(10, 11), DepKind::Direct);
    assert!(!a.phi_d[10][12]);
}

#[test]
fn oracle_refuses_large_programs() {
    let mut body = String::new();
    for i in 0..30 {
        body.push_str(&format!("        uint256 v{i} = {i};\n"));
    }
    let src = format!("contract C {{\n    function f() external {{\n{body}    }}\n}}");
    let p = pu(&src);
    assert!(matches!(brute_force_oracle(&p, &AnalysisOptions::default()), Err(OracleError::TooLarge { .. })));
}

#[test]
fn json_round_trip() {
    let fs = all(WITHDRAW);
    let v = fs.to_json();
    assert_eq!(v["phi_E"][5], 1);
    assert_eq!(v["phi_O"][5][6], -1);
    let back = FactorSet::from_json(&v).unwrap();
    assert!(back.same_factors(&fs));
    assert_eq!(back.witnesses, fs.witnesses);
}

#[test]
fn ordering_and_precedence_helpers() {
    let p = pu(WITHDRAW);
    let fs = analyze(&p, &AnalysisOptions::default());
    let (d, _) = dependency_matrix(&p, &AnalysisOptions::default());
    assert_eq!(ordering_matrix(&p, &d), fs.phi_o);
    assert!(call_precedes_update(&p));
    assert_eq!(external_call_units(&p), fs.phi_e);
    assert_eq!(state_update_units(&p), fs.phi_s);
}

#[test]
fn merge_prefers_stronger_kind() {
    assert_eq!(DepKind::Ctrl.merge(DepKind::Direct), DepKind::Direct);
    assert_eq!(DepKind::Indirect.merge(DepKind::Ctrl), DepKind::Indirect);
    assert_eq!(DepKind::None.merge(DepKind::None), DepKind::None);
}

// ---- random small programs -------------------------------------------------

const POOL: &[&str] = &[
    "uint256 x = v;",
    "uint256 y = x + 1;",
    "x = credit[who];",
    "y = 3;",
    "credit[who] -= v;",
    "credit[who] = y;",
    "total = total + x;",
    "total = 7;",
    "IERC20(t).transfer(who, v);",
    "IERC20(t).transfer(who, x);",
    "bool ok = IERC20(t).transfer(who, y);",
    "ok = IERC20(t).approve(who, 1);",
    "x = IERC20(t).balanceOf(who);",
    "require(ok);",
    "require(x > 0);",
    "nonce = nonce + 1;",
];

#[derive(Debug, Clone)]
enum Piece {
    Simple(usize),
    If { cond: usize, then_: Vec<usize>, else_: Option<Vec<usize>>, ret: bool },
}

const CONDS: &[&str] = &["ok", "flag", "x > 1", "credit[who] > 0"];

fn render(pieces: &[Piece]) -> String {
    let mut out = String::from(
        "contract C {\n    mapping(address => uint256) public credit;\n    uint256 public total;\n    uint256 public nonce;\n    function f(address t, address who, uint256 v, bool flag) external {\n        uint256 x = 0;\n        uint256 y = 0;\n        bool ok = flag;\n",
    );
    let fix =
        |s: &str| s.replace("uint256 x = ", "x = ").replace("uint256 y = ", "y = ").replace("bool ok = ", "ok = ");
    for p in pieces {
        match p {
            Piece::Simple(i) => out.push_str(&format!("        {}\n", fix(POOL[*i]))),
            Piece::If { cond, then_, else_, ret } => {
                out.push_str(&format!("        if ({}) {{\n", CONDS[*cond]));
                for i in then_ {
                    out.push_str(&format!("            {}\n", fix(POOL[*i])));
                }
                if *ret {
                    out.push_str("            return;\n");
                }
                match else_ {
                    Some(e) => {
                        out.push_str("        } else {\n");
                        for i in e {
                            out.push_str(&format!("            {}\n", fix(POOL[*i])));
                        }
                        out.push_str("        }\n");
                    }
                    None => out.push_str("        }\n"),
                }
            }
        }
    }
    out.push_str("    }\n}\n");
    out
}

fn piece() -> impl Strategy<Value = Piece> {
    let n = POOL.len();
    prop_oneof![
        4 => (0..n).prop_map(Piece::Simple),
        1 => (
            0..CONDS.len(),
            prop::collection::vec(0..n, 1..3),
            prop::option::of(prop::collection::vec(0..n, 1..3)),
            any::<bool>()
        )
            .prop_map(|(cond, then_, else_, ret)| Piece::If { cond, then_, else_, ret }),
    ]
}

fn program() -> impl Strategy<Value = Vec<Piece>> {
    prop::collection::vec(piece(), 1..7).prop_filter("at most two branches and small", |ps| {
        let branches = ps.iter().filter(|p| matches!(p, Piece::If { .. })).count();
        branches <= 2 && render(ps).lines().count() <= ORACLE_MAX_LINES
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn analytic_matches_oracle(ps in program(), data_only in any::<bool>()) {
        let src = render(&ps);
        let p = ProgramUnit::parse(&src).unwrap();
        let opts = AnalysisOptions { deps: if data_only { DepsMode::DataOnly } else { DepsMode::All } };
        let a = analyze(&p, &opts);
        let o = brute_force_oracle(&p, &opts).unwrap();
        prop_assert!(a.same_factors(&o), "{}\nanalytic D {:?}\noracle D {:?}\nanalytic O {:?}\noracle O {:?}",
            src, a.dep_kind, o.dep_kind, a.phi_o, o.phi_o);
    }

    #[test]
    fn invariants_hold(ps in program()) {
        let p = ProgramUnit::parse(&render(&ps)).unwrap();
        let fs = analyze(&p, &AnalysisOptions::default());
        prop_assert!(fs.check().is_ok());
        for a in 0..fs.n_units {
            for b in 0..fs.n_units {
                if fs.phi_d[a][b] {
                    prop_assert!(fs.phi_e[a] && fs.phi_s[b]);
                    prop_assert!(fs.phi_o[a][b] == 1 || fs.phi_o[a][b] == -1);
                } else {
                    prop_assert_eq!(fs.phi_o[a][b], 0);
                }
            }
        }
        let data = analyze(&p, &AnalysisOptions { deps: DepsMode::DataOnly });
        for a in 0..fs.n_units {
            for b in 0..fs.n_units {
                prop_assert!(!data.phi_d[a][b] || fs.phi_d[a][b]);
            }
        }
    }

    #[test]
    fn deleting_an_inert_line_keeps_remaining_factors(ps in program(), k in any::<prop::sample::Index>()) {
        // a require over locals neither calls, updates, branches nor writes
        let inert: Vec<usize> = ps.iter().enumerate()
            .filter(|(_, p)| matches!(p, Piece::Simple(i) if POOL[*i].starts_with("require")))
            .map(|(i, _)| i).collect();
        prop_assume!(!inert.is_empty());
        let drop = inert[k.index(inert.len())];
        let mut fewer = ps.clone();
        fewer.remove(drop);
        let (a, b) = (render(&ps), render(&fewer));
        let gone = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap();
        let full = analyze(&ProgramUnit::parse(&a).unwrap(), &AnalysisOptions::default());
        let less = analyze(&ProgramUnit::parse(&b).unwrap(), &AnalysisOptions::default());
        let map = |i: usize| if i < gone { i } else { i + 1 };
        for i in 0..less.n_units {
            prop_assert_eq!(less.phi_e[i], full.phi_e[map(i)]);
            prop_assert_eq!(less.phi_s[i], full.phi_s[map(i)]);
            for j in 0..less.n_units {
                prop_assert_eq!(less.phi_d[i][j], full.phi_d[map(i)][map(j)]);
                prop_assert_eq!(less.phi_o[i][j], full.phi_o[map(i)][map(j)]);
            }
        }
    }
}
