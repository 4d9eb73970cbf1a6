//! Frozen soft-score values (from tests/oracles/scoring_values.py, 50-digit
//! mpmath) and score properties.

#![allow(clippy::excessive_precision)]

use proptest::prelude::*;
use revul::factors::{DepKind, FactorSet, UnitKind};
use revul::scoring::{
    argmax_pair, boolean_rule, predict, raw_score_gradient, soft_order, soft_score, soft_score_relaxed, ScoreParams,
    SoftScore, SumMode,
};

pub const SOFT_ORDER_NEG: f64 = 0.98201379003790844197;
pub const SOFT_ORDER_POS: f64 = 0.017986209962091558027;
pub const SINGLE_PRED: f64 = 0.87303399922279978469;
pub const TWO_RAW: f64 = 1.3050778630560719648;
pub const TWO_CENTERED: f64 = 0.6119306824961266554;
pub const TWO_PRED: f64 = 0.61009765637955275313;
pub const ZERO_PRED: f64 = 0.11920292202211755594;

fn fs_with(pairs: &[(usize, usize, i8)], n: usize) -> FactorSet {
    let mut fs = FactorSet::empty(n, UnitKind::Line);
    for &(a, b, o) in pairs {
        fs.phi_e[a] = true;
        fs.phi_s[b] = true;
        if o != 0 {
            fs.phi_d[a][b] = true;
            fs.phi_o[a][b] = o;
            fs.dep_kind.as_mut().unwrap()[a][b] = DepKind::Direct;
        }
    }
    fs
}

#[test]
fn frozen_values() {
    let p = ScoreParams::<f64>::default();
    assert!((soft_order(-1.0, 4.0) - SOFT_ORDER_NEG).abs() < 1e-15);
    assert!((soft_order(1.0, 4.0) - SOFT_ORDER_POS).abs() < 1e-15);

    let single = soft_score(&fs_with(&[(0, 1, -1)], 3), &p);
    assert!((single.raw_f - SOFT_ORDER_NEG).abs() < 1e-12);
    assert!((single.centered_f - SOFT_ORDER_NEG).abs() < 1e-12);
    assert!((single.probability - SINGLE_PRED).abs() < 1e-12);

    let two = soft_score(&two_pair_fs(), &p);
    assert_eq!(two_pair_fs().candidates().len(), 2);
    assert!((two.raw_f - TWO_RAW).abs() < 1e-12, "{two:?}");
    assert!((two.centered_f - TWO_CENTERED).abs() < 1e-12);
    assert!((two.probability - TWO_PRED).abs() < 1e-12);

    let zero = soft_score(&FactorSet::empty(4, UnitKind::Line), &p);
    assert!((zero.probability - ZERO_PRED).abs() < 1e-15);
}

/// Exactly two candidate pairs: (0,1) call-first and (2,1) update-first.
pub fn two_pair_fs() -> FactorSet {
    let mut fs = FactorSet::empty(3, UnitKind::Line);
    fs.phi_e[0] = true;
    fs.phi_e[2] = true;
    fs.phi_s[1] = true;
    for (c, o) in [(0, -1), (2, 1)] {
        fs.phi_d[c][1] = true;
        fs.phi_o[c][1] = o;
        fs.dep_kind.as_mut().unwrap()[c][1] = DepKind::Direct;
    }
    fs
}

fn random_fs() -> impl Strategy<Value = FactorSet> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::collection::vec((any::<bool>(), prop::bool::ANY), n), n),
        )
            .prop_map(move |(e, s, d)| {
                let mut fs = FactorSet::empty(n, UnitKind::Line);
                fs.phi_e = e;
                fs.phi_s = s;
                for a in 0..n {
                    for b in 0..n {
                        let (dep, call_first) = d[a][b];
                        if a != b && dep {
                            fs.phi_d[a][b] = true;
                            fs.phi_o[a][b] = if call_first { -1 } else { 1 };
                            fs.dep_kind.as_mut().unwrap()[a][b] = DepKind::Direct;
                        }
                    }
                }
                fs
            })
    })
}

fn modes() -> impl Strategy<Value = SumMode> {
    prop_oneof![Just(SumMode::FullGrid), Just(SumMode::CandidateRestricted)]
}

proptest! {
    #[test]
    fn soft_order_is_decreasing_and_symmetric(a in 0.1f64..10.0, x in -1.0f64..1.0) {
        prop_assert!(soft_order(x - 0.01, a) > soft_order(x, a));
        prop_assert!((soft_order(x, a) + soft_order(-x, a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flipping_an_order_raises_raw_score(fs in random_fs(), mode in modes()) {
        let p = ScoreParams { alpha: 4.0, tau: 2.0, sum_mode: mode };
        let base = soft_score(&fs, &p);
        for (a, b) in fs.candidates() {
            if fs.phi_d[a][b] && fs.phi_o[a][b] == 1 {
                let mut g = fs.clone();
                g.phi_o[a][b] = -1;
                prop_assert!(soft_score(&g, &p).raw_f > base.raw_f);
            }
        }
    }

    #[test]
    fn soundness_link(fs in random_fs(), alpha in 4.0f64..8.0) {
        let p = ScoreParams { alpha, tau: 2.0, sum_mode: SumMode::CandidateRestricted };
        let v = boolean_rule(&fs);
        let s = soft_score(&fs, &p);
        if v.vulnerable {
            let n = fs.candidates().len() as f64;
            prop_assert!(s.centered_f >= soft_order(-1.0, alpha) - n.ln() - 1e-12);
            if fs.candidates().len() == 1 {
                prop_assert!(s.centered_f > 0.9);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences(fs in random_fs(), mode in modes(), jitter in prop::collection::vec(-0.9f64..0.9, 36)) {
        let p = ScoreParams { alpha: 4.0, tau: 2.0, sum_mode: mode };
        prop_assume!(soft_score::<f64>(&fs, &p).raw_f.is_finite());
        let n = fs.n_units;
        let o: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| fs.phi_o[a][b] as f64 * 0.5 + jitter[(a * n + b) % 36] * 0.5).collect()).collect();
        let g = raw_score_gradient(&fs, &o, &p);
        let h = 1e-6;
        for a in 0..n {
            for b in 0..n {
                let (mut hi, mut lo) = (o.clone(), o.clone());
                hi[a][b] += h;
                lo[a][b] -= h;
                let num = (soft_score_relaxed(&fs, &hi, &p).raw_f - soft_score_relaxed(&fs, &lo, &p).raw_f) / (2.0 * h);
                let ana = g[a][b];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8);
                prop_assert!(rel < 1e-6 || (num - ana).abs() < 1e-10, "({a},{b}) {ana} vs {num}");
            }
        }
    }

    #[test]
    fn argmax_maximizes_softmax_weight(fs in random_fs()) {
        let p = ScoreParams::<f64>::default();
        if let Some((a, b)) = argmax_pair(&fs, &p) {
            let val = |c: usize, u: usize| if fs.phi_d[c][u] { soft_order(fs.phi_o[c][u] as f64, 4.0) } else { 0.0 };
            let best = val(a, b).exp();
            for (c, u) in fs.candidates() {
                prop_assert!(val(c, u).exp() <= best);
            }
        }
    }

    #[test]
    fn predict_is_sigmoid_of_used_score(fs in random_fs(), tau in -3.0f64..3.0) {
        let p = ScoreParams { alpha: 4.0, tau, sum_mode: SumMode::CandidateRestricted };
        let s = soft_score(&fs, &p);
        let expect = 1.0 / (1.0 + (-(4.0 * s.centered_f - tau)).exp());
        prop_assert!((predict(&s, &p) - expect).abs() < 1e-12);
        let as_f32: SoftScore<f32> = soft_score(&fs, &ScoreParams { alpha: 4.0f32, tau: tau as f32, sum_mode: SumMode::CandidateRestricted });
        prop_assert!((as_f32.probability as f64 - s.probability).abs() < 1e-5);
    }
}
