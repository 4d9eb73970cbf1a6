mod common;

use common::*;
use rand::Rng;

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(11);
    for draw in 0..100 {
        let mut m = random_model(&mut r, 8);
        let z = random_features(&mut r, 8);
        let y = if r.gen_bool(0.5) { 1.0 } else { 0.0 };
        let vs = variants();
        let (label, apply) = &vs[draw % vs.len()];
        apply(&mut m);
        for which in ["logit", "ce", "kl"] {
            let (err, at) = worst_relative_error(&m, &z, y, which, 1e-5);
            assert!(err < 1e-4, "draw {draw} ({label}): {at} rel {err:e}");
        }
    }
}

#[test]
fn training_gradient_is_ce_plus_weighted_kl() {
    let mut r = rng(5);
    let m = random_model(&mut r, 8);
    let z = random_features(&mut r, 8);
    let (_, total) = m.loss_grads(&z, 1.0);
    let ce = m.component_grads(&z, 1.0, "ce");
    let kl = m.component_grads(&z, 1.0, "kl");
    for i in 0..8 {
        let expect = ce.w[i] + m.gate.lambda_jaco * kl.w[i];
        assert!((total.w[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn sensitivity_target_matches_finite_differences() {
    let mut r = rng(17);
    for _ in 0..20 {
        let m = random_model(&mut r, 8);
        let z = random_features(&mut r, 8);
        let (q, degenerate) = m.sensitivity_target(&z).unwrap();
        assert!(!degenerate);
        let mut g = [0.0; 4];
        for k in 0..4 {
            let mut sq = 0.0;
            for i in 0..8 {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp.z[k][i] += 1e-5;
                zm.z[k][i] -= 1e-5;
                let d = (m.forward(&zp, 0.0).unwrap().logit - m.forward(&zm, 0.0).unwrap().logit) / 2e-5;
                sq += d * d;
            }
            g[k] = sq.sqrt();
        }
        let s: f64 = g.iter().sum();
        for k in 0..4 {
            let num = g[k] / s;
            assert!((num - q[k]).abs() / num.max(q[k]) < 1e-4);
        }
    }
}
