#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revul::fusion::{BranchFeatures, FusionModel, Grads, Sensitivity};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(r: &mut ChaCha8Rng, h: usize) -> BranchFeatures<f64> {
    BranchFeatures { z: std::array::from_fn(|_| (0..h).map(|_| r.gen_range(-1.0..1.0)).collect()) }
}

pub fn random_model(r: &mut ChaCha8Rng, h: usize) -> FusionModel<f64> {
    let mut m = FusionModel::new(h);
    for k in 0..4 {
        m.gate.u[k] = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
        m.gate.c[k] = r.gen_range(-0.5..0.5);
    }
    m.gate.tau_gate = r.gen_range(0.5..2.0);
    m.gate.lambda_jaco = 0.5;
    m.head.w = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
    m.head.b = r.gen_range(-0.5..0.5);
    m
}

/// Scalar value of one loss component.
pub fn component(m: &FusionModel<f64>, z: &BranchFeatures<f64>, y: f64, which: &str) -> f64 {
    let f = m.forward(z, y).unwrap();
    match which {
        "logit" => f.logit,
        "ce" => f.loss.ce,
        "kl" => f.loss.jaco,
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Slot {
    U(usize, usize),
    Z(usize, usize),
    C(usize),
    W(usize),
    B,
}

/// Every trainable parameter and every feature entry.
pub fn slots(h: usize) -> Vec<Slot> {
    let mut out = Vec::new();
    for k in 0..4 {
        for i in 0..h {
            out.push(Slot::U(k, i));
            out.push(Slot::Z(k, i));
        }
        out.push(Slot::C(k));
    }
    out.extend((0..h).map(Slot::W));
    out.push(Slot::B);
    out
}

pub fn slot_mut<'a>(m: &'a mut FusionModel<f64>, z: &'a mut BranchFeatures<f64>, s: Slot) -> &'a mut f64 {
    match s {
        Slot::U(k, i) => &mut m.gate.u[k][i],
        Slot::Z(k, i) => &mut z.z[k][i],
        Slot::C(k) => &mut m.gate.c[k],
        Slot::W(i) => &mut m.head.w[i],
        Slot::B => &mut m.head.b,
    }
}

pub fn analytic(g: &Grads<f64>, s: Slot) -> f64 {
    match s {
        Slot::U(k, i) => g.u[k][i],
        Slot::Z(k, i) => g.z[k][i],
        Slot::C(k) => g.c[k],
        Slot::W(i) => g.w[i],
        Slot::B => g.b,
    }
}

/// Worst relative error between analytic and central-difference gradients
/// over every slot, for one component. Denominators are floored at 1e-6.
pub fn worst_relative_error(
    m: &FusionModel<f64>,
    z: &BranchFeatures<f64>,
    y: f64,
    which: &str,
    step: f64,
) -> (f64, String) {
    let g = m.component_grads(z, y, which);
    let mut worst = (0.0, String::new());
    for slot in slots(m.dim()) {
        let (mut mp, mut zp) = (m.clone(), z.clone());
        *slot_mut(&mut mp, &mut zp, slot) += step;
        let hi = component(&mp, &zp, y, which);
        let (mut mm, mut zm) = (m.clone(), z.clone());
        *slot_mut(&mut mm, &mut zm, slot) -= step;
        let lo = component(&mm, &zm, y, which);
        let num = (hi - lo) / (2.0 * step);
        let ana = analytic(&g, slot);
        let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, format!("{which} {slot:?}: analytic {ana:e} numeric {num:e}"));
        }
    }
    worst
}

pub fn variants() -> Vec<(&'static str, Box<dyn Fn(&mut FusionModel<f64>)>)> {
    vec![
        ("full", Box::new(|_| {})),
        ("masked", Box::new(|m| m.gate.mask = [true, false, true, true])),
        ("fusion-only", Box::new(|m| m.gate.sensitivity = Sensitivity::FusionOnly)),
        (
            "prior-mix",
            Box::new(|m| {
                m.gate.mask = [true, true, false, true];
                m.gate.prior = Some([0.1, 0.2, 0.3, 0.4]);
                m.gate.prior_mix = true;
            }),
        ),
        ("fixed", Box::new(|m| m.gate.fixed_alpha = Some([0.4, 0.3, 0.2, 0.1]))),
    ]
}
