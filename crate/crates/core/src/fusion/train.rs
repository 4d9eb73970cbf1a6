//! Seeded mini-batch training loop with decoupled-weight-decay Adam.

use super::{BranchFeatures, FusionError, FusionModel, Grads, LossBreakdown};
use crate::num::{c, Scalar};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            total_steps: 300,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    /// Mean batch loss per step.
    pub history: Vec<LossBreakdown<T>>,
    /// Full-dataset CE after each completed epoch.
    pub epoch_ce: Vec<T>,
    /// Steps during which only the gate scores were updated.
    pub warmup_steps: usize,
    pub degenerate_targets: usize,
}

/// Adam with decoupled weight decay over one flat parameter group.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    lr: T,
    b1: T,
    b2: T,
    eps: T,
    wd: T,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        AdamW {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
            lr: c(cfg.learning_rate),
            b1: c(cfg.beta1),
            b2: c(cfg.beta2),
            eps: c(cfg.eps),
            wd: c(cfg.weight_decay),
        }
    }

    /// `decay[i]` selects which entries receive weight decay.
    pub fn step(&mut self, params: &mut [&mut T], grads: &[T], decay: &[bool]) {
        self.t += 1;
        let bc1 = T::one() - self.b1.powi(self.t);
        let bc2 = T::one() - self.b2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.b1 * self.m[i] + (T::one() - self.b1) * g;
            self.v[i] = self.b2 * self.v[i] + (T::one() - self.b2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            let p = &mut *params[i];
            if decay[i] {
                *p = *p - self.lr * self.wd * *p;
            }
            *p = *p - self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

fn gate_slots<T: Scalar>(m: &mut FusionModel<T>) -> (Vec<&mut T>, Vec<bool>) {
    let mut p: Vec<&mut T> = Vec::new();
    let mut d = Vec::new();
    let (u, cc) = (&mut m.gate.u, &mut m.gate.c);
    for row in u.iter_mut() {
        for x in row.iter_mut() {
            p.push(x);
            d.push(true);
        }
    }
    for x in cc.iter_mut() {
        p.push(x);
        d.push(false);
    }
    (p, d)
}

fn gate_grads<T: Scalar>(g: &Grads<T>) -> Vec<T> {
    g.u.iter().flatten().copied().chain(g.c.iter().copied()).collect()
}

fn head_slots<T: Scalar>(m: &mut FusionModel<T>) -> (Vec<&mut T>, Vec<bool>) {
    let n = m.head.w.len();
    let mut p: Vec<&mut T> = m.head.w.iter_mut().collect();
    p.push(&mut m.head.b);
    let mut d = vec![true; n];
    d.push(false);
    (p, d)
}

fn head_grads<T: Scalar>(g: &Grads<T>) -> Vec<T> {
    g.w.iter().copied().chain(std::iter::once(g.b)).collect()
}

pub fn init_model<T: Scalar>(mut model: FusionModel<T>, rng: &mut ChaCha8Rng) -> FusionModel<T> {
    for row in model.gate.u.iter_mut() {
        for x in row.iter_mut() {
            *x = c(rng.gen_range(-0.1..0.1));
        }
    }
    model.gate.c = [T::zero(); 4];
    model.head.w.iter_mut().for_each(|x| *x = T::zero());
    model.head.b = T::zero();
    model
}

fn dataset_ce<T: Scalar>(m: &FusionModel<T>, data: &[(BranchFeatures<T>, bool)]) -> T {
    let sum = data
        .iter()
        .fold(T::zero(), |a, (z, y)| a + super::model::forward(m, z, if *y { T::one() } else { T::zero() }).loss.ce);
    sum / c(data.len() as f64)
}

pub fn train<T: Scalar>(
    data: &[(BranchFeatures<T>, bool)],
    template: &FusionModel<T>,
    cfg: &TrainConfig,
) -> Result<(FusionModel<T>, TrainReport<T>), FusionError> {
    train_with_observer(data, template, cfg, &mut |_, _, _| {})
}

/// Runs `cfg.total_steps` mini-batch updates. The template supplies the
/// gate configuration and dimensions; its parameter values are replaced by
/// the seeded initialization. The observer sees every post-update model.
pub fn train_with_observer<T: Scalar>(
    data: &[(BranchFeatures<T>, bool)],
    template: &FusionModel<T>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(usize, &FusionModel<T>, &LossBreakdown<T>),
) -> Result<(FusionModel<T>, TrainReport<T>), FusionError> {
    if data.is_empty() {
        return Err(FusionError::EmptyDataset);
    }
    if cfg.total_steps == 0 || cfg.batch_size == 0 {
        return Err(FusionError::Invalid("total_steps and batch_size must be positive".into()));
    }
    template.gate.validate()?;
    let h = template.dim();
    for (z, _) in data {
        z.validate()?;
        if z.dim() != h {
            return Err(FusionError::Invalid(format!("feature dimension {} != model dimension {h}", z.dim())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(template.clone(), &mut rng);
    let n_gate = 4 * h + 4;
    let mut opt_gate = AdamW::new(n_gate, cfg);
    let mut opt_head = AdamW::new(h + 1, cfg);
    let warmup = (crate::num::to_f64(template.gate.warmup_ratio) * cfg.total_steps as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = data.len();
    let mut report =
        TrainReport { history: Vec::new(), epoch_ce: Vec::new(), warmup_steps: warmup, degenerate_targets: 0 };

    for step in 0..cfg.total_steps {
        if cursor >= data.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(data.len());
        let batch = &order[cursor..end];
        cursor = end;
        let scale = T::one() / c(batch.len() as f64);
        let mut grads = Grads::zeros(h);
        let mut loss = LossBreakdown { ce: T::zero(), jaco: T::zero(), total: T::zero() };
        for &i in batch {
            let (z, y) = &data[i];
            let (f, g) = model.loss_grads(z, if *y { T::one() } else { T::zero() });
            if f.degenerate && f.uses_jaco(model.gate.lambda_jaco) {
                report.degenerate_targets += 1;
            }
            grads.add_scaled(&g, scale);
            loss.ce = loss.ce + scale * f.loss.ce;
            loss.jaco = loss.jaco + scale * f.loss.jaco;
            loss.total = loss.total + scale * f.loss.total;
        }
        if !loss.total.is_finite() {
            return Err(FusionError::NonFiniteLoss(step));
        }
        let gg = gate_grads(&grads);
        let (mut p, d) = gate_slots(&mut model);
        opt_gate.step(&mut p, &gg, &d);
        if step >= warmup {
            let hg = head_grads(&grads);
            let (mut p, d) = head_slots(&mut model);
            opt_head.step(&mut p, &hg, &d);
        }
        report.history.push(loss);
        observer(step, &model, &loss);
        if cursor >= data.len() {
            report.epoch_ce.push(dataset_ce(&model, data));
        }
    }
    Ok((model, report))
}
