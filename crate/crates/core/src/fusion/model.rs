//! Forward pass, sensitivity target, alignment loss and the hand-derived
//! reverse pass.

use super::{BranchFeatures, FusionModel, GateParams, HeadParams, Sensitivity};
use crate::num::{c, dot, norm2, sigmoid, softplus, Scalar};

pub const KL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub ce: T,
    pub jaco: T,
    pub total: T,
}

pub(crate) struct GateOut<T> {
    /// Softmax over active branches (zero on masked ones).
    pub omega: [T; 4],
    /// Weights used for fusion.
    pub fused: [T; 4],
    pub kappa: T,
    pub gated: bool,
}

pub(crate) fn gate_weights<T: Scalar>(gp: &GateParams<T>, z: &BranchFeatures<T>) -> GateOut<T> {
    let active = gp.mask;
    if let Some(fixed) = gp.fixed_alpha {
        let total = (0..4).filter(|&k| active[k]).fold(T::zero(), |a, k| a + fixed[k]);
        let n_on = active.iter().filter(|&&m| m).count();
        let w: [T; 4] = std::array::from_fn(|k| {
            if !active[k] {
                T::zero()
            } else if total > T::zero() {
                fixed[k] / total
            } else {
                T::one() / c(n_on as f64)
            }
        });
        return GateOut { omega: w, fused: w, kappa: T::one(), gated: false };
    }
    let s: [T; 4] = std::array::from_fn(|k| dot(&gp.u[k], &z.z[k]) + gp.c[k]);
    let top = (0..4).filter(|&k| active[k]).map(|k| s[k] / gp.tau_gate).fold(T::neg_infinity(), T::max);
    let e: [T; 4] = std::array::from_fn(|k| if active[k] { (s[k] / gp.tau_gate - top).exp() } else { T::zero() });
    let sum = e.iter().fold(T::zero(), |a, &x| a + x);
    let omega: [T; 4] = std::array::from_fn(|k| e[k] / sum);
    let (kappa, rho) = match (gp.prior_mix, gp.prior) {
        (true, Some(pi)) => {
            let p_fixed = (0..4).filter(|&k| !active[k]).fold(T::zero(), |a, k| a + pi[k]);
            (T::one() - p_fixed, std::array::from_fn(|k| if active[k] { T::zero() } else { pi[k] }))
        }
        _ => (T::one(), [T::zero(); 4]),
    };
    let fused = std::array::from_fn(|k| kappa * omega[k] + rho[k]);
    GateOut { omega, fused, kappa, gated: true }
}

pub(crate) fn fuse<T: Scalar>(z: &BranchFeatures<T>, omega: &[T; 4], head: &HeadParams<T>) -> (Vec<T>, T, T) {
    let h: Vec<T> = (0..z.dim()).map(|i| (0..4).fold(T::zero(), |a, k| a + omega[k] * z.z[k][i])).collect();
    let logit = dot(&head.w, &h) + head.b;
    (h, logit, sigmoid(logit))
}

/// KL(q || alpha_hat) over active branches, 0·log 0 = 0, floored logs.
pub fn jacobian_alignment_loss<T: Scalar>(q: &[T; 4], omega: &[T; 4], mask: &[bool; 4]) -> T {
    let eps: T = c(KL_EPS);
    let total = (0..4).filter(|&k| mask[k]).fold(T::zero(), |a, k| a + omega[k]);
    (0..4).filter(|&k| mask[k] && q[k] > T::zero()).fold(T::zero(), |acc, k| {
        let a_hat = if total > T::zero() { omega[k] / total } else { T::zero() };
        acc + q[k] * (q[k].max(eps).ln() - a_hat.max(eps).ln())
    })
}

#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub omega: [T; 4],
    pub fused: [T; 4],
    pub h: Vec<T>,
    pub logit: T,
    pub prob: T,
    /// Per-branch a_k = <w, z_k>.
    pub a: [T; 4],
    /// d logit / d z_k.
    pub v: [Vec<T>; 4],
    pub beta: [T; 4],
    pub g: [T; 4],
    pub q: [T; 4],
    pub degenerate: bool,
    pub loss: LossBreakdown<T>,
    kappa: T,
    gated: bool,
    y: T,
}

impl<T> Forward<T> {
    /// Whether the alignment term is part of the loss.
    pub fn uses_jaco(&self, lambda: T) -> bool
    where
        T: Scalar,
    {
        self.gated && lambda > T::zero()
    }
}

pub(crate) fn forward<T: Scalar>(m: &FusionModel<T>, z: &BranchFeatures<T>, y: T) -> Forward<T> {
    let gp = &m.gate;
    let w = &m.head.w;
    let go = gate_weights(gp, z);
    let (h, logit, prob) = fuse(z, &go.fused, &m.head);
    let a: [T; 4] = std::array::from_fn(|k| dot(w, &z.z[k]));
    let a_bar = (0..4).fold(T::zero(), |acc, k| acc + go.omega[k] * a[k]);
    let beta: [T; 4] = std::array::from_fn(|k| {
        if go.gated && gp.sensitivity == Sensitivity::Total {
            go.kappa * go.omega[k] * (a[k] - a_bar) / gp.tau_gate
        } else {
            T::zero()
        }
    });
    let v: [Vec<T>; 4] =
        std::array::from_fn(|k| (0..w.len()).map(|i| go.fused[k] * w[i] + beta[k] * gp.u[k][i]).collect());
    let g: [T; 4] = std::array::from_fn(|k| if gp.mask[k] { norm2(&v[k]) } else { T::zero() });
    let big_g = g.iter().fold(T::zero(), |acc, &x| acc + x);
    let degenerate = !(big_g > T::zero());
    let n_on = gp.mask.iter().filter(|&&b| b).count();
    let q: [T; 4] = std::array::from_fn(|k| {
        if !gp.mask[k] {
            T::zero()
        } else if degenerate {
            T::one() / c(n_on as f64)
        } else {
            g[k] / big_g
        }
    });
    let ce = softplus(logit) - y * logit;
    let jaco = if go.gated && gp.lambda_jaco > T::zero() {
        jacobian_alignment_loss(&q, &go.omega, &gp.mask)
    } else {
        T::zero()
    };
    let loss = LossBreakdown { ce, jaco, total: ce + gp.lambda_jaco * jaco };
    Forward {
        omega: go.omega,
        fused: go.fused,
        h,
        logit,
        prob,
        a,
        v,
        beta,
        g,
        q,
        degenerate,
        loss,
        kappa: go.kappa,
        gated: go.gated,
        y,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub u: [Vec<T>; 4],
    pub c: [T; 4],
    pub w: Vec<T>,
    pub b: T,
    pub z: [Vec<T>; 4],
}

impl<T: Scalar> Grads<T> {
    pub fn zeros(h: usize) -> Self {
        Grads {
            u: std::array::from_fn(|_| vec![T::zero(); h]),
            c: [T::zero(); 4],
            w: vec![T::zero(); h],
            b: T::zero(),
            z: std::array::from_fn(|_| vec![T::zero(); h]),
        }
    }

    pub fn add_scaled(&mut self, o: &Grads<T>, s: T) {
        for k in 0..4 {
            for i in 0..self.w.len() {
                self.u[k][i] = self.u[k][i] + s * o.u[k][i];
                self.z[k][i] = self.z[k][i] + s * o.z[k][i];
            }
            self.c[k] = self.c[k] + s * o.c[k];
        }
        for i in 0..self.w.len() {
            self.w[i] = self.w[i] + s * o.w[i];
        }
        self.b = self.b + s * o.b;
    }
}

/// Reverse pass for `seed_logit·logit + seed_ce·CE + seed_kl·KL`.
/// The KL seed is ignored when the gate is fixed.
pub(crate) fn backward<T: Scalar>(
    m: &FusionModel<T>,
    z: &BranchFeatures<T>,
    f: &Forward<T>,
    seed_logit: T,
    seed_ce: T,
    seed_kl: T,
) -> Grads<T> {
    let gp = &m.gate;
    let w = &m.head.w;
    let h = w.len();
    let mut gr = Grads::zeros(h);
    let tau = gp.tau_gate;
    let mut om_bar = [T::zero(); 4];
    let mut a_bar_k = [T::zero(); 4];
    let mut f_bar = [T::zero(); 4];

    if f.gated && seed_kl != T::zero() {
        let eps: T = c(KL_EPS);
        // KL = sum_k q_k (ln q_k - ln omega_k) over active k with q_k > 0
        for k in 0..4 {
            if gp.mask[k] && f.q[k] > T::zero() && f.omega[k] > eps {
                om_bar[k] = om_bar[k] - seed_kl * f.q[k] / f.omega[k];
            }
        }
        if !f.degenerate {
            let q_bar: [T; 4] = std::array::from_fn(|k| {
                if gp.mask[k] && f.q[k] > T::zero() {
                    seed_kl * (f.q[k].max(eps).ln() - f.omega[k].max(eps).ln() + T::one())
                } else {
                    T::zero()
                }
            });
            let big_g = f.g.iter().fold(T::zero(), |a, &x| a + x);
            let mean = (0..4).fold(T::zero(), |a, k| a + q_bar[k] * f.q[k]);
            let a_hat = (0..4).fold(T::zero(), |a, k| a + f.omega[k] * f.a[k]);
            let mut abar_bar = T::zero();
            for k in 0..4 {
                if !gp.mask[k] || !(f.g[k] > T::zero()) {
                    continue;
                }
                let g_bar = (q_bar[k] - mean) / big_g;
                let vb: Vec<T> = f.v[k].iter().map(|&x| g_bar * x / f.g[k]).collect();
                f_bar[k] = f_bar[k] + dot(&vb, w);
                for i in 0..h {
                    gr.w[i] = gr.w[i] + f.fused[k] * vb[i];
                    gr.u[k][i] = gr.u[k][i] + f.beta[k] * vb[i];
                }
                if gp.sensitivity == Sensitivity::Total {
                    let b_bar = dot(&vb, &gp.u[k]);
                    om_bar[k] = om_bar[k] + b_bar * f.kappa * (f.a[k] - a_hat) / tau;
                    a_bar_k[k] = a_bar_k[k] + b_bar * f.kappa * f.omega[k] / tau;
                    abar_bar = abar_bar - b_bar * f.kappa * f.omega[k] / tau;
                }
            }
            for i in 0..4 {
                om_bar[i] = om_bar[i] + abar_bar * f.a[i];
                a_bar_k[i] = a_bar_k[i] + abar_bar * f.omega[i];
            }
        }
    }

    let l_bar = seed_logit + seed_ce * (sigmoid(f.logit) - f.y);
    for k in 0..4 {
        f_bar[k] = f_bar[k] + l_bar * f.a[k];
        a_bar_k[k] = a_bar_k[k] + l_bar * f.fused[k];
    }
    gr.b = l_bar;
    for k in 0..4 {
        for i in 0..h {
            gr.w[i] = gr.w[i] + a_bar_k[k] * z.z[k][i];
            gr.z[k][i] = gr.z[k][i] + a_bar_k[k] * w[i];
        }
    }
    if f.gated {
        for k in 0..4 {
            om_bar[k] = om_bar[k] + f.kappa * f_bar[k];
        }
        let mix = (0..4).fold(T::zero(), |a, j| a + f.omega[j] * om_bar[j]);
        for k in 0..4 {
            if !gp.mask[k] {
                continue;
            }
            let s_bar = f.omega[k] / tau * (om_bar[k] - mix);
            gr.c[k] = s_bar;
            for i in 0..h {
                gr.u[k][i] = gr.u[k][i] + s_bar * z.z[k][i];
                gr.z[k][i] = gr.z[k][i] + s_bar * gp.u[k][i];
            }
        }
    }
    gr
}

impl<T: Scalar> FusionModel<T> {
    /// Gradients of the training loss CE + λ·KL.
    pub fn loss_grads(&self, z: &BranchFeatures<T>, y: T) -> (Forward<T>, Grads<T>) {
        let f = forward(self, z, y);
        let kl = if f.uses_jaco(self.gate.lambda_jaco) { self.gate.lambda_jaco } else { T::zero() };
        let g = backward(self, z, &f, T::zero(), T::one(), kl);
        (f, g)
    }

    /// Gradients of a single component: "logit", "ce" or "kl".
    pub fn component_grads(&self, z: &BranchFeatures<T>, y: T, which: &str) -> Grads<T> {
        let f = forward(self, z, y);
        let (a, b, k) = match which {
            "logit" => (T::one(), T::zero(), T::zero()),
            "ce" => (T::zero(), T::one(), T::zero()),
            "kl" => (T::zero(), T::zero(), T::one()),
            other => panic!("unknown component {other}"),
        };
        backward(self, z, &f, a, b, k)
    }
}
