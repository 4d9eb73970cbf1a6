//! Gated fusion over four per-factor feature branches, trained with a
//! Jacobian alignment penalty, plus full-rankness checks.

mod checkpoint;
mod features;
mod model;
mod rank;
mod train;

pub use checkpoint::{CheckpointError, CHECKPOINT_VERSION};
pub use features::{extract_branch_features, FEATURE_NAMES, H};
pub use model::{jacobian_alignment_loss, Forward, Grads, LossBreakdown, KL_EPS};
pub use rank::{design_matrix_rank, jacobian_column_rank, RankReport};
pub use train::{train, train_with_observer, AdamW, TrainConfig, TrainReport};

use crate::num::{c, Scalar};
use serde_json::{json, Value};

/// Branch order used for every length-4 array: E, S, D, O.
pub const BRANCHES: [&str; 4] = ["E", "S", "D", "O"];

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFeatures<T> {
    pub z: [Vec<T>; 4],
}

impl<T: Scalar> BranchFeatures<T> {
    pub fn zeros(h: usize) -> Self {
        BranchFeatures { z: std::array::from_fn(|_| vec![T::zero(); h]) }
    }

    pub fn dim(&self) -> usize {
        self.z[0].len()
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let h = self.dim();
        if self.z.iter().any(|v| v.len() != h) {
            return Err(FusionError::Invalid("branch dimensions differ".into()));
        }
        if self.z.iter().flatten().any(|x| !x.is_finite()) {
            return Err(FusionError::Invalid("non-finite feature".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> BranchFeatures<U> {
        BranchFeatures { z: std::array::from_fn(|k| self.z[k].iter().map(|&x| c(crate::num::to_f64(x))).collect()) }
    }

    pub fn to_json(&self) -> Value {
        let f = |k: usize| self.z[k].iter().map(|&x| crate::num::to_f64(x)).collect::<Vec<f64>>();
        json!({"z_E": f(0), "z_S": f(1), "z_D": f(2), "z_O": f(3)})
    }

    pub fn from_json(v: &Value) -> Result<Self, FusionError> {
        let mut z: [Vec<T>; 4] = Default::default();
        for (k, name) in BRANCHES.iter().enumerate() {
            let arr = v
                .get(format!("z_{name}"))
                .and_then(Value::as_array)
                .ok_or_else(|| FusionError::Invalid(format!("missing z_{name}")))?;
            z[k] = arr
                .iter()
                .map(|x| x.as_f64().map(c).ok_or_else(|| FusionError::Invalid(format!("z_{name}: not a number"))))
                .collect::<Result<_, _>>()?;
        }
        let f = BranchFeatures { z };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sensitivity {
    /// Fusion path plus the gating path through the scores.
    #[default]
    Total,
    FusionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T> {
    /// Score weights u_k; s_k = <u_k, z_k> + c_k.
    pub u: [Vec<T>; 4],
    pub c: [T; 4],
    pub tau_gate: T,
    pub mask: [bool; 4],
    pub prior: Option<[T; 4]>,
    /// Keep prior mass on disabled branches instead of zeroing them.
    pub prior_mix: bool,
    pub fixed_alpha: Option<[T; 4]>,
    pub warmup_ratio: T,
    pub lambda_jaco: T,
    pub sensitivity: Sensitivity,
}

impl<T: Scalar> GateParams<T> {
    pub fn new(h: usize) -> Self {
        GateParams {
            u: std::array::from_fn(|_| vec![T::zero(); h]),
            c: [T::zero(); 4],
            tau_gate: T::one(),
            mask: [true; 4],
            prior: None,
            prior_mix: false,
            fixed_alpha: None,
            warmup_ratio: T::zero(),
            lambda_jaco: c(0.1),
            sensitivity: Sensitivity::Total,
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if !self.mask.iter().any(|&m| m) {
            return Err(FusionError::AllMasked);
        }
        if !(self.tau_gate > T::zero()) {
            return Err(FusionError::Invalid("tau_gate must be positive".into()));
        }
        if self.lambda_jaco < T::zero() {
            return Err(FusionError::Invalid("lambda_jaco must be nonnegative".into()));
        }
        if !(self.warmup_ratio >= T::zero() && self.warmup_ratio <= T::one()) {
            return Err(FusionError::Invalid("warmup_ratio must lie in [0, 1]".into()));
        }
        for (name, v) in [("fixed_alpha", &self.fixed_alpha), ("prior", &self.prior)] {
            if let Some(a) = v {
                let s = a.iter().fold(T::zero(), |acc, &x| acc + x);
                if a.iter().any(|&x| x < T::zero()) || (s - T::one()).abs() > c(1e-6) {
                    return Err(FusionError::Invalid(format!("{name} must lie on the simplex")));
                }
            }
        }
        if self.prior_mix && self.prior.is_none() {
            return Err(FusionError::Invalid("prior_mix needs a prior".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    pub w: Vec<T>,
    pub b: T,
}

impl<T: Scalar> HeadParams<T> {
    pub fn new(h: usize) -> Self {
        HeadParams { w: vec![T::zero(); h], b: T::zero() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel<T> {
    pub gate: GateParams<T>,
    pub head: HeadParams<T>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("every branch is masked")]
    AllMasked,
    #[error("invalid fusion input: {0}")]
    Invalid(String),
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("empty dataset")]
    EmptyDataset,
}

impl<T: Scalar> FusionModel<T> {
    pub fn new(h: usize) -> Self {
        FusionModel { gate: GateParams::new(h), head: HeadParams::new(h) }
    }

    pub fn dim(&self) -> usize {
        self.head.w.len()
    }

    /// Simplex weights over the branches.
    pub fn gate(&self, z: &BranchFeatures<T>) -> Result<[T; 4], FusionError> {
        self.gate.validate()?;
        Ok(model::gate_weights(&self.gate, z).fused)
    }

    /// (h, logit, probability).
    pub fn fuse_and_predict(&self, z: &BranchFeatures<T>, omega: &[T; 4]) -> (Vec<T>, T, T) {
        model::fuse(z, omega, &self.head)
    }

    pub fn predict(&self, z: &BranchFeatures<T>) -> Result<T, FusionError> {
        let w = self.gate(z)?;
        Ok(self.fuse_and_predict(z, &w).2)
    }

    pub fn forward(&self, z: &BranchFeatures<T>, y: T) -> Result<Forward<T>, FusionError> {
        self.gate.validate()?;
        Ok(model::forward(self, z, y))
    }

    /// Normalized sensitivity target q and whether it fell back to uniform.
    pub fn sensitivity_target(&self, z: &BranchFeatures<T>) -> Result<([T; 4], bool), FusionError> {
        let f = self.forward(z, T::zero())?;
        Ok((f.q, f.degenerate))
    }

    /// d logit / d z_k for each branch (zero for masked branches).
    pub fn logit_jacobian(&self, z: &BranchFeatures<T>) -> Result<[Vec<T>; 4], FusionError> {
        let f = self.forward(z, T::zero())?;
        Ok(f.v)
    }
}
