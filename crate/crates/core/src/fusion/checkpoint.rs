//! Versioned JSON checkpoints with flat, explicit field names.

use super::{FusionModel, GateParams, HeadParams, Sensitivity, BRANCHES};
use crate::num::{c, to_f64, Scalar};
use serde_json::{json, Map, Value};

pub const CHECKPOINT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint field {0:?} missing or malformed")]
    Field(String),
    #[error("unsupported checkpoint version {0:?}")]
    Version(String),
}

fn vecf<T: Scalar>(v: &[T]) -> Value {
    Value::from(v.iter().map(|&x| to_f64(x)).collect::<Vec<f64>>())
}

fn arr4<T: Scalar>(a: &Option<[T; 4]>) -> Value {
    match a {
        Some(a) => vecf(a),
        None => Value::Null,
    }
}

impl<T: Scalar> FusionModel<T> {
    pub fn to_checkpoint(&self) -> Value {
        let g = &self.gate;
        let mut m = Map::new();
        m.insert("version".into(), json!(CHECKPOINT_VERSION));
        for (k, name) in BRANCHES.iter().enumerate() {
            m.insert(format!("gate.u_{name}"), vecf(&g.u[k]));
            m.insert(format!("gate.c_{name}"), json!(to_f64(g.c[k])));
        }
        m.insert("head.w".into(), vecf(&self.head.w));
        m.insert("head.b".into(), json!(to_f64(self.head.b)));
        m.insert(
            "config".into(),
            json!({
                "tau_gate": to_f64(g.tau_gate),
                "mask": g.mask,
                "prior": arr4(&g.prior),
                "prior_mix": g.prior_mix,
                "fixed_alpha": arr4(&g.fixed_alpha),
                "warmup_ratio": to_f64(g.warmup_ratio),
                "lambda_jaco": to_f64(g.lambda_jaco),
                "sensitivity": match g.sensitivity { Sensitivity::Total => "total", Sensitivity::FusionOnly => "fusion-only" },
            }),
        );
        Value::Object(m)
    }

    pub fn from_checkpoint(v: &Value) -> Result<Self, CheckpointError> {
        let field = |k: &str| CheckpointError::Field(k.to_string());
        let version = v.get("version").and_then(Value::as_str).ok_or_else(|| field("version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version.to_string()));
        }
        let num = |x: &Value, k: &str| x.as_f64().map(c::<T>).ok_or_else(|| field(k));
        let list = |x: Option<&Value>, k: &str| -> Result<Vec<T>, CheckpointError> {
            x.and_then(Value::as_array).ok_or_else(|| field(k))?.iter().map(|e| num(e, k)).collect()
        };
        let opt4 = |x: Option<&Value>, k: &str| -> Result<Option<[T; 4]>, CheckpointError> {
            match x {
                None | Some(Value::Null) => Ok(None),
                Some(a) => {
                    let l = list(Some(a), k)?;
                    <[T; 4]>::try_from(l).map(Some).map_err(|_| field(k))
                }
            }
        };
        let w = list(v.get("head.w"), "head.w")?;
        let mut gate = GateParams::new(w.len());
        for (k, name) in BRANCHES.iter().enumerate() {
            let key = format!("gate.u_{name}");
            gate.u[k] = list(v.get(&key), &key)?;
            if gate.u[k].len() != w.len() {
                return Err(field(&key));
            }
            let key = format!("gate.c_{name}");
            gate.c[k] = num(v.get(&key).ok_or_else(|| field(&key))?, &key)?;
        }
        let cfg = v.get("config").ok_or_else(|| field("config"))?;
        gate.tau_gate = num(cfg.get("tau_gate").ok_or_else(|| field("config.tau_gate"))?, "config.tau_gate")?;
        let mask = cfg.get("mask").and_then(Value::as_array).ok_or_else(|| field("config.mask"))?;
        if mask.len() != 4 {
            return Err(field("config.mask"));
        }
        for (k, m) in mask.iter().enumerate() {
            gate.mask[k] = m.as_bool().ok_or_else(|| field("config.mask"))?;
        }
        gate.prior = opt4(cfg.get("prior"), "config.prior")?;
        gate.prior_mix = cfg.get("prior_mix").and_then(Value::as_bool).unwrap_or(false);
        gate.fixed_alpha = opt4(cfg.get("fixed_alpha"), "config.fixed_alpha")?;
        gate.warmup_ratio = num(cfg.get("warmup_ratio").unwrap_or(&json!(0.0)), "config.warmup_ratio")?;
        gate.lambda_jaco = num(cfg.get("lambda_jaco").unwrap_or(&json!(0.0)), "config.lambda_jaco")?;
        gate.sensitivity = match cfg.get("sensitivity").and_then(Value::as_str) {
            Some("fusion-only") => Sensitivity::FusionOnly,
            _ => Sensitivity::Total,
        };
        let b = num(v.get("head.b").ok_or_else(|| field("head.b"))?, "head.b")?;
        Ok(FusionModel { gate, head: HeadParams { w, b } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = FusionModel::<f64>::new(3);
        m.gate.u[2] = vec![0.1, -0.25, 1e-17];
        m.gate.c = [0.5, 0.0, -1.0, 2.0];
        m.gate.mask = [true, false, true, true];
        m.gate.fixed_alpha = Some([0.25; 4]);
        m.head.w = vec![1.0, 2.0, 3.0];
        m.head.b = -0.125;
        let v = m.to_checkpoint();
        assert!(v.get("gate.u_E").is_some() && v.get("head.w").is_some());
        let text = serde_json::to_string(&v).unwrap();
        let back = FusionModel::<f64>::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_other_versions() {
        let mut v = FusionModel::<f64>::new(2).to_checkpoint();
        v["version"] = json!("0");
        assert!(matches!(FusionModel::<f64>::from_checkpoint(&v), Err(CheckpointError::Version(_))));
    }
}
