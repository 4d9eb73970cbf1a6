//! Boolean composition rule and its smooth log-sum-exp relaxation.

use crate::factors::FactorSet;
use crate::num::{c, log_sum_exp, sigmoid, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMode {
    FullGrid,
    #[default]
    CandidateRestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams<T> {
    pub alpha: T,
    pub tau: T,
    pub sum_mode: SumMode,
}

impl<T: Scalar> Default for ScoreParams<T> {
    fn default() -> Self {
        ScoreParams { alpha: c(4.0), tau: c(2.0), sum_mode: SumMode::CandidateRestricted }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ScoreError {
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
}

impl<T: Scalar> ScoreParams<T> {
    pub fn new(alpha: T, tau: T, sum_mode: SumMode) -> Result<Self, ScoreError> {
        if !(alpha > T::zero()) {
            return Err(ScoreError::NonPositiveAlpha(crate::num::to_f64(alpha)));
        }
        Ok(ScoreParams { alpha, tau, sum_mode })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub vulnerable: bool,
    pub witnesses: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftScore<T> {
    pub raw_f: T,
    pub centered_f: T,
    pub probability: T,
}

/// True iff some pair has a call, an update, a dependency and the call first.
pub fn boolean_rule(fs: &FactorSet) -> Verdict {
    let witnesses: Vec<(usize, usize)> =
        fs.candidates().into_iter().filter(|&(cu, u)| fs.phi_d[cu][u] && fs.phi_o[cu][u] == -1).collect();
    Verdict { vulnerable: !witnesses.is_empty(), witnesses }
}

/// `1 / (1 + exp(alpha * o))`; accepts relaxed (real-valued) orders.
pub fn soft_order<T: Scalar>(o: T, alpha: T) -> T {
    sigmoid(-alpha * o)
}

fn pair_value<T: Scalar>(fs: &FactorSet, cu: usize, u: usize, o: T, alpha: T) -> T {
    if fs.phi_e[cu] && fs.phi_s[u] && fs.phi_d[cu][u] {
        soft_order(o, alpha)
    } else {
        T::zero()
    }
}

/// Pairs entering the sum in the given mode, and the matching baseline count.
fn support(fs: &FactorSet, mode: SumMode) -> Vec<(usize, usize)> {
    match mode {
        SumMode::FullGrid => {
            let n = fs.n_units;
            (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect()
        }
        SumMode::CandidateRestricted => fs.candidates(),
    }
}

/// Score with φ_O replaced by a real-valued matrix (used for gradient checks).
pub fn soft_score_relaxed<T: Scalar>(fs: &FactorSet, o: &[Vec<T>], params: &ScoreParams<T>) -> SoftScore<T> {
    let pairs = support(fs, params.sum_mode);
    let vals: Vec<T> = pairs.iter().map(|&(a, b)| pair_value(fs, a, b, o[a][b], params.alpha)).collect();
    let (raw_f, centered_f) = if vals.is_empty() {
        // empty candidate set: the log-sum-exp is −∞; centered score is 0 by convention
        (T::neg_infinity(), T::zero())
    } else {
        let raw = log_sum_exp(&vals);
        (raw, raw - c::<T>(vals.len() as f64).ln())
    };
    let mut s = SoftScore { raw_f, centered_f, probability: T::zero() };
    s.probability = predict(&s, params);
    s
}

pub fn soft_score<T: Scalar>(fs: &FactorSet, params: &ScoreParams<T>) -> SoftScore<T> {
    let o: Vec<Vec<T>> = fs.phi_o.iter().map(|r| r.iter().map(|&v| c(v as f64)).collect()).collect();
    soft_score_relaxed(fs, &o, params)
}

/// The score the sigmoid sees: raw in full-grid mode, centered otherwise.
pub fn f_used<T: Scalar>(score: &SoftScore<T>, params: &ScoreParams<T>) -> T {
    match params.sum_mode {
        SumMode::FullGrid => score.raw_f,
        SumMode::CandidateRestricted => score.centered_f,
    }
}

pub fn predict<T: Scalar>(score: &SoftScore<T>, params: &ScoreParams<T>) -> T {
    sigmoid(params.alpha * f_used(score, params) - params.tau)
}

/// d raw_f / d o[c][u] for the relaxed score, as a dense matrix.
pub fn raw_score_gradient<T: Scalar>(fs: &FactorSet, o: &[Vec<T>], params: &ScoreParams<T>) -> Vec<Vec<T>> {
    let n = fs.n_units;
    let mut g = vec![vec![T::zero(); n]; n];
    let pairs = support(fs, params.sum_mode);
    if pairs.is_empty() {
        return g;
    }
    let vals: Vec<T> = pairs.iter().map(|&(a, b)| pair_value(fs, a, b, o[a][b], params.alpha)).collect();
    let lse = log_sum_exp(&vals);
    for (&(a, b), &v) in pairs.iter().zip(&vals) {
        if fs.phi_e[a] && fs.phi_s[b] && fs.phi_d[a][b] {
            let w = (v - lse).exp();
            // d/do sigmoid(-alpha o) = -alpha s (1 - s)
            g[a][b] = w * (-params.alpha) * v * (T::one() - v);
        }
    }
    g
}

/// Witness pair with the largest relaxed entry A[c,u], ties to the first.
pub fn argmax_pair<T: Scalar>(fs: &FactorSet, params: &ScoreParams<T>) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), T)> = None;
    for (a, b) in fs.candidates() {
        let v = pair_value(fs, a, b, c(fs.phi_o[a][b] as f64), params.alpha);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some(((a, b), v));
        }
    }
    best.map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{DepKind, UnitKind};

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
    fn soft_order_basics() {
        assert_eq!(soft_order(0.0f64, 3.0), 0.5);
        let a = soft_order(-1.0f64, 4.0);
        let b = soft_order(1.0f64, 4.0);
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(a > b);
    }

    #[test]
    fn empty_is_safe() {
        let fs = FactorSet::empty(5, UnitKind::Line);
        let v = boolean_rule(&fs);
        assert!(!v.vulnerable && v.witnesses.is_empty());
        let p = ScoreParams { alpha: 4.0, tau: 2.0, sum_mode: SumMode::FullGrid };
        let s = soft_score(&fs, &p);
        assert!((s.raw_f - 25f64.ln()).abs() < 1e-12);
        assert!(s.centered_f.abs() < 1e-12);
        let s = soft_score(&fs, &ScoreParams::<f64>::default());
        assert_eq!(s.centered_f, 0.0);
        assert!((s.probability - sigmoid(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn boolean_rule_needs_call_first() {
        let fs = fs_with(&[(1, 3, -1)], 5);
        let v = boolean_rule(&fs);
        assert_eq!(v.witnesses, vec![(1, 3)]);
        let fs = fs_with(&[(3, 1, 1)], 5);
        assert!(!boolean_rule(&fs).vulnerable);
    }

    #[test]
    fn tau_limit_drives_probability_to_zero() {
        let fs = fs_with(&[(0, 1, -1)], 3);
        let p = ScoreParams { alpha: 4.0, tau: 1e6, sum_mode: SumMode::CandidateRestricted };
        assert!(soft_score(&fs, &p).probability < 1e-300);
    }

    #[test]
    fn rejects_non_positive_alpha() {
        assert!(ScoreParams::new(0.0, 1.0, SumMode::FullGrid).is_err());
        assert!(ScoreParams::new(1.0f32, 1.0, SumMode::FullGrid).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let fs = fs_with(&[(0, 1, -1)], 3);
        let s = soft_score(&fs, &ScoreParams::<f32>::default());
        assert!((s.centered_f - soft_order(-1.0f32, 4.0)).abs() < 1e-6);
    }
}
