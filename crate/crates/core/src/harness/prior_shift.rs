//! Fusion stability under class-prior shift: train on corpora drawn at
//! different positive:negative ratios and compare held-out AUROC
//! trajectories.

use super::metrics::{auroc, MetricsError};
use super::{dataset, HarnessError};
use crate::datagen::{gen_corpus, CorpusSpec, Task};
use crate::factors::AnalysisOptions;
use crate::fusion::{train_with_observer, BranchFeatures, FusionModel, TrainConfig, H};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorShiftConfig {
    /// positive : negative
    pub ratios: Vec<(f64, f64)>,
    pub seeds: Vec<u64>,
    pub n_train: usize,
    /// Size of the balanced held-out set.
    pub n_eval: usize,
    pub eval_seed: u64,
    pub train: TrainConfig,
    /// Evaluations per run, evenly spaced over the steps.
    pub checkpoints: usize,
    pub lambda_jaco: f64,
    pub warmup_ratio: f64,
    pub tau_gate: f64,
}

impl Default for PriorShiftConfig {
    fn default() -> Self {
        PriorShiftConfig {
            ratios: vec![(1.0, 2.0), (0.5, 0.95)],
            seeds: vec![0, 1, 2],
            n_train: 600,
            n_eval: 400,
            eval_seed: 0x5eed_e7a1,
            train: TrainConfig { total_steps: 300, batch_size: 32, ..Default::default() },
            checkpoints: 10,
            lambda_jaco: 0.1,
            warmup_ratio: 0.1,
            tau_gate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ratio: (f64, f64),
    pub seed: u64,
    pub positive_fraction: f64,
    /// Completed steps at each evaluation.
    pub steps: Vec<usize>,
    pub auroc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorShiftReport {
    pub runs: Vec<Trajectory>,
    /// Mean |ΔAUROC| over checkpoints and over every pair of runs trained at
    /// different ratios.
    pub mean_deviation: f64,
    /// Largest per-pair mean |ΔAUROC| over all pairs of runs.
    pub max_pairwise_deviation: f64,
    pub final_auroc: Vec<f64>,
    pub min_final_auroc: f64,
    pub elapsed_secs: f64,
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

fn require_both_classes(data: &[(BranchFeatures<f64>, bool)]) -> Result<(), HarnessError> {
    let pos = data.iter().filter(|d| d.1).count();
    if pos == 0 || pos == data.len() {
        return Err(MetricsError::SingleClass.into());
    }
    Ok(())
}

fn corpus_data(n: usize, ratio: (f64, f64), seed: u64) -> Result<Vec<(BranchFeatures<f64>, bool)>, HarnessError> {
    let corpus = gen_corpus(&CorpusSpec::single(Task::Full, n, ratio, seed));
    dataset(&corpus.samples, &AnalysisOptions::default())
}

fn eval_auroc(m: &FusionModel<f64>, data: &[(BranchFeatures<f64>, bool)]) -> Result<f64, HarnessError> {
    let preds = data.iter().map(|(z, y)| Ok((m.predict(z)?, *y))).collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(auroc(&preds)?)
}

pub fn run_prior_shift_experiment(cfg: &PriorShiftConfig) -> Result<PriorShiftReport, HarnessError> {
    let start = Instant::now();
    if cfg.checkpoints == 0 || cfg.checkpoints > cfg.train.total_steps {
        return Err(HarnessError::Config("checkpoints must lie in 1..=total_steps".into()));
    }
    let eval = corpus_data(cfg.n_eval, (1.0, 1.0), cfg.eval_seed)?;
    require_both_classes(&eval)?;
    let at: Vec<usize> = (1..=cfg.checkpoints).map(|k| k * cfg.train.total_steps / cfg.checkpoints).collect();

    let mut template = FusionModel::<f64>::new(H);
    template.gate.lambda_jaco = cfg.lambda_jaco;
    template.gate.warmup_ratio = cfg.warmup_ratio;
    template.gate.tau_gate = cfg.tau_gate;

    let mut runs = Vec::new();
    for (ri, &ratio) in cfg.ratios.iter().enumerate() {
        for &seed in &cfg.seeds {
            let data = corpus_data(cfg.n_train, ratio, seed.wrapping_mul(7919).wrapping_add(ri as u64))?;
            require_both_classes(&data)?;
            let tc = TrainConfig { seed, ..cfg.train.clone() };
            let mut traj = Vec::with_capacity(at.len());
            let mut failure = None;
            train_with_observer(&data, &template, &tc, &mut |step, m, _| {
                if failure.is_none() && at.contains(&(step + 1)) {
                    match eval_auroc(m, &eval) {
                        Ok(a) => traj.push(a),
                        Err(e) => failure = Some(e),
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let positive_fraction = data.iter().filter(|d| d.1).count() as f64 / data.len() as f64;
            runs.push(Trajectory { ratio, seed, positive_fraction, steps: at.clone(), auroc: traj });
        }
    }

    let (mut cross, mut n_cross, mut max_pair) = (0.0, 0, 0.0f64);
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let d = mean_abs_diff(&runs[i].auroc, &runs[j].auroc);
            max_pair = max_pair.max(d);
            if runs[i].ratio != runs[j].ratio {
                cross += d;
                n_cross += 1;
            }
        }
    }
    let final_auroc: Vec<f64> = runs.iter().map(|r| *r.auroc.last().expect("at least one checkpoint")).collect();
    Ok(PriorShiftReport {
        mean_deviation: if n_cross > 0 { cross / n_cross as f64 } else { 0.0 },
        max_pairwise_deviation: max_pair,
        min_final_auroc: final_auroc.iter().copied().fold(f64::INFINITY, f64::min),
        final_auroc,
        runs,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PriorShiftConfig {
        PriorShiftConfig {
            ratios: vec![(1.0, 2.0)],
            seeds: vec![0, 1, 2],
            n_train: 60,
            n_eval: 40,
            train: TrainConfig { total_steps: 40, batch_size: 16, ..Default::default() },
            checkpoints: 4,
            ..Default::default()
        }
    }

    #[test]
    fn same_ratio_trajectories_have_equal_length() {
        let r = run_prior_shift_experiment(&small()).unwrap();
        assert_eq!(r.runs.len(), 3);
        for t in &r.runs {
            assert_eq!(t.auroc.len(), 4);
            assert_eq!(t.steps, vec![10, 20, 30, 40]);
            assert!(t.auroc.iter().all(|a| a.is_finite()));
        }
        assert_eq!(r.mean_deviation, 0.0);
    }

    #[test]
    fn one_sample_corpus_is_single_class() {
        let cfg = PriorShiftConfig { n_train: 1, ..small() };
        assert!(matches!(run_prior_shift_experiment(&cfg), Err(HarnessError::Metrics(MetricsError::SingleClass))));
        let cfg = PriorShiftConfig { n_eval: 1, ..small() };
        assert!(matches!(run_prior_shift_experiment(&cfg), Err(HarnessError::Metrics(MetricsError::SingleClass))));
    }
}
