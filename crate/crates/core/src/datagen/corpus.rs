//! Stratified corpora with a requested class-prior ratio.

use super::dependency::{dep_combos, gen_dependency, DepId, DepRule, Direction};
use super::external::{gen_external_call, gen_external_call_absent};
use super::factorial::{all_bits, gen_factorial};
use super::interfaces::{catalog, transfer_like, InterfaceSpec};
use super::ordering::{gen_ordering, CeiPattern, CeiType};
use super::{rng, LabeledSample, Task};
use crate::fusion::design_matrix_rank;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub counts: BTreeMap<Task, usize>,
    /// positive : negative
    pub ratio: (f64, f64),
    pub seed: u64,
}

impl CorpusSpec {
    pub fn single(task: Task, count: usize, ratio: (f64, f64), seed: u64) -> CorpusSpec {
        CorpusSpec { counts: BTreeMap::from([(task, count)]), ratio, seed }
    }
}

/// `round(n · p / (p + q))`.
pub fn positive_count(n: usize, ratio: (f64, f64)) -> usize {
    let (p, q) = ratio;
    ((n as f64) * p / (p + q)).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMarginals {
    pub count: usize,
    pub positives: usize,
    pub positive_fraction: f64,
    /// Mean of each design bit (E, S, D, O).
    pub bit_marginals: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub ratio: (f64, f64),
    pub total: usize,
    pub tasks: BTreeMap<String, TaskMarginals>,
    pub bit_marginals: [f64; 4],
    /// Indices of an anchor sample followed by its four single-bit flips.
    pub rank_certificate: Option<Vec<usize>>,
    pub certificate_rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<LabeledSample>,
    pub manifest: Manifest,
}

/// One generation job: a class stratum and the running index within it.
#[derive(Debug, Clone)]
enum Job {
    E { spec: InterfaceSpec, present: bool, seed: u64 },
    D { rule: DepRule, spec: InterfaceSpec, seed: u64 },
    O { pattern: CeiPattern, spec: InterfaceSpec, seed: u64 },
    Full { bits: [bool; 4], seed: u64 },
}

impl Job {
    fn run(&self) -> LabeledSample {
        let r = match self {
            Job::E { spec, present: true, seed } => gen_external_call(spec, *seed),
            Job::E { spec, present: false, seed } => gen_external_call_absent(spec, *seed),
            Job::D { rule, spec, seed } => gen_dependency(rule, spec, *seed),
            Job::O { pattern, spec, seed } => gen_ordering(pattern, spec, *seed),
            Job::Full { bits, seed } => Ok(gen_factorial(*bits, *seed)),
        };
        r.expect("strata only pair compatible rules and interfaces")
    }
}

/// A stratum hands out consecutive seeds per (template, interface) cell, so
/// repeated cells walk through distinct axis combinations.
struct Stratum {
    cells: Vec<Job>,
    next: usize,
    uses: Vec<u64>,
}

impl Stratum {
    fn new(cells: Vec<Job>, base: u64) -> Stratum {
        let n = cells.len();
        let mut r = rng(base, 41);
        let uses = (0..n).map(|_| r.gen::<u32>() as u64).collect();
        Stratum { cells, next: 0, uses }
    }

    fn take(&mut self) -> Job {
        let i = self.next % self.cells.len();
        self.next += 1;
        let seed = self.uses[i];
        self.uses[i] += 1;
        let mut job = self.cells[i].clone();
        match &mut job {
            Job::E { seed: s, .. } | Job::D { seed: s, .. } | Job::O { seed: s, .. } | Job::Full { seed: s, .. } => {
                *s = seed
            }
        }
        job
    }
}

fn strata(task: Task, base: u64) -> (Stratum, Stratum) {
    match task {
        Task::E => {
            let mk = |present| catalog().into_iter().map(|spec| Job::E { spec, present, seed: 0 }).collect();
            (Stratum::new(mk(true), base), Stratum::new(mk(false), base ^ 1))
        }
        Task::D => {
            let cells = |ids: &[DepId]| {
                let mut out = Vec::new();
                for &id in ids {
                    for dir in Direction::ALL {
                        let rule = DepRule::new(id, dir);
                        for spec in catalog() {
                            if !dep_combos(&rule, &spec).is_empty() {
                                out.push(Job::D { rule: rule.clone(), spec, seed: 0 });
                            }
                        }
                    }
                }
                out
            };
            (
                Stratum::new(cells(&[DepId::ADirect, DepId::BIndirect, DepId::CCtrl]), base),
                Stratum::new(cells(&[DepId::ZNone]), base ^ 1),
            )
        }
        Task::O => {
            let cells = |types: &[CeiType]| {
                let mut out = Vec::new();
                for &t in types {
                    for spec in transfer_like() {
                        out.push(Job::O { pattern: CeiPattern::new(t), spec, seed: 0 });
                    }
                }
                out
            };
            (
                Stratum::new(
                    cells(&[
                        CeiType::SimpleIntBeforeEffect,
                        CeiType::PostInteractionEffects,
                        CeiType::PathSensitiveIBeforeE,
                    ]),
                    base,
                ),
                Stratum::new(cells(&[CeiType::CeiOk]), base ^ 1),
            )
        }
        Task::Full => {
            let anchor = [true; 4];
            // single-bit flips of the anchor come first among negatives
            let mut neg: Vec<[bool; 4]> = (0..4)
                .map(|k| {
                    let mut b = anchor;
                    b[k] = false;
                    b
                })
                .collect();
            let others: Vec<[bool; 4]> =
                all_bits().into_iter().rev().filter(|b| *b != anchor && !neg.contains(b)).collect();
            neg.extend(others);
            (
                Stratum::new(vec![Job::Full { bits: anchor, seed: 0 }], base),
                Stratum::new(neg.into_iter().map(|bits| Job::Full { bits, seed: 0 }).collect(), base ^ 1),
            )
        }
    }
}

fn marginals(samples: &[&LabeledSample]) -> TaskMarginals {
    let n = samples.len();
    let positives = samples.iter().filter(|s| s.positive()).count();
    let nf = n.max(1) as f64;
    let mut bits = [0.0; 4];
    for s in samples {
        for (k, b) in s.labels.bits.iter().enumerate() {
            bits[k] += *b as u8 as f64 / nf;
        }
    }
    TaskMarginals { count: n, positives, positive_fraction: positives as f64 / nf, bit_marginals: bits }
}

/// Anchor row plus its four single-bit flips, first occurrences.
pub fn find_rank_certificate(bits: &[[bool; 4]]) -> Option<Vec<usize>> {
    let first = |b: [bool; 4]| bits.iter().position(|x| *x == b);
    let mut anchors = all_bits();
    anchors.reverse();
    for a in anchors {
        let Some(ia) = first(a) else { continue };
        let mut idx = vec![ia];
        for k in 0..4 {
            let mut f = a;
            f[k] = !f[k];
            match first(f) {
                Some(i) => idx.push(i),
                None => break,
            }
        }
        if idx.len() == 5 {
            return Some(idx);
        }
    }
    None
}

pub fn gen_corpus(spec: &CorpusSpec) -> Corpus {
    let mut jobs: Vec<Job> = Vec::new();
    for (&task, &n) in &spec.counts {
        let n_pos = positive_count(n, spec.ratio);
        let base = spec.seed.wrapping_mul(31).wrapping_add(task as u64);
        let (mut pos, mut neg) = strata(task, base);
        let mut classes: Vec<bool> = Vec::with_capacity(n);
        let (mut head_pos, mut head_neg) = (0, 0);
        if task == Task::Full {
            // the anchor and its four flips lead, so the certificate exists
            // whenever the counts allow it
            head_pos = n_pos.min(1);
            head_neg = (n - n_pos).min(4);
            classes.extend(std::iter::repeat_n(true, head_pos));
            classes.extend(std::iter::repeat_n(false, head_neg));
        }
        let mut rest: Vec<bool> = (0..n - head_pos - head_neg).map(|i| i < n_pos - head_pos).collect();
        rest.shuffle(&mut rng(base, 43));
        classes.extend(rest);
        for c in classes {
            jobs.push(if c { pos.take() } else { neg.take() });
        }
    }
    let samples: Vec<LabeledSample> = jobs.par_iter().map(Job::run).collect();

    let mut tasks = BTreeMap::new();
    for &task in spec.counts.keys() {
        let of: Vec<&LabeledSample> = samples.iter().filter(|s| s.task == task).collect();
        tasks.insert(task.name().to_string(), marginals(&of));
    }
    let all: Vec<&LabeledSample> = samples.iter().collect();
    let bits: Vec<[bool; 4]> = samples.iter().map(|s| s.labels.bits).collect();
    let rank_certificate = find_rank_certificate(&bits);
    let certificate_rank =
        rank_certificate.as_ref().map(|idx| design_matrix_rank(&idx.iter().map(|&i| bits[i]).collect::<Vec<_>>()).rank);
    let manifest = Manifest {
        seed: spec.seed,
        ratio: spec.ratio,
        total: samples.len(),
        tasks,
        bit_marginals: marginals(&all).bit_marginals,
        rank_certificate,
        certificate_rank,
    };
    Corpus { samples, manifest }
}

/// Balanced full-factorial corpus: every cell of the 2^4 design `per_cell`
/// times.
pub fn factorial_grid(per_cell: usize, seed: u64) -> Vec<LabeledSample> {
    let cells = all_bits();
    let jobs: Vec<([bool; 4], u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &b)| (0..per_cell).map(move |k| (b, seed.wrapping_add((c * 1000 + k) as u64))))
        .collect();
    jobs.par_iter().map(|&(b, s)| gen_factorial(b, s)).collect()
}

pub fn write_jsonl<W: Write>(samples: &[LabeledSample], mut w: W) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<LabeledSample>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_arithmetic() {
        assert_eq!(positive_count(300, (1.0, 2.0)), 100);
        assert_eq!(positive_count(300, (0.5, 0.95)), 103);
        assert!((103.0 / 300.0 - 0.5 / 1.45f64).abs() <= 1.0 / 300.0);
    }

    #[test]
    fn realized_prior_matches() {
        for ratio in [(1.0, 2.0), (0.5, 0.95)] {
            let c = gen_corpus(&CorpusSpec::single(Task::D, 300, ratio, 7));
            let m = &c.manifest.tasks["D"];
            let want = ratio.0 / (ratio.0 + ratio.1);
            assert!((m.positive_fraction - want).abs() <= 1.0 / 300.0 + 1e-12, "{}", m.positive_fraction);
        }
    }

    #[test]
    fn full_corpus_certifies_rank_four() {
        let c = gen_corpus(&CorpusSpec::single(Task::Full, 60, (1.0, 2.0), 3));
        assert_eq!(c.manifest.rank_certificate.as_ref().map(Vec::len), Some(5));
        assert_eq!(c.manifest.certificate_rank, Some(4));
    }

    #[test]
    fn deterministic_bytes() {
        let spec = CorpusSpec {
            counts: BTreeMap::from([(Task::E, 20), (Task::O, 20), (Task::Full, 20)]),
            ratio: (1.0, 1.0),
            seed: 5,
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_jsonl(&gen_corpus(&spec).samples, &mut a).unwrap();
        write_jsonl(&gen_corpus(&spec).samples, &mut b).unwrap();
        assert_eq!(a, b);
        let back = read_jsonl(std::io::Cursor::new(&a)).unwrap();
        assert_eq!(back, gen_corpus(&spec).samples);
    }

    #[test]
    fn certificate_search() {
        let rows = vec![[true, true, false, false], [true; 4], [false, true, true, true]];
        assert_eq!(find_rank_certificate(&rows), None);
        let mut rows = all_bits();
        rows.reverse();
        let c = find_rank_certificate(&rows).unwrap();
        assert_eq!(rows[c[0]], [true; 4]);
    }
}
