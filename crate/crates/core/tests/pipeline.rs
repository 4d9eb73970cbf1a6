//! Generators, validator, analyzer and oracle working together.

use revul::datagen::corpus::{read_jsonl, write_jsonl};
use revul::datagen::factorial::{all_bits, realized_bits};
use revul::datagen::{
    catalog, gen_corpus, gen_dependency, gen_external_call, gen_external_call_absent, gen_factorial, gen_ordering,
    validate, CeiLabel, CeiPattern, CorpusSpec, DepRule, LabeledSample, Task,
};
use revul::factors::{analyze, brute_force_oracle, AnalysisOptions, DepsMode};
use revul::minisol::ProgramUnit;
use revul::scoring::boolean_rule;
use std::collections::{BTreeMap, BTreeSet};

fn mixed_corpus(n: usize, seed: u64) -> Vec<LabeledSample> {
    let counts = Task::ALL.iter().map(|&t| (t, n)).collect();
    gen_corpus(&CorpusSpec { counts, ratio: (1.0, 1.0), seed }).samples
}

#[test]
fn every_generated_sample_validates() {
    for s in mixed_corpus(120, 3) {
        let r = validate(&s);
        assert!(r.passed, "{:?}\n{}", r.issues, s.source);
    }
}

#[test]
fn analyzer_matches_oracle_on_generated_programs() {
    let mut checked = 0;
    for s in mixed_corpus(80, 11) {
        let p = ProgramUnit::parse(&s.source).unwrap();
        for deps in [DepsMode::All, DepsMode::DataOnly] {
            let opts = AnalysisOptions { deps };
            if let Ok(oracle) = brute_force_oracle(&p, &opts) {
                assert!(oracle.same_factors(&analyze(&p, &opts)), "{}", s.source);
                checked += 1;
            }
        }
    }
    assert!(checked >= 400, "only {checked} programs within the oracle bound");
}

#[test]
fn consecutive_seeds_never_repeat_structure() {
    let key = |s: &LabeledSample| (s.provenance.template_id.clone(), s.provenance.axes.clone());
    let specs = catalog();
    let mut families: Vec<Vec<LabeledSample>> = Vec::new();
    for spec in &specs {
        families.push((0..12).map(|k| gen_external_call(spec, k).unwrap()).collect());
        for rule in DepRule::all() {
            if let Ok(first) = gen_dependency(&rule, spec, 0) {
                let mut f = vec![first];
                f.extend((1..12).map(|k| gen_dependency(&rule, spec, k).unwrap()));
                families.push(f);
            }
        }
        for pat in CeiPattern::all() {
            if let Ok(first) = gen_ordering(&pat, spec, 0) {
                let mut f = vec![first];
                f.extend((1..12).map(|k| gen_ordering(&pat, spec, k).unwrap()));
                families.push(f);
            }
        }
    }
    for bits in all_bits() {
        families.push((0..12).map(|k| gen_factorial(bits, k)).collect());
    }
    for f in &families {
        let keys: BTreeSet<_> = f.iter().map(key).collect();
        assert_eq!(keys.len(), f.len(), "repeated structure in {:?}", f[0].provenance.template_id);
    }
}

#[test]
fn ordering_taxonomy_agrees_with_boolean_rule() {
    for spec in catalog().iter().filter(|s| !s.read_only) {
        for pat in CeiPattern::all() {
            for seed in 0..5 {
                let s = gen_ordering(&pat, spec, seed).unwrap();
                let fs = analyze(&ProgramUnit::parse(&s.source).unwrap(), &AnalysisOptions::default());
                assert_eq!(boolean_rule(&fs).vulnerable, pat.label == CeiLabel::Risk, "{}", s.source);
            }
        }
    }
}

#[test]
fn absent_twin_has_no_call() {
    for spec in catalog() {
        let s = gen_external_call_absent(&spec, 4).unwrap();
        assert!(s.labels.call_lines.is_empty());
        assert!(!s.positive());
        assert!(validate(&s).passed);
        let fs = analyze(&ProgramUnit::parse(&s.source).unwrap(), &AnalysisOptions::default());
        assert!(fs.call_units().is_empty());
    }
}

#[test]
fn factorial_bits_drive_realized_factors() {
    for bits in all_bits() {
        let s = gen_factorial(bits, 77);
        let fs = analyze(&ProgramUnit::parse(&s.source).unwrap(), &AnalysisOptions::default());
        assert_eq!(fs.summary_bits(), realized_bits(bits));
        assert_eq!(s.labels.vulnerable, bits.iter().all(|&b| b));
    }
}

#[test]
fn corpus_jsonl_round_trip_and_determinism() {
    let a = gen_corpus(&CorpusSpec::single(Task::D, 40, (1.0, 2.0), 9));
    let b = gen_corpus(&CorpusSpec::single(Task::D, 40, (1.0, 2.0), 9));
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.samples.iter().filter(|s| s.positive()).count(), 13);
    let mut buf = Vec::new();
    write_jsonl(&a.samples, &mut buf).unwrap();
    assert_eq!(read_jsonl(&buf[..]).unwrap(), a.samples);
    let m: BTreeMap<String, serde_json::Value> =
        serde_json::from_value(serde_json::to_value(&a.manifest).unwrap()).unwrap();
    assert!(m.contains_key("bit_marginals"));
}

#[test]
fn every_generator_over_the_catalog_validates() {
    let check = |s: LabeledSample| {
        let r = validate(&s);
        assert!(r.passed, "{:?}\n{}", r.issues, s.source);
    };
    for spec in catalog() {
        for seed in 0..6 {
            check(gen_external_call(&spec, seed).unwrap());
            check(gen_external_call_absent(&spec, seed).unwrap());
            for rule in DepRule::all() {
                if let Ok(s) = gen_dependency(&rule, &spec, seed) {
                    check(s);
                }
            }
            for pat in CeiPattern::all() {
                if let Ok(s) = gen_ordering(&pat, &spec, seed) {
                    check(s);
                }
            }
        }
    }
}
