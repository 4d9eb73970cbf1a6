//! Deterministic per-branch features computed from a factor set.
//!
//! Every branch has `H = 8` entries; positions are `(unit + 1) / N`.
//!
//! | idx | z_E                 | z_S                      | z_D                      | z_O                              |
//! |-----|---------------------|--------------------------|--------------------------|----------------------------------|
//! | 0   | call units / N      | update units / N         | dep pairs / candidates   | −1 pairs / dep pairs             |
//! | 1   | any call            | any update               | any dependency           | any −1 pair                      |
//! | 2   | first call position | first update position    | DIRECT share of deps     | earliest −1 call position        |
//! | 3   | last call position  | last update position     | INDIRECT share           | some −1 witness is path-sensitive|
//! | 4   | high-level share    | compound share           | CTRL share               | +1 pairs / dep pairs             |
//! | 5   | low-level share     | indexed-write share      | dep pairs / N            | mean (u − c) / N over −1 pairs   |
//! | 6   | delegate share      | in-branch share          | calls with a dependency  | latest −1 update position        |
//! | 7   | static share        | updates that also call   | updates with a dependency| −1 pairs / N                     |
//!
//! Call-kind shares are weighted by each unit's call weight.

use super::BranchFeatures;
use crate::factors::{DepKind, FactorSet};
use crate::minisol::CallKind;
use crate::num::{c, Scalar};

pub const H: usize = 8;

pub const FEATURE_NAMES: [[&str; H]; 4] = [
    ["call_frac", "any_call", "first_call", "last_call", "kind_high", "kind_low", "kind_delegate", "kind_static"],
    ["upd_frac", "any_upd", "first_upd", "last_upd", "compound", "indexed", "in_branch", "upd_is_call"],
    ["dep_density", "any_dep", "direct", "indirect", "ctrl", "dep_frac", "call_cov", "upd_cov"],
    ["neg_frac", "any_neg", "earliest_neg", "path_sensitive", "pos_frac", "neg_gap", "latest_neg_upd", "neg_count"],
];

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn extract_branch_features<T: Scalar>(fs: &FactorSet) -> BranchFeatures<T> {
    let n = fs.n_units;
    if n == 0 {
        return BranchFeatures::zeros(H);
    }
    let nf = n as f64;
    let pos = |i: usize| (i + 1) as f64 / nf;
    let calls = fs.call_units();
    let ups = fs.update_units();
    let cands = fs.candidates();
    let deps = fs.dependency_pairs();
    let neg: Vec<(usize, usize)> = deps.iter().copied().filter(|&(a, b)| fs.phi_o[a][b] == -1).collect();
    let pos_pairs = deps.len() - neg.len();

    let mut ze = [0.0; H];
    ze[0] = ratio(calls.len(), n);
    if let (Some(&f), Some(&l)) = (calls.first(), calls.last()) {
        ze[1] = 1.0;
        ze[2] = pos(f);
        ze[3] = pos(l);
        let total: f64 = calls.iter().map(|&i| fs.unit_meta[i].call_weight).sum();
        if total > 0.0 {
            for &i in &calls {
                let m = &fs.unit_meta[i];
                let k = m.call_kind.unwrap_or(CallKind::HighLevel).index();
                ze[4 + k] += m.call_weight / total;
            }
        }
    }

    let mut zs = [0.0; H];
    zs[0] = ratio(ups.len(), n);
    if let (Some(&f), Some(&l)) = (ups.first(), ups.last()) {
        zs[1] = 1.0;
        zs[2] = pos(f);
        zs[3] = pos(l);
        let share = |p: &dyn Fn(usize) -> bool| ratio(ups.iter().filter(|&&i| p(i)).count(), ups.len());
        zs[4] = share(&|i| fs.unit_meta[i].compound);
        zs[5] = share(&|i| fs.unit_meta[i].indexed_write);
        zs[6] = share(&|i| fs.unit_meta[i].in_branch);
        zs[7] = share(&|i| fs.phi_e[i]);
    }

    let mut zd = [0.0; H];
    zd[0] = ratio(deps.len(), cands.len());
    if !deps.is_empty() {
        zd[1] = 1.0;
        let share = |k: DepKind| ratio(deps.iter().filter(|&&(a, b)| fs.kind(a, b) == k).count(), deps.len());
        zd[2] = share(DepKind::Direct);
        zd[3] = share(DepKind::Indirect);
        zd[4] = share(DepKind::Ctrl);
        zd[5] = deps.len() as f64 / nf;
        zd[6] = ratio(calls.iter().filter(|&&a| deps.iter().any(|&(x, _)| x == a)).count(), calls.len());
        zd[7] = ratio(ups.iter().filter(|&&b| deps.iter().any(|&(_, y)| y == b)).count(), ups.len());
    }

    let mut zo = [0.0; H];
    zo[0] = ratio(neg.len(), deps.len());
    zo[4] = ratio(pos_pairs, deps.len());
    if !neg.is_empty() {
        zo[1] = 1.0;
        zo[2] = pos(neg.iter().map(|&(a, _)| a).min().unwrap_or(0));
        zo[3] = fs.witnesses.iter().any(|w| w.order == -1 && w.path_sensitive) as u8 as f64;
        zo[5] = neg.iter().map(|&(a, b)| (b as f64 - a as f64) / nf).sum::<f64>() / neg.len() as f64;
        zo[6] = pos(neg.iter().map(|&(_, b)| b).max().unwrap_or(0));
        zo[7] = neg.len() as f64 / nf;
    }

    let cv = |a: [f64; H]| a.iter().map(|&x| c::<T>(x)).collect::<Vec<T>>();
    BranchFeatures { z: [cv(ze), cv(zs), cv(zd), cv(zo)] }
}
