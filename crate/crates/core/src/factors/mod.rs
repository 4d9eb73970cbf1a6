//! The four factor functions over a parsed program: external call (φ_E),
//! state update (φ_S), dependency (φ_D) and ordering (φ_O).
//!
//! Matrices are indexed `[c, u]` = `[call unit, update unit]`. For lines,
//! unit `i` is source line `i + 1`. φ_O is −1 when the call precedes the
//! update on some feasible path and +1 otherwise; it is 0 wherever φ_D is 0.

mod analysis;
mod oracle;

pub use analysis::{
    analyze, call_precedes_update, dependency_matrix, external_call_units, ordering_matrix, state_update_units,
};
pub use oracle::{brute_force_oracle, OracleError, ORACLE_MAX_BRANCHES, ORACLE_MAX_LINES};

use crate::minisol::{CallKind, ProgramUnit};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Line,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DepKind {
    None,
    Ctrl,
    Indirect,
    Direct,
}

impl DepKind {
    /// DIRECT beats INDIRECT beats CTRL.
    pub fn merge(self, other: DepKind) -> DepKind {
        self.max(other)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepsMode {
    #[default]
    All,
    /// Excludes control dependencies.
    DataOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub deps: DepsMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub c: usize,
    pub u: usize,
    pub kind: DepKind,
    pub order: i8,
    pub path: String,
    #[serde(default)]
    pub path_sensitive: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitMeta {
    /// Source line or block id.
    pub label: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub call_kind: Option<CallKind>,
    #[serde(default)]
    pub compound: bool,
    #[serde(default)]
    pub indexed_write: bool,
    #[serde(default)]
    pub in_branch: bool,
    #[serde(default)]
    pub reads: Vec<String>,
    #[serde(default)]
    pub writes: Vec<String>,
    /// Weight of the unit's call in feature statistics (1 unless overridden).
    #[serde(default = "one")]
    pub call_weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub n_units: usize,
    pub unit_kind: UnitKind,
    pub phi_e: Vec<bool>,
    pub phi_s: Vec<bool>,
    pub phi_d: Vec<Vec<bool>>,
    pub phi_o: Vec<Vec<i8>>,
    pub dep_kind: Option<Vec<Vec<DepKind>>>,
    pub witnesses: Vec<Witness>,
    pub unit_meta: Vec<UnitMeta>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum FactorError {
    #[error("invalid factor set: {0}")]
    Invalid(String),
}

impl FactorSet {
    pub fn empty(n: usize, unit_kind: UnitKind) -> FactorSet {
        FactorSet {
            n_units: n,
            unit_kind,
            phi_e: vec![false; n],
            phi_s: vec![false; n],
            phi_d: vec![vec![false; n]; n],
            phi_o: vec![vec![0; n]; n],
            dep_kind: Some(vec![vec![DepKind::None; n]; n]),
            witnesses: Vec::new(),
            unit_meta: (0..n)
                .map(|i| UnitMeta {
                    label: if unit_kind == UnitKind::Line { i + 1 } else { i },
                    call_weight: 1.0,
                    ..UnitMeta::default()
                })
                .collect(),
        }
    }

    /// Checks the structural invariants linking the four factors.
    pub fn check(&self) -> Result<(), FactorError> {
        let n = self.n_units;
        if self.phi_e.len() != n || self.phi_s.len() != n || self.phi_d.len() != n || self.phi_o.len() != n {
            return Err(FactorError::Invalid("dimension mismatch".into()));
        }
        for c in 0..n {
            for u in 0..n {
                let d = self.phi_d[c][u];
                let o = self.phi_o[c][u];
                if !(-1..=1).contains(&o) {
                    return Err(FactorError::Invalid(format!("phi_O[{},{}] = {}", c, u, o)));
                }
                if o != 0 && !d {
                    return Err(FactorError::Invalid(format!("phi_O[{},{}] set without dependency", c, u)));
                }
                if d && o == 0 {
                    return Err(FactorError::Invalid(format!("phi_O[{},{}] is 0 on a dependency", c, u)));
                }
                if d && !(self.phi_e[c] && self.phi_s[u]) {
                    return Err(FactorError::Invalid(format!("phi_D[{},{}] without call/update", c, u)));
                }
                if let Some(k) = &self.dep_kind {
                    if (k[c][u] == DepKind::None) == d {
                        return Err(FactorError::Invalid(format!("dep_kind[{},{}] disagrees with phi_D", c, u)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Equality of the factor values proper (witness text is ignored).
    pub fn same_factors(&self, other: &FactorSet) -> bool {
        self.n_units == other.n_units
            && self.unit_kind == other.unit_kind
            && self.phi_e == other.phi_e
            && self.phi_s == other.phi_s
            && self.phi_d == other.phi_d
            && self.phi_o == other.phi_o
            && self.dep_kind == other.dep_kind
    }

    pub fn call_units(&self) -> Vec<usize> {
        (0..self.n_units).filter(|&i| self.phi_e[i]).collect()
    }

    pub fn update_units(&self) -> Vec<usize> {
        (0..self.n_units).filter(|&i| self.phi_s[i]).collect()
    }

    /// (c, u) pairs with φ_E[c] = φ_S[u] = 1.
    pub fn candidates(&self) -> Vec<(usize, usize)> {
        let us = self.update_units();
        self.call_units().into_iter().flat_map(|c| us.iter().map(move |&u| (c, u))).collect()
    }

    pub fn dependency_pairs(&self) -> Vec<(usize, usize)> {
        self.candidates().into_iter().filter(|&(c, u)| self.phi_d[c][u]).collect()
    }

    pub fn kind(&self, c: usize, u: usize) -> DepKind {
        match &self.dep_kind {
            Some(k) => k[c][u],
            None if self.phi_d[c][u] => DepKind::Direct,
            None => DepKind::None,
        }
    }

    /// Sample-level summary bits (E, S, D, bad order) derived from the
    /// factor values alone.
    pub fn summary_bits(&self) -> [bool; 4] {
        let deps = self.dependency_pairs();
        [
            self.phi_e.iter().any(|&b| b),
            self.phi_s.iter().any(|&b| b),
            !deps.is_empty(),
            deps.iter().any(|&(c, u)| self.phi_o[c][u] == -1),
        ]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FactorSetJson::from(self)).expect("factor set serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<FactorSet, serde_json::Error> {
        let j: FactorSetJson = serde_json::from_value(v.clone())?;
        Ok(j.into())
    }
}

/// Wire form: bits as 0/1 integers, field names as in the exported records.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorSetJson {
    n_units: usize,
    unit_kind: UnitKind,
    #[serde(rename = "phi_E")]
    phi_e: Vec<u8>,
    #[serde(rename = "phi_S")]
    phi_s: Vec<u8>,
    #[serde(rename = "phi_D")]
    phi_d: Vec<Vec<u8>>,
    #[serde(rename = "phi_O")]
    phi_o: Vec<Vec<i8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    dep_kind: Option<Vec<Vec<DepKind>>>,
    witnesses: Vec<Witness>,
    units: Vec<UnitMeta>,
}

impl From<&FactorSet> for FactorSetJson {
    fn from(f: &FactorSet) -> Self {
        let b = |v: &Vec<bool>| v.iter().map(|&x| x as u8).collect::<Vec<u8>>();
        FactorSetJson {
            n_units: f.n_units,
            unit_kind: f.unit_kind,
            phi_e: b(&f.phi_e),
            phi_s: b(&f.phi_s),
            phi_d: f.phi_d.iter().map(b).collect(),
            phi_o: f.phi_o.clone(),
            dep_kind: f.dep_kind.clone(),
            witnesses: f.witnesses.clone(),
            units: f.unit_meta.clone(),
        }
    }
}

impl From<FactorSetJson> for FactorSet {
    fn from(j: FactorSetJson) -> Self {
        let b = |v: Vec<u8>| v.into_iter().map(|x| x != 0).collect::<Vec<bool>>();
        FactorSet {
            n_units: j.n_units,
            unit_kind: j.unit_kind,
            phi_e: b(j.phi_e),
            phi_s: b(j.phi_s),
            phi_d: j.phi_d.into_iter().map(b).collect(),
            phi_o: j.phi_o,
            dep_kind: j.dep_kind,
            witnesses: j.witnesses,
            unit_meta: j.units,
        }
    }
}

/// Statement-level dependency fact shared by the analytic pass and the oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PairFact {
    pub c: usize,
    pub u: usize,
    pub kind: DepKind,
    pub order: i8,
    pub via: String,
}

/// Projects statement facts onto source lines.
pub(crate) fn assemble(p: &ProgramUnit, pairs: &[PairFact]) -> FactorSet {
    let n = p.n_lines();
    let mut fs = FactorSet::empty(n, UnitKind::Line);
    let anchors = &p.source.anchors;
    for (s, info) in p.stmts.iter().enumerate() {
        let li = info.line - 1;
        let du = &p.defuse.stmts[s];
        let meta = &mut fs.unit_meta[li];
        if let Some(k) = info.call {
            fs.phi_e[li] = true;
            meta.call_kind.get_or_insert(k);
        }
        if p.is_state_update(s) {
            fs.phi_s[li] = true;
            meta.compound |= info.compound;
            meta.indexed_write |= du.writes.iter().any(|w| p.defuse.is_state(info.func, w) && w.is_indexed());
        }
        meta.in_branch |= !info.enclosing_ifs.is_empty();
        for r in du.reads_all() {
            if !meta.reads.contains(&r.text) {
                meta.reads.push(r.text);
            }
        }
        for w in &du.writes {
            if !meta.writes.contains(&w.text) {
                meta.writes.push(w.text.clone());
            }
        }
        if let Some(k) = info.line.checked_sub(1).and_then(|l| anchors.get(&l)) {
            meta.tag = Some(format!("{:?}", k).to_uppercase());
        }
    }
    let kinds = fs.dep_kind.as_mut().expect("line factor sets carry kinds");
    let mut best: std::collections::BTreeMap<(usize, usize), (DepKind, i8, String, bool)> = Default::default();
    for pf in pairs {
        let (cl, ul) = (p.stmts[pf.c].line - 1, p.stmts[pf.u].line - 1);
        fs.phi_d[cl][ul] = true;
        kinds[cl][ul] = kinds[cl][ul].merge(pf.kind);
        fs.phi_o[cl][ul] = if fs.phi_o[cl][ul] == -1 || pf.order == -1 { -1 } else { 1 };
        let sens = path_sensitive(p, pf.c, pf.u);
        let e = best.entry((cl, ul)).or_insert((pf.kind, pf.order, pf.via.clone(), sens));
        if pf.kind > e.0 {
            *e = (pf.kind, e.1.min(pf.order), pf.via.clone(), e.3 || sens);
        } else {
            e.1 = e.1.min(pf.order);
            e.3 |= sens;
        }
    }
    fs.witnesses = best
        .into_iter()
        .map(|((c, u), (_, _, via, sens))| Witness {
            c,
            u,
            kind: kinds[c][u],
            order: fs.phi_o[c][u],
            path: via,
            path_sensitive: sens,
        })
        .collect();
    fs
}

/// True when the call and the update do not share every path: they sit under
/// different branch contexts or an early return lies between them.
fn path_sensitive(p: &ProgramUnit, c: usize, u: usize) -> bool {
    let (a, b) = (&p.stmts[c], &p.stmts[u]);
    if a.branch_of != b.branch_of {
        return true;
    }
    let (lo, hi) = if c < u { (c, u) } else { (u, c) };
    (lo + 1..hi).any(|k| p.stmts[k].is_return && p.stmts[k].func == a.func)
}

#[cfg(test)]
mod tests;
