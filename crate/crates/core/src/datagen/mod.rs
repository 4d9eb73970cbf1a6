//! Rule-driven generators of labeled synthetic contracts, one per factor
//! task, plus a structural validator and a corpus writer.
//!
//! Every generator is a pure function of its inputs and seed. Structural
//! choices come from an enumerated list of axis combinations indexed by the
//! seed, so consecutive seeds of the same template never repeat a
//! combination; identifiers are drawn from fixed pools.

pub mod corpus;
pub mod dependency;
pub mod external;
pub mod factorial;
pub mod interfaces;
pub mod ordering;
pub mod validate;

pub use corpus::{gen_corpus, CorpusSpec, Manifest, TaskMarginals};
pub use dependency::{gen_dependency, DepId, DepRule, Direction};
pub use external::{gen_external_call, gen_external_call_absent, CallContext, ParamForm, StageOneCombo, TargetForm};
pub use factorial::gen_factorial;
pub use interfaces::{catalog, FnSig, InterfaceSpec};
pub use ordering::{gen_ordering, CeiLabel, CeiPattern, CeiTruth, CeiType};
pub use validate::{validate, ValidationCode, ValidationReport};

use crate::factors::DepKind;
use crate::minisol::AnchorKind;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const HEADER_LICENSE: &str = "// SPDX-License-Identifier: MIT";
pub const HEADER_PRAGMA: &str = "pragma solidity ^0.8.20;";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    E,
    D,
    O,
    #[serde(rename = "FULL")]
    Full,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::E, Task::D, Task::O, Task::Full];

    pub fn parse(s: &str) -> Option<Task> {
        match s.to_ascii_uppercase().as_str() {
            "E" => Some(Task::E),
            "D" => Some(Task::D),
            "O" => Some(Task::O),
            "FULL" => Some(Task::Full),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::E => "E",
            Task::D => "D",
            Task::O => "O",
            Task::Full => "FULL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepLabel {
    pub rule: DepId,
    pub direction: Direction,
    pub kind: DepKind,
}

/// Ground truth. Lines are 1-based source lines of the labeled statements.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Labels {
    pub call_lines: Vec<usize>,
    pub update_lines: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dependency: Option<DepLabel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cei: Option<CeiTruth>,
    pub vulnerable: bool,
    /// (call line, update line) pairs that satisfy the boolean rule.
    pub witnesses: Vec<(usize, usize)>,
    /// Design bits (E, S, D, O): the latent toggles for the factorial
    /// family, the realized summary bits otherwise.
    pub bits: [bool; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub template_id: String,
    /// Structural axes only; identifier choices are not recorded here.
    pub axes: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub with_cfg_context: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub source: String,
    pub task: Task,
    pub labels: Labels,
    pub provenance: Provenance,
}

impl LabeledSample {
    /// Whether the sample is a positive for its task.
    pub fn positive(&self) -> bool {
        match self.task {
            Task::E => !self.labels.call_lines.is_empty(),
            Task::D => self.labels.dependency.as_ref().is_some_and(|d| d.kind != DepKind::None),
            Task::O => self.labels.cei.as_ref().is_some_and(|c| c.label == CeiLabel::Risk),
            Task::Full => self.labels.vulnerable,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("sample serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<LabeledSample, serde_json::Error> {
        serde_json::from_value(v.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("invalid combination: {0}")]
    InvalidCombination(String),
    #[error("incompatible rule: {0}")]
    IncompatibleRule(String),
}

pub(crate) fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub(crate) const TOKEN_LIKE: &[&str] = &["token", "asset", "base", "lpToken", "collateral", "debt"];
pub(crate) const RECEIVER_LIKE: &[&str] = &["to", "recipient", "vaultAddr", "sink"];
pub(crate) const OPERATOR_LIKE: &[&str] = &["owner", "spender", "operator", "user"];
pub(crate) const AMOUNT_LIKE: &[&str] = &["amount", "value", "shares", "liquidity"];
pub(crate) const MISC: &[&str] = &["idx", "key", "tag", "flag", "nonce", "salt"];

/// Identifiers the ordering task must not use.
pub const AVOIDED_IDENTIFIERS: &[&str] = &[
    "assets",
    "holdings",
    "balances",
    "bal",
    "owner",
    "owners",
    "allowance",
    "allowances",
    "approvals",
    "ok",
    "enabled",
    "token",
];

/// Identifier allocator: draws unused names from pools.
pub(crate) struct Names {
    used: BTreeSet<String>,
    avoid: bool,
    pub rng: ChaCha8Rng,
}

impl Names {
    pub fn new(rng: ChaCha8Rng, avoid: bool) -> Names {
        Names { used: BTreeSet::new(), avoid, rng }
    }

    fn allowed(&self, n: &str) -> bool {
        !self.used.contains(n) && !(self.avoid && AVOIDED_IDENTIFIERS.contains(&n))
    }

    pub fn pick(&mut self, pool: &[&str]) -> String {
        let free: Vec<&str> = pool.iter().copied().filter(|n| self.allowed(n)).collect();
        let name = match free.choose(&mut self.rng) {
            Some(n) => n.to_string(),
            None => {
                let base = pool.iter().copied().find(|n| !(self.avoid && AVOIDED_IDENTIFIERS.contains(n)));
                let base = base.unwrap_or("v");
                (2..).map(|i| format!("{base}{i}")).find(|n| self.allowed(n)).expect("unbounded")
            }
        };
        self.used.insert(name.clone());
        name
    }

    /// Claims a fixed name, suffixing it if taken.
    pub fn claim(&mut self, name: &str) -> String {
        self.pick(&[name])
    }
}

/// Source assembler tracking 1-based line numbers.
pub(crate) struct Src {
    lines: Vec<String>,
}

impl Src {
    pub fn new(import_path: &str) -> Src {
        Src { lines: vec![HEADER_LICENSE.to_string(), HEADER_PRAGMA.to_string(), format!("import \"{import_path}\";")] }
    }

    /// Appends a line and returns its number.
    pub fn push(&mut self, depth: usize, text: impl AsRef<str>) -> usize {
        self.lines.push(format!("{}{}", "    ".repeat(depth), text.as_ref()));
        self.lines.len()
    }

    /// Appends an anchor and its statement; returns the statement line.
    pub fn anchored(&mut self, depth: usize, kind: AnchorKind, stmt: impl AsRef<str>) -> usize {
        self.push(depth, kind.marker());
        self.push(depth, stmt)
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Picks `combos[seed mod len]`.
pub(crate) fn select<T: Clone>(combos: &[T], seed: u64) -> Option<T> {
    if combos.is_empty() {
        None
    } else {
        Some(combos[(seed % combos.len() as u64) as usize].clone())
    }
}

pub(crate) fn axes(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
