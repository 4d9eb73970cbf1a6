//! Compiler-aware JSON records: bytecode call lists and IR data-flow blocks,
//! converted into block-indexed factor sets.

use crate::factors::{DepKind, FactorSet, UnitKind, Witness};
use crate::minisol::CallKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Opcode {
    HighLevelCall,
    Call,
    LowLevelCall,
    Delegatecall,
    Staticcall,
}

impl Opcode {
    pub fn parse(s: &str) -> Option<Opcode> {
        Some(match s {
            "HIGH_LEVEL_CALL" => Opcode::HighLevelCall,
            "CALL" => Opcode::Call,
            "LOW_LEVEL_CALL" => Opcode::LowLevelCall,
            "DELEGATECALL" => Opcode::Delegatecall,
            "STATICCALL" => Opcode::Staticcall,
            _ => return None,
        })
    }

    pub fn call_kind(self) -> CallKind {
        match self {
            Opcode::HighLevelCall => CallKind::HighLevel,
            Opcode::Call | Opcode::LowLevelCall => CallKind::LowLevel,
            Opcode::Delegatecall => CallKind::Delegate,
            Opcode::Staticcall => CallKind::Static,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BlockTag {
    Effect,
    Interaction,
    Check,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpType {
    StateWrite,
    Call,
    Read,
    Guard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BytecodeCallEntry {
    pub opcode: Opcode,
    pub to_source: String,
    pub value: Option<String>,
    pub likely_src_fn: Option<String>,
    pub source_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrOp {
    pub id: String,
    #[serde(rename = "type")]
    pub op_type: OpType,
    pub opcode: Option<Opcode>,
    pub to_source: Option<String>,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    pub source_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrBlock {
    pub block_id: usize,
    pub tag: BlockTag,
    pub block_depends_on: Vec<usize>,
    pub statements: Vec<String>,
    pub operations: Vec<IrOp>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IrRecord {
    pub id: Option<i64>,
    pub sol_name: Option<String>,
    pub sol_path: Option<String>,
    pub bytecode_calls: Vec<BytecodeCallEntry>,
    pub blocks: Vec<IrBlock>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum IrError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown opcode {0:?}")]
    UnknownOpcode(String),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("block_depends_on forms a cycle through blocks {0:?}")]
    CyclicDependsOn(Vec<usize>),
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Unknown opcodes are errors instead of warnings.
    pub strict: bool,
    /// Per-opcode call weight; 0 removes that opcode from φ_E. Unset means 1.
    pub opcode_weights: BTreeMap<Opcode, f64>,
}

impl IngestOptions {
    pub fn weight(&self, op: Opcode) -> f64 {
        self.opcode_weights.get(&op).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub record: IrRecord,
    pub warnings: Vec<String>,
}

// ---- parsing ---------------------------------------------------------------

struct Reader<'a> {
    opts: &'a IngestOptions,
    warnings: Vec<String>,
}

fn obj<'v>(v: &'v Value, at: &str) -> Result<&'v serde_json::Map<String, Value>, IrError> {
    v.as_object().ok_or_else(|| IrError::Invalid(format!("{at}: expected an object")))
}

fn opt_str(m: &serde_json::Map<String, Value>, k: &str, at: &str) -> Result<Option<String>, IrError> {
    match m.get(k) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(IrError::Invalid(format!("{at}.{k}: expected a string"))),
    }
}

fn str_list(m: &serde_json::Map<String, Value>, k: &str, at: &str) -> Result<Vec<String>, IrError> {
    match m.get(k) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                x.as_str().map(str::to_string).ok_or_else(|| IrError::Invalid(format!("{at}.{k}: expected strings")))
            })
            .collect(),
        Some(_) => Err(IrError::Invalid(format!("{at}.{k}: expected an array"))),
    }
}

fn array<'v>(m: &'v serde_json::Map<String, Value>, k: &str, at: &str) -> Result<&'v [Value], IrError> {
    match m.get(k) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(IrError::Invalid(format!("{at}.{k}: expected an array"))),
    }
}

impl Reader<'_> {
    fn unknown_fields(&mut self, m: &serde_json::Map<String, Value>, known: &[&str], at: &str) {
        for k in m.keys() {
            if !known.contains(&k.as_str()) {
                self.warnings.push(format!("{at}: ignoring unknown field {k:?}"));
            }
        }
    }

    fn opcode(&mut self, s: &str, at: &str) -> Result<Option<Opcode>, IrError> {
        match Opcode::parse(s) {
            Some(op) => Ok(Some(op)),
            None if self.opts.strict => Err(IrError::UnknownOpcode(s.to_string())),
            None => {
                self.warnings.push(format!("{at}: skipping unknown opcode {s:?}"));
                Ok(None)
            }
        }
    }

    fn call_entry(&mut self, v: &Value, at: &str) -> Result<Option<BytecodeCallEntry>, IrError> {
        let m = obj(v, at)?;
        self.unknown_fields(m, &["opcode", "to_source", "value", "likely_src_fn", "source_hint"], at);
        let code = opt_str(m, "opcode", at)?.ok_or_else(|| IrError::Invalid(format!("{at}: missing opcode")))?;
        let Some(opcode) = self.opcode(&code, at)? else { return Ok(None) };
        let to_source = opt_str(m, "to_source", at)?.unwrap_or_default();
        if to_source.is_empty() {
            return Err(IrError::Invalid(format!("{at}: empty to_source")));
        }
        Ok(Some(BytecodeCallEntry {
            opcode,
            to_source,
            value: opt_str(m, "value", at)?,
            likely_src_fn: opt_str(m, "likely_src_fn", at)?,
            source_hint: opt_str(m, "source_hint", at)?,
        }))
    }

    fn op(&mut self, v: &Value, at: &str) -> Result<Option<IrOp>, IrError> {
        let m = obj(v, at)?;
        self.unknown_fields(m, &["id", "type", "opcode", "to_source", "reads", "writes", "source_hint"], at);
        let ty = opt_str(m, "type", at)?.unwrap_or_default();
        let op_type = match ty.as_str() {
            "STATE_WRITE" => OpType::StateWrite,
            "CALL" => OpType::Call,
            "READ" => OpType::Read,
            "GUARD" => OpType::Guard,
            other => {
                if self.opts.strict {
                    return Err(IrError::Invalid(format!("{at}: unknown operation type {other:?}")));
                }
                self.warnings.push(format!("{at}: skipping operation of unknown type {other:?}"));
                return Ok(None);
            }
        };
        let opcode = match opt_str(m, "opcode", at)? {
            Some(s) => match self.opcode(&s, at)? {
                Some(op) => Some(op),
                None => return Ok(None),
            },
            None => None,
        };
        let op = IrOp {
            id: opt_str(m, "id", at)?.unwrap_or_default(),
            op_type,
            opcode,
            to_source: opt_str(m, "to_source", at)?,
            reads: str_list(m, "reads", at)?,
            writes: str_list(m, "writes", at)?,
            source_hint: opt_str(m, "source_hint", at)?,
        };
        if op.op_type == OpType::Call && op.opcode.is_none() {
            return Err(IrError::Invalid(format!("{at}: CALL operation without opcode")));
        }
        if op.op_type == OpType::StateWrite && op.writes.is_empty() {
            return Err(IrError::Invalid(format!("{at}: STATE_WRITE operation without writes")));
        }
        Ok(Some(op))
    }

    fn block(&mut self, v: &Value, at: &str) -> Result<IrBlock, IrError> {
        let m = obj(v, at)?;
        self.unknown_fields(m, &["block_id", "tag", "block_depends_on", "statements", "operations"], at);
        let block_id = m
            .get("block_id")
            .and_then(Value::as_u64)
            .ok_or_else(|| IrError::Invalid(format!("{at}: missing block_id")))? as usize;
        let tag = match opt_str(m, "tag", at)?.as_deref() {
            Some("EFFECT") => BlockTag::Effect,
            Some("INTERACTION") => BlockTag::Interaction,
            Some("CHECK") => BlockTag::Check,
            Some("OTHER") | None => BlockTag::Other,
            Some(t) => {
                self.warnings.push(format!("{at}: unknown tag {t:?} read as OTHER"));
                BlockTag::Other
            }
        };
        let deps = array(m, "block_depends_on", at)?
            .iter()
            .map(|d| {
                d.as_u64().map(|x| x as usize).ok_or_else(|| IrError::Invalid(format!("{at}: non-integer dependency")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut operations = Vec::new();
        for (i, o) in array(m, "operations", at)?.iter().enumerate() {
            if let Some(op) = self.op(o, &format!("{at}.operations[{i}]"))? {
                operations.push(op);
            }
        }
        Ok(IrBlock { block_id, tag, block_depends_on: deps, statements: str_list(m, "statements", at)?, operations })
    }

    fn record(&mut self, v: &Value) -> Result<IrRecord, IrError> {
        let m = obj(v, "record")?;
        self.unknown_fields(m, &["id", "sol_name", "sol_path", "bytecode_calls", "blocks", "IR-DFG"], "record");
        let id = match m.get("id") {
            None | Some(Value::Null) => None,
            Some(x) => Some(x.as_i64().ok_or_else(|| IrError::Invalid("record.id: expected an integer".into()))?),
        };
        let mut bytecode_calls = Vec::new();
        for (i, e) in array(m, "bytecode_calls", "record")?.iter().enumerate() {
            if let Some(c) = self.call_entry(e, &format!("bytecode_calls[{i}]"))? {
                bytecode_calls.push(c);
            }
        }
        let raw_blocks = match m.get("IR-DFG") {
            Some(dfg) => {
                let d = obj(dfg, "IR-DFG")?;
                self.unknown_fields(d, &["blocks"], "IR-DFG");
                array(d, "blocks", "IR-DFG")?
            }
            None => array(m, "blocks", "record")?,
        };
        let blocks = raw_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| self.block(b, &format!("blocks[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let ids: BTreeSet<usize> = blocks.iter().map(|b| b.block_id).collect();
        if ids.len() != blocks.len() {
            return Err(IrError::Invalid("duplicate block_id".into()));
        }
        for b in &blocks {
            if let Some(d) = b.block_depends_on.iter().find(|d| !ids.contains(d)) {
                return Err(IrError::Invalid(format!("block {} depends on missing block {d}", b.block_id)));
            }
        }
        Ok(IrRecord {
            id,
            sol_name: opt_str(m, "sol_name", "record")?,
            sol_path: opt_str(m, "sol_path", "record")?,
            bytecode_calls,
            blocks,
        })
    }
}

pub fn parse_ir_value(v: &Value, opts: &IngestOptions) -> Result<Ingested, IrError> {
    let mut r = Reader { opts, warnings: Vec::new() };
    let record = r.record(v)?;
    Ok(Ingested { record, warnings: r.warnings })
}

pub fn parse_ir_record(json_text: &str, opts: &IngestOptions) -> Result<Ingested, IrError> {
    let v: Value = serde_json::from_str(json_text).map_err(|e| IrError::MalformedJson(e.to_string()))?;
    parse_ir_value(&v, opts)
}

/// A single JSON document or a JSONL stream (one record per non-blank line).
pub fn parse_ir_stream(text: &str, opts: &IngestOptions) -> Vec<Result<Ingested, IrError>> {
    if let Ok(v) = serde_json::from_str::<Value>(text) {
        return vec![parse_ir_value(&v, opts)];
    }
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| parse_ir_record(l, opts)).collect()
}

// ---- factors ---------------------------------------------------------------

/// Block positions in dependency order, ties broken by position in the record.
pub fn topological_order(blocks: &[IrBlock]) -> Result<Vec<usize>, IrError> {
    let pos: BTreeMap<usize, usize> = blocks.iter().enumerate().map(|(i, b)| (b.block_id, i)).collect();
    let n = blocks.len();
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, b) in blocks.iter().enumerate() {
        for d in &b.block_depends_on {
            let j = pos[d];
            out[j].push(i);
            indeg[i] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(i);
        for &j in &out[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).filter(|&i| indeg[i] > 0).map(|i| blocks[i].block_id).collect();
        return Err(IrError::CyclicDependsOn(stuck));
    }
    Ok(order)
}

fn linked(blocks: &[IrBlock]) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let n = blocks.len();
    let pos: BTreeMap<usize, usize> = blocks.iter().enumerate().map(|(i, b)| (b.block_id, i)).collect();
    let mut direct = vec![vec![false; n]; n];
    for (i, b) in blocks.iter().enumerate() {
        for d in &b.block_depends_on {
            direct[i][pos[d]] = true;
        }
    }
    // transitive closure of "depends on"
    let mut reach = direct.clone();
    for s in 0..n {
        let mut q: VecDeque<usize> = (0..n).filter(|&t| direct[s][t]).collect();
        while let Some(t) = q.pop_front() {
            for k in 0..n {
                if direct[t][k] && !reach[s][k] {
                    reach[s][k] = true;
                    q.push_back(k);
                }
            }
        }
    }
    (direct, reach)
}

fn block_call(b: &IrBlock, opts: &IngestOptions) -> Option<(usize, Opcode, f64)> {
    b.operations.iter().enumerate().find_map(|(i, o)| match (o.op_type, o.opcode) {
        (OpType::Call, Some(op)) if opts.weight(op) > 0.0 => Some((i, op, opts.weight(op))),
        _ => None,
    })
}

fn block_write(b: &IrBlock) -> Option<usize> {
    b.operations.iter().position(|o| o.op_type == OpType::StateWrite)
}

fn call_paths(b: &IrBlock) -> BTreeSet<&str> {
    b.operations
        .iter()
        .filter(|o| o.op_type == OpType::Call)
        .flat_map(|o| o.reads.iter().map(String::as_str).chain(o.to_source.as_deref()))
        .collect()
}

fn update_paths(b: &IrBlock) -> BTreeSet<&str> {
    b.operations
        .iter()
        .filter(|o| o.op_type == OpType::StateWrite)
        .flat_map(|o| o.reads.iter().chain(o.writes.iter()).map(String::as_str))
        .collect()
}

/// Block-indexed factors. With blocks present, units are blocks in record
/// order; otherwise each bytecode call entry is a unit carrying φ_E only.
pub fn record_to_factors(record: &IrRecord, opts: &IngestOptions) -> Result<FactorSet, IrError> {
    if record.blocks.is_empty() {
        let n = record.bytecode_calls.len();
        let mut fs = FactorSet::empty(n, UnitKind::Block);
        for (i, e) in record.bytecode_calls.iter().enumerate() {
            let w = opts.weight(e.opcode);
            let m = &mut fs.unit_meta[i];
            m.call_kind = Some(e.opcode.call_kind());
            m.call_weight = w;
            m.reads = std::iter::once(e.to_source.clone()).chain(e.value.clone()).collect();
            fs.phi_e[i] = w > 0.0;
        }
        return Ok(fs);
    }
    let blocks = &record.blocks;
    let n = blocks.len();
    let order = topological_order(blocks)?;
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let (direct, reach) = linked(blocks);
    let mut fs = FactorSet::empty(n, UnitKind::Block);
    for (i, b) in blocks.iter().enumerate() {
        let call = block_call(b, opts);
        fs.phi_e[i] = call.is_some()
            || (b.tag == BlockTag::Interaction && b.operations.iter().all(|o| o.op_type != OpType::Call));
        fs.phi_s[i] = block_write(b).is_some() || b.tag == BlockTag::Effect;
        let m = &mut fs.unit_meta[i];
        m.label = b.block_id;
        m.tag = Some(format!("{:?}", b.tag).to_uppercase());
        if let Some((_, op, w)) = call {
            m.call_kind = Some(op.call_kind());
            m.call_weight = w;
        }
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        for o in &b.operations {
            reads.extend(o.reads.iter().cloned());
            writes.extend(o.writes.iter().cloned());
            m.indexed_write |= o.op_type == OpType::StateWrite && o.writes.iter().any(|w| w.contains('['));
            m.compound |= o.op_type == OpType::StateWrite && o.writes.iter().any(|w| o.reads.contains(w));
        }
        m.reads = reads.into_iter().collect();
        m.writes = writes.into_iter().collect();
    }
    let kinds = fs.dep_kind.as_mut().expect("empty factor set records kinds");
    for c in 0..n {
        for u in 0..n {
            if !(fs.phi_e[c] && fs.phi_s[u]) {
                continue;
            }
            let shared = call_paths(&blocks[c]).intersection(&update_paths(&blocks[u])).next().map(|s| s.to_string());
            let (kind, via) = if c == u {
                match shared {
                    Some(v) => (DepKind::Direct, format!("same block via {v}")),
                    None => (DepKind::None, String::new()),
                }
            } else if direct[c][u] || direct[u][c] {
                (DepKind::Direct, "block_depends_on".to_string())
            } else if let Some(v) = shared {
                (DepKind::Direct, format!("shared path {v}"))
            } else if reach[c][u] || reach[u][c] {
                (DepKind::Indirect, "block_depends_on (transitive)".to_string())
            } else {
                (DepKind::None, String::new())
            };
            if kind == DepKind::None {
                continue;
            }
            let call_first = if c == u {
                match (block_call(&blocks[c], opts), block_write(&blocks[c])) {
                    (Some((ci, _, _)), Some(wi)) => ci < wi,
                    _ => true,
                }
            } else {
                rank[c] < rank[u]
            };
            let order = if call_first { -1 } else { 1 };
            fs.phi_d[c][u] = true;
            fs.phi_o[c][u] = order;
            kinds[c][u] = kind;
            fs.witnesses.push(Witness { c, u, kind, order, path: via, path_sensitive: false });
        }
    }
    Ok(fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::boolean_rule;

    const A3: &str = r#"{
      "sol_name": "23_1_13_OK1199.sol",
      "IR-DFG": {"blocks": [
        {"block_id": 0, "tag": "EFFECT", "block_depends_on": [],
         "statements": ["for (uint256 i = 0; i < ids.length; i++) {", "  mainLedger[from][i] -= values[i];"],
         "operations": [{"id": "0_1", "type": "STATE_WRITE", "source_hint": "mainLedger[from][i] -= values[i];",
                         "reads": ["mainLedger[from][i]", "values[i]"], "writes": ["mainLedger[from][i]"]}]},
        {"block_id": 1, "tag": "INTERACTION", "block_depends_on": [0],
         "statements": ["t.safeBatchTransferFrom(from, to, ids, values, data);"],
         "operations": [{"id": "1_0", "type": "CALL", "opcode": "HIGH_LEVEL_CALL", "to_source": "t"}]}
      ]}
    }"#;

    fn lenient(s: &str) -> Ingested {
        parse_ir_record(s, &IngestOptions::default()).unwrap()
    }

    #[test]
    fn empty_record() {
        let r = lenient(r#"{"id": 1, "bytecode_calls": [], "blocks": []}"#);
        assert_eq!(r.record.id, Some(1));
        assert!(r.warnings.is_empty());
        let fs = record_to_factors(&r.record, &IngestOptions::default()).unwrap();
        assert_eq!(fs.n_units, 0);
        assert!(!boolean_rule(&fs).vulnerable);
    }

    #[test]
    fn effect_then_interaction_is_safe() {
        let r = lenient(A3);
        assert_eq!(r.record.blocks.len(), 2);
        assert_eq!(r.record.blocks[1].block_depends_on, vec![0]);
        let fs = record_to_factors(&r.record, &IngestOptions::default()).unwrap();
        assert_eq!(fs.phi_s, vec![true, false]);
        assert_eq!(fs.phi_e, vec![false, true]);
        assert!(fs.phi_d[1][0]);
        assert_eq!(fs.phi_o[1][0], 1);
        assert!(!boolean_rule(&fs).vulnerable);
        fs.check().unwrap();
    }

    #[test]
    fn reversed_blocks_are_vulnerable() {
        let text = r#"{"blocks": [
          {"block_id": 0, "tag": "INTERACTION", "block_depends_on": [],
           "operations": [{"id": "a", "type": "CALL", "opcode": "CALL", "to_source": "recipient"}]},
          {"block_id": 1, "tag": "EFFECT", "block_depends_on": [0],
           "operations": [{"id": "b", "type": "STATE_WRITE", "reads": [], "writes": ["balances[msg.sender]"]}]}
        ]}"#;
        let fs = record_to_factors(&lenient(text).record, &IngestOptions::default()).unwrap();
        assert_eq!(fs.phi_o[0][1], -1);
        assert_eq!(boolean_rule(&fs).witnesses, vec![(0, 1)]);
    }

    #[test]
    fn shared_path_without_depends_on() {
        let text = r#"{"blocks": [
          {"block_id": 0, "tag": "INTERACTION", "block_depends_on": [],
           "operations": [{"id": "a", "type": "CALL", "opcode": "CALL", "to_source": "to", "reads": ["amount"]}]},
          {"block_id": 1, "tag": "EFFECT", "block_depends_on": [],
           "operations": [{"id": "b", "type": "STATE_WRITE", "reads": ["amount"], "writes": ["credit[to]"]}]},
          {"block_id": 2, "tag": "EFFECT", "block_depends_on": [],
           "operations": [{"id": "c", "type": "STATE_WRITE", "reads": [], "writes": ["nonce"]}]}
        ]}"#;
        let fs = record_to_factors(&lenient(text).record, &IngestOptions::default()).unwrap();
        assert!(fs.phi_d[0][1]);
        assert!(!fs.phi_d[0][2]);
        assert_eq!(fs.phi_o[0][2], 0);
    }

    #[test]
    fn cycles_are_rejected() {
        let text = r#"{"blocks": [
          {"block_id": 0, "tag": "EFFECT", "block_depends_on": [1], "operations": []},
          {"block_id": 1, "tag": "INTERACTION", "block_depends_on": [0], "operations": []}
        ]}"#;
        let r = lenient(text);
        let err = record_to_factors(&r.record, &IngestOptions::default()).unwrap_err();
        assert_eq!(err, IrError::CyclicDependsOn(vec![0, 1]));
    }

    #[test]
    fn topological_order_respects_dependencies() {
        let text = r#"{"blocks": [
          {"block_id": 5, "tag": "OTHER", "block_depends_on": [9], "operations": []},
          {"block_id": 7, "tag": "OTHER", "block_depends_on": [], "operations": []},
          {"block_id": 9, "tag": "OTHER", "block_depends_on": [7], "operations": []}
        ]}"#;
        let r = lenient(text);
        assert_eq!(topological_order(&r.record.blocks).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn unknown_opcode_modes() {
        let text = r#"{"bytecode_calls": [{"opcode": "CALLCODE", "to_source": "x"}, {"opcode": "CALL", "to_source": "y"}], "extra": 1}"#;
        let r = lenient(text);
        assert_eq!(r.record.bytecode_calls.len(), 1);
        assert_eq!(r.warnings.len(), 2);
        let strict = IngestOptions { strict: true, ..Default::default() };
        assert_eq!(parse_ir_record(text, &strict), Err(IrError::UnknownOpcode("CALLCODE".into())));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_ir_record("{", &IngestOptions::default()), Err(IrError::MalformedJson(_))));
    }

    #[test]
    fn missing_dependency_target() {
        let text = r#"{"blocks": [{"block_id": 0, "tag": "EFFECT", "block_depends_on": [3], "operations": []}]}"#;
        assert!(matches!(parse_ir_record(text, &IngestOptions::default()), Err(IrError::Invalid(_))));
    }

    #[test]
    fn bytecode_only_weights() {
        let text = r#"{"bytecode_calls": [
          {"opcode": "HIGH_LEVEL_CALL", "to_source": "TMP_1(I)"}, {"opcode": "CALL", "to_source": "r", "value": "v"}]}"#;
        let r = lenient(text);
        let fs = record_to_factors(&r.record, &IngestOptions::default()).unwrap();
        assert_eq!(fs.phi_e, vec![true, true]);
        assert!(fs.phi_s.iter().all(|&s| !s));
        let mut opts = IngestOptions::default();
        opts.opcode_weights.insert(Opcode::HighLevelCall, 0.0);
        let fs = record_to_factors(&r.record, &opts).unwrap();
        assert_eq!(fs.phi_e, vec![false, true]);
    }

    #[test]
    fn jsonl_stream() {
        let text = "{\"id\": 1}\n\n{\"id\": 2, \"bytecode_calls\": []}\n";
        let rs = parse_ir_stream(text, &IngestOptions::default());
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1].as_ref().unwrap().record.id, Some(2));
    }
}
