//! Structured patches over the grouped state record.
//!
//! Atoms are grouped into CCL containers (`/PLAN/day_trip`, `/PREF/-`) and
//! diffed as a JSON document: replaced leaves, then additions, then
//! removals. Flag sets append with `-`; scalar list values are replaced
//! whole.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::atom::{conflicts, equivalent, Atom, Decimal};
use crate::ccl::{ccl_to_atoms, group_atoms, lexes_as_token, CclDocument, CclValue, DecodeError};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Replace,
    Remove,
}

impl OpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Replace => "replace",
            OpKind::Remove => "remove",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchOp {
    pub op: OpKind,
    pub path: String,
    pub value: Option<CclValue>,
}

impl PatchOp {
    fn add(path: String, value: CclValue) -> Self {
        PatchOp { op: OpKind::Add, path, value: Some(value) }
    }

    fn replace(path: String, value: CclValue) -> Self {
        PatchOp { op: OpKind::Replace, path, value: Some(value) }
    }

    fn remove(path: String) -> Self {
        PatchOp { op: OpKind::Remove, path, value: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatePatch {
    pub ops: Vec<PatchOp>,
}

impl StatePatch {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PatchError {
    #[error("path `{0}` does not resolve")]
    Unresolved(String),
    #[error("malformed patch: {0}")]
    Malformed(String),
    #[error("patched state does not decode: {0}")]
    Invalid(DecodeError),
}

fn escape(seg: &str) -> String {
    seg.replace('~', "~0").replace('/', "~1")
}

fn unescape(seg: &str) -> String {
    seg.replace("~1", "/").replace("~0", "~")
}

fn path(parts: &[&str]) -> String {
    parts.iter().map(|p| format!("/{}", escape(p))).collect()
}

/// Map members as pairs; flag sets read as members set to `true`.
fn members(value: &CclValue) -> Option<Vec<(String, CclValue)>> {
    match value {
        CclValue::Map(pairs) => Some(pairs.clone()),
        CclValue::Flags(flags) => Some(flags.iter().map(|f| (f.clone(), CclValue::Bool(true))).collect()),
        _ => None,
    }
}

/// Minimal patch turning the grouped form of `before` into that of `after`.
pub fn diff_states(before: &[Atom], after: &[Atom], lex: &Lexicon) -> StatePatch {
    diff_documents(&group_atoms(before, lex), &group_atoms(after, lex))
}

pub fn diff_documents(before: &CclDocument, after: &CclDocument) -> StatePatch {
    let (mut replaces, mut adds, mut removes) = (Vec::new(), Vec::new(), Vec::new());
    let mut keys: Vec<&str> = after.entries.iter().map(|e| e.key.as_str()).collect();
    keys.extend(before.entries.iter().map(|e| e.key.as_str()).filter(|k| after.get(k).is_none()));
    for key in keys {
        match (before.get(key), after.get(key)) {
            (None, Some(new)) => adds.push(PatchOp::add(path(&[key]), new.clone())),
            (Some(_), None) => removes.push(PatchOp::remove(path(&[key]))),
            (Some(old), Some(new)) if old == new => {}
            (Some(CclValue::Flags(old)), Some(CclValue::Flags(new))) => {
                for f in new.iter().filter(|f| !old.contains(f)) {
                    adds.push(PatchOp::add(path(&[key, "-"]), CclValue::Token(f.clone())));
                }
                let mut gone: Vec<usize> = (0..old.len()).filter(|&i| !new.contains(&old[i])).collect();
                gone.reverse();
                for i in gone {
                    removes.push(PatchOp::remove(path(&[key, &i.to_string()])));
                }
            }
            (Some(old @ CclValue::Map(_)), Some(new @ CclValue::Map(_))) => {
                let (old, new) = (members(old).unwrap_or_default(), members(new).unwrap_or_default());
                for (k, v) in &new {
                    match old.iter().find(|(ok, _)| ok == k) {
                        Some((_, ov)) if ov == v => {}
                        Some(_) => replaces.push(PatchOp::replace(path(&[key, k]), v.clone())),
                        None => adds.push(PatchOp::add(path(&[key, k]), v.clone())),
                    }
                }
                for (k, _) in old.iter().filter(|(k, _)| !new.iter().any(|(nk, _)| nk == k)) {
                    removes.push(PatchOp::remove(path(&[key, k])));
                }
            }
            (Some(_), Some(new)) => replaces.push(PatchOp::replace(path(&[key]), new.clone())),
            (None, None) => {}
        }
    }
    replaces.extend(adds);
    replaces.extend(removes);
    StatePatch { ops: replaces }
}

fn split_path(p: &str) -> Result<Vec<String>, PatchError> {
    let rest = p.strip_prefix('/').ok_or_else(|| PatchError::Malformed(format!("path `{}` must start with /", p)))?;
    let parts: Vec<String> = rest.split('/').map(unescape).collect();
    if parts.is_empty() || parts.len() > 2 || parts.iter().any(String::is_empty) {
        return Err(PatchError::Unresolved(p.to_string()));
    }
    Ok(parts)
}

pub fn apply_to_document(doc: &CclDocument, patch: &StatePatch) -> Result<CclDocument, PatchError> {
    let mut doc = doc.clone();
    for op in &patch.ops {
        let parts = split_path(&op.path)?;
        let unresolved = || PatchError::Unresolved(op.path.clone());
        let value = || op.value.clone().ok_or_else(|| PatchError::Malformed(format!("`{}` needs a value", op.path)));
        match (op.op, parts.as_slice()) {
            (OpKind::Add, [key]) => {
                if let Some(slot) = doc.get_mut(key) {
                    *slot = value()?;
                } else {
                    doc.push(key.clone(), value()?);
                }
            }
            (OpKind::Replace, [key]) => *doc.get_mut(key).ok_or_else(unresolved)? = value()?,
            (OpKind::Remove, [key]) => {
                doc.remove(key).ok_or_else(unresolved)?;
            }
            (op_kind, [key, member]) => {
                let slot = doc.get_mut(key).ok_or_else(unresolved)?;
                apply_member(slot, op_kind, member, op.value.clone()).ok_or_else(unresolved)?;
            }
            _ => return Err(unresolved()),
        }
    }
    Ok(doc)
}

fn apply_member(slot: &mut CclValue, op: OpKind, member: &str, value: Option<CclValue>) -> Option<()> {
    match (op, &mut *slot) {
        (OpKind::Add, CclValue::Flags(flags)) if member == "-" => {
            let CclValue::Token(f) = value? else { return None };
            if !flags.contains(&f) {
                flags.push(f);
            }
        }
        (OpKind::Add, CclValue::List(items)) if member == "-" => items.push(value?),
        (OpKind::Remove, CclValue::Flags(flags)) => {
            let i: usize = member.parse().ok()?;
            (i < flags.len()).then(|| flags.remove(i))?;
        }
        (OpKind::Remove, CclValue::List(items)) => {
            let i: usize = member.parse().ok()?;
            (i < items.len()).then(|| items.remove(i))?;
        }
        (OpKind::Add, CclValue::Flags(flags)) if value == Some(CclValue::Bool(true)) => {
            if !flags.iter().any(|f| f == member) {
                flags.push(member.to_string());
            }
        }
        (OpKind::Add, CclValue::Flags(_)) => {
            let mut pairs = members(slot)?;
            pairs.push((member.to_string(), value?));
            *slot = CclValue::Map(pairs);
        }
        (OpKind::Add, CclValue::Map(pairs)) => match pairs.iter_mut().find(|(k, _)| k == member) {
            Some((_, v)) => *v = value?,
            None => pairs.push((member.to_string(), value?)),
        },
        (OpKind::Replace, CclValue::Map(pairs)) => {
            let (_, v) = pairs.iter_mut().find(|(k, _)| k == member)?;
            *v = value?;
        }
        (OpKind::Remove, CclValue::Map(pairs)) => {
            let i = pairs.iter().position(|(k, _)| k == member)?;
            pairs.remove(i);
        }
        _ => return None,
    }
    Some(())
}

/// The patched state and any conflicting atom pairs it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub atoms: Vec<Atom>,
    pub conflicts: Vec<(usize, usize)>,
}

/// Applies a patch to a state. Atoms that survive unchanged keep their
/// evidence and scores; new or changed ones carry lexicon defaults.
pub fn apply_patch(state: &[Atom], patch: &StatePatch, lex: &Lexicon) -> Result<Applied, PatchError> {
    let doc = apply_to_document(&group_atoms(state, lex), patch)?;
    let decoded = ccl_to_atoms(&doc, lex).map_err(PatchError::Invalid)?;
    let atoms: Vec<Atom> = decoded
        .into_iter()
        .map(|a| state.iter().find(|s| equivalent(s, &a)).cloned().unwrap_or(a))
        .collect();
    let mut found = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            if conflicts(&atoms[i], &atoms[j]) {
                found.push((i, j));
            }
        }
    }
    Ok(Applied { atoms, conflicts: found })
}

fn json_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// JSON form of a container value (flag sets become string arrays).
pub fn value_json(value: &CclValue, out: &mut String) {
    match value {
        CclValue::Token(t) | CclValue::Str(t) => json_string(t, out),
        CclValue::Number(n) => match Decimal::parse(n) {
            Some(d) => out.push_str(&json_number(&d)),
            None => json_string(n, out),
        },
        CclValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        CclValue::List(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                value_json(v, out);
            }
            out.push(']');
        }
        CclValue::Flags(flags) => {
            out.push('[');
            for (i, f) in flags.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                json_string(f, out);
            }
            out.push(']');
        }
        CclValue::Map(pairs) => {
            out.push('{');
            for (i, (k, v)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                json_string(k, out);
                out.push(':');
                value_json(v, out);
            }
            out.push('}');
        }
        CclValue::Arrow(from, to) => {
            out.push_str("{\"$from\":");
            value_json(from, out);
            out.push_str(",\"$to\":");
            json_string(to, out);
            out.push('}');
        }
    }
}

fn json_number(d: &Decimal) -> String {
    let s = d.to_compact_string();
    if let Some(rest) = s.strip_prefix("-.") {
        format!("-0.{}", rest)
    } else if s.starts_with('.') {
        format!("0{}", s)
    } else {
        s
    }
}

/// `[{"op":...,"path":...,"value":...}, ...]`, one op per line.
pub fn patch_to_json(patch: &StatePatch) -> String {
    if patch.ops.is_empty() {
        return "[]\n".to_string();
    }
    let mut out = String::from("[\n");
    for (i, op) in patch.ops.iter().enumerate() {
        out.push_str("  {\"op\":");
        json_string(op.op.as_str(), &mut out);
        out.push_str(",\"path\":");
        json_string(&op.path, &mut out);
        if let Some(v) = &op.value {
            out.push_str(",\"value\":");
            value_json(v, &mut out);
        }
        out.push('}');
        if i + 1 < patch.ops.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

fn from_json_value(v: &serde_json::Value) -> Result<CclValue, PatchError> {
    Ok(match v {
        serde_json::Value::Bool(b) => CclValue::Bool(*b),
        serde_json::Value::Number(n) => CclValue::Number(n.to_string()),
        serde_json::Value::String(s) if lexes_as_token(s) => CclValue::Token(s.clone()),
        serde_json::Value::String(s) => CclValue::Str(s.clone()),
        serde_json::Value::Array(items) => CclValue::List(items.iter().map(from_json_value).collect::<Result<_, _>>()?),
        serde_json::Value::Object(map) => {
            CclValue::Map(map.iter().map(|(k, v)| Ok((k.clone(), from_json_value(v)?))).collect::<Result<_, PatchError>>()?)
        }
        serde_json::Value::Null => return Err(PatchError::Malformed("null values are not state values".to_string())),
    })
}

pub fn patch_from_json(text: &str) -> Result<StatePatch, PatchError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| PatchError::Malformed(e.to_string()))?;
    let items = raw.as_array().ok_or_else(|| PatchError::Malformed("patch must be an array".to_string()))?;
    let mut ops = Vec::new();
    for item in items {
        let field = |name: &str| item.get(name).and_then(|v| v.as_str());
        let op = match field("op") {
            Some("add") => OpKind::Add,
            Some("replace") => OpKind::Replace,
            Some("remove") => OpKind::Remove,
            other => return Err(PatchError::Malformed(format!("unsupported op {:?}", other))),
        };
        let path = field("path").ok_or_else(|| PatchError::Malformed("op without path".to_string()))?.to_string();
        let value = match item.get("value") {
            Some(v) => Some(from_json_value(v)?),
            None => None,
        };
        if op != OpKind::Remove && value.is_none() {
            return Err(PatchError::Malformed(format!("{} at `{}` needs a value", op.as_str(), path)));
        }
        ops.push(PatchOp { op, path, value });
    }
    Ok(StatePatch { ops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccl::parse_ccl;
    use crate::lexicon::builtin;

    const BEFORE: &str = "@CCL/1\nDEST=Lisbon\nDAYS=4\nPREF={walkable,local_food,bookstores,viewpoints}\nPLAN={day_trip:Sintra}\nC={rental_car:false,nightlife_heavy:false}\nOUT={day_by_day,transit_notes,cost_ranges}\n";
    const AFTER: &str = "@CCL/1\nDEST=Lisbon\nDAYS=4\nPREF={walkable,local_food,bookstores,viewpoints,fado}\nPLAN={day_trip:Cascais}\nC={rental_car:false,nightlife_heavy:false,far_out_lodging:false}\nOUT={day_by_day,transit_notes,rainy_alt,cost_ranges}\n";

    fn state(text: &str) -> Vec<Atom> {
        ccl_to_atoms(&parse_ccl(text).unwrap(), &builtin::lexicon("trip_state").unwrap()).unwrap()
    }

    #[test]
    fn worked_example() {
        let lex = builtin::lexicon("trip_state").unwrap();
        let patch = diff_states(&state(BEFORE), &state(AFTER), &lex);
        assert_eq!(
            patch_to_json(&patch),
            "[\n  {\"op\":\"replace\",\"path\":\"/PLAN/day_trip\",\"value\":\"Cascais\"},\n  {\"op\":\"add\",\"path\":\"/PREF/-\",\"value\":\"fado\"},\n  {\"op\":\"add\",\"path\":\"/C/far_out_lodging\",\"value\":false},\n  {\"op\":\"add\",\"path\":\"/OUT/-\",\"value\":\"rainy_alt\"}\n]\n"
        );
        let applied = apply_patch(&state(BEFORE), &patch, &lex).unwrap();
        let after = state(AFTER);
        assert_eq!(applied.atoms.len(), after.len());
        assert!(after.iter().all(|a| applied.atoms.iter().any(|b| equivalent(a, b))));
        assert!(applied.conflicts.is_empty());
        assert_eq!(patch_from_json(&patch_to_json(&patch)).unwrap(), patch);
    }

    #[test]
    fn empty_and_whole_container() {
        let lex = builtin::lexicon("trip_state").unwrap();
        assert!(diff_states(&state(BEFORE), &state(BEFORE), &lex).is_empty());
        let without_c: Vec<Atom> = state(BEFORE).into_iter().filter(|a| a.predicate != "allowed").collect();
        let patch = diff_states(&state(BEFORE), &without_c, &lex);
        assert_eq!(patch.ops, [PatchOp::remove("/C".into())]);
    }

    #[test]
    fn missing_path_is_an_error() {
        let lex = builtin::lexicon("trip_state").unwrap();
        let patch = StatePatch { ops: alloc::vec![PatchOp::replace("/PLAN/nowhere".into(), CclValue::Bool(true))] };
        assert_eq!(apply_patch(&state(BEFORE), &patch, &lex), Err(PatchError::Unresolved("/PLAN/nowhere".into())));
        assert_eq!(apply_patch(&state(BEFORE), &StatePatch::default(), &lex).unwrap().atoms, state(BEFORE));
    }
}
