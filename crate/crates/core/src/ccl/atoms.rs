//! Conversion between CCL documents and canonical atoms, driven by the
//! lexicon's field mappings.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::emit::emit_value;
use super::min::{abbreviate, expand};
use super::parse::parse_value;
use super::{is_bare_token, CclDocument, CclValue, Profile};
use crate::atom::{is_canonical_token, Atom, AtomId, AtomType, Date, Decimal, Evidence, Modality, Value};
use crate::lexicon::{FieldKind, FieldMapping, Lexicon, FALLBACK_KEY};
use crate::scoring::RenderDecision;

pub fn value_to_ccl(value: &Value) -> CclValue {
    match value {
        Value::Bool(b) => CclValue::Bool(*b),
        Value::Int(i) => CclValue::Number(i.to_string()),
        Value::Decimal(d) => CclValue::Number(d.to_compact_string()),
        Value::Date(d) => CclValue::Token(d.to_string()),
        Value::Enum(t) if is_bare_token(t) => CclValue::Token(t.clone()),
        Value::Enum(t) | Value::Str(t) => CclValue::Str(t.clone()),
        Value::List(items) => CclValue::List(items.iter().map(value_to_ccl).collect()),
        Value::Map(pairs) => {
            if let Some((from, Value::Enum(to))) = value.as_arrow() {
                let src = value_to_ccl(from);
                if is_bare_token(to) && matches!(src, CclValue::Token(_) | CclValue::List(_)) {
                    return CclValue::Arrow(alloc::boxed::Box::new(src), to.clone());
                }
            }
            CclValue::Map(pairs.iter().map(|(k, v)| (k.clone(), value_to_ccl(v))).collect())
        }
    }
}

fn token_value(t: &str) -> Value {
    match Date::parse_iso(t) {
        Some(d) => Value::Date(d),
        None => Value::Enum(t.to_string()),
    }
}

pub fn ccl_to_value(value: &CclValue) -> Value {
    match value {
        CclValue::Token(t) => token_value(t),
        CclValue::Str(s) => Value::Str(s.clone()),
        CclValue::Number(n) => match (n.contains('.'), n.parse::<i64>()) {
            (false, Ok(i)) => Value::Int(i),
            _ => Value::Decimal(Decimal::parse(n).unwrap_or(Decimal::from_int(0))),
        },
        CclValue::Bool(b) => Value::Bool(*b),
        CclValue::List(items) => Value::List(items.iter().map(ccl_to_value).collect()),
        CclValue::Map(pairs) => Value::Map(pairs.iter().map(|(k, v)| (k.clone(), ccl_to_value(v))).collect()),
        CclValue::Flags(flags) => Value::Map(flags.iter().map(|f| (f.clone(), Value::Bool(true))).collect()),
        CclValue::Arrow(src, dst) => Value::arrow(ccl_to_value(src), token_value(dst)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeIssue {
    UnknownKey { key: String },
    UnknownMember { key: String, member: String },
    BadShape { key: String },
    Unmappable { key: String, item: String },
    BadFallbackMember { member: String },
    DuplicateKey { key: String },
}

impl fmt::Display for DecodeIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeIssue::UnknownKey { key } => write!(f, "unknown field key `{}`", key),
            DecodeIssue::UnknownMember { key, member } => write!(f, "unknown member `{}` in `{}`", member, key),
            DecodeIssue::BadShape { key } => write!(f, "value of `{}` has the wrong shape for its field", key),
            DecodeIssue::Unmappable { key, item } => write!(f, "min item `{}` in `{}` matches no abbreviation", item, key),
            DecodeIssue::BadFallbackMember { member } => write!(f, "fallback member `{}` is not type.subject.predicate.scope", member),
            DecodeIssue::DuplicateKey { key } => write!(f, "field `{}` appears in both profiles", key),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeError {
    pub issues: Vec<DecodeIssue>,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CCL decode failed: ")?;
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", issue)?;
        }
        Ok(())
    }
}

impl core::error::Error for DecodeError {}

fn field_scope<'a>(field: &'a FieldMapping, lex: &'a Lexicon) -> &'a str {
    field.scope.as_deref().unwrap_or_else(|| lex.default_scope())
}

/// Subject named by an open-field member key.
fn member_subject(key: &str, lex: &Lexicon) -> String {
    let surface = crate::normalize::normalize_surface(key);
    match crate::normalize::canonicalize_subject(&surface, lex) {
        Some(s) => s,
        None if is_canonical_token(key) => key.to_string(),
        None => crate::atom::tokenize_identifier(key),
    }
}

fn decoded_atom(
    lex: &Lexicon,
    atom_type: AtomType,
    subject: &str,
    predicate: &str,
    value: Value,
    scope: &str,
    modality: Option<Modality>,
) -> Atom {
    let entry = lex.subject(subject);
    let modality = modality.unwrap_or(if predicate == "rejected" { Modality::Rejected } else { Modality::Must });
    let safety = atom_type == AtomType::SafetyBoundary || entry.is_some_and(|e| e.safety);
    let criticality = entry
        .and_then(|e| e.criticality)
        .unwrap_or_else(|| crate::normalize::default_criticality(atom_type, &value, safety));
    Atom {
        atom_type,
        subject: subject.to_string(),
        predicate: predicate.to_string(),
        value,
        modality,
        scope: scope.to_string(),
        evidence: None,
        confidence: 1.0,
        criticality,
        safety,
    }
}

fn fallback_member_key(id: &AtomId) -> String {
    format!("{}.{}.{}.{}", id.atom_type, id.subject, id.predicate, id.scope)
}

fn decode_fallback(member: &str, value: &CclValue, lex: &Lexicon) -> Result<Atom, DecodeIssue> {
    let base = member.split('#').next().unwrap_or(member);
    let parts: Vec<&str> = base.split('.').collect();
    let bad = || DecodeIssue::BadFallbackMember { member: member.to_string() };
    if parts.len() != 4 || !parts[1..].iter().all(|p| is_canonical_token(p)) {
        return Err(bad());
    }
    let atom_type: AtomType = parts[0].parse().map_err(|_| bad())?;
    Ok(decoded_atom(lex, atom_type, parts[1], parts[2], ccl_to_value(value), parts[3], None))
}

fn members_of(field: &FieldMapping, value: &CclValue) -> Option<Vec<(String, Value)>> {
    match (field.kind, value) {
        (_, CclValue::Map(pairs)) => Some(pairs.iter().map(|(k, v)| (k.clone(), ccl_to_value(v))).collect()),
        (_, CclValue::Flags(flags)) => Some(flags.iter().map(|f| (f.clone(), Value::Bool(true))).collect()),
        (FieldKind::Flags, CclValue::List(items)) => items
            .iter()
            .map(|i| match i {
                CclValue::Token(t) => Some((t.clone(), Value::Bool(true))),
                _ => None,
            })
            .collect(),
        (FieldKind::Flags, CclValue::Token(t)) => Some(alloc::vec![(t.clone(), Value::Bool(true))]),
        _ => None,
    }
}

fn decode_entry(key: &str, value: &CclValue, lex: &Lexicon, atoms: &mut Vec<Atom>, issues: &mut Vec<DecodeIssue>) {
    if key == FALLBACK_KEY {
        match value {
            CclValue::Map(pairs) => {
                for (member, v) in pairs {
                    match decode_fallback(member, v, lex) {
                        Ok(a) => atoms.push(a),
                        Err(e) => issues.push(e),
                    }
                }
            }
            _ => issues.push(DecodeIssue::BadShape { key: key.to_string() }),
        }
        return;
    }
    let Some(field) = lex.field(key) else {
        issues.push(DecodeIssue::UnknownKey { key: key.to_string() });
        return;
    };
    let scope = field_scope(field, lex);
    if field.kind == FieldKind::Scalar {
        let subject = field.subject.as_deref().unwrap_or_default();
        atoms.push(decoded_atom(lex, field.atom_type, subject, &field.predicate, ccl_to_value(value), scope, field.modality));
        return;
    }
    let Some(members) = members_of(field, value) else {
        issues.push(DecodeIssue::BadShape { key: key.to_string() });
        return;
    };
    for (member, v) in members {
        if let Some(m) = field.members.iter().find(|m| m.key == member) {
            atoms.push(decoded_atom(
                lex,
                m.atom_type.unwrap_or(field.atom_type),
                &m.subject,
                m.predicate.as_deref().unwrap_or(&field.predicate),
                v,
                scope,
                m.modality.or(field.modality),
            ));
        } else if field.open {
            let subject = member_subject(&member, lex);
            atoms.push(decoded_atom(lex, field.atom_type, &subject, &field.predicate, v, scope, field.modality));
        } else {
            issues.push(DecodeIssue::UnknownMember { key: key.to_string(), member });
        }
    }
}

/// Rewrites a min-profile document into its core form.
pub fn expand_min(doc: &CclDocument, lex: &Lexicon) -> Result<CclDocument, DecodeError> {
    let mut out = CclDocument::core();
    let mut issues = Vec::new();
    for entry in &doc.entries {
        let core_key = lex.abbreviations.core_key(&entry.key).to_string();
        let Some(field) = lex.field(&core_key) else {
            issues.push(DecodeIssue::UnknownKey { key: entry.key.clone() });
            continue;
        };
        let items: Vec<String> = match &entry.value {
            CclValue::Token(t) => alloc::vec![t.clone()],
            CclValue::List(items) => items
                .iter()
                .map(|i| match i {
                    CclValue::Token(t) => t.clone(),
                    other => emit_value(other).unwrap_or_default(),
                })
                .collect(),
            _ => {
                issues.push(DecodeIssue::BadShape { key: entry.key.clone() });
                continue;
            }
        };
        let rules = lex.abbreviations.field(&core_key).map(|f| f.rules.as_slice()).unwrap_or(&[]);
        let fragments = match expand(&items, rules) {
            Ok(f) => f,
            Err(e) => {
                issues.push(DecodeIssue::Unmappable { key: entry.key.clone(), item: e.item });
                continue;
            }
        };
        let text = if field.kind == FieldKind::Scalar {
            if fragments.len() != 1 {
                issues.push(DecodeIssue::BadShape { key: entry.key.clone() });
                continue;
            }
            fragments[0].clone()
        } else {
            format!("{{{}}}", fragments.join(","))
        };
        match parse_value(&text) {
            Ok(v) => {
                out.push(core_key, v);
            }
            Err(_) => {
                let item = items.first().cloned().unwrap_or_default();
                issues.push(DecodeIssue::Unmappable { key: entry.key.clone(), item });
            }
        }
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(DecodeError { issues })
    }
}

/// Merges two core documents; map-valued entries present in both are
/// concatenated member-wise.
pub fn merge_documents(a: &CclDocument, b: &CclDocument) -> Result<CclDocument, DecodeError> {
    let mut out = a.clone();
    let mut issues = Vec::new();
    for entry in &b.entries {
        match out.get_mut(&entry.key) {
            None => {
                out.push(entry.key.clone(), entry.value.clone());
            }
            Some(existing) => {
                let merged = match (existing.clone(), entry.value.clone()) {
                    (CclValue::Map(mut x), CclValue::Map(y)) => {
                        if y.iter().any(|(k, _)| x.iter().any(|(k2, _)| k2 == k)) {
                            None
                        } else {
                            x.extend(y);
                            Some(CclValue::Map(x))
                        }
                    }
                    (CclValue::Flags(mut x), CclValue::Flags(y)) => {
                        x.extend(y);
                        Some(CclValue::Flags(x))
                    }
                    (CclValue::Flags(x), CclValue::Map(y)) | (CclValue::Map(y), CclValue::Flags(x)) => {
                        let mut pairs: Vec<(String, CclValue)> = x.into_iter().map(|f| (f, CclValue::Bool(true))).collect();
                        pairs.extend(y);
                        Some(CclValue::Map(pairs))
                    }
                    _ => None,
                };
                match merged {
                    Some(v) => *existing = v,
                    None => issues.push(DecodeIssue::DuplicateKey { key: entry.key.clone() }),
                }
            }
        }
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(DecodeError { issues })
    }
}

/// Decodes what it can and reports the rest.
pub fn decode_lenient(doc: &CclDocument, lex: &Lexicon) -> (Vec<Atom>, Vec<DecodeIssue>) {
    let mut atoms = Vec::new();
    let mut issues = Vec::new();
    if doc.header.profile == Profile::Min {
        // Expand entry by entry so one bad item does not hide the rest.
        for entry in &doc.entries {
            let single = CclDocument { header: doc.header, entries: alloc::vec![entry.clone()] };
            match expand_min(&single, lex) {
                Ok(core) => {
                    for e in &core.entries {
                        decode_entry(&e.key, &e.value, lex, &mut atoms, &mut issues);
                    }
                }
                Err(e) => issues.extend(e.issues),
            }
        }
    } else {
        for entry in &doc.entries {
            decode_entry(&entry.key, &entry.value, lex, &mut atoms, &mut issues);
        }
    }
    (atoms, issues)
}

/// Strict decoding: any unknown key, member or abbreviation is an error.
pub fn ccl_to_atoms(doc: &CclDocument, lex: &Lexicon) -> Result<Vec<Atom>, DecodeError> {
    let (atoms, issues) = decode_lenient(doc, lex);
    if issues.is_empty() {
        Ok(atoms)
    } else {
        Err(DecodeError { issues })
    }
}

/// Where an atom is rendered: an entry key and, for container fields, the
/// member key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Placement {
    pub key: String,
    pub member: Option<String>,
}

fn find_placement(atom: &Atom, lex: &Lexicon, taken: &BTreeSet<Placement>) -> Placement {
    let free = |p: &Placement| !taken.contains(p);
    for field in &lex.fields {
        let scope = field_scope(field, lex);
        if scope != atom.scope {
            continue;
        }
        match field.kind {
            FieldKind::Scalar => {
                let p = Placement { key: field.key.clone(), member: None };
                if field.subject.as_deref() == Some(atom.subject.as_str())
                    && field.atom_type == atom.atom_type
                    && field.predicate == atom.predicate
                    && free(&p)
                {
                    return p;
                }
            }
            FieldKind::Map | FieldKind::Flags => {
                for m in &field.members {
                    let p = Placement { key: field.key.clone(), member: Some(m.key.clone()) };
                    if m.subject == atom.subject
                        && m.atom_type.unwrap_or(field.atom_type) == atom.atom_type
                        && m.predicate.as_deref().unwrap_or(&field.predicate) == atom.predicate
                        && free(&p)
                    {
                        return p;
                    }
                }
            }
        }
    }
    for field in lex.fields.iter().filter(|f| f.open && f.kind != FieldKind::Scalar) {
        let p = Placement { key: field.key.clone(), member: Some(atom.subject.clone()) };
        if field_scope(field, lex) == atom.scope
            && field.atom_type == atom.atom_type
            && field.predicate == atom.predicate
            && !field.members.iter().any(|m| m.key == atom.subject)
            && member_subject(&atom.subject, lex) == atom.subject
            && free(&p)
        {
            return p;
        }
    }
    let base = fallback_member_key(&atom.id());
    let mut member = base.clone();
    let mut n = 2;
    while !free(&Placement { key: FALLBACK_KEY.to_string(), member: Some(member.clone()) }) {
        member = format!("{}#{}", base, n);
        n += 1;
    }
    Placement { key: FALLBACK_KEY.to_string(), member: Some(member) }
}

/// Places every atom, resolving collisions in input order.
pub fn place_atoms(atoms: &[Atom], lex: &Lexicon) -> Vec<Placement> {
    let mut taken = BTreeSet::new();
    atoms
        .iter()
        .map(|a| {
            let p = find_placement(a, lex, &taken);
            taken.insert(p.clone());
            p
        })
        .collect()
}

fn field_order(lex: &Lexicon, key: &str) -> usize {
    lex.fields.iter().position(|f| f.key == key).unwrap_or(lex.fields.len())
}

/// Declared members in lexicon order; open members after them, stable.
fn member_order(field: &FieldMapping, p: &Placement) -> usize {
    field.members.iter().position(|m| Some(&m.key) == p.member.as_ref()).unwrap_or(usize::MAX)
}

fn build_document(lex: &Lexicon, items: &[(&Placement, &Value)]) -> CclDocument {
    let mut keys: Vec<&str> = Vec::new();
    for (p, _) in items {
        if !keys.contains(&p.key.as_str()) {
            keys.push(&p.key);
        }
    }
    keys.sort_by_key(|k| field_order(lex, k));
    let mut doc = CclDocument::core();
    for key in keys {
        let field = lex.field(key);
        let mut members: Vec<(&Placement, &Value)> = items.iter().filter(|(p, _)| p.key == key).copied().collect();
        if let Some(f) = field {
            members.sort_by_key(|(p, _)| member_order(f, p));
        }
        let value = match field {
            Some(f) if f.kind == FieldKind::Scalar => value_to_ccl(members[0].1),
            Some(f) if f.kind == FieldKind::Flags && !f.render_bools && members.iter().all(|(_, v)| **v == Value::Bool(true)) => {
                CclValue::Flags(members.iter().map(|(p, _)| p.member.clone().unwrap_or_default()).collect())
            }
            _ => CclValue::Map(
                members.iter().map(|(p, v)| (p.member.clone().unwrap_or_default(), value_to_ccl(v))).collect(),
            ),
        };
        doc.push(key, value);
    }
    doc
}

/// The grouped container view of an atom set.
pub fn group_atoms(atoms: &[Atom], lex: &Lexicon) -> CclDocument {
    let placements = place_atoms(atoms, lex);
    let items: Vec<(&Placement, &Value)> = placements.iter().zip(atoms.iter().map(|a| &a.value)).collect();
    build_document(lex, &items)
}

/// Evidence an atom contributes to the RAW section.
#[derive(Debug, Clone, PartialEq)]
pub struct RawQuote {
    pub id: AtomId,
    pub evidence: Evidence,
    /// The whole source message is preserved, not just the span.
    pub whole_message: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub core: CclDocument,
    pub min: Option<CclDocument>,
    pub raw: Vec<RawQuote>,
    /// Indices (into the input) of atoms rendered in the min document.
    pub minified: Vec<usize>,
}

fn fragment(p: &Placement, value: &Value) -> Option<String> {
    let v = value_to_ccl(value);
    match &p.member {
        None => emit_value(&v).ok(),
        Some(m) => {
            let text = emit_value(&CclValue::Map(alloc::vec![(m.clone(), v)])).ok()?;
            Some(text[1..text.len() - 1].to_string())
        }
    }
}

/// Renders atoms per their decisions. With `demote_min`, `min_allowed`
/// atoms whose fragments abbreviate losslessly move to a min document.
pub fn render_atoms(atoms: &[Atom], decisions: &[RenderDecision], lex: &Lexicon, demote_min: bool) -> Rendered {
    let placements = place_atoms(atoms, lex);
    let mut minified: Vec<usize> = Vec::new();
    let mut min_doc = CclDocument::new(Profile::Min);
    if demote_min {
        let mut keys: Vec<&str> = Vec::new();
        for (i, p) in placements.iter().enumerate() {
            if decisions.get(i) == Some(&RenderDecision::MinAllowed)
                && p.key != FALLBACK_KEY
                && !atoms[i].safety
                && !keys.contains(&p.key.as_str())
            {
                keys.push(&p.key);
            }
        }
        keys.sort_by_key(|k| field_order(lex, k));
        for key in keys {
            let Some(field) = lex.field(key) else { continue };
            let mut candidates: Vec<usize> = (0..atoms.len())
                .filter(|&i| {
                    placements[i].key == key && decisions.get(i) == Some(&RenderDecision::MinAllowed) && !atoms[i].safety
                })
                .collect();
            candidates.sort_by_key(|&i| member_order(field, &placements[i]));
            // A scalar field has exactly one atom; a container moves to min
            // only member by member.
            let mut frags = Vec::new();
            let mut owners = Vec::new();
            for &i in &candidates {
                if let Some(f) = fragment(&placements[i], &atoms[i].value) {
                    frags.push(f);
                    owners.push(i);
                }
            }
            let rules = lex.abbreviations.field(key).map(|f| f.rules.as_slice()).unwrap_or(&[]);
            let (items, consumed) = abbreviate(&frags, rules);
            if items.is_empty() || (field.kind == FieldKind::Scalar && items.len() != 1) {
                continue;
            }
            let value = if items.len() == 1 {
                CclValue::Token(items[0].clone())
            } else {
                CclValue::List(items.into_iter().map(CclValue::Token).collect())
            };
            min_doc.push(lex.abbreviations.min_key(key).to_string(), value);
            minified.extend(owners.iter().zip(&consumed).filter(|(_, c)| **c).map(|(i, _)| *i));
        }
    }
    minified.sort_unstable();
    let core_items: Vec<(&Placement, &Value)> = (0..atoms.len())
        .filter(|i| minified.binary_search(i).is_err())
        .map(|i| (&placements[i], &atoms[i].value))
        .collect();
    let core = build_document(lex, &core_items);
    let raw = atoms
        .iter()
        .zip(decisions)
        .filter_map(|(a, d)| {
            let wants = matches!(
                d,
                RenderDecision::CanonicalPlusSpan | RenderDecision::CoreWithSpan | RenderDecision::PreserveRawMessage
            );
            match (&a.evidence, wants) {
                (Some(ev), true) => Some(RawQuote {
                    id: a.id(),
                    evidence: ev.clone(),
                    whole_message: *d == RenderDecision::PreserveRawMessage,
                }),
                _ => None,
            }
        })
        .collect();
    Rendered { core, min: if min_doc.is_empty() { None } else { Some(min_doc) }, raw, minified }
}

/// Core rendering plus RAW evidence, without minification.
pub fn atoms_to_ccl(atoms: &[Atom], lex: &Lexicon, decisions: &[RenderDecision]) -> (CclDocument, Vec<RawQuote>) {
    let r = render_atoms(atoms, decisions, lex, false);
    (r.core, r.raw)
}

/// Decodes a core document together with an optional min document.
pub fn decode_pair(core: &CclDocument, min: Option<&CclDocument>, lex: &Lexicon) -> (Vec<Atom>, Vec<DecodeIssue>) {
    let (mut atoms, mut issues) = decode_lenient(core, lex);
    if let Some(m) = min {
        let (more, more_issues) = decode_lenient(m, lex);
        atoms.extend(more);
        issues.extend(more_issues);
    }
    (atoms, issues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccl::parse_ccl;
    use crate::lexicon::builtin;

    const TRIP: &str = "@CCL/1\nDEST=Lisbon\nDAYS=4\nPREF={walkable,local_food}\nC={rental_car:false}\n";

    #[test]
    fn values_round_trip() {
        for v in [Value::Bool(true), Value::Int(-3), Value::Enum("local_food".into())] {
            assert_eq!(ccl_to_value(&value_to_ccl(&v)), v);
        }
    }

    #[test]
    fn atoms_regroup_to_the_same_document() {
        let lex = builtin::lexicon("trip_state").unwrap();
        let doc = parse_ccl(TRIP).unwrap();
        let atoms = ccl_to_atoms(&doc, &lex).unwrap();
        assert_eq!(atoms.len(), 5);
        let back = ccl_to_atoms(&group_atoms(&atoms, &lex), &lex).unwrap();
        assert_eq!(back.len(), atoms.len());
        assert!(back.iter().all(|a| atoms.iter().any(|b| crate::atom::equivalent(a, b))));
    }

    #[test]
    fn unknown_keys_are_reported_not_dropped() {
        let lex = builtin::lexicon("trip_state").unwrap();
        let doc = parse_ccl("@CCL/1\nDEST=Lisbon\nNOPE=1\n").unwrap();
        let err = ccl_to_atoms(&doc, &lex).unwrap_err();
        assert_eq!(err.issues, alloc::vec![DecodeIssue::UnknownKey { key: "NOPE".into() }]);
        let (atoms, issues) = decode_lenient(&doc, &lex);
        assert_eq!((atoms.len(), issues.len()), (1, 1));
    }

    #[test]
    fn merge_rejects_overlapping_members() {
        let a = parse_ccl("@CCL/1\nC={rental_car:false}\n").unwrap();
        let b = parse_ccl("@CCL/1\nC={tolls:false}\nDAYS=2\n").unwrap();
        let m = merge_documents(&a, &b).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert!(merge_documents(&a, &a).is_err());
    }
}
