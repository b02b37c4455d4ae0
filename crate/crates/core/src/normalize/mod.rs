//! Surface-to-canonical normalization.
//!
//! A candidate (surface subject, verb, raw value, polarity cues) passes
//! through seven ordered steps: surface cleanup, polarity, subject and
//! predicate canonicalization, value typing, scope, and evidence/scoring.
//! Every rewrite is logged so the result can be replayed from the
//! candidate's initial projection.

mod phrase;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::atom::{
    is_canonical_token, text_value, tokenize_identifier, validate, Atom, AtomType, Date, Decimal, Evidence, Modality,
    Value,
};
use crate::lexicon::{surface_key, LexEntry, Lexicon, PredicateFamily, ValueKind};
use crate::scoring::{confidence, ConfidenceSignals, ConfidenceWeights};

pub use phrase::{phrase_candidates, PhraseHit};

/// Built-in negation cues; lexicons may add more.
pub const NEGATION_CUES: &[&str] = &[
    "no", "not", "never", "without", "forbidden", "avoid", "rejected", "don't", "dont", "do not", "does not",
    "doesn't", "cannot", "can't", "exclude", "excluding", "none", "nor",
];

/// Cues that negate the term they follow rather than the one they precede.
pub(crate) const POSTNOMINAL_CUES: &[&str] = &["rejected", "forbidden", "excluded", "not allowed"];

/// Confidence ceiling for atoms whose subject or value fell back to a
/// surface-derived form.
pub const FALLBACK_CONFIDENCE_CAP: f64 = 0.49;

/// Lowercases, trims, collapses whitespace, folds typographic quotes and
/// drops trailing sentence punctuation.
pub fn normalize_surface(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut space = false;
    for ch in text.trim().chars() {
        let ch = match ch {
            '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
            '\u{201c}' | '\u{201d}' => '"',
            '\u{2013}' | '\u{2014}' => '-',
            c => c,
        };
        if ch.is_whitespace() {
            space = true;
            continue;
        }
        if space && !out.is_empty() {
            out.push(' ');
        }
        space = false;
        out.extend(ch.to_lowercase());
    }
    while out.ends_with(['.', ',', ';', ':', '!', '?']) {
        out.pop();
    }
    out.truncate(out.trim_end().len());
    out
}

/// Whole-word (or whole-phrase) occurrences of `needle` in `hay`, both
/// already surface-normalized. Returns byte offsets.
pub(crate) fn find_words(hay: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let word = |c: char| c.is_alphanumeric() || c == '_';
    let mut from = 0;
    while let Some(pos) = hay[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = hay[..start].chars().next_back().is_none_or(|c| !word(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !word(c));
        if before_ok && after_ok {
            out.push((start, end));
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Affirmed,
    Negated,
}

/// Negated when any negation cue occurs as a whole word in the span.
pub fn detect_polarity(span: &str) -> Polarity {
    detect_polarity_with(span, &[])
}

pub fn detect_polarity_with(span: &str, extra_cues: &[String]) -> Polarity {
    let text = normalize_surface(span);
    let hit = NEGATION_CUES.iter().any(|c| !find_words(&text, c).is_empty())
        || extra_cues.iter().any(|c| !find_words(&text, &normalize_surface(c)).is_empty());
    if hit {
        Polarity::Negated
    } else {
        Polarity::Affirmed
    }
}

fn entry_matches(entry: &LexEntry, key: &str) -> bool {
    entry.canonical == key || entry.aliases.iter().any(|a| surface_key(a) == key)
}

fn lookup<'a>(entries: &'a [LexEntry], term: &str) -> Option<&'a LexEntry> {
    let key = normalize_surface(term);
    if let Some(e) = entries.iter().find(|e| entry_matches(e, &key)) {
        return Some(e);
    }
    let token = tokenize_identifier(&key);
    entries
        .iter()
        .filter(|e| !e.negative_examples.iter().any(|n| surface_key(n) == key))
        .find(|e| e.canonical == token || e.aliases.iter().any(|a| tokenize_identifier(a) == token))
}

/// Lexicon canonical for a surface subject term, if any entry claims it.
pub fn canonicalize_subject(term: &str, lex: &Lexicon) -> Option<String> {
    lookup(&lex.subject_entries, term).map(|e| e.canonical.clone())
}

/// Canonical predicate for a verb. Canonical tokens map to themselves;
/// permission-family aliases become `required` under must and `allowed`
/// otherwise.
pub fn canonicalize_predicate(term: &str, modality: Modality, lex: &Lexicon) -> Option<String> {
    let key = normalize_surface(term);
    if let Some(e) = lex.predicate_entries.iter().find(|e| e.canonical == key) {
        return Some(e.canonical.clone());
    }
    let entry = lookup(&lex.predicate_entries, term)?;
    Some(match entry.family {
        Some(PredicateFamily::Permission) if modality == Modality::Must => "required".to_string(),
        Some(PredicateFamily::Permission) => "allowed".to_string(),
        _ => entry.canonical.clone(),
    })
}

pub(crate) fn is_permission(pred: &str) -> bool {
    pred == "allowed" || pred == "required"
}

/// Criticality when neither the candidate nor the lexicon fixes one.
pub fn default_criticality(atom_type: AtomType, value: &Value, safety: bool) -> u8 {
    if safety {
        return 5;
    }
    match atom_type {
        AtomType::SafetyBoundary | AtomType::OutputContract => 5,
        AtomType::Constraint if matches!(value, Value::Bool(false) | Value::Int(_)) => 5,
        AtomType::Constraint | AtomType::Decision | AtomType::Goal | AtomType::Procedure => 4,
        AtomType::Preference | AtomType::State => 3,
        AtomType::Entity | AtomType::OpenQuestion | AtomType::VerbatimSnippet => 2,
    }
}

/// Names of the `{name}` / `{name:kind}` placeholders in a pattern template.
pub fn template_placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        let inner = &rest[open + 1..open + close];
        let name = inner.split(':').next().unwrap_or("");
        out.push(name.to_string());
        rest = &rest[open + close + 1..];
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot read `{raw}` as {expected} for `{hint}`")]
pub struct ValueError {
    pub raw: String,
    pub hint: String,
    pub expected: &'static str,
}

fn parse_bool(text: &str) -> Option<bool> {
    match normalize_surface(text).as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" | "none" => Some(false),
        _ => None,
    }
}

pub(crate) fn split_list(text: &str) -> Vec<String> {
    let mut items = Vec::new();
    for part in text.split(',') {
        let part = part.split_whitespace().collect::<Vec<_>>().join(" ");
        let mut part = part.as_str();
        for lead in ["and ", "or "] {
            if let Some(rest) = part.strip_prefix(lead) {
                part = rest.trim();
            }
        }
        for piece in split_words(part, &[" and ", " or "]) {
            let piece = piece.trim().trim_end_matches('.');
            if !piece.is_empty() {
                items.push(piece.to_string());
            }
        }
    }
    items
}

fn split_words<'a>(text: &'a str, seps: &[&str]) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut rest = text;
    'outer: loop {
        for sep in seps {
            if let Some(i) = rest.find(sep) {
                out.push(&rest[..i]);
                rest = &rest[i + sep.len()..];
                continue 'outer;
            }
        }
        out.push(rest);
        return out;
    }
}

fn enum_canonical(text: &str, values: &[String]) -> Option<String> {
    let key = normalize_surface(text);
    if let Some(v) = values.iter().find(|v| normalize_surface(v) == key) {
        return Some(v.clone());
    }
    // `structured prose` names the `structured_prose` enum
    let token = tokenize_identifier(&key);
    values.iter().find(|v| !token.is_empty() && tokenize_identifier(v) == token).cloned()
}

/// Types a raw surface value. `hint` is the canonical subject the value
/// belongs to; its lexicon entry supplies the expected kind and enum.
pub fn normalize_value(raw: &str, hint: &str, lex: &Lexicon) -> Result<Value, ValueError> {
    let kind = lex.subject(hint).and_then(|e| e.value_kind).unwrap_or(ValueKind::Any);
    let text = raw.trim();
    let err = |expected| ValueError { raw: raw.to_string(), hint: hint.to_string(), expected };
    if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
        return Ok(Value::Str(text[1..text.len() - 1].to_string()));
    }
    let enums = lex.value_enums.get(hint);
    match kind {
        ValueKind::Bool => parse_bool(text).map(Value::Bool).ok_or_else(|| err("a boolean")),
        ValueKind::Int => text.trim_start_matches('+').parse::<i64>().map(Value::Int).map_err(|_| err("an integer")),
        ValueKind::Decimal => Decimal::parse(text).map(Value::Decimal).ok_or_else(|| err("a decimal")),
        ValueKind::Date => Date::parse_any(text).map(Value::Date).ok_or_else(|| err("a date")),
        ValueKind::Enum => match enums {
            Some(values) => enum_canonical(text, values).map(Value::Enum).ok_or_else(|| err("a listed enum value")),
            None if crate::ccl::is_bare_token(text) => Ok(Value::Enum(text.to_string())),
            None => Err(err("an enum token")),
        },
        ValueKind::String => Ok(Value::Str(text.to_string())),
        ValueKind::List => Ok(Value::List(split_list(text).iter().map(|item| any_value(item, None)).collect())),
        ValueKind::Any => {
            if hint.ends_with("date") {
                if let Some(d) = Date::parse_any(text) {
                    return Ok(Value::Date(d));
                }
            }
            Ok(any_value(text, enums.map(Vec::as_slice)))
        }
    }
}

pub(crate) fn any_value(text: &str, enums: Option<&[String]>) -> Value {
    if let Some(values) = enums {
        if let Some(v) = enum_canonical(text, values) {
            return Value::Enum(v);
        }
    }
    match text {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = text.parse::<i64>() {
        return Value::Int(i);
    }
    if let Some(d) = Decimal::parse(text) {
        return Value::Decimal(d);
    }
    if let Some(d) = Date::parse_any(text) {
        return Value::Date(d);
    }
    if text.starts_with('[') || text.starts_with('{') || text.contains("->") {
        if let Ok(v) = crate::ccl::parse_value(text) {
            return crate::ccl::ccl_to_value(&v);
        }
    }
    text_value(text)
}

/// Raw value as found by an extractor.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Text(String),
    Typed(Value),
}

/// Extractor output before normalization. `None` fields are derived.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Candidate {
    pub surface_subject: String,
    pub surface_predicate: Option<String>,
    pub raw_value: Option<RawValue>,
    pub polarity: Option<Polarity>,
    pub modality: Option<Modality>,
    pub atom_type: Option<AtomType>,
    /// Explicit scope cue found near the term.
    pub scope: Option<String>,
    /// The value came from a count phrase (`350 agents`).
    pub count_phrase: bool,
    pub signals: Option<ConfidenceSignals>,
    pub confidence: Option<f64>,
    pub criticality: Option<u8>,
    pub safety: Option<bool>,
    pub ambiguity: f64,
    /// Fields are already canonical (re-normalizing a stored atom): a
    /// canonical-token subject the lexicon lacks is kept without penalty.
    pub trusted: bool,
}

impl Candidate {
    pub fn new(subject: impl Into<String>) -> Self {
        Candidate { surface_subject: subject.into(), ..Default::default() }
    }

    pub fn from_atom(a: &Atom) -> Self {
        Candidate {
            surface_subject: a.subject.clone(),
            surface_predicate: Some(a.predicate.clone()),
            raw_value: Some(RawValue::Typed(a.value.clone())),
            polarity: Some(Polarity::Affirmed),
            modality: Some(a.modality),
            atom_type: Some(a.atom_type),
            scope: Some(a.scope.clone()),
            count_phrase: false,
            signals: None,
            confidence: Some(a.confidence),
            criticality: Some(a.criticality),
            safety: Some(a.safety),
            ambiguity: 0.0,
            trusted: true,
        }
    }

    /// The atom the trace replays from.
    pub fn projection(&self, evidence: Option<Evidence>) -> Atom {
        Atom {
            atom_type: self.atom_type.unwrap_or(AtomType::VerbatimSnippet),
            subject: self.surface_subject.clone(),
            predicate: self.surface_predicate.clone().unwrap_or_default(),
            value: match &self.raw_value {
                Some(RawValue::Typed(v)) => v.clone(),
                Some(RawValue::Text(t)) => Value::Str(t.clone()),
                None => Value::Bool(true),
            },
            modality: self.modality.unwrap_or(Modality::Must),
            scope: self.scope.clone().unwrap_or_default(),
            evidence,
            confidence: self.confidence.unwrap_or(0.0),
            criticality: self.criticality.unwrap_or(0),
            safety: self.safety.unwrap_or(false),
        }
    }
}

/// Source text of the candidate plus its evidence pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpan {
    pub text: String,
    pub evidence: Option<Evidence>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Type(AtomType),
    Token(String),
    Value(Value),
    Modality(Modality),
    Number(f64),
    Level(u8),
    Flag(bool),
    Evidence(Option<Evidence>),
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Type(t) => write!(f, "{}", t),
            FieldValue::Token(t) => write!(f, "{:?}", t),
            FieldValue::Value(v) => write!(f, "{}", crate::ccl::emit_value(&crate::ccl::value_to_ccl(v)).unwrap_or_default()),
            FieldValue::Modality(m) => write!(f, "{}", m),
            FieldValue::Number(n) => write!(f, "{}", n),
            FieldValue::Level(n) => write!(f, "{}", n),
            FieldValue::Flag(b) => write!(f, "{}", b),
            FieldValue::Evidence(Some(e)) => write!(f, "{}", e.source_id),
            FieldValue::Evidence(None) => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub step: u8,
    pub rule: &'static str,
    pub field: &'static str,
    pub before: FieldValue,
    pub after: FieldValue,
}

pub type Trace = Vec<TraceEntry>;

/// Applies a trace to the candidate's projection.
pub fn replay(initial: &Atom, trace: &[TraceEntry]) -> Atom {
    let mut a = initial.clone();
    for t in trace {
        match (t.field, &t.after) {
            ("type", FieldValue::Type(x)) => a.atom_type = *x,
            ("subject", FieldValue::Token(x)) => a.subject = x.clone(),
            ("predicate", FieldValue::Token(x)) => a.predicate = x.clone(),
            ("scope", FieldValue::Token(x)) => a.scope = x.clone(),
            ("value", FieldValue::Value(x)) => a.value = x.clone(),
            ("modality", FieldValue::Modality(x)) => a.modality = *x,
            ("confidence", FieldValue::Number(x)) => a.confidence = *x,
            ("criticality", FieldValue::Level(x)) => a.criticality = *x,
            ("safety", FieldValue::Flag(x)) => a.safety = *x,
            ("evidence", FieldValue::Evidence(x)) => a.evidence = x.clone(),
            _ => {}
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub atom: Atom,
    pub trace: Trace,
    /// Ambiguity in `[0,1]` for the risk score (1 when the subject fell back).
    pub ambiguity: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("normalization failed: {reason}")]
pub struct NormalizationFailure {
    pub reason: String,
    pub trace: Trace,
}

struct Tracer {
    trace: Trace,
}

impl Tracer {
    fn log(&mut self, step: u8, rule: &'static str, field: &'static str, before: FieldValue, after: FieldValue) {
        if before != after {
            self.trace.push(TraceEntry { step, rule, field, before, after });
        }
    }
}

/// Scope precedence: explicit cue, entry scope, safety scope, lexicon
/// domain default, `task`.
pub fn assign_scope(candidate: &Candidate, subject: &str, atom_type: AtomType, lex: &Lexicon) -> String {
    if let Some(s) = candidate.scope.as_deref().filter(|s| is_canonical_token(s)) {
        return s.to_string();
    }
    if let Some(s) = lex.subject(subject).and_then(|e| e.scope.clone()) {
        return s;
    }
    if atom_type == AtomType::SafetyBoundary {
        return "safety_boundary".to_string();
    }
    lex.default_scope().to_string()
}

fn modality_of(text: &str) -> Option<Modality> {
    let t = normalize_surface(text);
    let any = |cues: &[&str]| cues.iter().any(|c| !find_words(&t, c).is_empty());
    if any(&["should", "ideally"]) {
        Some(Modality::Should)
    } else if any(&["may", "might", "could", "optional", "optionally", "maybe"]) {
        Some(Modality::May)
    } else if any(&["prefer", "prefers", "preferably", "like", "likes", "love", "enjoy"]) {
        Some(Modality::Prefer)
    } else {
        None
    }
}

/// Runs the seven normalization steps on one candidate.
pub fn normalize_atom(span: &SourceSpan, candidate: &Candidate, lex: &Lexicon) -> Result<Normalized, NormalizationFailure> {
    let initial = candidate.projection(span.evidence.clone());
    let mut t = Tracer { trace: Vec::new() };
    let mut capped = false;

    // 1. surface cleanup
    let subject_surface = normalize_surface(&candidate.surface_subject);
    if subject_surface.is_empty() {
        return Err(NormalizationFailure { reason: "empty subject".to_string(), trace: t.trace });
    }
    t.log(1, "surface", "subject", FieldValue::Token(initial.subject.clone()), FieldValue::Token(subject_surface.clone()));
    let verb = candidate.surface_predicate.as_deref().map(normalize_surface).filter(|v| !v.is_empty());
    if let Some(v) = &verb {
        t.log(1, "surface", "predicate", FieldValue::Token(initial.predicate.clone()), FieldValue::Token(v.clone()));
    }

    // 2. polarity
    let polarity = candidate.polarity.unwrap_or_else(|| detect_polarity_with(&span.text, &lex.negation_cues));
    let negated = polarity == Polarity::Negated;

    // 3. subject
    let (subject, ambiguity) = match canonicalize_subject(&subject_surface, lex) {
        Some(s) => (s, candidate.ambiguity),
        None => {
            let token = tokenize_identifier(&subject_surface);
            if token.is_empty() {
                return Err(NormalizationFailure { reason: "subject has no token characters".to_string(), trace: t.trace });
            }
            if !(candidate.trusted && token == subject_surface) {
                capped = true;
            }
            (token, if candidate.trusted { candidate.ambiguity } else { 1.0 })
        }
    };
    t.log(3, "canonical_subject", "subject", FieldValue::Token(subject_surface), FieldValue::Token(subject.clone()));
    let entry = lex.subject(&subject);
    let atom_type = candidate
        .atom_type
        .or_else(|| entry.and_then(|e| e.atom_type))
        .unwrap_or(AtomType::Constraint);
    t.log(3, "atom_type", "type", FieldValue::Type(initial.atom_type), FieldValue::Type(atom_type));

    // 4. predicate and modality
    let cue_modality = modality_of(&span.text);
    let verb_modality = if negated { Modality::Forbid } else { candidate.modality.or(cue_modality).unwrap_or(Modality::Must) };
    let from_verb = verb.as_deref().and_then(|v| canonicalize_predicate(v, verb_modality, lex));
    let entry_pred = entry.and_then(|e| e.predicate.clone());
    let predicate = if candidate.count_phrase && candidate.surface_predicate.is_none() {
        entry_pred.unwrap_or_else(|| "equals".to_string())
    } else {
        match (from_verb, entry_pred) {
            (Some(v), Some(e)) => {
                let switchable = (is_permission(&v) && is_permission(&e))
                    || entry.is_some_and(|en| en.alt_predicates.contains(&v));
                if switchable || v == e {
                    v
                } else {
                    e
                }
            }
            (Some(v), None) => v,
            (None, Some(e)) => e,
            (None, None) => match verb.as_deref() {
                Some(v) if !tokenize_identifier(v).is_empty() => tokenize_identifier(v),
                _ => "equals".to_string(),
            },
        }
    };
    // a negated permission is a prohibition: allowed=false under must
    let predicate = if negated && predicate == "required" && !candidate.trusted { "allowed".to_string() } else { predicate };
    t.log(4, "canonical_predicate", "predicate", FieldValue::Token(initial.predicate.clone()), FieldValue::Token(predicate.clone()));
    let modality = candidate.modality.unwrap_or_else(|| {
        if let Some(m) = entry.and_then(|e| e.modality) {
            m
        } else if predicate == "rejected" {
            Modality::Rejected
        } else if negated {
            Modality::Must
        } else {
            cue_modality.unwrap_or(Modality::Must)
        }
    });
    t.log(4, "modality", "modality", FieldValue::Modality(initial.modality), FieldValue::Modality(modality));

    // 5. value
    let kind = entry.and_then(|e| e.value_kind);
    let boolish = matches!(kind, None | Some(ValueKind::Bool));
    let value = match &candidate.raw_value {
        Some(RawValue::Typed(v)) => match (v, lex.value_enums.get(&subject)) {
            (Value::Enum(s), Some(values)) => Value::Enum(enum_canonical(s, values).unwrap_or_else(|| s.clone())),
            _ => v.clone(),
        },
        Some(RawValue::Text(raw)) if boolish && parse_bool(raw).is_some() => {
            Value::Bool(parse_bool(raw).unwrap_or(true) && !negated)
        }
        Some(RawValue::Text(raw)) => match normalize_value(raw, &subject, lex) {
            Ok(v) => v,
            Err(_) => {
                capped = true;
                Value::Str(raw.trim().to_string())
            }
        },
        None if boolish => Value::Bool(!negated),
        None => {
            return Err(NormalizationFailure {
                reason: alloc::format!("`{}` needs a value and none was found", subject),
                trace: t.trace,
            })
        }
    };
    t.log(5, "typed_value", "value", FieldValue::Value(initial.value.clone()), FieldValue::Value(value.clone()));

    // 6. scope
    let scope = assign_scope(candidate, &subject, atom_type, lex);
    t.log(6, "scope", "scope", FieldValue::Token(initial.scope.clone()), FieldValue::Token(scope.clone()));

    // 7. evidence, safety, criticality, confidence
    let evidence = span.evidence.clone();
    t.log(7, "evidence", "evidence", FieldValue::Evidence(initial.evidence.clone()), FieldValue::Evidence(evidence.clone()));
    let safety = atom_type == AtomType::SafetyBoundary
        || candidate.safety.unwrap_or(false)
        || entry.is_some_and(|e| e.safety);
    t.log(7, "safety", "safety", FieldValue::Flag(initial.safety), FieldValue::Flag(safety));
    let criticality = candidate
        .criticality
        .filter(|c| (1..=5).contains(c))
        .or_else(|| entry.and_then(|e| e.criticality))
        .unwrap_or_else(|| default_criticality(atom_type, &value, safety || (negated && atom_type == AtomType::Constraint)));
    t.log(7, "criticality", "criticality", FieldValue::Level(initial.criticality), FieldValue::Level(criticality));

    let mut atom = Atom {
        atom_type,
        subject,
        predicate,
        value,
        modality,
        scope,
        evidence,
        confidence: 0.0,
        criticality,
        safety,
    };
    let schema_ok = validate(&atom).is_ok();
    let mut conf = match candidate.confidence {
        Some(c) => c,
        None => {
            let mut sig = candidate.signals.unwrap_or(ConfidenceSignals {
                e_span: match &atom.evidence {
                    Some(e) if e.span.is_some() && e.quote.is_some() => 1.0,
                    Some(_) => 0.5,
                    None => 0.0,
                },
                e_agree: 1.0,
                e_roundtrip: 1.0,
                e_schema: 1.0,
                e_anchor: 0.0,
            });
            sig.e_schema = if schema_ok { sig.e_schema } else { 0.0 };
            confidence(&sig, &ConfidenceWeights::default())
        }
    };
    if capped {
        conf = conf.min(FALLBACK_CONFIDENCE_CAP);
    }
    let conf = conf.clamp(0.0, 1.0);
    t.log(7, "confidence", "confidence", FieldValue::Number(initial.confidence), FieldValue::Number(conf));
    atom.confidence = conf;
    if let Err(v) = validate(&atom) {
        let reason = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
        return Err(NormalizationFailure { reason, trace: t.trace });
    }
    Ok(Normalized { atom, trace: t.trace, ambiguity })
}

/// Extracts and normalizes every candidate in one phrase. Evidence offsets
/// are relative to `text` unless `offset` shifts them.
pub fn normalize_phrase(text: &str, source_id: &str, offset: usize, lex: &Lexicon) -> Vec<Normalized> {
    phrase_candidates(text, lex)
        .into_iter()
        .filter_map(|hit| {
            let quote: String = text.chars().skip(hit.start).take(hit.end - hit.start).collect();
            let span = SourceSpan {
                text: hit.clause.clone(),
                evidence: Some(Evidence::new(source_id, offset + hit.start, offset + hit.end, quote)),
            };
            normalize_atom(&span, &hit.candidate, lex).ok()
        })
        .collect()
}
