//! Canonical atom records, identity keys, equivalence and conflict
//! relations, and schema validation.

mod serde_impl;
mod value;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use serde_impl::{from_records_json, text_value, to_records_json};
pub use value::{
    compatible, value_equiv, value_equiv_with, Date, Decimal, ListSemantics, Value, ARROW_FROM, ARROW_TO,
    MAX_VALUE_DEPTH,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{token}`")]
pub struct UnknownToken {
    pub kind: &'static str,
    pub token: String,
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(UnknownToken { kind: $kind, token: other.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(
    /// Closed set of commitment kinds.
    AtomType, "atom type", {
        Goal => "goal",
        Constraint => "constraint",
        Entity => "entity",
        Decision => "decision",
        Procedure => "procedure",
        Preference => "preference",
        State => "state",
        OutputContract => "output_contract",
        OpenQuestion => "open_question",
        SafetyBoundary => "safety_boundary",
        VerbatimSnippet => "verbatim_snippet",
    }
);

token_enum!(
    Modality, "modality", {
        Must => "must",
        Should => "should",
        May => "may",
        Rejected => "rejected",
        Prefer => "prefer",
        Forbid => "forbid",
    }
);

impl Modality {
    /// Binding strength: must/forbid 3, should/prefer 2, may 1, rejected 0.
    pub fn strength(&self) -> u8 {
        match self {
            Modality::Must | Modality::Forbid => 3,
            Modality::Should | Modality::Prefer => 2,
            Modality::May => 1,
            Modality::Rejected => 0,
        }
    }
}

/// Lifecycle of an atom inside an annotated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Status {
    #[default]
    Active,
    Rejected,
    Superseded,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Rejected => "rejected",
            Status::Superseded => "superseded",
        }
    }
}

impl FromStr for Status {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(Status::Active),
            "rejected" => Ok(Status::Rejected),
            "superseded" => Ok(Status::Superseded),
            other => Err(UnknownToken { kind: "status", token: other.to_string() }),
        }
    }
}

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Evidence {
    pub source_id: String,
    pub span: Option<Span>,
    pub quote: Option<String>,
}

impl Evidence {
    pub fn new(source_id: impl Into<String>, start: usize, end: usize, quote: impl Into<String>) -> Self {
        Evidence { source_id: source_id.into(), span: Some(Span { start, end }), quote: Some(quote.into()) }
    }

    pub fn reference(source_id: impl Into<String>) -> Self {
        Evidence { source_id: source_id.into(), span: None, quote: None }
    }

    /// True when the quote (if any) is exactly the source substring at the
    /// span. Span offsets are character indices.
    pub fn quote_matches(&self, source: &str) -> bool {
        match (&self.span, &self.quote) {
            (Some(span), Some(quote)) => {
                let excerpt: String = source.chars().skip(span.start).take(span.end.saturating_sub(span.start)).collect();
                excerpt == *quote
            }
            _ => true,
        }
    }
}

/// A typed commitment record.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub atom_type: AtomType,
    pub subject: String,
    pub predicate: String,
    pub value: Value,
    pub modality: Modality,
    pub scope: String,
    pub evidence: Option<Evidence>,
    pub confidence: f64,
    pub criticality: u8,
    pub safety: bool,
}

impl Atom {
    /// Synthetic atom: modality `must`, full confidence, criticality 3, no
    /// evidence.
    pub fn new(
        atom_type: AtomType,
        subject: impl Into<String>,
        predicate: impl Into<String>,
        value: Value,
        scope: impl Into<String>,
    ) -> Self {
        Atom {
            atom_type,
            subject: subject.into(),
            predicate: predicate.into(),
            value,
            modality: Modality::Must,
            scope: scope.into(),
            evidence: None,
            confidence: 1.0,
            criticality: 3,
            safety: atom_type == AtomType::SafetyBoundary,
        }
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence = Some(evidence);
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_criticality(mut self, criticality: u8) -> Self {
        self.criticality = criticality;
        self
    }

    pub fn with_safety(mut self, safety: bool) -> Self {
        self.safety = safety;
        self
    }

    pub fn id(&self) -> AtomId {
        atom_id(self)
    }

    pub fn list_semantics(&self) -> ListSemantics {
        list_semantics(self.atom_type)
    }
}

/// Preference sets are order-free; every other list is a sequence.
pub fn list_semantics(atom_type: AtomType) -> ListSemantics {
    if atom_type == AtomType::Preference {
        ListSemantics::Multiset
    } else {
        ListSemantics::Sequence
    }
}

/// Identity key `(type, subject, predicate, scope)`. Ordered
/// lexicographically by its textual fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomId {
    pub atom_type: AtomType,
    pub subject: String,
    pub predicate: String,
    pub scope: String,
}

impl AtomId {
    pub fn new(atom_type: AtomType, subject: &str, predicate: &str, scope: &str) -> Self {
        AtomId {
            atom_type,
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            scope: scope.to_string(),
        }
    }

    /// The id with scope removed; used for scope-error detection.
    pub fn unscoped(&self) -> (AtomType, &str, &str) {
        (self.atom_type, &self.subject, &self.predicate)
    }
}

impl Ord for AtomId {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.atom_type.as_str(), &self.subject, &self.predicate, &self.scope).cmp(&(
            other.atom_type.as_str(),
            &other.subject,
            &other.predicate,
            &other.scope,
        ))
    }
}

impl PartialOrd for AtomId {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.atom_type, self.subject, self.predicate, self.scope)
    }
}

impl FromStr for AtomId {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 4 {
            return Err(UnknownToken { kind: "atom id", token: s.to_string() });
        }
        Ok(AtomId::new(parts[0].parse()?, parts[1], parts[2], parts[3]))
    }
}

fn norm_token(token: &str) -> String {
    token.trim().to_ascii_lowercase()
}

/// `norm(type, subject, predicate, scope)`; independent of value, modality,
/// evidence and confidence.
pub fn atom_id(a: &Atom) -> AtomId {
    AtomId {
        atom_type: a.atom_type,
        subject: norm_token(&a.subject),
        predicate: norm_token(&a.predicate),
        scope: norm_token(&a.scope),
    }
}

pub fn equivalent(a: &Atom, b: &Atom) -> bool {
    atom_id(a) == atom_id(b) && value_equiv_with(&a.value, &b.value, a.list_semantics())
}

pub fn conflicts(a: &Atom, b: &Atom) -> bool {
    atom_id(a) == atom_id(b) && !compatible(&a.value, &b.value, &a.predicate, a.list_semantics())
}

/// One field-level schema violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// `[a-z0-9_]+`
pub fn is_canonical_token(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Canonical token form of arbitrary surface text: lowercase, runs of
/// other characters collapsed to `_`.
pub fn tokenize_identifier(text: &str) -> String {
    let mut out = String::new();
    let mut pending = false;
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending && !out.is_empty() {
                out.push('_');
            }
            pending = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending = true;
        }
    }
    out
}

fn check_value(value: &Value, out: &mut Vec<Violation>) {
    if value.depth() > MAX_VALUE_DEPTH {
        out.push(Violation { field: "value", message: format!("nesting depth {} exceeds {}", value.depth(), MAX_VALUE_DEPTH) });
    }
    fn walk(value: &Value, out: &mut Vec<Violation>) {
        match value {
            Value::Enum(t) if t.is_empty() => {
                out.push(Violation { field: "value", message: "empty enum token".to_string() });
            }
            Value::List(items) => items.iter().for_each(|v| walk(v, out)),
            Value::Map(pairs) => {
                for (i, (k, v)) in pairs.iter().enumerate() {
                    if k.is_empty() {
                        out.push(Violation { field: "value", message: "empty map key".to_string() });
                    }
                    if pairs[..i].iter().any(|(k2, _)| k2 == k) {
                        out.push(Violation { field: "value", message: format!("duplicate map key `{}`", k) });
                    }
                    walk(v, out);
                }
            }
            _ => {}
        }
    }
    walk(value, out);
}

/// Field-level validation; returns every violation found.
pub fn validate(a: &Atom) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (field, token) in [("subject", &a.subject), ("predicate", &a.predicate), ("scope", &a.scope)] {
        if !is_canonical_token(token) {
            out.push(Violation { field, message: format!("`{}` is not a [a-z0-9_]+ token", token) });
        }
    }
    if !(a.confidence.is_finite() && (0.0..=1.0).contains(&a.confidence)) {
        out.push(Violation { field: "confidence", message: format!("{} is outside [0,1]", a.confidence) });
    }
    if !(1..=5).contains(&a.criticality) {
        out.push(Violation { field: "criticality", message: format!("{} is outside 1..5", a.criticality) });
    }
    if a.atom_type == AtomType::SafetyBoundary && !a.safety {
        out.push(Violation { field: "safety", message: "safety_boundary atoms must carry safety=true".to_string() });
    }
    if let Some(ev) = &a.evidence {
        if ev.source_id.is_empty() {
            out.push(Violation { field: "evidence", message: "empty source id".to_string() });
        }
        if let Some(span) = ev.span {
            if span.start >= span.end {
                out.push(Violation { field: "evidence", message: format!("span {}..{} is empty", span.start, span.end) });
            }
        }
    }
    check_value(&a.value, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn libs(value: bool) -> Atom {
        Atom::new(AtomType::Constraint, "external_libraries", "allowed", Value::Bool(value), "generated_artifact")
    }

    #[test]
    fn id_of_canonical_fields() {
        let a = libs(false);
        assert_eq!(
            atom_id(&a),
            AtomId::new(AtomType::Constraint, "external_libraries", "allowed", "generated_artifact")
        );
        assert_eq!(atom_id(&a).to_string(), "constraint/external_libraries/allowed/generated_artifact");
        assert_eq!("constraint/external_libraries/allowed/generated_artifact".parse::<AtomId>().unwrap(), atom_id(&a));
    }

    #[test]
    fn id_excludes_value_and_includes_scope() {
        let a = Atom::new(AtomType::Constraint, "agent_count", "equals", Value::Int(350), "generated_artifact");
        let mut b = a.clone();
        b.value = Value::Int(200);
        assert_eq!(atom_id(&a), atom_id(&b));
        let mut c = a.clone();
        c.scope = "current_itinerary".into();
        assert_ne!(atom_id(&a), atom_id(&c));
    }

    #[test]
    fn equivalence_and_conflict_examples() {
        assert!(equivalent(&libs(false), &libs(false)));
        assert!(!equivalent(&libs(false), &libs(true)));
        assert!(conflicts(&libs(false), &libs(true)));
        let mut other = libs(false);
        other.subject = "external_assets".into();
        assert!(!equivalent(&libs(false), &other));
        assert!(!conflicts(&libs(false), &other));
        let c350 = Atom::new(AtomType::Constraint, "agent_count", "equals", Value::Int(350), "generated_artifact");
        let mut c200 = c350.clone();
        c200.value = Value::Int(200);
        assert!(!conflicts(&c350, &c350.clone()));
        assert!(conflicts(&c350, &c200));
    }

    #[test]
    fn preference_lists_compare_as_multisets() {
        let a = Atom::new(
            AtomType::Preference,
            "sights",
            "desired",
            Value::List(vec![Value::enum_token("a"), Value::enum_token("b")]),
            "current_itinerary",
        );
        let mut b = a.clone();
        b.value = Value::List(vec![Value::enum_token("b"), Value::enum_token("a")]);
        assert!(equivalent(&a, &b));
        let mut c = a.clone();
        c.atom_type = AtomType::Procedure;
        let mut d = b.clone();
        d.atom_type = AtomType::Procedure;
        assert!(!equivalent(&c, &d));
    }

    #[test]
    fn validation_reports_field_violations() {
        let mut a = libs(false).with_confidence(0.96).with_criticality(5);
        a.evidence = Some(Evidence::reference("user_turn_3"));
        assert_eq!(validate(&a), Ok(()));

        let bad_conf = libs(false).with_confidence(1.3);
        let errs = validate(&bad_conf).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "confidence");

        let mut bad_subject = libs(false);
        bad_subject.subject = "External Libs!".into();
        let errs = validate(&bad_subject).unwrap_err();
        assert_eq!(errs[0].field, "subject");

        let bad_safety = Atom::new(AtomType::SafetyBoundary, "x", "allowed", Value::Bool(false), "safety_boundary").with_safety(false);
        assert_eq!(validate(&bad_safety).unwrap_err()[0].field, "safety");

        let bad_crit = libs(false).with_criticality(0);
        assert_eq!(validate(&bad_crit).unwrap_err()[0].field, "criticality");

        let bad_span = libs(false).with_evidence(Evidence::new("m1", 5, 5, ""));
        assert_eq!(validate(&bad_span).unwrap_err()[0].field, "evidence");

        let mut deep = Value::Int(1);
        for _ in 0..9 {
            deep = Value::List(vec![deep]);
        }
        let mut too_deep = libs(false);
        too_deep.value = deep;
        assert_eq!(validate(&too_deep).unwrap_err()[0].field, "value");
    }

    #[test]
    fn quote_must_match_source_span() {
        let source = "User: no external libraries please";
        let ok = Evidence::new("m1", 6, 27, "no external libraries");
        assert!(ok.quote_matches(source));
        let bad = Evidence::new("m1", 6, 27, "no libraries");
        assert!(!bad.quote_matches(source));
    }

    #[test]
    fn identifier_tokenization() {
        assert_eq!(tokenize_identifier("External Libs!"), "external_libs");
        assert_eq!(tokenize_identifier("far-out lodging"), "far_out_lodging");
        assert!(is_canonical_token("agent_count"));
        assert!(!is_canonical_token("Agent"));
        assert!(!is_canonical_token(""));
    }
}
