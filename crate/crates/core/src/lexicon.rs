//! Versioned domain lexicons: subject and predicate aliases, value enums,
//! scope defaults, extraction patterns, CCL field mappings and the CCL-Min
//! abbreviation table.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::atom::{is_canonical_token, AtomType, Modality};

/// How a predicate's canonical token is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateFamily {
    /// `allowed` under negation or weak modality, `required` under must.
    Permission,
    /// Fixed canonical (equals, selected, rejected, desired, ...).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Bool,
    Int,
    Decimal,
    Date,
    Enum,
    String,
    List,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRule {
    pub a: String,
    pub b: String,
    /// `distinct`: the two canonicals must never share an alias.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexEntry {
    pub canonical: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub negative_examples: Vec<String>,
    #[serde(default)]
    pub conflict_rules: Vec<ConflictRule>,
    /// Subject entries: default atom type.
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub atom_type: Option<AtomType>,
    /// Subject entries: default canonical predicate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_kind: Option<ValueKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criticality: Option<u8>,
    #[serde(default)]
    pub safety: bool,
    /// Subject entries: detect mentions of this subject's enum values.
    #[serde(default)]
    pub mentions: bool,
    /// Subject entries: predicates a governing verb may switch to (beyond
    /// the allowed/required pair).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alt_predicates: Vec<String>,
    /// Predicate entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<PredicateFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

/// One extractor template, e.g. `"grid is {grid_width} by {grid_height}"`
/// or a fixed phrase with explicit emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRule {
    pub template: String,
    #[serde(default)]
    pub emit: Vec<PatternEmit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEmit {
    pub subject: String,
    /// CCL value text, e.g. `true`, `random_walk`, `{S:blue,I:red}`.
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// `KEY=value`, one atom.
    Scalar,
    /// `KEY={member:value,...}`, one atom per member.
    Map,
    /// `KEY={flag,...}`, one boolean atom per flag.
    Flags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMapping {
    pub key: String,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub atom_type: Option<AtomType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

/// A CCL container key and the atoms it groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapping {
    pub key: String,
    pub kind: FieldKind,
    #[serde(rename = "type")]
    pub atom_type: AtomType,
    pub predicate: String,
    /// Scalar fields: the subject.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default)]
    pub members: Vec<MemberMapping>,
    /// Map/flag fields: accept member keys not listed in `members`.
    #[serde(default)]
    pub open: bool,
    /// Flag fields: render as `{a:true,b:true}` instead of `{a,b}`.
    #[serde(default)]
    pub render_bools: bool,
}

/// `*` marks a capture; captures pair up left to right between sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinRule {
    pub min: String,
    pub core: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinField {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_key: Option<String>,
    #[serde(default)]
    pub rules: Vec<MinRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AbbreviationTable {
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub fields: Vec<MinField>,
}

impl AbbreviationTable {
    pub fn field(&self, core_key: &str) -> Option<&MinField> {
        self.fields.iter().find(|f| f.key == core_key)
    }

    pub fn min_key<'a>(&'a self, core_key: &'a str) -> &'a str {
        self.field(core_key).and_then(|f| f.min_key.as_deref()).unwrap_or(core_key)
    }

    pub fn core_key<'a>(&'a self, min_key: &'a str) -> &'a str {
        self.fields
            .iter()
            .find(|f| f.min_key.as_deref() == Some(min_key))
            .map(|f| f.key.as_str())
            .unwrap_or(min_key)
    }
}

/// A declared generalization: `specific` (a value, or `*int` for any
/// integer) weakened to `general` for `subject`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generalization {
    pub subject: String,
    pub specific: String,
    pub general: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: String,
    /// Task domain used to look up `scope_defaults`.
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub subject_entries: Vec<LexEntry>,
    #[serde(default)]
    pub predicate_entries: Vec<LexEntry>,
    #[serde(default)]
    pub value_enums: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub scope_defaults: BTreeMap<String, String>,
    /// Surface phrase → scope token.
    #[serde(default)]
    pub scope_cues: BTreeMap<String, String>,
    /// Additional negation cues beyond the built-in list.
    #[serde(default)]
    pub negation_cues: Vec<String>,
    #[serde(default)]
    pub patterns: Vec<PatternRule>,
    #[serde(default)]
    pub fields: Vec<FieldMapping>,
    #[serde(default)]
    pub abbreviations: AbbreviationTable,
    #[serde(default)]
    pub generalizations: Vec<Generalization>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("invalid lexicon JSON: {0}")]
    Syntax(String),
    #[error("{kind} alias `{alias}` maps to both `{first}` and `{second}`")]
    DuplicateAlias { kind: &'static str, alias: String, first: String, second: String },
    #[error("negative example `{example}` of `{canonical}` is also one of its aliases")]
    NegativeIsAlias { canonical: String, example: String },
    #[error("`{token}` in {context} is not a canonical [a-z0-9_]+ token")]
    BadToken { context: String, token: String },
    #[error("{context} references unknown subject `{subject}`")]
    UnknownSubject { context: String, subject: String },
    #[error("field key `{key}` is invalid or duplicated")]
    BadFieldKey { key: String },
    #[error("conflict rule `{a}`/`{b}` ({relation}) is violated: {detail}")]
    ConflictRule { a: String, b: String, relation: String, detail: String },
    #[error("abbreviation rule `{min}`<->`{core}` in field `{key}` has unbalanced captures")]
    BadMinRule { key: String, min: String, core: String },
}

impl LexiconError {
    /// The surface string a file diagnostic should point at.
    pub fn offending_text(&self) -> Option<&str> {
        match self {
            LexiconError::DuplicateAlias { alias, .. } => Some(alias),
            LexiconError::NegativeIsAlias { example, .. } => Some(example),
            LexiconError::BadToken { token, .. } => Some(token),
            LexiconError::UnknownSubject { subject, .. } => Some(subject),
            LexiconError::BadFieldKey { key } => Some(key),
            _ => None,
        }
    }
}

/// Reserved container key for atoms no field mapping covers.
pub const FALLBACK_KEY: &str = "X";

pub(crate) fn surface_key(text: &str) -> String {
    crate::normalize::normalize_surface(text)
}

pub fn is_field_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Lexicon, LexiconError> {
        let lex: Lexicon = serde_json::from_str(text).map_err(|e| LexiconError::Syntax(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("lexicons always serialize");
        text.push('\n');
        text
    }

    pub fn subject(&self, canonical: &str) -> Option<&LexEntry> {
        self.subject_entries.iter().find(|e| e.canonical == canonical)
    }

    pub fn predicate(&self, canonical: &str) -> Option<&LexEntry> {
        self.predicate_entries.iter().find(|e| e.canonical == canonical)
    }

    pub fn field(&self, key: &str) -> Option<&FieldMapping> {
        self.fields.iter().find(|f| f.key == key)
    }

    /// Scope used when neither a cue nor an entry fixes one.
    pub fn default_scope(&self) -> &str {
        self.scope_defaults.get(&self.domain).map(String::as_str).unwrap_or("task")
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        for (kind, entries) in [("subject", &self.subject_entries), ("predicate", &self.predicate_entries)] {
            let mut seen: BTreeMap<String, &str> = BTreeMap::new();
            for entry in entries.iter() {
                if !is_canonical_token(&entry.canonical) {
                    return Err(LexiconError::BadToken {
                        context: alloc::format!("{} entry", kind),
                        token: entry.canonical.clone(),
                    });
                }
                let mut keys: Vec<String> = entry.aliases.iter().map(|a| surface_key(a)).collect();
                keys.push(entry.canonical.clone());
                keys.sort();
                keys.dedup();
                for key in keys {
                    if let Some(first) = seen.get(&key) {
                        if *first != entry.canonical {
                            return Err(LexiconError::DuplicateAlias {
                                kind,
                                alias: key,
                                first: first.to_string(),
                                second: entry.canonical.clone(),
                            });
                        }
                    }
                    seen.insert(key, &entry.canonical);
                }
                for example in &entry.negative_examples {
                    let key = surface_key(example);
                    if key == entry.canonical || entry.aliases.iter().any(|a| surface_key(a) == key) {
                        return Err(LexiconError::NegativeIsAlias {
                            canonical: entry.canonical.clone(),
                            example: example.clone(),
                        });
                    }
                }
            }
        }
        for entry in &self.subject_entries {
            for rule in &entry.conflict_rules {
                if rule.relation == "distinct" {
                    let (Some(a), Some(b)) = (self.subject(&rule.a), self.subject(&rule.b)) else {
                        return Err(LexiconError::UnknownSubject {
                            context: alloc::format!("conflict rule on `{}`", entry.canonical),
                            subject: if self.subject(&rule.a).is_none() { rule.a.clone() } else { rule.b.clone() },
                        });
                    };
                    let shared = a.aliases.iter().find(|x| b.aliases.iter().any(|y| surface_key(x) == surface_key(y)));
                    if let Some(alias) = shared {
                        return Err(LexiconError::ConflictRule {
                            a: rule.a.clone(),
                            b: rule.b.clone(),
                            relation: rule.relation.clone(),
                            detail: alloc::format!("shared alias `{}`", alias),
                        });
                    }
                }
            }
        }
        for (token, context) in self
            .scope_defaults
            .values()
            .map(|s| (s, "scope_defaults"))
            .chain(self.scope_cues.values().map(|s| (s, "scope_cues")))
        {
            if !is_canonical_token(token) {
                return Err(LexiconError::BadToken { context: context.to_string(), token: token.clone() });
            }
        }
        for rule in &self.patterns {
            for emit in &rule.emit {
                if self.subject(&emit.subject).is_none() {
                    return Err(LexiconError::UnknownSubject {
                        context: alloc::format!("pattern `{}`", rule.template),
                        subject: emit.subject.clone(),
                    });
                }
            }
            for name in crate::normalize::template_placeholders(&rule.template) {
                if self.subject(&name).is_none() {
                    return Err(LexiconError::UnknownSubject {
                        context: alloc::format!("pattern `{}`", rule.template),
                        subject: name,
                    });
                }
            }
        }
        let mut keys: Vec<&str> = Vec::new();
        for field in &self.fields {
            if !is_field_key(&field.key) || field.key == FALLBACK_KEY || keys.contains(&field.key.as_str()) {
                return Err(LexiconError::BadFieldKey { key: field.key.clone() });
            }
            keys.push(&field.key);
            let mut tokens: Vec<&String> = alloc::vec![&field.predicate];
            tokens.extend(field.subject.iter());
            tokens.extend(field.scope.iter());
            for m in &field.members {
                tokens.push(&m.subject);
                tokens.extend(m.predicate.iter());
            }
            for token in tokens {
                if !is_canonical_token(token) {
                    return Err(LexiconError::BadToken {
                        context: alloc::format!("field `{}`", field.key),
                        token: token.clone(),
                    });
                }
            }
        }
        for field in &self.abbreviations.fields {
            for rule in &field.rules {
                if rule.min.matches('*').count() != rule.core.matches('*').count() {
                    return Err(LexiconError::BadMinRule {
                        key: field.key.clone(),
                        min: rule.min.clone(),
                        core: rule.core.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The closed lexicons shipped for the bundled case domains.
pub mod builtin {
    use super::Lexicon;

    pub const NAMES: &[&str] = &["webgen", "react", "datacleaning", "trip", "trip_state", "research"];

    pub fn source(name: &str) -> Option<&'static str> {
        Some(match name {
            "webgen" => include_str!("../lexicons/webgen.json"),
            "react" => include_str!("../lexicons/react.json"),
            "datacleaning" => include_str!("../lexicons/datacleaning.json"),
            "trip" => include_str!("../lexicons/trip.json"),
            "trip_state" => include_str!("../lexicons/trip_state.json"),
            "research" => include_str!("../lexicons/research.json"),
            _ => return None,
        })
    }

    /// Parses a bundled lexicon. Panics only if a shipped file is invalid,
    /// which the test suite rules out.
    pub fn lexicon(name: &str) -> Option<Lexicon> {
        source(name).map(|text| Lexicon::from_json(text).expect("bundled lexicon is valid"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicons_load() {
        for name in builtin::NAMES {
            let text = builtin::source(name).unwrap();
            if let Err(e) = Lexicon::from_json(text) {
                panic!("{}: {}", name, e);
            }
        }
    }

    #[test]
    fn duplicate_alias_rejected() {
        let text = r#"{"version":"t1","subject_entries":[
            {"canonical":"external_libraries","aliases":["libs"]},
            {"canonical":"external_assets","aliases":["Libs"]}]}"#;
        match Lexicon::from_json(text) {
            Err(LexiconError::DuplicateAlias { alias, first, second, .. }) => {
                assert_eq!(alias, "libs");
                assert_eq!(first, "external_libraries");
                assert_eq!(second, "external_assets");
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn negative_example_may_not_be_own_alias() {
        let text = r#"{"version":"t1","subject_entries":[
            {"canonical":"local_food","aliases":["local food","restaurants"],"negative_examples":["restaurants"]}]}"#;
        assert!(matches!(Lexicon::from_json(text), Err(LexiconError::NegativeIsAlias { .. })));
    }

    #[test]
    fn fallback_key_is_reserved() {
        let text = r#"{"version":"t1","fields":[{"key":"X","kind":"map","type":"constraint","predicate":"allowed"}]}"#;
        assert!(matches!(Lexicon::from_json(text), Err(LexiconError::BadFieldKey { .. })));
    }
}
