//! CCL: the compact ASCII rendering of canonical atom records.
//!
//! ```text
//! document := header (NL entry)*
//! header   := "@CCL/" version ["m"]
//! entry    := KEY "=" value
//! value    := token | number | bool | string | list | map | flags | arrow
//! list     := "[" [value ("," value)*] "]"
//! map      := "{" [key ":" value ("," key ":" value)*] "}"
//! flags    := "{" flag ("," flag)* "}"
//! arrow    := (token | list) "->" token
//! ```
//!
//! The min profile keeps the header and entries on space-separated lines;
//! entry values there are opaque comma-separated items that only the
//! lexicon's abbreviation table can interpret.

mod atoms;
mod emit;
pub mod min;
mod parse;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::atom::{Date, Decimal};

pub use atoms::{
    atoms_to_ccl, ccl_to_atoms, ccl_to_value, decode_lenient, decode_pair, expand_min, group_atoms, merge_documents,
    place_atoms, render_atoms, value_to_ccl, DecodeError, DecodeIssue, Placement, RawQuote, Rendered,
};
pub use emit::{emit_ccl, emit_value, EmitError, WRAP_COLUMN};
pub use parse::{parse_ccl, parse_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    Core,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CclHeader {
    pub version: u32,
    pub profile: Profile,
}

impl CclHeader {
    pub const CORE: CclHeader = CclHeader { version: 1, profile: Profile::Core };
    pub const MIN: CclHeader = CclHeader { version: 1, profile: Profile::Min };
}

impl fmt::Display for CclHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.profile {
            Profile::Core => write!(f, "@CCL/{}", self.version),
            Profile::Min => write!(f, "@CCL/{}m", self.version),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CclValue {
    Token(String),
    /// Quoted string, unescaped.
    Str(String),
    /// Number literal exactly as written (`.08`, `350`).
    Number(String),
    Bool(bool),
    List(Vec<CclValue>),
    Map(Vec<(String, CclValue)>),
    Flags(Vec<String>),
    Arrow(alloc::boxed::Box<CclValue>, String),
}

impl CclValue {
    pub fn token(text: impl Into<String>) -> CclValue {
        CclValue::Token(text.into())
    }

    pub fn map_get(&self, key: &str) -> Option<&CclValue> {
        match self {
            CclValue::Map(pairs) => pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CclEntry {
    pub key: String,
    pub value: CclValue,
}

impl CclEntry {
    pub fn new(key: impl Into<String>, value: CclValue) -> Self {
        CclEntry { key: key.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CclDocument {
    pub header: CclHeader,
    pub entries: Vec<CclEntry>,
}

impl CclDocument {
    pub fn new(profile: Profile) -> Self {
        CclDocument { header: CclHeader { version: 1, profile }, entries: Vec::new() }
    }

    pub fn core() -> Self {
        Self::new(Profile::Core)
    }

    pub fn get(&self, key: &str) -> Option<&CclValue> {
        self.entries.iter().find(|e| e.key == key).map(|e| &e.value)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut CclValue> {
        self.entries.iter_mut().find(|e| e.key == key).map(|e| &mut e.value)
    }

    /// Appends an entry; returns false (and changes nothing) if the key is
    /// already present.
    pub fn push(&mut self, key: impl Into<String>, value: CclValue) -> bool {
        let key = key.into();
        if self.get(&key).is_some() {
            return false;
        }
        self.entries.push(CclEntry { key, value });
        true
    }

    pub fn remove(&mut self, key: &str) -> Option<CclValue> {
        let pos = self.entries.iter().position(|e| e.key == key)?;
        Some(self.entries.remove(pos).value)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CclErrorKind {
    Lexical,
    Unbalanced,
    DuplicateKey,
    Header,
    Syntax,
}

/// Parse failure with a 1-based position and the offending text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message} (at `{token}`)")]
pub struct CclError {
    pub kind: CclErrorKind,
    pub line: usize,
    pub column: usize,
    pub token: String,
    pub message: String,
}

pub(crate) fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-' | '/')
}

pub fn is_entry_key(key: &str) -> bool {
    crate::lexicon::is_field_key(key)
}

pub(crate) fn is_number_literal(text: &str) -> bool {
    Decimal::parse(text).is_some()
}

/// True when `text` lexes as a single bare token in core CCL (not a number,
/// boolean or quoted string).
pub fn lexes_as_token(text: &str) -> bool {
    !text.is_empty()
        && text.chars().all(is_token_char)
        && !text.contains("->")
        && !is_number_literal(text)
        && text != "true"
        && text != "false"
}

/// Enum-shaped text: a bare token that does not read back as a date.
pub fn is_bare_token(text: &str) -> bool {
    lexes_as_token(text) && Date::parse_iso(text).is_none()
}

/// Map keys print bare when they lex as one run of token characters.
pub(crate) fn is_bare_key(text: &str) -> bool {
    !text.is_empty() && text.chars().all(is_token_char) && !text.contains("->")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_token_shape() {
        assert!(is_bare_token("code.web.canvas.epidemic_sim"));
        assert!(is_bare_token("1html.run.codeonly"));
        assert!(is_bare_token("early_Oct"));
        assert!(!is_bare_token(".08"));
        assert!(!is_bare_token("350"));
        assert!(!is_bare_token("true"));
        assert!(!is_bare_token("2024-05-17"));
        assert!(lexes_as_token("2024-05-17"));
        assert!(!is_bare_token("a->b"));
        assert!(!is_bare_token("two words"));
        assert!(!is_bare_token(""));
    }
}
