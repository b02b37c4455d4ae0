//! Lexical-token counting and external encoder counts.
//!
//! A lexical token is a maximal run of word characters (Unicode
//! alphanumerics and `_`) or any single other non-whitespace character.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const LEXICAL: &str = "lexical";

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn lexical_tokens(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if is_word(c) {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TokenCount {
    pub encoder_label: String,
    pub count: usize,
}

impl TokenCount {
    pub fn lexical(text: &str) -> Self {
        TokenCount { encoder_label: LEXICAL.to_string(), count: lexical_tokens(text) }
    }
}

/// One row of an external count table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub example_label: String,
    pub encoder_label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CountError {
    #[error("count table row {row} names unknown example `{label}`")]
    UnknownExample { row: usize, label: String },
    #[error("count table row {row} repeats ({example}, {encoder})")]
    Duplicate { row: usize, example: String, encoder: String },
}

/// Groups rows by example, rejecting labels outside `known`. Encoders a row
/// does not mention stay absent; nothing is imputed.
pub fn ingest_external_counts(
    rows: &[CountRow],
    known: &[&str],
) -> Result<BTreeMap<String, Vec<TokenCount>>, CountError> {
    let mut out: BTreeMap<String, Vec<TokenCount>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if !known.contains(&row.example_label.as_str()) {
            return Err(CountError::UnknownExample { row: i + 1, label: row.example_label.clone() });
        }
        let counts = out.entry(row.example_label.clone()).or_default();
        if counts.iter().any(|c| c.encoder_label == row.encoder_label) {
            return Err(CountError::Duplicate {
                row: i + 1,
                example: row.example_label.clone(),
                encoder: row.encoder_label.clone(),
            });
        }
        counts.push(TokenCount { encoder_label: row.encoder_label.clone(), count: row.count });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_examples() {
        assert_eq!(lexical_tokens(""), 0);
        assert_eq!(lexical_tokens("libs:false"), 3);
        assert_eq!(lexical_tokens("  a  b "), 2);
        assert_eq!(lexical_tokens("rows_read"), 1);
        assert_eq!(lexical_tokens("p.08"), 3);
        assert_eq!(lexical_tokens("{\"op\":\"add\"}"), 9);
    }

    #[test]
    fn ingest_groups_and_rejects_unknown() {
        let rows = alloc::vec![
            CountRow { example_label: "epidemic_ccl_core".into(), encoder_label: "cl100k".into(), count: 115 },
            CountRow { example_label: "epidemic_ccl_core".into(), encoder_label: "o200k".into(), count: 117 },
        ];
        let out = ingest_external_counts(&rows, &["epidemic_ccl_core"]).unwrap();
        assert_eq!(out["epidemic_ccl_core"].len(), 2);
        assert!(ingest_external_counts(&[], &[]).unwrap().is_empty());
        let bad = ingest_external_counts(&rows, &["other"]).unwrap_err();
        assert_eq!(bad, CountError::UnknownExample { row: 1, label: "epidemic_ccl_core".into() });
    }
}
