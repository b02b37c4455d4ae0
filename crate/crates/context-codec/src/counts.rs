//! External tokenizer count tables: CSV rows of
//! `example_label,encoder_label,count`, produced outside this crate.

use std::collections::BTreeMap;
use std::io::Read;

use anyhow::{Context, Result};
use context_codec_core::tokenize::{ingest_external_counts, CountRow, TokenCount};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    example_label: String,
    encoder_label: String,
    count: usize,
}

/// Example label → counts per encoder.
pub type ExternalCounts = BTreeMap<String, Vec<TokenCount>>;

pub fn read_count_table<R: Read>(reader: R, known: &[&str]) -> Result<ExternalCounts> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let r = rec.with_context(|| format!("count table row {}", i + 1))?;
        rows.push(CountRow { example_label: r.example_label, encoder_label: r.encoder_label, count: r.count });
    }
    Ok(ingest_external_counts(&rows, known)?)
}

pub fn lookup(counts: &ExternalCounts, example: &str, encoder: &str) -> Option<usize> {
    counts.get(example)?.iter().find(|c| c.encoder_label == encoder).map(|c| c.count)
}

/// The published counts for the printed examples, as a count table.
pub const PUBLISHED_TABLE: &str = include_str!("../fixtures/counts/printed_examples.csv");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_table_reads() {
        let labels: Vec<&str> = crate::fixtures::printed_examples().iter().map(|p| p.label).collect();
        let counts = read_count_table(PUBLISHED_TABLE.as_bytes(), &labels).unwrap();
        assert_eq!(lookup(&counts, "epidemic_ccl_core", "cl100k"), Some(115));
        assert_eq!(lookup(&counts, "epidemic_ccl_core", "o200k"), Some(117));
        assert_eq!(lookup(&counts, "diff_patch", "o200k"), Some(78));
        assert_eq!(lookup(&counts, "diff_patch", "p50k"), None);
    }

    #[test]
    fn empty_and_unknown() {
        let empty = read_count_table("example_label,encoder_label,count\n".as_bytes(), &[]).unwrap();
        assert!(empty.is_empty());
        let err = read_count_table("example_label,encoder_label,count\nnope,cl100k,3\n".as_bytes(), &["x"]).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
