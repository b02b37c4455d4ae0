use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{is_bare_key, is_entry_key, is_number_literal, is_token_char, lexes_as_token, CclDocument, CclValue, Profile};

/// Core emission wraps brace contents past this column.
pub const WRAP_COLUMN: usize = 72;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("invalid entry key `{0}`")]
    BadKey(String),
    #[error("duplicate entry key `{0}`")]
    DuplicateKey(String),
    #[error("`{0}` cannot be written as a bare token")]
    BadToken(String),
    #[error("`{0}` is not a number literal")]
    BadNumber(String),
    #[error("empty flag set in `{0}`")]
    EmptyFlags(String),
    #[error("duplicate map key or flag `{0}`")]
    DuplicateMember(String),
    #[error("arrow source must be a token or list")]
    BadArrow,
    #[error("entry `{0}` is not min-shaped (expected opaque items)")]
    NotMinShaped(String),
}

fn write_string(out: &mut String, text: &str) {
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            ' '..='~' => out.push(c),
            _ => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
        }
    }
    out.push('"');
}

fn write_key(out: &mut String, key: &str) {
    if is_bare_key(key) {
        out.push_str(key);
    } else {
        write_string(out, key);
    }
}

fn write_value(out: &mut String, value: &CclValue) -> Result<(), EmitError> {
    match value {
        CclValue::Token(t) => {
            if !lexes_as_token(t) {
                return Err(EmitError::BadToken(t.clone()));
            }
            out.push_str(t);
        }
        CclValue::Str(s) => write_string(out, s),
        CclValue::Number(n) => {
            if !is_number_literal(n) {
                return Err(EmitError::BadNumber(n.clone()));
            }
            out.push_str(n);
        }
        CclValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        CclValue::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item)?;
            }
            out.push(']');
        }
        CclValue::Map(_) | CclValue::Flags(_) => {
            out.push('{');
            out.push_str(&brace_items(value)?.join(","));
            out.push('}');
        }
        CclValue::Arrow(src, dst) => {
            if !matches!(**src, CclValue::Token(_) | CclValue::List(_)) {
                return Err(EmitError::BadArrow);
            }
            if dst.is_empty() || !dst.chars().all(is_token_char) || dst.contains("->") {
                return Err(EmitError::BadToken(dst.clone()));
            }
            write_value(out, src)?;
            out.push_str("->");
            out.push_str(dst);
        }
    }
    Ok(())
}

/// Rendered members of a map or flag set, without braces.
fn brace_items(value: &CclValue) -> Result<Vec<String>, EmitError> {
    let mut items = Vec::new();
    match value {
        CclValue::Map(pairs) => {
            for (i, (k, v)) in pairs.iter().enumerate() {
                if pairs[..i].iter().any(|(k2, _)| k2 == k) {
                    return Err(EmitError::DuplicateMember(k.clone()));
                }
                let mut item = String::new();
                write_key(&mut item, k);
                item.push(':');
                write_value(&mut item, v)?;
                items.push(item);
            }
        }
        CclValue::Flags(flags) => {
            if flags.is_empty() {
                return Err(EmitError::EmptyFlags(String::new()));
            }
            for (i, f) in flags.iter().enumerate() {
                if flags[..i].contains(f) {
                    return Err(EmitError::DuplicateMember(f.clone()));
                }
                if !is_bare_key(f) {
                    return Err(EmitError::BadToken(f.clone()));
                }
                items.push(f.clone());
            }
        }
        _ => {}
    }
    Ok(items)
}

/// Renders one core value, e.g. `{w:80,h:50,cell:8}`.
pub fn emit_value(value: &CclValue) -> Result<String, EmitError> {
    let mut out = String::new();
    write_value(&mut out, value)?;
    Ok(out)
}

fn emit_core_entry(out: &mut String, key: &str, value: &CclValue) -> Result<(), EmitError> {
    let mut line = format!("{}=", key);
    write_value(&mut line, value)?;
    if line.len() <= WRAP_COLUMN || !matches!(value, CclValue::Map(_) | CclValue::Flags(_)) {
        out.push_str(&line);
        out.push('\n');
        return Ok(());
    }
    // Greedy fill of the outer brace's items; continuation lines align
    // under the first item.
    let indent = key.len() + 2;
    let items = brace_items(value)?;
    let mut current = format!("{}={{", key);
    let last = items.len() - 1;
    for (i, item) in items.iter().enumerate() {
        let piece = if i == last { format!("{}}}", item) } else { format!("{},", item) };
        if current.len() > indent && current.len() + piece.len() > WRAP_COLUMN {
            out.push_str(&current);
            out.push('\n');
            current = " ".repeat(indent);
        }
        current.push_str(&piece);
    }
    out.push_str(&current);
    out.push('\n');
    Ok(())
}

fn min_items(key: &str, value: &CclValue) -> Result<Vec<String>, EmitError> {
    let ok = |s: &str| !s.is_empty() && s.chars().all(|c| (c.is_ascii_graphic()) && c != ',');
    match value {
        CclValue::Token(t) if ok(t) => Ok(alloc::vec![t.clone()]),
        CclValue::List(items) if !items.is_empty() => items
            .iter()
            .map(|i| match i {
                CclValue::Token(t) if ok(t) => Ok(t.clone()),
                _ => Err(EmitError::NotMinShaped(key.to_string())),
            })
            .collect(),
        _ => Err(EmitError::NotMinShaped(key.to_string())),
    }
}

/// Serializes a document. Core: one entry per line. Min: the header token
/// followed by space-separated `KEY=item,item` entries, wrapped at the
/// same column.
pub fn emit_ccl(doc: &CclDocument, profile: Profile) -> Result<String, EmitError> {
    for (i, entry) in doc.entries.iter().enumerate() {
        if !is_entry_key(&entry.key) {
            return Err(EmitError::BadKey(entry.key.clone()));
        }
        if doc.entries[..i].iter().any(|e| e.key == entry.key) {
            return Err(EmitError::DuplicateKey(entry.key.clone()));
        }
    }
    let header = super::CclHeader { version: doc.header.version, profile };
    let mut out = header.to_string();
    match profile {
        Profile::Core => {
            out.push('\n');
            for entry in &doc.entries {
                if let CclValue::Flags(f) = &entry.value {
                    if f.is_empty() {
                        return Err(EmitError::EmptyFlags(entry.key.clone()));
                    }
                }
                emit_core_entry(&mut out, &entry.key, &entry.value)?;
            }
        }
        Profile::Min => {
            let mut line_len = out.len();
            for entry in &doc.entries {
                let piece = format!("{}={}", entry.key, min_items(&entry.key, &entry.value)?.join(","));
                if line_len + 1 + piece.len() > WRAP_COLUMN {
                    out.push('\n');
                    line_len = 0;
                } else {
                    out.push(' ');
                    line_len += 1;
                }
                line_len += piece.len();
                out.push_str(&piece);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccl::parse_ccl;

    #[test]
    fn empty_core_document() {
        assert_eq!(emit_ccl(&CclDocument::core(), Profile::Core).unwrap(), "@CCL/1\n");
    }

    #[test]
    fn long_braces_wrap_with_aligned_continuation() {
        let text = "@CCL/1\nRULE={move:random_walk,infection_radius:2,infection_prob:.08,recovery_steps:600}\n";
        let doc = parse_ccl(text).unwrap();
        let out = emit_ccl(&doc, Profile::Core).unwrap();
        assert!(out.lines().all(|l| l.len() <= WRAP_COLUMN));
        assert!(out.lines().nth(2).unwrap().starts_with("      "));
        assert_eq!(parse_ccl(&out).unwrap(), doc);
    }

    #[test]
    fn strings_escape_non_ascii() {
        let v = CclValue::Str("caf\u{e9} \"x\"".into());
        let text = emit_value(&v).unwrap();
        assert!(text.is_ascii());
        assert_eq!(crate::ccl::parse_value(&text).unwrap(), v);
    }

    #[test]
    fn rejects_unrenderable_tokens() {
        assert!(emit_value(&CclValue::Token("350".into())).is_err());
        assert!(emit_value(&CclValue::Token("a b".into())).is_err());
    }
}
