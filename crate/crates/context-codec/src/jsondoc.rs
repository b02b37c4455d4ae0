//! Grouped-document JSON: the CCL field grouping spelled as a JSON object,
//! one member per field key. This is the `json` representation of a case.

use std::fmt;

use context_codec_core::ccl::{is_bare_token, CclDocument, CclValue};
use context_codec_core::diff::value_json;
use context_codec_core::lexicon::{FieldKind, Lexicon};
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonDocError {
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("document must be a JSON object")]
    NotAnObject,
    #[error("`{0}`: null is not a value")]
    Null(String),
}

/// JSON value that keeps object members in input order.
#[derive(Debug, Clone, PartialEq)]
enum Ordered {
    Null,
    Bool(bool),
    Number(String),
    String(String),
    Array(Vec<Ordered>),
    Object(Vec<(String, Ordered)>),
}

impl<'de> Deserialize<'de> for Ordered {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(OrderedVisitor)
    }
}

struct OrderedVisitor;

impl<'de> Visitor<'de> for OrderedVisitor {
    type Value = Ordered;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E: de::Error>(self) -> Result<Ordered, E> {
        Ok(Ordered::Null)
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Ordered, E> {
        Ok(Ordered::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Ordered, E> {
        Ok(Ordered::Number(v.to_string()))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Ordered, E> {
        Ok(Ordered::Number(v.to_string()))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Ordered, E> {
        Ok(Ordered::Number(serde_json::Number::from_f64(v).map_or_else(|| v.to_string(), |n| n.to_string())))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Ordered, E> {
        Ok(Ordered::String(v.to_string()))
    }

    fn visit_string<E: de::Error>(self, v: String) -> Result<Ordered, E> {
        Ok(Ordered::String(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Ordered, A::Error> {
        let mut items = Vec::new();
        while let Some(v) = seq.next_element()? {
            items.push(v);
        }
        Ok(Ordered::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Ordered, A::Error> {
        let mut pairs = Vec::new();
        while let Some((k, v)) = map.next_entry::<String, Ordered>()? {
            pairs.push((k, v));
        }
        Ok(Ordered::Object(pairs))
    }
}

/// One field per line; values in compact JSON.
pub fn document_to_json(doc: &CclDocument) -> String {
    if doc.entries.is_empty() {
        return "{}\n".to_string();
    }
    let mut out = String::from("{\n");
    for (i, e) in doc.entries.iter().enumerate() {
        out.push_str("  ");
        value_json(&CclValue::Str(e.key.clone()), &mut out);
        out.push_str(": ");
        value_json(&e.value, &mut out);
        if i + 1 < doc.entries.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn to_ccl(v: &Ordered, at: &str) -> Result<CclValue, JsonDocError> {
    Ok(match v {
        Ordered::Null => return Err(JsonDocError::Null(at.to_string())),
        Ordered::Bool(b) => CclValue::Bool(*b),
        Ordered::Number(n) => CclValue::Number(n.clone()),
        Ordered::String(s) if is_bare_token(s) => CclValue::Token(s.clone()),
        Ordered::String(s) => CclValue::Str(s.clone()),
        Ordered::Array(items) => CclValue::List(items.iter().map(|i| to_ccl(i, at)).collect::<Result<_, _>>()?),
        Ordered::Object(pairs) => {
            if let [(fk, from), (tk, Ordered::String(to))] = pairs.as_slice() {
                if fk == "$from" && tk == "$to" && is_bare_token(to) {
                    return Ok(CclValue::Arrow(Box::new(to_ccl(from, at)?), to.clone()));
                }
            }
            CclValue::Map(pairs.iter().map(|(k, v)| Ok((k.clone(), to_ccl(v, at)?))).collect::<Result<_, _>>()?)
        }
    })
}

/// Reads a grouped document. String arrays under flag fields become flag
/// sets again; everything else maps structurally.
pub fn json_to_document(text: &str, lex: &Lexicon) -> Result<CclDocument, JsonDocError> {
    let root: Ordered = serde_json::from_str(text).map_err(|e| JsonDocError::Syntax(e.to_string()))?;
    let Ordered::Object(fields) = root else { return Err(JsonDocError::NotAnObject) };
    let mut doc = CclDocument::core();
    for (key, v) in &fields {
        let flags = lex.field(key).is_some_and(|f| f.kind == FieldKind::Flags);
        let value = match v {
            Ordered::Array(items) if flags && items.iter().all(|i| matches!(i, Ordered::String(s) if is_bare_token(s))) => {
                CclValue::Flags(
                    items
                        .iter()
                        .map(|i| match i {
                            Ordered::String(s) => s.clone(),
                            _ => unreachable!(),
                        })
                        .collect(),
                )
            }
            other => to_ccl(other, key)?,
        };
        doc.push(key.clone(), value);
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use context_codec_core::ccl::{ccl_to_atoms, parse_ccl};
    use context_codec_core::lexicon::builtin;

    #[test]
    fn trip_document_round_trips() {
        let lex = builtin::lexicon("trip").unwrap();
        let doc = parse_ccl("@CCL/1\nDAYS=4\nPREF={walkable,bookstores}\nBASE={allowed:[Baixa,Chiado]}\n").unwrap();
        let json = document_to_json(&doc);
        assert_eq!(
            json,
            "{\n  \"DAYS\": 4,\n  \"PREF\": [\"walkable\",\"bookstores\"],\n  \"BASE\": {\"allowed\":[\"Baixa\",\"Chiado\"]}\n}\n"
        );
        assert_eq!(json_to_document(&json, &lex).unwrap(), doc);
    }

    #[test]
    fn decimals_and_arrows_survive() {
        let lex = builtin::lexicon("datacleaning").unwrap();
        let doc = parse_ccl("@CCL/1\nNORM={date:[ymd,mdy]->iso,revenue_usd:decimal2,invalid_revenue:\"0.00\"}\n").unwrap();
        let back = json_to_document(&document_to_json(&doc), &lex).unwrap();
        assert_eq!(ccl_to_atoms(&back, &lex).unwrap(), ccl_to_atoms(&doc, &lex).unwrap());
        let webgen = builtin::lexicon("webgen").unwrap();
        let doc = parse_ccl("@CCL/1\nRULE={infection_prob:.08}\n").unwrap();
        assert!(document_to_json(&doc).contains("0.08"));
        let a = ccl_to_atoms(&json_to_document(&document_to_json(&doc), &webgen).unwrap(), &webgen).unwrap();
        assert!(context_codec_core::atom::equivalent(&a[0], &ccl_to_atoms(&doc, &webgen).unwrap()[0]));
    }

    #[test]
    fn rejects_non_objects_and_nulls() {
        let lex = builtin::lexicon("trip").unwrap();
        assert_eq!(json_to_document("[1]", &lex), Err(JsonDocError::NotAnObject));
        assert_eq!(json_to_document("{\"DAYS\":null}", &lex), Err(JsonDocError::Null("DAYS".into())));
        assert!(matches!(json_to_document("{", &lex), Err(JsonDocError::Syntax(_))));
    }
}
