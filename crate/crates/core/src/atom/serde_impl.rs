//! Canonical JSON record layer.
//!
//! Values map to JSON naturally except exact decimals and dates, which use
//! single-key objects `{"$decimal":"0.00"}` and `{"$date":"2024-05-17"}`.
//! Plain JSON strings become enum tokens when they have bare-token shape and
//! free strings otherwise; the two compare equal under `value_equiv`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Atom, AtomId, AtomType, Date, Decimal, Evidence, Modality, Span, Status, Value};

macro_rules! serde_via_str {
    ($($ty:ty),+) => {$(
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(de::Error::custom)
            }
        }
    )+};
}

serde_via_str!(AtomType, Modality, Status);

impl Serialize for AtomId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AtomId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(de::Error::custom)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Decimal(d) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("$decimal", &d.to_string())?;
                m.end()
            }
            Value::Date(d) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("$date", &d.to_string())?;
                m.end()
            }
            Value::Enum(t) | Value::Str(t) => s.serialize_str(t),
            Value::List(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            Value::Map(pairs) => {
                let mut m = s.serialize_map(Some(pairs.len()))?;
                for (k, v) in pairs {
                    m.serialize_entry(k, v)?;
                }
                m.end()
            }
        }
    }
}

/// Enum token when `text` has bare CCL token shape, free string otherwise.
pub fn text_value(text: &str) -> Value {
    if crate::ccl::is_bare_token(text) {
        Value::Enum(text.to_string())
    } else {
        Value::Str(text.to_string())
    }
}

struct ValueVisitor;

impl<'de> Visitor<'de> for ValueVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an atom value")
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
        Ok(Value::Int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
        match i64::try_from(v) {
            Ok(i) => Ok(Value::Int(i)),
            Err(_) => Ok(Value::Decimal(Decimal::new(i128::from(v), 0))),
        }
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Value, E> {
        // Shortest round-trip spelling of the float.
        let text = format!("{}", v);
        Decimal::parse(&text)
            .map(Value::Decimal)
            .ok_or_else(|| E::custom(format!("number {} is not representable as an exact decimal", text)))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
        Ok(text_value(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element::<Value>()? {
            items.push(item);
        }
        Ok(Value::List(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut pairs: Vec<(String, Value)> = Vec::new();
        while let Some(key) = map.next_key::<String>()? {
            let value = map.next_value::<Value>()?;
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(de::Error::custom(format!("duplicate map key `{}`", key)));
            }
            pairs.push((key, value));
        }
        if pairs.len() == 1 {
            let (key, inner) = &pairs[0];
            let text = inner.as_text();
            match key.as_str() {
                "$decimal" => {
                    return text
                        .and_then(Decimal::parse)
                        .map(Value::Decimal)
                        .ok_or_else(|| de::Error::custom("invalid $decimal literal"));
                }
                "$date" => {
                    return text
                        .and_then(Date::parse_iso)
                        .map(Value::Date)
                        .ok_or_else(|| de::Error::custom("invalid $date literal"));
                }
                _ => {}
            }
        }
        Ok(Value::Map(pairs))
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(ValueVisitor)
    }
}

impl Serialize for Evidence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let len = 1 + usize::from(self.span.is_some()) + usize::from(self.quote.is_some());
        let mut m = s.serialize_map(Some(len))?;
        m.serialize_entry("source_id", &self.source_id)?;
        if let Some(span) = self.span {
            m.serialize_entry("span", &[span.start, span.end])?;
        }
        if let Some(quote) = &self.quote {
            m.serialize_entry("quote", quote)?;
        }
        m.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EvidenceRepr {
    Reference(String),
    Full {
        source_id: String,
        #[serde(default)]
        span: Option<[usize; 2]>,
        #[serde(default)]
        quote: Option<String>,
    },
}

impl<'de> Deserialize<'de> for Evidence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match EvidenceRepr::deserialize(d)? {
            EvidenceRepr::Reference(source_id) => Evidence::reference(source_id),
            EvidenceRepr::Full { source_id, span, quote } => Evidence {
                source_id,
                span: span.map(|[start, end]| Span { start, end }),
                quote,
            },
        })
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Atom", 10)?;
        st.serialize_field("type", &self.atom_type)?;
        st.serialize_field("subject", &self.subject)?;
        st.serialize_field("predicate", &self.predicate)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("modality", &self.modality)?;
        st.serialize_field("scope", &self.scope)?;
        st.serialize_field("evidence", &self.evidence)?;
        st.serialize_field("confidence", &self.confidence)?;
        st.serialize_field("criticality", &self.criticality)?;
        st.serialize_field("safety", &self.safety)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct AtomRepr {
    #[serde(rename = "type")]
    atom_type: AtomType,
    subject: String,
    predicate: String,
    value: Value,
    modality: Modality,
    scope: String,
    #[serde(default)]
    evidence: Option<Evidence>,
    confidence: f64,
    criticality: u8,
    #[serde(default)]
    safety: bool,
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = AtomRepr::deserialize(d)?;
        Ok(Atom {
            atom_type: r.atom_type,
            subject: r.subject,
            predicate: r.predicate,
            value: r.value,
            modality: r.modality,
            scope: r.scope,
            evidence: r.evidence,
            confidence: r.confidence,
            criticality: r.criticality,
            safety: r.safety,
        })
    }
}

/// Serializes atoms as a canonical record file: a JSON array, one object per
/// atom, newline-terminated.
pub fn to_records_json(atoms: &[Atom]) -> String {
    let mut out = String::from("[\n");
    for (i, atom) in atoms.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&serde_json::to_string(atom).expect("atoms always serialize"));
        if i + 1 < atoms.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

pub fn from_records_json(text: &str) -> Result<Vec<Atom>, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn example_record_parses_and_validates() {
        let text = r#"{
          "type": "constraint",
          "subject": "external_libraries",
          "predicate": "allowed",
          "value": false,
          "modality": "must",
          "scope": "generated_artifact",
          "evidence": "user_turn_3",
          "confidence": 0.96,
          "criticality": 5
        }"#;
        let atom: Atom = serde_json::from_str(text).unwrap();
        assert_eq!(atom.value, Value::Bool(false));
        assert_eq!(atom.evidence, Some(Evidence::reference("user_turn_3")));
        assert!(!atom.safety);
        assert_eq!(super::super::validate(&atom), Ok(()));
    }

    #[test]
    fn record_file_round_trip_keeps_exact_values() {
        let atoms = vec![
            Atom::new(AtomType::Procedure, "invalid_revenue", "equals", Value::Str("0.00".into()), "generated_artifact"),
            Atom::new(AtomType::Procedure, "infection_prob", "equals", Value::Decimal(Decimal::parse(".08").unwrap()), "t"),
            Atom::new(AtomType::State, "start", "equals", Value::Date(Date::new(2024, 10, 1).unwrap()), "t")
                .with_evidence(Evidence::new("m1", 0, 4, "Plan")),
            Atom::new(
                AtomType::Preference,
                "color_map",
                "equals",
                Value::Map(vec![("S".into(), Value::enum_token("blue")), ("I".into(), Value::enum_token("red"))]),
                "t",
            ),
        ];
        let text = to_records_json(&atoms);
        assert!(text.ends_with("]\n"));
        let back = from_records_json(&text).unwrap();
        assert_eq!(back, atoms);
        assert!(text.contains(r#""$decimal":"0.08""#));
    }

    #[test]
    fn plain_strings_pick_enum_or_string() {
        assert_eq!(text_value("Canvas"), Value::Enum("Canvas".into()));
        assert_eq!(text_value("two words"), Value::Str("two words".into()));
        assert_eq!(text_value("350"), Value::Str("350".into()));
    }
}
