//! Decoders turn one representation back into atoms. They see only the
//! representation text and its method label: the trait has no way to reach
//! the full text or the gold set.

use context_codec_core::ccl::{decode_lenient, parse_ccl, CclDocument};
use context_codec_core::codec::{extract, parse_packet, resolve_conflicts, segment, ChatHistory};
use context_codec_core::lexicon::Lexicon;
use context_codec_core::{Atom, AtomType, Status};
use serde::Serialize;

use crate::external::{normalize_records, parse_records, CommandError, CommandSpec};
use crate::fixtures::Method;
use crate::jsondoc::json_to_document;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeFailure {
    #[error("{decoder} cannot read {method}")]
    Unsupported { decoder: String, method: Method },
    #[error("decoder unavailable: {0}")]
    Unavailable(String),
    #[error("unreadable representation: {0}")]
    Invalid(String),
}

pub trait Decoder {
    /// Label recorded in reports for atoms decoded from `method`.
    fn name(&self, method: Method) -> String;

    /// Whether the decoder is independent of the lexicon and normalizer
    /// that produced the gold set.
    fn independent(&self) -> bool {
        false
    }

    fn decode(&mut self, method: Method, representation: &str) -> Result<Vec<Atom>, DecodeFailure>;
}

/// Splits text holding one or more `@CCL/` documents (or a whole packet)
/// and decodes every atom it can.
pub fn decode_ccl_text(text: &str, lex: &Lexicon) -> Result<Vec<Atom>, DecodeFailure> {
    if text.trim_start().starts_with(context_codec_core::codec::HEADER_PREFIX) {
        let p = parse_packet(text).map_err(|e| DecodeFailure::Invalid(e.to_string()))?;
        return Ok(p.decode(lex));
    }
    let mut sections: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.trim_start().starts_with("@CCL/") || sections.is_empty() {
            sections.push(String::new());
        }
        let cur = sections.last_mut().expect("pushed above");
        cur.push_str(line);
        cur.push('\n');
    }
    let mut atoms = Vec::new();
    for s in sections.iter().filter(|s| !s.trim().is_empty()) {
        let doc: CclDocument = parse_ccl(s).map_err(|e| DecodeFailure::Invalid(e.to_string()))?;
        atoms.extend(decode_lenient(&doc, lex).0);
    }
    Ok(atoms)
}

/// Reads CCL and grouped JSON with the lexicon's field mappings.
#[derive(Debug, Clone)]
pub struct ParserDecoder {
    pub lex: Lexicon,
}

impl Decoder for ParserDecoder {
    fn name(&self, _method: Method) -> String {
        "parser".to_string()
    }

    fn decode(&mut self, method: Method, text: &str) -> Result<Vec<Atom>, DecodeFailure> {
        match method {
            Method::CclCore | Method::CclMin => decode_ccl_text(text, &self.lex),
            Method::Json => {
                let doc = json_to_document(text, &self.lex).map_err(|e| DecodeFailure::Invalid(e.to_string()))?;
                Ok(decode_lenient(&doc, &self.lex).0)
            }
            m => Err(DecodeFailure::Unsupported { decoder: "parser".to_string(), method: m }),
        }
    }
}

/// Runs the rule extractor over free text and keeps the active, recognized
/// atoms. Unrecognized sentences are not commitments and are dropped.
#[derive(Debug, Clone)]
pub struct ExtractorDecoder {
    pub lex: Lexicon,
}

impl ExtractorDecoder {
    pub fn atoms(&self, text: &str) -> Vec<Atom> {
        let h = ChatHistory::from_transcript(text);
        let seg = segment(&h, 4);
        resolve_conflicts(&extract(&h, &seg, &self.lex))
            .into_iter()
            .filter(|a| a.status == Status::Active && a.atom.atom_type != AtomType::VerbatimSnippet)
            .map(|a| a.atom)
            .collect()
    }
}

impl Decoder for ExtractorDecoder {
    fn name(&self, _method: Method) -> String {
        "rules".to_string()
    }

    fn decode(&mut self, _method: Method, text: &str) -> Result<Vec<Atom>, DecodeFailure> {
        Ok(self.atoms(text))
    }
}

/// The default evaluation decoder: the parser for CCL and JSON, the rule
/// extractor for text.
#[derive(Debug, Clone)]
pub struct StandardDecoder {
    parser: ParserDecoder,
    rules: ExtractorDecoder,
}

impl StandardDecoder {
    pub fn new(lex: &Lexicon) -> Self {
        StandardDecoder { parser: ParserDecoder { lex: lex.clone() }, rules: ExtractorDecoder { lex: lex.clone() } }
    }
}

impl Decoder for StandardDecoder {
    fn name(&self, method: Method) -> String {
        if method.is_text() {
            self.rules.name(method)
        } else {
            self.parser.name(method)
        }
    }

    fn decode(&mut self, method: Method, text: &str) -> Result<Vec<Atom>, DecodeFailure> {
        if method.is_text() {
            self.rules.decode(method, text)
        } else {
            self.parser.decode(method, text)
        }
    }
}

#[derive(Serialize)]
struct DecodeRequest<'a> {
    method: &'a str,
    representation: &'a str,
}

/// An external decoder. Its records are normalized against the lexicon
/// before comparison.
#[derive(Debug, Clone)]
pub struct CommandDecoder {
    pub spec: CommandSpec,
    pub lex: Lexicon,
}

impl Decoder for CommandDecoder {
    fn name(&self, _method: Method) -> String {
        format!("command:{}", self.spec.program)
    }

    fn independent(&self) -> bool {
        true
    }

    fn decode(&mut self, method: Method, text: &str) -> Result<Vec<Atom>, DecodeFailure> {
        let body = serde_json::to_string(&DecodeRequest { method: method.as_str(), representation: text })
            .expect("requests serialize");
        let out = self.spec.run(&body).map_err(|e| match e {
            CommandError::Malformed(m) => DecodeFailure::Invalid(m),
            other => DecodeFailure::Unavailable(other.to_string()),
        })?;
        let (atoms, _) = parse_records(&out).map_err(|e| DecodeFailure::Invalid(e.to_string()))?;
        Ok(normalize_records(&atoms, &self.lex))
    }
}

/// Wraps a decoder and records every input it is given.
#[derive(Debug, Clone)]
pub struct ProbeDecoder<D> {
    pub inner: D,
    pub seen: Vec<(Method, String)>,
}

impl<D: Decoder> ProbeDecoder<D> {
    pub fn new(inner: D) -> Self {
        ProbeDecoder { inner, seen: Vec::new() }
    }
}

impl<D: Decoder> Decoder for ProbeDecoder<D> {
    fn name(&self, method: Method) -> String {
        self.inner.name(method)
    }

    fn independent(&self) -> bool {
        self.inner.independent()
    }

    fn decode(&mut self, method: Method, text: &str) -> Result<Vec<Atom>, DecodeFailure> {
        self.seen.push((method, text.to_string()));
        self.inner.decode(method, text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use context_codec_core::lexicon::builtin;

    #[test]
    fn core_and_min_sections_both_decode() {
        let lex = builtin::lexicon("trip").unwrap();
        let text = "@CCL/1\nBASE={allowed:[Baixa,Chiado]}\n@CCL/1m DAYS=4 P=walk,food\n";
        let atoms = decode_ccl_text(text, &lex).unwrap();
        assert_eq!(atoms.len(), 4);
        assert!(matches!(decode_ccl_text("@CCL/1\nDAYS=", &lex), Err(DecodeFailure::Invalid(_))));
    }

    #[test]
    fn parser_refuses_prose() {
        let lex = builtin::lexicon("trip").unwrap();
        let mut p = ParserDecoder { lex };
        assert!(matches!(p.decode(Method::Prose, "Plan a trip."), Err(DecodeFailure::Unsupported { .. })));
    }

    #[test]
    fn extractor_drops_snippets() {
        let lex = builtin::lexicon("trip").unwrap();
        let d = ExtractorDecoder { lex };
        let atoms = d.atoms("Plan a 4-day Lisbon trip. The weather is lovely.");
        assert!(!atoms.is_empty());
        assert!(atoms.iter().all(|a| a.atom_type != AtomType::VerbatimSnippet));
    }
}
