//! Packet layout, budgeted encoding, parsing and verification.
//!
//! ```text
//! @PACKET budget=120 tokens=87 lexicon=webgen-1
//! @CCL/1
//! TASK=web.sim.epidemic
//! ...
//! @CCL/1m SIM=agents350,...
//! RAW:
//! - constraint/external_libraries/allowed/generated_artifact m1@0-21 "no external libraries"
//! OMITTED:
//! - preference/viewpoints/desired/user_preferences
//! SUPERSEDED:
//! - {"type":"decision",...}
//! ```
//!
//! Only the body between the header and the audit sections (`OMITTED:`,
//! `SUPERSEDED:`) is token-counted.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::segment::{ChatHistory, Message, Role};
use super::{CodecAtom, CodecError, Fallback};
use crate::atom::{atom_id, conflicts, equivalent, validate, Atom, AtomId};
use crate::ccl::{decode_pair, emit_ccl, parse_ccl, render_atoms, CclDocument, Profile};
use crate::lexicon::Lexicon;
use crate::metrics::{recoverable, GoldAnnotation};
use crate::normalize::normalize_phrase;
use crate::scoring::RenderDecision;
use crate::tokenize::lexical_tokens;

pub const HEADER_PREFIX: &str = "@PACKET";

/// One preserved evidence span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLine {
    pub id: AtomId,
    pub source: String,
    pub start: usize,
    pub end: usize,
    pub quote: String,
}

/// Uncompressed history carried when the codec gives up.
#[derive(Debug, Clone, PartialEq)]
pub struct Passthrough {
    pub messages: Vec<Message>,
    pub records: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub budget: usize,
    /// Lexical tokens of the body.
    pub tokens: usize,
    pub lexicon: String,
    pub core: CclDocument,
    pub min: Option<CclDocument>,
    pub raw: Vec<RawLine>,
    pub omitted: Vec<AtomId>,
    pub superseded: Vec<Atom>,
    pub fallback: Option<Fallback>,
    pub passthrough: Option<Passthrough>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PacketError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("packet CCL: {0}")]
    Ccl(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> PacketError {
    PacketError::Syntax { line, msg: msg.into() }
}

fn quote_json(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

impl Packet {
    pub fn empty(budget: usize, lexicon: &str) -> Self {
        Packet {
            budget,
            tokens: 0,
            lexicon: lexicon.to_string(),
            core: CclDocument::core(),
            min: None,
            raw: Vec::new(),
            omitted: Vec::new(),
            superseded: Vec::new(),
            fallback: None,
            passthrough: None,
        }
    }

    /// The history itself plus the extracted records, unbudgeted.
    pub fn passthrough(h: &ChatHistory, atoms: &[CodecAtom], superseded: &[Atom], budget: usize, lexicon: &str) -> Self {
        let mut p = Packet::empty(budget, lexicon);
        p.superseded = superseded.to_vec();
        p.fallback = Some(Fallback::Passthrough);
        p.passthrough = Some(Passthrough {
            messages: h.messages.clone(),
            records: atoms.iter().map(|a| a.atom.clone()).collect(),
        });
        p.tokens = lexical_tokens(&p.body());
        p
    }

    pub fn is_uncompressed(&self) -> bool {
        self.passthrough.is_some()
    }

    /// The token-counted part of the packet.
    pub fn body(&self) -> String {
        let mut out = String::new();
        if let Some(pt) = &self.passthrough {
            out.push_str("HISTORY:\n");
            for m in &pt.messages {
                let _ = writeln!(out, "- {} {} {}", m.id, m.role, quote_json(&m.text));
            }
            out.push_str("RECORDS:\n");
            for a in &pt.records {
                let _ = writeln!(out, "- {}", serde_json::to_string(a).expect("atoms always serialize"));
            }
            return out;
        }
        if !self.core.is_empty() {
            out.push_str(&emit_ccl(&self.core, Profile::Core).expect("rendered documents are valid"));
        }
        if let Some(min) = &self.min {
            out.push_str(&emit_ccl(min, Profile::Min).expect("rendered documents are valid"));
        }
        if !self.raw.is_empty() {
            out.push_str("RAW:\n");
            for r in &self.raw {
                let _ = writeln!(out, "- {} {}@{}-{} {}", r.id, r.source, r.start, r.end, quote_json(&r.quote));
            }
        }
        out
    }

    /// Every atom the packet states, before any verification.
    pub fn decode(&self, lex: &Lexicon) -> Vec<Atom> {
        if let Some(pt) = &self.passthrough {
            return pt.records.clone();
        }
        let (mut atoms, _) = decode_pair(&self.core, self.min.as_ref(), lex);
        atoms.extend(self.raw_atoms(&atoms, lex));
        atoms
    }

    /// Atoms re-read from RAW lines whose ids the CCL body does not carry.
    fn raw_atoms(&self, decoded: &[Atom], lex: &Lexicon) -> Vec<Atom> {
        let mut out: Vec<Atom> = Vec::new();
        for r in &self.raw {
            if decoded.iter().chain(out.iter()).any(|a| atom_id(a) == r.id) {
                continue;
            }
            out.extend(
                normalize_phrase(&r.quote, &r.source, r.start, lex)
                    .into_iter()
                    .map(|n| n.atom)
                    .filter(|a| atom_id(a) == r.id)
                    .take(1),
            );
        }
        out
    }
}

/// Full packet text: header, body, audit sections.
pub fn render_packet(p: &Packet) -> String {
    let mut out = String::new();
    let _ = write!(out, "{} budget={} tokens={} lexicon={}", HEADER_PREFIX, p.budget, p.tokens, p.lexicon);
    if let Some(f) = p.fallback {
        let _ = write!(out, " fallback={}", f.as_str());
    }
    if p.is_uncompressed() {
        out.push_str(" uncompressed");
    }
    out.push('\n');
    out.push_str(&p.body());
    if !p.omitted.is_empty() {
        out.push_str("OMITTED:\n");
        for id in &p.omitted {
            let _ = writeln!(out, "- {}", id);
        }
    }
    if !p.superseded.is_empty() {
        out.push_str("SUPERSEDED:\n");
        for a in &p.superseded {
            let _ = writeln!(out, "- {}", serde_json::to_string(a).expect("atoms always serialize"));
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Ccl,
    Raw,
    History,
    Records,
    Omitted,
    Superseded,
}

fn parse_raw_line(n: usize, item: &str) -> Result<RawLine, PacketError> {
    let (id, rest) = item.split_once(' ').ok_or_else(|| syntax(n, "RAW line needs id, source and quote"))?;
    let id: AtomId = id.parse().map_err(|_| syntax(n, "bad atom id"))?;
    let (loc, quote) = rest.split_once(' ').ok_or_else(|| syntax(n, "RAW line needs a quote"))?;
    let (source, range) = loc.rsplit_once('@').ok_or_else(|| syntax(n, "RAW location is source@start-end"))?;
    let (s, e) = range.split_once('-').ok_or_else(|| syntax(n, "RAW location is source@start-end"))?;
    let start = s.parse().map_err(|_| syntax(n, "bad span start"))?;
    let end = e.parse().map_err(|_| syntax(n, "bad span end"))?;
    let quote: String = serde_json::from_str(quote).map_err(|_| syntax(n, "quote is not a JSON string"))?;
    Ok(RawLine { id, source: source.to_string(), start, end, quote })
}

/// Inverse of [`render_packet`].
pub fn parse_packet(text: &str) -> Result<Packet, PacketError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| syntax(1, "empty packet"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(HEADER_PREFIX) {
        return Err(syntax(1, "missing @PACKET header"));
    }
    let mut p = Packet::empty(0, "");
    let mut uncompressed = false;
    for f in fields {
        match f.split_once('=') {
            Some(("budget", v)) => p.budget = v.parse().map_err(|_| syntax(1, "bad budget"))?,
            Some(("tokens", v)) => p.tokens = v.parse().map_err(|_| syntax(1, "bad token count"))?,
            Some(("lexicon", v)) => p.lexicon = v.to_string(),
            Some(("fallback", v)) => {
                p.fallback = Some(match v {
                    "raw_spans" => Fallback::RawSpans,
                    "budget_raised" => Fallback::BudgetRaised,
                    "passthrough" => Fallback::Passthrough,
                    _ => return Err(syntax(1, "unknown fallback")),
                })
            }
            None if f == "uncompressed" => uncompressed = true,
            _ => return Err(syntax(1, alloc::format!("unknown header field `{}`", f))),
        }
    }
    let mut core_text = String::new();
    let mut min_text = String::new();
    let mut in_min = false;
    let mut section = Section::Ccl;
    let mut pt = Passthrough { messages: Vec::new(), records: Vec::new() };
    for (n, line) in lines {
        let next = match line {
            "RAW:" => Some(Section::Raw),
            "HISTORY:" => Some(Section::History),
            "RECORDS:" => Some(Section::Records),
            "OMITTED:" => Some(Section::Omitted),
            "SUPERSEDED:" => Some(Section::Superseded),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        if section == Section::Ccl {
            if line.starts_with("@CCL/") && line[5..].split_whitespace().next().is_some_and(|v| v.ends_with('m')) {
                in_min = true;
            } else if line.starts_with("@CCL/") {
                in_min = false;
            }
            let target = if in_min { &mut min_text } else { &mut core_text };
            target.push_str(line);
            target.push('\n');
            continue;
        }
        let item = line.strip_prefix("- ").ok_or_else(|| syntax(n, "section items start with `- `"))?;
        match section {
            Section::Ccl => unreachable!(),
            Section::Raw => p.raw.push(parse_raw_line(n, item)?),
            Section::History => {
                let mut parts = item.splitn(3, ' ');
                let (id, role, text) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return Err(syntax(n, "history line is `- id role \"text\"`")),
                };
                let role: Role = role.parse().map_err(|e: String| syntax(n, e))?;
                let text: String = serde_json::from_str(text).map_err(|_| syntax(n, "text is not a JSON string"))?;
                pt.messages.push(Message::new(id, role, text));
            }
            Section::Records | Section::Superseded => {
                let atom: Atom = serde_json::from_str(item).map_err(|e| syntax(n, e.to_string()))?;
                if section == Section::Records {
                    pt.records.push(atom);
                } else {
                    p.superseded.push(atom);
                }
            }
            Section::Omitted => p.omitted.push(item.parse().map_err(|_| syntax(n, "bad atom id"))?),
        }
    }
    if !core_text.trim().is_empty() {
        p.core = parse_ccl(&core_text).map_err(|e| PacketError::Ccl(e.to_string()))?;
    }
    if !min_text.trim().is_empty() {
        p.min = Some(parse_ccl(&min_text).map_err(|e| PacketError::Ccl(e.to_string()))?);
    }
    if uncompressed {
        p.passthrough = Some(pt);
    }
    Ok(p)
}

#[allow(clippy::too_many_arguments)]
fn build(
    atoms: &[CodecAtom],
    decisions: &[RenderDecision],
    keep: &[usize],
    demote: bool,
    budget: usize,
    lex: &Lexicon,
    h: &ChatHistory,
    label: &str,
) -> Packet {
    let chosen: Vec<Atom> = keep.iter().map(|&i| atoms[i].atom.clone()).collect();
    let decs: Vec<RenderDecision> = keep.iter().map(|&i| decisions[i]).collect();
    let r = render_atoms(&chosen, &decs, lex, demote);
    let mut p = Packet::empty(budget, label);
    p.core = r.core;
    p.min = r.min;
    p.raw = r
        .raw
        .into_iter()
        .filter_map(|q| {
            let msg = h.messages.iter().find(|m| m.id == q.evidence.source_id);
            if q.whole_message {
                let m = msg?;
                return Some(RawLine {
                    id: q.id,
                    source: m.id.clone(),
                    start: 0,
                    end: m.text.chars().count(),
                    quote: m.text.clone(),
                });
            }
            let span = q.evidence.span?;
            let quote = match (&q.evidence.quote, msg) {
                (Some(t), _) => t.clone(),
                (None, Some(m)) => m.text.chars().skip(span.start).take(span.end - span.start).collect(),
                (None, None) => return None,
            };
            Some(RawLine { id: q.id, source: q.evidence.source_id, start: span.start, end: span.end, quote })
        })
        .collect();
    let kept: Vec<bool> = (0..atoms.len()).map(|i| keep.contains(&i)).collect();
    p.omitted = atoms.iter().zip(&kept).filter(|(_, k)| !**k).map(|(a, _)| atom_id(&a.atom)).collect();
    p.tokens = lexical_tokens(&p.body());
    p
}

/// Renders `atoms` (rank order) within `budget` lexical tokens: the full
/// core rendering, then with min demotion, then greedily by rank with every
/// safety atom forced in. Fails only when the safety atoms alone overflow.
pub fn encode_under_budget(
    atoms: &[CodecAtom],
    decisions: &[RenderDecision],
    budget: usize,
    lex: &Lexicon,
    h: &ChatHistory,
    label: &str,
) -> Result<Packet, CodecError> {
    let all: Vec<usize> = (0..atoms.len()).collect();
    for demote in [false, true] {
        let p = build(atoms, decisions, &all, demote, budget, lex, h, label);
        if p.tokens <= budget {
            return Ok(p);
        }
    }
    let mut keep: Vec<usize> = all.iter().copied().filter(|&i| atoms[i].atom.safety).collect();
    let mut best = build(atoms, decisions, &keep, true, budget, lex, h, label);
    if best.tokens > budget {
        return Err(CodecError::BudgetInfeasible { budget, needed: best.tokens });
    }
    for i in all.into_iter().filter(|&i| !atoms[i].atom.safety) {
        let mut trial = keep.clone();
        trial.push(i);
        trial.sort_unstable();
        let p = build(atoms, decisions, &trial, true, budget, lex, h, label);
        if p.tokens <= budget {
            keep = trial;
            best = p;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Schema,
    Conflict,
    SafetyUncovered,
    Unrecovered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyFailure {
    pub kind: FailureKind,
    pub id: Option<AtomId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub failures: Vec<VerifyFailure>,
    pub decoded: Vec<Atom>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failing_ids(&self) -> Vec<AtomId> {
        let mut ids: Vec<AtomId> = self.failures.iter().filter_map(|f| f.id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Decodes the packet and checks it against the atoms it was built from:
/// schema validity, no new conflicts, safety atoms stated in CCL and backed
/// by a RAW line, and every non-omitted atom recoverable.
pub fn verify(p: &Packet, source: &GoldAnnotation, lex: &Lexicon) -> VerifyReport {
    let mut failures = Vec::new();
    let decoded = if p.passthrough.is_none() {
        let (atoms, issues) = decode_pair(&p.core, p.min.as_ref(), lex);
        for issue in issues {
            failures.push(VerifyFailure { kind: FailureKind::Schema, id: None, detail: issue.to_string() });
        }
        let from_ccl = atoms.clone();
        let mut decoded = atoms;
        decoded.extend(p.raw_atoms(&from_ccl, lex));
        let src = source.active_atoms();
        for a in &decoded {
            if let Err(v) = validate(a) {
                failures.push(VerifyFailure {
                    kind: FailureKind::Schema,
                    id: Some(atom_id(a)),
                    detail: alloc::format!("{} invalid field(s)", v.len()),
                });
            }
        }
        for (i, a) in decoded.iter().enumerate() {
            for b in &decoded[i + 1..] {
                let inherited = src.iter().any(|s| equivalent(s, a)) && src.iter().any(|s| equivalent(s, b));
                if conflicts(a, b) && !inherited {
                    failures.push(VerifyFailure {
                        kind: FailureKind::Conflict,
                        id: Some(atom_id(a)),
                        detail: "decoded atoms conflict".to_string(),
                    });
                }
            }
        }
        for s in src.iter().filter(|s| s.safety) {
            let id = atom_id(s);
            let stated = from_ccl.iter().any(|a| equivalent(a, s));
            let backed = s.evidence.is_none() || p.raw.iter().any(|r| r.id == id);
            if !stated || !backed {
                failures.push(VerifyFailure {
                    kind: FailureKind::SafetyUncovered,
                    id: Some(id),
                    detail: if stated { "no RAW evidence".into() } else { "missing from CCL".into() },
                });
            }
        }
        decoded
    } else {
        p.decode(lex)
    };
    if !recoverable(&decoded, source, &p.omitted) {
        for g in source.active() {
            let id = atom_id(&g.atom);
            if !p.omitted.contains(&id) && !decoded.iter().any(|a| equivalent(a, &g.atom)) {
                failures.push(VerifyFailure { kind: FailureKind::Unrecovered, id: Some(id), detail: "not recoverable".into() });
            }
        }
    }
    VerifyReport { failures, decoded }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_errors_are_located() {
        assert!(parse_packet("").is_err());
        assert!(parse_packet("@CCL/1\n").is_err());
        assert!(parse_packet("@PACKET budget=x\n").is_err());
        assert!(parse_packet("@PACKET colour=red\n").is_err());
    }

    #[test]
    fn empty_packet_round_trips() {
        let p = Packet::empty(50, "trip");
        let back = parse_packet(&render_packet(&p)).unwrap();
        assert_eq!((back.budget, back.lexicon.as_str()), (50, "trip"));
        assert!(back.body().is_empty() && !back.is_uncompressed());
    }
}
