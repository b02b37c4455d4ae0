//! The budgeted commitment codec: segment, extract, normalize, resolve
//! conflicts, rank, encode under a token budget, verify, fall back.

mod packet;
mod segment;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::atom::{atom_id, conflicts, equivalent, Atom, AtomId, AtomType, Evidence, Modality, Status, Value};
use crate::lexicon::Lexicon;
use crate::normalize::normalize_phrase;
use crate::scoring::{decide, risk, PolicyConfig, RenderDecision};

pub use packet::{
    encode_under_budget, parse_packet, render_packet, verify, FailureKind, Packet, PacketError, Passthrough, RawLine,
    VerifyFailure, VerifyReport, HEADER_PREFIX,
};
pub use segment::{segment, split_sentences, ChatHistory, Message, Region, Role, Segmentation, Sentence, SpanRef};

/// A normalized atom inside the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecAtom {
    pub atom: Atom,
    pub ambiguity: f64,
    pub status: Status,
    pub region: Region,
    /// Index of the source message; `usize::MAX` when unknown.
    pub message: usize,
    /// Two conflicting atoms share an evidence position; keep raw text.
    pub flagged_raw: bool,
}

impl CodecAtom {
    pub fn new(atom: Atom) -> Self {
        CodecAtom { atom, ambiguity: 0.0, status: Status::Active, region: Region::Goals, message: usize::MAX, flagged_raw: false }
    }

    fn position(&self) -> (usize, usize) {
        let start = self.atom.evidence.as_ref().and_then(|e| e.span).map_or(0, |s| s.start);
        (self.message, start)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractorError {
    #[error("extractor unavailable: {0}")]
    Unavailable(String),
    #[error("extractor returned invalid output: {0}")]
    Invalid(String),
}

/// Source of candidate atoms. The rule extractor is always available.
pub trait Extractor {
    fn name(&self) -> &str;
    fn extract(&self, h: &ChatHistory, seg: &Segmentation, lex: &Lexicon) -> Result<Vec<CodecAtom>, ExtractorError>;
}

/// Lexicon-driven pattern extractor.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleExtractor;

/// Confidence of text nothing in the lexicon recognized.
pub const SNIPPET_CONFIDENCE: f64 = 0.3;

impl Extractor for RuleExtractor {
    fn name(&self) -> &str {
        "rules"
    }

    fn extract(&self, h: &ChatHistory, seg: &Segmentation, lex: &Lexicon) -> Result<Vec<CodecAtom>, ExtractorError> {
        Ok(extract(h, seg, lex))
    }
}

/// Runs the rule extractor over every non-question sentence. Sentences it
/// cannot read become low-confidence verbatim snippets.
pub fn extract(h: &ChatHistory, seg: &Segmentation, lex: &Lexicon) -> Vec<CodecAtom> {
    let mut out = Vec::new();
    let mut snippets = 0;
    for sentence in &seg.sentences {
        if sentence.regions.contains(&Region::OpenQuestions) {
            continue;
        }
        let msg = &h.messages[sentence.span.message];
        let region = sentence.regions[0];
        let safety = sentence.regions.contains(&Region::SafetyBoundaries);
        let found = normalize_phrase(&sentence.text, &msg.id, sentence.span.start, lex);
        if found.is_empty() {
            snippets += 1;
            let mut atom = Atom::new(
                AtomType::VerbatimSnippet,
                alloc::format!("snippet_{}", snippets),
                "states",
                Value::Str(sentence.text.clone()),
                lex.default_scope(),
            );
            atom.evidence = Some(Evidence::new(msg.id.clone(), sentence.span.start, sentence.span.end, sentence.text.clone()));
            atom.confidence = SNIPPET_CONFIDENCE;
            atom.criticality = if safety { 5 } else { 2 };
            atom.safety = safety;
            out.push(CodecAtom { ambiguity: 1.0, region, message: sentence.span.message, ..CodecAtom::new(atom) });
            continue;
        }
        for n in found {
            let mut atom = n.atom;
            if safety && !atom.safety {
                atom.safety = true;
                atom.criticality = 5;
            }
            out.push(CodecAtom {
                atom,
                ambiguity: n.ambiguity,
                status: Status::Active,
                region,
                message: sentence.span.message,
                flagged_raw: false,
            });
        }
    }
    out
}

/// Supersession pass. Duplicates collapse to their latest mention; for
/// conflicting pairs the later evidence wins and the earlier atom is kept
/// as superseded. Rejected alternatives stay active with rejected modality.
pub fn resolve_conflicts(atoms: &[CodecAtom]) -> Vec<CodecAtom> {
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by_key(|&i| (atoms[i].position(), i));
    let mut out: Vec<CodecAtom> = Vec::new();
    for i in order {
        let a = &atoms[i];
        if let Some(pos) = out.iter().position(|b| b.status == Status::Active && equivalent(&b.atom, &a.atom)) {
            // a later mention of the same commitment replaces the earlier one
            let keep_flag = out[pos].flagged_raw;
            out[pos] = CodecAtom { flagged_raw: keep_flag || a.flagged_raw, ..a.clone() };
            continue;
        }
        let mut next = a.clone();
        for b in out.iter_mut().filter(|b| b.status == Status::Active && conflicts(&b.atom, &a.atom)) {
            if b.position() == a.position() {
                b.flagged_raw = true;
                next.flagged_raw = true;
            } else {
                b.status = Status::Superseded;
            }
        }
        if next.atom.predicate == "rejected" {
            next.atom.modality = Modality::Rejected;
        }
        out.push(next);
    }
    out
}

/// Weights of the rank components; the default is the unweighted sum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RankWeights {
    pub relevance: f64,
    pub recency: f64,
    pub specificity: f64,
    pub criticality: f64,
    pub safety: f64,
    pub dependency: f64,
    pub confidence: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights { relevance: 1.0, recency: 1.0, specificity: 1.0, criticality: 1.0, safety: 1.0, dependency: 1.0, confidence: 1.0 }
    }
}

/// Constant that sorts safety atoms ahead of everything else.
pub const SAFETY_WEIGHT: f64 = 100.0;

/// Weighted rank components; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RankScore {
    pub relevance: f64,
    pub recency: f64,
    pub specificity: f64,
    pub criticality: f64,
    pub safety_weight: f64,
    pub dependency_degree: f64,
    pub confidence_penalty: f64,
    pub total: f64,
}

fn lexemes(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() > 1)
        .map(|w| w.to_lowercase())
        .collect()
}

fn value_text(v: &Value, out: &mut String) {
    match v {
        Value::Enum(s) | Value::Str(s) => {
            out.push(' ');
            out.push_str(s);
        }
        Value::List(items) => items.iter().for_each(|i| value_text(i, out)),
        Value::Map(pairs) => pairs.iter().for_each(|(k, v)| {
            out.push(' ');
            out.push_str(k);
            value_text(v, out);
        }),
        _ => {}
    }
}

pub fn specificity(v: &Value) -> f64 {
    match v {
        Value::Int(_) | Value::Decimal(_) | Value::Date(_) | Value::Enum(_) => 1.0,
        Value::List(_) | Value::Map(_) => 0.75,
        Value::Bool(_) => 0.5,
        Value::Str(_) => 0.25,
    }
}

/// Scores and orders atoms: descending total, ties by atom id, then input
/// order. `message_lens[i]` is the character length of message `i`.
pub fn rank(atoms: &[CodecAtom], query: &str, message_lens: &[usize], w: &RankWeights) -> Vec<(usize, RankScore)> {
    let q: Vec<String> = lexemes(query);
    let n_msgs = message_lens.len().max(1) as f64;
    let texts: Vec<String> = atoms
        .iter()
        .map(|a| {
            let mut t = String::new();
            value_text(&a.atom.value, &mut t);
            t.to_lowercase()
        })
        .collect();
    let mut scored: Vec<(usize, RankScore)> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut words = lexemes(&a.atom.subject.replace('_', " "));
            words.extend(lexemes(&texts[i]));
            let relevance = if words.is_empty() {
                0.0
            } else {
                words.iter().filter(|w| q.contains(w)).count() as f64 / words.len() as f64
            };
            let recency = match a.message {
                usize::MAX => 0.0,
                m => {
                    let (_, start) = a.position();
                    let len = message_lens.get(m).copied().unwrap_or(0) as f64;
                    (m as f64 + start as f64 / (len + 1.0)) / n_msgs
                }
            };
            let deps = texts
                .iter()
                .enumerate()
                .filter(|(j, t)| *j != i && lexemes(t).contains(&a.atom.subject))
                .count();
            let dependency = deps as f64 / (atoms.len().max(2) - 1) as f64;
            let mut s = RankScore {
                relevance: w.relevance * relevance,
                recency: w.recency * recency,
                specificity: w.specificity * specificity(&a.atom.value),
                criticality: w.criticality * f64::from(a.atom.criticality) / 5.0,
                safety_weight: if a.atom.safety { w.safety * SAFETY_WEIGHT } else { 0.0 },
                dependency_degree: w.dependency * dependency,
                confidence_penalty: -w.confidence * (1.0 - a.atom.confidence),
                total: 0.0,
            };
            s.total = s.relevance
                + s.recency
                + s.specificity
                + s.criticality
                + s.safety_weight
                + s.dependency_degree
                + s.confidence_penalty;
            (i, s)
        })
        .collect();
    let ids: Vec<AtomId> = atoms.iter().map(|a| atom_id(&a.atom)).collect();
    scored.sort_by(|(i, a), (j, b)| {
        b.total.partial_cmp(&a.total).unwrap_or(core::cmp::Ordering::Equal).then_with(|| ids[*i].cmp(&ids[*j])).then(i.cmp(j))
    });
    scored
}

/// Render decision for each atom under the policy.
pub fn decisions(atoms: &[CodecAtom], policy: &PolicyConfig) -> Vec<RenderDecision> {
    atoms
        .iter()
        .map(|a| {
            if a.flagged_raw {
                return RenderDecision::CanonicalPlusSpan;
            }
            let conf = a.atom.confidence;
            let r = risk(&a.atom, conf, &policy.risk, a.ambiguity);
            decide(&a.atom, conf, r, &policy.thresholds)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CodecConfig {
    pub policy: PolicyConfig,
    pub rank: RankWeights,
    pub recent_turns: usize,
    /// Budget multiplier for the one budget-raising fallback.
    pub fallback_factor: f64,
    /// Share of low-confidence atoms above which compression is skipped.
    pub max_low_confidence_share: f64,
    pub lexicon_label: String,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            policy: PolicyConfig::default(),
            rank: RankWeights::default(),
            recent_turns: 4,
            fallback_factor: 1.5,
            max_low_confidence_share: 0.5,
            lexicon_label: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("budget {budget} is below the {needed} tokens that mandatory atoms need")]
    BudgetInfeasible { budget: usize, needed: usize },
}

/// Which step-8 fallback produced the packet, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    RawSpans,
    BudgetRaised,
    Passthrough,
}

impl Fallback {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fallback::RawSpans => "raw_spans",
            Fallback::BudgetRaised => "budget_raised",
            Fallback::Passthrough => "passthrough",
        }
    }
}

/// Everything `compress` decided, for reports and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Compression {
    pub packet: Packet,
    pub atoms: Vec<CodecAtom>,
    pub ranking: Vec<(usize, RankScore)>,
    pub decisions: Vec<RenderDecision>,
    pub verification: VerifyReport,
    pub warnings: Vec<String>,
}

/// `z = C(H, q, B)` with the built-in rule extractor.
pub fn compress(h: &ChatHistory, q: &str, budget: usize, cfg: &CodecConfig, lex: &Lexicon) -> Result<Compression, CodecError> {
    compress_with(h, q, budget, cfg, lex, &RuleExtractor)
}

pub fn compress_with(
    h: &ChatHistory,
    q: &str,
    budget: usize,
    cfg: &CodecConfig,
    lex: &Lexicon,
    extractor: &dyn Extractor,
) -> Result<Compression, CodecError> {
    let mut warnings = Vec::new();
    let seg = segment(h, cfg.recent_turns);
    let extracted = match extractor.extract(h, &seg, lex) {
        Ok(a) => a,
        Err(e) => {
            warnings.push(alloc::format!("{} extractor failed ({}); using rules", extractor.name(), e));
            extract(h, &seg, lex)
        }
    };
    let resolved = resolve_conflicts(&extracted);
    let active: Vec<CodecAtom> = resolved.iter().filter(|a| a.status == Status::Active).cloned().collect();
    let superseded: Vec<Atom> = resolved.iter().filter(|a| a.status != Status::Active).map(|a| a.atom.clone()).collect();
    let lens: Vec<usize> = h.messages.iter().map(|m| m.text.chars().count()).collect();
    let ranking = rank(&active, q, &lens, &cfg.rank);
    let ranked: Vec<CodecAtom> = ranking.iter().map(|(i, _)| active[*i].clone()).collect();
    let mut decisions = decisions(&ranked, &cfg.policy);
    let priority = crate::metrics::GoldAnnotation::new(&ranked.iter().map(|a| a.atom.clone()).collect::<Vec<_>>());
    let label = if cfg.lexicon_label.is_empty() { lex.version.clone() } else { cfg.lexicon_label.clone() };

    let judged: Vec<&CodecAtom> = ranked.iter().filter(|a| a.atom.atom_type != AtomType::VerbatimSnippet).collect();
    let low = judged.iter().filter(|a| a.atom.confidence < cfg.policy.thresholds.conf_low).count();
    let finish = |packet: Packet, decisions: Vec<RenderDecision>, verification: VerifyReport, warnings: Vec<String>| Compression {
        packet,
        atoms: ranked.clone(),
        ranking: ranking.clone(),
        decisions,
        verification,
        warnings,
    };
    if !judged.is_empty() && low as f64 > cfg.max_low_confidence_share * judged.len() as f64 {
        warnings.push(alloc::format!("{} of {} atoms are low confidence; passing through", low, judged.len()));
        let packet = Packet::passthrough(h, &ranked, &superseded, budget, &label);
        let report = VerifyReport::default();
        return Ok(finish(packet, decisions, report, warnings));
    }

    let mut packet = encode_under_budget(&ranked, &decisions, budget, lex, h, &label)?;
    packet.superseded = superseded.clone();
    let mut report = verify(&packet, &priority, lex);
    if report.ok() {
        return Ok(finish(packet, decisions, report, warnings));
    }
    // 8a. raw spans for the atoms that failed
    let failing = report.failing_ids();
    for (a, d) in ranked.iter().zip(decisions.iter_mut()) {
        if failing.contains(&atom_id(&a.atom)) {
            *d = RenderDecision::CanonicalPlusSpan;
        }
    }
    warnings.push(alloc::format!("verification failed for {} atoms; adding raw spans", failing.len()));
    if let Ok(mut p) = encode_under_budget(&ranked, &decisions, budget, lex, h, &label) {
        p.superseded = superseded.clone();
        p.fallback = Some(Fallback::RawSpans);
        report = verify(&p, &priority, lex);
        if report.ok() {
            return Ok(finish(p, decisions, report, warnings));
        }
    }
    // 8b. one larger budget
    let scaled = budget as f64 * cfg.fallback_factor;
    let raised = if scaled > (scaled as usize) as f64 { scaled as usize + 1 } else { scaled as usize };
    warnings.push(alloc::format!("raising budget to {}", raised));
    if let Ok(mut p) = encode_under_budget(&ranked, &decisions, raised, lex, h, &label) {
        p.superseded = superseded.clone();
        p.fallback = Some(Fallback::BudgetRaised);
        report = verify(&p, &priority, lex);
        if report.ok() {
            return Ok(finish(p, decisions, report, warnings));
        }
    }
    // 8c. no compression
    warnings.push("passing the history through uncompressed".to_string());
    packet = Packet::passthrough(h, &ranked, &superseded, budget, &label);
    Ok(finish(packet, decisions, report, warnings))
}

/// Rank-ordered atoms and their source positions, keyed by message id.
pub fn message_index(h: &ChatHistory) -> BTreeMap<String, usize> {
    h.messages.iter().enumerate().map(|(i, m)| (m.id.clone(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin;

    fn at(subject: &str, value: Value, msg: usize, start: usize) -> CodecAtom {
        let mut a = Atom::new(AtomType::Decision, subject, "selected", value, "current_itinerary");
        a.evidence = Some(Evidence::new(alloc::format!("m{}", msg + 1), start, start + 1, "x"));
        CodecAtom { message: msg, ..CodecAtom::new(a) }
    }

    #[test]
    fn later_decision_supersedes() {
        let atoms = alloc::vec![at("day_trip", Value::Enum("Sintra".into()), 0, 0), at("day_trip", Value::Enum("Cascais".into()), 1, 0)];
        let out = resolve_conflicts(&atoms);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].status, Status::Superseded);
        assert_eq!(out[1].status, Status::Active);
        let same = alloc::vec![at("day_trip", Value::Enum("Sintra".into()), 0, 0), at("day_trip", Value::Enum("Cascais".into()), 0, 0)];
        let out = resolve_conflicts(&same);
        assert!(out.iter().all(|a| a.status == Status::Active && a.flagged_raw));
        let plain = alloc::vec![at("a", Value::Bool(true), 0, 0), at("b", Value::Bool(true), 0, 3)];
        assert_eq!(resolve_conflicts(&plain), plain);
    }

    #[test]
    fn rank_orders_safety_recency_specificity() {
        let mut safe = at("guard", Value::Bool(false), 0, 0);
        safe.atom.safety = true;
        let pref = at("viewpoints", Value::Bool(true), 1, 0);
        let r = rank(&[pref.clone(), safe], "viewpoints", &[10, 10], &RankWeights::default());
        assert_eq!(r[0].0, 1);
        let s = r[0].1;
        let sum = s.relevance + s.recency + s.specificity + s.criticality + s.safety_weight + s.dependency_degree + s.confidence_penalty;
        assert!((s.total - sum).abs() < 1e-12);
        let early = at("x", Value::Bool(true), 0, 0);
        let late = at("x", Value::Bool(true), 0, 5);
        assert_eq!(rank(&[early, late], "", &[10], &RankWeights::default())[0].0, 1);
        let vague = at("n", Value::Str("many".into()), 0, 0);
        let exact = at("n", Value::Int(350), 0, 0);
        assert_eq!(rank(&[vague, exact], "", &[10], &RankWeights::default())[0].0, 1);
    }

    #[test]
    fn extraction_from_prompt() {
        let lex = builtin::lexicon("datacleaning").unwrap();
        let h = ChatHistory::single("Use only the standard library: no pandas and no third-party packages.");
        let atoms = extract(&h, &segment(&h, 4), &lex);
        let got: Vec<(String, String, Value)> =
            atoms.iter().map(|a| (a.atom.subject.clone(), a.atom.predicate.clone(), a.atom.value.clone())).collect();
        assert_eq!(
            got,
            [
                ("standard_library".into(), "required".into(), Value::Bool(true)),
                ("pandas".into(), "allowed".into(), Value::Bool(false)),
                ("third_party_packages".into(), "allowed".into(), Value::Bool(false)),
            ]
        );
        assert!(atoms.iter().all(|a| a.atom.evidence.is_some()));
        assert!(extract(&ChatHistory::single(""), &segment(&ChatHistory::single(""), 4), &lex).is_empty());
    }
}
