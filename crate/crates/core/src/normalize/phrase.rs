//! Rule-based candidate finding inside one sentence: lexicon templates,
//! subject aliases, enum mentions, count phrases, `key=value` forms, and
//! clause-bounded negation and verb attachment.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{any_value, find_words, normalize_surface, split_list, Candidate, Polarity, RawValue, NEGATION_CUES, POSTNOMINAL_CUES};
use crate::atom::Value;
use crate::lexicon::{surface_key, Lexicon, ValueKind};
use crate::scoring::ConfidenceSignals;

/// A candidate with its character range in the phrase and the clause text
/// it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseHit {
    pub candidate: Candidate,
    pub start: usize,
    pub end: usize,
    pub clause: String,
}

/// Lowercased, whitespace-collapsed copy of the phrase with a map from
/// each view byte back to the original character index.
struct View {
    text: String,
    orig: Vec<usize>,
    source: Vec<char>,
}

impl View {
    fn new(phrase: &str) -> View {
        let source: Vec<char> = phrase.chars().collect();
        let mut text = String::new();
        let mut orig = Vec::new();
        let mut space = false;
        for (i, &ch) in source.iter().enumerate() {
            if ch.is_whitespace() {
                if !space && !text.is_empty() {
                    text.push(' ');
                    orig.push(i);
                }
                space = true;
                continue;
            }
            space = false;
            let ch = match ch {
                '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
                '\u{201c}' | '\u{201d}' => '"',
                '\u{2013}' | '\u{2014}' => '-',
                c => c,
            };
            for lc in ch.to_lowercase() {
                text.push(lc);
                orig.extend(core::iter::repeat_n(i, lc.len_utf8()));
            }
        }
        View { text, orig, source }
    }

    /// Original character range of view bytes `[s, e)`.
    fn span(&self, s: usize, e: usize) -> (usize, usize) {
        (self.orig[s], self.orig[e - 1] + 1)
    }

    fn original(&self, s: usize, e: usize) -> String {
        let (a, b) = self.span(s, e);
        self.source[a..b].iter().collect()
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn capture_char(c: char) -> bool {
    is_word(c) || matches!(c, '.' | '/' | '-' | '\'' | '+')
}

fn clauses(view: &str) -> Vec<(usize, usize)> {
    let bytes = view.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let boundary = matches!(b, b',' | b';')
            || (b == b':' && bytes.get(i + 1).is_none_or(|n| *n == b' '))
            || view[i..].starts_with(" but ");
        if boundary {
            out.push((start, i));
            start = i + 1;
        }
        i += 1;
    }
    out.push((start, bytes.len()));
    out
}

#[derive(Debug, Clone)]
enum Seg {
    Lit(String),
    Cap { name: String, kind: CapKind },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CapKind {
    Word,
    List,
    Text,
}

fn parse_template(template: &str) -> Vec<Seg> {
    let mut segs = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        if open > 0 {
            segs.push(Seg::Lit(literal(&rest[..open])));
        }
        let inner = &rest[open + 1..open + close];
        let mut parts = inner.splitn(2, ':');
        let name = parts.next().unwrap_or("").to_string();
        let kind = match parts.next() {
            Some("list") => CapKind::List,
            Some("text") => CapKind::Text,
            _ => CapKind::Word,
        };
        segs.push(Seg::Cap { name, kind });
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        segs.push(Seg::Lit(literal(rest)));
    }
    segs
}

/// Template literal in view form: lowercase, single spaces, edges kept.
fn literal(text: &str) -> String {
    let mut out = String::new();
    let mut space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            space = true;
            continue;
        }
        if space {
            out.push(' ');
        }
        space = false;
        out.extend(ch.to_lowercase());
    }
    if space {
        out.push(' ');
    }
    out
}

fn match_segs(view: &str, pos: usize, segs: &[Seg], caps: &mut Vec<(usize, usize)>) -> Option<usize> {
    let Some(seg) = segs.first() else { return Some(pos) };
    match seg {
        Seg::Lit(lit) => {
            if view[pos..].starts_with(lit.as_str()) {
                match_segs(view, pos + lit.len(), &segs[1..], caps)
            } else {
                None
            }
        }
        Seg::Cap { kind, .. } => {
            let last = segs.len() == 1;
            let mut ends: Vec<usize> = Vec::new();
            for (off, c) in view[pos..].char_indices() {
                if *kind == CapKind::Word && !capture_char(c) {
                    break;
                }
                ends.push(pos + off + c.len_utf8());
            }
            if last {
                let mut end = *ends.last()?;
                while end > pos && matches!(view.as_bytes()[end - 1], b'.' | b'-' | b' ' | b'\'') {
                    end -= 1;
                }
                if end == pos {
                    return None;
                }
                caps.push((pos, end));
                return Some(end);
            }
            for end in ends {
                caps.push((pos, end));
                if let Some(e) = match_segs(view, end, &segs[1..], caps) {
                    return Some(e);
                }
                caps.pop();
            }
            None
        }
    }
}

#[derive(Debug, Clone)]
enum HitKind {
    Pattern,
    Alias { subject: String },
    Mention { subject: String, value: String },
}

#[derive(Debug, Clone)]
struct Hit {
    start: usize,
    end: usize,
    kind: HitKind,
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

fn signals(anchor: bool) -> ConfidenceSignals {
    ConfidenceSignals { e_span: 1.0, e_agree: 1.0, e_roundtrip: 1.0, e_schema: 1.0, e_anchor: if anchor { 1.0 } else { 0.0 } }
}

/// Every candidate the lexicon can read from one sentence, in text order.
pub fn phrase_candidates(phrase: &str, lex: &Lexicon) -> Vec<PhraseHit> {
    let view = View::new(phrase);
    let v = view.text.as_str();
    if v.is_empty() {
        return Vec::new();
    }
    let clause_list = clauses(v);
    let clause_of = |pos: usize| -> (usize, usize) {
        clause_list.iter().copied().find(|&(s, e)| pos >= s && pos <= e).unwrap_or((0, v.len()))
    };
    let mut out: Vec<PhraseHit> = Vec::new();
    let mut hits: Vec<Hit> = Vec::new();

    // templates
    for rule in &lex.patterns {
        let segs = parse_template(&rule.template);
        let mut pos = 0;
        while pos < v.len() {
            let at_boundary = pos == 0 || !v[..pos].chars().next_back().is_some_and(is_word);
            let mut caps = Vec::new();
            let found = if at_boundary { match_segs(v, pos, &segs, &mut caps) } else { None };
            let Some(end) = found.filter(|&e| {
                e > pos && !v[e..].chars().next().is_some_and(is_word) && !hits.iter().any(|h| overlaps((h.start, h.end), (pos, e)))
            }) else {
                pos += v[pos..].chars().next().map_or(1, char::len_utf8);
                continue;
            };
            let (cs, ce) = view.span(pos, end);
            let clause = view.original(pos, end);
            let names = segs.iter().filter_map(|s| match s {
                Seg::Cap { name, kind } => Some((name, *kind)),
                _ => None,
            });
            for ((name, kind), &(s, e)) in names.zip(caps.iter()) {
                let text = view.original(s, e);
                let raw = match kind {
                    CapKind::List => {
                        let enums = lex.value_enums.get(name).map(Vec::as_slice);
                        RawValue::Typed(Value::List(split_list(&text).iter().map(|i| any_value(i, enums)).collect()))
                    }
                    _ => RawValue::Text(text.trim().to_string()),
                };
                let candidate = Candidate {
                    raw_value: Some(raw),
                    polarity: Some(Polarity::Affirmed),
                    signals: Some(signals(true)),
                    ..Candidate::new(name.clone())
                };
                out.push(PhraseHit { candidate, start: cs, end: ce, clause: clause.clone() });
            }
            for emit in &rule.emit {
                let Ok(value) = crate::ccl::parse_value(&emit.value) else { continue };
                let candidate = Candidate {
                    raw_value: Some(RawValue::Typed(crate::ccl::ccl_to_value(&value))),
                    polarity: Some(Polarity::Affirmed),
                    signals: Some(signals(true)),
                    ..Candidate::new(emit.subject.clone())
                };
                out.push(PhraseHit { candidate, start: cs, end: ce, clause: clause.clone() });
            }
            hits.push(Hit { start: pos, end, kind: HitKind::Pattern });
            pos = end;
        }
    }

    // aliases and enum mentions, leftmost-longest
    let mut found: Vec<Hit> = Vec::new();
    for entry in &lex.subject_entries {
        let mut needles: Vec<String> = entry.aliases.iter().map(|a| surface_key(a)).collect();
        needles.push(entry.canonical.clone());
        needles.push(entry.canonical.replace('_', " "));
        let negatives: Vec<(usize, usize)> =
            entry.negative_examples.iter().flat_map(|n| find_words(v, &surface_key(n))).collect();
        for needle in needles {
            for (s, e) in find_words(v, &needle) {
                if !negatives.iter().any(|&n| overlaps(n, (s, e))) {
                    found.push(Hit { start: s, end: e, kind: HitKind::Alias { subject: entry.canonical.clone() } });
                }
            }
        }
        if entry.mentions {
            for value in lex.value_enums.get(&entry.canonical).into_iter().flatten() {
                for (s, e) in find_words(v, &normalize_surface(value)) {
                    found.push(Hit {
                        start: s,
                        end: e,
                        kind: HitKind::Mention { subject: entry.canonical.clone(), value: value.clone() },
                    });
                }
            }
        }
    }
    found.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    for h in found {
        if !hits.iter().any(|x| overlaps((x.start, x.end), (h.start, h.end))) {
            hits.push(h);
        }
    }
    hits.sort_by_key(|h| h.start);

    let mut cues: Vec<String> = NEGATION_CUES.iter().map(|c| c.to_string()).collect();
    cues.extend(lex.negation_cues.iter().map(|c| normalize_surface(c)));
    let cue_spans: Vec<(usize, usize, bool)> = cues
        .iter()
        .flat_map(|c| {
            let post = POSTNOMINAL_CUES.contains(&c.as_str());
            find_words(v, c).into_iter().map(move |(s, e)| (s, e, post))
        })
        .filter(|&(s, e, _)| !hits.iter().any(|h| overlaps((h.start, h.end), (s, e))))
        .collect();
    let verb_spans: Vec<(usize, usize, String)> = lex
        .predicate_entries
        .iter()
        .flat_map(|p| {
            let mut needles: Vec<String> = p.aliases.iter().map(|a| surface_key(a)).collect();
            needles.push(p.canonical.clone());
            needles
        })
        .flat_map(|n| find_words(v, &n).into_iter().map(move |(s, e)| (s, e, n.clone())))
        .filter(|&(s, e, _)| !hits.iter().any(|h| overlaps((h.start, h.end), (s, e))))
        .collect();
    let between = |a: usize, b: usize, skip: (usize, usize)| {
        hits.iter().any(|h| (h.start, h.end) != skip && h.start >= a && h.end <= b)
    };

    for h in &hits {
        let (subject, mention) = match &h.kind {
            HitKind::Pattern => continue,
            HitKind::Alias { subject } => (subject.clone(), None),
            HitKind::Mention { subject, value } => (subject.clone(), Some(value.clone())),
        };
        let entry = lex.subject(&subject);
        let (mut start, mut end) = (h.start, h.end);
        let mut raw = mention.map(|m| RawValue::Typed(Value::Enum(m)));
        let mut count = false;
        if raw.is_none() {
            // `350 agents`
            let before = v[..start].trim_end_matches(' ');
            let digits = before.len() - before.trim_end_matches(|c: char| c.is_ascii_digit() || c == '.').len();
            if digits > 0 && before.len() < start {
                let ns = before.len() - digits;
                if ns == 0 || !v[..ns].chars().next_back().is_some_and(is_word) {
                    raw = Some(RawValue::Text(v[ns..before.len()].to_string()));
                    count = true;
                    start = ns;
                }
            }
        }
        if raw.is_none() {
            // `assets=0`, `libs:false`
            let rest = &v[end..];
            if let Some(after) = rest.strip_prefix('=').or_else(|| rest.strip_prefix(':').filter(|r| !r.starts_with(' '))) {
                let len = after.find([' ', ',', ';']).unwrap_or(after.len());
                let len = after[..len].trim_end_matches('.').len();
                if len > 0 {
                    let vs = end + 1;
                    raw = Some(RawValue::Text(view.original(vs, vs + len)));
                    end = vs + len;
                }
            }
        }
        let kind = entry.and_then(|e| e.value_kind);
        if raw.is_none() && !matches!(kind, None | Some(ValueKind::Bool)) {
            continue;
        }
        let (cs, ce) = clause_of(h.start);
        let key = (h.start, h.end);
        let cue = cue_spans.iter().find(|&&(s, e, post)| {
            s >= cs && e <= ce && ((e <= h.start && !between(e, h.start, key)) || (post && s >= h.end && !between(h.end, s, key)))
        });
        let negated = cue.is_some();
        let verb = verb_spans
            .iter()
            .filter(|(s, e, _)| *s >= cs && *e <= ce)
            .min_by_key(|(s, e, _)| if *e <= h.start { (h.start - e, 0) } else { (s.saturating_sub(h.end), 1) });
        // evidence covers the cue and verb so the quote reads back alone
        for (s, e) in cue.map(|c| (c.0, c.1)).into_iter().chain(verb.map(|v| (v.0, v.1))) {
            start = start.min(s);
            end = end.max(e);
        }
        let verb = verb.map(|(_, _, n)| n.clone());
        let clause_text = &v[cs..ce];
        let scope = lex
            .scope_cues
            .iter()
            .find(|(cue, _)| !find_words(clause_text, &normalize_surface(cue)).is_empty())
            .map(|(_, s)| s.clone());
        let anchor = count || negated || raw.is_some();
        let candidate = Candidate {
            surface_predicate: verb,
            raw_value: raw,
            polarity: Some(if negated { Polarity::Negated } else { Polarity::Affirmed }),
            scope,
            count_phrase: count,
            signals: Some(signals(anchor)),
            ..Candidate::new(subject)
        };
        let (os, oe) = view.span(start, end);
        let clause = if ce > cs { view.original(cs, ce) } else { String::new() };
        out.push(PhraseHit { candidate, start: os, end: oe, clause: clause.trim().to_string() });
    }
    out.sort_by_key(|h| h.start);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin;

    #[test]
    fn view_maps_back_to_original() {
        let view = View::new("Keep  Baixa\nor Chiado");
        assert_eq!(view.text, "keep baixa or chiado");
        assert_eq!(view.original(5, 10), "Baixa");
    }

    #[test]
    fn clause_split() {
        assert_eq!(clauses("canvas chosen, svg rejected"), [(0, 13), (14, 27)]);
        assert_eq!(clauses("libs:false").len(), 1);
    }

    #[test]
    fn template_captures() {
        let segs = parse_template("grid is {grid_width} by {grid_height}");
        let mut caps = Vec::new();
        let end = match_segs("grid is 80 by 60 cells", 0, &segs, &mut caps).unwrap();
        assert_eq!(end, 16);
        assert_eq!(caps, [(8, 10), (14, 16)]);
    }

    #[test]
    fn negation_scopes_to_nearest_term() {
        let lex = builtin::lexicon("datacleaning").unwrap();
        let hits = phrase_candidates("Use only the standard library: no pandas and no third-party packages.", &lex);
        let pol: Vec<(String, Option<Polarity>)> =
            hits.iter().map(|h| (h.candidate.surface_subject.clone(), h.candidate.polarity)).collect();
        assert_eq!(
            pol,
            [
                ("standard_library".to_string(), Some(Polarity::Affirmed)),
                ("pandas".to_string(), Some(Polarity::Negated)),
                ("third_party_packages".to_string(), Some(Polarity::Negated)),
            ]
        );
    }
}
