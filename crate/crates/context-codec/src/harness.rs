//! Diagnostic evaluation over case fixtures: per-method reports, error
//! injection, round-trip decoding, the rejection-criteria verdicts, token
//! count calibration and a seeded budget sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use context_codec_core::atom::{atom_id, equivalent};
use context_codec_core::ccl::{emit_ccl, parse_ccl, parse_value, CclValue, Profile};
use context_codec_core::codec::{compress, ChatHistory, CodecConfig, CodecError, Fallback};
use context_codec_core::metrics::{
    evaluate, has_conflict, report_row, ErrorKind, EvalReport, GoldAnnotation, REPORT_COLUMNS,
};
use context_codec_core::tokenize::lexical_tokens;
use context_codec_core::Atom;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::counts::{lookup, ExternalCounts};
use crate::decoder::{DecodeFailure, Decoder};
use crate::external::normalize_records;
use crate::fixtures::{printed_examples, CaseFixture, Method};

/// One method row of a case report.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub report: EvalReport,
    /// `1 - tokens/full_tokens`.
    pub gain: f64,
    /// Active gold atoms of the case.
    pub gold_atoms: usize,
    pub safety_total: usize,
    pub safety_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: String,
    pub full_tokens: usize,
    pub rows: Vec<MethodRow>,
}

impl CaseReport {
    pub fn row(&self, m: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == m)
    }

    /// The per-method table: the column header, then one row per method.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&report_row(&r.report));
            out.push('\n');
        }
        out
    }
}

fn failed_report(method: Method, decoder: &str, tokens: usize, reason: String) -> EvalReport {
    EvalReport {
        method: method.to_string(),
        decoder: decoder.to_string(),
        lexical_tokens: tokens,
        external_token_counts: BTreeMap::new(),
        car: 0.0,
        war: 0.0,
        cd: 0.0,
        atom_precision: 0.0,
        atom_recall: 0.0,
        conflict_rate: 0.0,
        polarity_error_rate: 0.0,
        count_error_rate: 0.0,
        errors: Vec::new(),
        failure: Some(reason),
    }
}

fn safety_counts(gold: &GoldAnnotation, found: &[Atom]) -> (usize, usize) {
    let safety: Vec<&Atom> = gold.active().map(|g| &g.atom).filter(|a| a.safety).collect();
    let dropped = safety.iter().filter(|g| !found.iter().any(|b| equivalent(g, b))).count();
    (safety.len(), dropped)
}

/// Scores one representation against the case gold.
pub fn evaluate_method(case: &CaseFixture, method: Method, text: &str, decoder: &mut dyn Decoder) -> MethodRow {
    let tokens = lexical_tokens(text);
    let full_tokens = lexical_tokens(&case.full_text);
    let name = decoder.name(method);
    let safety_total = case.gold.active().filter(|g| g.atom.safety).count();
    let (report, dropped) = match decoder.decode(method, text) {
        Ok(found) => match evaluate(method.as_str(), &name, tokens, &case.gold, &found, Some(&case.lexicon)) {
            Ok(r) => (r, safety_counts(&case.gold, &found).1),
            Err(e) => (failed_report(method, &name, tokens, e.to_string()), safety_total),
        },
        Err(e) => (failed_report(method, &name, tokens, e.to_string()), safety_total),
    };
    let gain = if full_tokens == 0 { 0.0 } else { 1.0 - tokens as f64 / full_tokens as f64 };
    MethodRow { method, report, gain, gold_atoms: case.gold.active().count(), safety_total, safety_dropped: dropped }
}

/// Evaluates the full text and every compressed representation the case
/// has. Decoder failures become failure rows.
pub fn run_eval(case: &CaseFixture, decoder: &mut dyn Decoder, counts: Option<&ExternalCounts>) -> CaseReport {
    let mut rows = Vec::new();
    for m in std::iter::once(Method::Full).chain(Method::COMPRESSED) {
        let Some(text) = case.representation(m) else { continue };
        let mut row = evaluate_method(case, m, text, decoder);
        if let Some(counts) = counts {
            let label = format!("{}_{}", case.name, m);
            for enc in ["cl100k", "o200k"] {
                if let Some(n) = lookup(counts, &label, enc) {
                    row.report.external_token_counts.insert(enc.to_string(), n);
                }
            }
        }
        rows.push(row);
    }
    CaseReport { case: case.name.clone(), full_tokens: lexical_tokens(&case.full_text), rows }
}

// ---------------------------------------------------------------- injection

/// An edit to a representation. Structured edits address CCL-Core fields;
/// `Replace` is a plain text substitution usable on any representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    RemoveMember { key: String, member: String },
    /// `value` is CCL value syntax.
    SetMember { key: String, member: String, value: String },
    SetField { key: String, value: String },
    Replace { from: String, to: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Down,
    Same,
    Up,
}

impl Direction {
    fn of(before: f64, after: f64) -> Direction {
        if (after - before).abs() < 1e-12 {
            Direction::Same
        } else if after < before {
            Direction::Down
        } else {
            Direction::Up
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Same => "same",
            Direction::Up => "up",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expected {
    pub kind: ErrorKind,
    pub car: Direction,
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionSpec {
    pub label: String,
    pub target: Method,
    pub edit: Edit,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionResult {
    pub spec: InjectionSpec,
    /// Error kinds present after the edit but not before.
    pub observed: Vec<ErrorKind>,
    pub car_before: f64,
    pub car_after: f64,
    pub direction: Direction,
    pub conflict: bool,
    pub pass: bool,
    pub failure: Option<String>,
}

fn member_edit(value: &mut CclValue, member: &str, new: Option<CclValue>) -> Result<()> {
    match value {
        CclValue::Map(pairs) => {
            let pos = pairs.iter().position(|(k, _)| k == member);
            match (pos, new) {
                (Some(i), None) => {
                    pairs.remove(i);
                }
                (Some(i), Some(v)) => pairs[i].1 = v,
                (None, Some(v)) => pairs.push((member.to_string(), v)),
                (None, None) => bail!("no member `{}`", member),
            }
        }
        CclValue::Flags(flags) => {
            let pos = flags.iter().position(|f| f == member);
            match (pos, new) {
                (Some(i), None) => {
                    flags.remove(i);
                }
                (_, Some(_)) => bail!("flag members take no value"),
                (None, None) => bail!("no flag `{}`", member),
            }
        }
        _ => bail!("field is not a container"),
    }
    Ok(())
}

/// Applies an edit, returning the edited representation.
pub fn apply_edit(text: &str, edit: &Edit) -> Result<String> {
    if let Edit::Replace { from, to } = edit {
        if !text.contains(from.as_str()) {
            bail!("`{}` does not occur", from);
        }
        return Ok(text.replacen(from.as_str(), to, 1));
    }
    let mut doc = parse_ccl(text).map_err(|e| anyhow!("{}", e))?;
    let value = |v: &str| parse_value(v).map_err(|e| anyhow!("{}", e));
    match edit {
        Edit::RemoveMember { key, member } => {
            let field = doc.get_mut(key).ok_or_else(|| anyhow!("no field `{}`", key))?;
            member_edit(field, member, None)?;
        }
        Edit::SetMember { key, member, value: v } => {
            let v = value(v)?;
            let field = doc.get_mut(key).ok_or_else(|| anyhow!("no field `{}`", key))?;
            member_edit(field, member, Some(v))?;
        }
        Edit::SetField { key, value: v } => {
            let v = value(v)?;
            match doc.get_mut(key) {
                Some(slot) => *slot = v,
                None => {
                    doc.push(key.clone(), v);
                }
            }
        }
        Edit::Replace { .. } => unreachable!(),
    }
    emit_ccl(&doc, Profile::Core).map_err(|e| anyhow!("{}", e))
}

/// The five error-injection checks on the epidemic CCL-Core packet.
pub fn injection_specs() -> Vec<InjectionSpec> {
    let s = |x: &str| x.to_string();
    let spec = |label: &str, edit: Edit, kind: ErrorKind, conflict: bool| InjectionSpec {
        label: s(label),
        target: Method::CclCore,
        edit,
        expected: Expected { kind, car: Direction::Down, conflict },
    };
    vec![
        spec("remove assets:false", Edit::RemoveMember { key: s("C"), member: s("assets") }, ErrorKind::Omission, false),
        spec(
            "change count:350 to count:200",
            Edit::SetMember { key: s("AGENT"), member: s("count"), value: s("200") },
            ErrorKind::Mutation,
            true,
        ),
        spec(
            "change libs:false to libs:true",
            Edit::SetMember { key: s("C"), member: s("libs"), value: s("true") },
            ErrorKind::PolarityFlip,
            true,
        ),
        spec(
            "replace OUT=codeonly with provide explanation",
            Edit::SetField { key: s("OUT"), value: s("provide_explanation") },
            ErrorKind::Mutation,
            true,
        ),
        spec("delete reset:true", Edit::RemoveMember { key: s("UI"), member: s("reset") }, ErrorKind::Omission, false),
    ]
}

fn new_kinds(before: &EvalReport, after: &EvalReport) -> Vec<ErrorKind> {
    let key = |e: &context_codec_core::metrics::ErrorRecord| (e.kind, e.gold_id.clone(), e.found.as_ref().map(atom_id));
    let old: Vec<_> = before.errors.iter().map(key).collect();
    let mut kinds: Vec<ErrorKind> = after.errors.iter().filter(|e| !old.contains(&key(e))).map(|e| e.kind).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

/// Applies each spec to a copy of its target and compares the observed
/// (new error kinds, CAR direction, conflict) with the expectation.
pub fn run_injections(case: &CaseFixture, specs: &[InjectionSpec], decoder: &mut dyn Decoder) -> Vec<InjectionResult> {
    specs
        .iter()
        .map(|spec| {
            let fail = |msg: String| InjectionResult {
                spec: spec.clone(),
                observed: Vec::new(),
                car_before: 0.0,
                car_after: 0.0,
                direction: Direction::Same,
                conflict: false,
                pass: false,
                failure: Some(msg),
            };
            let Some(text) = case.representation(spec.target) else {
                return fail(format!("case has no {} representation", spec.target));
            };
            let edited = match apply_edit(text, &spec.edit) {
                Ok(t) => t,
                Err(e) => return fail(e.to_string()),
            };
            let base = evaluate_method(case, spec.target, text, decoder);
            let after_found = match decoder.decode(spec.target, &edited) {
                Ok(f) => f,
                Err(e) => return fail(e.to_string()),
            };
            let after = evaluate_method(case, spec.target, &edited, decoder);
            let observed = new_kinds(&base.report, &after.report);
            let direction = Direction::of(base.report.car, after.report.car);
            let conflict = has_conflict(&case.gold, &after_found);
            let pass = observed == [spec.expected.kind] && direction == spec.expected.car && conflict == spec.expected.conflict;
            InjectionResult {
                spec: spec.clone(),
                observed,
                car_before: base.report.car,
                car_after: after.report.car,
                direction,
                conflict,
                pass,
                failure: None,
            }
        })
        .collect()
}

pub fn injections_csv(results: &[InjectionResult]) -> String {
    let mut out = String::from("injection,expected_kind,observed_kinds,car_before,car_after,car_impact,conflict,pass\n");
    for r in results {
        let observed: Vec<&str> = r.observed.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.3},{},{},{}",
            r.spec.label,
            r.spec.expected.kind,
            observed.join("+"),
            r.car_before,
            r.car_after,
            r.direction.as_str(),
            if r.conflict { "yes" } else { "no" },
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    out
}

// ---------------------------------------------------------------- round trip

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripRow {
    pub method: String,
    pub decoder: String,
    pub atom_precision: f64,
    pub atom_recall: f64,
    pub conflict_rate: f64,
    pub polarity_error_rate: f64,
    pub count_error_rate: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub case: String,
    /// False for the built-in parser and extractor, which share the
    /// lexicon and normalizer the gold set was authored with.
    pub independent: bool,
    pub decoder_absent: bool,
    pub rows: Vec<RoundtripRow>,
}

/// Representations the round-trip protocol hands to a decoder.
pub const ROUNDTRIP_METHODS: [Method; 4] = [Method::StructuredProse, Method::Json, Method::CclCore, Method::CclMin];

/// Gives the decoder one representation at a time, normalizes what comes
/// back and compares it with gold.
pub fn run_roundtrip(case: &CaseFixture, decoder: &mut dyn Decoder, methods: &[Method]) -> RoundtripReport {
    let mut rows = Vec::new();
    let mut absent = false;
    for &m in methods {
        let Some(text) = case.representation(m) else { continue };
        let name = decoder.name(m);
        let row = match decoder.decode(m, text) {
            Ok(found) => {
                let found = normalize_records(&found, &case.lexicon);
                match evaluate(m.as_str(), &name, lexical_tokens(text).max(1), &case.gold, &found, Some(&case.lexicon)) {
                    Ok(r) => RoundtripRow {
                        method: m.to_string(),
                        decoder: name,
                        atom_precision: r.atom_precision,
                        atom_recall: r.atom_recall,
                        conflict_rate: r.conflict_rate,
                        polarity_error_rate: r.polarity_error_rate,
                        count_error_rate: r.count_error_rate,
                        failure: None,
                    },
                    Err(e) => failed_row(m, name, e.to_string()),
                }
            }
            Err(e) => {
                absent |= matches!(e, DecodeFailure::Unavailable(_));
                failed_row(m, name, e.to_string())
            }
        };
        rows.push(row);
    }
    RoundtripReport { case: case.name.clone(), independent: decoder.independent(), decoder_absent: absent, rows }
}

fn failed_row(m: Method, decoder: String, reason: String) -> RoundtripRow {
    RoundtripRow {
        method: m.to_string(),
        decoder,
        atom_precision: 0.0,
        atom_recall: 0.0,
        conflict_rate: 0.0,
        polarity_error_rate: 0.0,
        count_error_rate: 0.0,
        failure: Some(reason),
    }
}

pub fn roundtrip_csv(reports: &[RoundtripReport]) -> String {
    let mut out = String::from(
        "case,method,decoder,independent,atom_precision,atom_recall,conflict_rate,polarity_error_rate,count_error_rate,status\n",
    );
    for r in reports {
        for row in &r.rows {
            let status = match (&row.failure, r.decoder_absent) {
                (Some(_), true) => "decoder_absent",
                (Some(_), false) => "failed",
                (None, _) => "ok",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
                r.case,
                row.method,
                row.decoder,
                r.independent,
                row.atom_precision,
                row.atom_recall,
                row.conflict_rate,
                row.polarity_error_rate,
                row.count_error_rate,
                status
            );
        }
    }
    out
}

// ---------------------------------------------------------------- verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    Weakened,
    InsufficientData,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Weakened => "weakened",
            Verdict::InsufficientData => "insufficient_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub number: u8,
    pub statement: &'static str,
    pub verdict: Verdict,
    /// Named quantities the verdict compares.
    pub numbers: Vec<(String, f64)>,
    pub note: String,
}

/// Margin by which CCL-Min's error rate must exceed JSON's to count as
/// "substantially more".
pub const SUBSTANTIAL_MARGIN: f64 = 0.05;

/// Means of `f(a)` and `f(b)` over cases that have both methods.
fn paired(reports: &[CaseReport], a: Method, b: Method, f: impl Fn(&MethodRow) -> f64) -> Option<(f64, f64, usize)> {
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| Some((r.row(a)?, r.row(b)?)))
        .filter(|(x, y)| x.report.failure.is_none() && y.report.failure.is_none())
        .map(|(x, y)| (f(x), f(y)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some((pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n, pairs.len()))
}

fn structural_error_rate(r: &MethodRow) -> f64 {
    let n = r.report.error_count(ErrorKind::Mutation)
        + r.report.error_count(ErrorKind::PolarityFlip)
        + r.report.error_count(ErrorKind::ScopeError);
    n as f64 / r.gold_atoms.max(1) as f64
}

const STATEMENTS: [&str; 5] = [
    "CCL-Core is more compact than JSON on average",
    "CCL-Core preserves more weighted atoms than free prose and no fewer than structured prose",
    "CCL-Min does not produce substantially more mutation, polarity or scope errors than JSON",
    "decoding CCL-Core recovers no fewer atoms than decoding structured prose",
    "safety-critical atoms are not dropped more often under CCL than under the full text, JSON or structured prose",
];

fn verdict(number: u8, weakened: Option<bool>, numbers: Vec<(String, f64)>, note: String) -> CriterionVerdict {
    CriterionVerdict {
        number,
        statement: STATEMENTS[usize::from(number) - 1],
        verdict: match weakened {
            None => Verdict::InsufficientData,
            Some(true) => Verdict::Weakened,
            Some(false) => Verdict::Supported,
        },
        numbers,
        note,
    }
}

/// Evaluates the five rejection criteria over collected case reports and,
/// for criterion 4, round-trip reports when present.
pub fn run_rejection_report(reports: &[CaseReport], roundtrips: &[RoundtripReport]) -> Vec<CriterionVerdict> {
    let mut out = Vec::new();
    let n = |k: &str, v: f64| (k.to_string(), v);

    // 1. compactness
    out.push(match paired(reports, Method::CclCore, Method::Json, |r| r.report.lexical_tokens as f64) {
        Some((core, json, cases)) => verdict(
            1,
            Some(core >= json),
            vec![n("ccl_core_mean_tokens", core), n("json_mean_tokens", json)],
            format!("lexical tokens over {} cases", cases),
        ),
        None => verdict(1, None, vec![], "needs ccl_core and json rows".into()),
    });

    // 2. weighted recall against prose baselines
    let prose = paired(reports, Method::CclCore, Method::Prose, |r| r.report.war);
    let sprose = paired(reports, Method::CclCore, Method::StructuredProse, |r| r.report.war);
    out.push(if prose.is_none() && sprose.is_none() {
        verdict(2, None, vec![], "needs ccl_core and a prose row".into())
    } else {
        let mut nums = Vec::new();
        let mut weak = false;
        if let Some((c, p, _)) = prose {
            nums.push(n("ccl_core_mean_war_vs_prose", c));
            nums.push(n("prose_mean_war", p));
            weak |= c <= p;
        }
        if let Some((c, s, _)) = sprose {
            nums.push(n("ccl_core_mean_war_vs_structured", c));
            nums.push(n("structured_prose_mean_war", s));
            weak |= c < s;
        }
        verdict(2, Some(weak), nums, "ties with structured prose do not weaken".into())
    });

    // 3. structural errors of min vs json
    out.push(match paired(reports, Method::CclMin, Method::Json, structural_error_rate) {
        Some((min, json, cases)) => verdict(
            3,
            Some(min > json + SUBSTANTIAL_MARGIN),
            vec![n("ccl_min_error_rate", min), n("json_error_rate", json), n("margin", SUBSTANTIAL_MARGIN)],
            format!("mutation+polarity+scope errors per gold atom over {} cases", cases),
        ),
        None => verdict(3, None, vec![], "needs ccl_min and json rows".into()),
    });

    // 4. decoding recall
    let rt_pairs: Vec<(f64, f64)> = roundtrips
        .iter()
        .filter_map(|r| {
            let get = |m: Method| r.rows.iter().find(|x| x.method == m.as_str() && x.failure.is_none()).map(|x| x.atom_recall);
            Some((get(Method::CclCore)?, get(Method::StructuredProse)?))
        })
        .collect();
    let independent = !roundtrips.is_empty() && roundtrips.iter().all(|r| r.independent);
    out.push(if !rt_pairs.is_empty() {
        let k = rt_pairs.len() as f64;
        let c = rt_pairs.iter().map(|p| p.0).sum::<f64>() / k;
        let s = rt_pairs.iter().map(|p| p.1).sum::<f64>() / k;
        let who = if independent { "independent decoder" } else { "built-in decoders, not independent" };
        verdict(
            4,
            Some(c < s),
            vec![n("ccl_core_mean_recall", c), n("structured_prose_mean_recall", s)],
            format!("round trip over {} cases; {}; budgets not matched", rt_pairs.len(), who),
        )
    } else {
        match paired(reports, Method::CclCore, Method::StructuredProse, |r| r.report.atom_recall) {
            Some((c, s, cases)) => verdict(
                4,
                Some(c < s),
                vec![n("ccl_core_mean_recall", c), n("structured_prose_mean_recall", s)],
                format!("evaluation decoders over {} cases, not independent; budgets not matched", cases),
            ),
            None => verdict(4, None, vec![], "needs ccl_core and structured_prose rows".into()),
        }
    });

    // 5. safety drops
    let drop_rate = |m: Method| -> Option<f64> {
        let rows: Vec<&MethodRow> = reports.iter().filter_map(|r| r.row(m)).collect();
        let total: usize = rows.iter().map(|r| r.safety_total).sum();
        (total > 0).then(|| rows.iter().map(|r| r.safety_dropped).sum::<usize>() as f64 / total as f64)
    };
    let ccl: Vec<(Method, f64)> =
        [Method::CclCore, Method::CclMin].into_iter().filter_map(|m| Some((m, drop_rate(m)?))).collect();
    let refs: Vec<(Method, f64)> = [Method::Full, Method::Json, Method::StructuredProse]
        .into_iter()
        .filter_map(|m| Some((m, drop_rate(m)?)))
        .collect();
    out.push(if ccl.is_empty() || refs.is_empty() {
        verdict(5, None, vec![], "needs safety gold atoms and CCL plus reference rows".into())
    } else {
        let worst = ccl.iter().map(|x| x.1).fold(0.0, f64::max);
        let best = refs.iter().map(|x| x.1).fold(1.0, f64::min);
        let nums = ccl.iter().chain(refs.iter()).map(|(m, v)| n(&format!("{}_safety_drop_rate", m), *v)).collect();
        verdict(5, Some(worst > best), nums, "share of safety gold atoms not recovered".into())
    });
    out
}

pub fn verdicts_csv(verdicts: &[CriterionVerdict]) -> String {
    let mut out = String::from("criterion,verdict,statement,numbers,note\n");
    for v in verdicts {
        let nums: Vec<String> = v.numbers.iter().map(|(k, x)| format!("{}={:.3}", k, x)).collect();
        let _ = writeln!(out, "{},{},\"{}\",\"{}\",\"{}\"", v.number, v.verdict.as_str(), v.statement, nums.join("; "), v.note);
    }
    out
}

// ---------------------------------------------------------------- calibration

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalibrationRow {
    pub label: &'static str,
    pub title: &'static str,
    pub published_lexical: usize,
    pub lexical: usize,
    pub delta: i64,
    pub cl100k: usize,
    pub o200k: usize,
}

/// Lexical counts of the printed examples next to the published ones.
pub fn calibration() -> Vec<CalibrationRow> {
    printed_examples()
        .into_iter()
        .map(|p| {
            let lexical = lexical_tokens(p.text);
            CalibrationRow {
                label: p.label,
                title: p.title,
                published_lexical: p.lexical,
                lexical,
                delta: lexical as i64 - p.lexical as i64,
                cl100k: p.cl100k,
                o200k: p.o200k,
            }
        })
        .collect()
}

pub fn calibration_csv(rows: &[CalibrationRow]) -> String {
    let mut out = String::from("example,published_lexical,lexical,delta,cl100k,o200k\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.label, r.published_lexical, r.lexical, r.delta, r.cl100k, r.o200k);
    }
    out
}

// ---------------------------------------------------------------- budget sweep

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub runs: usize,
    pub packets: usize,
    pub infeasible: usize,
    pub over_budget: usize,
    pub safety_dropped: usize,
    pub verify_failures: usize,
    pub budget_raised: usize,
    pub passthrough: usize,
}

impl SweepReport {
    pub fn clean(&self) -> bool {
        self.over_budget == 0 && self.safety_dropped == 0 && self.verify_failures == 0
    }
}

/// A random sub-history of a case: a random non-empty subset of its
/// sentences, kept in order, one message per original message.
pub fn random_history(case: &CaseFixture, rng: &mut StdRng) -> ChatHistory {
    let h = ChatHistory::from_transcript(&case.full_text);
    let mut messages = Vec::new();
    for m in &h.messages {
        let spans = context_codec_core::codec::split_sentences(&m.text);
        let kept: Vec<&str> = spans.iter().filter(|_| rng.gen_bool(0.7)).map(|&(s, e)| &m.text[s..e]).collect();
        if !kept.is_empty() {
            let mut m = m.clone();
            m.text = kept.join(" ");
            messages.push(m);
        }
    }
    if messages.is_empty() {
        return h;
    }
    ChatHistory::new(messages).expect("ids stay unique")
}

/// Compresses random sub-histories of the cases under random budgets and
/// counts budget overruns, dropped safety atoms and verification failures.
pub fn budget_sweep(cases: &[CaseFixture], runs: usize, seed: u64, cfg: &CodecConfig) -> SweepReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rep = SweepReport { seed, runs, ..SweepReport::default() };
    if cases.is_empty() {
        return rep;
    }
    for _ in 0..runs {
        let case = &cases[rng.gen_range(0..cases.len())];
        let h = random_history(case, &mut rng);
        let budget = rng.gen_range(1..=200);
        let query = if rng.gen_bool(0.5) { case.meta.query.as_str() } else { "" };
        match compress(&h, query, budget, cfg, &case.lexicon) {
            Err(CodecError::BudgetInfeasible { .. }) => rep.infeasible += 1,
            Ok(c) => {
                rep.packets += 1;
                let p = &c.packet;
                match p.fallback {
                    Some(Fallback::BudgetRaised) => rep.budget_raised += 1,
                    Some(Fallback::Passthrough) => rep.passthrough += 1,
                    _ => {}
                }
                // against the requested budget, so a raised budget counts too
                if p.passthrough.is_none() && p.tokens > budget {
                    rep.over_budget += 1;
                }
                if !c.verification.ok() {
                    rep.verify_failures += 1;
                }
                let decoded = p.decode(&case.lexicon);
                let dropped = c
                    .atoms
                    .iter()
                    .filter(|a| a.atom.safety)
                    .any(|a| !decoded.iter().any(|d| equivalent(&a.atom, d)));
                if dropped {
                    rep.safety_dropped += 1;
                }
            }
        }
    }
    rep
}

// ---------------------------------------------------------------- full report

/// Everything `ccodec report` writes, as file name → contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FullReport {
    pub cases: Vec<CaseReport>,
    pub injections: Vec<InjectionResult>,
    pub roundtrips: Vec<RoundtripReport>,
    pub verdicts: Vec<CriterionVerdict>,
    pub calibration: Vec<CalibrationRow>,
    pub sweep: SweepReport,
}

#[derive(Serialize)]
struct RowSummary<'a> {
    method: &'a str,
    decoder: &'a str,
    lexical_tokens: usize,
    external_token_counts: &'a BTreeMap<String, usize>,
    gain: f64,
    car: f64,
    war: f64,
    cd: f64,
    atom_precision: f64,
    atom_recall: f64,
    conflict_rate: f64,
    polarity_error_rate: f64,
    count_error_rate: f64,
    errors: BTreeMap<&'static str, usize>,
    failure: &'a Option<String>,
}

#[derive(Serialize)]
struct CaseSummary<'a> {
    case: &'a str,
    full_tokens: usize,
    rows: Vec<RowSummary<'a>>,
}

#[derive(Serialize)]
struct InjectionSummary<'a> {
    injection: &'a str,
    expected: &'static str,
    observed: Vec<&'static str>,
    car_impact: &'static str,
    conflict: bool,
    pass: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    cases: Vec<CaseSummary<'a>>,
    injections: Vec<InjectionSummary<'a>>,
    roundtrip: &'a [RoundtripReport],
    verdicts: &'a [CriterionVerdict],
    calibration: &'a [CalibrationRow],
    budget_sweep: &'a SweepReport,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl FullReport {
    pub fn summary_json(&self) -> String {
        let cases = self
            .cases
            .iter()
            .map(|c| CaseSummary {
                case: &c.case,
                full_tokens: c.full_tokens,
                rows: c
                    .rows
                    .iter()
                    .map(|r| {
                        let e = &r.report;
                        RowSummary {
                            method: r.method.as_str(),
                            decoder: &e.decoder,
                            lexical_tokens: e.lexical_tokens,
                            external_token_counts: &e.external_token_counts,
                            gain: round3(r.gain),
                            car: round3(e.car),
                            war: round3(e.war),
                            cd: round3(e.cd),
                            atom_precision: round3(e.atom_precision),
                            atom_recall: round3(e.atom_recall),
                            conflict_rate: round3(e.conflict_rate),
                            polarity_error_rate: round3(e.polarity_error_rate),
                            count_error_rate: round3(e.count_error_rate),
                            errors: ErrorKind::ALL
                                .iter()
                                .map(|k| (k.as_str(), e.error_count(*k)))
                                .filter(|(_, n)| *n > 0)
                                .collect(),
                            failure: &e.failure,
                        }
                    })
                    .collect(),
            })
            .collect();
        let injections = self
            .injections
            .iter()
            .map(|r| InjectionSummary {
                injection: &r.spec.label,
                expected: r.spec.expected.kind.as_str(),
                observed: r.observed.iter().map(|k| k.as_str()).collect(),
                car_impact: r.direction.as_str(),
                conflict: r.conflict,
                pass: r.pass,
            })
            .collect();
        let s = Summary {
            cases,
            injections,
            roundtrip: &self.roundtrips,
            verdicts: &self.verdicts,
            calibration: &self.calibration,
            budget_sweep: &self.sweep,
        };
        let mut out = serde_json::to_string_pretty(&s).expect("summaries serialize");
        out.push('\n');
        out
    }

    /// Output files in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut files: Vec<(String, String)> = self.cases.iter().map(|c| (format!("{}.csv", c.case), c.csv())).collect();
        files.push(("aggregate.csv".into(), aggregate_csv(&self.cases)));
        files.push(("injections.csv".into(), injections_csv(&self.injections)));
        files.push(("roundtrip.csv".into(), roundtrip_csv(&self.roundtrips)));
        files.push(("rejection.csv".into(), verdicts_csv(&self.verdicts)));
        files.push(("calibration.csv".into(), calibration_csv(&self.calibration)));
        files.push(("summary.json".into(), self.summary_json()));
        files
    }
}

/// Means per method across cases.
pub fn aggregate_csv(cases: &[CaseReport]) -> String {
    let mut out = String::from("method,cases,mean_tokens,mean_gain,mean_CAR,mean_WAR\n");
    for m in std::iter::once(Method::Full).chain(Method::COMPRESSED) {
        let rows: Vec<&MethodRow> = cases.iter().filter_map(|c| c.row(m)).collect();
        if rows.is_empty() {
            continue;
        }
        let k = rows.len() as f64;
        let mean = |f: &dyn Fn(&MethodRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
        let _ = writeln!(
            out,
            "{},{},{:.1},{:.3},{:.3},{:.3}",
            m,
            rows.len(),
            mean(&|r| r.report.lexical_tokens as f64),
            mean(&|r| r.gain),
            mean(&|r| r.report.car),
            mean(&|r| r.report.war)
        );
    }
    out
}

/// Runs the whole diagnostic suite with the given decoder factory.
pub fn full_report(
    cases: &[CaseFixture],
    counts: Option<&ExternalCounts>,
    make_decoder: &mut dyn FnMut(&CaseFixture) -> Box<dyn Decoder>,
    sweep_runs: usize,
    seed: u64,
    cfg: &CodecConfig,
) -> FullReport {
    let mut reports = Vec::new();
    let mut roundtrips = Vec::new();
    let mut injections = Vec::new();
    for case in cases {
        let mut d = make_decoder(case);
        reports.push(run_eval(case, d.as_mut(), counts));
        roundtrips.push(run_roundtrip(case, d.as_mut(), &ROUNDTRIP_METHODS));
        if case.name == "epidemic" {
            injections = run_injections(case, &injection_specs(), d.as_mut());
        }
    }
    let verdicts = run_rejection_report(&reports, &roundtrips);
    FullReport {
        cases: reports,
        injections,
        roundtrips,
        verdicts,
        calibration: calibration(),
        sweep: budget_sweep(cases, sweep_runs, seed, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edits_touch_one_member() {
        let text = "@CCL/1\nC={rental_car:false,tolls:false}\n";
        let set = Edit::SetMember { key: "C".into(), member: "tolls".into(), value: "true".into() };
        assert_eq!(apply_edit(text, &set).unwrap(), "@CCL/1\nC={rental_car:false,tolls:true}\n");
        let rm = Edit::RemoveMember { key: "C".into(), member: "tolls".into() };
        assert_eq!(apply_edit(text, &rm).unwrap(), "@CCL/1\nC={rental_car:false}\n");
        assert!(apply_edit(text, &Edit::Replace { from: "absent".into(), to: "x".into() }).is_err());
        assert!(apply_edit(text, &Edit::RemoveMember { key: "X".into(), member: "a".into() }).is_err());
    }

    #[test]
    fn sweep_is_seeded() {
        let cases = crate::fixtures::bundled();
        let cfg = CodecConfig::default();
        let a = budget_sweep(&cases, 30, 3, &cfg);
        let b = budget_sweep(&cases, 30, 3, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.runs, 30);
        assert_eq!((a.over_budget, a.safety_dropped, a.verify_failures), (0, 0, 0));
    }
}
