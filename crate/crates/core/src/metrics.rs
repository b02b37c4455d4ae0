//! Commitment-level metrics: critical and weighted atom recall, commitment
//! density, recoverability, the error taxonomy, and deployment proxies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::atom::{atom_id, conflicts, equivalent, validate, value_equiv, Atom, AtomId, Status, Value};
use crate::lexicon::Lexicon;
use crate::scoring::RenderDecision;

/// One gold atom with its importance weight and lifecycle status.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldAtom {
    pub atom: Atom,
    pub weight: f64,
    pub status: Status,
}

/// Gold critical atoms. Only active atoms count toward recall; rejected
/// and superseded ones exist to detect temporal errors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldAnnotation {
    pub entries: Vec<GoldAtom>,
}

impl GoldAnnotation {
    /// Uniform weights, all active.
    pub fn new(atoms: &[Atom]) -> Self {
        GoldAnnotation {
            entries: atoms.iter().map(|a| GoldAtom { atom: a.clone(), weight: 1.0, status: Status::Active }).collect(),
        }
    }

    pub fn with_weights(atoms: &[Atom], weights: &[f64]) -> Self {
        GoldAnnotation {
            entries: atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| GoldAtom { atom: a.clone(), weight: *w, status: Status::Active })
                .collect(),
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &GoldAtom> {
        self.entries.iter().filter(|g| g.status == Status::Active)
    }

    pub fn active_atoms(&self) -> Vec<Atom> {
        self.active().map(|g| g.atom.clone()).collect()
    }

    /// Weight by atom id (first active entry).
    pub fn weights(&self) -> BTreeMap<AtomId, f64> {
        let mut out = BTreeMap::new();
        for g in self.active() {
            out.entry(atom_id(&g.atom)).or_insert(g.weight);
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        for g in &self.entries {
            if !(g.weight.is_finite() && g.weight > 0.0) {
                return Err(format!("{}: weight {} is not positive", atom_id(&g.atom), g.weight));
            }
            if let Err(v) = validate(&g.atom) {
                return Err(format!("{}: {}", atom_id(&g.atom), v[0]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("gold set has no active atoms")]
    EmptyGold,
    #[error("token count is zero")]
    ZeroTokens,
}

fn recovered(g: &Atom, found: &[Atom]) -> bool {
    found.iter().any(|b| equivalent(g, b))
}

pub fn car(gold: &GoldAnnotation, found: &[Atom]) -> Result<f64, MetricError> {
    let total = gold.active().count();
    if total == 0 {
        return Err(MetricError::EmptyGold);
    }
    let hit = gold.active().filter(|g| recovered(&g.atom, found)).count();
    Ok(hit as f64 / total as f64)
}

pub fn war(gold: &GoldAnnotation, found: &[Atom]) -> Result<f64, MetricError> {
    let total: f64 = gold.active().map(|g| g.weight).sum();
    if gold.active().count() == 0 || total <= 0.0 {
        return Err(MetricError::EmptyGold);
    }
    let hit: f64 = gold.active().filter(|g| recovered(&g.atom, found)).map(|g| g.weight).sum();
    Ok(hit / total)
}

/// Recovered gold atoms per token.
pub fn commitment_density(gold: &GoldAnnotation, found: &[Atom], tokens: usize) -> Result<f64, MetricError> {
    if tokens == 0 {
        return Err(MetricError::ZeroTokens);
    }
    let hit = gold.active().filter(|g| recovered(&g.atom, found)).count();
    Ok(hit as f64 / tokens as f64)
}

/// Every active gold atom outside `allowed_omissions` has an equivalent in
/// `decoded`.
pub fn recoverable(decoded: &[Atom], gold: &GoldAnnotation, allowed_omissions: &[AtomId]) -> bool {
    gold.active()
        .filter(|g| !allowed_omissions.contains(&atom_id(&g.atom)))
        .all(|g| recovered(&g.atom, decoded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorKind {
    Omission,
    Weakening,
    Mutation,
    PolarityFlip,
    ScopeError,
    TemporalDecisionError,
    HallucinatedCommitment,
    SafetyBoundaryErasure,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 8] = [
        ErrorKind::Omission,
        ErrorKind::Weakening,
        ErrorKind::Mutation,
        ErrorKind::PolarityFlip,
        ErrorKind::ScopeError,
        ErrorKind::TemporalDecisionError,
        ErrorKind::HallucinatedCommitment,
        ErrorKind::SafetyBoundaryErasure,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorKind::Omission => "omission",
            ErrorKind::Weakening => "weakening",
            ErrorKind::Mutation => "mutation",
            ErrorKind::PolarityFlip => "polarity_flip",
            ErrorKind::ScopeError => "scope_error",
            ErrorKind::TemporalDecisionError => "temporal_decision_error",
            ErrorKind::HallucinatedCommitment => "hallucinated_commitment",
            ErrorKind::SafetyBoundaryErasure => "safety_boundary_erasure",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub gold_id: Option<AtomId>,
    pub found: Option<Atom>,
    pub note: String,
}

fn token_of(v: &Value) -> Option<String> {
    match v {
        Value::Enum(s) | Value::Str(s) => Some(s.to_lowercase()),
        Value::Int(i) => Some(i.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// `general` replaces `specific` under a declared generalization.
fn generalizes(lex: Option<&Lexicon>, subject: &str, specific: &Value, general: &Value) -> bool {
    let Some(lex) = lex else { return false };
    let (Some(s), Some(g)) = (token_of(specific), token_of(general)) else { return false };
    lex.generalizations.iter().any(|rule| {
        (rule.subject == subject || rule.subject == "*")
            && rule.general.to_lowercase() == g
            && (rule.specific.to_lowercase() == s || (rule.specific == "*int" && matches!(specific, Value::Int(_))))
    })
}

/// Table-style classification: at most one record per gold atom, plus one
/// per recovered atom that matches nothing in gold.
pub fn classify_errors(gold: &GoldAnnotation, found: &[Atom], lex: Option<&Lexicon>) -> Vec<ErrorRecord> {
    let mut out = Vec::new();
    let inactive: Vec<&Atom> = gold.entries.iter().filter(|g| g.status != Status::Active).map(|g| &g.atom).collect();
    for g in gold.active() {
        let g = &g.atom;
        let gid = atom_id(g);
        let record = |kind, found: Option<&Atom>, note: String| ErrorRecord {
            kind,
            gold_id: Some(gid.clone()),
            found: found.cloned(),
            note,
        };
        if let Some(b) = found.iter().find(|b| equivalent(g, b)) {
            if b.modality.strength() < g.modality.strength() {
                out.push(record(ErrorKind::Weakening, Some(b), format!("modality {} -> {}", g.modality, b.modality)));
            }
            continue;
        }
        let same: Vec<&Atom> = found.iter().filter(|b| atom_id(b) == gid).collect();
        if let Some(b) = same.first() {
            let b = *b;
            let rec = if inactive.iter().any(|x| equivalent(x, b)) {
                record(ErrorKind::TemporalDecisionError, Some(b), "carries a rejected or superseded value".to_string())
            } else if matches!((&g.value, &b.value), (Value::Bool(x), Value::Bool(y)) if x != y) {
                record(ErrorKind::PolarityFlip, Some(b), format!("{:?} -> {:?}", g.value, b.value))
            } else if generalizes(lex, &g.subject, &g.value, &b.value) {
                record(ErrorKind::Weakening, Some(b), "declared generalization".to_string())
            } else {
                record(ErrorKind::Mutation, Some(b), "incompatible value".to_string())
            };
            out.push(rec);
            continue;
        }
        let (t, s, p) = gid.unscoped();
        if let Some(b) = found.iter().find(|b| {
            let id = atom_id(b);
            id.unscoped() == (t, s, p) && value_equiv(&b.value, &g.value)
        }) {
            out.push(record(ErrorKind::ScopeError, Some(b), format!("scope {} -> {}", gid.scope, atom_id(b).scope)));
            continue;
        }
        if g.safety {
            out.push(record(ErrorKind::SafetyBoundaryErasure, None, "safety atom dropped".to_string()));
        } else {
            out.push(record(ErrorKind::Omission, None, String::new()));
        }
    }
    for b in found {
        let bid = atom_id(b);
        let known_id = gold.entries.iter().any(|g| atom_id(&g.atom) == bid);
        let scoped = gold.active().any(|g| {
            let gid = atom_id(&g.atom);
            gid.unscoped() == bid.unscoped() && gid.scope != bid.scope
        });
        if known_id || scoped {
            if !gold.active().any(|g| atom_id(&g.atom) == bid) && inactive.iter().any(|x| equivalent(x, b)) {
                out.push(ErrorRecord {
                    kind: ErrorKind::TemporalDecisionError,
                    gold_id: Some(bid),
                    found: Some(b.clone()),
                    note: "revives a rejected or superseded atom".to_string(),
                });
            }
            continue;
        }
        out.push(ErrorRecord {
            kind: ErrorKind::HallucinatedCommitment,
            gold_id: None,
            found: Some(b.clone()),
            note: String::new(),
        });
    }
    out
}

/// Share of recovered atoms that conflict with an active gold atom.
pub fn conflict_rate(gold: &GoldAnnotation, found: &[Atom]) -> f64 {
    if found.is_empty() {
        return 0.0;
    }
    let n = found.iter().filter(|b| gold.active().any(|g| conflicts(&g.atom, b))).count();
    n as f64 / found.len() as f64
}

pub fn has_conflict(gold: &GoldAnnotation, found: &[Atom]) -> bool {
    found.iter().any(|b| gold.active().any(|g| conflicts(&g.atom, b)))
}

pub fn atom_precision(gold: &GoldAnnotation, found: &[Atom]) -> f64 {
    if found.is_empty() {
        return 0.0;
    }
    let n = found.iter().filter(|b| gold.active().any(|g| equivalent(&g.atom, b))).count();
    n as f64 / found.len() as f64
}

fn rate(errors: &[ErrorRecord], kinds: &[ErrorKind], pool: &[&Atom]) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let ids: Vec<AtomId> = pool.iter().map(|a| atom_id(a)).collect();
    let n = errors
        .iter()
        .filter(|e| kinds.contains(&e.kind) && e.gold_id.as_ref().is_some_and(|id| ids.contains(id)))
        .count();
    n as f64 / pool.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    /// Which decoder produced the recovered set.
    pub decoder: String,
    pub lexical_tokens: usize,
    pub external_token_counts: BTreeMap<String, usize>,
    pub car: f64,
    pub war: f64,
    pub cd: f64,
    pub atom_precision: f64,
    pub atom_recall: f64,
    pub conflict_rate: f64,
    pub polarity_error_rate: f64,
    pub count_error_rate: f64,
    pub errors: Vec<ErrorRecord>,
    /// Set when the decoder failed; metrics are then computed on an empty
    /// recovered set.
    pub failure: Option<String>,
}

impl EvalReport {
    pub fn error_count(&self, kind: ErrorKind) -> usize {
        self.errors.iter().filter(|e| e.kind == kind).count()
    }
}

pub fn evaluate(
    method: &str,
    decoder: &str,
    lexical_tokens: usize,
    gold: &GoldAnnotation,
    found: &[Atom],
    lex: Option<&Lexicon>,
) -> Result<EvalReport, MetricError> {
    let errors = classify_errors(gold, found, lex);
    let active: Vec<&Atom> = gold.active().map(|g| &g.atom).collect();
    let bools: Vec<&Atom> = active.iter().copied().filter(|a| matches!(a.value, Value::Bool(_))).collect();
    let ints: Vec<&Atom> = active.iter().copied().filter(|a| matches!(a.value, Value::Int(_))).collect();
    let car = car(gold, found)?;
    Ok(EvalReport {
        method: method.to_string(),
        decoder: decoder.to_string(),
        lexical_tokens,
        external_token_counts: BTreeMap::new(),
        car,
        war: war(gold, found)?,
        cd: commitment_density(gold, found, lexical_tokens)?,
        atom_precision: atom_precision(gold, found),
        atom_recall: car,
        conflict_rate: conflict_rate(gold, found),
        polarity_error_rate: rate(&errors, &[ErrorKind::PolarityFlip], &bools),
        count_error_rate: rate(&errors, &[ErrorKind::Mutation, ErrorKind::Weakening], &ints),
        errors,
        failure: None,
    })
}

/// Column header of the per-method report rows.
pub const REPORT_COLUMNS: &str =
    "method,lexical_tokens,cl100k_tokens,o200k_tokens,CAR,WAR,atom_precision,atom_recall,conflict_rate";

/// One report row; absent external counts print as `NA`.
pub fn report_row(r: &EvalReport) -> String {
    let ext = |k: &str| r.external_token_counts.get(k).map_or_else(|| "NA".to_string(), |n| n.to_string());
    format!(
        "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
        r.method,
        r.lexical_tokens,
        ext("cl100k"),
        ext("o200k"),
        r.car,
        r.war,
        r.atom_precision,
        r.atom_recall,
        r.conflict_rate
    )
}

/// Artifacts the deployment proxies are computed from.
#[derive(Debug, Clone, Default)]
pub struct ProxyInputs<'a> {
    /// Repeated passes of the same extractor over the same input.
    pub passes: Vec<&'a [Atom]>,
    /// One atom set per independent extractor.
    pub extractors: Vec<&'a [Atom]>,
    /// Atoms before encoding and after decoding the packet.
    pub roundtrip: Option<(&'a [Atom], &'a [Atom])>,
    /// Final atoms with their render decision and risk.
    pub rendered: Vec<(&'a Atom, RenderDecision, f64)>,
    pub theta_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyReport {
    pub self_consistency: f64,
    pub cross_agreement: Option<f64>,
    pub roundtrip_consistency: Option<f64>,
    pub schema_failures: usize,
    pub low_confidence: usize,
    pub high_risk_coverage: Option<f64>,
}

/// Symmetric agreement: equivalent atoms over the union of both sets.
pub fn agreement(a: &[Atom], b: &[Atom]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let shared = a.iter().filter(|x| b.iter().any(|y| equivalent(x, y))).count();
    let only_b = b.iter().filter(|y| !a.iter().any(|x| equivalent(x, y))).count();
    shared as f64 / (a.len() + only_b) as f64
}

fn mean_against_first(sets: &[&[Atom]]) -> f64 {
    if sets.len() < 2 {
        return 1.0;
    }
    sets[1..].iter().map(|s| agreement(sets[0], s)).sum::<f64>() / (sets.len() - 1) as f64
}

pub fn deployment_proxies(inputs: &ProxyInputs) -> ProxyReport {
    let atoms: Vec<&Atom> = match inputs.passes.first() {
        Some(first) => first.iter().collect(),
        None => inputs.rendered.iter().map(|(a, _, _)| *a).collect(),
    };
    let high: Vec<&(&Atom, RenderDecision, f64)> =
        inputs.rendered.iter().filter(|(a, _, r)| a.safety || *r > inputs.theta_max).collect();
    ProxyReport {
        self_consistency: mean_against_first(&inputs.passes),
        cross_agreement: (inputs.extractors.len() >= 2).then(|| mean_against_first(&inputs.extractors)),
        roundtrip_consistency: inputs.roundtrip.map(|(before, after)| agreement(before, after)),
        schema_failures: atoms.iter().filter(|a| validate(a).is_err()).count(),
        low_confidence: atoms.iter().filter(|a| a.confidence < 0.50).count(),
        high_risk_coverage: (!high.is_empty()).then(|| {
            high.iter().filter(|(_, d, _)| *d == RenderDecision::CanonicalPlusSpan).count() as f64 / high.len() as f64
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{AtomType, Modality};
    use alloc::vec;

    fn c(subject: &str, value: Value) -> Atom {
        Atom::new(AtomType::Constraint, subject, "allowed", value, "generated_artifact")
    }

    fn twelve() -> Vec<Atom> {
        (0..12).map(|i| c(&format!("s{}", i), Value::Bool(true))).collect()
    }

    #[test]
    fn recall_arithmetic() {
        let gold = GoldAnnotation::new(&twelve());
        assert_eq!(car(&gold, &twelve()).unwrap(), 1.0);
        assert!((car(&gold, &twelve()[..8]).unwrap() - 8.0 / 12.0).abs() < 1e-9);
        assert_eq!(car(&GoldAnnotation::default(), &[]), Err(MetricError::EmptyGold));
        let pair = vec![c("a", Value::Bool(false)), c("b", Value::Bool(false))];
        let gold = GoldAnnotation::with_weights(&pair, &[5.0, 1.0]);
        assert!((war(&gold, &pair[1..]).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((war(&gold, &pair[..1]).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn density_and_recoverability() {
        let atoms = twelve();
        let gold = GoldAnnotation::new(&atoms);
        assert!((commitment_density(&gold, &atoms[..10], 50).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(commitment_density(&gold, &[], 50).unwrap(), 0.0);
        assert_eq!(commitment_density(&gold, &atoms, 0), Err(MetricError::ZeroTokens));
        assert!(recoverable(&atoms, &gold, &[]));
        assert!(!recoverable(&atoms[1..], &gold, &[]));
        assert!(recoverable(&atoms[1..], &gold, &[atom_id(&atoms[0])]));
    }

    #[test]
    fn taxonomy() {
        let count = Atom::new(AtomType::Constraint, "agent_count", "equals", Value::Int(350), "generated_artifact");
        let libs = c("external_libraries", Value::Bool(false));
        let mut guard = Atom::new(AtomType::SafetyBoundary, "medical_advice", "allowed", Value::Bool(false), "safety_boundary");
        guard.safety = true;
        let gold = GoldAnnotation::new(&[count.clone(), libs.clone(), guard]);
        assert!(classify_errors(&gold, &gold.active_atoms(), None).is_empty());

        let mut changed = count.clone();
        changed.value = Value::Int(200);
        let flipped = c("external_libraries", Value::Bool(true));
        let mut rescoped = libs.clone();
        rescoped.scope = "session".into();
        let stray = c("stray", Value::Bool(true));
        let errs = classify_errors(&gold, &[changed, rescoped, stray], None);
        let kinds: Vec<ErrorKind> = errs.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [ErrorKind::Mutation, ErrorKind::ScopeError, ErrorKind::SafetyBoundaryErasure, ErrorKind::HallucinatedCommitment]
        );
        let errs = classify_errors(&gold, core::slice::from_ref(&flipped), None);
        assert_eq!(errs[1].kind, ErrorKind::PolarityFlip);
        assert!(has_conflict(&gold, &[flipped]));

        let weak = count.clone().with_modality(Modality::May);
        assert_eq!(classify_errors(&GoldAnnotation::new(&[count]), &[weak], None)[0].kind, ErrorKind::Weakening);
    }

    #[test]
    fn temporal_errors_need_status() {
        let sintra = Atom::new(AtomType::Decision, "day_trip", "selected", Value::Enum("Sintra".into()), "current_itinerary");
        let mut cascais = sintra.clone();
        cascais.value = Value::Enum("Cascais".into());
        let mut gold = GoldAnnotation::new(&[cascais, sintra.clone()]);
        gold.entries[1].status = Status::Superseded;
        let errs = classify_errors(&gold, &[sintra], None);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ErrorKind::TemporalDecisionError);
    }

    #[test]
    fn proxies() {
        let atoms = twelve();
        let mut bad = atoms.clone();
        bad[0].subject = "Bad Subject".into();
        let p = deployment_proxies(&ProxyInputs {
            passes: vec![&bad, &bad],
            rendered: atoms.iter().map(|a| (a, RenderDecision::CanonicalPlusSpan, 0.9)).collect(),
            theta_max: 0.7,
            ..Default::default()
        });
        assert_eq!(p.self_consistency, 1.0);
        assert_eq!(p.schema_failures, 1);
        assert_eq!(p.high_risk_coverage, Some(1.0));
        assert_eq!(p.cross_agreement, None);
    }
}
