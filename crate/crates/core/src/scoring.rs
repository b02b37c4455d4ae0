//! Confidence aggregation, risk, safety flagging and the render policy.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::atom::{Atom, AtomType, Evidence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSignals {
    pub e_span: f64,
    pub e_agree: f64,
    pub e_roundtrip: f64,
    pub e_schema: f64,
    pub e_anchor: f64,
}

impl ConfidenceSignals {
    pub const FULL: ConfidenceSignals =
        ConfidenceSignals { e_span: 1.0, e_agree: 1.0, e_roundtrip: 1.0, e_schema: 1.0, e_anchor: 1.0 };

    pub fn is_valid(&self) -> bool {
        [self.e_span, self.e_agree, self.e_roundtrip, self.e_schema, self.e_anchor]
            .iter()
            .all(|x| (0.0..=1.0).contains(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceWeights {
    pub w_span: f64,
    pub w_agree: f64,
    pub w_roundtrip: f64,
    pub w_schema: f64,
    pub w_anchor: f64,
}

impl Default for ConfidenceWeights {
    fn default() -> Self {
        ConfidenceWeights { w_span: 0.30, w_agree: 0.25, w_roundtrip: 0.20, w_schema: 0.15, w_anchor: 0.10 }
    }
}

impl ConfidenceWeights {
    pub fn is_valid(&self) -> bool {
        let ws = [self.w_span, self.w_agree, self.w_roundtrip, self.w_schema, self.w_anchor];
        ws.iter().all(|w| *w >= 0.0) && (ws.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

/// Multipliers for criticality/5, safety, 1-conf and ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho4: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights { rho1: 0.25, rho2: 0.25, rho3: 0.25, rho4: 0.25 }
    }
}

impl RiskWeights {
    pub fn is_valid(&self) -> bool {
        [self.rho1, self.rho2, self.rho3, self.rho4].iter().all(|r| *r >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyThresholds {
    pub theta_min: f64,
    pub theta_max: f64,
    pub conf_low: f64,
    pub conf_span: f64,
}

impl Default for PolicyThresholds {
    fn default() -> Self {
        PolicyThresholds { theta_min: 0.25, theta_max: 0.70, conf_low: 0.50, conf_span: 0.70 }
    }
}

impl PolicyThresholds {
    pub fn is_valid(&self) -> bool {
        0.0 <= self.theta_min && self.theta_min < self.theta_max && self.theta_max <= 1.0 && self.conf_low < self.conf_span
    }
}

/// All tunables of the scoring stage, as loaded from a policy file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub confidence: ConfidenceWeights,
    pub risk: RiskWeights,
    pub thresholds: PolicyThresholds,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid policy configuration: {0}")]
pub struct PolicyError(pub &'static str);

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !self.confidence.is_valid() {
            return Err(PolicyError("confidence weights must be nonnegative and sum to 1"));
        }
        if !self.risk.is_valid() {
            return Err(PolicyError("risk weights must be nonnegative"));
        }
        if !self.thresholds.is_valid() {
            return Err(PolicyError("thresholds need 0 <= theta_min < theta_max <= 1 and conf_low < conf_span"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderDecision {
    PreserveRawMessage,
    CanonicalPlusSpan,
    CoreWithSpan,
    Core,
    MinAllowed,
}

impl RenderDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            RenderDecision::PreserveRawMessage => "preserve_raw_message",
            RenderDecision::CanonicalPlusSpan => "canonical_plus_span",
            RenderDecision::CoreWithSpan => "core_with_span",
            RenderDecision::Core => "core",
            RenderDecision::MinAllowed => "min_allowed",
        }
    }

    /// Whether the atom's evidence goes into the RAW section.
    pub fn wants_raw(&self) -> bool {
        matches!(
            self,
            RenderDecision::PreserveRawMessage | RenderDecision::CanonicalPlusSpan | RenderDecision::CoreWithSpan
        )
    }
}

pub fn confidence(sig: &ConfidenceSignals, w: &ConfidenceWeights) -> f64 {
    let c = w.w_span * sig.e_span
        + w.w_agree * sig.e_agree
        + w.w_roundtrip * sig.e_roundtrip
        + w.w_schema * sig.e_schema
        + w.w_anchor * sig.e_anchor;
    c.clamp(0.0, 1.0)
}

pub fn risk(a: &Atom, conf: f64, rw: &RiskWeights, ambiguity: f64) -> f64 {
    let crit = f64::from(a.criticality) / 5.0;
    let safety = if a.safety { 1.0 } else { 0.0 };
    let r = rw.rho1 * crit + rw.rho2 * safety + rw.rho3 * (1.0 - conf) + rw.rho4 * ambiguity;
    r.clamp(0.0, 1.0)
}

type EvidenceCheck<'a> = &'a dyn Fn(Option<&Evidence>) -> bool;
type AtomCheck<'a> = &'a dyn Fn(&Atom) -> bool;

/// The five safety predicates; any may be absent.
#[derive(Default, Clone, Copy)]
pub struct SafetyCheckers<'a> {
    pub source_policy_match: Option<EvidenceCheck<'a>>,
    pub safety_classifier_match: Option<EvidenceCheck<'a>>,
    pub extractor_safety_label: Option<AtomCheck<'a>>,
    pub human_policy_tag: Option<EvidenceCheck<'a>>,
    /// Type membership is built in; this flag only allows disabling it.
    pub skip_type_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SafetyVerdict {
    pub flagged: bool,
    /// Names of predicates that fired.
    pub fired: Vec<&'static str>,
    /// Names of predicates with no checker supplied.
    pub missing: Vec<&'static str>,
}

/// `privacy_constraint` has no type of its own: it is a constraint scoped
/// to privacy.
pub fn is_safety_type(a: &Atom) -> bool {
    a.atom_type == AtomType::SafetyBoundary || (a.atom_type == AtomType::Constraint && a.scope == "privacy")
}

pub fn safety_verdict(a: &Atom, checkers: &SafetyCheckers) -> SafetyVerdict {
    let mut v = SafetyVerdict::default();
    let ev = a.evidence.as_ref();
    let evidence_checks: [(&'static str, Option<EvidenceCheck>); 3] = [
        ("source_policy_match", checkers.source_policy_match),
        ("safety_classifier_match", checkers.safety_classifier_match),
        ("human_policy_tag", checkers.human_policy_tag),
    ];
    for (name, check) in evidence_checks {
        match check {
            Some(f) if f(ev) => v.fired.push(name),
            Some(_) => {}
            None => v.missing.push(name),
        }
    }
    match checkers.extractor_safety_label {
        Some(f) if f(a) => v.fired.push("extractor_safety_label"),
        Some(_) => {}
        None => v.missing.push("extractor_safety_label"),
    }
    if !checkers.skip_type_check && is_safety_type(a) {
        v.fired.push("atom_type");
    }
    v.flagged = !v.fired.is_empty();
    v
}

pub fn safety_flag(a: &Atom, checkers: &SafetyCheckers) -> bool {
    safety_verdict(a, checkers).flagged
}

/// The conservative cascade; `safety` is the result of `safety_flag`.
pub fn render_policy(safety: bool, criticality: u8, conf: f64, risk: f64, th: &PolicyThresholds) -> RenderDecision {
    if safety {
        RenderDecision::CanonicalPlusSpan
    } else if conf < th.conf_low && criticality >= 3 {
        RenderDecision::PreserveRawMessage
    } else if conf < th.conf_span {
        RenderDecision::CoreWithSpan
    } else if risk < th.theta_min && criticality <= 2 {
        RenderDecision::MinAllowed
    } else if risk > th.theta_max {
        RenderDecision::CanonicalPlusSpan
    } else {
        RenderDecision::Core
    }
}

/// `render_policy` for an atom whose safety bit already reflects the
/// checkers.
pub fn decide(a: &Atom, conf: f64, risk: f64, th: &PolicyThresholds) -> RenderDecision {
    render_policy(a.safety || is_safety_type(a), a.criticality, conf, risk, th)
}

/// Human-readable dump of the active configuration, echoed in reports.
pub fn describe(cfg: &PolicyConfig) -> String {
    alloc::format!(
        "confidence=({:.2},{:.2},{:.2},{:.2},{:.2}) risk=({:.2},{:.2},{:.2},{:.2}) theta_min={:.2} theta_max={:.2} conf_low={:.2} conf_span={:.2}",
        cfg.confidence.w_span,
        cfg.confidence.w_agree,
        cfg.confidence.w_roundtrip,
        cfg.confidence.w_schema,
        cfg.confidence.w_anchor,
        cfg.risk.rho1,
        cfg.risk.rho2,
        cfg.risk.rho3,
        cfg.risk.rho4,
        cfg.thresholds.theta_min,
        cfg.thresholds.theta_max,
        cfg.thresholds.conf_low,
        cfg.thresholds.conf_span
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Value;

    fn sig(v: [f64; 5]) -> ConfidenceSignals {
        ConfidenceSignals { e_span: v[0], e_agree: v[1], e_roundtrip: v[2], e_schema: v[3], e_anchor: v[4] }
    }

    #[test]
    fn confidence_examples() {
        let w = ConfidenceWeights::default();
        assert!(w.is_valid());
        assert!((confidence(&sig([1.0; 5]), &w) - 1.0).abs() < 1e-12);
        assert_eq!(confidence(&sig([0.0; 5]), &w), 0.0);
        assert!((confidence(&sig([1.0, 1.0, 0.0, 1.0, 1.0]), &w) - 0.80).abs() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let rw = RiskWeights::default();
        let a = Atom::new(AtomType::Constraint, "x", "allowed", Value::Bool(false), "task").with_criticality(5);
        assert!((risk(&a, 0.5, &rw, 0.0) - 0.375).abs() < 1e-12);
        let low = a.clone().with_criticality(1);
        assert!((risk(&low, 1.0, &rw, 0.0) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn policy_examples() {
        let th = PolicyThresholds::default();
        assert_eq!(render_policy(true, 1, 0.99, 0.0, &th), RenderDecision::CanonicalPlusSpan);
        assert_eq!(render_policy(false, 3, 0.49, 0.3, &th), RenderDecision::PreserveRawMessage);
        assert_eq!(render_policy(false, 2, 0.95, 0.10, &th), RenderDecision::MinAllowed);
        assert_eq!(render_policy(false, 4, 0.95, 0.8, &th), RenderDecision::CanonicalPlusSpan);
        assert_eq!(render_policy(false, 4, 0.95, 0.5, &th), RenderDecision::Core);
        assert_eq!(render_policy(false, 2, 0.6, 0.1, &th), RenderDecision::CoreWithSpan);
    }

    #[test]
    fn safety_predicates() {
        let a = Atom::new(AtomType::SafetyBoundary, "scope", "equals", Value::enum_token("defensive_only"), "safety_boundary");
        let v = safety_verdict(&a, &SafetyCheckers::default());
        assert!(v.flagged);
        assert_eq!(v.missing.len(), 4);
        let plain = Atom::new(AtomType::Preference, "walkable", "desired", Value::Bool(true), "task");
        assert!(!safety_flag(&plain, &SafetyCheckers::default()));
        let tag = |_: Option<&Evidence>| true;
        let checkers = SafetyCheckers { human_policy_tag: Some(&tag), ..Default::default() };
        assert!(safety_flag(&plain, &checkers));
        let privacy = Atom::new(AtomType::Constraint, "emails", "allowed", Value::Bool(false), "privacy");
        assert!(safety_flag(&privacy, &SafetyCheckers::default()));
    }
}
