mod common;

use common::strategies::*;
use context_codec_core::atom::{atom_id, conflicts, equivalent, validate};
use context_codec_core::ccl::{emit_ccl, parse_ccl, Profile};
use context_codec_core::diff::{apply_patch, diff_states};
use context_codec_core::lexicon::builtin;
use context_codec_core::metrics::{car, classify_errors, commitment_density, war, GoldAnnotation};
use context_codec_core::normalize::canonicalize_subject;
use context_codec_core::scoring::{
    confidence, render_policy, risk, ConfidenceSignals, ConfidenceWeights, PolicyThresholds, RenderDecision, RiskWeights,
};
use context_codec_core::tokenize::lexical_tokens;
use context_codec_core::{Atom, AtomType, Evidence, Value};
use proptest::prelude::*;

fn same_set(a: &[Atom], b: &[Atom]) -> bool {
    a.len() == b.len() && b.iter().all(|x| a.iter().any(|y| equivalent(x, y)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn parse_inverts_emit(doc in ccl_document()) {
        let text = emit_ccl(&doc, Profile::Core).unwrap();
        prop_assert!(text.bytes().all(|b| b == b'\t' || b == b'\n' || (0x20..=0x7e).contains(&b)));
        prop_assert_eq!(&text, &emit_ccl(&doc, Profile::Core).unwrap());
        let back = parse_ccl(&text).map_err(|e| TestCaseError::fail(format!("{}\n{}", e, text)))?;
        prop_assert_eq!(back, doc, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn war_equals_car_under_uniform_weights((gold, found) in gold_and_found()) {
        let g = GoldAnnotation::new(&gold);
        let (c, w) = (car(&g, &found).unwrap(), war(&g, &found).unwrap());
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - w).abs() < 1e-9);
    }

    #[test]
    fn recall_is_monotone((gold, found) in gold_and_found(), pick in any::<prop::sample::Index>()) {
        let weights: Vec<f64> = (1..=gold.len()).map(|i| i as f64).collect();
        let g = GoldAnnotation::with_weights(&gold, &weights);
        let mut more = found.clone();
        more.push(pick.get(&gold).clone());
        prop_assert!(car(&g, &more).unwrap() >= car(&g, &found).unwrap());
        prop_assert!(war(&g, &more).unwrap() >= war(&g, &found).unwrap());
        prop_assert!(commitment_density(&g, &more, 50).unwrap() >= commitment_density(&g, &found, 50).unwrap());
    }

    #[test]
    fn exact_recovery_has_no_errors(gold in gold_atoms(20)) {
        prop_assert!(classify_errors(&GoldAnnotation::new(&gold), &gold, None).is_empty());
    }

    #[test]
    fn apply_inverts_diff(before in trip_state(), after in trip_state()) {
        let lex = builtin::lexicon("trip_state").unwrap();
        prop_assert!(diff_states(&before, &before, &lex).is_empty());
        let patch = diff_states(&before, &after, &lex);
        let applied = apply_patch(&before, &patch, &lex).unwrap();
        prop_assert!(applied.atoms.iter().all(|a| validate(a).is_ok()));
        prop_assert!(same_set(&applied.atoms, &after), "{:?}", patch);
    }

    #[test]
    fn id_ignores_value_modality_evidence_confidence(
        v in 0..100i64, m in modality(), conf in 0.0..=1.0f64, start in 0..50usize
    ) {
        let a = Atom::new(AtomType::Constraint, "agent_count", "equals", Value::Int(350), "task");
        let b = a.clone()
            .with_modality(m)
            .with_confidence(conf)
            .with_evidence(Evidence::new("m1", start, start + 3, "350"));
        let b = Atom { value: Value::Int(v), ..b };
        prop_assert_eq!(atom_id(&a), atom_id(&b));
    }

    #[test]
    fn equivalence_and_conflict_laws(x in 0..3i64, y in 0..3i64, z in 0..3i64, m in modality()) {
        let mk = |v: i64| Atom::new(AtomType::Constraint, "s", "equals", Value::Int(v), "task");
        let (a, b, c) = (mk(x), mk(y).with_modality(m), mk(z));
        prop_assert!(equivalent(&a, &a));
        prop_assert_eq!(equivalent(&a, &b), equivalent(&b, &a));
        if equivalent(&a, &b) && equivalent(&b, &c) {
            prop_assert!(equivalent(&a, &c));
        }
        prop_assert!(!conflicts(&a, &a));
        prop_assert_eq!(conflicts(&a, &c), conflicts(&c, &a));
        if conflicts(&a, &c) {
            prop_assert_eq!(atom_id(&a), atom_id(&c));
            prop_assert!(!equivalent(&a, &c));
        }
    }

    #[test]
    fn lexical_count_bounds(a in "\\PC{0,40}", b in "\\PC{0,40}") {
        let ab = format!("{}{}", a, b);
        let (na, nb, nab) = (lexical_tokens(&a), lexical_tokens(&b), lexical_tokens(&ab));
        prop_assert!(nab <= na + nb + 1);
        prop_assert!(nab >= na.max(nb));
        prop_assert_eq!(nab, lexical_tokens(&ab));
    }

    #[test]
    fn confidence_monotone_per_signal(base in prop::array::uniform5(0.0..=1.0f64), i in 0..5usize, bump in 0.0..=1.0f64) {
        let w = ConfidenceWeights::default();
        let sig = |v: [f64; 5]| ConfidenceSignals { e_span: v[0], e_agree: v[1], e_roundtrip: v[2], e_schema: v[3], e_anchor: v[4] };
        let mut raised = base;
        raised[i] = (raised[i] + bump).min(1.0);
        prop_assert!(confidence(&sig(raised), &w) >= confidence(&sig(base), &w));
    }

    #[test]
    fn risk_monotone(crit in 1..=4u8, conf in 0.0..=1.0f64, drop in 0.0..=1.0f64, amb in 0.0..=0.5f64) {
        let rw = RiskWeights::default();
        let a = Atom::new(AtomType::Constraint, "x", "allowed", Value::Bool(false), "task").with_criticality(crit);
        let base = risk(&a, conf, &rw, amb);
        prop_assert!(risk(&a.clone().with_criticality(crit + 1), conf, &rw, amb) >= base);
        prop_assert!(risk(&a, conf, &rw, amb + 0.5) >= base);
        prop_assert!(risk(&a, (conf - drop).max(0.0), &rw, amb) >= base);
    }

    #[test]
    fn min_needs_low_stakes(safety in any::<bool>(), crit in 1..=5u8, conf in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        let d = render_policy(safety, crit, conf, r, &PolicyThresholds::default());
        if safety || crit > 2 || conf < 0.70 {
            prop_assert_ne!(d, RenderDecision::MinAllowed);
        }
    }
}

#[test]
fn aliases_converge() {
    for name in builtin::NAMES {
        let lex = builtin::lexicon(name).unwrap();
        for e in &lex.subject_entries {
            assert_eq!(canonicalize_subject(&e.canonical, &lex).as_deref(), Some(e.canonical.as_str()), "{}", name);
            for alias in &e.aliases {
                assert_eq!(canonicalize_subject(alias, &lex).as_deref(), Some(e.canonical.as_str()), "{}: {}", name, alias);
            }
            for neg in &e.negative_examples {
                assert_ne!(canonicalize_subject(neg, &lex).as_deref(), Some(e.canonical.as_str()), "{}: {}", name, neg);
            }
        }
    }
}
