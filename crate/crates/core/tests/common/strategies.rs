//! Generators shared by the property suites. Also compiled into the std
//! crate's acceptance target.
#![allow(dead_code)]

use context_codec_core::ccl::{lexes_as_token, parse_ccl, ccl_to_atoms, CclDocument, CclValue, Profile};
use context_codec_core::lexicon::builtin;
use context_codec_core::{Atom, AtomType, Modality, Value};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::subsequence;

pub fn entry_key() -> impl Strategy<Value = String> {
    "[A-Z][A-Z0-9_]{0,5}"
}

pub fn token() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_.+/-]{0,9}".prop_filter("lexes as a token", |t| lexes_as_token(t))
}

fn bare_key() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,7}"
}

fn map_key() -> impl Strategy<Value = String> {
    prop_oneof![4 => bare_key(), 1 => "[ -~]{0,6}"]
}

fn number() -> impl Strategy<Value = String> {
    prop_oneof![
        "-?[1-9][0-9]{0,4}",
        Just("0".to_string()),
        "-?[0-9]{1,3}\\.[0-9]{1,3}",
        "\\.[0-9]{1,3}",
    ]
}

fn string() -> impl Strategy<Value = String> {
    prop_oneof!["[ -~]{0,12}", "\\PC{0,8}", "[a-z\"\\\\\n\t\r é→]{0,8}"]
}

fn unique_pairs(pairs: Vec<(String, CclValue)>) -> Vec<(String, CclValue)> {
    let mut out: Vec<(String, CclValue)> = Vec::new();
    for (k, v) in pairs {
        if !out.iter().any(|(k2, _)| *k2 == k) {
            out.push((k, v));
        }
    }
    out
}

pub fn ccl_value() -> impl Strategy<Value = CclValue> {
    let leaf = prop_oneof![
        token().prop_map(CclValue::Token),
        string().prop_map(CclValue::Str),
        number().prop_map(CclValue::Number),
        any::<bool>().prop_map(CclValue::Bool),
        btree_set(bare_key(), 1..5).prop_map(|s| CclValue::Flags(s.into_iter().collect())),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            vec(inner.clone(), 0..4).prop_map(CclValue::List),
            vec((map_key(), inner.clone()), 0..4).prop_map(|p| CclValue::Map(unique_pairs(p))),
            (prop_oneof![token().prop_map(CclValue::Token), vec(inner, 0..3).prop_map(CclValue::List)], token())
                .prop_map(|(src, dst)| CclValue::Arrow(Box::new(src), dst)),
        ]
    })
}

/// Any core document the emitter accepts.
pub fn ccl_document() -> impl Strategy<Value = CclDocument> {
    vec((entry_key(), ccl_value()), 0..8).prop_map(|entries| {
        let mut doc = CclDocument::new(Profile::Core);
        for (k, v) in entries {
            doc.push(k, v);
        }
        doc
    })
}

/// Atom sets with distinct ids, as gold annotations.
pub fn gold_atoms(max: usize) -> impl Strategy<Value = Vec<Atom>> {
    vec((0..1000i64, any::<bool>()), 1..max).prop_map(|vals| {
        vals.into_iter()
            .enumerate()
            .map(|(i, (n, b))| {
                let value = if i % 3 == 0 { Value::Bool(b) } else { Value::Int(n) };
                Atom::new(AtomType::Constraint, format!("s{}", i), "equals", value, "task")
            })
            .collect()
    })
}

/// A gold set plus a found set: a subsample of gold, some values mutated,
/// with unrelated extras.
pub fn gold_and_found() -> impl Strategy<Value = (Vec<Atom>, Vec<Atom>)> {
    gold_atoms(20).prop_flat_map(|gold| {
        let n = gold.len();
        (Just(gold.clone()), subsequence(gold, 0..=n), vec(any::<bool>(), n), 0..4usize).prop_map(
            |(gold, kept, mutate, extras)| {
                let mut found: Vec<Atom> = kept
                    .into_iter()
                    .zip(mutate)
                    .map(|(mut a, m)| {
                        if m {
                            a.value = Value::Int(-1);
                        }
                        a
                    })
                    .collect();
                for i in 0..extras {
                    found.push(Atom::new(AtomType::Goal, format!("extra{}", i), "equals", Value::Int(1), "task"));
                }
                (gold, found)
            },
        )
    })
}

const DESTS: &[&str] = &["Lisbon", "Porto", "Madrid"];
const PREFS: &[&str] = &["walkable", "local_food", "bookstores", "viewpoints", "fado", "museums"];
const TRIPS: &[&str] = &["Sintra", "Cascais", "Evora"];
const CONSTRAINTS: &[&str] = &["rental_car", "nightlife_heavy", "far_out_lodging", "tolls"];
const BASES: &[&str] = &["Baixa", "Chiado", "Alfama", "Belem"];
const OUTS: &[&str] = &["day_by_day", "transit_notes", "rainy_alt", "cost_ranges"];

fn flags_text(items: &[&str]) -> String {
    format!("{{{}}}", items.join(","))
}

/// A trip planning state in the grouped CCL view, as atoms.
pub fn trip_state() -> impl Strategy<Value = Vec<Atom>> {
    (
        proptest::option::of(proptest::sample::select(DESTS)),
        proptest::option::of(1..15u32),
        subsequence(PREFS, 0..=PREFS.len()),
        proptest::option::of(proptest::sample::select(TRIPS)),
        subsequence(CONSTRAINTS, 0..=CONSTRAINTS.len()),
        vec(any::<bool>(), CONSTRAINTS.len()),
        subsequence(BASES, 0..=2),
        subsequence(OUTS, 0..=OUTS.len()),
    )
        .prop_map(|(dest, days, prefs, trip, cons, bools, bases, outs)| {
            let mut text = String::from("@CCL/1\n");
            if let Some(d) = dest {
                text += &format!("DEST={}\n", d);
            }
            if let Some(n) = days {
                text += &format!("DAYS={}\n", n);
            }
            if !prefs.is_empty() {
                text += &format!("PREF={}\n", flags_text(&prefs));
            }
            if let Some(t) = trip {
                text += &format!("PLAN={{day_trip:{}}}\n", t);
            }
            if !cons.is_empty() {
                let pairs: Vec<String> = cons.iter().zip(&bools).map(|(c, b)| format!("{}:{}", c, b)).collect();
                text += &format!("C={{{}}}\n", pairs.join(","));
            }
            if !bases.is_empty() {
                text += &format!("D={{base:[{}]}}\n", bases.join(","));
            }
            if !outs.is_empty() {
                text += &format!("OUT={}\n", flags_text(&outs));
            }
            let lex = builtin::lexicon("trip_state").expect("builtin lexicon");
            ccl_to_atoms(&parse_ccl(&text).expect("generated state parses"), &lex).expect("generated state decodes")
        })
}

pub fn modality() -> impl Strategy<Value = Modality> {
    proptest::sample::select(Modality::ALL)
}
