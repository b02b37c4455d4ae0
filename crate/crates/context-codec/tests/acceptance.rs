//! The acceptance suite: one PASS/FAIL line per criterion.
//!
//!     cargo test -p context-codec --test acceptance

#[path = "../../core/tests/common/strategies.rs"]
mod strategies;

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use context_codec::decoder::StandardDecoder;
use context_codec::fixtures::{bundled, bundled_case, diff_fixture, printed_examples, CaseFixture, Method};
use context_codec::harness::{
    calibration, calibration_csv, full_report, random_history, run_injections, injection_specs, Direction, Verdict,
};
use context_codec_core::atom::{atom_id, equivalent};
use context_codec_core::ccl::{atoms_to_ccl, ccl_to_atoms, decode_pair, emit_ccl, parse_ccl, Profile};
use context_codec_core::codec::{compress, parse_packet, render_packet, verify, CodecConfig, CodecError};
use context_codec_core::diff::{apply_patch, diff_states, patch_to_json};
use context_codec_core::lexicon::builtin;
use context_codec_core::metrics::{car, recoverable, war, ErrorKind, GoldAnnotation};
use context_codec_core::normalize::normalize_phrase;
use context_codec_core::scoring::{render_policy, PolicyThresholds, RenderDecision};
use context_codec_core::tokenize::lexical_tokens;
use context_codec_core::{Atom, Value};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Triple<'a> = (&'a str, &'a str, Value);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn triple(a: &Atom) -> (&str, &str, &Value) {
    (a.subject.as_str(), a.predicate.as_str(), &a.value)
}

fn normalization() -> Outcome {
    let start = Instant::now();
    let lex = builtin::lexicon("webgen").ok_or("webgen lexicon")?;
    let atoms = |text: &str| -> Vec<Atom> { normalize_phrase(text, "m1", 0, &lex).into_iter().map(|n| n.atom).collect() };
    let rows: [(&str, Vec<Triple>); 5] = [
        ("no external libraries", vec![("external_libraries", "allowed", Value::Bool(false))]),
        ("don't use libs", vec![("external_libraries", "allowed", Value::Bool(false))]),
        ("assets=0", vec![("external_assets", "allowed", Value::Bool(false))]),
        ("350 agents", vec![("agent_count", "equals", Value::Int(350))]),
        (
            "Canvas chosen, SVG rejected",
            vec![
                ("rendering_backend", "selected", Value::Enum("Canvas".into())),
                ("rendering_backend", "rejected", Value::Enum("SVG".into())),
            ],
        ),
    ];
    for (text, want) in &rows {
        let got = atoms(text);
        let got: Vec<(&str, &str, &Value)> = got.iter().map(triple).collect();
        let want: Vec<(&str, &str, &Value)> = want.iter().map(|(s, p, v)| (*s, *p, v)).collect();
        check(got == want, || format!("{:?}: got {:?}, want {:?}", text, got, want))?;
    }
    let libs: Vec<Atom> = ["no external libraries", "don't use libs", "libs=false"]
        .iter()
        .map(|t| atoms(t).into_iter().next().ok_or_else(|| format!("{} produced nothing", t)))
        .collect::<Result<_, _>>()?;
    for a in &libs {
        for b in &libs {
            check(atom_id(a) == atom_id(b) && equivalent(a, b), || format!("{:?} vs {:?}", a, b))?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || format!("took {:?}", elapsed))?;
    Ok(format!("5 rows exact, 3 library phrasings share id {}, {:?}", atom_id(&libs[0]), elapsed))
}

fn policy_cascade() -> Outcome {
    let start = Instant::now();
    let th = PolicyThresholds::default();
    let examples = [
        ((true, 1, 0.99, 0.0), RenderDecision::CanonicalPlusSpan),
        ((false, 3, 0.49, 0.30), RenderDecision::PreserveRawMessage),
        ((false, 2, 0.95, 0.10), RenderDecision::MinAllowed),
    ];
    for ((s, c, conf, r), want) in examples {
        let got = render_policy(s, c, conf, r, &th);
        check(got == want, || format!("({}, {}, {}, {}) gave {:?}, want {:?}", s, c, conf, r, got, want))?;
    }
    let (mut total, mut min) = (0usize, 0usize);
    for safety in [false, true] {
        for crit in 1..=5u8 {
            for ci in 0..=100 {
                for ri in 0..=100 {
                    let (conf, r) = (f64::from(ci) / 100.0, f64::from(ri) / 100.0);
                    let d = render_policy(safety, crit, conf, r, &th);
                    total += 1;
                    if d == RenderDecision::MinAllowed {
                        min += 1;
                        check(!safety && crit <= 2 && conf >= 0.70, || {
                            format!("min allowed at safety={} crit={} conf={} risk={}", safety, crit, conf, r)
                        })?;
                    }
                }
            }
        }
    }
    check(min > 0, || "grid never reached min".into())?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || format!("took {:?}", elapsed))?;
    Ok(format!("3 examples exact; grid of {} points, min allowed at {} (all low stakes), {:?}", total, min, elapsed))
}

fn metric_identities() -> Outcome {
    let worst = Cell::new(0.0f64);
    runner(1000)
        .run(&strategies::gold_and_found(), |(gold, found)| {
            let g = GoldAnnotation::new(&gold);
            let (c, w) = (car(&g, &found).unwrap(), war(&g, &found).unwrap());
            worst.set(worst.get().max((c - w).abs()));
            if (c - w).abs() > 1e-9 {
                return Err(TestCaseError::fail(format!("car {} war {}", c, w)));
            }
            let mut grown = found.clone();
            for a in &gold {
                grown.push(a.clone());
                let next = car(&g, &grown).unwrap();
                if next + 1e-12 < c {
                    return Err(TestCaseError::fail("car fell as the recovered set grew"));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("1000 pairs, max |war-car| = {:e}; car monotone under growth", worst.get()))
}

fn injections() -> Outcome {
    let case = bundled_case("epidemic").ok_or("epidemic fixture")?;
    let mut d = StandardDecoder::new(&case.lexicon);
    let results = run_injections(&case, &injection_specs(), &mut d);
    let want = [
        (ErrorKind::Omission, false),
        (ErrorKind::Mutation, true),
        (ErrorKind::PolarityFlip, true),
        (ErrorKind::Mutation, true),
        (ErrorKind::Omission, false),
    ];
    check(results.len() == want.len(), || format!("{} injections", results.len()))?;
    for (r, (kind, conflict)) in results.iter().zip(want) {
        check(
            r.failure.is_none() && r.observed == [kind] && r.direction == Direction::Down && r.conflict == conflict,
            || format!("{}: observed {:?} car {:?} conflict {} ({:?})", r.spec.label, r.observed, r.direction, r.conflict, r.failure),
        )?;
    }
    let summary: Vec<String> =
        results.iter().map(|r| format!("{}/{}/{}", r.observed[0].as_str(), r.direction.as_str(), if r.conflict { "yes" } else { "no" })).collect();
    Ok(summary.join(", "))
}

/// Joins wrapped continuation lines so texts compare independently of
/// where they were wrapped.
fn rejoin(text: &str, profile: Profile) -> String {
    if profile == Profile::Min {
        return text.split_whitespace().collect::<Vec<_>>().join(" ") + "\n";
    }
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with(char::is_whitespace) {
            out.pop();
            out.push_str(line.trim_start());
        } else {
            out.push_str(line.trim_end());
        }
        out.push('\n');
    }
    out
}

fn parser_round_trip() -> Outcome {
    let d = diff_fixture();
    let case = |n: &str| bundled_case(n).ok_or_else(|| format!("{} fixture", n));
    let (dc, trip, epi) = (case("datacleaning")?, case("trip")?, case("epidemic")?);
    let trace = format!("@CCL/1\n{}", d.trace);
    let printed: [(&str, String); 7] = [
        ("data-cleaning packet", dc.representation(Method::CclCore).unwrap().to_string()),
        ("trip packet", trip.representation(Method::CclCore).unwrap().to_string()),
        ("epidemic core", epi.representation(Method::CclCore).unwrap().to_string()),
        ("epidemic min", epi.representation(Method::CclMin).unwrap().to_string()),
        ("diff before", d.before.to_string()),
        ("diff after", d.after.to_string()),
        ("trip trace", trace),
    ];
    let mut identical = 0;
    for (label, text) in &printed {
        let doc = parse_ccl(text).map_err(|e| format!("{}: {}", label, e))?;
        let profile = doc.header.profile;
        let out = emit_ccl(&doc, profile).map_err(|e| format!("{}: {}", label, e))?;
        if &out == text {
            identical += 1;
        }
        check(rejoin(&out, profile) == rejoin(text, profile), || format!("{} not byte-stable:\n{}\n---\n{}", label, text, out))?;
        check(parse_ccl(&out).as_ref() == Ok(&doc), || format!("{}: re-parse differs", label))?;
    }
    runner(10_000)
        .run(&strategies::ccl_document(), |doc| {
            let text = emit_ccl(&doc, Profile::Core).map_err(|e| TestCaseError::fail(e.to_string()))?;
            match parse_ccl(&text) {
                Ok(back) if back == doc => Ok(()),
                Ok(_) => Err(TestCaseError::fail(format!("structure changed:\n{}", text))),
                Err(e) => Err(TestCaseError::fail(format!("{}\n{}", e, text))),
            }
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("7 printed packets parse and re-emit stably ({} byte-identical without rejoining); 10000 generated documents", identical))
}

fn atom_round_trip() -> Outcome {
    let mut total = 0;
    let cases = bundled();
    for c in &cases {
        let gold = c.gold.active_atoms();
        let (doc, raw) = atoms_to_ccl(&gold, &c.lexicon, &vec![RenderDecision::Core; gold.len()]);
        check(raw.is_empty(), || format!("{}: {} atoms needed raw quotes", c.name, raw.len()))?;
        let text = emit_ccl(&doc, Profile::Core).map_err(|e| e.to_string())?;
        let decoded = ccl_to_atoms(&parse_ccl(&text).map_err(|e| e.to_string())?, &c.lexicon).map_err(|e| e.to_string())?;
        check(recoverable(&decoded, &c.gold, &[]), || format!("{}: not recoverable", c.name))?;
        check(
            decoded.len() == gold.len() && decoded.iter().all(|a| gold.iter().any(|g| equivalent(a, g))),
            || format!("{}: {} decoded vs {} gold", c.name, decoded.len(), gold.len()),
        )?;
        total += gold.len();
    }
    Ok(format!("{} cases, {} gold atoms, all recovered with no allowed omissions", cases.len(), total))
}

fn diff() -> Outcome {
    let d = diff_fixture();
    let lex = builtin::lexicon(d.lexicon).ok_or("diff lexicon")?;
    let state = |t: &str| ccl_to_atoms(&parse_ccl(t).unwrap(), &lex).unwrap();
    let patch = diff_states(&state(d.before), &state(d.after), &lex);
    let printed = "[\n  {\"op\":\"replace\",\"path\":\"/PLAN/day_trip\",\"value\":\"Cascais\"},\n  {\"op\":\"add\",\"path\":\"/PREF/-\",\"value\":\"fado\"},\n  {\"op\":\"add\",\"path\":\"/C/far_out_lodging\",\"value\":false},\n  {\"op\":\"add\",\"path\":\"/OUT/-\",\"value\":\"rainy_alt\"}\n]\n";
    check(patch_to_json(&patch) == printed, || format!("got {}", patch_to_json(&patch)))?;
    let ops = Cell::new(0usize);
    runner(1000)
        .run(&(strategies::trip_state(), strategies::trip_state()), |(before, after)| {
            let p = diff_states(&before, &after, &lex);
            ops.set(ops.get() + p.len());
            let applied = apply_patch(&before, &p, &lex).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let same = applied.atoms.len() == after.len() && after.iter().all(|a| applied.atoms.iter().any(|b| equivalent(a, b)));
            if same {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("apply(diff) differs: {}", patch_to_json(&p))))
            }
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("four printed operations exact; 1000 random pairs ({} ops) apply back to the target", ops.get()))
}

fn lexical_counts() -> Outcome {
    let published: Vec<usize> = printed_examples().iter().map(|p| p.lexical).collect();
    check(published == [125, 62, 67, 48, 56, 115], || format!("published column {:?}", published))?;
    let rows = calibration();
    println!("    discrepancy table:");
    for line in calibration_csv(&rows).lines() {
        println!("      {}", line);
    }
    for r in &rows {
        check(r.delta.abs() <= 4, || format!("{}: {} vs {}", r.label, r.lexical, r.published_lexical))?;
    }
    let max = rows.iter().map(|r| r.delta.abs()).max().unwrap_or(0);
    Ok(format!("6 examples, max |delta| = {}", max))
}

fn budget_law(cases: &[CaseFixture]) -> Outcome {
    let cfg = CodecConfig::default();
    let mut rng = StdRng::seed_from_u64(20261018);
    let (mut packets, mut infeasible, mut safety_checked, mut passthrough) = (0, 0, 0, 0);
    for run in 0..1000 {
        let case = &cases[rng.gen_range(0..cases.len())];
        let h = random_history(case, &mut rng);
        let budget = rng.gen_range(1..=200);
        let q = if rng.gen_bool(0.5) { case.meta.query.as_str() } else { "" };
        let c = match compress(&h, q, budget, &cfg, &case.lexicon) {
            Err(CodecError::BudgetInfeasible { needed, .. }) => {
                check(needed > budget, || format!("run {}: infeasible with needed {} <= {}", run, needed, budget))?;
                infeasible += 1;
                continue;
            }
            Ok(c) => c,
        };
        packets += 1;
        let p = &c.packet;
        let safety: Vec<&Atom> = c.atoms.iter().map(|a| &a.atom).filter(|a| a.safety).collect();
        safety_checked += safety.len();
        if let Some(pt) = &p.passthrough {
            passthrough += 1;
            check(safety.iter().all(|s| pt.records.iter().any(|r| equivalent(s, r))), || format!("run {}: passthrough lost a safety atom", run))?;
            continue;
        }
        let tokens = lexical_tokens(&p.body());
        check(tokens <= budget, || format!("run {} ({}): {} tokens over budget {}", run, case.name, tokens, budget))?;
        let (from_ccl, _) = decode_pair(&p.core, p.min.as_ref(), &case.lexicon);
        for s in &safety {
            check(from_ccl.iter().any(|a| equivalent(s, a)), || format!("run {}: safety atom {} missing from CCL", run, atom_id(s)))?;
            check(p.raw.iter().any(|r| r.id == atom_id(s)), || format!("run {}: safety atom {} has no RAW quote", run, atom_id(s)))?;
        }
        check(c.verification.ok(), || format!("run {}: {:?}", run, c.verification.failures))?;
        let reread = parse_packet(&render_packet(p)).map_err(|e| format!("run {}: {}", run, e))?;
        let source = GoldAnnotation::new(&c.atoms.iter().map(|a| a.atom.clone()).collect::<Vec<_>>());
        let again = verify(&reread, &source, &case.lexicon);
        check(again.ok(), || format!("run {}: re-read packet fails verification: {:?}", run, again.failures))?;
    }
    check(safety_checked > 0, || "no safety atoms exercised".into())?;
    Ok(format!(
        "1000 runs: {} packets within budget ({} passthrough), {} budget-infeasible, {} safety atoms kept, 0 verify failures",
        packets, passthrough, infeasible, safety_checked
    ))
}

fn rejection_report(cases: &[CaseFixture]) -> Outcome {
    let start = Instant::now();
    let cfg = CodecConfig::default();
    let report = full_report(cases, None, &mut |c| Box::new(StandardDecoder::new(&c.lexicon)), 200, 0, &cfg);
    let v = &report.verdicts;
    check(v.iter().map(|c| c.number).eq(1..=5), || format!("{} verdicts", v.len()))?;
    for c in v {
        check(!c.numbers.is_empty(), || format!("criterion {} has no numbers", c.number))?;
        println!("    {}. {} [{}]", c.number, c.verdict.as_str(), c.numbers.iter().map(|(k, x)| format!("{}={:.3}", k, x)).collect::<Vec<_>>().join(" "));
    }
    let supported = v.iter().filter(|c| c.verdict == Verdict::Supported).count();
    Ok(format!("5 verdicts ({} supported) in {:?}", supported, start.elapsed()))
}

fn main() {
    let start = Instant::now();
    let cases = bundled();
    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("normalization", Box::new(normalization)),
        ("policy cascade", Box::new(policy_cascade)),
        ("metric identities", Box::new(metric_identities)),
        ("error injection", Box::new(injections)),
        ("parser round trip", Box::new(parser_round_trip)),
        ("atom round trip", Box::new(atom_round_trip)),
        ("diff", Box::new(diff)),
        ("lexical counts", Box::new(lexical_counts)),
        ("budget law and safety", Box::new(|| budget_law(&cases))),
        ("rejection report", Box::new(|| rejection_report(&cases))),
    ];
    let mut failed = 0;
    let last = criteria.len();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        if i + 1 == last {
            let total = start.elapsed();
            outcome = outcome.and_then(|msg| {
                if total < Duration::from_secs(60) {
                    Ok(format!("{}; whole suite {:?}", msg, total))
                } else {
                    Err(format!("whole suite took {:?}", total))
                }
            });
        }
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {}: {} [{:.1?}]", i + 1, name, msg, t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {}: {}", i + 1, name, msg);
            }
        }
    }
    println!("{} of {} criteria pass", last - failed, last);
    if failed > 0 {
        std::process::exit(1);
    }
}
