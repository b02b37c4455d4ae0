use std::process::Command;

use context_codec::decoder::{decode_ccl_text, ParserDecoder, ProbeDecoder, StandardDecoder};
use context_codec::fixtures::{bundled, diff_fixture, gold_from_atoms, load_dir, render_gold, Method, CASE_NAMES};
use context_codec::harness::{calibration, calibration_csv, full_report, run_roundtrip, ROUNDTRIP_METHODS};
use context_codec::jsondoc::document_to_json;
use context_codec_core::ccl::{ccl_to_atoms, parse_ccl};
use context_codec_core::codec::CodecConfig;
use context_codec_core::metrics::recoverable;

fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn derived_representations_match_core() {
    for case in bundled() {
        let core = parse_ccl(case.representation(Method::CclCore).unwrap()).unwrap();
        assert_eq!(case.representation(Method::Json).unwrap(), document_to_json(&core), "{}", case.name);
        let atoms = ccl_to_atoms(&core, &case.lexicon).unwrap();
        assert_eq!(render_gold(&case.gold), render_gold(&gold_from_atoms(&atoms)), "{}", case.name);
        let min = decode_ccl_text(case.representation(Method::CclMin).unwrap(), &case.lexicon).unwrap();
        assert!(recoverable(&min, &case.gold, &[]), "{}", case.name);
    }
}

#[test]
fn directory_and_bundled_agree() {
    let loaded = load_dir(&fixtures_dir()).unwrap();
    let mut names: Vec<&str> = loaded.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    let mut expected = CASE_NAMES.to_vec();
    expected.sort_unstable();
    assert_eq!(names, expected);
    for case in bundled() {
        assert_eq!(loaded.iter().find(|c| c.name == case.name).unwrap(), &case);
    }
}

#[test]
fn diff_fixture_files_agree() {
    let d = diff_fixture();
    let lex = context_codec_core::lexicon::builtin::lexicon(d.lexicon).unwrap();
    let before = ccl_to_atoms(&parse_ccl(d.before).unwrap(), &lex).unwrap();
    let after = ccl_to_atoms(&parse_ccl(d.after).unwrap(), &lex).unwrap();
    let patch = context_codec_core::diff::diff_states(&before, &after, &lex);
    assert_eq!(context_codec_core::diff::patch_to_json(&patch), d.patch);
}

#[test]
fn calibration_matches_golden_file() {
    let golden = std::fs::read_to_string(fixtures_dir().join("counts/calibration.csv")).unwrap();
    assert_eq!(calibration_csv(&calibration()), golden);
}

#[test]
fn decoders_see_only_representations() {
    for case in bundled() {
        let mut probe = ProbeDecoder::new(StandardDecoder::new(&case.lexicon));
        let rt = run_roundtrip(&case, &mut probe, &ROUNDTRIP_METHODS);
        assert_eq!(probe.seen.len(), ROUNDTRIP_METHODS.len());
        for (m, text) in &probe.seen {
            assert_eq!(Some(text.as_str()), case.representation(*m));
            assert_ne!(text, &case.full_text);
            assert!(!text.contains("\"weight\""), "gold leaked to {}", m);
        }
        assert!(!rt.independent);
    }
}

#[test]
fn reports_are_reproducible() {
    let cases = bundled();
    let cfg = CodecConfig::default();
    let run = || {
        full_report(&cases, None, &mut |c| Box::new(ParserDecoder { lex: c.lexicon.clone() }), 50, 7, &cfg).files()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["aggregate.csv", "injections.csv", "roundtrip.csv", "rejection.csv", "calibration.csv", "summary.json"] {
        assert!(names.contains(&want), "{}", want);
    }
}

fn ccodec(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ccodec")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn cli_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures_dir();
    let p = |s: &str| fx.join(s).to_string_lossy().into_owned();

    let (ok, out, err) = ccodec(&["diff", &p("diff/before.ccl"), &p("diff/after.ccl")]);
    assert!(ok, "{}", err);
    assert_eq!(out, diff_fixture().patch);

    let (ok, out, err) = ccodec(&["diff", &p("diff/before.ccl"), "--apply", &p("diff/patch.json")]);
    assert!(ok, "{}", err);
    assert!(out.contains("day_trip:Cascais"), "{}", out);

    let (ok, out, err) =
        ccodec(&["compress", &p("trip/full.txt"), "--lexicon", "trip", "--budget", "120", "--query", "food"]);
    assert!(ok, "{}", err);
    assert!(out.starts_with("@PACKET budget=120"), "{}", out);
    let packet = dir.path().join("packet.txt");
    std::fs::write(&packet, &out).unwrap();
    let (ok, out, err) = ccodec(&["decode", packet.to_str().unwrap(), "--lexicon", "trip"]);
    assert!(ok, "{}", err);
    assert!(out.contains("\"destination\""), "{}", out);

    let (ok, out, _) = ccodec(&["decode", &p("trip/methods/json.txt"), "--json", "--lexicon", "trip"]);
    assert!(ok);
    assert!(out.contains("\"rental_car\""));

    let (ok, out, err) = ccodec(&["inject"]);
    assert!(ok, "{}", err);
    assert_eq!(out.lines().skip(1).filter(|l| l.ends_with(",pass")).count(), 5);

    let (ok, out, _) = ccodec(&["eval", "--case", "trip"]);
    assert!(ok);
    assert!(out.contains("ccl_core"));

    let (ok, out, _) = ccodec(&["roundtrip", "--case", "react"]);
    assert!(ok);
    assert_eq!(out.lines().count(), 1 + ROUNDTRIP_METHODS.len());

    let report = dir.path().join("report");
    let (ok, out, err) = ccodec(&["report", "--runs", "20", "--out", report.to_str().unwrap()]);
    assert!(ok, "{}", err);
    assert_eq!(out.lines().filter(|l| l.contains(",supported,") || l.contains(",weakened,")).count(), 5, "{}", out);
    assert!(report.join("summary.json").exists());

    let (ok, _, err) = ccodec(&["compress", &p("trip/full.txt")]);
    assert!(!ok);
    assert!(err.contains("--lexicon"));
    let (ok, _, err) = ccodec(&["eval", "--case", "nope"]);
    assert!(!ok);
    assert!(err.contains("nope"));
}

#[cfg(unix)]
#[test]
fn command_decoder_round_trip() {
    // a decoder that answers with the gold records of the trip case
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.json");
    let trip = bundled().into_iter().find(|c| c.name == "trip").unwrap();
    let atoms: Vec<_> = trip.gold.entries.iter().map(|g| g.atom.clone()).collect();
    std::fs::write(&gold, context_codec_core::atom::to_records_json(&atoms)).unwrap();
    let script = dir.path().join("dec.sh");
    std::fs::write(&script, format!("#!/bin/sh\ncat >/dev/null\ncat '{}'\n", gold.display())).unwrap();
    let (ok, out, err) =
        ccodec(&["roundtrip", "--case", "trip", "--decoder-cmd", &format!("sh {}", script.display())]);
    assert!(ok, "{}", err);
    assert!(out.lines().skip(1).all(|l| l.contains(",true,1.000,1.000,")), "{}", out);
}
