//! Case fixtures: one directory per case holding `full.txt`,
//! `methods/<method>.txt`, `gold.atoms` and `meta.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use context_codec_core::lexicon::{builtin, Lexicon};
use context_codec_core::metrics::{GoldAnnotation, GoldAtom};
use context_codec_core::{Atom, Status};
use serde::{Deserialize, Serialize};

/// Representation labels. `Full` is the uncompressed text itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Full,
    Prose,
    StructuredProse,
    Json,
    CclCore,
    CclMin,
}

impl Method {
    /// The five compressed representations, in report order.
    pub const COMPRESSED: [Method; 5] = [Method::Prose, Method::StructuredProse, Method::Json, Method::CclCore, Method::CclMin];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Prose => "prose",
            Method::StructuredProse => "structured_prose",
            Method::Json => "json",
            Method::CclCore => "ccl_core",
            Method::CclMin => "ccl_min",
        }
    }

    pub fn is_ccl(&self) -> bool {
        matches!(self, Method::CclCore | Method::CclMin)
    }

    /// Free text that only an extractor can read.
    pub fn is_text(&self) -> bool {
        matches!(self, Method::Full | Method::Prose | Method::StructuredProse)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Full, Method::Prose, Method::StructuredProse, Method::Json, Method::CclCore, Method::CclMin]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| anyhow!("unknown method `{}`", s))
    }
}

/// Where a fixture text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Printed verbatim in the published case study.
    Published,
    /// Written for this harness.
    Authored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub name: String,
    /// Builtin lexicon name.
    pub lexicon: String,
    pub full_text: Provenance,
    /// Provenance per method file.
    pub methods: BTreeMap<String, Provenance>,
    /// Gold atoms are always authored from the printed CCL-Core packet.
    pub gold: Provenance,
    /// Query used for ranking when the case is compressed.
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFixture {
    pub name: String,
    pub full_text: String,
    pub representations: BTreeMap<Method, String>,
    pub gold: GoldAnnotation,
    pub lexicon: Lexicon,
    pub meta: CaseMeta,
}

impl CaseFixture {
    pub fn representation(&self, m: Method) -> Option<&str> {
        if m == Method::Full {
            return Some(&self.full_text);
        }
        self.representations.get(&m).map(String::as_str)
    }
}

/// One `gold.atoms` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub weight: f64,
    pub status: Status,
    pub atom: Atom,
}

pub fn parse_gold(text: &str) -> Result<GoldAnnotation> {
    let records: Vec<GoldRecord> = serde_json::from_str(text).context("gold.atoms")?;
    let gold = GoldAnnotation {
        entries: records.into_iter().map(|r| GoldAtom { atom: r.atom, weight: r.weight, status: r.status }).collect(),
    };
    gold.validate().map_err(|e| anyhow!("gold.atoms: {}", e))?;
    Ok(gold)
}

/// One record per line, newline-terminated.
pub fn render_gold(gold: &GoldAnnotation) -> String {
    let mut out = String::from("[\n");
    for (i, g) in gold.entries.iter().enumerate() {
        let rec = GoldRecord { weight: g.weight, status: g.status, atom: g.atom.clone() };
        out.push_str("  ");
        out.push_str(&serde_json::to_string(&rec).expect("gold records serialize"));
        if i + 1 < gold.entries.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

/// Gold weights follow criticality.
pub fn gold_from_atoms(atoms: &[Atom]) -> GoldAnnotation {
    let weights: Vec<f64> = atoms.iter().map(|a| f64::from(a.criticality)).collect();
    GoldAnnotation::with_weights(atoms, &weights)
}

fn build(meta_text: &str, full: &str, methods: &[(Method, &str)], gold: &str) -> Result<CaseFixture> {
    let meta: CaseMeta = serde_json::from_str(meta_text).context("meta.json")?;
    let lexicon = builtin::lexicon(&meta.lexicon).ok_or_else(|| anyhow!("unknown lexicon `{}`", meta.lexicon))?;
    for (m, _) in methods {
        if !meta.methods.contains_key(m.as_str()) {
            bail!("{}: meta.json lacks provenance for {}", meta.name, m);
        }
    }
    Ok(CaseFixture {
        name: meta.name.clone(),
        full_text: full.to_string(),
        representations: methods.iter().map(|(m, t)| (*m, t.to_string())).collect(),
        gold: parse_gold(gold).with_context(|| meta.name.clone())?,
        lexicon,
        meta,
    })
}

macro_rules! bundled_case {
    ($dir:literal) => {
        build(
            include_str!(concat!("../fixtures/", $dir, "/meta.json")),
            include_str!(concat!("../fixtures/", $dir, "/full.txt")),
            &[
                (Method::Prose, include_str!(concat!("../fixtures/", $dir, "/methods/prose.txt"))),
                (Method::StructuredProse, include_str!(concat!("../fixtures/", $dir, "/methods/structured_prose.txt"))),
                (Method::Json, include_str!(concat!("../fixtures/", $dir, "/methods/json.txt"))),
                (Method::CclCore, include_str!(concat!("../fixtures/", $dir, "/methods/ccl_core.txt"))),
                (Method::CclMin, include_str!(concat!("../fixtures/", $dir, "/methods/ccl_min.txt"))),
            ],
            include_str!(concat!("../fixtures/", $dir, "/gold.atoms")),
        )
    };
}

pub const CASE_NAMES: [&str; 5] = ["epidemic", "react", "datacleaning", "trip", "research"];

/// The five bundled cases, compiled into the binary.
pub fn bundled() -> Vec<CaseFixture> {
    [
        bundled_case!("epidemic"),
        bundled_case!("react"),
        bundled_case!("datacleaning"),
        bundled_case!("trip"),
        bundled_case!("research"),
    ]
    .into_iter()
    .map(|c| c.expect("bundled fixtures are valid"))
    .collect()
}

pub fn bundled_case(name: &str) -> Option<CaseFixture> {
    bundled().into_iter().find(|c| c.name == name)
}

/// Loads one case directory.
pub fn load_case(dir: &Path) -> Result<CaseFixture> {
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let meta = read(&dir.join("meta.json"))?;
    let full = read(&dir.join("full.txt"))?;
    let gold = read(&dir.join("gold.atoms"))?;
    let mut methods = Vec::new();
    for m in Method::COMPRESSED {
        let p = dir.join("methods").join(format!("{}.txt", m));
        if p.exists() {
            methods.push((m, read(&p)?));
        }
    }
    let refs: Vec<(Method, &str)> = methods.iter().map(|(m, t)| (*m, t.as_str())).collect();
    build(&meta, &full, &refs, &gold)
}

/// Loads every subdirectory that has a `meta.json`, sorted by name.
pub fn load_dir(root: &Path) -> Result<Vec<CaseFixture>> {
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.json").exists())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_case(d)).collect()
}

/// The structured-diff worked example: two itinerary states, the patch
/// between them, and the trace packet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffFixture {
    pub before: &'static str,
    pub after: &'static str,
    pub patch: &'static str,
    pub trace: &'static str,
    pub lexicon: &'static str,
}

pub fn diff_fixture() -> DiffFixture {
    DiffFixture {
        before: include_str!("../fixtures/diff/before.ccl"),
        after: include_str!("../fixtures/diff/after.ccl"),
        patch: include_str!("../fixtures/diff/patch.json"),
        trace: include_str!("../fixtures/diff/trace.ccl"),
        lexicon: "trip_state",
    }
}

/// A printed example whose token counts the source publication reports.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintedExample {
    pub label: &'static str,
    pub title: &'static str,
    pub text: &'static str,
    pub lexical: usize,
    pub cl100k: usize,
    pub o200k: usize,
}

/// The six printed examples with their published counts.
pub fn printed_examples() -> Vec<PrintedExample> {
    let d = diff_fixture();
    vec![
        PrintedExample {
            label: "epidemic_ccl_core",
            title: "Epidemic CCL-Core",
            text: include_str!("../fixtures/epidemic/methods/ccl_core.txt"),
            lexical: 125,
            cl100k: 115,
            o200k: 117,
        },
        PrintedExample {
            label: "epidemic_ccl_min",
            title: "Epidemic CCL-Min",
            text: include_str!("../fixtures/epidemic/methods/ccl_min.txt"),
            lexical: 62,
            cl100k: 74,
            o200k: 74,
        },
        PrintedExample { label: "trip_ccl_trace", title: "Trip CCL-Core trace", text: d.trace, lexical: 67, cl100k: 93, o200k: 92 },
        PrintedExample { label: "diff_before", title: "Diff CCL before", text: d.before, lexical: 48, cl100k: 65, o200k: 65 },
        PrintedExample { label: "diff_after", title: "Diff CCL after", text: d.after, lexical: 56, cl100k: 79, o200k: 78 },
        PrintedExample { label: "diff_patch", title: "JSON Patch diff", text: d.patch, lexical: 115, cl100k: 74, o200k: 78 },
    ]
}

/// Count-table labels for every case representation: `<case>_<method>`.
pub fn count_labels(cases: &[CaseFixture]) -> Vec<String> {
    let mut out: Vec<String> = printed_examples().iter().map(|p| p.label.to_string()).collect();
    for c in cases {
        for m in std::iter::once(Method::Full).chain(Method::COMPRESSED) {
            let label = format!("{}_{}", c.name, m);
            if !out.contains(&label) {
                out.push(label);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_text_round_trips() {
        for case in bundled() {
            let text = render_gold(&case.gold);
            assert_eq!(render_gold(&parse_gold(&text).unwrap()), text, "{}", case.name);
        }
    }

    #[test]
    fn bad_gold_is_rejected() {
        assert!(parse_gold("not json").is_err());
        assert!(bundled_case("nope").is_none());
        assert!(bundled_case("trip").is_some());
    }
}
