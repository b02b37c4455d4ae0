use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use context_codec::config::{load_lexicon, load_policy};
use context_codec::counts::{read_count_table, ExternalCounts, PUBLISHED_TABLE};
use context_codec::decoder::{decode_ccl_text, CommandDecoder, Decoder, StandardDecoder};
use context_codec::external::{CommandExtractor, CommandSpec};
use context_codec::fixtures::{bundled, count_labels, load_dir, CaseFixture};
use context_codec::harness::{
    full_report, injections_csv, roundtrip_csv, run_eval, run_injections, run_roundtrip, injection_specs, verdicts_csv,
    ROUNDTRIP_METHODS,
};
use context_codec::jsondoc::json_to_document;
use context_codec_core::atom::to_records_json;
use context_codec_core::ccl::{ccl_to_atoms, decode_lenient, parse_ccl};
use context_codec_core::codec::{compress_with, render_packet, ChatHistory, Extractor, RuleExtractor};
use context_codec_core::diff::{apply_patch, diff_states, patch_from_json, patch_to_json};
use context_codec_core::lexicon::Lexicon;

/// Commitment-level context compression: packets, diffs and diagnostics.
#[derive(Parser)]
#[command(name = "ccodec", version)]
struct Cli {
    /// Builtin lexicon name or path to a lexicon JSON file.
    #[arg(long, global = true)]
    lexicon: Option<String>,
    /// Codec configuration JSON (policy thresholds, rank weights, ...).
    #[arg(long, global = true)]
    policy: Option<PathBuf>,
    /// Token budget for `compress`.
    #[arg(long, global = true, default_value_t = 400)]
    budget: usize,
    /// Directory to write output files into.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized budget sweep.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a chat transcript (`Role: text` lines) or plain prompt.
    Compress {
        /// Input file; `-` reads stdin.
        input: PathBuf,
        #[arg(long, default_value = "")]
        query: String,
        /// External extractor command; falls back to the rule extractor.
        #[arg(long)]
        extractor_cmd: Option<String>,
    },
    /// Decode a packet, CCL text or grouped JSON into canonical atom records.
    Decode {
        input: PathBuf,
        /// Read the input as grouped-document JSON.
        #[arg(long)]
        json: bool,
    },
    /// Structured diff between two CCL states, or apply a patch with --apply.
    Diff {
        before: PathBuf,
        after: Option<PathBuf>,
        #[arg(long)]
        apply: Option<PathBuf>,
    },
    /// Per-method evaluation of case fixtures.
    Eval {
        #[command(flatten)]
        sel: CaseSelection,
        /// External token count table (CSV).
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Error-injection checks against the epidemic case.
    Inject {
        #[command(flatten)]
        sel: CaseSelection,
    },
    /// Round-trip decoding of each representation.
    Roundtrip {
        #[command(flatten)]
        sel: CaseSelection,
        /// External decoder command; the built-in decoders otherwise.
        #[arg(long)]
        decoder_cmd: Option<String>,
    },
    /// The full diagnostic report: evaluation, injections, round trip,
    /// rejection criteria, count calibration and a budget sweep.
    Report {
        #[command(flatten)]
        sel: CaseSelection,
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Randomized compress runs in the budget sweep.
        #[arg(long, default_value_t = 1000)]
        runs: usize,
    },
}

#[derive(clap::Args)]
struct CaseSelection {
    /// Fixture directory (one subdirectory per case); bundled cases otherwise.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Restrict to one case.
    #[arg(long)]
    case: Option<String>,
}

impl CaseSelection {
    fn load(&self) -> Result<Vec<CaseFixture>> {
        let all = match &self.fixtures {
            Some(dir) => load_dir(dir)?,
            None => bundled(),
        };
        match &self.case {
            None => Ok(all),
            Some(name) => {
                let picked: Vec<CaseFixture> = all.into_iter().filter(|c| &c.name == name).collect();
                if picked.is_empty() {
                    bail!("no case named `{}`", name);
                }
                Ok(picked)
            }
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn lexicon(cli: &Cli, default: Option<&str>) -> Result<Lexicon> {
    match (&cli.lexicon, default) {
        (Some(spec), _) => load_lexicon(spec),
        (None, Some(d)) => load_lexicon(d),
        (None, None) => Err(anyhow!("--lexicon is required")),
    }
}

/// Prints `text`, and writes it to `<out>/<name>` when --out is given.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<()> {
    print!("{}", text);
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text).with_context(|| format!("writing {}", name))?;
    }
    Ok(())
}

fn counts_for(path: Option<&Path>, cases: &[CaseFixture]) -> Result<ExternalCounts> {
    let labels = count_labels(cases);
    let known: Vec<&str> = labels.iter().map(String::as_str).collect();
    match path {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_count_table(f, &known)
        }
        None => read_count_table(PUBLISHED_TABLE.as_bytes(), &known),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Cmd::Compress { input, query, extractor_cmd } => {
            let lex = lexicon(cli, None)?;
            let cfg = load_policy(cli.policy.as_deref())?;
            let h = ChatHistory::from_transcript(&read_input(input)?);
            let external;
            let extractor: &dyn Extractor = match extractor_cmd {
                Some(cmd) => {
                    external = CommandExtractor { spec: CommandSpec::parse(cmd).ok_or_else(|| anyhow!("empty command"))? };
                    &external
                }
                None => &RuleExtractor,
            };
            let c = compress_with(&h, query, cli.budget, &cfg, &lex, extractor)?;
            for w in &c.warnings {
                eprintln!("warning: {}", w);
            }
            if !c.verification.ok() {
                eprintln!("warning: {} atoms failed verification", c.verification.failures.len());
            }
            emit(cli, "packet.txt", &render_packet(&c.packet))
        }
        Cmd::Decode { input, json } => {
            let lex = lexicon(cli, None)?;
            let text = read_input(input)?;
            let atoms = if *json {
                let doc = json_to_document(&text, &lex)?;
                ccl_to_atoms(&doc, &lex).map_err(|e| anyhow!("{}", e))?
            } else {
                decode_ccl_text(&text, &lex)?
            };
            emit(cli, "atoms.json", &to_records_json(&atoms))
        }
        Cmd::Diff { before, after, apply } => {
            let lex = lexicon(cli, Some("trip_state"))?;
            let state = |p: &Path| -> Result<Vec<context_codec_core::Atom>> {
                let doc = parse_ccl(&read_input(p)?).map_err(|e| anyhow!("{}: {}", p.display(), e))?;
                let (atoms, issues) = decode_lenient(&doc, &lex);
                if let Some(i) = issues.first() {
                    bail!("{}: {:?}", p.display(), i);
                }
                Ok(atoms)
            };
            let b = state(before)?;
            match (after, apply) {
                (Some(a), None) => emit(cli, "patch.json", &patch_to_json(&diff_states(&b, &state(a)?, &lex))),
                (None, Some(p)) => {
                    let patch = patch_from_json(&read_input(p)?)?;
                    let applied = apply_patch(&b, &patch, &lex)?;
                    for c in &applied.conflicts {
                        eprintln!("warning: conflict {:?}", c);
                    }
                    let doc = context_codec_core::ccl::group_atoms(&applied.atoms, &lex);
                    let text = context_codec_core::ccl::emit_ccl(&doc, context_codec_core::ccl::Profile::Core)?;
                    emit(cli, "state.ccl", &text)
                }
                _ => bail!("give either AFTER or --apply PATCH"),
            }
        }
        Cmd::Eval { sel, counts } => {
            let cases = sel.load()?;
            let counts = counts_for(counts.as_deref(), &cases)?;
            for case in &cases {
                let mut d = StandardDecoder::new(&case.lexicon);
                let r = run_eval(case, &mut d, Some(&counts));
                println!("# {}", case.name);
                emit(cli, &format!("{}.csv", case.name), &r.csv())?;
            }
            Ok(())
        }
        Cmd::Inject { sel } => {
            let cases = sel.load()?;
            let case = cases.iter().find(|c| c.name == "epidemic").unwrap_or(&cases[0]);
            let mut d = StandardDecoder::new(&case.lexicon);
            let results = run_injections(case, &injection_specs(), &mut d);
            emit(cli, "injections.csv", &injections_csv(&results))?;
            if results.iter().any(|r| !r.pass) {
                bail!("some injections did not behave as expected");
            }
            Ok(())
        }
        Cmd::Roundtrip { sel, decoder_cmd } => {
            let cases = sel.load()?;
            let spec = match decoder_cmd {
                Some(cmd) => Some(CommandSpec::parse(cmd).ok_or_else(|| anyhow!("empty command"))?),
                None => None,
            };
            let mut reports = Vec::new();
            for case in &cases {
                let mut d: Box<dyn Decoder> = match &spec {
                    Some(s) => Box::new(CommandDecoder { spec: s.clone(), lex: case.lexicon.clone() }),
                    None => Box::new(StandardDecoder::new(&case.lexicon)),
                };
                reports.push(run_roundtrip(case, d.as_mut(), &ROUNDTRIP_METHODS));
            }
            emit(cli, "roundtrip.csv", &roundtrip_csv(&reports))
        }
        Cmd::Report { sel, counts, runs } => {
            let cases = sel.load()?;
            let counts = counts_for(counts.as_deref(), &cases)?;
            let cfg = load_policy(cli.policy.as_deref())?;
            let report = full_report(
                &cases,
                Some(&counts),
                &mut |c: &CaseFixture| -> Box<dyn Decoder> { Box::new(StandardDecoder::new(&c.lexicon)) },
                *runs,
                cli.seed,
                &cfg,
            );
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("report"));
            std::fs::create_dir_all(&dir)?;
            for (name, text) in report.files() {
                std::fs::write(dir.join(&name), text).with_context(|| format!("writing {}", name))?;
            }
            print!("{}", verdicts_csv(&report.verdicts));
            let s = &report.sweep;
            println!(
                "budget sweep: {} runs, {} packets, {} infeasible, {} over budget, {} safety drops, {} verify failures",
                s.runs, s.packets, s.infeasible, s.over_budget, s.safety_dropped, s.verify_failures
            );
            println!("wrote {}", dir.display());
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}
