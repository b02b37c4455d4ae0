//! Client side of the external extractor/decoder protocol: one JSON request
//! on stdin, canonical atom records on stdout, bounded by a timeout.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use context_codec_core::atom::validate;
use context_codec_core::codec::{message_index, ChatHistory, CodecAtom, Extractor, ExtractorError, Segmentation};
use context_codec_core::lexicon::Lexicon;
use context_codec_core::normalize::{canonicalize_predicate, canonicalize_subject};
use context_codec_core::Atom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("cannot start `{program}`: {reason}")]
    Spawn { program: String, reason: String },
    #[error("`{program}` timed out after {ms} ms")]
    Timeout { program: String, ms: u128 },
    #[error("`{program}` exited with {status}: {stderr}")]
    Failed { program: String, status: String, stderr: String },
    #[error("response is not a JSON array of records: {0}")]
    Malformed(String),
}

/// An external program, configured as a command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retries: u32,
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl CommandSpec {
    /// Whitespace-separated `program arg...`.
    pub fn parse(cmdline: &str) -> Option<CommandSpec> {
        let mut parts = cmdline.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandSpec { program, args: parts.collect(), timeout_ms: default_timeout_ms(), retries: 0 })
    }

    /// Runs the command once per attempt until one succeeds.
    pub fn run(&self, input: &str) -> Result<String, CommandError> {
        let mut last = None;
        for _ in 0..=self.retries {
            match self.run_once(input) {
                Ok(out) => return Ok(out),
                Err(e @ CommandError::Spawn { .. }) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn run_once(&self, input: &str) -> Result<String, CommandError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CommandError::Spawn { program: self.program.clone(), reason: e.to_string() })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = input.to_string();
        let writer = thread::spawn(move || {
            // a child that exits without reading is not our failure
            let _ = stdin.write_all(input.as_bytes());
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + Duration::from_millis(self.timeout_ms);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(CommandError::Timeout { program: self.program.clone(), ms: u128::from(self.timeout_ms) });
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => {
                    return Err(CommandError::Failed {
                        program: self.program.clone(),
                        status: "unknown".to_string(),
                        stderr: e.to_string(),
                    })
                }
            }
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(CommandError::Failed { program: self.program.clone(), status: status.to_string(), stderr: err.trim().to_string() });
        }
        Ok(out)
    }
}

/// Parses a record array. Records that do not deserialize or validate are
/// rejected one by one; the count of rejects is returned alongside.
pub fn parse_records(text: &str) -> Result<(Vec<Atom>, usize), CommandError> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| CommandError::Malformed(e.to_string()))?;
    let mut atoms = Vec::new();
    let mut rejected = 0;
    for v in raw {
        match serde_json::from_value::<Atom>(v) {
            Ok(a) if validate(&a).is_ok() => atoms.push(a),
            _ => rejected += 1,
        }
    }
    Ok((atoms, rejected))
}

/// Maps subject and predicate spellings onto the lexicon's canonicals;
/// atoms that fail validation afterwards are dropped.
pub fn normalize_records(atoms: &[Atom], lex: &Lexicon) -> Vec<Atom> {
    atoms
        .iter()
        .filter_map(|a| {
            let mut a = a.clone();
            if let Some(s) = canonicalize_subject(&a.subject, lex) {
                a.subject = s;
            }
            if let Some(p) = canonicalize_predicate(&a.predicate, a.modality, lex) {
                a.predicate = p;
            }
            validate(&a).is_ok().then_some(a)
        })
        .collect()
}

#[derive(Serialize)]
struct WireMessage<'a> {
    id: &'a str,
    role: &'static str,
    text: &'a str,
}

#[derive(Serialize)]
struct ExtractRequest<'a> {
    lexicon: &'a str,
    messages: Vec<WireMessage<'a>>,
}

/// Extraction through an external command. Every returned atom must carry
/// evidence pointing at a message of the request.
#[derive(Debug, Clone)]
pub struct CommandExtractor {
    pub spec: CommandSpec,
}

impl Extractor for CommandExtractor {
    fn name(&self) -> &str {
        &self.spec.program
    }

    fn extract(&self, h: &ChatHistory, _seg: &Segmentation, lex: &Lexicon) -> Result<Vec<CodecAtom>, ExtractorError> {
        let req = ExtractRequest {
            lexicon: &lex.version,
            messages: h.messages.iter().map(|m| WireMessage { id: &m.id, role: m.role.as_str(), text: &m.text }).collect(),
        };
        let body = serde_json::to_string(&req).expect("requests serialize");
        let out = self.spec.run(&body).map_err(|e| match e {
            CommandError::Malformed(m) => ExtractorError::Invalid(m),
            other => ExtractorError::Unavailable(other.to_string()),
        })?;
        let (atoms, _) = parse_records(&out).map_err(|e| ExtractorError::Invalid(e.to_string()))?;
        let index = message_index(h);
        Ok(normalize_records(&atoms, lex)
            .into_iter()
            .filter_map(|a| {
                let message = *index.get(&a.evidence.as_ref()?.source_id)?;
                Some(CodecAtom { message, ..CodecAtom::new(a) })
            })
            .collect())
    }
}
