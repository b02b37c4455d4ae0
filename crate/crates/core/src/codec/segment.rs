//! Chat history, sentence splitting and region routing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::normalize::normalize_surface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    System,
    Developer,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Developer => "developer",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "system" => Role::System,
            "developer" => Role::Developer,
            "user" => Role::User,
            "assistant" => Role::Assistant,
            "tool" => Role::Tool,
            other => return Err(alloc::format!("unknown role `{}`", other)),
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: String,
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn new(id: impl Into<String>, role: Role, text: impl Into<String>) -> Self {
        Message { id: id.into(), role, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChatHistory {
    pub messages: Vec<Message>,
}

impl ChatHistory {
    pub fn new(messages: Vec<Message>) -> Result<Self, String> {
        for (i, m) in messages.iter().enumerate() {
            if m.id.is_empty() || messages[..i].iter().any(|o| o.id == m.id) {
                return Err(alloc::format!("message id `{}` is empty or repeated", m.id));
            }
        }
        Ok(ChatHistory { messages })
    }

    /// A single user message with id `m1`.
    pub fn single(text: &str) -> Self {
        ChatHistory { messages: alloc::vec![Message::new("m1", Role::User, text)] }
    }

    /// Parses `Role: text` transcripts; indented or unprefixed lines continue
    /// the previous message. Text without any role prefix is one user
    /// message.
    pub fn from_transcript(text: &str) -> Self {
        let mut messages: Vec<Message> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim_start();
            let prefixed = trimmed.split_once(':').and_then(|(head, rest)| {
                let role = head.parse::<Role>().ok()?;
                (line.len() == trimmed.len()).then(|| (role, rest.trim_start()))
            });
            match (prefixed, messages.last_mut()) {
                (Some((role, rest)), _) => {
                    let id = alloc::format!("m{}", messages.len() + 1);
                    messages.push(Message::new(id, role, rest));
                }
                (None, Some(last)) => {
                    if !trimmed.is_empty() {
                        if !last.text.is_empty() {
                            last.text.push('\n');
                        }
                        last.text.push_str(trimmed);
                    }
                }
                (None, None) if trimmed.is_empty() => {}
                (None, None) => messages.push(Message::new("m1", Role::User, trimmed)),
            }
        }
        ChatHistory { messages }
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.messages.iter().position(|m| m.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    SystemConstraints,
    Goals,
    Decisions,
    Artifacts,
    Preferences,
    OpenQuestions,
    SafetyBoundaries,
    RecentTurns,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::SystemConstraints,
        Region::Goals,
        Region::Decisions,
        Region::Artifacts,
        Region::Preferences,
        Region::OpenQuestions,
        Region::SafetyBoundaries,
        Region::RecentTurns,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::SystemConstraints => "system_constraints",
            Region::Goals => "goals",
            Region::Decisions => "decisions",
            Region::Artifacts => "artifacts",
            Region::Preferences => "preferences",
            Region::OpenQuestions => "open_questions",
            Region::SafetyBoundaries => "safety_boundaries",
            Region::RecentTurns => "recent_turns",
        }
    }
}

/// A character range of one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpanRef {
    pub message: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub span: SpanRef,
    pub text: String,
    /// Content regions, most specific first (never `RecentTurns`).
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segmentation {
    pub regions: BTreeMap<Region, Vec<SpanRef>>,
    pub sentences: Vec<Sentence>,
}

impl Segmentation {
    pub fn spans(&self, region: Region) -> &[SpanRef] {
        self.regions.get(&region).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Sentence boundaries: `.`, `!`, `?`, `;` followed by whitespace or end,
/// and newlines that start a bullet item. Character offsets.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |s: usize, e: usize, out: &mut Vec<(usize, usize)>| {
        let (mut s, mut e) = (s, e);
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push((s, e));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if matches!(c, '.' | '!' | '?' | ';') && next.is_none_or(char::is_whitespace) {
            push(start, i + 1, &mut out);
            start = i + 1;
        } else if c == '\n' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                j += 1;
            }
            if j < chars.len() && matches!(chars[j], '-' | '*' | '\u{2022}') && chars.get(j + 1) == Some(&' ') {
                push(start, i, &mut out);
                start = j + 2;
                i = j + 1;
            }
        }
        i += 1;
    }
    push(start, chars.len(), &mut out);
    out
}

const DECISION_CUES: &[&str] = &[
    "chose", "chosen", "choose", "keep", "kept", "rejected", "selected", "select", "decided", "decide", "suggested",
    "going with", "switch", "instead",
];
const SAFETY_CUES: &[&str] =
    &["defensive-only", "defensive only", "safety", "privacy", "private", "refuse", "policy", "personal data", "pii"];
const PREFERENCE_CUES: &[&str] = &["like", "likes", "prefer", "prefers", "love", "enjoy", "want", "favorite"];
const ARTIFACT_CUES: &[&str] = &["file", "script", "code", "html", "csv", "component", "report", "output", "answer"];

fn has_cue(text: &str, cues: &[&str]) -> bool {
    cues.iter().any(|c| !crate::normalize::find_words(text, c).is_empty())
}

fn route(role: Role, text: &str) -> Vec<Region> {
    let t = normalize_surface(text);
    let mut regions = Vec::new();
    if has_cue(&t, SAFETY_CUES) {
        regions.push(Region::SafetyBoundaries);
    }
    if matches!(role, Role::System | Role::Developer) {
        regions.push(Region::SystemConstraints);
    }
    if text.trim_end().ends_with('?') {
        regions.push(Region::OpenQuestions);
    }
    if has_cue(&t, DECISION_CUES) {
        regions.push(Region::Decisions);
    }
    if has_cue(&t, PREFERENCE_CUES) {
        regions.push(Region::Preferences);
    }
    if has_cue(&t, ARTIFACT_CUES) {
        regions.push(Region::Artifacts);
    }
    if regions.is_empty() {
        regions.push(Region::Goals);
    }
    regions
}

/// Routes every sentence to its regions; the last `k` messages also form
/// `recent_turns`.
pub fn segment(h: &ChatHistory, k: usize) -> Segmentation {
    let mut seg = Segmentation::default();
    for (mi, m) in h.messages.iter().enumerate() {
        let spans = split_sentences(&m.text);
        if spans.is_empty() {
            seg.regions.entry(Region::Goals).or_default().push(SpanRef { message: mi, start: 0, end: 0 });
        }
        for (s, e) in spans {
            let text: String = m.text.chars().skip(s).take(e - s).collect();
            let regions = route(m.role, &text);
            let span = SpanRef { message: mi, start: s, end: e };
            for r in &regions {
                seg.regions.entry(*r).or_default().push(span);
            }
            seg.sentences.push(Sentence { span, text, regions });
        }
    }
    let n = h.messages.len();
    for mi in n.saturating_sub(k)..n {
        let len = h.messages[mi].text.chars().count();
        seg.regions.entry(Region::RecentTurns).or_default().push(SpanRef { message: mi, start: 0, end: len });
    }
    seg
}
