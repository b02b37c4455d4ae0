//! Lexicon and codec configuration loading.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use context_codec_core::codec::CodecConfig;
use context_codec_core::lexicon::{builtin, Lexicon};

/// A builtin lexicon name, or a path to a lexicon JSON file.
pub fn load_lexicon(spec: &str) -> Result<Lexicon> {
    if let Some(lex) = builtin::lexicon(spec) {
        return Ok(lex);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(anyhow!("`{}` is neither a builtin lexicon ({}) nor a file", spec, builtin::NAMES.join(", ")));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Lexicon::from_json(&text).with_context(|| format!("lexicon {}", path.display()))
}

/// Codec configuration from JSON; missing fields take their defaults.
pub fn load_policy(path: Option<&Path>) -> Result<CodecConfig> {
    let Some(path) = path else { return Ok(CodecConfig::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: CodecConfig = serde_json::from_str(&text).with_context(|| format!("policy {}", path.display()))?;
    cfg.policy.validate().map_err(|e| anyhow!("policy {}: {}", path.display(), e.0))?;
    Ok(cfg)
}
