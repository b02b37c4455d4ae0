use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{is_number_literal, is_token_char, CclDocument, CclError, CclErrorKind, CclHeader, CclValue, Profile};

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line: 1, column: 1, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\n' | '\r')) {
            self.bump();
        }
    }

    fn skip_inline_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.bump();
        }
    }

    fn error(&self, kind: CclErrorKind, message: impl Into<String>) -> CclError {
        let token: String = self.chars[self.pos.min(self.chars.len())..]
            .iter()
            .take_while(|c| !c.is_whitespace())
            .take(24)
            .collect();
        CclError { kind, line: self.line, column: self.column, token, message: message.into() }
    }

    fn error_at(&self, line: usize, column: usize, kind: CclErrorKind, token: &str, message: impl Into<String>) -> CclError {
        CclError { kind, line, column, token: token.to_string(), message: message.into() }
    }

    /// Maximal run of token characters, stopping before `->`.
    fn scalar_run(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if !is_token_char(c) || (c == '-' && self.peek_at(1) == Some('>')) {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }
}

fn check_ascii(src: &str) -> Result<(), CclError> {
    let (mut line, mut column) = (1, 1);
    for c in src.chars() {
        let ok = c == '\t' || c == '\n' || c == '\r' || (' '..='~').contains(&c);
        if !ok {
            return Err(CclError {
                kind: CclErrorKind::Lexical,
                line,
                column,
                token: c.to_string(),
                message: "non-ASCII or control character".to_string(),
            });
        }
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    Ok(())
}

fn parse_header(cur: &mut Cursor) -> Result<CclHeader, CclError> {
    cur.skip_ws();
    if cur.peek() != Some('@') {
        return Err(cur.error(CclErrorKind::Header, "missing `@CCL/<version>` header"));
    }
    let (line, column) = (cur.line, cur.column);
    let mut word = String::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            break;
        }
        word.push(c);
        cur.bump();
    }
    let Some(rest) = word.strip_prefix("@CCL/") else {
        return Err(cur.error_at(line, column, CclErrorKind::Header, &word, "malformed header"));
    };
    let (digits, profile) = match rest.strip_suffix('m') {
        Some(d) => (d, Profile::Min),
        None => (rest, Profile::Core),
    };
    let version: u32 = match digits.parse() {
        Ok(v) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => v,
        _ => return Err(cur.error_at(line, column, CclErrorKind::Header, &word, "malformed header version")),
    };
    if version != 1 {
        return Err(cur.error_at(line, column, CclErrorKind::Header, &word, "unsupported CCL version"));
    }
    Ok(CclHeader { version, profile })
}

fn parse_key(cur: &mut Cursor) -> Result<String, CclError> {
    let mut key = String::new();
    while let Some(c) = cur.peek() {
        if c.is_ascii_alphanumeric() || c == '_' {
            key.push(c);
            cur.bump();
        } else {
            break;
        }
    }
    if !super::is_entry_key(&key) {
        return Err(cur.error(CclErrorKind::Syntax, "expected an uppercase entry key"));
    }
    Ok(key)
}

fn parse_string(cur: &mut Cursor) -> Result<String, CclError> {
    let (line, column) = (cur.line, cur.column);
    cur.bump(); // opening quote
    let mut out = String::new();
    loop {
        match cur.bump() {
            None => return Err(cur.error_at(line, column, CclErrorKind::Unbalanced, "\"", "unterminated string")),
            Some('"') => return Ok(out),
            Some('\\') => match cur.bump() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('u') => {
                    if cur.bump() != Some('{') {
                        return Err(cur.error(CclErrorKind::Lexical, "expected `{` after \\u"));
                    }
                    let mut hex = String::new();
                    while let Some(c) = cur.peek() {
                        if c == '}' {
                            break;
                        }
                        hex.push(c);
                        cur.bump();
                    }
                    if cur.bump() != Some('}') {
                        return Err(cur.error(CclErrorKind::Unbalanced, "unterminated \\u{...} escape"));
                    }
                    let ch = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                    match ch {
                        Some(c) if hex.len() <= 6 => out.push(c),
                        _ => return Err(cur.error(CclErrorKind::Lexical, "invalid \\u escape")),
                    }
                }
                _ => return Err(cur.error(CclErrorKind::Lexical, "unknown escape")),
            },
            Some(c) => out.push(c),
        }
    }
}

fn classify(run: String) -> CclValue {
    match run.as_str() {
        "true" => CclValue::Bool(true),
        "false" => CclValue::Bool(false),
        _ if is_number_literal(&run) => CclValue::Number(run),
        _ => CclValue::Token(run),
    }
}

fn parse_primary(cur: &mut Cursor, depth: usize) -> Result<CclValue, CclError> {
    if depth > 32 {
        return Err(cur.error(CclErrorKind::Syntax, "nesting too deep"));
    }
    match cur.peek() {
        Some('[') => {
            let (line, column) = (cur.line, cur.column);
            cur.bump();
            let mut items = Vec::new();
            cur.skip_ws();
            if cur.peek() == Some(']') {
                cur.bump();
                return Ok(CclValue::List(items));
            }
            loop {
                cur.skip_ws();
                items.push(parse_value_at(cur, depth + 1)?);
                cur.skip_ws();
                match cur.peek() {
                    Some(',') => {
                        cur.bump();
                    }
                    Some(']') => {
                        cur.bump();
                        return Ok(CclValue::List(items));
                    }
                    None => return Err(cur.error_at(line, column, CclErrorKind::Unbalanced, "[", "unclosed `[`")),
                    _ => return Err(cur.error(CclErrorKind::Syntax, "expected `,` or `]`")),
                }
            }
        }
        Some('{') => parse_braces(cur, depth),
        Some('"') => Ok(CclValue::Str(parse_string(cur)?)),
        Some(c) if is_token_char(c) => {
            let run = cur.scalar_run();
            if run.is_empty() {
                return Err(cur.error(CclErrorKind::Syntax, "expected a value"));
            }
            Ok(classify(run))
        }
        Some(']' | '}') => Err(cur.error(CclErrorKind::Unbalanced, "unexpected closing delimiter")),
        None => Err(cur.error(CclErrorKind::Syntax, "expected a value, found end of input")),
        _ => Err(cur.error(CclErrorKind::Syntax, "expected a value")),
    }
}

fn parse_braces(cur: &mut Cursor, depth: usize) -> Result<CclValue, CclError> {
    let (line, column) = (cur.line, cur.column);
    cur.bump();
    let mut pairs: Vec<(String, CclValue)> = Vec::new();
    let mut flags: Vec<String> = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some('}') {
        cur.bump();
        return Ok(CclValue::Map(pairs));
    }
    loop {
        cur.skip_ws();
        let (item_line, item_column) = (cur.line, cur.column);
        let (name, quoted) = match cur.peek() {
            Some('"') => (parse_string(cur)?, true),
            Some(c) if is_token_char(c) => (cur.scalar_run(), false),
            None => return Err(cur.error_at(line, column, CclErrorKind::Unbalanced, "{", "unclosed `{`")),
            _ => return Err(cur.error(CclErrorKind::Syntax, "expected a map key or flag")),
        };
        if name.is_empty() && !quoted {
            return Err(cur.error(CclErrorKind::Syntax, "expected a map key or flag"));
        }
        cur.skip_ws();
        if cur.peek() == Some(':') {
            cur.bump();
            cur.skip_ws();
            if !flags.is_empty() {
                return Err(cur.error_at(item_line, item_column, CclErrorKind::Syntax, &name, "flags and key:value pairs mixed"));
            }
            if pairs.iter().any(|(k, _)| *k == name) {
                return Err(cur.error_at(item_line, item_column, CclErrorKind::DuplicateKey, &name, "duplicate map key"));
            }
            let value = parse_value_at(cur, depth + 1)?;
            pairs.push((name, value));
        } else {
            if quoted || !pairs.is_empty() {
                return Err(cur.error_at(item_line, item_column, CclErrorKind::Syntax, &name, "flags and key:value pairs mixed"));
            }
            if flags.contains(&name) {
                return Err(cur.error_at(item_line, item_column, CclErrorKind::DuplicateKey, &name, "duplicate flag"));
            }
            flags.push(name);
        }
        cur.skip_ws();
        match cur.peek() {
            Some(',') => {
                cur.bump();
            }
            Some('}') => {
                cur.bump();
                return Ok(if flags.is_empty() { CclValue::Map(pairs) } else { CclValue::Flags(flags) });
            }
            None => return Err(cur.error_at(line, column, CclErrorKind::Unbalanced, "{", "unclosed `{`")),
            _ => return Err(cur.error(CclErrorKind::Syntax, "expected `,` or `}`")),
        }
    }
}

fn parse_value_at(cur: &mut Cursor, depth: usize) -> Result<CclValue, CclError> {
    let (line, column) = (cur.line, cur.column);
    let primary = parse_primary(cur, depth)?;
    let save = (cur.pos, cur.line, cur.column);
    cur.skip_inline_ws();
    if cur.peek() == Some('-') && cur.peek_at(1) == Some('>') {
        if !matches!(primary, CclValue::Token(_) | CclValue::List(_)) {
            return Err(cur.error_at(line, column, CclErrorKind::Syntax, "->", "arrow source must be a token or list"));
        }
        cur.bump();
        cur.bump();
        cur.skip_inline_ws();
        let target = cur.scalar_run();
        if target.is_empty() {
            return Err(cur.error(CclErrorKind::Syntax, "arrow target must be a token"));
        }
        return Ok(CclValue::Arrow(Box::new(primary), target));
    }
    (cur.pos, cur.line, cur.column) = save;
    Ok(primary)
}

fn parse_core_entries(cur: &mut Cursor, doc: &mut CclDocument) -> Result<(), CclError> {
    loop {
        cur.skip_ws();
        if cur.at_end() {
            return Ok(());
        }
        let (line, column) = (cur.line, cur.column);
        let key = parse_key(cur)?;
        cur.skip_inline_ws();
        if cur.bump() != Some('=') {
            return Err(cur.error(CclErrorKind::Syntax, "expected `=` after entry key"));
        }
        cur.skip_inline_ws();
        let value = parse_value_at(cur, 0)?;
        match cur.peek() {
            None | Some(' ' | '\t' | '\n' | '\r') => {}
            _ => return Err(cur.error(CclErrorKind::Syntax, "unexpected text after entry value")),
        }
        if !doc.push(key.clone(), value) {
            return Err(cur.error_at(line, column, CclErrorKind::DuplicateKey, &key, "duplicate entry key"));
        }
    }
}

fn parse_min_entries(cur: &mut Cursor, doc: &mut CclDocument) -> Result<(), CclError> {
    loop {
        cur.skip_ws();
        if cur.at_end() {
            return Ok(());
        }
        let (line, column) = (cur.line, cur.column);
        let key = parse_key(cur)?;
        if cur.bump() != Some('=') {
            return Err(cur.error(CclErrorKind::Syntax, "expected `=` after entry key"));
        }
        let (raw_line, raw_column) = (cur.line, cur.column);
        let mut raw = String::new();
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                break;
            }
            raw.push(c);
            cur.bump();
        }
        let items: Vec<&str> = raw.split(',').collect();
        if items.iter().any(|i| i.is_empty()) {
            return Err(cur.error_at(raw_line, raw_column, CclErrorKind::Syntax, &raw, "empty min item"));
        }
        let value = if items.len() == 1 {
            CclValue::Token(raw.clone())
        } else {
            CclValue::List(items.into_iter().map(|i| CclValue::Token(i.to_string())).collect())
        };
        if !doc.push(key.clone(), value) {
            return Err(cur.error_at(line, column, CclErrorKind::DuplicateKey, &key, "duplicate entry key"));
        }
    }
}

/// Parses a CCL document in either profile.
pub fn parse_ccl(text: &str) -> Result<CclDocument, CclError> {
    check_ascii(text)?;
    let mut cur = Cursor::new(text);
    let header = parse_header(&mut cur)?;
    let mut doc = CclDocument { header, entries: Vec::new() };
    match header.profile {
        Profile::Core => parse_core_entries(&mut cur, &mut doc)?,
        Profile::Min => parse_min_entries(&mut cur, &mut doc)?,
    }
    Ok(doc)
}

/// Parses a single core-profile value, e.g. `{w:80,h:50}`.
pub fn parse_value(text: &str) -> Result<CclValue, CclError> {
    check_ascii(text)?;
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let value = parse_value_at(&mut cur, 0)?;
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.error(CclErrorKind::Syntax, "unexpected text after value"));
    }
    Ok(value)
}
