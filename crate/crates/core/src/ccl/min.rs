//! CCL-Min abbreviation: template rules mapping min items to core
//! fragments. A fragment is one scalar value (`canvas.epidemic`) or one map
//! member (`count:350`); `*` in a template captures a non-empty run.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::lexicon::MinRule;

/// Splits at commas outside brackets, braces and quotes.
pub fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    let mut current = String::new();
    for c in text.chars() {
        if in_str {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(core::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    parts.push(current);
    parts
}

/// Matches `pattern` against the whole of `text`, returning captures.
pub fn match_template(pattern: &str, text: &str) -> Option<Vec<String>> {
    let segments: Vec<&str> = pattern.split('*').collect();
    let mut caps = Vec::new();
    if match_from(&segments, text, &mut caps) {
        Some(caps)
    } else {
        None
    }
}

fn match_from(segments: &[&str], text: &str, caps: &mut Vec<String>) -> bool {
    let Some(rest) = text.strip_prefix(segments[0]) else {
        return false;
    };
    if segments.len() == 1 {
        return rest.is_empty();
    }
    // A capture precedes segments[1]; try every non-empty length.
    let boundaries: Vec<usize> = rest.char_indices().map(|(i, _)| i).skip(1).chain(core::iter::once(rest.len())).collect();
    for end in boundaries {
        caps.push(rest[..end].to_string());
        if match_from(&segments[1..], &rest[end..], caps) {
            return true;
        }
        caps.pop();
    }
    false
}

pub fn fill_template(template: &str, caps: &[String]) -> String {
    let mut out = String::new();
    let mut next = 0;
    for (i, seg) in template.split('*').enumerate() {
        if i > 0 {
            out.push_str(caps.get(next).map(String::as_str).unwrap_or(""));
            next += 1;
        }
        out.push_str(seg);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("min item `{item}` matches no abbreviation rule")]
pub struct Unmappable {
    pub item: String,
}

/// Expands min items into core fragments. Fields without rules map items
/// to fragments verbatim.
pub fn expand(items: &[String], rules: &[MinRule]) -> Result<Vec<String>, Unmappable> {
    let mut out = Vec::new();
    let mut i = 0;
    'items: while i < items.len() {
        for rule in rules {
            let patterns: Vec<&str> = rule.min.split(',').collect();
            if i + patterns.len() > items.len() {
                continue;
            }
            let mut caps = Vec::new();
            let mut ok = true;
            for (j, p) in patterns.iter().enumerate() {
                match match_template(p, &items[i + j]) {
                    Some(c) => caps.extend(c),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                out.extend(split_top_level(&fill_template(&rule.core, &caps)));
                i += patterns.len();
                continue 'items;
            }
        }
        if rules.is_empty() {
            out.push(items[i].clone());
            i += 1;
        } else {
            return Err(Unmappable { item: items[i].clone() });
        }
    }
    Ok(out)
}

fn valid_item(item: &str) -> bool {
    !item.is_empty() && item.chars().all(|c| c.is_ascii_graphic() && c != ',')
}

/// Abbreviates as many fragments as the rules allow. Returns the min items
/// and, per fragment, whether it was consumed. Every result is checked by
/// expanding it back; fragments whose abbreviation does not round-trip stay
/// in core.
pub fn abbreviate(fragments: &[String], rules: &[MinRule]) -> (Vec<String>, Vec<bool>) {
    let mut consumed = alloc::vec![false; fragments.len()];
    // (first fragment index, items, fragment indices)
    let mut groups: Vec<(usize, Vec<String>, Vec<usize>)> = Vec::new();
    if rules.is_empty() {
        for (i, f) in fragments.iter().enumerate() {
            if valid_item(f) {
                groups.push((i, alloc::vec![f.clone()], alloc::vec![i]));
                consumed[i] = true;
            }
        }
    } else {
        for rule in rules {
            let patterns = split_top_level(&rule.core);
            while let Some((indices, caps)) = assign(&patterns, fragments, &consumed) {
                let items: Vec<String> = fill_template(&rule.min, &caps).split(',').map(|s| s.to_string()).collect();
                if !items.iter().all(|i| valid_item(i)) {
                    break;
                }
                for &i in &indices {
                    consumed[i] = true;
                }
                let first = *indices.iter().min().unwrap();
                groups.push((first, items, indices));
            }
        }
    }
    groups.sort_by_key(|g| g.0);
    // Keep only groups whose items expand back to exactly their fragments,
    // in context of the whole item sequence.
    loop {
        let items: Vec<String> = groups.iter().flat_map(|g| g.1.iter().cloned()).collect();
        let mut want: Vec<String> = groups.iter().flat_map(|g| g.2.iter().map(|&i| fragments[i].clone())).collect();
        let ok = match expand(&items, rules) {
            Ok(mut got) => {
                got.sort();
                want.sort();
                got == want
            }
            Err(_) => false,
        };
        if ok {
            break;
        }
        // Drop the last group and retry; worst case nothing is abbreviated.
        if let Some(g) = groups.pop() {
            for i in g.2 {
                consumed[i] = false;
            }
        } else {
            break;
        }
    }
    let items = groups.into_iter().flat_map(|g| g.1).collect();
    (items, consumed)
}

/// Finds distinct unconsumed fragments matching each pattern in turn.
fn assign(patterns: &[String], fragments: &[String], consumed: &[bool]) -> Option<(Vec<usize>, Vec<String>)> {
    fn go(
        patterns: &[String],
        fragments: &[String],
        used: &mut Vec<bool>,
        indices: &mut Vec<usize>,
        caps: &mut Vec<String>,
    ) -> bool {
        let Some(p) = patterns.first() else { return true };
        for (i, f) in fragments.iter().enumerate() {
            if used[i] {
                continue;
            }
            if let Some(c) = match_template(p, f) {
                used[i] = true;
                indices.push(i);
                let n = caps.len();
                caps.extend(c);
                if go(&patterns[1..], fragments, used, indices, caps) {
                    return true;
                }
                caps.truncate(n);
                indices.pop();
                used[i] = false;
            }
        }
        false
    }
    let mut used = consumed.to_vec();
    let mut indices = Vec::new();
    let mut caps = Vec::new();
    if go(patterns, fragments, &mut used, &mut indices, &mut caps) {
        Some((indices, caps))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rule(min: &str, core: &str) -> MinRule {
        MinRule { min: min.into(), core: core.into() }
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn templates_capture_and_fill() {
        assert_eq!(match_template("*x*", "80x50"), Some(strings(&["80", "50"])));
        assert_eq!(match_template("*0", "x100"), Some(strings(&["x10"])));
        assert_eq!(match_template("n*", "SIR"), None);
        assert_eq!(fill_template("w:*,h:*", &strings(&["80", "50"])), "w:80,h:50");
    }

    #[test]
    fn expand_printed_items() {
        let rules = vec![rule("*x*", "w:*,h:*"), rule("c*", "cell:*")];
        assert_eq!(expand(&strings(&["80x50", "c8"]), &rules).unwrap(), strings(&["w:80", "h:50", "cell:8"]));
        let fx = vec![rule("S*,I*,R*", "color:{S:*,I:*,R:*}"), rule("chartSIR", "chart:sir_counts")];
        assert_eq!(
            expand(&strings(&["Sblue", "Ired", "Rgreen", "chartSIR"]), &fx).unwrap(),
            strings(&["color:{S:blue,I:red,R:green}", "chart:sir_counts"])
        );
        assert!(expand(&strings(&["zzz"]), &fx).is_err());
    }

    #[test]
    fn abbreviate_round_trips() {
        let rules = vec![rule("*x*", "w:*,h:*"), rule("c*", "cell:*")];
        let frags = strings(&["w:80", "h:50", "cell:8"]);
        let (items, consumed) = abbreviate(&frags, &rules);
        assert_eq!(items, strings(&["80x50", "c8"]));
        assert!(consumed.iter().all(|c| *c));
        // A lone width cannot be abbreviated.
        let (items, consumed) = abbreviate(&strings(&["w:80", "cell:8"]), &rules);
        assert_eq!(items, strings(&["c8"]));
        assert_eq!(consumed, vec![false, true]);
    }

    #[test]
    fn split_respects_nesting() {
        assert_eq!(split_top_level("a:[1,2],b:{c:3,d:\"x,y\"}"), strings(&["a:[1,2]", "b:{c:3,d:\"x,y\"}"]));
    }
}
