//! Typed atom values: exact decimals, calendar dates, enum tokens, nested
//! lists and ordered maps.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Maximum list/map nesting depth accepted by validation.
pub const MAX_VALUE_DEPTH: usize = 8;

const MAX_DECIMAL_SCALE: u32 = 18;
const MAX_DECIMAL_DIGITS: usize = 30;

/// Exact decimal number. The scale is part of the value's spelling
/// (`"0.00"` keeps two places) but not of its numeric identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: i128,
    scale: u32,
}

impl Decimal {
    pub fn new(mantissa: i128, scale: u32) -> Self {
        Decimal { mantissa, scale }
    }

    pub fn from_int(value: i64) -> Self {
        Decimal { mantissa: value as i128, scale: 0 }
    }

    /// Parses `-12.50`, `.08`, `3`, `+1.0`. Exponents are not accepted.
    pub fn parse(text: &str) -> Option<Decimal> {
        let (negative, body) = match text.as_bytes().first()? {
            b'-' => (true, &text[1..]),
            b'+' => (false, &text[1..]),
            _ => (false, text),
        };
        let (int_part, frac_part) = match body.find('.') {
            Some(dot) => (&body[..dot], &body[dot + 1..]),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if body.ends_with('.') {
            return None;
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if int_part.len() + frac_part.len() > MAX_DECIMAL_DIGITS || frac_part.len() as u32 > MAX_DECIMAL_SCALE {
            return None;
        }
        let mut mantissa: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            mantissa = mantissa * 10 + i128::from(b - b'0');
        }
        if negative {
            mantissa = -mantissa;
        }
        Some(Decimal { mantissa, scale: frac_part.len() as u32 })
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Integer value when the decimal has no fractional part at any scale.
    pub fn as_integer(&self) -> Option<i64> {
        let factor = 10i128.checked_pow(self.scale)?;
        if self.mantissa % factor == 0 {
            i64::try_from(self.mantissa / factor).ok()
        } else {
            None
        }
    }

    /// Rational comparison at a common scale.
    pub fn cmp_numeric(&self, other: &Decimal) -> Ordering {
        let scale = self.scale.max(other.scale);
        let lhs = self.mantissa.checked_mul(10i128.pow(scale - self.scale));
        let rhs = other.mantissa.checked_mul(10i128.pow(scale - other.scale));
        match (lhs, rhs) {
            (Some(a), Some(b)) => a.cmp(&b),
            // Digit and scale limits keep both sides within i128.
            _ => self.mantissa.signum().cmp(&other.mantissa.signum()),
        }
    }

    /// Spelling without a leading zero for magnitudes below one (`.08`).
    pub fn to_compact_string(&self) -> String {
        let full = self.to_string();
        if let Some(rest) = full.strip_prefix("0.") {
            alloc::format!(".{}", rest)
        } else if let Some(rest) = full.strip_prefix("-0.") {
            alloc::format!("-.{}", rest)
        } else {
            full
        }
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.mantissa.unsigned_abs().to_string();
        let sign = if self.mantissa < 0 { "-" } else { "" };
        let scale = self.scale as usize;
        if scale == 0 {
            return write!(f, "{}{}", sign, digits);
        }
        let padded = if digits.len() <= scale {
            let mut s = String::new();
            for _ in 0..=(scale - digits.len()) {
                s.push('0');
            }
            s.push_str(&digits);
            s
        } else {
            digits
        };
        let split = padded.len() - scale;
        write!(f, "{}{}.{}", sign, &padded[..split], &padded[split..])
    }
}

/// A calendar-valid date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: u16,
    month: u8,
    day: u8,
}

const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

fn days_in_month(year: u16, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            let y = u32::from(year);
            if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

fn parse_fixed_digits(text: &str, len: usize) -> Option<u16> {
    if text.len() != len || !text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

impl Date {
    pub fn new(year: u16, month: u8, day: u8) -> Option<Date> {
        if year == 0 || !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return None;
        }
        Some(Date { year, month, day })
    }

    pub fn year(&self) -> u16 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    /// `YYYY-MM-DD`.
    pub fn parse_iso(text: &str) -> Option<Date> {
        let mut parts = text.split('-');
        let y = parse_fixed_digits(parts.next()?, 4)?;
        let m = parse_fixed_digits(parts.next()?, 2)?;
        let d = parse_fixed_digits(parts.next()?, 2)?;
        if parts.next().is_some() {
            return None;
        }
        Date::new(y, m as u8, d as u8)
    }

    /// `MM/DD/YYYY`.
    pub fn parse_mdy(text: &str) -> Option<Date> {
        let mut parts = text.split('/');
        let m = parse_fixed_digits(parts.next()?, 2)?;
        let d = parse_fixed_digits(parts.next()?, 2)?;
        let y = parse_fixed_digits(parts.next()?, 4)?;
        if parts.next().is_some() {
            return None;
        }
        Date::new(y, m as u8, d as u8)
    }

    /// `DD Mon YYYY`, month abbreviation case-insensitive.
    pub fn parse_d_mon_y(text: &str) -> Option<Date> {
        let mut parts = text.split(' ');
        let d = parse_fixed_digits(parts.next()?, 2)?;
        let mon = parts.next()?.to_ascii_lowercase();
        let y = parse_fixed_digits(parts.next()?, 4)?;
        if parts.next().is_some() {
            return None;
        }
        let m = MONTHS.iter().position(|name| *name == mon)? as u8 + 1;
        Date::new(y, m, d as u8)
    }

    /// Accepts exactly the three supported layouts.
    pub fn parse_any(text: &str) -> Option<Date> {
        Date::parse_iso(text).or_else(|| Date::parse_mdy(text)).or_else(|| Date::parse_d_mon_y(text))
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// How lists are compared for equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListSemantics {
    /// Order matters (procedural lists such as parse-format priority).
    Sequence,
    /// Order-free with multiplicity (preference sets).
    Multiset,
}

/// Reserved map keys encoding an arrow mapping `src->dst`.
pub const ARROW_FROM: &str = "$from";
pub const ARROW_TO: &str = "$to";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Decimal(Decimal),
    Date(Date),
    /// Bare enum token; spelling preserved (proper nouns keep their case).
    Enum(String),
    /// Free string, rendered quoted.
    Str(String),
    List(Vec<Value>),
    /// Ordered key/value pairs with unique keys.
    Map(Vec<(String, Value)>),
}

impl Value {
    pub fn enum_token(token: impl Into<String>) -> Value {
        Value::Enum(token.into())
    }

    pub fn string(text: impl Into<String>) -> Value {
        Value::Str(text.into())
    }

    pub fn arrow(from: Value, to: Value) -> Value {
        Value::Map(alloc::vec![(ARROW_FROM.into(), from), (ARROW_TO.into(), to)])
    }

    /// `(from, to)` when this map encodes an arrow mapping.
    pub fn as_arrow(&self) -> Option<(&Value, &Value)> {
        match self {
            Value::Map(pairs) if pairs.len() == 2 && pairs[0].0 == ARROW_FROM && pairs[1].0 == ARROW_TO => {
                Some((&pairs[0].1, &pairs[1].1))
            }
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Decimal(_))
    }

    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Value::Int(i) => Some(Decimal::from_int(*i)),
            Value::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Enum(s) | Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn map_get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(pairs) => pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    /// Nesting depth: scalars are 0, `[1]` is 1.
    pub fn depth(&self) -> usize {
        match self {
            Value::List(items) => 1 + items.iter().map(Value::depth).max().unwrap_or(0),
            Value::Map(pairs) => 1 + pairs.iter().map(|(_, v)| v.depth()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Short type label used in diagnostics and specificity scoring.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Decimal(_) => "decimal",
            Value::Date(_) => "date",
            Value::Enum(_) => "enum",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }
}

fn text_equiv(a: &str, b: &str) -> bool {
    a == b || a.to_lowercase() == b.to_lowercase()
}

/// Equality after normalization. Numbers compare as rationals, enum and
/// free-string spellings compare case-insensitively, maps key-wise.
pub fn value_equiv_with(a: &Value, b: &Value, lists: ListSemantics) -> bool {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (x, y) if x.is_numeric() && y.is_numeric() => {
            let (dx, dy) = (x.as_decimal().unwrap(), y.as_decimal().unwrap());
            dx.cmp_numeric(&dy) == Ordering::Equal
        }
        (Value::Date(x), Value::Date(y)) => x == y,
        (Value::Enum(x) | Value::Str(x), Value::Enum(y) | Value::Str(y)) => text_equiv(x, y),
        (Value::List(xs), Value::List(ys)) => {
            if xs.len() != ys.len() {
                return false;
            }
            match lists {
                ListSemantics::Sequence => xs.iter().zip(ys).all(|(x, y)| value_equiv_with(x, y, lists)),
                ListSemantics::Multiset => {
                    let mut used = alloc::vec![false; ys.len()];
                    xs.iter().all(|x| {
                        let hit = ys
                            .iter()
                            .enumerate()
                            .find(|(i, y)| !used[*i] && value_equiv_with(x, y, lists));
                        match hit {
                            Some((i, _)) => {
                                used[i] = true;
                                true
                            }
                            None => false,
                        }
                    })
                }
            }
        }
        (Value::Map(xs), Value::Map(ys)) => {
            xs.len() == ys.len()
                && xs.iter().all(|(k, x)| {
                    ys.iter().find(|(k2, _)| k2 == k).is_some_and(|(_, y)| value_equiv_with(x, y, lists))
                })
        }
        _ => false,
    }
}

/// Sequence-semantics equivalence.
pub fn value_equiv(a: &Value, b: &Value) -> bool {
    value_equiv_with(a, b, ListSemantics::Sequence)
}

fn range_bounds(v: &Value) -> Option<(Option<Decimal>, Option<Decimal>)> {
    let Value::Map(pairs) = v else { return None };
    if pairs.is_empty() || pairs.iter().any(|(k, _)| k != "min" && k != "max") {
        return None;
    }
    let min = match v.map_get("min") {
        Some(m) => Some(m.as_decimal()?),
        None => None,
    };
    let max = match v.map_get("max") {
        Some(m) => Some(m.as_decimal()?),
        None => None,
    };
    Some((min, max))
}

fn range_contains(range: &Value, point: &Value) -> bool {
    let (Some((min, max)), Some(p)) = (range_bounds(range), point.as_decimal()) else {
        return false;
    };
    min.is_none_or(|m| m.cmp_numeric(&p) != Ordering::Greater) && max.is_none_or(|m| m.cmp_numeric(&p) != Ordering::Less)
}

fn list_contains_all(outer: &[Value], inner: &[Value]) -> bool {
    inner.iter().all(|x| outer.iter().any(|y| value_equiv(x, y)))
}

/// Compatibility used by the conflict relation: equivalence, plus a
/// `{min,max}` range containing a numeric point, plus subset/superset for
/// `allowed` lists.
pub fn compatible(a: &Value, b: &Value, predicate: &str, lists: ListSemantics) -> bool {
    if value_equiv_with(a, b, lists) {
        return true;
    }
    if range_contains(a, b) || range_contains(b, a) {
        return true;
    }
    if predicate == "allowed" {
        if let (Value::List(xs), Value::List(ys)) = (a, b) {
            return list_contains_all(xs, ys) || list_contains_all(ys, xs);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_and_display_keep_scale() {
        assert_eq!(Decimal::parse("0.00").unwrap().to_string(), "0.00");
        assert_eq!(Decimal::parse(".08").unwrap().to_string(), "0.08");
        assert_eq!(Decimal::parse(".08").unwrap().to_compact_string(), ".08");
        assert_eq!(Decimal::parse("-1.5").unwrap().to_string(), "-1.5");
        assert_eq!(Decimal::parse("-0.5").unwrap().to_compact_string(), "-.5");
        assert_eq!(Decimal::parse("12").unwrap().to_string(), "12");
        assert!(Decimal::parse("1.").is_none());
        assert!(Decimal::parse(".").is_none());
        assert!(Decimal::parse("1e5").is_none());
        assert!(Decimal::parse("").is_none());
    }

    // Oracle: compare n1/10^s1 and n2/10^s2 by cross-multiplication.
    fn rational_eq(a: &str, b: &str) -> bool {
        fn split(s: &str) -> (i128, u32) {
            let (i, f) = s.split_once('.').unwrap_or((s, ""));
            let digits: alloc::string::String = alloc::format!("{}{}", i, f);
            (digits.parse::<i128>().unwrap_or(0), f.len() as u32)
        }
        let (n1, s1) = split(a);
        let (n2, s2) = split(b);
        n1 * 10i128.pow(s2) == n2 * 10i128.pow(s1)
    }

    #[test]
    fn decimal_equivalence_matches_rational_oracle() {
        for (a, b) in [("0.00", "0.0"), ("0.08", "0.080"), ("1.5", "1.50"), ("2", "2.000"), ("0.1", "0.01")] {
            let va = Value::Decimal(Decimal::parse(a).unwrap());
            let vb = Value::Decimal(Decimal::parse(b).unwrap());
            assert_eq!(value_equiv(&va, &vb), rational_eq(a, b), "{} vs {}", a, b);
        }
        assert!(value_equiv(&Value::Int(2), &Value::Decimal(Decimal::parse("2.00").unwrap())));
    }

    #[test]
    fn dates_parse_three_layouts() {
        let d = Date::new(2024, 5, 17).unwrap();
        assert_eq!(Date::parse_iso("2024-05-17"), Some(d));
        assert_eq!(Date::parse_mdy("05/17/2024"), Some(d));
        assert_eq!(Date::parse_d_mon_y("17 May 2024"), Some(d));
        assert_eq!(Date::parse_any("2024/05/17"), None);
        assert_eq!(Date::parse_iso("2023-02-29"), None);
        assert!(Date::parse_iso("2024-02-29").is_some());
        assert_eq!(d.to_string(), "2024-05-17");
    }

    #[test]
    fn basic_value_equivalence() {
        assert!(value_equiv(&Value::Bool(false), &Value::Bool(false)));
        assert!(!value_equiv(&Value::Int(350), &Value::Int(200)));
        assert!(value_equiv(&Value::enum_token("Canvas"), &Value::string("canvas")));
        assert!(!value_equiv(&Value::enum_token("350"), &Value::Int(350)));
    }

    #[test]
    fn list_semantics() {
        let a = Value::List(alloc::vec![Value::enum_token("ymd"), Value::enum_token("mdy")]);
        let b = Value::List(alloc::vec![Value::enum_token("mdy"), Value::enum_token("ymd")]);
        assert!(!value_equiv_with(&a, &b, ListSemantics::Sequence));
        assert!(value_equiv_with(&a, &b, ListSemantics::Multiset));
    }

    #[test]
    fn compatibility_extensions() {
        let range = Value::Map(alloc::vec![("min".into(), Value::Int(1)), ("max".into(), Value::Int(5))]);
        assert!(compatible(&range, &Value::Int(3), "equals", ListSemantics::Sequence));
        assert!(compatible(&Value::Int(3), &range, "equals", ListSemantics::Sequence));
        assert!(!compatible(&range, &Value::Int(9), "equals", ListSemantics::Sequence));
        let big = Value::List(alloc::vec![Value::enum_token("Baixa"), Value::enum_token("Chiado")]);
        let small = Value::List(alloc::vec![Value::enum_token("Baixa")]);
        assert!(compatible(&big, &small, "allowed", ListSemantics::Sequence));
        assert!(!compatible(&big, &small, "equals", ListSemantics::Sequence));
    }
}
