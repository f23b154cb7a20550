//! Scaling a named parameter either in the injected record or in the
//! candidate's own literals.

use serde_json::{Number, Value};

/// Scale every numeric leaf of the parameter named `key` in a copy of `data`.
///
/// `key` is tried as a top-level key, then as a dotted path
/// (`costs.inventory`), then as an object key anywhere in the record (every
/// match is scaled). `None` when nothing numeric was found.
pub fn perturb_record(data: &Value, key: &str, factor: f64) -> Option<Value> {
    let mut copy = data.clone();
    let mut touched = 0usize;
    if let Some(slot) = copy.get_mut(key) {
        touched += scale_leaves(slot, factor);
    } else if key.contains('.') {
        let mut cur = Some(&mut copy);
        for part in key.split('.') {
            cur = cur.and_then(|v| v.get_mut(part));
        }
        if let Some(slot) = cur {
            touched += scale_leaves(slot, factor);
        }
    }
    if touched == 0 {
        touched += scale_named(&mut copy, key, factor);
    }
    (touched > 0).then_some(copy)
}

fn scale_named(v: &mut Value, key: &str, factor: f64) -> usize {
    match v {
        Value::Object(map) => map
            .iter_mut()
            .map(|(k, child)| {
                if k == key {
                    scale_leaves(child, factor)
                } else {
                    scale_named(child, key, factor)
                }
            })
            .sum(),
        Value::Array(items) => items.iter_mut().map(|c| scale_named(c, key, factor)).sum(),
        _ => 0,
    }
}

fn scale_leaves(v: &mut Value, factor: f64) -> usize {
    match v {
        Value::Number(n) => {
            let Some(x) = n.as_f64() else { return 0 };
            let scaled = x * factor;
            let integral = (n.is_i64() || n.is_u64()) && scaled.fract() == 0.0 && scaled.abs() < 9e15;
            *v = if integral {
                Value::Number(Number::from(scaled as i64))
            } else {
                Number::from_f64(scaled).map(Value::Number).unwrap_or(Value::Null)
            };
            1
        }
        Value::Array(items) => items.iter_mut().map(|c| scale_leaves(c, factor)).sum(),
        Value::Object(map) => map.values_mut().map(|c| scale_leaves(c, factor)).sum(),
        _ => 0,
    }
}

/// A named literal value found in source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralSite {
    pub name: String,
    /// Byte range of the value expression.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Ident(&'a str),
    Str(&'a str),
    Number,
    Punct(char),
    Newline,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    tok: Tok<'a>,
    start: usize,
    end: usize,
}

fn tokenize(src: &str) -> Vec<Token<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c == '\n' {
            out.push(Token { tok: Tok::Newline, start, end: i + 1 });
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '"' || c == '\'' {
            let (inner, stop) = scan_string(bytes, i);
            out.push(Token { tok: Tok::Str(&src[inner.0..inner.1]), start, end: stop });
            i = stop;
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            // String prefixes such as f"..." are folded into the string token.
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') && i - start <= 2 {
                let (_, stop) = scan_string(bytes, i);
                out.push(Token { tok: Tok::Str(""), start, end: stop });
                i = stop;
            } else {
                out.push(Token { tok: Tok::Ident(&src[start..i]), start, end: i });
            }
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_') {
                let is_exp = bytes[i] == b'e' || bytes[i] == b'E';
                i += 1;
                if is_exp && i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
            }
            out.push(Token { tok: Tok::Number, start, end: i });
        } else {
            // Non-ASCII bytes become junk punctuation, which no literal contains.
            out.push(Token { tok: Tok::Punct(c), start, end: i + 1 });
            i += 1;
        }
    }
    out
}

/// Scan a string literal opening at `i`: byte range of its contents and the
/// index just past the closing quote.
fn scan_string(bytes: &[u8], mut i: usize) -> ((usize, usize), usize) {
    let quote = bytes[i];
    let triple = bytes.get(i..i + 3).is_some_and(|s| s.iter().all(|&b| b == quote));
    let width = if triple { 3 } else { 1 };
    i += width;
    let inner_start = i;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if triple {
            if bytes.get(i..i + 3).is_some_and(|s| s.iter().all(|&b| b == quote)) {
                return ((inner_start, i), i + 3);
            }
        } else if bytes[i] == quote || bytes[i] == b'\n' {
            return ((inner_start, i), i + 1);
        }
        i += 1;
    }
    let end = bytes.len();
    ((inner_start.min(end), end), end)
}

/// Extent (token indices) of the value expression starting at `from`.
fn value_extent(toks: &[Token<'_>], from: usize) -> usize {
    let mut depth = 0i32;
    let mut j = from;
    while j < toks.len() {
        match toks[j].tok {
            Tok::Punct('(' | '[' | '{') => depth += 1,
            Tok::Punct(')' | ']' | '}') => {
                if depth == 0 {
                    return j;
                }
                depth -= 1;
            }
            Tok::Punct(',') if depth == 0 => return j,
            Tok::Newline if depth == 0 => return j,
            _ => {}
        }
        j += 1;
    }
    j
}

fn is_numeric_value(toks: &[Token<'_>]) -> bool {
    let has_number = toks.iter().any(|t| t.tok == Tok::Number);
    let all_literal = toks.iter().all(|t| {
        matches!(
            t.tok,
            Tok::Number | Tok::Str(_) | Tok::Newline | Tok::Punct('(' | ')' | '[' | ']' | '{' | '}' | ',' | ':' | '-' | '+')
        )
    });
    has_number && all_literal
}

/// Assignments `name = <literal>` and dict entries `"name": <literal>` whose
/// value is built only from numeric literals and containers.
pub fn literal_sites(src: &str) -> Vec<LiteralSite> {
    let toks = tokenize(src);
    let mut sites = Vec::new();
    for i in 0..toks.len() {
        let name = match (toks[i].tok, toks.get(i + 1).map(|t| t.tok), toks.get(i + 2).map(|t| t.tok)) {
            (Tok::Ident(n), Some(Tok::Punct('=')), next) if next != Some(Tok::Punct('=')) => {
                let prev = i.checked_sub(1).map(|p| toks[p].tok);
                if matches!(prev, Some(Tok::Punct('.' | '=' | '!' | '<' | '>'))) {
                    continue;
                }
                n
            }
            (Tok::Str(n), Some(Tok::Punct(':')), _) if !n.is_empty() => n,
            _ => continue,
        };
        let from = i + 2;
        if from >= toks.len() {
            continue;
        }
        let end = value_extent(&toks, from);
        if end <= from || !is_numeric_value(&toks[from..end]) {
            continue;
        }
        sites.push(LiteralSite {
            name: name.to_string(),
            start: toks[from].start,
            end: toks[end - 1].end,
        });
    }
    sites
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).flat_map(char::to_lowercase).collect()
}

fn tokens_of(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if !c.is_ascii_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_ascii_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_ascii_lowercase() || c.is_ascii_digit();
        cur.push(c.to_ascii_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Match tier of `candidate` for the requested `key`: 0 exact
/// (case-insensitive), 1 normalized snake/camel equality, 2 token subset.
fn match_tier(key: &str, candidate: &str) -> Option<u8> {
    if key.eq_ignore_ascii_case(candidate) {
        return Some(0);
    }
    if normalize(key) == normalize(candidate) {
        return Some(1);
    }
    let a = tokens_of(key);
    let b = tokens_of(candidate);
    let subset = |x: &[String], y: &[String]| !x.is_empty() && x.iter().all(|t| y.contains(t));
    (subset(&a, &b) || subset(&b, &a)).then_some(2)
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.chars()
        .zip(b.chars())
        .take_while(|(x, y)| x.eq_ignore_ascii_case(y))
        .count()
}

/// Best literal name for `key`: by tier, then longest common prefix, then
/// shortest name.
pub fn fuzzy_match<'a>(key: &str, names: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    names
        .into_iter()
        .filter_map(|n| {
            let tier = match_tier(key, n).or_else(|| match_tier(leaf, n))?;
            Some((tier, std::cmp::Reverse(common_prefix(leaf, n)), n.len(), n))
        })
        .min_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)))
        .map(|(_, _, _, n)| n)
}

fn format_scaled(original: &str, scaled: f64) -> String {
    let was_int = !original.contains(['.', 'e', 'E']);
    if was_int && scaled.fract() == 0.0 && scaled.abs() < 9e15 {
        format!("{}", scaled as i64)
    } else {
        format!("{scaled:?}")
    }
}

/// Scale the literal value(s) assigned to the name best matching `key`.
/// Every site with that exact name is rewritten. `None` when no site matches.
pub fn perturb_source(src: &str, key: &str, factor: f64) -> Option<String> {
    let sites = literal_sites(src);
    let chosen = fuzzy_match(key, sites.iter().map(|s| s.name.as_str()))?.to_string();
    let mut out = src.to_string();
    // Rewrite back to front so earlier offsets stay valid.
    let mut targets: Vec<&LiteralSite> = sites.iter().filter(|s| s.name == chosen).collect();
    targets.sort_by_key(|s| std::cmp::Reverse(s.start));
    for site in targets {
        let value = &src[site.start..site.end];
        let rewritten = scale_numbers(value, factor);
        out.replace_range(site.start..site.end, &rewritten);
    }
    Some(out)
}

/// Scale numeric literals in a value expression, leaving dict keys alone.
fn scale_numbers(expr: &str, factor: f64) -> String {
    let toks = tokenize(expr);
    let mut out = String::with_capacity(expr.len());
    let mut last = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.tok != Tok::Number {
            continue;
        }
        let is_key = matches!(toks.get(i + 1).map(|n| n.tok), Some(Tok::Punct(':')));
        if is_key {
            continue;
        }
        let text = &expr[t.start..t.end];
        let Ok(v) = text.replace('_', "").parse::<f64>() else { continue };
        out.push_str(&expr[last..t.start]);
        out.push_str(&format_scaled(text, v * factor));
        last = t.end;
    }
    out.push_str(&expr[last..]);
    out
}
