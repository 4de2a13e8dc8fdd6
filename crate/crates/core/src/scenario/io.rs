//! Plain-text formats for correlations, counts and functionals.
//!
//! ```text
//! scenario 3 3 3 / 3 3 3
//! # one line per (x, y), x-major; entries a-major then b
//! 0.1111 0.1111 ...
//! ```
//!
//! Functionals:
//!
//! ```text
//! form cg
//! bound_max 2
//! bound_min -3
//! 0 1 0 1 -1 ...
//! ```

use std::fmt::Write as _;

use super::{BellFunctional, CountsTable, Form, ProbabilityTable, Scenario};
use crate::error::{Error, Result};

/// Whitespace tokens with 1-based line/column positions; `#` starts a comment.
struct Tokens<'a> {
    lines: Vec<(usize, Vec<(usize, &'a str)>)>,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("");
            let mut toks = Vec::new();
            let mut start = None;
            for (pos, ch) in body.char_indices() {
                match (ch.is_whitespace(), start) {
                    (false, None) => start = Some(pos),
                    (true, Some(s)) => {
                        toks.push((s, &body[s..pos]));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                toks.push((s, &body[s..]));
            }
            if !toks.is_empty() {
                let toks = toks
                    .into_iter()
                    .map(|(s, t)| (body[..s].chars().count() + 1, t))
                    .collect();
                lines.push((i + 1, toks));
            }
        }
        Self { lines }
    }
}

fn parse_real(tok: &str, line: usize, col: usize) -> Result<f64> {
    let v = if let Some((n, d)) = tok.split_once('/') {
        let n: f64 = n.parse().map_err(|_| Error::parse(line, col, format!("invalid number `{tok}`")))?;
        let d: f64 = d.parse().map_err(|_| Error::parse(line, col, format!("invalid number `{tok}`")))?;
        if d == 0.0 {
            return Err(Error::parse(line, col, "zero denominator"));
        }
        n / d
    } else {
        tok.parse()
            .map_err(|_| Error::parse(line, col, format!("invalid number `{tok}`")))?
    };
    if !v.is_finite() {
        return Err(Error::parse(line, col, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_count(tok: &str, line: usize, col: usize) -> Result<u64> {
    tok.parse()
        .map_err(|_| Error::parse(line, col, format!("invalid count `{tok}`")))
}

fn parse_scenario(toks: &[(usize, &str)], line: usize) -> Result<Scenario> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut seen_slash = false;
    for &(col, t) in &toks[1..] {
        if t == "/" {
            if seen_slash {
                return Err(Error::parse(line, col, "second `/` in scenario header"));
            }
            seen_slash = true;
            continue;
        }
        let n: usize = t
            .parse()
            .map_err(|_| Error::parse(line, col, format!("invalid outcome count `{t}`")))?;
        if seen_slash { &mut b } else { &mut a }.push(n);
    }
    if !seen_slash {
        return Err(Error::parse(line, toks[0].0, "scenario header needs `/` between parties"));
    }
    Scenario::new(a, b).map_err(|e| Error::parse(line, toks[0].0, e.to_string()))
}

fn scenario_header(s: &Scenario) -> String {
    let join = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
    format!("scenario {} / {}", join(s.outputs_a()), join(s.outputs_b()))
}

/// Per-setting rows of a table file, checked against the scenario.
fn table_rows<'a>(text: &'a str) -> Result<(Scenario, Vec<(usize, usize, &'a str)>)> {
    let tokens = Tokens::new(text);
    let mut lines = tokens.lines.into_iter();
    let (hl, head) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty input; expected `scenario` header"))?;
    if head[0].1 != "scenario" {
        return Err(Error::parse(hl, head[0].0, format!("expected `scenario`, found `{}`", head[0].1)));
    }
    let s = parse_scenario(&head, hl)?;
    let rows: Vec<_> = lines.collect();
    let settings = s.inputs_a() * s.inputs_b();
    if rows.len() != settings {
        let line = rows.last().map_or(hl, |r| r.0);
        return Err(Error::parse(
            line,
            1,
            format!("expected {settings} setting rows, found {}", rows.len()),
        ));
    }
    let mut out = Vec::new();
    for (k, (line, toks)) in rows.into_iter().enumerate() {
        let (x, y) = (k / s.inputs_b(), k % s.inputs_b());
        let want = s.outputs_a()[x] * s.outputs_b()[y];
        if toks.len() != want {
            let col = toks.get(want).map_or(toks.last().unwrap().0, |t| t.0);
            return Err(Error::parse(
                line,
                col,
                format!("setting ({x},{y}) needs {want} entries, found {}", toks.len()),
            ));
        }
        out.extend(toks.into_iter().map(|(c, t)| (line, c, t)));
    }
    Ok((s, out))
}

pub fn parse_correlation(text: &str) -> Result<ProbabilityTable> {
    let (s, toks) = table_rows(text)?;
    let entries = toks
        .iter()
        .map(|&(l, c, t)| parse_real(t, l, c))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityTable::new(s, entries)
}

pub fn parse_counts(text: &str) -> Result<CountsTable> {
    let (s, toks) = table_rows(text)?;
    let counts = toks
        .iter()
        .map(|&(l, c, t)| parse_count(t, l, c))
        .collect::<Result<Vec<_>>>()?;
    CountsTable::new(s, counts)
}

/// Shortest decimal that round-trips.
fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:?}")
    }
}

fn write_rows<T>(s: &Scenario, entries: &[T], fmt: impl Fn(&T) -> String) -> String {
    let mut out = scenario_header(s);
    out.push('\n');
    for x in 0..s.inputs_a() {
        for y in 0..s.inputs_b() {
            let off = s.block_offset(x, y);
            let n = s.outputs_a()[x] * s.outputs_b()[y];
            let row: Vec<String> = entries[off..off + n].iter().map(&fmt).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn serialize_correlation(p: &ProbabilityTable) -> String {
    write_rows(p.scenario(), p.entries(), |v| fmt_real(*v))
}

pub fn serialize_counts(c: &CountsTable) -> String {
    write_rows(c.scenario(), c.counts(), |v| v.to_string())
}

/// Reads either a correlation or a counts file; counts files are recognized
/// by every entry being a non-negative integer with some entry above 1.
pub fn parse_table_or_counts(text: &str) -> Result<TableInput> {
    if let Ok(c) = parse_counts(text) {
        if c.counts().iter().any(|&n| n > 1) {
            return Ok(TableInput::Counts(c));
        }
    }
    parse_correlation(text).map(TableInput::Table)
}

#[derive(Debug, Clone)]
pub enum TableInput {
    Table(ProbabilityTable),
    Counts(CountsTable),
}

pub fn parse_functional(text: &str) -> Result<BellFunctional> {
    let tokens = Tokens::new(text);
    let mut scenario = Scenario::flagship();
    let mut form = None;
    let mut bound_max = None;
    let mut bound_min = None;
    let mut constant = 0.0;
    let mut coeffs = Vec::new();
    let mut last = (1, 1);
    for (line, toks) in &tokens.lines {
        let (col, key) = toks[0];
        let arg = |i: usize| {
            toks.get(i)
                .copied()
                .ok_or_else(|| Error::parse(*line, col, format!("`{key}` needs a value")))
        };
        match key {
            "scenario" if coeffs.is_empty() => scenario = parse_scenario(toks, *line)?,
            "form" if coeffs.is_empty() => {
                let (c, v) = arg(1)?;
                form = Some(match v {
                    "cg" => Form::CollinsGisin,
                    "full" => Form::Full,
                    other => {
                        return Err(Error::parse(*line, c, format!("unknown form `{other}`; expected cg or full")))
                    }
                });
            }
            "bound_max" | "bound_min" | "constant" if coeffs.is_empty() => {
                let (c, v) = arg(1)?;
                let val = if v == "none" { None } else { Some(parse_real(v, *line, c)?) };
                match key {
                    "bound_max" => bound_max = val,
                    "bound_min" => bound_min = val,
                    _ => constant = val.unwrap_or(0.0),
                }
            }
            _ => {
                for &(c, t) in toks {
                    coeffs.push(parse_real(t, *line, c)?);
                    last = (*line, c + t.chars().count());
                }
            }
        }
    }
    let form = form.ok_or_else(|| Error::parse(1, 1, "missing `form cg|full` line"))?;
    let expected = match form {
        Form::CollinsGisin => scenario.cg_dim(),
        Form::Full => scenario.full_dim(),
    };
    if coeffs.len() < expected {
        return Err(Error::parse(
            last.0,
            last.1,
            format!(
                "missing {} coefficient(s): expected {expected}, found {}",
                expected - coeffs.len(),
                coeffs.len()
            ),
        ));
    }
    if coeffs.len() > expected {
        return Err(Error::parse(
            last.0,
            last.1,
            format!("{} extra coefficient(s): expected {expected}", coeffs.len() - expected),
        ));
    }
    BellFunctional::new(scenario, form, coeffs)?
        .with_constant(constant)
        .with_bounds(bound_max, bound_min)
}

pub fn serialize_functional(f: &BellFunctional) -> String {
    let mut out = String::new();
    let s = f.scenario();
    if s != &Scenario::flagship() {
        writeln!(out, "{}", scenario_header(s)).unwrap();
    }
    writeln!(out, "form {}", f.form().tag()).unwrap();
    let bound = |b: Option<f64>| b.map_or("none".to_string(), fmt_real);
    writeln!(out, "bound_max {}", bound(f.local_max)).unwrap();
    writeln!(out, "bound_min {}", bound(f.local_min)).unwrap();
    if f.constant() != 0.0 {
        writeln!(out, "constant {}", fmt_real(f.constant())).unwrap();
    }
    let per_line = match f.form() {
        Form::CollinsGisin => 16,
        Form::Full => 9,
    };
    for chunk in f.coefficients().chunks(per_line) {
        let row: Vec<String> = chunk.iter().map(|&c| fmt_real(c)).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_round_trip() {
        let s = Scenario::flagship();
        let p = ProbabilityTable::uniform(&s).mix_with_white_noise(0.3).unwrap();
        let text = serialize_correlation(&p);
        assert!(text.starts_with("scenario 3 3 3 / 3 3 3\n"));
        assert_eq!(parse_correlation(&text).unwrap(), p);
    }

    #[test]
    fn short_row_reports_position() {
        let mut text = serialize_correlation(&ProbabilityTable::uniform(&Scenario::flagship()));
        text = text.replacen("0.1111111111111111\n", "\n", 1);
        match parse_correlation(&text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("needs 9 entries"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_token_column() {
        let text = "scenario 2 / 2\n0.5 0 zz 0.5\n";
        match parse_correlation(text).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 7)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn counts_round_trip() {
        let s = Scenario::new(vec![2, 2], vec![2]).unwrap();
        let c = CountsTable::new(s, vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let back = parse_counts(&serialize_counts(&c)).unwrap();
        assert_eq!(back.counts(), c.counts());
    }

    #[test]
    fn truncated_functional_names_missing_count() {
        let text = "form cg\nbound_max 2\nbound_min -3\n0 1 0 1\n";
        let err = parse_functional(text).unwrap_err().to_string();
        assert!(err.contains("missing 44 coefficient"), "{err}");
    }

    #[test]
    fn unknown_form_rejected() {
        let err = parse_functional("form dense\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, column: 6, .. }));
    }

    #[test]
    fn fractions_accepted() {
        let mut text = String::from("form full\nbound_max 2/3\nbound_min none\n");
        for _ in 0..81 {
            text.push_str("1/9 ");
        }
        let f = parse_functional(&text).unwrap();
        assert_eq!(f.local_max, Some(2.0 / 3.0));
        assert_eq!(f.coefficients()[0], 1.0 / 9.0);
    }
}
