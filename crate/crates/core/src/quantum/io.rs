//! Text format for realizations.
//!
//! ```text
//! dims 2 2
//! state
//! 0.5+0j 0+0j 0+0j 0.5+0j
//! ...
//! alice 0 3        # setting, outcome count; then each element row by row
//! ...
//! bob 0 3
//! ...
//! ```
//!
//! Entries are written `re+imj` with round-trip precision.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{CMatrix, DensityMatrix, Povm, Realization};
use crate::error::{Error, Result};

fn fmt_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{}{:?}j", z.re, sign, z.im.abs())
}

fn write_matrix(out: &mut String, m: &CMatrix) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_complex(m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn serialize_realization(r: &Realization) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dims {} {}", r.state().dim_a(), r.state().dim_b());
    out.push_str("state\n");
    write_matrix(&mut out, r.state().matrix());
    for (party, povms) in [("alice", r.povms_a()), ("bob", r.povms_b())] {
        for (x, p) in povms.iter().enumerate() {
            let _ = writeln!(out, "{party} {x} {}", p.outcomes());
            for m in p.elements() {
                write_matrix(&mut out, m);
            }
        }
    }
    out
}

fn parse_complex(tok: &str, line: usize, col: usize) -> Result<Complex64> {
    let bad = || Error::parse(line, col, format!("invalid complex number `{tok}`"));
    let Some(body) = tok.strip_suffix(['j', 'i']) else {
        return tok.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that does not belong to an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (body[..k].parse::<f64>().map_err(|_| bad())?, body[k..].parse::<f64>().map_err(|_| bad())?),
        None => (0.0, body.parse::<f64>().map_err(|_| bad())?),
    };
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

struct Cursor<'a> {
    toks: Vec<(usize, usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("");
            let mut offset = 0;
            for tok in content.split_whitespace() {
                let start = content[offset..].find(tok).expect("token in line") + offset;
                toks.push((i + 1, start + 1, tok));
                offset = start + tok.len();
            }
        }
        Self { toks, pos: 0 }
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(&(l, c, _)) => (l, c),
            None => (1, 1),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, usize, &'a str)> {
        let t = self.toks.get(self.pos).copied().ok_or_else(|| {
            let (l, c) = self.here();
            Error::parse(l, c, format!("unexpected end of input, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (l, c, t) = self.next(kw)?;
        if t != kw {
            return Err(Error::parse(l, c, format!("expected `{kw}`, found `{t}`")));
        }
        Ok(())
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (l, c, t) = self.next(what)?;
        t.parse().map_err(|_| Error::parse(l, c, format!("invalid {what} `{t}`")))
    }

    fn matrix(&mut self, d: usize) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                let (l, col, t) = self.next("matrix entry")?;
                m[(r, c)] = parse_complex(t, l, col)?;
            }
        }
        Ok(m)
    }
}

pub fn parse_realization(text: &str) -> Result<Realization> {
    let mut cur = Cursor::new(text);
    cur.keyword("dims")?;
    let da = cur.count("dimension")?;
    let db = cur.count("dimension")?;
    if da == 0 || db == 0 {
        let (l, c) = cur.here();
        return Err(Error::parse(l, c, "dimensions must be positive"));
    }
    cur.keyword("state")?;
    let state = DensityMatrix::new(da, db, cur.matrix(da * db)?)?;
    let mut povms_a = Vec::new();
    let mut povms_b = Vec::new();
    while cur.pos < cur.toks.len() {
        let (l, c, party) = cur.next("party")?;
        let (list, d) = match party {
            "alice" => (&mut povms_a, da),
            "bob" => (&mut povms_b, db),
            other => return Err(Error::parse(l, c, format!("expected `alice` or `bob`, found `{other}`"))),
        };
        let (sl, sc, _) = cur.toks[cur.pos.min(cur.toks.len() - 1)];
        let setting = cur.count("setting")?;
        if setting != list.len() {
            return Err(Error::parse(sl, sc, format!("expected setting {}, found {setting}", list.len())));
        }
        let outcomes = cur.count("outcome count")?;
        if outcomes == 0 {
            return Err(Error::parse(sl, sc, "outcome count must be positive"));
        }
        let elements = (0..outcomes).map(|_| cur.matrix(d)).collect::<Result<Vec<_>>>()?;
        list.push(Povm::new(elements).map_err(|e| Error::parse(l, c, e.to_string()))?);
    }
    Realization::new(state, povms_a, povms_b)
}
