use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::zonotope::{preprocess, BasisChange, PreprocessOptions, VectorFamily, Zonotope, ZonotopeError};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A raw instance as stored on disk: generators `A` (m x d), vectors `V`
/// (n x d) and optional preimages `U` (n x m).
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub comments: Vec<String>,
    pub a: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub u: Option<DMatrix<f64>>,
}

impl Instance {
    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Value of a `# key=value` comment token, if any.
    pub fn tag(&self, key: &str) -> Option<&str> {
        let prefix = format!("{key}=");
        self.comments
            .iter()
            .flat_map(|c| c.split_whitespace())
            .find_map(|tok| tok.strip_prefix(prefix.as_str()))
    }

    pub fn family(&self) -> VectorFamily {
        match &self.u {
            Some(u) => VectorFamily::with_preimages(self.v.clone(), u.clone()),
            None => VectorFamily::new(self.v.clone()),
        }
    }

    /// Validated problem data; see [`preprocess`].
    pub fn problem(&self, opts: PreprocessOptions) -> Result<(Zonotope, VectorFamily, BasisChange), ZonotopeError> {
        preprocess(&self.a, &self.family(), opts)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(int) => int.to_string(),
        None => s,
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_data(&mut self, comments: &mut Vec<String>) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last_line = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

fn parse_row(line_no: usize, line: &str, width: usize, what: &str) -> Result<Vec<f64>, ParseError> {
    let toks = tokens(line);
    if toks.len() != width {
        return Err(err(
            line_no,
            1,
            format!("{what} row has {} entries, expected {width}", toks.len()),
        ));
    }
    toks.iter()
        .map(|&(col, tok)| {
            let x: f64 = tok
                .parse()
                .map_err(|_| err(line_no, col, format!("invalid number `{tok}`")))?;
            if !x.is_finite() {
                return Err(err(line_no, col, format!("non-finite number `{tok}`")));
            }
            Ok(x)
        })
        .collect()
}

fn parse_block(
    lines: &mut Lines<'_>,
    comments: &mut Vec<String>,
    rows: usize,
    width: usize,
    what: &str,
) -> Result<DMatrix<f64>, ParseError> {
    let mut data = Vec::with_capacity(rows * width);
    for r in 0..rows {
        let (no, line) = lines.next_data(comments).ok_or_else(|| {
            err(
                lines.last_line + 1,
                1,
                format!("expected {rows} {what} rows, found {r}"),
            )
        })?;
        if line.trim() == "U" {
            return Err(err(no, 1, format!("expected {rows} {what} rows, found {r}")));
        }
        data.extend(parse_row(no, line, width, what)?);
    }
    Ok(DMatrix::from_row_slice(rows, width, &data))
}

/// Parse the line-oriented instance format:
///
/// ```text
/// # comments
/// d m n
/// <m lines of d numbers>   generators
/// <n lines of d numbers>   vectors
/// U                        optional
/// <n lines of m numbers>   preimages
/// ```
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut comments = Vec::new();
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last_line: 0,
    };
    let (no, header) = lines
        .next_data(&mut comments)
        .ok_or_else(|| err(1, 1, "missing header `d m n`"))?;
    let toks = tokens(header);
    if toks.len() != 3 {
        return Err(err(no, 1, "header must be `d m n`"));
    }
    let mut dims = [0usize; 3];
    for (slot, &(col, tok)) in dims.iter_mut().zip(&toks) {
        *slot = tok
            .parse()
            .map_err(|_| err(no, col, format!("invalid count `{tok}`")))?;
    }
    let [d, m, n] = dims;
    if d == 0 || m == 0 || n == 0 {
        return Err(err(no, 1, "d, m and n must be positive"));
    }
    let a = parse_block(&mut lines, &mut comments, m, d, "generator")?;
    let v = parse_block(&mut lines, &mut comments, n, d, "vector")?;
    let u = match lines.next_data(&mut comments) {
        None => None,
        Some((_, line)) if line.trim() == "U" => Some(parse_block(&mut lines, &mut comments, n, m, "preimage")?),
        Some((no, _)) => {
            return Err(err(no, 1, "unexpected data after vector block (expected `U` or end of file)"));
        }
    };
    if let Some((no, _)) = lines.next_data(&mut comments) {
        return Err(err(no, 1, "unexpected data after preimage block"));
    }
    Ok(Instance { comments, a, v, u })
}

fn write_block(out: &mut String, mat: &DMatrix<f64>) {
    for r in 0..mat.nrows() {
        let row: Vec<String> = mat.row(r).iter().map(|&x| format_number(x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    for c in &inst.comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{} {} {}", inst.d(), inst.m(), inst.n());
    write_block(&mut out, &inst.a);
    write_block(&mut out, &inst.v);
    if let Some(u) = &inst.u {
        out.push_str("U\n");
        write_block(&mut out, u);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let text = "1 1 1\n1\n1\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.a, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn short_generator_block_names_line() {
        let text = "# two rows only\n2 3 1\n1 0\n0 1\n";
        let e = parse_instance(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("generator"), "{e}");

        // Vector rows used up as generators leave the vector block short.
        let text = "2 3 1\n1 0\n0 1\n0.5 0.5\n";
        let e = parse_instance(text).unwrap_err();
        assert!(e.message.contains("vector"), "{e}");
    }

    #[test]
    fn rejects_bad_numbers_with_column() {
        let e = parse_instance("2 2 1\n1 0\n0 NaN\n1 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let e = parse_instance("2 2 1\n1 0\n0 1\n1 inf\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 3));
        let e = parse_instance("2 2 1\n1 0\n0 1\n1 x1\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 3));
        let e = parse_instance("2 2 1\n1 0 4\n0 1\n1 1\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn preimages_and_comments() {
        let text = "# kind=cube seed=4\n1 2 1\n1\n-1\n0.5\nU\n0.25 -0.25\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.tag("kind"), Some("cube"));
        assert_eq!(inst.tag("seed"), Some("4"));
        assert_eq!(inst.u.as_ref().unwrap()[(0, 1)], -0.25);
        assert_eq!(serialize_instance(&inst), text);
        assert!(parse_instance("1 1 1\n1\n1\n2\n").is_err());
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, f64::MIN_POSITIVE, 123456789.123456789] {
            assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
