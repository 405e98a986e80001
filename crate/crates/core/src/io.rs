//! Plain-text instance files.
//!
//! ```text
//! l0bnb-instance v1
//! m n lambda M
//! # key=value            (any number of metadata lines)
//! a_11 a_12 … a_1n       (m lines, row-major)
//! …
//! y_1 … y_m
//! ```
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! survives a write/read cycle bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::datagen::GeneratedInstance;
use crate::error::{Error, Result};
use crate::model::Instance;

pub const FORMAT_HEADER: &str = "l0bnb-instance v1";
const FORMAT_NAME: &str = "l0bnb-instance";

pub type Metadata = BTreeMap<String, String>;

fn push_number(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

/// Renders an instance in the on-disk format.
pub fn format_instance(instance: &Instance, metadata: &Metadata) -> Result<String> {
    let (m, n) = (instance.rows(), instance.cols());
    let mut out = String::with_capacity(24 * (m * n + m) + 256);
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    write!(out, "{m} {n} ").unwrap();
    push_number(&mut out, instance.lambda());
    out.push(' ');
    push_number(&mut out, instance.big_m());
    out.push('\n');
    for (key, value) in metadata {
        if key.is_empty() || key.contains(['=', '\n', '\r']) || key.trim() != key {
            return Err(Error::InvalidInstance(format!("invalid metadata key {key:?}")));
        }
        if value.contains(['\n', '\r']) {
            return Err(Error::InvalidInstance(format!(
                "metadata value for {key:?} contains a line break"
            )));
        }
        writeln!(out, "# {key}={value}").unwrap();
    }
    let a = instance.a();
    for r in 0..m {
        for c in 0..n {
            if c > 0 {
                out.push(' ');
            }
            push_number(&mut out, a[(r, c)]);
        }
        out.push('\n');
    }
    for (r, v) in instance.y().iter().enumerate() {
        if r > 0 {
            out.push(' ');
        }
        push_number(&mut out, *v);
    }
    out.push('\n');
    Ok(out)
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_instance(path: impl AsRef<Path>, instance: &Instance, metadata: &Metadata) -> Result<()> {
    let path = path.as_ref();
    let text = format_instance(instance, metadata)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_generated(path: impl AsRef<Path>, generated: &GeneratedInstance) -> Result<()> {
    write_instance(path, &generated.instance, &generated.metadata())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<(Instance, Metadata)> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based starting column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (pos, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, &line[s..pos]));
                start = None;
            }
            (false, None) => start = Some(pos),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

fn parse_float(line_no: usize, column: usize, token: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line_no, column, format!("malformed number '{token}'"))),
    }
}

fn parse_numbers(line_no: usize, line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let toks = tokens(line);
    if toks.len() != expected {
        let column = toks.get(expected).map_or(line.chars().count() + 1, |t| t.0);
        return Err(parse_error(
            line_no,
            column,
            format!("{what} has {} values, expected {expected}", toks.len()),
        ));
    }
    toks.into_iter()
        .map(|(col, tok)| parse_float(line_no, col, tok))
        .collect()
}

pub fn parse_instance(text: &str) -> Result<(Instance, Metadata)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .peekable();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, 1, "empty file"))?;
    if header != FORMAT_HEADER {
        let message = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [FORMAT_NAME, version] => format!("unsupported format version '{version}'"),
            _ => format!("expected header '{FORMAT_HEADER}'"),
        };
        return Err(parse_error(1, 1, message));
    }

    let (dims_no, dims_line) = lines
        .next()
        .ok_or_else(|| parse_error(2, 1, "missing 'm n lambda M' line"))?;
    let dims = tokens(dims_line);
    if dims.len() != 4 {
        return Err(parse_error(
            dims_no,
            1,
            format!("expected 'm n lambda M', found {} fields", dims.len()),
        ));
    }
    let parse_dim = |(col, tok): (usize, &str), name: &str| -> Result<usize> {
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(parse_error(dims_no, col, format!("{name} must be a positive integer, found '{tok}'"))),
        }
    };
    let m = parse_dim(dims[0], "m")?;
    let n = parse_dim(dims[1], "n")?;
    let lambda = parse_float(dims_no, dims[2].0, dims[2].1)?;
    let big_m = parse_float(dims_no, dims[3].0, dims[3].1)?;
    if lambda <= 0.0 {
        return Err(parse_error(dims_no, dims[2].0, format!("lambda must be positive, found {lambda}")));
    }
    if big_m <= 0.0 {
        return Err(parse_error(dims_no, dims[3].0, format!("M must be positive, found {big_m}")));
    }

    let mut metadata = Metadata::new();
    while let Some(&(line_no, line)) = lines.peek() {
        let Some(body) = line.strip_prefix('#') else {
            break;
        };
        lines.next();
        let body = body.trim_start();
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_error(line_no, 1, "metadata line must be '# key=value'"))?;
        if key.is_empty() || key.trim() != key {
            return Err(parse_error(line_no, 1, format!("invalid metadata key '{key}'")));
        }
        metadata.insert(key.to_string(), value.to_string());
    }

    let mut a = DMatrix::zeros(m, n);
    let mut last_line = dims_no;
    for r in 0..m {
        let (line_no, line) = lines.next().ok_or_else(|| {
            parse_error(last_line + 1, 1, format!("missing matrix row {} of {m}", r + 1))
        })?;
        let row = parse_numbers(line_no, line, n, &format!("row {}", r + 1))?;
        for (c, v) in row.into_iter().enumerate() {
            a[(r, c)] = v;
        }
        last_line = line_no;
    }
    let (y_no, y_line) = lines
        .next()
        .ok_or_else(|| parse_error(last_line + 1, 1, "missing y line"))?;
    let y = DVector::from_vec(parse_numbers(y_no, y_line, m, "y")?);
    if let Some((line_no, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_error(line_no, 1, "unexpected data after y"));
    }

    let instance = Instance::new(a, y, lambda, big_m)
        .map_err(|e| parse_error(dims_no, 1, e.to_string()))?;
    Ok((instance, metadata))
}
