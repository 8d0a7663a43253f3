//! Container format for form matrices.
//!
//! Text variant:
//!
//! ```text
//! GFM-TEXT 1
//! dim 2
//! perturbation 0
//! space sample 2
//! [t_hat]
//! 1 0  0 0
//! 0 0  3 0
//! [mass]
//! 1 0  0 0
//! 0 0  1 0
//! ```
//!
//! Each matrix row holds `dim` pairs `re im`. Blank lines and lines starting
//! with `#` are ignored. An `[a_hat]` section follows `[mass]` when the
//! perturbation flag is 1.
//!
//! Binary variant (little endian): magic `GFMB`, `u32` version, `u64` dim,
//! `u8` flags (bit 0: perturbation present), `u32` label length, label bytes
//! (UTF-8), `u64` level, then `T̂`, `M` and optionally `Â` as row-major
//! `(f64 re, f64 im)` pairs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c64, DenseMatrix};
use crate::problems::{FormMatrices, SpaceId};

pub const TEXT_MAGIC: &str = "GFM-TEXT";
pub const BINARY_MAGIC: &[u8; 4] = b"GFMB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Text,
    Binary,
}

/// Reads and validates a matrix file of either variant.
pub fn import_matrices(path: &Path) -> Result<FormMatrices> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Decodes either variant from memory.
pub fn decode(bytes: &[u8]) -> Result<FormMatrices> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("file is neither binary nor UTF-8 text".into()))?;
        decode_text(text)
    }
}

/// File-level failures are input errors: the first violated check is kept
/// in the message.
pub(crate) fn as_input_error(path: &Path, err: Error) -> Error {
    match err {
        Error::Io { .. } | Error::Format(_) => err,
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

pub fn export_matrices(fm: &FormMatrices, path: &Path, variant: Variant) -> Result<()> {
    let bytes = match variant {
        Variant::Text => encode_text(fm).into_bytes(),
        Variant::Binary => encode_binary(fm),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn blocks(fm: &FormMatrices) -> Vec<(&'static str, &DenseMatrix)> {
    let mut out = vec![("t_hat", fm.t_hat()), ("mass", fm.mass())];
    if let Some(a) = fm.a_hat() {
        out.push(("a_hat", a));
    }
    out
}

pub fn encode_text(fm: &FormMatrices) -> String {
    let n = fm.dim();
    let mut out = format!(
        "{TEXT_MAGIC} {FORMAT_VERSION}\ndim {n}\nperturbation {}\nspace {} {}\n",
        u8::from(fm.a_hat().is_some()),
        fm.space().label,
        fm.space().level
    );
    for (name, m) in blocks(fm) {
        out.push_str(&format!("[{name}]\n"));
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| {
                    let z = m.get(i, j);
                    format!("{:.16e} {:.16e}", z.re, z.im)
                })
                .collect();
            out.push_str(&row.join("  "));
            out.push('\n');
        }
    }
    out
}

pub fn encode_binary(fm: &FormMatrices) -> Vec<u8> {
    let n = fm.dim();
    let label = fm.space().label.as_bytes();
    let mut out = Vec::with_capacity(32 + label.len() + 48 * n * n);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.push(u8::from(fm.a_hat().is_some()));
    out.extend_from_slice(&(label.len() as u32).to_le_bytes());
    out.extend_from_slice(label);
    out.extend_from_slice(&(fm.space().level as u64).to_le_bytes());
    for (_, m) in blocks(fm) {
        for z in m.to_row_major() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn header_value<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("missing header line `{key}`")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Format(format!("line {no}: expected `{key}`")));
    }
    Ok((no, parts.collect()))
}

fn parse_count(no: usize, field: &str, s: Option<&&str>) -> Result<usize> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {no}: bad {field}")))
}

fn decode_text(text: &str) -> Result<FormMatrices> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (no, magic) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(TEXT_MAGIC) {
        return Err(Error::Format(format!("line {no}: missing `{TEXT_MAGIC}` magic")));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {no}: missing version")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (no, v) = header_value(&mut lines, "dim")?;
    let dim = parse_count(no, "dim", v.first())?;
    if dim == 0 {
        return Err(Error::Format("dim must be positive".into()));
    }
    let (no, v) = header_value(&mut lines, "perturbation")?;
    let perturbation = match v.first().copied() {
        Some("0") => false,
        Some("1") => true,
        _ => return Err(Error::Format(format!("line {no}: perturbation flag must be 0 or 1"))),
    };
    let (no, v) = header_value(&mut lines, "space")?;
    if v.len() != 2 {
        return Err(Error::Format(format!("line {no}: expected `space <label> <level>`")));
    }
    let space = SpaceId::new(v[0], parse_count(no, "level", v.get(1))?);

    let mut names = vec!["t_hat", "mass"];
    if perturbation {
        names.push("a_hat");
    }
    let mut mats = Vec::new();
    for name in names {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing section [{name}]")))?;
        if line != format!("[{name}]") {
            return Err(Error::Format(format!("line {no}: expected section [{name}]")));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in 0..dim {
            let (no, line) = lines.next().ok_or(Error::DimensionMismatch {
                context: "matrix file rows",
                expected: dim,
                found: row,
            })?;
            if line.starts_with('[') {
                return Err(Error::DimensionMismatch {
                    context: "matrix file rows",
                    expected: dim,
                    found: row,
                });
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("line {no}: unparsable number in [{name}]")))?;
            if values.len() != 2 * dim {
                return Err(Error::DimensionMismatch {
                    context: "matrix file row entries",
                    expected: 2 * dim,
                    found: values.len(),
                });
            }
            entries.extend(values.chunks(2).map(|p| c64::new(p[0], p[1])));
        }
        mats.push(DenseMatrix::from_row_major(dim, dim, &entries)?);
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::Format(format!("line {no}: trailing content")));
    }
    let a_hat = if perturbation { mats.pop() } else { None };
    let mass = mats.pop().expect("mass section parsed");
    let t_hat = mats.pop().expect("t_hat section parsed");
    FormMatrices::new(t_hat, mass, a_hat, space)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Format(format!("truncated file while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

fn decode_binary(bytes: &[u8]) -> Result<FormMatrices> {
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.u64("dim")?;
    let flags = r.take(1, "flags")?[0];
    if flags & !1 != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#04x}")));
    }
    let perturbation = flags & 1 == 1;
    let label_len = r.u32("label length")? as usize;
    let label = std::str::from_utf8(r.take(label_len, "label")?)
        .map_err(|_| Error::Format("label is not UTF-8".into()))?
        .to_owned();
    let level = r.u64("level")? as usize;
    let blocks = if perturbation { 3 } else { 2 };
    let remaining = bytes.len() - r.pos;
    let dim = usize::try_from(dim)
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Format("dim must be positive".into()))?;
    let expected = dim.checked_mul(dim).and_then(|x| x.checked_mul(16 * blocks));
    if expected != Some(remaining) {
        return Err(Error::DimensionMismatch {
            context: "binary matrix payload (bytes)",
            expected: expected.unwrap_or(usize::MAX),
            found: remaining,
        });
    }
    let mut mats = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let raw = r.take(16 * dim * dim, "matrix entries")?;
        let entries: Vec<c64> = raw
            .chunks_exact(16)
            .map(|c| {
                c64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        mats.push(DenseMatrix::from_row_major(dim, dim, &entries)?);
    }
    let a_hat = if perturbation { mats.pop() } else { None };
    let mass = mats.pop().expect("mass block read");
    let t_hat = mats.pop().expect("t_hat block read");
    FormMatrices::new(t_hat, mass, a_hat, SpaceId::new(label, level))
}
