//! File formats for sampled fields.
//!
//! - `csv-grid`: a header line `dims=<n>;counts=<c1,..,cn>;lower=<..>;upper=<..>`
//!   followed by one decimal sample per line in row-major order.
//! - `f64grid`: magic `VCG1`, then little-endian `u32 n`, `u32 counts[n]`,
//!   `f64 lower[n]`, `f64 upper[n]`, `f64 values[prod(counts)]`.
//! - PGM: `P2` (ASCII) and `P5` (binary, maxval <= 255). Pixels are divided by
//!   maxval; row index is axis 0 and column index is axis 1 of a `[0,1]^2`
//!   domain. Emission writes `P5` with maxval 255.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{BoxDomain, SampledField};
use crate::util::{fmt_f64, write_atomic};
use crate::{Error, Result};

const F64GRID_MAGIC: &[u8; 4] = b"VCG1";
const PGM_MAXVAL: u32 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    CsvGrid,
    Pgm,
    F64Grid,
}

impl Format {
    /// Guesses a format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::CsvGrid),
            "pgm" => Some(Format::Pgm),
            "f64grid" | "vcg" | "bin" => Some(Format::F64Grid),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::CsvGrid => "csv",
            Format::Pgm => "pgm",
            Format::F64Grid => "f64grid",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv-grid" | "csv" => Ok(Format::CsvGrid),
            "pgm" => Ok(Format::Pgm),
            "f64grid" => Ok(Format::F64Grid),
            other => Err(Error::parse("format", format!("unknown format `{other}`"))),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::CsvGrid => "csv-grid",
            Format::Pgm => "pgm",
            Format::F64Grid => "f64grid",
        })
    }
}

pub fn ingest(path: &Path, format: Format) -> Result<SampledField> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_from(std::io::BufReader::new(file), format)
}

pub fn ingest_from<R: Read>(mut reader: R, format: Format) -> Result<SampledField> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    match format {
        Format::CsvGrid => parse_csv_grid(&bytes),
        Format::F64Grid => parse_f64grid(&bytes),
        Format::Pgm => parse_pgm(&bytes),
    }
}

/// Writes `field` to `path` atomically.
pub fn emit(field: &SampledField, path: &Path, format: Format) -> Result<()> {
    let mut buf = Vec::new();
    emit_to(field, &mut buf, format)?;
    write_atomic(path, &buf)
}

pub fn emit_to<W: Write>(field: &SampledField, mut writer: W, format: Format) -> Result<()> {
    let bytes = match format {
        Format::CsvGrid => encode_csv_grid(field).into_bytes(),
        Format::F64Grid => encode_f64grid(field),
        Format::Pgm => encode_pgm(field)?,
    };
    writer
        .write_all(&bytes)
        .map_err(|e| Error::io("<writer>", e))
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

fn encode_csv_grid(field: &SampledField) -> String {
    let d = field.domain();
    let mut out = format!(
        "dims={};counts={};lower={};upper={}\n",
        d.dims(),
        join(d.counts().iter().map(|c| c.to_string())),
        join(d.lower().iter().map(|&v| fmt_f64(v))),
        join(d.upper().iter().map(|&v| fmt_f64(v))),
    );
    for &v in field.values() {
        let _ = writeln!(out, "{}", fmt_f64(v));
    }
    out
}

fn parse_list<T: FromStr>(text: &str, key: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::parse("line 1", format!("bad `{key}` entry `{s}`")))
        })
        .collect()
}

fn parse_csv_grid(bytes: &[u8]) -> Result<SampledField> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("byte 0", e.to_string()))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "missing header"))?;

    let (mut dims, mut counts, mut lower, mut upper) = (None, None, None, None);
    for part in header.trim().split(';').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::parse("line 1", format!("expected key=value, got `{part}`")))?;
        match key.trim() {
            "dims" => {
                dims = Some(value.trim().parse::<usize>().map_err(|_| {
                    Error::parse("line 1", format!("bad dims `{value}`"))
                })?)
            }
            "counts" => counts = Some(parse_list::<usize>(value, "counts")?),
            "lower" => lower = Some(parse_list::<f64>(value, "lower")?),
            "upper" => upper = Some(parse_list::<f64>(value, "upper")?),
            other => return Err(Error::parse("line 1", format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::parse("line 1", format!("header is missing `{k}`"));
    let dims = dims.ok_or_else(|| missing("dims"))?;
    let counts = counts.ok_or_else(|| missing("counts"))?;
    let lower = lower.ok_or_else(|| missing("lower"))?;
    let upper = upper.ok_or_else(|| missing("upper"))?;
    if counts.len() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: counts.len(),
        });
    }
    let domain = BoxDomain::new(lower, upper, counts)?;

    let mut values = Vec::with_capacity(domain.len());
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| {
            Error::parse(format!("line {}", lineno + 1), format!("bad sample `{line}`"))
        })?;
        values.push(v);
    }
    SampledField::new(domain, values)
}

fn encode_f64grid(field: &SampledField) -> Vec<u8> {
    let d = field.domain();
    let mut out = Vec::with_capacity(8 + d.dims() * 20 + field.len() * 8);
    out.extend_from_slice(F64GRID_MAGIC);
    out.extend_from_slice(&(d.dims() as u32).to_le_bytes());
    for &c in d.counts() {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for &v in d.lower().iter().chain(d.upper()).chain(field.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(
                format!("byte {}", self.pos),
                "unexpected end of data",
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_f64grid(bytes: &[u8]) -> Result<SampledField> {
    let mut cur = ByteCursor { bytes, pos: 0 };
    if cur.take(4)? != F64GRID_MAGIC {
        return Err(Error::parse("byte 0", "missing VCG1 magic"));
    }
    let n = cur.u32()? as usize;
    let counts = (0..n)
        .map(|_| cur.u32().map(|c| c as usize))
        .collect::<Result<Vec<_>>>()?;
    let lower = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let upper = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let domain = BoxDomain::new(lower, upper, counts)?;
    let values = (0..domain.len())
        .map(|_| cur.f64())
        .collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::parse(
            format!("byte {}", cur.pos),
            "trailing bytes after values",
        ));
    }
    SampledField::new(domain, values)
}

/// Reads whitespace-separated header tokens, skipping `#` comments.
fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(format!("byte {start}"), "unexpected end of PGM data"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    let at = *pos;
    let tok = pgm_token(bytes, pos)?;
    tok.parse::<u32>()
        .map_err(|_| Error::parse(format!("byte {at}"), format!("bad {what} `{tok}`")))
}

fn parse_pgm(bytes: &[u8]) -> Result<SampledField> {
    let mut pos = 0;
    let magic = pgm_token(bytes, &mut pos)?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => return Err(Error::parse("byte 0", format!("unsupported PGM magic `{other}`"))),
    };
    let width = pgm_number(bytes, &mut pos, "width")? as usize;
    let height = pgm_number(bytes, &mut pos, "height")? as usize;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 || (binary && maxval > 255) {
        return Err(Error::parse(format!("byte {pos}"), format!("unsupported maxval {maxval}")));
    }
    let n = width * height;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes.get(pos..pos + n).ok_or(Error::DimensionMismatch {
            expected: n,
            actual: bytes.len().saturating_sub(pos),
        })?;
        values.extend(raster.iter().map(|&p| p as f64 / scale));
    } else {
        for _ in 0..n {
            let at = pos;
            let p = pgm_number(bytes, &mut pos, "pixel").map_err(|_| Error::DimensionMismatch {
                expected: n,
                actual: values.len(),
            })?;
            if p > maxval {
                return Err(Error::parse(format!("byte {at}"), format!("pixel {p} > maxval")));
            }
            values.push(p as f64 / scale);
        }
    }
    let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![height, width])?;
    SampledField::new(domain, values)
}

fn encode_pgm(field: &SampledField) -> Result<Vec<u8>> {
    let d = field.domain();
    if d.dims() != 2 {
        return Err(Error::Unsupported(format!(
            "PGM output needs a 2-D field, got {}-D",
            d.dims()
        )));
    }
    let (height, width) = (d.counts()[0], d.counts()[1]);
    let mut out = format!("P5\n{width} {height}\n{PGM_MAXVAL}\n").into_bytes();
    out.extend(
        field
            .values()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u8),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(field: &SampledField, format: Format) -> SampledField {
        let mut buf = Vec::new();
        emit_to(field, &mut buf, format).unwrap();
        ingest_from(&buf[..], format).unwrap()
    }

    #[test]
    fn p2_full_scale_and_zero() {
        let pgm = b"P2\n# comment\n2 2\n255\n255 0\n0 255\n";
        let f = ingest_from(&pgm[..], Format::Pgm).unwrap();
        assert_eq!(f.values(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.domain().counts(), &[2, 2]);
        assert_eq!(f.domain().lower(), &[0.0, 0.0]);
        assert_eq!(f.domain().upper(), &[1.0, 1.0]);
    }

    #[test]
    fn p5_rows_map_to_axis_zero() {
        let mut pgm = b"P5 2 3 255\n".to_vec();
        pgm.extend_from_slice(&[0, 51, 102, 153, 204, 255]);
        let f = ingest_from(&pgm[..], Format::Pgm).unwrap();
        assert_eq!(f.domain().counts(), &[3, 2]);
        assert_eq!(f.values()[1], 0.2);
        assert_eq!(f.values()[5], 1.0);
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(
            ingest_from(&b"P3\n1 1\n255\n0\n"[..], Format::Pgm),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            ingest_from(&b"P2\n2 2\n255\n0 0 0\n"[..], Format::Pgm),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_grid_header_and_rows() {
        let text = "dims=1;counts=3;lower=0;upper=1\n0\n0.5\n1\n";
        let f = ingest_from(text.as_bytes(), Format::CsvGrid).unwrap();
        assert_eq!(f.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(roundtrip(&f, Format::CsvGrid), f);
    }

    #[test]
    fn csv_grid_errors_carry_line_numbers() {
        let text = "dims=1;counts=3;lower=0;upper=1\n0\nabc\n1\n";
        match ingest_from(text.as_bytes(), Format::CsvGrid) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 3"),
            other => panic!("unexpected {other:?}"),
        }
        let short = "dims=1;counts=3;lower=0;upper=1\n0\n1\n";
        assert!(matches!(
            ingest_from(short.as_bytes(), Format::CsvGrid),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_dims = "dims=2;counts=3;lower=0;upper=1\n0\n1\n2\n";
        assert!(ingest_from(bad_dims.as_bytes(), Format::CsvGrid).is_err());
    }

    #[test]
    fn csv_grid_piecewise_roundtrip() {
        let d = BoxDomain::new(vec![-2.0], vec![2.0], vec![5]).unwrap();
        let f = SampledField::new(d, vec![-2.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(roundtrip(&f, Format::CsvGrid).values(), f.values());
    }

    #[test]
    fn f64grid_is_bitwise_lossless() {
        let d = BoxDomain::new(vec![-1.0, 0.1], vec![1.0, 0.7], vec![3, 4]).unwrap();
        let f = SampledField::from_fn(d, |x| (x[0] * 7.3).sin() / 3.0 + x[1].exp()).unwrap();
        let g = roundtrip(&f, Format::F64Grid);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(f.domain(), g.domain());
    }

    #[test]
    fn f64grid_rejects_bad_magic_and_truncation() {
        let d = BoxDomain::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        let f = SampledField::new(d, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        emit_to(&f, &mut buf, Format::F64Grid).unwrap();
        assert!(ingest_from(&buf[..buf.len() - 1], Format::F64Grid).is_err());
        buf[0] = b'X';
        assert!(ingest_from(&buf[..], Format::F64Grid).is_err());
    }

    #[test]
    fn pgm_quantization_bound() {
        let d = BoxDomain::cube(0.0, 1.0, &[2, 2]).unwrap();
        let f = SampledField::new(d, vec![0.5, 0.0, 1.0, 0.25]).unwrap();
        let g = roundtrip(&f, Format::Pgm);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() <= 1.0 / 510.0);
        }
    }

    #[test]
    fn pgm_emit_requires_2d() {
        let d = BoxDomain::cube(0.0, 1.0, &[3]).unwrap();
        let f = SampledField::constant(d, 0.0).unwrap();
        assert!(emit_to(&f, Vec::new(), Format::Pgm).is_err());
    }

    #[test]
    fn emit_to_path_is_atomic_rename() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.f64grid");
        let d = BoxDomain::cube(0.0, 1.0, &[3]).unwrap();
        let f = SampledField::new(d, vec![1.0, 2.0, 3.0]).unwrap();
        emit(&f, &path, Format::F64Grid).unwrap();
        assert_eq!(ingest(&path, Format::F64Grid).unwrap(), f);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
