//! Measurement files.
//!
//! CSV: one line per sample `m`, two columns per snapshot `l` holding
//! `re(y[m,l]), im(y[m,l])`. Lines starting with `#` are comments; a first
//! line of the form `# mvalse-csv v1 M=<rows> L=<snapshots>` is checked
//! against the body.
//!
//! Binary: the bytes `MVLS`, a little-endian `u32` version (1), `u64` M,
//! `u64` L, then `M·L` pairs of little-endian `f64` `(re, im)` in the same
//! row-major order as the CSV.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mvalse::model::CMatrix;
use num_complex::Complex64;

pub const MAGIC: &[u8; 4] = b"MVLS";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.bin` selects binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Format::Binary,
            _ => Format::Csv,
        }
    }
}

pub fn read(path: &Path) -> Result<CMatrix> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| anyhow!("not UTF-8 text at byte {}", e.valid_up_to()))?;
        decode_csv(text)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

pub fn write(path: &Path, y: &CMatrix, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Csv => encode_csv(y)?.into_bytes(),
        Format::Binary => encode_binary(y),
    };
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Shortest text that parses back to the same `f64`.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

pub fn encode_csv(y: &CMatrix) -> Result<String> {
    let mut out = format!("# mvalse-csv v{VERSION} M={} L={}\n", y.nrows(), y.ncols());
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for m in 0..y.nrows() {
        let row: Vec<String> = (0..y.ncols())
            .flat_map(|l| [float(y[(m, l)].re), float(y[(m, l)].im)])
            .collect();
        w.write_record(&row)?;
    }
    out.push_str(std::str::from_utf8(&w.into_inner()?)?);
    Ok(out)
}

fn parse_header(line: &str) -> Result<Option<(usize, usize)>> {
    let Some(rest) = line.strip_prefix("# mvalse-csv") else {
        return Ok(None);
    };
    let mut version = None;
    let mut m = None;
    let mut l = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix('v') {
            version = Some(v.parse::<u32>().map_err(|_| anyhow!("line 1: bad version `{field}`"))?);
        } else if let Some(v) = field.strip_prefix("M=") {
            m = Some(v.parse::<usize>().map_err(|_| anyhow!("line 1: bad row count `{field}`"))?);
        } else if let Some(v) = field.strip_prefix("L=") {
            l = Some(v.parse::<usize>().map_err(|_| anyhow!("line 1: bad snapshot count `{field}`"))?);
        } else {
            bail!("line 1: unexpected header field `{field}`");
        }
    }
    if version != Some(VERSION) {
        bail!("line 1: unsupported format version {version:?}");
    }
    match (m, l) {
        (Some(m), Some(l)) => Ok(Some((m, l))),
        _ => bail!("line 1: header needs M= and L="),
    }
}

pub fn decode_csv(text: &str) -> Result<CMatrix> {
    let header = parse_header(text.lines().next().unwrap_or(""))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() % 2 != 0 {
            bail!("line {line}: {} columns, expected re/im pairs", record.len());
        }
        if let Some(w) = width {
            if record.len() != w {
                bail!("line {line}: {} columns, earlier lines have {w}", record.len());
            }
        }
        width = Some(record.len());
        let mut values = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow!("line {line}, column {}: `{field}` is not a number", c + 1))?;
            if !v.is_finite() {
                bail!("line {line}, column {}: value must be finite", c + 1);
            }
            values.push(v);
        }
        rows.push(values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let m = rows.len();
    let l = width.unwrap_or(0) / 2;
    if m == 0 || l == 0 {
        bail!("no data rows");
    }
    if let Some((hm, hl)) = header {
        if (hm, hl) != (m, l) {
            bail!("header declares M={hm} L={hl}, body has M={m} L={l}");
        }
    }
    Ok(CMatrix::from_fn(m, l, |i, j| rows[i][j]))
}

pub fn encode_binary(y: &CMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + 16 * y.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(y.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(y.ncols() as u64).to_le_bytes());
    for m in 0..y.nrows() {
        for l in 0..y.ncols() {
            out.extend_from_slice(&y[(m, l)].re.to_le_bytes());
            out.extend_from_slice(&y[(m, l)].im.to_le_bytes());
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<CMatrix> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        bail!("offset 0: missing or truncated header");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into()?);
    if version != VERSION {
        bail!("offset 4: unsupported format version {version}");
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into()?) as usize;
    let l = u64::from_le_bytes(bytes[16..24].try_into()?) as usize;
    if m == 0 || l == 0 {
        bail!("offset 8: empty matrix {m}x{l}");
    }
    let expected = m
        .checked_mul(l)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(HEADER_BYTES))
        .ok_or_else(|| anyhow!("offset 8: size {m}x{l} overflows"))?;
    if bytes.len() != expected {
        bail!("offset {}: expected {expected} bytes for {m}x{l}, file has {}", bytes.len().min(expected), bytes.len());
    }
    let value = |k: usize| -> Result<f64> {
        let at = HEADER_BYTES + 8 * k;
        let v = f64::from_le_bytes(bytes[at..at + 8].try_into()?);
        if !v.is_finite() {
            bail!("offset {at}: value must be finite");
        }
        Ok(v)
    };
    let mut entries = Vec::with_capacity(m * l);
    for k in 0..m * l {
        entries.push(Complex64::new(value(2 * k)?, value(2 * k + 1)?));
    }
    Ok(CMatrix::from_fn(m, l, |i, j| entries[i * l + j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMatrix {
        CMatrix::from_fn(3, 2, |i, j| Complex64::new(0.1 * i as f64 - 1e-300, (j as f64 + 1.0) / 3.0))
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let y = sample();
        assert_eq!(decode_csv(&encode_csv(&y).unwrap()).unwrap(), y);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let y = sample();
        let bytes = encode_binary(&y);
        assert_eq!(bytes.len(), 24 + 16 * 6);
        assert_eq!(decode_binary(&bytes).unwrap(), y);
    }

    #[test]
    fn csv_without_header_or_with_comments() {
        let y = decode_csv("# anything\n1, 2, 3, 4\n# mid\n5,6,7,8\n").unwrap();
        assert_eq!((y.nrows(), y.ncols()), (2, 2));
        assert_eq!(y[(1, 1)], Complex64::new(7.0, 8.0));
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = decode_csv("1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
        let err = decode_csv("1,2\n3,4,5,6\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(decode_csv("1,2,3\n").is_err());
        assert!(decode_csv("1,inf\n").is_err());
        assert!(decode_csv("# mvalse-csv v1 M=2 L=1\n1,2\n").is_err());
    }

    #[test]
    fn binary_errors_name_the_offset() {
        let mut bytes = encode_binary(&sample());
        bytes.pop();
        assert!(decode_binary(&bytes).unwrap_err().to_string().contains("offset"));
        let mut bad = encode_binary(&sample());
        bad[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_binary(&bad).unwrap_err().to_string().contains("offset 24"));
        let mut v2 = encode_binary(&sample());
        v2[4] = 2;
        assert!(decode_binary(&v2).is_err());
    }
}
