//! `QSTK` frame stacks.
//!
//! Layout (little-endian): magic "QSTK", u32 version (1), u32 rows, u32 cols,
//! u32 frames, u8 dtype (1 = f32), three zero bytes, then the frames
//! row-major. Metadata lives in a `<path>.meta` sidecar of key=value lines.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::thermal::{ImageStack, NoiseModel, StackMetadata};

pub const MAGIC: &[u8; 4] = b"QSTK";
pub const HEADER_LEN: usize = 24;
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 1;

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn encode_stack(stack: &ImageStack) -> Result<Vec<u8>> {
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} = {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * stack.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim(stack.n_rows, "n_rows")?.to_le_bytes());
    out.extend_from_slice(&dim(stack.n_cols, "n_cols")?.to_le_bytes());
    out.extend_from_slice(&dim(stack.n_frames, "n_frames")?.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0, 0, 0]);
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn encode_meta(m: &StackMetadata) -> String {
    let mut s = format!(
        "pitch_mrad={}\ncenter_row={}\ncenter_col={}\n",
        m.pitch_mrad, m.center_row, m.center_col
    );
    if let Some(g) = m.gain {
        s += &format!("gain={g}\n");
    }
    if let Some(seed) = m.seed {
        s += &format!("seed={seed}\n");
    }
    s += &format!(
        "read_noise={}\noffset={}\nquantize={}\n",
        m.noise.read_noise, m.noise.offset, m.noise.quantize
    );
    s
}

fn parse_meta(text: &str, rows: usize, cols: usize) -> Result<StackMetadata> {
    let mut m = StackMetadata {
        pitch_mrad: 1.0,
        center_row: rows / 2,
        center_col: cols / 2,
        gain: None,
        seed: None,
        noise: NoiseModel::default(),
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("meta line {}: expected key=value", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("meta key '{k}': {e}"));
        match k {
            "pitch_mrad" => m.pitch_mrad = v.parse().map_err(|e| bad(&e))?,
            "center_row" => m.center_row = v.parse().map_err(|e| bad(&e))?,
            "center_col" => m.center_col = v.parse().map_err(|e| bad(&e))?,
            "gain" => m.gain = Some(v.parse().map_err(|e| bad(&e))?),
            "seed" => m.seed = Some(v.parse().map_err(|e| bad(&e))?),
            "read_noise" => m.noise.read_noise = v.parse().map_err(|e| bad(&e))?,
            "offset" => m.noise.offset = v.parse().map_err(|e| bad(&e))?,
            "quantize" => m.noise.quantize = v.parse().map_err(|e| bad(&e))?,
            _ => return Err(Error::Config(format!("unknown meta key '{k}'"))),
        }
    }
    Ok(m)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parse stack bytes; `meta` is the sidecar text if present.
pub fn decode_stack(bytes: &[u8], meta: Option<&str>) -> Result<ImageStack> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("header truncated: expected {HEADER_LEN} bytes, found {}", bytes.len()),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"QSTK\"", &bytes[..4]),
        });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let (rows, cols, frames) = (
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
    );
    if bytes[20] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[20]));
    }
    if bytes[21..24] != [0, 0, 0] {
        return Err(Error::Format {
            offset: 21,
            message: "reserved header bytes must be zero".into(),
        });
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|p| p.checked_mul(frames))
        .and_then(|p| p.checked_mul(4))
        .ok_or_else(|| Error::Format {
            offset: 8,
            message: "frame dimensions overflow".into(),
        })?;
    let actual = bytes.len() - HEADER_LEN;
    if actual != expected {
        let what = if actual < expected { "truncated" } else { "has trailing bytes" };
        return Err(Error::Format {
            offset: (HEADER_LEN + actual.min(expected)) as u64,
            message: format!("payload {what}: expected {expected} bytes, found {actual}"),
        });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format {
            offset: (HEADER_LEN + 4 * k) as u64,
            message: "non-finite pixel value".into(),
        });
    }
    let metadata = match meta {
        Some(text) => parse_meta(text, rows, cols)?,
        None => parse_meta("", rows, cols)?,
    };
    ImageStack::new(rows, cols, frames, data, metadata)
}

/// Write the stack and its `.meta` sidecar.
pub fn write_stack(path: &Path, stack: &ImageStack) -> Result<()> {
    fs::write(path, encode_stack(stack)?).map_err(|e| Error::io(path, e))?;
    let mp = meta_path(path);
    fs::write(&mp, encode_meta(&stack.metadata)).map_err(|e| Error::io(&mp, e))
}

/// Read a stack; a missing sidecar yields default metadata.
pub fn read_stack(path: &Path) -> Result<ImageStack> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mp = meta_path(path);
    let meta = match fs::read_to_string(&mp) {
        Ok(s) => Some(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&mp, e)),
    };
    decode_stack(&bytes, meta.as_deref())
}
