//! Binary state files: 16-byte header (`CLGR`, u32 version, u64 parameter
//! count) followed by parameters then momentum, all little-endian f64.

use std::fs;
use std::path::Path;

use super::{RestorerState, PARAM_COUNT};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CLGR";
const VERSION: u32 = 1;
const HEADER: usize = 16;

pub fn state_to_bytes(state: &RestorerState) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 16 * PARAM_COUNT);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(PARAM_COUNT as u64).to_le_bytes());
    for v in state.params.iter().chain(&state.momentum) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn state_from_bytes(bytes: &[u8]) -> Result<RestorerState> {
    let parse_err = |offset: usize, message: String| Error::Parse { offset, message };
    if bytes.len() < HEADER {
        return Err(parse_err(bytes.len(), "truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err(0, "bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(parse_err(4, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if count != PARAM_COUNT as u64 {
        return Err(parse_err(
            8,
            format!("parameter count {count}, expected {PARAM_COUNT}"),
        ));
    }
    let expected = HEADER + 16 * PARAM_COUNT;
    if bytes.len() != expected {
        return Err(parse_err(
            bytes.len().min(expected),
            format!("payload is {} bytes, expected {expected}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (params, momentum) = values.split_at(PARAM_COUNT);
    Ok(RestorerState {
        params: params.to_vec(),
        momentum: momentum.to_vec(),
    })
}

pub fn save_state(state: &RestorerState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, state_to_bytes(state)).map_err(|e| Error::io(path, e))
}

pub fn load_state(path: impl AsRef<Path>) -> Result<RestorerState> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    state_from_bytes(&bytes)
}
