//! Binary checkpoint format (all integers and floats little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `RGNETCK1` |
//! | 1 | version (1) |
//! | 1 | activation tag (0 = tanh, 1 = silu) |
//! | 4 | `u32` number of layer sizes `m` |
//! | 4·m | `u32` layer sizes |
//! | 8 | `u64` parameter count `p` |
//! | 8·p | `f64` parameters, layer by layer: row-major `(out, in)` weights then bias |

use std::io::{Read, Write};
use std::path::Path;

use super::activation::Activation;
use super::network::NetworkParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RGNETCK1";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint(net: &NetworkParams) -> Vec<u8> {
    let sizes = net.layer_sizes();
    let mut out = Vec::with_capacity(22 + 4 * sizes.len() + 8 * net.n_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(net.activation().tag());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.n_params() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NetworkParams> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let version = c.take(1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let tag = c.take(1)?[0];
    let activation =
        Activation::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
    let m = c.u32()? as usize;
    if m > 1 << 16 {
        return Err(Error::Format("implausible layer count".into()));
    }
    let sizes = (0..m).map(|_| c.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let p = c.u64()? as usize;
    if p.checked_mul(8).is_none_or(|b| b > bytes.len()) {
        return Err(Error::Format("checkpoint truncated".into()));
    }
    let params = (0..p)
        .map(|_| c.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
        .collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    NetworkParams::from_parts(&sizes, activation, params)
}

pub fn save_checkpoint(net: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::init_mlp;

    #[test]
    fn round_trip() {
        let net = init_mlp(&[3, 5, 4, 1], Activation::Silu, 9).unwrap();
        let bytes = encode_checkpoint(&net);
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let net = init_mlp(&[2, 3, 1], Activation::Tanh, 1).unwrap();
        let bytes = encode_checkpoint(&net);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(decode_checkpoint(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
    }
}
