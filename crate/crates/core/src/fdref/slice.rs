//! Outer-wall slices and their binary file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `RGWALLSL` |
//! | 1 | version, currently 1 |
//! | 4 | `n_theta` (u32) |
//! | 4 | `n_z` (u32) |
//! | 8 | geometry hash (u64) |
//! | 25 | flux descriptor: kind byte and three f64 |
//! | 8 n_theta | theta nodes |
//! | 8 n_z | z nodes |
//! | 8 n_theta n_z | wall temperature, index `j n_z + k` |
//! | 8 n_theta n_z | wall normal derivative, same order |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annulus::FluxProfile;
use crate::error::{Error, Result};

pub const WALL_SLICE_MAGIC: &[u8; 8] = b"RGWALLSL";
pub const WALL_SLICE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSlice {
    pub n_theta: usize,
    pub n_z: usize,
    pub geometry_hash: u64,
    pub flux: FluxProfile,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    /// `T` at wall node `(j, k)`, index `j * n_z + k`.
    pub t_wall: Vec<f64>,
    /// `dT/dn` at wall node `(j, k)`, same order.
    pub dtdn: Vec<f64>,
}

impl WallSlice {
    pub fn check_shape(&self) -> Result<()> {
        let nn = self.n_theta * self.n_z;
        if self.theta.len() != self.n_theta || self.z.len() != self.n_z || self.t_wall.len() != nn || self.dtdn.len() != nn
        {
            return Err(Error::Format(format!(
                "wall slice arrays do not match {} x {}",
                self.n_theta, self.n_z
            )));
        }
        Ok(())
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_z + k
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.check_shape()?;
        let n_theta = u32::try_from(self.n_theta).map_err(|_| Error::invalid("n_theta exceeds u32"))?;
        let n_z = u32::try_from(self.n_z).map_err(|_| Error::invalid("n_z exceeds u32"))?;
        let mut out = Vec::with_capacity(50 + 8 * (self.n_theta + self.n_z + 2 * self.t_wall.len()));
        out.extend_from_slice(WALL_SLICE_MAGIC);
        out.push(WALL_SLICE_VERSION);
        out.extend_from_slice(&n_theta.to_le_bytes());
        out.extend_from_slice(&n_z.to_le_bytes());
        out.extend_from_slice(&self.geometry_hash.to_le_bytes());
        out.extend_from_slice(&self.flux.descriptor());
        for v in self.theta.iter().chain(&self.z).chain(&self.t_wall).chain(&self.dtdn) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Reader { bytes, pos: 0 };
        if cur.take(8)? != WALL_SLICE_MAGIC {
            return Err(Error::Format("not a wall slice file".into()));
        }
        let version = cur.take(1)?[0];
        if version != WALL_SLICE_VERSION {
            return Err(Error::Format(format!("unsupported wall slice version {version}")));
        }
        let n_theta = cur.u32()? as usize;
        let n_z = cur.u32()? as usize;
        let geometry_hash = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let flux = FluxProfile::from_descriptor(cur.take(25)?.try_into().unwrap())?;
        let nn = n_theta
            .checked_mul(n_z)
            .ok_or_else(|| Error::Format("wall slice size overflows".into()))?;
        let theta = cur.f64s(n_theta)?;
        let z = cur.f64s(n_z)?;
        let t_wall = cur.f64s(nn)?;
        let dtdn = cur.f64s(nn)?;
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(WallSlice {
            n_theta,
            n_z,
            geometry_hash,
            flux,
            theta,
            z,
            t_wall,
            dtdn,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("wall slice file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format("wall slice size overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn write_wall_slice(path: impl AsRef<Path>, slice: &WallSlice) -> Result<()> {
    std::fs::write(path, slice.encode()?)?;
    Ok(())
}

pub fn read_wall_slice(path: impl AsRef<Path>) -> Result<WallSlice> {
    WallSlice::decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WallSlice {
        WallSlice {
            n_theta: 2,
            n_z: 3,
            geometry_hash: 0xdead_beef,
            flux: FluxProfile::default(),
            theta: vec![0.0, 3.0],
            z: vec![0.0, 5.0, 10.0],
            t_wall: (0..6).map(|v| v as f64).collect(),
            dtdn: (0..6).map(|v| -(v as f64)).collect(),
        }
    }

    #[test]
    fn roundtrip() {
        let s = sample();
        let bytes = s.encode().unwrap();
        assert_eq!(bytes.len(), 50 + 8 * (2 + 3 + 12));
        assert_eq!(WallSlice::decode(&bytes).unwrap(), s);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode().unwrap();
        assert!(WallSlice::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(WallSlice::decode(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(WallSlice::decode(&bad).is_err());
        let mut ver = bytes;
        ver[8] = 2;
        assert!(WallSlice::decode(&ver).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = sample();
        s.dtdn.pop();
        assert!(s.check_shape().is_err());
        assert!(s.encode().is_err());
    }
}
