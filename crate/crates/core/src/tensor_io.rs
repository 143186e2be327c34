//! Minimal binary tensor container used by the `bev-demo` command.
//!
//! Layout, all little-endian: 4-byte magic `RDKT`, `u32` dtype (0 = f32),
//! `u32` rank, `rank` x `u64` dims, then the row-major payload.

use std::fs;
use std::path::Path;

use crate::bev::FeatureMap;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RDKT";
const DTYPE_F32: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!("{n} elements for dims {dims:?}"), data.len()));
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("bad magic, expected RDKT".into());
        }
        let dtype = r.u32()?;
        if dtype != DTYPE_F32 {
            return Err(format!("unsupported dtype {dtype}, only 0 (f32) is defined"));
        }
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(usize::try_from(r.u64()?).map_err(|_| "dimension overflows usize".to_string())?);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or("element count overflows")?;
        let payload = r.take(n.checked_mul(4).ok_or("payload size overflows")?)?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|r| Error::format(path, r))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Interprets a rank-3 tensor as `C x H x W`.
    pub fn into_feature_map(self) -> Result<FeatureMap> {
        match self.dims[..] {
            [c, h, w] => FeatureMap::new(c, h, w, self.data),
            _ => Err(Error::shape("rank 3 (C x H x W)", format!("rank {}", self.dims.len()))),
        }
    }
}

impl From<&FeatureMap> for Tensor {
    fn from(f: &FeatureMap) -> Self {
        Tensor {
            dims: vec![f.channels(), f.height(), f.width()],
            data: f.data().to_vec(),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated tensor")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = Tensor::new(vec![2, 1, 3], vec![1.0, -2.5, 3.0, f32::MIN_POSITIVE, 0.0, 7.25]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"RDKT");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 3 * 8 + 6 * 4);
        assert_eq!(Tensor::from_bytes(&bytes).unwrap(), t);
        let fm = t.clone().into_feature_map().unwrap();
        assert_eq!(Tensor::from(&fm), t);
    }

    #[test]
    fn rejects_malformed() {
        let t = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let bytes = t.to_bytes();
        assert!(Tensor::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Tensor::from_bytes(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Tensor::from_bytes(&bad).is_err());
        let mut dtype = bytes;
        dtype[4] = 1;
        assert!(Tensor::from_bytes(&dtype).is_err());
        assert!(Tensor::new(vec![3], vec![0.0]).is_err());
        assert!(t.into_feature_map().is_err());
    }
}
