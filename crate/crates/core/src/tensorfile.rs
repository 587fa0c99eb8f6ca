//! SIAT binary tensor files.
//!
//! ```text
//! magic   4 bytes  "SIAT"
//! version u32 LE   1
//! ndim    u32 LE
//! dims    ndim x u64 LE
//! payload prod(dims) x f64 LE, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::attention::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SIAT";
pub const VERSION: u32 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(12 + 8 * shape.len() + 8 * tensor.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in tensor.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos..self.pos + n) {
            Some(s) => {
                self.pos += n;
                Ok(s)
            }
            None => format_err(format!("truncated file while reading {what}")),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return format_err("bad magic, expected \"SIAT\"");
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return format_err(format!("unsupported SIAT version {version}"));
    }
    let ndim = cur.u32("ndim")? as usize;
    let mut shape = Vec::with_capacity(ndim.min(64));
    let mut len: usize = 1;
    for _ in 0..ndim {
        let d = cur.u64("dims")?;
        if d == 0 {
            return format_err("zero-sized dimension");
        }
        let d = usize::try_from(d).map_err(|_| Error::Format("dimension too large".into()))?;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::Format("element count overflows".into()))?;
        shape.push(d);
    }
    let expected = len
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let remaining = bytes.len() - cur.pos;
    if remaining != expected {
        return format_err(format!(
            "payload is {remaining} bytes, shape {shape:?} needs {expected}"
        ));
    }
    let data = cur
        .take(expected, "payload")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(tensor))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_layout() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -0.5]).unwrap();
        let bytes = encode(&t);
        let mut expected = b"SIAT".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-0.5f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn malformed_inputs() {
        let good = encode(&Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::Format(_))));
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode(&bad_version), Err(Error::Format(_))));
        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode(&good[..10]), Err(Error::Format(_))));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::Format(_))));
        let mut huge = good[..12].to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
        assert!(decode(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            shape in prop::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            let len: usize = shape.iter().product();
            let data: Vec<f64> = (0..len as u64)
                .map(|i| f64::from_bits(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)))
                .collect();
            let t = Tensor::new(shape.clone(), data.clone()).unwrap();
            let back = decode(&encode(&t)).unwrap();
            prop_assert_eq!(back.shape(), &shape[..]);
            let bits: Vec<u64> = back.data().iter().map(|x| x.to_bits()).collect();
            let want: Vec<u64> = data.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(bits, want);
        }
    }
}
