//! GFBW parameter checkpoints.
//!
//! ```text
//! "GFBW" | version u8 = 1 | count u32
//! per tensor (names in lexicographic order):
//!   name_len u16 | name bytes | rank u8 | dims u32 x rank | f32 payload
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use ndarray::Array2;

use super::params::ParamStore;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GFBW";
pub const VERSION: u8 = 1;

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut ids: Vec<_> = store.ids().collect();
    ids.sort_by(|a, b| store.name(*a).cmp(store.name(*b)));
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.write_u32::<LittleEndian>(ids.len() as u32).unwrap();
    for id in ids {
        let name = store.name(id).as_bytes();
        out.write_u16::<LittleEndian>(name.len() as u16).unwrap();
        out.extend_from_slice(name);
        let value = store.get(id);
        let rank = store.rank(id);
        out.push(rank);
        let dims: Vec<usize> = if rank == 1 {
            vec![value.ncols()]
        } else {
            vec![value.nrows(), value.ncols()]
        };
        for d in dims {
            out.write_u32::<LittleEndian>(d as u32).unwrap();
        }
        for v in value.iter() {
            out.write_f32::<LittleEndian>(*v as f32).unwrap();
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    let mut cur = Reader { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(magic);
        return Err(Error::Format {
            expected: MAGIC,
            found,
        });
    }
    let version = cur.take(1)?[0];
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = LittleEndian::read_u32(cur.take(4)?);
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = LittleEndian::read_u16(cur.take(2)?) as usize;
        let name = String::from_utf8(cur.take(len)?.to_vec())
            .map_err(|_| Error::Data("checkpoint tensor name is not UTF-8".into()))?;
        let rank = cur.take(1)?[0];
        let dims: Vec<usize> = (0..rank)
            .map(|_| cur.take(4).map(|b| LittleEndian::read_u32(b) as usize))
            .collect::<Result<_>>()?;
        let n: usize = dims.iter().product();
        let payload = cur.take(4 * n)?;
        let values: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| LittleEndian::read_f32(c) as f64)
            .collect();
        match dims.as_slice() {
            [_] => {
                store.add_vector(name, values);
            }
            [r, c] => {
                store.add_matrix(name, Array2::from_shape_vec((*r, *c), values).unwrap());
            }
            _ => {
                return Err(Error::Data(format!(
                    "tensor `{name}` has unsupported rank {rank}"
                )))
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Corrupt {
            expected: cur.pos as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(store)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Corrupt {
                expected: end as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn save(store: &ParamStore, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let bytes = encode(store);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn load(path: impl AsRef<Path>) -> Result<ParamStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_sorted_and_f32_exact() {
        let mut s = ParamStore::new();
        s.add_vector("zeta.bias", vec![0.5, -1.25]);
        s.add_matrix(
            "alpha.w",
            Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap(),
        );
        let bytes = encode(&s);
        assert_eq!(&bytes[..4], b"GFBW");
        assert_eq!(u16::from_le_bytes([bytes[9], bytes[10]]), 7);
        assert_eq!(&bytes[11..18], b"alpha.w");
        let back = decode(&bytes).unwrap();
        assert_eq!(back.name(back.ids().next().unwrap()), "alpha.w");
        for id in s.ids() {
            let other = back.id(s.name(id)).unwrap();
            assert_eq!(back.get(other), s.get(id));
            assert_eq!(back.rank(other), s.rank(id));
        }
    }

    #[test]
    fn truncated_checkpoint() {
        let mut s = ParamStore::new();
        s.add_vector("b", vec![1.0, 2.0]);
        let mut bytes = encode(&s);
        bytes.pop();
        assert!(matches!(decode(&bytes), Err(Error::Corrupt { .. })));
    }
}
