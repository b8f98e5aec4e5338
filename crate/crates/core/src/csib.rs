//! CSIB v1: little-endian container for labeled CSI samples.
//!
//! ```text
//! "CSIB" | version u8 = 1 | S u32 | T u32 | n_channels u32 | n_samples u32
//! per sample: label u8 | velocity u8 | per channel, S x T of (re f32, im f32)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use ndarray::Array2;

use crate::csi::{ComplexCsi, CsiShape, Dataset, LabeledSample, Velocity};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CSIB";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;

fn sample_len(shape: CsiShape) -> usize {
    2 + shape.channels * shape.subcarriers * shape.timestamps * 8
}

/// Serialized size of a dataset with `n` samples.
pub fn encoded_len(shape: CsiShape, n: usize) -> usize {
    HEADER_LEN + n * sample_len(shape)
}

/// Writes the dataset to any sink; returns the number of bytes written.
pub fn encode<W: Write>(mut out: W, dataset: &Dataset) -> std::io::Result<u64> {
    let shape = dataset.shape;
    out.write_all(&MAGIC)?;
    out.write_u8(VERSION)?;
    for v in [
        shape.subcarriers,
        shape.timestamps,
        shape.channels,
        dataset.samples.len(),
    ] {
        out.write_u32::<LittleEndian>(v as u32)?;
    }
    let mut buf = vec![0u8; sample_len(shape)];
    for sample in &dataset.samples {
        buf[0] = sample.label as u8;
        buf[1] = sample.velocity.code();
        let mut pos = 2;
        for ch in &sample.channels {
            for (re, im) in ch.real().iter().zip(ch.imag().iter()) {
                LittleEndian::write_f32(&mut buf[pos..], *re);
                LittleEndian::write_f32(&mut buf[pos + 4..], *im);
                pos += 8;
            }
        }
        out.write_all(&buf)?;
    }
    Ok(encoded_len(shape, dataset.samples.len()) as u64)
}

/// Writes a CSIB file; output is byte-identical for identical input.
pub fn write_csib(path: impl AsRef<Path>, dataset: &Dataset) -> Result<u64> {
    let path = path.as_ref();
    for (i, s) in dataset.samples.iter().enumerate() {
        let (sc, ts, ch) = s.shape();
        let shape = dataset.shape;
        if (sc, ts, ch) != (shape.subcarriers, shape.timestamps, shape.channels) {
            return Err(Error::Shape(format!(
                "sample {i} has shape ({sc}, {ts}, {ch}), header says {shape:?}"
            )));
        }
        if s.label > u8::MAX as usize {
            return Err(Error::Label {
                label: s.label,
                classes: 256,
            });
        }
    }
    let mut bytes = Vec::with_capacity(encoded_len(dataset.shape, dataset.samples.len()));
    let n = encode(&mut bytes, dataset).map_err(|e| Error::io(path, e))?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Parses a CSIB image held in memory.
pub fn decode(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(Error::Corrupt {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let mut found = [0u8; 4];
    found.copy_from_slice(&bytes[..4]);
    if found != MAGIC {
        return Err(Error::Format {
            expected: MAGIC,
            found,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let field = |i: usize| LittleEndian::read_u32(&bytes[5 + 4 * i..]) as usize;
    let shape = CsiShape {
        subcarriers: field(0),
        timestamps: field(1),
        channels: field(2),
    };
    let n = field(3);
    let expected = encoded_len(shape, n);
    if bytes.len() != expected {
        return Err(Error::Corrupt {
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    let (s, t) = (shape.subcarriers, shape.timestamps);
    let mut samples = Vec::with_capacity(n);
    let mut pos = HEADER_LEN;
    for index in 0..n {
        let label = bytes[pos] as usize;
        let velocity = Velocity::from_code(bytes[pos + 1]).ok_or_else(|| Error::Validation {
            index,
            reason: format!("velocity code {} not in {{0, 1, 2}}", bytes[pos + 1]),
        })?;
        pos += 2;
        let mut channels = Vec::with_capacity(shape.channels);
        for _ in 0..shape.channels {
            let mut real = Array2::zeros((s, t));
            let mut imag = Array2::zeros((s, t));
            for (re, im) in real.iter_mut().zip(imag.iter_mut()) {
                *re = LittleEndian::read_f32(&bytes[pos..]);
                *im = LittleEndian::read_f32(&bytes[pos + 4..]);
                pos += 8;
            }
            channels.push(ComplexCsi::new(real, imag)?);
        }
        samples.push(LabeledSample::new(channels, label, velocity)?);
    }
    Ok(Dataset { shape, samples })
}

pub fn read_csib(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_dataset(seed: u64, shape: CsiShape, n: usize) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let samples = (0..n)
            .map(|i| {
                let channels = (0..shape.channels)
                    .map(|_| {
                        let dims = (shape.subcarriers, shape.timestamps);
                        let re = Array2::from_shape_simple_fn(dims, || rng.normal() as f32);
                        let im = Array2::from_shape_simple_fn(dims, || rng.normal() as f32);
                        ComplexCsi::new(re, im).unwrap()
                    })
                    .collect();
                LabeledSample::new(channels, i % 8, Velocity::ALL[i % 3]).unwrap()
            })
            .collect();
        Dataset::new(shape, samples).unwrap()
    }

    #[test]
    fn header_only_file_is_21_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csib");
        let shape = CsiShape {
            subcarriers: 4,
            timestamps: 2,
            channels: 1,
        };
        let n = write_csib(&path, &Dataset::new(shape, vec![]).unwrap()).unwrap();
        assert_eq!(n, 21);
        assert_eq!(fs::metadata(&path).unwrap().len(), 21);
        let back = read_csib(&path).unwrap();
        assert!(back.samples.is_empty());
        assert_eq!(back.shape, shape);
    }

    #[test]
    fn single_sample_is_55_bytes() {
        let shape = CsiShape {
            subcarriers: 2,
            timestamps: 2,
            channels: 1,
        };
        let ds = random_dataset(1, shape, 1);
        let mut bytes = Vec::new();
        assert_eq!(encode(&mut bytes, &ds).unwrap(), 55);
        assert_eq!(bytes.len(), 55);
        assert_eq!(&bytes[..4], b"CSIB");
        assert_eq!(bytes[4], 1);
    }

    #[test]
    fn bad_magic() {
        let shape = CsiShape {
            subcarriers: 2,
            timestamps: 3,
            channels: 1,
        };
        let mut bytes = Vec::new();
        encode(&mut bytes, &random_dataset(2, shape, 2)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_by_one_byte() {
        let shape = CsiShape {
            subcarriers: 2,
            timestamps: 3,
            channels: 2,
        };
        let mut bytes = Vec::new();
        encode(&mut bytes, &random_dataset(3, shape, 2)).unwrap();
        let full = bytes.len() as u64;
        bytes.pop();
        match decode(&bytes) {
            Err(Error::Corrupt { expected, actual }) => {
                assert_eq!(expected, full);
                assert_eq!(actual, full - 1);
            }
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version() {
        let shape = CsiShape {
            subcarriers: 2,
            timestamps: 1,
            channels: 1,
        };
        let mut bytes = Vec::new();
        encode(&mut bytes, &random_dataset(4, shape, 1)).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn heterogeneous_shapes_rejected() {
        let a = random_dataset(
            5,
            CsiShape {
                subcarriers: 2,
                timestamps: 2,
                channels: 1,
            },
            1,
        );
        let b = random_dataset(
            6,
            CsiShape {
                subcarriers: 3,
                timestamps: 2,
                channels: 1,
            },
            1,
        );
        let mixed = Dataset {
            shape: a.shape,
            samples: vec![a.samples[0].clone(), b.samples[0].clone()],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_csib(dir.path().join("x.csib"), &mixed),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn seeded_batch_round_trips_bit_for_bit() {
        let shape = CsiShape {
            subcarriers: 8,
            timestamps: 5,
            channels: 2,
        };
        let ds = random_dataset(9, shape, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.csib");
        write_csib(&path, &ds).unwrap();
        let back = read_csib(&path).unwrap();
        assert_eq!(back, ds);
        let first = fs::read(&path).unwrap();
        write_csib(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }
}
