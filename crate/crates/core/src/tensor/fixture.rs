//! `OMT1` tensor fixtures.
//!
//! Layout, all little-endian:
//!
//! | offset | size      | field                         |
//! |--------|-----------|-------------------------------|
//! | 0      | 4         | magic `b"OMT1"`               |
//! | 4      | 4         | channels `C` (u32)            |
//! | 8      | 4         | height `H` (u32)              |
//! | 12     | 4         | width `W` (u32)               |
//! | 16     | 4·C·H·W   | IEEE-754 f32 values, `[c][y][x]` |
//!
//! Trailing bytes, zero extents and non-finite values are rejected.

use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const OMT_MAGIC: &[u8; 4] = b"OMT1";
const HEADER_LEN: usize = 16;

pub fn encode_omt(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.data().len());
    out.extend_from_slice(OMT_MAGIC);
    for d in [t.channels(), t.height(), t.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_omt(bytes: &[u8]) -> Result<Tensor> {
    const FMT: &str = "OMT1";
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(FMT, format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != OMT_MAGIC {
        return Err(Error::format(FMT, "bad magic"));
    }
    let (c, h, w) = (
        read_u32(bytes, 4) as usize,
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
    );
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::format(FMT, format!("zero extent in {c}x{h}x{w}")));
    }
    let payload = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(FMT, "element count overflows"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != payload {
        return Err(Error::format(
            FMT,
            format!("{c}x{h}x{w} needs {payload} payload bytes, found {}", body.len()),
        ));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(FMT, "non-finite value"));
    }
    Tensor::new(c, h, w, data)
}

pub fn read_omt(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_omt(&bytes)
}

pub fn write_omt(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_omt(t)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let t = Tensor::new(1, 1, 2, vec![1.0, -0.5]).unwrap();
        let bytes = encode_omt(&t);
        assert_eq!(
            bytes,
            [
                b'O', b'M', b'T', b'1', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0x80, 0x3f, 0,
                0, 0, 0xbf
            ]
        );
    }

    #[test]
    fn rejects_malformed() {
        let good = encode_omt(&Tensor::filled(2, 2, 2, 1.0));
        assert!(decode_omt(&good[..10]).is_err());
        assert!(decode_omt(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(decode_omt(&extra).is_err());
        let mut magic = good.clone();
        magic[3] = b'2';
        assert!(decode_omt(&magic).is_err());
        let mut nan = good.clone();
        nan[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_omt(&nan).is_err());
        let mut huge = good;
        huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_omt(&huge).is_err());
    }

    proptest! {
        #[test]
        fn round_trips(c in 1usize..4, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
            let mut rng = crate::rng::ParamRng::new(seed, "omt");
            let t = Tensor::from_fn(c, h, w, |_, _, _| rng.uniform(-1e3, 1e3));
            prop_assert!(decode_omt(&encode_omt(&t)).unwrap().bit_eq(&t));
        }

        #[test]
        fn never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_omt(&bytes);
        }
    }
}
