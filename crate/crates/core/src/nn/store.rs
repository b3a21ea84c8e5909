//! Flat little-endian `f32` weight files.

use super::{Param, Scalar};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight file holds {got} values, model expects {expected}")]
    SizeMismatch { got: usize, expected: usize },
}

pub fn write_params<T: Scalar, W: Write>(params: &[&Param<T>], mut out: W) -> Result<(), StoreError> {
    let mut buf = Vec::with_capacity(params.iter().map(|p| p.len() * 4).sum());
    for p in params {
        for v in &p.value {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_params<T: Scalar, R: Read>(params: Vec<&mut Param<T>>, mut input: R) -> Result<(), StoreError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let expected: usize = params.iter().map(|p| p.len()).sum();
    if bytes.len() != expected * 4 {
        return Err(StoreError::SizeMismatch {
            got: bytes.len() / 4,
            expected,
        });
    }
    let mut chunks = bytes.chunks_exact(4);
    for p in params {
        for v in p.value.iter_mut() {
            let c = chunks.next().expect("length checked above");
            *v = T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        }
        p.zero_grad();
    }
    Ok(())
}
