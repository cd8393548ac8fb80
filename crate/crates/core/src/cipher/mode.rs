use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::aes::{Aes, Block, BlockKey, BLOCK_LEN};
use crate::error::{Error, Result};

/// Highest layer count a [`Sample`] may carry (plaintext plus three layers).
pub const MAX_LAYER: u8 = 3;

/// 16-byte IV. In CTR mode this is the full initial counter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InitVector(pub Block);

impl InitVector {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        bytes
            .try_into()
            .map(InitVector)
            .map_err(|_| Error::invalid(format!("IV must be 16 bytes, got {}", bytes.len())))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CipherMode {
    Ecb,
    Cbc,
    Ctr,
}

impl CipherMode {
    pub const ALL: [CipherMode; 3] = [CipherMode::Ecb, CipherMode::Cbc, CipherMode::Ctr];
}

impl fmt::Display for CipherMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CipherMode::Ecb => "ECB",
            CipherMode::Cbc => "CBC",
            CipherMode::Ctr => "CTR",
        })
    }
}

impl FromStr for CipherMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ECB" => Ok(CipherMode::Ecb),
            "CBC" => Ok(CipherMode::Cbc),
            "CTR" => Ok(CipherMode::Ctr),
            _ => Err(Error::invalid(format!("unknown cipher mode {s:?}"))),
        }
    }
}

/// Where a sample's layer-0 bytes came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Random,
    Zeros,
    External,
}

/// A fixed-length byte string plus the number of encryption layers applied to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub bytes: Vec<u8>,
    pub layer: u8,
    pub origin: Origin,
}

impl Sample {
    pub fn plaintext(bytes: Vec<u8>, origin: Origin) -> Self {
        Sample {
            bytes,
            layer: 0,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

fn check_blocks(len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::invalid("cannot encrypt an empty sample"));
    }
    if !len.is_multiple_of(BLOCK_LEN) {
        return Err(Error::PaddingRequired { len });
    }
    Ok(())
}

/// Encrypts `data` in place. `data.len()` must be a non-zero multiple of 16.
pub fn encrypt_in_place(data: &mut [u8], iv: &InitVector, cipher: &Aes, mode: CipherMode) -> Result<()> {
    check_blocks(data.len())?;
    match mode {
        CipherMode::Ecb => {
            for chunk in data.chunks_exact_mut(BLOCK_LEN) {
                let block: &mut Block = chunk.try_into().unwrap();
                cipher.encrypt_block(block);
            }
        }
        CipherMode::Cbc => {
            let mut prev = iv.0;
            for chunk in data.chunks_exact_mut(BLOCK_LEN) {
                let block: &mut Block = chunk.try_into().unwrap();
                for (b, p) in block.iter_mut().zip(prev) {
                    *b ^= p;
                }
                cipher.encrypt_block(block);
                prev = *block;
            }
        }
        CipherMode::Ctr => ctr_apply(data, iv, cipher),
    }
    Ok(())
}

/// Inverse of [`encrypt_in_place`].
pub fn decrypt_in_place(data: &mut [u8], iv: &InitVector, cipher: &Aes, mode: CipherMode) -> Result<()> {
    check_blocks(data.len())?;
    match mode {
        CipherMode::Ecb => {
            for chunk in data.chunks_exact_mut(BLOCK_LEN) {
                let block: &mut Block = chunk.try_into().unwrap();
                cipher.decrypt_block(block);
            }
        }
        CipherMode::Cbc => {
            let mut prev = iv.0;
            for chunk in data.chunks_exact_mut(BLOCK_LEN) {
                let block: &mut Block = chunk.try_into().unwrap();
                let saved = *block;
                cipher.decrypt_block(block);
                for (b, p) in block.iter_mut().zip(prev) {
                    *b ^= p;
                }
                prev = saved;
            }
        }
        CipherMode::Ctr => ctr_apply(data, iv, cipher),
    }
    Ok(())
}

// Counter block is the IV read as a big-endian u128, incremented (mod 2^128) per block.
fn ctr_apply(data: &mut [u8], iv: &InitVector, cipher: &Aes) {
    let mut counter = u128::from_be_bytes(iv.0);
    for chunk in data.chunks_exact_mut(BLOCK_LEN) {
        let mut keystream = counter.to_be_bytes();
        cipher.encrypt_block(&mut keystream);
        for (b, k) in chunk.iter_mut().zip(keystream) {
            *b ^= k;
        }
        counter = counter.wrapping_add(1);
    }
}

/// Applies one encryption layer. ECB ignores `iv`.
pub fn encrypt(data: &Sample, iv: &InitVector, key: &BlockKey, mode: CipherMode) -> Result<Sample> {
    if data.layer >= MAX_LAYER {
        return Err(Error::InvalidState(format!(
            "sample already carries {} layers",
            data.layer
        )));
    }
    let mut bytes = data.bytes.clone();
    encrypt_in_place(&mut bytes, iv, &Aes::new(key), mode)?;
    Ok(Sample {
        bytes,
        layer: data.layer + 1,
        origin: data.origin,
    })
}

/// Removes one encryption layer.
pub fn decrypt(data: &Sample, iv: &InitVector, key: &BlockKey, mode: CipherMode) -> Result<Sample> {
    if data.layer == 0 {
        return Err(Error::InvalidState("cannot decrypt a layer-0 sample".into()));
    }
    let mut bytes = data.bytes.clone();
    decrypt_in_place(&mut bytes, iv, &Aes::new(key), mode)?;
    Ok(Sample {
        bytes,
        layer: data.layer - 1,
        origin: data.origin,
    })
}

/// Folds [`encrypt`] over `materials` left to right; layer j uses `materials[j]`.
pub fn encrypt_layers(
    data: &Sample,
    materials: &[(InitVector, BlockKey)],
    mode: CipherMode,
) -> Result<Sample> {
    let (first, rest) = materials
        .split_first()
        .ok_or_else(|| Error::invalid("encrypt_layers needs at least one (iv, key) pair"))?;
    let mut out = encrypt(data, &first.0, &first.1, mode)?;
    for (iv, key) in rest {
        out = encrypt(&out, iv, key, mode)?;
    }
    Ok(out)
}
