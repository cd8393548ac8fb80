//! Software AES (FIPS-197) for 128- and 256-bit keys.
//!
//! Byte-oriented implementation: S-box lookups plus `xtime` arithmetic in
//! GF(2^8). Not constant-time; this is a measurement tool, not a library for
//! protecting secrets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLOCK_LEN: usize = 16;

pub type Block = [u8; BLOCK_LEN];

const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

const INV_SBOX: [u8; 256] = invert(&SBOX);

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

const fn invert(table: &[u8; 256]) -> [u8; 256] {
    let mut out = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        out[table[i] as usize] = i as u8;
        i += 1;
    }
    out
}

#[inline(always)]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ (((b >> 7) & 1) * 0x1b)
}

#[inline(always)]
fn gmul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    p
}

/// Supported AES key lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeySize {
    #[serde(rename = "128")]
    Aes128,
    #[serde(rename = "256")]
    Aes256,
}

impl KeySize {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            128 => Ok(KeySize::Aes128),
            256 => Ok(KeySize::Aes256),
            other => Err(Error::invalid(format!(
                "key size must be 128 or 256 bits, got {other}"
            ))),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            KeySize::Aes128 => 128,
            KeySize::Aes256 => 256,
        }
    }

    pub fn byte_len(self) -> usize {
        self.bits() as usize / 8
    }

    fn rounds(self) -> usize {
        match self {
            KeySize::Aes128 => 10,
            KeySize::Aes256 => 14,
        }
    }
}

/// Secret AES key. AES-128 is the default everywhere in the lab.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum BlockKey {
    Aes128([u8; 16]),
    Aes256([u8; 32]),
}

impl BlockKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        match bytes.len() {
            16 => Ok(BlockKey::Aes128(bytes.try_into().unwrap())),
            32 => Ok(BlockKey::Aes256(bytes.try_into().unwrap())),
            n => Err(Error::invalid(format!(
                "AES key must be 16 or 32 bytes, got {n}"
            ))),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        match self {
            BlockKey::Aes128(k) => k,
            BlockKey::Aes256(k) => k,
        }
    }

    pub fn size(&self) -> KeySize {
        match self {
            BlockKey::Aes128(_) => KeySize::Aes128,
            BlockKey::Aes256(_) => KeySize::Aes256,
        }
    }
}

impl std::fmt::Debug for BlockKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BlockKey({}, {})", self.size().bits(), hex::encode(self.as_bytes()))
    }
}

/// Expanded round keys for one AES key.
#[derive(Clone)]
pub struct Aes {
    round_keys: Vec<Block>,
}

impl Aes {
    pub fn new(key: &BlockKey) -> Self {
        let size = key.size();
        let nk = size.byte_len() / 4;
        let rounds = size.rounds();
        let total_words = 4 * (rounds + 1);

        let mut words: Vec<[u8; 4]> = Vec::with_capacity(total_words);
        for chunk in key.as_bytes().chunks_exact(4) {
            words.push(chunk.try_into().unwrap());
        }
        for i in nk..total_words {
            let mut temp = words[i - 1];
            if i % nk == 0 {
                temp.rotate_left(1);
                for b in &mut temp {
                    *b = SBOX[*b as usize];
                }
                temp[0] ^= RCON[i / nk - 1];
            } else if nk > 6 && i % nk == 4 {
                for b in &mut temp {
                    *b = SBOX[*b as usize];
                }
            }
            let prev = words[i - nk];
            words.push([
                prev[0] ^ temp[0],
                prev[1] ^ temp[1],
                prev[2] ^ temp[2],
                prev[3] ^ temp[3],
            ]);
        }

        let round_keys = words
            .chunks_exact(4)
            .map(|w| {
                let mut rk = [0u8; 16];
                for (c, word) in w.iter().enumerate() {
                    rk[4 * c..4 * c + 4].copy_from_slice(word);
                }
                rk
            })
            .collect();
        Aes { round_keys }
    }

    fn rounds(&self) -> usize {
        self.round_keys.len() - 1
    }

    pub fn encrypt_block(&self, state: &mut Block) {
        add_round_key(state, &self.round_keys[0]);
        let rounds = self.rounds();
        for round in 1..rounds {
            sub_bytes(state);
            shift_rows(state);
            mix_columns(state);
            add_round_key(state, &self.round_keys[round]);
        }
        sub_bytes(state);
        shift_rows(state);
        add_round_key(state, &self.round_keys[rounds]);
    }

    pub fn decrypt_block(&self, state: &mut Block) {
        let rounds = self.rounds();
        add_round_key(state, &self.round_keys[rounds]);
        for round in (1..rounds).rev() {
            inv_shift_rows(state);
            inv_sub_bytes(state);
            add_round_key(state, &self.round_keys[round]);
            inv_mix_columns(state);
        }
        inv_shift_rows(state);
        inv_sub_bytes(state);
        add_round_key(state, &self.round_keys[0]);
    }
}

// State layout is column-major: byte `r + 4c` sits in row r, column c.

#[inline(always)]
fn add_round_key(state: &mut Block, rk: &Block) {
    for (s, k) in state.iter_mut().zip(rk) {
        *s ^= k;
    }
}

#[inline(always)]
fn sub_bytes(state: &mut Block) {
    for b in state.iter_mut() {
        *b = SBOX[*b as usize];
    }
}

#[inline(always)]
fn inv_sub_bytes(state: &mut Block) {
    for b in state.iter_mut() {
        *b = INV_SBOX[*b as usize];
    }
}

#[inline(always)]
fn shift_rows(s: &mut Block) {
    let t = *s;
    for r in 1..4 {
        for c in 0..4 {
            s[r + 4 * c] = t[r + 4 * ((c + r) % 4)];
        }
    }
}

#[inline(always)]
fn inv_shift_rows(s: &mut Block) {
    let t = *s;
    for r in 1..4 {
        for c in 0..4 {
            s[r + 4 * ((c + r) % 4)] = t[r + 4 * c];
        }
    }
}

#[inline(always)]
fn mix_columns(s: &mut Block) {
    for col in s.chunks_exact_mut(4) {
        let [a0, a1, a2, a3] = [col[0], col[1], col[2], col[3]];
        let all = a0 ^ a1 ^ a2 ^ a3;
        col[0] = a0 ^ all ^ xtime(a0 ^ a1);
        col[1] = a1 ^ all ^ xtime(a1 ^ a2);
        col[2] = a2 ^ all ^ xtime(a2 ^ a3);
        col[3] = a3 ^ all ^ xtime(a3 ^ a0);
    }
}

fn inv_mix_columns(s: &mut Block) {
    for col in s.chunks_exact_mut(4) {
        let [a0, a1, a2, a3] = [col[0], col[1], col[2], col[3]];
        col[0] = gmul(a0, 14) ^ gmul(a1, 11) ^ gmul(a2, 13) ^ gmul(a3, 9);
        col[1] = gmul(a0, 9) ^ gmul(a1, 14) ^ gmul(a2, 11) ^ gmul(a3, 13);
        col[2] = gmul(a0, 13) ^ gmul(a1, 9) ^ gmul(a2, 14) ^ gmul(a3, 11);
        col[3] = gmul(a0, 11) ^ gmul(a1, 13) ^ gmul(a2, 9) ^ gmul(a3, 14);
    }
}

/// Forward AES transformation of a single 16-byte block.
pub fn aes_encrypt_block(block: &[u8], key: &BlockKey) -> Result<Block> {
    let mut state: Block = block.try_into().map_err(|_| {
        Error::invalid(format!("AES block must be 16 bytes, got {}", block.len()))
    })?;
    Aes::new(key).encrypt_block(&mut state);
    Ok(state)
}

/// Inverse AES transformation of a single 16-byte block.
pub fn aes_decrypt_block(block: &[u8], key: &BlockKey) -> Result<Block> {
    let mut state: Block = block.try_into().map_err(|_| {
        Error::invalid(format!("AES block must be 16 bytes, got {}", block.len()))
    })?;
    Aes::new(key).decrypt_block(&mut state);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unhex(s: &str) -> Vec<u8> {
        hex::decode(s).unwrap()
    }

    #[test]
    fn fips197_appendix_c1() {
        let key = BlockKey::from_slice(&unhex("000102030405060708090a0b0c0d0e0f")).unwrap();
        let ct = aes_encrypt_block(&unhex("00112233445566778899aabbccddeeff"), &key).unwrap();
        assert_eq!(hex::encode(ct), "69c4e0d86a7b0430d8cdb78070b4c55a");
        let pt = aes_decrypt_block(&ct, &key).unwrap();
        assert_eq!(hex::encode(pt), "00112233445566778899aabbccddeeff");
    }

    #[test]
    fn fips197_appendix_c3() {
        let key = BlockKey::from_slice(&unhex(
            "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f",
        ))
        .unwrap();
        let ct = aes_encrypt_block(&unhex("00112233445566778899aabbccddeeff"), &key).unwrap();
        assert_eq!(hex::encode(ct), "8ea2b7ca516745bfeafc49904b496089");
    }

    #[test]
    fn fips197_key_expansion_last_round_key() {
        // Appendix A.1: w[40..44] = d014f9a8 c9ee2589 e13f0cc8 b6630ca6
        let key = BlockKey::from_slice(&unhex("2b7e151628aed2a6abf7158809cf4f3c")).unwrap();
        let aes = Aes::new(&key);
        assert_eq!(aes.round_keys.len(), 11);
        assert_eq!(hex::encode(aes.round_keys[10]), "d014f9a8c9ee2589e13f0cc8b6630ca6");
    }

    #[test]
    fn wrong_lengths_rejected() {
        let key = BlockKey::Aes128([0; 16]);
        assert!(matches!(
            aes_encrypt_block(&[0u8; 15], &key),
            Err(Error::InvalidArgument(_))
        ));
        assert!(BlockKey::from_slice(&[0u8; 24]).is_err());
        assert!(KeySize::from_bits(192).is_err());
    }

    #[test]
    fn inverse_sbox_is_inverse() {
        for i in 0..=255u8 {
            assert_eq!(INV_SBOX[SBOX[i as usize] as usize], i);
        }
    }
}
