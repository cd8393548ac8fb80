//! AES block cipher, the ECB/CBC/CTR modes, and layered encryption.

mod aes;
mod mode;

pub use aes::{aes_decrypt_block, aes_encrypt_block, Aes, Block, BlockKey, KeySize, BLOCK_LEN};
pub use mode::{
    decrypt, decrypt_in_place, encrypt, encrypt_in_place, encrypt_layers, CipherMode, InitVector,
    Origin, Sample, MAX_LAYER,
};
