use sha2::{Digest as _, Sha256};

use crate::codec::{self, CodecError};
use crate::model::Registration;

/// 256-bit digest. Every hash in the ledger is SHA-256.
pub type Digest = [u8; 32];

pub const HASH_NAME: &str = "sha256";
pub const ZERO_DIGEST: Digest = [0u8; 32];
pub const MAX_DIFFICULTY_BITS: u8 = 32;

/// Serialized header size: index, prev hash, body hash, nonce, difficulty,
/// seal time.
pub const HEADER_LEN: usize = 8 + 32 + 32 + 8 + 1 + 8;

pub fn sha256(data: &[u8]) -> Digest {
    Sha256::digest(data).into()
}

pub fn leading_zero_bits(d: &Digest) -> u32 {
    let mut bits = 0;
    for byte in d {
        if *byte == 0 {
            bits += 8;
        } else {
            bits += byte.leading_zeros();
            break;
        }
    }
    bits
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockHeader {
    pub index: u64,
    pub prev_hash: Digest,
    pub body_hash: Digest,
    pub nonce: u64,
    pub difficulty_bits: u8,
    /// Seconds since the epoch. Kept raw so that any byte image decodes.
    pub sealed_at: u64,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&self.index.to_be_bytes());
        out[8..40].copy_from_slice(&self.prev_hash);
        out[40..72].copy_from_slice(&self.body_hash);
        out[72..80].copy_from_slice(&self.nonce.to_be_bytes());
        out[80] = self.difficulty_bits;
        out[81..89].copy_from_slice(&self.sealed_at.to_be_bytes());
        out
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Self {
        let u64_at = |i: usize| u64::from_be_bytes(b[i..i + 8].try_into().expect("eight bytes"));
        BlockHeader {
            index: u64_at(0),
            prev_hash: b[8..40].try_into().expect("32 bytes"),
            body_hash: b[40..72].try_into().expect("32 bytes"),
            nonce: u64_at(72),
            difficulty_bits: b[80],
            sealed_at: u64_at(81),
        }
    }

    pub fn hash(&self) -> Digest {
        sha256(&self.to_bytes())
    }

    pub fn meets_difficulty(&self) -> bool {
        leading_zero_bits(&self.hash()) >= self.difficulty_bits as u32
    }
}

/// A sealed batch of registrations.
///
/// `body` is the concatenation of encoded registration packets and is the
/// source of truth; `hash` is the header hash recorded at seal time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub hash: Digest,
    pub body: Vec<u8>,
}

impl Block {
    pub fn registrations(&self) -> Result<Vec<Registration>, CodecError> {
        codec::decode_registration_stream(&self.body)
    }

    /// `header ‖ hash ‖ body`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 32 + self.body.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.hash);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Block> {
        if bytes.len() < HEADER_LEN + 32 {
            return None;
        }
        let header = BlockHeader::from_bytes(bytes[..HEADER_LEN].try_into().ok()?);
        let hash = bytes[HEADER_LEN..HEADER_LEN + 32].try_into().ok()?;
        Some(Block {
            header,
            hash,
            body: bytes[HEADER_LEN + 32..].to_vec(),
        })
    }
}
