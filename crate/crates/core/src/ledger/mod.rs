//! Append-only, hash-chained store of registrations.
//!
//! Registrations are submitted into a pending pool and sealed into blocks by
//! a lowest-first nonce search over the header hash. The chain has a single
//! writer; [`SharedLedger`] serializes writers coming from several threads.

mod block;
pub mod file;
mod shared;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::model::{Guid, Registration};

pub use block::{
    leading_zero_bits, sha256, Block, BlockHeader, Digest, HASH_NAME, HEADER_LEN,
    MAX_DIFFICULTY_BITS, ZERO_DIGEST,
};
pub use shared::SharedLedger;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct LedgerConfig {
    pub difficulty_bits: u8,
    pub max_block_size: usize,
}

impl LedgerConfig {
    pub const DEFAULT_DIFFICULTY_BITS: u8 = 8;
    pub const DEFAULT_MAX_BLOCK_SIZE: usize = 64;
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            difficulty_bits: Self::DEFAULT_DIFFICULTY_BITS,
            max_block_size: Self::DEFAULT_MAX_BLOCK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("no pending registrations to seal")]
    EmptyPool,
    #[error("difficulty {0} outside [0, 32]")]
    DifficultyOutOfRange(u8),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Outcome of a submission, the acknowledgment a tracker waits for.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Ack {
    Accepted,
    /// The same (entity, time, location) is already pending or sealed.
    Duplicate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvalidReason {
    PrevHashMismatch,
    IndexMismatch { found: u64 },
    DifficultyOutOfRange(u8),
    HeaderHashMismatch,
    InsufficientWork,
    BodyHashMismatch,
    MalformedBody(String),
    EmptyBody,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::PrevHashMismatch => write!(f, "prev-hash mismatch"),
            InvalidReason::IndexMismatch { found } => write!(f, "index mismatch (found {found})"),
            InvalidReason::DifficultyOutOfRange(d) => write!(f, "difficulty {d} out of range"),
            InvalidReason::HeaderHashMismatch => write!(f, "header-hash mismatch"),
            InvalidReason::InsufficientWork => write!(f, "insufficient proof of work"),
            InvalidReason::BodyHashMismatch => write!(f, "body-hash mismatch"),
            InvalidReason::MalformedBody(e) => write!(f, "malformed body: {e}"),
            InvalidReason::EmptyBody => write!(f, "empty body"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationReport {
    Ok,
    Invalid {
        first_bad_index: usize,
        reason: InvalidReason,
    },
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok)
    }
}

type DedupKey = (Guid, u64, (u16, u16));

fn dedup_key(r: &Registration) -> DedupKey {
    (
        r.entity(),
        r.time().seconds(),
        codec::encode_location16(r.location()),
    )
}

#[derive(Clone, Debug)]
pub struct Chain {
    config: LedgerConfig,
    blocks: Vec<Block>,
    pending: Vec<Registration>,
    seen: HashSet<DedupKey>,
}

impl Default for Chain {
    fn default() -> Self {
        Chain::new(LedgerConfig::default())
    }
}

impl Chain {
    pub fn new(config: LedgerConfig) -> Self {
        Chain {
            config,
            blocks: Vec::new(),
            pending: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Rebuilds a chain from existing blocks without validating them.
    /// Call [`validate`](Self::validate) before trusting the result.
    pub fn from_blocks(config: LedgerConfig, blocks: Vec<Block>) -> Self {
        let mut chain = Chain::new(config);
        for block in &blocks {
            if let Ok(regs) = block.registrations() {
                chain.seen.extend(regs.iter().map(dedup_key));
            }
        }
        chain.blocks = blocks;
        chain
    }

    pub fn config(&self) -> LedgerConfig {
        self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn pending(&self) -> &[Registration] {
        &self.pending
    }

    pub fn tip_hash(&self) -> Digest {
        self.blocks.last().map_or(ZERO_DIGEST, |b| b.hash)
    }

    /// Queues a registration. Its location is first moved onto the wire grid,
    /// which is what sealing would store anyway.
    pub fn submit(&mut self, r: Registration) -> Result<Ack, LedgerError> {
        let r = codec::snap_registration(r);
        codec::encode_registration_packet(&r)?;
        if !self.seen.insert(dedup_key(&r)) {
            return Ok(Ack::Duplicate);
        }
        self.pending.push(r);
        Ok(Ack::Accepted)
    }

    /// Moves up to `max_block_size` pending registrations into a new block.
    /// The seal time is the latest registration time in the block.
    pub fn seal_block(&mut self, difficulty_bits: u8) -> Result<&Block, LedgerError> {
        if difficulty_bits > MAX_DIFFICULTY_BITS {
            return Err(LedgerError::DifficultyOutOfRange(difficulty_bits));
        }
        if self.pending.is_empty() {
            return Err(LedgerError::EmptyPool);
        }
        let take = self.pending.len().min(self.config.max_block_size.max(1));
        let mut body = Vec::new();
        for r in &self.pending[..take] {
            body.extend(codec::encode_registration_packet(r)?);
        }
        let sealed_at = self.pending[..take]
            .iter()
            .map(|r| r.time().seconds())
            .max()
            .expect("non-empty batch");
        let mut header = BlockHeader {
            index: self.blocks.len() as u64,
            prev_hash: self.tip_hash(),
            body_hash: sha256(&body),
            nonce: 0,
            difficulty_bits,
            sealed_at,
        };
        let hash = loop {
            let h = header.hash();
            if leading_zero_bits(&h) >= difficulty_bits as u32 {
                break h;
            }
            header.nonce += 1;
        };
        self.pending.drain(..take);
        self.blocks.push(Block { header, hash, body });
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Seals until the pending pool is empty.
    pub fn seal_all(&mut self, difficulty_bits: u8) -> Result<usize, LedgerError> {
        let mut sealed = 0;
        while !self.pending.is_empty() {
            self.seal_block(difficulty_bits)?;
            sealed += 1;
        }
        Ok(sealed)
    }

    /// Checks every block in order and reports the first one that breaks a
    /// chain or block invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut prev = ZERO_DIGEST;
        for (i, block) in self.blocks.iter().enumerate() {
            if let Err(reason) = check_block(i, block, &prev) {
                return ValidationReport::Invalid {
                    first_bad_index: i,
                    reason,
                };
            }
            prev = block.hash;
        }
        ValidationReport::Ok
    }

    /// Every sealed registration in block order, then intra-block order.
    /// Blocks whose body does not decode are skipped; `validate` reports them.
    pub fn sealed_registrations(&self) -> impl Iterator<Item = Registration> + '_ {
        self.blocks
            .iter()
            .filter_map(|b| b.registrations().ok())
            .flatten()
    }

    pub fn registration_count(&self) -> usize {
        self.sealed_registrations().count()
    }

    /// All sealed registrations of one entity, in ledger order.
    pub fn entity_registrations(&self, guid: Guid) -> Vec<Registration> {
        self.sealed_registrations()
            .filter(|r| r.entity() == guid)
            .collect()
    }

    /// All sealed registrations listing `guid` among their neighbors.
    pub fn registrations_mentioning(&self, guid: Guid) -> Vec<Registration> {
        self.sealed_registrations()
            .filter(|r| r.mentions(guid))
            .collect()
    }
}

fn check_block(i: usize, block: &Block, prev: &Digest) -> Result<(), InvalidReason> {
    let h = &block.header;
    if h.prev_hash != *prev {
        return Err(InvalidReason::PrevHashMismatch);
    }
    if h.index != i as u64 {
        return Err(InvalidReason::IndexMismatch { found: h.index });
    }
    if h.difficulty_bits > MAX_DIFFICULTY_BITS {
        return Err(InvalidReason::DifficultyOutOfRange(h.difficulty_bits));
    }
    if h.hash() != block.hash {
        return Err(InvalidReason::HeaderHashMismatch);
    }
    if leading_zero_bits(&block.hash) < h.difficulty_bits as u32 {
        return Err(InvalidReason::InsufficientWork);
    }
    if sha256(&block.body) != h.body_hash {
        return Err(InvalidReason::BodyHashMismatch);
    }
    match block.registrations() {
        Ok(regs) if regs.is_empty() => Err(InvalidReason::EmptyBody),
        Ok(_) => Ok(()),
        Err(e) => Err(InvalidReason::MalformedBody(e.to_string())),
    }
}
