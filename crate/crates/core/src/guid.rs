//! Identifier allocation and classification.
//!
//! Entity GUIDs are random-based (version 4, RFC 4122 variant) with the 16
//! most significant bits of `time-low` replaced by a fixed IoE preamble, so a
//! tracker can tell IoE entities apart from other radios by looking at the
//! first four hex digits.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::model::Guid;

pub const DEFAULT_PREAMBLE: u16 = 0xE17E;

const PREAMBLE_SHIFT: u32 = 112;
const PREAMBLE_MASK: u128 = 0xFFFF << PREAMBLE_SHIFT;
// Version nibble is the high nibble of byte 6, variant the top two bits of byte 8.
const VERSION_MASK: u128 = 0xF << 76;
const VERSION_RANDOM: u128 = 0x4 << 76;
const VARIANT_MASK: u128 = 0b11 << 62;
const VARIANT_RFC4122: u128 = 0b10 << 62;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidError {
    #[error("collision probability must lie in (0, 1), got {0}")]
    Domain(f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct GuidPolicy {
    pub ioe_preamble: u16,
    pub rng_seed: Option<u64>,
}

impl Default for GuidPolicy {
    fn default() -> Self {
        GuidPolicy {
            ioe_preamble: DEFAULT_PREAMBLE,
            rng_seed: None,
        }
    }
}

impl GuidPolicy {
    pub fn with_preamble(ioe_preamble: u16) -> Self {
        GuidPolicy {
            ioe_preamble,
            rng_seed: None,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.rng_seed = Some(seed);
        self
    }

    /// Generator state for this policy: deterministic when a seed is set,
    /// OS entropy otherwise.
    pub fn rng(&self) -> ChaCha20Rng {
        match self.rng_seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        }
    }
}

fn random_v4<R: RngCore + ?Sized>(rng: &mut R) -> u128 {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    let raw = u128::from_be_bytes(bytes);
    (raw & !VERSION_MASK & !VARIANT_MASK) | VERSION_RANDOM | VARIANT_RFC4122
}

/// Draws a fresh entity GUID carrying the policy preamble.
pub fn new_guid<R: RngCore + ?Sized>(policy: &GuidPolicy, rng: &mut R) -> Guid {
    let raw = random_v4(rng);
    let preamble = (policy.ioe_preamble as u128) << PREAMBLE_SHIFT;
    Guid::from_u128((raw & !PREAMBLE_MASK) | preamble)
}

/// Draws a GUID guaranteed not to carry the policy preamble, as used for
/// trackers and other non-IoE radios.
pub fn new_foreign_guid<R: RngCore + ?Sized>(policy: &GuidPolicy, rng: &mut R) -> Guid {
    let mut raw = random_v4(rng);
    if (raw >> PREAMBLE_SHIFT) as u16 == policy.ioe_preamble {
        raw ^= 1 << PREAMBLE_SHIFT;
    }
    Guid::from_u128(raw)
}

pub fn parse_guid(text: &str) -> Result<Guid, crate::model::MalformedGuid> {
    Guid::parse(text)
}

pub fn is_ioe_entity(guid: Guid, policy: &GuidPolicy) -> bool {
    guid.preamble() == policy.ioe_preamble
}

/// Birthday-bound population size at which a collision among 128-bit
/// identifiers reaches probability `p`: `sqrt(2^129 * -ln(1 - p))`.
pub fn collision_bound(p: f64) -> Result<f64, GuidError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GuidError::Domain(p));
    }
    // ln_1p keeps full precision for tiny p where 1 - p rounds.
    let neg_log = -(-p).ln_1p();
    Ok((2f64.powi(129) * neg_log).sqrt())
}
