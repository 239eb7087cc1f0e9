use std::sync::{Mutex, MutexGuard};

use super::{Ack, Chain, LedgerError};
use crate::model::Registration;

/// Thread-safe front for a [`Chain`]: writers are serialized behind one lock,
/// readers take a cloned snapshot and query it without holding the lock.
#[derive(Debug, Default)]
pub struct SharedLedger {
    inner: Mutex<Chain>,
}

impl SharedLedger {
    pub fn new(chain: Chain) -> Self {
        SharedLedger {
            inner: Mutex::new(chain),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Chain> {
        // A panic in another writer cannot leave the chain half-updated:
        // every mutation is a single push or drain after all fallible work.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn submit(&self, r: Registration) -> Result<Ack, LedgerError> {
        self.lock().submit(r)
    }

    /// Seals one block if at least `threshold` registrations are pending.
    pub fn seal_if_full(&self, threshold: usize, difficulty_bits: u8) -> Result<bool, LedgerError> {
        let mut chain = self.lock();
        if chain.pending().len() < threshold.max(1) {
            return Ok(false);
        }
        chain.seal_block(difficulty_bits)?;
        Ok(true)
    }

    pub fn seal_all(&self, difficulty_bits: u8) -> Result<usize, LedgerError> {
        self.lock().seal_all(difficulty_bits)
    }

    pub fn snapshot(&self) -> Chain {
        self.lock().clone()
    }

    pub fn into_inner(self) -> Chain {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}
