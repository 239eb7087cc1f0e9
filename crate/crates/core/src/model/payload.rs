use std::collections::HashSet;

use thiserror::Error;

/// Longest key accepted from a sensor. Keys minted by [`merge_payloads`] may
/// grow past this by `.tracker` suffixes, up to [`MAX_WIRE_KEY_LEN`].
pub const MAX_KEY_LEN: usize = 32;
/// Key length limit imposed by the one-byte length prefix on the wire.
pub const MAX_WIRE_KEY_LEN: usize = 255;
pub const MAX_VALUE_LEN: usize = 4096;
/// Suffix appended to a tracker key that collides with an entity key.
pub const CLASH_SUFFIX: &str = ".tracker";

/// Where a payload was produced: on the entity itself, or merged by a tracker.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum PayloadScope {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("empty payload key")]
    EmptyKey,
    #[error("payload key {0:?} is not ASCII")]
    NonAsciiKey(String),
    #[error("payload key {key:?} is {len} bytes, limit {limit}")]
    KeyTooLong { key: String, len: usize, limit: usize },
    #[error("value for key {key:?} is {len} bytes, limit 4096")]
    ValueTooLong { key: String, len: usize },
    #[error("duplicate payload key {0:?}")]
    DuplicateKey(String),
    #[error("too many payload entries ({0})")]
    TooManyEntries(usize),
}

/// Ordered key/value sensor readings. Values are opaque bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Payload {
    entries: Vec<(String, Vec<u8>)>,
    scope: PayloadScope,
}

impl Payload {
    pub fn empty(scope: PayloadScope) -> Self {
        Payload {
            entries: Vec::new(),
            scope,
        }
    }

    pub fn new<K, V, I>(scope: PayloadScope, entries: I) -> Result<Self, PayloadError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<Vec<u8>>,
    {
        let entries: Vec<(String, Vec<u8>)> = entries
            .into_iter()
            .map(|(k, v)| (k.into(), v.into()))
            .collect();
        validate_entries(scope, &entries)?;
        Ok(Payload { entries, scope })
    }

    pub fn scope(&self) -> PayloadScope {
        self.scope
    }

    pub fn entries(&self) -> &[(String, Vec<u8>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[u8]> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
    }

    /// Replaces the value of every entry for which `f` returns `Some`.
    /// Keys and order are kept.
    pub fn map_values<F, E>(self, mut f: F) -> Result<Payload, E>
    where
        F: FnMut(&str, &[u8]) -> Result<Option<Vec<u8>>, E>,
        E: From<PayloadError>,
    {
        let mut entries = Vec::with_capacity(self.entries.len());
        for (k, v) in self.entries {
            let v = f(&k, &v)?.unwrap_or(v);
            entries.push((k, v));
        }
        validate_entries(self.scope, &entries)?;
        Ok(Payload {
            entries,
            scope: self.scope,
        })
    }
}

fn validate_entries(scope: PayloadScope, entries: &[(String, Vec<u8>)]) -> Result<(), PayloadError> {
    if entries.len() > u16::MAX as usize {
        return Err(PayloadError::TooManyEntries(entries.len()));
    }
    let key_limit = match scope {
        PayloadScope::Local => MAX_KEY_LEN,
        PayloadScope::Global => MAX_WIRE_KEY_LEN,
    };
    let mut seen = HashSet::with_capacity(entries.len());
    for (k, v) in entries {
        if k.is_empty() {
            return Err(PayloadError::EmptyKey);
        }
        if !k.is_ascii() {
            return Err(PayloadError::NonAsciiKey(k.clone()));
        }
        if k.len() > key_limit {
            return Err(PayloadError::KeyTooLong {
                key: k.clone(),
                len: k.len(),
                limit: key_limit,
            });
        }
        if v.len() > MAX_VALUE_LEN {
            return Err(PayloadError::ValueTooLong {
                key: k.clone(),
                len: v.len(),
            });
        }
        if !seen.insert(k.as_str()) {
            return Err(PayloadError::DuplicateKey(k.clone()));
        }
    }
    Ok(())
}

/// Builds the global payload a tracker submits: every entity entry in its
/// original order, then every tracker entry. A tracker key that collides with
/// an already present key gets `.tracker` appended until it is unique.
pub fn merge_payloads(local: &Payload, tracker_sensors: &Payload) -> Payload {
    let mut entries = local.entries.clone();
    let mut taken: HashSet<String> = entries.iter().map(|(k, _)| k.clone()).collect();
    for (k, v) in &tracker_sensors.entries {
        let mut key = k.clone();
        while taken.contains(&key) {
            key.push_str(CLASH_SUFFIX);
        }
        taken.insert(key.clone());
        entries.push((key, v.clone()));
    }
    Payload {
        entries,
        scope: PayloadScope::Global,
    }
}
