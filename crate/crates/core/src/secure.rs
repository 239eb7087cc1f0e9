//! Encrypted side storage for sensitive payload values.
//!
//! A sensitive value is sealed to the detecting tracker's public key, the
//! resulting [`Envelope`] is written to a content-addressed [`BlobStore`], and
//! only the 64-hex-character address goes into the ledger.
//!
//! Reference scheme: X25519 sealed boxes with XSalsa20-Poly1305
//! (`crypto_box`), addressed by SHA-256.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crypto_box::aead::rand_core::CryptoRngCore;
use crypto_box::aead::OsRng;
use crypto_box::{PublicKey, SecretKey};
use thiserror::Error;

use crate::codec;
use crate::ledger::{sha256, Digest};
use crate::model::{Payload, PayloadScope};

pub const SCHEME_ID: &str = "x25519-xsalsa20poly1305-sealed";
pub const KEY_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum SecureError {
    #[error("key is not a valid {SCHEME_ID} key")]
    KeyMismatch,
    #[error("decryption failed")]
    DecryptFailure,
    #[error("unsupported scheme {0:?}")]
    UnsupportedScheme(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("malformed content address {0:?}")]
    MalformedAddress(String),
    #[error("blob {0} not found")]
    NotFound(ContentAddress),
    #[error("blob {address} fails its digest check (found {actual})")]
    IntegrityError {
        address: ContentAddress,
        actual: ContentAddress,
    },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Lowercase hex SHA-256 digest naming a blob.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentAddress(String);

impl ContentAddress {
    pub fn from_digest(d: &Digest) -> Self {
        ContentAddress(hex::encode(d))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(text: &str) -> Result<Self, SecureError> {
        let ok = text.len() == 64 && text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !ok {
            return Err(SecureError::MalformedAddress(text.to_owned()));
        }
        Ok(ContentAddress(text.to_owned()))
    }

    /// True for exactly 64 lowercase hex characters.
    pub fn is_address(bytes: &[u8]) -> bool {
        std::str::from_utf8(bytes).is_ok_and(|s| ContentAddress::parse(s).is_ok())
    }
}

impl fmt::Display for ContentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ContentAddress {
    type Err = SecureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContentAddress::parse(s)
    }
}

pub fn hash_name(data: &[u8]) -> ContentAddress {
    ContentAddress::from_digest(&sha256(data))
}

/// A tracker's key pair for the reference scheme.
#[derive(Clone)]
pub struct KeyPair {
    secret: SecretKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair(public={})", hex::encode(self.public_bytes()))
    }
}

impl KeyPair {
    pub fn generate<R: CryptoRngCore>(rng: &mut R) -> Self {
        KeyPair {
            secret: SecretKey::generate(rng),
        }
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, SecureError> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| SecureError::KeyMismatch)?;
        Ok(KeyPair {
            secret: SecretKey::from(arr),
        })
    }

    pub fn public_bytes(&self) -> [u8; KEY_LEN] {
        *self.secret.public_key().as_bytes()
    }

    pub fn secret_bytes(&self) -> [u8; KEY_LEN] {
        self.secret.to_bytes()
    }
}

pub fn key_fingerprint(public_key: &[u8]) -> Digest {
    sha256(public_key)
}

/// Ciphertext plus what is needed to pick the right key to open it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub ciphertext: Vec<u8>,
    pub recipient_fingerprint: Digest,
    pub scheme_id: String,
}

impl Envelope {
    /// `u8 scheme length ‖ scheme ‖ fingerprint[32] ‖ u32 length ‖ ciphertext`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.scheme_id.len() + 32 + 4 + self.ciphertext.len());
        out.push(self.scheme_id.len() as u8);
        out.extend_from_slice(self.scheme_id.as_bytes());
        out.extend_from_slice(&self.recipient_fingerprint);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, SecureError> {
        let bad = |m: &str| SecureError::MalformedEnvelope(m.to_owned());
        let (&slen, rest) = b.split_first().ok_or_else(|| bad("empty"))?;
        let slen = slen as usize;
        if rest.len() < slen + 32 + 4 {
            return Err(bad("truncated header"));
        }
        let scheme_id = std::str::from_utf8(&rest[..slen])
            .map_err(|_| bad("scheme id is not UTF-8"))?
            .to_owned();
        let rest = &rest[slen..];
        let recipient_fingerprint: Digest = rest[..32].try_into().expect("32 bytes");
        let clen = u32::from_be_bytes(rest[32..36].try_into().expect("4 bytes")) as usize;
        let ciphertext = &rest[36..];
        if ciphertext.len() != clen {
            return Err(bad("ciphertext length mismatch"));
        }
        Ok(Envelope {
            ciphertext: ciphertext.to_vec(),
            recipient_fingerprint,
            scheme_id,
        })
    }

    pub fn address(&self) -> ContentAddress {
        hash_name(&self.to_bytes())
    }
}

fn plaintext_of(p: &Payload) -> Vec<u8> {
    let mut out = vec![match p.scope() {
        PayloadScope::Local => 0u8,
        PayloadScope::Global => 1u8,
    }];
    out.extend(codec::encode_payload_block(p));
    out
}

pub fn encrypt_payload(p: &Payload, recipient_public_key: &[u8]) -> Result<Envelope, SecureError> {
    encrypt_payload_with_rng(p, recipient_public_key, &mut OsRng)
}

/// Like [`encrypt_payload`] with caller-supplied randomness for the
/// ephemeral key, so seeded runs are reproducible.
pub fn encrypt_payload_with_rng<R: CryptoRngCore>(
    p: &Payload,
    recipient_public_key: &[u8],
    rng: &mut R,
) -> Result<Envelope, SecureError> {
    let key: [u8; KEY_LEN] = recipient_public_key
        .try_into()
        .map_err(|_| SecureError::KeyMismatch)?;
    let public = PublicKey::from(key);
    let ciphertext = public
        .seal(rng, &plaintext_of(p))
        .map_err(|_| SecureError::KeyMismatch)?;
    Ok(Envelope {
        ciphertext,
        recipient_fingerprint: key_fingerprint(&key),
        scheme_id: SCHEME_ID.to_owned(),
    })
}

pub fn decrypt_payload(e: &Envelope, keys: &KeyPair) -> Result<Payload, SecureError> {
    if e.scheme_id != SCHEME_ID {
        return Err(SecureError::UnsupportedScheme(e.scheme_id.clone()));
    }
    if e.recipient_fingerprint != key_fingerprint(&keys.public_bytes()) {
        return Err(SecureError::DecryptFailure);
    }
    let plain = keys
        .secret
        .unseal(&e.ciphertext)
        .map_err(|_| SecureError::DecryptFailure)?;
    let (scope, block) = plain.split_first().ok_or(SecureError::DecryptFailure)?;
    let scope = match scope {
        0 => PayloadScope::Local,
        1 => PayloadScope::Global,
        _ => return Err(SecureError::DecryptFailure),
    };
    codec::decode_payload_block(block, scope).map_err(|_| SecureError::DecryptFailure)
}

/// One file per blob under `<root>/<first two hex>/<address>`.
#[derive(Clone, Debug)]
pub struct BlobStore {
    root: PathBuf,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct StoreReport {
    pub checked: usize,
    pub corrupt: Vec<PathBuf>,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl BlobStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(BlobStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, a: &ContentAddress) -> PathBuf {
        self.root.join(&a.as_str()[..2]).join(a.as_str())
    }

    /// Writes the envelope under its address. Existing blobs are left alone;
    /// new ones appear atomically via a rename.
    pub fn store(&self, e: &Envelope) -> Result<ContentAddress, SecureError> {
        let bytes = e.to_bytes();
        let address = hash_name(&bytes);
        let path = self.path_of(&address);
        if path.exists() {
            return Ok(address);
        }
        let dir = path.parent().expect("blob path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            address,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(address)
    }

    pub fn load(&self, a: &ContentAddress) -> Result<Envelope, SecureError> {
        let bytes = match fs::read(self.path_of(a)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(SecureError::NotFound(a.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let actual = hash_name(&bytes);
        if actual != *a {
            return Err(SecureError::IntegrityError {
                address: a.clone(),
                actual,
            });
        }
        Envelope::from_bytes(&bytes)
    }

    /// Rechecks every blob's digest against its file name.
    pub fn verify(&self) -> Result<StoreReport, SecureError> {
        let mut report = StoreReport::default();
        let mut shards: Vec<_> = fs::read_dir(&self.root)?.collect::<Result<_, _>>()?;
        shards.sort_by_key(|e| e.file_name());
        for shard in shards {
            if !shard.file_type()?.is_dir() {
                continue;
            }
            let mut files: Vec<_> = fs::read_dir(shard.path())?.collect::<Result<_, _>>()?;
            files.sort_by_key(|e| e.file_name());
            for file in files {
                let name = file.file_name().to_string_lossy().into_owned();
                if name.starts_with('.') {
                    continue;
                }
                report.checked += 1;
                let ok = ContentAddress::parse(&name).is_ok_and(|a| self.load(&a).is_ok());
                if !ok {
                    report.corrupt.push(file.path());
                }
            }
        }
        Ok(report)
    }
}
