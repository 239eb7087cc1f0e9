use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Subcommand;

use ioe_core::secure::{decrypt_payload, key_fingerprint, BlobStore, ContentAddress};

#[derive(Debug, Subcommand)]
pub enum BlobCommand {
    /// Load a blob, check its digest and describe it. With --keys, decrypt it.
    Get {
        address: String,
        #[arg(long, value_name = "DIR")]
        store: PathBuf,
        /// Key file written by `sim run --keys`.
        #[arg(long, value_name = "FILE")]
        keys: Option<PathBuf>,
    },
    /// Recheck every blob in a store.
    Verify { store: PathBuf },
}

pub fn run(cmd: BlobCommand, out: &mut impl Write) -> Result<()> {
    match cmd {
        BlobCommand::Get { address, store, keys } => {
            let address = ContentAddress::parse(address.trim())?;
            if !store.is_dir() {
                bail!("no blob store at {}", store.display());
            }
            let env = BlobStore::open(&store)?.load(&address)?;
            writeln!(out, "address {address}")?;
            writeln!(out, "scheme {}", env.scheme_id)?;
            writeln!(out, "recipient {}", hex::encode(env.recipient_fingerprint))?;
            writeln!(out, "ciphertext {} bytes", env.ciphertext.len())?;
            if let Some(path) = keys {
                let pairs = super::sim::read_keys(&path)?;
                let Some((owner, pair)) = pairs
                    .iter()
                    .find(|(_, k)| key_fingerprint(&k.public_bytes()) == env.recipient_fingerprint)
                else {
                    bail!("no key in {} matches the recipient", path.display());
                };
                let payload = decrypt_payload(&env, pair)?;
                writeln!(out, "owner {owner}")?;
                for (k, v) in payload.entries() {
                    writeln!(out, "entry {k} {}", super::show_value(v))?;
                }
            }
        }
        BlobCommand::Verify { store } => {
            if !store.is_dir() {
                bail!("no blob store at {}", store.display());
            }
            let report = BlobStore::open(&store)?.verify()?;
            for p in &report.corrupt {
                writeln!(out, "corrupt {}", p.display())?;
            }
            if !report.corrupt.is_empty() {
                bail!("{} of {} blobs failed verification", report.corrupt.len(), report.checked);
            }
            writeln!(out, "ok {} blobs", report.checked)?;
        }
    }
    Ok(())
}
