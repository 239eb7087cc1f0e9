use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use ioe_core::model::{GeoLocation, Guid};

use crate::config::GlobalConfig;

mod blob;
mod codec;
mod guid;
mod ledger;
mod sim;
mod trace;

#[derive(Debug, Parser)]
#[command(name = "ioe", version, about = "Entity registration ledger and tracing toolkit")]
pub struct Cli {
    /// Config file (TOML). Falls back to $IOE_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or check entity GUIDs.
    #[command(subcommand)]
    Guid(guid::GuidCommand),
    /// Generate and run simulation scenarios.
    #[command(subcommand)]
    Sim(sim::SimCommand),
    /// Inspect ledger files.
    #[command(subcommand)]
    Ledger(ledger::LedgerCommand),
    /// Reconstruct an entity's movements from a ledger.
    #[command(subcommand)]
    Trace(trace::TraceCommand),
    /// Read and check the encrypted blob store.
    #[command(subcommand)]
    Blob(blob::BlobCommand),
    /// Decode wire packets.
    #[command(subcommand)]
    Codec(codec::CodecCommand),
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = GlobalConfig::load(cli.config.as_deref())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Guid(c) => guid::run(c, &cfg, &mut out)?,
        Command::Sim(c) => sim::run(c, &cfg, &mut out)?,
        Command::Ledger(c) => ledger::run(c, &cfg, &mut out)?,
        Command::Trace(c) => trace::run(c, &cfg, &mut out)?,
        Command::Blob(c) => blob::run(c, &mut out)?,
        Command::Codec(c) => codec::run(c, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn parse_guid_arg(text: &str) -> Result<Guid, String> {
    Guid::parse(text).map_err(|e| e.to_string())
}

fn parse_origin(text: &str) -> Result<GeoLocation, String> {
    let (lat, lon) = text
        .split_once(',')
        .ok_or_else(|| format!("expected LAT,LON, got {text:?}"))?;
    let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude {lat:?}"))?;
    let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude {lon:?}"))?;
    GeoLocation::new(lat, lon).map_err(|e| e.to_string())
}

fn parse_hex(text: &str) -> Result<Vec<u8>, String> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    hex::decode(cleaned).map_err(|e| format!("bad hex: {e}"))
}

/// Raw bytes as text when they are printable UTF-8, hex otherwise.
fn show_value(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) if !s.is_empty() && s.chars().all(|c| !c.is_control() && !c.is_whitespace()) => {
            s.to_string()
        }
        _ => format!("hex:{}", hex::encode(bytes)),
    }
}
