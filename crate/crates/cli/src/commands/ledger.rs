use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;

use ioe_core::ledger::{file, Chain, HASH_NAME};
use ioe_core::model::{Guid, Registration, Resolution};

use crate::config::GlobalConfig;

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Load and fully revalidate a ledger file.
    Verify { file: PathBuf },
    /// Summary counts for a ledger file.
    Stats { file: PathBuf },
    /// Every registration of one entity, in ledger order.
    Query {
        #[arg(long, value_parser = super::parse_guid_arg)]
        guid: Guid,
        file: PathBuf,
    },
}

pub fn load(path: &Path, cfg: &GlobalConfig) -> Result<Chain> {
    file::load(path, cfg.ledger()).with_context(|| format!("ledger {}", path.display()))
}

pub fn run(cmd: LedgerCommand, cfg: &GlobalConfig, out: &mut impl Write) -> Result<()> {
    match cmd {
        LedgerCommand::Verify { file } => {
            let chain = load(&file, cfg)?;
            writeln!(out, "ok {} blocks", chain.blocks().len())?;
        }
        LedgerCommand::Stats { file } => {
            let chain = load(&file, cfg)?;
            let regs: Vec<Registration> = chain.sealed_registrations().collect();
            let entities: BTreeSet<Guid> = regs.iter().map(|r| r.entity()).collect();
            writeln!(out, "hash {HASH_NAME}")?;
            writeln!(out, "difficulty {}", chain.config().difficulty_bits)?;
            writeln!(out, "blocks {}", chain.blocks().len())?;
            writeln!(out, "registrations {}", regs.len())?;
            writeln!(out, "entities {}", entities.len())?;
            if let (Some(first), Some(last)) = (
                regs.iter().map(|r| r.time()).min(),
                regs.iter().map(|r| r.time()).max(),
            ) {
                writeln!(out, "first {} {first}", first.seconds())?;
                writeln!(out, "last {} {last}", last.seconds())?;
            }
            writeln!(out, "tip {}", hex::encode(chain.tip_hash()))?;
        }
        LedgerCommand::Query { guid, file } => {
            let chain = load(&file, cfg)?;
            let regs = chain.entity_registrations(guid);
            if regs.is_empty() {
                eprintln!("warning: {guid} has no registrations in {}", file.display());
            }
            for r in regs {
                writeln!(out, "{}", registration_line(&r))?;
            }
        }
    }
    Ok(())
}

/// `<seconds> <lat> <lon> <high|low> <neighbors, comma separated or ->`
fn registration_line(r: &Registration) -> String {
    let neighbors = if r.neighbors().is_empty() {
        "-".to_string()
    } else {
        r.neighbors().iter().map(Guid::to_string).collect::<Vec<_>>().join(",")
    };
    let resolution = match r.resolution() {
        Resolution::High => "high",
        Resolution::Low => "low",
    };
    format!(
        "{} {:.6} {:.6} {resolution} {neighbors}",
        r.time().seconds(),
        r.location().latitude(),
        r.location().longitude()
    )
}
