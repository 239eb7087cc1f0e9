use std::io::Write;

use anyhow::{bail, Result};
use clap::Subcommand;

use ioe_core::guid::{is_ioe_entity, new_guid, parse_guid, GuidPolicy};

use crate::config::{parse_preamble, GlobalConfig};

#[derive(Debug, Subcommand)]
pub enum GuidCommand {
    /// Print a fresh entity GUID.
    New {
        /// Preamble as four hex digits. Defaults to the configured one.
        #[arg(long, value_parser = parse_preamble)]
        preamble: Option<u16>,
        /// Make the output reproducible.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exit 0 if TEXT is a well-formed GUID carrying the entity preamble.
    Check {
        text: String,
        #[arg(long, value_parser = parse_preamble)]
        preamble: Option<u16>,
    },
}

pub fn run(cmd: GuidCommand, cfg: &GlobalConfig, out: &mut impl Write) -> Result<()> {
    match cmd {
        GuidCommand::New { preamble, seed } => {
            let mut policy = GuidPolicy::with_preamble(preamble.unwrap_or(cfg.preamble()));
            if let Some(seed) = seed.or(cfg.seed) {
                policy = policy.seeded(seed);
            }
            let g = new_guid(&policy, &mut policy.rng());
            writeln!(out, "{g}")?;
        }
        GuidCommand::Check { text, preamble } => {
            let policy = GuidPolicy::with_preamble(preamble.unwrap_or(cfg.preamble()));
            let g = parse_guid(text.trim())?;
            if !is_ioe_entity(g, &policy) {
                bail!("{g} does not carry preamble {:04x}", policy.ioe_preamble);
            }
            writeln!(out, "ok {g}")?;
        }
    }
    Ok(())
}
