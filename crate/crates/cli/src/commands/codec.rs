use std::io::Write;

use anyhow::Result;
use clap::Subcommand;

#[derive(Debug, Subcommand)]
pub enum CodecCommand {
    /// Decode a registration or entity packet given as hex.
    Dump {
        hex: String,
    },
}

pub fn run(cmd: CodecCommand, out: &mut impl Write) -> Result<()> {
    match cmd {
        CodecCommand::Dump { hex } => {
            let bytes = super::parse_hex(&hex).map_err(anyhow::Error::msg)?;
            write!(out, "{}", ioe_core::codec::dump(&bytes)?)?;
        }
    }
    Ok(())
}
