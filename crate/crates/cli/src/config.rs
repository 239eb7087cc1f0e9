use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ioe_core::guid::DEFAULT_PREAMBLE;
use ioe_core::ledger::{LedgerConfig, HASH_NAME, MAX_DIFFICULTY_BITS};
use ioe_core::model::TraceParams;
use ioe_core::secure::SCHEME_ID;

pub const ENV_VAR: &str = "IOE_CONFIG";

/// Settings shared by every subcommand. Missing fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub difficulty_bits: u8,
    pub max_block_size: usize,
    /// Four hex digits.
    pub ioe_preamble: String,
    pub tau_seconds: u64,
    pub alpha: usize,
    pub delta_meters: f64,
    pub hash: String,
    pub scheme: String,
    pub seed: Option<u64>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            difficulty_bits: LedgerConfig::DEFAULT_DIFFICULTY_BITS,
            max_block_size: LedgerConfig::DEFAULT_MAX_BLOCK_SIZE,
            ioe_preamble: format!("{DEFAULT_PREAMBLE:04x}"),
            tau_seconds: TraceParams::DEFAULT_TAU_S,
            alpha: TraceParams::DEFAULT_ALPHA,
            delta_meters: TraceParams::DEFAULT_DELTA_M,
            hash: HASH_NAME.to_string(),
            scheme: SCHEME_ID.to_string(),
            seed: None,
        }
    }
}

pub fn parse_preamble(text: &str) -> Result<u16, String> {
    let t = text.trim_start_matches("0x").trim_start_matches("0X");
    if t.len() != 4 {
        return Err(format!("expected 4 hex digits, got {text:?}"));
    }
    u16::from_str_radix(t, 16).map_err(|_| format!("expected 4 hex digits, got {text:?}"))
}

impl GlobalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GlobalConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// `--config` wins over the environment; with neither, the defaults apply.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path: Option<PathBuf> = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(ENV_VAR).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        match path {
            None => Ok(GlobalConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("config {}", p.display()))
            }
        }
    }

    fn check(&self) -> Result<()> {
        if self.hash != HASH_NAME {
            bail!("unsupported hash {:?}, only {HASH_NAME} is available", self.hash);
        }
        if self.scheme != SCHEME_ID {
            bail!("unsupported scheme {:?}, only {SCHEME_ID} is available", self.scheme);
        }
        if self.difficulty_bits > MAX_DIFFICULTY_BITS {
            bail!("difficulty_bits {} exceeds {MAX_DIFFICULTY_BITS}", self.difficulty_bits);
        }
        if self.max_block_size == 0 {
            bail!("max_block_size must be positive");
        }
        if self.alpha == 0 {
            bail!("alpha must be at least 1");
        }
        if !(self.delta_meters.is_finite() && self.delta_meters > 0.0) {
            bail!("delta_meters must be positive, got {}", self.delta_meters);
        }
        parse_preamble(&self.ioe_preamble).map_err(anyhow::Error::msg)?;
        Ok(())
    }

    pub fn preamble(&self) -> u16 {
        parse_preamble(&self.ioe_preamble).expect("checked on load")
    }

    pub fn ledger(&self) -> LedgerConfig {
        LedgerConfig {
            difficulty_bits: self.difficulty_bits,
            max_block_size: self.max_block_size,
        }
    }
}
