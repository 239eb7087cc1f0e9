use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;

use ioe_core::ledger::{file, Chain};
use ioe_core::model::Guid;
use ioe_core::secure::{BlobStore, KeyPair};
use ioe_core::sim::scenario_file::{load_scenario, scenario_to_toml};
use ioe_core::sim::{random_scenario, run_scenario_with, tracker_keys, RandomScenarioSpec, SecureSink};

use crate::config::GlobalConfig;

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Run a scenario file and write the resulting ledger.
    Run {
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
        /// Overrides the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "OUT")]
        ledger: PathBuf,
        /// Blob store for sensitive values. Required when the scenario lists any.
        #[arg(long, value_name = "DIR")]
        blobs: Option<PathBuf>,
        /// Where to write the tracker key pairs used for encryption.
        #[arg(long, value_name = "OUT", requires = "blobs")]
        keys: Option<PathBuf>,
    },
    /// Write a random scenario file.
    Generate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        entities: usize,
        #[arg(long, default_value_t = 20)]
        trackers: usize,
        #[arg(long, default_value_t = 3600)]
        duration: u64,
        /// Give every entity a microphone reading and mark it sensitive.
        #[arg(long)]
        sensitive_mic: bool,
        #[arg(long, value_name = "OUT")]
        out: PathBuf,
    },
}

pub fn run(cmd: SimCommand, cfg: &GlobalConfig, out: &mut impl Write) -> Result<()> {
    match cmd {
        SimCommand::Run {
            scenario,
            seed,
            ledger,
            blobs,
            keys,
        } => {
            let s = load_scenario(&scenario, seed.or(cfg.seed))
                .with_context(|| format!("scenario {}", scenario.display()))?;
            if s.sensitive_keys.is_empty() && blobs.is_some() {
                eprintln!("warning: scenario has no sensitive keys, blob store unused");
            }
            let store = blobs.map(BlobStore::open).transpose()?;
            let pairs = tracker_keys(&s);
            let sink = store.as_ref().map(|store| SecureSink { store, keys: &pairs });
            let (chain, stats) = run_scenario_with(&s, Chain::new(cfg.ledger()), sink)?;
            file::save(&chain, &ledger).with_context(|| format!("writing {}", ledger.display()))?;
            if let Some(path) = keys {
                let guids: Vec<Guid> = s.trackers.iter().map(|t| t.guid).collect();
                write_keys(&path, &guids, &pairs)?;
            }
            writeln!(
                out,
                "ok {} registrations {} blocks {} duplicates {} dropped {} blobs",
                chain.registration_count(),
                chain.blocks().len(),
                stats.duplicates,
                stats.dropped,
                stats.blobs_written
            )?;
        }
        SimCommand::Generate {
            seed,
            entities,
            trackers,
            duration,
            sensitive_mic,
            out: path,
        } => {
            if entities == 0 || trackers == 0 || duration == 0 {
                bail!("entities, trackers and duration must be positive");
            }
            let spec = RandomScenarioSpec {
                seed,
                entities,
                trackers,
                duration_s: duration,
                tau_seconds: cfg.tau_seconds,
                sensitive_mic,
                ..Default::default()
            };
            let text = scenario_to_toml(&random_scenario(&spec))?;
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "ok {entities} entities {trackers} trackers {duration} s")?;
        }
    }
    Ok(())
}

/// One line per tracker: `<guid> <public key hex> <secret key hex>`.
fn write_keys(path: &Path, guids: &[Guid], keys: &[KeyPair]) -> Result<()> {
    let mut text = String::new();
    for (g, k) in guids.iter().zip(keys) {
        text.push_str(&format!(
            "{g} {} {}\n",
            hex::encode(k.public_bytes()),
            hex::encode(k.secret_bytes())
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_keys(path: &Path) -> Result<Vec<(Guid, KeyPair)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut keys = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [guid, public, secret] = fields[..] else {
            bail!("{}:{}: expected `<guid> <public hex> <secret hex>`", path.display(), n + 1);
        };
        let guid = Guid::parse(guid).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        let pair = KeyPair::from_secret_bytes(&hex::decode(secret)?)?;
        if hex::encode(pair.public_bytes()) != public.to_ascii_lowercase() {
            bail!("{}:{}: public key does not match the secret", path.display(), n + 1);
        }
        keys.push((guid, pair));
    }
    Ok(keys)
}
