use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};

use ioe_core::geo::LocalProjection;
use ioe_core::model::{GeoLocation, Guid, TraceLocationSet, TraceParams};
use ioe_core::trace::{
    direct_trace, interpolate_trace, spread_trace, LedgerIndex, SpreadMatrix, TraceAnnotation,
};

use crate::config::GlobalConfig;

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_parser = super::parse_guid_arg)]
    guid: Guid,
    #[arg(long, value_name = "FILE")]
    ledger: PathBuf,
    /// Also write a CSV file for plotting.
    #[arg(long, value_name = "FILE")]
    export: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// The entity's own registrations, in time order.
    Direct {
        #[command(flatten)]
        common: Common,
    },
    /// Direct trace plus locations vouched for by shared neighbors.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<usize>,
        #[arg(long, value_name = "M")]
        delta: Option<f64>,
    },
    /// Where the entity's neighbors were seen, counted per grid cell.
    Spread {
        #[command(flatten)]
        common: Common,
        /// Cell side in meters.
        #[arg(long, value_name = "M")]
        delta: Option<f64>,
        /// Grid anchor. Defaults to the first registration in the ledger.
        #[arg(long, value_name = "LAT,LON", value_parser = super::parse_origin)]
        origin: Option<GeoLocation>,
    },
}

fn index_for(common: &Common, cfg: &GlobalConfig) -> Result<LedgerIndex> {
    let chain = super::ledger::load(&common.ledger, cfg)?;
    let idx = LedgerIndex::from_chain(&chain);
    if !idx.knows(common.guid) {
        eprintln!("warning: {} does not appear in {}", common.guid, common.ledger.display());
    }
    Ok(idx)
}

pub fn run(cmd: TraceCommand, cfg: &GlobalConfig, out: &mut impl Write) -> Result<()> {
    match cmd {
        TraceCommand::Direct { common } => {
            let idx = index_for(&common, cfg)?;
            let trace = direct_trace(common.guid, &idx);
            emit_points(&common, &trace, &TraceAnnotation::new(), out)?;
        }
        TraceCommand::Interpolate {
            common,
            alpha,
            delta,
        } => {
            let params = TraceParams::new(
                alpha.unwrap_or(cfg.alpha),
                delta.unwrap_or(cfg.delta_meters),
                cfg.tau_seconds,
                TraceParams::default().grid_origin,
            )?;
            let idx = index_for(&common, cfg)?;
            let (trace, ann) = interpolate_trace(common.guid, &idx, &params)?;
            emit_points(&common, &trace, &ann, out)?;
        }
        TraceCommand::Spread {
            common,
            delta,
            origin,
        } => {
            let delta = delta.unwrap_or(cfg.delta_meters);
            let idx = index_for(&common, cfg)?;
            let origin = origin
                .or_else(|| idx.registrations().first().map(|r| r.location()))
                .unwrap_or(TraceParams::default().grid_origin);
            let m = spread_trace(common.guid, &idx, delta, origin)?;
            emit_spread(&common, &m, delta, origin, out)?;
        }
    }
    Ok(())
}

/// `<seconds> <lat> <lon> <provenance> <witness>`, where the witness is
/// `<neighbor>@<before>-<after>` (indices into the printed list) or `-`.
fn emit_points(
    common: &Common,
    trace: &TraceLocationSet,
    ann: &TraceAnnotation,
    out: &mut impl Write,
) -> Result<()> {
    let mut csv = String::from("time,lat,lon,provenance,witness\n");
    for (i, p) in trace.points().iter().enumerate() {
        let witness = match ann.get(&i) {
            Some(w) => format!("{}@{}-{}", w.neighbor, w.before, w.after),
            None => "-".to_string(),
        };
        let (lat, lon) = (p.location.latitude(), p.location.longitude());
        let (t, prov) = (p.time.seconds(), p.provenance.as_str());
        writeln!(out, "{t} {lat:.6} {lon:.6} {prov} {witness}")?;
        csv.push_str(&format!("{t},{lat:.6},{lon:.6},{prov},{witness}\n"));
    }
    export(common, csv)
}

/// Row lines `row <entity> <x>,<y>@<seconds> ...`, then the cell table as
/// `cell <x> <y> <count> <probability>`.
fn emit_spread(
    common: &Common,
    m: &SpreadMatrix,
    delta: f64,
    origin: GeoLocation,
    out: &mut impl Write,
) -> Result<()> {
    for row in &m.rows {
        let cells: Vec<String> = row
            .cells
            .iter()
            .map(|((x, y), t)| format!("{x},{y}@{}", t.seconds()))
            .collect();
        writeln!(out, "row {} {}", row.entity, cells.join(" "))?;
    }
    let projection = LocalProjection::new(origin);
    let mut csv = String::from("cell_x,cell_y,center_lat,center_lon,count,probability\n");
    for (&(x, y), count) in &m.cell_counts {
        let p = m.probabilities[&(x, y)];
        writeln!(out, "cell {x} {y} {count} {p:.6}")?;
        let center = projection.to_geo((x as f64 + 0.5) * delta, (y as f64 + 0.5) * delta);
        let (lat, lon) = center.map_or((f64::NAN, f64::NAN), |c| (c.latitude(), c.longitude()));
        csv.push_str(&format!("{x},{y},{lat:.6},{lon:.6},{count},{p:.6}\n"));
    }
    export(common, csv)
}

fn export(common: &Common, csv: String) -> Result<()> {
    if let Some(path) = &common.export {
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
