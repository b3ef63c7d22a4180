//! Trial-log CSV format.
//!
//! One file per trial with a mandatory header row:
//! `time,agent_id,x,y,heading,u1,u2,collided,dimple,ergodic_metric,heterogeneity`.
//! Floats are written in shortest round-trip form, so parsing a file
//! recovers the logged values bit-exactly; the `heterogeneity` field is
//! empty for single-agent trials. Dimple positions are recovered from the
//! flagged rows, which lets metrics be recomputed from the log alone.

use crate::spectral::{SpectralBasis, TrajectoryStats};
use crate::swarm::{DimpleEvent, StepRow, TrialRecord};
use crate::{Error, Result};
use std::path::Path;

pub const TRIAL_HEADER: [&str; 11] = [
    "time",
    "agent_id",
    "x",
    "y",
    "heading",
    "u1",
    "u2",
    "collided",
    "dimple",
    "ergodic_metric",
    "heterogeneity",
];

/// Writes a trial log. Deterministic: equal records give equal bytes.
pub fn write_trial_csv(record: &TrialRecord, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(TRIAL_HEADER)?;
    for row in &record.rows {
        w.write_record([
            row.time.to_string(),
            row.agent_id.to_string(),
            row.position[0].to_string(),
            row.position[1].to_string(),
            row.heading.to_string(),
            row.control[0].to_string(),
            row.control[1].to_string(),
            u8::from(row.collided).to_string(),
            row.dimples.to_string(),
            row.ergodic_metric.to_string(),
            row.heterogeneity.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
            }
            _ => Error::Parse {
                path: String::new(),
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            },
        }
    }
}

/// Parses a trial log back into a [`TrialRecord`].
///
/// The step duration and team size are inferred from the rows; dimple
/// events are reconstructed at the logged positions. Fields that never
/// reach the CSV (coefficient snapshots, final statistics, seed) come
/// back empty.
pub fn read_trial_csv(path: impl AsRef<Path>) -> Result<TrialRecord> {
    let path_str = path.as_ref().display().to_string();
    let err_at = |line: usize, msg: String| Error::Parse {
        path: path_str.clone(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path.as_ref())?;
    {
        let headers = reader.headers()?;
        if headers.iter().ne(TRIAL_HEADER.iter().copied()) {
            return Err(err_at(1, format!("unexpected header {headers:?}")));
        }
    }
    let mut rows: Vec<StepRow> = Vec::new();
    let mut dimples: Vec<DimpleEvent> = Vec::new();
    for entry in reader.records() {
        let rec = entry?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != TRIAL_HEADER.len() {
            return Err(err_at(line, format!("expected 11 fields, got {}", rec.len())));
        }
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let parse_f64 = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| err_at(line, format!("invalid {} '{}'", TRIAL_HEADER[i], field(i))))
        };
        let time = parse_f64(0)?;
        let agent_id: usize = field(1)
            .parse()
            .map_err(|_| err_at(line, format!("invalid agent_id '{}'", field(1))))?;
        let x = parse_f64(2)?;
        let y = parse_f64(3)?;
        let heading = parse_f64(4)?;
        let u1 = parse_f64(5)?;
        let u2 = parse_f64(6)?;
        let collided = match field(7) {
            "0" => false,
            "1" => true,
            other => return Err(err_at(line, format!("invalid collided flag '{other}'"))),
        };
        let dimple_count: u32 = field(8)
            .parse()
            .map_err(|_| err_at(line, format!("invalid dimple count '{}'", field(8))))?;
        let ergodic_metric = parse_f64(9)?;
        let heterogeneity = if field(10).is_empty() {
            None
        } else {
            Some(parse_f64(10)?)
        };
        for _ in 0..dimple_count {
            dimples.push(DimpleEvent {
                position: [x, y],
                time,
                agent_id,
            });
        }
        rows.push(StepRow {
            time,
            agent_id,
            position: [x, y],
            heading,
            control: [u1, u2],
            collided,
            dimples: dimple_count,
            ergodic_metric,
            heterogeneity,
        });
    }
    let dt = rows.first().map(|r| r.time).unwrap_or(0.0);
    let first_time = rows.first().map(|r| r.time);
    let agents = rows
        .iter()
        .take_while(|r| Some(r.time) == first_time)
        .count();
    Ok(TrialRecord {
        seed: 0,
        dt,
        agents: agents.max(1),
        rows,
        dimples,
        collisions: Vec::new(),
        coeff_snapshots: Vec::new(),
        final_stats: Vec::new(),
    })
}

/// Re-accumulates per-agent trajectory statistics from the logged
/// positions, independent of any metric columns in the file.
pub fn replay_stats(record: &TrialRecord, basis: &SpectralBasis) -> Result<Vec<TrajectoryStats>> {
    let mut stats = vec![TrajectoryStats::new(basis); record.agents];
    for row in &record.rows {
        if row.agent_id >= stats.len() {
            return Err(Error::Config(format!(
                "agent_id {} out of range for {} agents",
                row.agent_id, record.agents
            )));
        }
        stats[row.agent_id].accumulate(basis, row.position, record.dt)?;
    }
    Ok(stats)
}
