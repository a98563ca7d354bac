use std::fs::File;
use std::path::{Path, PathBuf};

use crate::dataset::fmt_f64;
use crate::error::{Error, Result};
use crate::nkmeans::{NetworkHeads, RoundMetrics};

pub const TRACE_HEADER: [&str; 7] = [
    "round",
    "cost_J",
    "cost_Q",
    "descent_slack",
    "innovation_norm",
    "consensus_dev",
    "partition_changed",
];

pub const TRAJECTORY_HEADER: [&str; 5] = ["round", "agent", "cluster", "coord_index", "value"];

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_trace_csv(path: &Path, trace: &[RoundMetrics]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for m in trace {
        w.write_record([
            m.round.to_string(),
            fmt_f64(m.cost_j),
            fmt_f64(m.cost_q),
            fmt_f64(m.descent_slack),
            fmt_f64(m.innovation_norm),
            fmt_f64(m.consensus_dev),
            u8::from(m.partition_changed).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Streams per-round head coordinates to CSV.
pub struct TrajectoryWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
    every: usize,
    last_written: Option<usize>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, every: usize) -> Result<Self> {
        let mut writer = csv_writer(path)?;
        writer.write_record(TRAJECTORY_HEADER)?;
        Ok(TrajectoryWriter {
            path: path.to_path_buf(),
            writer,
            every: every.max(1),
            last_written: None,
        })
    }

    /// Writes the state if `round` falls on the sampling grid.
    pub fn observe(&mut self, round: usize, x: &NetworkHeads) -> Result<()> {
        if round.is_multiple_of(self.every) {
            self.write(round, x)?;
        }
        Ok(())
    }

    pub fn write(&mut self, round: usize, x: &NetworkHeads) -> Result<()> {
        if self.last_written == Some(round) {
            return Ok(());
        }
        for (m, xm) in x.agents().iter().enumerate() {
            for (k, h) in xm.heads().iter().enumerate() {
                for (i, v) in h.iter().enumerate() {
                    self.writer.write_record([
                        round.to_string(),
                        m.to_string(),
                        k.to_string(),
                        i.to_string(),
                        fmt_f64(*v),
                    ])?;
                }
            }
        }
        self.last_written = Some(round);
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}
