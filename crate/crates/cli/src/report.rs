//! Report envelope and output sinks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::args::Format;
use crate::config::RunConfig;
use crate::error::Result;

/// A command result that can be rendered as JSON or as a CSV table.
pub trait Output: Serialize {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()>;
    /// Remove wall-clock fields so reruns compare byte for byte.
    fn strip_timing(&mut self);
    /// False when the run should exit with status 1.
    fn passed(&self) -> bool {
        true
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
    result: &'a T,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit<T: Output>(
    config: &RunConfig,
    result: &mut T,
    wall_seconds: f64,
    with_timing: bool,
    path: Option<&Path>,
) -> Result<()> {
    if !with_timing {
        result.strip_timing();
    }
    let mut out = sink(path)?;
    match config.format {
        Format::Csv => result.write_csv(&mut out)?,
        Format::Json => {
            let envelope = Envelope {
                command: config.command,
                version: env!("CARGO_PKG_VERSION"),
                seed: config.seed,
                config,
                timestamp: with_timing.then(unix_seconds),
                wall_seconds: with_timing.then_some(wall_seconds),
                result: &*result,
            };
            serde_json::to_writer_pretty(&mut out, &envelope)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
