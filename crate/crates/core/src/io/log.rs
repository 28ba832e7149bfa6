use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::retarget::WeightSet;
use crate::runtime::{LogRecord, TrackingConfig};

pub const LOG_FORMAT: &str = "retarget-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    /// Bundled model name or the URDF path the run used.
    pub model: String,
    pub rate: f64,
    pub weights: WeightSet,
    pub tracking: TrackingConfig,
    pub seed: u64,
}

impl LogHeader {
    pub fn new(model: &str, rate: f64, weights: &WeightSet, tracking: &TrackingConfig, seed: u64) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            model: model.into(),
            rate,
            weights: weights.clone(),
            tracking: tracking.clone(),
            seed,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

/// Appends one JSON line per record after a header line.
pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, header: &LogHeader) -> Result<Self, IoError> {
        serde_json::to_writer(&mut out, &HeaderLine { header: header.clone() })
            .map_err(|e| IoError::Schema(e.to_string()))?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), IoError> {
        serde_json::to_writer(&mut self.out, record).map_err(|e| IoError::Schema(e.to_string()))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn read_log<R: BufRead>(input: R) -> Result<(LogHeader, Vec<LogRecord>), IoError> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| IoError::Schema("empty log".into()))?;
    let header = serde_json::from_str::<HeaderLine>(&first?)
        .map_err(|e| IoError::Schema(format!("header: {e}")))?
        .header;
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(IoError::Schema(format!(
            "expected {LOG_FORMAT} v{LOG_VERSION}, found {} v{}",
            header.format, header.version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line)
            .map_err(|e| IoError::Parse { what: "log", line: i + 1, message: e.to_string() })?;
        records.push(record);
    }
    Ok((header, records))
}
