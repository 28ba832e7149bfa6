//! Flat CSV extracts of the logged contact and effector quantities.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::contact::ContactMode;
use crate::runtime::{LogRecord, PoseData};

/// Value of the `format_version` column.
pub const CSV_FORMAT_VERSION: u32 = 1;

/// One contact at one tick. Wrench components are in the surface frame and
/// empty while the contact is disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRow {
    pub format_version: u32,
    pub tick: u64,
    pub time: f64,
    pub contact: String,
    pub mode: ContactMode,
    pub weight: f64,
    pub tau_x: Option<f64>,
    pub tau_y: Option<f64>,
    pub tau_z: Option<f64>,
    pub f_x: Option<f64>,
    pub f_y: Option<f64>,
    pub f_z: Option<f64>,
    pub cop_x: Option<f64>,
    pub cop_y: Option<f64>,
    pub friction_ratio: Option<f64>,
    pub normal_share: Option<f64>,
    pub switch_progress: Option<f64>,
    pub max_normal_force: Option<f64>,
}

/// One end effector at one tick: commanded, desired and measured poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectorRow {
    pub format_version: u32,
    pub tick: u64,
    pub time: f64,
    pub effector: String,
    pub commanded_x: Option<f64>,
    pub commanded_y: Option<f64>,
    pub commanded_z: Option<f64>,
    pub desired_x: f64,
    pub desired_y: f64,
    pub desired_z: f64,
    pub desired_qw: f64,
    pub desired_qx: f64,
    pub desired_qy: f64,
    pub desired_qz: f64,
    pub measured_x: f64,
    pub measured_y: f64,
    pub measured_z: f64,
}

pub fn contact_rows(record: &LogRecord) -> Vec<ContactRow> {
    record
        .contacts
        .iter()
        .map(|c| {
            // Pad point forces into the (τ, f) layout.
            let padded: Vec<Option<f64>> = match c.wrench.len() {
                6 => c.wrench.iter().copied().map(Some).collect(),
                3 => [None, None, None].into_iter().chain(c.wrench.iter().copied().map(Some)).collect(),
                _ => vec![None; 6],
            };
            ContactRow {
                format_version: CSV_FORMAT_VERSION,
                tick: record.tick,
                time: record.time,
                contact: c.name.clone(),
                mode: c.mode,
                weight: c.weight,
                tau_x: padded[0],
                tau_y: padded[1],
                tau_z: padded[2],
                f_x: padded[3],
                f_y: padded[4],
                f_z: padded[5],
                cop_x: c.cop.map(|p| p[0]),
                cop_y: c.cop.map(|p| p[1]),
                friction_ratio: c.friction_ratio,
                normal_share: c.normal_share,
                switch_progress: c.switch_progress,
                max_normal_force: c.max_normal_force,
            }
        })
        .collect()
}

pub fn effector_rows(record: &LogRecord) -> Vec<EffectorRow> {
    record
        .effectors
        .iter()
        .map(|e| {
            let commanded = e.commanded.map(|p: PoseData| p.position);
            EffectorRow {
                format_version: CSV_FORMAT_VERSION,
                tick: record.tick,
                time: record.time,
                effector: e.name.clone(),
                commanded_x: commanded.map(|p| p[0]),
                commanded_y: commanded.map(|p| p[1]),
                commanded_z: commanded.map(|p| p[2]),
                desired_x: e.desired.position[0],
                desired_y: e.desired.position[1],
                desired_z: e.desired.position[2],
                desired_qw: e.desired.orientation[0],
                desired_qx: e.desired.orientation[1],
                desired_qy: e.desired.orientation[2],
                desired_qz: e.desired.orientation[3],
                measured_x: e.measured.position[0],
                measured_y: e.measured.position[1],
                measured_z: e.measured.position[2],
            }
        })
        .collect()
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

fn check_version(versions: impl Iterator<Item = u32>) -> Result<(), IoError> {
    for v in versions {
        if v != CSV_FORMAT_VERSION {
            return Err(IoError::Schema(format!("csv format_version {v}, expected {CSV_FORMAT_VERSION}")));
        }
    }
    Ok(())
}

pub fn write_contacts_csv<W: Write>(out: W, records: &[LogRecord]) -> Result<(), IoError> {
    write_rows(out, records.iter().flat_map(contact_rows))
}

pub fn write_effectors_csv<W: Write>(out: W, records: &[LogRecord]) -> Result<(), IoError> {
    write_rows(out, records.iter().flat_map(effector_rows))
}

pub fn read_contacts_csv<R: Read>(input: R) -> Result<Vec<ContactRow>, IoError> {
    let rows: Vec<ContactRow> = read_rows(input)?;
    check_version(rows.iter().map(|r| r.format_version))?;
    Ok(rows)
}

pub fn read_effectors_csv<R: Read>(input: R) -> Result<Vec<EffectorRow>, IoError> {
    let rows: Vec<EffectorRow> = read_rows(input)?;
    check_version(rows.iter().map(|r| r.format_version))?;
    Ok(rows)
}
