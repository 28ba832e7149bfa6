use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Rejection;
use crate::contact::SwitchEvent;
use crate::runtime::{LogRecord, TickStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSummary {
    pub tick: u64,
    pub contact: String,
    pub event: SwitchEvent,
    pub ticks: u64,
    /// s
    pub duration: f64,
}

/// Step wall time, ms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTime {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub ticks: u64,
    pub stopped_ticks: u64,
    pub max_contact_residual: f64,
    pub max_equilibrium_residual: f64,
    pub max_tracking_residual: f64,
    pub final_tracking_residual: f64,
    pub max_qp_iterations: usize,
    /// Ticks during which each `label:owner` inequality was active.
    pub saturation_histogram: BTreeMap<String, u64>,
    /// Largest `|CoP|` per plane contact, `[x, y]`, m.
    pub max_cop: BTreeMap<String, [f64; 2]>,
    pub max_friction_ratio: BTreeMap<String, f64>,
    pub switches: Vec<SwitchSummary>,
    pub step_time_ms: StepTime,
    pub rejected: Vec<Rejection>,
    pub halted: Option<String>,
}

/// Accumulates a [`Summary`] one record at a time.
#[derive(Debug, Clone, Default)]
pub struct SummaryBuilder {
    ticks: u64,
    stopped: u64,
    contact: f64,
    equilibrium: f64,
    tracking: f64,
    final_tracking: f64,
    iterations: usize,
    histogram: BTreeMap<String, u64>,
    cop: BTreeMap<String, [f64; 2]>,
    friction: BTreeMap<String, f64>,
    switches: Vec<SwitchSummary>,
    wall_sum: f64,
    wall_max: f64,
}

impl SummaryBuilder {
    pub fn push(&mut self, r: &LogRecord) {
        self.ticks += 1;
        if r.status == TickStatus::Stopped {
            self.stopped += 1;
        }
        self.contact = self.contact.max(r.contact_residual);
        self.equilibrium = self.equilibrium.max(r.equilibrium_residual);
        self.tracking = self.tracking.max(r.tracking_residual);
        self.final_tracking = r.tracking_residual;
        self.iterations = self.iterations.max(r.qp_iterations);
        let mut seen: Vec<String> = r.saturated.iter().map(|s| format!("{}:{}", label_name(s.label), s.owner)).collect();
        seen.sort();
        seen.dedup();
        for key in seen {
            *self.histogram.entry(key).or_default() += 1;
        }
        for c in &r.contacts {
            if let Some([x, y]) = c.cop {
                let e = self.cop.entry(c.name.clone()).or_insert([0.0; 2]);
                e[0] = e[0].max(x.abs());
                e[1] = e[1].max(y.abs());
            }
            if let Some(eta) = c.friction_ratio {
                let e = self.friction.entry(c.name.clone()).or_insert(0.0);
                *e = e.max(eta);
            }
        }
        for ev in &r.events {
            self.switches.push(SwitchSummary {
                tick: r.tick,
                contact: ev.contact.clone(),
                event: ev.event,
                ticks: ev.ticks,
                duration: ev.duration,
            });
        }
        let ms = r.wall_ns as f64 * 1e-6;
        self.wall_sum += ms;
        self.wall_max = self.wall_max.max(ms);
    }

    pub fn finish(self, rejected: Vec<Rejection>, halted: Option<String>) -> Summary {
        Summary {
            ticks: self.ticks,
            stopped_ticks: self.stopped,
            max_contact_residual: self.contact,
            max_equilibrium_residual: self.equilibrium,
            max_tracking_residual: self.tracking,
            final_tracking_residual: self.final_tracking,
            max_qp_iterations: self.iterations,
            saturation_histogram: self.histogram,
            max_cop: self.cop,
            max_friction_ratio: self.friction,
            switches: self.switches,
            step_time_ms: StepTime {
                mean: if self.ticks > 0 { self.wall_sum / self.ticks as f64 } else { 0.0 },
                max: self.wall_max,
            },
            rejected,
            halted,
        }
    }
}

fn label_name(label: crate::retarget::ConstraintLabel) -> String {
    serde_json::to_value(label).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

impl Summary {
    pub fn from_records(records: &[LogRecord]) -> Self {
        let mut b = SummaryBuilder::default();
        records.iter().for_each(|r| b.push(r));
        b.finish(Vec::new(), None)
    }

    /// Saturation count of `label` (snake_case name) on `owner`.
    pub fn saturations(&self, label: &str, owner: &str) -> u64 {
        self.saturation_histogram.get(&format!("{label}:{owner}")).copied().unwrap_or(0)
    }
}
