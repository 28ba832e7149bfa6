use nalgebra::{DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::PoseData;
use crate::contact::{ContactKind, ContactMode, SwitchEvent};
use crate::model::{BasePose, GeneralizedPosition};
use crate::qp::QpStatus;
use crate::retarget::Saturation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationData {
    pub base: PoseData,
    pub joints: Vec<f64>,
}

impl ConfigurationData {
    pub fn from_position(q: &GeneralizedPosition) -> Self {
        Self { base: PoseData::from_isometry(&q.base.isometry()), joints: q.joints.as_slice().to_vec() }
    }

    pub fn to_position(&self) -> GeneralizedPosition {
        let iso = self.base.to_isometry();
        GeneralizedPosition {
            base: BasePose { orientation: iso.rotation, position: iso.translation.vector },
            joints: DVector::from_column_slice(&self.joints),
        }
    }
}

/// Row-major 3×3 matrix.
pub fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

pub fn matrix_from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContactRecord {
    pub name: String,
    pub kind: ContactKind,
    pub mode: ContactMode,
    pub weight: f64,
    pub anchor: PoseData,
    /// Surface frame → world, row-major.
    pub surface: [[f64; 3]; 3],
    /// Desired wrench in the surface frame; empty while disabled.
    pub wrench: Vec<f64>,
    pub measured_wrench: Vec<f64>,
    /// `(|τy|/fz, |τx|/fz)`, plane contacts with positive normal force.
    pub cop: Option<[f64; 2]>,
    pub friction_ratio: Option<f64>,
    /// Share of the total normal force.
    pub normal_share: Option<f64>,
    /// Transition progress in `[0, 1]` while adding or removing.
    pub switch_progress: Option<f64>,
    pub max_normal_force: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectorRecord {
    pub name: String,
    pub commanded: Option<PoseData>,
    pub desired: PoseData,
    pub measured: PoseData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub contact: String,
    pub event: SwitchEvent,
    /// Ticks since the transition (or its reversal) started.
    pub ticks: u64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickStatus {
    Stepped,
    /// Emergency stop: no QP, state frozen.
    Stopped,
}

/// Everything logged for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub tick: u64,
    /// Virtual time, s.
    pub time: f64,
    pub status: TickStatus,
    pub qp_status: Option<QpStatus>,
    pub desired: ConfigurationData,
    pub measured: ConfigurationData,
    pub tau: Vec<f64>,
    pub contacts: Vec<ContactRecord>,
    pub effectors: Vec<EffectorRecord>,
    pub saturated: Vec<Saturation>,
    pub qp_iterations: usize,
    pub step_norm: f64,
    pub equilibrium_residual: f64,
    pub contact_residual: f64,
    pub tracking_residual: f64,
    /// Smallest inequality slack; absent when no QP ran.
    pub min_slack: Option<f64>,
    pub events: Vec<SwitchRecord>,
    /// Wall time of the tick's computation. Excluded from determinism checks.
    pub wall_ns: u64,
}

impl LogRecord {
    pub fn contact(&self, name: &str) -> Option<&ContactRecord> {
        self.contacts.iter().find(|c| c.name == name)
    }

    pub fn effector(&self, name: &str) -> Option<&EffectorRecord> {
        self.effectors.iter().find(|e| e.name == name)
    }
}

/// Contact metrics of a surface-frame wrench: CoP (planes) and friction ratio.
pub fn wrench_metrics(kind: ContactKind, wrench: &[f64]) -> (Option<[f64; 2]>, Option<f64>) {
    match kind {
        ContactKind::Plane => {
            let w: [f64; 6] = match wrench.try_into() {
                Ok(w) => w,
                Err(_) => return (None, None),
            };
            let cop = crate::contact::cop_of_wrench(&w).ok().map(|(x, y)| [x, y]);
            (cop, crate::contact::friction_ratio(&[w[3], w[4], w[5]]).ok())
        }
        ContactKind::Point => match <[f64; 3]>::try_from(wrench) {
            Ok(f) => (None, crate::contact::friction_ratio(&f).ok()),
            Err(_) => (None, None),
        },
    }
}
