//! Live session loop: command ingestion, measured-state feedback, tracking stubs and logging.

mod clock;
mod command;
mod probe;
mod record;
mod session;
mod tracking;

pub use clock::{Clock, VirtualClock, WallClock};
pub use command::{Command, CommandMessage, PoseData, SwitchAction};
pub use probe::max_feasible_normal_force;
pub use record::{
    matrix_from_rows, matrix_rows, wrench_metrics, ConfigurationData, ContactRecord, EffectorRecord, LogRecord,
    SwitchRecord, TickStatus,
};
pub use session::{CommandError, Session, SessionConfig, SessionSetup};
pub use tracking::{Disturbance, MeasuredState, Tracker, TrackingConfig, TrackingMode};

use nalgebra::Vector3;
use thiserror::Error;

use crate::contact::ContactError;
use crate::model::{GeneralizedPosition, Kinematics, ModelError, RobotModel};
use crate::retarget::RetargetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error(transparent)]
    Retarget(#[from] RetargetError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("force probe: {0}")]
    Probe(String),
    #[error("session halted: {0}")]
    Halted(String),
    #[error("setup: {0}")]
    Setup(String),
}

/// Configuration with the named joints set (others at their neutral value)
/// and the base raised so the lowest end effector touches `z = 0`.
pub fn stance(model: &RobotModel, joints: &[(&str, f64)]) -> GeneralizedPosition {
    let mut q = model.neutral();
    for (name, value) in joints {
        if let Some(d) = model.dof_index(name) {
            q.joints[d] = *value;
        }
    }
    let kin = Kinematics::new(model, &q);
    let lowest = (0..model.end_effectors.len())
        .map(|i| kin.effector_pose(i).translation.vector.z)
        .fold(f64::INFINITY, f64::min);
    if lowest.is_finite() {
        q.base.position -= Vector3::new(0.0, 0.0, lowest);
    }
    q
}
