use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::retarget::WeightPatch;

/// Position (m) and unit quaternion `[w, x, y, z]`, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseData {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl PoseData {
    pub fn from_isometry(pose: &Isometry3<f64>) -> Self {
        let t = pose.translation.vector;
        let q = pose.rotation.quaternion();
        Self { position: [t.x, t.y, t.z], orientation: [q.w, q.i, q.j, q.k] }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [w, x, y, z] = self.orientation;
        let [px, py, pz] = self.position;
        Isometry3::from_parts(
            Translation3::new(px, py, pz),
            UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.orientation.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchAction {
    Add,
    Remove,
}

/// Operator input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Command {
    /// Absolute pose target. Orientation is tracked only when given.
    SetEffectorTarget {
        name: String,
        position: [f64; 3],
        #[serde(default)]
        orientation: Option<[f64; 4]>,
    },
    /// Shift the current target (or the current pose if none) by a world
    /// translation and a world rotation vector.
    JogEffector {
        name: String,
        linear: [f64; 3],
        #[serde(default)]
        angular: [f64; 3],
    },
    /// Desired normal force on a contact. `weight` replaces the regularization
    /// weight of the normal component while the contact is enabled; `None`
    /// keeps the switching weight.
    SetForceTarget {
        name: String,
        normal_force: f64,
        #[serde(default)]
        weight: Option<f64>,
    },
    ClearForceTarget {
        name: String,
    },
    TriggerSwitch {
        name: String,
        action: SwitchAction,
    },
    EmergencyStop,
    /// Leave emergency stop or a halted state, holding the current configuration.
    Resume,
    SetWeights {
        weights: WeightPatch,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    /// Strictly increasing per session.
    pub seq: u64,
    /// Sender time in seconds; informational.
    #[serde(default)]
    pub timestamp: f64,
    #[serde(flatten)]
    pub command: Command,
}

impl CommandMessage {
    pub fn new(seq: u64, command: Command) -> Self {
        Self { seq, timestamp: 0.0, command }
    }
}
