//! Stand-ins for the whole-body controller that executes the desired state.

use nalgebra::{DVector, Isometry3, Translation3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{GeneralizedPosition, RobotModel};
use crate::retarget::RetargetState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TrackingMode {
    /// Measured state equals the desired state.
    Perfect,
    /// Each joint follows its desired value through `θ̈ = k(θd − θ) − c θ̇`.
    SpringDamper { stiffness: f64, damping: f64 },
}

impl TrackingMode {
    /// Critically damped at 20 rad/s.
    pub fn spring_damper() -> Self {
        TrackingMode::SpringDamper { stiffness: 400.0, damping: 40.0 }
    }
}

/// Scheduled perturbation of the measured state (tick indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Disturbance {
    /// An external agent grabs `joint` at `start` and holds it `offset` away
    /// from where it was, reached linearly over `ramp` ticks and held for
    /// `hold` ticks. Afterwards the joint is released to the controller.
    JointOffset { joint: String, offset: f64, start: u64, ramp: u64, hold: u64 },
    /// The contact's true location moves by `offset` (m, world) over `ramp` ticks.
    ContactSlip { contact: String, offset: [f64; 3], start: u64, ramp: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackingConfig {
    #[serde(flatten)]
    pub mode: TrackingMode,
    /// Uniform joint measurement noise amplitude, rad.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self { mode: TrackingMode::Perfect, noise: 0.0, disturbances: Vec::new() }
    }
}

/// What the controller reports back each tick.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredState {
    pub q: GeneralizedPosition,
    pub lambda: DVector<f64>,
    /// Per end effector; the measured location of each active contact.
    pub contact_poses: Vec<Option<Isometry3<f64>>>,
}

impl MeasuredState {
    pub fn from_desired(state: &RetargetState) -> Self {
        Self {
            q: state.q.clone(),
            lambda: state.lambda.clone(),
            contact_poses: state.contacts.contacts.iter().map(|c| c.is_active().then_some(c.state.anchor)).collect(),
        }
    }
}

fn ramp(tick: u64, start: u64, len: u64) -> f64 {
    if tick < start {
        0.0
    } else if len == 0 {
        1.0
    } else {
        ((tick - start) as f64 / len as f64).min(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackingConfig,
    rng: ChaCha8Rng,
    theta: Option<DVector<f64>>,
    velocity: Option<DVector<f64>>,
    /// Joint value captured when each disturbance grabbed its joint.
    grabs: Vec<Option<f64>>,
    /// True contact locations (undisturbed), per end effector.
    truth: Vec<Option<Isometry3<f64>>>,
}

impl Tracker {
    pub fn new(config: TrackingConfig, seed: u64) -> Self {
        let grabs = vec![None; config.disturbances.len()];
        Self { config, rng: ChaCha8Rng::seed_from_u64(seed), theta: None, velocity: None, grabs, truth: Vec::new() }
    }

    pub fn config(&self) -> &TrackingConfig {
        &self.config
    }

    pub fn is_perfect(&self) -> bool {
        self.config.mode == TrackingMode::Perfect && self.config.disturbances.is_empty() && self.config.noise == 0.0
    }

    /// Execute `desired` for one period `dt` ending at `tick`.
    pub fn advance(&mut self, model: &RobotModel, desired: &RetargetState, tick: u64, dt: f64) -> MeasuredState {
        if self.is_perfect() {
            return MeasuredState::from_desired(desired);
        }
        let target = &desired.q.joints;
        let theta = self.theta.get_or_insert_with(|| target.clone());
        let velocity = self.velocity.get_or_insert_with(|| DVector::zeros(target.len()));
        match self.config.mode {
            TrackingMode::Perfect => {
                theta.copy_from(target);
                velocity.fill(0.0);
            }
            TrackingMode::SpringDamper { stiffness, damping } => {
                for k in 0..target.len() {
                    let acc = stiffness * (target[k] - theta[k]) - damping * velocity[k];
                    velocity[k] += acc * dt;
                    theta[k] += velocity[k] * dt;
                }
            }
        }

        // Contact truth follows the desired contact set.
        self.truth.resize(desired.contacts.contacts.len(), None);
        for (i, c) in desired.contacts.contacts.iter().enumerate() {
            if !c.is_active() {
                self.truth[i] = None;
            } else if self.truth[i].is_none() {
                self.truth[i] = Some(c.state.anchor);
            }
        }

        let mut contact_poses = self.truth.clone();
        for (d, grab) in self.config.disturbances.iter().zip(self.grabs.iter_mut()) {
            match d {
                Disturbance::JointOffset { joint, offset, start, ramp: len, hold } => {
                    let Some(k) = model.dof_index(joint) else { continue };
                    if tick < *start || tick >= start + len + hold {
                        continue;
                    }
                    let base = *grab.get_or_insert(theta[k]);
                    theta[k] = base + offset * ramp(tick, *start, *len);
                    velocity[k] = 0.0;
                }
                Disturbance::ContactSlip { contact, offset, start, ramp: len } => {
                    let Some(i) = desired.contacts.index(contact) else { continue };
                    if let Some(pose) = contact_poses[i].as_mut() {
                        let shift = Vector3::from(*offset) * ramp(tick, *start, *len);
                        *pose = Translation3::from(shift) * *pose;
                    }
                }
            }
        }

        let mut joints = theta.clone();
        for (k, lim) in model.dof_limits().enumerate() {
            if self.config.noise > 0.0 {
                joints[k] += self.rng.random_range(-self.config.noise..=self.config.noise);
            }
            joints[k] = joints[k].clamp(lim.lower, lim.upper);
        }
        MeasuredState {
            q: GeneralizedPosition { base: desired.q.base, joints },
            lambda: desired.lambda.clone(),
            contact_poses,
        }
    }
}
