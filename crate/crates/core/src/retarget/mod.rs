//! The per-tick retargeting optimization.
//!
//! Each tick linearizes kinematics and quasi-static equilibrium around the
//! current state, assembles one QP over `Δx̃ = (Δq, Δλ)` (joint torques are
//! eliminated through the joint rows of the linearized equilibrium), solves
//! it and takes the full step.

mod assemble;
mod step;
mod weights;

pub use assemble::{assemble, eliminate_torques, Assembled, RowTag, TorqueMap};
pub use step::{
    advance_switching, converge_on_frozen_problem, finalize_switching, offline_switch_feasibility,
    settle_wrenches, step, ConvergeOutcome, IterateSummary, SwitchVerdict, Tolerances,
};
pub use weights::{WeightPatch, WeightSet};
pub(crate) use step::residuals;

use nalgebra::{DVector, Isometry3};
use thiserror::Error;

use crate::contact::{ContactError, ContactMode, ContactSet};
use crate::model::{GeneralizedPosition, ModelError, RobotModel};
use crate::qp::{QpError, QpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetargetError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("QP returned {0:?}")]
    Solve(QpStatus),
    #[error("invalid weights: {0}")]
    Config(String),
    #[error("unknown contact `{0}`")]
    UnknownContact(String),
    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize, outcome: Box<ConvergeOutcome> },
    #[error("dimension bookkeeping: {0}")]
    Bookkeeping(String),
}

/// Which family of inequality a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintLabel {
    JointPosition,
    JointTorque,
    NormalMin,
    NormalMax,
    Friction,
    Cop,
    Yaw,
}

/// Pose target of a free end effector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectorTarget {
    pub pose: Isometry3<f64>,
    /// Track the orientation as well as the position.
    pub orientation: bool,
}

/// Desired wrench of a contact, in its surface frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchTarget {
    pub wrench: DVector<f64>,
    /// Replaces the switching weight while the contact is enabled.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskTargets {
    /// Indexed like `RobotModel::end_effectors`; used only while the contact is disabled.
    pub effectors: Vec<Option<EffectorTarget>>,
    /// Indexed like `RobotModel::end_effectors`; zero wrench when `None`.
    pub wrenches: Vec<Option<WrenchTarget>>,
    pub posture: DVector<f64>,
}

impl TaskTargets {
    /// No effector targets, zero wrench targets, posture at `q`.
    pub fn hold(model: &RobotModel, q: &GeneralizedPosition) -> Self {
        Self {
            effectors: vec![None; model.end_effectors.len()],
            wrenches: vec![None; model.end_effectors.len()],
            posture: q.joints.clone(),
        }
    }
}

/// Optimization state `x = (q, τ, λ)` plus contact bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetState {
    pub q: GeneralizedPosition,
    pub tau: DVector<f64>,
    /// Active contact wrenches stacked in contact order, each in its surface frame.
    pub lambda: DVector<f64>,
    pub contacts: ContactSet,
    /// Measured joints; when set, joint rows also keep `θ` within `clampJoint` of them.
    pub measured_joints: Option<DVector<f64>>,
}

impl RetargetState {
    /// State at `q` with the named contacts enabled at their current poses and zero wrenches.
    /// Call [`settle_wrenches`] to obtain a balanced wrench distribution.
    pub fn new(
        model: &RobotModel,
        q: GeneralizedPosition,
        enabled: &[&str],
        weights: &WeightSet,
    ) -> Result<Self, RetargetError> {
        let bounds = weights.bounds();
        let mut contacts = ContactSet::from_model(model, &bounds);
        let kin = crate::model::Kinematics::new(model, &q);
        for name in enabled {
            let i = contacts.index(name).ok_or_else(|| RetargetError::UnknownContact(name.to_string()))?;
            let pose = kin.effector_pose(contacts.contacts[i].effector);
            contacts.contacts[i].establish(&pose, ContactMode::Enabled, &bounds);
        }
        let l = contacts.wrench_dim();
        Ok(Self { tau: DVector::zeros(model.n()), lambda: DVector::zeros(l), q, contacts, measured_joints: None })
    }

    /// Wrench slice of contact `index`, if active.
    pub fn wrench(&self, index: usize) -> Option<&[f64]> {
        let off = self.contacts.offsets()[index]?;
        let dim = self.contacts.contacts[index].spec.wrench_dim();
        Some(&self.lambda.as_slice()[off..off + dim])
    }

    /// Enable contact `index` in `mode` at the current effector pose, inserting a zero wrench.
    pub fn establish_contact(
        &mut self,
        model: &RobotModel,
        index: usize,
        mode: ContactMode,
        weights: &WeightSet,
    ) -> Result<(), RetargetError> {
        if self.contacts.contacts[index].is_active() {
            return Err(ContactError::NotInTransition(self.contacts.contacts[index].state.mode).into());
        }
        let pose = crate::model::Kinematics::new(model, &self.q).effector_pose(self.contacts.contacts[index].effector);
        self.contacts.contacts[index].establish(&pose, mode, &weights.bounds());
        let off = self.contacts.offsets()[index].expect("just enabled");
        let dim = self.contacts.contacts[index].spec.wrench_dim();
        let mut lambda = DVector::zeros(self.lambda.len() + dim);
        lambda.rows_mut(0, off).copy_from(&self.lambda.rows(0, off));
        let rest = self.lambda.len() - off;
        lambda.rows_mut(off + dim, rest).copy_from(&self.lambda.rows(off, rest));
        self.lambda = lambda;
        Ok(())
    }

    /// Disable contact `index`, removing its wrench from `λ`.
    pub fn drop_contact(&mut self, index: usize, weights: &WeightSet) {
        let Some(off) = self.contacts.offsets()[index] else { return };
        self.disable_at(index, off, weights);
    }

    /// Remove contact `index`'s wrench, stored at `off`, and disable it.
    pub(crate) fn disable_at(&mut self, index: usize, off: usize, weights: &WeightSet) {
        let dim = self.contacts.contacts[index].spec.wrench_dim();
        self.lambda = self.lambda.clone().remove_rows(off, dim);
        let state = &mut self.contacts.contacts[index].state;
        state.mode = ContactMode::Disabled;
        state.weight = weights.w_disabled_contact;
    }
}

/// One saturated inequality after a step.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Saturation {
    pub label: ConstraintLabel,
    /// Joint or contact name.
    pub owner: String,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactResidual {
    pub name: String,
    /// m
    pub position: f64,
    /// rad (plane contacts only, 0 for points)
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepReport {
    /// Contact kinematic residuals after the step.
    pub contact_residuals: Vec<ContactResidual>,
    /// Free-effector tracking errors after the step (position m, orientation rad).
    pub tracking_residuals: Vec<ContactResidual>,
    /// `‖G(q) − Sτ − J(q)ᵀλ‖∞` after the step.
    pub equilibrium_residual: f64,
    pub saturated: Vec<Saturation>,
    pub qp_iterations: usize,
    pub status: QpStatus,
    /// `‖Δx̃‖∞`
    pub step_norm: f64,
    /// Smallest inequality slack after the step.
    pub min_slack: f64,
}

impl StepReport {
    pub fn max_contact_position_residual(&self) -> f64 {
        self.contact_residuals.iter().map(|r| r.position).fold(0.0, f64::max)
    }

    pub fn max_contact_orientation_residual(&self) -> f64 {
        self.contact_residuals.iter().map(|r| r.orientation).fold(0.0, f64::max)
    }

    pub fn max_tracking_position_residual(&self) -> f64 {
        self.tracking_residuals.iter().map(|r| r.position).fold(0.0, f64::max)
    }

    pub fn max_tracking_orientation_residual(&self) -> f64 {
        self.tracking_residuals.iter().map(|r| r.orientation).fold(0.0, f64::max)
    }

    pub fn has_saturation(&self, label: ConstraintLabel) -> bool {
        self.saturated.iter().any(|s| s.label == label)
    }
}
