//! Re-checks logged states against the per-tick safety invariant.
//!
//! Only model kinematics are shared with the engine. Gravity is rebuilt from
//! per-body CoM Jacobians, contact forces from explicit contact Jacobians,
//! and the cones from their closed-form conditions.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::LogHeader;
use crate::contact::{ContactKind, ContactMode, ContactSpec};
use crate::model::{contact_jacobian, pose_difference, ContactLoad, Kinematics, RobotModel, BASE_DOF, GRAVITY};
use crate::par::{self, Execution};
use crate::runtime::{matrix_from_rows, LogRecord, TrackingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Schema,
    Equilibrium,
    Cone,
    JointLimit,
    TorqueLimit,
    JointBand,
    ContactKinematics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tick: u64,
    pub check: Check,
    pub detail: String,
    /// Amount by which the bound is exceeded.
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyTolerances {
    /// N or N·m
    pub equilibrium: f64,
    /// Slack allowed on linear inequalities.
    pub inequality: f64,
    /// m
    pub contact_position: f64,
    /// rad
    pub contact_orientation: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { equilibrium: 1e-2, inequality: 1e-6, contact_position: 1e-3, contact_orientation: 1e-2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub records: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Closed-form cone conditions as `(name, margin)`; negative margin violates.
fn cone_margins(spec: &ContactSpec, min_normal: f64, w: &[f64]) -> Vec<(&'static str, f64)> {
    let mu = spec.friction;
    match spec.kind {
        ContactKind::Point => {
            let (fx, fy, fz) = (w[0], w[1], w[2]);
            vec![
                ("normal_min", fz - min_normal),
                ("normal_max", spec.max_normal - fz),
                ("friction_x", mu * fz - fx.abs()),
                ("friction_y", mu * fz - fy.abs()),
            ]
        }
        ContactKind::Plane => {
            let (tx, ty, tz, fx, fy, fz) = (w[0], w[1], w[2], w[3], w[4], w[5]);
            let (x, y) = (spec.half_length_x, spec.half_length_y);
            let tz_max = mu * (x + y) * fz - (y * fx + mu * tx).abs() - (x * fy + mu * ty).abs();
            let tz_min = -mu * (x + y) * fz + (y * fx - mu * tx).abs() + (x * fy - mu * ty).abs();
            vec![
                ("normal_min", fz - min_normal),
                ("normal_max", spec.max_normal - fz),
                ("friction_x", mu * fz - fx.abs()),
                ("friction_y", mu * fz - fy.abs()),
                ("cop_x", x * fz - ty.abs()),
                ("cop_y", y * fz - tx.abs()),
                ("yaw_max", tz_max - tz),
                ("yaw_min", tz - tz_min),
            ]
        }
    }
}

fn check_record(
    model: &RobotModel,
    header: &LogHeader,
    tol: &VerifyTolerances,
    r: &LogRecord,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |check, detail: String, excess: f64| out.push(Violation { tick: r.tick, check, detail, excess });
    let n = model.n();
    if r.desired.joints.len() != n || r.tau.len() != n || r.contacts.len() != model.end_effectors.len() {
        flag(Check::Schema, "record dimensions do not match the model".into(), f64::NAN);
        return out;
    }
    let q = r.desired.to_position();
    let kin = Kinematics::new(model, &q);

    // G(q) as Σ J_com,bᵀ (−m_b g).
    let mut residual = DVector::zeros(model.nv());
    for (b, body) in model.bodies.iter().enumerate() {
        if body.mass == 0.0 {
            continue;
        }
        let jac = kin.point_jacobian(b, &kin.com(b));
        let f: Vector3<f64> = -GRAVITY * body.mass;
        residual += jac.fixed_rows::<3>(3).transpose() * f;
    }
    for k in 0..n {
        residual[BASE_DOF + k] -= r.tau[k];
    }

    for (i, c) in r.contacts.iter().enumerate() {
        let spec = &model.end_effectors[i].contact;
        if c.name != model.end_effectors[i].name {
            flag(Check::Schema, format!("contact {i} is `{}`, model has `{}`", c.name, model.end_effectors[i].name), f64::NAN);
            continue;
        }
        if c.mode == ContactMode::Disabled {
            if !c.wrench.is_empty() {
                flag(Check::Schema, format!("{}: disabled contact carries a wrench", c.name), f64::NAN);
            }
            continue;
        }
        if c.wrench.len() != spec.wrench_dim() {
            flag(Check::Schema, format!("{}: wrench has {} entries", c.name, c.wrench.len()), f64::NAN);
            continue;
        }
        let load = ContactLoad { effector: i, kind: spec.kind, surface: matrix_from_rows(&c.surface) };
        let jc = contact_jacobian(&kin, &load);
        residual -= jc.transpose() * DVector::from_column_slice(&c.wrench);

        let min_normal = if c.mode == ContactMode::Enabled { spec.min_normal } else { 0.0 };
        for (name, margin) in cone_margins(spec, min_normal, &c.wrench) {
            if margin < -tol.inequality {
                flag(Check::Cone, format!("{}: {name}", c.name), -margin);
            }
        }

        let d = pose_difference(&c.anchor.to_isometry(), &kin.effector_pose(i));
        let dp = d.fixed_rows::<3>(3).norm();
        if dp > tol.contact_position {
            flag(Check::ContactKinematics, format!("{}: position off by {dp:.3e} m", c.name), dp - tol.contact_position);
        }
        if spec.kind == ContactKind::Plane {
            let da = d.fixed_rows::<3>(0).norm();
            if da > tol.contact_orientation {
                flag(
                    Check::ContactKinematics,
                    format!("{}: orientation off by {da:.3e} rad", c.name),
                    da - tol.contact_orientation,
                );
            }
        }
    }
    let eq = residual.amax();
    if !(eq <= tol.equilibrium) {
        flag(Check::Equilibrium, format!("‖G − Sτ − Jᵀλ‖∞ = {eq:.3e}"), eq - tol.equilibrium);
    }

    let band = match header.tracking.mode {
        TrackingMode::Perfect if header.tracking.disturbances.is_empty() && header.tracking.noise == 0.0 => None,
        _ => Some(header.weights.clamp_joint),
    };
    for (k, lim) in model.dof_limits().enumerate() {
        let name = &model.dof_joint(k).name;
        let theta = r.desired.joints[k];
        let excess = (lim.lower - theta).max(theta - lim.upper);
        if excess > tol.inequality {
            flag(Check::JointLimit, format!("{name} = {theta:.6}"), excess);
        }
        let excess = r.tau[k].abs() - lim.effort;
        if excess > tol.inequality {
            flag(Check::TorqueLimit, format!("{name}: τ = {:.4}", r.tau[k]), excess);
        }
        if let (Some(clamp), Some(m)) = (band, r.measured.joints.get(k)) {
            let gap = (theta - m).abs();
            if gap - clamp > tol.inequality {
                flag(Check::JointBand, format!("{name}: desired − measured = {gap:.6}"), gap - clamp);
            }
        }
    }
    out
}

/// Check every record; violations are sorted by tick.
pub fn verify_records(
    model: &RobotModel,
    header: &LogHeader,
    records: &[LogRecord],
    tol: &VerifyTolerances,
    exec: Execution,
) -> VerifyReport {
    let mut violations: Vec<Violation> =
        par::map(exec, records, |r| check_record(model, header, tol, r)).into_iter().flatten().collect();
    violations.sort_by(|a, b| a.tick.cmp(&b.tick).then(a.check.cmp(&b.check)));
    VerifyReport { records: records.len(), violations }
}
