//! Rigid-body tree model, kinematics and quasi-static statics.
//!
//! Tangent-space convention used everywhere in this crate: a generalized
//! increment `Δq ∈ R^(6+n)` is laid out as `[ω_base; v_base; Δθ]`, where
//! `ω_base` and `v_base` form a world-frame twist applied about the base
//! origin. Integration is `R ← exp(ω) R`, `p ← p + v`, `θ ← θ + Δθ`, and
//! every Jacobian, gravity derivative and Hessian product is expressed in
//! that same convention.

mod kinematics;
mod lie;
mod statics;
mod urdf;

pub use kinematics::{frame_jacobian, forward_kinematics, integrate_configuration, Kinematics};
pub use lie::{pose_difference, rotation_exp, rotation_log};
pub use statics::{
    contact_hessian_product, contact_jacobian, gravity_jacobian, gravity_vector, ContactLoad,
    GRAVITY,
};
pub use urdf::load_model;

use nalgebra::{DVector, Isometry3, Matrix3, Unit, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::contact::ContactSpec;

/// Number of tangent coordinates of the floating base.
pub const BASE_DOF: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}: <{element}>: {message}")]
    Parse {
        line: u32,
        element: String,
        message: String,
    },
    #[error("kinematic loop through link `{0}`")]
    Loop(String),
    #[error("joint `{0}` is actuated but has no <limit> element")]
    MissingLimit(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
    pub velocity: f64,
    pub effort: f64,
}

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub mass: f64,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
    /// Parsed for completeness; the quasi-static formulation never reads it.
    pub inertia: Matrix3<f64>,
    /// Joint whose child is this body, `None` for the floating root.
    pub parent_joint: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub axis: Unit<Vector3<f64>>,
    pub parent: usize,
    pub child: usize,
    /// Parent body frame to joint frame at zero joint position.
    pub origin: Isometry3<f64>,
    /// `None` only for fixed joints.
    pub limits: Option<JointLimits>,
    /// Index into the actuated joint vector θ.
    pub dof: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EndEffector {
    pub name: String,
    pub body: usize,
    /// Body frame to end-effector frame.
    pub offset: Isometry3<f64>,
    pub contact: ContactSpec,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub end_effectors: Vec<EndEffector>,
    pub root: usize,
    /// Bodies sorted parent-before-child.
    topo_order: Vec<usize>,
    /// Actuated joint index for each dof.
    dof_joint: Vec<usize>,
    /// Tangent indices supporting each body: base linear, base angular, then joints root to leaf.
    support: Vec<Vec<usize>>,
}

impl RobotModel {
    /// Number of actuated joints.
    pub fn n(&self) -> usize {
        self.dof_joint.len()
    }

    /// Tangent-space dimension `6 + n`.
    pub fn nv(&self) -> usize {
        BASE_DOF + self.n()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Joint driving actuated coordinate `dof`.
    pub fn dof_joint(&self, dof: usize) -> &Joint {
        &self.joints[self.dof_joint[dof]]
    }

    pub fn support(&self, body: usize) -> &[usize] {
        &self.support[body]
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn dof_index(&self, joint_name: &str) -> Option<usize> {
        self.joint_index(joint_name).and_then(|j| self.joints[j].dof)
    }

    pub fn effector_index(&self, name: &str) -> Result<usize, ModelError> {
        self.end_effectors
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| ModelError::UnknownFrame(name.to_string()))
    }

    pub fn effector(&self, name: &str) -> Result<&EndEffector, ModelError> {
        self.effector_index(name).map(|i| &self.end_effectors[i])
    }

    /// Actuated joint limits in dof order.
    pub fn dof_limits(&self) -> impl Iterator<Item = JointLimits> + '_ {
        self.dof_joint
            .iter()
            .map(|&j| self.joints[j].limits.expect("actuated joint has limits"))
    }

    /// Neutral configuration: identity base, every joint at zero clamped into its limits.
    pub fn neutral(&self) -> GeneralizedPosition {
        let joints = DVector::from_iterator(
            self.n(),
            self.dof_limits().map(|l| 0.0_f64.clamp(l.lower, l.upper)),
        );
        GeneralizedPosition {
            base: BasePose::identity(),
            joints,
        }
    }

    /// Assemble a model from already validated parts and derive the
    /// traversal tables. Used by the loader and by programmatic builders.
    pub(crate) fn from_parts(
        name: String,
        bodies: Vec<Body>,
        joints: Vec<Joint>,
        end_effectors: Vec<EndEffector>,
    ) -> Result<Self, ModelError> {
        let roots: Vec<usize> = (0..bodies.len())
            .filter(|&b| bodies[b].parent_joint.is_none())
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => {
                let name = bodies.first().map(|b| b.name.clone()).unwrap_or_default();
                return Err(ModelError::Loop(name));
            }
            many => {
                return Err(ModelError::Parse {
                    line: 0,
                    element: "robot".into(),
                    message: format!(
                        "expected exactly one floating-base root, found {}: {}",
                        many.len(),
                        many.iter()
                            .map(|&b| bodies[b].name.as_str())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                })
            }
        };

        // Every body must reach the root by following parents.
        for start in 0..bodies.len() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(j) = bodies[cur].parent_joint {
                cur = joints[j].parent;
                steps += 1;
                if steps > bodies.len() {
                    return Err(ModelError::Loop(bodies[start].name.clone()));
                }
            }
        }

        let mut topo_order = Vec::with_capacity(bodies.len());
        let mut stack = vec![root];
        while let Some(b) = stack.pop() {
            topo_order.push(b);
            // Reverse so children pop in document order.
            for j in joints.iter().rev().filter(|j| j.parent == b) {
                stack.push(j.child);
            }
        }

        let dof_joint: Vec<usize> = {
            let mut v: Vec<(usize, usize)> = joints
                .iter()
                .enumerate()
                .filter_map(|(i, j)| j.dof.map(|d| (d, i)))
                .collect();
            v.sort();
            v.into_iter().map(|(_, i)| i).collect()
        };

        let mut support = vec![Vec::new(); bodies.len()];
        for &b in &topo_order {
            support[b] = match bodies[b].parent_joint {
                None => vec![3, 4, 5, 0, 1, 2],
                Some(j) => {
                    let mut s = support[joints[j].parent].clone();
                    if let Some(d) = joints[j].dof {
                        s.push(BASE_DOF + d);
                    }
                    s
                }
            };
        }

        Ok(Self {
            name,
            bodies,
            joints,
            end_effectors,
            root,
            topo_order,
            dof_joint,
            support,
        })
    }
}

/// World pose of the floating base.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BasePose {
    /// World ← base rotation.
    pub orientation: UnitQuaternion<f64>,
    pub position: Vector3<f64>,
}

impl BasePose {
    pub fn identity() -> Self {
        Self {
            orientation: UnitQuaternion::identity(),
            position: Vector3::zeros(),
        }
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.position.into(), self.orientation)
    }
}

/// Base pose plus actuated joint positions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneralizedPosition {
    pub base: BasePose,
    pub joints: DVector<f64>,
}

/// World-frame Jacobian of a frame, rows `[angular; linear]`, taken at the frame origin.
pub type FrameJacobian = nalgebra::Matrix6xX<f64>;
