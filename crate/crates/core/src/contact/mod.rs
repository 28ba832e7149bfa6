//! Contact specifications, stability inequalities, metrics and the
//! smooth add/remove state machine.

mod cone;
mod metrics;
mod switching;

pub use cone::{build_contact_inequalities, contact_rows, ConeRows, CONE_ROWS_PLANE, CONE_ROWS_POINT};
pub use metrics::{cop_of_wrench, friction_ratio};
pub use switching::{switching_step, ContactMode, ContactState, SwitchEvent, WeightBounds};

use nalgebra::{Isometry3, Matrix3, Vector3};
use thiserror::Error;

use crate::model::ContactLoad;

/// Removal succeeds only when the wrench norm has dropped below this, in N.
///
/// With the default weights the converged wrench of a fully unloaded foot is
/// a few 1e-2 N (torque regularization against the 0.01 normal-force
/// weight), so the threshold sits one order above that.
pub const REMOVAL_FORCE_EPS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("contact `{0}` is disabled")]
    Disabled(String),
    #[error("normal force must be positive, got {0}")]
    NonPositiveNormal(f64),
    #[error("switching step requested in mode {0:?}")]
    NotInTransition(ContactMode),
    #[error("invalid contact spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    Plane,
    Point,
}

impl ContactKind {
    pub fn wrench_dim(self) -> usize {
        match self {
            ContactKind::Plane => 6,
            ContactKind::Point => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSpec {
    pub kind: ContactKind,
    /// Half-length along the local x axis, m (plane only).
    pub half_length_x: f64,
    /// Half-length along the local y axis, m (plane only).
    pub half_length_y: f64,
    pub friction: f64,
    pub min_normal: f64,
    pub max_normal: f64,
    /// World surface normal for point contacts.
    pub surface_normal: Vector3<f64>,
}

impl ContactSpec {
    pub fn validate(&self) -> Result<(), ContactError> {
        let bad = |m: &str| Err(ContactError::InvalidSpec(m.to_string()));
        if !(self.friction > 0.0) {
            return bad("friction must be positive");
        }
        if !(0.0 <= self.min_normal && self.min_normal < self.max_normal) {
            return bad("normal force bounds must satisfy 0 <= min < max");
        }
        if self.kind == ContactKind::Plane && !(self.half_length_x > 0.0 && self.half_length_y > 0.0) {
            return bad("plane half-lengths must be positive");
        }
        if (self.surface_normal.norm() - 1.0).abs() > 1e-9 {
            return bad("surface normal must be unit length");
        }
        Ok(())
    }

    pub fn wrench_dim(&self) -> usize {
        self.kind.wrench_dim()
    }
}

/// Deterministic right-handed frame whose z axis is `normal`.
pub fn surface_rotation(normal: &Vector3<f64>) -> Matrix3<f64> {
    let z = normal.normalize();
    let seed = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = (seed - z * z.dot(&seed)).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// One end-effector's contact spec and switching state.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub name: String,
    pub effector: usize,
    pub spec: ContactSpec,
    pub state: ContactState,
}

impl Contact {
    pub fn is_active(&self) -> bool {
        self.state.mode != ContactMode::Disabled
    }

    pub fn load(&self) -> ContactLoad {
        ContactLoad {
            effector: self.effector,
            kind: self.spec.kind,
            surface: self.state.surface,
        }
    }

    /// Normal-force floor applied to the cone rows. Relaxed to zero while the
    /// contact is being added or removed so that zero force stays admissible.
    pub fn effective_min_normal(&self) -> f64 {
        match self.state.mode {
            ContactMode::Enabled => self.spec.min_normal,
            _ => 0.0,
        }
    }

    /// Enable the contact at `pose`, deriving the surface frame.
    pub fn establish(&mut self, pose: &Isometry3<f64>, mode: ContactMode, bounds: &WeightBounds) {
        self.state.anchor = *pose;
        self.state.surface = match self.spec.kind {
            ContactKind::Plane => pose.rotation.to_rotation_matrix().into_inner(),
            ContactKind::Point => surface_rotation(&self.spec.surface_normal),
        };
        self.state.mode = mode;
        self.state.weight = match mode {
            ContactMode::Adding | ContactMode::Disabled => bounds.disabled,
            _ => bounds.enabled,
        };
    }
}

/// Every end-effector's contact, indexed like `RobotModel::end_effectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
}

impl ContactSet {
    /// All contacts disabled.
    pub fn from_model(model: &crate::model::RobotModel, bounds: &WeightBounds) -> Self {
        let contacts = model
            .end_effectors
            .iter()
            .enumerate()
            .map(|(i, ee)| Contact {
                name: ee.name.clone(),
                effector: i,
                spec: ee.contact.clone(),
                state: ContactState::disabled(bounds),
            })
            .collect();
        Self { contacts }
    }

    pub fn active(&self) -> impl Iterator<Item = &Contact> {
        self.contacts.iter().filter(|c| c.is_active())
    }

    pub fn active_loads(&self) -> Vec<ContactLoad> {
        self.active().map(Contact::load).collect()
    }

    /// Total stacked wrench dimension of active contacts.
    pub fn wrench_dim(&self) -> usize {
        self.active().map(|c| c.spec.wrench_dim()).sum()
    }

    /// Offset of each contact into the stacked λ (None when inactive).
    pub fn offsets(&self) -> Vec<Option<usize>> {
        let mut off = 0;
        self.contacts
            .iter()
            .map(|c| {
                c.is_active().then(|| {
                    let o = off;
                    off += c.spec.wrench_dim();
                    o
                })
            })
            .collect()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.contacts.iter().position(|c| c.name == name)
    }

    pub fn count(&self, kind: ContactKind) -> usize {
        self.active().filter(|c| c.spec.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn surface_rotation_is_orthonormal_with_normal_as_z() {
        for n in [Vector3::z(), -Vector3::x(), Vector3::new(0.3, -0.2, 0.9).normalize()] {
            let r = surface_rotation(&n);
            assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(r.column(2).into_owned(), n, epsilon = 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        let good = ContactSpec {
            kind: ContactKind::Plane,
            half_length_x: 0.11,
            half_length_y: 0.07,
            friction: 0.5,
            min_normal: 0.0,
            max_normal: 100.0,
            surface_normal: Vector3::z(),
        };
        assert!(good.validate().is_ok());
        assert!(ContactSpec { friction: 0.0, ..good.clone() }.validate().is_err());
        assert!(ContactSpec { min_normal: 200.0, ..good.clone() }.validate().is_err());
        assert!(ContactSpec { half_length_y: 0.0, ..good.clone() }.validate().is_err());
        assert!(ContactSpec { kind: ContactKind::Point, half_length_y: 0.0, ..good }.validate().is_ok());
    }
}
