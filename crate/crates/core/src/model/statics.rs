//! Quasi-static generalized forces and their configuration derivatives.
//!
//! Every term here is a sum of generalized forces produced by constant
//! world-frame loads (gravity on each CoM, contact wrenches held fixed in
//! their surface frame). With column twists `s_j` about the world origin and
//! the load's spatial force `F = (τ + x × f, f)`, the generalized force is
//! `Q_j = s_j · F`, and its derivative along tangent direction `k` is
//!
//! ```text
//! ∂Q_j/∂q_k = [s_k, s_j] · F      (k strictly upstream of j)
//!           + s_j · (ẋ_k × f, 0)  (k moves the application point)
//! ```
//!
//! Base angular columns are world-fixed axes about the base origin, so they
//! do not differentiate each other; the base translation does move them.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6xX, Vector3};

use super::kinematics::{Kinematics, Twist};
use super::{GeneralizedPosition, ModelError, RobotModel};
use crate::contact::ContactKind;

/// Gravitational acceleration in world frame, m/s².
pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

struct PointLoad {
    body: usize,
    point: Vector3<f64>,
    force: Vector3<f64>,
    torque: Vector3<f64>,
}

impl PointLoad {
    fn moment_about_origin(&self) -> Vector3<f64> {
        self.torque + self.point.cross(&self.force)
    }
}

#[inline]
fn power(t: &Twist, n0: &Vector3<f64>, f: &Vector3<f64>) -> f64 {
    t.w.dot(n0) + t.v0.dot(f)
}

fn accumulate_force(kin: &Kinematics, load: &PointLoad, sign: f64, out: &mut DVector<f64>) {
    let n0 = load.moment_about_origin();
    for &k in kin.model.support(load.body) {
        out[k] += sign * power(&kin.twists[k], &n0, &load.force);
    }
}

fn accumulate_force_derivative(kin: &Kinematics, load: &PointLoad, sign: f64, out: &mut DMatrix<f64>) {
    let n0 = load.moment_about_origin();
    let f = &load.force;
    let support = kin.model.support(load.body);
    let moved: Vec<Vector3<f64>> = support
        .iter()
        .map(|&k| kin.twists[k].point_velocity(&load.point).cross(f))
        .collect();
    for (pj, &j) in support.iter().enumerate() {
        let sj = &kin.twists[j];
        for (pk, &k) in support.iter().enumerate() {
            let sk = &kin.twists[k];
            let mut value = sj.w.dot(&moved[pk]);
            if pk < pj && !(j < 3 && k < 3) {
                value += power(&sk.bracket(sj), &n0, f);
            }
            out[(j, k)] += sign * value;
        }
    }
}

fn gravity_loads<'a>(kin: &'a Kinematics) -> impl Iterator<Item = PointLoad> + 'a {
    kin.model
        .bodies
        .iter()
        .enumerate()
        .filter(|(_, b)| b.mass > 0.0)
        .map(|(i, b)| PointLoad {
            body: i,
            point: kin.com(i),
            force: GRAVITY * b.mass,
            torque: Vector3::zeros(),
        })
}

/// Generalized gravity `G(q) = ∂V/∂q`; base rows carry the weight wrench about the base origin.
pub fn gravity_vector(model: &RobotModel, q: &GeneralizedPosition) -> DVector<f64> {
    Kinematics::new(model, q).gravity_vector()
}

/// `∂G/∂q` in the crate's tangent convention.
pub fn gravity_jacobian(model: &RobotModel, q: &GeneralizedPosition) -> DMatrix<f64> {
    Kinematics::new(model, q).gravity_jacobian()
}

/// One enabled contact as seen by the statics: which frame carries it and
/// how its local wrench maps to world axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactLoad {
    pub effector: usize,
    pub kind: ContactKind,
    /// Surface frame → world rotation; the local `z` is the surface normal.
    pub surface: Matrix3<f64>,
}

impl ContactLoad {
    pub fn dim(&self) -> usize {
        self.kind.wrench_dim()
    }
}

fn contact_point_load(kin: &Kinematics, contact: &ContactLoad, wrench: &[f64]) -> PointLoad {
    let ee = &kin.model.end_effectors[contact.effector];
    let point = kin.effector_pose(contact.effector).translation.vector;
    let (torque, force) = match contact.kind {
        ContactKind::Plane => (
            contact.surface * Vector3::new(wrench[0], wrench[1], wrench[2]),
            contact.surface * Vector3::new(wrench[3], wrench[4], wrench[5]),
        ),
        ContactKind::Point => (
            Vector3::zeros(),
            contact.surface * Vector3::new(wrench[0], wrench[1], wrench[2]),
        ),
    };
    PointLoad { body: ee.body, point, force, torque }
}

fn check_dim(contacts: &[ContactLoad], lambda: &DVector<f64>) -> Result<(), ModelError> {
    let expected: usize = contacts.iter().map(ContactLoad::dim).sum();
    if expected != lambda.len() {
        return Err(ModelError::Dimension { expected, got: lambda.len() });
    }
    Ok(())
}

/// `H` with `H Δq = (∂J/∂q Δq)ᵀ λ`, accumulated per contact without forming the tensor.
pub fn contact_hessian_product(
    model: &RobotModel,
    q: &GeneralizedPosition,
    contacts: &[ContactLoad],
    lambda: &DVector<f64>,
) -> Result<DMatrix<f64>, ModelError> {
    check_dim(contacts, lambda)?;
    Ok(Kinematics::new(model, q).contact_hessian_product(contacts, lambda))
}

/// Contact Jacobian in the surface frame: `blockdiag(Rᵀ, Rᵀ) J` for planes,
/// `Rᵀ J_linear` for points.
pub fn contact_jacobian(kin: &Kinematics, contact: &ContactLoad) -> DMatrix<f64> {
    let jac: Matrix6xX<f64> = kin.effector_jacobian(contact.effector);
    let rt = contact.surface.transpose();
    let nv = kin.model.nv();
    match contact.kind {
        ContactKind::Plane => {
            let mut out = DMatrix::zeros(6, nv);
            out.rows_mut(0, 3).copy_from(&(rt * jac.rows(0, 3)));
            out.rows_mut(3, 3).copy_from(&(rt * jac.rows(3, 3)));
            out
        }
        ContactKind::Point => {
            let mut out = DMatrix::zeros(3, nv);
            out.copy_from(&(rt * jac.rows(3, 3)));
            out
        }
    }
}

impl<'m> Kinematics<'m> {
    pub fn gravity_vector(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.model.nv());
        for load in gravity_loads(self) {
            accumulate_force(self, &load, -1.0, &mut g);
        }
        g
    }

    pub fn gravity_jacobian(&self) -> DMatrix<f64> {
        let nv = self.model.nv();
        let mut d = DMatrix::zeros(nv, nv);
        for load in gravity_loads(self) {
            accumulate_force_derivative(self, &load, -1.0, &mut d);
        }
        d
    }

    /// Stacked `J_cᵀ λ` over `contacts`.
    pub fn contact_generalized_force(&self, contacts: &[ContactLoad], lambda: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.model.nv());
        let mut offset = 0;
        for c in contacts {
            let load = contact_point_load(self, c, &lambda.as_slice()[offset..offset + c.dim()]);
            accumulate_force(self, &load, 1.0, &mut out);
            offset += c.dim();
        }
        out
    }

    pub fn contact_hessian_product(&self, contacts: &[ContactLoad], lambda: &DVector<f64>) -> DMatrix<f64> {
        let nv = self.model.nv();
        let mut h = DMatrix::zeros(nv, nv);
        let mut offset = 0;
        for c in contacts {
            let load = contact_point_load(self, c, &lambda.as_slice()[offset..offset + c.dim()]);
            accumulate_force_derivative(self, &load, 1.0, &mut h);
            offset += c.dim();
        }
        h
    }
}
