use nalgebra::{DMatrix, DVector, Vector3};

use super::{ConstraintLabel, RetargetError, RetargetState, TaskTargets, WeightSet};
use crate::contact::{build_contact_inequalities, ContactKind, ContactMode};
use crate::model::{contact_jacobian, pose_difference, Kinematics, RobotModel, BASE_DOF};
use crate::qp::{weighted_least_squares_to_qp, CostBlock, QpProblem};

/// `τ + Δτ = T Δx̃ + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueMap {
    pub t_mat: DMatrix<f64>,
    pub t: DVector<f64>,
}

impl TorqueMap {
    pub fn torques(&self, dx: &DVector<f64>) -> DVector<f64> {
        &self.t_mat * dx + &self.t
    }
}

/// Label and owner of one inequality row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTag {
    pub label: ConstraintLabel,
    pub owner: String,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub qp: QpProblem,
    /// One per inequality row.
    pub tags: Vec<RowTag>,
    pub torque: TorqueMap,
    /// Tangent dimension `6 + n`.
    pub nv: usize,
    /// Stacked wrench dimension.
    pub l: usize,
    /// Clamped task errors fed to the cost (posture, then each free effector's
    /// `[orientation; position]` or position-only part, then each point-contact
    /// normal alignment error).
    pub task_errors: Vec<DVector<f64>>,
}

/// Quantities linearized at the current state.
struct Linearization<'m> {
    kin: Kinematics<'m>,
    g: DVector<f64>,
    /// `∂G/∂q − ∂(Jᵀλ)/∂q`
    k: DMatrix<f64>,
    /// Stacked surface-frame contact Jacobians, `l × nv`.
    jc: DMatrix<f64>,
    jt_lambda: DVector<f64>,
}

impl<'m> Linearization<'m> {
    fn new(model: &'m RobotModel, state: &RetargetState) -> Result<Self, RetargetError> {
        let l = state.contacts.wrench_dim();
        if state.lambda.len() != l {
            return Err(RetargetError::Bookkeeping(format!("λ has {} entries, active contacts need {l}", state.lambda.len())));
        }
        if state.tau.len() != model.n() {
            return Err(RetargetError::Bookkeeping(format!("τ has {} entries, model has {} joints", state.tau.len(), model.n())));
        }
        let kin = Kinematics::new(model, &state.q);
        let loads = state.contacts.active_loads();
        let nv = model.nv();
        let mut jc = DMatrix::zeros(l, nv);
        let mut off = 0;
        for load in &loads {
            let j = contact_jacobian(&kin, load);
            jc.rows_mut(off, load.dim()).copy_from(&j);
            off += load.dim();
        }
        let g = kin.gravity_vector();
        let k = kin.gravity_jacobian() - kin.contact_hessian_product(&loads, &state.lambda);
        let jt_lambda = jc.tr_mul(&state.lambda);
        Ok(Self { kin, g, k, jc, jt_lambda })
    }

    fn torque_map(&self, n: usize) -> TorqueMap {
        let nv = BASE_DOF + n;
        let l = self.jc.nrows();
        let mut t_mat = DMatrix::zeros(n, nv + l);
        t_mat.view_mut((0, 0), (n, nv)).copy_from(&self.k.rows(BASE_DOF, n));
        t_mat
            .view_mut((0, nv), (n, l))
            .copy_from(&(-self.jc.columns(BASE_DOF, n).transpose()));
        let t = self.g.rows(BASE_DOF, n) - self.jt_lambda.rows(BASE_DOF, n);
        TorqueMap { t_mat, t }
    }
}

/// Torque elimination from the joint rows of the linearized equilibrium.
pub fn eliminate_torques(model: &RobotModel, state: &RetargetState) -> Result<TorqueMap, RetargetError> {
    Ok(Linearization::new(model, state)?.torque_map(model.n()))
}

fn clamp_norm(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// Rotation vector taking `from` onto `to` (both unit), angle in `[0, π]`.
fn alignment_error(from: &Vector3<f64>, to: &Vector3<f64>) -> Vector3<f64> {
    let axis = from.cross(to);
    let s = axis.norm();
    let angle = s.atan2(from.dot(to));
    if s < 1e-12 {
        if angle < 1.0 {
            return Vector3::zeros();
        }
        // Antiparallel: any perpendicular axis.
        let seed = if from.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        return from.cross(&seed).normalize() * angle;
    }
    axis * (angle / s)
}

/// Build the per-tick QP over `Δx̃ = (Δq, Δλ)`.
pub fn assemble(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
    weights: &WeightSet,
) -> Result<Assembled, RetargetError> {
    let n = model.n();
    let nv = model.nv();
    let lin = Linearization::new(model, state)?;
    let l = lin.jc.nrows();
    let dim = nv + l;
    let torque = lin.torque_map(n);
    let kin = &lin.kin;
    let offsets = state.contacts.offsets();

    if targets.posture.len() != n {
        return Err(RetargetError::Bookkeeping(format!("posture target has {} entries, expected {n}", targets.posture.len())));
    }

    let mut blocks = Vec::new();
    let mut task_errors = Vec::new();

    // Joint increments: velocity penalty and clamped posture attraction.
    let mut sel = DMatrix::zeros(n, dim);
    sel.view_mut((0, BASE_DOF), (n, n)).fill_with_identity();
    let posture = (&targets.posture - &state.q.joints).map(|e| e.clamp(-weights.clamp_joint, weights.clamp_joint));
    blocks.push(CostBlock::uniform(sel.clone(), DVector::zeros(n), weights.w_velocity));
    blocks.push(CostBlock::uniform(sel, posture.clone(), weights.w_posture));
    task_errors.push(posture);

    // Free effectors.
    for (i, target) in targets.effectors.iter().enumerate() {
        let Some(target) = target else { continue };
        if state.contacts.contacts[i].is_active() {
            continue;
        }
        let jac = kin.effector_jacobian(i);
        let err = pose_difference(&target.pose, &kin.effector_pose(i));
        let pos = clamp_norm(Vector3::new(err[3], err[4], err[5]), weights.clamp_position);
        if target.orientation {
            let ori = clamp_norm(Vector3::new(err[0], err[1], err[2]), weights.clamp_orientation);
            let mut c = DMatrix::zeros(6, dim);
            c.view_mut((0, 0), (6, nv)).copy_from(&jac);
            let e = DVector::from_column_slice(&[ori.x, ori.y, ori.z, pos.x, pos.y, pos.z]);
            let w = DVector::from_column_slice(&[
                weights.w_orientation,
                weights.w_orientation,
                weights.w_orientation,
                weights.w_position,
                weights.w_position,
                weights.w_position,
            ]);
            blocks.push(CostBlock { c, target: e.clone(), weights: w });
            task_errors.push(e);
        } else {
            let mut c = DMatrix::zeros(3, dim);
            c.view_mut((0, 0), (3, nv)).copy_from(&jac.rows(3, 3));
            let e = DVector::from_column_slice(pos.as_slice());
            blocks.push(CostBlock::uniform(c, e.clone(), weights.w_position));
            task_errors.push(e);
        }
    }

    // Joint torques through the elimination map.
    blocks.push(CostBlock::uniform(torque.t_mat.clone(), -&torque.t, weights.w_torque));

    // Contact wrench regularization and point-contact normal alignment.
    for (i, contact) in state.contacts.contacts.iter().enumerate() {
        let Some(off) = offsets[i] else { continue };
        let d = contact.spec.wrench_dim();
        let current = state.lambda.rows(off, d);
        let (desired, override_weight) = match &targets.wrenches[i] {
            Some(t) if t.wrench.len() == d => (t.wrench.clone(), t.weight),
            Some(t) => {
                return Err(RetargetError::Bookkeeping(format!(
                    "wrench target for `{}` has {} entries, expected {d}",
                    contact.name,
                    t.wrench.len()
                )))
            }
            None => (DVector::zeros(d), None),
        };
        let pattern: &[f64] = match contact.spec.kind {
            ContactKind::Plane => &weights.w_contact_plane,
            ContactKind::Point => &weights.w_contact_point,
        };
        let mut w = DVector::from_iterator(d, pattern.iter().map(|p| p * contact.state.weight));
        if let (ContactMode::Enabled, Some(normal)) = (contact.state.mode, override_weight) {
            w[d - 1] = normal;
        }
        let mut c = DMatrix::zeros(d, dim);
        c.view_mut((0, nv + off), (d, d)).fill_with_identity();
        blocks.push(CostBlock { c, target: desired - current, weights: w });

        if contact.spec.kind == ContactKind::Point {
            let normal = contact.spec.surface_normal;
            let axis = kin.effector_pose(i).rotation * Vector3::z();
            let err = clamp_norm(alignment_error(&axis, &normal), weights.clamp_orientation);
            let proj = nalgebra::Matrix3::identity() - normal * normal.transpose();
            let jac = kin.effector_jacobian(i);
            let mut c = DMatrix::zeros(3, dim);
            c.view_mut((0, 0), (3, nv)).copy_from(&(proj * jac.rows(0, 3)));
            let e = DVector::from_column_slice(err.as_slice());
            blocks.push(CostBlock::uniform(c, e.clone(), weights.w_orientation * 1e-2));
            task_errors.push(e);
        }
    }

    let mut qp = weighted_least_squares_to_qp(&blocks, dim)?;

    // Equalities: floating-base equilibrium rows, then contact kinematics.
    let mut aeq = DMatrix::zeros(BASE_DOF + l, dim);
    let mut beq = DVector::zeros(BASE_DOF + l);
    aeq.view_mut((0, 0), (BASE_DOF, nv)).copy_from(&lin.k.rows(0, BASE_DOF));
    aeq.view_mut((0, nv), (BASE_DOF, l))
        .copy_from(&(-lin.jc.columns(0, BASE_DOF).transpose()));
    beq.rows_mut(0, BASE_DOF)
        .copy_from(&(lin.g.rows(0, BASE_DOF) - lin.jt_lambda.rows(0, BASE_DOF)));
    let mut row = BASE_DOF;
    for (i, contact) in state.contacts.contacts.iter().enumerate() {
        if offsets[i].is_none() {
            continue;
        }
        let jac = kin.effector_jacobian(i);
        let err = pose_difference(&contact.state.anchor, &kin.effector_pose(i));
        match contact.spec.kind {
            ContactKind::Plane => {
                aeq.view_mut((row, 0), (6, nv)).copy_from(&jac);
                for k in 0..6 {
                    beq[row + k] = -err[k];
                }
                row += 6;
            }
            ContactKind::Point => {
                aeq.view_mut((row, 0), (3, nv)).copy_from(&jac.rows(3, 3));
                for k in 0..3 {
                    beq[row + k] = -err[3 + k];
                }
                row += 3;
            }
        }
    }
    debug_assert_eq!(row, BASE_DOF + l);
    qp.push_equalities(&aeq, &beq);

    // Inequalities: joint positions, joint torques, contact cones.
    let cone_rows: usize = state.contacts.active().map(|c| crate::contact::contact_rows(&c.spec, 0.0).b.len()).sum();
    let m = 4 * n + cone_rows;
    let mut aineq = DMatrix::zeros(m, dim);
    let mut bineq = DVector::zeros(m);
    let mut tags = Vec::with_capacity(m);
    let theta = &state.q.joints;
    for (k, lim) in model.dof_limits().enumerate() {
        let name = &model.dof_joint(k).name;
        let (mut lo, mut hi) = (lim.lower, lim.upper);
        if let Some(measured) = &state.measured_joints {
            lo = lo.max(measured[k] - weights.clamp_joint).min(lim.upper);
            hi = hi.min(measured[k] + weights.clamp_joint).max(lim.lower);
        }
        aineq[(2 * k, BASE_DOF + k)] = 1.0;
        bineq[2 * k] = theta[k] - lo;
        aineq[(2 * k + 1, BASE_DOF + k)] = -1.0;
        bineq[2 * k + 1] = hi - theta[k];
        for _ in 0..2 {
            tags.push(RowTag { label: ConstraintLabel::JointPosition, owner: name.clone() });
        }
    }
    let base = 2 * n;
    for (k, lim) in model.dof_limits().enumerate() {
        let name = &model.dof_joint(k).name;
        let trow = torque.t_mat.row(k);
        aineq.row_mut(base + 2 * k).copy_from(&trow);
        bineq[base + 2 * k] = torque.t[k] + lim.effort;
        aineq.row_mut(base + 2 * k + 1).copy_from(&(-trow));
        bineq[base + 2 * k + 1] = lim.effort - torque.t[k];
        for _ in 0..2 {
            tags.push(RowTag { label: ConstraintLabel::JointTorque, owner: name.clone() });
        }
    }
    let mut row = 4 * n;
    for (i, contact) in state.contacts.contacts.iter().enumerate() {
        let Some(off) = offsets[i] else { continue };
        let d = contact.spec.wrench_dim();
        let cone = build_contact_inequalities(contact, state.lambda.rows(off, d).as_slice())?;
        let r = cone.b.len();
        aineq.view_mut((row, nv + off), (r, d)).copy_from(&cone.a);
        bineq.rows_mut(row, r).copy_from(&cone.b);
        tags.extend(cone.labels.iter().map(|&label| RowTag { label, owner: contact.name.clone() }));
        row += r;
    }
    qp.push_inequalities(&aineq, &bineq);

    Ok(Assembled { qp, tags, torque, nv, l, task_errors })
}
