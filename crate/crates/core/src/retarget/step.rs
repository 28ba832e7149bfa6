use nalgebra::{DMatrix, DVector};

use super::{
    assemble, ContactResidual, RetargetError, RetargetState, Saturation, StepReport, TaskTargets, WeightSet,
};
use crate::contact::{ContactKind, ContactMode, SwitchEvent};
use crate::model::{integrate_configuration, pose_difference, Kinematics, RobotModel, BASE_DOF};
use crate::qp::{default_max_iterations, solve_qp, QpStatus};

/// Steady-state residual thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// m
    pub position: f64,
    /// rad
    pub orientation: f64,
    /// N or N·m
    pub equilibrium: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { position: 1e-3, orientation: 1e-2, equilibrium: 1e-2 }
    }
}

impl Tolerances {
    pub fn accepts(&self, report: &StepReport) -> bool {
        report.max_contact_position_residual() <= self.position
            && report.max_contact_orientation_residual() <= self.orientation
            && report.max_tracking_position_residual() <= self.position
            && report.max_tracking_orientation_residual() <= self.orientation
            && report.equilibrium_residual <= self.equilibrium
    }
}

/// Contact and tracking residuals plus `‖G − Sτ − Jᵀλ‖∞` at `state`.
pub(crate) fn residuals(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
) -> (Vec<ContactResidual>, Vec<ContactResidual>, f64) {
    let kin = Kinematics::new(model, &state.q);
    let mut contact = Vec::new();
    for c in state.contacts.active() {
        let d = pose_difference(&c.state.anchor, &kin.effector_pose(c.effector));
        let orientation = match c.spec.kind {
            ContactKind::Plane => d.fixed_rows::<3>(0).norm(),
            ContactKind::Point => 0.0,
        };
        contact.push(ContactResidual { name: c.name.clone(), position: d.fixed_rows::<3>(3).norm(), orientation });
    }
    let mut tracking = Vec::new();
    for (i, target) in targets.effectors.iter().enumerate() {
        let Some(target) = target else { continue };
        if state.contacts.contacts[i].is_active() {
            continue;
        }
        let d = pose_difference(&target.pose, &kin.effector_pose(i));
        tracking.push(ContactResidual {
            name: model.end_effectors[i].name.clone(),
            position: d.fixed_rows::<3>(3).norm(),
            orientation: if target.orientation { d.fixed_rows::<3>(0).norm() } else { 0.0 },
        });
    }
    let mut eq = kin.gravity_vector() - kin.contact_generalized_force(&state.contacts.active_loads(), &state.lambda);
    for k in 0..model.n() {
        eq[BASE_DOF + k] -= state.tau[k];
    }
    (contact, tracking, eq.amax())
}

/// One linearization, one QP solve, one full step.
pub fn step(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
    weights: &WeightSet,
) -> Result<(RetargetState, StepReport), RetargetError> {
    let assembled = assemble(model, state, targets, weights)?;
    let qp = &assembled.qp;
    let sol = solve_qp(qp, default_max_iterations(qp))?;
    if sol.status != QpStatus::Optimal {
        return Err(RetargetError::Solve(sol.status));
    }
    let nv = assembled.nv;
    let dq = sol.x.rows(0, nv).into_owned();
    let next = RetargetState {
        q: integrate_configuration(&state.q, &dq),
        tau: assembled.torque.torques(&sol.x),
        lambda: &state.lambda + sol.x.rows(nv, assembled.l),
        contacts: state.contacts.clone(),
        measured_joints: state.measured_joints.clone(),
    };
    let slack = &qp.aineq * &sol.x + &qp.bineq;
    let saturated = sol
        .active
        .iter()
        .map(|&row| Saturation { label: assembled.tags[row].label, owner: assembled.tags[row].owner.clone(), row })
        .collect();
    let (contact_residuals, tracking_residuals, equilibrium_residual) = residuals(model, &next, targets);
    let report = StepReport {
        contact_residuals,
        tracking_residuals,
        equilibrium_residual,
        saturated,
        qp_iterations: sol.iterations,
        status: sol.status,
        step_norm: sol.x.amax(),
        min_slack: slack.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok((next, report))
}

/// Redistribute wrenches at the current posture (`Δq = 0`) so the state is balanced.
pub fn settle_wrenches(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
    weights: &WeightSet,
) -> Result<RetargetState, RetargetError> {
    let mut assembled = assemble(model, state, targets, weights)?;
    let nv = assembled.nv;
    let dim = assembled.qp.dim();
    let mut fix = DMatrix::zeros(nv, dim);
    fix.view_mut((0, 0), (nv, nv)).fill_with_identity();
    assembled.qp.push_equalities(&fix, &DVector::zeros(nv));
    let sol = solve_qp(&assembled.qp, default_max_iterations(&assembled.qp))?;
    if sol.status != QpStatus::Optimal {
        return Err(RetargetError::Solve(sol.status));
    }
    let mut next = state.clone();
    next.tau = assembled.torque.torques(&sol.x);
    next.lambda = &state.lambda + sol.x.rows(nv, assembled.l);
    Ok(next)
}

/// Scale the weight of every transitioning contact by one factor. Returns the
/// contacts whose weight reached its clamp; pass them to [`finalize_switching`]
/// once the solve at the clamped weight is done.
pub fn advance_switching(state: &mut RetargetState, weights: &WeightSet) -> Result<Vec<usize>, RetargetError> {
    let bounds = weights.bounds();
    let mut ready = Vec::new();
    for (i, c) in state.contacts.contacts.iter_mut().enumerate() {
        if c.state.in_transition() && c.state.advance_weight(weights.alpha, &bounds)? {
            ready.push(i);
        }
    }
    Ok(ready)
}

/// Close the transitions in `ready` against the wrenches of the solved state.
/// A completed removal drops the contact's wrench; the next step's
/// equilibrium rows absorb the small residual it carried.
pub fn finalize_switching(state: &mut RetargetState, weights: &WeightSet, ready: &[usize]) -> Vec<(usize, SwitchEvent)> {
    let mut events = Vec::new();
    for &i in ready {
        let norm = state.wrench(i).map_or(0.0, |w| w.iter().map(|v| v * v).sum::<f64>().sqrt());
        let offset = state.contacts.offsets()[i];
        let event = state.contacts.contacts[i].state.finalize(norm);
        if let (SwitchEvent::RemovalCompleted, Some(off)) = (event, offset) {
            state.disable_at(i, off, weights);
        }
        events.push((i, event));
    }
    events
}

/// Per-iteration summary of [`converge_on_frozen_problem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateSummary {
    pub tracking: f64,
    pub equilibrium: f64,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeOutcome {
    pub state: RetargetState,
    pub report: StepReport,
    pub iterations: usize,
    pub history: Vec<IterateSummary>,
}

/// Repeat [`step`] with frozen targets until every residual is within `tol`.
pub fn converge_on_frozen_problem(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
    weights: &WeightSet,
    max_iterations: usize,
    tol: &Tolerances,
) -> Result<ConvergeOutcome, RetargetError> {
    let mut current = state.clone();
    let mut history = Vec::new();
    let mut last = None;
    for it in 1..=max_iterations {
        let (next, report) = step(model, &current, targets, weights)?;
        history.push(IterateSummary {
            tracking: report.max_tracking_position_residual(),
            equilibrium: report.equilibrium_residual,
            min_slack: report.min_slack,
        });
        current = next;
        if tol.accepts(&report) {
            return Ok(ConvergeOutcome { state: current, report, iterations: it, history });
        }
        last = Some(report);
    }
    let report = last.ok_or_else(|| RetargetError::Bookkeeping("zero iterations requested".into()))?;
    Err(RetargetError::NotConverged {
        iterations: max_iterations,
        outcome: Box::new(ConvergeOutcome { state: current, report, iterations: max_iterations, history }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchVerdict {
    pub feasible: bool,
    /// Ticks until the transition closed.
    pub ticks: usize,
    /// Wrench norm of the contact when the weight reached its cap.
    pub final_wrench_norm: f64,
}

impl SwitchVerdict {
    /// Transition duration in seconds at `rate` Hz.
    pub fn duration(&self, rate: f64) -> f64 {
        self.ticks as f64 / rate
    }
}

/// Run a removal of `contact` on a scratch copy of `state` and report whether it completes.
pub fn offline_switch_feasibility(
    model: &RobotModel,
    state: &RetargetState,
    targets: &TaskTargets,
    weights: &WeightSet,
    contact: usize,
) -> Result<SwitchVerdict, RetargetError> {
    let c = state
        .contacts
        .contacts
        .get(contact)
        .ok_or_else(|| RetargetError::UnknownContact(contact.to_string()))?;
    if c.state.mode != ContactMode::Enabled {
        return Err(crate::contact::ContactError::NotInTransition(c.state.mode).into());
    }
    let mut scratch = state.clone();
    scratch.contacts.contacts[contact].state.mode = ContactMode::Removing;
    let mut targets = targets.clone();
    targets.wrenches[contact] = None;
    let span = (weights.w_disabled_contact / weights.w_enabled_contact).ln() / weights.alpha.ln();
    let cap = 2 * span.ceil() as usize + 10;
    for tick in 1..=cap {
        let ready = advance_switching(&mut scratch, weights)?;
        let (mut next, _) = step(model, &scratch, &targets, weights)?;
        let norm = next.wrench(contact).map_or(0.0, |w| w.iter().map(|v| v * v).sum::<f64>().sqrt());
        for (i, event) in finalize_switching(&mut next, weights, &ready) {
            if i != contact {
                continue;
            }
            match event {
                SwitchEvent::RemovalCompleted => {
                    return Ok(SwitchVerdict { feasible: true, ticks: tick, final_wrench_norm: norm })
                }
                SwitchEvent::RemovalFailed => {
                    return Ok(SwitchVerdict { feasible: false, ticks: tick, final_wrench_norm: norm })
                }
                _ => {}
            }
        }
        scratch = next;
    }
    Err(RetargetError::Bookkeeping(format!("switch did not close within {cap} ticks")))
}
