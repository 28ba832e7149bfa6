use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use super::RuntimeError;
use crate::model::{RobotModel, BASE_DOF};
use crate::retarget::{assemble, RetargetError, RetargetState, TaskTargets, WeightSet};

/// Largest normal force contact `index` could carry at the current posture.
///
/// Maximizes the contact's normal force over `Δλ` with `Δq = 0`, subject to
/// the floating-base equilibrium rows, the joint torque limits and every
/// active contact's cone. The bound is conservative: posture changes that
/// would raise it are not considered.
pub fn max_feasible_normal_force(
    model: &RobotModel,
    state: &RetargetState,
    weights: &WeightSet,
    index: usize,
) -> Result<f64, RuntimeError> {
    let contact = state
        .contacts
        .contacts
        .get(index)
        .ok_or_else(|| RetargetError::UnknownContact(index.to_string()))?;
    let Some(off) = state.contacts.offsets()[index] else {
        return Err(crate::contact::ContactError::Disabled(contact.name.clone()).into());
    };
    let normal = off + contact.spec.wrench_dim() - 1;
    let targets = TaskTargets::hold(model, &state.q);
    let assembled = assemble(model, state, &targets, weights)?;
    let (nv, l) = (assembled.nv, assembled.l);
    let qp = &assembled.qp;

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..l)
        .map(|j| lp.add_var(if j == normal { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let row = |a: &nalgebra::DMatrix<f64>, r: usize| {
        vars.iter()
            .enumerate()
            .filter_map(|(j, v)| {
                let c = a[(r, nv + j)];
                (c != 0.0).then_some((*v, c))
            })
            .collect::<Vec<_>>()
    };
    for r in 0..BASE_DOF {
        lp.add_constraint(row(&qp.aeq, r), ComparisonOp::Eq, -qp.beq[r]);
    }
    // Joint position rows do not involve Δλ; torque and cone rows do.
    for r in 2 * model.n()..qp.n_ineq() {
        let terms = row(&qp.aineq, r);
        if terms.is_empty() {
            continue;
        }
        lp.add_constraint(terms, ComparisonOp::Ge, -qp.bineq[r]);
    }
    let solution = match lp.solve().map_err(|e| RuntimeError::Probe(e.to_string()))? {
        SolveOutcome::Solution(s) => s,
        SolveOutcome::Interrupted(_) => return Err(RuntimeError::Probe("LP interrupted".into())),
    };
    Ok(state.lambda[normal] + solution.var_value(vars[normal]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;

    const BOX: &str = r#"<robot name="box">
  <link name="b"><inertial><mass value="4"/><inertia ixx="0.1" iyy="0.1" izz="0.1" ixy="0" ixz="0" iyz="0"/></inertial></link>
  <end_effector name="a" link="b"><origin xyz="0.2 0 -0.1"/><contact kind="point" mu="0.5" fmin="1"/><normal xyz="0 0 1"/></end_effector>
  <end_effector name="c" link="b"><origin xyz="-0.2 0 -0.1"/><contact kind="point" mu="0.5" fmin="1"/><normal xyz="0 0 1"/></end_effector>
</robot>"#;

    #[test]
    fn symmetric_box_probe_is_half_the_weight() {
        let model = load_model(BOX).unwrap();
        let w = WeightSet::default();
        let state = RetargetState::new(&model, model.neutral(), &["a", "c"], &w).unwrap();
        let state = crate::retarget::settle_wrenches(&model, &state, &TaskTargets::hold(&model, &state.q), &w).unwrap();
        let weight = 4.0 * 9.81;
        for i in 0..2 {
            let f = max_feasible_normal_force(&model, &state, &w, i).unwrap();
            assert!((f - weight / 2.0).abs() < 1e-6, "{f}");
        }
    }

    #[test]
    fn disabled_contact_is_rejected() {
        let model = load_model(BOX).unwrap();
        let w = WeightSet::default();
        let state = RetargetState::new(&model, model.neutral(), &["a"], &w).unwrap();
        assert!(max_feasible_normal_force(&model, &state, &w, 1).is_err());
    }
}
