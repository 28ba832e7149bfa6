//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use retarget_core::io::{bundled_scenario, replay, resolve_setup, RunSpec, Scenario};
use retarget_core::model::{
    contact_hessian_product, contact_jacobian, gravity_jacobian, gravity_vector, ContactLoad, GeneralizedPosition,
    Kinematics, RobotModel,
};
use retarget_core::qp::QpProblem;
use retarget_core::runtime::{LogRecord, Session, SessionSetup};
use retarget_core::testing::central_difference;

/// Exhaustive active-set enumeration: for every subset of inequality rows,
/// solve the equality-constrained KKT system treating the subset as active
/// and keep the best point that is primal feasible with nonnegative
/// inequality multipliers. `None` when no subset qualifies.
pub fn enumerate_qp(qp: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let d = qp.dim();
    let me = qp.n_eq();
    let mi = qp.n_ineq();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << mi) {
        let active: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
        let k = me + active.len();
        if k > d {
            continue;
        }
        // [P  -Aᵀ; A  0] [x; μ] = [-r; -b]
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&qp.p);
        rhs.rows_mut(0, d).copy_from(&-&qp.r);
        for (row, (a, b)) in (0..me)
            .map(|i| (qp.aeq.row(i), qp.beq[i]))
            .chain(active.iter().map(|&i| (qp.aineq.row(i), qp.bineq[i])))
            .enumerate()
        {
            for c in 0..d {
                kkt[(d + row, c)] = a[c];
                kkt[(c, d + row)] = -a[c];
            }
            rhs[d + row] = -b;
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
        if !sol.iter().all(|v| v.is_finite()) || (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let x = sol.rows(0, d).into_owned();
        let feasible = (0..mi).all(|i| qp.aineq.row(i).dot(&x.transpose()) + qp.bineq[i] >= -1e-9);
        let dual_ok = (0..active.len()).all(|j| sol[d + me + j] >= -1e-9);
        if feasible && dual_ok {
            let obj = qp.objective(&x);
            if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                best = Some((x, obj));
            }
        }
    }
    best
}

/// Random strictly convex QP with `d` variables, `me` equalities and `mi`
/// inequalities, feasible by construction around a random point.
pub fn random_qp<R: Rng + ?Sized>(rng: &mut R, d: usize, me: usize, mi: usize) -> QpProblem {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let p = &m * m.transpose() + DMatrix::identity(d, d) * rng.random_range(0.05..1.0);
    let r = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    let x0 = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let aeq = DMatrix::from_fn(me, d, |_, _| rng.random_range(-1.0..1.0));
    let beq = -(&aeq * &x0);
    let aineq = DMatrix::from_fn(mi, d, |_, _| rng.random_range(-1.0..1.0));
    let slack = DVector::from_fn(mi, |_, _| rng.random_range(0.0..0.5));
    let bineq = -(&aineq * &x0) + slack;
    QpProblem { p, r, aeq, beq, aineq, bineq, constant: 0.0 }
}

/// `‖a − b‖_max / max(‖b‖_max, floor)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}

/// Relative errors of the analytic gravity Jacobian and contact Hessian
/// product against central differences (step 1e-6).
pub fn derivative_errors(
    model: &RobotModel,
    q: &GeneralizedPosition,
    contacts: &[ContactLoad],
    lambda: &DVector<f64>,
) -> (f64, f64) {
    let eps = 1e-6;
    let k = gravity_jacobian(model, q);
    let k_fd = central_difference(model, q, eps, |q| gravity_vector(model, q));
    let h = contact_hessian_product(model, q, contacts, lambda).unwrap();
    let h_fd = central_difference(model, q, eps, |q| {
        let kin = Kinematics::new(model, q);
        let mut out = DVector::zeros(model.nv());
        let mut off = 0;
        for c in contacts {
            out += contact_jacobian(&kin, c).transpose() * lambda.rows(off, c.dim());
            off += c.dim();
        }
        out
    });
    (relative_error(&k, &k_fd, 1e-9), relative_error(&h, &h_fd, 1e-9))
}

pub fn bundled_model(name: &str) -> RobotModel {
    SessionSetup::bundled(name).unwrap().model
}

/// Replay a bundled scenario; panics on rejected commands or a halt.
pub fn run_bundled(name: &str, seed: u64) -> Vec<LogRecord> {
    let scenario = Scenario::parse(bundled_scenario(name).unwrap()).unwrap();
    run_scenario(&scenario, seed)
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Vec<LogRecord> {
    let spec = RunSpec { scenario: "inline".into(), seed, ..Default::default() };
    let (setup, _) = resolve_setup(&spec, scenario).unwrap();
    let mut session = Session::new(setup).unwrap();
    let mut records = Vec::with_capacity(scenario.ticks() as usize);
    let outcome = replay(&mut session, scenario, |r| {
        records.push(r.clone());
        Ok(())
    })
    .unwrap();
    assert!(outcome.rejected.is_empty(), "{:?}", outcome.rejected);
    assert_eq!(outcome.halted, None);
    records
}

pub const BUNDLED_MODELS: [&str; 4] = ["biped18", "humanoid26", "quadruped12", "quadruped_arm18"];

/// `(dim, equalities, inequalities)` from the contact census:
/// `6 + n + 6·planes + 3·points`, `6 + 6·planes + 3·points`, `4n + 18·planes + 6·points`.
pub fn expected_dimensions(n: usize, planes: usize, points: usize) -> (usize, usize, usize) {
    (6 + n + 6 * planes + 3 * points, 6 + 6 * planes + 3 * points, 4 * n + 18 * planes + 6 * points)
}

pub struct DimensionCase {
    pub model: String,
    pub enabled: Vec<String>,
    pub expected: (usize, usize, usize),
    pub assembled: (usize, usize, usize),
}

/// Every bundled model with every subset of its effectors enabled.
pub fn dimension_matrix() -> Vec<DimensionCase> {
    use retarget_core::contact::ContactKind;
    use retarget_core::retarget::{assemble, RetargetState, TaskTargets, WeightSet};
    let weights = WeightSet::default();
    let mut out = Vec::new();
    for name in BUNDLED_MODELS {
        let setup = SessionSetup::bundled(name).unwrap();
        let model = &setup.model;
        let m = model.end_effectors.len();
        for mask in 0u32..(1 << m) {
            let chosen: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let names: Vec<&str> = chosen.iter().map(|&i| model.end_effectors[i].name.as_str()).collect();
            let planes = chosen.iter().filter(|&&i| model.end_effectors[i].contact.kind == ContactKind::Plane).count();
            let state = RetargetState::new(model, setup.q.clone(), &names, &weights).unwrap();
            let targets = TaskTargets::hold(model, &state.q);
            let a = assemble(model, &state, &targets, &weights).unwrap();
            out.push(DimensionCase {
                model: name.into(),
                enabled: names.iter().map(|s| s.to_string()).collect(),
                expected: expected_dimensions(model.n(), planes, chosen.len() - planes),
                assembled: (a.qp.dim(), a.qp.n_eq(), a.qp.n_ineq()),
            });
        }
    }
    out
}

/// Sample `k`: bundled models in turn for every fourth sample, random trees otherwise.
pub fn derivative_sample(seed: u64, k: usize) -> (RobotModel, GeneralizedPosition, Vec<ContactLoad>, DVector<f64>) {
    use rand::SeedableRng;
    use retarget_core::testing::{random_configuration, random_contacts, random_model};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let model = if k % 4 == 0 {
        bundled_model(BUNDLED_MODELS[(k / 4) % BUNDLED_MODELS.len()])
    } else {
        let links = rng.random_range(2..=10);
        random_model(&mut rng, links)
    };
    let q = random_configuration(&model, &mut rng);
    let contacts = random_contacts(&model, &mut rng);
    let l: usize = contacts.iter().map(|c| c.dim()).sum();
    let lambda = DVector::from_fn(l, |_, _| rng.random_range(-100.0..100.0));
    (model, q, contacts, lambda)
}
