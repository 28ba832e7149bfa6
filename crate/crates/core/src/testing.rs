//! Model and configuration generators shared by unit tests, integration
//! tests and benches. Not part of the stable API.

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Translation3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, RngExt};

use crate::contact::{surface_rotation, ContactKind, ContactSpec};
use crate::model::{
    integrate_configuration, BasePose, Body, ContactLoad, EndEffector, GeneralizedPosition, Joint,
    JointKind, JointLimits, RobotModel,
};

fn body(name: String, mass: f64, com: Vector3<f64>) -> Body {
    Body { name, mass, com, inertia: Matrix3::identity() * 0.01 * mass, parent_joint: None }
}

fn limits(lower: f64, upper: f64) -> JointLimits {
    JointLimits { lower, upper, velocity: 5.0, effort: 200.0 }
}

fn point_spec() -> ContactSpec {
    ContactSpec {
        kind: ContactKind::Point,
        half_length_x: 0.0,
        half_length_y: 0.0,
        friction: 0.5,
        min_normal: 0.0,
        max_normal: 1e4,
        surface_normal: Vector3::z(),
    }
}

fn plane_spec() -> ContactSpec {
    ContactSpec { kind: ContactKind::Plane, half_length_x: 0.1, half_length_y: 0.05, ..point_spec() }
}

/// Serial chain of revolute joints about z with links along x. The last
/// link carries a point end effector `tip` at its far end.
pub fn planar_arm(lengths: &[f64]) -> RobotModel {
    let mut bodies = vec![body("base".into(), 1.0, Vector3::zeros())];
    let mut joints = Vec::new();
    let mut offset = 0.0;
    for (i, &l) in lengths.iter().enumerate() {
        let mut b = body(format!("link{i}"), 1.0, Vector3::new(l / 2.0, 0.0, 0.0));
        b.parent_joint = Some(i);
        bodies.push(b);
        joints.push(Joint {
            name: format!("j{i}"),
            kind: JointKind::Revolute,
            axis: Vector3::z_axis(),
            parent: i,
            child: i + 1,
            origin: Isometry3::translation(offset, 0.0, 0.0),
            limits: Some(limits(-std::f64::consts::PI, std::f64::consts::PI)),
            dof: Some(i),
        });
        offset = l;
    }
    let tip = EndEffector {
        name: "tip".into(),
        body: lengths.len(),
        offset: Isometry3::translation(offset, 0.0, 0.0),
        contact: point_spec(),
    };
    RobotModel::from_parts("planar_arm".into(), bodies, joints, vec![tip]).expect("valid chain")
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_isometry<R: Rng + ?Sized>(rng: &mut R, reach: f64) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(random_unit(rng) * rng.random_range(0.0..reach)),
        UnitQuaternion::from_scaled_axis(random_unit(rng) * rng.random_range(0.0..3.0)),
    )
}

/// Random tree with `links` non-root bodies. Mixes revolute, prismatic and
/// fixed joints; every leaf carries an end effector (planes and points).
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, links: usize) -> RobotModel {
    let mut bodies = vec![body("root".into(), rng.random_range(0.5..5.0), random_unit(rng) * 0.1)];
    let mut joints: Vec<Joint> = Vec::new();
    let mut dof = 0;
    for i in 0..links {
        let parent = rng.random_range(0..bodies.len());
        let kind = match rng.random_range(0..10) {
            0 => JointKind::Fixed,
            1 | 2 => JointKind::Prismatic,
            _ => JointKind::Revolute,
        };
        let mut b = body(format!("b{i}"), rng.random_range(0.0..3.0), random_unit(rng) * 0.2);
        b.parent_joint = Some(joints.len());
        bodies.push(b);
        let actuated = kind != JointKind::Fixed;
        joints.push(Joint {
            name: format!("j{i}"),
            kind,
            axis: Unit::new_normalize(random_unit(rng)),
            parent,
            child: bodies.len() - 1,
            origin: random_isometry(rng, 0.5),
            limits: actuated.then(|| limits(-2.5, 2.5)),
            dof: actuated.then(|| {
                dof += 1;
                dof - 1
            }),
        });
    }
    let mut end_effectors = Vec::new();
    for (b, _) in bodies.iter().enumerate().filter(|(b, _)| !joints.iter().any(|j| j.parent == *b)) {
        let contact = if end_effectors.len() % 2 == 0 { plane_spec() } else { point_spec() };
        end_effectors.push(EndEffector {
            name: format!("ee{}", end_effectors.len()),
            body: b,
            offset: random_isometry(rng, 0.3),
            contact,
        });
    }
    RobotModel::from_parts("random".into(), bodies, joints, end_effectors).expect("random tree is valid")
}

pub fn random_configuration<R: Rng + ?Sized>(model: &RobotModel, rng: &mut R) -> GeneralizedPosition {
    let joints = DVector::from_iterator(
        model.n(),
        model.dof_limits().map(|l| rng.random_range(l.lower..=l.upper)),
    );
    GeneralizedPosition {
        base: BasePose {
            orientation: UnitQuaternion::from_scaled_axis(random_unit(rng) * rng.random_range(0.0..3.0)),
            position: random_unit(rng) * rng.random_range(0.0..2.0),
        },
        joints,
    }
}

/// Direction with entries uniform in `[-1, 1]`.
pub fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

/// A non-empty random subset of the model's effectors as contact loads with random surface frames.
pub fn random_contacts<R: Rng + ?Sized>(model: &RobotModel, rng: &mut R) -> Vec<ContactLoad> {
    let mut out = Vec::new();
    for (i, ee) in model.end_effectors.iter().enumerate() {
        if rng.random_bool(0.7) {
            out.push(ContactLoad { effector: i, kind: ee.contact.kind, surface: surface_rotation(&random_unit(rng)) });
        }
    }
    if out.is_empty() {
        out.push(ContactLoad {
            effector: 0,
            kind: model.end_effectors[0].contact.kind,
            surface: surface_rotation(&random_unit(rng)),
        });
    }
    out
}

/// Central differences of `f` along each tangent coordinate; column `k` is `∂f/∂q_k`.
pub fn central_difference<F>(model: &RobotModel, q: &GeneralizedPosition, eps: f64, f: F) -> DMatrix<f64>
where
    F: Fn(&GeneralizedPosition) -> DVector<f64>,
{
    let nv = model.nv();
    let rows = f(q).len();
    let mut out = DMatrix::zeros(rows, nv);
    for k in 0..nv {
        let mut e = DVector::zeros(nv);
        e[k] = eps;
        let plus = f(&integrate_configuration(q, &e));
        let minus = f(&integrate_configuration(q, &-e));
        out.set_column(k, &((plus - minus) / (2.0 * eps)));
    }
    out
}
