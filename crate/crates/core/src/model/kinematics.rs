use nalgebra::{DVector, Isometry3, Matrix6xX, Translation3, UnitQuaternion, Vector3};

use super::{lie, BasePose, GeneralizedPosition, JointKind, ModelError, RobotModel, BASE_DOF};

/// A unit twist about the world origin: point velocity is `v0 + ω × x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Twist {
    pub w: Vector3<f64>,
    pub v0: Vector3<f64>,
}

impl Twist {
    /// Velocity of world point `x`.
    #[inline]
    pub fn point_velocity(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.v0 + self.w.cross(x)
    }

    /// Lie bracket `[self, other]`.
    #[inline]
    pub fn bracket(&self, other: &Twist) -> Twist {
        Twist {
            w: self.w.cross(&other.w),
            v0: self.w.cross(&other.v0) + self.v0.cross(&other.w),
        }
    }
}

/// Body poses and tangent-column twists evaluated at one configuration.
#[derive(Debug, Clone)]
pub struct Kinematics<'m> {
    pub(crate) model: &'m RobotModel,
    pub(crate) body_poses: Vec<Isometry3<f64>>,
    pub(crate) twists: Vec<Twist>,
}

impl<'m> Kinematics<'m> {
    pub fn new(model: &'m RobotModel, q: &GeneralizedPosition) -> Self {
        assert_eq!(q.joints.len(), model.n(), "joint vector dimension");
        let mut body_poses = vec![Isometry3::identity(); model.bodies.len()];
        let mut twists = vec![
            Twist {
                w: Vector3::zeros(),
                v0: Vector3::zeros()
            };
            model.nv()
        ];

        let base = q.base.isometry();
        body_poses[model.root] = base;
        let p = q.base.position;
        for k in 0..3 {
            let e = Vector3::ith(k, 1.0);
            twists[k] = Twist { w: e, v0: p.cross(&e) };
            twists[3 + k] = Twist { w: Vector3::zeros(), v0: e };
        }

        for &b in model.topo_order() {
            let Some(j) = model.bodies[b].parent_joint else { continue };
            let joint = &model.joints[j];
            let frame = body_poses[joint.parent] * joint.origin;
            let value = joint.dof.map_or(0.0, |d| q.joints[d]);
            let (motion, twist) = match joint.kind {
                JointKind::Fixed => (Isometry3::identity(), None),
                JointKind::Revolute => {
                    let axis_w = frame.rotation * joint.axis.into_inner();
                    let origin = frame.translation.vector;
                    (
                        Isometry3::from_parts(
                            Translation3::identity(),
                            UnitQuaternion::from_axis_angle(&joint.axis, value),
                        ),
                        Some(Twist { w: axis_w, v0: origin.cross(&axis_w) }),
                    )
                }
                JointKind::Prismatic => {
                    let axis_w = frame.rotation * joint.axis.into_inner();
                    (
                        Isometry3::from_parts(
                            Translation3::from(joint.axis.into_inner() * value),
                            UnitQuaternion::identity(),
                        ),
                        Some(Twist { w: Vector3::zeros(), v0: axis_w }),
                    )
                }
            };
            body_poses[b] = frame * motion;
            if let (Some(t), Some(d)) = (twist, joint.dof) {
                twists[BASE_DOF + d] = t;
            }
        }

        Self { model, body_poses, twists }
    }

    pub fn body_pose(&self, body: usize) -> &Isometry3<f64> {
        &self.body_poses[body]
    }

    /// World pose of end-effector `index`.
    pub fn effector_pose(&self, index: usize) -> Isometry3<f64> {
        let ee = &self.model.end_effectors[index];
        self.body_poses[ee.body] * ee.offset
    }

    /// World CoM of `body`.
    pub fn com(&self, body: usize) -> Vector3<f64> {
        self.body_poses[body]
            .transform_point(&nalgebra::Point3::from(self.model.bodies[body].com))
            .coords
    }

    /// Jacobian of the world point `x` rigidly attached to `body`, rows `[angular; linear]`.
    pub fn point_jacobian(&self, body: usize, x: &Vector3<f64>) -> Matrix6xX<f64> {
        let mut jac = Matrix6xX::zeros(self.model.nv());
        for &k in self.model.support(body) {
            let t = &self.twists[k];
            let lin = t.point_velocity(x);
            jac.fixed_view_mut::<3, 1>(0, k).copy_from(&t.w);
            jac.fixed_view_mut::<3, 1>(3, k).copy_from(&lin);
        }
        jac
    }

    pub fn effector_jacobian(&self, index: usize) -> Matrix6xX<f64> {
        let ee = &self.model.end_effectors[index];
        let p = self.effector_pose(index).translation.vector;
        self.point_jacobian(ee.body, &p)
    }
}

impl<'m> Kinematics<'m> {
    /// World centre of mass of the whole model (origin when massless).
    pub fn center_of_mass(&self) -> Vector3<f64> {
        let total = self.model.total_mass();
        if total <= 0.0 {
            return Vector3::zeros();
        }
        (0..self.model.bodies.len())
            .map(|b| self.com(b) * self.model.bodies[b].mass)
            .sum::<Vector3<f64>>()
            / total
    }
}

pub fn forward_kinematics(
    model: &RobotModel,
    q: &GeneralizedPosition,
    frame: &str,
) -> Result<Isometry3<f64>, ModelError> {
    let index = model.effector_index(frame)?;
    Ok(Kinematics::new(model, q).effector_pose(index))
}

pub fn frame_jacobian(
    model: &RobotModel,
    q: &GeneralizedPosition,
    frame: &str,
) -> Result<Matrix6xX<f64>, ModelError> {
    let index = model.effector_index(frame)?;
    Ok(Kinematics::new(model, q).effector_jacobian(index))
}

/// `q ⊕ Δq`; the base quaternion is renormalized after the update.
pub fn integrate_configuration(q: &GeneralizedPosition, dq: &DVector<f64>) -> GeneralizedPosition {
    assert_eq!(dq.len(), BASE_DOF + q.joints.len(), "increment dimension");
    let w = Vector3::new(dq[0], dq[1], dq[2]);
    let v = Vector3::new(dq[3], dq[4], dq[5]);
    let orientation = lie::rotation_exp(&w) * q.base.orientation;
    let orientation = UnitQuaternion::new_normalize(orientation.into_inner());
    GeneralizedPosition {
        base: BasePose {
            orientation,
            position: q.base.position + v,
        },
        joints: &q.joints + dq.rows(BASE_DOF, q.joints.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_model, pose_difference};
    use crate::testing::{planar_arm, random_configuration, random_model};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn planar_arm_tip_position() {
        let model = planar_arm(&[1.0, 1.0]);
        let mut q = model.neutral();
        q.joints[0] = FRAC_PI_2;
        let tip = forward_kinematics(&model, &q, "tip").unwrap();
        assert_relative_eq!(tip.translation.vector, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn zero_configuration_composes_fixed_offsets() {
        let model = planar_arm(&[0.7, 0.4]);
        let tip = forward_kinematics(&model, &model.neutral(), "tip").unwrap();
        assert_relative_eq!(tip.translation.vector, Vector3::new(1.1, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn base_translation_shifts_every_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng, 7);
        let q = random_configuration(&model, &mut rng);
        let mut shifted = q.clone();
        let d = Vector3::new(0.3, -0.2, 1.5);
        shifted.base.position += d;
        let a = Kinematics::new(&model, &q);
        let b = Kinematics::new(&model, &shifted);
        for e in 0..model.end_effectors.len() {
            assert_relative_eq!(
                b.effector_pose(e).translation.vector,
                a.effector_pose(e).translation.vector + d,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn unknown_frame_is_an_error() {
        let model = planar_arm(&[1.0]);
        assert_eq!(
            forward_kinematics(&model, &model.neutral(), "nope").unwrap_err(),
            ModelError::UnknownFrame("nope".into())
        );
    }

    #[test]
    fn root_frame_base_columns_are_rigid_transport() {
        let doc = r#"<robot name="b">
            <link name="base"><inertial><mass value="1"/></inertial></link>
            <end_effector name="f" link="base"><origin xyz="0.2 0.1 -0.3"/><contact kind="point" mu="0.5"/></end_effector>
        </robot>"#;
        let model = load_model(doc).unwrap();
        let mut q = model.neutral();
        q.base.position = Vector3::new(1.0, 2.0, 3.0);
        q.base.orientation = UnitQuaternion::from_euler_angles(0.2, -0.1, 0.7);
        let kin = Kinematics::new(&model, &q);
        let jac = kin.effector_jacobian(0);
        let r = kin.effector_pose(0).translation.vector - q.base.position;
        for k in 0..3 {
            let e = Vector3::ith(k, 1.0);
            let col = jac.column(k);
            assert_relative_eq!(Vector3::new(col[0], col[1], col[2]), e);
            assert_relative_eq!(Vector3::new(col[3], col[4], col[5]), e.cross(&r), epsilon = 1e-12);
            let col = jac.column(3 + k);
            assert_relative_eq!(Vector3::new(col[0], col[1], col[2]), Vector3::zeros());
            assert_relative_eq!(Vector3::new(col[3], col[4], col[5]), e);
        }
    }

    #[test]
    fn prismatic_column_is_world_axis() {
        let doc = r#"<robot name="p">
            <link name="base"><inertial><mass value="1"/></inertial></link>
            <link name="slider"><inertial><mass value="1"/></inertial></link>
            <joint name="s" type="prismatic"><parent link="base"/><child link="slider"/>
              <origin xyz="0 0 0.5" rpy="0 0 1.5707963267948966"/><axis xyz="1 0 0"/>
              <limit lower="-1" upper="1" effort="10" velocity="1"/></joint>
            <end_effector name="tip" link="slider"><origin xyz="0.1 0 0"/><contact kind="point" mu="0.5"/></end_effector>
        </robot>"#;
        let model = load_model(doc).unwrap();
        let jac = frame_jacobian(&model, &model.neutral(), "tip").unwrap();
        let col: Vec<f64> = jac.column(6).iter().copied().collect();
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        for (a, b) in col.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let model = random_model(&mut rng, 8);
            let q = random_configuration(&model, &mut rng);
            let delta = crate::testing::random_direction(model.nv(), &mut rng);
            let kin = Kinematics::new(&model, &q);
            for e in 0..model.end_effectors.len() {
                let jd = kin.effector_jacobian(e) * &delta;
                let eps = 1e-6;
                let plus = forward_kinematics(
                    &model,
                    &integrate_configuration(&q, &(&delta * eps)),
                    &model.end_effectors[e].name,
                )
                .unwrap();
                let minus = forward_kinematics(
                    &model,
                    &integrate_configuration(&q, &(&delta * -eps)),
                    &model.end_effectors[e].name,
                )
                .unwrap();
                let fd = pose_difference(&plus, &minus) / (2.0 * eps);
                let scale = jd.amax().max(1.0);
                assert!((fd - jd).amax() <= 1e-6 * scale, "fd {fd} vs jac {jd}");
            }
        }
    }

    #[test]
    fn first_order_error_shrinks_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng, 6);
        let q = random_configuration(&model, &mut rng);
        let delta = crate::testing::random_direction(model.nv(), &mut rng);
        let kin = Kinematics::new(&model, &q);
        let x0 = kin.effector_pose(0);
        let jd = kin.effector_jacobian(0) * &delta;
        let err = |eps: f64| {
            let x = Kinematics::new(&model, &integrate_configuration(&q, &(&delta * eps)))
                .effector_pose(0);
            (pose_difference(&x, &x0) - &jd * eps).norm()
        };
        let (e3, e4) = (err(1e-3), err(1e-4));
        let c = 10.0 * delta.norm_squared().max(1.0);
        assert!(e3 <= c * 1e-6, "{e3}");
        assert!(e4 <= c * 1e-8, "{e4}");
    }

    #[test]
    fn integrate_zero_is_identity_and_translation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random_model(&mut rng, 4);
        let q = random_configuration(&model, &mut rng);
        let same = integrate_configuration(&q, &DVector::zeros(model.nv()));
        assert_relative_eq!(same.joints, q.joints);
        assert_relative_eq!(same.base.position, q.base.position);
        assert!(same.base.orientation.angle_to(&q.base.orientation) < 1e-15);

        let mut dq = DVector::zeros(model.nv());
        dq[3] = 0.25;
        dq[5] = -1.0;
        let moved = integrate_configuration(&q, &dq);
        assert_eq!(moved.base.position, q.base.position + Vector3::new(0.25, 0.0, -1.0));
        assert_eq!(moved.joints, q.joints);
    }

    #[test]
    fn integrate_then_difference_recovers_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = random_model(&mut rng, 3);
        let q = random_configuration(&model, &mut rng);
        let dq = crate::testing::random_direction(model.nv(), &mut rng) * 1e-3;
        let moved = integrate_configuration(&q, &dq);
        let d = pose_difference(&moved.base.isometry(), &q.base.isometry());
        let n = dq.norm();
        // Angular part is exact; linear part is exact by construction.
        for k in 0..6 {
            assert!((d[k] - dq[k]).abs() <= n * n, "component {k}");
        }
        let quat_norm = moved.base.orientation.into_inner().norm();
        assert!((quat_norm - 1.0).abs() < 1e-9);
    }
}
