use nalgebra::{Isometry3, Rotation3, UnitQuaternion, Vector3, Vector6};

/// Rotation vector (axis · angle, angle in `[0, π]`) of `rot`.
///
/// At exactly π the axis sign is ambiguous; it is flipped so that the first
/// nonzero component is positive.
pub fn rotation_log(rot: &Rotation3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_rotation_matrix(rot);
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < 1e-12 {
        // angle ≈ 2s, axis·angle ≈ 2v
        return 2.0 * v;
    }
    let angle = 2.0 * s.atan2(w);
    let mut axis = v / s;
    if w <= 1e-15 {
        if let Some(first) = axis.iter().copied().find(|c| c.abs() > 1e-12) {
            if first < 0.0 {
                axis = -axis;
            }
        }
    }
    axis * angle
}

pub fn rotation_exp(omega: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*omega)
}

/// `a ⊖ b`: `[log(R_a R_bᵀ); p_a − p_b]`, both parts in world frame.
///
/// First-order consistent with [`super::frame_jacobian`]:
/// `pose_difference(FK(q ⊕ εδ), FK(q)) ≈ ε J δ`.
pub fn pose_difference(a: &Isometry3<f64>, b: &Isometry3<f64>) -> Vector6<f64> {
    let rel = (a.rotation * b.rotation.inverse()).to_rotation_matrix();
    let w = rotation_log(&rel);
    let p = a.translation.vector - b.translation.vector;
    Vector6::new(w.x, w.y, w.z, p.x, p.y, p.z)
}
