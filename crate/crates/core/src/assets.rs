//! Bundled desk models and their standing postures.

pub const BIPED_URDF: &str = include_str!("../assets/models/biped18.urdf");
pub const HUMANOID_URDF: &str = include_str!("../assets/models/humanoid26.urdf");
pub const QUADRUPED_URDF: &str = include_str!("../assets/models/quadruped12.urdf");
pub const QUADRUPED_ARM_URDF: &str = include_str!("../assets/models/quadruped_arm18.urdf");

/// Knees bent, feet flat, hands in front of the chest.
pub const BIPED_STANCE: &[(&str, f64)] = &[
    ("left_hip_pitch", -0.35),
    ("left_knee", 0.7),
    ("left_ankle_pitch", -0.35),
    ("right_hip_pitch", -0.35),
    ("right_knee", 0.7),
    ("right_ankle_pitch", -0.35),
    ("left_shoulder_pitch", -0.3),
    ("left_elbow", -0.9),
    ("right_shoulder_pitch", -0.3),
    ("right_elbow", -0.9),
];

pub const QUADRUPED_STANCE: &[(&str, f64)] = &[
    ("lf_hip_flexion", 0.6),
    ("lf_knee", -1.2),
    ("rf_hip_flexion", 0.6),
    ("rf_knee", -1.2),
    ("lh_hip_flexion", -0.6),
    ("lh_knee", 1.2),
    ("rh_hip_flexion", -0.6),
    ("rh_knee", 1.2),
    ("arm_shoulder_pitch", -0.5),
    ("arm_elbow", 1.2),
    ("arm_wrist_pitch", -0.7),
];

pub const BIPED_SUPPORT: &[&str] = &["left_foot", "right_foot"];
pub const QUADRUPED_SUPPORT: &[&str] = &["lf_foot", "rf_foot", "lh_foot", "rh_foot"];

/// Bundled model text, stance and initial supports by model name.
pub fn bundled(name: &str) -> Option<(&'static str, &'static [(&'static str, f64)], &'static [&'static str])> {
    match name {
        "biped18" => Some((BIPED_URDF, BIPED_STANCE, BIPED_SUPPORT)),
        "humanoid26" => Some((HUMANOID_URDF, BIPED_STANCE, BIPED_SUPPORT)),
        "quadruped12" => Some((QUADRUPED_URDF, QUADRUPED_STANCE, QUADRUPED_SUPPORT)),
        "quadruped_arm18" => Some((QUADRUPED_ARM_URDF, QUADRUPED_STANCE, QUADRUPED_SUPPORT)),
        _ => None,
    }
}
