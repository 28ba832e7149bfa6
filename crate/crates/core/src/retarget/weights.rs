use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RetargetError;
use crate::contact::WeightBounds;

/// Cost weights, clamps and the switching factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightSet {
    pub w_velocity: f64,
    pub w_posture: f64,
    pub w_position: f64,
    pub w_orientation: f64,
    pub w_torque: f64,
    /// Per-component pattern for plane wrenches `(τx, τy, τz, fx, fy, fz)`.
    pub w_contact_plane: [f64; 6],
    /// Per-component pattern for point forces `(fx, fy, fz)`.
    pub w_contact_point: [f64; 3],
    pub w_enabled_contact: f64,
    pub w_disabled_contact: f64,
    pub clamp_joint: f64,
    pub clamp_position: f64,
    pub clamp_orientation: f64,
    pub alpha: f64,
}

impl Default for WeightSet {
    fn default() -> Self {
        Self {
            w_velocity: 1e4,
            w_posture: 1.0,
            w_position: 1e3,
            w_orientation: 10.0,
            w_torque: 1e-5,
            w_contact_plane: [1.0, 1.0, 1.0, 1.0, 1.0, 0.01],
            w_contact_point: [1.0, 1.0, 0.01],
            w_enabled_contact: 1e-5,
            w_disabled_contact: 1.0,
            clamp_joint: 0.1,
            clamp_position: 0.01,
            clamp_orientation: 0.1,
            alpha: 1.005,
        }
    }
}

/// Partial update; absent fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WeightPatch {
    pub w_velocity: Option<f64>,
    pub w_posture: Option<f64>,
    pub w_position: Option<f64>,
    pub w_orientation: Option<f64>,
    pub w_torque: Option<f64>,
    pub w_contact_plane: Option<[f64; 6]>,
    pub w_contact_point: Option<[f64; 3]>,
    pub w_enabled_contact: Option<f64>,
    pub w_disabled_contact: Option<f64>,
    pub clamp_joint: Option<f64>,
    pub clamp_position: Option<f64>,
    pub clamp_orientation: Option<f64>,
    pub alpha: Option<f64>,
}

impl WeightSet {
    pub fn bounds(&self) -> WeightBounds {
        WeightBounds { enabled: self.w_enabled_contact, disabled: self.w_disabled_contact }
    }

    pub fn validate(&self) -> Result<(), RetargetError> {
        let bad = |m: String| Err(RetargetError::Config(m));
        let scalars = [
            ("wVelocity", self.w_velocity),
            ("wPosture", self.w_posture),
            ("wPosition", self.w_position),
            ("wOrientation", self.w_orientation),
            ("wTorque", self.w_torque),
            ("wEnabledContact", self.w_enabled_contact),
            ("wDisabledContact", self.w_disabled_contact),
        ];
        for (name, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number"));
            }
        }
        if self.w_contact_plane.iter().chain(self.w_contact_point.iter()).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("contact weight patterns must be finite and non-negative".into());
        }
        if !(self.w_enabled_contact > 0.0 && self.w_enabled_contact < self.w_disabled_contact) {
            return bad("need 0 < wEnabledContact < wDisabledContact".into());
        }
        for (name, v) in [
            ("clampJoint", self.clamp_joint),
            ("clampPosition", self.clamp_position),
            ("clampOrientation", self.clamp_orientation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad("alpha must be greater than 1".into());
        }
        Ok(())
    }

    /// Apply a patch, leaving `self` untouched if the result is invalid.
    pub fn apply(&mut self, patch: &WeightPatch) -> Result<(), RetargetError> {
        let mut next = self.clone();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = patch.$f { next.$f = v; } )* };
        }
        set!(
            w_velocity, w_posture, w_position, w_orientation, w_torque, w_contact_plane, w_contact_point,
            w_enabled_contact, w_disabled_contact, clamp_joint, clamp_position, clamp_orientation, alpha
        );
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment;
    /// vector values are comma separated.
    pub fn parse(text: &str) -> Result<Self, RetargetError> {
        let mut entries: BTreeMap<String, serde_json::Value> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| RetargetError::Config(format!("line {}: {m}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let key = key.trim();
            let numbers: Vec<f64> = value
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(&format!("`{}` is not a number list", value.trim())))?;
            let json = match numbers.as_slice() {
                [v] if !key.starts_with("wContact") => serde_json::json!(v),
                many => serde_json::json!(many),
            };
            if entries.insert(key.to_string(), json).is_some() {
                return Err(err(&format!("duplicate key `{key}`")));
            }
        }
        let patch: WeightPatch = serde_json::from_value(serde_json::Value::Object(entries.into_iter().collect()))
            .map_err(|e| RetargetError::Config(e.to_string()))?;
        let mut weights = WeightSet::default();
        weights.apply(&patch)?;
        Ok(weights)
    }

    pub fn to_config(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        format!(
            "wVelocity = {:?}\nwPosture = {:?}\nwPosition = {:?}\nwOrientation = {:?}\nwTorque = {:?}\n\
             wContactPlane = {}\nwContactPoint = {}\nwEnabledContact = {:?}\nwDisabledContact = {:?}\n\
             clampJoint = {:?}\nclampPosition = {:?}\nclampOrientation = {:?}\nalpha = {:?}\n",
            self.w_velocity,
            self.w_posture,
            self.w_position,
            self.w_orientation,
            self.w_torque,
            list(&self.w_contact_plane),
            list(&self.w_contact_point),
            self.w_enabled_contact,
            self.w_disabled_contact,
            self.clamp_joint,
            self.clamp_position,
            self.clamp_orientation,
            self.alpha
        )
    }
}
