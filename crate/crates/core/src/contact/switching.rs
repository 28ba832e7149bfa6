use nalgebra::{Isometry3, Matrix3};

use super::{ContactError, REMOVAL_FORCE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    Disabled,
    Enabled,
    Removing,
    Adding,
}

/// Contact-force regularization weights at the two ends of a transition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightBounds {
    pub enabled: f64,
    pub disabled: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self { enabled: 1e-5, disabled: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub mode: ContactMode,
    pub weight: f64,
    /// Kinematic target captured when the contact was established.
    pub anchor: Isometry3<f64>,
    /// Surface frame → world; fixed while the contact is active.
    pub surface: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchEvent {
    /// Weight moved, transition still running.
    InProgress,
    RemovalCompleted,
    /// Weight cap reached with residual force; the contact now restores itself.
    RemovalFailed,
    AdditionCompleted,
}

impl ContactState {
    pub fn disabled(bounds: &WeightBounds) -> Self {
        Self {
            mode: ContactMode::Disabled,
            weight: bounds.disabled,
            anchor: Isometry3::identity(),
            surface: Matrix3::identity(),
        }
    }

    pub fn in_transition(&self) -> bool {
        matches!(self.mode, ContactMode::Removing | ContactMode::Adding)
    }

    /// Scale the weight by one transition factor. Returns `true` when the
    /// weight has just reached its clamp, i.e. the transition must be finalized
    /// after this tick's solve.
    pub fn advance_weight(&mut self, alpha: f64, bounds: &WeightBounds) -> Result<bool, ContactError> {
        match self.mode {
            ContactMode::Removing => {
                self.weight = (self.weight * alpha).min(bounds.disabled);
                Ok(self.weight >= bounds.disabled)
            }
            ContactMode::Adding => {
                self.weight = (self.weight / alpha).max(bounds.enabled);
                Ok(self.weight <= bounds.enabled)
            }
            mode => Err(ContactError::NotInTransition(mode)),
        }
    }

    /// Close a transition whose weight reached its clamp. `wrench_norm` is the
    /// contact's wrench norm after the solve at the clamped weight.
    pub fn finalize(&mut self, wrench_norm: f64) -> SwitchEvent {
        match self.mode {
            ContactMode::Removing if wrench_norm < REMOVAL_FORCE_EPS => {
                self.mode = ContactMode::Disabled;
                SwitchEvent::RemovalCompleted
            }
            ContactMode::Removing => {
                // Decay back towards the enabled weight at the same rate.
                self.mode = ContactMode::Adding;
                SwitchEvent::RemovalFailed
            }
            ContactMode::Adding => {
                self.mode = ContactMode::Enabled;
                SwitchEvent::AdditionCompleted
            }
            _ => SwitchEvent::InProgress,
        }
    }
}

/// One transition tick: scale the weight and, if the clamp is reached,
/// finalize against `wrench_norm`.
pub fn switching_step(
    state: &ContactState,
    alpha: f64,
    bounds: &WeightBounds,
    wrench_norm: f64,
) -> Result<(ContactState, SwitchEvent), ContactError> {
    let mut next = *state;
    let event = if next.advance_weight(alpha, bounds)? {
        next.finalize(wrench_norm)
    } else {
        SwitchEvent::InProgress
    };
    Ok((next, event))
}
