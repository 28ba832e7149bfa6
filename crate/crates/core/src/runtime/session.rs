use std::time::Instant;

use nalgebra::{DVector, Translation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{matrix_rows, wrench_metrics};
use super::{
    max_feasible_normal_force, stance, Command, CommandMessage, ConfigurationData, ContactRecord, EffectorRecord,
    LogRecord, MeasuredState, PoseData, RuntimeError, SwitchAction, SwitchRecord, TickStatus, Tracker,
    TrackingConfig,
};
use crate::contact::{ContactKind, ContactMode, SwitchEvent};
use crate::model::{load_model, rotation_exp, GeneralizedPosition, Kinematics, RobotModel};
use crate::retarget::{
    advance_switching, finalize_switching, residuals, settle_wrenches, step, EffectorTarget, RetargetState,
    TaskTargets, WeightSet, WrenchTarget,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SessionConfig {
    /// Tick rate, Hz.
    pub rate: f64,
    /// Cutoff of the measured contact pose filter, Hz.
    pub filter_cutoff: f64,
    /// Contacts whose maximum feasible normal force is logged.
    pub probe: Vec<String>,
    /// Probe every this many ticks.
    pub probe_interval: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { rate: 1000.0, filter_cutoff: 20.0, probe: Vec::new(), probe_interval: 1 }
    }
}

impl SessionConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(RuntimeError::Setup(format!("tick rate must be positive, got {}", self.rate)));
        }
        if !(self.filter_cutoff > 0.0) {
            return Err(RuntimeError::Setup(format!("filter cutoff must be positive, got {}", self.filter_cutoff)));
        }
        if self.probe_interval == 0 {
            return Err(RuntimeError::Setup("probe interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to start a session.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub model: RobotModel,
    pub q: GeneralizedPosition,
    /// Contacts enabled at start.
    pub support: Vec<String>,
    pub weights: WeightSet,
    pub tracking: TrackingConfig,
    pub config: SessionConfig,
    pub seed: u64,
}

impl SessionSetup {
    /// A bundled model in its standing posture on its default supports.
    pub fn bundled(name: &str) -> Result<Self, RuntimeError> {
        let (text, joints, support) =
            crate::assets::bundled(name).ok_or_else(|| RuntimeError::Setup(format!("no bundled model `{name}`")))?;
        let model = load_model(text)?;
        Ok(Self::standing(model, joints, support))
    }

    /// `model` standing with the given joint values on `support`.
    pub fn standing(model: RobotModel, joints: &[(&str, f64)], support: &[&str]) -> Self {
        let q = stance(&model, joints);
        Self {
            model,
            q,
            support: support.iter().map(|s| s.to_string()).collect(),
            weights: WeightSet::default(),
            tracking: TrackingConfig::default(),
            config: SessionConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("sequence number {seq} is not after {last}")]
    Stale { seq: u64, last: u64 },
    #[error("unknown end effector `{0}`")]
    UnknownEffector(String),
    #[error("contact `{0}` is already in transition")]
    InTransition(String),
    #[error("contact `{0}` cannot switch that way from its current mode")]
    InvalidSwitch(String),
    #[error("emergency stop is active")]
    Stopped,
    #[error("session is halted: {0}")]
    Halted(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::Stale { .. } => "stale_sequence",
            CommandError::UnknownEffector(_) => "unknown_effector",
            CommandError::InTransition(_) => "in_transition",
            CommandError::InvalidSwitch(_) => "invalid_switch",
            CommandError::Stopped => "stopped",
            CommandError::Halted(_) => "halted",
            CommandError::InvalidValue(_) => "invalid_value",
        }
    }
}

/// One live retargeting session: targets, state, tracking stub and switch bookkeeping.
#[derive(Debug, Clone)]
pub struct Session {
    model: RobotModel,
    weights: WeightSet,
    config: SessionConfig,
    state: RetargetState,
    targets: TaskTargets,
    tracker: Tracker,
    tick: u64,
    last_seq: Option<u64>,
    stopped: bool,
    halted: Option<String>,
    /// Transitions whose weight reached its clamp in the previous tick.
    pending: Vec<usize>,
    transition_start: Vec<Option<u64>>,
    max_force: Vec<Option<f64>>,
    probe: Vec<usize>,
    measured: MeasuredState,
}

impl Session {
    pub fn new(setup: SessionSetup) -> Result<Self, RuntimeError> {
        setup.config.validate()?;
        setup.weights.validate()?;
        let SessionSetup { model, q, support, weights, tracking, config, seed } = setup;
        let names: Vec<&str> = support.iter().map(String::as_str).collect();
        let state = RetargetState::new(&model, q, &names, &weights)?;
        let targets = TaskTargets::hold(&model, &state.q);
        let state = settle_wrenches(&model, &state, &targets, &weights)?;
        let probe = config
            .probe
            .iter()
            .map(|name| state.contacts.index(name).ok_or_else(|| RuntimeError::Setup(format!("unknown contact `{name}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        for d in &tracking.disturbances {
            match d {
                super::Disturbance::JointOffset { joint, .. } if model.dof_index(joint).is_none() => {
                    return Err(RuntimeError::Setup(format!("unknown joint `{joint}`")))
                }
                super::Disturbance::ContactSlip { contact, .. } if state.contacts.index(contact).is_none() => {
                    return Err(RuntimeError::Setup(format!("unknown contact `{contact}`")))
                }
                _ => {}
            }
        }
        let count = model.end_effectors.len();
        let measured = MeasuredState::from_desired(&state);
        Ok(Self {
            tracker: Tracker::new(tracking, seed),
            model,
            weights,
            config,
            state,
            targets,
            tick: 0,
            last_seq: None,
            stopped: false,
            halted: None,
            pending: Vec::new(),
            transition_start: vec![None; count],
            max_force: vec![None; count],
            probe,
            measured,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn state(&self) -> &RetargetState {
        &self.state
    }

    pub fn targets(&self) -> &TaskTargets {
        &self.targets
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Index of the next tick to run.
    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn halted(&self) -> Option<&str> {
        self.halted.as_deref()
    }

    /// Latest measured state (the one fed back in the last tick).
    pub fn measured(&self) -> &MeasuredState {
        &self.measured
    }

    /// Probe contact `name` at the current state.
    pub fn max_feasible_normal_force(&self, name: &str) -> Result<f64, RuntimeError> {
        let i = self.effector(name).map_err(|e| RuntimeError::Setup(e.to_string()))?;
        max_feasible_normal_force(&self.model, &self.state, &self.weights, i)
    }

    fn effector(&self, name: &str) -> Result<usize, CommandError> {
        self.state.contacts.index(name).ok_or_else(|| CommandError::UnknownEffector(name.to_string()))
    }

    fn current_pose(&self, i: usize) -> nalgebra::Isometry3<f64> {
        Kinematics::new(&self.model, &self.state.q).effector_pose(i)
    }

    fn hold_effector(&mut self, i: usize) {
        let orientation = self.state.contacts.contacts[i].spec.kind == ContactKind::Plane;
        self.targets.effectors[i] = Some(EffectorTarget { pose: self.current_pose(i), orientation });
    }

    /// Apply one operator command between ticks.
    pub fn ingest(&mut self, msg: &CommandMessage) -> Result<(), CommandError> {
        if let Some(last) = self.last_seq {
            if msg.seq <= last {
                return Err(CommandError::Stale { seq: msg.seq, last });
            }
        }
        self.last_seq = Some(msg.seq);
        match &msg.command {
            Command::Resume => {
                self.resume().map_err(|e| CommandError::Halted(e.to_string()))?;
                return Ok(());
            }
            Command::EmergencyStop => {
                self.emergency_stop();
                return Ok(());
            }
            _ if self.stopped => return Err(CommandError::Stopped),
            _ => {}
        }
        if let Some(reason) = &self.halted {
            return Err(CommandError::Halted(reason.clone()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &msg.command {
            Command::SetEffectorTarget { name, position, orientation } => {
                let i = self.effector(name)?;
                let data = PoseData { position: *position, orientation: orientation.unwrap_or([1.0, 0.0, 0.0, 0.0]) };
                if !data.is_finite() {
                    return Err(CommandError::InvalidValue("pose must be finite".into()));
                }
                if orientation.is_some_and(|o| o.iter().map(|v| v * v).sum::<f64>() < 1e-12) {
                    return Err(CommandError::InvalidValue("orientation quaternion is zero".into()));
                }
                self.targets.effectors[i] =
                    Some(EffectorTarget { pose: data.to_isometry(), orientation: orientation.is_some() });
            }
            Command::JogEffector { name, linear, angular } => {
                let i = self.effector(name)?;
                if !finite(linear) || !finite(angular) {
                    return Err(CommandError::InvalidValue("jog must be finite".into()));
                }
                let base = match self.targets.effectors[i] {
                    Some(t) => t,
                    None => EffectorTarget {
                        pose: self.current_pose(i),
                        orientation: self.state.contacts.contacts[i].spec.kind == ContactKind::Plane,
                    },
                };
                let mut pose = base.pose;
                pose.translation = Translation3::from(pose.translation.vector + Vector3::from(*linear));
                pose.rotation = rotation_exp(&Vector3::from(*angular)) * pose.rotation;
                let orientation = base.orientation || angular.iter().any(|v| *v != 0.0);
                self.targets.effectors[i] = Some(EffectorTarget { pose, orientation });
            }
            Command::SetForceTarget { name, normal_force, weight } => {
                let i = self.effector(name)?;
                if !(normal_force.is_finite() && *normal_force >= 0.0) {
                    return Err(CommandError::InvalidValue(format!("normal force {normal_force}")));
                }
                if weight.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
                    return Err(CommandError::InvalidValue("force weight must be positive".into()));
                }
                let dim = self.state.contacts.contacts[i].spec.wrench_dim();
                let mut wrench = DVector::zeros(dim);
                wrench[dim - 1] = *normal_force;
                self.targets.wrenches[i] = Some(WrenchTarget { wrench, weight: *weight });
            }
            Command::ClearForceTarget { name } => {
                let i = self.effector(name)?;
                self.targets.wrenches[i] = None;
            }
            Command::TriggerSwitch { name, action } => {
                let i = self.effector(name)?;
                let mode = self.state.contacts.contacts[i].state.mode;
                match (action, mode) {
                    (_, ContactMode::Removing | ContactMode::Adding) => {
                        return Err(CommandError::InTransition(name.clone()))
                    }
                    (SwitchAction::Remove, ContactMode::Enabled) => {
                        self.state.contacts.contacts[i].state.mode = ContactMode::Removing;
                        self.targets.wrenches[i] = None;
                    }
                    (SwitchAction::Add, ContactMode::Disabled) => {
                        self.state
                            .establish_contact(&self.model, i, ContactMode::Adding, &self.weights)
                            .map_err(|e| CommandError::InvalidSwitch(e.to_string()))?;
                    }
                    _ => return Err(CommandError::InvalidSwitch(name.clone())),
                }
                self.transition_start[i] = Some(self.tick);
            }
            Command::SetWeights { weights } => {
                self.weights.apply(weights).map_err(|e| CommandError::InvalidValue(e.to_string()))?;
            }
            Command::EmergencyStop | Command::Resume => unreachable!("handled above"),
        }
        Ok(())
    }

    /// Freeze targets at the current desired state and stop stepping.
    pub fn emergency_stop(&mut self) {
        self.stopped = true;
        for i in 0..self.model.end_effectors.len() {
            if !self.state.contacts.contacts[i].is_active() {
                self.hold_effector(i);
            }
        }
        self.targets.posture = self.state.q.joints.clone();
    }

    /// Leave emergency stop. A halted session restarts from the measured
    /// configuration with rebalanced wrenches.
    pub fn resume(&mut self) -> Result<(), RuntimeError> {
        self.stopped = false;
        if self.halted.is_some() {
            self.state.q = self.measured.q.clone();
            self.state.measured_joints = None;
            self.targets.posture = self.state.q.joints.clone();
            for i in 0..self.model.end_effectors.len() {
                if !self.state.contacts.contacts[i].is_active() {
                    self.hold_effector(i);
                }
            }
            self.state = settle_wrenches(&self.model, &self.state, &self.targets, &self.weights)?;
            self.halted = None;
        }
        Ok(())
    }

    /// Overwrite contact anchors with filtered measured poses, then clamp the
    /// desired joints into a band around the measured ones.
    pub fn apply_measured_feedback(&mut self, measured: &MeasuredState) {
        let a = 1.0 - (-2.0 * std::f64::consts::PI * self.config.filter_cutoff * self.config.dt()).exp();
        for (c, pose) in self.state.contacts.contacts.iter_mut().zip(&measured.contact_poses) {
            if let (true, Some(pose)) = (c.is_active(), pose) {
                c.state.anchor = c.state.anchor.lerp_slerp(pose, a);
            }
        }
        let clamp = self.weights.clamp_joint;
        let m = &measured.q.joints;
        for k in 0..m.len() {
            let q = &mut self.state.q.joints[k];
            *q = m[k] + (*q - m[k]).clamp(-clamp, clamp);
        }
        self.state.measured_joints = Some(m.clone());
    }

    fn switch_progress(&self, i: usize) -> Option<f64> {
        let c = &self.state.contacts.contacts[i];
        let (lo, hi) = (self.weights.w_enabled_contact.ln(), self.weights.w_disabled_contact.ln());
        let w = c.state.weight.ln();
        match c.state.mode {
            ContactMode::Removing => Some(((w - lo) / (hi - lo)).clamp(0.0, 1.0)),
            ContactMode::Adding => Some(((hi - w) / (hi - lo)).clamp(0.0, 1.0)),
            _ => None,
        }
    }

    /// Run one tick: execute the previous desired state, feed the measurement
    /// back, close and advance contact transitions, step once, log.
    pub fn tick(&mut self) -> Result<LogRecord, RuntimeError> {
        if let Some(reason) = &self.halted {
            return Err(RuntimeError::Halted(reason.clone()));
        }
        let start = Instant::now();
        let tick = self.tick;
        let measured = self.tracker.advance(&self.model, &self.state, tick, self.config.dt());
        let measured_wrenches: Vec<Vec<f64>> = {
            let offsets = self.state.contacts.offsets();
            self.state
                .contacts
                .contacts
                .iter()
                .zip(offsets)
                .map(|(c, off)| match off {
                    Some(o) if o + c.spec.wrench_dim() <= measured.lambda.len() => {
                        measured.lambda.as_slice()[o..o + c.spec.wrench_dim()].to_vec()
                    }
                    _ => Vec::new(),
                })
                .collect()
        };
        if !self.tracker.is_perfect() {
            self.apply_measured_feedback(&measured);
        }

        let mut events = Vec::new();
        let report = if self.stopped {
            None
        } else {
            let ready = std::mem::take(&mut self.pending);
            for (i, event) in finalize_switching(&mut self.state, &self.weights, &ready) {
                let begun = self.transition_start[i].unwrap_or(tick);
                match event {
                    SwitchEvent::RemovalCompleted => {
                        self.hold_effector(i);
                        self.targets.wrenches[i] = None;
                        self.transition_start[i] = None;
                    }
                    SwitchEvent::AdditionCompleted => self.transition_start[i] = None,
                    SwitchEvent::RemovalFailed => self.transition_start[i] = Some(tick),
                    SwitchEvent::InProgress => continue,
                }
                let ticks = tick - begun;
                events.push(SwitchRecord {
                    contact: self.state.contacts.contacts[i].name.clone(),
                    event,
                    ticks,
                    duration: ticks as f64 / self.config.rate,
                });
            }
            let stepped = advance_switching(&mut self.state, &self.weights)
                .and_then(|ready| step(&self.model, &self.state, &self.targets, &self.weights).map(|r| (ready, r)));
            match stepped {
                Ok((ready, (next, report))) => {
                    self.pending = ready;
                    self.state = next;
                    Some(report)
                }
                Err(e) => {
                    self.halted = Some(e.to_string());
                    self.measured = measured;
                    return Err(e.into());
                }
            }
        };

        if tick % self.config.probe_interval == 0 {
            for &i in &self.probe {
                self.max_force[i] = if self.state.contacts.contacts[i].is_active() {
                    max_feasible_normal_force(&self.model, &self.state, &self.weights, i).ok()
                } else {
                    None
                };
            }
        }

        let record = self.record(tick, &measured, &measured_wrenches, report, events, start);
        self.measured = measured;
        self.tick += 1;
        Ok(record)
    }

    fn record(
        &self,
        tick: u64,
        measured: &MeasuredState,
        measured_wrenches: &[Vec<f64>],
        report: Option<crate::retarget::StepReport>,
        events: Vec<SwitchRecord>,
        start: Instant,
    ) -> LogRecord {
        let kin = Kinematics::new(&self.model, &self.state.q);
        let measured_kin = Kinematics::new(&self.model, &measured.q);
        let total_normal: f64 = (0..self.state.contacts.contacts.len())
            .filter_map(|i| self.state.wrench(i).and_then(|w| w.last().copied()))
            .sum();
        let contacts = self
            .state
            .contacts
            .contacts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let wrench = self.state.wrench(i).map(<[f64]>::to_vec).unwrap_or_default();
                let (cop, friction_ratio) = wrench_metrics(c.spec.kind, &wrench);
                let normal_share =
                    wrench.last().filter(|_| total_normal > 0.0).map(|fz| fz / total_normal);
                ContactRecord {
                    name: c.name.clone(),
                    kind: c.spec.kind,
                    mode: c.state.mode,
                    weight: c.state.weight,
                    anchor: PoseData::from_isometry(&c.state.anchor),
                    surface: matrix_rows(&c.state.surface),
                    measured_wrench: measured_wrenches.get(i).cloned().unwrap_or_default(),
                    wrench,
                    cop,
                    friction_ratio,
                    normal_share,
                    switch_progress: self.switch_progress(i),
                    max_normal_force: self.max_force[i],
                }
            })
            .collect();
        let effectors = (0..self.model.end_effectors.len())
            .map(|i| EffectorRecord {
                name: self.model.end_effectors[i].name.clone(),
                commanded: self.targets.effectors[i].map(|t| PoseData::from_isometry(&t.pose)),
                desired: PoseData::from_isometry(&kin.effector_pose(i)),
                measured: PoseData::from_isometry(&measured_kin.effector_pose(i)),
            })
            .collect();
        let (status, report) = match report {
            Some(r) => (TickStatus::Stepped, r),
            None => {
                let (contact_residuals, tracking_residuals, equilibrium_residual) =
                    residuals(&self.model, &self.state, &self.targets);
                let frozen = crate::retarget::StepReport {
                    contact_residuals,
                    tracking_residuals,
                    equilibrium_residual,
                    saturated: Vec::new(),
                    qp_iterations: 0,
                    status: crate::qp::QpStatus::Optimal,
                    step_norm: 0.0,
                    min_slack: f64::NAN,
                };
                (TickStatus::Stopped, frozen)
            }
        };
        LogRecord {
            tick,
            time: tick as f64 / self.config.rate,
            status,
            qp_status: (status == TickStatus::Stepped).then_some(report.status),
            desired: ConfigurationData::from_position(&self.state.q),
            measured: ConfigurationData::from_position(&measured.q),
            tau: self.state.tau.as_slice().to_vec(),
            contacts,
            effectors,
            qp_iterations: report.qp_iterations,
            step_norm: report.step_norm,
            equilibrium_residual: report.equilibrium_residual,
            contact_residual: report.max_contact_position_residual(),
            tracking_residual: report.max_tracking_position_residual(),
            min_slack: (status == TickStatus::Stepped && report.min_slack.is_finite()).then_some(report.min_slack),
            saturated: report.saturated,
            events,
            wall_ns: start.elapsed().as_nanos() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn biped() -> Session {
        Session::new(SessionSetup::bundled("biped18").unwrap()).unwrap()
    }

    fn msg(seq: u64, command: Command) -> CommandMessage {
        CommandMessage::new(seq, command)
    }

    #[test]
    fn perfect_tracking_reports_desired() {
        let mut s = biped();
        let mut prev = ConfigurationData::from_position(&s.state().q);
        for _ in 0..20 {
            let rec = s.tick().unwrap();
            assert_eq!(rec.measured, prev);
            assert!(rec.equilibrium_residual < 1e-2);
            prev = rec.desired;
        }
    }

    #[test]
    fn jog_shifts_target_by_the_jog() {
        let mut s = biped();
        let hand = s.model().effector_index("left_hand").unwrap();
        let before = s.current_pose(hand).translation.vector;
        s.ingest(&msg(1, Command::JogEffector { name: "left_hand".into(), linear: [1e-3, 0.0, 0.0], angular: [0.0; 3] }))
            .unwrap();
        let after = s.targets().effectors[hand].unwrap().pose.translation.vector;
        assert!((after - before - Vector3::new(1e-3, 0.0, 0.0)).norm() < 1e-15);
        let rec = s.tick().unwrap();
        let commanded = rec.effector("left_hand").unwrap().commanded.unwrap();
        assert!((commanded.position[0] - after.x).abs() < 1e-15);
    }

    #[test]
    fn ingest_rejections() {
        let mut s = biped();
        let remove = |name: &str| Command::TriggerSwitch { name: name.into(), action: SwitchAction::Remove };
        s.ingest(&msg(5, remove("right_foot"))).unwrap();
        assert_eq!(s.state().contacts.contacts[1].state.mode, ContactMode::Removing);
        assert_eq!(s.ingest(&msg(5, remove("left_foot"))), Err(CommandError::Stale { seq: 5, last: 5 }));
        assert_eq!(s.ingest(&msg(6, remove("right_foot"))), Err(CommandError::InTransition("right_foot".into())));
        assert_eq!(s.ingest(&msg(7, remove("nose"))), Err(CommandError::UnknownEffector("nose".into())));
        assert!(matches!(s.ingest(&msg(8, remove("left_hand"))), Err(CommandError::InvalidSwitch(_))));
        let add = Command::TriggerSwitch { name: "left_foot".into(), action: SwitchAction::Add };
        assert_eq!(s.ingest(&msg(9, add)).unwrap_err().code(), "invalid_switch");
        let bad = Command::SetForceTarget { name: "left_hand".into(), normal_force: f64::NAN, weight: None };
        assert_eq!(s.ingest(&msg(10, bad)).unwrap_err().code(), "invalid_value");
    }

    #[test]
    fn emergency_stop_freezes_state() {
        let mut s = biped();
        s.ingest(&msg(1, Command::JogEffector { name: "left_hand".into(), linear: [0.05, 0.0, 0.0], angular: [0.0; 3] }))
            .unwrap();
        for _ in 0..5 {
            s.tick().unwrap();
        }
        s.ingest(&msg(2, Command::EmergencyStop)).unwrap();
        let frozen = s.state().clone();
        for _ in 0..10 {
            let rec = s.tick().unwrap();
            assert_eq!(rec.status, TickStatus::Stopped);
            assert_eq!(rec.step_norm, 0.0);
            assert!(rec.equilibrium_residual < 1e-2);
        }
        assert_eq!(s.state(), &frozen);
        let jog = Command::JogEffector { name: "left_hand".into(), linear: [0.01, 0.0, 0.0], angular: [0.0; 3] };
        assert_eq!(s.ingest(&msg(3, jog)), Err(CommandError::Stopped));
        s.ingest(&msg(4, Command::Resume)).unwrap();
        // Targets were frozen at the desired state, so stepping barely moves.
        let rec = s.tick().unwrap();
        assert_eq!(rec.status, TickStatus::Stepped);
        assert!(rec.tracking_residual < 1e-4, "{}", rec.tracking_residual);
    }

    #[test]
    fn joint_clamp_follows_measurement() {
        let mut s = biped();
        let mut measured = MeasuredState::from_desired(s.state());
        let k = s.model().dof_index("left_elbow").unwrap();
        let desired = s.state().q.joints[k];
        measured.q.joints[k] += 0.3;
        s.apply_measured_feedback(&measured);
        let gap = measured.q.joints[k] - s.state().q.joints[k];
        assert!((gap - 0.1).abs() < 1e-15, "{gap}");
        assert!(s.state().q.joints[k] > desired);
        assert_eq!(s.state().measured_joints.as_ref().unwrap(), &measured.q.joints);
    }

    #[test]
    fn slipped_anchor_is_filtered_towards_measurement() {
        let mut s = biped();
        let mut measured = MeasuredState::from_desired(s.state());
        let before = s.state().contacts.contacts[0].state.anchor;
        let mut slipped = before;
        slipped.translation.vector.x += 5e-3;
        measured.contact_poses[0] = Some(slipped);
        for _ in 0..1000 {
            s.apply_measured_feedback(&measured);
        }
        let anchor = s.state().contacts.contacts[0].state.anchor;
        assert!((anchor.translation.vector - slipped.translation.vector).norm() < 1e-12);
    }
}
