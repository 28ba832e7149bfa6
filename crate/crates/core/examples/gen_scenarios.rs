//! Regenerates the bundled scenarios in `assets/scenarios`.
//!
//! cargo run -p retarget-core --example gen_scenarios

use std::path::Path;

use retarget_core::io::{Scenario, ScenarioHeader, ScheduledCommand};
use retarget_core::runtime::{Command, CommandMessage, Disturbance, SwitchAction, TrackingConfig, TrackingMode};

struct Builder {
    scenario: Scenario,
    seq: u64,
}

impl Builder {
    fn new(header: ScenarioHeader) -> Self {
        Self { scenario: Scenario { header, commands: Vec::new() }, seq: 0 }
    }

    fn at(&mut self, tick: u64, command: Command) {
        self.seq += 1;
        self.scenario.commands.push(ScheduledCommand { tick, command: CommandMessage::new(self.seq, command) });
    }

    /// Jog `name` by `total` in equal increments every `every` ticks over `[from, to)`.
    fn jog_ramp(&mut self, name: &str, from: u64, to: u64, every: u64, total: [f64; 3]) {
        let steps = (to - from) / every;
        let d = total.map(|v| v / steps as f64);
        for k in 0..steps {
            self.at(from + k * every, Command::JogEffector { name: name.into(), linear: d, angular: [0.0; 3] });
        }
    }

    fn switch(&mut self, tick: u64, name: &str, action: SwitchAction) {
        self.at(tick, Command::TriggerSwitch { name: name.into(), action });
    }
}

fn header(description: &str, ticks: u64) -> ScenarioHeader {
    ScenarioHeader {
        description: Some(description.into()),
        model: Some("biped18".into()),
        ticks: Some(ticks),
        ..Default::default()
    }
}

fn reach() -> Scenario {
    let mut b = Builder::new(header("left hand forward 15 cm and up 5 cm over 4 s, then hold", 10_000));
    b.jog_ramp("left_hand", 500, 4500, 10, [0.15, 0.0, 0.05]);
    b.scenario
}

fn far_reach() -> Scenario {
    let mut b = Builder::new(header("left hand target 80 cm forward, beyond the support polygon", 20_000));
    b.jog_ramp("left_hand", 500, 8500, 10, [0.8, 0.0, 0.0]);
    b.scenario
}

fn push() -> Scenario {
    let mut h = header("left hand onto a wall, then a 20 N/s normal force ramp at weight 1e4", 22_000);
    h.probe = vec!["left_hand".into()];
    h.probe_interval = Some(10);
    let mut b = Builder::new(h);
    b.jog_ramp("left_hand", 0, 1000, 10, [0.1, 0.0, 0.0]);
    b.switch(1200, "left_hand", SwitchAction::Add);
    for t in (3600..22_000).step_by(2) {
        let f = ((t - 3600) as f64 * 0.02).min(350.0);
        b.at(t, Command::SetForceTarget { name: "left_hand".into(), normal_force: f, weight: Some(1e4) });
    }
    b.scenario
}

fn switch() -> Scenario {
    let mut b = Builder::new(header("remove the right foot", 3500));
    b.switch(500, "right_foot", SwitchAction::Remove);
    b.scenario
}

fn locomotion() -> Scenario {
    let mut b = Builder::new(header("two steps: right foot 10 cm forward, then left foot 20 cm forward", 17_000));
    for (foot, t0, dx) in [("right_foot", 200, 0.1), ("left_foot", 8000, 0.2)] {
        let lift = t0 + 2400;
        b.switch(t0, foot, SwitchAction::Remove);
        b.jog_ramp(foot, lift, lift + 500, 10, [0.0, 0.0, 0.03]);
        b.jog_ramp(foot, lift + 500, lift + 1500, 10, [dx, 0.0, 0.0]);
        b.jog_ramp(foot, lift + 1500, lift + 2000, 10, [0.0, 0.0, -0.03]);
        b.switch(lift + 3000, foot, SwitchAction::Add);
    }
    b.scenario
}

fn disturbance() -> Scenario {
    let mut h = header("spring-damper tracking, knee pushed 0.3 rad, right foot slips 5 mm, reach", 10_000);
    h.tracking = Some(TrackingConfig {
        mode: TrackingMode::spring_damper(),
        noise: 1e-4,
        disturbances: vec![
            Disturbance::JointOffset { joint: "left_knee".into(), offset: 0.3, start: 1000, ramp: 300, hold: 2000 },
            Disturbance::ContactSlip { contact: "right_foot".into(), offset: [0.005, 0.0, 0.0], start: 5000, ramp: 200 },
        ],
    });
    let mut b = Builder::new(h);
    b.jog_ramp("left_hand", 500, 4500, 10, [0.1, 0.0, 0.0]);
    b.scenario
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenarios");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, scenario) in [
        ("reach", reach()),
        ("far_reach", far_reach()),
        ("push", push()),
        ("switch", switch()),
        ("locomotion", locomotion()),
        ("disturbance", disturbance()),
    ] {
        let path = dir.join(format!("{name}.jsonl"));
        std::fs::write(&path, scenario.to_jsonl()).unwrap();
        println!("{} ({} commands)", path.display(), scenario.commands.len());
    }
}
