mod common;

use retarget_core::io::{run, verify_log, RunSpec, BUNDLED_SCENARIOS};
use retarget_core::par::Execution;
use retarget_core::runtime::{Command, CommandMessage, Session, SessionSetup, SwitchAction, TickStatus};

const WINDOW: usize = 10_000;

#[test]
fn held_targets_settle_to_a_fixed_point() {
    // Held targets are not yet a minimizer of the torque and wrench
    // regularization, so the state drifts slowly before it comes to rest.
    let mut session = Session::new(SessionSetup::bundled("quadruped12").unwrap()).unwrap();
    let mut window_max = Vec::new();
    let mut current: f64 = 0.0;
    for k in 1..=200_000usize {
        current = current.max(session.tick().unwrap().step_norm);
        if k % WINDOW == 0 {
            window_max.push(current);
            if current <= 1e-9 {
                break;
            }
            current = 0.0;
        }
    }
    assert!(*window_max.last().unwrap() <= 1e-9, "{window_max:?}");
    for pair in window_max.windows(2) {
        assert!(pair[1] < pair[0], "step norm stopped decreasing: {window_max:?}");
    }
}

#[test]
fn emergency_stop_freezes_an_equilibrium_state_at_any_tick() {
    for stop_at in [5u64, 260, 900, 1600] {
        let mut session = Session::new(SessionSetup::bundled("biped18").unwrap()).unwrap();
        let remove = Command::TriggerSwitch { name: "right_foot".into(), action: SwitchAction::Remove };
        session.ingest(&CommandMessage::new(1, remove)).unwrap();
        let mut last = None;
        for _ in 0..stop_at {
            last = Some(session.tick().unwrap());
        }
        let frozen = last.unwrap().desired;
        session.ingest(&CommandMessage::new(2, Command::EmergencyStop)).unwrap();
        for _ in 0..300 {
            let r = session.tick().unwrap();
            assert_eq!(r.status, TickStatus::Stopped);
            assert_eq!(r.step_norm, 0.0);
            assert!(r.equilibrium_residual <= 1e-2, "stop at {stop_at}: {}", r.equilibrium_residual);
            assert_eq!(r.desired, frozen);
        }
        session.ingest(&CommandMessage::new(3, Command::Resume)).unwrap();
        for _ in 0..300 {
            let r = session.tick().unwrap();
            assert_eq!(r.status, TickStatus::Stepped);
            assert!(r.equilibrium_residual <= 1e-2);
        }
    }
}

#[test]
fn removed_contact_force_never_rises() {
    let records = common::run_bundled("switch", 0);
    let norms: Vec<(u64, f64)> = records
        .iter()
        .filter_map(|r| {
            let c = r.contact("right_foot")?;
            (c.mode == retarget_core::contact::ContactMode::Removing)
                .then(|| (r.tick, c.wrench.iter().map(|v| v * v).sum::<f64>().sqrt()))
        })
        .collect();
    assert!(norms.len() > 2000);
    // The first ticks re-balance the posture around the shrinking contact.
    for pair in norms[10..].windows(2) {
        assert!(pair[1].1 <= pair[0].1 + 1e-2, "rise at tick {}: {} -> {}", pair[1].0, pair[0].1, pair[1].1);
    }
}

#[test]
fn every_bundled_scenario_verifies_clean() {
    let dir = tempfile::tempdir().unwrap();
    std::thread::scope(|s| {
        for &name in BUNDLED_SCENARIOS {
            let out = dir.path().join(name);
            s.spawn(move || {
                let o = run(&RunSpec { scenario: name.into(), out, ..Default::default() }).unwrap();
                assert!(o.summary.rejected.is_empty(), "{name}: {:?}", o.summary.rejected);
                assert_eq!(o.summary.halted, None, "{name}");
                let seq = verify_log(&o.log, None, Execution::Sequential).unwrap();
                let par = verify_log(&o.log, None, Execution::Parallel).unwrap();
                assert_eq!(seq, par, "{name}");
                assert!(seq.passed(), "{name}: {:?}", seq.first());
                assert_eq!(seq.records as u64, o.summary.ticks);
            });
        }
    });
}
