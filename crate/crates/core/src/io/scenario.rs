use serde::{Deserialize, Serialize};

use super::IoError;
use crate::runtime::{CommandMessage, TrackingConfig};

/// Run parameters carried by the first line of a scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Bundled model name or URDF path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Number of ticks to run; defaults to one past the last command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Initially enabled contacts; defaults to the bundled model's supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<String>>,
    /// Joint values of the initial posture; defaults to the bundled stance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Vec<(String, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingConfig>,
    /// Contacts whose maximum feasible normal force is logged.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_interval: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    /// Ingested right before this tick runs.
    pub tick: u64,
    pub command: CommandMessage,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub header: ScenarioHeader,
    /// Sorted by tick, file order within a tick.
    pub commands: Vec<ScheduledCommand>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: ScenarioHeader,
}

pub const BUNDLED_SCENARIOS: &[&str] = &["reach", "far_reach", "push", "switch", "locomotion", "disturbance"];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    Some(match name {
        "reach" => include_str!("../../assets/scenarios/reach.jsonl"),
        "far_reach" => include_str!("../../assets/scenarios/far_reach.jsonl"),
        "push" => include_str!("../../assets/scenarios/push.jsonl"),
        "switch" => include_str!("../../assets/scenarios/switch.jsonl"),
        "locomotion" => include_str!("../../assets/scenarios/locomotion.jsonl"),
        "disturbance" => include_str!("../../assets/scenarios/disturbance.jsonl"),
        _ => return None,
    })
}

impl Scenario {
    /// Line-delimited JSON: an optional `{"header": …}` line, then one
    /// `{"tick": N, "command": …}` per line with non-decreasing ticks.
    /// Blank lines and lines starting with `//` are skipped.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut scenario = Scenario::default();
        let mut seen_command = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let err = |message: String| IoError::Parse { what: "scenario", line: i + 1, message };
            if line.starts_with("{\"header\"") {
                if seen_command {
                    return Err(err("header must precede commands".into()));
                }
                scenario.header = serde_json::from_str::<HeaderLine>(line).map_err(|e| err(e.to_string()))?.header;
                continue;
            }
            let cmd: ScheduledCommand = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if let Some(last) = scenario.commands.last() {
                if cmd.tick < last.tick {
                    return Err(err(format!("tick {} after tick {}", cmd.tick, last.tick)));
                }
            }
            seen_command = true;
            scenario.commands.push(cmd);
        }
        Ok(scenario)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::json!({ "header": self.header }).to_string();
        out.push('\n');
        for c in &self.commands {
            out.push_str(&serde_json::to_string(c).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn ticks(&self) -> u64 {
        self.header.ticks.unwrap_or_else(|| self.commands.last().map_or(0, |c| c.tick + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::Command;

    #[test]
    fn parse_roundtrip() {
        let text = r#"{"header":{"model":"biped18","ticks":20}}
// comment

{"tick":3,"command":{"seq":1,"kind":"emergencyStop"}}
{"tick":3,"command":{"seq":2,"kind":"resume"}}
"#;
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.ticks(), 20);
        assert_eq!(s.commands.len(), 2);
        assert_eq!(s.commands[1].command.command, Command::Resume);
        assert_eq!(Scenario::parse(&s.to_jsonl()).unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = Scenario::parse("{\"tick\":5,\"command\":{\"seq\":1,\"kind\":\"resume\"}}\n{\"tick\":4,\"command\":{\"seq\":2,\"kind\":\"resume\"}}")
            .unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 2, .. }), "{e}");
        let e = Scenario::parse("{\"tick\":5}").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 1, .. }));
        assert!(Scenario::parse("{\"header\":{\"bogus\":1}}").is_err());
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in BUNDLED_SCENARIOS {
            let s = Scenario::parse(bundled_scenario(name).unwrap()).unwrap();
            assert!(s.ticks() > 0, "{name}");
        }
    }
}
