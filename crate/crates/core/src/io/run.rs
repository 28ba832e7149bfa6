use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    read_file, write_contacts_csv, write_effectors_csv, IoError, LogHeader, LogWriter, Scenario, Summary,
    SummaryBuilder, VerifyReport, VerifyTolerances,
};
use crate::model::{load_model, RobotModel};
use crate::par::Execution;
use crate::retarget::WeightSet;
use crate::runtime::{LogRecord, RuntimeError, Session, SessionSetup, TrackingConfig, TrackingMode};

/// Inputs of one batch run. `model` and `scenario` accept bundled names or paths.
#[derive(Debug, Clone, Default)]
pub struct RunSpec {
    pub model: Option<String>,
    pub weights: Option<PathBuf>,
    pub scenario: String,
    /// `perfect`, `spring-damper`, or a JSON file holding a tracking config.
    pub tracking: Option<String>,
    pub rate: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub tick: u64,
    pub seq: u64,
    pub code: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub rejected: Vec<Rejection>,
    /// Set when a tick failed; the session stops there.
    pub halted: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Summary,
    pub log: PathBuf,
    pub header: LogHeader,
}

fn load_scenario(name: &str) -> Result<Scenario, IoError> {
    match super::bundled_scenario(name) {
        Some(text) => Scenario::parse(text),
        None => Scenario::parse(&read_file(Path::new(name))?),
    }
}

fn tracking_from_flag(flag: &str, header: Option<&TrackingConfig>) -> Result<TrackingConfig, IoError> {
    let base = header.cloned().unwrap_or_default();
    match flag {
        "perfect" => Ok(TrackingConfig { mode: TrackingMode::Perfect, ..base }),
        "spring-damper" => Ok(TrackingConfig { mode: TrackingMode::spring_damper(), ..base }),
        path => serde_json::from_str(&read_file(Path::new(path))?)
            .map_err(|e| IoError::Input(format!("tracking config {path}: {e}"))),
    }
}

/// A bundled model by name, else a URDF file.
pub fn load_named_model(name: &str) -> Result<RobotModel, IoError> {
    let text = match crate::assets::bundled(name) {
        Some((text, _, _)) => text.to_string(),
        None => read_file(Path::new(name))?,
    };
    Ok(load_model(&text).map_err(RuntimeError::from)?)
}

/// Re-check a written log. The model comes from `model` if given, else from
/// the log header.
pub fn verify_log(path: &Path, model: Option<&str>, exec: Execution) -> Result<VerifyReport, IoError> {
    let file = File::open(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    let (header, records) = super::read_log(std::io::BufReader::new(file))?;
    let model = load_named_model(model.unwrap_or(&header.model))?;
    Ok(super::verify_records(&model, &header, &records, &VerifyTolerances::default(), exec))
}

/// Session setup and model label for `spec` with its scenario.
pub fn resolve_setup(spec: &RunSpec, scenario: &Scenario) -> Result<(SessionSetup, String), IoError> {
    let h = &scenario.header;
    let model_name = spec
        .model
        .clone()
        .or_else(|| h.model.clone())
        .ok_or_else(|| IoError::Input("no model given on the command line or in the scenario".into()))?;
    let mut setup = match crate::assets::bundled(&model_name) {
        Some(_) => SessionSetup::bundled(&model_name)?,
        None => SessionSetup::standing(load_named_model(&model_name)?, &[], &[]),
    };
    if let Some(stance) = &h.stance {
        let joints: Vec<(&str, f64)> = stance.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        for (name, _) in &joints {
            if setup.model.dof_index(name).is_none() {
                return Err(IoError::Input(format!("stance names unknown joint `{name}`")));
            }
        }
        setup.q = crate::runtime::stance(&setup.model, &joints);
    }
    if let Some(support) = &h.support {
        setup.support = support.clone();
    }
    if let Some(path) = &spec.weights {
        setup.weights = WeightSet::parse(&read_file(path)?).map_err(|e| IoError::Input(e.to_string()))?;
    }
    setup.tracking = match &spec.tracking {
        Some(flag) => tracking_from_flag(flag, h.tracking.as_ref())?,
        None => h.tracking.clone().unwrap_or_default(),
    };
    if let Some(rate) = spec.rate.or(h.rate) {
        setup.config.rate = rate;
    }
    setup.config.probe = h.probe.clone();
    if let Some(k) = h.probe_interval {
        setup.config.probe_interval = k;
    }
    setup.seed = spec.seed;
    setup.config.validate()?;
    Ok((setup, model_name))
}

/// Run `scenario` on a fresh session, handing each record to `sink`.
pub fn replay<F>(session: &mut Session, scenario: &Scenario, mut sink: F) -> Result<ReplayOutcome, IoError>
where
    F: FnMut(&LogRecord) -> Result<(), IoError>,
{
    let mut rejected = Vec::new();
    let mut next = 0;
    for tick in 0..scenario.ticks() {
        while let Some(cmd) = scenario.commands.get(next).filter(|c| c.tick <= tick) {
            if let Err(e) = session.ingest(&cmd.command) {
                rejected.push(Rejection { tick, seq: cmd.command.seq, code: e.code().into(), text: e.to_string() });
            }
            next += 1;
        }
        match session.tick() {
            Ok(record) => sink(&record)?,
            Err(e) => return Ok(ReplayOutcome { rejected, halted: Some(e.to_string()) }),
        }
    }
    Ok(ReplayOutcome { rejected, halted: None })
}

/// Run a scenario and write `log.jsonl`, `summary.json`, `contacts.csv` and
/// `effectors.csv` into `spec.out`.
pub fn run(spec: &RunSpec) -> Result<RunOutcome, IoError> {
    let scenario = load_scenario(&spec.scenario)?;
    let (setup, model_name) = resolve_setup(spec, &scenario)?;
    let header = LogHeader::new(&model_name, setup.config.rate, &setup.weights, &setup.tracking, setup.seed);
    let mut session = Session::new(setup)?;

    std::fs::create_dir_all(&spec.out)
        .map_err(|source| IoError::File { path: spec.out.display().to_string(), source })?;
    let create = |name: &str| {
        let path = spec.out.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| IoError::File { path: path.display().to_string(), source })
    };
    let log_path = spec.out.join("log.jsonl");
    let mut log = LogWriter::new(create("log.jsonl")?, &header)?;
    let mut summary = SummaryBuilder::default();
    let mut records = Vec::new();
    let outcome = replay(&mut session, &scenario, |r| {
        log.append(r)?;
        summary.push(r);
        records.push(r.clone());
        Ok(())
    })?;
    log.finish()?;
    write_contacts_csv(create("contacts.csv")?, &records)?;
    write_effectors_csv(create("effectors.csv")?, &records)?;
    let summary = summary.finish(outcome.rejected, outcome.halted);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| IoError::Schema(e.to_string()))?;
    std::fs::write(spec.out.join("summary.json"), text)?;
    Ok(RunOutcome { summary, log: log_path, header })
}
