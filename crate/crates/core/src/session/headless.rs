//! Single-session scripted runs for the CLI and tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{Driver, LogDriver, Scenario, Session, SessionError, SessionOptions, SimDriver, TeeDriver, TurnResult};
use crate::agent::Gateway;
use crate::geometry::Pose;
use crate::world::render_svg;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const WORLD_FILE: &str = "world.json";
pub const TRAILS_FILE: &str = "trails.svg";

/// One line of a commands file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptLine {
    Command(String),
    /// `@poses {"id": {"x": .., "y": .., "heading": ..}}`
    Poses(BTreeMap<String, Pose>),
}

/// Parse a commands file: one command per line; blank lines and `#`
/// comments are skipped.
pub fn parse_commands(text: &str) -> Result<Vec<ScriptLine>, SessionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("@poses") {
            let poses = serde_json::from_str(rest.trim())
                .map_err(|e| SessionError::BadRequest(format!("commands line {}: {e}", i + 1)))?;
            out.push(ScriptLine::Poses(poses));
        } else {
            out.push(ScriptLine::Command(line.to_string()));
        }
    }
    Ok(out)
}

#[derive(Debug, Default, Clone)]
pub struct RunOptions {
    /// Artifact directory; created if missing.
    pub out_dir: Option<PathBuf>,
    /// Also log wheel commands here.
    pub log_commands: Option<PathBuf>,
    pub tick_ms: Option<f64>,
}

pub struct RunOutcome {
    /// Every line succeeded.
    pub ok: bool,
    pub results: Vec<TurnResult>,
    pub session: Session,
}

/// Run a scenario through a script of commands. Artifacts are written even
/// when turns fail.
pub fn run_headless(
    scenario: Scenario,
    script: &[ScriptLine],
    gateway: Box<dyn Gateway>,
    opts: &RunOptions,
) -> Result<RunOutcome, SessionError> {
    let io = |p: &Path, e: std::io::Error| SessionError::Io(format!("{}: {e}", p.display()));
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d).map_err(|e| io(d, e))?;
    }
    let driver: Box<dyn Driver> = match &opts.log_commands {
        Some(p) => Box::new(TeeDriver(vec![Box::new(SimDriver), Box::new(LogDriver::create(p).map_err(|e| io(p, e))?)])),
        None => Box::new(SimDriver),
    };
    let session_opts = SessionOptions {
        transcript_path: opts.out_dir.as_ref().map(|d| d.join(TRANSCRIPT_FILE)),
        driver: Some(driver),
        tick_ms: opts.tick_ms,
        ..SessionOptions::default()
    };
    let mut session = Session::create(scenario, gateway, session_opts)?;
    let mut ok = true;
    let mut results = Vec::new();
    for line in script {
        match line {
            ScriptLine::Command(text) => match session.submit_command(text) {
                Ok(r) => {
                    ok &= r.ok;
                    results.push(r);
                }
                Err(e) => {
                    tracing::warn!(error = %e, command = %text, "command rejected");
                    ok = false;
                    results.push(TurnResult { error: Some(e.to_string()), ..TurnResult::default() });
                }
            },
            ScriptLine::Poses(p) => {
                if let Err(e) = session.push_poses(p) {
                    tracing::warn!(error = %e, "pose update rejected");
                    ok = false;
                }
            }
        }
    }
    if let Some(d) = &opts.out_dir {
        let w = d.join(WORLD_FILE);
        std::fs::write(&w, session.world_json()).map_err(|e| io(&w, e))?;
        let s = d.join(TRAILS_FILE);
        std::fs::write(&s, render_svg(&session.world)).map_err(|e| io(&s, e))?;
    }
    Ok(RunOutcome { ok, results, session })
}
