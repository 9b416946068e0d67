use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use tracing_subscriber::EnvFilter;

use gadgetkit::agent::{GatewayConfig, MockGateway, Transcript};
use gadgetkit::protocol::parse_strict;
use gadgetkit::session::headless::{parse_commands, run_headless, RunOptions};
use gadgetkit::session::server::{gateway_factory, serve, AppState, ServerOptions};
use gadgetkit::session::{replay, Scenario, SessionError};
use gadgetkit::world::{render_svg, validate_sequence, DEFAULT_TICK_MS};

#[derive(Parser)]
#[command(name = "gadgetkit", version, about = "Tabletop robot game sessions, headless or served")]
struct Cli {
    /// JSON config file (gateway backend, tick size, command log).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario through a commands file and write artifacts.
    Run {
        scenario: PathBuf,
        commands: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-apply a transcript to the scenario and print the final world.
    Replay { scenario: PathBuf, transcript: PathBuf },
    /// Check a scenario, and optionally an action sequence against its start.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        sequence: Option<PathBuf>,
    },
    /// Render trails as SVG, after replaying a transcript if given.
    Render {
        scenario: PathBuf,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, default_value = "trails.svg")]
        out: PathBuf,
    },
    /// Serve the HTTP/WebSocket API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Pace simulation at wall-clock speed.
        #[arg(long)]
        realtime: bool,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    gateway: Option<GatewayConfig>,
    tick_ms: Option<f64>,
    log_commands: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    /// Bad invocation or missing input files.
    Usage(String),
    Turns,
    Other(String),
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load_scenario(p: &Path) -> Result<Scenario, Failure> {
    if !p.is_file() {
        return Err(Failure::Usage(format!("scenario file {} not found", p.display())));
    }
    Scenario::load(p).map_err(|e| Failure::Other(e.to_string()))
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))
}

fn load_config(p: Option<&Path>) -> Result<Config, Failure> {
    match p {
        None => Ok(Config::default()),
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::Usage(format!("config {}: {e}", p.display()))),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nusage: gadgetkit [--config FILE] <run|replay|validate|render|serve> ...  (see --help)");
            ExitCode::from(2)
        }
        Err(Failure::Turns) => ExitCode::from(1),
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_deref())?;
    let tick = config.tick_ms.unwrap_or(DEFAULT_TICK_MS);
    match cli.cmd {
        Cmd::Run { scenario, commands, out } => {
            let sc = load_scenario(&scenario)?;
            let script = parse_commands(&read(&commands)?)?;
            let gateway = match (&config.gateway, &sc.mock_script) {
                (Some(g), _) => g.build().map_err(|e| Failure::Other(e.to_string()))?,
                (None, Some(m)) => Box::new(MockGateway::load(m).map_err(|e| Failure::Other(e.to_string()))?),
                (None, None) => return Err(Failure::Usage("scenario has no mock_script; pass --config with a gateway".into())),
            };
            let opts = RunOptions { out_dir: Some(out.clone()), log_commands: config.log_commands, tick_ms: Some(tick) };
            let outcome = run_headless(sc, &script, gateway, &opts)?;
            for (i, r) in outcome.results.iter().enumerate() {
                match &r.error {
                    None => println!("turn {}: ok{}", i + 1, r.fallback.as_deref().map(|f| format!(" ({f} fallback)")).unwrap_or_default()),
                    Some(e) => println!("turn {}: FAILED: {e}", i + 1),
                }
            }
            println!("artifacts in {}", out.display());
            if outcome.ok {
                Ok(())
            } else {
                Err(Failure::Turns)
            }
        }
        Cmd::Replay { scenario, transcript } => {
            let sc = load_scenario(&scenario)?;
            let entries = Transcript::read_jsonl(&transcript).map_err(|e| Failure::Usage(format!("{}: {e}", transcript.display())))?;
            let world = replay(&sc, &entries, tick)?;
            println!("{}", serde_json::to_string_pretty(&world).expect("world serializes"));
            Ok(())
        }
        Cmd::Validate { scenario, sequence } => {
            let sc = load_scenario(&scenario)?;
            let world = match sc.validate() {
                Ok(w) => w,
                Err(issues) => {
                    for i in issues {
                        println!("{i}");
                    }
                    return Err(Failure::Turns);
                }
            };
            println!("scenario ok: {} robots, {} objects", world.robots.len(), world.objects.len());
            if let Some(p) = sequence {
                let seq = parse_strict(&read(&p)?).map_err(|e| Failure::Other(e.to_string()))?;
                let report = validate_sequence(&seq, &world);
                println!("{report}");
                if !report.is_ok() {
                    return Err(Failure::Turns);
                }
            }
            Ok(())
        }
        Cmd::Render { scenario, transcript, out } => {
            let sc = load_scenario(&scenario)?;
            let world = match transcript {
                Some(t) => {
                    let entries = Transcript::read_jsonl(&t).map_err(|e| Failure::Usage(format!("{}: {e}", t.display())))?;
                    replay(&sc, &entries, tick)?
                }
                None => sc.validate().map_err(SessionError::Scenario)?,
            };
            std::fs::write(&out, render_svg(&world)).map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
            Ok(())
        }
        Cmd::Serve { bind, realtime } => {
            let factory = gateway_factory(config.gateway);
            let app = AppState::new(factory, ServerOptions { realtime, tick_ms: Some(tick), ..ServerOptions::default() });
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|e| Failure::Other(format!("{bind}: {e}")))?;
                println!("listening on http://{}", listener.local_addr().map_err(|e| Failure::Other(e.to_string()))?);
                serve(listener, Arc::clone(&app)).await.map_err(|e| Failure::Other(e.to_string()))
            })
        }
    }
}
