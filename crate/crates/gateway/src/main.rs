use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use teleop_core::agent::AgentConfig;
use teleop_core::models::{RemoteConfig, Script};
use teleop_core::scenarios::{builtin_names, Scenario};
use teleop_gateway::{repl, FileConfig, GatewayError, ModelChoice, ServiceOptions, SessionService};

#[derive(Debug, Parser)]
#[command(name = "teleop", version, about = "Operate a simulated robot through conversation")]
struct Cli {
    /// Bundled scenario name, or a path to a scenario TOML file.
    #[arg(long, global = true, default_value = "ros_demo")]
    scenario: String,
    /// Rules file for the scripted model, replacing the scenario's own.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Model::Scripted)]
    model: Model,
    /// Directory for per-session JSONL transcripts.
    #[arg(long, global = true)]
    log_dir: Option<PathBuf>,
    /// TOML file with [model] and [agent] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Scripted,
    Remote,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive session on standard input (the default).
    Repl,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// List the bundled scenarios.
    Scenarios,
}

fn load_scenario(arg: &str) -> Result<Option<Scenario>, GatewayError> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "toml") || path.is_file() {
        return Ok(Some(Scenario::from_file(path)?));
    }
    Ok(None)
}

/// Returns the options and the scenario name to use.
fn options(cli: &Cli) -> Result<(ServiceOptions, String), GatewayError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let agent = file.agent.apply(AgentConfig::default())?;
    let model = match cli.model {
        Model::Scripted => ModelChoice::Scripted,
        Model::Remote => {
            let endpoint = file.model.endpoint.clone().ok_or_else(|| {
                GatewayError::InvalidConfig("--model remote needs model.endpoint in the config file".into())
            })?;
            let name = file.model.name.clone().ok_or_else(|| {
                GatewayError::InvalidConfig("--model remote needs model.name in the config file".into())
            })?;
            ModelChoice::Remote {
                config: RemoteConfig::new(endpoint, name),
                api_key: None,
            }
        }
    };
    let script = match &cli.script {
        Some(p) => Some(Script::from_file(p).map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", p.display())))?),
        None => None,
    };
    if let Some(dir) = &cli.log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut scenarios = Vec::new();
    let name = match load_scenario(&cli.scenario)? {
        Some(s) => {
            let name = s.name().to_string();
            scenarios.push(s);
            name
        }
        None => cli.scenario.clone(),
    };
    let opts = ServiceOptions {
        model,
        script,
        agent,
        log_dir: cli.log_dir.clone(),
        scenarios,
    };
    Ok((opts, name))
}

fn run(cli: Cli) -> Result<(), GatewayError> {
    if let Some(Command::Scenarios) = cli.command {
        for n in builtin_names() {
            println!("{n}");
        }
        return Ok(());
    }
    let (opts, scenario) = options(&cli)?;
    let service = SessionService::new(opts);
    match cli.command {
        Some(Command::Serve { addr }) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(teleop_gateway::http::serve(Arc::new(service), addr))?;
            Ok(())
        }
        _ => repl::run_stdio(&service, &scenario),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teleop: {e}");
            ExitCode::FAILURE
        }
    }
}
