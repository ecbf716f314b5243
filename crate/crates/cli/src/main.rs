use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use xfam_cli::commands::{compress, corpus_cmd, sweep_cmd, Context};
use xfam_cli::server::{self, AppState, Upstream};
use xfam_cli::{load_profiles, CliError, Cli, Command, Result, Settings};

fn run(cli: Cli) -> Result<()> {
    let settings = cli.settings;
    match cli.command {
        Command::Compress { input, jsonl, output } => compress(&settings, input, jsonl, output),
        Command::Sweep { corpus, keep_rates, csv_out, json_out } => {
            sweep_cmd(&settings, &corpus, &keep_rates, csv_out.as_deref(), json_out.as_deref())
        }
        Command::Corpus { kind, count, min_len, max_len } => corpus_cmd(kind, count, settings.seed, min_len, max_len),
        Command::Serve { bind, max_input_bytes, upstream } => serve(&settings, bind, max_input_bytes, upstream),
    }
}

fn serve(settings: &Settings, bind: std::net::SocketAddr, max_input_bytes: usize, upstream: Option<String>) -> Result<()> {
    // Providers may own a blocking HTTP client, which must be created outside
    // the async runtime.
    let ctx = Context::from_settings(settings)?;
    let state = Arc::new(AppState {
        profiles: load_profiles(settings)?,
        overrides: settings.overrides(),
        source: ctx.source,
        draft: ctx.draft,
        target: ctx.target,
        max_input_bytes,
        upstream: upstream.map(Upstream::new),
    });
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io_err("starting runtime"))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(CliError::io_err(format!("binding {bind}")))?;
        let addr = listener.local_addr().map_err(CliError::io_err("reading local address"))?;
        eprintln!("listening on http://{addr}");
        server::serve(listener, state).await.map_err(CliError::io_err("serving"))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
