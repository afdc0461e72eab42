use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use story_beliefs::config::{PipelineConfig, ProviderKind};
use story_beliefs::pipeline::{Pipeline, Stage};

/// Run the imagined-continuation belief pipeline.
#[derive(Debug, Parser)]
#[command(name = "story-beliefs", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, required_unless_present = "init_toy")]
    config: Option<PathBuf>,
    /// Run one stage instead of the whole pipeline.
    #[arg(long, value_parser = parse_stage)]
    stage: Option<Stage>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the provider kind.
    #[arg(long, value_parser = ["simulated", "remote"])]
    provider: Option<String>,
    /// Override the simulated provider seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of imagined continuations per chapter.
    #[arg(long)]
    n_continuations: Option<usize>,
    /// Write the bundled toy corpus and resources to DIR and exit.
    #[arg(long, value_name = "DIR", conflicts_with = "config")]
    init_toy: Option<PathBuf>,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    if let Some(dir) = cli.init_toy {
        story_beliefs::toy::write_toy(&dir).map_err(|e| (3, format!("{}: {e}", dir.display())))?;
        println!("toy corpus written to {}", dir.display());
        return Ok(());
    }
    let path = cli.config.expect("clap requires --config");
    let mut config = PipelineConfig::load(&path).map_err(|e| (2, e.to_string()))?;
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(p) = cli.provider {
        config.provider.kind = p.parse::<ProviderKind>().map_err(|e| (2, e))?;
    }
    if let Some(s) = cli.seed {
        config.provider.seed = s;
    }
    if let Some(n) = cli.n_continuations {
        config.imagination.n_continuations = n;
    }
    let pipeline = Pipeline::new(config).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let result = match cli.stage {
        Some(s) => pipeline.run_stage(s),
        None => pipeline.run_all().map(|_| ()),
    };
    let stats = pipeline.stats();
    log::info!("provider calls: {}, cache hits: {}", stats.provider_calls, stats.cache_hits);
    result.map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    println!("outputs in {}", pipeline.layout.root.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
