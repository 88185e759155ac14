use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hubrisk::cli::{cmd_assess, cmd_cluster, cmd_identify, cmd_report, files, CliError, ConfigLayer, RunConfig};

#[derive(Parser)]
#[command(name = "hubrisk", version, about = "Agent-driven risk assessment and clustering of logistic hubs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Identify risk types over representative intervals and select tools.
    Identify,
    /// Run daily assessments (resumable) and write yearly profiles.
    Assess,
    /// Standardize profiles, compute similarities and cluster hubs.
    Cluster,
    /// Write the text report from the cluster outputs.
    Report,
}

#[derive(Args)]
struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    year: Option<i32>,
    /// Hub CSV (id,state,lat,lon).
    #[arg(long, global = true)]
    hubs: Option<PathBuf>,
    /// NOAA storm-events details CSV, optionally gzipped.
    #[arg(long, global = true)]
    storms: Option<PathBuf>,
    /// Directory of tool fixtures used with --offline.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Serve tools from fixtures instead of live services.
    #[arg(long, global = true)]
    offline: bool,
    /// scripted:<rules file> or http:<chat completions url>.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    radius_km: Option<f64>,
    /// Comma-separated start..end date ranges, end exclusive.
    #[arg(long, global = true, value_delimiter = ',')]
    intervals: Option<Vec<String>>,
    /// Comma-separated tool names; skips selected_tools.txt.
    #[arg(long, global = true, value_delimiter = ',')]
    selected_tools: Option<Vec<String>>,
    /// Number of tools selected by `identify`.
    #[arg(long, global = true)]
    tool_count: Option<usize>,
    #[arg(long, global = true, conflicts_with = "distance_threshold")]
    clusters: Option<usize>,
    /// Merge clusters while their distance (1 - cosine) is at most this.
    #[arg(long, global = true)]
    distance_threshold: Option<f64>,
    /// average, single or complete.
    #[arg(long, global = true)]
    linkage: Option<String>,
    /// Comma-separated risk types used as similarity columns.
    #[arg(long, global = true, value_delimiter = ',')]
    risk_columns: Option<Vec<String>>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// First assessed day (default: January 1 of --year).
    #[arg(long, global = true)]
    from: Option<String>,
    /// Day after the last assessed day (default: January 1 of the next year).
    #[arg(long, global = true)]
    to: Option<String>,
}

impl Flags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            year: self.year,
            hubs: self.hubs.clone(),
            storms: self.storms.clone(),
            fixtures: self.fixtures.clone(),
            offline: self.offline.then_some(true),
            backend: self.backend.clone(),
            model: self.model.clone(),
            radius_km: self.radius_km,
            intervals: self.intervals.clone(),
            selected_tools: self.selected_tools.clone(),
            tool_count: self.tool_count,
            clusters: self.clusters,
            distance_threshold: self.distance_threshold,
            linkage: self.linkage.clone(),
            risk_columns: self.risk_columns.clone(),
            out: self.out.clone(),
            parallelism: self.parallelism,
            from: self.from.clone(),
            to: self.to.clone(),
            ..ConfigLayer::default()
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let file = match &cli.flags.config {
        Some(p) => ConfigLayer::load(p)?,
        None => ConfigLayer::default(),
    };
    let cfg = RunConfig::resolve(cli.flags.layer().over(file))?;
    let out = cfg.output_dir.display();
    match cli.command {
        Command::Identify => {
            let s = cmd_identify(&cfg).context("identify failed")?;
            println!("identify: {} tasks, {} failed", s.tasks, s.failed_tasks);
            for (r, n) in &s.ranked_risks {
                println!("  {r}: {n}");
            }
            println!("selected tools: {}", s.selected_tools.join(", "));
            println!("wrote {out}/{}, {out}/{}, {out}/{}", files::RISK_TYPES, files::TOOL_EFFECTIVENESS, files::SELECTED_TOOLS);
        }
        Command::Assess => {
            let s = cmd_assess(&cfg).context("assess failed")?;
            println!("assessments: {} executed, {} reused, {} flagged", s.executed, s.reused, s.flagged);
            println!("{} findings over {} hubs; wrote {out}/{}", s.findings, s.profiles, files::profiles(cfg.year));
        }
        Command::Cluster => {
            let r = cmd_cluster(&cfg).context("cluster failed")?;
            for s in &r.summaries {
                println!("cluster {}: {} hub(s)", s.label, s.size);
            }
            println!(
                "wrote {out}/{}, {out}/{}, {out}/{}, {out}/{}",
                files::SIMILARITY,
                files::CLUSTERS,
                files::HEATMAP,
                files::GEOJSON
            );
        }
        Command::Report => {
            print!("{}", cmd_report(&cfg).context("report failed")?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
