use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::RunConfig;
use super::emit::{self, Heatmap};
use super::CliError;
use crate::agent::{AgentConfig, AgentRuntime, Notebook};
use crate::analytics::{agglomerative_cluster_with, cluster_summary, cosine_similarity_matrix, standardize, ClusterSummary};
use crate::gateway::{connect, HttpClient, RateLimiter, RetryPolicy};
use crate::ingest::{load_hubs, load_storm_csv, Hub};
use crate::pipeline::{
    aggregate_yearly, identify_risk_types, profile_columns, read_profiles_csv, run_daily_batch, select_tools,
    trace_path, validate_intervals, write_json_atomic, write_profiles_csv, BatchConfig, RiskVocabulary,
    YearlyRiskProfile,
};
use crate::tools::{build_registry, ToolContext, ToolRegistry};

/// Output file names under the output directory.
pub mod files {
    pub const RISK_TYPES: &str = "risk_types.csv";
    pub const TOOL_EFFECTIVENESS: &str = "tool_effectiveness.csv";
    pub const SELECTED_TOOLS: &str = "selected_tools.txt";
    pub const SIMILARITY: &str = "similarity.csv";
    pub const CLUSTERS: &str = "clusters.csv";
    pub const HEATMAP: &str = "heatmap.json";
    pub const GEOJSON: &str = "clusters.geojson";
    pub const REPORT: &str = "report.txt";

    pub fn profiles(year: i32) -> String {
        format!("profiles_{year}.csv")
    }

    /// Notebook of run `run-<year>`, shared by `identify` and `assess`.
    pub fn notebook(year: i32) -> String {
        format!("notebook/run-{year}.ndjson")
    }
}

struct Session {
    hubs: Arc<Vec<Hub>>,
    registry: ToolRegistry,
    runtime: AgentRuntime,
    notebook: Arc<Notebook>,
    vocabulary: RiskVocabulary,
}

fn load_hub_list(cfg: &RunConfig) -> Result<Vec<Hub>, CliError> {
    let hubs = load_hubs(&cfg.hubs_path)?;
    if hubs.is_empty() {
        return Err(CliError::Config(format!("hubs file {} lists no hubs", cfg.hubs_path.display())));
    }
    Ok(hubs)
}

fn open_session(cfg: &RunConfig) -> Result<Session, CliError> {
    let backend = cfg.backend.as_ref().ok_or_else(|| {
        CliError::Config("no model backend configured (--backend scripted:<rules> or http:<url>)".into())
    })?;
    let hubs = Arc::new(load_hub_list(cfg)?);
    let storms = match &cfg.storm_csv_path {
        Some(p) => {
            let index = load_storm_csv(p)?;
            log::info!("{}: {} storm events, {} rows skipped", p.display(), index.len(), index.skipped().len());
            Some(Arc::new(index))
        }
        None => None,
    };
    let vocabulary = RiskVocabulary::new(storms.iter().flat_map(|s| s.event_types()));
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::input(&cfg.output_dir, e))?;
    let notebook = Arc::new(Notebook::open(cfg.output_dir.join(files::notebook(cfg.year)))?);
    let limiter = Arc::new(RateLimiter::new(cfg.requests_per_second));
    let ctx = ToolContext {
        hubs: hubs.clone(),
        storms,
        offline: cfg.offline,
        fixtures_dir: cfg.fixtures_dir.clone(),
        endpoints: cfg.endpoints.clone(),
        http: HttpClient::new(RetryPolicy::default(), limiter.clone()),
        radius_km: cfg.radius_km,
        notebook: Some(notebook.clone()),
        notebook_batch_tokens: cfg.notebook_batch_tokens,
    };
    let registry = build_registry(&ctx)?;
    let model = connect(backend, limiter)?;
    let runtime = AgentRuntime::new(model).with_config(AgentConfig {
        max_steps: cfg.max_steps,
        ..AgentConfig::default()
    });
    Ok(Session {
        hubs,
        registry,
        runtime,
        notebook,
        vocabulary,
    })
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn require_input(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} does not exist; {hint}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifySummary {
    pub tasks: usize,
    pub failed_tasks: usize,
    pub ranked_risks: Vec<(String, usize)>,
    pub selected_tools: Vec<String>,
}

/// Step one: writes ranked risk types, tool effectiveness, the selected
/// tools and one trace per task.
pub fn cmd_identify(cfg: &RunConfig) -> Result<IdentifySummary, CliError> {
    validate_intervals(&cfg.intervals)?;
    let s = open_session(cfg)?;
    let outcome = identify_risk_types(&s.hubs, &cfg.intervals, &s.runtime, &s.registry, &s.vocabulary, cfg.parallelism)?;
    for t in &outcome.tasks {
        write_json_atomic(&trace_path(&cfg.output_dir, &t.trace.task_id), &t.trace)?;
    }
    let selected = select_tools(&outcome.effectiveness, cfg.tool_count)?;
    emit::write_risk_types(&out(cfg, files::RISK_TYPES), &outcome.ranked_risks)?;
    emit::write_tool_effectiveness(&out(cfg, files::TOOL_EFFECTIVENESS), &outcome.effectiveness)?;
    emit::write_selected_tools(&out(cfg, files::SELECTED_TOOLS), &selected)?;
    Ok(IdentifySummary {
        tasks: outcome.tasks.len(),
        failed_tasks: outcome.failed_tasks(),
        ranked_risks: outcome.ranked_risks,
        selected_tools: selected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessSummary {
    pub executed: usize,
    pub reused: usize,
    pub flagged: usize,
    pub findings: usize,
    pub profiles: usize,
}

/// Step two: daily checkpoints for every hub in the configured days, then
/// the yearly profile table.
pub fn cmd_assess(cfg: &RunConfig) -> Result<AssessSummary, CliError> {
    let selected = match &cfg.selected_tools {
        Some(t) => t.clone(),
        None => {
            let p = out(cfg, files::SELECTED_TOOLS);
            require_input(&p, "run `identify` first or set selected_tools")?;
            emit::read_selected_tools(&p)?
        }
    };
    if selected.is_empty() {
        return Err(CliError::Config("the selected tool list is empty".into()));
    }
    let s = open_session(cfg)?;
    if let Some(t) = selected.iter().find(|t| !s.registry.contains(t)) {
        return Err(CliError::Config(format!("selected tool {t} is not registered")));
    }
    let focus = if cfg.focus.is_empty() {
        let p = out(cfg, files::RISK_TYPES);
        if p.is_file() {
            emit::read_risk_types(&p)?.into_iter().map(|(r, _)| r).collect()
        } else {
            Vec::new()
        }
    } else {
        cfg.focus.clone()
    };
    let vocabulary = &s.vocabulary;
    let dates: Vec<_> = cfg.assess_range.days().collect();
    let batch = BatchConfig {
        out_dir: cfg.output_dir.clone(),
        parallelism: cfg.parallelism,
        notebook: Some(s.notebook.clone()),
        focus,
    };
    let report = run_daily_batch(&s.hubs, &dates, &selected, &s.runtime, &s.registry, vocabulary, &batch)?;

    let hub_ids: Vec<String> = s.hubs.iter().map(|h| h.id.clone()).collect();
    let profiles = aggregate_yearly(&report.assessments, &hub_ids, cfg.year, vocabulary.types())?;
    let findings: usize = report.assessments.iter().map(|a| a.findings.len()).sum();
    let counted: u64 = profiles.iter().map(YearlyRiskProfile::total).sum();
    if counted != findings as u64 {
        return Err(CliError::Invariant(format!("{findings} findings but profile counts sum to {counted}")));
    }
    let columns = profile_columns(&profiles, vocabulary.types());
    write_profiles_csv(&out(cfg, &files::profiles(cfg.year)), &profiles, &columns)?;
    Ok(AssessSummary {
        executed: report.executed,
        reused: report.reused,
        flagged: report.flagged,
        findings,
        profiles: profiles.len(),
    })
}

fn load_profiles(cfg: &RunConfig) -> Result<(Vec<String>, Vec<YearlyRiskProfile>), CliError> {
    let p = out(cfg, &files::profiles(cfg.year));
    require_input(&p, "run `assess` first")?;
    Ok(read_profiles_csv(&p, cfg.year)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub k: usize,
    pub summaries: Vec<ClusterSummary>,
}

/// Similarity matrix, cluster labels, heatmap data and the cluster map.
pub fn cmd_cluster(cfg: &RunConfig) -> Result<ClusterRun, CliError> {
    let (columns, profiles) = load_profiles(cfg)?;
    if let Some(c) = cfg.risk_columns.iter().find(|c| !columns.contains(c)) {
        return Err(CliError::Config(format!(
            "risk column {c:?} is not in {} (columns: {})",
            files::profiles(cfg.year),
            columns.join(", ")
        )));
    }
    let hubs = load_hub_list(cfg)?;
    let z = standardize(&profiles, &cfg.risk_columns)?;
    let sim = cosine_similarity_matrix(&z)?;
    let assignment = agglomerative_cluster_with(&sim, cfg.stop, cfg.linkage)?;
    let summaries = cluster_summary(&assignment, &profiles)?;
    let features = emit::hub_features(&hubs, &assignment, &summaries)?;

    emit::write_similarity(&out(cfg, files::SIMILARITY), &sim)?;
    emit::write_clusters(&out(cfg, files::CLUSTERS), &assignment)?;
    emit::write_json(&out(cfg, files::HEATMAP), &Heatmap::from_similarity(&sim))?;
    emit::write_json(&out(cfg, files::GEOJSON), &emit::geojson(&features))?;
    Ok(ClusterRun {
        k: assignment.k,
        summaries,
    })
}

/// Text report from the cluster labels and profiles on disk.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let clusters = out(cfg, files::CLUSTERS);
    require_input(&clusters, "run `cluster` first")?;
    let assignment = emit::read_clusters(&clusters, cfg.linkage)?;
    let (_, profiles) = load_profiles(cfg)?;
    let hubs = load_hub_list(cfg)?;
    let summaries = cluster_summary(&assignment, &profiles)?;
    if summaries.iter().map(|s| s.size).sum::<usize>() != assignment.hub_ids.len() {
        return Err(CliError::Config(format!(
            "{} and {} list different hubs",
            files::CLUSTERS,
            files::profiles(cfg.year)
        )));
    }
    let text = emit::render_report(cfg.year, &summaries, &hubs, cfg.linkage);
    emit::write_report(&out(cfg, files::REPORT), &text)?;
    Ok(text)
}
