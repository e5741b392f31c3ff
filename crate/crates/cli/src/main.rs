use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use antijam::actor_critic::ParameterBlob;
use antijam::config::{CheckpointPaths, ExperimentConfig, Scenario};
use antijam::detector::detect;
use antijam::log::{verify, MetricsLog};
use antijam::metrics::{empirical_cdf, empirical_pdf};
use antijam::scenario::{
    imitation_path, pretrain_attacker, pretrain_orthogonal, pretrain_victim, run_scenario, summarize, Pretrained,
};

#[derive(Parser)]
#[command(name = "antijam", version, about = "DRL jamming attack and defense simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the victim with no jammer present.
    TrainVictim(TrainArgs),
    /// Pre-train the jammer in listening mode, plus the imitation attackers.
    TrainAttacker(TrainArgs),
    /// Train the orthogonal policy pair from the victim checkpoint.
    TrainOrthogonal(OrthoArgs),
    /// Run one scenario and write its slot log.
    Run(RunArgs),
    /// Classify the accuracy trace of a logged probe.
    Detect(DetectArgs),
    /// Emit moving-average, PDF and CDF series for a log.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct CheckpointArgs {
    /// Directory holding checkpoints under their default names.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    victim: Option<PathBuf>,
    #[arg(long)]
    attacker: Option<PathBuf>,
    /// Stem for the imitation attackers; one file per reward variant.
    #[arg(long)]
    imitation: Option<PathBuf>,
    #[arg(long)]
    orthogonal_1: Option<PathBuf>,
    #[arg(long)]
    orthogonal_2: Option<PathBuf>,
}

impl CheckpointArgs {
    /// Explicit flag, then checkpoint directory, then config.
    fn resolve(&self, from_config: &CheckpointPaths) -> CheckpointPaths {
        let pick = |flag: &Option<PathBuf>, name: &str, cfg: &Option<PathBuf>| {
            flag.clone().or_else(|| self.checkpoint_dir.as_ref().map(|d| d.join(name))).or_else(|| cfg.clone())
        };
        CheckpointPaths {
            victim: pick(&self.victim, "victim.ckpt", &from_config.victim),
            attacker: pick(&self.attacker, "attacker.ckpt", &from_config.attacker),
            imitation: pick(&self.imitation, "imitation.ckpt", &from_config.imitation),
            orthogonal_1: pick(&self.orthogonal_1, "orthogonal_1.ckpt", &from_config.orthogonal_1),
            orthogonal_2: pick(&self.orthogonal_2, "orthogonal_2.ckpt", &from_config.orthogonal_2),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    checkpoints: CheckpointArgs,
}

#[derive(Args)]
struct OrthoArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    checkpoints: CheckpointArgs,
    /// Per-iteration training report (TSV).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    checkpoints: CheckpointArgs,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Slot log destination; a `.series.tsv` sibling is written too.
    #[arg(long)]
    out: PathBuf,
    /// Pre-train any checkpoint the scenario needs but cannot load.
    #[arg(long)]
    train_missing: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    log: PathBuf,
    /// First slot of the probe; defaults to the logged probe start, else the attack onset.
    #[arg(long)]
    from: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    log: PathBuf,
    /// Output directory for the series files.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    })
}

fn seed_of(common: &Common, cfg: &ExperimentConfig) -> u64 {
    common.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| anyhow!(antijam::Error::MissingCheckpoint(format!("no path given for the {what}"))))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn save(blob: &ParameterBlob, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    blob.save(path)?;
    Ok(())
}

fn train_victim(args: TrainArgs) -> Result<serde_json::Value> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let paths = args.checkpoints.resolve(&cfg.checkpoints);
    let out = required(&paths.victim, "victim checkpoint")?;
    let blob = pretrain_victim(&cfg, seed)?;
    save(&blob, out)?;
    Ok(json!({ "command": "train-victim", "seed": seed, "slots": cfg.pretrain.victim_slots, "victim": out }))
}

fn train_attacker(args: TrainArgs) -> Result<serde_json::Value> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let paths = args.checkpoints.resolve(&cfg.checkpoints);
    let victim = ParameterBlob::load(required(&paths.victim, "victim checkpoint")?)?;
    let out = required(&paths.attacker, "attacker checkpoint")?;
    let trained = pretrain_attacker(&cfg, &victim, seed)?;
    save(&trained.attacker, out)?;
    let mut imitation = Vec::new();
    if let Some(stem) = &paths.imitation {
        for (kind, blob) in &trained.imitation {
            let p = imitation_path(stem, *kind);
            save(blob, &p)?;
            imitation.push(p);
        }
    }
    Ok(json!({
        "command": "train-attacker",
        "seed": seed,
        "slots": cfg.pretrain.attacker_slots,
        "match_rate": trained.match_rate,
        "attacker": out,
        "imitation": imitation,
    }))
}

fn train_orthogonal(args: OrthoArgs) -> Result<serde_json::Value> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let paths = args.checkpoints.resolve(&cfg.checkpoints);
    let victim = ParameterBlob::load(required(&paths.victim, "victim checkpoint")?)?;
    let out_1 = required(&paths.orthogonal_1, "first orthogonal policy")?;
    let out_2 = required(&paths.orthogonal_2, "second orthogonal policy")?;
    let trained = pretrain_orthogonal(&cfg, &victim, seed)?;
    save(&trained.policy_1, out_1)?;
    save(&trained.policy_2, out_2)?;
    if let Some(report) = &args.report {
        ensure_parent(report)?;
        std::fs::write(report, trained.report.to_tsv())?;
    }
    Ok(json!({
        "command": "train-orthogonal",
        "seed": seed,
        "converged": trained.report.converged,
        "best_iteration": trained.report.best_iteration,
        "warning": trained.report.warning,
        "orthogonal_1": out_1,
        "orthogonal_2": out_2,
    }))
}

fn load_or_train(cfg: &ExperimentConfig, paths: &CheckpointPaths, seed: u64, train_missing: bool) -> Result<Pretrained> {
    let load = |p: &Option<PathBuf>| -> Result<Option<ParameterBlob>> {
        match p {
            Some(p) if p.exists() => Ok(Some(ParameterBlob::load(p)?)),
            _ => Ok(None),
        }
    };
    let victim = match load(&paths.victim)? {
        Some(v) => v,
        None if train_missing => pretrain_victim(cfg, seed)?,
        None => return Err(antijam::Error::MissingCheckpoint("victim".into()).into()),
    };
    let mut attacker = load(&paths.attacker)?;
    let mut imitation = Vec::new();
    if let Some(stem) = &paths.imitation {
        for kind in antijam::defense::imitation::ImitationRewardKind::ALL {
            let p = imitation_path(stem, kind);
            if p.exists() {
                imitation.push((kind, ParameterBlob::load(&p)?));
            }
        }
    }
    let scenario = cfg.scenario;
    let need_imitation = scenario.needs_imitation() && !imitation.iter().any(|(k, _)| *k == cfg.imitation.reward);
    if train_missing && ((scenario.has_attacker() && attacker.is_none()) || need_imitation) {
        let trained = pretrain_attacker(cfg, &victim, seed)?;
        attacker.get_or_insert(trained.attacker);
        imitation = trained.imitation;
    }
    let mut orthogonal = match (load(&paths.orthogonal_1)?, load(&paths.orthogonal_2)?) {
        (Some(a), Some(b)) => Some([a, b]),
        _ => None,
    };
    if train_missing && scenario.needs_orthogonal() && orthogonal.is_none() {
        let trained = pretrain_orthogonal(cfg, &victim, seed)?;
        orthogonal = Some([trained.policy_1, trained.policy_2]);
    }
    Ok(Pretrained { victim, attacker, imitation, orthogonal })
}

fn run(args: RunArgs) -> Result<serde_json::Value> {
    let mut cfg = load_config(&args.common.config)?;
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    let seed = seed_of(&args.common, &cfg);
    let paths = args.checkpoints.resolve(&cfg.checkpoints);
    let pre = load_or_train(&cfg, &paths, seed, args.train_missing)?;
    let log = run_scenario(&cfg, seed, &pre)?;
    ensure_parent(&args.out)?;
    log.export(&args.out)?;
    let summary = summarize(&log, &cfg)?;
    Ok(json!({ "command": "run", "scenario": cfg.scenario.as_str(), "seed": seed, "log": args.out, "summary": summary }))
}

fn detect_cmd(args: DetectArgs) -> Result<serde_json::Value> {
    let cfg = load_config(&args.config)?;
    let log = MetricsLog::import(&args.log)?;
    let from = args
        .from
        .or_else(|| log.events_of("probe").next().map(|e| e.slot as usize))
        .unwrap_or(cfg.schedule.attack_start);
    let ma = antijam::metrics::moving_average(&log.successes(), cfg.detector.window)?;
    let end = (from + cfg.detector.probe_duration).min(ma.len());
    let trace = ma.get(from..end).unwrap_or(&[]);
    let decision = detect(trace, &cfg.detector)?;
    Ok(json!({ "command": "detect", "from": from, "slots": trace.len(), "detection": decision.as_str() }))
}

fn report(args: ReportArgs) -> Result<serde_json::Value> {
    let cfg = load_config(&args.config)?;
    let log = MetricsLog::import(&args.log)?;
    std::fs::create_dir_all(&args.out)?;
    let ma = log.accuracy_series();
    let start = cfg.schedule.attack_start.min(ma.len());
    let post = if start < ma.len() { &ma[start..] } else { &ma[..] };

    let mut text = String::from("slot\taccuracy_ma\n");
    for (r, a) in log.records.iter().zip(&ma) {
        text.push_str(&format!("{}\t{a}\n", r.slot));
    }
    std::fs::write(args.out.join("moving_average.tsv"), text)?;

    let bins = cfg.metrics.pdf_bins;
    let mut text = String::from("bin_low\tbin_high\tdensity\n");
    for (i, d) in empirical_pdf(post, bins)?.iter().enumerate() {
        text.push_str(&format!("{}\t{}\t{d}\n", i as f64 / bins as f64, (i + 1) as f64 / bins as f64));
    }
    std::fs::write(args.out.join("pdf.tsv"), text)?;

    let mut text = String::from("accuracy\tcdf\n");
    for (x, f) in empirical_cdf(post)?.steps() {
        text.push_str(&format!("{x}\t{f}\n"));
    }
    std::fs::write(args.out.join("cdf.tsv"), text)?;

    let summary = summarize(&log, &cfg)?;
    let verified = verify(&log);
    std::fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(json!({
        "command": "report",
        "out": args.out,
        "summary": summary,
        "verified_slots": verified.checked,
        "mismatches": verified.mismatches.len(),
    }))
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::TrainVictim(a) => train_victim(a),
        Command::TrainAttacker(a) => train_attacker(a),
        Command::TrainOrthogonal(a) => train_orthogonal(a),
        Command::Run(a) => run(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.downcast_ref::<antijam::Error>().map_or("cli", |e| e.kind());
            eprintln!("{}", error_line(kind, &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
