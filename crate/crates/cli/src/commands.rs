//! One function per subcommand. Each reads its inputs, writes its outputs
//! and exactly one manifest into the output directory.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kglit::datagen::{self, AblationKind, AblationSpec, EntityFilter, SyntheticSpec};
use kglit::eval::{self, AccScope, EvalReport, SyntheticAcc};
use kglit::features::build_feature_matrix;
use kglit::fixture::{self, FixtureSpec};
use kglit::graph::{load_graph, save_graph, DatasetPaths, KnowledgeGraph};
use kglit::kga;
use kglit::models::checkpoint::{load_checkpoint, save_checkpoint};
use kglit::models::{ModelKind, Snapshot};
use kglit::training::{self, config_hash, TrainConfig};
use kglit::{KgError, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::{dataset_sha256, ensure_dir, read_json, write_json, write_text, RunManifest};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_FILE: &str = "config.toml";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const REPORT_FILE: &str = "report.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const HIERARCHY_FILE: &str = "hierarchies.tsv";
pub const WORKERS_ENV: &str = "KGLIT_WORKERS";

/// Worker threads for ranking: `KGLIT_WORKERS` if set, else the available
/// parallelism.
pub fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(KgError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn load_dataset(dir: &Path) -> Result<(DatasetPaths, KnowledgeGraph)> {
    let paths = DatasetPaths::in_dir(dir);
    let g = load_graph(&paths)?;
    Ok((paths, g))
}

fn write_dataset(g: &KnowledgeGraph, dir: &Path) -> Result<DatasetPaths> {
    ensure_dir(dir)?;
    let paths = DatasetPaths::in_dir(dir);
    save_graph(g, &paths)?;
    Ok(paths)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FixtureArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub entities: usize,
    #[arg(long, default_value_t = 20)]
    pub relations: usize,
    /// Target number of relational triples over all splits.
    #[arg(long, default_value_t = 20_000)]
    pub triples: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// Number of attributive relations to generate.
    #[arg(long, default_value_t = 0)]
    pub attributes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_fixture(a: &FixtureArgs) -> Result<()> {
    let manifest = RunManifest::start("generate-fixture").config(a).seed("fixture", a.seed);
    let spec = FixtureSpec {
        entities: a.entities,
        relations: a.relations,
        triples: a.triples,
        clusters: a.clusters,
        attributes: a.attributes,
        seed: a.seed,
        ..FixtureSpec::default()
    };
    let g = fixture::generate(&spec)?;
    write_dataset(&g, &a.output)?;
    manifest.finish(&a.output)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepareSyntheticArgs {
    /// Input dataset directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Values strictly above this are the high class.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Restrict the synthetic task to subjects of this relation.
    #[arg(long)]
    pub entity_filter_relation: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_prepare_synthetic(a: &PrepareSyntheticArgs) -> Result<()> {
    let spec = SyntheticSpec {
        entity_filter: match &a.entity_filter_relation {
            Some(r) => EntityFilter::SubjectOf(r.clone()),
            None => EntityFilter::All,
        },
        threshold: a.threshold,
        seed: a.seed,
        ..SyntheticSpec::default()
    };
    spec.validate()?;
    let mut manifest = RunManifest::start("prepare-synthetic").config(&spec).seed("synthetic", a.seed);
    let (paths, g) = load_dataset(&a.input)?;
    manifest.dataset_inputs(&paths)?;
    let out = datagen::synth_enrich(&g, &spec)?;
    write_dataset(&out, &a.output)?;
    manifest.finish(&a.output)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationChoice {
    Random,
    ValuesOnly,
    Existence,
    Relational,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub kind: AblationChoice,
    /// Fraction of relational triples to remove (relational only).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Reduce the union of all splits instead of the training split.
    #[arg(long)]
    pub all_splits: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn ablation_spec(a: &AblateArgs) -> Result<AblationSpec> {
    let kind = match (a.kind, a.alpha) {
        (AblationChoice::Relational, Some(alpha)) => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(KgError::Config(format!("--alpha must be in [0, 1], got {alpha}")));
            }
            AblationKind::RelationalReduce {
                alpha,
                include_eval_splits: a.all_splits,
            }
        }
        (AblationChoice::Relational, None) => {
            return Err(KgError::Config("--kind relational needs --alpha".into()))
        }
        (_, Some(_)) => return Err(KgError::Config("--alpha only applies to --kind relational".into())),
        (_, None) if a.all_splits => {
            return Err(KgError::Config("--all-splits only applies to --kind relational".into()))
        }
        (AblationChoice::Random, None) => AblationKind::RandomLiteral,
        (AblationChoice::ValuesOnly, None) => AblationKind::RandomLiteralValuesOnly,
        (AblationChoice::Existence, None) => AblationKind::Existence,
    };
    Ok(AblationSpec { kind, seed: a.seed })
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let spec = ablation_spec(a)?;
    let mut manifest = RunManifest::start("ablate").config(spec).seed("ablation", a.seed);
    let (paths, g) = load_dataset(&a.input)?;
    manifest.dataset_inputs(&paths)?;
    let out = datagen::apply_ablation(&g, &spec)?;
    write_dataset(&out, &a.output)?;
    manifest.finish(&a.output)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KgaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Bins per parent bin.
    #[arg(long, default_value_t = kga::DEFAULT_BRANCHING)]
    pub branching: usize,
    /// Number of hierarchy levels.
    #[arg(long, default_value_t = kga::DEFAULT_DEPTH)]
    pub depth: usize,
}

pub fn cmd_kga(a: &KgaArgs) -> Result<()> {
    let mut manifest = RunManifest::start("kga").config(a);
    let (paths, g) = load_dataset(&a.input)?;
    manifest.dataset_inputs(&paths)?;
    let hierarchies = kga::fit_graph(&g, a.branching, a.depth)?;
    let out = kga::augment(&g, &hierarchies)?;
    write_dataset(&out, &a.output)?;
    write_text(&a.output.join(HIERARCHY_FILE), &kga::dump_hierarchies(&hierarchies))?;
    manifest.finish(&a.output)
}

pub fn parse_model(name: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::ALL.into_iter().find(|k| k.name() == name).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown model {name:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// The augmented-dataset settings when the dataset carries quantile
    /// hierarchy relations, else the base settings.
    Auto,
    Base,
    Kga,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// Run directory for the checkpoint, resolved config and reports.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Auto)]
    pub preset: Preset,
    /// TOML file whose keys override the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// Preset for `kind`, overlaid with the keys of an optional TOML file and
/// then the explicit flags.
pub fn resolve_config(
    kind: ModelKind,
    kga: bool,
    file: Option<&str>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<TrainConfig> {
    let bad = |e: String| KgError::Config(e);
    let mut table = match toml::Value::try_from(TrainConfig::preset(kind, kga)).map_err(|e| bad(e.to_string()))? {
        toml::Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    };
    if let Some(text) = file {
        let over: toml::Table = text.parse().map_err(|e: toml::de::Error| bad(e.message().to_owned()))?;
        table.extend(over);
    }
    let mut cfg: TrainConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.message().to_owned()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = epochs {
        cfg.epochs = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let (paths, g) = load_dataset(&a.data)?;
    let kga = match a.preset {
        Preset::Auto => kga::is_augmented(&g),
        Preset::Base => false,
        Preset::Kga => true,
    };
    let file = match &a.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| KgError::io(p, e))?),
        None => None,
    };
    let cfg = resolve_config(a.model, kga, file.as_deref(), a.seed, a.epochs)?;
    let hash = config_hash(a.model, &cfg);

    #[derive(Serialize)]
    struct Resolved<'a> {
        model: &'a str,
        preset: &'static str,
        train: &'a TrainConfig,
        config_hash: &'a str,
        init: &'static str,
    }
    let mut manifest = RunManifest::start("train")
        .config(Resolved {
            model: a.model.name(),
            preset: if kga { "kga" } else { "base" },
            train: &cfg,
            config_hash: &hash,
            init: "embeddings normal(0, 0.05^2); fusion matrices xavier-uniform; biases zero; \
                   multi-valued literals resolved by seeded uniform choice",
        })
        .seed("train", cfg.seed)
        .seed("literal_choice", cfg.seed);
    manifest.dataset_inputs(&paths)?;
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }

    let feats = build_feature_matrix(&g, cfg.seed);
    let (state, mut report) = training::train(&g, &feats, a.model, &cfg, workers()?)?;
    ensure_dir(&a.output)?;
    let ckpt = a.output.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &state, &hash)?;
    write_text(&a.output.join(CONFIG_FILE), &cfg.to_toml())?;
    report.checkpoint_path = Some(ckpt);
    write_json(&a.output.join(TRAIN_REPORT_FILE), &report)?;
    manifest.finish(&a.output)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Dataset directory the model was trained on.
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory for report.json; the run directory when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Checkpoint path; `<run>/model.ckpt` when omitted.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training config; `<run>/config.toml` when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Entities the synthetic accuracy is computed on.
    #[arg(long, value_enum, default_value_t = AccScopeArg::Test)]
    pub acc_scope: AccScopeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccScopeArg {
    Test,
    All,
}

/// Deterministic evaluation output; holds no paths or clock values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub best_epoch: usize,
    pub dataset_sha256: String,
    pub metrics: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticAcc>,
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| a.run.join(CHECKPOINT_FILE));
    let cfg_path = a.config.clone().unwrap_or_else(|| a.run.join(CONFIG_FILE));
    let out_dir = a.output.clone().unwrap_or_else(|| a.run.clone());
    let mut manifest = RunManifest::start("eval").config(a);
    let (paths, g) = load_dataset(&a.data)?;
    manifest.dataset_inputs(&paths)?;
    manifest.input(&ckpt_path)?;
    manifest.input(&cfg_path)?;

    let ckpt = load_checkpoint(&ckpt_path)?;
    let text = std::fs::read_to_string(&cfg_path).map_err(|e| KgError::io(&cfg_path, e))?;
    let cfg = TrainConfig::from_toml(&text)?;
    let kind = ckpt.state.kind();
    let expected = config_hash(kind, &cfg);
    if expected != ckpt.config_hash {
        return Err(KgError::Domain(format!(
            "refusing to evaluate: checkpoint config hash {} does not match {} from {}",
            ckpt.config_hash,
            expected,
            cfg_path.display()
        )));
    }
    let dims = ckpt.state.dims();
    if (dims.num_entities, dims.num_relations, dims.num_attrs) != (g.num_entities(), g.num_relations(), g.num_attrs())
    {
        return Err(KgError::Domain(format!(
            "checkpoint covers {} entities, {} relations, {} attributes; the dataset has {}, {}, {}",
            dims.num_entities,
            dims.num_relations,
            dims.num_attrs,
            g.num_entities(),
            g.num_relations(),
            g.num_attrs()
        )));
    }
    manifest = manifest.seed("train", cfg.seed);

    let feats = build_feature_matrix(&g, cfg.seed);
    let snap = Snapshot::new(&ckpt.state, &feats);
    let mut metrics = eval::evaluate(&snap, &g, g.test(), workers()?)?;
    let spec = SyntheticSpec::default();
    let synthetic = if eval::has_synthetic(&g, &spec) {
        let scope = match a.acc_scope {
            AccScopeArg::Test => AccScope::TestSplit,
            AccScopeArg::All => AccScope::AllEntities,
        };
        let acc = eval::synthetic_acc(&snap, &g, &spec, scope)?;
        metrics.acc = Some(acc.acc);
        Some(acc)
    } else {
        None
    };
    let train_report = a.run.join(TRAIN_REPORT_FILE);
    let best_epoch = if train_report.exists() {
        manifest.input(&train_report)?;
        read_json::<training::TrainReport>(&train_report)?.best_epoch
    } else {
        0
    };
    let report = RunReport {
        model: kind.name().to_owned(),
        config_hash: ckpt.config_hash,
        seed: cfg.seed,
        best_epoch,
        dataset_sha256: dataset_sha256(&paths)?,
        metrics,
        synthetic,
    };
    ensure_dir(&out_dir)?;
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    manifest.finish(&out_dir)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// report.json files of repeated runs.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Directory for aggregate.csv.
    #[arg(long)]
    pub output: PathBuf,
    /// Model label; taken from the reports when omitted.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    #[arg(long, default_value = "org")]
    pub variant: String,
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut manifest = RunManifest::start("report").config(a);
    let mut runs = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        manifest.input(p)?;
        runs.push(read_json::<RunReport>(p)?);
    }
    let model = match &a.model {
        Some(m) => m.clone(),
        None => {
            let first = &runs[0].model;
            if runs.iter().any(|r| &r.model != first) {
                return Err(KgError::Domain("reports mix models; pass --model to label them".into()));
            }
            first.clone()
        }
    };
    for r in &runs {
        let name = format!("run{}", manifest.seeds.len());
        manifest = manifest.seed(&name, r.seed);
    }
    let metrics: Vec<EvalReport> = runs.iter().map(|r| r.metrics.clone()).collect();
    let agg = eval::aggregate_runs(&metrics)?;
    let mut csv = String::from(eval::CSV_HEADER);
    csv.push('\n');
    for row in eval::csv_rows(&agg, &model, &a.dataset, &a.variant) {
        csv.push_str(&row);
        csv.push('\n');
    }
    ensure_dir(&a.output)?;
    write_text(&a.output.join(AGGREGATE_FILE), &csv)?;
    manifest.finish(&a.output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(parse_model(k.name()), Ok(k));
        }
        assert!(parse_model("rescal").unwrap_err().contains("transea"));
    }

    #[test]
    fn config_file_overrides_preset_keys_only() {
        let cfg = resolve_config(ModelKind::DistMult, true, Some("epochs = 7\n"), Some(3), None).unwrap();
        let preset = TrainConfig::preset(ModelKind::DistMult, true);
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.learning_rate, preset.learning_rate);
        assert_eq!(cfg.hidden_dropout, preset.hidden_dropout);
    }

    #[test]
    fn bad_config_keys_are_config_errors() {
        for text in ["epoch = 3\n", "learning_rate = -1.0\n", "epochs = \"x\"\n", "= broken"] {
            let e = resolve_config(ModelKind::TransE, false, Some(text), None, None).unwrap_err();
            assert_eq!(e.category(), "config", "{text}");
        }
    }

    #[test]
    fn ablation_flags_are_checked() {
        let base = AblateArgs {
            input: PathBuf::new(),
            output: PathBuf::new(),
            kind: AblationChoice::Relational,
            alpha: None,
            all_splits: false,
            seed: 0,
        };
        assert!(ablation_spec(&base).is_err());
        let rel = AblateArgs {
            alpha: Some(0.3),
            ..base.clone()
        };
        assert_eq!(
            ablation_spec(&rel).unwrap().kind,
            AblationKind::RelationalReduce {
                alpha: 0.3,
                include_eval_splits: false
            }
        );
        let wrong = AblateArgs {
            kind: AblationChoice::Existence,
            alpha: Some(0.3),
            ..base.clone()
        };
        assert!(ablation_spec(&wrong).is_err());
        let out_of_range = AblateArgs {
            alpha: Some(1.5),
            ..base
        };
        assert!(ablation_spec(&out_of_range).is_err());
    }
}
