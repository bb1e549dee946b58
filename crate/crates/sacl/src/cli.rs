//! Argument parsing and subcommand dispatch.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sacl_core::complexity::{score_manifest, tier_histogram, ScoringConfig, TierThresholds};
use sacl_core::curriculum::{
    build_static_plan, default_stages, manifest_entries, stage_pool, CurriculumConfig, CurriculumPlan, Provenance,
    Regularization, Strategy,
};
use sacl_core::imagemetrics::{assess_quality, clahe, ClaheParams, QualityThresholds};
use sacl_core::manifest::{filter_small_nodules, select_slices, DatasetManifest};
use sacl_core::sacl::{build_sacl_plan, SaclParams};
use sacl_core::sampler::{build_epoch_batches, BatchPlan, EpochSpec};
use sacl_core::simharness::{generate_synthetic_dataset, run_plan, verify_execution, TierMix};
use sacl_core::splitter::{patient_split, subsample_scale, DatasetSplit, ScaleSubset, SplitRatios};
use sacl_core::GENERATOR;
use serde::Serialize;

use crate::config::RunConfig;
use crate::documents::{self, parse_document, write_text, Document};
use crate::error::{Error, Result};
use crate::images::{load_gray, save_gray};
use crate::jsonl::{parse_manifest, render_manifest, ParseMode};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "sacl", version, about = "Curriculum plans and data preparation for nodule detection")]
pub struct Cli {
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Each has a `SACL_` environment
/// override.
#[derive(Debug, Args)]
struct Tuning {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "SACL_SEED", default_value_t = 0)]
    seed: u64,
    /// Drop unknown manifest fields instead of rejecting them.
    #[arg(long, global = true, env = "SACL_LENIENT")]
    lenient: bool,

    #[arg(long, global = true, env = "SACL_EASY_MAX", default_value_t = 4.0, help_heading = "Scoring")]
    easy_max: f64,
    #[arg(long, global = true, env = "SACL_MEDIUM_MAX", default_value_t = 7.5, help_heading = "Scoring")]
    medium_max: f64,
    /// A box is irregular above this aspect ratio.
    #[arg(long, global = true, env = "SACL_ASPECT_RATIO", default_value_t = 1.5, help_heading = "Scoring")]
    aspect_ratio: f64,
    #[arg(long, global = true, env = "SACL_HIGH_LAPLACIAN", default_value_t = 500.0, help_heading = "Scoring")]
    high_laplacian: f64,
    #[arg(long, global = true, env = "SACL_HIGH_CONTRAST", default_value_t = 30.0, help_heading = "Scoring")]
    high_contrast: f64,
    #[arg(long, global = true, env = "SACL_LOW_LAPLACIAN", default_value_t = 100.0, help_heading = "Scoring")]
    low_laplacian: f64,
    #[arg(long, global = true, env = "SACL_LOW_CONTRAST", default_value_t = 10.0, help_heading = "Scoring")]
    low_contrast: f64,

    #[arg(long, global = true, env = "SACL_BETA", default_value_t = 0.7, help_heading = "Adaptation")]
    beta: f64,
    #[arg(long, global = true, env = "SACL_GAMMA", default_value_t = 0.3, help_heading = "Adaptation")]
    gamma: f64,
    #[arg(long, global = true, env = "SACL_E_MIN", default_value_t = 20, help_heading = "Adaptation")]
    e_min: u32,
    #[arg(long, global = true, env = "SACL_R0", default_value_t = 0.1, help_heading = "Adaptation")]
    r0: f64,
    #[arg(long, global = true, env = "SACL_DELTA_R", default_value_t = 0.3, help_heading = "Adaptation")]
    delta_r: f64,
    #[arg(long, global = true, env = "SACL_LR_SHRINK", default_value_t = 0.3, help_heading = "Adaptation")]
    lr_shrink: f64,
    #[arg(long, global = true, env = "SACL_WEIGHT_DECAY", default_value_t = 0.0005, help_heading = "Adaptation")]
    weight_decay: f64,
    #[arg(long, global = true, env = "SACL_DROPOUT", default_value_t = 0.0, help_heading = "Adaptation")]
    dropout: f64,

    #[arg(long, global = true, env = "SACL_TRAIN_RATIO", default_value_t = 0.8, help_heading = "Data")]
    train_ratio: f64,
    #[arg(long, global = true, env = "SACL_VAL_RATIO", default_value_t = 0.1, help_heading = "Data")]
    val_ratio: f64,
    #[arg(long, global = true, env = "SACL_TEST_RATIO", default_value_t = 0.1, help_heading = "Data")]
    test_ratio: f64,
    #[arg(long, global = true, env = "SACL_MIN_DIAMETER", default_value_t = 3.0, help_heading = "Data")]
    min_diameter: f64,
    /// Background slices kept per nodule slice, per patient.
    #[arg(long, global = true, env = "SACL_BG_RATIO", default_value_t = 2, help_heading = "Data")]
    bg_ratio: usize,
    #[arg(long, global = true, env = "SACL_CLIP_LIMIT", default_value_t = 2.0, help_heading = "Data")]
    clip_limit: f64,
    #[arg(long, global = true, env = "SACL_TILES", default_value_t = 8, help_heading = "Data")]
    tiles: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter small nodules, select background slices, optionally measure
    /// quality from images and write CLAHE-enhanced copies.
    Ingest(IngestArgs),
    /// Add complexity scores to a manifest and print the tier histogram.
    Score(ScoreArgs),
    /// Patient-level train/val/test split.
    Split(SplitArgs),
    /// Patient-closed subset of the training patients at scale rho.
    Subset(SubsetArgs),
    /// The static three-stage curriculum.
    PlanCl(PlanClArgs),
    /// The static curriculum adapted to a data scale.
    PlanSacl(PlanSaclArgs),
    /// Batch composition for one stage of a plan.
    Sample(SampleArgs),
    /// Run a plan on synthetic data and check the run against the plan.
    Simulate(SimulateArgs),
    /// CSV summaries of a manifest and plan.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory that `image_path` is relative to. Enables quality measurement.
    #[arg(long, requires = "mask_root")]
    image_root: Option<PathBuf>,
    /// Lung masks (0/255 PNG) stored under the same relative paths.
    #[arg(long, requires = "image_root")]
    mask_root: Option<PathBuf>,
    /// Write CLAHE-enhanced images here, mirroring `image_path`.
    #[arg(long, requires = "image_root")]
    clahe_out: Option<PathBuf>,
    /// Keep every background slice.
    #[arg(long)]
    no_select: bool,
    /// Write a JSON summary of the run.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: PathBuf,
    /// Defaults to rewriting the input manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tier histogram CSV; stdout when absent.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SubsetArgs {
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: PathBuf,
    /// Restrict to the training patients of this split.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, env = "SACL_RHO")]
    rho: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanClArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanSaclArgs {
    /// Requested scale. With --manifest the achieved scale of the drawn
    /// subset is used instead; with --subset the recorded one.
    #[arg(long, env = "SACL_RHO")]
    rho: Option<f64>,
    #[arg(long, conflicts_with = "subset")]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    split: Option<PathBuf>,
    #[arg(long)]
    subset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Scored manifest.
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: PathBuf,
    /// Restrict the manifest to this subset.
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Stage index, starting at 1.
    #[arg(long)]
    stage: usize,
    /// Epoch index, starting at 0. Every epoch of the stage when absent.
    #[arg(long)]
    epoch: Option<usize>,
    #[arg(long, env = "SACL_BATCH")]
    batch: usize,
    #[arg(long, value_enum, default_value_t = SampleFormat::Json)]
    format: SampleFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, env = "SACL_BATCH", default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0.5)]
    easy: f64,
    #[arg(long, default_value_t = 0.3)]
    medium: f64,
    #[arg(long, default_value_t = 0.2)]
    hard: f64,
    /// Receives trainlog.json, fidelity.json and loss.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Scored manifest, for the tier histogram and pool sizes.
    #[arg(long, env = "SACL_MANIFEST")]
    manifest: Option<PathBuf>,
    /// Plan whose stages define the pools. The static plan when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Parse `argv` (program name first), run it, and return the exit status.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    64
                }
            };
        }
    };
    match run(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let t = &cli.tuning;
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Score(_) => "score",
        Command::Split(_) => "split",
        Command::Subset(_) => "subset",
        Command::PlanCl(_) => "plan-cl",
        Command::PlanSacl(_) => "plan-sacl",
        Command::Sample(_) => "sample",
        Command::Simulate(_) => "simulate",
        Command::Report(_) => "report",
    };
    let cfg = RunConfig {
        subcommand: name.to_owned(),
        generator: GENERATOR.to_owned(),
        seed: t.seed,
        lenient: t.lenient,
        scoring: ScoringConfig {
            aspect_ratio_threshold: t.aspect_ratio,
            quality: QualityThresholds {
                high_laplacian: t.high_laplacian,
                high_contrast: t.high_contrast,
                low_laplacian: t.low_laplacian,
                low_contrast: t.low_contrast,
            },
            tiers: TierThresholds {
                easy_max: t.easy_max,
                medium_max: t.medium_max,
            },
        },
        sacl: SaclParams {
            beta: t.beta,
            gamma: t.gamma,
            e_min: t.e_min,
            r0: t.r0,
            delta_r: t.delta_r,
            lr_shrink: t.lr_shrink,
            wd_base: t.weight_decay,
            p_drop_base: t.dropout,
        },
        split_ratios: SplitRatios {
            train: t.train_ratio,
            val: t.val_ratio,
            test: t.test_ratio,
        },
        clahe: ClaheParams {
            clip_limit: t.clip_limit,
            tiles: t.tiles,
        },
        min_diameter_mm: t.min_diameter,
        bg_ratio: t.bg_ratio,
        params: BTreeMap::new(),
        inputs: BTreeMap::new(),
    };
    cfg.sacl.validate()?;
    match cli.command {
        Command::Ingest(a) => ingest(&a, cfg, err),
        Command::Score(a) => score(&a, cfg, out),
        Command::Split(a) => split(&a, cfg, out),
        Command::Subset(a) => subset(&a, cfg, out),
        Command::PlanCl(a) => plan_cl(&a, cfg, out),
        Command::PlanSacl(a) => plan_sacl(&a, cfg, out),
        Command::Sample(a) => sample(&a, cfg, out),
        Command::Simulate(a) => simulate(&a, cfg, out),
        Command::Report(a) => report(&a, cfg),
    }
}

fn mode(cfg: &RunConfig) -> ParseMode {
    if cfg.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

fn read_manifest(cfg: &mut RunConfig, name: &str, path: &Path) -> Result<DatasetManifest> {
    let bytes = cfg.read_input(name, path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Invalid(format!("{}: not UTF-8", path.display())))?;
    parse_manifest(&text, mode(cfg), &path.display().to_string())
}

fn read_doc<T: serde::de::DeserializeOwned>(
    cfg: &mut RunConfig,
    name: &str,
    path: &Path,
    schema: &str,
) -> Result<Document<T>> {
    let bytes = cfg.read_input(name, path)?;
    parse_document(&bytes, schema, path)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit_doc<T: Serialize>(
    schema: &str,
    cfg: &RunConfig,
    data: T,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    emit(&Document::new(schema, cfg, data).render(), path, out)
}

fn static_plan(cfg: &RunConfig) -> Result<CurriculumPlan> {
    let p = &cfg.sacl;
    Ok(build_static_plan(&CurriculumConfig {
        stages: default_stages(p.r0),
        r0: p.r0,
        regularization: Regularization {
            weight_decay: p.wd_base,
            dropout: p.p_drop_base,
        },
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            generator: GENERATOR.to_owned(),
        },
    })?)
}

#[derive(Serialize)]
struct IngestSummary {
    slices_in: usize,
    slices_out: usize,
    boxes_in: usize,
    boxes_out: usize,
    quality_measured: usize,
    enhanced_written: usize,
}

fn box_count(m: &DatasetManifest) -> usize {
    m.slices().iter().map(|s| s.boxes.len()).sum()
}

fn ingest(a: &IngestArgs, mut cfg: RunConfig, err: &mut dyn Write) -> Result<()> {
    cfg.set("select", !a.no_select);
    cfg.set("measure_quality", a.image_root.is_some());
    cfg.set("write_clahe", a.clahe_out.is_some());
    let m = read_manifest(&mut cfg, "manifest", &a.manifest)?;
    let (slices_in, boxes_in) = (m.len(), box_count(&m));
    let mut measured = 0;
    let mut enhanced = 0;
    let m = match (&a.image_root, &a.mask_root) {
        (Some(images), Some(masks)) => {
            let mut slices = Vec::with_capacity(m.len());
            for s in m.slices() {
                let img = load_gray(&images.join(&s.image_path))?;
                if (img.width(), img.height()) != (s.width_px as usize, s.height_px as usize) {
                    return Err(Error::Invalid(format!(
                        "slice {:?}: image is {}x{}, manifest says {}x{}",
                        s.slice_id,
                        img.width(),
                        img.height(),
                        s.width_px,
                        s.height_px
                    )));
                }
                let mask = load_gray(&masks.join(&s.image_path))?;
                let metrics_err = |source| Error::Metrics {
                    slice_id: s.slice_id.clone(),
                    source,
                };
                let q = assess_quality(&img, &mask).map_err(metrics_err)?;
                if let Some(dir) = &a.clahe_out {
                    let eq = clahe(&img, &cfg.clahe).map_err(metrics_err)?;
                    save_gray(&dir.join(&s.image_path), &eq)?;
                    enhanced += 1;
                }
                measured += 1;
                let mut s = s.clone();
                s.quality = Some(q);
                slices.push(s);
            }
            DatasetManifest::new(slices, m.source_tag.clone())?
        }
        _ => m,
    };
    let m = filter_small_nodules(&m, cfg.min_diameter_mm);
    let m = if a.no_select { m } else { select_slices(&m, cfg.bg_ratio)? };
    write_text(&a.out, &render_manifest(&m))?;
    let summary = IngestSummary {
        slices_in,
        slices_out: m.len(),
        boxes_in,
        boxes_out: box_count(&m),
        quality_measured: measured,
        enhanced_written: enhanced,
    };
    let _ = writeln!(
        err,
        "ingest: {} -> {} slices, {} -> {} boxes",
        summary.slices_in, summary.slices_out, summary.boxes_in, summary.boxes_out
    );
    if let Some(p) = &a.report {
        Document::new(documents::INGEST_SCHEMA, &cfg, summary).write(p)?;
    }
    Ok(())
}

fn score(a: &ScoreArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    let m = read_manifest(&mut cfg, "manifest", &a.manifest)?;
    let scored = score_manifest(&m, &cfg.scoring)?;
    let hist = tier_histogram(&scored, &cfg.scoring.tiers)?;
    write_text(a.out.as_deref().unwrap_or(&a.manifest), &render_manifest(&scored))?;
    emit(&report::tier_histogram_csv(hist), a.histogram.as_deref(), out)
}

fn split(a: &SplitArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    let m = read_manifest(&mut cfg, "manifest", &a.manifest)?;
    let s = patient_split(&m, &cfg.split_ratios, cfg.seed)?;
    emit_doc(documents::SPLIT_SCHEMA, &cfg, s, a.out.as_deref(), out)
}

fn training_manifest(cfg: &mut RunConfig, manifest: &Path, split: Option<&Path>) -> Result<DatasetManifest> {
    let m = read_manifest(cfg, "manifest", manifest)?;
    Ok(match split {
        Some(p) => {
            let s: Document<DatasetSplit> = read_doc(cfg, "split", p, documents::SPLIT_SCHEMA)?;
            m.restrict(s.data.train.iter().map(String::as_str))
        }
        None => m,
    })
}

fn subset(a: &SubsetArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.set("rho", a.rho);
    let train = training_manifest(&mut cfg, &a.manifest, a.split.as_deref())?;
    let s = subsample_scale(&train, a.rho, cfg.seed)?;
    emit_doc(documents::SUBSET_SCHEMA, &cfg, s, a.out.as_deref(), out)
}

fn plan_cl(a: &PlanClArgs, cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    let plan = static_plan(&cfg)?;
    emit_doc(documents::PLAN_SCHEMA, &cfg, plan, a.out.as_deref(), out)
}

fn plan_sacl(a: &PlanSaclArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    let rho = if let Some(p) = &a.subset {
        let s: Document<ScaleSubset> = read_doc(&mut cfg, "subset", p, documents::SUBSET_SCHEMA)?;
        s.data.achieved_rho
    } else {
        let requested = a
            .rho
            .ok_or_else(|| Error::Usage("plan-sacl needs --rho or --subset".into()))?;
        cfg.set("rho", requested);
        match &a.manifest {
            Some(m) => {
                let train = training_manifest(&mut cfg, m, a.split.as_deref())?;
                subsample_scale(&train, requested, cfg.seed)?.achieved_rho
            }
            None => requested,
        }
    };
    cfg.set("effective_rho", rho);
    let plan = build_sacl_plan(&static_plan(&cfg)?, rho, &cfg.sacl)?;
    emit_doc(documents::PLAN_SCHEMA, &cfg, plan, a.out.as_deref(), out)
}

#[derive(Serialize)]
struct BatchesBody {
    plan_config_hash: String,
    strategy: Strategy,
    rho: f64,
    epochs: Vec<BatchPlan<String>>,
}

fn render_batches_text(cfg: &RunConfig, body: &BatchesBody) -> String {
    let mut s = format!(
        "# {} config_hash={} plan_config_hash={}\n# config {}\n# stage epoch batch hard/required ids (* = hard)\n",
        documents::BATCHES_SCHEMA,
        cfg.hash(),
        body.plan_config_hash,
        serde_json::to_string(cfg).expect("run config serializes"),
    );
    for bp in &body.epochs {
        for (i, b) in bp.batches.iter().enumerate() {
            let ids: Vec<String> = b
                .slice_ids
                .iter()
                .zip(&b.hard_flags)
                .map(|(id, &h)| if h { format!("{id}*") } else { id.clone() })
                .collect();
            s.push_str(&format!(
                "{}\t{}\t{}\t{}/{}\t{}\n",
                bp.stage_index,
                bp.epoch_index,
                i,
                b.hard_count(),
                b.required_hard,
                ids.join(",")
            ));
        }
    }
    s
}

fn sample(a: &SampleArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.set("stage", a.stage);
    cfg.set("epoch", a.epoch);
    cfg.set("batch_size", a.batch);
    let plan_doc: Document<CurriculumPlan> = read_doc(&mut cfg, "plan", &a.plan, documents::PLAN_SCHEMA)?;
    let plan = plan_doc.data;
    plan.validate()?;
    let mut m = read_manifest(&mut cfg, "manifest", &a.manifest)?;
    if let Some(p) = &a.subset {
        let s: Document<ScaleSubset> = read_doc(&mut cfg, "subset", p, documents::SUBSET_SCHEMA)?;
        m = m.restrict(s.data.slice_ids.iter().map(String::as_str));
    }
    let stage = plan
        .stages
        .iter()
        .find(|s| s.index == a.stage)
        .ok_or_else(|| Error::Invalid(format!("plan has no stage {}", a.stage)))?;
    let epochs: Vec<usize> = match a.epoch {
        Some(e) if e >= stage.epochs as usize => {
            return Err(Error::Invalid(format!(
                "stage {} has {} epochs; epoch {e} is out of range",
                stage.index, stage.epochs
            )))
        }
        Some(e) => vec![e],
        None => (0..stage.epochs as usize).collect(),
    };
    let entries = manifest_entries(&m, &cfg.scoring)?;
    let pool = stage_pool(stage, &entries);
    let ids = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| m.slices()[i].slice_id.clone()).collect() };
    let (eligible, hard) = (ids(&pool.eligible), ids(&pool.hard_pool));
    let mut plans = Vec::with_capacity(epochs.len());
    for epoch in epochs {
        let spec = EpochSpec {
            batch_size: a.batch,
            r_min: stage.min_hard_ratio,
            seed: cfg.seed,
            stage_index: stage.index,
            epoch_index: epoch,
        };
        plans.push(build_epoch_batches(&eligible, &hard, spec)?);
    }
    let body = BatchesBody {
        plan_config_hash: plan_doc.config_hash,
        strategy: plan.scale.strategy,
        rho: plan.scale.rho,
        epochs: plans,
    };
    match a.format {
        SampleFormat::Json => emit_doc(documents::BATCHES_SCHEMA, &cfg, body, a.out.as_deref(), out),
        SampleFormat::Text => emit(&render_batches_text(&cfg, &body), a.out.as_deref(), out),
    }
}

fn simulate(a: &SimulateArgs, mut cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.set("n", a.n);
    cfg.set("batch_size", a.batch);
    let mix = TierMix {
        easy: a.easy,
        medium: a.medium,
        hard: a.hard,
    };
    cfg.set("mix", mix);
    let plan: Document<CurriculumPlan> = read_doc(&mut cfg, "plan", &a.plan, documents::PLAN_SCHEMA)?;
    let data = generate_synthetic_dataset(a.n, &mix, cfg.seed)?;
    let log = run_plan(&plan.data, &data, a.batch, cfg.seed)?;
    let fidelity = verify_execution(&log, &plan.data);
    Document::new(documents::TRAIN_LOG_SCHEMA, &cfg, &log).write(&a.out_dir.join("trainlog.json"))?;
    Document::new(documents::FIDELITY_SCHEMA, &cfg, &fidelity).write(&a.out_dir.join("fidelity.json"))?;
    write_text(&a.out_dir.join("loss.csv"), &report::epoch_loss_csv(&log))?;
    for c in &fidelity.checks {
        let _ = writeln!(out, "{}: {}", c.name, if c.passed { "pass" } else { "FAIL" });
    }
    let failed: Vec<&str> = fidelity
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Fidelity(failed.join(", ")))
    }
}

fn report(a: &ReportArgs, mut cfg: RunConfig) -> Result<()> {
    let plan = match &a.plan {
        Some(p) => {
            let doc: Document<CurriculumPlan> = read_doc(&mut cfg, "plan", p, documents::PLAN_SCHEMA)?;
            Some(doc.data)
        }
        None => None,
    };
    let manifest = match &a.manifest {
        Some(p) => Some(read_manifest(&mut cfg, "manifest", p)?),
        None => None,
    };
    let base = static_plan(&cfg)?;
    write_text(&a.out_dir.join("rho_grid.csv"), &report::rho_grid_csv(&base, &cfg.sacl)?)?;
    let mut written = vec!["rho_grid.csv"];
    if let Some(m) = &manifest {
        let hist = tier_histogram(m, &cfg.scoring.tiers)?;
        write_text(&a.out_dir.join("tier_histogram.csv"), &report::tier_histogram_csv(hist))?;
        let entries = manifest_entries(m, &cfg.scoring)?;
        let pools = report::stage_pools_csv(plan.as_ref().unwrap_or(&base), &entries);
        write_text(&a.out_dir.join("stage_pools.csv"), &pools)?;
        written.extend(["tier_histogram.csv", "stage_pools.csv"]);
    }
    Document::new(documents::REPORT_SCHEMA, &cfg, written).write(&a.out_dir.join("report.json"))
}
