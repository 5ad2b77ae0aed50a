//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use steerage_core::analysis::{
    alignment_matrix, explained_variance_correlation, export_heatmap_data, import_heatmap_data,
    Measure,
};
use steerage_core::extraction::{
    extract_steering_set, read_steering_set, write_steering_set, ExtractionOptions,
    SteeringVectorSet,
};
use steerage_core::harness::report::{report_file_name, write_report};
use steerage_core::harness::{
    build_contrastive_pairs, evaluate, load_split, prompts, DatasetRecord, EvalReport, EvalSetup,
    PairTemplate, SplitMode, SplitSpec,
};
use steerage_core::its::{details_file_name, run_with_its, write_its_details};
use steerage_core::runtime::{
    load_model, planted_chain_model, random_model, save_model, ByteTokenizer, Model,
};
use steerage_core::transfer::{build_plan, DimensionAdapter};
use steerage_core::tuner::{sweep, LambdaGrid};

use crate::config::{require_exists, required_path, RunConfig};
use crate::toy_data::{toy_records, write_records};
use crate::{svg, CliError};
use crate::{
    AnalyzeArgs, EvalArgs, ExtractArgs, InitToyArgs, PlotArgs, PlotKind, ToyFlavor, TuneArgs,
};

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let mut config = RunConfig::default();
            config.apply_env_seed()?;
            Ok(config)
        }
    }
}

fn system_prompt_text(config: &RunConfig) -> Result<String, CliError> {
    let Some(spec) = &config.run.system_prompt else {
        return Err(CliError::usage(
            "no system prompt configured; set run.system_prompt to a file path or builtin:math|gsm8k|arc-c|toy",
        ));
    };
    if let Some(name) = spec.strip_prefix("builtin:") {
        return match name {
            "math" => Ok(prompts::MATH_SYSTEM_PROMPT.to_string()),
            "gsm8k" => Ok(prompts::GSM8K_SYSTEM_PROMPT.to_string()),
            "arc-c" => Ok(prompts::ARC_C_SYSTEM_PROMPT.to_string()),
            "toy" => Ok(prompts::TOY_SYSTEM_PROMPT.to_string()),
            other => Err(CliError::usage(format!("unknown builtin prompt {other:?}"))),
        };
    }
    let path = Path::new(spec);
    require_exists(path, "system prompt")?;
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read system prompt {spec}: {e}")))
}

/// Load the few-shot exemplars (first `few_shot` records of the exemplar
/// file), or none when unset.
fn load_exemplars(config: &RunConfig) -> Result<Vec<DatasetRecord>, CliError> {
    if config.run.few_shot == 0 {
        return Ok(Vec::new());
    }
    let Some(path) = &config.paths.exemplars else {
        return Ok(Vec::new());
    };
    require_exists(path, "exemplars")?;
    let all = load_split(path, &SplitSpec::zero_shot(SplitMode::Train, 0))?;
    if all.len() < config.run.few_shot {
        return Err(CliError::usage(format!(
            "exemplar file has {} records, few_shot asks for {}",
            all.len(),
            config.run.few_shot
        )));
    }
    Ok(all.into_iter().take(config.run.few_shot).collect())
}

fn grid_from(config: &RunConfig, flag: &Option<String>) -> Result<LambdaGrid, CliError> {
    if let Some(spec) = flag {
        let values: Vec<f64> = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::usage(format!("bad grid value {s:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        return Ok(LambdaGrid::custom(values)?);
    }
    if config.grid.values.is_empty() {
        Ok(LambdaGrid::default_grid())
    } else {
        Ok(LambdaGrid::custom(config.grid.values.clone())?)
    }
}

/// Everything tune and eval share: target model, steering set, adapter,
/// records for one split, and the evaluation setup.
struct Pipeline {
    target: Model,
    set: SteeringVectorSet,
    adapter: DimensionAdapter,
    records: Vec<DatasetRecord>,
    setup: EvalSetup,
    out_dir: PathBuf,
    workers: usize,
}

fn load_pipeline(
    config: &RunConfig,
    split_path: &Option<PathBuf>,
    split_name: &str,
    mode: SplitMode,
) -> Result<Pipeline, CliError> {
    let target_path = required_path(&config.paths.target_model, "paths.target_model")?;
    let set_path = required_path(&config.paths.steering_set, "paths.steering_set")?;
    let split = required_path(split_path, split_name)?;
    let out_dir = required_path(&config.paths.output_dir, "paths.output_dir")?;
    require_exists(&target_path, "target model")?;
    require_exists(&set_path, "steering set")?;
    require_exists(&split, split_name)?;
    let system_prompt = system_prompt_text(config)?;

    let target = load_model(&target_path)?;
    let set = read_steering_set(&set_path)?;
    let split_spec = SplitSpec {
        mode,
        exemplars: load_exemplars(config)?,
        seed: config.generation.seed,
    };
    let records = load_split(&split, &split_spec)?;
    if records.is_empty() {
        return Err(CliError::usage(format!(
            "{split_name} {} has no usable records",
            split.display()
        )));
    }
    let adapter = config.dimension_adapter(set.hidden_dim, target.spec().hidden_dim);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime_msg(format!("creating {}: {e}", out_dir.display())))?;

    let setup = EvalSetup {
        system_prompt,
        split: split_spec,
        params: config.generation_params(),
        format: config.run.answer_format,
        dataset_id: config.run.dataset_id.clone(),
        source_model_id: set.source_model_id.clone(),
    };
    Ok(Pipeline {
        target,
        set,
        adapter,
        records,
        setup,
        out_dir,
        workers: config.run.workers.max(1),
    })
}

fn write_report_into(report: &EvalReport, dir: &Path) -> Result<String, CliError> {
    let name = report_file_name(report);
    write_report(report, &dir.join(&name))?;
    Ok(name)
}

// ---------------------------------------------------------------------------
// init-toy
// ---------------------------------------------------------------------------

pub fn cmd_init_toy(args: &InitToyArgs) -> Result<(), CliError> {
    let out = &args.out_dir;
    for sub in ["models", "data", "prompts"] {
        std::fs::create_dir_all(out.join(sub))
            .map_err(|e| CliError::runtime_msg(format!("creating {}: {e}", out.display())))?;
    }

    let (source, target) = match args.flavor {
        ToyFlavor::Planted => (
            planted_chain_model("toy-source", args.source_layers, args.max_context),
            planted_chain_model("toy-target", args.target_layers, args.max_context),
        ),
        ToyFlavor::Random => (
            random_model(
                "toy-source",
                args.source_layers,
                args.hidden_dim,
                args.num_heads,
                args.max_context,
                args.seed,
            ),
            random_model(
                "toy-target",
                args.target_layers,
                args.hidden_dim,
                args.num_heads,
                args.max_context,
                args.seed + 1,
            ),
        ),
    };
    save_model(&source, &out.join("models/source.sfwt"))?;
    save_model(&target, &out.join("models/target.sfwt"))?;

    let train = toy_records("train", args.train, 0);
    let val = toy_records("val", args.val, args.train);
    let test = toy_records("test", args.test, args.train + args.val);
    let exemplars = toy_records("ex", args.few_shot.max(2), 1000);
    write_records(&train, &out.join("data/train.jsonl")).map_err(CliError::Runtime)?;
    write_records(&val, &out.join("data/val.jsonl")).map_err(CliError::Runtime)?;
    write_records(&test, &out.join("data/test.jsonl")).map_err(CliError::Runtime)?;
    write_records(&exemplars, &out.join("data/exemplars.jsonl")).map_err(CliError::Runtime)?;

    std::fs::write(out.join("prompts/system.txt"), prompts::TOY_SYSTEM_PROMPT)
        .map_err(|e| CliError::runtime_msg(format!("writing system prompt: {e}")))?;

    let config = RunConfig {
        paths: crate::config::PathsConfig {
            source_model: Some("models/source.sfwt".into()),
            target_model: Some("models/target.sfwt".into()),
            steering_set: Some("out/toy.svec".into()),
            train_split: Some("data/train.jsonl".into()),
            val_split: Some("data/val.jsonl".into()),
            test_split: Some("data/test.jsonl".into()),
            exemplars: Some("data/exemplars.jsonl".into()),
            output_dir: Some("out".into()),
        },
        run: crate::config::RunSection {
            dataset_id: "toy".into(),
            answer_format: steerage_core::harness::AnswerFormat::Boxed,
            few_shot: args.few_shot,
            system_prompt: Some("prompts/system.txt".into()),
            workers: 1,
            centered: true,
        },
        generation: crate::config::GenerationSection {
            max_new_tokens: 12,
            temperature: 0.0,
            seed: args.seed,
            stop_sequences: Vec::new(),
        },
        ..RunConfig::default()
    };
    let toml_text = toml::to_string_pretty(&config)
        .map_err(|e| CliError::runtime_msg(format!("serializing toy config: {e}")))?;
    std::fs::write(out.join("toy-config.toml"), toml_text)
        .map_err(|e| CliError::runtime_msg(format!("writing toy config: {e}")))?;

    println!(
        "initialized toy workspace at {} ({:?}, source {} layers, target {} layers)",
        out.display(),
        args.flavor,
        args.source_layers,
        args.target_layers
    );
    println!("config: {}", out.join("toy-config.toml").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

pub fn cmd_extract(args: &ExtractArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(p) = &args.model {
        config.paths.source_model = Some(p.clone());
    }
    if let Some(p) = &args.dataset {
        config.paths.train_split = Some(p.clone());
    }
    if let Some(p) = &args.output {
        config.paths.steering_set = Some(p.clone());
    }
    if let Some(id) = &args.dataset_id {
        config.run.dataset_id = id.clone();
    }
    if args.uncentered {
        config.run.centered = false;
    }

    let model_path = required_path(&config.paths.source_model, "paths.source_model")?;
    let dataset_path = required_path(&config.paths.train_split, "paths.train_split")?;
    let output_path = required_path(&config.paths.steering_set, "paths.steering_set")?;
    require_exists(&model_path, "source model")?;
    require_exists(&dataset_path, "train split")?;

    let model = load_model(&model_path)?;
    let tokenizer = ByteTokenizer;
    let records = load_split(
        &dataset_path,
        &SplitSpec::zero_shot(SplitMode::Train, config.generation.seed),
    )?;
    let template = if args.swapped_template {
        PairTemplate::swapped()
    } else {
        PairTemplate::question_with_solution_vs_question()
    };
    let pairs = build_contrastive_pairs(&records, &template)?;
    let set = extract_steering_set(
        &model,
        &tokenizer,
        &pairs,
        &ExtractionOptions {
            dataset_id: config.run.dataset_id.clone(),
            centered: config.run.centered,
        },
    )?;

    if let Some(parent) = output_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime_msg(format!("creating {}: {e}", parent.display())))?;
    }
    write_steering_set(&set, &output_path)?;
    println!(
        "wrote steering set {} ({} layers x {} dims, {} pairs, centered={})",
        output_path.display(),
        set.num_layers,
        set.hidden_dim,
        pairs.len(),
        set.centered
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub unparsed: usize,
    pub report_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub dataset_id: String,
    pub source_model_id: String,
    pub target_model_id: String,
    pub lambda_best: f64,
    pub baseline_accuracy: f64,
    pub baseline_report_file: String,
    pub rows: Vec<SummaryRow>,
}

pub fn cmd_tune(args: &TuneArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    args.common.apply_to(&mut config, true);

    let grid = grid_from(&config, &args.grid)?;
    let p = load_pipeline(&config, &config.paths.val_split.clone(), "paths.val_split", SplitMode::Val)?;
    let tokenizer = ByteTokenizer;

    let result = sweep(
        &p.target,
        &tokenizer,
        &p.set,
        &p.adapter,
        &p.records,
        &grid,
        &p.setup,
        p.workers,
    )?;

    let baseline_report_file = write_report_into(&result.baseline, &p.out_dir)?;
    let mut rows = Vec::with_capacity(result.rows.len());
    for row in &result.rows {
        let report_file = write_report_into(&row.report, &p.out_dir)?;
        rows.push(SummaryRow {
            lambda: row.lambda,
            accuracy: row.accuracy,
            correct: row.report.correct,
            total: row.report.total,
            unparsed: row.report.unparsed,
            report_file,
        });
    }
    let summary = SweepSummary {
        dataset_id: p.setup.dataset_id.clone(),
        source_model_id: p.setup.source_model_id.clone(),
        target_model_id: p.target.spec().model_id.clone(),
        lambda_best: result.lambda_best,
        baseline_accuracy: result.baseline.accuracy,
        baseline_report_file,
        rows,
    };
    let summary_path = p.out_dir.join("sweep_summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::runtime_msg(format!("serializing sweep summary: {e}")))?;
    std::fs::write(&summary_path, json)
        .map_err(|e| CliError::runtime_msg(format!("writing {}: {e}", summary_path.display())))?;

    println!("baseline accuracy {:.4}", summary.baseline_accuracy);
    for row in &summary.rows {
        println!("lambda {:<5} accuracy {:.4}", row.lambda, row.accuracy);
    }
    println!("lambda_best = {}", summary.lambda_best);
    println!("sweep summary: {}", summary_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ItsSummary {
    pub dataset_id: String,
    pub source_model_id: String,
    pub target_model_id: String,
    pub aggregated_accuracy: f64,
    pub baseline_accuracy: f64,
    pub aggregated_report_file: String,
    pub baseline_report_file: String,
    pub details_file: String,
    pub rows: Vec<SummaryRow>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    args.common.apply_to(&mut config, false);

    let p = load_pipeline(&config, &config.paths.test_split.clone(), "paths.test_split", SplitMode::Test)?;
    let tokenizer = ByteTokenizer;

    if args.with_its {
        let grid = grid_from(&config, &args.grid)?;
        let outcome = run_with_its(
            &p.target,
            &tokenizer,
            &p.set,
            &p.adapter,
            &p.records,
            &grid,
            &p.setup,
            p.workers,
        )?;
        let baseline_report_file = write_report_into(&outcome.baseline, &p.out_dir)?;
        let aggregated_report_file = write_report_into(&outcome.aggregated, &p.out_dir)?;
        let details_file = details_file_name(&outcome);
        write_its_details(&outcome, &p.out_dir.join(&details_file))?;
        let mut rows = Vec::with_capacity(outcome.per_lambda.len());
        for row in &outcome.per_lambda {
            let report_file = write_report_into(&row.report, &p.out_dir)?;
            rows.push(SummaryRow {
                lambda: row.lambda,
                accuracy: row.accuracy,
                correct: row.report.correct,
                total: row.report.total,
                unparsed: row.report.unparsed,
                report_file,
            });
        }
        let summary = ItsSummary {
            dataset_id: p.setup.dataset_id.clone(),
            source_model_id: p.setup.source_model_id.clone(),
            target_model_id: p.target.spec().model_id.clone(),
            aggregated_accuracy: outcome.aggregated.accuracy,
            baseline_accuracy: outcome.baseline.accuracy,
            aggregated_report_file,
            baseline_report_file,
            details_file,
            rows,
        };
        let summary_path = p.out_dir.join("its_summary.json");
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::runtime_msg(format!("serializing ITS summary: {e}")))?;
        std::fs::write(&summary_path, json).map_err(|e| {
            CliError::runtime_msg(format!("writing {}: {e}", summary_path.display()))
        })?;
        println!("baseline accuracy   {:.4}", summary.baseline_accuracy);
        println!("aggregated accuracy {:.4} (mode over {} lambdas)", summary.aggregated_accuracy, summary.rows.len());
        println!("its summary: {}", summary_path.display());
        return Ok(());
    }

    let lambda = args
        .lambda
        .expect("clap group guarantees exactly one of --with-its/--lambda");
    if lambda < 0.0 {
        return Err(CliError::usage("--lambda must be >= 0"));
    }
    let baseline = evaluate(&p.target, &tokenizer, None, &p.records, &p.setup)?;
    let plan = build_plan(&p.set, p.target.spec(), lambda, &p.adapter)?;
    let steered = evaluate(&p.target, &tokenizer, Some(&plan), &p.records, &p.setup)?;
    let baseline_file = write_report_into(&baseline, &p.out_dir)?;
    let steered_file = write_report_into(&steered, &p.out_dir)?;
    println!("baseline accuracy {:.4} ({baseline_file})", baseline.accuracy);
    println!("steered  accuracy {:.4} at lambda {lambda} ({steered_file})", steered.accuracy);
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    require_exists(&args.set_a, "steering set A")?;
    require_exists(&args.set_b, "steering set B")?;
    let a = read_steering_set(&args.set_a)?;
    let b = read_steering_set(&args.set_b)?;

    // widths are never reinterpreted silently: a mismatch needs a named adapter
    let adapter = if a.hidden_dim != b.hidden_dim {
        let kind = args.adapter.ok_or_else(|| {
            CliError::usage(format!(
                "set widths differ ({} vs {}); pass --adapter truncate-or-pad or seeded-projection",
                a.hidden_dim, b.hidden_dim
            ))
        })?;
        let mut config = RunConfig::default();
        config.adapter.kind = kind.into();
        config.adapter.seed = args.adapter_seed;
        Some(config.dimension_adapter(b.hidden_dim, a.hidden_dim))
    } else {
        None
    };
    let measure: Measure = args.measure.into();
    let matrix = alignment_matrix(&a, &b, measure, adapter.as_ref())?;
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::runtime_msg(format!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    export_heatmap_data(&matrix, &args.output)?;
    println!(
        "wrote {} x {} {:?} alignment matrix to {} (adapted={})",
        matrix.entries.len(),
        matrix.entries.first().map_or(0, Vec::len),
        measure,
        args.output.display(),
        matrix.adapted
    );
    if args.explained_variance {
        match explained_variance_correlation(&a, &b) {
            Ok(r) => println!("explained-variance profile pearson: {r:.6}"),
            Err(steerage_core::Error::ZeroVarianceInput) => {
                println!("explained-variance profile pearson: undefined (a profile is constant)");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    require_exists(&args.input, "plot input")?;
    let svg_text = match args.kind {
        PlotKind::Sweep => {
            let text = std::fs::read_to_string(&args.input)
                .map_err(|e| CliError::runtime_msg(format!("reading input: {e}")))?;
            let summary: SweepSummary = serde_json::from_str(&text).map_err(|e| {
                CliError::usage(format!("{} is not a sweep summary: {e}", args.input.display()))
            })?;
            let points: Vec<(f64, f64)> =
                summary.rows.iter().map(|r| (r.lambda, r.accuracy)).collect();
            svg::sweep_chart(
                &format!(
                    "accuracy vs lambda — {} steered by {} ({})",
                    summary.target_model_id, summary.source_model_id, summary.dataset_id
                ),
                &points,
                Some(summary.baseline_accuracy),
            )
        }
        PlotKind::Its => {
            let text = std::fs::read_to_string(&args.input)
                .map_err(|e| CliError::runtime_msg(format!("reading input: {e}")))?;
            let summary: ItsSummary = serde_json::from_str(&text).map_err(|e| {
                CliError::usage(format!("{} is not an ITS summary: {e}", args.input.display()))
            })?;
            let mut bars: Vec<(String, f64)> =
                vec![("baseline".to_string(), summary.baseline_accuracy)];
            bars.extend(
                summary
                    .rows
                    .iter()
                    .map(|r| (format!("{}", r.lambda), r.accuracy)),
            );
            bars.push(("ITS".to_string(), summary.aggregated_accuracy));
            svg::bar_chart(
                &format!(
                    "per-lambda and aggregated accuracy — {} steered by {} ({})",
                    summary.target_model_id, summary.source_model_id, summary.dataset_id
                ),
                &bars,
            )
        }
        PlotKind::Heatmap => {
            let entries = import_heatmap_data(&args.input)?;
            svg::heatmap_chart(
                &format!("layerwise alignment — {}", args.input.display()),
                &entries,
            )
        }
    };
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::runtime_msg(format!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(&args.output, svg_text)
        .map_err(|e| CliError::runtime_msg(format!("writing {}: {e}", args.output.display())))?;
    println!("wrote {}", args.output.display());
    Ok(())
}
