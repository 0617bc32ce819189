//! `hypex`: ingest, train, evaluate, explain, serve and oracle-check.
//!
//! Exit codes: 0 success, 1 runtime or domain error, 2 usage error.

mod render;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hypex_core::counterfactual::toys::{self, oracle_check};
use hypex_core::gbdt::{cross_validate, evaluate, grid_search, load_model, save_model, train};
use hypex_core::schema::load_schema_file;
use hypex_core::service::{serve, ServiceConfig};
use hypex_core::session::EngineSettings;
use hypex_core::{
    ingest_csv, stratified_split, CfConfig, ClassLabel, DatasetSchema, Error, ExplainEngine, HypothesisRequest,
    IngestReport, LabeledDataset, MissingPolicy, Record, Result, TrainConfig,
};

#[derive(Parser)]
#[command(name = "hypex", version, about = "Hypothesis-anchored explanations for thyroid diagnosis models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV
    #[arg(long, env = "HYPEX_DATA")]
    data: PathBuf,
    /// Schema TOML; the bundled thyroid schema when absent
    #[arg(long, env = "HYPEX_SCHEMA")]
    schema: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Read a dataset, drop incomplete rows and report class balance
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Write the cleaned dataset here
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Train a model on a stratified split and report held-out metrics
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// TOML file with training parameters
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model artifact path
        #[arg(long)]
        out: PathBuf,
        /// Also run k-fold cross-validation on the full dataset
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        kfold: Option<u64>,
        /// Overrides the config seed; also seeds the split and folds
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Pick max_depth and learning_rate by cross-validated macro F1 first
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        json: bool,
    },
    /// Score a saved model on a dataset
    Evaluate {
        #[arg(long, env = "HYPEX_MODEL")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        json: bool,
    },
    /// Explain one record under one hypothesis
    Explain {
        #[arg(long, env = "HYPEX_MODEL")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, required_unless_present = "record_json", conflicts_with = "record_json")]
        record_id: Option<String>,
        /// Inline record as JSON, or @path to a JSON file. Either
        /// {"id": .., "values": [..]} or an object of feature values.
        #[arg(long)]
        record_json: Option<String>,
        /// Class index or name
        #[arg(long, value_parser = parse_class)]
        hypothesis: ClassLabel,
        /// Counterexamples per alternate class
        #[arg(long, value_parser = clap::value_parser!(u64).range(0..=10))]
        n_cf: Option<u64>,
        /// Similar cases
        #[arg(long, value_parser = clap::value_parser!(u64).range(0..=10))]
        n_sc: Option<u64>,
        #[arg(long)]
        importance: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Engine settings TOML
        #[arg(long, env = "HYPEX_SETTINGS")]
        settings: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP JSON API
    Serve {
        #[arg(long, env = "HYPEX_MODEL")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Append-only session log (JSON lines)
        #[arg(long, env = "HYPEX_LOG")]
        log: Option<PathBuf>,
        #[arg(long, env = "HYPEX_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Engine settings TOML
        #[arg(long, env = "HYPEX_SETTINGS")]
        settings: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare the counterexample search with exhaustive enumeration on toy problems
    OracleCheck {
        #[arg(long, default_value = "all", value_parser = toy_names())]
        toy: String,
        #[arg(long, default_value_t = CfConfig::default().generations)]
        generations: usize,
        /// Seeds 0..N are run per toy
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        json: bool,
    },
}

impl Command {
    fn json(&self) -> bool {
        match self {
            Command::Ingest { json, .. }
            | Command::Train { json, .. }
            | Command::Evaluate { json, .. }
            | Command::Explain { json, .. }
            | Command::Serve { json, .. }
            | Command::OracleCheck { json, .. } => *json,
        }
    }
}

fn parse_class(s: &str) -> std::result::Result<ClassLabel, String> {
    ClassLabel::parse(s).ok_or_else(|| format!("unknown class {s:?}; use 0-2 or negative/hyperthyroid/hypothyroid"))
}

fn toy_names() -> clap::builder::PossibleValuesParser {
    let mut names: Vec<&str> = vec!["all"];
    names.extend(toys::NAMES);
    clap::builder::PossibleValuesParser::new(names)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.command.json();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            if json {
                println!("{}", json!({"error": {"code": e.code(), "message": e.to_string()}}));
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn schema_from(path: Option<&Path>) -> Result<DatasetSchema> {
    match path {
        Some(p) => load_schema_file(p),
        None => Ok(DatasetSchema::thyroid()),
    }
}

fn load_data(args: &DataArgs) -> Result<(LabeledDataset, IngestReport)> {
    let schema = schema_from(args.schema.as_deref())?;
    ingest_csv(&args.data, &schema, MissingPolicy::DropRow)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable output"));
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Ingest { data, out, json } => {
            let (dataset, report) = load_data(&data)?;
            if let Some(out) = &out {
                dataset.save_csv(out)?;
            }
            if json {
                print_json(&json!({"report": report, "class_proportions": report.class_proportions()}));
            } else {
                render::ingest(&report, dataset.schema());
            }
            Ok(true)
        }
        Command::Train {
            data,
            config,
            out,
            kfold,
            seed,
            test_fraction,
            grid,
            json,
        } => {
            let (dataset, _) = load_data(&data)?;
            if dataset.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let mut config = match &config {
                Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            config.validate()?;
            let grid_points = if grid {
                let k = kfold.unwrap_or(5) as usize;
                let points = grid_search(&dataset, &config, &[3, 4, 6], &[0.05, 0.1, 0.3], k, config.seed)?;
                config = points[0].config.clone();
                Some(points)
            } else {
                None
            };
            let (train_set, test_set) = stratified_split(&dataset, test_fraction, config.seed)?;
            let model = train(&train_set, &config)?;
            let report = evaluate(&model, &test_set)?;
            save_model(&model, &out)?;
            let cv = kfold
                .map(|k| cross_validate(&dataset, &config, k as usize, config.seed))
                .transpose()?;
            if json {
                print_json(&json!({
                    "model": out,
                    "fingerprint": model.fingerprint(),
                    "config": config,
                    "train_records": train_set.len(),
                    "test_records": test_set.len(),
                    "test": report,
                    "cv": cv,
                    "grid": grid_points,
                }));
            } else {
                render::train(&out, &model.fingerprint(), &config, train_set.len(), test_set.len(), &report);
                if let Some(points) = &grid_points {
                    render::grid(points);
                }
                if let Some(cv) = &cv {
                    render::cv(cv);
                }
            }
            Ok(true)
        }
        Command::Evaluate { model, data, json } => {
            let model = load_model(&model)?;
            let (dataset, _) = load_data(&data)?;
            model.check_schema(dataset.schema())?;
            let report = evaluate(&model, &dataset)?;
            if json {
                print_json(&report);
            } else {
                render::eval_report(&report);
            }
            Ok(true)
        }
        Command::Explain {
            model,
            data,
            record_id,
            record_json,
            hypothesis,
            n_cf,
            n_sc,
            importance,
            seed,
            settings,
            json,
        } => {
            let model = load_model(&model)?;
            let (dataset, _) = load_data(&data)?;
            let mut engine = ExplainEngine::new(model, dataset)?;
            if let Some(p) = &settings {
                engine = engine.with_settings(EngineSettings::from_toml(&read_text(p)?)?)?;
            }
            let record = record_json
                .map(|text| parse_inline_record(&text, engine.schema()))
                .transpose()?;
            let req = HypothesisRequest {
                record_id,
                record,
                hypothesis,
                n_counterexamples_per_class: n_cf.map(|n| n as usize),
                n_similar_cases: n_sc.map(|n| n as usize),
                include_importance: importance,
                seed,
            };
            let bundle = engine.handle_request(&req)?;
            if json {
                println!("{}", String::from_utf8(bundle.to_json_bytes()).expect("JSON is UTF-8"));
            } else {
                render::bundle(&bundle, engine.schema());
            }
            Ok(true)
        }
        Command::Serve {
            model,
            data,
            log,
            listen,
            settings,
            json: _,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_env("HYPEX_LOG_LEVEL")
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            let settings = match &settings {
                Some(p) => EngineSettings::from_toml(&read_text(p)?)?,
                None => EngineSettings::default(),
            };
            let config = ServiceConfig {
                listen,
                model_path: model,
                data_path: data.data,
                schema_path: data.schema,
                log_path: log,
                settings,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
                path: "tokio runtime".into(),
                source: e,
            })?;
            runtime.block_on(serve(config))?;
            Ok(true)
        }
        Command::OracleCheck {
            toy,
            generations,
            seeds,
            json,
        } => {
            let problems = if toy == "all" {
                let mut all = toys::all();
                all.push(toys::infeasible());
                all
            } else {
                vec![toys::by_name(&toy).expect("validated by clap")]
            };
            let base = CfConfig {
                generations,
                ..CfConfig::default()
            };
            let seeds: Vec<u64> = (0..seeds).collect();
            let checks = problems
                .iter()
                .map(|p| oracle_check(p, &seeds, &base))
                .collect::<Result<Vec<_>>>()?;
            let pass = checks.iter().all(|c| c.pass);
            if json {
                print_json(&json!({"pass": pass, "toys": checks}));
            } else {
                render::oracle(&checks);
            }
            Ok(pass)
        }
    }
}

fn parse_inline_record(text: &str, schema: &DatasetSchema) -> Result<Record> {
    let text = match text.strip_prefix('@') {
        Some(path) => read_text(Path::new(path))?,
        None => text.to_owned(),
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("record JSON: {e}")))?;
    if value.get("values").is_some() {
        return serde_json::from_value(value).map_err(|e| Error::Malformed(format!("record JSON: {e}")));
    }
    let Value::Object(map) = value else {
        return Err(Error::Malformed("record JSON must be an object".into()));
    };
    let id = map.get("id").and_then(Value::as_str).unwrap_or("inline").to_owned();
    let values = schema
        .names()
        .map(|name| {
            map.get(name)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::RecordShape(format!("missing or non-numeric feature {name}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(extra) = map.keys().find(|k| *k != "id" && schema.index_of(k).is_none()) {
        return Err(Error::RecordShape(format!("unknown feature {extra}")));
    }
    Ok(Record::new(id, values))
}
