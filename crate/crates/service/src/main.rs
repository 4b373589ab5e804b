use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use fnvd_core::cluster::ClusterConfig;
use fnvd_core::data::{
    parse_arff, parse_csv, parse_unlabeled_csv, schema_from_csv_header, stratified_kfold, to_arff, to_csv, Dataset,
    FeatureVector, LabelValues,
};
use fnvd_core::explain::{build_report, relevance_histogram, ExplainConfig, ExplainError};
use fnvd_core::lmt::{deserialize_model, evaluate, predict_proba, serialize_model, train, LmtModel, TrainParams};
use fnvd_core::taxonomy::{load_taxonomy, Taxonomy};
use fnvd_core::wikipedia;
use fnvd_service::{http, Service, ServiceConfig, ServiceError};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Config(_) | ServiceError::CorruptStore(_) | ServiceError::UnknownVersion(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn config<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Config(format!("{context}: {e}"))
}

fn runtime<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Arff,
    Csv,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    /// Labeled data in ARFF or CSV (label in the last column).
    #[arg(long)]
    train_file: PathBuf,
    /// Inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// CSV label tags as VIOLATION,REGULAR.
    #[arg(long, default_value = "vandalism,regular")]
    labels: String,
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with training parameters; --seed overrides its seed.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct LogArgs {
    /// Directory holding the decision log and model registry. FNVD_LOG_DIR
    /// takes precedence.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Taxonomy JSON; the bundled Wikipedia taxonomy when omitted.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Parser)]
#[command(name = "fnvd", version, about = "Norm violation detection with logistic model trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Print the violation probability of each row of a CSV.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Explain each row that the model classifies as a violation.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
    },
    /// Count how often each feature is relevant among predicted violations.
    Histogram {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run the HTTP service.
    Serve {
        /// Model to install and activate; otherwise the registry's active one.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        log: LogArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// JSON object mapping action ids to label tags.
        #[arg(long)]
        shadow_labels: Option<PathBuf>,
        /// Labeled data added to the exported log on retraining.
        #[arg(long)]
        retrain_base: Option<PathBuf>,
        #[arg(long, value_enum)]
        retrain_base_format: Option<Format>,
    },
    /// Retrain from the decision log and register an inactive version.
    Retrain {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        retrain_base: Option<PathBuf>,
        #[arg(long, value_enum)]
        retrain_base_format: Option<Format>,
    },
    /// Make a registered version active.
    Activate {
        #[command(flatten)]
        log: LogArgs,
        version: u64,
    },
    /// Write the decision log as labeled data.
    Export {
        #[command(flatten)]
        log: LogArgs,
        #[arg(long, value_enum, default_value = "arff")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(config(path.display()))
}

fn label_values(spec: &str) -> Result<LabelValues, CliError> {
    match spec.split_once(',') {
        Some((v, r)) if !v.trim().is_empty() && !r.trim().is_empty() => Ok(LabelValues::new(v.trim(), r.trim())),
        _ => Err(CliError::Config(format!("--labels {spec:?} must look like VIOLATION,REGULAR"))),
    }
}

fn format_of(path: &Path, format: Option<Format>) -> Format {
    format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Arff,
    })
}

fn load_dataset(path: &Path, format: Option<Format>, labels: &str) -> Result<Dataset, CliError> {
    let text = read(path)?;
    let ds = match format_of(path, format) {
        Format::Arff => parse_arff(&text),
        Format::Csv => schema_from_csv_header(&text, label_values(labels)?).and_then(|s| parse_csv(&text, &s)),
    };
    ds.map_err(config(path.display()))
}

fn load_model(path: &Path) -> Result<LmtModel, CliError> {
    deserialize_model(&read(path)?).map_err(config(path.display()))
}

fn load_taxonomy_arg(path: Option<&Path>) -> Result<Taxonomy, CliError> {
    match path {
        Some(p) => load_taxonomy(&read(p)?).map_err(config(p.display())),
        None => Ok(wikipedia::taxonomy()),
    }
}

fn train_params(args: &TrainArgs) -> Result<TrainParams, CliError> {
    let mut params: TrainParams = match &args.params {
        Some(p) => serde_json::from_str(&read(p)?).map_err(config(p.display()))?,
        None => TrainParams::default(),
    };
    params.seed = args.seed;
    params.validate().map_err(config("training parameters"))?;
    Ok(params)
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("threshold {t} not in (0, 1)")))
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(runtime(path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn log_dir(args: &LogArgs) -> Result<PathBuf, CliError> {
    std::env::var_os("FNVD_LOG_DIR")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| args.log.clone())
        .ok_or_else(|| CliError::Config("no log directory: pass --log or set FNVD_LOG_DIR".into()))
}

fn open_service(args: &LogArgs, retrain_base: Option<Dataset>) -> Result<Service, CliError> {
    check_threshold(args.threshold)?;
    let taxonomy = load_taxonomy_arg(args.taxonomy.as_deref())?;
    let cfg = ServiceConfig {
        threshold: args.threshold,
        retrain_base,
        ..ServiceConfig::default()
    };
    Ok(Service::open(&log_dir(args)?, taxonomy, cfg)?)
}

fn input_rows(model: &LmtModel, input: &Path) -> Result<Vec<FeatureVector>, CliError> {
    parse_unlabeled_csv(&read(input)?, &model.schema).map_err(config(input.display()))
}

fn load_shadow(path: &Path, labels: &LabelValues) -> Result<HashMap<String, u8>, CliError> {
    let raw: BTreeMap<String, String> = serde_json::from_str(&read(path)?).map_err(config(path.display()))?;
    raw.into_iter()
        .map(|(id, tag)| match labels.encode(&tag) {
            Some(y) => Ok((id, y)),
            None => Err(CliError::Config(format!("{}: unknown label {tag:?} for {id}", path.display()))),
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { data, train: t, out } => {
            let ds = load_dataset(&data.train_file, data.format, &data.labels)?;
            let model = train(&ds, &train_params(&t)?).map_err(runtime("training"))?;
            write(&out, &serialize_model(&model))?;
            eprintln!(
                "trained on {} instances: {} leaves, {} nodes",
                ds.len(),
                model.n_leaves(),
                model.n_nodes()
            );
        }
        Command::Evaluate {
            data,
            train: t,
            folds,
            threshold,
        } => {
            check_threshold(threshold)?;
            let params = train_params(&t)?;
            let ds = load_dataset(&data.train_file, data.format, &data.labels)?;
            let assignment = stratified_kfold(&ds, folds, params.seed).map_err(config("folds"))?;
            let cv = evaluate(|d| train(d, &params), &ds, &assignment, threshold).map_err(runtime("evaluation"))?;
            print_json(&cv);
        }
        Command::Classify { model, input } => {
            let model = load_model(&model)?;
            for x in input_rows(&model, &input)? {
                let p = predict_proba(&model, &x).map_err(config(input.display()))?;
                println!("{}", p.probability);
            }
        }
        Command::Explain {
            model,
            taxonomy,
            input,
            threshold,
            json,
            text: _,
        } => {
            check_threshold(threshold)?;
            let model = load_model(&model)?;
            let taxonomy = load_taxonomy_arg(taxonomy.as_deref())?;
            let cfg = ExplainConfig {
                cluster: ClusterConfig::default(),
                threshold,
            };
            for (i, x) in input_rows(&model, &input)?.iter().enumerate() {
                match build_report(&model, x, &taxonomy, &cfg) {
                    Ok(report) if json => print_json(&report),
                    Ok(report) => println!("row {}\n{}", i + 1, report.render_text()),
                    Err(ExplainError::NotAViolation { probability, .. }) if json => {
                        print_json(&serde_json::json!({ "row": i + 1, "probability": probability, "report": null }))
                    }
                    Err(ExplainError::NotAViolation { probability, .. }) => {
                        println!("row {}: not a violation (p = {probability:.6})", i + 1)
                    }
                    Err(e) => return Err(CliError::Config(format!("row {}: {e}", i + 1))),
                }
            }
        }
        Command::Histogram { model, data, threshold } => {
            check_threshold(threshold)?;
            let model = load_model(&model)?;
            let ds = load_dataset(&data.train_file, data.format, &data.labels)?;
            let counts = relevance_histogram(&model, &ds, threshold, &ClusterConfig::default())
                .map_err(config(data.train_file.display()))?;
            print_json(&counts);
        }
        Command::Serve {
            model,
            log,
            listen,
            shadow_labels,
            retrain_base,
            retrain_base_format,
        } => {
            let base = match &retrain_base {
                Some(p) => Some(load_dataset(p, retrain_base_format, "vandalism,regular")?),
                None => None,
            };
            let mut svc = open_service(&log, base)?;
            if let Some(path) = &model {
                let version = svc.install_model(load_model(path)?, "import")?;
                eprintln!("serving model version {version}");
            }
            let active = svc.active().ok_or_else(|| {
                CliError::Config("no model: pass --model or activate a registered version".into())
            })?;
            if let Some(path) = &shadow_labels {
                svc.set_shadow_labels(load_shadow(path, &active.model.schema.label_values)?);
            }
            serve(Arc::new(svc), listen)?;
        }
        Command::Retrain {
            log,
            train: t,
            retrain_base,
            retrain_base_format,
        } => {
            let base = match &retrain_base {
                Some(p) => Some(load_dataset(p, retrain_base_format, "vandalism,regular")?),
                None => None,
            };
            let params = train_params(&t)?;
            let version = open_service(&log, base)?.retrain(&params)?;
            println!("{version}");
        }
        Command::Activate { log, version } => {
            open_service(&log, None)?.activate(version)?;
            println!("{version}");
        }
        Command::Export { log, format, out } => {
            let ds = open_service(&log, None)?.export_retrain_dataset()?;
            let text = match format {
                Format::Arff => to_arff(&ds, "decisions"),
                Format::Csv => to_csv(&ds),
            };
            write(&out, &text)?;
            eprintln!("exported {} instances", ds.len());
        }
    }
    Ok(())
}

fn serve(svc: Arc<Service>, listen: SocketAddr) -> Result<(), CliError> {
    let rt = tokio::runtime::Runtime::new().map_err(runtime("tokio"))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(config(format!("listen {listen}")))?;
        log::info!("listening on {listen}");
        axum::serve(listener, http::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime("server"))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
