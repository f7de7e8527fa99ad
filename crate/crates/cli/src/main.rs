use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use tensorsynth::config::Format;
use tensorsynth::io::{export, import_dataset, Imported};
use tensorsynth::{generate, load_config, Error, ErrorKind, GenConfig, TensorData};

#[derive(Parser)]
#[command(
    name = "tensorsynth",
    version,
    about = "Synthetic tensor datasets with known ground truth"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a config file.
    Generate {
        #[arg(short, long)]
        config: PathBuf,
        /// Output data file; overrides `output.path`.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Overrides `output.format`; otherwise taken from the `--out` extension.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace existing files.
        #[arg(long)]
        overwrite: bool,
        /// Record the export time in the manifest (outputs then differ between runs).
        #[arg(long)]
        timestamp: bool,
    },
    /// Check a config and print it with every default filled in.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Summarize a dataset file.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Hdf5,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Hdf5 => Format::Hdf5,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

fn format_from_extension(path: &Path) -> Option<Format> {
    match path.extension()?.to_str()? {
        "csv" => Some(Format::Csv),
        "h5" | "hdf5" => Some(Format::Hdf5),
        _ => None,
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Hdf5 => "hdf5",
    }
}

struct GenerateArgs {
    config: PathBuf,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    overwrite: bool,
    timestamp: bool,
}

fn run_generate(args: GenerateArgs, json_out: bool) -> Result<(), Error> {
    let mut config: GenConfig = load_config(&args.config)?;
    let mut overrides = std::collections::BTreeMap::new();
    if let Some(seed) = args.seed {
        config.seed = seed;
        overrides.insert("seed".to_string(), json!(seed));
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.clone());
        overrides.insert("output.path".to_string(), json!(out));
    }
    let format = args
        .format
        .or_else(|| args.out.as_deref().and_then(format_from_extension));
    if let Some(format) = format {
        if format != config.output.format {
            overrides.insert("output.format".to_string(), json!(format_name(format)));
        }
        config.output.format = format;
    }
    if args.overwrite {
        config.output.overwrite = true;
    }
    config.validate()?;

    let mut dataset = generate(&config)?;
    dataset.manifest.overrides = overrides;
    if args.timestamp {
        dataset.manifest.exported_at = Some(chrono::Utc::now().to_rfc3339());
    }
    let path = config.output.resolved_path();
    let written = export(
        &dataset,
        &path,
        config.output.format,
        config.output.overwrite,
    )?;

    let effects: Vec<&str> = dataset
        .manifest
        .effects
        .iter()
        .map(|e| e.kind.as_str())
        .collect();
    if json_out {
        let summary = json!({
            "shape": dataset.manifest.shape,
            "model_type": dataset.manifest.model_type,
            "ranks": dataset.manifest.ranks,
            "seed": dataset.manifest.seed,
            "effects": effects,
            "nnz": dataset.tensor.nnz(),
            "files": written,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("summary serializes")
        );
    } else {
        eprintln!(
            "generated {} tensor {:?}, ranks {:?}, seed {}",
            dataset.manifest.model_type.as_deref().unwrap_or("bare"),
            dataset.manifest.shape,
            dataset.manifest.ranks,
            dataset.manifest.seed
        );
        eprintln!(
            "effects: {}",
            if effects.is_empty() {
                "none".to_string()
            } else {
                effects.join(", ")
            }
        );
        for p in &written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run_validate(path: &Path, json_out: bool) -> Result<(), Error> {
    let config = load_config(path)?;
    if json_out {
        let v = json!({ "status": "ok", "config": config });
        println!(
            "{}",
            serde_json::to_string_pretty(&v).expect("config serializes")
        );
    } else {
        println!("OK");
        println!("{}", config.to_json_pretty());
    }
    Ok(())
}

fn tensor_norm(t: &TensorData) -> f64 {
    match t {
        TensorData::Dense(d) => tensorsynth::frobenius_norm(d),
        TensorData::Sparse(s) => s.entries().iter().map(|(_, v)| v * v).sum::<f64>().sqrt(),
    }
}

fn inspect_report(path: &Path, imported: &Imported) -> Value {
    let shape = imported.tensor.shape();
    let nnz = imported.tensor.nnz();
    let mut report = json!({
        "path": path,
        "shape": shape.dims(),
        "storage": imported.tensor.storage(),
        "nnz": nnz,
        "density": nnz as f64 / shape.numel() as f64,
        "frobenius_norm": tensor_norm(&imported.tensor),
        "has_manifest": imported.manifest.is_some(),
    });
    let obj = report.as_object_mut().expect("object");
    match (&imported.manifest, &imported.model) {
        (Some(m), _) => {
            obj.insert("model_type".into(), json!(m.model_type));
            obj.insert("ranks".into(), json!(m.ranks));
            obj.insert("seed".into(), json!(m.seed));
            obj.insert("format_version".into(), json!(m.format_version));
            let effects: Vec<Value> = m
                .effects
                .iter()
                .map(|e| json!({ "index": e.index, "kind": e.kind, "stage": e.stage }))
                .collect();
            obj.insert("effects".into(), Value::Array(effects));
            if !m.overrides.is_empty() {
                obj.insert("overrides".into(), json!(m.overrides));
            }
        }
        (None, Some(model)) => {
            let ranks: Vec<usize> = model.factors().iter().map(|u| u.ncols()).collect();
            let kind = match model {
                tensorsynth::Model::Cp(_) => "cp",
                tensorsynth::Model::Tucker(_) => "tucker",
            };
            obj.insert("model_type".into(), json!(kind));
            obj.insert("ranks".into(), json!(ranks));
        }
        (None, None) => {}
    }
    report
}

fn print_report(r: &Value) {
    let line = |k: &str| {
        r.get(k)
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into())
    };
    println!("path:           {}", r["path"].as_str().unwrap_or_default());
    println!("shape:          {}", line("shape"));
    println!(
        "storage:        {}",
        r["storage"].as_str().unwrap_or_default()
    );
    println!("nnz:            {}", line("nnz"));
    println!("density:        {}", line("density"));
    println!("frobenius norm: {}", line("frobenius_norm"));
    match r.get("model_type").and_then(Value::as_str) {
        Some(kind) => println!("model:          {kind}, ranks {}", line("ranks")),
        None => println!("model:          none"),
    }
    if let Some(seed) = r.get("seed") {
        println!("seed:           {seed}");
    }
    match r.get("effects").and_then(Value::as_array) {
        Some(effects) if !effects.is_empty() => {
            println!("effects:");
            for e in effects {
                println!(
                    "  {} {} ({})",
                    e["index"],
                    e["kind"].as_str().unwrap_or_default(),
                    e["stage"].as_str().unwrap_or_default()
                );
            }
        }
        Some(_) => println!("effects:        none"),
        None => println!("effects:        unknown (no manifest)"),
    }
}

fn run_inspect(path: &Path, json_out: bool) -> Result<(), Error> {
    let imported = import_dataset(path)?;
    let report = inspect_report(path, &imported);
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print_report(&report);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Generate {
            config,
            out,
            format,
            seed,
            overwrite,
            timestamp,
        } => run_generate(
            GenerateArgs {
                config,
                out,
                format: format.map(Format::from),
                seed,
                overwrite,
                timestamp,
            },
            cli.json,
        ),
        Command::Validate { config } => run_validate(&config, cli.json),
        Command::Inspect { path } => run_inspect(&path, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
