//! Command-line interface: `train`, `encode`, `reconstruct` and `eval`.
//!
//! Each invocation prints one JSON object on standard output; progress goes to standard
//! error through `log`. Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use ndarray::Array2;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{
    self, format_number, gen_clustered_lines, gen_gaussian, gen_subspace, gen_uniform_sphere, DatasetMeta,
    Normalization, Source,
};
use crate::deep::{decompose, train_deep};
use crate::error::Error;
use crate::grad::finite_difference_check;
use crate::metrics::{cluster_purity, energy_per_level, reconstruction_error, write_energy_csv, write_epoch_csv};
use crate::model::{DeepModel, Rule, TrainConfig};
use crate::shallow::assign_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dron", version, about = "Winner-take-all and deep residual Oja networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it to --out.
    Train(TrainArgs),
    /// Write per-layer (atom index, coefficient) codes for every sample.
    Encode(EncodeArgs),
    /// Rebuild samples from codes.
    Reconstruct(ReconstructArgs),
    /// Reconstruction error and per-level energy of a model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// CSV file (one sample per row) or IDX image file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic dataset, e.g. `lines:n=1000,dim=8,lines=4,noise=0,seed=1`.
    #[arg(long)]
    synth: Option<String>,
}

#[derive(Debug, Args)]
struct InputOptions {
    /// Ignore the first CSV line.
    #[arg(long)]
    skip_header: bool,
    #[arg(long, value_enum, default_value_t = NormArg::None)]
    normalize: NormArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    None,
    UnitNorm,
    Center,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Batch,
    Lambda1,
    Lambda2,
    Oja,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    options: InputOptions,
    /// Atoms per layer.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Use round(F * D) atoms per layer instead of --k.
    #[arg(long, conflicts_with = "k")]
    factor: Option<f64>,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Batch)]
    rule: RuleArg,
    /// Oja learning rate.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Maximum epochs per layer.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Stop when the relative change of the mean loss drops below this.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    options: InputOptions,
    /// Codes output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    /// Codes written by `encode`.
    #[arg(long)]
    codes: PathBuf,
    /// Reconstructed samples output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    options: InputOptions,
    /// Per-level energy CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Also compare the analytic loss gradient with finite differences.
    #[arg(long)]
    gradcheck: bool,
    /// Number of samples used by --gradcheck.
    #[arg(long, default_value_t = 100, requires = "gradcheck")]
    gradcheck_samples: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the subcommand. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();

    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// A parsed synthetic dataset with its ground-truth labels, if any.
struct Synth {
    data: Array2<f64>,
    labels: Option<Vec<usize>>,
    name: String,
}

fn parse_synth(spec: &str) -> std::result::Result<Synth, String> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let allowed: &[&str] = match name {
        "lines" => &["n", "dim", "lines", "noise", "seed"],
        "sphere" | "gauss" => &["n", "dim", "seed"],
        "subspace" => &["n", "dim", "rank", "seed"],
        _ => return Err(format!("unknown synthetic dataset {name:?} (expected lines, sphere, gauss or subspace)")),
    };
    let mut params = BTreeMap::new();
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, found {pair:?}"))?;
        if !allowed.contains(&k) {
            return Err(format!("unknown key {k:?} for {name} (allowed: {})", allowed.join(", ")));
        }
        if params.insert(k, v).is_some() {
            return Err(format!("key {k:?} given twice"));
        }
    }
    fn get<T: std::str::FromStr>(params: &BTreeMap<&str, &str>, key: &str, default: Option<T>) -> std::result::Result<T, String> {
        match params.get(key) {
            Some(v) => v.parse().map_err(|_| format!("bad value {v:?} for {key}")),
            None => default.ok_or_else(|| format!("missing key {key}")),
        }
    }
    let n: usize = get(&params, "n", None)?;
    let dim: usize = get(&params, "dim", None)?;
    let seed: u64 = get(&params, "seed", Some(0))?;
    if n == 0 || dim == 0 {
        return Err("n and dim must be positive".into());
    }
    let (data, labels) = match name {
        "lines" => {
            let lines: usize = get(&params, "lines", None)?;
            let noise: f64 = get(&params, "noise", Some(0.0))?;
            if lines == 0 || !(noise >= 0.0) || !noise.is_finite() {
                return Err("lines must be positive and noise non-negative".into());
            }
            let (d, l) = gen_clustered_lines(n, dim, lines, noise, seed);
            (d, Some(l))
        }
        "sphere" => (gen_uniform_sphere(n, dim, seed), None),
        "gauss" => (gen_gaussian(n, dim, seed), None),
        _ => {
            let rank: usize = get(&params, "rank", None)?;
            if rank == 0 || rank > dim {
                return Err("rank must be between 1 and dim".into());
            }
            (gen_subspace(n, dim, rank, seed), None)
        }
    };
    Ok(Synth { data, labels, name: name.to_string() })
}

/// Reads a CSV file or, when the file starts with an IDX magic number, an IDX image file.
fn read_path(path: &Path, skip_header: bool) -> crate::Result<(Array2<f64>, DatasetMeta)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= 4 && bytes[0] == 0 && bytes[1] == 0 {
        let data = data::parse_idx(&bytes)?;
        let meta = DatasetMeta::new(&data, Source::Idx);
        Ok((data, meta))
    } else {
        let data = data::read_csv(bytes.as_slice(), skip_header)?;
        let meta = DatasetMeta::new(&data, Source::Csv);
        Ok((data, meta))
    }
}

fn load_input(input: &Input, options: &InputOptions) -> CliResult<(Array2<f64>, DatasetMeta, Option<Vec<usize>>)> {
    let (mut data, mut meta, labels) = match (&input.data, &input.synth) {
        (Some(path), _) => {
            let (d, m) = read_path(path, options.skip_header)?;
            (d, m, None)
        }
        (None, Some(spec)) => {
            let s = parse_synth(spec).map_err(|e| CliError::Usage(format!("--synth {spec}: {e}")))?;
            let meta = DatasetMeta::new(&s.data, Source::Synth(s.name));
            (s.data, meta, s.labels)
        }
        (None, None) => return Err(CliError::Usage("one of --data or --synth is required".into())),
    };
    let how = match options.normalize {
        NormArg::None => Normalization::None,
        NormArg::UnitNorm => Normalization::UnitNorm,
        NormArg::Center => Normalization::Center,
    };
    data::normalize(&mut data, &mut meta, how);
    info!("loaded {} samples of dimension {} from {}", meta.n_samples, meta.dim, meta.source);
    Ok((data, meta, labels))
}

fn check_dim(model: &DeepModel, data: &Array2<f64>) -> CliResult<()> {
    if data.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: data.ncols() }.into());
    }
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_train(a: TrainArgs) -> CliResult<Value> {
    let config = TrainConfig {
        k_per_layer: a.k,
        increase_factor: a.factor,
        depth: a.depth,
        rule: match a.rule {
            RuleArg::Batch => Rule::BatchPca,
            RuleArg::Lambda1 => Rule::OnlineLambda1,
            RuleArg::Lambda2 => Rule::OnlineLambda2,
            RuleArg::Oja => Rule::OnlineOja,
        },
        learning_rate: a.gamma,
        max_epochs: a.epochs,
        tol_rel_loss: a.tol,
        seed: a.seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (data, meta, labels) = load_input(&a.input, &a.options)?;

    let (model, report) = train_deep(data.view(), &config)?;
    data::save_model(&model, &a.out)?;
    if let Some(path) = &a.metrics {
        let mut w = create(path)?;
        write_epoch_csv(&mut w, &report)?;
        w.flush()?;
    }
    let purity = match &labels {
        Some(l) => Some(cluster_purity(&assign_all(data.view(), &model.layers()[0])?.labels, l)?),
        None => None,
    };
    let final_loss = report.layers.last().map(|l| l.final_loss()).unwrap_or(0.0);
    info!("final loss {final_loss:.6e}; model written to {}", a.out.display());
    Ok(json!({
        "command": "train",
        "model": a.out.display().to_string(),
        "dataset": meta,
        "config": model.config,
        "k": model.layers()[0].len(),
        "final_loss": final_loss,
        "layers": report.layers,
        "level_energy": report.level_energy,
        "residual_energy": report.residual_energy,
        "cluster_purity": purity,
    }))
}

fn cmd_encode(a: EncodeArgs) -> CliResult<Value> {
    let model = data::load_model(&a.model)?;
    let data = match load_input(&a.input, &a.options) {
        Ok((d, _, _)) => d,
        Err(CliError::Runtime(Error::EmptyDataset)) => Array2::zeros((0, model.dim())),
        Err(e) => return Err(e),
    };
    check_dim(&model, &data)?;
    let lines: Vec<String> = (0..data.nrows())
        .into_par_iter()
        .map(|n| {
            let trace = decompose(&data.row(n).to_vec(), &model)?;
            let fields: Vec<String> = trace
                .assignments
                .iter()
                .flat_map(|a| [a.atom_index.to_string(), format_number(a.coefficient)])
                .collect();
            Ok(fields.join(","))
        })
        .collect::<crate::Result<_>>()?;
    let mut w = create(&a.out)?;
    for line in &lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(json!({
        "command": "encode",
        "n_samples": lines.len(),
        "depth": model.depth(),
        "out": a.out.display().to_string(),
    }))
}

/// Parses one code line into `(atom index, coefficient)` per layer.
fn parse_code(line: &str, row: usize, model: &DeepModel) -> crate::Result<Vec<(usize, f64)>> {
    let bad = |message: String| Error::BadCode { row, message };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 2 * model.depth() {
        return Err(bad(format!("expected {} fields, found {}", 2 * model.depth(), fields.len())));
    }
    fields
        .chunks(2)
        .zip(model.layers())
        .enumerate()
        .map(|(l, (pair, dict))| {
            let k: usize = pair[0].parse().map_err(|_| bad(format!("layer {}: bad atom index {:?}", l + 1, pair[0])))?;
            if k >= dict.len() {
                return Err(bad(format!("layer {}: atom index {k} out of range (layer has {})", l + 1, dict.len())));
            }
            let c: f64 = pair[1].parse().map_err(|_| bad(format!("layer {}: bad coefficient {:?}", l + 1, pair[1])))?;
            if !c.is_finite() {
                return Err(bad(format!("layer {}: non-finite coefficient", l + 1)));
            }
            Ok((k, c))
        })
        .collect()
}

/// Rebuilds a sample as `Σ_l c_l φ_{κ_l}`, accumulated in layer order.
fn rebuild(code: &[(usize, f64)], model: &DeepModel) -> Vec<f64> {
    let mut t = vec![0.0; model.dim()];
    for (&(k, c), dict) in code.iter().zip(model.layers()) {
        for (ti, v) in t.iter_mut().zip(dict.atom(k).values()) {
            *ti += c * v;
        }
    }
    t
}

fn cmd_reconstruct(a: ReconstructArgs) -> CliResult<Value> {
    let model = data::load_model(&a.model)?;
    let text = std::fs::read_to_string(&a.codes)?;
    let codes = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_code(l, i + 1, &model))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut out = Array2::zeros((codes.len(), model.dim()));
    for (mut row, code) in out.outer_iter_mut().zip(&codes) {
        row.assign(&ndarray::ArrayView1::from(&rebuild(code, &model)));
    }
    data::write_csv(create(&a.out)?, out.view())?;
    Ok(json!({
        "command": "reconstruct",
        "n_samples": codes.len(),
        "dim": model.dim(),
        "out": a.out.display().to_string(),
    }))
}

fn cmd_eval(a: EvalArgs) -> CliResult<Value> {
    let model = data::load_model(&a.model)?;
    let (data, meta, _) = load_input(&a.input, &a.options)?;
    check_dim(&model, &data)?;
    let error = reconstruction_error(data.view(), &model)?;
    let energy = energy_per_level(data.view(), &model)?;
    if let Some(path) = &a.metrics {
        let mut w = create(path)?;
        write_energy_csv(&mut w, &energy)?;
        w.flush()?;
    }
    let gradcheck = if a.gradcheck {
        let rows: Vec<usize> =
            (0..data.nrows()).filter(|&n| data.row(n).iter().any(|v| *v != 0.0)).take(a.gradcheck_samples).collect();
        let checks = rows
            .par_iter()
            .map(|&n| finite_difference_check(&data.row(n).to_vec(), &model))
            .collect::<crate::Result<Vec<_>>>()?;
        let max = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
        info!("gradient check on {} samples: max relative error {max:.3e}", checks.len());
        Some(json!({ "samples": checks.len(), "max_rel_error": max }))
    } else {
        None
    };
    Ok(json!({
        "command": "eval",
        "dataset": meta,
        "depth": model.depth(),
        "reconstruction_error": error,
        "energy": energy,
        "gradcheck": gradcheck,
    }))
}
