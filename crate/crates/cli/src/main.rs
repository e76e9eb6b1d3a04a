//! `hyperslice`: batch front end for generating, clustering and partitioning
//! ensembles without the UI.
//!
//! Exit codes: 0 on success, 2 on invalid input, 1 on runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hyperslice_core::clustering::{
    assign_colors, hierarchical_cluster, prune, prune_to_count, ClusterAssignment, ClusterTree, ColorAssignment,
    Linkage, Palette,
};
use hyperslice_core::embedding::{embed_matrix, Embedding};
use hyperslice_core::ensemble::synthetic::generate_synthetic;
use hyperslice_core::ensemble::{load_ensemble, normalize_fields, write_ensemble};
use hyperslice_core::partition::{correlation_ranking, train_svm_on, FocusPoint, Partition, SvmConfig};
use hyperslice_core::similarity::{compute_run_matrix, compute_timestep_matrix, DistanceMatrix, ShiftOptions};

#[derive(Parser)]
#[command(name = "hyperslice", version, about = "Ensemble clustering and parameter-space partitioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the synthetic four-parameter ensemble and its ground-truth labels.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Computes the timestep matrix and the run matrix.
    Distances(DistancesArgs),
    /// Clusters a run matrix and prunes the tree.
    Cluster {
        #[arg(long)]
        dr: PathBuf,
        #[arg(long)]
        linkage: String,
        /// Pruning height, or `autoK` for the height that yields K clusters.
        #[arg(long)]
        prune: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embeds a distance matrix with SMACOF.
    Embed {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains the SVM on cluster labels and writes the partition grid.
    Partition(PartitionArgs),
    /// Extracts a 2D hyper-slice from a partition grid.
    Slice {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        axes: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        focus: Option<Vec<f64>>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary projection mask of one segment in a slice.
    Project {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        segment: u32,
        #[arg(long)]
        expr: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        axes: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        focus: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ranks parameters by correlation with the similarity embedding.
    Correlations {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
        /// Writes to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DistancesArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Monte Carlo sample count per field.
    #[arg(long, default_value_t = 1024)]
    seeds: usize,
    /// Seed of the sample position generator.
    #[arg(long, default_value_t = 0)]
    rng: u64,
    /// Time interval `T0:T1`; defaults to each pair's full overlap.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Time-shift search `TAUMAX:STEP`.
    #[arg(long)]
    shift: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output of `cluster`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Nodes per axis.
    #[arg(long, default_value_t = hyperslice_core::partition::DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Parameters spanning the grid; all by default.
    #[arg(long, value_delimiter = ',')]
    parameters: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
}

/// File written by `cluster` and read by `partition`.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ClusterFile {
    /// Run names in matrix order; labels refer to these.
    runs: Vec<String>,
    tree: ClusterTree,
    assignment: ClusterAssignment,
    colors: ColorAssignment,
    cluster_colors: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<hyperslice_core::Error> for CliError {
    fn from(e: hyperslice_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn pair(text: &str, what: &str) -> CliResult<(f64, f64)> {
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| invalid(format!("invalid {what} {text:?}")));
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| invalid(format!("{what} {text:?} must have the form A:B")))?;
    Ok((parse(a)?, parse(b)?))
}

fn synth(seed: u64, out: &Path) -> CliResult {
    let s = generate_synthetic(seed);
    write_ensemble(&s.ensemble, out)?;
    let labels: Vec<(String, u32)> = s
        .ensemble
        .runs()
        .iter()
        .map(|r| r.name.clone())
        .zip(s.labels)
        .collect();
    write_json(&out.join("labels.json"), &labels)
}

fn distances(a: &DistancesArgs) -> CliResult {
    let interval = a.interval.as_deref().map(|t| pair(t, "interval")).transpose()?;
    if let Some((t0, t1)) = interval {
        if t0.is_nan() || t1.is_nan() || t0 > t1 {
            return Err(invalid(format!("interval {t0}:{t1} is empty")));
        }
    }
    let shift = a
        .shift
        .as_deref()
        .map(|t| pair(t, "shift").and_then(|(m, s)| Ok(ShiftOptions::new(m, s)?)))
        .transpose()?;
    let ensemble = normalize_fields(load_ensemble(&a.manifest)?);
    let dt = compute_timestep_matrix(&ensemble, a.seeds, a.rng)?;
    let dr = compute_run_matrix(&dt, interval, shift.as_ref())?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    dt.matrix().write(&a.out.join("timesteps.edmx"))?;
    dr.write(&a.out.join("runs.edmx"))?;
    Ok(())
}

fn cluster(dr: &Path, linkage: &str, prune_arg: &str, out: &Path) -> CliResult {
    let linkage: Linkage = linkage
        .parse()
        .map_err(|_| invalid(format!("unknown linkage {linkage:?}")))?;
    let matrix = DistanceMatrix::read(dr)?;
    let tree = hierarchical_cluster(&matrix, linkage)?;
    let assignment = match prune_arg.strip_prefix("auto") {
        Some(k) => {
            let k: usize = k.parse().map_err(|_| invalid(format!("invalid cluster count in {prune_arg:?}")))?;
            prune_to_count(&tree, k)?
        }
        None => {
            let h: f64 = prune_arg
                .parse()
                .map_err(|_| invalid(format!("--prune expects a height or autoK, got {prune_arg:?}")))?;
            prune(&tree, h)?
        }
    };
    let colors = assign_colors(&tree, &assignment, Palette::Set1, None);
    let cluster_colors = (0..assignment.cluster_count as u32)
        .map(|c| colors.hex(c).to_string())
        .collect();
    let file = ClusterFile {
        runs: matrix.row_keys().iter().map(|k| k.run.clone()).collect(),
        tree,
        assignment,
        colors,
        cluster_colors,
    };
    write_json(out, &file)
}

fn embed(matrix: &Path, dim: usize, out: &Path) -> CliResult {
    let m = DistanceMatrix::read(matrix)?;
    write_json(out, &embed_matrix(&m, dim)?)
}

fn partition(a: &PartitionArgs) -> CliResult {
    let ensemble = load_ensemble(&a.manifest)?;
    let file: ClusterFile = read_json(&a.labels)?;
    if file.runs.len() != file.assignment.labels.len() {
        return Err(invalid("labels file lists a different number of runs and labels"));
    }
    // reorder labels into manifest order
    let labels = ensemble
        .runs()
        .iter()
        .map(|r| {
            file.runs
                .iter()
                .position(|n| *n == r.name)
                .map(|i| file.assignment.labels[i])
                .ok_or_else(|| invalid(format!("run {:?} is missing from the labels file", r.name)))
        })
        .collect::<CliResult<Vec<u32>>>()?;
    let assignment = ClusterAssignment {
        labels,
        ..file.assignment
    };
    let axes: Vec<usize> = match &a.parameters {
        None => (0..ensemble.parameter_names().len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                ensemble
                    .parameter_index(n)
                    .ok_or_else(|| invalid(format!("unknown parameter {n:?}")))
            })
            .collect::<CliResult<_>>()?,
    };
    let defaults = SvmConfig::default_for(axes.len());
    let config = SvmConfig {
        c: a.c.unwrap_or(defaults.c),
        gamma: a.gamma.unwrap_or(defaults.gamma),
    };
    let model = train_svm_on(&ensemble, &assignment, config, &axes)?;
    let resolution = vec![a.resolution; axes.len()];
    let part = Partition::build(&ensemble, &assignment, Some(&file.colors), &model, &resolution)?;
    part.write(&a.out)?;
    if !model.training_misclassifications.is_empty() {
        eprintln!(
            "warning: {} training runs fall in a different segment than their cluster",
            model.training_misclassifications.len()
        );
    }
    Ok(())
}

fn axis(p: &Partition, token: &str) -> CliResult<usize> {
    let token = token.trim();
    match token.parse::<usize>() {
        Ok(i) if i < p.dim() => Ok(i),
        Ok(i) => Err(invalid(format!("axis {i} out of range"))),
        Err(_) => p.axis_index(token).ok_or_else(|| invalid(format!("unknown axis {token:?}"))),
    }
}

fn slice_args(p: &Partition, axes: &[String], focus: Option<Vec<f64>>) -> CliResult<((usize, usize), FocusPoint)> {
    let [a, b] = axes else {
        return Err(invalid("--axes takes exactly two axes"));
    };
    let axes = (axis(p, a)?, axis(p, b)?);
    Ok((axes, focus.map_or_else(|| p.center_focus(), FocusPoint)))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth { seed, out } => synth(seed, &out),
        Command::Distances(a) => distances(&a),
        Command::Cluster {
            dr,
            linkage,
            prune,
            out,
        } => cluster(&dr, &linkage, &prune, &out),
        Command::Embed { matrix, dim, out } => embed(&matrix, dim, &out),
        Command::Partition(a) => partition(&a),
        Command::Slice {
            grid,
            axes,
            focus,
            epsilon,
            out,
        } => {
            let p = Partition::read(&grid)?;
            let (axes, focus) = slice_args(&p, &axes, focus)?;
            write_json(&out, &p.slice(&focus, axes, epsilon)?)
        }
        Command::Project {
            grid,
            segment,
            expr,
            axes,
            focus,
            out,
        } => {
            let p = Partition::read(&grid)?;
            let (axes, focus) = slice_args(&p, &axes, focus)?;
            write_json(&out, &p.projection(segment, &expr, &focus, axes)?)
        }
        Command::Correlations {
            manifest,
            embedding,
            out,
        } => {
            let ensemble = load_ensemble(&manifest)?;
            let emb: Embedding = read_json(&embedding)?;
            let result = correlation_ranking(&ensemble, &emb)?;
            match out {
                Some(path) => write_json(&path, &result),
                None => {
                    let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?;
                    println!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
