//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::driver::{recursive_cluster, Clustering, Method, MethodConfig, MicroclusterCount, ProjectionMode};
use crate::error::{Error, Result};
use crate::ingest::{load_and_standardize, LabelColumn, LabeledDataset};
use crate::metrics::{purity, v_measure, MetricsReport, SplitSummary};
use crate::projection::project;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INGEST: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sppursuit", version, about = "Clustering by spectral connectivity projection pursuit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a delimited numeric file.
    Cluster(ClusterArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Scpp,
    Scnpp,
    Lmsc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProjArg {
    Orthogonal,
    Correlated,
    Univariate,
}

#[derive(Debug, clap::Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth column, by header name or zero-based index.
    #[arg(long)]
    label_col: Option<LabelColumn>,
    #[arg(long)]
    clusters: usize,
    #[arg(long, value_enum, default_value = "scpp")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "orthogonal")]
    proj: ProjArg,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    beta_start: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_mult: f64,
    /// Microclusters per bipartition: a count or "auto".
    #[arg(long, default_value = "auto")]
    microclusters: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write projection.csv with the coordinates of the first split.
    #[arg(long)]
    emit_projection: bool,
}

impl ClusterArgs {
    fn config(&self) -> Result<MethodConfig> {
        let method = match self.method {
            MethodArg::Scpp => Method::Scpp,
            MethodArg::Scnpp => Method::Scnpp,
            MethodArg::Lmsc => Method::Lmsc,
        };
        let mode = match self.proj {
            ProjArg::Orthogonal => ProjectionMode::Orthogonal,
            ProjArg::Correlated => ProjectionMode::Correlated,
            ProjArg::Univariate => ProjectionMode::Univariate,
        };
        let mut c = MethodConfig::new(method, mode, self.clusters);
        if let Some(d) = self.dims {
            c.dims = d;
        }
        c.omega = self.omega;
        c.beta_start = self.beta_start;
        c.sigma_multiplier = self.sigma_mult;
        c.seed = self.seed;
        c.microclusters = match self.microclusters.as_str() {
            "auto" => MicroclusterCount::Auto,
            s => MicroclusterCount::Fixed(
                s.parse()
                    .map_err(|_| Error::Config(format!("microclusters must be a count or 'auto', got '{s}'")))?,
            ),
        };
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error, ingesting: bool) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidK { .. } | Error::InvalidParameter(_) => EXIT_CONFIG,
        _ if ingesting => EXIT_INGEST,
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Cluster(args) => cluster(&args),
    }
}

fn cluster(args: &ClusterArgs) -> i32 {
    let config = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let data = match load_and_standardize(&args.input, args.label_col.as_ref()) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e, true);
        }
    };
    let result = recursive_cluster(data.data.view(), &config)
        .and_then(|c| write_outputs(&args.out_dir, &data, &c, args.emit_projection));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e, false)
        }
    }
}

/// Metrics for a finished clustering; scores are None without ground truth.
pub fn metrics_report(clustering: &Clustering, truth: Option<&[String]>) -> Result<MetricsReport> {
    let per_split = clustering
        .split_order
        .iter()
        .map(|&i| {
            let node = &clustering.nodes[i];
            let s = node.split.as_ref().expect("split nodes carry results");
            SplitSummary {
                lambda2: s.lambda2,
                beta_used: s.beta_used,
                sigma_used: s.sigma_used,
                subset_size: node.member_indices.len(),
            }
        })
        .collect();
    let (mut p, mut v, mut h, mut c) = (None, None, None, None);
    if let Some(t) = truth {
        p = Some(purity(&clustering.labels, t)?);
        let vm = v_measure(&clustering.labels, t)?;
        v = Some(vm.v_measure);
        h = Some(vm.homogeneity);
        c = Some(vm.completeness);
    }
    Ok(MetricsReport {
        purity: p,
        v_measure: v,
        homogeneity: h,
        completeness: c,
        per_split,
    })
}

fn write_outputs(dir: &Path, data: &LabeledDataset, clustering: &Clustering, emit_projection: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut labels = String::from("index,label\n");
    for (&row, &l) in data.row_indices.iter().zip(&clustering.labels) {
        labels.push_str(&format!("{row},{l}\n"));
    }
    fs::write(dir.join("labels.csv"), labels)?;

    let report = metrics_report(clustering, data.truth.as_deref())?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.into()))?;
    fs::write(dir.join("metrics.json"), json + "\n")?;

    if emit_projection {
        let root = clustering.nodes[0].split.as_ref().expect("root is split");
        let p = project(&root.projection, data.data.view())?;
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join("projection.csv"))?);
        let cols: Vec<String> = (1..=p.nrows()).map(|i| format!("p{i}")).collect();
        writeln!(f, "index,{},label", cols.join(","))?;
        for (i, (&row, &l)) in data.row_indices.iter().zip(&clustering.labels).enumerate() {
            let coords: Vec<String> = p.column(i).iter().map(|x| format!("{x}")).collect();
            writeln!(f, "{row},{},{l}", coords.join(","))?;
        }
        f.flush()?;
    }
    Ok(())
}
