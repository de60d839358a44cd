use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rsrm::experiment::{
    derive_l, find_best_k, run_conv_baseline, run_rsrm, run_rsrm_grid, GridConfig, GridSpec, DEFAULT_D_SET,
    DEFAULT_I_RANGE, DEFAULT_K_MAX,
};
use rsrm::fetch::{fetch_dataset, FetchOutcome};
use rsrm::io::{load_dataset, DatasetSpec};
use rsrm::kmeans::{cluster_train_set, DEFAULT_MAX_ITERATIONS};
use rsrm::model_file::write_model;
use rsrm::report::{emit_plot, export_predictions, export_records, format_table, read_records, ExportRow, Format};
use rsrm::{build_model, Dataset, Error, ExperimentRecord};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CAPPED: u8 = 3;

#[derive(Parser)]
#[command(name = "rsrm", version, about = "k-NN with cluster-based reference set reduction")]
struct Cli {
    /// Directory holding dataset spec files [env: RSRM_SPEC_DIR]
    #[arg(long, global = true)]
    spec_dir: Option<PathBuf>,
    /// Directory holding downloaded data [env: RSRM_DATA_DIR]
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download the raw files listed in dataset specs
    FetchData(FetchArgs),
    /// Conventional k-NN over the full training set
    Baseline(BaselineArgs),
    /// Evaluate the (i, D) grid of reduced-reference-set classifiers
    Grid(GridArgs),
    /// Print and plot previously exported records
    Report(ReportArgs),
}

#[derive(Args)]
struct FetchArgs {
    /// Dataset names or spec paths
    #[arg(long = "dataset", required_unless_present = "all")]
    datasets: Vec<String>,
    /// Every spec with download sources in the spec directory
    #[arg(long, conflicts_with = "datasets")]
    all: bool,
    /// Keep existing files and accept downloads without checking pinned checksums
    #[arg(long)]
    no_verify: bool,
}

#[derive(Args)]
struct OutputArgs {
    /// Results file (default: results/<dataset>-<command>.<ext>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Also write per-item predictions as CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct BaselineArgs {
    /// Dataset name or spec path
    #[arg(long)]
    dataset: String,
    #[arg(long, required_unless_present = "sweep")]
    k: Option<usize>,
    /// Sweep k = 1..=K_MAX and report the most accurate
    #[arg(long, value_name = "K_MAX", num_args = 0..=1, default_missing_value = "25", conflicts_with = "k")]
    sweep: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GridArgs {
    /// Dataset name or spec path
    #[arg(long)]
    dataset: String,
    /// Exponents: "3", "1..8" or "1,2,5"
    #[arg(long, default_value = "1..8")]
    i_range: String,
    /// D values: "1,1.5,2"
    #[arg(long, default_value = "1,1.5,2", value_delimiter = ',')]
    d_set: Vec<f64>,
    /// Neighbours voted on (default: best k of a conventional sweep)
    #[arg(long)]
    k_neighbors: Option<usize>,
    /// Upper end of the best-k sweep
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    /// Fixed cluster count instead of one derived from each exponent
    #[arg(long, conflicts_with = "i_range")]
    k_clusters: Option<usize>,
    /// Fixed number of clusters consulted instead of floor(sqrt(kClusters))
    #[arg(long)]
    l: Option<usize>,
    /// Write an accuracy-versus-cost SVG including the conventional baseline
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Write one model file per record into this directory
    #[arg(long)]
    save_models: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Exported record files (CSV or JSON lines)
    #[arg(long = "records", required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    /// Record file holding the conventional baseline row
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// SVG output path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => Failure::Usage(e.into()),
            other => Failure::Data(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(inner) => inner.into(),
            Err(e) => Failure::Data(e),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let dirs = Dirs::resolve(&cli);
    let result = match cli.command {
        Command::FetchData(a) => cmd_fetch(&dirs, a),
        Command::Baseline(a) => cmd_baseline(&dirs, a),
        Command::Grid(a) => cmd_grid(&dirs, a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: at least one clustering stopped at the iteration cap");
            ExitCode::from(EXIT_CAPPED)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

struct Dirs {
    spec: PathBuf,
    data: PathBuf,
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn first_existing(explicit: Option<PathBuf>, env: &str, local: &str) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(env).map(PathBuf::from))
        .or_else(|| Some(PathBuf::from(local)).filter(|p| p.is_dir()))
        .unwrap_or_else(|| workspace_root().join(local))
}

impl Dirs {
    fn resolve(cli: &Cli) -> Self {
        Dirs {
            spec: first_existing(cli.spec_dir.clone(), "RSRM_SPEC_DIR", "datasets"),
            data: first_existing(cli.data_dir.clone(), "RSRM_DATA_DIR", "data"),
        }
    }

    fn spec(&self, name_or_path: &str) -> Result<DatasetSpec, Failure> {
        let as_path = Path::new(name_or_path);
        let path = if as_path.extension().is_some_and(|e| e == "toml") || as_path.components().count() > 1 {
            as_path.to_owned()
        } else {
            self.spec.join(format!("{name_or_path}.toml"))
        };
        if !path.is_file() {
            return Err(Failure::Usage(anyhow!(
                "no dataset spec {} (looked for {})",
                name_or_path,
                path.display()
            )));
        }
        Ok(DatasetSpec::from_file(&path)?)
    }

    fn load(&self, name_or_path: &str) -> Result<Dataset, Failure> {
        let spec = self.spec(name_or_path)?;
        let dataset = load_dataset(&spec, &self.data)
            .with_context(|| format!("loading {} (try `rsrm fetch-data --dataset {}`)", spec.name, spec.name))?;
        log::info!(
            "{}: {} train, {} test, {} attributes, {} classes",
            dataset.name,
            dataset.train.len(),
            dataset.test.len(),
            dataset.num_attributes,
            dataset.num_classes()
        );
        Ok(dataset)
    }
}

fn cmd_fetch(dirs: &Dirs, args: FetchArgs) -> Outcome {
    let specs = if args.all {
        let mut paths: Vec<PathBuf> = fs::read_dir(&dirs.spec)
            .with_context(|| format!("reading {}", dirs.spec.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "toml"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| Ok(DatasetSpec::from_file(p)?))
            .filter(|s: &Result<DatasetSpec, Failure>| s.as_ref().map_or(true, |s| !s.fetch.is_empty()))
            .collect::<Result<Vec<_>, Failure>>()?
    } else {
        args.datasets.iter().map(|d| dirs.spec(d)).collect::<Result<_, _>>()?
    };
    let mut failed = Vec::new();
    for spec in &specs {
        match fetch_dataset(spec, &dirs.data, !args.no_verify) {
            Ok(outcomes) => {
                for o in outcomes {
                    match o {
                        FetchOutcome::Present(p) => println!("{}: present {}", spec.name, p.display()),
                        FetchOutcome::Downloaded(p) => println!("{}: downloaded {}", spec.name, p.display()),
                    }
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", spec.name);
                failed.push(spec.name.clone());
            }
        }
    }
    if !failed.is_empty() {
        return Err(Failure::Data(anyhow!("could not fetch {}", failed.join(", "))));
    }
    Ok(false)
}

fn output_path(out: &OutputArgs, dataset: &str, command: &str) -> (PathBuf, Format) {
    let format = match out.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Jsonl) => Format::JsonLines,
        None => out.out.as_deref().map_or(Format::Csv, Format::from_path),
    };
    let path = out.out.clone().unwrap_or_else(|| {
        let ext = if format == Format::Csv { "csv" } else { "jsonl" };
        PathBuf::from("results").join(format!("{dataset}-{command}.{ext}"))
    });
    (path, format)
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_outputs(
    dataset: &Dataset,
    records: &[ExperimentRecord],
    out: &OutputArgs,
    command: &str,
) -> Result<(), Failure> {
    let (path, format) = output_path(out, &dataset.name, command);
    ensure_parent(&path)?;
    export_records(records, &path, format)?;
    println!("wrote {} record(s) to {}", records.len(), path.display());
    if let Some(pred) = &out.predictions {
        ensure_parent(pred)?;
        let actual: Vec<_> = dataset.test.iter().map(|i| i.label).collect();
        export_predictions(records, &actual, &dataset.labels, pred)?;
        println!("wrote predictions to {}", pred.display());
    }
    Ok(())
}

fn cmd_baseline(dirs: &Dirs, args: BaselineArgs) -> Outcome {
    let dataset = dirs.load(&args.dataset)?;
    let k = match (args.k, args.sweep) {
        (Some(k), _) => k,
        (None, Some(k_max)) => {
            let best = find_best_k(&dataset, k_max)?;
            println!("{:>3} {:>8} {:>9}", "k", "correct", "accuracy");
            for row in &best.table {
                let mark = if row.k == best.k { "  <- best" } else { "" };
                println!("{:>3} {:>8} {:>9.4}{mark}", row.k, row.correct, row.accuracy_percent);
            }
            best.k
        }
        (None, None) => unreachable!("clap requires --k or --sweep"),
    };
    let record = run_conv_baseline(&dataset, k)?;
    let row = ExportRow::from(&record);
    println!("{}", format_table(std::slice::from_ref(&row)).trim_end());
    println!("{row}");
    write_outputs(&dataset, std::slice::from_ref(&record), &args.output, "baseline")?;
    Ok(false)
}

/// Parses "3", "1..8", "1,2,5" or mixtures such as "1..3,6".
fn parse_i_range(text: &str) -> anyhow::Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u32 = lo
                .trim()
                .parse()
                .with_context(|| format!("bad exponent range {part:?}"))?;
            let hi: u32 = hi
                .trim_start_matches('=')
                .trim()
                .parse()
                .with_context(|| format!("bad exponent range {part:?}"))?;
            if lo > hi {
                bail!("empty exponent range {part:?}");
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().with_context(|| format!("bad exponent {part:?}"))?);
        }
    }
    if out.iter().any(|&i| i > 62) {
        bail!("exponents above 62 are not supported");
    }
    if out.iter().any(|i| !DEFAULT_I_RANGE.contains(i)) {
        log::warn!("exponents outside 1..8 requested: {out:?}");
    }
    Ok(out)
}

fn cmd_grid(dirs: &Dirs, args: GridArgs) -> Outcome {
    let i_range = parse_i_range(&args.i_range).map_err(Failure::Usage)?;
    if args.d_set.is_empty() || args.d_set.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(Failure::Usage(anyhow!(
            "D values must be positive, got {:?}",
            args.d_set
        )));
    }
    if args.d_set != DEFAULT_D_SET {
        log::info!("non-default D set {:?}", args.d_set);
    }
    let dataset = dirs.load(&args.dataset)?;

    let k_neighbors = match args.k_neighbors {
        Some(k) => k,
        None => {
            let best = find_best_k(&dataset, args.k_max)?;
            println!("best k = {} ({:.4}%)", best.k, best.accuracy_percent);
            best.k
        }
    };

    let (records, clusterings) = if let Some(k_clusters) = args.k_clusters {
        let clustering = cluster_train_set(&dataset.train, k_clusters, args.max_iterations)?;
        let l = args.l.unwrap_or_else(|| derive_l(k_clusters));
        let records = args
            .d_set
            .iter()
            .map(|&d| {
                let config = GridConfig {
                    i_exponent: None,
                    k_clusters,
                    l,
                    d,
                    k_neighbors,
                };
                run_rsrm(&dataset, &clustering, config)
            })
            .collect::<rsrm::Result<Vec<_>>>()?;
        (records, [(k_clusters, clustering)].into_iter().collect())
    } else if let Some(l) = args.l {
        // derived cluster counts, fixed L
        let spec = GridSpec {
            i_range,
            d_set: args.d_set.clone(),
            k_neighbors,
            max_iterations: args.max_iterations,
        };
        let run = run_rsrm_grid(&dataset, &spec)?;
        let records = run
            .records
            .iter()
            .map(|r| {
                let mut config = *r.classifier.grid().expect("grid records are RSRM");
                config.l = l;
                run_rsrm(&dataset, &run.clusterings[&config.k_clusters], config)
            })
            .collect::<rsrm::Result<Vec<_>>>()?;
        (records, run.clusterings)
    } else {
        let spec = GridSpec {
            i_range,
            d_set: args.d_set.clone(),
            k_neighbors,
            max_iterations: args.max_iterations,
        };
        let run = run_rsrm_grid(&dataset, &spec)?;
        (run.records, run.clusterings)
    };

    let rows: Vec<ExportRow> = records.iter().map(ExportRow::from).collect();
    print!("{}", format_table(&rows));
    write_outputs(&dataset, &records, &args.output, "grid")?;

    if let Some(dir) = &args.save_models {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &records {
            let config = r.classifier.grid().expect("grid records are RSRM");
            let model = build_model(&clusterings[&config.k_clusters], &dataset.train, config.d)?;
            let name = format!("{}-k{}-D{}.model", dataset.name, config.k_clusters, config.d);
            let path = dir.join(name);
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            write_model(&model, &mut w)
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        println!("wrote {} model(s) to {}", records.len(), dir.display());
    }

    if let Some(plot) = &args.plot {
        let baseline = run_conv_baseline(&dataset, k_neighbors)?;
        ensure_parent(plot)?;
        let title = format!("{}: accuracy versus distance computations", dataset.name);
        emit_plot(&rows, Some(&ExportRow::from(&baseline)), &title, plot)?;
        println!("wrote plot to {}", plot.display());
    }

    Ok(records.iter().any(|r| r.convergence_capped))
}

fn cmd_report(args: ReportArgs) -> Outcome {
    let mut rows = Vec::new();
    for path in &args.records {
        rows.extend(read_records(path)?);
    }
    let mut baseline = match &args.baseline {
        Some(path) => Some(
            read_records(path)?
                .into_iter()
                .find(ExportRow::is_baseline)
                .ok_or_else(|| Failure::Data(anyhow!("{} holds no baseline row", path.display())))?,
        ),
        None => None,
    };
    if let Some(pos) = rows.iter().position(ExportRow::is_baseline) {
        let b = rows.remove(pos);
        baseline.get_or_insert(b);
    }
    rows.retain(|r| !r.is_baseline());
    if rows.is_empty() {
        return Err(Failure::Data(anyhow!("no grid records to report")));
    }
    print!("{}", format_table(&rows));
    if let Some(b) = &baseline {
        println!("baseline: {b}");
    }
    let capped = rows.iter().any(|r| r.convergence_capped);
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        let title = args
            .title
            .clone()
            .unwrap_or_else(|| format!("{}: accuracy versus distance computations", rows[0].dataset));
        emit_plot(&rows, baseline.as_ref(), &title, out)?;
        println!("wrote plot to {}", out.display());
    }
    Ok(capped)
}
