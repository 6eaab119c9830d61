//! `spconv` command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::NnzReport;
use crate::bench::{
    emit_report, generate_case, run_table_bench, BenchOptions, ReportFormat, DEFAULT_SEED,
    DEFAULT_TRIALS, DEFAULT_WARMUP,
};
use crate::conv::{ConvSpec, Kernel, Transform};
use crate::error::{Error, Result};
use crate::layers::{densenet121, load_layer_table, LayerConfig};
use crate::sparse::{threads_from_env, Layout};
use crate::textio::{read_dense, write_dense};
use crate::verify::{run_sweep, VerifyOptions};

#[derive(Parser, Debug)]
#[command(
    name = "spconv",
    version,
    about = "Padded, strided convolution by sparse matrix-vector product"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a transform for one geometry and save it.
    Build(BuildArgs),
    /// Apply a saved transform to a dense input file.
    Convolve(ConvolveArgs),
    /// Check sparse, direct and im2col convolution against each other over a sweep.
    Verify(VerifyArgs),
    /// Print nonzero-multiplication counts as CSV.
    Nnz(NnzArgs),
    /// Time CSR, CSC and im2col convolution over a layer table.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct SpecArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    p: usize,
}

impl SpecArgs {
    fn spec(&self) -> Result<ConvSpec> {
        ConvSpec::new(self.m, self.n, self.k, self.s, self.p)
    }
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Dense k x k kernel file; a seeded random-normal kernel when absent.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Rotate the kernel by 180 degrees (flipped convolution).
    #[arg(long)]
    flip: bool,
    #[arg(long, default_value = "csr")]
    layout: Layout,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvolveArgs {
    #[arg(long)]
    transform: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 12)]
    max_dim: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct NnzArgs {
    #[arg(long, requires_all = ["n", "k", "s", "p"])]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Layer table CSV; the bundled DenseNet121 table when absent.
    #[arg(long, conflicts_with = "m")]
    layers: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Layer table CSV; the bundled DenseNet121 table when absent.
    #[arg(long)]
    layers: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Let each SpMV use SPCONV_THREADS threads.
    #[arg(long)]
    parallel: bool,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_error(path))
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(io_error(path)),
        None => out
            .write_all(text.as_bytes())
            .map_err(io_error(Path::new("<stdout>"))),
    }
}

fn layers_from(path: Option<&Path>) -> Result<Vec<LayerConfig>> {
    match path {
        Some(path) => load_layer_table(path),
        None => Ok(densenet121()),
    }
}

enum Outcome {
    Success,
    Failed,
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome> {
    let stdout_err = io_error(Path::new("<stdout>"));
    match cli.command {
        Command::Build(args) => {
            let spec = args.spec.spec()?;
            let mut kernel = match &args.kernel {
                Some(path) => Kernel::from_grid(&read_dense(open(path)?)?)?,
                None => generate_case(&spec, args.seed, 0).1,
            };
            if args.flip {
                kernel = kernel.flipped();
            }
            let transform = Transform::build(&kernel, &spec, args.layout)?;
            transform.save(&args.out)?;
            writeln!(
                out,
                "{} {}x{} nnz={}",
                transform.header(),
                transform.matrix().rows(),
                transform.matrix().cols(),
                transform.nnz()
            )
            .map_err(stdout_err)?;
        }
        Command::Convolve(args) => {
            let transform = Transform::load(&args.transform)?;
            let input = read_dense(open(&args.input)?)?;
            let output = transform.convolve_threaded(&input, threads_from_env())?;
            let mut buf = Vec::new();
            write_dense(&mut buf, &output)?;
            write_text(args.out.as_deref(), &String::from_utf8_lossy(&buf), out)?;
        }
        Command::Verify(args) => {
            let report = run_sweep(&VerifyOptions {
                max_dim: args.max_dim,
                seeds: args.seeds,
                base_seed: args.seed,
            })?;
            for failure in report.failures.iter().take(20) {
                writeln!(err, "FAIL {failure}").map_err(io_error(Path::new("<stderr>")))?;
            }
            writeln!(out, "{}", report.summary()).map_err(stdout_err)?;
            if !report.is_ok() {
                return Ok(Outcome::Failed);
            }
        }
        Command::Nnz(args) => {
            let rows: Vec<(String, ConvSpec)> = match (args.m, args.n, args.k, args.s, args.p) {
                (Some(m), Some(n), Some(k), Some(s), Some(p)) => {
                    vec![("spec".to_string(), ConvSpec::new(m, n, k, s, p)?)]
                }
                _ => layers_from(args.layers.as_deref())?
                    .into_iter()
                    .map(|l| (l.name, l.spec))
                    .collect(),
            };
            let mut text = format!("{}\n", NnzReport::CSV_HEADER);
            for (name, spec) in rows {
                text.push_str(&NnzReport::new(spec).csv_row(&name));
                text.push('\n');
            }
            write_text(None, &text, out)?;
        }
        Command::Bench(args) => {
            let layers = layers_from(args.layers.as_deref())?;
            let opts = BenchOptions {
                trials: args.trials.max(1),
                warmup: args.warmup,
                seed: args.seed,
                spmv_threads: if args.parallel { threads_from_env() } else { 1 },
            };
            let total = layers.len();
            let quiet = args.quiet;
            let results = run_table_bench(&layers, &opts, |i, cfg| {
                if !quiet {
                    let _ = writeln!(err, "[{}/{}] {}", i + 1, total, cfg.name);
                }
            })?;
            write_text(
                args.out.as_deref(),
                &emit_report(&results, args.format),
                out,
            )?;
        }
    }
    Ok(Outcome::Success)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code: 0 on success, 1 on a failed check or runtime error,
/// 2 on a usage error.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Entry point for the binary.
pub fn main_with_std_streams() -> i32 {
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut err = std::io::stderr();
    let code = cli_main(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}
