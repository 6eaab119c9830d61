//! Timing harness: precomputed sparse transform (CSR and CSC) against an
//! im2col lowering, per layer, on seeded random-normal inputs.
//!
//! The SpMV paths are timed on the apply step only (flatten, multiply,
//! reshape); building the transform is a one-time cost reported separately.
//! The im2col path rebuilds its lowered matrix on every trial, since that is
//! inherent to the method.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conv::{ConvSpec, Kernel, Transform};
use crate::dense::Grid;
use crate::error::{Error, Result};
use crate::layers::LayerConfig;
use crate::reference::{direct_conv, im2col_conv};
use crate::sparse::Layout;

/// Tolerance between each method and the direct reference.
pub const REFERENCE_TOL: f64 = 1e-10;
/// Tolerance between the CSR and CSC outputs.
pub const LAYOUT_TOL: f64 = 1e-12;

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    CsrSpmv,
    CscSpmv,
    Im2col,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CsrSpmv, Method::CscSpmv, Method::Im2col];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CsrSpmv => "CSR-SpMV",
            Method::CscSpmv => "CSC-SpMV",
            Method::Im2col => "im2col",
        }
    }

    pub fn is_sparse(self) -> bool {
        !matches!(self, Method::Im2col)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub layer: String,
    pub method: Method,
    pub trials: usize,
    pub mean_us: f64,
    /// Standard error of the mean, `sd / sqrt(trials)`; zero for one trial.
    pub sem_us: f64,
    /// Transform construction time; `None` for im2col.
    pub build_time_us: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Threads used inside each SpMV; 1 keeps the comparison single-threaded.
    pub spmv_threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            trials: DEFAULT_TRIALS,
            warmup: DEFAULT_WARMUP,
            seed: DEFAULT_SEED,
            spmv_threads: 1,
        }
    }
}

/// Seeded standard-normal input and kernel for one geometry.
///
/// The generator is ChaCha20 keyed by `seed`, with `stream` selecting an
/// independent stream (the layer index in a table run). Input values are
/// drawn first, row-major, then kernel values.
pub fn generate_case(spec: &ConvSpec, seed: u64, stream: u64) -> (Grid, Kernel) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let input = Grid::from_fn(spec.m(), spec.n(), |_, _| StandardNormal.sample(&mut rng));
    let kernel_values = (0..spec.k() * spec.k())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let kernel = Kernel::new(spec.k(), kernel_values).expect("k >= 1");
    (input, kernel)
}

/// Mean and standard error of a sample, both in the sample's units.
pub fn mean_sem(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn time_us<T>(mut f: impl FnMut() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e6)
}

fn check_close(layer: &str, method: &str, a: &Grid, b: &Grid, tol: f64) -> Result<()> {
    let dev = a.max_abs_diff(b).unwrap_or(f64::INFINITY);
    if dev.is_nan() || dev > tol {
        return Err(Error::CrossCheck {
            layer: layer.to_string(),
            method: method.to_string(),
            max_abs_dev: dev,
        });
    }
    Ok(())
}

/// Outputs of every method on one generated case, after cross-checking.
#[derive(Clone, Debug)]
pub struct CheckedOutputs {
    pub reference: Grid,
    pub csr: Grid,
    pub csc: Grid,
    pub im2col: Grid,
}

/// Runs every method once on the same input and verifies agreement.
pub fn cross_check(
    layer: &str,
    input: &Grid,
    kernel: &Kernel,
    csr: &Transform,
    csc: &Transform,
) -> Result<CheckedOutputs> {
    let spec = csr.spec();
    let reference = direct_conv(input, kernel, spec)?;
    let out_csr = csr.convolve(input)?;
    let out_csc = csc.convolve(input)?;
    let out_im2col = im2col_conv(input, kernel, spec)?;
    check_close(
        layer,
        Method::CsrSpmv.as_str(),
        &out_csr,
        &reference,
        REFERENCE_TOL,
    )?;
    check_close(
        layer,
        Method::CscSpmv.as_str(),
        &out_csc,
        &reference,
        REFERENCE_TOL,
    )?;
    check_close(
        layer,
        Method::Im2col.as_str(),
        &out_im2col,
        &reference,
        REFERENCE_TOL,
    )?;
    check_close(layer, "CSR vs CSC", &out_csr, &out_csc, LAYOUT_TOL)?;
    Ok(CheckedOutputs {
        reference,
        csr: out_csr,
        csc: out_csc,
        im2col: out_im2col,
    })
}

/// Benchmarks one layer. `stream` selects the random stream for its input.
///
/// Nothing is timed unless all methods agree with the direct reference.
pub fn run_layer_bench(
    cfg: &LayerConfig,
    opts: &BenchOptions,
    stream: u64,
) -> Result<Vec<BenchResult>> {
    let trials = opts.trials.max(1);
    let spec = cfg.spec;
    let (input, kernel) = generate_case(&spec, opts.seed, stream);

    let (csr, csr_build) = time_us(|| Transform::build(&kernel, &spec, Layout::Csr));
    let (csc, csc_build) = time_us(|| Transform::build(&kernel, &spec, Layout::Csc));
    let (csr, csc) = (csr?, csc?);

    cross_check(&cfg.name, &input, &kernel, &csr, &csc)?;

    let threads = opts.spmv_threads.max(1);
    let mut results = Vec::with_capacity(Method::ALL.len());
    let mut samples = Vec::with_capacity(trials);
    for method in Method::ALL {
        let mut run = || -> Result<Grid> {
            match method {
                Method::CsrSpmv if threads == 1 => csr.convolve(black_box(&input)),
                Method::CscSpmv if threads == 1 => csc.convolve(black_box(&input)),
                Method::CsrSpmv => csr.convolve_threaded(black_box(&input), threads),
                Method::CscSpmv => csc.convolve_threaded(black_box(&input), threads),
                Method::Im2col => im2col_conv(black_box(&input), &kernel, &spec),
            }
        };
        for _ in 0..opts.warmup {
            black_box(run()?);
        }
        samples.clear();
        for _ in 0..trials {
            let (out, us) = time_us(&mut run);
            black_box(out?);
            samples.push(us);
        }
        let (mean_us, sem_us) = mean_sem(&samples);
        results.push(BenchResult {
            layer: cfg.name.clone(),
            method,
            trials,
            mean_us,
            sem_us,
            build_time_us: match method {
                Method::CsrSpmv => Some(csr_build),
                Method::CscSpmv => Some(csc_build),
                Method::Im2col => None,
            },
        });
    }
    Ok(results)
}

/// Benchmarks every layer in order, calling `progress` after each.
pub fn run_table_bench(
    layers: &[LayerConfig],
    opts: &BenchOptions,
    mut progress: impl FnMut(usize, &LayerConfig),
) -> Result<Vec<BenchResult>> {
    let mut all = Vec::with_capacity(layers.len() * Method::ALL.len());
    for (i, cfg) in layers.iter().enumerate() {
        all.extend(run_layer_bench(cfg, opts, i as u64)?);
        progress(i, cfg);
    }
    Ok(all)
}

/// Per-method sums over layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodTotal {
    pub method: Method,
    pub mean_us: f64,
    pub sem_us: f64,
    pub build_time_us: Option<f64>,
}

/// Rounds to the resolution the report prints (nanoseconds).
fn reported(us: f64) -> f64 {
    (us * 1e3).round() / 1e3
}

/// Sums the reported per-layer means of each method present in `results`.
/// SEMs combine in quadrature.
pub fn totals(results: &[BenchResult]) -> Vec<MethodTotal> {
    Method::ALL
        .iter()
        .filter_map(|&method| {
            let rows: Vec<&BenchResult> = results.iter().filter(|r| r.method == method).collect();
            if rows.is_empty() {
                return None;
            }
            let mean_us = rows.iter().map(|r| reported(r.mean_us)).sum();
            let sem_us = rows.iter().map(|r| r.sem_us.powi(2)).sum::<f64>().sqrt();
            let build_time_us = method.is_sparse().then(|| {
                rows.iter()
                    .filter_map(|r| r.build_time_us.map(reported))
                    .sum()
            });
            Some(MethodTotal {
                method,
                mean_us,
                sem_us,
                build_time_us,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!(
                "unknown format '{other}' (expected csv or markdown)"
            )),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 5] = ["layer", "method", "mean_us", "sem_us", "build_time_us"];
pub const TOTAL_LABEL: &str = "TOTAL";

fn fmt_us(v: f64) -> String {
    format!("{v:.3}")
}

/// Renders per-layer rows followed by one totals row per method.
pub fn emit_report(results: &[BenchResult], format: ReportFormat) -> String {
    let mut rows: Vec<[String; 5]> = results
        .iter()
        .map(|r| {
            [
                r.layer.clone(),
                r.method.to_string(),
                fmt_us(r.mean_us),
                fmt_us(r.sem_us),
                r.build_time_us.map(fmt_us).unwrap_or_default(),
            ]
        })
        .collect();
    for t in totals(results) {
        rows.push([
            TOTAL_LABEL.to_string(),
            t.method.to_string(),
            fmt_us(t.mean_us),
            fmt_us(t.sem_us),
            t.build_time_us.map(fmt_us).unwrap_or_default(),
        ]);
    }

    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for row in &rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let trials = results.first().map_or(0, |r| r.trials);
            out.push_str(&format!(
                "Times in microseconds, mean ± SEM over {trials} trials per layer. \
                 SpMV rows time the apply step on a prebuilt transform; build_time_us is the \
                 one-time construction cost. im2col uses an unblocked single-threaded \
                 vector-matrix product (no BLAS).\n\n"
            ));
            out.push_str(&format!("| {} |\n", REPORT_COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(REPORT_COLUMNS.len())));
            for row in &rows {
                out.push_str(&format!("| {} |\n", row.join(" | ")));
            }
        }
    }
    out
}
