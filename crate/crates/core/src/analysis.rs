//! Counting multiplications that involve no padding zero.
//!
//! At vertical slide `x` the kernel covers padded rows `[s x, s x + k)`. Of
//! those, `c1(x) = max(0, p - s x) + max(0, s x + k - m - p)` are padding
//! (above and below the input respectively); `c2(y)` is the same count for
//! columns. The placement therefore multiplies
//! `max(0, k - c1(x)) * max(0, k - c2(y))` input entries, and the sum over all
//! placements bounds the nonzero multiplications of the whole convolution.
//! The clipping at zero handles placements lying entirely in padding, which
//! can happen once `p >= k`.

use crate::conv::ConvSpec;
use crate::error::{Error, Result};

/// Padding rows under the kernel at vertical slide `x`.
pub fn c1(x: usize, spec: &ConvSpec) -> Result<u64> {
    if x >= spec.m_out() {
        return Err(Error::SlideOutOfRange {
            index: x,
            limit: spec.m_out(),
        });
    }
    Ok(padding_overlap(x, spec.s(), spec.k(), spec.p(), spec.m()))
}

/// Padding columns under the kernel at horizontal slide `y`.
pub fn c2(y: usize, spec: &ConvSpec) -> Result<u64> {
    if y >= spec.n_out() {
        return Err(Error::SlideOutOfRange {
            index: y,
            limit: spec.n_out(),
        });
    }
    Ok(padding_overlap(y, spec.s(), spec.k(), spec.p(), spec.n()))
}

fn padding_overlap(slide: usize, s: usize, k: usize, p: usize, len: usize) -> u64 {
    let start = (s * slide) as i64;
    let (k, p, len) = (k as i64, p as i64, len as i64);
    ((p - start).max(0) + (start + k - len - p).max(0)) as u64
}

/// Non-padding extent of the kernel along one axis at each slide:
/// `max(0, k - c(slide))`.
fn live_extents(outputs: usize, s: usize, k: usize, p: usize, len: usize) -> Vec<u64> {
    (0..outputs)
        .map(|i| (k as i64 - padding_overlap(i, s, k, p, len) as i64).max(0) as u64)
        .collect()
}

/// Per-output-cell counts in raster order (`x * n_out + y`). Row `t` of the
/// composed transform stores exactly this many entries for a kernel with no
/// zero coefficients.
pub fn nnz_per_output(spec: &ConvSpec) -> Vec<u64> {
    let rows = live_extents(spec.m_out(), spec.s(), spec.k(), spec.p(), spec.m());
    let cols = live_extents(spec.n_out(), spec.s(), spec.k(), spec.p(), spec.n());
    rows.iter()
        .flat_map(|&r| cols.iter().map(move |&c| r * c))
        .collect()
}

/// Closed-form count of multiplications against non-padding entries.
///
/// The double sum factorises into the product of the per-axis sums.
pub fn nnz_bound(spec: &ConvSpec) -> u64 {
    let rows: u64 = live_extents(spec.m_out(), spec.s(), spec.k(), spec.p(), spec.m())
        .iter()
        .sum();
    let cols: u64 = live_extents(spec.n_out(), spec.s(), spec.k(), spec.p(), spec.n())
        .iter()
        .sum();
    rows * cols
}

/// Brute-force count: slide a `k x k` window over a 0/1 mask of the padded
/// grid (1 on the input region) and add up the mask under every placement.
pub fn nnz_oracle(spec: &ConvSpec) -> u64 {
    let (rows, cols) = (spec.padded_rows(), spec.padded_cols());
    let (m, n, k, s, p) = (spec.m(), spec.n(), spec.k(), spec.s(), spec.p());
    let mask: Vec<u8> = (0..rows * cols)
        .map(|flat| {
            let (i, j) = (flat / cols, flat % cols);
            u8::from(i >= p && i < m + p && j >= p && j < n + p)
        })
        .collect();
    let mut total = 0u64;
    for x in 0..spec.m_out() {
        for y in 0..spec.n_out() {
            for a in 0..k {
                for b in 0..k {
                    total += u64::from(mask[(s * x + a) * cols + s * y + b]);
                }
            }
        }
    }
    total
}

/// Bound versus the dense multiplication count for one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct NnzReport {
    pub spec: ConvSpec,
    pub bound: u64,
    pub dense_count: u64,
    pub savings_ratio: f64,
}

impl NnzReport {
    pub fn new(spec: ConvSpec) -> NnzReport {
        let bound = nnz_bound(&spec);
        let dense_count = spec.dense_mults() as u64;
        NnzReport {
            spec,
            bound,
            dense_count,
            savings_ratio: 1.0 - bound as f64 / dense_count as f64,
        }
    }

    pub const CSV_HEADER: &'static str = "name,m,n,k,s,p,bound,dense_count,savings_ratio";

    pub fn csv_row(&self, name: &str) -> String {
        let s = &self.spec;
        format!(
            "{name},{},{},{},{},{},{},{},{:.6}",
            s.m(),
            s.n(),
            s.k(),
            s.s(),
            s.p(),
            self.bound,
            self.dense_count,
            self.savings_ratio
        )
    }
}
