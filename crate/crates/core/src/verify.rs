//! Exhaustive agreement sweep over small geometries.
//!
//! For every spec with `1 <= m, n <= max_dim`, `p` in `0..=3`, `s` in `1..=3`
//! and every kernel side that fits the padded input, and for each of several
//! seeds, the sweep checks:
//!
//! * sparse convolution (CSR and CSC), [`direct_conv`] and [`im2col_conv`]
//!   agree within [`REFERENCE_TOL`], and CSR/CSC agree within [`LAYOUT_TOL`];
//! * the closed-form count equals the brute-force count and `nnz(T)`;
//! * `P` is a column selector (`Pᵀ P = I`) that zero-pads exactly.

use crate::analysis::{nnz_bound, nnz_oracle};
use crate::bench::{generate_case, LAYOUT_TOL, REFERENCE_TOL};
use crate::conv::{build_padding_matrix, ConvSpec, Transform};
use crate::dense::unvectorize;
use crate::error::Result;
use crate::reference::{direct_conv, im2col_conv};
use crate::sparse::{spgemm, Layout, SparseMatrix};

pub const PADDINGS: [usize; 4] = [0, 1, 2, 3];
pub const STRIDES: [usize; 3] = [1, 2, 3];

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub max_dim: usize,
    pub seeds: u64,
    pub base_seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_dim: 12,
            seeds: 3,
            base_seed: 0,
        }
    }
}

/// Every valid spec of the sweep, in a fixed order.
pub fn sweep_specs(max_dim: usize) -> Vec<ConvSpec> {
    let mut specs = Vec::new();
    for m in 1..=max_dim {
        for n in 1..=max_dim {
            for p in PADDINGS {
                for s in STRIDES {
                    for k in 1..=m.min(n) + 2 * p {
                        if let Ok(spec) = ConvSpec::new(m, n, k, s, p) {
                            specs.push(spec);
                        }
                    }
                }
            }
        }
    }
    specs
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub specs: usize,
    pub cases: usize,
    /// Largest deviation of either sparse layout from the direct reference.
    pub max_dev_sparse: f64,
    pub max_dev_im2col: f64,
    pub max_dev_layouts: f64,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "specs={} cases={} max_dev_sparse={:e} max_dev_im2col={:e} max_dev_layouts={:e} failures={}",
            self.specs,
            self.cases,
            self.max_dev_sparse,
            self.max_dev_im2col,
            self.max_dev_layouts,
            self.failures.len()
        )
    }
}

/// `Pᵀ P = I` and `P vec(A)` equals dense zero-padding, both exactly.
pub fn check_padding_laws(spec: &ConvSpec, input: &crate::dense::Grid) -> Result<bool> {
    let p = build_padding_matrix(spec);
    let gram = spgemm(&p.transpose(), &p)?;
    if gram != SparseMatrix::identity(spec.input_len(), Layout::Csr) {
        return Ok(false);
    }
    let padded = unvectorize(
        &p.spmv(input.as_slice())?,
        spec.padded_rows(),
        spec.padded_cols(),
    )?;
    Ok(padded == input.zero_padded(spec.p()))
}

pub fn run_sweep(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for spec in sweep_specs(opts.max_dim) {
        report.specs += 1;
        let bound = nnz_bound(&spec);
        let oracle = nnz_oracle(&spec);
        if bound != oracle {
            report
                .failures
                .push(format!("{spec}: bound {bound} != oracle {oracle}"));
        }
        if spec.p() == 0 && bound != spec.dense_mults() as u64 {
            report
                .failures
                .push(format!("{spec}: unpadded bound {bound} != dense count"));
        }

        for i in 0..opts.seeds {
            let seed = opts.base_seed + i;
            report.cases += 1;
            let (input, kernel) = generate_case(&spec, seed, 0);

            if i == 0 && !check_padding_laws(&spec, &input)? {
                report
                    .failures
                    .push(format!("{spec}: padding matrix laws violated"));
            }

            let csr = Transform::build(&kernel, &spec, Layout::Csr)?;
            let csc = Transform::build(&kernel, &spec, Layout::Csc)?;
            if kernel.is_all_nonzero() && csr.nnz() as u64 != bound {
                report.failures.push(format!(
                    "{spec} seed {seed}: nnz(T) {} != bound {bound}",
                    csr.nnz()
                ));
            }

            let reference = direct_conv(&input, &kernel, &spec)?;
            let out_csr = csr.convolve(&input)?;
            let out_csc = csc.convolve(&input)?;
            let out_im2col = im2col_conv(&input, &kernel, &spec)?;

            let dev = |a: &crate::dense::Grid, b: &crate::dense::Grid| {
                a.max_abs_diff(b).unwrap_or(f64::INFINITY)
            };
            let d_sparse = dev(&out_csr, &reference).max(dev(&out_csc, &reference));
            let d_im2col = dev(&out_im2col, &reference);
            let d_layout = dev(&out_csr, &out_csc);
            report.max_dev_sparse = report.max_dev_sparse.max(d_sparse);
            report.max_dev_im2col = report.max_dev_im2col.max(d_im2col);
            report.max_dev_layouts = report.max_dev_layouts.max(d_layout);
            if !(d_sparse <= REFERENCE_TOL && d_im2col <= REFERENCE_TOL && d_layout <= LAYOUT_TOL) {
                report.failures.push(format!(
                    "{spec} seed {seed}: deviations sparse={d_sparse:e} im2col={d_im2col:e} layouts={d_layout:e}"
                ));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_bounds() {
        let specs = sweep_specs(3);
        assert!(specs.iter().all(|s| s.k() <= s.m().min(s.n()) + 2 * s.p()));
        assert!(specs.iter().any(|s| s.p() == 3 && s.k() == 1));
        assert!(specs.contains(&ConvSpec::new(3, 3, 9, 3, 3).unwrap()));
        // m = n = 1, p = 0: only k = 1, three strides.
        let tiny: Vec<_> = specs
            .iter()
            .filter(|s| s.m() == 1 && s.n() == 1 && s.p() == 0)
            .collect();
        assert_eq!(tiny.len(), 3);
    }

    #[test]
    fn small_sweep_passes() {
        let report = run_sweep(&VerifyOptions {
            max_dim: 4,
            seeds: 2,
            base_seed: 9,
        })
        .unwrap();
        assert!(report.is_ok(), "{:?}", report.failures);
        assert_eq!(report.cases, 2 * report.specs);
    }
}
