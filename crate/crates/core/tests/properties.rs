//! Property tests across modules: transform structure, padding laws and the
//! nonzero-multiplication count.

use proptest::prelude::*;
use spconv::analysis::{nnz_bound, nnz_oracle, nnz_per_output, NnzReport};
use spconv::bench::generate_case;
use spconv::conv::{build_conv_matrix_blocks, Assembly};
use spconv::reference::{direct_conv, im2col_conv};
use spconv::{
    build_conv_matrix, build_padding_matrix, spgemm, unvectorize, vectorize, ConvSpec, Grid,
    Kernel, Layout, SparseMatrix, Transform,
};

fn arb_spec() -> impl Strategy<Value = ConvSpec> {
    (1usize..=12, 1usize..=12, 0usize..=3, 1usize..=3)
        .prop_flat_map(|(m, n, p, s)| (Just((m, n, p, s)), 1..=m.min(n) + 2 * p))
        .prop_map(|((m, n, p, s), k)| ConvSpec::new(m, n, k, s, p).unwrap())
}

/// Nonzero products actually formed by the direct sum.
fn realized_nonzero_products(input: &Grid, kernel: &Kernel, spec: &ConvSpec) -> u64 {
    let padded = input.zero_padded(spec.p());
    let mut count = 0;
    for x in 0..spec.m_out() {
        for y in 0..spec.n_out() {
            for a in 0..spec.k() {
                for b in 0..spec.k() {
                    let v = padded.get(spec.s() * x + a, spec.s() * y + b);
                    if v != 0.0 && kernel.get(a, b) != 0.0 {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

fn placement_touches_padding(spec: &ConvSpec) -> bool {
    let (s, k, p) = (spec.s(), spec.k(), spec.p());
    let rows = (0..spec.m_out()).any(|x| s * x < p || s * x + k > spec.m() + p);
    let cols = (0..spec.n_out()).any(|y| s * y < p || s * y + k > spec.n() + p);
    rows || cols
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vectorize_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let spec = ConvSpec::new(rows, cols, 1, 1, 0).unwrap();
        let (a, _) = generate_case(&spec, seed, 0);
        prop_assert_eq!(unvectorize(&vectorize(&a), rows, cols).unwrap(), a);
    }

    #[test]
    fn sparse_matches_direct_and_im2col(spec in arb_spec(), seed in any::<u64>()) {
        let (input, kernel) = generate_case(&spec, seed, 0);
        let reference = direct_conv(&input, &kernel, &spec).unwrap();
        let csr = Transform::build(&kernel, &spec, Layout::Csr).unwrap().convolve(&input).unwrap();
        let csc = Transform::build(&kernel, &spec, Layout::Csc).unwrap().convolve(&input).unwrap();
        let lowered = im2col_conv(&input, &kernel, &spec).unwrap();
        prop_assert!(csr.max_abs_diff(&reference).unwrap() <= 1e-10);
        prop_assert!(lowered.max_abs_diff(&reference).unwrap() <= 1e-10);
        prop_assert!(csr.max_abs_diff(&csc).unwrap() <= 1e-12);
    }

    #[test]
    fn padding_selector_laws(spec in arb_spec(), seed in any::<u64>()) {
        let p = build_padding_matrix(&spec);
        prop_assert_eq!(p.nnz(), spec.input_len());
        prop_assert!(p.values().iter().all(|&v| v == 1.0));
        let csc = p.to_layout(Layout::Csc);
        prop_assert!((0..p.cols()).all(|j| csc.slice(j).count() == 1));
        prop_assert!((0..p.rows()).all(|i| p.row_nnz(i) <= 1));
        prop_assert_eq!(
            spgemm(&p.transpose(), &p).unwrap(),
            SparseMatrix::identity(spec.input_len(), Layout::Csr)
        );
        let (a, _) = generate_case(&spec, seed, 1);
        let padded = unvectorize(&p.spmv(a.as_slice()).unwrap(), spec.padded_rows(), spec.padded_cols()).unwrap();
        prop_assert_eq!(padded, a.zero_padded(spec.p()));
    }

    #[test]
    fn transform_structure(spec in arb_spec(), seed in any::<u64>()) {
        let (_, kernel) = generate_case(&spec, seed, 0);
        prop_assume!(kernel.is_all_nonzero());
        let c = build_conv_matrix(&kernel, &spec).unwrap();
        prop_assert_eq!(c.nnz(), spec.dense_mults());
        prop_assert_eq!(&build_conv_matrix_blocks(&kernel, &spec).unwrap(), &c);

        let t = Transform::build(&kernel, &spec, Layout::Csr).unwrap();
        prop_assert_eq!(t.matrix().shape(), (spec.output_len(), spec.input_len()));
        prop_assert_eq!(t.nnz() as u64, nnz_bound(&spec));
        let per_row = nnz_per_output(&spec);
        for (row, &expected) in per_row.iter().enumerate() {
            prop_assert_eq!(t.matrix().row_nnz(row) as u64, expected);
        }
        let gathered = Transform::build_with(&kernel, &spec, Layout::Csr, Assembly::ColumnGather).unwrap();
        prop_assert_eq!(gathered, t);
    }

    #[test]
    fn bound_equals_oracle(spec in arb_spec()) {
        let bound = nnz_bound(&spec);
        prop_assert_eq!(bound, nnz_oracle(&spec));
        let dense = spec.dense_mults() as u64;
        prop_assert!(bound <= dense);
        prop_assert_eq!(bound == dense, spec.p() == 0 || !placement_touches_padding(&spec));
    }

    #[test]
    fn bound_is_an_upper_limit_with_extra_zeros(
        spec in arb_spec(), seed in any::<u64>(), zero_every in 2usize..5,
    ) {
        let (input, kernel) = generate_case(&spec, seed, 0);
        let input = Grid::from_fn(spec.m(), spec.n(), |i, j| {
            if (i * spec.n() + j) % zero_every == 0 { 0.0 } else { input.get(i, j) }
        });
        let kernel = Kernel::new(
            spec.k(),
            kernel.values().iter().enumerate().map(|(i, &v)| if i % zero_every == 1 { 0.0 } else { v }).collect(),
        ).unwrap();
        prop_assert!(realized_nonzero_products(&input, &kernel, &spec) <= nnz_bound(&spec));
        // Zero kernel coefficients are stored in C but dropped from T.
        let t = Transform::build(&kernel, &spec, Layout::Csc).unwrap();
        prop_assert!(t.nnz() as u64 <= nnz_bound(&spec));
    }
}

#[test]
fn savings_ratio_non_decreasing_in_padding() {
    for m in 1..=12 {
        for n in 1..=12 {
            for s in 1..=3 {
                for k in 1..=m.min(n) {
                    let ratios: Vec<f64> = (0..=k)
                        .map(|p| {
                            NnzReport::new(ConvSpec::new(m, n, k, s, p).unwrap()).savings_ratio
                        })
                        .collect();
                    assert!(
                        ratios.windows(2).all(|w| w[1] >= w[0]),
                        "m={m} n={n} k={k} s={s}: {ratios:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn flipped_kernel_gives_true_convolution() {
    // Flipped convolution: out[x][y] = sum K[k-1-a][k-1-b] * Apad[x+a][y+b].
    let spec = ConvSpec::new(5, 4, 3, 1, 1).unwrap();
    let (input, kernel) = generate_case(&spec, 5, 0);
    let padded = input.zero_padded(1);
    let expect = Grid::from_fn(spec.m_out(), spec.n_out(), |x, y| {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += kernel.get(2 - a, 2 - b) * padded.get(x + a, y + b);
            }
        }
        acc
    });
    let t = Transform::build(&kernel.flipped(), &spec, Layout::Csr).unwrap();
    assert!(t.convolve(&input).unwrap().max_abs_diff(&expect).unwrap() <= 1e-12);
}

#[test]
fn transform_is_shareable_across_threads() {
    let spec = ConvSpec::new(20, 20, 3, 1, 1).unwrap();
    let (_, kernel) = generate_case(&spec, 1, 0);
    let t = Transform::build(&kernel, &spec, Layout::Csr).unwrap();
    let outputs: Vec<(Grid, Grid)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4u64)
            .map(|i| {
                let (t, kernel) = (&t, &kernel);
                scope.spawn(move || {
                    let (input, _) = generate_case(&spec, 100 + i, 0);
                    (
                        t.convolve(&input).unwrap(),
                        direct_conv(&input, kernel, &spec).unwrap(),
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (got, expect) in outputs {
        assert!(got.max_abs_diff(&expect).unwrap() <= 1e-10);
    }
}
