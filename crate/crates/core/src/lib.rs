//! Padded, strided 2-D convolution as a precomputed sparse operator.
//!
//! A convolution with zero padding `p`, stride `s` and a `k x k` kernel is a
//! linear map from the flattened `m x n` input to the flattened output. This
//! crate builds that map once as a sparse matrix `T = C P` (padding selector
//! `P`, sliding-kernel matrix `C`) and applies it with sparse matrix-vector
//! products. Entries that would multiply padding zeros never appear in `T`;
//! [`analysis`] counts exactly how many multiplications remain.
//!
//! ```
//! use spconv::{ConvSpec, Grid, Kernel, Layout, Transform};
//!
//! let spec = ConvSpec::new(3, 3, 3, 1, 1).unwrap();
//! let kernel = Kernel::filled(3, 1.0).unwrap();
//! let t = Transform::build(&kernel, &spec, Layout::Csr).unwrap();
//! let out = t.convolve(&Grid::from_fn(3, 3, |_, _| 1.0)).unwrap();
//! assert_eq!(out.row(0), &[4.0, 6.0, 4.0]);
//! assert_eq!(t.nnz() as u64, spconv::analysis::nnz_bound(&spec));
//! ```

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod conv;
pub mod dense;
pub mod error;
pub mod layers;
pub mod reference;
pub mod sparse;
pub mod textio;
pub mod verify;

pub use conv::{build_conv_matrix, build_padding_matrix, Assembly, ConvSpec, Kernel, Transform};
pub use dense::{unvectorize, vectorize, Grid};
pub use error::{Error, Result};
pub use sparse::{hstack, spgemm, vstack, Layout, SparseMatrix, Triplets};
