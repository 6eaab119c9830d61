//! Compressed sparse matrices (CSR and CSC) over `f64`.
//!
//! Matrices are assembled as [`Triplets`] and compiled once into a
//! [`SparseMatrix`]. A compiled matrix stores a pointer array over the major
//! dimension (rows for CSR, columns for CSC) and, for every stored entry, its
//! minor index and value. Compiled matrices are immutable.
//!
//! ```text
//!  CSR of  [ 1 . 2 ]     indptr  = [0, 2, 3]
//!          [ . 3 . ]     indices = [0, 2, 1]
//!                        values  = [1, 2, 3]
//! ```

use std::fmt;
use std::str::FromStr;

use crate::dense::Grid;
use crate::error::{Error, Result};

/// Storage order of a compiled matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Compressed sparse row.
    Csr,
    /// Compressed sparse column.
    Csc,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Csr => "csr",
            Layout::Csc => "csc",
        }
    }

    fn flipped(self) -> Layout {
        match self {
            Layout::Csr => Layout::Csc,
            Layout::Csc => Layout::Csr,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csr" => Ok(Layout::Csr),
            "csc" => Ok(Layout::Csc),
            other => Err(format!("unknown layout '{other}' (expected csr or csc)")),
        }
    }
}

/// Coordinate-list builder. Duplicates are detected when compiling.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplets {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Self::with_capacity(rows, cols, 0)
    }

    pub fn with_capacity(rows: usize, cols: usize, capacity: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyShape { rows, cols });
        }
        Ok(Triplets {
            rows,
            cols,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Dense rendering, used as an independent reference in tests.
    pub fn to_dense(&self) -> Grid {
        let mut grid = Grid::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            grid.set(i, j, v);
        }
        grid
    }

    pub fn compile(&self, layout: Layout) -> Result<SparseMatrix> {
        SparseMatrix::compile(self, layout)
    }
}

/// Compiled sparse matrix in CSR or CSC form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    layout: Layout,
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Compiles triplets into the requested layout, sorting minor indices
    /// within each major slice. A repeated coordinate is an error.
    pub fn compile(t: &Triplets, layout: Layout) -> Result<SparseMatrix> {
        let (major_len, minor_len) = match layout {
            Layout::Csr => (t.rows, t.cols),
            Layout::Csc => (t.cols, t.rows),
        };
        let split = |&(r, c, _): &(usize, usize, f64)| match layout {
            Layout::Csr => (r, c),
            Layout::Csc => (c, r),
        };

        let mut indptr = vec![0usize; major_len + 1];
        for e in &t.entries {
            indptr[split(e).0 + 1] += 1;
        }
        for i in 0..major_len {
            indptr[i + 1] += indptr[i];
        }

        let nnz = t.entries.len();
        let mut next = indptr.clone();
        let mut slots: Vec<(usize, f64)> = vec![(0, 0.0); nnz];
        for e in &t.entries {
            let (major, minor) = split(e);
            slots[next[major]] = (minor, e.2);
            next[major] += 1;
        }

        for major in 0..major_len {
            let slice = &mut slots[indptr[major]..indptr[major + 1]];
            slice.sort_unstable_by_key(|&(minor, _)| minor);
            if let Some(w) = slice.windows(2).find(|w| w[0].0 == w[1].0) {
                let minor = w[0].0;
                let (row, col) = match layout {
                    Layout::Csr => (major, minor),
                    Layout::Csc => (minor, major),
                };
                return Err(Error::DuplicateEntry { row, col });
            }
        }
        debug_assert!(slots.iter().all(|&(m, _)| m < minor_len));

        let (indices, values) = slots.into_iter().unzip();
        Ok(SparseMatrix {
            layout,
            rows: t.rows,
            cols: t.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Matrix with no stored entries. Zero-sized dimensions are allowed so
    /// that empty blocks can take part in block assembly.
    pub fn zeros(rows: usize, cols: usize, layout: Layout) -> SparseMatrix {
        let major = match layout {
            Layout::Csr => rows,
            Layout::Csc => cols,
        };
        SparseMatrix {
            layout,
            rows,
            cols,
            indptr: vec![0; major + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(size: usize, layout: Layout) -> SparseMatrix {
        SparseMatrix {
            layout,
            rows: size,
            cols: size,
            indptr: (0..=size).collect(),
            indices: (0..size).collect(),
            values: vec![1.0; size],
        }
    }

    /// Validates and adopts raw compressed arrays.
    pub fn from_raw_parts(
        layout: Layout,
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<SparseMatrix> {
        let (major_len, minor_len) = match layout {
            Layout::Csr => (rows, cols),
            Layout::Csc => (cols, rows),
        };
        if indptr.len() != major_len + 1 || indptr[0] != 0 {
            return Err(Error::mismatch(
                "pointer array",
                format!("length {}", major_len + 1),
                format!("length {}", indptr.len()),
            ));
        }
        if indices.len() != values.len() || indptr[major_len] != indices.len() {
            return Err(Error::mismatch(
                "index/value arrays",
                format!("nnz {}", indptr[major_len]),
                format!("{} indices, {} values", indices.len(), values.len()),
            ));
        }
        for major in 0..major_len {
            let (lo, hi) = (indptr[major], indptr[major + 1]);
            if hi < lo {
                return Err(Error::mismatch(
                    "pointer array",
                    "non-decreasing",
                    format!("decrease at {major}"),
                ));
            }
            let slice = &indices[lo..hi];
            if slice.iter().any(|&i| i >= minor_len) {
                return Err(Error::mismatch(
                    "minor index",
                    format!("< {minor_len}"),
                    format!("out of range in slice {major}"),
                ));
            }
            if slice.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::mismatch(
                    "minor indices",
                    "strictly increasing",
                    format!("unsorted slice {major}"),
                ));
            }
        }
        Ok(SparseMatrix {
            layout,
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn major_len(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Stored entries of one major slice as `(minor, value)` pairs.
    pub fn slice(&self, major: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[major]..self.indptr[major + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries as `(row, col, value)`, in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let layout = self.layout;
        (0..self.major_len()).flat_map(move |major| {
            self.slice(major).map(move |(minor, v)| match layout {
                Layout::Csr => (major, minor, v),
                Layout::Csc => (minor, major, v),
            })
        })
    }

    /// Number of stored entries in row `i`. Constant time for CSR.
    pub fn row_nnz(&self, i: usize) -> usize {
        match self.layout {
            Layout::Csr => self.indptr[i + 1] - self.indptr[i],
            Layout::Csc => self.indices.iter().filter(|&&r| r == i).count(),
        }
    }

    pub fn to_triplets(&self) -> Triplets {
        Triplets {
            rows: self.rows,
            cols: self.cols,
            entries: self.iter().collect(),
        }
    }

    pub fn to_dense(&self) -> Grid {
        let mut grid = Grid::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            grid.set(i, j, v);
        }
        grid
    }

    /// Transpose without copying index data: the CSR arrays of `A` are the
    /// CSC arrays of `Aᵀ` and vice versa.
    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix {
            layout: self.layout.flipped(),
            rows: self.cols,
            cols: self.rows,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.clone(),
        }
    }

    /// Re-compresses into `layout`; a clone when the layout already matches.
    pub fn to_layout(&self, layout: Layout) -> SparseMatrix {
        if layout == self.layout {
            return self.clone();
        }
        let new_major_len = match layout {
            Layout::Csr => self.rows,
            Layout::Csc => self.cols,
        };
        let mut indptr = vec![0usize; new_major_len + 1];
        for &minor in &self.indices {
            indptr[minor + 1] += 1;
        }
        for i in 0..new_major_len {
            indptr[i + 1] += indptr[i];
        }
        let mut next = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Walking old major slices in order keeps new minor indices sorted.
        for old_major in 0..self.major_len() {
            for (old_minor, v) in self.slice(old_major) {
                let dst = next[old_minor];
                indices[dst] = old_major;
                values[dst] = v;
                next[old_minor] += 1;
            }
        }
        SparseMatrix {
            layout,
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Copy without explicitly stored zeros.
    pub fn prune(&self) -> SparseMatrix {
        let mut indptr = Vec::with_capacity(self.indptr.len());
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        indptr.push(0);
        for major in 0..self.major_len() {
            for (minor, v) in self.slice(major) {
                if v != 0.0 {
                    indices.push(minor);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            layout: self.layout,
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// `y = M x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = M x`, writing into a caller-provided buffer of length `rows`.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_spmv_dims(x, y)?;
        match self.layout {
            Layout::Csr => csr_rows_into(self, x, 0, y),
            Layout::Csc => {
                y.fill(0.0);
                csc_cols_accumulate(self, x, 0..self.cols, y);
            }
        }
        Ok(())
    }

    /// `y = M x` split across `threads` scoped threads.
    ///
    /// CSR rows are partitioned, so the result is bitwise identical to
    /// [`spmv`](Self::spmv). CSC columns are partitioned into per-thread
    /// partial sums that are reduced in thread order, so the result is
    /// deterministic for a fixed thread count.
    pub fn spmv_threaded(&self, x: &[f64], threads: usize) -> Result<Vec<f64>> {
        let threads = threads.max(1);
        let mut y = vec![0.0; self.rows];
        self.check_spmv_dims(x, &y)?;
        if threads == 1 || self.nnz() == 0 {
            self.spmv_into(x, &mut y)?;
            return Ok(y);
        }
        match self.layout {
            Layout::Csr => {
                let chunk = self.rows.div_ceil(threads).max(1);
                std::thread::scope(|scope| {
                    for (t, out) in y.chunks_mut(chunk).enumerate() {
                        scope.spawn(move || csr_rows_into(self, x, t * chunk, out));
                    }
                });
            }
            Layout::Csc => {
                let chunk = self.cols.div_ceil(threads).max(1);
                let partials: Vec<Vec<f64>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = (0..self.cols)
                        .step_by(chunk)
                        .map(|start| {
                            let end = (start + chunk).min(self.cols);
                            scope.spawn(move || {
                                let mut part = vec![0.0; self.rows];
                                csc_cols_accumulate(self, x, start..end, &mut part);
                                part
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("spmv worker panicked"))
                        .collect()
                });
                for part in partials {
                    for (acc, v) in y.iter_mut().zip(part) {
                        *acc += v;
                    }
                }
            }
        }
        Ok(y)
    }

    fn check_spmv_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::mismatch(
                "spmv",
                format!("matrix {}x{}", self.rows, self.cols),
                format!("vector of length {}", x.len()),
            ));
        }
        if y.len() != self.rows {
            return Err(Error::mismatch(
                "spmv output",
                format!("matrix {}x{}", self.rows, self.cols),
                format!("buffer of length {}", y.len()),
            ));
        }
        Ok(())
    }
}

fn csr_rows_into(m: &SparseMatrix, x: &[f64], first_row: usize, out: &mut [f64]) {
    assert!(x.len() == m.cols && first_row + out.len() <= m.rows);
    let ptr = &m.indptr[first_row..=first_row + out.len()];
    for (yi, bounds) in out.iter_mut().zip(ptr.windows(2)) {
        let (lo, hi) = (bounds[0], bounds[1]);
        let mut acc = 0.0;
        for (&j, &v) in m.indices[lo..hi].iter().zip(&m.values[lo..hi]) {
            // SAFETY: every constructor guarantees minor indices < cols == x.len().
            acc += v * unsafe { x.get_unchecked(j) };
        }
        *yi = acc;
    }
}

fn csc_cols_accumulate(m: &SparseMatrix, x: &[f64], cols: std::ops::Range<usize>, y: &mut [f64]) {
    assert!(y.len() == m.rows && cols.end <= m.cols);
    let ptr = &m.indptr[cols.start..=cols.end];
    for (&xj, bounds) in x[cols].iter().zip(ptr.windows(2)) {
        let (lo, hi) = (bounds[0], bounds[1]);
        for (&i, &v) in m.indices[lo..hi].iter().zip(&m.values[lo..hi]) {
            // SAFETY: every constructor guarantees minor indices < rows == y.len().
            unsafe { *y.get_unchecked_mut(i) += v * xj };
        }
    }
}

/// Sparse product `A B` by row-wise accumulation over CSR operands.
///
/// Operands in CSC are converted first. The result is CSR with sorted
/// column indices; entries that accumulate to exactly `0.0` are dropped.
pub fn spgemm(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.cols != b.rows {
        return Err(Error::mismatch(
            "spgemm",
            format!("left {}x{}", a.rows, a.cols),
            format!("right {}x{}", b.rows, b.cols),
        ));
    }
    let a = a.to_layout(Layout::Csr);
    let b = b.to_layout(Layout::Csr);

    let mut indptr = Vec::with_capacity(a.rows + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);

    let mut acc = vec![0.0; b.cols];
    // Which row last touched each column; usize::MAX means never.
    let mut seen = vec![usize::MAX; b.cols];
    let mut touched: Vec<usize> = Vec::new();

    for i in 0..a.rows {
        touched.clear();
        for (k, a_ik) in a.slice(i) {
            for (j, b_kj) in b.slice(k) {
                if seen[j] != i {
                    seen[j] = i;
                    acc[j] = 0.0;
                    touched.push(j);
                }
                acc[j] += a_ik * b_kj;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            if acc[j] != 0.0 {
                indices.push(j);
                values.push(acc[j]);
            }
        }
        indptr.push(indices.len());
    }

    Ok(SparseMatrix {
        layout: Layout::Csr,
        rows: a.rows,
        cols: b.cols,
        indptr,
        indices,
        values,
    })
}

/// Concatenates blocks left to right. All blocks must share a row count.
/// The result is CSC.
pub fn hstack(blocks: &[SparseMatrix]) -> Result<SparseMatrix> {
    let first = blocks.first().ok_or(Error::NoBlocks)?;
    let rows = first.rows;
    for (index, b) in blocks.iter().enumerate() {
        if b.rows != rows {
            return Err(Error::RaggedBlock {
                index,
                rows: b.rows,
                cols: b.cols,
                expected: rows,
            });
        }
    }
    Ok(concat_major(blocks, Layout::Csc, rows))
}

/// Concatenates blocks top to bottom. All blocks must share a column
/// count. The result is CSR.
pub fn vstack(blocks: &[SparseMatrix]) -> Result<SparseMatrix> {
    let first = blocks.first().ok_or(Error::NoBlocks)?;
    let cols = first.cols;
    for (index, b) in blocks.iter().enumerate() {
        if b.cols != cols {
            return Err(Error::RaggedBlock {
                index,
                rows: b.rows,
                cols: b.cols,
                expected: cols,
            });
        }
    }
    Ok(concat_major(blocks, Layout::Csr, cols))
}

/// Appends the major slices of every block; `minor_len` is the shared axis.
fn concat_major(blocks: &[SparseMatrix], layout: Layout, minor_len: usize) -> SparseMatrix {
    let nnz: usize = blocks.iter().map(SparseMatrix::nnz).sum();
    let mut indptr = vec![0usize];
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    let mut major_total = 0;
    for block in blocks {
        let block = block.to_layout(layout);
        let base = indices.len();
        indptr.extend(block.indptr[1..].iter().map(|p| p + base));
        indices.extend_from_slice(&block.indices);
        values.extend_from_slice(&block.values);
        major_total += block.major_len();
    }
    let (rows, cols) = match layout {
        Layout::Csr => (major_total, minor_len),
        Layout::Csc => (minor_len, major_total),
    };
    SparseMatrix {
        layout,
        rows,
        cols,
        indptr,
        indices,
        values,
    }
}

/// Degree of SpMV parallelism from `SPCONV_THREADS`; 1 when unset or invalid.
pub fn threads_from_env() -> usize {
    std::env::var("SPCONV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
