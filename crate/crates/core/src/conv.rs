//! Convolution with zero padding and stride as a sparse linear operator.
//!
//! For an `m x n` input padded by `p` on every side and a `k x k` kernel
//! sliding with stride `s`, three sparse matrices are involved:
//!
//! * `P`, `(m+2p)(n+2p) x mn`: embeds the flattened input into the flattened
//!   padded grid. Input element `(i, j)` lands at padded position
//!   `(i+p, j+p)`.
//! * `C`, `(m_out n_out) x (m+2p)(n+2p)`: row `x * n_out + y` holds kernel
//!   entry `K[a][b]` at padded position `(s x + a, s y + b)`.
//! * `T = C P`, `(m_out n_out) x mn`: the composed operator. Padding positions
//!   have no column in `T`, so multiplications against padding zeros vanish.
//!
//! Flat indices are row-major (see [`crate::dense`]). Kernels are applied
//! without flipping (sliding-window correlation); use [`Kernel::flipped`] for
//! the flipped convention.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::Grid;
use crate::error::{Error, Result};
use crate::sparse::{hstack, spgemm, vstack, Layout, SparseMatrix, Triplets};
use crate::textio;

/// Geometry of a square-kernel convolution with symmetric stride and padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    m: usize,
    n: usize,
    k: usize,
    s: usize,
    p: usize,
}

impl ConvSpec {
    /// `m x n` input, `k x k` kernel, stride `s`, padding `p`.
    pub fn new(m: usize, n: usize, k: usize, s: usize, p: usize) -> Result<Self> {
        let invalid = |reason| Error::InvalidSpec {
            m,
            n,
            k,
            s,
            p,
            reason,
        };
        if m == 0 || n == 0 {
            return Err(invalid("input dimensions must be at least 1"));
        }
        if k == 0 {
            return Err(invalid("kernel side must be at least 1"));
        }
        if s == 0 {
            return Err(invalid("stride must be at least 1"));
        }
        if k > m + 2 * p || k > n + 2 * p {
            return Err(invalid("kernel does not fit in the padded input"));
        }
        Ok(ConvSpec { m, n, k, s, p })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn padded_rows(&self) -> usize {
        self.m + 2 * self.p
    }

    pub fn padded_cols(&self) -> usize {
        self.n + 2 * self.p
    }

    pub fn m_out(&self) -> usize {
        (self.padded_rows() - self.k) / self.s + 1
    }

    pub fn n_out(&self) -> usize {
        (self.padded_cols() - self.k) / self.s + 1
    }

    /// Padded columns right of the last horizontal placement (`r`).
    pub fn col_remainder(&self) -> usize {
        self.padded_cols() - self.k - self.s * (self.n_out() - 1)
    }

    /// Padded rows below the last vertical placement (`q`).
    pub fn row_remainder(&self) -> usize {
        self.padded_rows() - self.k - self.s * (self.m_out() - 1)
    }

    /// Number of vertical slides after the first placement (`v`).
    pub fn vertical_slides(&self) -> usize {
        self.m_out() - 1
    }

    pub fn input_len(&self) -> usize {
        self.m * self.n
    }

    pub fn output_len(&self) -> usize {
        self.m_out() * self.n_out()
    }

    /// Multiplications performed by a dense lowering: `m_out n_out k^2`.
    pub fn dense_mults(&self) -> usize {
        self.output_len() * self.k * self.k
    }

    /// Flat index into the padded grid.
    #[inline]
    pub fn padded_index(&self, row: usize, col: usize) -> usize {
        row * self.padded_cols() + col
    }
}

impl fmt::Display for ConvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(m={}, n={}, k={}, s={}, p={})",
            self.m, self.n, self.k, self.s, self.p
        )
    }
}

/// Square `k x k` kernel, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    k: usize,
    values: Vec<f64>,
}

impl Kernel {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::mismatch("kernel", "side >= 1", "side 0"));
        }
        if values.len() != k * k {
            return Err(Error::mismatch(
                "kernel",
                format!("{k}x{k}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(Kernel { k, values })
    }

    pub fn from_grid(g: &Grid) -> Result<Self> {
        if g.rows() != g.cols() {
            return Err(Error::mismatch(
                "kernel",
                "square grid",
                format!("{}x{}", g.rows(), g.cols()),
            ));
        }
        Kernel::new(g.rows(), g.as_slice().to_vec())
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Kernel::from_grid(&Grid::from_rows(rows)?)
    }

    pub fn filled(k: usize, value: f64) -> Result<Self> {
        Kernel::new(k, vec![value; k * k])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.k + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_grid(&self) -> Grid {
        Grid::new(self.k, self.k, self.values.clone()).expect("kernel is square")
    }

    /// Kernel rotated by 180 degrees. Building with a flipped kernel gives
    /// true (flipped) convolution instead of correlation.
    pub fn flipped(&self) -> Kernel {
        let mut values = self.values.clone();
        values.reverse();
        Kernel { k: self.k, values }
    }

    pub fn is_all_nonzero(&self) -> bool {
        self.values.iter().all(|&v| v != 0.0)
    }

    pub(crate) fn check(&self, spec: &ConvSpec) -> Result<()> {
        if self.k != spec.k {
            return Err(Error::KernelMismatch {
                kernel: self.k,
                spec: spec.k,
            });
        }
        Ok(())
    }
}

/// Selector `P` embedding the flattened input into the flattened padded grid.
/// Exactly `mn` entries, all `1.0`. Returned as CSR.
pub fn build_padding_matrix(spec: &ConvSpec) -> SparseMatrix {
    let (m, n, p) = (spec.m, spec.n, spec.p);
    let mut t = Triplets::with_capacity(spec.padded_rows() * spec.padded_cols(), m * n, m * n)
        .expect("padded grid is non-empty");
    for i in 0..m {
        let row_start = spec.padded_index(i + p, p);
        let col_start = n * i;
        for j in 0..n {
            t.push(row_start + j, col_start + j, 1.0)
                .expect("selector index in range");
        }
    }
    t.compile(Layout::Csr).expect("selector has no duplicates")
}

/// Convolution matrix `C` over the padded grid, emitted directly from the
/// placement arithmetic. Every kernel entry is stored, zeros included, so
/// `nnz(C) = k^2 m_out n_out`. Returned as CSR.
pub fn build_conv_matrix(kernel: &Kernel, spec: &ConvSpec) -> Result<SparseMatrix> {
    kernel.check(spec)?;
    let (k, s) = (spec.k, spec.s);
    let (m_out, n_out) = (spec.m_out(), spec.n_out());
    let mut t = Triplets::with_capacity(
        spec.output_len(),
        spec.padded_rows() * spec.padded_cols(),
        spec.dense_mults(),
    )?;
    for x in 0..m_out {
        for y in 0..n_out {
            let out = x * n_out + y;
            for a in 0..k {
                for b in 0..k {
                    t.push(
                        out,
                        spec.padded_index(s * x + a, s * y + b),
                        kernel.get(a, b),
                    )?;
                }
            }
        }
    }
    t.compile(Layout::Csr)
}

/// Convolution matrix `C` assembled from blocks: a horizontal-slide pattern
/// `R` (`n_out x (n+2p)k`) placed on a block diagonal with `(n+2p)s`-wide
/// zero blocks between vertical slides and a `(n+2p)q`-wide zero block for
/// the vertical remainder `q`.
///
/// Produces the same matrix as [`build_conv_matrix`]; kept as a second,
/// structurally independent route.
pub fn build_conv_matrix_blocks(kernel: &Kernel, spec: &ConvSpec) -> Result<SparseMatrix> {
    kernel.check(spec)?;
    let (k, s) = (spec.k, spec.s);
    let width = spec.padded_cols();
    let slides = spec.n_out();

    let mut r = Triplets::with_capacity(slides, width * k, slides * k * k)?;
    for y in 0..slides {
        for a in 0..k {
            for b in 0..k {
                r.push(y, a * width + s * y + b, kernel.get(a, b))?;
            }
        }
    }
    let r = r.compile(Layout::Csr)?;
    let zero_vert = SparseMatrix::zeros(slides, width * s, Layout::Csr);
    let zero_rem = SparseMatrix::zeros(slides, width * spec.row_remainder(), Layout::Csr);

    let m_out = spec.m_out();
    let mut block_rows = Vec::with_capacity(m_out);
    for x in 0..m_out {
        let mut row = Vec::with_capacity(m_out + 1);
        row.extend(std::iter::repeat_n(zero_vert.clone(), x));
        row.push(r.clone());
        row.extend(std::iter::repeat_n(zero_vert.clone(), m_out - 1 - x));
        row.push(zero_rem.clone());
        block_rows.push(hstack(&row)?);
    }
    Ok(vstack(&block_rows)?.to_layout(Layout::Csr))
}

/// How `T = C P` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Assembly {
    /// General sparse product of `C` and `P`.
    #[default]
    Product,
    /// `P` selects columns, so `T` is `C` with padding columns removed and
    /// the rest renumbered. Equivalent to `Product`, cheaper to build.
    ColumnGather,
}

/// `T` restricted from `C` by dropping padding columns. Exact zeros are
/// dropped, matching what the sparse product produces.
fn gather_columns(c: &SparseMatrix, spec: &ConvSpec) -> Result<SparseMatrix> {
    let c = c.to_layout(Layout::Csr);
    let (m, n, p) = (spec.m, spec.n, spec.p);
    let width = spec.padded_cols();
    // Padded flat position -> input flat position, or None for padding.
    let map: Vec<Option<usize>> = (0..spec.padded_rows() * width)
        .map(|flat| {
            let (row, col) = (flat / width, flat % width);
            (row >= p && row < m + p && col >= p && col < n + p).then(|| (row - p) * n + (col - p))
        })
        .collect();

    let mut indptr = Vec::with_capacity(c.rows() + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for row in 0..c.rows() {
        // Padded positions in a row are increasing and the map is monotone on
        // the interior, so the gathered indices stay sorted.
        for (col, v) in c.slice(row) {
            if let Some(dst) = map[col] {
                if v != 0.0 {
                    indices.push(dst);
                    values.push(v);
                }
            }
        }
        indptr.push(indices.len());
    }
    SparseMatrix::from_raw_parts(
        Layout::Csr,
        c.rows(),
        spec.input_len(),
        indptr,
        indices,
        values,
    )
}

/// Precomputed convolution operator `T = C P` for one kernel and geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    spec: ConvSpec,
    matrix: SparseMatrix,
}

impl Transform {
    /// Builds `T` by sparse product and compiles it to `layout`.
    pub fn build(kernel: &Kernel, spec: &ConvSpec, layout: Layout) -> Result<Transform> {
        Transform::build_with(kernel, spec, layout, Assembly::Product)
    }

    pub fn build_with(
        kernel: &Kernel,
        spec: &ConvSpec,
        layout: Layout,
        assembly: Assembly,
    ) -> Result<Transform> {
        let c = build_conv_matrix(kernel, spec)?;
        let t = match assembly {
            Assembly::Product => spgemm(&c, &build_padding_matrix(spec))?,
            Assembly::ColumnGather => gather_columns(&c, spec)?,
        };
        Ok(Transform {
            spec: *spec,
            matrix: t.to_layout(layout),
        })
    }

    /// Wraps an existing matrix after checking its shape against `spec`.
    pub fn from_matrix(spec: ConvSpec, matrix: SparseMatrix) -> Result<Transform> {
        let expected = (spec.output_len(), spec.input_len());
        if matrix.shape() != expected {
            return Err(Error::mismatch(
                "transform",
                format!("{}x{}", expected.0, expected.1),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        Ok(Transform { spec, matrix })
    }

    pub fn spec(&self) -> &ConvSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> Layout {
        self.matrix.layout()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Flatten, multiply, reshape.
    pub fn convolve(&self, input: &Grid) -> Result<Grid> {
        self.check_input(input)?;
        let out = self.matrix.spmv(input.as_slice())?;
        Grid::new(self.spec.m_out(), self.spec.n_out(), out)
    }

    /// [`convolve`](Self::convolve) with the SpMV spread over `threads`.
    pub fn convolve_threaded(&self, input: &Grid, threads: usize) -> Result<Grid> {
        self.check_input(input)?;
        let out = self.matrix.spmv_threaded(input.as_slice(), threads)?;
        Grid::new(self.spec.m_out(), self.spec.n_out(), out)
    }

    fn check_input(&self, input: &Grid) -> Result<()> {
        if input.shape() != (self.spec.m, self.spec.n) {
            return Err(Error::mismatch(
                "convolve",
                format!("spec input {}x{}", self.spec.m, self.spec.n),
                format!("grid {}x{}", input.rows(), input.cols()),
            ));
        }
        Ok(())
    }

    pub fn header(&self) -> String {
        let s = &self.spec;
        format!(
            "{TRANSFORM_HEADER} m={} n={} k={} s={} p={} layout={}",
            s.m,
            s.n,
            s.k,
            s.s,
            s.p,
            self.layout()
        )
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header()).map_err(|e| Error::Io {
            path: "<stream>".into(),
            source: e,
        })?;
        textio::write_sparse(w, &self.matrix)
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Transform> {
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| Error::Io {
            path: "<stream>".into(),
            source: e,
        })?;
        let (spec, layout) = parse_header(&header)?;
        let matrix = textio::read_sparse_after(r, 1, layout)?;
        Transform::from_matrix(spec, matrix)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Transform> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_string(&mut text))
            .map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
        Transform::read(text.as_bytes())
    }
}

pub const TRANSFORM_HEADER: &str = "%%spconv transform";

fn parse_header(line: &str) -> Result<(ConvSpec, Layout)> {
    let rest = line
        .trim()
        .strip_prefix(TRANSFORM_HEADER)
        .ok_or_else(|| Error::parse(1, format!("expected '{TRANSFORM_HEADER}' header")))?;
    let mut fields = [None::<usize>; 5];
    let mut layout = None;
    for item in rest.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("malformed header field '{item}'")))?;
        let slot = match key {
            "m" => 0,
            "n" => 1,
            "k" => 2,
            "s" => 3,
            "p" => 4,
            "layout" => {
                layout = Some(value.parse::<Layout>().map_err(|e| Error::parse(1, e))?);
                continue;
            }
            other => return Err(Error::parse(1, format!("unknown header field '{other}'"))),
        };
        fields[slot] = Some(
            value
                .parse()
                .map_err(|_| Error::parse(1, format!("invalid value for {key}: '{value}'")))?,
        );
    }
    let get =
        |i: usize, name: &str| fields[i].ok_or_else(|| Error::parse(1, format!("missing {name}")));
    let spec = ConvSpec::new(
        get(0, "m")?,
        get(1, "n")?,
        get(2, "k")?,
        get(3, "s")?,
        get(4, "p")?,
    )?;
    let layout = layout.ok_or_else(|| Error::parse(1, "missing layout"))?;
    Ok((spec, layout))
}
