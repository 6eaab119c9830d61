//! Plain-text formats for sparse matrices and dense grids.
//!
//! Sparse (coordinate, 1-based):
//!
//! ```text
//! %%sparse coordinate real
//! 3 3 2
//! 1 1 1.0000000000000000e0
//! 3 2 -2.5000000000000000e0
//! ```
//!
//! Dense: a `rows cols` line, then one line per row. Values are always
//! written with 17 significant digits so they parse back bit-exact.

use std::io::{BufRead, Write};

use crate::dense::Grid;
use crate::error::{Error, Result};
use crate::sparse::{Layout, SparseMatrix, Triplets};

pub const SPARSE_HEADER: &str = "%%sparse coordinate real";

/// Formats a value with 17 significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stream>".into(),
        source: e,
    }
}

pub fn write_sparse<W: Write>(mut w: W, m: &SparseMatrix) -> Result<()> {
    writeln!(w, "{SPARSE_HEADER}").map_err(io_err)?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz()).map_err(io_err)?;
    for (i, j, v) in m.iter() {
        writeln!(w, "{} {} {}", i + 1, j + 1, fmt_value(v)).map_err(io_err)?;
    }
    Ok(())
}

/// Numbered, non-blank lines; `%` comments other than headers are skipped
/// by callers that want to.
struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Lines {
            inner: r.lines(),
            number: 0,
        }
    }

    fn next_line(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line.map_err(io_err)?;
            if !line.trim().is_empty() {
                return Ok(Some((self.number, line)));
            }
        }
        Ok(None)
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_line()?.ok_or_else(|| {
            Error::parse(
                self.number + 1,
                format!("unexpected end of input, expected {what}"),
            )
        })
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{field}'")))
}

/// Reads the coordinate format written by [`write_sparse`] into triplets.
pub fn read_sparse_triplets<R: BufRead>(r: R) -> Result<Triplets> {
    let mut lines = Lines::new(r);
    let (n, header) = lines.expect_line("header")?;
    if header.trim() != SPARSE_HEADER {
        return Err(Error::parse(
            n,
            format!("expected header '{SPARSE_HEADER}'"),
        ));
    }
    read_sparse_body(&mut lines)
}

fn read_sparse_body<R: BufRead>(lines: &mut Lines<R>) -> Result<Triplets> {
    let (n, size) = loop {
        let (n, l) = lines.expect_line("size line")?;
        if !l.trim_start().starts_with('%') {
            break (n, l);
        }
    };
    let fields: Vec<&str> = size.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::parse(n, "size line must be 'rows cols nnz'"));
    }
    let rows: usize = parse_field(n, fields[0], "row count")?;
    let cols: usize = parse_field(n, fields[1], "column count")?;
    let nnz: usize = parse_field(n, fields[2], "entry count")?;
    let mut t =
        Triplets::with_capacity(rows, cols, nnz).map_err(|e| Error::parse(n, e.to_string()))?;
    for _ in 0..nnz {
        let (n, l) = lines.expect_line("entry")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(n, "entry must be 'row col value'"));
        }
        let i: usize = parse_field(n, f[0], "row index")?;
        let j: usize = parse_field(n, f[1], "column index")?;
        let v: f64 = parse_field(n, f[2], "value")?;
        if i == 0 || j == 0 {
            return Err(Error::parse(n, "indices are 1-based"));
        }
        t.push(i - 1, j - 1, v)
            .map_err(|e| Error::parse(n, e.to_string()))?;
    }
    if let Some((n, _)) = lines.next_line()? {
        return Err(Error::parse(n, format!("more than {nnz} entries")));
    }
    Ok(t)
}

pub fn read_sparse<R: BufRead>(r: R, layout: Layout) -> Result<SparseMatrix> {
    read_sparse_triplets(r)?.compile(layout)
}

/// Reads a sparse block that follows an already-consumed header line.
pub(crate) fn read_sparse_after<R: BufRead>(
    r: R,
    first_line: usize,
    layout: Layout,
) -> Result<SparseMatrix> {
    let mut lines = Lines::new(r);
    lines.number = first_line;
    let (n, header) = lines.expect_line("sparse header")?;
    if header.trim() != SPARSE_HEADER {
        return Err(Error::parse(
            n,
            format!("expected header '{SPARSE_HEADER}'"),
        ));
    }
    read_sparse_body(&mut lines)?.compile(layout)
}

pub fn write_dense<W: Write>(mut w: W, g: &Grid) -> Result<()> {
    writeln!(w, "{} {}", g.rows(), g.cols()).map_err(io_err)?;
    for i in 0..g.rows() {
        let row: Vec<String> = g.row(i).iter().map(|&v| fmt_value(v)).collect();
        writeln!(w, "{}", row.join(" ")).map_err(io_err)?;
    }
    Ok(())
}

/// Reads a dense grid. Values may be spread over lines arbitrarily; exactly
/// `rows * cols` must follow the size line.
pub fn read_dense<R: BufRead>(r: R) -> Result<Grid> {
    let mut lines = Lines::new(r);
    let (n, size) = lines.expect_line("size line")?;
    let fields: Vec<&str> = size.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Error::parse(n, "size line must be 'rows cols'"));
    }
    let rows: usize = parse_field(n, fields[0], "row count")?;
    let cols: usize = parse_field(n, fields[1], "column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    while let Some((n, l)) = lines.next_line()? {
        for f in l.split_whitespace() {
            if data.len() == rows * cols {
                return Err(Error::parse(n, format!("more than {} values", rows * cols)));
            }
            data.push(parse_field(n, f, "value")?);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::parse(
            lines.number,
            format!("expected {} values, found {}", rows * cols, data.len()),
        ));
    }
    Grid::new(rows, cols, data)
}
