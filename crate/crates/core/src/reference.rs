//! Dense reference convolutions.
//!
//! [`direct_conv`] is the correctness oracle: four nested loops over an
//! explicitly padded copy. [`im2col_conv`] is the lowering-based comparator
//! used by the benchmark: every receptive patch is copied into a column of a
//! dense `k^2 x (m_out n_out)` matrix, which is then multiplied by the
//! flattened kernel. Neither uses the sparse machinery.

use crate::conv::{ConvSpec, Kernel};
use crate::dense::Grid;
use crate::error::{Error, Result};

fn check_input(input: &Grid, spec: &ConvSpec) -> Result<()> {
    if input.shape() != (spec.m(), spec.n()) {
        return Err(Error::mismatch(
            "reference convolution",
            format!("spec input {}x{}", spec.m(), spec.n()),
            format!("grid {}x{}", input.rows(), input.cols()),
        ));
    }
    Ok(())
}

/// `out[x][y] = sum_{a,b} K[a][b] * Apad[s x + a][s y + b]`.
pub fn direct_conv(input: &Grid, kernel: &Kernel, spec: &ConvSpec) -> Result<Grid> {
    check_input(input, spec)?;
    kernel.check(spec)?;
    let padded = input.zero_padded(spec.p());
    let (k, s) = (spec.k(), spec.s());
    let mut out = Grid::zeros(spec.m_out(), spec.n_out());
    for x in 0..spec.m_out() {
        for y in 0..spec.n_out() {
            let mut acc = 0.0;
            for a in 0..k {
                for b in 0..k {
                    acc += kernel.get(a, b) * padded.get(s * x + a, s * y + b);
                }
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

/// Lowered input: `k^2` rows, one column per output position in raster
/// order. Column `x * n_out + y` is the flattened padded patch under the
/// kernel at placement `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Im2colMatrix {
    grid: Grid,
}

impl Im2colMatrix {
    pub fn rows(&self) -> usize {
        self.grid.rows()
    }

    pub fn cols(&self) -> usize {
        self.grid.cols()
    }

    pub fn as_grid(&self) -> &Grid {
        &self.grid
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.grid.get(r, t)).collect()
    }
}

pub fn im2col(input: &Grid, spec: &ConvSpec) -> Result<Im2colMatrix> {
    check_input(input, spec)?;
    let padded = input.zero_padded(spec.p());
    let (k, s) = (spec.k(), spec.s());
    let (m_out, n_out) = (spec.m_out(), spec.n_out());
    let mut data = Vec::with_capacity(k * k * m_out * n_out);
    for a in 0..k {
        for b in 0..k {
            for x in 0..m_out {
                let src = padded.row(s * x + a);
                data.extend((0..n_out).map(|y| src[s * y + b]));
            }
        }
    }
    Ok(Im2colMatrix {
        grid: Grid::new(k * k, m_out * n_out, data)?,
    })
}

/// Receives the number of scalar multiplications a GEMM performs.
pub trait MulCounter {
    fn add(&mut self, n: usize);
}

impl MulCounter for () {
    #[inline(always)]
    fn add(&mut self, _: usize) {}
}

impl MulCounter for usize {
    #[inline(always)]
    fn add(&mut self, n: usize) {
        *self += n;
    }
}

/// `vec(K)^T * M` as a plain row-by-row vector-matrix product.
fn gemv_rows<C: MulCounter>(kernel: &Kernel, lowered: &Im2colMatrix, counter: &mut C) -> Vec<f64> {
    let mut out = vec![0.0; lowered.cols()];
    for (r, &w) in kernel.values().iter().enumerate() {
        for (acc, &v) in out.iter_mut().zip(lowered.grid.row(r)) {
            *acc += w * v;
            counter.add(1);
        }
    }
    out
}

/// im2col lowering followed by a dense product with the flattened kernel.
pub fn im2col_conv(input: &Grid, kernel: &Kernel, spec: &ConvSpec) -> Result<Grid> {
    im2col_conv_with(input, kernel, spec, &mut ())
}

/// [`im2col_conv`] that also reports how many multiplications the product
/// performed.
pub fn im2col_conv_counted(
    input: &Grid,
    kernel: &Kernel,
    spec: &ConvSpec,
) -> Result<(Grid, usize)> {
    let mut count = 0usize;
    let out = im2col_conv_with(input, kernel, spec, &mut count)?;
    Ok((out, count))
}

fn im2col_conv_with<C: MulCounter>(
    input: &Grid,
    kernel: &Kernel,
    spec: &ConvSpec,
    counter: &mut C,
) -> Result<Grid> {
    kernel.check(spec)?;
    let lowered = im2col(input, spec)?;
    let out = gemv_rows(kernel, &lowered, counter);
    Grid::new(spec.m_out(), spec.n_out(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize, n: usize, k: usize, s: usize, p: usize) -> ConvSpec {
        ConvSpec::new(m, n, k, s, p).unwrap()
    }

    #[test]
    fn scalar_kernel_scales_and_strides() {
        let a = Grid::from_fn(4, 5, |i, j| (i * 5 + j) as f64);
        let k = Kernel::filled(1, 2.5).unwrap();
        let out = direct_conv(&a, &k, &spec(4, 5, 1, 2, 0)).unwrap();
        assert_eq!(out, Grid::from_fn(2, 3, |x, y| 2.5 * a.get(2 * x, 2 * y)));
        // With padding the border ring of the output reads zeros.
        let padded = a.zero_padded(1);
        let out = direct_conv(&a, &k, &spec(4, 5, 1, 1, 1)).unwrap();
        assert_eq!(out, Grid::from_fn(6, 7, |x, y| 2.5 * padded.get(x, y)));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let sp = spec(4, 3, 2, 1, 2);
        let k = Kernel::new(2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let out = direct_conv(&Grid::zeros(4, 3), &k, &sp).unwrap();
        assert_eq!(out, Grid::zeros(sp.m_out(), sp.n_out()));
    }

    #[test]
    fn hand_enumerated_small_cases() {
        // 3x3 ones, 3x3 ones kernel, p=1: overlap counts.
        let ones = Grid::from_fn(3, 3, |_, _| 1.0);
        let out = direct_conv(
            &ones,
            &Kernel::filled(3, 1.0).unwrap(),
            &spec(3, 3, 3, 1, 1),
        )
        .unwrap();
        assert_eq!(
            out.to_rows(),
            vec![
                vec![4.0, 6.0, 4.0],
                vec![6.0, 9.0, 6.0],
                vec![4.0, 6.0, 4.0]
            ]
        );

        // 2x2 input, 2x2 kernel [[a,b],[c,d]], one placement: a*A11 + b*A12 + c*A21 + d*A22.
        let a = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let k = Kernel::from_rows(&[[10.0, 20.0], [30.0, 40.0]]).unwrap();
        let out = direct_conv(&a, &k, &spec(2, 2, 2, 1, 0)).unwrap();
        assert_eq!(out.to_rows(), vec![vec![10.0 + 40.0 + 90.0 + 160.0]]);

        // 2x2 input, p=1, k=2, s=1: 3x3 output, each cell one corner product.
        let out = direct_conv(&a, &k, &spec(2, 2, 2, 1, 1)).unwrap();
        assert_eq!(
            out.to_rows(),
            vec![
                vec![40.0, 30.0 + 2.0 * 40.0, 2.0 * 30.0],
                vec![
                    20.0 + 3.0 * 40.0,
                    10.0 + 2.0 * 20.0 + 3.0 * 30.0 + 4.0 * 40.0,
                    2.0 * 10.0 + 4.0 * 30.0
                ],
                vec![3.0 * 20.0, 3.0 * 10.0 + 4.0 * 20.0, 4.0 * 10.0],
            ]
        );

        // 4x4 raster input, 2x2 ones kernel, stride 2: block sums.
        let seq = Grid::from_fn(4, 4, |i, j| (i * 4 + j + 1) as f64);
        let out =
            direct_conv(&seq, &Kernel::filled(2, 1.0).unwrap(), &spec(4, 4, 2, 2, 0)).unwrap();
        assert_eq!(out.to_rows(), vec![vec![14.0, 22.0], vec![46.0, 54.0]]);
    }

    #[test]
    fn im2col_single_patch() {
        let a = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let m = im2col(&a, &spec(2, 2, 2, 1, 0)).unwrap();
        assert_eq!((m.rows(), m.cols()), (4, 1));
        assert_eq!(m.column(0), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn im2col_padded_corner_patch() {
        let a = Grid::from_fn(3, 3, |i, j| (10 * (i + 1) + j + 1) as f64);
        let m = im2col(&a, &spec(3, 3, 3, 1, 1)).unwrap();
        assert_eq!((m.rows(), m.cols()), (9, 9));
        assert_eq!(
            m.column(0),
            vec![0.0, 0.0, 0.0, 0.0, 11.0, 12.0, 0.0, 21.0, 22.0]
        );
    }

    #[test]
    fn im2col_shape_law() {
        for (m, n, k, s, p) in [(5, 3, 2, 2, 1), (7, 7, 7, 3, 3), (1, 9, 1, 1, 0)] {
            let sp = spec(m, n, k, s, p);
            let lowered = im2col(&Grid::zeros(m, n), &sp).unwrap();
            assert_eq!(
                (lowered.rows(), lowered.cols()),
                (k * k, sp.m_out() * sp.n_out())
            );
        }
    }

    #[test]
    fn im2col_conv_matches_direct() {
        let a = Grid::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let k = Kernel::new(3, (0..9).map(|i| (i as f64) * 0.25 - 1.0).collect()).unwrap();
        let sp = spec(6, 5, 3, 2, 2);
        let d = direct_conv(&a, &k, &sp).unwrap();
        let i = im2col_conv(&a, &k, &sp).unwrap();
        assert!(d.max_abs_diff(&i).unwrap() <= 1e-10);

        let unit = Kernel::filled(1, 1.0).unwrap();
        let sp = spec(6, 5, 1, 1, 0);
        assert_eq!(
            im2col_conv(&a, &unit, &sp).unwrap(),
            direct_conv(&a, &unit, &sp).unwrap()
        );
    }

    #[test]
    fn im2col_gemm_multiplication_count() {
        for (m, n, k, s, p) in [(5, 3, 2, 2, 1), (7, 7, 3, 1, 1), (4, 9, 1, 1, 0)] {
            let sp = spec(m, n, k, s, p);
            let (_, count) =
                im2col_conv_counted(&Grid::zeros(m, n), &Kernel::filled(k, 1.0).unwrap(), &sp)
                    .unwrap();
            assert_eq!(count, sp.m_out() * sp.n_out() * k * k);
        }
    }

    #[test]
    fn dimension_errors() {
        let sp = spec(3, 3, 2, 1, 0);
        let k = Kernel::filled(2, 1.0).unwrap();
        assert!(direct_conv(&Grid::zeros(3, 2), &k, &sp).is_err());
        assert!(im2col(&Grid::zeros(2, 3), &sp).is_err());
        assert!(im2col_conv(&Grid::zeros(3, 3), &Kernel::filled(3, 1.0).unwrap(), &sp).is_err());
    }
}
