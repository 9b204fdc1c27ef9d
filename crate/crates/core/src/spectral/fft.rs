//! In-place radix-2 complex FFT and the 2D transforms between Fourier
//! coefficients and grid values on `[0, 2π)²`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::field::{FourierField, Mode};
use crate::lattice::LatticePoint;

/// Precomputed twiddles for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Self { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_k = Σ_a x_a e^{∓2πi ak/N}` with the minus sign when `inverse` is
    /// false. No normalization is applied.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let r = i.reverse_bits() >> (usize::BITS - bits);
            if r > i {
                data.swap(i, r);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + len / 2] * w;
                    data[start + k] = a + b;
                    data[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Row-major `N × N` transform: along the second index, then the first.
    pub fn transform_2d(&self, grid: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for row in grid.chunks_mut(n) {
            self.transform(row, inverse);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = grid[r * n + c];
            }
            self.transform(&mut col, inverse);
            for r in 0..n {
                grid[r * n + c] = col[r];
            }
        }
    }
}

fn wrap(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Grid values `Σ_j ĉ_j(component) e^{ij·x}` at `x = 2π(a1, a2)/N`, using
/// coefficients `coef(j)` for every `j` in `modes`.
pub(crate) fn synthesize(fft: &Fft, modes: impl Iterator<Item = (LatticePoint, Complex64)>) -> Vec<Complex64> {
    let n = fft.len();
    let mut grid = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, c) in modes {
        grid[wrap(j.j1, n) * n + wrap(j.j2, n)] += c;
    }
    fft.transform_2d(&mut grid, true);
    grid
}

/// Coefficients `(1/N²) Σ_x g(x) e^{-ij·x}` read off for `j` with
/// `0 < |j|_∞ ≤ radius`.
pub(crate) fn analyze(fft: &Fft, mut grid: [Vec<Complex64>; 2], radius: i64, m: i64) -> FourierField {
    let n = fft.len();
    let scale = 1.0 / (n * n) as f64;
    for g in grid.iter_mut() {
        fft.transform_2d(g, false);
    }
    let mut out = FourierField::zero(m);
    for j1 in -radius..=radius {
        for j2 in -radius..=radius {
            let j = LatticePoint::new(j1, j2);
            if j.is_zero() {
                continue;
            }
            let idx = wrap(j1, n) * n + wrap(j2, n);
            let md: Mode = [grid[0][idx] * scale, grid[1][idx] * scale];
            out.set(j, md);
        }
    }
    out
}
