//! 2-D DFTs over [`ScalarMap`]/[`ComplexGrid`], built on rustfft.
//!
//! Forward transform is the standard unnormalized DFT; the inverse applies
//! the 1/(W·H) scaling so `idft2(dft2(x)) == x`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexGrid, ScalarMap};

fn transform_2d(grid: &mut ComplexGrid, inverse: bool) {
    let (w, h) = (grid.width, grid.height);
    if w == 0 || h == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in grid.data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid.data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            grid.data[y * w + x] = col[y];
        }
    }
}

/// Unnormalized forward 2-D DFT.
pub fn dft2(map: &ScalarMap) -> ComplexGrid {
    let mut grid = ComplexGrid {
        width: map.width,
        height: map.height,
        data: map.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    };
    transform_2d(&mut grid, false);
    grid
}

/// Inverse 2-D DFT with 1/(W·H) scaling; returns the real part.
pub fn idft2(grid: &ComplexGrid) -> ScalarMap {
    let mut work = grid.clone();
    transform_2d(&mut work, true);
    let n = (grid.width * grid.height).max(1) as f64;
    ScalarMap {
        width: grid.width,
        height: grid.height,
        data: work.data.iter().map(|c| c.re / n).collect(),
    }
}

/// Inverse 2-D DFT keeping the complex result (scaled by 1/(W·H)).
pub fn idft2_complex(grid: &ComplexGrid) -> ComplexGrid {
    let mut work = grid.clone();
    transform_2d(&mut work, true);
    let n = (grid.width * grid.height).max(1) as f64;
    for c in &mut work.data {
        *c /= n;
    }
    work
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn impulse_transforms_to_ones() {
        let mut map = ScalarMap::filled(4, 3, 0.0);
        map.set(0, 0, 1.0);
        let grid = dft2(&map);
        for c in &grid.data {
            assert!((c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_map_has_single_dc_coefficient() {
        let map = ScalarMap::filled(5, 4, 0.7);
        let grid = dft2(&map);
        assert!((grid.data[0].re - 0.7 * 20.0).abs() < 1e-9);
        for c in &grid.data[1..] {
            assert!(c.norm() < 1e-9);
        }
    }

    #[test]
    fn round_trip_8x8() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let map = ScalarMap::new(8, 8, (0..64).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let back = idft2(&dft2(&map));
        for (a, b) in map.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
