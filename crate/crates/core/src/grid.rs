//! Uniform periodic grids, spectral derivatives and quadrature.
//!
//! Every field in the crate lives on a [`SpatialGrid`]: `n` samples at
//! `x_min + k dx`, `k = 0..n`, with the point `x_max` identified with
//! `x_min`. Derivatives are Fourier multipliers (`ik` for the gradient,
//! `-k^2` for the Laplacian); the Nyquist mode is dropped from the gradient
//! so that real input gives real output.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RealField1D = Vec<f64>;
pub type ComplexField1D = Vec<Complex64>;
pub type RealField2D = Field2D<f64>;
pub type ComplexField2D = Field2D<Complex64>;

/// Uniform periodic grid on `[x_min, x_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
}

impl SpatialGrid {
    /// Builds a grid of `n` samples; `n` must be a power of two no smaller than 8.
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::config(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max})"
            )));
        }
        Ok(Self {
            n,
            x_min,
            x_max,
            dx: (x_max - x_min) / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Period of the domain.
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry is positive.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let dk = 2.0 * PI / self.length();
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j } else { j - n };
                dk * m as f64
            })
            .collect()
    }

    /// Maps `x` into the fundamental cell `[x_min, x_max)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length();
        let mut y = (x - self.x_min).rem_euclid(l);
        if y >= l {
            y -= l;
        }
        self.x_min + y
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n {
            return Err(Error::config(format!(
                "{what} has {len} samples but the grid has {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Tensor grid over `(x, p)`. The x axis is periodic; the momentum axis is
/// open, with samples at `p_min + j dp`, `j = 0..n_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    x_axis: SpatialGrid,
    n_p: usize,
    p_min: f64,
    p_max: f64,
    dp: f64,
}

impl PhaseSpaceGrid {
    pub fn new(x_axis: SpatialGrid, n_p: usize, p_min: f64, p_max: f64) -> Result<Self> {
        if n_p < 2 {
            return Err(Error::config(format!(
                "momentum axis needs at least 2 samples, got {n_p}"
            )));
        }
        if !(p_min.is_finite() && p_max.is_finite()) || p_max <= p_min {
            return Err(Error::config(format!(
                "momentum bounds must satisfy p_min < p_max, got [{p_min}, {p_max})"
            )));
        }
        Ok(Self {
            x_axis,
            n_p,
            p_min,
            p_max,
            dp: (p_max - p_min) / n_p as f64,
        })
    }

    pub fn x_axis(&self) -> &SpatialGrid {
        &self.x_axis
    }

    pub fn n_x(&self) -> usize {
        self.x_axis.n()
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn dx(&self) -> f64 {
        self.x_axis.dx()
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn cell_area(&self) -> f64 {
        self.x_axis.dx() * self.dp
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_p).map(|j| self.p(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column indices into a finer spatial grid sharing this grid's bounds.
    ///
    /// Phase-space fields are allowed to sample every `stride`-th point of a
    /// wave-function grid; this returns those point indices.
    pub fn columns_of(&self, fine: &SpatialGrid) -> Result<Vec<usize>> {
        let coarse = &self.x_axis;
        let same_bounds = (coarse.x_min() - fine.x_min()).abs() <= 1e-12 * fine.length()
            && (coarse.x_max() - fine.x_max()).abs() <= 1e-12 * fine.length();
        if !same_bounds || fine.n() % coarse.n() != 0 {
            return Err(Error::config(format!(
                "phase-space x axis ({} points on [{}, {})) is not a decimation of the \
                 spatial grid ({} points on [{}, {}))",
                coarse.n(),
                coarse.x_min(),
                coarse.x_max(),
                fine.n(),
                fine.x_min(),
                fine.x_max()
            )));
        }
        let stride = fine.n() / coarse.n();
        Ok((0..coarse.n()).map(|i| i * stride).collect())
    }
}

/// Row-major samples on a [`PhaseSpaceGrid`]; entry `(ix, jp)` sits at
/// `ix * n_p + jp`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D<T> {
    n_x: usize,
    n_p: usize,
    data: Vec<T>,
}

impl<T: Copy> Field2D<T> {
    pub fn filled(grid: &PhaseSpaceGrid, value: T) -> Self {
        Self {
            n_x: grid.n_x(),
            n_p: grid.n_p(),
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &PhaseSpaceGrid, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for ix in 0..grid.n_x() {
            let x = grid.x_axis().x(ix);
            for jp in 0..grid.n_p() {
                data.push(f(x, grid.p(jp)));
            }
        }
        Self {
            n_x: grid.n_x(),
            n_p: grid.n_p(),
            data,
        }
    }

    pub fn from_vec(grid: &PhaseSpaceGrid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::config(format!(
                "phase-space field has {} samples but the grid has {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self {
            n_x: grid.n_x(),
            n_p: grid.n_p(),
            data,
        })
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Field2D<U> {
        Field2D {
            n_x: self.n_x,
            n_p: self.n_p,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    #[inline]
    pub fn get(&self, ix: usize, jp: usize) -> T {
        self.data[ix * self.n_p + jp]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, jp: usize, value: T) {
        self.data[ix * self.n_p + jp] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, ix: usize) -> &[T] {
        &self.data[ix * self.n_p..(ix + 1) * self.n_p]
    }

    pub(crate) fn matches(&self, grid: &PhaseSpaceGrid) -> bool {
        self.n_x == grid.n_x() && self.n_p == grid.n_p()
    }
}

impl Field2D<f64> {
    /// Cell-sum quadrature `sum f dx dp`.
    pub fn integrate(&self, grid: &PhaseSpaceGrid) -> f64 {
        self.data.iter().sum::<f64>() * grid.cell_area()
    }
}

/// Scalars the spectral operators accept: real fields are lifted to complex
/// and the imaginary part is dropped on the way back.
pub trait SpectralScalar: Copy {
    fn to_complex(self) -> Complex64;
    fn from_complex(z: Complex64) -> Self;
}

impl SpectralScalar for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl SpectralScalar for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

type FftPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, FftPair>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(n: usize) -> FftPair {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(pair) = cache.get(&n) {
            return pair.clone();
        }
        let pair = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
        cache.insert(n, pair.clone());
        pair
    })
}

/// Unnormalized forward DFT in place.
pub fn fft_forward(buf: &mut [Complex64]) {
    plans(buf.len()).0.process(buf);
}

/// Inverse DFT in place, including the `1/n` normalization.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    plans(n).1.process(buf);
    let scale = 1.0 / n as f64;
    for z in buf.iter_mut() {
        *z *= scale;
    }
}

/// Applies a diagonal Fourier multiplier `m(k)` to a field.
pub fn apply_multiplier<T: SpectralScalar>(
    field: &[T],
    grid: &SpatialGrid,
    multiplier: impl Fn(usize, f64) -> Complex64,
) -> Result<Vec<T>> {
    grid.check_len(field.len(), "field")?;
    let mut buf: Vec<Complex64> = field.iter().map(|v| v.to_complex()).collect();
    fft_forward(&mut buf);
    for (j, (z, k)) in buf.iter_mut().zip(grid.wavenumbers()).enumerate() {
        *z *= multiplier(j, k);
    }
    fft_inverse(&mut buf);
    Ok(buf.into_iter().map(T::from_complex).collect())
}

/// Spectral first derivative under periodic boundary conditions.
pub fn gradient<T: SpectralScalar>(field: &[T], grid: &SpatialGrid) -> Result<Vec<T>> {
    let nyquist = grid.n() / 2;
    apply_multiplier(field, grid, |j, k| {
        if j == nyquist {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    })
}

/// Spectral Laplacian, multiplier `-k^2`.
pub fn laplacian<T: SpectralScalar>(field: &[T], grid: &SpatialGrid) -> Result<Vec<T>> {
    apply_multiplier(field, grid, |_, k| Complex64::new(-k * k, 0.0))
}

/// Periodic rectangle rule `sum f dx`.
pub fn integrate(field: &[f64], grid: &SpatialGrid) -> Result<f64> {
    grid.check_len(field.len(), "field")?;
    Ok(field.iter().sum::<f64>() * grid.dx())
}

/// `sqrt(sum f^2 dx)`, the discrete L2 norm.
pub fn l2_norm(field: &[f64], grid: &SpatialGrid) -> f64 {
    (field.iter().map(|v| v * v).sum::<f64>() * grid.dx()).sqrt()
}

pub fn sup_norm(field: &[f64]) -> f64 {
    field.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_definition() {
        let g = SpatialGrid::new(8, 0.0, 8.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.points(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);

        let g = SpatialGrid::new(1024, -20.0, 20.0).unwrap();
        assert_eq!(g.dx(), 40.0 / 1024.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(SpatialGrid::new(7, 0.0, 1.0).is_err());
        assert!(SpatialGrid::new(4, 0.0, 1.0).is_err());
        assert!(SpatialGrid::new(12, 0.0, 1.0).is_err());
        assert!(SpatialGrid::new(16, 1.0, 0.0).is_err());
        assert!(SpatialGrid::new(16, 1.0, 1.0).is_err());
        let g = SpatialGrid::new(16, 0.0, 1.0).unwrap();
        assert!(PhaseSpaceGrid::new(g, 16, 2.0, -2.0).is_err());
        assert!(PhaseSpaceGrid::new(g, 1, -2.0, 2.0).is_err());
    }

    #[test]
    fn wrap_maps_into_cell() {
        let g = SpatialGrid::new(16, -2.0, 2.0).unwrap();
        assert!((g.wrap(2.5) - (-1.5)).abs() < 1e-15);
        assert!((g.wrap(-2.5) - 1.5).abs() < 1e-15);
        assert_eq!(g.wrap(-2.0), -2.0);
        assert!((g.wrap(2.0) - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = SpatialGrid::new(64, 0.0, 3.0).unwrap();
        let d = gradient(&vec![2.5; 64], &g).unwrap();
        assert!(sup_norm(&d) < 1e-14);
        let d = laplacian(&vec![2.5; 64], &g).unwrap();
        assert!(sup_norm(&d) < 1e-14);
    }

    #[test]
    fn gradient_of_sine() {
        let l = 3.0;
        let g = SpatialGrid::new(256, 0.0, l).unwrap();
        let w = 2.0 * PI / l;
        let f: Vec<f64> = g.points().iter().map(|x| (w * x).sin()).collect();
        let exact: Vec<f64> = g.points().iter().map(|x| w * (w * x).cos()).collect();
        assert!(max_err(&gradient(&f, &g).unwrap(), &exact) <= 1e-10);
    }

    #[test]
    fn plane_wave_is_an_eigenfunction() {
        let g = SpatialGrid::new(128, -5.0, 5.0).unwrap();
        let k = 2.0 * PI * 7.0 / g.length();
        let f: Vec<Complex64> = g
            .points()
            .iter()
            .map(|&x| Complex64::from_polar(1.0, k * x))
            .collect();
        let d = gradient(&f, &g).unwrap();
        let lap = laplacian(&f, &g).unwrap();
        for ((z, dz), lz) in f.iter().zip(&d).zip(&lap) {
            assert!((dz - Complex64::i() * k * z).norm() < 1e-11);
            assert!((lz + k * k * z).norm() < 1e-10);
        }
    }

    #[test]
    fn laplacian_of_gaussian() {
        let g = SpatialGrid::new(1024, -20.0, 20.0).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| (-x * x / 2.0).exp()).collect();
        let exact: Vec<f64> = g
            .points()
            .iter()
            .map(|x| (x * x - 1.0) * (-x * x / 2.0).exp())
            .collect();
        assert!(max_err(&laplacian(&f, &g).unwrap(), &exact) <= 1e-8);
    }

    #[test]
    fn quadrature_cases() {
        for n in [8, 64, 512] {
            let g = SpatialGrid::new(n, 0.0, 1.0).unwrap();
            assert!((integrate(&vec![1.0; n], &g).unwrap() - 1.0).abs() < 1e-14);
        }
        let g = SpatialGrid::new(1024, -12.0, 12.0).unwrap();
        let s = 0.5_f64;
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|x| (-x * x / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt())
            .collect();
        assert!((integrate(&f, &g).unwrap() - 1.0).abs() <= 1e-12);

        let l = 2.0;
        let g = SpatialGrid::new(256, 0.0, l).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| (2.0 * PI * x / l).sin()).collect();
        assert!(integrate(&f, &g).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let g = SpatialGrid::new(16, 0.0, 1.0).unwrap();
        assert!(gradient(&[0.0; 8], &g).is_err());
        assert!(laplacian(&[0.0; 8], &g).is_err());
        assert!(integrate(&[0.0; 8], &g).is_err());
    }

    #[test]
    fn decimated_columns() {
        let fine = SpatialGrid::new(64, -1.0, 1.0).unwrap();
        let coarse = SpatialGrid::new(16, -1.0, 1.0).unwrap();
        let ps = PhaseSpaceGrid::new(coarse, 8, -1.0, 1.0).unwrap();
        let cols = ps.columns_of(&fine).unwrap();
        assert_eq!(cols.len(), 16);
        assert_eq!(cols[1], 4);
        let other = SpatialGrid::new(64, -1.0, 1.5).unwrap();
        assert!(ps.columns_of(&other).is_err());
    }
}
