//! Discretization of the plane and the Fourier transform on it.
//!
//! The physical domain is `x ∈ L_x[-π, π)`, `y ∈ L_y[-π, π)` sampled on a
//! uniform, endpoint-excluded grid. The continuous transform
//!
//! ```text
//! F f(ξ) = 1/(2π) ∫ f(z) exp(-i(ξ z̄ + ξ̄ z)/2) dx dy,   ξ z̄ + ξ̄ z = 2(ξ₁x + ξ₂y)
//! ```
//!
//! is approximated by the trapezoidal rule, i.e. a DFT scaled by
//! `h_x h_y / (2π) = 2π L_x L_y / (N_x N_y)`. Because the first node sits at
//! `x = -π L_x`, the DFT picks up a `(-1)^m` phase per wavenumber index.
//!
//! Fields are stored row-major with `x` as the slow index. Wavenumbers are
//! kept in FFT wrap order: `0, 1, …, N/2, -N/2+1, …, -1` (in units of `1/L`).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{czero, max_abs, Real};

/// Which representation a [`ComplexField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Physical,
    Spectral,
}

/// Uniform periodic grid together with its wavenumbers and FFT plans.
///
/// Immutable after construction; share it through an `Arc`.
#[derive(Clone)]
pub struct Grid2D<T: Real> {
    lx: T,
    ly: T,
    nx: usize,
    ny: usize,
    x: Vec<T>,
    y: Vec<T>,
    hx: T,
    hy: T,
    xi1: Vec<T>,
    xi2: Vec<T>,
    fft_x: Arc<dyn Fft<T>>,
    ifft_x: Arc<dyn Fft<T>>,
    fft_y: Arc<dyn Fft<T>>,
    ifft_y: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid2D<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid2D<T> {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }
}

fn wavenumbers<T: Real>(n: usize, l: T) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(signed_mode(i, n) as f64) / l)
        .collect()
}

/// Signed mode number of wrap-ordered index `i`: `0..=n/2` then `-n/2+1..=-1`.
#[inline]
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Wrap-ordered index of signed mode `m`, if it is representable.
#[inline]
pub fn wrap_index(m: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if m > half || m <= -half {
        None
    } else if m >= 0 {
        Some(m as usize)
    } else {
        Some((m + n as i64) as usize)
    }
}

impl<T: Real> Grid2D<T> {
    /// Builds the grid `x ∈ L_x[-π, π)`, `y ∈ L_y[-π, π)` with `N_x × N_y` modes.
    ///
    /// Mode counts must be powers of two no smaller than 4 and the scales positive.
    pub fn new(lx: T, ly: T, nx: usize, ny: usize) -> Result<Self> {
        for (name, l) in [("L_x", lx), ("L_y", ly)] {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::InvalidGrid(format!("{name} must be positive, got {l}")));
            }
        }
        for (name, n) in [("N_x", nx), ("N_y", ny)] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be a power of two >= 4, got {n}"
                )));
            }
        }
        let two_pi = T::PI() + T::PI();
        let hx = two_pi * lx / T::lit(nx as f64);
        let hy = two_pi * ly / T::lit(ny as f64);
        let x = (0..nx).map(|i| -T::PI() * lx + T::lit(i as f64) * hx).collect();
        let y = (0..ny).map(|i| -T::PI() * ly + T::lit(i as f64) * hy).collect();

        let mut planner = FftPlanner::new();
        Ok(Self {
            lx,
            ly,
            nx,
            ny,
            x,
            y,
            hx,
            hy,
            xi1: wavenumbers(nx, lx),
            xi2: wavenumbers(ny, ly),
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        })
    }

    /// Same as [`Grid2D::new`] but wrapped in an `Arc` for sharing with fields.
    pub fn shared(lx: T, ly: T, nx: usize, ny: usize) -> Result<Arc<Self>> {
        Self::new(lx, ly, nx, ny).map(Arc::new)
    }

    pub fn lx(&self) -> T {
        self.lx
    }

    pub fn ly(&self) -> T {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of grid points `N_x N_y`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_nodes(&self) -> &[T] {
        &self.x
    }

    pub fn y_nodes(&self) -> &[T] {
        &self.y
    }

    /// Wavenumbers `ξ₁` in wrap order.
    pub fn xi1(&self) -> &[T] {
        &self.xi1
    }

    /// Wavenumbers `ξ₂` in wrap order.
    pub fn xi2(&self) -> &[T] {
        &self.xi2
    }

    /// Node spacing `2πL_x/N_x` (not a difference of nodes, which would cancel).
    pub fn dx(&self) -> T {
        self.hx
    }

    pub fn dy(&self) -> T {
        self.hy
    }

    /// Spacing of the spectral grid in each direction, `(1/L_x, 1/L_y)`.
    pub fn dxi(&self) -> (T, T) {
        (T::one() / self.lx, T::one() / self.ly)
    }

    /// Wrap-ordered index of `ξ = 0`; always `(0, 0)`.
    pub fn zero_index(&self) -> (usize, usize) {
        (0, 0)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    /// Physical point `z = x + iy` at node `(ix, iy)`.
    #[inline]
    pub fn z(&self, ix: usize, iy: usize) -> Complex<T> {
        Complex::new(self.x[ix], self.y[iy])
    }

    /// Spectral point `ξ = ξ₁ + iξ₂` at wrap-ordered index `(ix, iy)`.
    #[inline]
    pub fn xi(&self, ix: usize, iy: usize) -> Complex<T> {
        Complex::new(self.xi1[ix], self.xi2[iy])
    }

    /// Area of the periodic cell, `(2π L_x)(2π L_y)`.
    pub fn area(&self) -> T {
        let two_pi = T::PI() + T::PI();
        two_pi * self.lx * two_pi * self.ly
    }

    /// Scale applied to the raw DFT sum by the forward transform.
    pub fn forward_scale(&self) -> T {
        self.area() / (T::lit(self.len() as f64) * (T::PI() + T::PI()))
    }

    /// Scale applied to the raw inverse DFT sum by the inverse transform.
    pub fn inverse_scale(&self) -> T {
        T::one() / ((T::PI() + T::PI()) * self.lx * self.ly)
    }

    /// Samples `f(z)` at every node.
    pub fn sample_physical(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.len());
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                out.push(f(self.z(ix, iy)));
            }
        }
        out
    }

    /// Samples `f(ξ)` at every spectral node.
    pub fn sample_spectral(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.len());
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                out.push(f(self.xi(ix, iy)));
            }
        }
        out
    }

    fn fft_along_both(&self, data: &mut [Complex<T>], y_plan: &Arc<dyn Fft<T>>, x_plan: &Arc<dyn Fft<T>>) {
        let (nx, ny) = (self.nx, self.ny);
        data.par_chunks_mut(ny).for_each_init(
            || vec![czero(); y_plan.get_inplace_scratch_len()],
            |scratch, row| y_plan.process_with_scratch(row, scratch),
        );

        let mut t = vec![czero(); nx * ny];
        t.par_chunks_mut(nx).enumerate().for_each(|(iy, col)| {
            for (ix, v) in col.iter_mut().enumerate() {
                *v = data[ix * ny + iy];
            }
        });
        t.par_chunks_mut(nx).for_each_init(
            || vec![czero(); x_plan.get_inplace_scratch_len()],
            |scratch, col| x_plan.process_with_scratch(col, scratch),
        );
        data.par_chunks_mut(ny).enumerate().for_each(|(ix, row)| {
            for (iy, v) in row.iter_mut().enumerate() {
                *v = t[iy * nx + ix];
            }
        });
    }

    /// In-place forward transform of raw row-major samples.
    pub fn forward_in_place(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        self.fft_along_both(data, &self.fft_y, &self.fft_x);
        let s = self.forward_scale();
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let sign = if (ix + iy) % 2 == 0 { s } else { -s };
                data[ix * self.ny + iy] = data[ix * self.ny + iy] * sign;
            }
        }
    }

    /// In-place inverse transform of raw row-major spectral samples.
    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let s = self.inverse_scale();
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let sign = if (ix + iy) % 2 == 0 { s } else { -s };
                data[ix * self.ny + iy] = data[ix * self.ny + iy] * sign;
            }
        }
        self.fft_along_both(data, &self.ifft_y, &self.ifft_x);
    }
}

/// Complex samples on a grid, tagged with the space they live in.
#[derive(Clone, Debug)]
pub struct ComplexField<T: Real> {
    values: Vec<Complex<T>>,
    space: Space,
    grid: Arc<Grid2D<T>>,
}

impl<T: Real> ComplexField<T> {
    /// Wraps raw row-major values. Panics if the length does not match the grid.
    pub fn new(grid: Arc<Grid2D<T>>, space: Space, values: Vec<Complex<T>>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        Self { values, space, grid }
    }

    pub fn zeros(grid: Arc<Grid2D<T>>, space: Space) -> Self {
        let values = vec![czero(); grid.len()];
        Self { values, space, grid }
    }

    pub fn from_physical(grid: Arc<Grid2D<T>>, f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        let values = grid.sample_physical(f);
        Self::new(grid, Space::Physical, values)
    }

    pub fn from_spectral(grid: Arc<Grid2D<T>>, f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        let values = grid.sample_spectral(f);
        Self::new(grid, Space::Spectral, values)
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn grid(&self) -> &Arc<Grid2D<T>> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Complex<T> {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.values)
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected,
                actual: self.space,
            })
        }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Forward transform; the field must be physical.
    pub fn fft2(&self) -> Result<Self> {
        self.expect_space(Space::Physical)?;
        let mut values = self.values.clone();
        self.grid.forward_in_place(&mut values);
        Ok(Self::new(self.grid.clone(), Space::Spectral, values))
    }

    /// Inverse transform; the field must be spectral.
    pub fn ifft2(&self) -> Result<Self> {
        self.expect_space(Space::Spectral)?;
        let mut values = self.values.clone();
        self.grid.inverse_in_place(&mut values);
        Ok(Self::new(self.grid.clone(), Space::Physical, values))
    }

    /// Transform to the other space, whichever this one is.
    pub fn transform(&self) -> Self {
        match self.space {
            Space::Physical => self.fft2(),
            Space::Spectral => self.ifft2(),
        }
        .expect("space tag matches direction")
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        self.check_same_grid(other)?;
        other.expect_space(self.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::new(self.grid.clone(), self.space, values))
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.grid.clone(), self.space, values)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Max-norm of the pointwise difference.
    pub fn max_diff(&self, other: &Self) -> Result<T> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm())))
    }

    /// Flattens column after column (`x` fast), the Krylov vector layout.
    pub fn to_column_major(&self) -> Vec<Complex<T>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(self.values[ix * ny + iy]);
            }
        }
        out
    }

    /// Inverse of [`ComplexField::to_column_major`].
    pub fn from_column_major(grid: Arc<Grid2D<T>>, space: Space, flat: &[Complex<T>]) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        assert_eq!(flat.len(), nx * ny, "vector length does not match grid");
        let mut values = vec![czero(); nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                values[ix * ny + iy] = flat[iy * nx + ix];
            }
        }
        Self::new(grid, space, values)
    }
}

/// Boundary-to-peak ratios of a field in both representations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryDecay<T> {
    /// Ratio for the physical-space representation.
    pub decay_phys: T,
    /// Ratio for the spectral representation.
    pub decay_spec: T,
}

fn ring_ratio<T: Real>(field: &ComplexField<T>) -> T {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let peak = field.max_abs();
    if peak == T::zero() {
        return T::zero();
    }
    // Physical edges are the first and last nodes; spectral edges are the
    // extreme wavenumbers N/2 and -N/2+1.
    let (ex, ey) = match field.space() {
        Space::Physical => ([0, nx - 1], [0, ny - 1]),
        Space::Spectral => ([nx / 2, nx / 2 + 1], [ny / 2, ny / 2 + 1]),
    };
    let mut edge = T::zero();
    for ix in 0..nx {
        for iy in 0..ny {
            if ex.contains(&ix) || ey.contains(&iy) {
                edge = edge.max(field.at(ix, iy).norm());
            }
        }
    }
    edge / peak
}

/// Max modulus on the outermost ring divided by the overall max, for the
/// field and for its transform.
pub fn boundary_decay<T: Real>(field: &ComplexField<T>) -> BoundaryDecay<T> {
    let other = field.transform();
    let (phys, spec) = match field.space() {
        Space::Physical => (field, &other),
        Space::Spectral => (&other, field),
    };
    BoundaryDecay {
        decay_phys: ring_ratio(phys),
        decay_spec: ring_ratio(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_dft(grid: &Grid2D<f64>, f: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); grid.len()];
        let scale = grid.dx() * grid.dy() / (2.0 * std::f64::consts::PI);
        for kx in 0..grid.nx() {
            for ky in 0..grid.ny() {
                let xi = grid.xi(kx, ky);
                let mut acc = Complex::new(0.0, 0.0);
                for ix in 0..grid.nx() {
                    for iy in 0..grid.ny() {
                        let z = grid.z(ix, iy);
                        let phase = -(xi.re * z.re + xi.im * z.im);
                        acc += f[grid.index(ix, iy)] * Complex::from_polar(1.0, phase);
                    }
                }
                out[grid.index(kx, ky)] = acc * scale;
            }
        }
        out
    }

    #[test]
    fn smallest_grid_wrap_order() {
        let g = Grid2D::<f64>::new(1.0, 1.0, 4, 4).unwrap();
        assert_eq!(g.xi1(), &[0.0, 1.0, 2.0, -1.0]);
        assert_eq!(g.x_nodes()[0], -std::f64::consts::PI);
        assert!((g.dx() - std::f64::consts::PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn paper_grids_have_expected_wavenumbers() {
        let g = Grid2D::<f64>::new(3.0, 3.0, 256, 256).unwrap();
        let min = g.xi1().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = g.xi1().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((min + 127.0 / 3.0).abs() < 1e-12);
        assert!((max - 128.0 / 3.0).abs() < 1e-12);

        let g = Grid2D::<f64>::new(2.0, 1.0, 512, 1024).unwrap();
        assert_eq!(g.xi2()[512], 512.0);
        assert!((g.dx() - 2.0 * std::f64::consts::PI * 2.0 / 512.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid2D::<f64>::new(1.0, 1.0, 6, 8).is_err());
        assert!(Grid2D::<f64>::new(1.0, 1.0, 2, 8).is_err());
        assert!(Grid2D::<f64>::new(0.0, 1.0, 8, 8).is_err());
        assert!(Grid2D::<f64>::new(1.0, -2.0, 8, 8).is_err());
    }

    #[test]
    fn forward_matches_brute_force_dft() {
        let grid = Grid2D::shared(0.7, 1.3, 8, 8).unwrap();
        let f = ComplexField::from_physical(grid.clone(), |z: Complex<f64>| {
            Complex::new((-z.norm_sqr()).exp(), 0.3 * z.re) * (Complex::new(0.0, z.im)).exp()
        });
        let fast = f.fft2().unwrap();
        let slow = brute_dft(&grid, f.values());
        let err = fast
            .values()
            .iter()
            .zip(&slow)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-13, "err = {err}");
    }

    #[test]
    fn dc_mode_inverts_to_constant() {
        let grid = Grid2D::shared(1.0, 1.0, 4, 4).unwrap();
        let c = Complex::new(0.5, -1.25);
        let mut spec = ComplexField::zeros(grid.clone(), Space::Spectral);
        spec.values_mut()[0] = c * grid.forward_scale() * 16.0;
        let phys = spec.ifft2().unwrap();
        // direct sum: (1/(2π L_x L_y)) Σ F e^{iξ·x} with a single mode
        let expected = spec.values()[0] / (2.0 * std::f64::consts::PI);
        for v in phys.values() {
            assert!((v - expected).norm() < 1e-15);
            assert!((v - c).norm() < 1e-14);
        }
    }

    #[test]
    fn space_tag_is_enforced() {
        let grid = Grid2D::shared(1.0, 1.0, 4, 4).unwrap();
        let f = ComplexField::zeros(grid, Space::Spectral);
        assert!(matches!(f.fft2(), Err(Error::SpaceMismatch { .. })));
        assert!(f.ifft2().unwrap().ifft2().is_err());
    }

    #[test]
    fn zero_transforms_to_zero() {
        let grid = Grid2D::shared(1.0, 2.0, 16, 8).unwrap();
        let f = ComplexField::zeros(grid, Space::Physical);
        assert_eq!(f.fft2().unwrap().max_abs(), 0.0);
        let d = boundary_decay(&f);
        assert_eq!((d.decay_phys, d.decay_spec), (0.0, 0.0));
    }

    #[test]
    fn constant_has_no_decay() {
        let grid = Grid2D::shared(1.0, 1.0, 16, 16).unwrap();
        let f = ComplexField::from_physical(grid, |_| Complex::new(1.0, 0.0));
        assert_eq!(boundary_decay(&f).decay_phys, 1.0);
    }

    #[test]
    fn column_major_layout() {
        let grid = Grid2D::shared(1.0, 1.0, 4, 8).unwrap();
        let f = ComplexField::from_physical(grid.clone(), |z| z);
        let flat = f.to_column_major();
        assert_eq!(flat[1], grid.z(1, 0));
        assert_eq!(flat[4], grid.z(0, 1));
        let back = ComplexField::from_column_major(grid, Space::Physical, &flat);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn wrap_index_roundtrip() {
        for n in [4usize, 8, 16] {
            for i in 0..n {
                assert_eq!(wrap_index(signed_mode(i, n), n), Some(i));
            }
            assert_eq!(wrap_index(-(n as i64) / 2, n), None);
        }
    }
}
