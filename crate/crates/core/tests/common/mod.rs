//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use dbar_core::{Grid, LinearOperator};
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex;
use rand::Rng;

pub type C = Complex<f64>;

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<C> {
    (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Row-major dense complex matrix as a linear operator.
pub struct Dense {
    pub n: usize,
    pub a: Vec<C>,
}

impl LinearOperator<f64> for Dense {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C], y: &mut [C]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
        }
    }
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[C], b: &[C]) -> Vec<C> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].norm().total_cmp(&m[j * n + col].norm()))
            .unwrap();
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            for k in col..n {
                let v = m[col * n + k];
                m[row * n + k] -= f * v;
            }
            let v = x[col];
            x[row] -= f * v;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    x
}

/// Raw trapezoid-weighted transform `(h_x h_y / 2π) Σ f e^{-i(ξ₁x+ξ₂y)}` by direct summation.
pub fn brute_forward(grid: &Grid, f: &[C]) -> Vec<C> {
    let scale = grid.dx() * grid.dy() / (2.0 * PI);
    let mut out = vec![C::new(0.0, 0.0); grid.len()];
    for kx in 0..grid.nx() {
        for ky in 0..grid.ny() {
            let xi = grid.xi(kx, ky);
            let mut acc = C::new(0.0, 0.0);
            for ix in 0..grid.nx() {
                for iy in 0..grid.ny() {
                    let z = grid.z(ix, iy);
                    acc += f[grid.index(ix, iy)] * C::from_polar(1.0, -(xi.re * z.re + xi.im * z.im));
                }
            }
            out[grid.index(kx, ky)] = acc * scale;
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub enum Pole {
    /// Kernel `1/(ξ - c)`.
    Xi,
    /// Kernel `1/(ξ̄ - c̄)`.
    XiBar,
}

/// `(1/2π) ∫_{|ξ-c|<R} f(ξ) K(ξ) e^{i(ξ₁x+ξ₂y)} dξ` at every physical grid node,
/// in polar coordinates centred on the pole `c`, where the Jacobian cancels
/// the singularity: Gauss–Legendre in the radius, trapezoid in the angle.
pub fn polar_singular_transform(
    grid: &Grid,
    f: impl Fn(C) -> C,
    pole: Pole,
    center: C,
    radius: f64,
    n_rho: usize,
    n_phi: usize,
) -> Vec<C> {
    let gl = GaussLegendre::new(NonZeroUsize::new(n_rho).unwrap());
    let mut nodes = Vec::with_capacity(n_rho * n_phi);
    for &(t, w) in gl.as_node_weight_pairs() {
        let rho = 0.5 * radius * (t + 1.0);
        let wr = 0.5 * radius * w;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let e = C::from_polar(1.0, phi);
            let kernel = match pole {
                Pole::Xi => e.conj(),
                Pole::XiBar => e,
            };
            let weight = wr * (2.0 * PI / n_phi as f64) / (2.0 * PI);
            nodes.push((rho * e.re, rho * e.im, f(center + e * rho) * kernel * weight));
        }
    }
    let ax: Vec<Vec<C>> = grid
        .x_nodes()
        .iter()
        .map(|&x| nodes.iter().map(|&(a, _, _)| C::from_polar(1.0, a * x)).collect())
        .collect();
    let ay: Vec<Vec<C>> = grid
        .y_nodes()
        .iter()
        .map(|&y| nodes.iter().map(|&(_, b, _)| C::from_polar(1.0, b * y)).collect())
        .collect();
    let mut out = vec![C::new(0.0, 0.0); grid.len()];
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let mut acc = C::new(0.0, 0.0);
            for ((&(_, _, v), &a), &b) in nodes.iter().zip(&ax[ix]).zip(&ay[iy]) {
                acc += v * a * b;
            }
            let z = grid.z(ix, iy);
            out[grid.index(ix, iy)] = acc * C::from_polar(1.0, center.re * z.re + center.im * z.im);
        }
    }
    out
}

/// Neumaier-compensated complex sum.
pub fn compensated_sum(values: impl IntoIterator<Item = C>) -> C {
    fn step(sum: &mut f64, comp: &mut f64, x: f64) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    }
    let (mut re, mut cre, mut im, mut cim) = (0.0, 0.0, 0.0, 0.0);
    for v in values {
        step(&mut re, &mut cre, v.re);
        step(&mut im, &mut cim, v.im);
    }
    C::new(re + cre, im + cim)
}

pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
