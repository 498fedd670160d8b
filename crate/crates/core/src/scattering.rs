//! Reconstruction of the CGO solutions `Φ₁, Φ₂` from `S`, the reflection
//! coefficient, an independent Cauchy-transform oracle for `Φ₂`, residuals
//! of the first-order system, and sweeps over spectral points.
//!
//! The first-order system is
//! `ε ∂̄Φ₁ = ½ q e^{(k̄z̄-kz)/ε} Φ₂`, `ε ∂Φ₂ = ½ q̄ e^{(kz-k̄z̄)/ε} Φ₁`.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::dbar::{ConvergenceLog, DbarProblem, Potential, SField, SolveConfig, SolveStatus};
use crate::error::{Error, Result};
use crate::grid::{boundary_decay, BoundaryDecay, ComplexField, Grid2D, Space};
use crate::krylov::StagnationRule;
use crate::regularization::{DivXi, DivXiBarShifted, EtaFamily};
use crate::scalar::{cis, max_abs, accurate_sum, Real};

/// Grids above this many points per side make the oracle warn about cost.
pub const ORACLE_WARN_SIDE: usize = 128;

/// Attainable relative accuracy in double precision, used for the saturation floor.
pub const SATURATION_DIGITS: f64 = 1e-14;

/// `e^{(kz - k̄z̄)/ε} = e^{2i Im(kz)/ε}`, unimodular.
pub fn oscillatory_factor<T: Real>(grid: &Arc<Grid2D<T>>, k: Complex<T>, eps: T) -> ComplexField<T> {
    let two = T::lit(2.0);
    ComplexField::from_physical(grid.clone(), |z| cis(two * (k * z).im / eps))
}

/// `Φ₁ = F⁻¹(S/ξ) + 1`.
pub fn phi1_from_s<T: Real>(s: &SField<T>, div_xi: &DivXi<T>) -> Result<ComplexField<T>> {
    let one = Complex::new(T::one(), T::zero());
    Ok(div_xi.apply(&s.s)?.map(|v| v + one))
}

/// `Φ₂ = e^{(kz-k̄z̄)/ε} F⁻¹[F(q̄Φ₁) / (iε(ξ̄ - 2ik/ε))]`.
pub fn phi2_from_phi1<T: Real>(
    phi1: &ComplexField<T>,
    pot: &Potential<T>,
    div_shift: &DivXiBarShifted<T>,
    k: Complex<T>,
    eps: T,
) -> Result<ComplexField<T>> {
    phi1.expect_space(Space::Physical)?;
    let p = pot.q_conj.mul(phi1)?;
    let p_hat = p.fft2()?;
    let v = div_shift.apply_with_physical(&p_hat, p.values())?.result;
    let factor = Complex::new(T::zero(), -T::one() / eps); // 1/(iε)
    let osc = oscillatory_factor(phi1.grid(), k, eps);
    v.zip_with(&osc, |a, e| a * e * factor)
}

/// `Φ₂` as the solid Cauchy transform
/// `(1/(2πε)) ∫ e^{(kz'-k̄z̄')/ε} q̄Φ₁(z') / (z̄ - z̄') dx'dy'`, evaluated without
/// any singular Fourier division.
///
/// The kernel is split as `K = K·(1 - e^{-|z-z'|²/σ²}) + K·e^{-|z-z'|²/σ²}`.
/// The first part is smooth and summed directly over all grid pairs, `O(N⁴)`;
/// the second is a convolution with a rapidly decaying kernel whose transform
/// `-i(1 - e^{-σ²|ξ|²/4})/(εξ̄)` is bounded, applied by FFT.
pub fn cauchy_oracle<T: Real>(
    phi1: &ComplexField<T>,
    pot: &Potential<T>,
    k: Complex<T>,
    eps: T,
) -> Result<ComplexField<T>> {
    phi1.expect_space(Space::Physical)?;
    let grid = phi1.grid().clone();
    if grid.nx() > ORACLE_WARN_SIDE || grid.ny() > ORACLE_WARN_SIDE {
        log::warn!("Cauchy oracle on a {}x{} grid costs O(N^4)", grid.nx(), grid.ny());
    }
    let osc = oscillatory_factor(&grid, k, eps);
    let h = pot.q_conj.mul(phi1)?.mul(&osc)?;

    let sigma = T::lit(4.0) * grid.dx().max(grid.dy());
    let inv_sigma2 = T::one() / (sigma * sigma);
    let weight = grid.dx() * grid.dy() / (T::lit(2.0) * T::PI() * eps);

    let sources: Vec<(Complex<T>, Complex<T>)> = (0..grid.nx())
        .flat_map(|ix| (0..grid.ny()).map(move |iy| (ix, iy)))
        .map(|(ix, iy)| (grid.z(ix, iy), h.at(ix, iy)))
        .filter(|(_, v)| v.norm_sqr() > T::zero())
        .collect();
    let far: Vec<Complex<T>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let z = grid.z(idx / grid.ny(), idx % grid.ny());
            let mut acc = Complex::new(T::zero(), T::zero());
            for &(zp, hv) in &sources {
                let d = z - zp;
                let r2 = d.norm_sqr();
                if r2 == T::zero() {
                    continue;
                }
                // (1 - e^{-r²/σ²}) computed without cancellation for small r
                let smooth = -(-r2 * inv_sigma2).exp_m1();
                acc = acc + hv * (d.conj().inv() * smooth);
            }
            acc * weight
        })
        .collect();

    let quarter_s2 = sigma * sigma / T::lit(4.0);
    let mut near = h.fft2()?;
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let xi = grid.xi(ix, iy);
            let m = if xi.norm_sqr() == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                let num = -(-quarter_s2 * xi.norm_sqr()).exp_m1();
                Complex::new(T::zero(), -num / eps) / xi.conj()
            };
            let idx = grid.index(ix, iy);
            near.values_mut()[idx] = near.values()[idx] * m;
        }
    }
    let near = near.ifft2()?;
    let vals = far.into_iter().zip(near.values()).map(|(a, &b)| a + b).collect();
    Ok(ComplexField::new(grid, Space::Physical, vals))
}

/// A value of the conjugate reflection coefficient `r̄(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionSample<T> {
    pub k: Complex<T>,
    pub r_bar: Complex<T>,
    pub eps: T,
}

/// `r̄(k) = (2/(επ)) ∫ e^{(kz-k̄z̄)/ε} q̄ Φ₁ dx dy`, as grid mean times area.
pub fn reflection<T: Real>(
    phi1: &ComplexField<T>,
    pot: &Potential<T>,
    k: Complex<T>,
    eps: T,
) -> Result<ReflectionSample<T>> {
    phi1.expect_space(Space::Physical)?;
    let grid = phi1.grid();
    let osc = oscillatory_factor(grid, k, eps);
    let integrand = pot.q_conj.mul(phi1)?.mul(&osc)?;
    let sum = accurate_sum(integrand.values());
    let mean = sum / T::lit(grid.len() as f64);
    let factor = T::lit(2.0) / (eps * T::PI()) * grid.area();
    Ok(ReflectionSample {
        k,
        r_bar: mean * factor,
        eps,
    })
}

/// Max-norm residuals of the first-order system on the inner half of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbarResidual<T> {
    /// `ε∂̄Φ₁ - ½ q e^{(k̄z̄-kz)/ε} Φ₂`.
    pub first: T,
    /// `ε∂Φ₂ - ½ q̄ e^{(kz-k̄z̄)/ε} Φ₁`.
    pub second: T,
}

impl<T: Real> DbarResidual<T> {
    pub fn max(&self) -> T {
        self.first.max(self.second)
    }
}

/// `½ erfc((|x| - c)/δ)`: equal to 1 within rounding on the inner half
/// `|x| ≤ πL/2` and 0 within rounding at the edge `|x| = πL`.
fn edge_window(x: f64, l: f64) -> f64 {
    // erfc(u) < 1e-17 for u ≥ 5.9
    const U: f64 = 5.9;
    let (a, b) = (0.5 * std::f64::consts::PI * l, std::f64::consts::PI * l);
    let c = 0.5 * (a + b);
    let delta = (b - a) / (2.0 * U);
    0.5 * libm::erfc((x.abs() - c) / delta)
}

/// Spectral `∂̄` (`Xi` = multiply by `iξ/2`) or `∂` (`iξ̄/2`) of a physical field.
fn spectral_derivative<T: Real>(f: &ComplexField<T>, bar: bool) -> Result<ComplexField<T>> {
    let grid = f.grid().clone();
    let mut hat = f.fft2()?;
    let half = T::lit(0.5);
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let xi = grid.xi(ix, iy);
            let sym = if bar { xi } else { xi.conj() };
            let m = Complex::new(T::zero(), half) * sym;
            let idx = grid.index(ix, iy);
            hat.values_mut()[idx] = hat.values()[idx] * m;
        }
    }
    hat.ifft2()
}

/// Residual of the first-order system for reconstructed `(Φ₁, Φ₂)`.
///
/// `Φ₁ - 1` and `Φ₂` decay only algebraically, so they are not periodic on the
/// grid. Each is multiplied by a smooth window equal to 1 on the inner half of
/// the domain and vanishing at its edge before being differentiated
/// spectrally; the residual is measured where the window is 1.
pub fn dbar_residual<T: Real>(
    phi1: &ComplexField<T>,
    phi2: &ComplexField<T>,
    pot: &Potential<T>,
    k: Complex<T>,
    eps: T,
) -> Result<DbarResidual<T>> {
    phi1.expect_space(Space::Physical)?;
    phi2.expect_space(Space::Physical)?;
    let grid = phi1.grid().clone();
    if *phi2.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let (lx, ly) = (grid.lx().to_f64_lossy(), grid.ly().to_f64_lossy());
    let window = ComplexField::from_physical(grid.clone(), |z| {
        let w = edge_window(z.re.to_f64_lossy(), lx) * edge_window(z.im.to_f64_lossy(), ly);
        Complex::new(T::lit(w), T::zero())
    });
    // Φ₁ → 1 at infinity: windowing Φ₁ - 1 keeps the constant exact and the
    // windowed field small where the window varies.
    let one = Complex::new(T::one(), T::zero());
    let d1 = spectral_derivative(&window.zip_with(phi1, |w, p| w * (p - one))?, true)?;
    let d2 = spectral_derivative(&window.mul(phi2)?, false)?;
    let osc = oscillatory_factor(&grid, k, eps);
    let half = T::lit(0.5);
    let (ax, ay) = (T::PI() * grid.lx() * half, T::PI() * grid.ly() * half);

    let mut res = DbarResidual {
        first: T::zero(),
        second: T::zero(),
    };
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let z = grid.z(ix, iy);
            if z.re.abs() > ax || z.im.abs() > ay {
                continue;
            }
            let e = osc.at(ix, iy);
            let r1 = d1.at(ix, iy) * eps - pot.q.at(ix, iy) * e.conj() * phi2.at(ix, iy) * half;
            let r2 = d2.at(ix, iy) * eps - pot.q_conj.at(ix, iy) * e * phi1.at(ix, iy) * half;
            res.first = res.first.max(r1.norm());
            res.second = res.second.max(r2.norm());
        }
    }
    Ok(res)
}

/// Reconstructed solutions at one spectral point.
#[derive(Debug, Clone)]
pub struct CGOSolution<T: Real> {
    pub phi1: ComplexField<T>,
    pub phi2: ComplexField<T>,
    pub k: Complex<T>,
    pub eps: T,
    pub dbar_residual: T,
}

impl<T: Real> CGOSolution<T> {
    /// Builds `Φ₁, Φ₂` from a solved `S` and measures the system residual.
    pub fn reconstruct(problem: &DbarProblem<T>, s: &SField<T>) -> Result<Self> {
        let cfg = problem.config();
        let pot = problem.potential();
        let phi1 = phi1_from_s(s, problem.div_xi())?;
        let phi2 = phi2_from_phi1(&phi1, pot, problem.div_shift(), cfg.k, cfg.eps)?;
        let dbar_residual = dbar_residual(&phi1, &phi2, pot, cfg.k, cfg.eps)?.max();
        Ok(Self {
            phi1,
            phi2,
            k: cfg.k,
            eps: cfg.eps,
            dbar_residual,
        })
    }
}

/// Everything reported about a completed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    /// `‖AS - b‖_∞`.
    pub residual_inf: T,
    /// `‖AS - b‖₂ / ‖b‖₂`.
    pub residual_rel_l2: T,
    /// Boundary-to-peak ratios of `S` (spectral) and `F⁻¹S` (physical).
    pub decay: BoundaryDecay<T>,
    pub dbar_residual: T,
    pub max_s: T,
    /// `max|S| · 10⁻¹⁴`, the smallest magnitude `S` can resolve.
    pub saturation_floor: T,
}

pub fn diagnostics<T: Real>(problem: &DbarProblem<T>, s: &SField<T>, sol: &CGOSolution<T>) -> Result<Diagnostics<T>> {
    let r = problem.residual(&s.s)?;
    let max_s = max_abs(s.s.values());
    Ok(Diagnostics {
        residual_inf: r.inf,
        residual_rel_l2: if r.rhs_l2 == T::zero() { r.l2 } else { r.l2 / r.rhs_l2 },
        decay: boundary_decay(&s.s),
        dbar_residual: sol.dbar_residual,
        max_s,
        saturation_floor: max_s * T::lit(SATURATION_DIGITS),
    })
}

/// Outcome of one solve in a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry<T: Real> {
    pub k: Complex<T>,
    /// Present unless the solve failed or diverged.
    pub sample: Option<ReflectionSample<T>>,
    pub log: Option<ConvergenceLog<T>>,
    /// Error message when the solve could not run at all.
    pub error: Option<String>,
}

impl<T: Real> SweepEntry<T> {
    pub fn succeeded(&self) -> bool {
        self.log
            .as_ref()
            .is_some_and(|l| l.is_success(StagnationRule::<T>::default().floor))
    }
}

/// Solves independently at every `k` (in parallel) and evaluates `r̄(k)`.
/// Results keep the order of `k_list`; per-k failures do not abort the sweep.
pub fn k_sweep<T: Real>(
    pot: &Arc<Potential<T>>,
    family: &Arc<EtaFamily<T>>,
    template: &SolveConfig<T>,
    k_list: &[Complex<T>],
) -> Result<Vec<SweepEntry<T>>> {
    if k_list.is_empty() {
        return Err(Error::InvalidConfig("k_list is empty".into()));
    }
    for &k in k_list {
        SolveConfig { k, ..template.clone() }.validate()?;
    }
    Ok(k_list
        .par_iter()
        .map(|&k| {
            let cfg = SolveConfig { k, ..template.clone() };
            let attempt = || -> Result<(Option<ReflectionSample<T>>, ConvergenceLog<T>)> {
                let problem = DbarProblem::new(pot.clone(), cfg.clone(), family.clone())?;
                let (s, log) = problem.solve()?;
                let sample = if log.status == SolveStatus::Diverged {
                    None
                } else {
                    let phi1 = phi1_from_s(&s, problem.div_xi())?;
                    Some(reflection(&phi1, pot, k, cfg.eps)?)
                };
                Ok((sample, log))
            };
            match attempt() {
                Ok((sample, log)) => SweepEntry {
                    k,
                    sample,
                    log: Some(log),
                    error: None,
                },
                Err(e) => SweepEntry {
                    k,
                    sample: None,
                    log: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
