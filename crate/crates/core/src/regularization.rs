//! Spectrally accurate inverse transforms of `S/ξ` and `f/(ξ̄ - 2ik/ε)`.
//!
//! Both quotients are singular at a single spectral point. A Gaussian-windowed
//! Taylor polynomial of the numerator is subtracted so that what goes through
//! the FFT is smooth; the subtracted piece is added back through the
//! closed-form functions
//!
//! ```text
//! η_n  = F⁻¹(ξ̄ⁿ e^{-|ξ|²} / ξ) = (-2i∂)ⁿ [(i/z)(1 - e^{-|z|²/4})]
//! η̄_n = F⁻¹(ξⁿ e^{-|ξ|²} / ξ̄) = (-2i∂̄)ⁿ [(i/z̄)(1 - e^{-|z|²/4})]
//! ```
//!
//! which are generated exactly by a small term-rewriting algebra over
//! monomials `z^p z̄^q` with or without the factor `e^{-|z|²/4}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{wrap_index, signed_mode, ComplexField, Grid2D, Space};
use crate::scalar::{cis, czero, Real};

/// Default number of subtraction terms minus one.
pub const DEFAULT_TERMS: usize = 4;

/// Largest supported `M`.
pub const MAX_TERMS: usize = 8;

/// Radius below which η functions are evaluated from their power series.
const SERIES_RADIUS: f64 = 3.0;

/// Number of power-series terms kept for `|z| < SERIES_RADIUS`.
const SERIES_LEN: i32 = 64;

/// Spectral differentiation direction: `∂_ξ` or `∂_ξ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Xi,
    XiBar,
}

/// Physical-space direction for the term algebra: `∂` (d/dz) or `∂̄` (d/dz̄).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wirtinger {
    Dz,
    Dzbar,
}

/// Finite sum of `coef · z^p · z̄^q · (e^{-|z|²/4})^g`, `g ∈ {0, 1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermSum {
    terms: BTreeMap<(i32, i32, bool), Complex<f64>>,
}

impl TermSum {
    fn add(&mut self, key: (i32, i32, bool), coef: Complex<f64>) {
        if coef == Complex::new(0.0, 0.0) {
            return;
        }
        let slot = self.terms.entry(key).or_insert(Complex::new(0.0, 0.0));
        *slot += coef;
        if *slot == Complex::new(0.0, 0.0) {
            self.terms.remove(&key);
        }
    }

    fn scaled(&self, s: Complex<f64>) -> Self {
        let mut out = Self::default();
        for (&k, &v) in &self.terms {
            out.add(k, v * s);
        }
        out
    }

    fn derivative(&self, dir: Wirtinger) -> Self {
        let mut out = Self::default();
        for (&(p, q, g), &coef) in &self.terms {
            match dir {
                Wirtinger::Dz => {
                    out.add((p - 1, q, g), coef * p as f64);
                    if g {
                        out.add((p, q + 1, g), coef * -0.25);
                    }
                }
                Wirtinger::Dzbar => {
                    out.add((p, q - 1, g), coef * q as f64);
                    if g {
                        out.add((p + 1, q, g), coef * -0.25);
                    }
                }
            }
        }
        out
    }

    /// `(-2i D)ⁿ` applied to the sum.
    fn raised(&self, dir: Wirtinger, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..n {
            out = out.derivative(dir).scaled(Complex::new(0.0, -2.0));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the sum at `z`. Negative powers at `z = 0` are not checked.
    pub fn eval<T: Real>(&self, z: Complex<T>) -> Complex<T> {
        let (pmin, pmax, qmin, qmax) = self.terms.keys().fold(
            (0i32, 0i32, 0i32, 0i32),
            |(a, b, c_, d), &(p, q, _)| (a.min(p), b.max(p), c_.min(q), d.max(q)),
        );
        let zb = z.conj();
        let pows = |base: Complex<T>, lo: i32, hi: i32| -> Vec<Complex<T>> {
            let mut v = vec![czero(); (hi - lo + 1) as usize];
            let one = Complex::new(T::one(), T::zero());
            v[(-lo) as usize] = one;
            for e in 1..=hi {
                v[(e - lo) as usize] = v[(e - 1 - lo) as usize] * base;
            }
            if lo < 0 {
                let inv = one / base;
                for e in (lo..0).rev() {
                    v[(e - lo) as usize] = v[(e + 1 - lo) as usize] * inv;
                }
            }
            v
        };
        let zp = pows(z, pmin, pmax);
        let zq = pows(zb, qmin, qmax);
        let gauss = (-z.norm_sqr() / T::lit(4.0)).exp();
        let mut plain = czero::<T>();
        let mut with_gauss = czero::<T>();
        for (&(p, q, g), &coef) in &self.terms {
            let v = Complex::new(T::lit(coef.re), T::lit(coef.im))
                * zp[(p - pmin) as usize]
                * zq[(q - qmin) as usize];
            if g {
                with_gauss = with_gauss + v;
            } else {
                plain = plain + v;
            }
        }
        plain + with_gauss * gauss
    }
}

/// Closed form and small-|z| power series of one η function.
#[derive(Debug, Clone)]
pub struct EtaExpr {
    closed: TermSum,
    series: TermSum,
}

impl EtaExpr {
    fn build(n: usize, dir: Wirtinger) -> Self {
        let i = Complex::new(0.0, 1.0);
        // (i/w)(1 - e^{-|z|²/4}) with w = z or z̄
        let mut closed = TermSum::default();
        let mut series = TermSum::default();
        let (pole, series_key): ((i32, i32), fn(i32) -> (i32, i32)) = match dir {
            Wirtinger::Dz => ((-1, 0), |m| (m - 1, m)),
            Wirtinger::Dzbar => ((0, -1), |m| (m, m - 1)),
        };
        closed.add((pole.0, pole.1, false), i);
        closed.add((pole.0, pole.1, true), -i);
        // i Σ_{m≥1} (-1)^{m+1} w^{m-1} w̄^m / (4^m m!)
        let mut coef = 1.0f64;
        for m in 1..=SERIES_LEN {
            coef /= 4.0 * m as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            let (p, q) = series_key(m);
            series.add((p, q, false), i * (sign * coef));
        }
        Self {
            closed: closed.raised(dir, n),
            series: series.raised(dir, n),
        }
    }

    /// Value at `z`; exactly zero at the origin.
    pub fn eval<T: Real>(&self, z: Complex<T>) -> Complex<T> {
        let r = z.norm();
        if r == T::zero() {
            czero()
        } else if r < T::lit(SERIES_RADIUS) {
            self.series.eval(z)
        } else {
            self.closed.eval(z)
        }
    }

    pub fn closed_form(&self) -> &TermSum {
        &self.closed
    }

    pub fn series(&self) -> &TermSum {
        &self.series
    }
}

/// `η_n = (-2i∂)ⁿ[(i/z)(1 - e^{-|z|²/4})]`.
pub fn eta_expr(n: usize) -> EtaExpr {
    EtaExpr::build(n, Wirtinger::Dz)
}

/// `η̄_n = (-2i∂̄)ⁿ[(i/z̄)(1 - e^{-|z|²/4})]`.
pub fn eta_bar_expr(n: usize) -> EtaExpr {
    EtaExpr::build(n, Wirtinger::Dzbar)
}

/// The functions `η_0..η_M` and `η̄_0..η̄_M` sampled on a grid.
#[derive(Debug, Clone)]
pub struct EtaFamily<T: Real> {
    m: usize,
    eta: Vec<ComplexField<T>>,
    eta_bar: Vec<ComplexField<T>>,
}

impl<T: Real> EtaFamily<T> {
    /// Samples `η_n`, `η̄_n` for `n = 0..=m`.
    pub fn build(m: usize, grid: &Arc<Grid2D<T>>) -> Result<Self> {
        if m > MAX_TERMS {
            return Err(Error::InvalidTermCount(m));
        }
        let sample = |expr: EtaExpr| ComplexField::from_physical(grid.clone(), |z| expr.eval(z));
        Ok(Self {
            m,
            eta: (0..=m).map(|n| sample(eta_expr(n))).collect(),
            eta_bar: (0..=m).map(|n| sample(eta_bar_expr(n))).collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eta(&self) -> &[ComplexField<T>] {
        &self.eta
    }

    pub fn eta_bar(&self) -> &[ComplexField<T>] {
        &self.eta_bar
    }

    pub fn grid(&self) -> &Arc<Grid2D<T>> {
        self.eta[0].grid()
    }
}

/// Location of the singular point `ξ* = -2ik̄/ε` relative to the spectral grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPointInfo<T> {
    pub xi_star: Complex<T>,
    pub on_grid: bool,
    /// Nearest grid point to `xi_star`.
    pub xi0: Complex<T>,
    pub xi0_index: (usize, usize),
}

fn nearest_mode<T: Real>(target: T, l: T, n: usize) -> Vec<i64> {
    let half = (n / 2) as i64;
    let t = (target * l).to_f64_lossy();
    let lo = (t.floor() as i64).clamp(-half + 1, half);
    let hi = (t.ceil() as i64).clamp(-half + 1, half);
    if lo == hi {
        vec![lo]
    } else {
        vec![lo, hi]
    }
}

/// Finds the grid point closest to `-2ik̄/ε` and decides whether it is close
/// enough (strictly less than `min(1/L_x, 1/L_y)`) to need regularization.
pub fn singular_point<T: Real>(grid: &Grid2D<T>, k: Complex<T>, eps: T) -> Result<SingularPointInfo<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidEpsilon(eps.to_f64_lossy()));
    }
    let xi_star = Complex::new(T::zero(), -T::lit(2.0)) * k.conj() / eps;
    let mut best: Option<(T, (usize, usize))> = None;
    for mx in nearest_mode(xi_star.re, grid.lx(), grid.nx()) {
        for my in nearest_mode(xi_star.im, grid.ly(), grid.ny()) {
            let idx = (
                wrap_index(mx, grid.nx()).expect("clamped mode"),
                wrap_index(my, grid.ny()).expect("clamped mode"),
            );
            let d = (grid.xi(idx.0, idx.1) - xi_star).norm();
            best = match best {
                Some((bd, bi)) if bd < d || (bd == d && bi <= idx) => Some((bd, bi)),
                _ => Some((d, idx)),
            };
        }
    }
    let (dist, xi0_index) = best.expect("at least one candidate");
    let (sx, sy) = grid.dxi();
    Ok(SingularPointInfo {
        xi_star,
        on_grid: dist < sx.min(sy),
        xi0: grid.xi(xi0_index.0, xi0_index.1),
        xi0_index,
    })
}

/// Weighted point sums giving `∂ⁿ f(ξ0)` for `n = 0..=n_max` from the
/// physical-space samples `phys = F⁻¹f`.
fn derivs_from_physical<T: Real>(
    grid: &Grid2D<T>,
    phys: &[Complex<T>],
    xi0: Complex<T>,
    n_max: usize,
    dir: Direction,
) -> Vec<Complex<T>> {
    let scale = grid.forward_scale();
    let half = T::lit(0.5);
    let phase_x: Vec<Complex<T>> = grid.x_nodes().iter().map(|&x| cis(-xi0.re * x)).collect();
    let phase_y: Vec<Complex<T>> = grid.y_nodes().iter().map(|&y| cis(-xi0.im * y)).collect();
    let mut acc = vec![czero::<T>(); n_max + 1];
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let z = grid.z(ix, iy);
            // -i z̄/2 for ∂_ξ, -i z/2 for ∂_ξ̄
            let w = match dir {
                Direction::Xi => Complex::new(-z.im * half, -z.re * half),
                Direction::XiBar => Complex::new(z.im * half, -z.re * half),
            };
            let mut term = phys[grid.index(ix, iy)] * phase_x[ix] * phase_y[iy];
            for a in acc.iter_mut() {
                *a = *a + term;
                term = term * w;
            }
        }
    }
    acc.into_iter().map(|a| a * scale).collect()
}

/// `∂ⁿ f` at one spectral grid point for `n = 0..=n_max`, computed as
/// `F[(-iz̄/2)ⁿ F⁻¹f]` (direction `Xi`) or `F[(-iz/2)ⁿ F⁻¹f]` (`XiBar`)
/// evaluated at that point only.
pub fn spectral_derivs_at<T: Real>(
    f: &ComplexField<T>,
    point_index: (usize, usize),
    n_max: usize,
    direction: Direction,
) -> Result<Vec<Complex<T>>> {
    f.expect_space(Space::Spectral)?;
    let grid = f.grid();
    if point_index.0 >= grid.nx() || point_index.1 >= grid.ny() {
        return Err(Error::IndexOutOfRange(point_index.0, point_index.1));
    }
    if n_max > MAX_TERMS + 1 {
        return Err(Error::DerivativeOrder {
            requested: n_max,
            max: MAX_TERMS + 1,
        });
    }
    let phys = f.ifft2()?;
    let xi0 = grid.xi(point_index.0, point_index.1);
    Ok(derivs_from_physical(grid, phys.values(), xi0, n_max, direction))
}

/// Per-application resolution check, logged at debug level; solvers report
/// the final iterate once at warn level.
fn warn_if_not_decayed<T: Real>(grid: &Grid2D<T>, values: &[Complex<T>], what: &str) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut peak = T::zero();
    let mut edge = T::zero();
    for ix in 0..nx {
        for iy in 0..ny {
            let v = values[ix * ny + iy].norm();
            peak = peak.max(v);
            if ix == nx / 2 || ix == nx / 2 + 1 || iy == ny / 2 || iy == ny / 2 + 1 {
                edge = edge.max(v);
            }
        }
    }
    if peak > T::zero() && edge > T::lit(1e-10) * peak {
        log::debug!(
            "{what} is not resolved at the spectral boundary (edge/peak = {:.2e})",
            (edge / peak).to_f64_lossy()
        );
    }
}

#[inline]
fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Precomputed data for `F⁻¹(S/ξ)` on a fixed grid.
#[derive(Debug, Clone)]
pub struct DivXi<T: Real> {
    family: Arc<EtaFamily<T>>,
    gauss: Vec<T>,
    inv_xi: Vec<Complex<T>>,
}

/// Pieces of a regularized singular inverse transform.
#[derive(Debug, Clone)]
pub struct RegularizedParts<T: Real> {
    /// Regularized quotient in spectral space (smooth within rounding).
    pub quotient: ComplexField<T>,
    /// Taylor coefficients `∂ⁿ f(ξ0)/n!` multiplying the η functions.
    pub coeffs: Vec<Complex<T>>,
    /// The full inverse transform.
    pub result: ComplexField<T>,
}

impl<T: Real> DivXi<T> {
    pub fn new(family: Arc<EtaFamily<T>>) -> Self {
        let grid = family.grid().clone();
        let gauss = grid
            .sample_spectral(|xi| Complex::new((-xi.norm_sqr()).exp(), T::zero()))
            .into_iter()
            .map(|v| v.re)
            .collect();
        let inv_xi = grid.sample_spectral(|xi| {
            if xi.norm_sqr() == T::zero() {
                czero()
            } else {
                xi.inv()
            }
        });
        Self {
            family,
            gauss,
            inv_xi,
        }
    }

    pub fn family(&self) -> &Arc<EtaFamily<T>> {
        &self.family
    }

    /// `F⁻¹(S/ξ)` for spectral `s`.
    pub fn apply(&self, s: &ComplexField<T>) -> Result<ComplexField<T>> {
        Ok(self.apply_parts(s)?.result)
    }

    pub fn apply_parts(&self, s: &ComplexField<T>) -> Result<RegularizedParts<T>> {
        s.expect_space(Space::Spectral)?;
        let phys = s.ifft2()?;
        self.apply_with_physical(s, phys.values())
    }

    /// Same as [`DivXi::apply_parts`] when `F⁻¹S` is already known.
    pub fn apply_with_physical(&self, s: &ComplexField<T>, phys: &[Complex<T>]) -> Result<RegularizedParts<T>> {
        s.expect_space(Space::Spectral)?;
        let grid = s.grid().clone();
        let m = self.family.m();
        warn_if_not_decayed(&grid, s.values(), "S");

        let origin = czero();
        let mut coeffs = derivs_from_physical(&grid, phys, origin, m, Direction::XiBar);
        for (n, cn) in coeffs.iter_mut().enumerate() {
            *cn = *cn / T::lit(factorial(n));
        }
        // L'Hôpital value at ξ = 0
        let at_origin = derivs_from_physical(&grid, phys, origin, 1, Direction::Xi)[1];

        let mut q = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                let idx = grid.index(ix, iy);
                if ix == 0 && iy == 0 {
                    q.push(at_origin);
                    continue;
                }
                let xib = grid.xi(ix, iy).conj();
                let mut poly = czero::<T>();
                for cn in coeffs.iter().rev() {
                    poly = poly * xib + *cn;
                }
                let num = s.values()[idx] - poly * self.gauss[idx];
                q.push(num * self.inv_xi[idx]);
            }
        }
        let quotient = ComplexField::new(grid.clone(), Space::Spectral, q);
        let mut out = quotient.ifft2()?;
        {
            let vals = out.values_mut();
            for (cn, eta) in coeffs.iter().zip(self.family.eta()) {
                for (o, e) in vals.iter_mut().zip(eta.values()) {
                    *o = *o + *cn * *e;
                }
            }
        }
        Ok(RegularizedParts {
            quotient,
            coeffs,
            result: out,
        })
    }
}

/// Precomputed data for `F⁻¹[f/(ξ̄ - 2ik/ε)]` at a fixed `(k, ε)`.
#[derive(Debug, Clone)]
pub struct DivXiBarShifted<T: Real> {
    family: Arc<EtaFamily<T>>,
    info: SingularPointInfo<T>,
    inv_den: Vec<Complex<T>>,
    /// `e^{-|ξ-ξ0|²}`; empty off-grid.
    window: Vec<T>,
    /// `e^{i(ξ0 z̄ + ξ̄0 z)/2}`; empty off-grid.
    phase: Vec<Complex<T>>,
}

impl<T: Real> DivXiBarShifted<T> {
    pub fn new(family: Arc<EtaFamily<T>>, k: Complex<T>, eps: T) -> Result<Self> {
        let grid = family.grid().clone();
        let info = singular_point(&grid, k, eps)?;
        let pole = if info.on_grid { info.xi0 } else { info.xi_star };
        let inv_den = grid.sample_spectral(|xi| {
            let d = (xi - pole).conj();
            if d.norm_sqr() == T::zero() {
                czero()
            } else {
                d.inv()
            }
        });
        let (window, phase) = if info.on_grid {
            let xi0 = info.xi0;
            let window = grid
                .sample_spectral(|xi| Complex::new((-(xi - xi0).norm_sqr()).exp(), T::zero()))
                .into_iter()
                .map(|v| v.re)
                .collect();
            // (ξ0 z̄ + ξ̄0 z)/2 = ξ0₁ x + ξ0₂ y
            let phase = grid.sample_physical(|z| cis(xi0.re * z.re + xi0.im * z.im));
            (window, phase)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            family,
            info,
            inv_den,
            window,
            phase,
        })
    }

    pub fn info(&self) -> &SingularPointInfo<T> {
        &self.info
    }

    pub fn apply(&self, f: &ComplexField<T>) -> Result<ComplexField<T>> {
        Ok(self.apply_parts(f)?.result)
    }

    pub fn apply_parts(&self, f: &ComplexField<T>) -> Result<RegularizedParts<T>> {
        f.expect_space(Space::Spectral)?;
        if !self.info.on_grid {
            return self.apply_with_physical(f, &[]);
        }
        let phys = f.ifft2()?;
        self.apply_with_physical(f, phys.values())
    }

    /// Same as [`DivXiBarShifted::apply_parts`] when `F⁻¹f` is already known.
    /// `phys` is ignored (and may be empty) when the pole is off the grid.
    pub fn apply_with_physical(&self, f: &ComplexField<T>, phys: &[Complex<T>]) -> Result<RegularizedParts<T>> {
        f.expect_space(Space::Spectral)?;
        let grid = f.grid().clone();
        warn_if_not_decayed(&grid, f.values(), "shifted integrand");

        if !self.info.on_grid {
            let q: Vec<_> = f.values().iter().zip(&self.inv_den).map(|(&a, &b)| a * b).collect();
            let quotient = ComplexField::new(grid, Space::Spectral, q);
            let result = quotient.ifft2()?;
            return Ok(RegularizedParts {
                quotient,
                coeffs: Vec::new(),
                result,
            });
        }

        let m = self.family.m();
        let xi0 = self.info.xi0;
        let mut coeffs = derivs_from_physical(&grid, phys, xi0, m, Direction::Xi);
        for (n, cn) in coeffs.iter_mut().enumerate() {
            *cn = *cn / T::lit(factorial(n));
        }
        let at_pole = derivs_from_physical(&grid, phys, xi0, 1, Direction::XiBar)[1];
        let (px, py) = self.info.xi0_index;

        let mut q = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                let idx = grid.index(ix, iy);
                if ix == px && iy == py {
                    q.push(at_pole);
                    continue;
                }
                let d = grid.xi(ix, iy) - xi0;
                let mut poly = czero::<T>();
                for cn in coeffs.iter().rev() {
                    poly = poly * d + *cn;
                }
                let num = f.values()[idx] - poly * self.window[idx];
                q.push(num * self.inv_den[idx]);
            }
        }
        let quotient = ComplexField::new(grid.clone(), Space::Spectral, q);
        let mut out = quotient.ifft2()?;
        {
            let vals = out.values_mut();
            for (i, o) in vals.iter_mut().enumerate() {
                let mut acc = czero::<T>();
                for (cn, eta) in coeffs.iter().zip(self.family.eta_bar()) {
                    acc = acc + *cn * eta.values()[i];
                }
                *o = *o + acc * self.phase[i];
            }
        }
        Ok(RegularizedParts {
            quotient,
            coeffs,
            result: out,
        })
    }
}

/// `F⁻¹(S/ξ)` with `M = fam.m()` subtraction terms.
pub fn inv_ft_div_xi<T: Real>(s: &ComplexField<T>, fam: &Arc<EtaFamily<T>>) -> Result<ComplexField<T>> {
    DivXi::new(fam.clone()).apply(s)
}

/// `F⁻¹[f(ξ)/(ξ̄ - 2ik/ε)]`, regularized when `-2ik̄/ε` is near a grid point.
pub fn inv_ft_div_xibar_shifted<T: Real>(
    f: &ComplexField<T>,
    k: Complex<T>,
    eps: T,
    fam: &Arc<EtaFamily<T>>,
) -> Result<ComplexField<T>> {
    DivXiBarShifted::new(fam.clone(), k, eps)?.apply(f)
}

/// Signed mode numbers of a spectral grid point, for diagnostics.
pub fn mode_of<T: Real>(grid: &Grid2D<T>, index: (usize, usize)) -> (i64, i64) {
    (signed_mode(index.0, grid.nx()), signed_mode(index.1, grid.ny()))
}
