//! The linear problem for `S = ξ Φ̂₁`: potentials, right-hand side, the
//! matrix-free operator `A`, its residual, and the two solvers.
//!
//! With `u = F⁻¹(S/ξ)` and the coupling
//! `C(u) = F[q F⁻¹((ξ̄ - 2ik/ε)⁻¹ F(q̄ u))]`, the equation is
//! `A S := ε² S + C(u) = -C(1)`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fld;
use crate::grid::{boundary_decay, ComplexField, Grid2D, Space};
use crate::krylov::{gmres, GmresOptions, KrylovStatus, LinearOperator, StagnationRule};
use crate::regularization::{DivXi, DivXiBarShifted, EtaFamily, DEFAULT_TERMS, MAX_TERMS};
use crate::scalar::{l2_norm, max_abs, Real};

/// Potentials above this boundary-to-peak ratio trigger a resolution warning.
pub const POTENTIAL_DECAY_WARN: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `q = exp(-x² - y²)`.
    Gaussian,
    /// `q = exp(-x² - 3xy - 5y²)`, not radially symmetric even asymptotically.
    AnisotropicGaussian,
    /// Samples read from a `.fld` file on exactly the solver grid.
    FromFile(PathBuf),
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Gaussian => write!(f, "gaussian"),
            PotentialKind::AnisotropicGaussian => write!(f, "anisotropic"),
            PotentialKind::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// A sampled potential with its conjugate cached.
#[derive(Debug, Clone)]
pub struct Potential<T: Real> {
    pub q: ComplexField<T>,
    pub q_conj: ComplexField<T>,
    pub sup_norm: T,
    pub descriptor: PotentialKind,
    /// Boundary-to-peak ratio of `|q|` on the physical grid.
    pub decay_phys: T,
}

impl<T: Real> Potential<T> {
    /// Samples `kind` at the grid nodes.
    pub fn sample(kind: &PotentialKind, grid: &Arc<Grid2D<T>>) -> Result<Self> {
        let q = match kind {
            PotentialKind::Gaussian => {
                ComplexField::from_physical(grid.clone(), |z| Complex::new((-z.norm_sqr()).exp(), T::zero()))
            }
            PotentialKind::AnisotropicGaussian => ComplexField::from_physical(grid.clone(), |z| {
                let (x, y) = (z.re, z.im);
                let form = x * x + T::lit(3.0) * x * y + T::lit(5.0) * y * y;
                Complex::new((-form).exp(), T::zero())
            }),
            PotentialKind::FromFile(path) => load_potential(path, grid)?,
        };
        Self::from_field(q, kind.clone())
    }

    /// Wraps physical samples, checking finiteness and decay.
    pub fn from_field(q: ComplexField<T>, descriptor: PotentialKind) -> Result<Self> {
        q.expect_space(Space::Physical)?;
        if q.values().iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("potential"));
        }
        let sup_norm = q.max_abs();
        let decay_phys = physical_ring_ratio(&q);
        if decay_phys > T::lit(POTENTIAL_DECAY_WARN) {
            log::warn!(
                "potential {descriptor} is not resolved: boundary/peak ratio {:.3e}",
                decay_phys.to_f64_lossy()
            );
        }
        let q_conj = q.conj();
        Ok(Self {
            q,
            q_conj,
            sup_norm,
            descriptor,
            decay_phys,
        })
    }

    /// The zero potential, described as a file-less custom field.
    pub fn zero(grid: &Arc<Grid2D<T>>) -> Self {
        let q = ComplexField::zeros(grid.clone(), Space::Physical);
        Self {
            q_conj: q.clone(),
            q,
            sup_norm: T::zero(),
            descriptor: PotentialKind::FromFile(PathBuf::new()),
            decay_phys: T::zero(),
        }
    }

    /// `α q` for real `α`.
    pub fn scaled(&self, alpha: T) -> Self {
        let s = Complex::new(alpha, T::zero());
        Self {
            q: self.q.scale(s),
            q_conj: self.q_conj.scale(s),
            sup_norm: self.sup_norm * alpha.abs(),
            descriptor: self.descriptor.clone(),
            decay_phys: self.decay_phys,
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D<T>> {
        self.q.grid()
    }
}

fn physical_ring_ratio<T: Real>(q: &ComplexField<T>) -> T {
    let grid = q.grid();
    let peak = q.max_abs();
    if peak == T::zero() {
        return T::zero();
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut edge = T::zero();
    for ix in 0..nx {
        for iy in 0..ny {
            if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                edge = edge.max(q.at(ix, iy).norm());
            }
        }
    }
    edge / peak
}

fn load_potential<T: Real>(path: &Path, grid: &Arc<Grid2D<T>>) -> Result<ComplexField<T>> {
    let bytes = std::fs::read(path)?;
    let (h, values) = fld::decode_raw(&bytes).map_err(|e| Error::PotentialMismatch {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mismatch = |reason: String| Error::PotentialMismatch {
        path: path.to_path_buf(),
        reason,
    };
    if h.nx as usize != grid.nx() || h.ny as usize != grid.ny() {
        return Err(mismatch(format!(
            "file is {}x{}, grid is {}x{}",
            h.nx,
            h.ny,
            grid.nx(),
            grid.ny()
        )));
    }
    if h.lx != grid.lx().to_f64_lossy() || h.ly != grid.ly().to_f64_lossy() {
        return Err(mismatch(format!(
            "file has L = ({}, {}), grid has ({}, {})",
            h.lx,
            h.ly,
            grid.lx(),
            grid.ly()
        )));
    }
    if h.space != Space::Physical {
        return Err(mismatch("potential must be stored in physical space".into()));
    }
    let values = values
        .into_iter()
        .map(|v| Complex::new(T::lit(v.re), T::lit(v.im)))
        .collect();
    Ok(ComplexField::new(grid.clone(), Space::Physical, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FixedPoint,
    Gmres,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::FixedPoint => "fixed_point",
            SolverKind::Gmres => "gmres",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig<T> {
    pub eps: T,
    pub k: Complex<T>,
    /// Number of Taylor terms subtracted in the singular transforms, minus one.
    pub m: usize,
    pub solver: SolverKind,
    /// Fixed point stops when `‖S⁽ⁿ⁺¹⁾ - S⁽ⁿ⁾‖_∞` drops below this.
    pub fp_tol: T,
    /// GMRES stops when `‖AS - b‖₂/‖b‖₂` drops below this.
    pub gmres_rtol: T,
    pub max_iter: usize,
    pub gmres_restart: Option<usize>,
    /// Fixed point reports divergence once an increment exceeds this
    /// multiple of the first one.
    pub divergence_guard: T,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(eps: T, k: Complex<T>, solver: SolverKind) -> Self {
        Self {
            eps,
            k,
            m: DEFAULT_TERMS,
            solver,
            fp_tol: T::lit(1e-12),
            gmres_rtol: T::lit(1e-14),
            max_iter: 1000,
            gmres_restart: None,
            divergence_guard: T::lit(1e8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eps > T::zero() && self.eps.is_finite()) {
            return Err(Error::InvalidEpsilon(self.eps.to_f64_lossy()));
        }
        if !(self.k.re.is_finite() && self.k.im.is_finite()) {
            return bad("k must be finite".into());
        }
        if self.m > MAX_TERMS {
            return Err(Error::InvalidTermCount(self.m));
        }
        for (name, tol) in [("fp_tol", self.fp_tol), ("gmres_rtol", self.gmres_rtol)] {
            if !(tol > T::zero() && tol < T::one()) {
                return bad(format!("{name} must lie in (0, 1), got {tol}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.gmres_restart == Some(0) {
            return bad("restart must be at least 1".into());
        }
        if !(self.divergence_guard > T::one()) {
            return bad(format!("divergence_guard must exceed 1, got {}", self.divergence_guard));
        }
        Ok(())
    }
}

/// The unknown `S = ξ Φ̂₁`, a spectral field.
#[derive(Debug, Clone)]
pub struct SField<T: Real> {
    pub s: ComplexField<T>,
}

impl<T: Real> SField<T> {
    pub fn new(s: ComplexField<T>) -> Result<Self> {
        s.expect_space(Space::Spectral)?;
        Ok(Self { s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
    Stagnated,
    Breakdown,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Diverged => "diverged",
            SolveStatus::Stagnated => "stagnated",
            SolveStatus::Breakdown => "breakdown",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceLog<T> {
    pub solver: SolverKind,
    /// `Δₙ` (fixed point) or the relative residual estimate (GMRES) per iteration.
    pub history: Vec<T>,
    pub iterations: usize,
    pub status: SolveStatus,
    /// `‖A S - b‖_∞` of the returned iterate.
    pub final_residual: T,
    /// `‖A S - b‖₂ / ‖b‖₂` of the returned iterate.
    pub final_rel_residual_l2: T,
}

impl<T: Real> ConvergenceLog<T> {
    /// Whether the solve reached an acceptable answer: converged, or (GMRES)
    /// stopped on a plateau below the stagnation floor.
    pub fn is_success(&self, stagnation_floor: T) -> bool {
        match self.status {
            SolveStatus::Converged => true,
            SolveStatus::Stagnated => self.final_rel_residual_l2 <= stagnation_floor,
            _ => false,
        }
    }
}

/// `‖·‖_∞` and `‖·‖₂` of a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual<T> {
    pub inf: T,
    pub l2: T,
    /// `‖b‖₂`, for relative comparisons.
    pub rhs_l2: T,
}

/// The assembled linear problem at a fixed `(q, k, ε)`.
#[derive(Debug, Clone)]
pub struct DbarProblem<T: Real> {
    grid: Arc<Grid2D<T>>,
    potential: Arc<Potential<T>>,
    cfg: SolveConfig<T>,
    div_xi: DivXi<T>,
    div_shift: DivXiBarShifted<T>,
    rhs: ComplexField<T>,
}

impl<T: Real> DbarProblem<T> {
    /// Builds the problem and caches the right-hand side. `family` must have
    /// `cfg.m` terms and live on the potential's grid.
    pub fn new(potential: Arc<Potential<T>>, cfg: SolveConfig<T>, family: Arc<EtaFamily<T>>) -> Result<Self> {
        cfg.validate()?;
        let grid = potential.grid().clone();
        if **family.grid() != *grid {
            return Err(Error::GridMismatch);
        }
        if family.m() != cfg.m {
            return Err(Error::InvalidConfig(format!(
                "eta family has M = {}, configuration asks for M = {}",
                family.m(),
                cfg.m
            )));
        }
        let div_xi = DivXi::new(family.clone());
        let div_shift = DivXiBarShifted::new(family, cfg.k, cfg.eps)?;
        let mut problem = Self {
            rhs: ComplexField::zeros(grid.clone(), Space::Spectral),
            grid,
            potential,
            cfg,
            div_xi,
            div_shift,
        };
        let one = ComplexField::from_physical(problem.grid.clone(), |_| Complex::new(T::one(), T::zero()));
        problem.rhs = problem.coupling(&one)?.scale(Complex::new(-T::one(), T::zero()));
        Ok(problem)
    }

    /// Convenience constructor building its own η family.
    pub fn with_new_family(potential: Arc<Potential<T>>, cfg: SolveConfig<T>) -> Result<Self> {
        let family = Arc::new(EtaFamily::build(cfg.m, potential.grid())?);
        Self::new(potential, cfg, family)
    }

    pub fn grid(&self) -> &Arc<Grid2D<T>> {
        &self.grid
    }

    pub fn potential(&self) -> &Arc<Potential<T>> {
        &self.potential
    }

    pub fn config(&self) -> &SolveConfig<T> {
        &self.cfg
    }

    pub fn div_xi(&self) -> &DivXi<T> {
        &self.div_xi
    }

    pub fn div_shift(&self) -> &DivXiBarShifted<T> {
        &self.div_shift
    }

    /// `b = -F[q F⁻¹((ξ̄ - 2ik/ε)⁻¹ F(q̄))]`.
    pub fn rhs(&self) -> &ComplexField<T> {
        &self.rhs
    }

    /// `C(u) = F[q F⁻¹((ξ̄ - 2ik/ε)⁻¹ F(q̄ u))]` for physical `u`.
    ///
    /// The physical product `q̄ u` doubles as the inverse transform needed for
    /// the Taylor data of the shifted division, saving one FFT.
    pub fn coupling(&self, u: &ComplexField<T>) -> Result<ComplexField<T>> {
        u.expect_space(Space::Physical)?;
        let p = self.potential.q_conj.mul(u)?;
        let p_hat = p.fft2()?;
        let v = self.div_shift.apply_with_physical(&p_hat, p.values())?.result;
        self.potential.q.mul(&v)?.fft2()
    }

    /// `A S = ε² S + C(F⁻¹(S/ξ))`.
    pub fn apply_a(&self, s: &ComplexField<T>) -> Result<ComplexField<T>> {
        s.expect_space(Space::Spectral)?;
        let u = self.div_xi.apply(s)?;
        let eps2 = self.cfg.eps * self.cfg.eps;
        let c = self.coupling(&u)?;
        s.zip_with(&c, |a, b| a * eps2 + b)
    }

    /// `A S - b` in both norms.
    pub fn residual(&self, s: &ComplexField<T>) -> Result<Residual<T>> {
        let r = self.apply_a(s)?.sub(&self.rhs)?;
        Ok(Residual {
            inf: r.max_abs(),
            l2: l2_norm(r.values()),
            rhs_l2: l2_norm(self.rhs.values()),
        })
    }

    /// Column-major view of `A` for Krylov solvers.
    pub fn operator(&self) -> DbarOperator<'_, T> {
        DbarOperator { problem: self }
    }

    /// Runs the configured solver.
    pub fn solve(&self) -> Result<(SField<T>, ConvergenceLog<T>)> {
        let (s, log) = match self.cfg.solver {
            SolverKind::FixedPoint => self.fixed_point_solve(),
            SolverKind::Gmres => self.gmres_solve(),
        }?;
        let decay = boundary_decay(&s.s);
        let worst = decay.decay_spec.max(decay.decay_phys);
        if worst > T::lit(1e-10) {
            log::warn!(
                "S at k = {}, eps = {} is not resolved at the grid boundary (edge/peak = {:.2e}); enlarge L or N",
                self.cfg.k,
                self.cfg.eps,
                worst.to_f64_lossy()
            );
        }
        Ok((s, log))
    }

    /// `S⁽ⁿ⁺¹⁾ = (b - C(F⁻¹(S⁽ⁿ⁾/ξ)))/ε²` from `S⁽⁰⁾ = 0`.
    pub fn fixed_point_solve(&self) -> Result<(SField<T>, ConvergenceLog<T>)> {
        let eps2 = self.cfg.eps * self.cfg.eps;
        let inv_eps2 = T::one() / eps2;
        let mut s = ComplexField::zeros(self.grid.clone(), Space::Spectral);
        let mut history = Vec::new();
        let mut first: Option<T> = None;
        let mut status = SolveStatus::MaxIter;

        for _ in 0..self.cfg.max_iter {
            let u = self.div_xi.apply(&s)?;
            let c = self.coupling(&u)?;
            let next = self.rhs.zip_with(&c, |b, c| (b - c) * inv_eps2)?;
            let delta = next.max_diff(&s)?;
            history.push(delta);
            s = next;
            if !delta.is_finite() {
                status = SolveStatus::Diverged;
                break;
            }
            if delta < self.cfg.fp_tol {
                status = SolveStatus::Converged;
                break;
            }
            let d0 = *first.get_or_insert(delta);
            if delta > self.cfg.divergence_guard * d0 {
                status = SolveStatus::Diverged;
                break;
            }
        }
        let iterations = history.len();
        self.finish(s, history, iterations, status, SolverKind::FixedPoint)
    }

    pub fn gmres_solve(&self) -> Result<(SField<T>, ConvergenceLog<T>)> {
        let opts = GmresOptions {
            rtol: self.cfg.gmres_rtol,
            max_iter: self.cfg.max_iter,
            restart: self.cfg.gmres_restart,
            stagnation: Some(StagnationRule::default()),
            track_orthogonality: false,
        };
        let b = self.rhs.to_column_major();
        let (x, log) = gmres(&self.operator(), &b, &opts)?;
        let s = ComplexField::from_column_major(self.grid.clone(), Space::Spectral, &x);
        let status = match log.status {
            KrylovStatus::Converged => SolveStatus::Converged,
            KrylovStatus::Stagnated => SolveStatus::Stagnated,
            KrylovStatus::MaxIter => SolveStatus::MaxIter,
            KrylovStatus::Breakdown => SolveStatus::Breakdown,
        };
        self.finish(s, log.rel_residuals, log.iterations, status, SolverKind::Gmres)
    }

    fn finish(
        &self,
        s: ComplexField<T>,
        history: Vec<T>,
        iterations: usize,
        status: SolveStatus,
        solver: SolverKind,
    ) -> Result<(SField<T>, ConvergenceLog<T>)> {
        let (final_residual, final_rel) = if status == SolveStatus::Diverged {
            (T::infinity(), T::infinity())
        } else {
            let r = self.residual(&s)?;
            let rel = if r.rhs_l2 == T::zero() { r.l2 } else { r.l2 / r.rhs_l2 };
            (r.inf, rel)
        };
        log::info!(
            "{solver} solve at k = {}, eps = {}: {status} after {iterations} iterations, residual {:.3e}",
            self.cfg.k,
            self.cfg.eps,
            final_residual.to_f64_lossy()
        );
        Ok((
            SField { s },
            ConvergenceLog {
                solver,
                history,
                iterations,
                status,
                final_residual,
                final_rel_residual_l2: final_rel,
            },
        ))
    }

    /// Boundary decay of the solution in both spaces, with `max|S|`.
    pub fn decay_of(&self, s: &SField<T>) -> (crate::grid::BoundaryDecay<T>, T) {
        (boundary_decay(&s.s), max_abs(s.s.values()))
    }
}

/// [`DbarProblem::apply_a`] on column-major flattened vectors.
pub struct DbarOperator<'a, T: Real> {
    problem: &'a DbarProblem<T>,
}

impl<T: Real> LinearOperator<T> for DbarOperator<'_, T> {
    fn dim(&self) -> usize {
        self.problem.grid.len()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let s = ComplexField::from_column_major(self.problem.grid.clone(), Space::Spectral, x);
        let out = self
            .problem
            .apply_a(&s)
            .expect("spectral input by construction")
            .to_column_major();
        y.copy_from_slice(&out);
    }
}
