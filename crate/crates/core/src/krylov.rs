//! Matrix-free GMRES for complex linear systems.
//!
//! Arnoldi with modified Gram-Schmidt (plus one conditional second pass),
//! complex Givens rotations for the least-squares update, optional restarts.
//! No preconditioning.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{czero, l2_norm, Real};

/// A complex-linear map given only through its action on vectors.
pub trait LinearOperator<T: Real> {
    fn dim(&self) -> usize;

    /// `y = A x`; `y` has length `dim()` and its previous contents are overwritten.
    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]);
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(&[Complex<T>], &mut [Complex<T>])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovStatus {
    Converged,
    /// The residual stopped improving near the rounding floor; best iterate returned.
    Stagnated,
    MaxIter,
    /// The Krylov space became invariant before reaching the tolerance.
    Breakdown,
}

/// Plateau detection: once the relative residual is below `floor`, stop if it
/// fails to improve by the fraction `min_gain` over `window` iterations.
#[derive(Debug, Clone, Copy)]
pub struct StagnationRule<T> {
    pub floor: T,
    pub min_gain: T,
    pub window: usize,
}

impl<T: Real> Default for StagnationRule<T> {
    fn default() -> Self {
        Self {
            floor: T::lit(1e-12),
            min_gain: T::lit(0.01),
            window: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOptions<T> {
    /// Stop when `‖b - Ax‖₂ / ‖b‖₂` drops below this.
    pub rtol: T,
    /// Total number of operator applications inside Arnoldi.
    pub max_iter: usize,
    /// Krylov dimension per cycle; `None` runs full GMRES.
    pub restart: Option<usize>,
    pub stagnation: Option<StagnationRule<T>>,
    /// Measure `max |⟨v_i, v_j⟩ - δ_ij|` of each basis (costs O(m² n)).
    pub track_orthogonality: bool,
}

impl<T: Real> Default for GmresOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-14),
            max_iter: 500,
            restart: None,
            stagnation: Some(StagnationRule::default()),
            track_orthogonality: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovLog<T> {
    /// Relative residual estimate after every iteration.
    pub rel_residuals: Vec<T>,
    pub iterations: usize,
    pub status: KrylovStatus,
    /// `‖b - Ax‖₂ / ‖b‖₂` recomputed from the returned iterate.
    pub final_true_residual: T,
    /// Iteration index at which each restart cycle began.
    pub cycle_starts: Vec<usize>,
    /// Worst basis orthogonality defect, when tracked.
    pub orthogonality_loss: Option<T>,
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
}

fn axpy<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

/// Complex Givens rotation `[c s; -s̄ c]` zeroing `b` against `a`.
fn givens<T: Real>(a: Complex<T>, b: Complex<T>) -> (T, Complex<T>) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == T::zero() {
        return (T::one(), czero());
    }
    if na == T::zero() {
        return (T::zero(), Complex::new(T::one(), T::zero()));
    }
    let t = na.hypot(nb);
    (na / t, (a / na) * b.conj() / t)
}

#[inline]
fn rotate<T: Real>(c: T, s: Complex<T>, x: Complex<T>, y: Complex<T>) -> (Complex<T>, Complex<T>) {
    (x * c + s * y, -s.conj() * x + y * c)
}

fn orthogonality_defect<T: Real>(basis: &[Vec<Complex<T>>]) -> T {
    let mut worst = T::zero();
    for i in 0..basis.len() {
        for j in 0..=i {
            let mut d = dot(&basis[i], &basis[j]);
            if i == j {
                d = d - Complex::new(T::one(), T::zero());
            }
            worst = worst.max(d.norm());
        }
    }
    worst
}

/// Solves `A x = b` by GMRES starting from `x = 0`.
pub fn gmres<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    b: &[Complex<T>],
    opts: &GmresOptions<T>,
) -> Result<(Vec<Complex<T>>, KrylovLog<T>)> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::InvalidConfig(format!(
            "right-hand side has length {}, operator dimension is {n}",
            b.len()
        )));
    }
    if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("GMRES right-hand side"));
    }
    if !(opts.rtol > T::zero()) || opts.max_iter == 0 {
        return Err(Error::InvalidConfig("rtol must be positive and max_iter >= 1".into()));
    }

    let mut log = KrylovLog {
        rel_residuals: Vec::new(),
        iterations: 0,
        status: KrylovStatus::MaxIter,
        final_true_residual: T::zero(),
        cycle_starts: Vec::new(),
        orthogonality_loss: opts.track_orthogonality.then(T::zero),
    };
    let mut x = vec![czero::<T>(); n];
    let b_norm = l2_norm(b);
    if b_norm == T::zero() {
        log.status = KrylovStatus::Converged;
        return Ok((x, log));
    }

    let cycle_len = opts.restart.unwrap_or(opts.max_iter).clamp(1, n.max(1));
    let mut scratch = vec![czero::<T>(); n];
    let mut best = T::infinity();
    let mut since_gain = 0usize;
    let mut anchor = T::infinity();
    let mut first_cycle = true;

    'cycles: loop {
        // r = b - A x
        let mut r = b.to_vec();
        if !first_cycle {
            op.apply(&x, &mut scratch);
            for (ri, ai) in r.iter_mut().zip(&scratch) {
                *ri = *ri - *ai;
            }
        }
        first_cycle = false;
        let beta = l2_norm(&r);
        if !beta.is_finite() {
            log.status = KrylovStatus::Breakdown;
            break;
        }
        if beta / b_norm < opts.rtol {
            log.status = KrylovStatus::Converged;
            break;
        }
        log.cycle_starts.push(log.iterations);

        let inv = T::one() / beta;
        r.iter_mut().for_each(|v| *v = *v * inv);
        let mut basis = vec![r];
        // Hessenberg columns, already rotated to upper-triangular form
        let mut cols: Vec<Vec<Complex<T>>> = Vec::new();
        let mut rots: Vec<(T, Complex<T>)> = Vec::new();
        let mut g = vec![Complex::new(beta, T::zero())];
        let mut stop: Option<KrylovStatus> = None;

        for j in 0..cycle_len {
            log.iterations += 1;
            let mut w = vec![czero::<T>(); n];
            op.apply(&basis[j], &mut w);
            let w_norm0 = l2_norm(&w);

            let mut h = vec![czero::<T>(); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                axpy(-hij, v, &mut w);
                h[i] = hij;
            }
            let mut w_norm = l2_norm(&w);
            if w_norm < T::lit(0.7) * w_norm0 {
                for (i, v) in basis.iter().enumerate() {
                    let corr = dot(v, &w);
                    axpy(-corr, v, &mut w);
                    h[i] = h[i] + corr;
                }
                w_norm = l2_norm(&w);
            }
            h[j + 1] = Complex::new(w_norm, T::zero());

            for (i, &(c, s)) in rots.iter().enumerate() {
                let (a, bb) = rotate(c, s, h[i], h[i + 1]);
                h[i] = a;
                h[i + 1] = bb;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            let (a, _) = rotate(c, s, h[j], h[j + 1]);
            if a == czero() {
                // A maps the new direction into the existing span: the
                // triangular factor is singular and this column is unusable.
                log.rel_residuals.push(g[j].norm() / b_norm);
                stop = Some(KrylovStatus::Breakdown);
                break;
            }
            h[j] = a;
            h[j + 1] = czero();
            rots.push((c, s));
            let (g0, g1) = rotate(c, s, g[j], czero());
            g[j] = g0;
            g.push(g1);
            h.truncate(j + 1);
            cols.push(h);

            let rel = g1.norm() / b_norm;
            log.rel_residuals.push(rel);

            let breakdown = w_norm <= T::epsilon() * w_norm0 || w_norm == T::zero();
            if !rel.is_finite() {
                stop = Some(KrylovStatus::Breakdown);
            } else if rel < opts.rtol {
                stop = Some(KrylovStatus::Converged);
            } else if breakdown {
                stop = Some(KrylovStatus::Breakdown);
            } else if let Some(rule) = &opts.stagnation {
                if anchor.is_infinite() || rel <= anchor * (T::one() - rule.min_gain) {
                    anchor = rel;
                    since_gain = 0;
                } else {
                    since_gain += 1;
                }
                best = best.min(rel);
                if best < rule.floor && since_gain >= rule.window {
                    stop = Some(KrylovStatus::Stagnated);
                }
            }
            if stop.is_none() && log.iterations >= opts.max_iter {
                stop = Some(KrylovStatus::MaxIter);
            }
            if stop.is_some() {
                break;
            }
            let inv = T::one() / w_norm;
            w.iter_mut().for_each(|v| *v = *v * inv);
            basis.push(w);
        }

        if let Some(loss) = log.orthogonality_loss.as_mut() {
            *loss = loss.max(orthogonality_defect(&basis));
        }

        // back substitution R y = g
        let m = cols.len();
        let mut y = vec![czero::<T>(); m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                acc = acc - cols[jj][i] * *yj;
            }
            y[i] = acc / cols[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }

        if let Some(status) = stop {
            // The recurrence estimate can drift below the true residual in
            // ill-conditioned problems; confirm convergence from a fresh cycle.
            if status == KrylovStatus::Converged && log.iterations < opts.max_iter {
                continue 'cycles;
            }
            log.status = status;
            break 'cycles;
        }
    }

    op.apply(&x, &mut scratch);
    let res: Vec<_> = b.iter().zip(&scratch).map(|(bi, ai)| *bi - *ai).collect();
    log.final_true_residual = l2_norm(&res) / b_norm;
    Ok((x, log))
}
