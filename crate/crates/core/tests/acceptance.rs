//! Acceptance suite: one PASS/FAIL/SKIP line per criterion A1–A10.
//!
//! `DBAR_SKIP_HEAVY=1` skips the two 1024-mode runs (A7 and the k=1 part of
//! A8). `DBAR_ACCEPTANCE_STRICT=1` makes any FAIL produce a non-zero exit;
//! by default the verdicts are only printed, so that `cargo test` goes on to
//! run the remaining suites.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::{compensated_sum, dense_solve, max_diff, polar_singular_transform, random_vec, Dense, Pole, C};
use dbar_core::regularization::DEFAULT_TERMS;
use dbar_core::{
    gmres, inv_ft_div_xi, inv_ft_div_xibar_shifted, oscillatory_factor, phi1_from_s, reflection, singular_point,
    CGOSolution, ComplexField, DbarProblem, EtaFamily, FnOperator, GmresOptions, Grid2D, KrylovStatus,
    LinearOperator, Potential, PotentialKind, SField, SolveConfig, SolveStatus, SolverKind,
};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn env_flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| !v.is_empty() && v != "0")
}

fn grid(l: (f64, f64), n: (usize, usize)) -> Arc<Grid2D<f64>> {
    Grid2D::shared(l.0, l.1, n.0, n.1).unwrap()
}

/// A converged run kept for the D-bar residual check (A9).
struct Run {
    label: String,
    problem: DbarProblem<f64>,
    s: SField<f64>,
}

fn solve(
    label: &str,
    pot: &Arc<Potential<f64>>,
    fam: &Arc<EtaFamily<f64>>,
    eps: f64,
    k: f64,
    solver: SolverKind,
) -> (Run, dbar_core::ConvergenceLog<f64>) {
    let cfg = SolveConfig::new(eps, C::new(k, 0.0), solver);
    let problem = DbarProblem::new(pot.clone(), cfg, fam.clone()).unwrap();
    let (s, log) = problem.solve().unwrap();
    (
        Run {
            label: label.to_string(),
            problem,
            s,
        },
        log,
    )
}

/// Coefficient of determination of a least-squares line through `ys` against their index.
fn r_squared(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn a1() -> Outcome {
    let g = grid((3.0, 3.0), (256, 256));
    let f = ComplexField::from_physical(g.clone(), |z: C| C::new((-z.norm_sqr() / 4.0).exp(), 0.0));
    let h = ComplexField::from_spectral(g.clone(), |xi: C| C::new(2.0 * (-xi.norm_sqr()).exp(), 0.0));
    let fwd = f.fft2().unwrap().max_diff(&h).unwrap();
    let inv = h.ifft2().unwrap().max_diff(&f).unwrap();
    let edge = (-(3.0 * std::f64::consts::PI).powi(2) / 4.0).exp();
    judge(
        fwd <= 1e-12 && inv <= 1e-12,
        format!("256², L=3: forward {fwd:.2e}, inverse {inv:.2e} (tol 1e-12; e^(-|z|²/4) at the edge is {edge:.1e})"),
    )
}

fn a2() -> Outcome {
    let g = grid((4.0, 4.0), (64, 64));
    let fam = |m: usize| Arc::new(EtaFamily::build(m, &g).unwrap());
    let gauss = |xi: C, c: C| (-(xi - c).norm_sqr()).exp();

    let c0 = C::new(0.3, 0.2);
    let f0 = move |xi: C| gauss(xi, c0) * (C::new(1.0, 0.0) + xi.conj() * 0.5);
    let s0 = ComplexField::from_spectral(g.clone(), f0);
    let o0 = polar_singular_transform(&g, f0, Pole::Xi, C::new(0.0, 0.0), c0.norm() + 6.5, 120, 256);

    // shifted pole on the lattice: ξ* = -2ik̄/ε = 1/2 - i/4
    let (k1, e1) = (C::new(1.0, -2.0) / 16.0, 0.5);
    let xs1 = singular_point(&g, k1, e1).unwrap().xi_star;
    let c1 = C::new(-0.2, 0.4);
    let f1 = move |xi: C| gauss(xi, c1) * (C::new(1.0, 0.0) + xi * 0.3);
    let s1 = ComplexField::from_spectral(g.clone(), f1);
    let o1 = polar_singular_transform(&g, f1, Pole::XiBar, xs1, (c1 - xs1).norm() + 6.5, 120, 256);

    // shifted pole outside the spectral box: ξ* = 10i
    let (k2, e2) = (C::new(-2.5, 0.0), 0.5);
    let xs2 = singular_point(&g, k2, e2).unwrap().xi_star;
    let c2 = C::new(0.3, -0.1);
    let f2 = move |xi: C| gauss(xi, c2) * C::new(1.0, 0.5);
    let s2 = ComplexField::from_spectral(g.clone(), f2);
    let o2 = polar_singular_transform(&g, f2, Pole::XiBar, xs2, (c2 - xs2).norm() + 6.5, 240, 512);

    let errors = |m: usize| {
        let fm = fam(m);
        [
            max_diff(inv_ft_div_xi(&s0, &fm).unwrap().values(), &o0),
            max_diff(inv_ft_div_xibar_shifted(&s1, k1, e1, &fm).unwrap().values(), &o1),
            max_diff(inv_ft_div_xibar_shifted(&s2, k2, e2, &fm).unwrap().values(), &o2),
        ]
    };
    let e = errors(DEFAULT_TERMS);
    let e8 = errors(8);
    judge(
        e.iter().all(|&x| x <= 1e-8),
        format!(
            "64², L=4, M={DEFAULT_TERMS}: div_xi {:.2e}, shifted on-grid {:.2e}, shifted off-grid {:.2e} (tol 1e-8); \
             with M=8: {:.2e}, {:.2e}, {:.2e}",
            e[0], e[1], e[2], e8[0], e8[1], e8[2]
        ),
    )
}

fn a3(runs: &mut Vec<Run>) -> Outcome {
    let g = grid((3.0, 3.0), (256, 256));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [PotentialKind::Gaussian, PotentialKind::AnisotropicGaussian] {
        let pot = Arc::new(Potential::sample(&kind, &g).unwrap());
        for eps in [1.0, 0.5] {
            let (run, log) = solve(&format!("{kind} ε={eps} k=0 fixed point"), &pot, &fam, eps, 0.0, SolverKind::FixedPoint);
            let logs: Vec<f64> = log.history.iter().map(|d| d.log10()).collect();
            let r2 = r_squared(&logs[logs.len() / 3..]);
            let good = log.status == SolveStatus::Converged && log.final_residual <= 1e-10 && r2 >= 0.99;
            ok &= good;
            parts.push(format!(
                "{kind} ε={eps}: {} in {} it, residual {:.2e}, R² {:.4}",
                log.status, log.iterations, log.final_residual, r2
            ));
            if log.status == SolveStatus::Converged {
                runs.push(run);
            }
        }
    }
    judge(ok, parts.join("; "))
}

fn a4() -> Outcome {
    let g = grid((3.0, 3.0), (512, 512));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let pot = Arc::new(Potential::sample(&PotentialKind::Gaussian, &g).unwrap());
    let (_, log) = solve("", &pot, &fam, 0.25, 0.0, SolverKind::FixedPoint);
    judge(
        log.status == SolveStatus::Diverged,
        format!("Gaussian ε=1/4 k=0, 512²: {} after {} iterations", log.status, log.iterations),
    )
}

/// A5 and A6 share the ε = 1/4 runs on the 512² grid.
fn a5_a6(runs: &mut Vec<Run>) -> (Outcome, Outcome) {
    let g = grid((3.0, 3.0), (512, 512));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let pot = Arc::new(Potential::sample(&PotentialKind::AnisotropicGaussian, &g).unwrap());
    let mut counts = Vec::new();
    let mut a5 = None;
    let mut a6_ok = true;
    for (k, need) in [(0.0, 15.0), (1.0, 5.0)] {
        let (fp, fp_log) = solve(&format!("q2 ε=1/4 k={k} fixed point"), &pot, &fam, 0.25, k, SolverKind::FixedPoint);
        let (gm, gm_log) = solve(&format!("q2 ε=1/4 k={k} GMRES"), &pot, &fam, 0.25, k, SolverKind::Gmres);
        let ratio = fp_log.iterations as f64 / gm_log.iterations as f64;
        let good = gm_log.is_success(1e-12)
            && (8..=30).contains(&gm_log.iterations)
            && fp_log.status == SolveStatus::Converged
            && ratio >= need;
        a6_ok &= good;
        counts.push(format!(
            "k={k}: GMRES {} it ({}), fixed point {} it ({}), ratio {ratio:.1} (need ≥{need})",
            gm_log.iterations, gm_log.status, fp_log.iterations, fp_log.status
        ));
        if k == 1.0 {
            let diff = fp.s.s.max_diff(&gm.s.s).unwrap();
            let both = fp_log.status == SolveStatus::Converged && gm_log.is_success(1e-12);
            a5 = Some(judge(
                both && diff <= 1e-11,
                format!("q2 ε=1/4 k=1, 512²: max|S_fp - S_gmres| = {diff:.2e} (tol 1e-11)"),
            ));
        }
        if fp_log.status == SolveStatus::Converged {
            runs.push(fp);
        }
        if gm_log.is_success(1e-12) {
            runs.push(gm);
        }
    }
    (a5.unwrap(), judge(a6_ok, counts.join("; ")))
}

fn a7() -> Outcome {
    let g = grid((3.0, 3.0), (1024, 1024));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let pot = Arc::new(Potential::sample(&PotentialKind::AnisotropicGaussian, &g).unwrap());
    let (run, log) = solve("", &pot, &fam, 1.0 / 128.0, 0.0, SolverKind::Gmres);
    let (decay, max_s) = run.problem.decay_of(&run.s);
    let order = max_s.log10();
    let iters_ok = (90..=140).contains(&log.iterations);
    let res_ok = log.is_success(1e-12) && log.final_residual <= 1e-12;
    let order_ok = (3.5..4.5).contains(&order);
    let decay_ok = decay.decay_spec <= 1e-13 && decay.decay_phys <= 1e-13;
    judge(
        iters_ok && res_ok && order_ok && decay_ok,
        format!(
            "q2 ε=1/128 k=0, 1024²: {} in {} it [{}], residual {:.2e} [{}], max|S| {:.3e} [{}], \
             decay S {:.1e} / F⁻¹S {:.1e} [{}]",
            log.status,
            log.iterations,
            pass_word(iters_ok),
            log.final_residual,
            pass_word(res_ok),
            max_s,
            pass_word(order_ok),
            decay.decay_spec,
            decay.decay_phys,
            pass_word(decay_ok)
        ),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn a8(heavy: bool) -> Outcome {
    let g = grid((3.0, 3.0), (64, 64));
    let zero = Arc::new(Potential::zero(&g));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let (run, _) = solve("", &zero, &fam, 0.5, 1.0, SolverKind::Gmres);
    let phi1 = phi1_from_s(&run.s, run.problem.div_xi()).unwrap();
    let r0 = reflection(&phi1, &zero, C::new(1.0, 0.0), 0.5).unwrap().r_bar;
    let zero_ok = r0 == C::new(0.0, 0.0);
    if !heavy {
        return Outcome {
            verdict: if zero_ok { Verdict::Skip } else { Verdict::Fail },
            detail: format!("q=0: r = {r0} [{}]; k=1 ε=1/128 run skipped (DBAR_SKIP_HEAVY)", pass_word(zero_ok)),
        };
    }

    let g = grid((2.0, 1.0), (512, 1024));
    let fam = Arc::new(EtaFamily::build(DEFAULT_TERMS, &g).unwrap());
    let pot = Arc::new(Potential::sample(&PotentialKind::AnisotropicGaussian, &g).unwrap());
    let (eps, k) = (1.0 / 128.0, C::new(1.0, 0.0));
    let (run, log) = solve("", &pot, &fam, eps, 1.0, SolverKind::Gmres);
    let phi1 = phi1_from_s(&run.s, run.problem.div_xi()).unwrap();
    let r = reflection(&phi1, &pot, k, eps).unwrap().r_bar;
    let osc = oscillatory_factor(&g, k, eps);
    let terms = pot
        .q_conj
        .values()
        .iter()
        .zip(phi1.values())
        .zip(osc.values())
        .map(|((q, f), e)| q * f * e);
    let comp = compensated_sum(terms) * g.dx() * g.dy() * 2.0 / (eps * std::f64::consts::PI);
    let rel = (r - comp).norm() / comp.norm();
    let small_ok = log.is_success(1e-12) && r.norm() <= 1e-8;
    let quad_ok = rel <= 1e-14;
    judge(
        zero_ok && small_ok && quad_ok,
        format!(
            "q=0: r = {r0} [{}]; q2 ε=1/128 k=1, 512×1024, L=(2,1): {} in {} it (relative residual {:.1e}), \
             |r| = {:.2e} [{}], \
             mean vs compensated sum {rel:.1e} relative [{}]",
            pass_word(zero_ok),
            log.status,
            log.iterations,
            log.final_rel_residual_l2,
            r.norm(),
            pass_word(small_ok),
            pass_word(quad_ok)
        ),
    )
}

fn a9(runs: &[Run]) -> Outcome {
    let mut ok = !runs.is_empty();
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    for run in runs {
        let sol = CGOSolution::reconstruct(&run.problem, &run.s).unwrap();
        let ratio = sol.dbar_residual / (1e-6 * (1.0 + sol.phi1.max_abs()));
        ok &= ratio <= 1.0;
        if ratio >= worst {
            worst = ratio;
            worst_label = format!("{} (residual {:.2e})", run.label, sol.dbar_residual);
        }
    }
    judge(
        ok,
        format!(
            "{} converged runs at ε ≥ 1/4; worst residual/bound = {worst:.1e}: {worst_label}",
            runs.len()
        ),
    )
}

fn a10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let b = random_vec(&mut rng, 40);
    let id = FnOperator::new(40, |x: &[C], y: &mut [C]| y.copy_from_slice(x));
    let (x, log) = gmres(&id, &b, &GmresOptions::default()).unwrap();
    let identity_ok = log.status == KrylovStatus::Converged && log.iterations == 1 && max_diff(&x, &b) <= 1e-15;

    let mut dense_err = 0.0f64;
    for _ in 0..20 {
        let mut a = random_vec(&mut rng, 64);
        for i in 0..8 {
            a[i * 8 + i] += 3.0;
        }
        let op = Dense { n: 8, a };
        let b = random_vec(&mut rng, 8);
        let (x, _) = gmres(&op, &b, &GmresOptions::default()).unwrap();
        dense_err = dense_err.max(max_diff(&x, &dense_solve(&op.a, &b)));
    }

    let mut a = random_vec(&mut rng, 80 * 80);
    for i in 0..80 {
        a[i * 80 + i] += 1.5;
    }
    let op = Dense { n: 80, a };
    let b = random_vec(&mut rng, op.dim());
    let opts = GmresOptions {
        track_orthogonality: true,
        ..GmresOptions::default()
    };
    let (_, log) = gmres(&op, &b, &opts).unwrap();
    let monotone = log.rel_residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let ortho = log.orthogonality_loss.unwrap();
    judge(
        identity_ok && dense_err <= 1e-12 && monotone && ortho <= 1e-10,
        format!(
            "identity one-step [{}], dense 8×8 max error {dense_err:.1e}, monotone residuals [{}], \
             orthonormality defect {ortho:.1e} ({} iterations)",
            pass_word(identity_ok),
            pass_word(monotone),
            log.iterations
        ),
    )
}

#[derive(Default)]
struct Report {
    verdicts: Vec<Verdict>,
}

impl Report {
    fn run(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let outcome = f();
        self.record(id, title, outcome, t.elapsed().as_secs_f64());
    }

    fn record(&mut self, id: &str, title: &str, o: Outcome, secs: f64) {
        let word = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        println!("{id:<4}{word}  {title} ({secs:.1}s): {}", o.detail);
        self.verdicts.push(o.verdict);
    }

    fn count(&self, v: Verdict) -> usize {
        self.verdicts.iter().filter(|&&x| x == v).count()
    }
}

fn main() {
    let heavy = !env_flag("DBAR_SKIP_HEAVY");
    let strict = env_flag("DBAR_ACCEPTANCE_STRICT");
    let mut runs = Vec::new();
    let mut report = Report::default();

    report.run("A1", "Gaussian transform pair", a1);
    report.run("A2", "regularized singular transforms vs quadrature", a2);
    report.run("A3", "fixed-point convergence", || a3(&mut runs));
    report.run("A4", "fixed-point divergence regime", a4);
    let t = Instant::now();
    let (o5, o6) = a5_a6(&mut runs);
    let secs = t.elapsed().as_secs_f64();
    report.record("A5", "fixed point vs GMRES agreement", o5, secs);
    report.record("A6", "GMRES efficiency", o6, secs);
    if heavy {
        report.run("A7", "deep semiclassical run", a7);
    } else {
        let skipped = Outcome {
            verdict: Verdict::Skip,
            detail: "1024² run skipped (DBAR_SKIP_HEAVY)".into(),
        };
        report.record("A7", "deep semiclassical run", skipped, 0.0);
    }
    report.run("A8", "reflection coefficient", || a8(heavy));
    report.run("A9", "D-bar residual of reconstructed solutions", || a9(&runs));
    report.run("A10", "Krylov unit suite", a10);

    let fail = report.count(Verdict::Fail);
    println!(
        "acceptance: {} passed, {fail} failed, {} skipped",
        report.count(Verdict::Pass),
        report.count(Verdict::Skip)
    );
    if strict && fail > 0 {
        std::process::exit(1);
    }
}
