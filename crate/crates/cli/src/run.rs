//! Executes a [`RunSpec`] and writes its outputs.
//!
//! Files written into `out_dir`:
//! - `S.fld` (spectral), `Phi1.fld`, `Phi2.fld` (physical) for a successful single-k run;
//! - `convergence.csv` (`iter,delta_or_relres`) and `summary.txt` for `Diagnostics`;
//! - `reflection.csv` (`k_re,k_im,rbar_re,rbar_im,status,iters,residual`) for `Reflection`.
//!
//! Reals are printed with 17 significant digits. If any step fails, every
//! file this run created is removed again.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use dbar_core::regularization::EtaFamily;
use dbar_core::{
    diagnostics, fld, k_sweep, reflection, CGOSolution, ConvergenceLog, DbarProblem, Diagnostics, Field, Grid,
    Potential, ReflectionSample, StagnationRule, SweepEntry, C64,
};
use log::{info, warn};

use crate::spec::{KSelection, Output, RunSpec};
use crate::{exit, CliError};

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub exit_code: i32,
    /// Files written, in creation order.
    pub written: Vec<PathBuf>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn complex(z: C64) -> String {
    format!("{}{}{}i", num(z.re), if z.im.is_sign_negative() { "-" } else { "+" }, num(z.im.abs()))
}

/// Tracks files created by this run so a failure can take them back.
struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn field(&mut self, name: &str, field: &Field) -> Result<(), CliError> {
        let p = self.path(name);
        fld::write_field(&p, field)?;
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.path(name);
        let err = |source| CliError::Csv { path: p.clone(), source };
        let mut w = csv::Writer::from_path(&p).map_err(err)?;
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    fn roll_back(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs `spec`. Solver failures are reported through the exit code; any
/// error removes the partial outputs before it is returned.
pub fn execute(spec: &RunSpec) -> Result<RunReport, CliError> {
    let grid = Arc::new(Grid::new(spec.l_x, spec.l_y, spec.n_x, spec.n_y)?);
    let potential = Arc::new(Potential::sample(&spec.resolved_potential(), &grid)?);
    let mut out = OutputSet::create(&spec.resolve(&spec.out_dir))?;
    let result = match &spec.k {
        KSelection::Single(k) => single(spec, &potential, *k, &mut out),
        KSelection::List(ks) => sweep(spec, &potential, ks, &mut out),
    };
    match result {
        Ok(exit_code) => Ok(RunReport {
            exit_code,
            written: out.written,
        }),
        Err(e) => {
            out.roll_back();
            Err(e)
        }
    }
}

fn floor() -> f64 {
    StagnationRule::<f64>::default().floor
}

struct Solved {
    sol: CGOSolution<f64>,
    diag: Diagnostics<f64>,
    sample: ReflectionSample<f64>,
}

fn single(spec: &RunSpec, pot: &Arc<Potential<f64>>, k: C64, out: &mut OutputSet) -> Result<i32, CliError> {
    let started = Instant::now();
    let problem = DbarProblem::with_new_family(pot.clone(), spec.solve_config(k))?;
    let (s, log) = problem.solve()?;
    let success = log.is_success(floor());
    let solved = if success {
        let sol = CGOSolution::reconstruct(&problem, &s)?;
        let diag = diagnostics(&problem, &s, &sol)?;
        let sample = reflection(&sol.phi1, pot, k, spec.eps)?;
        Some(Solved { sol, diag, sample })
    } else {
        warn!("solve at k = {k} stopped: {} after {} iterations", log.status, log.iterations);
        None
    };
    let wall = started.elapsed().as_secs_f64();
    info!("{} after {} iterations in {wall:.2} s", log.status, log.iterations);

    if let Some(solved) = &solved {
        if spec.outputs.contains(&Output::S) {
            out.field("S.fld", &s.s)?;
        }
        if spec.outputs.contains(&Output::Phi1) {
            out.field("Phi1.fld", &solved.sol.phi1)?;
        }
        if spec.outputs.contains(&Output::Phi2) {
            out.field("Phi2.fld", &solved.sol.phi2)?;
        }
    }
    if spec.outputs.contains(&Output::Reflection) {
        let row = reflection_row(k, solved.as_ref().map(|x| &x.sample), Some(&log));
        out.csv("reflection.csv", REFLECTION_HEADER, &[row])?;
    }
    if spec.outputs.contains(&Output::Diagnostics) {
        let rows: Vec<_> = log
            .history
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![(i + 1).to_string(), num(v)])
            .collect();
        out.csv("convergence.csv", &["iter", "delta_or_relres"], &rows)?;
        out.text("summary.txt", &single_summary(spec, k, &log, solved.as_ref(), wall))?;
    }
    Ok(if success { exit::SUCCESS } else { exit::SOLVER_FAILURE })
}

const REFLECTION_HEADER: &[&str] = &["k_re", "k_im", "rbar_re", "rbar_im", "status", "iters", "residual"];

fn reflection_row(k: C64, sample: Option<&ReflectionSample<f64>>, log: Option<&ConvergenceLog<f64>>) -> Vec<String> {
    let r = sample.map_or(C64::new(f64::NAN, f64::NAN), |s| s.r_bar);
    vec![
        num(k.re),
        num(k.im),
        num(r.re),
        num(r.im),
        log.map_or("error".to_string(), |l| l.status.to_string()),
        log.map_or(0, |l| l.iterations).to_string(),
        num(log.map_or(f64::NAN, |l| l.final_residual)),
    ]
}

fn single_summary(spec: &RunSpec, k: C64, log: &ConvergenceLog<f64>, solved: Option<&Solved>, wall: f64) -> String {
    let nan = f64::NAN;
    let d = solved.map(|s| s.diag);
    let mut lines = header_lines(spec);
    lines.extend([
        ("k", complex(k)),
        ("status", log.status.to_string()),
        ("iterations", log.iterations.to_string()),
        ("residual_inf", num(log.final_residual)),
        ("residual_rel_l2", num(log.final_rel_residual_l2)),
        ("decay_S_spectral", num(d.map_or(nan, |d| d.decay.decay_spec))),
        ("decay_S_physical", num(d.map_or(nan, |d| d.decay.decay_phys))),
        ("dbar_residual", num(d.map_or(nan, |d| d.dbar_residual))),
        ("max_abs_S", num(d.map_or(nan, |d| d.max_s))),
        ("saturation_floor", num(d.map_or(nan, |d| d.saturation_floor))),
        (
            "rbar",
            complex(solved.map_or(C64::new(nan, nan), |s| s.sample.r_bar)),
        ),
        ("wall_time_s", format!("{wall:.3}")),
    ]);
    render(&lines)
}

fn header_lines(spec: &RunSpec) -> Vec<(&'static str, String)> {
    vec![
        ("grid", format!("{}x{}", spec.n_x, spec.n_y)),
        ("L", format!("{}x{}", spec.l_x, spec.l_y)),
        ("potential", spec.potential.to_string()),
        ("eps", num(spec.eps)),
        ("M", spec.m.to_string()),
        ("solver", spec.solver.to_string()),
    ]
}

fn render(lines: &[(&str, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn sweep(spec: &RunSpec, pot: &Arc<Potential<f64>>, ks: &[C64], out: &mut OutputSet) -> Result<i32, CliError> {
    let started = Instant::now();
    let family = Arc::new(EtaFamily::build(spec.m, pot.grid())?);
    let entries: Vec<SweepEntry<f64>> = k_sweep(pot, &family, &spec.solve_config(C64::new(0.0, 0.0)), ks)?;
    let wall = started.elapsed().as_secs_f64();
    let failed = entries.iter().filter(|e| !e.succeeded()).count();
    for e in entries.iter().filter(|e| !e.succeeded()) {
        match (&e.error, &e.log) {
            (Some(msg), _) => warn!("k = {}: {msg}", e.k),
            (None, Some(l)) => warn!("k = {}: {} after {} iterations", e.k, l.status, l.iterations),
            (None, None) => {}
        }
    }
    info!("{} of {} solves succeeded in {wall:.2} s", entries.len() - failed, entries.len());

    if spec.outputs.contains(&Output::Reflection) {
        let rows: Vec<_> = entries
            .iter()
            .map(|e| {
                let sample = e.sample.as_ref().filter(|_| e.succeeded());
                reflection_row(e.k, sample, e.log.as_ref())
            })
            .collect();
        out.csv("reflection.csv", REFLECTION_HEADER, &rows)?;
    }
    if spec.outputs.contains(&Output::Diagnostics) {
        let worst = entries
            .iter()
            .filter_map(|e| e.log.as_ref().map(|l| l.final_residual))
            .fold(0.0, f64::max);
        let mut lines = header_lines(spec);
        lines.extend([
            ("k_count", entries.len().to_string()),
            ("succeeded", (entries.len() - failed).to_string()),
            ("failed", failed.to_string()),
            ("max_residual_inf", num(worst)),
            ("wall_time_s", format!("{wall:.3}")),
        ]);
        out.text("summary.txt", &render(&lines))?;
    }
    Ok(if failed == 0 { exit::SUCCESS } else { exit::SOLVER_FAILURE })
}
