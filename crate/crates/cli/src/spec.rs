//! Run specification: a line-oriented `key = value` text file.
//!
//! Blank lines and `#` comments are ignored. Reals accept plain decimal
//! literals or fractions (`1/128`); complex values are written `re+imi`
//! (`0.5-0.25i`, `1/16+1/8i`, or a bare real). Paths are kept as written and
//! resolved against the directory of the spec file only when the run starts.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use dbar_core::{PotentialKind, SolveConfig, SolverKind, C64};

use crate::CliError;

/// Every key, in canonical order.
pub const KEYS: &[&str] = &[
    "L_x",
    "L_y",
    "N_x",
    "N_y",
    "potential",
    "eps",
    "k",
    "k_list",
    "solver",
    "fp_tol",
    "gmres_rtol",
    "max_iter",
    "restart",
    "divergence_guard",
    "M",
    "out_dir",
    "outputs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Output {
    S,
    Phi1,
    Phi2,
    Reflection,
    Diagnostics,
}

impl Output {
    pub const ALL: [Output; 5] = [Output::S, Output::Phi1, Output::Phi2, Output::Reflection, Output::Diagnostics];

    fn name(self) -> &'static str {
        match self {
            Output::S => "S",
            Output::Phi1 => "Phi1",
            Output::Phi2 => "Phi2",
            Output::Reflection => "Reflection",
            Output::Diagnostics => "Diagnostics",
        }
    }

    fn is_field(self) -> bool {
        matches!(self, Output::S | Output::Phi1 | Output::Phi2)
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where to solve: one spectral point, or a sweep over several.
#[derive(Debug, Clone, PartialEq)]
pub enum KSelection {
    Single(C64),
    List(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub l_x: f64,
    pub l_y: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub potential: PotentialKind,
    pub eps: f64,
    pub k: KSelection,
    pub solver: SolverKind,
    pub fp_tol: f64,
    pub gmres_rtol: f64,
    pub max_iter: usize,
    pub restart: Option<usize>,
    pub divergence_guard: f64,
    pub m: usize,
    pub out_dir: PathBuf,
    pub outputs: BTreeSet<Output>,
    /// Directory that relative paths are taken from; not part of the text form.
    pub base_dir: PathBuf,
}

fn spec_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Spec { line, msg: msg.into() }
}

/// Parses a real literal or a fraction `a/b` of real literals.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    Some(v)
}

/// Parses `re`, `imi`, or `re±imi`, where each part is a real or a fraction.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return Some(C64::new(parse_real(&s)?, 0.0));
    };
    // split at the last sign that is neither leading nor part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&j| matches!(bytes[j], b'+' | b'-') && !matches!(bytes[j - 1], b'e' | b'E' | b'/'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => parse_real(t),
    };
    match split {
        Some(j) => Some(C64::new(parse_real(&body[..j])?, imag(&body[j..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

/// Shortest text that parses back to exactly `v`.
fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", fmt_real(z.re), fmt_real(z.im.abs()))
}

impl RunSpec {
    /// Reads and parses a spec file; relative paths will resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses spec text whose relative paths are relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut values: Vec<Option<(usize, String)>> = vec![None; KEYS.len()];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| spec_err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|&k| k == key)
                .ok_or_else(|| spec_err(line_no, format!("unknown key `{key}`")))?;
            if values[slot].is_some() {
                return Err(spec_err(line_no, format!("duplicate key `{key}`")));
            }
            values[slot] = Some((line_no, value.trim().to_string()));
        }
        let get = |key: &str| -> Option<(usize, &str)> {
            let slot = KEYS.iter().position(|&k| k == key).expect("known key");
            values[slot].as_ref().map(|(l, v)| (*l, v.as_str()))
        };
        let required = |key: &str| get(key).ok_or_else(|| spec_err(0, format!("missing required key `{key}`")));
        let real = |key: &str, default: Option<f64>| -> Result<f64, CliError> {
            match (get(key), default) {
                (Some((l, v)), _) => parse_real(v).ok_or_else(|| spec_err(l, format!("`{key}`: not a real number: `{v}`"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(spec_err(0, format!("missing required key `{key}`"))),
            }
        };
        let count = |key: &str, default: Option<usize>| -> Result<usize, CliError> {
            match (get(key), default) {
                (Some((l, v)), _) => v
                    .parse::<usize>()
                    .map_err(|_| spec_err(l, format!("`{key}`: not a non-negative integer: `{v}`"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(spec_err(0, format!("missing required key `{key}`"))),
            }
        };

        let potential = {
            let (l, v) = required("potential")?;
            match v {
                "gaussian" => PotentialKind::Gaussian,
                "anisotropic" => PotentialKind::AnisotropicGaussian,
                _ => match v.strip_prefix("file:") {
                    Some(p) if !p.trim().is_empty() => PotentialKind::FromFile(PathBuf::from(p.trim())),
                    _ => {
                        return Err(spec_err(
                            l,
                            format!("`potential`: expected gaussian, anisotropic or file:PATH, got `{v}`"),
                        ))
                    }
                },
            }
        };

        let k = match (get("k"), get("k_list")) {
            (Some(_), Some((l, _))) => return Err(spec_err(l, "`k` and `k_list` are mutually exclusive")),
            (None, None) => return Err(spec_err(0, "one of `k` or `k_list` is required")),
            (Some((l, v)), None) => {
                KSelection::Single(parse_complex(v).ok_or_else(|| spec_err(l, format!("`k`: not a complex number: `{v}`")))?)
            }
            (None, Some((l, v))) => {
                let list = v
                    .split(',')
                    .map(|t| parse_complex(t).ok_or_else(|| spec_err(l, format!("`k_list`: bad entry `{}`", t.trim()))))
                    .collect::<Result<Vec<_>, _>>()?;
                KSelection::List(list)
            }
        };

        let solver = match get("solver") {
            None | Some((_, "gmres")) => SolverKind::Gmres,
            Some((_, "fixed_point")) => SolverKind::FixedPoint,
            Some((l, v)) => return Err(spec_err(l, format!("`solver`: expected gmres or fixed_point, got `{v}`"))),
        };

        let restart = match get("restart") {
            None | Some((_, "none")) => None,
            Some((l, v)) => Some(
                v.parse::<usize>()
                    .map_err(|_| spec_err(l, format!("`restart`: expected `none` or an integer, got `{v}`")))?,
            ),
        };

        let outputs = match get("outputs") {
            None => match k {
                KSelection::Single(_) => Output::ALL.into_iter().collect(),
                KSelection::List(_) => [Output::Reflection, Output::Diagnostics].into_iter().collect(),
            },
            Some((l, v)) => {
                let mut set = BTreeSet::new();
                for t in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let o = Output::ALL
                        .into_iter()
                        .find(|o| o.name() == t)
                        .ok_or_else(|| spec_err(l, format!("`outputs`: unknown output `{t}`")))?;
                    set.insert(o);
                }
                set
            }
        };

        let defaults = SolveConfig::new(1.0, C64::new(0.0, 0.0), solver);
        let spec = RunSpec {
            l_x: real("L_x", None)?,
            l_y: real("L_y", None)?,
            n_x: count("N_x", None)?,
            n_y: count("N_y", None)?,
            potential,
            eps: real("eps", None)?,
            k,
            solver,
            fp_tol: real("fp_tol", Some(defaults.fp_tol))?,
            gmres_rtol: real("gmres_rtol", Some(defaults.gmres_rtol))?,
            max_iter: count("max_iter", Some(defaults.max_iter))?,
            restart,
            divergence_guard: real("divergence_guard", Some(defaults.divergence_guard))?,
            m: count("M", Some(defaults.m))?,
            out_dir: PathBuf::from(required("out_dir")?.1),
            outputs,
            base_dir: base.to_path_buf(),
        };
        spec.check()?;
        Ok(spec)
    }

    /// Consistency checks beyond what parsing enforces; numerical ranges are
    /// left to the solver configuration.
    fn check(&self) -> Result<(), CliError> {
        if let KSelection::List(list) = &self.k {
            if list.is_empty() {
                return Err(spec_err(0, "`k_list` is empty"));
            }
            if let Some(o) = self.outputs.iter().find(|o| o.is_field()) {
                return Err(spec_err(0, format!("output `{o}` needs a single `k`, not `k_list`")));
            }
        }
        self.solve_config(C64::new(0.0, 0.0)).validate().map_err(CliError::Core)
    }

    /// `path` relative to the spec file, unless it is absolute.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    /// The potential with any file path resolved.
    pub fn resolved_potential(&self) -> PotentialKind {
        match &self.potential {
            PotentialKind::FromFile(p) => PotentialKind::FromFile(self.resolve(p)),
            other => other.clone(),
        }
    }

    /// Solver settings at spectral point `k`.
    pub fn solve_config(&self, k: C64) -> SolveConfig<f64> {
        SolveConfig {
            eps: self.eps,
            k,
            m: self.m,
            solver: self.solver,
            fp_tol: self.fp_tol,
            gmres_rtol: self.gmres_rtol,
            max_iter: self.max_iter,
            gmres_restart: self.restart,
            divergence_guard: self.divergence_guard,
        }
    }

    /// Canonical text: every key in fixed order, values in shortest exact form.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("L_x", fmt_real(self.l_x));
        put("L_y", fmt_real(self.l_y));
        put("N_x", self.n_x.to_string());
        put("N_y", self.n_y.to_string());
        put("potential", self.potential.to_string());
        put("eps", fmt_real(self.eps));
        match &self.k {
            KSelection::Single(k) => put("k", fmt_complex(*k)),
            KSelection::List(ks) => put("k_list", ks.iter().map(|&k| fmt_complex(k)).collect::<Vec<_>>().join(", ")),
        }
        put("solver", self.solver.to_string());
        put("fp_tol", fmt_real(self.fp_tol));
        put("gmres_rtol", fmt_real(self.gmres_rtol));
        put("max_iter", self.max_iter.to_string());
        put("restart", self.restart.map_or("none".to_string(), |r| r.to_string()));
        put("divergence_guard", fmt_real(self.divergence_guard));
        put("M", self.m.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put(
            "outputs",
            self.outputs.iter().map(|o| o.name()).collect::<Vec<_>>().join(", "),
        );
        out
    }
}
