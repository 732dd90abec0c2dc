//! Command-line front end.
//!
//! A run reads one JSON problem file, dispatches to a solver, writes data
//! files next to an output prefix and prints a one-line summary. Exit status
//! is 0 on success, 1 for unusable arguments or configuration, 2 when the
//! solver itself fails.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Error;
use crate::general::{shoot, verify_optimality, ShootOptions, ShootingParameters, Tolerances, Verdict};
use crate::hilbert::{ConstraintSet, CVector, HermitianOperator, PureState, HERMITIAN_TOL};
use crate::io::{
    load_trajectory, matrix_from_rows, write_bloch_csv, write_json, write_trajectory_csv,
    write_trajectory_json, BlochFile, ShootRecord,
};
use crate::isotropic::{solve_isotropic, IsotropicOutcome};
use crate::propagator::Trajectory;
use crate::qubit_restricted::{
    bloch_trajectory, bloch_vector, count_nodes, enumerate_families, minus_x, plus_x,
    solve_restricted, FamilyRecord, RestrictedOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "brachistochrone", version, about = "Time-optimal state transfer solver")]
pub struct Cli {
    /// Problem description (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Prefix for every output file; overrides the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Base seed for randomized restarts; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time steps for trajectories; overrides the config.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Largest family index for the qubit solver; overrides the config.
    #[arg(long = "max-l")]
    pub max_l: Option<u32>,
}

pub const SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_MAX_L: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Isotropic,
    Qubit,
    Shoot,
    Verify,
}

/// Initial data for the shooting solver given in the config.
#[derive(Debug, Clone)]
pub struct GuessConfig {
    pub lambda_ratios: Vec<f64>,
    pub h0: HermitianOperator,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub solver: SolverKind,
    pub dimension: usize,
    pub psi_i: Option<PureState>,
    pub psi_f: Option<PureState>,
    pub omega: f64,
    pub forbidden: Vec<HermitianOperator>,
    pub steps: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub max_l: u32,
    pub restarts: usize,
    pub jitter: f64,
    pub tol: f64,
    pub trajectory: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub guess: Option<GuessConfig>,
}

/// A configuration problem, tied to the field that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

const KNOWN_FIELDS: &[&str] = &[
    "schema", "solver", "dimension", "psi_i", "psi_f", "omega", "forbidden", "steps", "seed",
    "output", "max_l", "restarts", "jitter", "tol", "trajectory", "tolerances", "guess",
];

fn get_f64(obj: &Map<String, Value>, name: &str) -> ConfigResult<Option<f64>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| ConfigError::new(name, format!("expected a finite number, found {v}"))),
    }
}

fn get_u64(obj: &Map<String, Value>, name: &str) -> ConfigResult<Option<u64>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| ConfigError::new(name, format!("expected a non-negative integer, found {v}"))),
    }
}

fn get_str<'a>(obj: &'a Map<String, Value>, name: &str) -> ConfigResult<Option<&'a str>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v) => Err(ConfigError::new(name, format!("expected a string, found {v}"))),
    }
}

/// A complex number written as `[re, im]` or as a plain real number.
fn complex(v: &Value, field: &str) -> ConfigResult<Complex64> {
    let bad = || ConfigError::new(field, format!("expected [re, im] or a number, found {v}"));
    match v {
        Value::Number(n) => n.as_f64().map(|re| Complex64::new(re, 0.0)).ok_or_else(bad),
        Value::Array(pair) if pair.len() == 2 => {
            let re = pair[0].as_f64().ok_or_else(bad)?;
            let im = pair[1].as_f64().ok_or_else(bad)?;
            Ok(Complex64::new(re, im))
        }
        _ => Err(bad()),
    }
}

fn complex_vector(v: &Value, field: &str) -> ConfigResult<Vec<Complex64>> {
    let arr = v.as_array().ok_or_else(|| ConfigError::new(field, "expected an array of amplitudes"))?;
    arr.iter().map(|z| complex(z, field)).collect()
}

fn complex_matrix(v: &Value, field: &str, n: usize) -> ConfigResult<HermitianOperator> {
    let rows = v.as_array().ok_or_else(|| ConfigError::new(field, "expected an array of rows"))?;
    let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| complex_vector(r, field)).collect::<ConfigResult<_>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::new(field, format!("expected a {n}x{n} matrix")));
    }
    let m = matrix_from_rows(&rows).map_err(|e| ConfigError::new(field, e.to_string()))?;
    HermitianOperator::new(m).map_err(|e| {
        ConfigError::new(field, format!("{e} (tolerance {HERMITIAN_TOL:e})"))
    })
}

fn state(v: &Value, field: &str, n: usize) -> ConfigResult<PureState> {
    let amps = complex_vector(v, field)?;
    if amps.len() != n {
        return Err(ConfigError::new(field, format!("expected {n} amplitudes, found {}", amps.len())));
    }
    PureState::new(CVector::from_vec(amps)).map_err(|e| ConfigError::new(field, e.to_string()))
}

impl ProblemConfig {
    /// Parses a config document. Relative paths inside it are resolved
    /// against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> ConfigResult<Self> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        let obj = root.as_object().ok_or_else(|| ConfigError::new("<document>", "expected a JSON object"))?;
        if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
            return Err(ConfigError::new(unknown, "unknown field"));
        }
        match get_u64(obj, "schema")? {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(ConfigError::new("schema", format!("unsupported version {v}"))),
            None => return Err(ConfigError::new("schema", "missing; expected 1")),
        }
        let solver = match get_str(obj, "solver")? {
            Some("isotropic") => SolverKind::Isotropic,
            Some("qubit") => SolverKind::Qubit,
            Some("shoot") => SolverKind::Shoot,
            Some("verify") => SolverKind::Verify,
            Some(other) => {
                return Err(ConfigError::new(
                    "solver",
                    format!("unknown solver {other:?}; expected isotropic, qubit, shoot or verify"),
                ))
            }
            None => return Err(ConfigError::new("solver", "missing")),
        };

        let dimension = match get_u64(obj, "dimension")? {
            Some(d) if d >= 2 => d as usize,
            Some(d) => return Err(ConfigError::new("dimension", format!("must be at least 2, got {d}"))),
            None if solver == SolverKind::Qubit => 2,
            None => return Err(ConfigError::new("dimension", "missing")),
        };
        if solver == SolverKind::Qubit && dimension != 2 {
            return Err(ConfigError::new("dimension", "the qubit solver needs dimension 2"));
        }

        let omega = get_f64(obj, "omega")?.ok_or_else(|| ConfigError::new("omega", "missing"))?;
        if omega <= 0.0 {
            return Err(ConfigError::new("omega", format!("must be positive, got {omega}")));
        }

        let needs_states = matches!(solver, SolverKind::Isotropic | SolverKind::Shoot);
        let load_state = |name: &str| -> ConfigResult<Option<PureState>> {
            match obj.get(name) {
                None | Some(Value::Null) if needs_states => Err(ConfigError::new(name, "missing")),
                None | Some(Value::Null) => Ok(None),
                Some(v) => state(v, name, dimension).map(Some),
            }
        };
        let psi_i = load_state("psi_i")?;
        let psi_f = load_state("psi_f")?;

        let forbidden = match obj.get("forbidden") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(list)) => list
                .iter()
                .enumerate()
                .map(|(i, m)| complex_matrix(m, &format!("forbidden[{i}]"), dimension))
                .collect::<ConfigResult<_>>()?,
            Some(_) => return Err(ConfigError::new("forbidden", "expected an array of matrices")),
        };
        ConstraintSet::new(omega, forbidden.clone()).map_err(|e| ConfigError::new("forbidden", e.to_string()))?;

        let steps = match get_u64(obj, "steps")? {
            Some(s) if s >= 2 => s as usize,
            Some(s) => return Err(ConfigError::new("steps", format!("must be at least 2, got {s}"))),
            None => DEFAULT_STEPS,
        };
        let max_l = match get_u64(obj, "max_l")? {
            Some(0) => return Err(ConfigError::new("max_l", "must be at least 1")),
            Some(l) => u32::try_from(l).map_err(|_| ConfigError::new("max_l", "too large"))?,
            None => DEFAULT_MAX_L,
        };
        let restarts = match get_u64(obj, "restarts")? {
            Some(0) => return Err(ConfigError::new("restarts", "must be at least 1")),
            Some(r) => r as usize,
            None => ShootOptions::default().restarts,
        };
        let jitter = get_f64(obj, "jitter")?.unwrap_or(ShootOptions::default().jitter);
        if jitter < 0.0 {
            return Err(ConfigError::new("jitter", "must be non-negative"));
        }
        let tol = get_f64(obj, "tol")?.unwrap_or(ShootOptions::default().tol);
        let output = get_str(obj, "output")?.map(|p| base_dir.join(p)).unwrap_or_else(|| base_dir.join("brachistochrone"));

        let trajectory = get_str(obj, "trajectory")?.map(|p| base_dir.join(p));
        if solver == SolverKind::Verify && trajectory.is_none() {
            return Err(ConfigError::new("trajectory", "missing; the verifier needs a trajectory file"));
        }

        let mut tolerances = Tolerances::default();
        if let Some(t) = obj.get("tolerances") {
            let t = t.as_object().ok_or_else(|| ConfigError::new("tolerances", "expected an object"))?;
            for key in t.keys() {
                let slot = match key.as_str() {
                    "structure" => &mut tolerances.structure,
                    "transport" => &mut tolerances.transport,
                    "constraints" => &mut tolerances.constraints,
                    "lambda" => &mut tolerances.lambda,
                    other => return Err(ConfigError::new(&format!("tolerances.{other}"), "unknown field")),
                };
                let name = format!("tolerances.{key}");
                *slot = t[key]
                    .as_f64()
                    .filter(|x| *x > 0.0)
                    .ok_or_else(|| ConfigError::new(&name, "expected a positive number"))?;
            }
        }

        let guess = match obj.get("guess") {
            None | Some(Value::Null) => None,
            Some(Value::Object(g)) => {
                let lambda_ratios = match g.get("lambda_ratios") {
                    None => vec![0.0; forbidden.len()],
                    Some(v) => v
                        .as_array()
                        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                        .ok_or_else(|| ConfigError::new("guess.lambda_ratios", "expected an array of numbers"))?,
                };
                let h0 = g
                    .get("h0")
                    .ok_or_else(|| ConfigError::new("guess.h0", "missing"))
                    .and_then(|v| complex_matrix(v, "guess.h0", dimension))?;
                let duration = get_f64(g, "T")
                    .map_err(|e| ConfigError::new("guess.T", e.message))?
                    .ok_or_else(|| ConfigError::new("guess.T", "missing"))?;
                Some(GuessConfig { lambda_ratios, h0, duration })
            }
            Some(_) => return Err(ConfigError::new("guess", "expected an object")),
        };

        Ok(Self {
            solver,
            dimension,
            psi_i,
            psi_f,
            omega,
            forbidden,
            steps,
            seed: get_u64(obj, "seed")?.unwrap_or(0),
            output,
            max_l,
            restarts,
            jitter,
            tol,
            trajectory,
            tolerances,
            guess,
        })
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    fn constraints(&self) -> ConstraintSet {
        ConstraintSet::new(self.omega, self.forbidden.clone()).expect("validated on load")
    }

    fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.output.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub solver: SolverKind,
    pub duration: f64,
    pub infidelity: Option<f64>,
    pub verdict: Option<Verdict>,
    pub detail: Option<String>,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let solver = serde_json::to_value(self.solver).expect("enum").as_str().unwrap_or("").to_string();
        write!(f, "solver={solver} T={}", self.duration)?;
        if let Some(i) = self.infidelity {
            write!(f, " infidelity={i:e}")?;
        }
        if let Some(v) = self.verdict {
            write!(f, " verdict={}", if v == Verdict::Pass { "pass" } else { "fail" })?;
        }
        if let Some(d) = &self.detail {
            write!(f, " {d}")?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_trajectory_files(cfg: &ProblemConfig, traj: &Trajectory, files: &mut Vec<PathBuf>) -> Result<(), Error> {
    let csv = cfg.path(".trajectory.csv");
    write_trajectory_csv(traj, create(&csv)?)?;
    let json = cfg.path(".trajectory.json");
    write_trajectory_json(traj, create(&json)?)?;
    files.extend([csv, json]);
    if traj.dim() == 2 {
        let bloch = cfg.path(".bloch.csv");
        write_state_bloch_csv(traj, &bloch)?;
        files.push(bloch);
    }
    Ok(())
}

/// Bloch vector, field and speed for each sample of a qubit trajectory.
fn write_state_bloch_csv(traj: &Trajectory, path: &Path) -> Result<(), Error> {
    let samples: Vec<_> = traj
        .samples()
        .iter()
        .map(|s| {
            let h = s.h.matrix();
            // H = -sigma . B for a traceless qubit Hamiltonian
            let field = [-h[(0, 1)].re, h[(0, 1)].im, -h[(0, 0)].re];
            let speed = crate::hilbert::energy_variance(&s.h, &s.state).sqrt();
            crate::qubit_restricted::BlochSample { t: s.t, sigma: bloch_vector(&s.state), field, speed }
        })
        .collect();
    write_bloch_csv(&samples, create(path)?)
}

fn run_isotropic(cfg: &ProblemConfig) -> Result<Summary, Error> {
    let (psi_i, psi_f) = (cfg.psi_i.as_ref().expect("required"), cfg.psi_f.as_ref().expect("required"));
    let mut files = Vec::new();
    match solve_isotropic(psi_i, psi_f, cfg.omega)? {
        IsotropicOutcome::Coincident => Ok(Summary {
            solver: cfg.solver,
            duration: 0.0,
            infidelity: Some(psi_i.infidelity(psi_f)),
            verdict: None,
            detail: Some("coincident".into()),
            files,
        }),
        IsotropicOutcome::Geodesic(sol) => {
            let traj = sol.trajectory(cfg.steps)?;
            write_trajectory_files(cfg, &traj, &mut files)?;
            Ok(Summary {
                solver: cfg.solver,
                duration: sol.duration(),
                infidelity: Some(traj.terminal().infidelity(psi_f)),
                verdict: None,
                detail: None,
                files,
            })
        }
    }
}

#[derive(Serialize)]
struct FamilyRow {
    #[serde(flatten)]
    family: FamilyRecord,
    #[serde(rename = "omegaT")]
    omega_t: f64,
    #[serde(rename = "Omega_over_omega")]
    rate_ratio: f64,
    nodes: usize,
}

/// One Bloch CSV, Bloch JSON and trajectory JSON per family with
/// `l <= max_l`, plus a table of all families.
pub fn emit_figure_data(cfg: &ProblemConfig) -> Result<Vec<PathBuf>, Error> {
    if cfg.dimension != 2 {
        return Err(Error::InvalidArgument(format!("figure data needs a qubit, got dimension {}", cfg.dimension)));
    }
    let families = enumerate_families(cfg.omega, cfg.max_l)?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for f in &families {
        let samples = bloch_trajectory(f, cfg.steps + 1)?;
        let nodes = count_nodes(&samples)?;
        let stem = format!(".family_k{}_l{}", f.k(), f.l());
        let csv = cfg.path(&format!("{stem}.csv"));
        write_bloch_csv(&samples, create(&csv)?)?;
        let json = cfg.path(&format!("{stem}.json"));
        write_json(&BlochFile { family: FamilyRecord::from(f), samples }, create(&json)?)?;
        let traj = cfg.path(&format!("{stem}.trajectory.json"));
        write_trajectory_json(&f.closed_form_trajectory(cfg.steps)?, create(&traj)?)?;
        files.extend([csv, json, traj]);
        rows.push(FamilyRow {
            family: FamilyRecord::from(f),
            omega_t: f.omega() * f.duration(),
            rate_ratio: f.field_rate() / f.omega(),
            nodes,
        });
    }
    let table = cfg.path(".families.json");
    write_json(&rows, create(&table)?)?;
    files.push(table);
    Ok(files)
}

fn run_qubit(cfg: &ProblemConfig) -> Result<Summary, Error> {
    let mut files = emit_figure_data(cfg)?;
    let psi_i = cfg.psi_i.clone().unwrap_or_else(plus_x);
    let psi_f = cfg.psi_f.clone().unwrap_or_else(minus_x);
    match solve_restricted(&psi_i, &psi_f, cfg.omega, cfg.max_l)? {
        RestrictedOutcome::Stationary => Ok(Summary {
            solver: cfg.solver,
            duration: 0.0,
            infidelity: Some(psi_i.infidelity(&psi_f)),
            verdict: None,
            detail: Some("stationary".into()),
            files,
        }),
        RestrictedOutcome::Solution { solution, family } => {
            let traj = solution.closed_form_trajectory(cfg.steps)?;
            write_trajectory_files(cfg, &traj, &mut files)?;
            let detail = match family {
                Some(f) => format!("family=({},{}) Omega={}", f.k(), f.l(), f.field_rate()),
                None => format!("family=scan Omega={}", solution.field.rate),
            };
            Ok(Summary {
                solver: cfg.solver,
                duration: solution.duration,
                infidelity: Some(traj.terminal().infidelity(&psi_f)),
                verdict: None,
                detail: Some(detail),
                files,
            })
        }
    }
}

fn run_shoot(cfg: &ProblemConfig) -> Result<Summary, Error> {
    let (psi_i, psi_f) = (cfg.psi_i.as_ref().expect("required"), cfg.psi_f.as_ref().expect("required"));
    let cset = cfg.constraints();
    let params0 = match &cfg.guess {
        Some(g) => ShootingParameters::new(g.lambda_ratios.clone(), g.h0.clone(), g.duration, &cset)?,
        None => ShootingParameters::isotropic_guess(psi_i, psi_f, &cset)?,
    };
    let options = ShootOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        tol: cfg.tol,
        steps: cfg.steps,
        jitter: cfg.jitter,
    };
    let result = shoot(psi_i, psi_f, &cset, &params0, options)?;
    let mut files = Vec::new();
    write_trajectory_files(cfg, &result.trajectory, &mut files)?;
    let params = cfg.path(".params.json");
    write_json(&ShootRecord::from(&result), create(&params)?)?;
    files.push(params);
    let converged = result.restarts.iter().filter(|r| r.converged).count();
    Ok(Summary {
        solver: cfg.solver,
        duration: result.params.duration(),
        infidelity: Some(result.trajectory.terminal().infidelity(psi_f)),
        verdict: None,
        detail: Some(format!("converged={converged}/{}", result.restarts.len())),
        files,
    })
}

fn run_verify(cfg: &ProblemConfig) -> Result<Summary, Error> {
    let traj = load_trajectory(cfg.trajectory.as_deref().expect("required"))?;
    if traj.dim() != cfg.dimension {
        return Err(Error::DimensionMismatch { expected: cfg.dimension, found: traj.dim() });
    }
    let report = verify_optimality(&traj, &cfg.constraints(), cfg.tolerances)?;
    let path = cfg.path(".report.json");
    write_json(&report, create(&path)?)?;
    let infidelity = cfg.psi_f.as_ref().map(|f| traj.terminal().infidelity(f));
    Ok(Summary {
        solver: cfg.solver,
        duration: traj.duration(),
        infidelity,
        verdict: Some(report.verdict),
        detail: Some(format!(
            "structure={:e} transport={:e} constraints={:e}",
            report.residual_structure, report.residual_transport, report.residual_constraints
        )),
        files: vec![path],
    })
}

/// Runs a parsed configuration.
pub fn execute(cfg: &ProblemConfig) -> Result<Summary, Error> {
    match cfg.solver {
        SolverKind::Isotropic => run_isotropic(cfg),
        SolverKind::Qubit => run_qubit(cfg),
        SolverKind::Shoot => run_shoot(cfg),
        SolverKind::Verify => run_verify(cfg),
    }
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };
    let mut cfg = match ProblemConfig::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(o) = cli.output {
        cfg.output = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.steps {
        if s < 2 {
            eprintln!("error: {}", ConfigError::new("--steps", "must be at least 2"));
            return 1;
        }
        cfg.steps = s;
    }
    if let Some(l) = cli.max_l {
        if l == 0 {
            eprintln!("error: {}", ConfigError::new("--max-l", "must be at least 1"));
            return 1;
        }
        cfg.max_l = l;
    }
    match execute(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            2
        }
    }
}
