//! Experiment harness around the `nozzleflow` library.
//!
//! Every command reads one JSON [`RunConfig`], writes its artifacts into an
//! output directory and maps its outcome to an exit code: 0 success,
//! 1 configuration error, 2 failed check, 3 solver stall.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nozzleflow::grid::lift_symmetric;
use nozzleflow::hopf::{
    self, analyze, flatten, hopf_condition, symmetric_exit_operator, BoundaryPatch, CMode,
    DegenOperator, ExtremumKind, HopfReport,
};
use nozzleflow::linop::{
    assemble_linearized, check_exit_drift_sign, check_key_inequality, consistency_constant,
    KeyInequalityReport, SignReport,
};
use nalgebra::{DMatrix, DVector};
use nozzleflow::pde2d::{BoundaryData, PotentialProblem, SolveReport, SolveSummary, SolverConfig};
use nozzleflow::symmetric::{build_symmetric_flow, SymmetricChecks};
use nozzleflow::{FlowError, GasModel, NozzleProfile, ScalarField, StripGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } => 1,
            CliError::Flow(FlowError::SonicExceeded { .. }) => 3,
            CliError::Flow(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Symmetric,
    Solve,
    Verify,
    Perturb,
    HopfGallery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EntryShape {
    /// `B = b0²(1 + δ·sin y)`.
    #[default]
    Sine,
    /// `B = b0²(1 − δ·sin²y) ≤ b0²`.
    LowerSineSquared,
    /// `B = b0²(1 + δ·sin²y) ≥ b0²`.
    UpperSineSquared,
}

impl EntryShape {
    pub fn factor(self, delta: f64, y: f64) -> f64 {
        match self {
            EntryShape::Sine => 1.0 + delta * y.sin(),
            EntryShape::LowerSineSquared => 1.0 - delta * y.sin().powi(2),
            EntryShape::UpperSineSquared => 1.0 + delta * y.sin().powi(2),
        }
    }
}

/// x-envelope of the random initial-guess perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    /// `x(1−x)²`: leaves the exit gradient untouched.
    #[default]
    ExitFlat,
    /// `x(1−x)`.
    Parabolic,
}

impl Envelope {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Envelope::ExitFlat => x * (1.0 - x) * (1.0 - x),
            Envelope::Parabolic => x * (1.0 - x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasSection {
    pub gamma: f64,
    pub c0: f64,
}

impl Default for GasSection {
    fn default() -> Self {
        Self { gamma: 1.4, c0: 1.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NozzleSection {
    pub a: f64,
    pub p: f64,
}

impl Default for NozzleSection {
    fn default() -> Self {
        Self { a: 0.25, p: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx: 65, ny: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eps0: f64,
    pub eps_factor: f64,
    pub eps_min: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            eps0: d.eps0,
            eps_factor: d.eps_factor,
            eps_min: d.eps_min,
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
        }
    }
}

impl SolverSection {
    pub fn to_config(self) -> SolverConfig {
        SolverConfig {
            eps0: self.eps0,
            eps_factor: self.eps_factor,
            eps_min: self.eps_min,
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: Command,
    /// Entry perturbation amplitude.
    pub delta: f64,
    pub seed: u64,
    /// Inf-norm of the random perturbation added to the initial guess.
    pub init_noise: f64,
    pub entry_shape: EntryShape,
    pub envelope: Envelope,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: Command::Solve,
            delta: 0.0,
            seed: 0,
            init_noise: 0.0,
            entry_shape: EntryShape::Sine,
            envelope: Envelope::ExitFlat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub gas: GasSection,
    pub nozzle: NozzleSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
}

/// Validated model objects built from a [`RunConfig`].
#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub gas: GasModel,
    pub profile: NozzleProfile,
    pub grid: StripGrid,
    pub solver: SolverConfig,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    /// Gas and nozzle only, for commands that do not touch the 2D grid.
    pub fn physics(&self) -> CliResult<(GasModel, NozzleProfile)> {
        let gas = GasModel::new(self.gas.gamma, self.gas.c0).map_err(config_err)?;
        let profile = NozzleProfile::new(self.nozzle.a, self.nozzle.p).map_err(config_err)?;
        Ok((gas, profile))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> CliResult<Model> {
        let (gas, profile) = self.physics()?;
        let grid = StripGrid::new(self.grid.nx, self.grid.ny).map_err(config_err)?;
        let solver = self.solver.to_config();
        solver.validate().map_err(config_err)?;
        let e = &self.experiment;
        if !(e.delta.is_finite() && e.delta >= 0.0 && e.delta < 1.0) {
            return Err(CliError::Config(format!("experiment.delta = {} outside [0, 1)", e.delta)));
        }
        if !(e.init_noise.is_finite() && e.init_noise >= 0.0) {
            return Err(CliError::Config(format!(
                "experiment.init_noise = {} must be nonnegative",
                e.init_noise
            )));
        }
        Ok(Model { gas, profile, grid, solver })
    }
}

/// Truncated Fourier series in `y` (modes 1..4) times an x-envelope,
/// coefficients uniform in [−1, 1] from a seeded ChaCha8 stream, scaled to
/// the requested inf-norm.
pub fn smooth_perturbation(grid: StripGrid, amplitude: f64, seed: u64, envelope: Envelope) -> ScalarField {
    if amplitude == 0.0 {
        return ScalarField::zeros(grid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect();
    let raw = ScalarField::from_fn(grid, |x, y| {
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let m = (k + 1) as f64;
                a * (m * y).cos() + b * (m * y).sin()
            })
            .sum();
        envelope.eval(x) * series
    });
    let norm = raw.inf_norm();
    if norm == 0.0 {
        return raw;
    }
    let scale = amplitude / norm;
    let values = raw.values().iter().map(|v| v * scale).collect();
    ScalarField::from_values(grid, values).unwrap_or_else(|_| ScalarField::zeros(grid))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(out: &Path, name: &str) -> CliResult<(BufWriter<File>, PathBuf)> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((BufWriter::new(file), path))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> CliResult<()> {
    let (mut w, path) = create(out, name)?;
    let text = serde_json::to_string_pretty(value).map_err(config_err)?;
    w.write_all(text.as_bytes()).map_err(io_err(&path))?;
    w.write_all(b"\n").map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))
}

fn write_field(out: &Path, name: &str, field: &ScalarField) -> CliResult<()> {
    let (mut w, path) = create(out, name)?;
    field.write_csv(&mut w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))
}

/// Result of one command: exit code plus a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

pub fn run(command: Command, config: &RunConfig, out: &Path) -> Outcome {
    let result = match command {
        Command::Symmetric => run_symmetric(config, out),
        Command::Solve => run_solve(config, out),
        Command::Verify => run_verify(config, out),
        Command::Perturb => run_perturb(config, out),
        Command::HopfGallery => run_hopf_gallery(config, out),
    };
    result.unwrap_or_else(|e| Outcome::new(e.exit_code(), e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetricReport {
    pub stations: usize,
    pub u_entry: f64,
    pub u_exit: f64,
    pub mass_flux: f64,
    pub checks: SymmetricChecks,
    pub checks_ok: bool,
}

/// Symmetric profile on `grid.nx ≥ 2` stations: `symmetric.csv`, `symmetric.json`.
pub fn run_symmetric(config: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let (gas, profile) = config.physics()?;
    let stations = config.grid.nx;
    if stations < 2 {
        return Err(CliError::Config(format!("grid.nx = {stations}: need at least 2 stations")));
    }
    let flow = build_symmetric_flow(&gas, &profile, stations)?;
    let checks = flow.check(&gas, &profile)?;
    let (mut w, path) = create(out, "symmetric.csv")?;
    flow.write_csv(&mut w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    let report = SymmetricReport {
        stations,
        u_entry: flow.u[0],
        u_exit: flow.u[stations - 1],
        mass_flux: flow.m,
        checks_ok: checks.all_ok(),
        checks,
    };
    write_json(out, "symmetric.json", &report)?;
    let code = if report.checks_ok { 0 } else { 2 };
    Ok(Outcome::new(
        code,
        format!("symmetric: u(0) = {:.12}, u(1) = {:.12}, checks_ok = {}", report.u_entry, report.u_exit, report.checks_ok),
    ))
}

/// Problem, lifted guess and boundary data for the configured experiment.
pub fn setup_problem(m: &Model, e: &ExperimentSection, delta: f64) -> CliResult<(PotentialProblem, ScalarField)> {
    let stations = 16 * (m.grid.nx() - 1) + 1;
    let flow = build_symmetric_flow(&m.gas, &m.profile, stations)?;
    let lift = lift_symmetric(&flow, m.grid);
    let shape = e.entry_shape;
    let data = if delta == 0.0 {
        BoundaryData::symmetric(&m.gas, &m.profile)?
    } else {
        BoundaryData::scaled_entry(&m.gas, &m.profile, move |y| shape.factor(delta, y))?
    };
    let problem = PotentialProblem::new(m.gas, m.profile, m.grid, data)?;
    Ok((problem, lift))
}

/// Lifted guess plus the configured random perturbation.
pub fn initial_guess(lift: &ScalarField, e: &ExperimentSection) -> ScalarField {
    let noise = smooth_perturbation(*lift.grid(), e.init_noise, e.seed, e.envelope);
    let values = lift.values().iter().zip(noise.values()).map(|(a, b)| a + b).collect();
    ScalarField::from_values(*lift.grid(), values).unwrap_or_else(|_| lift.clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct SignChecks {
    pub a12_max_abs: f64,
    pub exit_drift: SignReport,
    /// `−(γ+1)·∂₁₁φ·b1` with the y-averaged discrete exit curvature.
    pub exit_drift_closed_form: f64,
    pub exit_drift_closed_form_rel_error: f64,
    pub key: KeyInequalityReport,
    pub oblique: bool,
    pub consistency_constant: f64,
}

impl SignChecks {
    pub fn all_pass(&self) -> bool {
        self.a12_max_abs == 0.0
            && self.exit_drift.pass
            && self.exit_drift_closed_form_rel_error <= 0.1
            && self.key.all_pass()
    }
}

pub fn sign_checks(m: &Model, solution: &ScalarField, lift: &ScalarField) -> CliResult<SignChecks> {
    let coeffs = assemble_linearized(solution, &m.gas, &m.profile)?;
    let drift = check_exit_drift_sign(&coeffs);
    let grid = m.grid;
    let last = grid.nx() - 1;
    let mut curvature = 0.0;
    for j in 0..grid.ny() {
        curvature += solution.dxx(last, j)?;
    }
    curvature /= grid.ny() as f64;
    let closed = -(m.gas.gamma() + 1.0) * curvature * m.gas.sonic_speed().b1;
    let mut rel = 0.0f64;
    for j in 0..grid.ny() {
        rel = rel.max((coeffs.b1.get(last, j)? - closed).abs() / closed.abs());
    }
    Ok(SignChecks {
        a12_max_abs: coeffs.a12.inf_norm(),
        exit_drift: drift,
        exit_drift_closed_form: closed,
        exit_drift_closed_form_rel_error: rel,
        key: check_key_inequality(solution, &m.gas)?,
        oblique: coeffs.oblique.is_oblique(),
        consistency_constant: consistency_constant(&coeffs, solution, lift)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    #[serde(flatten)]
    pub summary: SolveSummary,
    pub grid: GridSection,
    pub delta: f64,
    pub init_noise: f64,
    pub distance_to_lift: f64,
    pub column_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signs: Option<SignChecks>,
}

/// Runs the configured solve and returns the full report.
pub fn solve(config: &RunConfig) -> CliResult<(Model, SolveReport, ScalarField)> {
    let m = config.model()?;
    let e = &config.experiment;
    let (problem, lift) = setup_problem(&m, e, e.delta)?;
    let report = problem.newton_solve(&initial_guess(&lift, e), &m.solver)?;
    Ok((m, report, lift))
}

/// `report.json`, `solution.csv`, `mach.csv`.
pub fn run_solve(config: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let (m, report, lift) = solve(config)?;
    let signs = if report.converged {
        Some(sign_checks(&m, &report.solution, &lift)?)
    } else {
        None
    };
    let output = SolveOutput {
        summary: report.summary(),
        grid: config.grid,
        delta: config.experiment.delta,
        init_noise: config.experiment.init_noise,
        distance_to_lift: report.solution.distance_modulo_constant(&lift)?,
        column_spread: report.solution.column_spread(),
        signs,
    };
    write_json(out, "report.json", &output)?;
    write_field(out, "solution.csv", &report.solution)?;
    write_field(out, "mach.csv", &report.mach_field)?;
    let (code, what) = match &output.signs {
        None => (3, format!("stalled: {}", report.stall_reason.as_deref().unwrap_or("unknown"))),
        Some(s) if s.all_pass() => (0, "converged, sign checks pass".to_string()),
        Some(_) => (2, "converged, sign checks fail".to_string()),
    };
    Ok(Outcome::new(
        code,
        format!(
            "solve {}x{}: {what}; max interior Mach {:.6}, entry shift {:.3e}",
            m.grid.nx(),
            m.grid.ny(),
            report.max_interior_mach,
            report.entry_shift
        ),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryExtremum {
    pub node: (usize, usize),
    pub rate: f64,
    pub psi_spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub solve: SolveSummary,
    pub signs: Option<SignChecks>,
    pub hopf_exit: HopfReport,
    pub psi_extremum: Option<BoundaryExtremum>,
    pub pass: bool,
}

/// `ψ = φ_b − φ` between the unperturbed and a perturbed start, checked at
/// its exit minimum.
fn psi_extremum(config: &RunConfig, base: &SolveReport) -> CliResult<Option<BoundaryExtremum>> {
    let mut perturbed_cfg = *config;
    if perturbed_cfg.experiment.init_noise == 0.0 {
        perturbed_cfg.experiment.init_noise = 1e-2;
    }
    let (_, other, _) = solve(&perturbed_cfg)?;
    if !other.converged {
        return Ok(None);
    }
    let psi = base.solution.sub(&other.solution)?;
    let grid = *psi.grid();
    let last = grid.nx() - 1;
    let j = (0..grid.ny())
        .min_by(|&a, &b| psi.at(last, a as isize).total_cmp(&psi.at(last, b as isize)))
        .unwrap_or(0);
    let check = hopf::exit_derivative_check(&psi, j, ExtremumKind::Min)?;
    let tol = 10.0 * config.solver.newton_tol;
    Ok(Some(BoundaryExtremum {
        node: (last, j),
        rate: check.rate,
        psi_spread: psi.max() - psi.min(),
        pass: check.rate.abs() < tol,
    }))
}

/// Sign conditions, the exit Hopf condition and the ψ boundary check:
/// `verify.json`.
pub fn run_verify(config: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let mut base_cfg = *config;
    base_cfg.experiment.init_noise = 0.0;
    let (m, report, lift) = solve(&base_cfg)?;
    let op = symmetric_exit_operator(&m.gas, &m.profile)?;
    let patch = BoundaryPatch::flat(DVector::zeros(2))?;
    let hopf_exit = analyze(&op, &patch, CMode::Zero, &[0.5, 0.5], hopf::DEFAULT_DENSITY)?;
    let (signs, psi) = if report.converged {
        (Some(sign_checks(&m, &report.solution, &lift)?), psi_extremum(config, &report)?)
    } else {
        (None, None)
    };
    let pass = signs.as_ref().is_some_and(SignChecks::all_pass)
        && hopf_exit.barrier_ok == Some(true)
        && psi.as_ref().is_some_and(|p| p.pass);
    let output = VerifyOutput {
        solve: report.summary(),
        signs,
        hopf_exit,
        psi_extremum: psi,
        pass,
    };
    write_json(out, "verify.json", &output)?;
    let code = if !report.converged {
        3
    } else if pass {
        0
    } else {
        2
    };
    Ok(Outcome::new(code, format!("verify: pass = {pass}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbCase {
    pub delta: f64,
    pub converged: bool,
    pub final_eps: f64,
    pub max_interior_mach: f64,
    pub residual_floor: f64,
    pub entry_shift: f64,
    pub stall_reason: Option<String>,
    /// Stall or interior Mach ≥ 1.
    pub indicator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbOutput {
    pub grid: GridSection,
    pub entry_shape: EntryShape,
    pub cases: Vec<PerturbCase>,
}

/// Runs the `δ/4, δ/2, δ` sweep concurrently.
pub fn perturb_sweep(config: &RunConfig) -> CliResult<PerturbOutput> {
    let m = config.model()?;
    let e = config.experiment;
    let delta = e.delta;
    let deltas = [0.25 * delta, 0.5 * delta, delta];
    let results: Vec<CliResult<PerturbCase>> = std::thread::scope(|s| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&d| {
                s.spawn(move || -> CliResult<PerturbCase> {
                    let (problem, lift) = setup_problem(&m, &e, d)?;
                    let r = problem.newton_solve(&initial_guess(&lift, &e), &m.solver)?;
                    Ok(PerturbCase {
                        delta: d,
                        converged: r.converged,
                        final_eps: r.final_eps,
                        max_interior_mach: r.max_interior_mach,
                        residual_floor: r.residual_floor,
                        entry_shift: r.entry_shift,
                        indicator: !r.converged || r.max_interior_mach >= 1.0,
                        stall_reason: r.stall_reason,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Config("worker panicked".into()))))
            .collect()
    });
    let cases = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    Ok(PerturbOutput {
        grid: config.grid,
        entry_shape: e.entry_shape,
        cases,
    })
}

/// `perturb.json`; reports only, so always exit 0 unless the config is bad.
pub fn run_perturb(config: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let output = perturb_sweep(config)?;
    write_json(out, "perturb.json", &output)?;
    let flags: Vec<String> = output
        .cases
        .iter()
        .map(|c| format!("δ={}: {}", c.delta, if c.indicator { "indicator" } else { "solved" }))
        .collect();
    Ok(Outcome::new(0, format!("perturb: {}", flags.join(", "))))
}

#[derive(Debug, Clone, Serialize)]
pub struct GalleryEntry {
    pub name: String,
    pub expect_applicable: bool,
    pub report: HopfReport,
    pub flatten_beta_n: f64,
    pub matches: bool,
}

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

/// The constant-coefficient examples and the exit operator of the current
/// gas and nozzle.
pub fn hopf_gallery(m: &Model) -> CliResult<Vec<GalleryEntry>> {
    let exit_frame = (DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), v2(1.0, 0.0));
    let flat = BoundaryPatch::flat(v2(0.0, 0.0))?;
    let heat = DegenOperator::constant(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), v2(-1.0, 0.0))?
        .reoriented(exit_frame.0, exit_frame.1)?;
    let laplace = DegenOperator::constant(DMatrix::identity(2, 2), v2(0.0, 0.0))?;
    let kappa = 0.7;
    let curved = BoundaryPatch::new(
        v2(0.0, 0.0),
        move |s| 0.5 * kappa * s[0] * s[0],
        move |s| DVector::from_vec(vec![kappa * s[0]]),
        move |_| DMatrix::from_element(1, 1, kappa),
    )?;
    let exit = symmetric_exit_operator(&m.gas, &m.profile)?;
    let cases: Vec<(&str, &DegenOperator, &BoundaryPatch, bool)> = vec![
        ("heat-like exit", &heat, &flat, true),
        ("laplacian flat boundary", &laplace, &flat, false),
        ("curved boundary without drift", &laplace, &curved, false),
        ("linearized symmetric exit", &exit, &flat, true),
    ];
    cases
        .into_iter()
        .map(|(name, op, patch, expect)| {
            let report = analyze(op, patch, CMode::Zero, &[0.5, 0.5], hopf::DEFAULT_DENSITY)?;
            let beta_n = flatten(op, patch)?.beta[1];
            let value = hopf_condition(op, patch, CMode::Zero)?;
            let consistent = (value - beta_n).abs() <= 1e-12;
            let outcome = if expect {
                report.applicable() && report.barrier_ok == Some(true)
            } else {
                !report.applicable()
            };
            Ok(GalleryEntry {
                name: name.to_string(),
                expect_applicable: expect,
                matches: consistent && outcome,
                flatten_beta_n: beta_n,
                report,
            })
        })
        .collect()
}

/// `hopf_gallery.json`.
pub fn run_hopf_gallery(config: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let m = config.model()?;
    let entries = hopf_gallery(&m)?;
    write_json(out, "hopf_gallery.json", &entries)?;
    let all = entries.iter().all(|e| e.matches);
    Ok(Outcome::new(
        if all { 0 } else { 2 },
        format!("hopf-gallery: {}/{} entries match", entries.iter().filter(|e| e.matches).count(), entries.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_document() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid.nx, 65);
        assert_eq!(c.experiment.kind, Command::Solve);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"gas": {"gama": 1.4}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"solver": {"damping": 0.1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"experiment": {"kind": "relax"}}"#).is_err());
        let c = RunConfig::from_json(r#"{"experiment": {"kind": "hopf-gallery", "entry_shape": "lower-sine-squared"}}"#).unwrap();
        assert_eq!(c.experiment.kind, Command::HopfGallery);
        assert_eq!(c.experiment.entry_shape, EntryShape::LowerSineSquared);
    }

    #[test]
    fn invalid_gamma_names_the_invariant() {
        let c = RunConfig::from_json(r#"{"gas": {"gamma": 0.9}}"#).unwrap();
        let err = c.model().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn perturbation_is_seeded_and_scaled() {
        let grid = StripGrid::new(17, 16).unwrap();
        let a = smooth_perturbation(grid, 1e-2, 7, Envelope::Parabolic);
        let b = smooth_perturbation(grid, 1e-2, 7, Envelope::Parabolic);
        let c = smooth_perturbation(grid, 1e-2, 8, Envelope::Parabolic);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.inf_norm() - 1e-2).abs() < 1e-15);
        for i in 0..17 {
            let row: f64 = (0..16).map(|j| a.at(i, j)).sum();
            assert!(row.abs() < 1e-15);
        }
        for j in 0..16 {
            assert_eq!(a.at(0, j), 0.0);
            assert_eq!(a.at(16, j), 0.0);
        }
        assert_eq!(smooth_perturbation(grid, 0.0, 7, Envelope::ExitFlat).inf_norm(), 0.0);
    }

    #[test]
    fn exit_flat_envelope_keeps_exit_gradient() {
        let grid = StripGrid::new(33, 16).unwrap();
        let p = smooth_perturbation(grid, 1e-2, 3, Envelope::ExitFlat);
        for j in 0..16 {
            assert!(p.dx(32, j).unwrap().abs() < 1e-3);
        }
    }

    #[test]
    fn entry_shapes() {
        let y = 1.0f64;
        assert_eq!(EntryShape::Sine.factor(0.0, y), 1.0);
        assert!(EntryShape::LowerSineSquared.factor(0.1, y) <= 1.0);
        assert!(EntryShape::UpperSineSquared.factor(0.1, y) >= 1.0);
    }
}
