//! Command-line interface of the `lamafield` binary.
//!
//! Every subcommand's options are also accepted from a JSON file given with
//! `--config`: its keys are the long option names with underscores, plus
//! `ecm`, `quadrature` and `inversion` objects for the numerical settings.
//! Values from the file override values from the command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lamafield::ecm::{ecm_fit, EcmConfig, EcmFit, FitStatus, Theta};
use lamafield::fem::{
    assemble, build_mesh_1d, build_mesh_1d_nodes, build_mesh_2d, k_alpha_even, operator_matrix, FemDiscretization,
    Mesh, Rect, SolverPath,
};
use lamafield::matern::{marginal_density, CfQuadrature, InversionConfig, MaternParams};
use lamafield::noise::{noise_load_logpdf, LaplaceParams};
use lamafield::rng::stream_rng;
use lamafield::sampler::{simulate_gaussian_with, simulate_laplace_with, FieldSample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cases::{study_case, table1_cases, StudyCase, TABLE1};
use crate::error::{input, HarnessError, Result};
use crate::io::{format_f64, read_table, with_output, write_json, write_table, write_triplets, Table};
use crate::study::{run_case, with_jobs, StudyResult};

#[derive(Debug, Parser)]
#[command(name = "lamafield", version, about = "Laplace-driven Matérn fields: simulation, densities and estimation")]
pub struct Cli {
    /// JSON file whose entries override the command-line options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one field on a regular 1-D or 2-D mesh.
    Simulate(SimulateArgs),
    /// Marginal density of the field, or of one noise load, on a grid.
    Density(DensityArgs),
    /// Fit all parameters to a field read from a simulation CSV.
    Estimate(EstimateArgs),
    /// Run simulation-study cases A-L.
    Study(StudyArgs),
    /// Write the finite-element matrices of a regular mesh.
    Matrices(MatricesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Auto,
    Spectral,
    Sparse,
}

impl From<Solver> for SolverPath {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Auto => SolverPath::Auto,
            Solver::Spectral => SolverPath::Spectral,
            Solver::Sparse => SolverPath::Sparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Laplace,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    /// Marginal of X(s) by inversion of its characteristic function.
    #[default]
    Field,
    /// One noise load of mass `--mass`.
    Noise,
}

/// Field and noise parameters.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau: f64,
}

impl ModelArgs {
    pub fn laplace(&self) -> Result<LaplaceParams<f64>> {
        Ok(LaplaceParams::new(self.mu, self.sigma, self.gamma, self.tau)?)
    }

    /// Matérn parameters with the variance implied by the noise.
    pub fn matern(&self) -> Result<MaternParams<f64>> {
        Ok(MaternParams::from_alpha(self.alpha, self.kappa, self.laplace()?.implied_phi2(), self.d)?)
    }
}

/// Regular mesh: `n` nodes per axis, spacing `h`, first node at `x0`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MeshArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
}

impl MeshArgs {
    pub fn mesh(&self, d: usize) -> Result<Mesh<f64>> {
        match d {
            1 => Ok(build_mesh_1d(self.x0, self.n, self.h)?),
            2 => {
                let x1 = self.x0 + self.h * (self.n as f64 - 1.0);
                let rect = Rect { x0: self.x0, x1, y0: self.x0, y1: x1 };
                Ok(build_mesh_2d(rect, self.n, self.n)?)
            }
            _ => input(format!("d must be 1 or 2, got {d}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub mesh: MeshArgs,
    #[arg(long, value_enum, default_value_t)]
    pub noise: NoiseKind,
    /// Variance of a Gaussian field; defaults to τ(σ² + μ²).
    #[arg(long, allow_negative_numbers = true)]
    pub phi2: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub solver: Solver,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Equally spaced grid `lo:step:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, value_enum, default_value_t)]
    pub kind: DensityKind,
    /// Lumped mass of the node for `--kind noise`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mass: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default)]
    pub quadrature: CfQuadrature<f64>,
    #[arg(skip)]
    #[serde(default)]
    pub inversion: InversionConfig<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Simulation CSV with an `x` (and for 2-D a `y`) coordinate column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "field")]
    pub column: String,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Seed of the random starting values.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of the iteration trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default)]
    pub ecm: EcmConfig<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StudyArgs {
    /// Case labels (A-L, comma separated or repeated) or `all`.
    #[arg(long = "case", value_delimiter = ',')]
    pub cases: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "LAMAFIELD_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Number of observations per data set.
    #[arg(long, default_value_t = 1000)]
    pub n_obs: usize,
    /// Output JSON; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of the per-replicate estimates.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Print the parameter rows of all cases and exit.
    #[arg(long)]
    pub print_cases: bool,
    #[arg(skip)]
    #[serde(default)]
    pub ecm: EcmConfig<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MatricesArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub mesh: MeshArgs,
    /// Also write K = κ²C̃ + G.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Also write K_α for this even α (needs `--kappa`).
    #[arg(long)]
    pub alpha: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Recursively overlays `patch` on `base`; keys unknown to `base` are errors.
fn overlay(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() => overlay(slot, v, &here)?,
                    Some(slot) => *slot = v.clone(),
                    None => return input(format!("unknown configuration key {here:?}")),
                }
            }
            Ok(())
        }
        (_, _) => input(format!("configuration entry {path:?} must be an object")),
    }
}

/// `args` with the entries of `config` applied on top.
pub fn apply_config<A: Serialize + DeserializeOwned>(args: A, config: Option<&Value>) -> Result<A> {
    let Some(config) = config else {
        return Ok(args);
    };
    let mut v = serde_json::to_value(&args)?;
    overlay(&mut v, config, "")?;
    serde_json::from_value(v).map_err(|e| HarnessError::Input(format!("configuration: {e}")))
}

/// Parses `lo:step:hi` into equally spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = match parts.iter().map(|p| p.trim().parse::<f64>()).collect() {
        Ok(v) if parts.len() == 3 => v,
        _ => return input(format!("grid must be lo:step:hi, got {spec:?}")),
    };
    let (lo, step, hi) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return input(format!("grid needs lo < hi and step > 0, got {spec:?}"));
    }
    let n = ((hi - lo) / step).round() as usize + 1;
    if ((lo + step * (n - 1) as f64) - hi).abs() > 1e-9 * (hi - lo) {
        return input(format!("grid step {step} does not divide [{lo}, {hi}]"));
    }
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// Simulated field with its mesh.
pub fn simulate(args: &SimulateArgs) -> Result<(FemDiscretization<f64>, FieldSample<f64>)> {
    let fd = assemble(&args.mesh.mesh(args.model.d)?)?;
    let mut rng = stream_rng(args.seed, 0);
    let path = args.solver.into();
    let sample = match args.noise {
        NoiseKind::Laplace => {
            simulate_laplace_with(&args.model.matern()?, &args.model.laplace()?, &fd, path, &mut rng)?
        }
        NoiseKind::Gaussian => {
            let mp = match args.phi2 {
                Some(p) => args.model.matern()?.with_phi2(p)?,
                None => args.model.matern()?,
            };
            simulate_gaussian_with(&mp, &fd, path, &mut rng)?
        }
    };
    Ok((fd, sample))
}

/// Node coordinates, field values, loads and (for Laplace noise) the latent
/// variances.
pub fn simulation_table(fd: &FemDiscretization<f64>, sample: &FieldSample<f64>) -> Table {
    let mesh = fd.mesh();
    let n = mesh.node_count();
    let mut t = Table::new().with("x", (0..n).map(|i| mesh.node(i)[0]).collect());
    if mesh.dim() == 2 {
        t = t.with("y", (0..n).map(|i| mesh.node(i)[1]).collect());
    }
    t = t.with("field", sample.values.clone()).with("lambda", sample.noise.lambda.clone());
    if !sample.noise.gammas.is_empty() {
        t = t.with("v", sample.noise.gammas.clone());
    }
    t
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| a.total_cmp(b));
    u.dedup();
    u
}

/// Mesh of a simulation table: the `x` nodes in 1-D, or the structured grid
/// spanned by `x` and `y` in 2-D.
pub fn discretization_from_table(table: &Table) -> Result<FemDiscretization<f64>> {
    let x = table.require("x")?;
    let mesh = match table.column("y") {
        None => build_mesh_1d_nodes(x)?,
        Some(y) => {
            let (ux, uy) = (sorted_unique(x), sorted_unique(y));
            if ux.len() < 2 || uy.len() < 2 {
                return input("2-D table needs at least two distinct x and y values");
            }
            let rect = Rect { x0: ux[0], x1: ux[ux.len() - 1], y0: uy[0], y1: uy[uy.len() - 1] };
            let mesh = build_mesh_2d(rect, ux.len(), uy.len())?;
            let matches = mesh.node_count() == x.len()
                && (0..x.len()).all(|i| mesh.node(i)[0] == x[i] && mesh.node(i)[1] == y[i]);
            if !matches {
                return input("2-D table is not a row-major regular grid");
            }
            mesh
        }
    };
    Ok(assemble(&mesh)?)
}

/// The fit performed by `estimate`: random start from stream (seed, 0).
pub fn fit_field(
    fd: &FemDiscretization<f64>,
    x: &[f64],
    alpha: f64,
    config: &EcmConfig<f64>,
    seed: u64,
) -> Result<EcmFit<f64>> {
    Ok(ecm_fit(x, fd, alpha, config, &mut stream_rng(seed, 0))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub input: String,
    pub column: String,
    pub alpha: f64,
    pub seed: u64,
    pub config: EcmConfig<f64>,
    pub theta: Theta<f64>,
    /// γ = γ̄/τ.
    pub gamma: f64,
    pub initial: Theta<f64>,
    pub loglik: Option<f64>,
    pub status: FitStatus,
    pub iterations: usize,
}

fn trace_table(fit: &EcmFit<f64>) -> Table {
    let col = |f: &dyn Fn(&lamafield::ecm::IterationRecord<f64>) -> f64| fit.trace.iter().map(f).collect::<Vec<_>>();
    Table::new()
        .with("iter", col(&|r| r.iter as f64))
        .with("kappa", col(&|r| r.theta.kappa))
        .with("sigma", col(&|r| r.theta.sigma))
        .with("mu", col(&|r| r.theta.mu))
        .with("gamma_bar", col(&|r| r.theta.gamma_bar))
        .with("tau", col(&|r| r.theta.tau))
        .with("loglik", col(&|r| r.loglik))
        .with("warm_start", col(&|r| f64::from(u8::from(r.warm_start))))
        .with("trunc_bound", col(&|r| r.trunc_bound.unwrap_or(f64::INFINITY)))
        .with("clamped", col(&|r| r.clamped as f64))
        .with("centre_gap", col(&|r| r.centre_gap))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let (fd, sample) = simulate(args)?;
    write_table(args.out.as_deref(), &simulation_table(&fd, &sample))
}

fn run_density(args: &DensityArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let lp = args.model.laplace()?;
    let density = match args.kind {
        DensityKind::Field => marginal_density(&grid, &lp, &args.model.matern()?, &args.quadrature, &args.inversion)?,
        DensityKind::Noise => grid
            .iter()
            .map(|&x| match noise_load_logpdf(x, args.mass, &lp) {
                Ok(v) => Ok(v.exp()),
                Err(lamafield::Error::Pole(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            })
            .collect::<lamafield::Result<Vec<f64>>>()?,
    };
    write_table(args.out.as_deref(), &Table::new().with("x", grid).with("density", density))
}

fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    let fd = discretization_from_table(&table)?;
    let fit = fit_field(&fd, table.require(&args.column)?, args.alpha, &args.ecm, args.seed)?;
    if let Some(path) = &args.trace {
        write_table(Some(path), &trace_table(&fit))?;
    }
    let out = EstimateOutput {
        input: args.input.display().to_string(),
        column: args.column.clone(),
        alpha: args.alpha,
        seed: args.seed,
        config: args.ecm,
        theta: fit.theta,
        gamma: fit.theta.gamma(),
        initial: fit.initial,
        loglik: fit.loglik.is_finite().then_some(fit.loglik),
        status: fit.status,
        iterations: fit.iterations,
    };
    write_json(args.out.as_deref(), &out)
}

fn print_cases(w: &mut dyn Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case", "kappa", "tau", "sigma", "mu", "gamma"])?;
    for (label, t) in TABLE1 {
        let row = [t.kappa, t.tau, t.sigma, t.mu, t.gamma].map(format_f64);
        out.write_record(std::iter::once(label.to_string()).chain(row))?;
    }
    out.flush()?;
    Ok(())
}

/// Study cases selected by `--case`.
pub fn selected_cases(args: &StudyArgs) -> Result<Vec<StudyCase>> {
    if args.cases.is_empty() {
        return input("no study case given; use --case A-L or --case all");
    }
    let mut cases = Vec::new();
    for label in &args.cases {
        if label.eq_ignore_ascii_case("all") {
            cases.extend(table1_cases(args.replicates));
        } else {
            cases.push(study_case(label, args.replicates)?);
        }
    }
    for c in &mut cases {
        c.n_obs = args.n_obs;
    }
    Ok(cases)
}

/// Runs the selected cases on a pool of `args.jobs` workers.
pub fn run_study_cases(args: &StudyArgs) -> Result<Vec<StudyResult>> {
    let cases = selected_cases(args)?;
    with_jobs(args.jobs, || cases.iter().map(|c| run_case(c, &args.ecm, args.seed)).collect::<Result<Vec<_>>>())?
}

fn write_estimates(path: &Path, results: &[StudyResult]) -> Result<()> {
    with_output(Some(path), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "case",
            "replicate",
            "kappa",
            "tau",
            "sigma",
            "mu",
            "gamma",
            "gamma_bar",
            "status",
            "iterations",
        ])?;
        for r in results {
            for o in &r.replicates {
                let est = o.estimate.map_or([f64::NAN; 6], |e| [e.kappa, e.tau, e.sigma, e.mu, e.gamma, e.gamma_bar]);
                let status = match (&o.status, &o.error) {
                    (Some(s), _) => format!("{s:?}"),
                    (None, Some(e)) => format!("Failed: {e}"),
                    (None, None) => "Failed".into(),
                };
                let mut rec = vec![r.case.label.to_string(), o.replicate.to_string()];
                rec.extend(est.map(format_f64));
                rec.extend([status, o.iterations.to_string()]);
                out.write_record(rec)?;
            }
        }
        out.flush()?;
        Ok(())
    })
}

fn run_study(args: &StudyArgs) -> Result<()> {
    if args.print_cases {
        return with_output(args.out.as_deref(), print_cases);
    }
    let results = run_study_cases(args)?;
    for r in &results {
        eprintln!(
            "case {}: {} replicates, {} failed, {:.1} s",
            r.case.label,
            r.replicates.len(),
            r.failures,
            r.runtime.as_secs_f64()
        );
    }
    if let Some(path) = &args.estimates {
        write_estimates(path, &results)?;
    }
    write_json(args.out.as_deref(), &results)
}

fn run_matrices(args: &MatricesArgs) -> Result<()> {
    let fd = assemble(&args.mesh.mesh(args.d)?)?;
    let n = fd.node_count();
    let mut mats = vec![
        ("mass", fd.mass().triplets().collect::<Vec<_>>()),
        ("lumped", (0..n).map(|i| (i, i, fd.lumped()[i])).collect()),
        ("stiffness", fd.stiffness().triplets().collect()),
    ];
    match (args.kappa, args.alpha) {
        (Some(k), alpha) => {
            mats.push(("operator", operator_matrix(&fd, k).triplets().collect()));
            if let Some(a) = alpha {
                mats.push(("k_alpha", k_alpha_even(&fd, k, a)?.triplets().collect()));
            }
        }
        (None, Some(_)) => return input("--alpha needs --kappa"),
        (None, None) => {}
    }
    with_output(args.out.as_deref(), |w| write_triplets(w, &mats))
}

fn load_config(path: &Path) -> Result<Value> {
    let v: Value = serde_json::from_reader(std::fs::File::open(path)?)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return input(format!("{}: configuration must be a JSON object", path.display()));
    }
    Ok(v)
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let c = config.as_ref();
    match cli.command {
        Command::Simulate(a) => run_simulate(&apply_config(a, c)?),
        Command::Density(a) => run_density(&apply_config(a, c)?),
        Command::Estimate(a) => run_estimate(&apply_config(a, c)?),
        Command::Study(a) => run_study(&apply_config(a, c)?),
        Command::Matrices(a) => run_matrices(&apply_config(a, c)?),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
