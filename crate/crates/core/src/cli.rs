//! Command-line driver: growth-bound sweeps, training, certification, mesh norm
//! sweeps and reference-solution output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bounds::{self, GrowthStrategy};
use crate::certifier::{self, format_real, CertificateConfig, CertifierError};
use crate::heat1d::{self, HeatError, HeatProblem, ReferenceMode, UNorm};
use crate::linalg::DenseMatrix;
use crate::meshboundary::{self, MeshError, SweepLevel, TriMesh};
use crate::pinn::{self, MlpModel, PinnError, TraceGrid, TrainConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input; exit code 2.
    #[error("{0}")]
    Input(String),
    /// Numerical failure at run time; exit code 1.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    input(format!("{}: {e}", path.display()))
}

fn from_pinn(context: &str, e: PinnError) -> CliError {
    match e {
        PinnError::DivergedLoss { .. } => CliError::Numerical(format!("{context}: {e}")),
        other => input(format!("{context}: {other}")),
    }
}

fn from_heat(context: &str, e: HeatError) -> CliError {
    match e {
        HeatError::QuadratureFailure { .. } => CliError::Numerical(format!("{context}: {e}")),
        other => input(format!("{context}: {other}")),
    }
}

fn from_certifier(context: &str, e: CertifierError) -> CliError {
    match e {
        CertifierError::InvalidConfig(_) => input(format!("{context}: {e}")),
        other => CliError::Numerical(format!("{context}: {other}")),
    }
}

fn from_mesh(context: &str, e: MeshError) -> CliError {
    match e {
        MeshError::Parse { .. }
        | MeshError::InvalidMesh(_)
        | MeshError::AmbiguousTag { .. }
        | MeshError::DegenerateTriangle { .. }
        | MeshError::ShapeMismatch(_) => input(format!("{context}: {e}")),
        other => CliError::Numerical(format!("{context}: {other}")),
    }
}

/// Flat `key = value` configuration; `#` starts a comment, lists are comma-separated.
#[derive(Debug, Clone, PartialEq)]
pub struct KvConfig {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KvConfig {
    pub fn empty(source: &str) -> Self {
        Self {
            source: source.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::empty(source);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| input(format!("{source}:{}: expected `key = value`, found `{line}`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(input(format!("{source}:{}: invalid key `{key}`", i + 1)));
            }
            if let Some((first, _)) = cfg.entries.get(key) {
                return Err(input(format!(
                    "{source}:{}: key `{key}` already set on line {first}",
                    i + 1
                )));
            }
            cfg.entries.insert(key.to_string(), (i + 1, value.trim().to_string()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Rejects keys outside `known`, which usually are typos.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(input(format!("{}:{line}: unknown key `{k}`", self.source))),
            None => Ok(()),
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| input(format!("{}: missing required key `{key}`", self.source)))
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| {
                input(format!(
                    "{}:{line}: key `{key}`: expected {what}, found `{v}`",
                    self.source
                ))
            }),
        }
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        match self.typed::<f64>(key, "a real number")? {
            Some(v) if !v.is_finite() => Err(input(format!(
                "{}:{}: key `{key}` must be finite",
                self.source, self.entries[key].0
            ))),
            other => Ok(other),
        }
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.typed::<usize>(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn flag_or(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.typed::<bool>(key, "true or false")?.unwrap_or(default))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|_| {
                    input(format!(
                        "{}:{line}: key `{key}`: expected a list of {what}, found `{v}`",
                        self.source
                    ))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn counts(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.list(key, "nonnegative integers")
    }

    pub fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key, "real numbers")
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pinncert",
    version,
    about = "A posteriori error certificates for PINN approximations of the heat equation"
)]
pub struct Cli {
    /// Seed for every random choice (overrides a `seed` key in config files).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Report limits as value + Cauchy defect and inflate quadrature panels by the curvature cap.
    #[arg(long, global = true)]
    pub strict_bound: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Growth bounds of the discretized heat generator for a list of grid sizes.
    BoundsSweep(BoundsSweepArgs),
    /// Train the heat PINN.
    Train(ConfigArg),
    /// Certify a trained model.
    Certify(CertifyArgs),
    /// Norms of boundary right inverses over a mesh refinement sweep.
    MeshNorms(MeshNormsArgs),
    /// Reference solution on a space-time grid.
    Reference(ConfigArg),
}

#[derive(Debug, Args)]
pub struct BoundsSweepArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated ascending grid sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// `closed_form` (default), `symmetric`, `log_norm` or `schur_defective`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// File with `M`, `omega`, `normD0`, `normAD0`; heat constants when absent.
    #[arg(long)]
    pub constants: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshNormsArgs {
    /// Mesh files, coarse to fine.
    #[arg(long, required = true, num_args = 1..)]
    pub mesh: Vec<PathBuf>,
    /// Optional generator matrices, one per mesh.
    #[arg(long, num_args = 1..)]
    pub matrix: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub mu_e: f64,
    /// Number of field components sharing the scalar boundary operator.
    #[arg(long, default_value_t = 1)]
    pub components: usize,
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the text summary printed on success.
pub fn execute(cli: &Cli) -> Result<String> {
    let inputs: Vec<&Path> = match &cli.command {
        Command::BoundsSweep(a) => a.config.iter().map(PathBuf::as_path).collect(),
        Command::Train(a) | Command::Reference(a) => a.config.iter().map(PathBuf::as_path).collect(),
        Command::Certify(a) => std::iter::once(a.checkpoint.as_path())
            .chain(a.config.as_deref())
            .chain(a.constants.as_deref())
            .collect(),
        Command::MeshNorms(a) => a.mesh.iter().chain(&a.matrix).map(PathBuf::as_path).collect(),
    };
    if let Some(missing) = inputs.iter().find(|p| !p.is_file()) {
        return Err(input(format!("{}: no such file", missing.display())));
    }
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    match &cli.command {
        Command::BoundsSweep(a) => cmd_bounds_sweep(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Certify(a) => cmd_certify(cli, a),
        Command::MeshNorms(a) => cmd_mesh_norms(cli, a),
        Command::Reference(a) => cmd_reference(cli, a),
    }
}

fn load_optional(path: &Option<PathBuf>, name: &str) -> Result<KvConfig> {
    match path {
        Some(p) => KvConfig::load(p),
        None => Ok(KvConfig::empty(name)),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

const LIMIT_TAIL: usize = 3;
const LIMIT_TOL: f64 = 1e-3;

fn cmd_bounds_sweep(cli: &Cli, a: &BoundsSweepArgs) -> Result<String> {
    let cfg = load_optional(&a.config, "bounds-sweep")?;
    cfg.check_known(&["alpha", "n_list", "strategy", "epsilon"])?;
    let alpha = match a.alpha {
        Some(v) => v,
        None => cfg.real_or("alpha", 1.0)?,
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(input(format!("alpha must be positive, got {alpha}")));
    }
    let n_list = match &a.n_list {
        Some(v) => v.clone(),
        None => cfg
            .counts("n_list")?
            .ok_or_else(|| input("missing required key `n_list`"))?,
    };
    if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(input("n_list must be nonempty, positive and strictly ascending"));
    }
    let strategy = a.strategy.clone().or_else(|| cfg.text("strategy").map(String::from));
    let epsilon = match a.epsilon {
        Some(e) => e,
        None => cfg.real_or("epsilon", 0.1)?,
    };

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in &n_list {
        let (m, omega) = match strategy.as_deref() {
            None | Some("closed_form") => (1.0, heat1d::omega_n(n, alpha)),
            Some(s) => {
                let strat = GrowthStrategy::from_str(s).map_err(input)?;
                let disc = heat1d::assemble(n, alpha).map_err(|e| from_heat("assemble", e))?;
                let gb = bounds::growth_bound(&disc.a, strat, epsilon)
                    .map_err(|e| CliError::Numerical(format!("n = {n}: {e}")))?;
                (gb.m, gb.omega)
            }
        };
        rows.push((n, m, omega));
    }
    let mut csv = String::from("n,omega\n");
    for (n, _, omega) in &rows {
        writeln!(csv, "{n},{}", format_real(*omega)).expect("string write");
    }
    let trailer = if rows.len() >= 2 {
        let seq = bounds::BoundSequence::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            1.0,
            1.0,
        )
        .map_err(|e| input(e.to_string()))?;
        let (m_star, w_star) = bounds::sequence_limit(&seq, LIMIT_TAIL.min(rows.len()), LIMIT_TOL)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let (w, m) = if cli.strict_bound {
            (w_star.strict_value(), m_star.strict_value())
        } else {
            (w_star.value, m_star.value)
        };
        format!(
            "# omega_star = {}, cauchy_defect = {}, M_star = {}, converged = {}, strict = {}\n",
            format_real(w),
            format_real(w_star.cauchy_defect),
            format_real(m),
            w_star.converged,
            cli.strict_bound
        )
    } else {
        "# omega_star undetermined (fewer than two grid sizes)\n".to_string()
    };
    csv.push_str(&trailer);
    let path = cli.out.join("bounds_sweep.csv");
    write_file(&path, &csv)?;
    Ok(format!("wrote {}\n{trailer}", path.display()))
}

const PROBLEM_KEYS: [&str; 3] = ["alpha", "t_end", "x0_sine"];

fn problem_from(cfg: &KvConfig) -> Result<HeatProblem> {
    let alpha = cfg.real_or("alpha", 0.2)?;
    let t_end = cfg.real_or("t_end", 0.5)?;
    let coefficients = cfg.reals("x0_sine")?.unwrap_or_else(|| vec![1.0]);
    HeatProblem::sine_series(alpha, t_end, coefficients).map_err(|e| from_heat("problem", e))
}

fn seed_from(cli: &Cli, cfg: &KvConfig) -> Result<u64> {
    Ok(match cli.seed {
        Some(s) => s,
        None => cfg.typed::<u64>("seed", "a nonnegative integer")?.unwrap_or(42),
    })
}

const TRAIN_KEYS: [&str; 16] = [
    "epochs",
    "seed",
    "layers",
    "a_evo",
    "a_init",
    "a_bc1",
    "a_bc2",
    "lambda_bc",
    "n_evo",
    "n_init",
    "n_bc",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "init",
];

/// Reads the training configuration; `epochs` is required.
pub fn train_config_from(cfg: &KvConfig, seed: u64) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let epochs: usize = cfg
        .require("epochs")?
        .parse()
        .map_err(|_| input(format!("{}: key `epochs`: expected a nonnegative integer", cfg.source)))?;
    let mut weights = d.weights;
    weights.a_evo = cfg.real_or("a_evo", weights.a_evo)?;
    weights.a_init = cfg.real_or("a_init", weights.a_init)?;
    weights.a_bc1 = cfg.real_or("a_bc1", weights.a_bc1)?;
    weights.a_bc2 = cfg.real_or("a_bc2", weights.a_bc2)?;
    if let Some(lambda) = cfg.real("lambda_bc")? {
        if cfg.contains("a_bc2") {
            return Err(input(format!(
                "{}: set either `a_bc2` or `lambda_bc`, not both",
                cfg.source
            )));
        }
        weights.a_bc2 = lambda * weights.a_bc1;
    }
    weights.n_evo = cfg.count_or("n_evo", weights.n_evo)?;
    weights.n_init = cfg.count_or("n_init", weights.n_init)?;
    weights.n_bc = cfg.count_or("n_bc", weights.n_bc)?;
    weights.validate().map_err(|e| input(e.to_string()))?;
    let adam = pinn::AdamConfig {
        lr: cfg.real_or("lr", d.adam.lr)?,
        beta1: cfg.real_or("beta1", d.adam.beta1)?,
        beta2: cfg.real_or("beta2", d.adam.beta2)?,
        eps: cfg.real_or("adam_eps", d.adam.eps)?,
    };
    Ok(TrainConfig {
        layer_sizes: cfg.counts("layers")?.unwrap_or(d.layer_sizes),
        epochs,
        seed,
        weights,
        adam,
    })
}

fn cmd_train(cli: &Cli, a: &ConfigArg) -> Result<String> {
    let cfg = load_optional(&a.config, "train")?;
    let known: Vec<&str> = TRAIN_KEYS.iter().chain(PROBLEM_KEYS.iter()).copied().collect();
    cfg.check_known(&known)?;
    let problem = problem_from(&cfg)?;
    let seed = seed_from(cli, &cfg)?;
    let tc = train_config_from(&cfg, seed)?;
    let model = match cfg.text("init") {
        None | Some("glorot") => MlpModel::new(&tc.layer_sizes, seed),
        Some("zeros") => MlpModel::zeros(&tc.layer_sizes),
        Some(other) => return Err(input(format!("unknown init `{other}` (expected glorot or zeros)"))),
    }
    .map_err(|e| from_pinn("model", e))?;
    let outcome = pinn::train(model, &problem, &tc).map_err(|e| from_pinn("train", e))?;
    let ckpt = cli.out.join("model.ckpt");
    let loss_csv = cli.out.join("loss.csv");
    write_file(&ckpt, &outcome.model.to_checkpoint())?;
    write_file(&loss_csv, &pinn::loss_history_csv(&outcome.history))?;
    let last = outcome.history.last().expect("at least one entry");
    Ok(format!(
        "optimizer: adam (lr {}, beta1 {}, beta2 {}, eps {}), {} epochs, seed {seed}\nfinal loss: {}\nwrote {} and {}\n",
        format_real(tc.adam.lr),
        format_real(tc.adam.beta1),
        format_real(tc.adam.beta2),
        format_real(tc.adam.eps),
        tc.epochs,
        format_real(last.total),
        ckpt.display(),
        loss_csv.display()
    ))
}

const CERTIFY_KEYS: [&str; 10] = [
    "n_t",
    "n_x",
    "u_norm",
    "quoted_d0",
    "split_initial",
    "curvature_cap",
    "reference",
    "n_ref",
    "ref_dt",
    "schema",
];

fn reference_mode(cfg: &KvConfig) -> Result<Option<ReferenceMode>> {
    match cfg.text("reference").unwrap_or("analytic") {
        "analytic" => Ok(Some(ReferenceMode::AnalyticSine)),
        "crank_nicolson" => Ok(Some(ReferenceMode::CrankNicolson {
            n_ref: cfg.count_or("n_ref", 400)?,
            dt: cfg.real_or("ref_dt", 1e-3)?,
        })),
        "none" => Ok(None),
        other => Err(input(format!(
            "unknown reference `{other}` (expected analytic, crank_nicolson or none)"
        ))),
    }
}

fn constants_from(path: &Path) -> Result<(f64, f64, f64, f64)> {
    let cfg = KvConfig::load(path)?;
    cfg.check_known(&["M", "omega", "normD0", "normAD0"])?;
    let get = |k: &str| -> Result<f64> {
        cfg.require(k)?;
        Ok(cfg.real(k)?.expect("present"))
    };
    Ok((get("M")?, get("omega")?, get("normD0")?, get("normAD0")?))
}

const REFERENCE_TOL: f64 = 1e-10;

fn cmd_certify(cli: &Cli, a: &CertifyArgs) -> Result<String> {
    let cfg = load_optional(&a.config, "certify")?;
    let known: Vec<&str> = CERTIFY_KEYS.iter().chain(PROBLEM_KEYS.iter()).copied().collect();
    cfg.check_known(&known)?;
    let problem = problem_from(&cfg)?;
    let ckpt_text = fs::read_to_string(&a.checkpoint).map_err(|e| io_err(&a.checkpoint, e))?;
    let model = MlpModel::from_checkpoint(&ckpt_text).map_err(|e| from_pinn(&a.checkpoint.display().to_string(), e))?;
    let u_norm = match cfg.text("u_norm") {
        Some(s) => UNorm::from_str(s).map_err(|e| input(format!("u_norm: {e}")))?,
        None => UNorm::default(),
    };
    let grid = TraceGrid {
        n_t: cfg.count_or("n_t", 201)?,
        n_x: cfg.count_or("n_x", 201)?,
        u_norm,
    };
    if grid.n_t < 2 || grid.n_x < 1 {
        return Err(input("need n_t >= 2 and n_x >= 1"));
    }
    let (m, omega, norm_d0, norm_ad0) = match &a.constants {
        Some(p) => constants_from(p)?,
        None => {
            let d0 = if cfg.flag_or("quoted_d0", false)? {
                heat1d::QUOTED_D0_NORM
            } else {
                heat1d::lift_norms(u_norm).0
            };
            (1.0, problem.omega_star(), d0, 0.0)
        }
    };
    let cap = cfg.real("curvature_cap")?;
    let cc = CertificateConfig {
        m,
        omega,
        norm_d0,
        norm_ad0,
        split_initial: cfg.flag_or("split_initial", false)?,
        curvature_cap: if cli.strict_bound { cap } else { None },
    };
    cc.validate().map_err(|e| from_certifier("constants", e))?;

    let trace = pinn::extract_trace(&model, &problem, &grid).map_err(|e| from_pinn("trace", e))?;
    let report = certifier::certify(&trace, &cc).map_err(|e| from_certifier("certify", e))?;
    let eps_ref = match reference_mode(&cfg)? {
        Some(mode) => {
            let reference = heat1d::reference_solution(&problem, mode).map_err(|e| from_heat("reference", e))?;
            Some(
                pinn::reference_errors(&model, &reference, &report.times, REFERENCE_TOL)
                    .map_err(|e| from_pinn("reference error", e))?,
            )
        }
        None => None,
    };
    let csv = match cfg.text("schema").unwrap_or("heat") {
        "heat" => certifier::heat_csv(&report, eps_ref.as_deref()),
        "general" => certifier::general_csv(&report, eps_ref.as_deref()),
        other => return Err(input(format!("unknown schema `{other}` (expected heat or general)"))),
    }
    .map_err(|e| from_certifier("csv", e))?;
    let path = cli.out.join("certificate.csv");
    write_file(&path, &csv)?;

    let mut summary = format!("wrote {}\n", path.display());
    if report.is_coarse() {
        eprintln!(
            "warning: max time step {} exceeds t_end/200; residuals may be undersampled",
            format_real(report.max_dt)
        );
    }
    if cli.strict_bound && cap.is_none() {
        writeln!(
            summary,
            "quadrature resolution: max dt = {} (no curvature cap given, panels not inflated)",
            format_real(report.max_dt)
        )
        .expect("string write");
    }
    if let Some(r) = &eps_ref {
        let dom = certifier::compare_to_reference(&report, r).map_err(|e| from_certifier("compare", e))?;
        writeln!(
            summary,
            "dominated: {}\nmin margin: {} at t = {}",
            dom.dominated,
            format_real(dom.min_margin),
            format_real(report.times[dom.argmin])
        )
        .expect("string write");
    }
    Ok(summary)
}

fn cmd_mesh_norms(cli: &Cli, a: &MeshNormsArgs) -> Result<String> {
    if !a.matrix.is_empty() && a.matrix.len() != a.mesh.len() {
        return Err(input(format!(
            "{} matrix files for {} meshes",
            a.matrix.len(),
            a.mesh.len()
        )));
    }
    if a.components == 0 || !(a.mu_e > 0.0 && a.mu_e.is_finite()) {
        return Err(input("components must be >= 1 and mu_e positive"));
    }
    let mut levels = Vec::with_capacity(a.mesh.len());
    for (k, path) in a.mesh.iter().enumerate() {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mesh = TriMesh::parse(&text).map_err(|e| from_mesh(&name, e))?;
        let (_, d0) = meshboundary::boundary_operator(&mesh, a.components).map_err(|e| from_mesh(&name, e))?;
        let matrix = match a.matrix.get(k) {
            Some(mp) => {
                let mname = mp.display().to_string();
                let mtext = fs::read_to_string(mp).map_err(|e| io_err(mp, e))?;
                Some(DenseMatrix::parse_text(&mtext).map_err(|e| input(format!("{mname}: {e}")))?)
            }
            None => None,
        };
        levels.push(SweepLevel { d0, a: matrix });
    }
    let sweep = meshboundary::norm_sweep(&levels, a.mu_e).map_err(|e| from_mesh("sweep", e))?;
    let mut csv = String::from("n,norm_D0,norm_AD0\n");
    for r in &sweep.rows {
        writeln!(
            csv,
            "{},{},{}",
            r.n,
            format_real(r.norm_d0),
            r.norm_ad0.map(format_real).unwrap_or_default()
        )
        .expect("string write");
    }
    let mut trailer = String::new();
    for (name, lim) in [("norm_D0", sweep.d0_limit), ("norm_AD0", sweep.ad0_limit)] {
        if let Some(l) = lim {
            let value = if cli.strict_bound { l.strict_value() } else { l.value };
            writeln!(
                trailer,
                "# {name}_limit = {}, cauchy_defect = {}, converged = {}, strict = {}",
                format_real(value),
                format_real(l.cauchy_defect),
                l.converged,
                cli.strict_bound
            )
            .expect("string write");
        }
    }
    csv.push_str(&trailer);
    let path = cli.out.join("mesh_norms.csv");
    write_file(&path, &csv)?;
    Ok(format!("wrote {}\n{trailer}", path.display()))
}

fn cmd_reference(cli: &Cli, a: &ConfigArg) -> Result<String> {
    let cfg = load_optional(&a.config, "reference")?;
    let known: Vec<&str> = ["n_t", "n_x", "reference", "n_ref", "ref_dt"]
        .iter()
        .chain(PROBLEM_KEYS.iter())
        .copied()
        .collect();
    cfg.check_known(&known)?;
    let problem = problem_from(&cfg)?;
    let mode = reference_mode(&cfg)?.ok_or_else(|| input("reference = none leaves nothing to write"))?;
    let reference = heat1d::reference_solution(&problem, mode).map_err(|e| from_heat("reference", e))?;
    let (n_t, n_x) = (cfg.count_or("n_t", 51)?, cfg.count_or("n_x", 51)?);
    if n_t < 2 || n_x < 2 {
        return Err(input("need n_t >= 2 and n_x >= 2"));
    }
    let mut csv = String::from("t,x,u\n");
    for i in 0..n_t {
        let t = problem.t_end * i as f64 / (n_t - 1) as f64;
        for j in 0..n_x {
            let x = j as f64 / (n_x - 1) as f64;
            writeln!(
                csv,
                "{},{},{}",
                format_real(t),
                format_real(x),
                format_real(reference.eval(t, x))
            )
            .expect("string write");
        }
    }
    let path = cli.out.join("reference.csv");
    write_file(&path, &csv)?;
    Ok(format!("wrote {}\n", path.display()))
}
