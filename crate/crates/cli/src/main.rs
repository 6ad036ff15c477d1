//! `qtlab`: exact formulas, the identity suite and Monte Carlo verification
//! campaigns, with JSON reports and CSV tables.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use qtlab::campaign::{
    divergence_campaign, gmc_campaign, length_law_campaign, radius_campaign, reversal_campaign, surfaces_campaign, DivergenceConfig,
    GmcConfig, LengthLawConfig, Outcome, RadiusConfig, ReversalConfig, SurfacesConfig,
};
use qtlab::gmc::GmcEstimator;
use qtlab::params::{LqgParams, RhoTriple};
use qtlab::suite::{run_identity_suite, SuiteConfig};
use qtlab::Error;

use report::{Report, ResidualRow};

const DEFAULT_SEED: u64 = 20240601;

#[derive(Parser, Debug)]
#[command(name = "qtlab", version, about = "Quantum triangle and SLE_kappa(rho) verification toolkit")]
struct Cli {
    /// Worker threads for Monte Carlo loops. Results do not depend on it.
    #[arg(long, global = true, env = "QTLAB_WORKERS")]
    workers: Option<usize>,

    /// Write the JSON report here.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Write the CSV table here (residuals for the identity suite, result
    /// rows for campaigns).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,

    /// JSON file with parameters for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Include wall-clock time in the report. Off by default so that
    /// reports are byte-identical across machines and worker counts.
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a closed-form quantity.
    Exact(ExactArgs),
    /// Run the analytic identity suite.
    VerifyIdentities(IdentityArgs),
    /// Conformal-derivative moments against the closed form.
    VerifyRadius(RadiusArgs),
    /// Running means on both sides of the critical exponent.
    VerifyDivergence(DivergenceArgs),
    /// Boundary GMC moments against the closed form.
    VerifyGmc(GmcArgs),
    /// Triangle boundary-length law from weighted field samples.
    VerifyLengthLaw(LengthLawArgs),
    /// Statistical reversibility of SLE_kappa(rho).
    VerifyReversal(ReversalArgs),
    /// Distributional tests of the radial processes and bead chains.
    VerifySurfaces(SurfacesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Formula {
    DeltaBeta,
    RBar,
    HBar,
    DiskDensity,
    TriangleDensity,
    Laplace,
    F,
    RadiusMoment,
    Alpha0,
    AlphaStar,
}

/// Coupling given either as `γ` or as `κ = γ²`.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct Coupling {
    #[arg(long, conflicts_with = "kappa")]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

impl Coupling {
    fn params(&self) -> Result<LqgParams, Error> {
        match (self.gamma, self.kappa) {
            (Some(g), None) => LqgParams::new(g),
            (None, Some(k)) => LqgParams::from_kappa(k),
            (Some(_), Some(_)) => Err(usage("give either --gamma or --kappa, not both")),
            (None, None) => Err(usage("missing --gamma or --kappa")),
        }
    }

    /// `κ` for SLE commands, which also accept `κ = 4`.
    fn kappa(&self) -> Result<f64, Error> {
        match (self.gamma, self.kappa) {
            (Some(g), None) => Ok(g * g),
            (None, Some(k)) => Ok(k),
            (Some(_), Some(_)) => Err(usage("give either --gamma or --kappa, not both")),
            (None, None) => Err(usage("missing --gamma or --kappa")),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RhoArgs {
    #[arg(long, allow_hyphen_values = true)]
    rho_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho1: Option<f64>,
}

impl RhoArgs {
    fn triple(&self) -> RhoTriple {
        RhoTriple::new(self.rho_minus.unwrap_or(0.0), self.rho_plus.unwrap_or(0.0), self.rho1.unwrap_or(0.0))
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ExactArgs {
    #[arg(long, value_enum)]
    formula: Option<Formula>,
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[command(flatten)]
    #[serde(flatten)]
    rho: RhoArgs,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta3: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    w3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct IdentityArgs {
    /// Points per randomised grid.
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Perturb every log double gamma evaluation by `eps z²` (self-test).
    #[arg(long)]
    perturb: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SleArgs {
    #[arg(long)]
    n_samples: Option<usize>,
    /// Loewner time horizon.
    #[arg(long)]
    t_max: Option<f64>,
    /// Step relative to the squared distance to the nearest force point.
    #[arg(long)]
    dt_rel: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RadiusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[command(flatten)]
    #[serde(flatten)]
    rho: RhoArgs,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    sle: SleArgs,
    /// Compare against this value instead of the closed form.
    #[arg(long, allow_hyphen_values = true)]
    expect_override: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct DivergenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[command(flatten)]
    #[serde(flatten)]
    rho: RhoArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sle: SleArgs,
    #[arg(long)]
    offset: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorArg {
    Direct,
    Rooted,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct GmcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta3: Option<f64>,
    /// Fine grid size, a power of two.
    #[arg(long)]
    n_grid: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, allow_hyphen_values = true)]
    expect_override: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct LengthLawArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    w3: Option<f64>,
    /// Lengths at which the density is estimated.
    #[arg(long, value_delimiter = ',')]
    ells: Option<Vec<f64>>,
    #[arg(long)]
    n_grid: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ReversalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[command(flatten)]
    #[serde(flatten)]
    rho: RhoArgs,
    #[arg(long, allow_hyphen_values = true)]
    alpha_obs: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    sle: SleArgs,
    #[arg(long)]
    min_ess: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SurfacesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    coupling: Coupling,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T, Error> {
    v.ok_or_else(|| usage(format!("missing --{flag}")))
}

/// Overlay the flags that were given onto the config file's values.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Value>) -> Result<T, Error> {
    let Some(file) = file else {
        return serde_json::from_value(serde_json::to_value(flags).map_err(|e| usage(e.to_string()))?).map_err(|e| usage(e.to_string()));
    };
    let mut base = file.as_object().cloned().ok_or_else(|| usage("config file must hold a JSON object"))?;
    if let Value::Object(given) = serde_json::to_value(flags).map_err(|e| usage(e.to_string()))? {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("config: {e}")))
}

/// What a command produced, before it is written out.
struct Run {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    outcome: Outcome,
    residuals: Option<Vec<ResidualRow>>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn exact_cmd(a: &ExactArgs) -> Result<Run, Error> {
    use qtlab::exact::*;
    use qtlab::harness::Exact;
    let formula = a.formula.ok_or_else(|| usage("missing --formula"))?;
    let rho = a.rho.triple();
    let value: Exact = match formula {
        Formula::DeltaBeta => Exact::Finite(delta_beta(need(a.beta, "beta")?, &a.coupling.params()?)),
        Formula::RBar => Exact::Finite(r_bar(need(a.beta, "beta")?, &a.coupling.params()?)?),
        Formula::HBar => {
            let p = a.coupling.params()?;
            let (b1, b2, b3) = (need(a.beta1, "beta1")?, need(a.beta2, "beta2")?, need(a.beta3, "beta3")?);
            seiberg_bounds(b1, b2, b3, &p).map_err(|m| Error::Domain(format!("Seiberg bound violated: {m}")))?;
            h_bar(b1, b2, b3, &p)?.as_moment()
        }
        Formula::DiskDensity => disk_length_density(need(a.w, "w")?, &a.coupling.params()?)?.at(need(a.ell, "ell")?),
        Formula::TriangleDensity => {
            let p = a.coupling.params()?;
            let tw = qtlab::params::TriangleWeights::new(need(a.w1, "w1")?, need(a.w2, "w2")?, need(a.w3, "w3")?, &p)?;
            triangle_length_density(&tw, &p)?.at(need(a.ell, "ell")?)
        }
        Formula::Laplace => {
            let p = a.coupling.params()?;
            let tw = qtlab::params::TriangleWeights::new(need(a.w1, "w1")?, need(a.w2, "w2")?, need(a.w3, "w3")?, &p)?;
            let cache = qtlab::specfun::DoubleGammaCache::default();
            ExactContext::new(&cache).triangle_length_laplace(&tw, need(a.mu, "mu")?, &p)?
        }
        Formula::F => Exact::Finite(f_function(need(a.x, "x")?, a.coupling.kappa()?, &rho)?),
        Formula::RadiusMoment => radius_moment_exact(&RadiusMomentQuery::new(a.coupling.kappa()?, rho, need(a.alpha, "alpha")?)?)?,
        Formula::Alpha0 => Exact::Finite(alpha0(a.coupling.kappa()?, &rho)),
        Formula::AlphaStar => Exact::Finite(reversal_alpha_star(a.coupling.kappa()?, rho.one)),
    };
    let row = qtlab::campaign::ResultRow {
        name: to_value(&formula).as_str().unwrap_or("value").to_string(),
        estimate: value.finite().unwrap_or(f64::INFINITY),
        stderr: 0.0,
        n: 0,
        ess: 0.0,
        exact: Some(value),
        z: None,
        pass: true,
    };
    Ok(Run {
        command: "exact",
        config: to_value(a),
        seed: None,
        outcome: Outcome { results: vec![row], gates: vec![] },
        residuals: None,
    })
}

fn identities_cmd(a: &IdentityArgs) -> Result<Run, Error> {
    let d = SuiteConfig::default();
    let cfg = SuiteConfig {
        grid_size: a.grid_size.unwrap_or(d.grid_size),
        seed: a.seed.unwrap_or(d.seed),
        perturbation: a.perturb.unwrap_or(0.0),
    };
    if cfg.grid_size < 2 {
        return Err(usage("--grid-size must be at least 2"));
    }
    let rows = run_identity_suite(&cfg);
    let outcome = report::identity_outcome(&rows);
    Ok(Run {
        command: "verify-identities",
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        outcome,
        residuals: Some(rows.iter().map(ResidualRow::from).collect()),
    })
}

fn sle_fill(a: &SleArgs, n: &mut usize, t: &mut f64, dt: &mut f64) {
    *n = a.n_samples.unwrap_or(*n);
    *t = a.t_max.unwrap_or(*t);
    *dt = a.dt_rel.unwrap_or(*dt);
}

fn radius_cmd(a: &RadiusArgs) -> Result<Run, Error> {
    let mut cfg = RadiusConfig::new(a.coupling.kappa()?, a.rho.triple(), need(a.alpha, "alpha")?, a.sle.seed.unwrap_or(DEFAULT_SEED));
    sle_fill(&a.sle, &mut cfg.n_samples, &mut cfg.t_max, &mut cfg.dt_rel);
    cfg.expect_override = a.expect_override;
    Ok(Run { command: "verify-radius", config: to_value(&cfg), seed: Some(cfg.seed), outcome: radius_campaign(&cfg)?, residuals: None })
}

fn divergence_cmd(a: &DivergenceArgs) -> Result<Run, Error> {
    let mut cfg = DivergenceConfig::new(a.coupling.kappa()?, a.rho.triple(), a.sle.seed.unwrap_or(DEFAULT_SEED));
    sle_fill(&a.sle, &mut cfg.n_samples, &mut cfg.t_max, &mut cfg.dt_rel);
    cfg.offset = a.offset.unwrap_or(cfg.offset);
    Ok(Run {
        command: "verify-divergence",
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        outcome: divergence_campaign(&cfg)?,
        residuals: None,
    })
}

fn gmc_cmd(a: &GmcArgs) -> Result<Run, Error> {
    let p = a.coupling.params()?;
    let betas = [need(a.beta1, "beta1")?, need(a.beta2, "beta2")?, need(a.beta3, "beta3")?];
    let mut cfg = GmcConfig::new(p.gamma, betas, a.seed.unwrap_or(DEFAULT_SEED));
    cfg.n_grid = a.n_grid.unwrap_or(cfg.n_grid);
    cfg.n_samples = a.n_samples.unwrap_or(cfg.n_samples);
    cfg.expect_override = a.expect_override;
    cfg.estimator = match a.estimator {
        Some(EstimatorArg::Direct) => GmcEstimator::Direct,
        _ => GmcEstimator::Rooted,
    };
    Ok(Run { command: "verify-gmc", config: to_value(&cfg), seed: Some(cfg.seed), outcome: gmc_campaign(&cfg)?, residuals: None })
}

fn length_law_cmd(a: &LengthLawArgs) -> Result<Run, Error> {
    let p = a.coupling.params()?;
    let w = [need(a.w1, "w1")?, need(a.w2, "w2")?, need(a.w3, "w3")?];
    let mut cfg = LengthLawConfig::new(p.gamma, w, a.seed.unwrap_or(DEFAULT_SEED));
    if let Some(e) = &a.ells {
        cfg.ells = e.clone();
    }
    cfg.n_grid = a.n_grid.unwrap_or(cfg.n_grid);
    cfg.n_samples = a.n_samples.unwrap_or(cfg.n_samples);
    Ok(Run {
        command: "verify-length-law",
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        outcome: length_law_campaign(&cfg)?,
        residuals: None,
    })
}

fn reversal_cmd(a: &ReversalArgs) -> Result<Run, Error> {
    let mut cfg = ReversalConfig::new(a.coupling.kappa()?, a.rho.triple(), need(a.alpha_obs, "alpha-obs")?, a.sle.seed.unwrap_or(DEFAULT_SEED));
    sle_fill(&a.sle, &mut cfg.n_samples, &mut cfg.t_max, &mut cfg.dt_rel);
    cfg.min_ess = a.min_ess.unwrap_or(cfg.min_ess);
    Ok(Run {
        command: "verify-reversal",
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        outcome: reversal_campaign(&cfg)?,
        residuals: None,
    })
}

fn surfaces_cmd(a: &SurfacesArgs) -> Result<Run, Error> {
    let p = a.coupling.params()?;
    let mut cfg = SurfacesConfig::new(p.gamma, a.seed.unwrap_or(DEFAULT_SEED));
    cfg.n_samples = a.n_samples.unwrap_or(cfg.n_samples);
    cfg.dt = a.dt.unwrap_or(cfg.dt);
    Ok(Run {
        command: "verify-surfaces",
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        outcome: surfaces_campaign(&cfg)?,
        residuals: None,
    })
}

fn dispatch(cli: &Cli, file: Option<&Value>) -> Result<Run, Error> {
    match &cli.command {
        Command::Exact(a) => exact_cmd(&merge(a, file)?),
        Command::VerifyIdentities(a) => identities_cmd(&merge(a, file)?),
        Command::VerifyRadius(a) => radius_cmd(&merge(a, file)?),
        Command::VerifyDivergence(a) => divergence_cmd(&merge(a, file)?),
        Command::VerifyGmc(a) => gmc_cmd(&merge(a, file)?),
        Command::VerifyLengthLaw(a) => length_law_cmd(&merge(a, file)?),
        Command::VerifyReversal(a) => reversal_cmd(&merge(a, file)?),
        Command::VerifySurfaces(a) => surfaces_cmd(&merge(a, file)?),
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Pole { .. } | Error::Resolution(_) => 2,
        Error::Quality(_) | Error::Degenerate(_) | Error::CurveHitOne { .. } | Error::Simulation { .. } => 3,
        Error::Numerical(_) => 1,
    }
}

fn run(cli: &Cli) -> Result<ExitCode, (u8, String)> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| (2, format!("cannot read {}: {e}", path.display())))?;
            Some(serde_json::from_str::<Value>(&text).map_err(|e| (2, format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let start = Instant::now();
    let r = dispatch(cli, file.as_ref()).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let wall = cli.timing.then(|| start.elapsed().as_secs_f64());
    let report = Report::new(r.command, r.config, &r.outcome, r.seed, wall);
    print!("{}", report.table());
    let io = |e: std::io::Error| (1u8, e.to_string());
    if let Some(path) = &cli.output {
        std::fs::write(path, report.to_json()).map_err(io)?;
    }
    if let Some(path) = &cli.csv {
        match &r.residuals {
            Some(rows) => report::write_residual_csv(path, rows),
            None => report::write_result_csv(path, &r.outcome),
        }
        .map_err(|e| (1u8, e.to_string()))?;
    }
    Ok(ExitCode::from(if r.outcome.pass() {
        0
    } else if r.outcome.quality_failure() {
        3
    } else {
        1
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
