mod config;
mod error;
mod setup;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use singular_bound::bernstein::{logistic_loss_constants, squared_loss_constants, BernsteinConstants};
use singular_bound::experiment::{self, ScalingRow};
use singular_bound::gibbs;
use singular_bound::mcmc::{BoxPrior, ChainConfig};
use singular_bound::partition::{self, PartitionEstimate, Schedule};
use singular_bound::rlct::{self, NormalCrossingChart, Rational};

use config::Config;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "singular-bound", version, about = "RLCT-based PAC-Bayes certificates and Gibbs posterior experiments")]
struct Cli {
    /// Override the base seed (`seed` in config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Real log canonical thresholds.
    Rlct {
        #[command(subcommand)]
        target: RlctTarget,
        /// Print JSON instead of a table.
        #[arg(long, global = true)]
        json: bool,
    },
    /// Bernstein constants and the learning-rate cap.
    Constants {
        #[command(subcommand)]
        loss: ConstantsLoss,
    },
    /// Evaluate the risk certificate for a configured model.
    Certify {
        config: PathBuf,
        /// Sample size (overrides `gibbs.n`).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Estimate -log Z(n) for a normal-crossing integrand.
    EstimateZ(EstimateZArgs),
    /// Sample the Gibbs posterior once and write the chains.
    GibbsRun { config: PathBuf },
    /// Scaling study over a grid of sample sizes.
    Experiment { config: PathBuf },
    /// Print a documented configuration template.
    Template,
}

#[derive(Subcommand)]
enum RlctTarget {
    /// Matrix completion `d1 d2 H r`, both methods side by side.
    Completion { d1: u32, d2: u32, h: u32, r: u32 },
    /// Upper bound from the widths of the true ReLU network.
    Relu {
        #[arg(required = true, num_args = 2..)]
        widths: Vec<u32>,
    },
    /// Normal-crossing charts from a JSON file `[{"k": [..], "h": [..]}, ..]`.
    Charts { file: PathBuf },
    /// Regular model with `d` parameters.
    Bic { d: u64 },
}

#[derive(Subcommand)]
enum ConstantsLoss {
    Squared {
        #[arg(long)]
        b0: f64,
        #[arg(long)]
        sigma: f64,
    },
    Logistic {
        #[arg(long)]
        b3: f64,
        #[arg(long)]
        tau: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ZMethod {
    Quadrature,
    Thermo,
}

#[derive(Args)]
struct EstimateZArgs {
    /// Risk exponents `k` (risk is the product of u_j^{2k_j}).
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    /// Jacobian exponents `h`; zeros when omitted.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<u32>>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', conflicts_with = "log_n")]
    n: Option<Vec<f64>>,
    /// Sample sizes given as log n.
    #[arg(long, value_delimiter = ',')]
    log_n: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: ZMethod,
    /// Starting quadrature points per axis.
    #[arg(long, default_value_t = 64)]
    points: usize,
    /// Thermodynamic integration rungs.
    #[arg(long, default_value_t = 64)]
    rungs: usize,
    /// Iterations per rung including burn-in.
    #[arg(long, default_value_t = 20_000)]
    chain_length: usize,
    #[arg(long, default_value_t = 4_000)]
    burn_in: usize,
    /// Fit the RLCT from the estimates.
    #[arg(long)]
    fit: bool,
    /// Include -log log n in the fit.
    #[arg(long)]
    loglog: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let globals = Globals { seed: cli.seed, out: cli.out };
    match cli.command {
        Command::Rlct { target, json } => cmd_rlct(target, json),
        Command::Constants { loss } => cmd_constants(loss),
        Command::Certify { config, n } => cmd_certify(&globals, &config, n),
        Command::EstimateZ(args) => cmd_estimate_z(&globals, args),
        Command::GibbsRun { config } => cmd_gibbs_run(&globals, &config),
        Command::Experiment { config } => cmd_experiment(&globals, &config),
        Command::Template => {
            print!("{}", Config::template());
            Ok(())
        }
    }
}

struct Globals {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Globals {
    /// Read a config and fold the global overrides into it.
    fn load(&self, path: &Path) -> CliResult<Config> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Config::parse(&text)?;
        if let Some(s) = self.seed {
            config.set("seed", s.to_string())?;
        }
        if let Some(o) = &self.out {
            config.set("output.dir", o.display().to_string())?;
        }
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn prepare_dir(config: &Config) -> CliResult<PathBuf> {
    let dir = PathBuf::from(config.string("output.dir")?);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.resolved"), config.resolved())?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_rlct(target: RlctTarget, json: bool) -> CliResult<()> {
    match target {
        RlctTarget::Completion { d1, d2, h, r } => {
            let rep = rlct::compare_completion_rlct(d1, d2, h, r)?;
            if json {
                return print_json(&rep);
            }
            println!("dims          d1={d1} d2={d2} H={h} r={r}");
            println!("regime        {}", rep.regime.label());
            println!("discrete      lambda={} m={}", rep.discrete.lambda, rep.discrete.m);
            println!("closed form   lambda={} m={}", rep.closed_form.lambda, rep.closed_form.m);
            println!("agree         {}", if rep.agree { "yes" } else { "no" });
            if !rep.agree {
                println!("discrepancy   {}", rep.discrepancy);
            }
            println!("d/2           {}", Rational::new(rep.dims.parameter_count() as i64, 2));
        }
        RlctTarget::Relu { widths } => {
            let lambda = rlct::relu_rlct_upper_bound(&widths)?;
            if json {
                return print_json(&json!({ "widths": widths, "lambda_upper": rlct_json(&lambda) }));
            }
            println!("widths        {widths:?}");
            println!("lambda <=     {lambda}");
        }
        RlctTarget::Charts { file } => {
            let text = fs::read_to_string(&file).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", file.display())))?;
            let raw: Vec<NormalCrossingChart> =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
            let charts = raw.into_iter().map(|c| NormalCrossingChart::new(c.k, c.h)).collect::<Result<Vec<_>, _>>()?;
            let pair = rlct::normal_crossing_rlct(&charts)?;
            let poles: Vec<Vec<Option<String>>> =
                charts.iter().map(|c| c.candidates().map(|p| p.map(|r| r.to_string())).collect()).collect();
            if json {
                return print_json(&json!({ "rlct": pair, "poles": poles }));
            }
            for (i, p) in poles.iter().enumerate() {
                let shown: Vec<String> = p.iter().map(|v| v.clone().unwrap_or_else(|| "inf".into())).collect();
                println!("chart {i}       poles {}", shown.join(" "));
            }
            println!("lambda={} m={}", pair.lambda, pair.m);
        }
        RlctTarget::Bic { d } => {
            let lambda = rlct::regular_bic_lambda(d)?;
            if json {
                return print_json(&json!({ "d": d, "lambda": rlct_json(&lambda), "m": 1 }));
            }
            println!("lambda={lambda} m=1");
        }
    }
    Ok(())
}

fn rlct_json(r: &Rational) -> serde_json::Value {
    json!({ "num": r.numer(), "den": r.denom() })
}

fn cmd_constants(loss: ConstantsLoss) -> CliResult<()> {
    let c: BernsteinConstants = match loss {
        ConstantsLoss::Squared { b0, sigma } => squared_loss_constants(b0, sigma)?,
        ConstantsLoss::Logistic { b3, tau } => logistic_loss_constants(b3, tau)?,
    };
    print_json(&c)
}

fn cmd_certify(g: &Globals, path: &Path, n: Option<usize>) -> CliResult<()> {
    let mut config = g.load(path)?;
    if let Some(n) = n {
        config.set("gibbs.n", n.to_string())?;
    }
    let s = setup::build(&config)?;
    let cert = s.certificate(&config, config.require("gibbs.n")?)?;
    let dir = prepare_dir(&config)?;
    write_json(&dir.join("certificate.json"), &cert)?;
    print_json(&cert)
}

fn cmd_estimate_z(g: &Globals, a: EstimateZArgs) -> CliResult<()> {
    let d = a.k.len();
    let h = a.h.clone().unwrap_or_else(|| vec![0; d]);
    if h.len() != d {
        return Err(CliError::Usage(format!("--k has {d} entries but --h has {}", h.len())));
    }
    let ns: Vec<f64> = match (&a.n, &a.log_n) {
        (Some(n), None) => n.clone(),
        (None, Some(l)) => l.iter().map(|v| v.exp()).collect(),
        _ => return Err(CliError::Usage("give exactly one of --n or --log-n".into())),
    };
    if ns.iter().any(|&n| !(n > 0.0)) {
        return Err(CliError::Usage("sample sizes must be positive".into()));
    }
    let k = a.k.clone();
    let risk = move |u: &[f64]| u.iter().zip(&k).map(|(x, &kj)| x.powi(2 * kj as i32)).product::<f64>();
    let seed = g.seed.unwrap_or(1);
    let estimates: Vec<PartitionEstimate> = match a.method {
        ZMethod::Quadrature => ns
            .iter()
            .map(|&n| partition::neg_log_z_quadrature(&risk, &h, a.beta, n, a.points))
            .collect::<Result<_, _>>()?,
        ZMethod::Thermo => {
            if h.iter().any(|&v| v != 0) {
                return Err(CliError::Usage("thermo integration samples a uniform prior; use h = 0".into()));
            }
            let prior = BoxPrior::cube(d, 0.0, 1.0)?;
            let schedule = Schedule::geometric(a.rungs, 1e-6)?;
            let chain = ChainConfig::new(a.chain_length, a.burn_in, 1)?;
            ns.iter()
                .enumerate()
                .map(|(i, &n)| {
                    partition::thermo_integration_neg_log_z(&risk, &prior, a.beta, n, &schedule, &chain, singular_bound::rng::derive_seed(seed, &[i as u64]))
                        .map(|(e, _)| e)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let dir = g.out_dir();
    fs::create_dir_all(&dir)?;
    partition::write_estimates_csv(&estimates, fs::File::create(dir.join("partition.csv"))?)?;
    for e in &estimates {
        println!("n={:<14} -log Z={:.9} se={:.3e}", e.n, e.neg_log_z, e.std_err);
    }
    if a.fit || a.loglog {
        let fit = partition::fit_rlct_from_partition(&estimates, a.loglog)?;
        write_json(&dir.join("fit.json"), &fit)?;
        print_json(&fit)?;
    }
    Ok(())
}

fn cmd_gibbs_run(g: &Globals, path: &Path) -> CliResult<()> {
    let config = g.load(path)?;
    let s = setup::build(&config)?;
    let n: usize = config.require("gibbs.n")?;
    let (data_seed, chain_seed, _) = experiment::cell_seeds(s.seed, n, 0);
    let template = s.gibbs_template(&config, n)?;
    let gibbs_config = gibbs::GibbsConfig { seed: chain_seed, ..template };
    let dir = prepare_dir(&config)?;
    let (samples, post) = with_model!(&s.problem, m => {
        let data = singular_bound::model::LossModel::generate(m, n, data_seed);
        let samples = gibbs::sample_gibbs_posterior(m, &data, &gibbs_config)?;
        let post = gibbs::posterior_mean_excess_risk(&samples.draws, m)?;
        (samples, post)
    });
    samples.write_csv(fs::File::create(dir.join("chains.csv"))?)?;
    let cert = s.certificate(&config, n).ok();
    let summary = json!({
        "n": n,
        "omega": s.omega,
        "omega_bar": s.constants.omega_bar,
        "draws": samples.draws.len(),
        "mean_acceptance": samples.mean_acceptance(),
        "total_ess": samples.total_ess(),
        "chains": samples.diagnostics,
        "post_risk": post.0,
        "post_risk_se": post.1,
        "certificate": cert,
    });
    write_json(&dir.join("gibbs_summary.json"), &summary)?;
    print_json(&summary)
}

fn cmd_experiment(g: &Globals, path: &Path) -> CliResult<()> {
    let config = g.load(path)?;
    let s = setup::build(&config)?;
    let ns: Vec<usize> = config.list("grid.n")?;
    if ns.len() < 4 {
        return Err(CliError::Usage(format!("grid.n needs at least 4 sample sizes, got {}", ns.len())));
    }
    let replicates: usize = config.require("grid.replicates")?;
    let formats: Vec<String> = config.list("output.formats")?;
    if let Some(f) = formats.iter().find(|f| !matches!(f.as_str(), "csv" | "svg" | "json")) {
        return Err(CliError::Usage(format!("unknown output format '{f}'")));
    }
    let thermo = setup::thermo_spec(&config)?;
    // Validate constraints once up front so a bad config fails before sampling.
    let template = s.gibbs_template(&config, ns[0])?;
    s.certificate(&config, ns[0].max(3))?;
    let bound = |n: usize| s.certificate(&config, n).map(|c| c.bound).map_err(to_core);
    let rows = with_model!(&s.problem, m => experiment::scaling_study(m, &template, &ns, replicates, s.seed, bound, thermo.as_ref())?);

    let dir = prepare_dir(&config)?;
    let wants = |f: &str| formats.iter().any(|x| x == f);
    if wants("csv") {
        experiment::write_rows_csv(&rows, fs::File::create(dir.join("scaling.csv"))?)?;
    }
    if wants("svg") {
        fs::write(dir.join("scaling.svg"), scaling_svg(&rows))?;
    }
    let failures: Vec<&ScalingRow> = rows.iter().filter(|r| r.failed()).collect();
    let fit = match &thermo {
        Some(t) => Some(experiment::fit_from_rows(&rows, t.beta, config.flag("thermo.loglog")?)),
        None => None,
    };
    if wants("json") {
        if let Some(Ok(f)) = &fit {
            write_json(&dir.join("fit.json"), f)?;
        }
        let fail_json: Vec<_> = failures.iter().map(|r| json!({ "n": r.n, "replicate": r.replicate, "error": r.error })).collect();
        write_json(&dir.join("failures.json"), &fail_json)?;
    }
    for (n, mean, se) in experiment::average_by_n(&rows, |r| r.post_risk) {
        println!("n={n:<8} post_risk={mean:.6e} se={se:.2e}");
    }
    if let Some(fit) = fit {
        match fit {
            Ok(f) => println!("lambda_hat={:.4} loglog_coef={:.4}", f.lambda_hat, f.loglog_coef),
            Err(e) => eprintln!("warning: RLCT fit failed: {e}"),
        }
    }
    if !failures.is_empty() {
        eprintln!("warning: {} of {} cells failed; see failures.json", failures.len(), rows.len());
        for r in &failures {
            eprintln!("  n={} replicate={}: {}", r.n, r.replicate, r.error.as_deref().unwrap_or(""));
        }
    }
    Ok(())
}

fn to_core(e: CliError) -> singular_bound::Error {
    match e {
        CliError::Core(c) => c,
        other => singular_bound::Error::InvalidArgument(other.to_string()),
    }
}

fn scaling_svg(rows: &[ScalingRow]) -> String {
    let risk: Vec<(f64, f64)> = experiment::average_by_n(rows, |r| r.post_risk).into_iter().map(|(n, m, _)| (n as f64, m)).collect();
    let bound: Vec<(f64, f64)> = experiment::average_by_n(rows, |r| r.bound).into_iter().map(|(n, m, _)| (n as f64, m)).collect();
    svg::log_log_plot(
        "posterior-mean excess risk and certificate",
        "n",
        "excess risk",
        &[
            svg::Series { label: "posterior risk", color: "#1f77b4", points: risk },
            svg::Series { label: "certificate", color: "#d62728", points: bound },
        ],
    )
}
