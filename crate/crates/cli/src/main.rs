use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use kernel_bandits::design::{d_optimal_design, DEFAULT_DESIGN_MAX_ITER};
use kernel_bandits::harness::{
    parse_kernel_kind, read_points_csv, run_experiment, write_outputs, ActionsSpec, AdversarySpec, Algorithm,
    ExperimentConfig, Params, Seeds,
};
use kernel_bandits::proxy::{
    approximation_sup_error, build_proxy, effective_dimension, fit_profile, DecayFamily,
};
use kernel_bandits::quadprog::{quad_ew_sample, write_samples_csv};
use kernel_bandits::{Error, ErrorClass, KernelSpec, Point, QuadraticObjective, Result, StreamRng};

/// Adversarial online learning with kernel losses.
#[derive(Parser)]
#[command(name = "kbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over several seeds and report expected regret.
    Run(RunArgs),
    /// Build a proxy kernel and certify its sup error on a probe grid.
    ProxyCheck(ProxyArgs),
    /// Compute a D-optimal design over a feature set.
    Design(DesignArgs),
    /// Sample the exponential-weights density of a quadratic loss on the unit ball.
    SampleQuad(SampleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; other flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bandit_ew, fullinfo_ew or cg.
    #[arg(long)]
    algo: Option<String>,
    /// linear, quadratic, gaussian:SIGMA or poly:DEGREE:OFFSET.
    #[arg(long, default_value = "linear")]
    kernel: String,
    /// ball:K, random:K or a CSV file of points.
    #[arg(long, default_value = "ball:64")]
    actions: String,
    /// Input dimension for generated action sets.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// zero, iid_unit, iid_actions, fixed:w1,w2,... or a JSON object.
    #[arg(long, default_value = "iid_unit")]
    adversary: String,
    #[arg(long)]
    n: Option<usize>,
    /// Number of seeds, or a comma-separated list.
    #[arg(long, default_value = "20")]
    seeds: String,
    #[arg(long, default_value_t = 0)]
    adversary_seed: u64,
    /// `paper` or a JSON object with eta, gamma, m, eps, p.
    #[arg(long, default_value = "paper")]
    params: String,
    /// Override the norm bound G.
    #[arg(long)]
    norm_bound: Option<f64>,
    /// Directory for traces, diagnostics and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProxyArgs {
    #[arg(long, default_value = "gaussian:0.5")]
    kernel: String,
    /// Sample size.
    #[arg(long, default_value_t = 400)]
    p: usize,
    /// Proxy dimension; fitted from the eigendecay when omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Probe points per axis of [0, 1]^dim.
    #[arg(long, default_value_t = 50)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DesignArgs {
    /// CSV with one feature vector per row.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// CSV holding the symmetric matrix B, one row per line.
    #[arg(long = "B")]
    matrix: PathBuf,
    /// CSV holding the vector b, as one row or one column.
    #[arg(long = "b")]
    vector: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::ProxyCheck(a) => proxy_check(a),
        Command::Design(a) => design(a),
        Command::SampleQuad(a) => sample_quad(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Precondition => 3,
                ErrorClass::Numerical => 4,
            })
        }
    }
}

fn experiment_config(a: &RunArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &a.config {
        return ExperimentConfig::from_json(&std::fs::read_to_string(path)?);
    }
    let algo: Algorithm = a.algo.as_deref().ok_or_else(|| Error::Input("--algo is required".into()))?.parse()?;
    let n = a.n.ok_or_else(|| Error::Input("--n is required".into()))?;
    let seeds = if a.seeds.contains(',') {
        Seeds::List(a.seeds.split(',').map(|s| parse(s.trim())).collect::<Result<_>>()?)
    } else {
        Seeds::Count(parse(&a.seeds)?)
    };
    let params = if a.params == "paper" {
        Params::Named(a.params.clone())
    } else {
        Params::Manual(serde_json::from_str(&a.params).map_err(|e| Error::Input(format!("bad --params: {e}")))?)
    };
    let cfg = ExperimentConfig {
        algo,
        kernel: a.kernel.clone(),
        norm_bound: a.norm_bound,
        actions: ActionsSpec::Named(a.actions.clone()),
        dim: a.dim,
        adversary: a.adversary.parse::<AdversarySpec>()?,
        n,
        seeds,
        adversary_seed: a.adversary_seed,
        params,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Input(format!("cannot parse {s:?}")))
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    let output = run_experiment(&cfg)?;
    if let Some(dir) = &a.out {
        write_outputs(dir, &cfg, &output)?;
    }
    println!("{}", serde_json::to_string_pretty(&output.report)?);
    Ok(())
}

fn unit_grid(per_axis: usize, dim: usize) -> Result<Vec<Point>> {
    if per_axis < 2 || dim == 0 {
        return Err(Error::Input("grid needs at least 2 points per axis and dim >= 1".into()));
    }
    let total = per_axis.checked_pow(dim as u32).filter(|&t| t <= 1_000_000);
    let total = total.ok_or_else(|| Error::Input("probe grid larger than 10^6 points".into()))?;
    (0..total)
        .map(|mut idx| {
            let coords = (0..dim)
                .map(|_| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    i as f64 / (per_axis - 1) as f64
                })
                .collect();
            Point::new(coords)
        })
        .collect()
}

fn proxy_check(a: ProxyArgs) -> Result<()> {
    let kernel = KernelSpec::new(parse_kernel_kind(&a.kernel)?, 1.0)?;
    let probes = unit_grid(a.grid, a.dim)?;
    let dim = a.dim;
    let sampler = move |rng: &mut StreamRng| {
        Point::new((0..dim).map(|_| rng.uniform()).collect()).expect("uniform draws are finite")
    };
    let mut rng = StreamRng::new(a.seed, "proxy");
    let fit_m = a.m.unwrap_or(a.p.min(32)).min(a.p);
    let build = build_proxy(&kernel, &sampler, fit_m, a.p, None, &mut rng)?;
    let (m, profile) = match a.m {
        Some(m) => (m, None),
        None => {
            let profile = fit_profile(&build, DecayFamily::Exponential, &probes)?;
            (effective_dimension(&profile, a.eps)?, Some(profile))
        }
    };
    let basis = build.basis.truncate(m.min(build.basis.m()));
    let sup_error = approximation_sup_error(&kernel, &basis, &probes)?;
    let report = json!({
        "kernel": kernel,
        "p": a.p,
        "m": basis.m(),
        "requested_m": m,
        "reduced": basis.m() < m,
        "eps": a.eps,
        "sup_error": sup_error,
        "certified": sup_error <= a.eps,
        "probes": probes.len(),
        "eigenvalues": basis.eigenvalues().as_slice(),
        "profile": profile,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let points = read_points_csv(BufReader::new(File::open(path)?))?;
    if points.is_empty() {
        return Err(Error::Input(format!("{} holds no rows", path.display())));
    }
    Ok(points.into_iter().map(|p| p.coords().to_vec()).collect())
}

fn design(a: DesignArgs) -> Result<()> {
    let features: Vec<DVector<f64>> = read_rows(&a.features)?.into_iter().map(DVector::from_vec).collect();
    let d = d_optimal_design(&features, DEFAULT_DESIGN_MAX_ITER, a.tol)?;
    eprintln!("max variance {:.12} after {} iterations", d.max_variance, d.iterations);
    let mut out = output(&a.out)?;
    d.distribution.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn sample_quad(a: SampleArgs) -> Result<()> {
    let rows = read_rows(&a.matrix)?;
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Input("B must be square".into()));
    }
    let b = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    let v = read_rows(&a.vector)?;
    let lin: Vec<f64> = if v.len() == 1 { v[0].clone() } else { v.iter().map(|r| r[0]).collect() };
    if lin.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: lin.len() });
    }
    let obj = QuadraticObjective::new(b, DVector::from_vec(lin))?;
    let mut rng = StreamRng::new(a.seed, "sample-quad");
    let draws = quad_ew_sample(&obj, a.count, a.burn_in, &mut rng)?;
    eprintln!("burn-in {} steps; lag-1 autocorrelation {:?}", draws.burn_in, draws.lag1_autocorr);
    let mut out = output(&a.out)?;
    write_samples_csv(&draws.samples, &mut out)?;
    out.flush()?;
    Ok(())
}
