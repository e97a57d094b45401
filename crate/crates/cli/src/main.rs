use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ftkreg::estimator::{Estimator, PsiFamily};
use ftkreg::funcdata::{read_curve_csv, read_dataset_csv, write_dataset_csv};
use ftkreg::harness::{sim1, sim2};
use ftkreg::inference::{asymptotic_interval, bootstrap_interval, quantile_interval, CIResult, WeightLaw};
use ftkreg::simulate::{generate, SimSpec};
use ftkreg::EstimatorConfig;

#[derive(Parser)]
#[command(name = "ftkreg", version, about = "Kernel regression for sampled continuous-time functional data")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Confidence interval for m_psi(x) at every curve of --x.
    Ci(CiArgs),
    /// Draw one dataset from a simulation spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continuous versus discrete sampling study.
    Sim1 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sampling-mesh study.
    Sim2 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Asymptotic,
    Bootstrap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Exp,
    Multinomial,
}

#[derive(clap::Args)]
struct CiArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Curve CSV with one or more query curves.
    #[arg(long)]
    x: PathBuf,
    /// identity, cdf:<y> or quantile:<a>.
    #[arg(long, default_value = "identity")]
    psi: String,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "asymptotic")]
    method: Method,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exp")]
    weights: Weights,
    /// Estimator settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Target {
    Psi(PsiFamily),
    Quantile(f64),
}

fn parse_target(s: &str) -> Result<Target> {
    if s == "identity" {
        return Ok(Target::Psi(PsiFamily::Identity));
    }
    let (kind, value) = s.split_once(':').with_context(|| format!("unknown --psi `{s}`"))?;
    let v: f64 = value.parse().with_context(|| format!("bad number in --psi `{s}`"))?;
    match kind {
        "cdf" => Ok(Target::Psi(PsiFamily::IndicatorLeq(v))),
        "quantile" if v > 0.0 && v < 1.0 => Ok(Target::Quantile(v)),
        "quantile" => bail!("quantile level must be in (0,1), got {v}"),
        _ => bail!("unknown --psi `{s}`"),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_ci(args: &CiArgs) -> Result<()> {
    let cfg: EstimatorConfig = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => EstimatorConfig::default(),
    };
    if !(args.level > 0.0 && args.level < 1.0) {
        bail!("--level must be in (0,1), got {}", args.level);
    }
    let risk = 1.0 - args.level;
    let target = parse_target(&args.psi)?;
    let ds = read_dataset_csv(BufReader::new(File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?))?;
    let xs = read_curve_csv(BufReader::new(File::open(&args.x).with_context(|| format!("opening {}", args.x.display()))?))?;
    let est = Estimator::new(&ds, &cfg)?;
    let law = match args.weights {
        Weights::Exp => WeightLaw::UnitExponential,
        Weights::Multinomial => WeightLaw::Multinomial,
    };

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "point,lower,upper,method,h,p_hat,Fx_hat,M1,M2,W2bar")?;
    for (i, x) in xs.iter().enumerate() {
        let fit = est.at(x).with_context(|| format!("query curve {i}"))?;
        let ci: CIResult = match (&target, args.method) {
            (Target::Psi(psi), Method::Asymptotic) => asymptotic_interval(&fit, *psi, risk, cfg.tau_grid_points),
            (Target::Psi(psi), Method::Bootstrap) => {
                bootstrap_interval(&fit, *psi, risk, args.b, law, args.seed, cfg.tau_grid_points)
            }
            (Target::Quantile(a), Method::Asymptotic) => {
                quantile_interval(&fit, *a, risk, cfg.tau_grid_points, cfg.density_floor, None)
            }
            (Target::Quantile(_), Method::Bootstrap) => {
                bail!("bootstrap intervals are available for identity and cdf targets only")
            }
        }
        .with_context(|| format!("query curve {i}"))?;
        let c = &ci.components;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            ci.point, ci.lower, ci.upper, ci.method, ci.h, c.p, c.fx, c.m1, c.m2, c.w2bar
        )?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Ci(args) => run_ci(args),
        Command::Simulate { spec, out } => {
            let spec: SimSpec = read_json(spec)?;
            let ds = generate(&spec)?;
            let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
            write_dataset_csv(&ds, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Sim1 { config, out_dir } => {
            let cfg: sim1::Sim1Config = match config {
                Some(p) => read_json(p)?,
                None => Default::default(),
            };
            let out = sim1::run_sim1(&cfg)?;
            sim1::write_sim1(out_dir, &cfg, &out)?;
            print!("{}", sim1::table1_csv(&out));
            Ok(())
        }
        Command::Sim2 { config, out_dir } => {
            let cfg: sim2::Sim2Config = match config {
                Some(p) => read_json(p)?,
                None => Default::default(),
            };
            let out = sim2::run_sim2(&cfg)?;
            sim2::write_sim2(out_dir, &cfg, &out)?;
            print!("{}", sim2::table2_csv(&out));
            Ok(())
        }
    }
}
