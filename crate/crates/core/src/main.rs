use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use ldsubset::discrepancy::{BaseKernelSpec, DiscrepancyObjective};
use ldsubset::harness::{
    build_objective, build_population, run_experiment_to, run_method, ExperimentConfig, ExperimentKind, Method,
    PopulationSource,
};
use ldsubset::population::{default_mixture, generate_gaussian_mixture, generate_uniform};
use ldsubset::{PointSet, Result, RngSeed, SubsetSelection};

#[derive(Parser)]
#[command(name = "ldsubset", version, about = "Low-discrepancy subset selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Star,
    L2sym,
    Mmd,
}

impl Objective {
    fn experiment(self) -> ExperimentKind {
        match self {
            Objective::Star => ExperimentKind::Star,
            Objective::L2sym => ExperimentKind::SymmetricL2,
            Objective::Mmd => ExperimentKind::MmdMixture,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Random,
    Gls,
    BoDs,
    BoDe,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Random => Method::Random,
            MethodArg::Gls => Method::Gls,
            MethodArg::BoDs => Method::BoDs,
            MethodArg::BoDe => Method::BoDe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Uniform,
    Mixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Exp1,
    Exp2,
    Exp3,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random population to CSV.
    Generate {
        #[arg(long, value_enum, default_value = "uniform")]
        distribution: Distribution,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write a header row.
        #[arg(long)]
        header: bool,
    },
    /// Evaluate one subset.
    Eval {
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long)]
        population: PathBuf,
        /// MMD reference set (defaults to the population).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// JSON array of population indices.
        #[arg(long)]
        subset: PathBuf,
        /// CSV files have a header row.
        #[arg(long)]
        header: bool,
        /// RBF bandwidth for MMD.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
    },
    /// Run one method and write its trace.
    Run {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Use this population instead of generating one.
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long)]
        header: bool,
        /// Answer repeated subsets from memory without spending budget.
        #[arg(long)]
        memoize: bool,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
    },
    /// Run a multi-seed experiment and write its outputs to a directory.
    Experiment {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', conflicts_with = "num_seeds")]
        seeds: Option<Vec<u64>>,
        /// Use seeds 0..K.
        #[arg(long)]
        num_seeds: Option<u64>,
        /// Comma-separated subset of random, gls, bo-ds, bo-de.
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Option<Vec<MethodArg>>,
        #[arg(long)]
        memoize: bool,
    },
}

/// `%.12g`-style formatting.
fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{:.*e}", digits - 1, v);
    // Rounding can bump the exponent, so read it back from the output.
    let exp = sci.split('e').nth(1).and_then(|e| e.parse::<i32>().ok()).unwrap_or(exp);
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let (mantissa, e) = sci.split_once('e').expect("scientific format");
        format!("{}e{}{:02}", trim(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, e.trim_start_matches('-').parse::<i32>().unwrap_or(0))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    }
}

fn eval(
    objective: Objective,
    population: PathBuf,
    reference: Option<PathBuf>,
    subset: PathBuf,
    header: bool,
    sigma: f64,
) -> Result<()> {
    let pop = Arc::new(PointSet::read_csv(&population, header)?);
    let sel = SubsetSelection::read_json(&subset, pop.len())?;
    let obj = match objective {
        Objective::Star => DiscrepancyObjective::star(pop)?,
        Objective::L2sym => DiscrepancyObjective::l2(pop, BaseKernelSpec::SymmetricProduct)?,
        Objective::Mmd => {
            let reference = reference.map(|r| PointSet::read_csv(r, header).map(Arc::new)).transpose()?;
            DiscrepancyObjective::mmd(pop, BaseKernelSpec::rbf(sigma)?, reference)?
        }
    };
    println!("{}", format_sig(obj.evaluate(&sel)?, 12));
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { distribution, n, d, seed, out, header } => {
            let pop = match distribution {
                Distribution::Uniform => generate_uniform(n, d, RngSeed(seed))?,
                Distribution::Mixture => {
                    let mut components = default_mixture();
                    for c in &mut components {
                        let mean = c.mean.coords()[0];
                        c.mean = ldsubset::Point::new(vec![mean; d])?;
                    }
                    generate_gaussian_mixture(n, d, &components, RngSeed(seed))?
                }
            };
            pop.write_csv(&out, header)
        }
        Command::Eval { objective, population, reference, subset, header, sigma } => {
            eval(objective, population, reference, subset, header, sigma)
        }
        Command::Run { method, objective, n, m, d, budget, seed, out, population, header, memoize, sigma } => {
            let method = Method::from(method);
            let mut cfg = ExperimentConfig {
                experiment: objective.experiment(),
                n,
                m,
                d,
                budget,
                seeds: vec![RngSeed(seed)],
                methods: vec![method],
                mmd_sigma: sigma,
                memoize,
                ..ExperimentConfig::default()
            };
            if let Some(path) = population {
                cfg.population = PopulationSource::File { path, header };
            }
            // Budgets below 100 keep half of the evaluations for the BO phase.
            cfg.bo.n_init = cfg.bo.n_init.min(budget / 2).max(2);
            cfg.validate()?;
            let pop = Arc::new(build_population(&cfg, RngSeed(seed))?);
            let obj = Arc::new(build_objective(&cfg, pop)?);
            let trace = run_method(&cfg, obj, method, RngSeed(seed))?;
            let file = std::fs::File::create(&out).map_err(|e| ldsubset::Error::io(&out, e))?;
            trace.write_csv(std::io::BufWriter::new(file)).map_err(|e| ldsubset::Error::io(&out, e))?;
            if let Some((best, value)) = trace.best() {
                println!("best {} after {} evaluations: {best}", format_sig(value, 12), trace.len());
            }
            Ok(())
        }
        Command::Experiment { config, preset, out, n, m, budget, seeds, num_seeds, methods, memoize } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::load(path)?,
                (None, Some(p)) => ExperimentConfig::preset(match p {
                    Preset::Exp1 => "exp1",
                    Preset::Exp2 => "exp2",
                    Preset::Exp3 => "exp3",
                })?,
                (None, None) => unreachable!("clap requires one of --config and --preset"),
            };
            cfg.n = n.unwrap_or(cfg.n);
            cfg.m = m.unwrap_or(cfg.m);
            cfg.budget = budget.unwrap_or(cfg.budget);
            if let Some(s) = seeds {
                cfg.seeds = s.into_iter().map(RngSeed).collect();
            }
            if let Some(k) = num_seeds {
                cfg.seeds = (0..k).map(RngSeed).collect();
            }
            if let Some(ms) = methods {
                cfg.methods = ms.into_iter().map(Method::from).collect();
            }
            cfg.memoize |= memoize;
            let summary = run_experiment_to(&cfg, &out)?;
            for ms in &summary.methods {
                let finals = ms.final_best();
                println!(
                    "{:<7} median final {}  (seeds: {})",
                    ms.method.name(),
                    format_sig(ms.median_final(), 6),
                    finals.len()
                );
            }
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
