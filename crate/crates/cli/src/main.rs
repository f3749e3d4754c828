//! `mlsync` command-line interface.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, invalid problem,
//! failed verification), 2 I/O error (unreadable, unwritable or malformed file).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlsync::affinity::to_transition;
use mlsync::bench::{self, ExperimentSpec, Method};
use mlsync::io::{ProblemDocument, SolutionDocument};
use mlsync::metrics::{accuracy, consistency};
use mlsync::{
    generate_problem, solve, validate_problem, AffinityConfig, Error, Kernel, MLSyncParams,
    SynthConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "mlsync",
    version,
    about = "Consistent multi-graph matching for multi-attributed graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic problem and write it as JSON.
    Generate {
        #[command(flatten)]
        synth: SynthArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve a problem file and write the assignments and report as JSON.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        affinity: AffinityArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run experiment sweeps and write results.csv, summary.csv and SVG charts.
    Bench {
        /// Experiment spec file (.toml or .json).
        spec: Option<PathBuf>,
        /// Named sweep instead of a spec file.
        #[arg(long, conflicts_with = "spec", value_parser = clap::builder::PossibleValuesParser::new(bench::PRESETS))]
        preset: Option<String>,
        /// Master seed; overrides the spec file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per swept value; overrides the spec.
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of methods.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, default_value = "bench_out")]
        out_dir: PathBuf,
        /// Worker threads; output bytes do not depend on it (runtime_ms aside).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        fixed: FixedArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check the structural invariants of a problem file.
    Verify {
        problem: PathBuf,
        #[command(flatten)]
        affinity: AffinityArgs,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_graphs: usize,
    #[arg(long, default_value_t = 10)]
    n_inliers: usize,
    #[arg(long, default_value_t = 2)]
    n_outliers: usize,
    #[arg(long, default_value_t = 5)]
    n_channels: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            n_graphs: self.n_graphs,
            n_inliers: self.n_inliers,
            n_outliers: self.n_outliers,
            n_channels: self.n_channels,
            epsilon: self.epsilon,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }
}

/// Optional overrides of an experiment's fixed generator settings.
#[derive(Args, Debug)]
struct FixedArgs {
    #[arg(long)]
    n_graphs: Option<usize>,
    #[arg(long)]
    n_inliers: Option<usize>,
    #[arg(long)]
    n_outliers: Option<usize>,
    #[arg(long)]
    n_channels: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
}

impl FixedArgs {
    fn apply(&self, cfg: &mut SynthConfig) {
        if let Some(v) = self.n_graphs {
            cfg.n_graphs = v;
        }
        if let Some(v) = self.n_inliers {
            cfg.n_inliers = v;
        }
        if let Some(v) = self.n_outliers {
            cfg.n_outliers = v;
        }
        if let Some(v) = self.n_channels {
            cfg.n_channels = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.sigma2 {
            cfg.sigma2 = v;
        }
    }
}

#[derive(Args, Debug)]
struct AffinityArgs {
    #[arg(long, default_value_t = 0.3)]
    sigma2: f64,
    /// Attribute kernel: beta or plain.
    #[arg(long, default_value = "beta")]
    kernel: String,
    /// Coupling between co-indexed candidates on different layers.
    #[arg(long, default_value_t = 1.0)]
    inter_weight: f64,
}

impl AffinityArgs {
    fn config(&self) -> Result<AffinityConfig, Error> {
        let kernel = match self.kernel.as_str() {
            "beta" => Kernel::Beta,
            "plain" => Kernel::Plain,
            other => return Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        };
        Ok(AffinityConfig {
            sigma2: self.sigma2,
            kernel,
            inter_weight: self.inter_weight,
        })
    }
}

/// Solver settings; unset flags keep the defaults (or the spec file's values).
#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    bootstrap_iters: Option<usize>,
    #[arg(long)]
    n_ref: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl ParamArgs {
    fn apply(&self, p: &mut MLSyncParams) {
        if let Some(v) = self.theta {
            p.walker.theta = v;
        }
        if let Some(v) = self.rho {
            p.walker.rho = v;
        }
        if let Some(v) = self.tau {
            p.walker.tau = v;
        }
        if let Some(v) = self.omega {
            p.omega = v;
        }
        if let Some(v) = self.mu {
            p.mu = v;
        }
        if let Some(v) = self.bootstrap_iters {
            p.bootstrap_iters = v;
        }
        if self.n_ref.is_some() {
            p.n_ref = self.n_ref;
        }
        if let Some(v) = self.max_iters {
            p.max_iters = v;
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Toml(_) => 2,
        _ => 1,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { synth, out } => {
            let p = generate_problem(&synth.config())?;
            emit(
                out.as_deref(),
                &(ProblemDocument::from_problem(&p).to_json()? + "\n"),
            )
        }
        Command::Solve {
            problem,
            affinity,
            params: flags,
            out,
        } => {
            let p = ProblemDocument::read(&problem)?.to_problem(&affinity.config()?)?;
            let mut params = MLSyncParams::default();
            flags.apply(&mut params);
            let report = solve(&p, &params)?;
            let acc = p
                .ground_truth
                .as_ref()
                .map(|gt| accuracy(&report.assignments, Some(gt)))
                .transpose()?;
            let doc = SolutionDocument::from_report(&p, &report, acc);
            let mut summary = format!(
                "iterations {} (+{} bootstrap), converged {}, consistency {:.4}",
                report.iterations,
                report.bootstrap_iterations,
                report.converged,
                report.consistency
            );
            if let Some(a) = acc {
                let _ = write!(summary, ", accuracy {a:.4}");
            }
            eprintln!("{summary}");
            emit(out.as_deref(), &(doc.to_json()? + "\n"))
        }
        Command::Bench {
            spec,
            preset,
            seed,
            trials,
            methods,
            out_dir,
            jobs,
            fixed,
            params,
        } => {
            let mut specs: Vec<ExperimentSpec> = match (&spec, &preset) {
                (Some(path), _) => vec![bench::read_spec(path)?],
                (None, Some(name)) => bench::preset(name, seed.unwrap_or(0))?,
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "bench needs a spec file or --preset".into(),
                    ))
                }
            };
            for s in &mut specs {
                if let Some(v) = seed {
                    s.seed = v;
                }
                if let Some(v) = trials {
                    s.trials = v;
                }
                if let Some(m) = &methods {
                    s.methods = m.clone();
                }
                fixed.apply(&mut s.fixed);
                params.apply(&mut s.params);
                s.validate()?;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let rows = pool.install(|| bench::run_all(&specs))?;
            for path in bench::write_outputs(&out_dir, &specs, &rows)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Verify { problem, affinity } => verify(&problem, &affinity.config()?),
    }
}

/// Prints one line per check and fails if any check fails.
fn verify(path: &Path, cfg: &AffinityConfig) -> Result<(), Error> {
    let doc = ProblemDocument::read(path)?;
    let p = doc.to_problem(cfg)?;
    let mut failures = 0;
    let mut report = |name: &str, problems: Vec<String>| {
        if problems.is_empty() {
            println!("ok    {name}");
        } else {
            failures += 1;
            println!("FAIL  {name}");
            for msg in problems {
                println!("        {msg}");
            }
        }
    };

    report("problem structure", validate_problem(&p));

    let mut stochastic = Vec::new();
    for pair in &p.pairs {
        let sums = to_transition(pair).row_sums();
        let worst = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        if worst > 1e-9 {
            stochastic.push(format!(
                "pair ({},{}): row sum off by {worst:e}",
                pair.l, pair.m
            ));
        }
    }
    report("transition rows sum to one", stochastic);

    if let Some(gt) = &p.ground_truth {
        let truth: Vec<_> = mlsync::model::pair_list(p.n_graphs())
            .into_iter()
            .map(|(l, m)| gt.pairwise(l, m))
            .collect();
        let mut problems = Vec::new();
        match consistency(&truth, &p.sizes()) {
            Ok(c) if c == 1.0 => {}
            Ok(c) => problems.push(format!("ground truth consistency {c}")),
            Err(e) => problems.push(e.to_string()),
        }
        report("ground truth is cycle-consistent", problems);
    }

    if failures > 0 {
        return Err(Error::InvalidArgument(format!(
            "{failures} check(s) failed"
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
