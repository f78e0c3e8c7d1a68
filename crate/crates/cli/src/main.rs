use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brand::config::{Mode, RunConfig};
use brand::functional::CurveSet;
use brand::io::{self, CurveLayout};
use brand::pipeline::{self, RunReport};
use brand::postprocess::UnitLabel;
use brand::simulate::{
    generate_functional_simulation, generate_simulation, FunctionalSimulationSpec, Scenario,
    SimulationSpec,
};
use brand::BrandError;
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "brand", version, about = "Robust Bayesian novelty detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic training/test pair and a matching config.toml.
    Simulate(SimulateArgs),
    /// Stage I only: robust class summaries into <output>/summary/priors.json.
    ExtractPriors(RunArgs),
    /// Stage I, Stage II and post-processing on multivariate data.
    Fit(RunArgs),
    /// Stage I, Stage II and post-processing on curves.
    FitFunctional(RunArgs),
    /// Recompute the posterior summary of an existing run directory.
    Summarize {
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        run_args: RunArgs,
    },
    /// Score a finished run against true components.
    Metrics {
        #[arg(long)]
        run: PathBuf,
        /// File whose last column (or `label` column for curves) holds the
        /// true components.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        run_args: RunArgs,
    },
    /// Check a local copy of the UCI seeds dataset and print its digest.
    Fetch {
        #[arg(long)]
        path: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// notsmall-noise, notsmall-clean, small-noise, small-clean or functional-toy
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Curves per group (functional-toy only).
    #[arg(long, default_value_t = 50)]
    curves_per_group: usize,
    /// Spike-contaminate and shuffle training labels (functional-toy only).
    #[arg(long)]
    contaminate: bool,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set eta=0.75`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self, extra: &[(&str, String)]) -> Result<RunConfig, Failure> {
        let mut overrides = Vec::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{item}'")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let quoted = |p: &Path| toml_string(&p.display().to_string());
        if let Some(p) = &self.train {
            overrides.push(("train".into(), quoted(p)));
        }
        if let Some(p) = &self.test {
            overrides.push(("test".into(), quoted(p)));
        }
        if let Some(p) = &self.output {
            overrides.push(("output".into(), quoted(p)));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        for (k, v) in extra {
            overrides.push((k.to_string(), v.clone()));
        }
        Ok(RunConfig::load(self.config.as_deref(), &overrides)?)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

enum Failure {
    Usage(String),
    Brand(BrandError),
}

impl From<BrandError> for Failure {
    fn from(e: BrandError) -> Self {
        Failure::Brand(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Brand(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            })
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(args) => simulate(&args),
        Command::ExtractPriors(args) => {
            let cfg = args.load(&[])?;
            pipeline::extract_priors(&cfg)?;
            println!(
                "priors written to {}",
                cfg.require_output()?.join("summary/priors.json").display()
            );
            Ok(())
        }
        Command::Fit(args) => {
            let cfg = args.load(&[])?;
            report(&pipeline::fit(&cfg)?);
            Ok(())
        }
        Command::FitFunctional(args) => {
            let cfg = args.load(&[("mode", "\"functional\"".into())])?;
            report(&pipeline::fit_functional(&cfg)?);
            Ok(())
        }
        Command::Summarize { run, run_args } => {
            let cfg = run_args.load(&[])?;
            let summary = pipeline::summarize_run(&run, &cfg)?;
            println!(
                "{} novelty units, {} novel clusters",
                summary.novelty_units.len(),
                novel_clusters(&summary.labels)
            );
            Ok(())
        }
        Command::Metrics {
            run,
            truth,
            run_args,
        } => {
            let cfg = run_args.load(&[])?;
            let truth = pipeline::read_truth(&truth, cfg.mode, cfg.curve_layout)?;
            let m = pipeline::run_metrics(&run, &truth)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&m).expect("metrics serialize")
            );
            Ok(())
        }
        Command::Fetch { path } => fetch(&path),
    }
}

fn novel_clusters(labels: &[UnitLabel]) -> usize {
    let mut ids: Vec<usize> = labels
        .iter()
        .filter_map(|l| match l {
            UnitLabel::Novel(h) => Some(*h),
            UnitLabel::Known(_) => None,
        })
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

fn report(r: &RunReport) {
    let s = &r.summary;
    println!(
        "{} units, {} flagged novel, {} novel clusters (VI {:.4})",
        s.labels.len(),
        s.novelty_units.len(),
        novel_clusters(&s.labels),
        s.vi_score
    );
    if let Some(m) = &r.metrics {
        println!(
            "ARI {:.4}  novelty precision {:.4}  known accuracy {:.4}",
            m.ari, m.novelty_precision, m.known_accuracy
        );
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let out = &args.output;
    std::fs::create_dir_all(out).map_err(|e| BrandError::io(out, e))?;
    let out = out.canonicalize().map_err(|e| BrandError::io(out, e))?;
    let train = out.join("train.csv");
    let test = out.join("test.csv");
    let mut cfg = RunConfig {
        train: Some(train.clone()),
        test: Some(test.clone()),
        output: Some(out.join("run")),
        test_labels: true,
        seed: args.seed,
        ..RunConfig::default()
    };
    if args.scenario == "functional-toy" {
        let mut spec = FunctionalSimulationSpec {
            curves_per_group: args.curves_per_group,
            seed: args.seed,
            ..FunctionalSimulationSpec::default()
        };
        if args.contaminate {
            spec = spec.contaminated();
        }
        let sim = generate_functional_simulation(&spec)?;
        io::write_curves(&train, &sim.train, CurveLayout::Wide)?;
        let labeled = CurveSet::new(
            sim.test.grid().to_vec(),
            sim.test.values().clone(),
            Some(sim.truth.clone()),
        )?;
        io::write_curves(&test, &labeled, CurveLayout::Wide)?;
        cfg.mode = Mode::Functional;
    } else {
        let scenario: Scenario = args
            .scenario
            .parse()
            .map_err(|e: BrandError| Failure::Usage(e.to_string()))?;
        let sim = generate_simulation(&SimulationSpec::scenario(scenario, args.seed))?;
        io::write_multivariate(&train, sim.train.data(), Some(sim.train.labels()))?;
        io::write_multivariate(&test, sim.test.data(), Some(&sim.truth))?;
        cfg.lambda_tr = 10.0;
        cfg.s0 = 10.0;
    }
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()).map_err(|e| BrandError::io(&config_path, e))?;
    println!(
        "wrote {}, {} and {}",
        train.display(),
        test.display(),
        config_path.display()
    );
    Ok(())
}

/// Structural check of `seeds_dataset.txt`: 210 rows, 7 features and a label
/// in 1..=3 with 70 rows each.
fn fetch(path: &Path) -> Result<(), Failure> {
    println!("source: https://archive.ics.uci.edu/dataset/236/seeds (seeds_dataset.txt)");
    let (data, labels) = io::load_multivariate(path, true)?;
    let labels = labels.expect("labels requested");
    if data.nrows() != 210 || data.ncols() != 7 {
        return Err(BrandError::Format(format!(
            "{}: expected 210 rows x 8 columns, found {} x {}",
            path.display(),
            data.nrows(),
            data.ncols() + 1
        ))
        .into());
    }
    for class in 1..=3 {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n != 70 {
            return Err(BrandError::Format(format!(
                "{}: class {class} has {n} rows, expected 70",
                path.display()
            ))
            .into());
        }
    }
    println!("ok: 210 rows, 3 classes of 70");
    println!("sha256 (git blob) {}", io::file_hash(path)?);
    Ok(())
}
