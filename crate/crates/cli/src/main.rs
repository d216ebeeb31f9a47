//! `espa` — information curves, completion counts and budgeted annotation
//! sweeps from the command line.
//!
//! Exit codes: 0 success, 1 input error, 2 internal contract violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use espa::config::{parse_fractions, Settings};
use espa::corpus::{ingest_conll_chunking, TagPolicy};
use espa::counting::{count_completions, log2_big};
use espa::experiment::{run_sweep_with, DataSource, Scheme};
use espa::infocurve::{closed_form_curve, estimate_curve_with, strength_slope, InfoCurve};
use espa::report::{emit_reports, infocurve_file_name, write_infocurve};
use espa::structure::total_count;
use espa::{Error, Execution, PartialAnnotation, StructureFamily};

#[derive(Parser, Debug)]
#[command(name = "espa", version, about = "Value of partial annotation for structured outputs")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV files (overrides the config file).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate I_k curves and structure strength; writes infocurve_<family>.csv.
    Infocurve(InfocurveArgs),
    /// Count valid completions of a partial annotation.
    Count(CountArgs),
    /// Run the scheme I vs. scheme II sweep; writes sweep.csv and summary.csv.
    Sweep(SweepArgs),
    /// Parse a CoNLL chunking file and report what was read.
    IngestCheck(IngestArgs),
}

#[derive(Args, Debug)]
struct InfocurveArgs {
    /// Family spec, e.g. chain:n=10, assignment:d=4,dprime=10, bio:d=10,t=1.
    #[arg(long = "family", required = true)]
    families: Vec<StructureFamily>,
    /// Monte-Carlo trials (overrides the config file).
    #[arg(long)]
    trials: Option<usize>,
    /// Use the closed form instead of simulation (assignment, unconstrained, uniform).
    #[arg(long)]
    closed_form: bool,
}

#[derive(Args, Debug)]
struct CountArgs {
    /// Family spec, e.g. bio:d=3,t=1.
    #[arg(long)]
    family: StructureFamily,
    /// One label per variable separated by commas or spaces; `_` or `?`
    /// leaves a variable open. Omit to count all valid structures.
    #[arg(long)]
    partial: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Synthetic family spec.
    #[arg(long)]
    family: Option<StructureFamily>,
    /// CoNLL chunking corpus to use instead of a synthetic pool.
    #[arg(long, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Number of synthetic structures in the pool.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Probability that an observation is drawn from a wrong label.
    #[arg(long)]
    noise: Option<f64>,
    /// Repetitions per scheme and budget fraction.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Comma-separated budget fractions.
    #[arg(long)]
    fractions: Option<String>,
    /// Also write the information curve of the synthetic family.
    #[arg(long)]
    infocurve: bool,
}

#[derive(Args, Debug)]
struct IngestArgs {
    path: PathBuf,
    /// Fail on I-X tags that do not continue an X chunk instead of repairing them.
    #[arg(long)]
    reject: bool,
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
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            let violation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_contract_violation));
            ExitCode::from(if violation { 2 } else { 1 })
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut settings = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        settings.experiment.seed = seed;
    }
    let out = cli.out.clone().or_else(|| settings.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let exec = configure_threads(cli.threads)?;

    match cli.command {
        Command::Infocurve(args) => infocurve(&args, &settings, &out, exec),
        Command::Count(args) => count(&args),
        Command::Sweep(args) => sweep(args, settings, &out, exec),
        Command::IngestCheck(args) => ingest_check(&args),
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<Execution> {
    match threads {
        None => Ok(Execution::default()),
        Some(0) => bail!(Error::Input("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
                Ok(Execution::Parallel)
            }
            #[cfg(not(feature = "parallel"))]
            {
                eprintln!("warning: built without the parallel feature; ignoring --threads {n}");
                Ok(Execution::Sequential)
            }
        }
    }
}

fn infocurve(args: &InfocurveArgs, settings: &Settings, out: &Path, exec: Execution) -> anyhow::Result<()> {
    let trials = args.trials.unwrap_or(settings.trials);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    println!("family\tdim\tI_d_bits\tslope\tfile");
    for family in &args.families {
        let curve: InfoCurve = if args.closed_form {
            closed_form_curve(family)?
        } else {
            estimate_curve_with(family, trials, settings.experiment.seed, exec)?
        };
        let path = out.join(infocurve_file_name(&curve));
        write_infocurve(&curve, &path)?;
        println!(
            "{family}\t{}\t{:.6}\t{:.6}\t{}",
            curve.dim(),
            curve.info[curve.dim()],
            strength_slope(&curve)?,
            path.display()
        );
    }
    Ok(())
}

fn parse_partial(family: &StructureFamily, text: &str) -> anyhow::Result<PartialAnnotation> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "_" | "?" => Ok(None),
            _ => family.parse_label(t).map(Some),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let partial = PartialAnnotation::new(values);
    partial.check_against(family)?;
    Ok(partial)
}

fn count(args: &CountArgs) -> anyhow::Result<()> {
    let family = &args.family;
    let partial = match &args.partial {
        Some(text) => parse_partial(family, text)?,
        None => PartialAnnotation::empty(family.dim()),
    };
    let n = count_completions(family, &partial)?;
    let total = total_count(family)?;
    println!("family\t{family}");
    println!("revealed\t{}/{}", partial.k(), family.dim());
    println!("completions\t{n}");
    println!("total\t{total}");
    if n > 0u32.into() {
        println!("information_bits\t{:.6}", log2_big(&total) - log2_big(&n));
    }
    Ok(())
}

fn sweep(args: SweepArgs, mut settings: Settings, out: &Path, exec: Execution) -> anyhow::Result<()> {
    let cfg = &mut settings.experiment;
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(f) = &args.fractions {
        cfg.fractions = parse_fractions(f)?;
    }
    match (&mut cfg.source, args.corpus) {
        (_, Some(path)) => {
            if args.family.is_some() || args.pool_size.is_some() || args.noise.is_some() {
                bail!(Error::Input("--corpus cannot be combined with --family, --pool-size or --noise".into()));
            }
            cfg.source = DataSource::Corpus { path, policy: TagPolicy::default() };
        }
        (DataSource::Synthetic { family, pool_size, noise }, None) => {
            *family = args.family.unwrap_or(*family);
            *pool_size = args.pool_size.unwrap_or(*pool_size);
            *noise = args.noise.unwrap_or(*noise);
        }
        (DataSource::Corpus { .. }, None) => {
            if args.family.is_some() || args.pool_size.is_some() || args.noise.is_some() {
                bail!(Error::Input("the config selects a corpus; synthetic flags do not apply".into()));
            }
        }
    }

    let report = run_sweep_with(cfg, exec)?;
    let mut curves = Vec::new();
    if args.infocurve {
        match &cfg.source {
            DataSource::Synthetic { family, .. } => {
                curves.push(estimate_curve_with(family, settings.trials, cfg.seed, exec)?);
            }
            DataSource::Corpus { .. } => bail!(Error::Input("--infocurve needs a synthetic family".into())),
        }
    }
    let written = emit_reports(&report, &curves, out)?;

    println!("fraction\tcomplete\tespa\tp_value");
    for (i, &f) in report.fractions.iter().enumerate() {
        let a = report.cell(Scheme::Complete, f).expect("cell");
        let b = report.cell(Scheme::Espa, f).expect("cell");
        println!("{f}\t{:.4} ± {:.4}\t{:.4} ± {:.4}\t{:.4}", a.mean, a.stderr, b.mean, b.stderr, report.p_values[i]);
    }
    let audit = report.audit;
    println!(
        "runs {}, completion passes {}, completions checked {} (0 violations), converged {}",
        audit.runs, audit.completion_passes, audit.completions_checked, audit.converged_runs
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn ingest_check(args: &IngestArgs) -> anyhow::Result<()> {
    let policy = if args.reject { TagPolicy::Reject } else { TagPolicy::Repair };
    let corpus = ingest_conll_chunking(&args.path, policy)?;
    for w in &corpus.warnings {
        if w.line > 0 {
            eprintln!("warning: line {}: {}", w.line, w.message);
        } else {
            eprintln!("warning: {}", w.message);
        }
    }
    println!("structures\t{}", corpus.pool.len());
    println!("tokens\t{}", corpus.tokens);
    println!("chunk_types\t{}", corpus.types.join(","));
    println!("warnings\t{}", corpus.warnings.len());
    Ok(())
}
