use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigaccess_core::report::{format_table, summarize, write_summary};
use sigaccess_core::sim::{read_results, write_results, PreparedRun, Scheme};
use sigaccess_core::{dimension, ChannelParams, DimensioningInput, Error, ExperimentSpec};

const OUT_DIR_VAR: &str = "SIGACCESS_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "sigaccess",
    version,
    about = "Signature random access: dimensioning, simulation, reporting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Signature weight and frame length for a goodput target.
    Dimension(DimensionArgs),
    /// Run a sweep and write one CSV row per replication.
    Simulate(SimulateArgs),
    /// Mean and 95% confidence interval per scheme and N.
    Report(ReportArgs),
}

#[derive(Args)]
struct DimensionArgs {
    #[arg(long = "N")]
    arrivals: f64,
    #[arg(long = "T", default_value_t = 1000.0)]
    population: f64,
    #[arg(long = "M", default_value_t = 54)]
    preambles: usize,
    #[arg(long = "G", default_value_t = 0.99)]
    goodput: f64,
    #[arg(long, default_value_t = 0.99)]
    pd: f64,
    #[arg(long, default_value_t = 1e-3)]
    pf: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// key = value experiment file.
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set replications=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated sweep over N.
    #[arg(long = "N")]
    arrivals: Option<String>,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    /// Results CSV; relative paths go under $SIGACCESS_OUT_DIR when set.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Decoder trace CSV of the first signature-scheme run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ReportArgs {
    results: PathBuf,
    /// Also write the summary as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

fn classify(e: Error, context: Option<&Path>) -> Failure {
    let msg = match context {
        Some(p) => format!("{}: {e}", p.display()),
        None => e.to_string(),
    };
    match e {
        Error::Infeasible { .. } | Error::NonConvergence { .. } => Failure::Infeasible(msg),
        ref e if e.is_io() => Failure::Io(msg),
        _ => Failure::Invalid(msg),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn cmd_dimension(args: &DimensionArgs) -> Result<(), Failure> {
    let channel = ChannelParams::new(args.pd, args.pf).map_err(|e| classify(e, None))?;
    let input = DimensioningInput::new(args.arrivals, args.population, args.preambles, args.goodput, channel)
        .map_err(|e| classify(e, None))?;
    let r = dimension(&input).map_err(|e| classify(e, None))?;
    println!("signature weight K    {}", r.weight);
    println!("frame length L        {}", r.frame_len);
    println!("target p_fa           {:.6e}", r.p_fa_target);
    println!("predicted p_fa        {:.6e}", r.p_fa_predicted);
    println!("predicted goodput     {:.6}", r.goodput_predicted);
    println!("iterations            {}", r.iterations);
    println!(
        "K={} L={} p_fa_target={:e} p_fa={:e} goodput={} iterations={}",
        r.weight, r.frame_len, r.p_fa_target, r.p_fa_predicted, r.goodput_predicted, r.iterations
    );
    Ok(())
}

fn load_spec(args: &SimulateArgs) -> Result<ExperimentSpec, Failure> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Invalid(format!("{}: line {}: expected key = value", path.display(), i + 1)))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
    }
    // flags win over the file
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("--set {o:?}: expected KEY=VALUE")))?;
        pairs.push((0, k.trim().to_string(), v.trim().to_string()));
    }
    let flags = [
        ("seed", args.seed.map(|s| s.to_string())),
        ("N", args.arrivals.clone()),
        ("schemes", args.schemes.clone()),
        ("replications", args.replications.map(|r| r.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            pairs.push((0, k.to_string(), v));
        }
    }
    if !pairs.iter().any(|(_, k, _)| k == "seed") {
        return Err(Failure::Invalid(
            "a master seed is required (seed = ... in the config, or --seed)".into(),
        ));
    }
    let mut spec = ExperimentSpec::new(0);
    let applied = spec.apply(&pairs).and_then(|()| spec.validate());
    applied.map_err(|e| match e {
        Error::Parse { line: 0, message } => Failure::Invalid(format!("command-line override: {message}")),
        e => classify(e, args.config.as_deref()),
    })?;
    Ok(spec)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let spec = load_spec(args)?;
    if args.print_config {
        print!("{}", spec.to_text());
        return Ok(());
    }
    let out = out_path(&args.out);
    let mut rows = Vec::new();
    let mut trace_written = false;
    for cfg in spec.configs() {
        let run = PreparedRun::new(cfg).map_err(|e| classify(e, None))?;
        let reps = run.run_all().map_err(|e| classify(e, None))?;
        if let (Some(path), false) = (&args.trace, trace_written) {
            if let Some(trace) = reps.first().and_then(|r| r.metrics.trace.as_ref()) {
                let path = out_path(path);
                let w = create(&path)?;
                trace.write_csv(w).map_err(|e| classify(e, Some(&path)))?;
                trace_written = true;
            }
        }
        let c = run.config();
        let dims = run.dims().map(|(k, l)| format!(" K={k} L={l}")).unwrap_or_default();
        eprintln!("{} N={}{dims}: {} replications", c.scheme, c.arrivals, reps.len());
        rows.extend(reps.iter().map(|r| run.result_row(r)));
    }
    if args.trace.is_some() && !trace_written {
        return Err(Failure::Invalid(format!(
            "--trace needs the {} scheme in the sweep",
            Scheme::Signature
        )));
    }
    let w = create(&out)?;
    write_results(w, &rows).map_err(|e| classify(e, Some(&out)))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    let file = File::open(&args.results).map_err(|e| io_failure(&args.results, e))?;
    let rows = read_results(file).map_err(|e| classify(e, Some(&args.results)))?;
    let summaries = summarize(&rows);
    print!("{}", format_table(&summaries));
    io::stdout().flush().map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    if let Some(p) = &args.out {
        let path = out_path(p);
        let w = create(&path)?;
        write_summary(w, &summaries).map_err(|e| classify(e, Some(&path)))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Dimension(a) => cmd_dimension(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
