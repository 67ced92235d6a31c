use std::path::PathBuf;
use std::process::ExitCode;

use anticonc::ensembles::{exact_rank, exact_spectral_summary, grow_and_track, sample_symmetric_exact, sample_symmetric_float, spectral_summary};
use anticonc::laws::LawSpec;
use anticonc::matrix::{read_text, read_text_exact, write_text};
use anticonc::rng::stream;
use anticonc::{Matrix, Rational};
use anticonc_cli::{replay, run, CliError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anticonc", version, about = "Anti-concentration and random symmetric matrix experiments")]
struct Cli {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory for `<experiment>.csv` and `<experiment>.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Config file, `key = value` lines or a JSON object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact versus Monte Carlo small-ball probabilities of linear forms.
    Smallball(ExperimentArgs),
    /// Frequencies of small least singular values and large condition numbers.
    Tail(ExperimentArgs),
    /// Spread of the truncated log-determinant.
    Detconc(ExperimentArgs),
    /// Decoupling inequality on random quadratic forms.
    Decoupling(ExperimentArgs),
    /// GAP rank reduction.
    Gapreduce(ExperimentArgs),
    /// Rank growth under random bordering.
    Rankgrow(ExperimentArgs),
    /// Membership of random vectors in random subspaces.
    Odlyzko(ExperimentArgs),
    /// Rerun a stored record and require identical rows.
    Replay { record: PathBuf },
    /// Single matrices: sample, spectrum, rank, grow.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
}

#[derive(Args, Default)]
struct ExperimentArgs {
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sizes.
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    a_exp: Option<f64>,
    #[arg(long)]
    b_exp: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    planted: bool,
    /// Fixed part F as a text matrix.
    #[arg(long = "F")]
    f_file: Option<PathBuf>,
    /// Any other config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value = "bernoulli")]
    law: String,
    #[arg(long = "F")]
    f_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Read the matrix from a file instead of sampling.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EnsembleCommand {
    /// Print sampled matrices.
    Sample(EnsembleArgs),
    /// Spectral summary as JSON, one line per matrix.
    Spectrum(EnsembleArgs),
    /// Exact rank, one JSON line per matrix.
    Rank(EnsembleArgs),
    /// Border a zero (or given) matrix and track its exact rank.
    Grow {
        #[command(flatten)]
        args: EnsembleArgs,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn build_config(cli: &Cli, name: &str, args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::parse(&read_file(path)?)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = name.to_string();
    let mut set = |key: &str, value: Option<String>| -> Result<(), CliError> {
        match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        }
    };
    set("law", args.law.clone())?;
    set("n", args.n.map(|v| v.to_string()))?;
    set("n_list", args.n_list.clone())?;
    set("beta", args.beta.clone())?;
    set("a_exp", args.a_exp.map(|v| v.to_string()))?;
    set("b_exp", args.b_exp.map(|v| v.to_string()))?;
    set("epsilon", args.epsilon.map(|v| v.to_string()))?;
    set("gamma", args.gamma.map(|v| v.to_string()))?;
    set("bound", args.bound.map(|v| v.to_string()))?;
    set("k", args.k.map(|v| v.to_string()))?;
    set("steps", args.steps.map(|v| v.to_string()))?;
    set("f_file", args.f_file.as_ref().map(|p| p.display().to_string()))?;
    if args.planted {
        set("planted", Some("true".into()))?;
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::InvalidConfig { field: kv.clone(), message: "expected key=value".into() })?;
        set(k.trim(), Some(v.to_string()))?;
    }
    set("seed", cli.seed.map(|v| v.to_string()))?;
    set("trials", cli.trials.map(|v| v.to_string()))?;
    set("out", cli.out.as_ref().map(|p| p.display().to_string()))?;
    set("workers", cli.workers.map(|v| v.to_string()))?;
    Ok(cfg)
}

fn parse_law(s: &str) -> Result<LawSpec, CliError> {
    s.parse().map_err(|e: anticonc::laws::LawError| CliError::InvalidConfig { field: "law".into(), message: e.to_string() })
}

/// Matrices to act on: the `--input` file, or `trials` samples.
enum Batch {
    Exact(Vec<Matrix<Rational>>),
    Float(Vec<Matrix<f64>>),
}

fn ensemble_batch(cli: &Cli, args: &EnsembleArgs, want_exact: bool) -> Result<Batch, CliError> {
    let law = parse_law(&args.law)?;
    let exact = want_exact || law.is_atomic();
    if let Some(path) = &args.input {
        let text = read_file(path)?;
        let bad = |e: anticonc::matrix::MatrixIoError| CliError::InvalidConfig { field: "input".into(), message: e.to_string() };
        return Ok(if exact { Batch::Exact(vec![read_text_exact(&text).map_err(bad)?]) } else { Batch::Float(vec![read_text(&text).map_err(bad)?]) });
    }
    let seed = cli.seed.unwrap_or(0);
    let trials = cli.trials.unwrap_or(1);
    let bad_f = |e: anticonc::matrix::MatrixIoError| CliError::InvalidConfig { field: "F".into(), message: e.to_string() };
    if exact {
        let law = law.atomic()?;
        let f = args.f_file.as_ref().map(|p| read_file(p).and_then(|t| read_text_exact(&t).map_err(bad_f))).transpose()?;
        let ms = (0..trials as u64).map(|t| sample_symmetric_exact(&law, f.as_ref(), args.n, args.gamma, &mut stream(seed, t)).map(|s| s.m)).collect::<Result<_, _>>()?;
        Ok(Batch::Exact(ms))
    } else {
        let sampler = law.sampler()?;
        let f = args.f_file.as_ref().map(|p| read_file(p).and_then(|t| read_text(&t).map_err(bad_f))).transpose()?;
        let ms = (0..trials as u64).map(|t| sample_symmetric_float(sampler.as_ref(), f.as_ref(), args.n, args.gamma, &mut stream(seed, t)).map(|s| s.m)).collect::<Result<_, _>>()?;
        Ok(Batch::Float(ms))
    }
}

fn ensemble(cli: &Cli, cmd: &EnsembleCommand) -> Result<(), CliError> {
    let json = |v: serde_json::Value| println!("{v}");
    match cmd {
        EnsembleCommand::Sample(args) => match ensemble_batch(cli, args, false)? {
            Batch::Exact(ms) => ms.iter().for_each(|m| println!("{}", write_text(m))),
            Batch::Float(ms) => ms.iter().for_each(|m| println!("{}", write_text(m))),
        },
        EnsembleCommand::Spectrum(args) => match ensemble_batch(cli, args, false)? {
            Batch::Exact(ms) => {
                for m in &ms {
                    json(serde_json::to_value(exact_spectral_summary(m)?).expect("summary serializes"));
                }
            }
            Batch::Float(ms) => {
                for m in &ms {
                    json(serde_json::to_value(spectral_summary(m)?).expect("summary serializes"));
                }
            }
        },
        EnsembleCommand::Rank(args) => {
            let Batch::Exact(ms) = ensemble_batch(cli, args, true)? else { unreachable!("rank always asks for exact matrices") };
            for (t, m) in ms.iter().enumerate() {
                let r = exact_rank(m);
                json(serde_json::json!({ "trial": t, "n": m.rows(), "rank": r, "corank": m.rows() - r }));
            }
        }
        EnsembleCommand::Grow { args, steps } => {
            let law = parse_law(&args.law)?.atomic()?;
            let start = match &args.input {
                Some(path) => read_text_exact(&read_file(path)?).map_err(|e| CliError::InvalidConfig { field: "input".into(), message: e.to_string() })?,
                None => Matrix::zeros(args.n, args.n),
            };
            let seed = cli.seed.unwrap_or(0);
            for t in 0..cli.trials.unwrap_or(1) as u64 {
                let g = grow_and_track(&start, &law, *steps, &mut stream(seed, t))?;
                json(serde_json::json!({ "trial": t, "start_rank": g.start_rank, "steps": g.steps }));
            }
        }
    }
    Ok(())
}

fn report(record: &anticonc_cli::ResultRecord) {
    for c in &record.checks {
        println!("{:<13} {}  {}", c.verdict.as_str(), c.name, c.detail);
    }
    println!("verdict: {}  rows: {}  config: {}  ({:.2}s)", record.verdict.as_str(), record.rows.len(), &record.config_hash[..16], record.wall_clock_secs);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay { record } => replay(record, cli.workers).map(|r| {
            println!("replay identical: {} rows", r.rows.len());
            report(&r);
            r.exit_code()
        }),
        Command::Ensemble(cmd) => ensemble(&cli, cmd).map(|_| 0),
        cmd => {
            let (name, args) = match cmd {
                Command::Smallball(a) => ("smallball", a),
                Command::Tail(a) => ("tail", a),
                Command::Detconc(a) => ("detconc", a),
                Command::Decoupling(a) => ("decoupling", a),
                Command::Gapreduce(a) => ("gapreduce", a),
                Command::Rankgrow(a) => ("rankgrow", a),
                Command::Odlyzko(a) => ("odlyzko", a),
                Command::Replay { .. } | Command::Ensemble(_) => unreachable!("handled above"),
            };
            build_config(&cli, name, args).and_then(|cfg| run(&cfg)).map(|r| {
                report(&r);
                r.exit_code()
            })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
