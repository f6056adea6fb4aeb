use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, Command};

use cfl::config::RawConfig;
use cfl::error::{CliError, CliResult};
use cfl::golden::{golden_check, Verdict};
use cfl::{experiments, output};

#[derive(Debug)]
struct Args {
    experiment: String,
    config: Option<PathBuf>,
    set: Vec<String>,
    out: Option<PathBuf>,
    format: Option<String>,
    jobs: Option<usize>,
    goldens: PathBuf,
    bless: bool,
}

fn command() -> Command {
    Command::new("cfl")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Dissipated energy of two moving harmonic oscillators")
        .arg(
            Arg::new("experiment")
                .required(true)
                .help("compare, sweep-temperature, sweep-detuning, sweep-eta, propagate, audit-counter-rotating, or golden-check"),
        )
        .arg(Arg::new("config").long("config").value_parser(value_parser!(PathBuf)).help("Flat `key = value` config file"))
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("Override one config key; repeatable, applied after the file"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_parser(value_parser!(PathBuf))
                .help("Result table path; the sidecar goes to <out>.meta.json"),
        )
        .arg(Arg::new("format").long("format").value_parser(["csv", "json"]).help("Output format"))
        .arg(
            Arg::new("jobs")
                .long("jobs")
                .value_parser(value_parser!(usize))
                .help("Worker threads (default: available processors)"),
        )
        .arg(
            Arg::new("goldens")
                .long("goldens")
                .value_parser(value_parser!(PathBuf))
                .default_value("crates/cli/goldens")
                .help("Golden directory for golden-check"),
        )
        .arg(
            Arg::new("bless")
                .long("bless")
                .action(ArgAction::SetTrue)
                .help("Rewrite golden tables instead of comparing"),
        )
}

impl Args {
    fn parse() -> Self {
        let m = command().get_matches();
        Args {
            experiment: m.get_one::<String>("experiment").cloned().unwrap_or_default(),
            config: m.get_one::<PathBuf>("config").cloned(),
            set: m.get_many::<String>("set").map(|v| v.cloned().collect()).unwrap_or_default(),
            out: m.get_one::<PathBuf>("out").cloned(),
            format: m.get_one::<String>("format").cloned(),
            jobs: m.get_one::<usize>("jobs").copied(),
            goldens: m.get_one::<PathBuf>("goldens").cloned().unwrap_or_default(),
            bless: m.get_flag("bless"),
        }
    }
}

fn configure_pool(jobs: Option<usize>) -> CliResult<()> {
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be >= 1".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    Ok(())
}

fn run(args: &Args) -> CliResult<bool> {
    configure_pool(args.jobs)?;
    if args.experiment == "golden-check" {
        let results = golden_check(&args.goldens, args.bless)?;
        let mut ok = true;
        for r in &results {
            println!("{r}");
            ok &= !matches!(r.verdict, Verdict::Fail(_));
        }
        return Ok(ok);
    }
    let mut raw = match &args.config {
        Some(p) => RawConfig::read(p)?,
        None => RawConfig::default(),
    };
    raw.set("experiment", &args.experiment)?;
    for s in &args.set {
        raw.apply_override(s)?;
    }
    if let Some(out) = &args.out {
        raw.set("out", &out.display().to_string())?;
    }
    if let Some(f) = &args.format {
        raw.set("format", f)?;
    }
    let cfg = raw.resolve()?;
    let out_path = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output path: pass --out or set out".into()))?;
    let start = Instant::now();
    let result = experiments::run(&cfg)?;
    output::write_outputs(&out_path, &cfg, &result, start.elapsed())?;
    Ok(true)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(5),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
