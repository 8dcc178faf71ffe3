use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clarke_inf::ladder::LadderConfig;
use clarke_inf::report::{emit_plot_data, run_corpus, run_request, AnalysisRequest, RequestKind};
use clarke_inf::{Error, Result, Tolerance};

#[derive(Parser)]
#[command(name = "clarke-inf", version, about = "Cones and subgradients at infinity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// RNG seed for every sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with ladder settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Uniform absolute/relative/angle tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    steps: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Random samples per shell.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Args)]
struct Target {
    /// Function expression.
    #[arg(long = "f", allow_hyphen_values = true)]
    function: Option<String>,
    /// Constraints separated by `;`.
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Escaping coordinates (1-based), all by default.
    #[arg(long, value_delimiter = ',')]
    index: Option<Vec<usize>>,
    /// Direction, comma separated.
    #[arg(long = "v", value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Tangent and normal cones at infinity of a set or of `epi f`.
    Cones(Target),
    /// Subgradient set at infinity with duality table.
    Subdiff(Target),
    /// Lipschitz-at-infinity classification.
    Lipschitz(Target),
    /// Directional Lipschitz test along `--v`.
    Dirlip(Target),
    /// Sum rule for `--f` + `--g`.
    Sumrule {
        #[command(flatten)]
        target: Target,
        #[arg(long = "g", allow_hyphen_values = true)]
        second: String,
    },
    /// Subgradients at infinity of the distance to `--set`.
    Distance(Target),
    /// Fermat rule, or the constrained condition when `--set` is given.
    Optcheck(Target),
    /// Tangent-cone membership of `--v` for `--set`.
    TangentTest(Target),
    /// Runs every golden case in a directory.
    Corpus {
        dir: PathBuf,
        /// Also write a junit-style XML summary.
        #[arg(long)]
        junit: Option<PathBuf>,
    },
    /// CSV of the duality table of a subdiff report.
    Plotdata { report: PathBuf },
}

fn ladder(g: &Global) -> Result<LadderConfig> {
    let mut cfg = match &g.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => LadderConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = &g.radii {
        cfg.radii = r.clone();
    }
    if let Some(s) = &g.steps {
        cfg.steps = s.clone();
    }
    if let Some(e) = &g.eps {
        cfg.eps_ball = e.clone();
    }
    if let Some(n) = g.samples {
        cfg.samples_per_shell = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn request(kind: RequestKind, t: Target, g: &Global) -> Result<AnalysisRequest> {
    let mut r = AnalysisRequest::new(kind);
    r.function = t.function;
    r.set = t.set;
    r.dim = t.dim;
    r.index = t.index;
    r.direction = t.direction;
    r.config = ladder(g)?;
    if let Some(tol) = g.tol {
        r.tolerance = Tolerance::uniform(tol)?;
    }
    r.output = g.out.as_ref().map(|p| p.display().to_string());
    Ok(r)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", text.trim_end()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let req = match cli.command {
        Command::Cones(t) => request(RequestKind::Cones, t, g)?,
        Command::Subdiff(t) => request(RequestKind::Subdiff, t, g)?,
        Command::Lipschitz(t) => request(RequestKind::Lipschitz, t, g)?,
        Command::Dirlip(t) => request(RequestKind::Dirlip, t, g)?,
        Command::Sumrule { target, second } => {
            let mut r = request(RequestKind::Sumrule, target, g)?;
            r.second = Some(second);
            r
        }
        Command::Distance(t) => request(RequestKind::Distance, t, g)?,
        Command::Optcheck(t) => request(RequestKind::Optcheck, t, g)?,
        Command::TangentTest(t) => request(RequestKind::TangentTest, t, g)?,
        Command::Corpus { dir, junit } => {
            let s = run_corpus(&dir)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            for id in &s.missing_expected {
                eprintln!("missing expected: {id}");
            }
            for c in &s.cases {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                println!("{mark} {} ({:.0} ms)", c.id, c.wall_time_ms);
                for f in &c.failures {
                    println!("    {f}");
                }
            }
            println!("{} cases, {} failed", s.cases.len(), s.failures());
            if let Some(p) = junit {
                std::fs::write(p, s.junit_xml())?;
            }
            if let Some(p) = &g.out {
                std::fs::write(p, serde_json::to_string_pretty(&s)?)?;
            }
            return Ok(if s.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Plotdata { report } => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report)?)?;
            emit(&emit_plot_data(&v)?, &g.out)?;
            return Ok(ExitCode::SUCCESS);
        }
    };
    let report = run_request(&req)?;
    emit(&report.to_json()?, &g.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> ExitCode {
    let body = serde_json::json!({
        "error": {
            "module": e.provenance(),
            "message": e.to_string(),
        }
    });
    eprintln!("{body}");
    ExitCode::from(e.exit_code() as u8)
}
