use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pendavg::{Error, Mode};
use pendavg_cli::commands::{self, Outcome, Points};
use pendavg_cli::config::{parse_list, ConfigLayer, Experiment};
use pendavg_cli::exit_code;

#[derive(Parser, Debug)]
#[command(name = "pendavg", version, about = "Averaged bifurcation functions and periodic orbits of the perturbed double pendulum")]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the normal-mode frequencies and periods
    Freqs,
    /// Evaluate the averaged function at a point or on a grid (CSV)
    Average {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Evaluation point "A1,A2"
        #[arg(long, allow_hyphen_values = true, conflicts_with = "grid")]
        point: Option<String>,
        /// Square grid "LO,HI,N" over [LO, HI]^2
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Print the bare sine/cosine moments instead of the averaged function
        #[arg(long)]
        raw: bool,
    },
    /// Find the zeros of the averaged function (JSON)
    Zeros {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Find zeros and continue them to periodic orbits of the full system
    Verify {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Sample the unperturbed orbit through a point of a mode plane (CSV)
    Orbit {
        #[arg(long, default_value = "mode1")]
        mode: String,
        /// Point "A1,A2" of the mode plane
        #[arg(long, allow_hyphen_values = true, default_value = "0,0")]
        alpha: String,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        p: u32,
    },
    /// Run `verify` on the first worked example
    Corollary1 {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run `verify` on the second worked example
    Corollary2 {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// JSON experiment file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named perturbation: corollary1 or corollary2
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    /// Expression for F1 in tau, th1, th1d, th2, th2d
    #[arg(long, allow_hyphen_values = true)]
    f1: Option<String>,
    /// Expression for F2 in tau, th1, th1d, th2, th2d
    #[arg(long, allow_hyphen_values = true)]
    f2: Option<String>,
    /// Inner radius of the zero-search annulus
    #[arg(long)]
    r1: Option<f64>,
    /// Outer radius of the zero-search annulus
    #[arg(long)]
    r2: Option<f64>,
    /// Quadrature tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Newton residual tolerance for zeros
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Comma-separated epsilon values for shooting; empty skips it
    #[arg(long)]
    eps: Option<String>,
    /// Orbit samples per trajectory CSV
    #[arg(long)]
    samples: Option<usize>,
    /// Directory for report files
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(self, preset: Option<&str>) -> Result<Experiment, Error> {
        let mut layers = Vec::new();
        if let Some(name) = preset {
            layers.push(ConfigLayer {
                preset: Some(name.into()),
                ..ConfigLayer::default()
            });
        }
        if let Some(path) = &self.config {
            layers.push(ConfigLayer::from_path(path)?);
        }
        let epsilons = self.eps.as_deref().map(parse_list).transpose()?;
        layers.push(ConfigLayer {
            preset: self.preset,
            f1: self.f1,
            f2: self.f2,
            mode: self.mode,
            p: self.p,
            q: self.q,
            r1: self.r1,
            r2: self.r2,
            tol: self.tol,
            newton_tol: self.newton_tol,
            epsilons,
            samples: self.samples,
            out: self.out,
            ..ConfigLayer::default()
        });
        Experiment::resolve(&layers)
    }
}

fn pair(text: &str, what: &str) -> Result<[f64; 2], Error> {
    match parse_list(text)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(Error::Config(format!("{what} needs two comma-separated numbers, got '{text}'"))),
    }
}

fn points(point: Option<String>, grid: Option<String>) -> Result<Points, Error> {
    if let Some(g) = grid {
        let v = parse_list(&g)?;
        return match v.as_slice() {
            &[lo, hi, n] if n >= 1.0 && n.fract() == 0.0 && lo.is_finite() && hi.is_finite() => {
                Ok(Points::Grid { lo, hi, n: n as usize })
            }
            _ => Err(Error::Config(format!("--grid expects LO,HI,N with N a positive integer, got '{g}'"))),
        };
    }
    Ok(Points::Point(pair(point.as_deref().unwrap_or("0,0"), "--point")?))
}

fn run(command: Command) -> Result<Outcome, Error> {
    match command {
        Command::Freqs => Ok(commands::freqs().into()),
        Command::Average { exp, point, grid, raw } => {
            let pts = points(point, grid)?;
            commands::average(&exp.resolve(None)?, &pts, raw).map(Outcome::from)
        }
        Command::Zeros { exp } => commands::zeros(&exp.resolve(None)?).map(Outcome::from),
        Command::Verify { exp } => commands::verify(&exp.resolve(None)?),
        Command::Orbit { mode, alpha, samples, p } => {
            let mode: Mode = mode.parse()?;
            commands::orbit(mode, p, pair(&alpha, "--alpha")?, samples).map(Outcome::from)
        }
        Command::Corollary1 { exp } => commands::verify(&exp.resolve(Some("corollary1"))?),
        Command::Corollary2 { exp } => commands::verify(&exp.resolve(Some("corollary2"))?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PENDAVG_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.stdout.as_bytes()).is_err() {
                return ExitCode::from(3);
            }
            if outcome.failures > 0 {
                eprintln!("error: {} shooting case(s) failed; see the report", outcome.failures);
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
