use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gls_core::imaging::{
    denoise, denoise_multichannel, poisson_blend, read_netpbm, write_netpbm, Fidelity, Image, NetpbmFormat, TvMode,
};
use gls_core::instance::{parse_instance, serialize_instance};
use gls_core::ipm::IpmConfig;
use gls_core::modeling::{
    default_penalty, mincut_instance, parse_graph, parse_points, shortest_path_instance, solve_clustering,
    WeightedGraph,
};
use gls_core::mw::MwConfig;
use gls_core::solver::SolverChoice;
use gls_core::{gen, GlsError, Solution};

const THREADS_VAR: &str = "GLS_THREADS";

#[derive(Parser)]
#[command(name = "gls", version, about = "Grouped least squares solvers and reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Mw,
    Ipm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iso,
    Aniso,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Tv,
    Random,
}

#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "mw")]
    solver: SolverKind,
    /// Accuracy parameter; defaults to 0.1 for mw and 1e-6 for ipm.
    #[arg(long)]
    eps: Option<f64>,
    /// Run the full theoretical iteration count (mw only).
    #[arg(long)]
    strict: bool,
}

impl SolverArgs {
    fn choice(&self) -> SolverChoice {
        match self.solver {
            SolverKind::Mw => {
                let eps = self.eps.unwrap_or(0.1);
                if self.strict {
                    SolverChoice::Mw(MwConfig::strict(eps))
                } else {
                    SolverChoice::Mw(MwConfig {
                        eps,
                        ..MwConfig::default()
                    })
                }
            }
            SolverKind::Ipm => SolverChoice::Ipm(IpmConfig::with_eps(self.eps.unwrap_or(1e-6))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file; prints the objective and writes x.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the per-iteration trace table here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write x here (one value per line) instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Total-variation denoising of a PGM or PPM image.
    Denoise {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "aniso")]
        mode: Mode,
        #[command(flatten)]
        solver: SolverArgs,
        /// Use ||x - s||_2 instead of the squared fidelity.
        #[arg(long)]
        sqrt_fidelity: bool,
        /// Relative tolerance of the squared-fidelity searches.
        #[arg(long, default_value_t = 1e-4)]
        search_tol: f64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Poisson blending of the masked source region into the destination.
    Blend {
        src: PathBuf,
        dst: PathBuf,
        mask: PathBuf,
        output: PathBuf,
        /// Destination position of source pixel (0, 0), as X,Y.
        #[arg(long, value_parser = parse_offset, allow_hyphen_values = true, default_value = "0,0")]
        offset: (i64, i64),
    },
    /// Shortest s-t path length through the flow reduction.
    ShortestPath {
        graph: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Conservation penalty; defaults to 4 n max_len sqrt(m).
        #[arg(long)]
        penalty: Option<f64>,
    },
    /// Minimum s-t cut through the fused-lasso reduction.
    Mincut {
        graph: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Convex clustering of a points file; prints one center per line.
    Cluster {
        points: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 1e-4)]
        search_tol: f64,
    },
    /// Emit a deterministic instance file.
    Gen {
        #[arg(long, value_enum, default_value = "random")]
        kind: GenKind,
        /// Variables (random) or image side length (tv).
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Number of groups (random only); defaults to n.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smoothness weight (tv only).
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        /// Noise level (tv only).
        #[arg(long, default_value_t = 0.25)]
        sigma: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// A failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 1;
const INPUT: u8 = 2;
const SOLVER: u8 = 3;

trait OrExit<T> {
    fn or_exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn usage(msg: impl Display) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow!("{msg}"),
    }
}

/// Errors raised while building a reduction from user flags are usage
/// errors; anything else there is an input problem.
fn build_code(e: &GlsError) -> u8 {
    match e {
        GlsError::InvalidArgument(_) | GlsError::IndexOutOfRange { .. } => USAGE,
        _ => INPUT,
    }
}

fn parse_offset(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let parse = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("invalid offset {v:?}: {e}"));
    Ok((parse(x)?, parse(y)?))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(INPUT)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(INPUT)
}

fn read_image(path: &Path) -> Result<(Image, bool), Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(INPUT)?;
    let binary = matches!(bytes.get(..2), Some(b"P5" | b"P6"));
    let img = read_netpbm(&bytes)
        .with_context(|| format!("parsing {}", path.display()))
        .or_exit(INPUT)?;
    Ok((img, binary))
}

fn write_image(path: &Path, img: &Image, binary: bool) -> Result<(), Failure> {
    let bytes = write_netpbm(img, NetpbmFormat::for_image(img, binary), 255).or_exit(INPUT)?;
    write_bytes(path, &bytes)
}

fn write_trace(path: Option<&Path>, sol: &Solution) -> Result<(), Failure> {
    match path {
        Some(p) => write_bytes(p, sol.trace.to_table().as_bytes()),
        None => Ok(()),
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Nearest integer when every input is integral, followed by the raw value.
fn integral_value(raw: f64, integral: bool) -> String {
    if integral {
        format!("{} (raw {raw})", raw.round())
    } else {
        format!("{raw}")
    }
}

fn load_graph(path: &Path) -> Result<WeightedGraph, Failure> {
    parse_graph(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))
        .or_exit(INPUT)
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            instance,
            solver,
            trace,
            output,
        } => {
            let inst = parse_instance(&read_text(&instance)?)
                .with_context(|| format!("parsing {}", instance.display()))
                .or_exit(INPUT)?;
            let sol = solver.choice().solve(&inst).or_exit(SOLVER)?;
            write_trace(trace.as_deref(), &sol)?;
            let x: String = sol.x.iter().map(|v| format!("{v}\n")).collect();
            writeln!(out, "objective {}", sol.objective).or_exit(INPUT)?;
            match output {
                Some(p) => write_bytes(&p, x.as_bytes())?,
                None => out.write_all(x.as_bytes()).or_exit(INPUT)?,
            }
        }
        Command::Denoise {
            input,
            output,
            lambda,
            mode,
            solver,
            sqrt_fidelity,
            search_tol,
            trace,
        } => {
            check_positive("lambda", lambda)?;
            check_positive("search-tol", search_tol)?;
            let (img, binary) = read_image(&input)?;
            let mode = match mode {
                Mode::Iso => TvMode::Isotropic,
                Mode::Aniso => TvMode::Anisotropic,
            };
            let fidelity = if sqrt_fidelity {
                Fidelity::Sqrt
            } else {
                Fidelity::Squared { search_tol }
            };
            let choice = solver.choice();
            let result = if img.channels() == 1 {
                denoise(&img, mode, lambda, &choice, fidelity)
            } else {
                denoise_multichannel(&img, mode, lambda, &choice, fidelity)
            }
            .or_exit(SOLVER)?;
            write_trace(trace.as_deref(), &result.solution)?;
            write_image(&output, &result.image, binary)?;
            writeln!(out, "objective {}", result.objective).or_exit(INPUT)?;
        }
        Command::Blend {
            src,
            dst,
            mask,
            output,
            offset,
        } => {
            let threads = threads()?;
            let (src, _) = read_image(&src)?;
            let (dst, binary) = read_image(&dst)?;
            let (mask, _) = read_image(&mask)?;
            let blended = poisson_blend(&src, &dst, &mask, offset, threads).map_err(|e| Failure {
                code: match e {
                    GlsError::InvalidArgument(_) => USAGE,
                    _ => SOLVER,
                },
                error: e.into(),
            })?;
            write_image(&output, &blended.clamped(), binary)?;
        }
        Command::ShortestPath {
            graph,
            s,
            t,
            solver,
            penalty,
        } => {
            let g = load_graph(&graph)?;
            let penalty = penalty.unwrap_or_else(|| default_penalty(&g));
            let enc = shortest_path_instance(&g, s, t, penalty).map_err(|e| Failure {
                code: build_code(&e),
                error: e.into(),
            })?;
            let sol = solver.choice().solve(&enc.instance).or_exit(SOLVER)?;
            let raw = enc.decode(&sol.x).or_exit(SOLVER)?;
            writeln!(out, "{}", integral_value(raw, g.is_integral())).or_exit(INPUT)?;
        }
        Command::Mincut { graph, s, t, solver } => {
            let g = load_graph(&graph)?;
            let enc = mincut_instance(&g, s, t).map_err(|e| Failure {
                code: build_code(&e),
                error: e.into(),
            })?;
            let x = match &enc.instance {
                Some(inst) => solver.choice().solve(inst).or_exit(SOLVER)?.x,
                None => Vec::new(),
            };
            let raw = enc.objective(&x).or_exit(SOLVER)?;
            let cut = enc.decode(&x).or_exit(SOLVER)?;
            let join = |side: bool| {
                (0..g.n())
                    .filter(|&v| cut.source_side[v] == side)
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            writeln!(out, "cut {} (relaxed {raw})", cut.value).or_exit(INPUT)?;
            writeln!(out, "source {}", join(true)).or_exit(INPUT)?;
            writeln!(out, "sink {}", join(false)).or_exit(INPUT)?;
        }
        Command::Cluster {
            points,
            lambda,
            solver,
            search_tol,
        } => {
            check_positive("lambda", lambda)?;
            check_positive("search-tol", search_tol)?;
            let ps = parse_points(&read_text(&points)?)
                .with_context(|| format!("parsing {}", points.display()))
                .or_exit(INPUT)?;
            let (centers, _) = solve_clustering(&ps, lambda, &solver.choice(), search_tol).or_exit(SOLVER)?;
            for c in centers {
                let line: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" ")).or_exit(INPUT)?;
            }
        }
        Command::Gen {
            kind,
            n,
            k,
            seed,
            lambda,
            sigma,
            output,
        } => {
            let inst = match kind {
                GenKind::Random => gen::random_instance(n, k.unwrap_or(n), seed),
                GenKind::Tv => {
                    check_positive("lambda", lambda)?;
                    gen::tv_instance(n, lambda, sigma, seed)
                }
            }
            .or_exit(USAGE)?;
            let text = serialize_instance(&inst);
            match output {
                Some(p) => write_bytes(&p, text.as_bytes())?,
                None => out.write_all(text.as_bytes()).or_exit(INPUT)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out).and_then(|()| out.flush().or_exit(INPUT)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
