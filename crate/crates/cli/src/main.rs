use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use portal_cluster::baseline::{brute_force_opt_with, DEFAULT_SUBSET_CAP};
use portal_cluster::diagnostics::{
    badly_cut_frequencies, budget_rows, cut_frequency, distortion_sample, portal_detour_ratio, DistortionConstants,
};
use portal_cluster::io::{generate, parse_instance, render_instance, render_solution, GenParams, PointDistribution};
use portal_cluster::{
    baseline_solve, solve, BaselineParams, CutParams, Error, Execution, Instance, Objective, ShiftedQuadtree,
    SolverParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Thread count override; defaults to the machine's parallelism.
const THREADS_VAR: &str = "PORTAL_CLUSTER_THREADS";

/// Seeds used to fit small-distortion constants start here, away from the
/// evaluation seeds.
const CALIBRATION_OFFSET: u64 = 1 << 40;

#[derive(Parser)]
#[command(name = "portal-cluster", version, about = "Discrete k-median / k-means approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized approximation scheme.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact optimum by enumeration.
    Exact {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
        cap: u128,
    },
    /// Seeded local search.
    Baseline {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo diagnostics as CSV.
    Diagnose {
        instance: PathBuf,
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, default_value_t = 1000)]
        seeds: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        z: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        dist: String,
    },
    /// Solver wall time on generated uniform instances, as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 2000, 4000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Cutprob,
    Badcut,
    Budget,
    Smalldist,
    Detour,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } | Error::Infeasible(_) => 2,
        Error::Internal(_) | Error::UnknownCell(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    let text = match run(&cli.command) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &PathBuf) -> Result<Instance, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
    parse_instance(&text)
}

fn run(command: &Command) -> Result<String, Error> {
    match command {
        Command::Solve { instance, eps, trials, seed } => {
            let inst = load(instance)?;
            let params = SolverParams::new(*eps).with_trials(*trials).with_seed(*seed);
            let (solution, report) = solve(&inst, &params)?;
            Ok(render_solution(report.cost, &solution))
        }
        Command::Exact { instance, cap } => {
            let inst = load(instance)?;
            let (solution, cost) = brute_force_opt_with(&inst, *cap, Execution::default())?;
            Ok(render_solution(cost, &solution))
        }
        Command::Baseline { instance, seed } => {
            let inst = load(instance)?;
            let solution = baseline_solve(&inst, &BaselineParams::default(), *seed)?;
            Ok(render_solution(portal_cluster::cost(&inst, &solution)?, &solution))
        }
        Command::Diagnose { instance, check, seeds, eps, seed } => {
            let inst = load(instance)?;
            diagnose(&inst, *check, *seeds, *eps, *seed)
        }
        Command::Gen { n, m, k, d, z, seed, dist } => {
            let params = GenParams {
                n: *n,
                m: *m,
                k: *k,
                dim: *d,
                objective: Objective::from_z(*z)?,
                seed: *seed,
                distribution: dist.parse::<PointDistribution>()?,
            };
            Ok(render_instance(&generate(&params)?))
        }
        Command::Bench { sizes, m, k, eps, reps, seed } => {
            let mut out = String::from("n,rep,seconds,cost\n");
            for &n in sizes {
                let inst = generate(&GenParams {
                    n,
                    m: *m,
                    k: *k,
                    dim: 2,
                    objective: Objective::Means,
                    seed: *seed,
                    distribution: PointDistribution::Uniform,
                })?;
                for rep in 0..*reps {
                    let start = Instant::now();
                    let (_, report) = solve(&inst, &SolverParams::new(*eps).with_seed(*seed))?;
                    let _ = writeln!(out, "{n},{rep},{:.6},{:.16e}", start.elapsed().as_secs_f64(), report.cost);
                }
            }
            Ok(out)
        }
    }
}

fn diagnose(inst: &Instance, check: Check, seeds: usize, eps: f64, first: u64) -> Result<String, Error> {
    let exec = Execution::default();
    let params = CutParams::new(eps, inst.dim())?;
    let points = inst.all_points();
    let mut out = String::new();
    match check {
        Check::Cutprob => {
            out.push_str("client,radius,level,frequency,bound,sigma\n");
            let d = inst.dim() as f64;
            for (c, p) in inst.clients().iter().enumerate().take(5) {
                let r = 1.0;
                for level in 1..=6 {
                    let f = cut_frequency(exec, &points, p.coords(), r, level, first, seeds)?;
                    let bound = d * r / 2f64.powi(level);
                    let _ = writeln!(out, "{c},{r},{level},{:.6},{bound:.6},{:.6}", f.frequency, f.sigma);
                }
            }
        }
        Check::Badcut => {
            out.push_str("client,frequency,bound,sigma\n");
            let baseline = baseline_solve(inst, &BaselineParams::default(), first)?;
            for (c, f) in badly_cut_frequencies(exec, inst, &baseline, &params, first, seeds)?.iter().enumerate() {
                let _ = writeln!(out, "{c},{:.6},{eps},{:.6}", f.frequency, f.sigma);
            }
        }
        Check::Budget => {
            out.push_str("seed,client,b1,b2,b3,flagged\n");
            let baseline = baseline_solve(inst, &BaselineParams::default(), first)?;
            let (opt, _) = brute_force_opt_with(inst, DEFAULT_SUBSET_CAP, exec)?;
            for s in 0..seeds as u64 {
                for row in budget_rows(inst, &baseline, &opt, &params, first + s)? {
                    let _ = writeln!(
                        out,
                        "{},{},{:.9e},{:.9e},{:.9e},{}",
                        row.seed, row.client, row.b1, row.b2, row.b3, row.flagged as u8
                    );
                }
            }
        }
        Check::Smalldist => {
            out.push_str(
                "seed,budget_ratio,cost_ratio,c_budget,c_cost,unwitnessed,rescued,sstar_size,facts,pass\n",
            );
            let baseline = baseline_solve(inst, &BaselineParams::default(), first)?;
            let (opt, _) = brute_force_opt_with(inst, DEFAULT_SUBSET_CAP, exec)?;
            let calibration = (0..seeds as u64)
                .map(|s| distortion_sample(inst, &baseline, &opt, eps, CALIBRATION_OFFSET + first + s))
                .collect::<Result<Vec<_>, _>>()?;
            let c = DistortionConstants::fit(&calibration);
            for s in 0..seeds as u64 {
                let r = distortion_sample(inst, &baseline, &opt, eps, first + s)?;
                let _ = writeln!(
                    out,
                    "{},{:.9e},{:.9e},{:.9e},{:.9e},{},{},{},{},{}",
                    first + s,
                    r.budget_ratio,
                    r.cost_ratio,
                    c.budget,
                    c.cost,
                    r.unwitnessed(),
                    r.rescued(),
                    r.sstar_size,
                    r.facts.distances() as u8,
                    r.pass(&c) as u8
                );
            }
        }
        Check::Detour => {
            out.push_str("seed,pairs,violations,max_ratio\n");
            for s in 0..seeds as u64 {
                let tree = ShiftedQuadtree::build(&points, params.rho, first + s)?;
                let mut rng = ChaCha8Rng::seed_from_u64(first + s);
                let pairs = 1000;
                let (mut violations, mut worst) = (0, 0.0f64);
                for _ in 0..pairs {
                    let p = &points[rng.random_range(0..points.len())];
                    let q = &points[rng.random_range(0..points.len())];
                    let ratio = portal_detour_ratio(&tree, p.coords(), q.coords());
                    violations += (ratio > 1.0) as usize;
                    worst = worst.max(ratio);
                }
                let _ = writeln!(out, "{},{pairs},{violations},{worst:.6}", first + s);
            }
        }
    }
    Ok(out)
}
