//! End-to-end solver: normalize, baseline, repeated randomized trials, pick
//! the cheapest straight-line solution.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::badcut::{point_flags, CutParams};
use crate::baseline::{baseline_solve, BaselineParams};
use crate::dp::{binarize, solve_dp, tree_points, DpParams};
use crate::error::{Error, Result};
use crate::model::{cost, normalize, Instance, Relocation, Solution};
use crate::par::{map_range, Execution};
use crate::quadtree::{ShiftedGrid, ShiftedQuadtree};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    /// Portal spacing; defaults to `eps / log2(1/eps)` clamped to `1/2`.
    pub rho: Option<f64>,
    pub baseline: BaselineParams,
    pub dp: DpParams,
    pub execution: Execution,
}

impl SolverParams {
    pub fn new(eps: f64) -> Self {
        SolverParams {
            eps,
            trials: 7,
            seed: 0,
            rho: None,
            baseline: BaselineParams::default(),
            dp: DpParams::new(eps),
            execution: Execution::default(),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn cut_params(&self, dim: usize) -> Result<CutParams> {
        let p = CutParams::new(self.eps, dim)?;
        match self.rho {
            Some(rho) => p.with_rho(rho),
            None => Ok(p),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one randomized trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub centers: Vec<usize>,
    /// Straight-line cost on the caller's instance.
    pub cost: f64,
    /// Portal-respecting tilde-cost in normalized units.
    pub tilde_cost_pr: f64,
    pub flagged: usize,
    pub exact_dp: bool,
    pub wall_time: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chosen {
    Baseline,
    Trial(usize),
    /// Every point coincides; any center set is optimal.
    Degenerate,
    /// `k >= m`: every candidate is opened.
    AllCandidates,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub baseline_cost: f64,
    pub trials: Vec<TrialReport>,
    pub chosen: Chosen,
    pub cost: f64,
    /// Coordinates were multiplied by this before the randomized stage.
    pub scale: f64,
    pub wall_time: Duration,
}

/// Straight-line cost, the score used to compare solutions.
pub fn evaluate(instance: &Instance, solution: &Solution) -> Result<f64> {
    cost(instance, solution)
}

pub fn solve(instance: &Instance, params: &SolverParams) -> Result<(Solution, SolveReport)> {
    params.validate()?;
    let start = Instant::now();
    let finish = |solution: Solution, chosen, baseline_cost, trials, scale| -> Result<(Solution, SolveReport)> {
        let c = evaluate(instance, &solution)?;
        Ok((
            solution,
            SolveReport {
                baseline_cost,
                trials,
                chosen,
                cost: c,
                scale,
                wall_time: start.elapsed(),
            },
        ))
    };
    if instance.k() >= instance.m() {
        let all = Solution::new((0..instance.m()).collect());
        let c = evaluate(instance, &all)?;
        return finish(all, Chosen::AllCandidates, c, Vec::new(), 1.0);
    }
    let normalized = match normalize(instance) {
        Ok(n) => n,
        Err(Error::Degenerate(_)) => {
            let s = Solution::new((0..instance.k()).collect());
            return finish(s, Chosen::Degenerate, 0.0, Vec::new(), 1.0);
        }
        Err(e) => return Err(e),
    };
    let work = &normalized.instance;
    let baseline = baseline_solve(work, &params.baseline, params.seed)?;
    let baseline_cost = evaluate(instance, &baseline)?;
    if baseline_cost == 0.0 {
        return finish(baseline, Chosen::Baseline, 0.0, Vec::new(), normalized.scale);
    }
    let cut = params.cut_params(work.dim())?;
    let trials = map_range(params.execution, params.trials, |t| {
        run_trial(instance, work, &baseline, &cut, params, t)
    });
    let trials: Vec<TrialReport> = trials.into_iter().collect::<Result<_>>()?;
    let mut best = (baseline_cost, Chosen::Baseline, baseline.clone());
    for t in &trials {
        if t.cost < best.0 {
            best = (t.cost, Chosen::Trial(t.trial), Solution::new(t.centers.clone()));
        }
    }
    finish(best.2, best.1, baseline_cost, trials, normalized.scale)
}

/// One randomized trial on the normalized instance `work`.
pub fn run_trial(
    original: &Instance,
    work: &Instance,
    baseline: &Solution,
    cut: &CutParams,
    params: &SolverParams,
    trial: usize,
) -> Result<TrialReport> {
    let start = Instant::now();
    let mut rng = trial_rng(params.seed, trial);
    let grid = ShiftedGrid::random(&work.all_points(), &mut rng)?;
    let flags = point_flags(&grid, work, baseline, cut);
    let relocation = Relocation::from_flags(work, baseline, &flags);
    let tree = ShiftedQuadtree::build_with_grid(&tree_points(work, &relocation), cut.rho, grid)?;
    let bt = binarize(&tree);
    let mut dp = params.dp;
    dp.eps = params.eps;
    let exact = dp.resolves_exact(work.n(), work.m(), work.k());
    dp.recompute = exact;
    let out = solve_dp(&bt, work, &relocation.offsets(work), &dp)?;
    Ok(TrialReport {
        trial,
        cost: evaluate(original, &out.solution)?,
        centers: out.solution.centers().to_vec(),
        tilde_cost_pr: out.tilde_cost_pr,
        flagged: flags.iter().filter(|&&f| f).count(),
        exact_dp: out.exact,
        wall_time: start.elapsed(),
    })
}

/// Generator for trial `trial`: the seed selects the key, the trial the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}
