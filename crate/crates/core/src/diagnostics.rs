//! Empirical checks of the structure the solver relies on but never builds:
//! the reduced reference solution, the structured solution `S*`, and the
//! small-distortion properties of a sampled decomposition.
//!
//! Everything here works in candidate indices. Center lists may contain
//! duplicates after padding, so they are plain `Vec<usize>` rather than
//! [`Solution`]s.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::badcut::{bad_cut_report, budget, classify_badly_cut, CutOracle, CutParams};
use crate::error::{Error, Result};
use crate::geometry::{compensated_sum, dist, Point};
use crate::model::{Instance, Objective, Relocation, Solution};
use crate::par::{map_range, Execution};
use crate::quadtree::{CutLevel, ShiftedGrid, ShiftedQuadtree};

/// Largest fitted constant accepted for the reduced reference solution.
pub const OPTPRIME_MAX_C: f64 = 10.0;

/// Fitted constants are this multiple of their calibration mean. By Markov's
/// inequality each fitted property then fails on at most a sixth of seeds.
pub const MARKOV_FACTOR: f64 = 6.0;

/// Relative slack for inequalities that hold exactly in real arithmetic.
const SLACK: f64 = 1e-9;

/// Frequency of a probe over consecutive seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Frequency {
    pub hits: usize,
    pub trials: usize,
    pub frequency: f64,
    /// Binomial standard error; zero when the frequency is 0 or 1.
    pub sigma: f64,
    pub log: Vec<bool>,
}

impl Frequency {
    pub fn from_log(log: Vec<bool>) -> Self {
        let trials = log.len();
        let hits = log.iter().filter(|&&b| b).count();
        let frequency = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let sigma = if trials == 0 {
            0.0
        } else {
            (frequency * (1.0 - frequency) / trials as f64).sqrt()
        };
        Frequency { hits, trials, frequency, sigma, log }
    }

    pub fn within(&self, bound: f64, sigmas: f64) -> bool {
        self.frequency <= bound + sigmas * self.sigma
    }

    pub fn at_least(&self, bound: f64, sigmas: f64) -> bool {
        self.frequency >= bound - sigmas * self.sigma
    }
}

pub const MIN_SEEDS: usize = 100;

/// Runs `probe` on seeds `first..first + seeds`.
pub fn monte_carlo<F>(exec: Execution, first: u64, seeds: usize, probe: F) -> Result<Frequency>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    if seeds < MIN_SEEDS {
        return Err(Error::param(format!("need at least {MIN_SEEDS} seeds, got {seeds}")));
    }
    Ok(Frequency::from_log(map_range(exec, seeds, |i| probe(first + i as u64))))
}

/// Random grid over `points` drawn from `seed`.
pub fn seeded_grid(points: &[Point], seed: u64) -> Result<ShiftedGrid> {
    ShiftedGrid::random(points, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Whether `B(x, r)` is cut at exactly level `level` (its highest cut).
pub fn cut_at_level(grid: &ShiftedGrid, x: &[f64], r: f64, level: i32) -> bool {
    grid.cut_level_ball(x, r) == Some(level)
}

/// Frequency with which `B(x, r)` is cut at exactly `level`.
pub fn cut_frequency(
    exec: Execution,
    points: &[Point],
    x: &[f64],
    r: f64,
    level: i32,
    first: u64,
    seeds: usize,
) -> Result<Frequency> {
    seeded_grid(points, first)?;
    monte_carlo(exec, first, seeds, |seed| {
        let grid = seeded_grid(points, seed).expect("validated above");
        cut_at_level(&grid, x, r, level)
    })
}

/// Per-client frequency of being badly cut w.r.t. `baseline`.
pub fn badly_cut_frequencies(
    exec: Execution,
    instance: &Instance,
    baseline: &Solution,
    params: &CutParams,
    first: u64,
    seeds: usize,
) -> Result<Vec<Frequency>> {
    if seeds < MIN_SEEDS {
        return Err(Error::param(format!("need at least {MIN_SEEDS} seeds, got {seeds}")));
    }
    let points = instance.all_points();
    let per_seed = map_range(exec, seeds, |i| -> Result<Vec<bool>> {
        let grid = seeded_grid(&points, first + i as u64)?;
        Ok(crate::badcut::point_flags(&grid, instance, baseline, params))
    });
    let per_seed: Vec<Vec<bool>> = per_seed.into_iter().collect::<Result<_>>()?;
    Ok((0..instance.n())
        .map(|c| Frequency::from_log(per_seed.iter().map(|f| f[c]).collect()))
        .collect())
}

/// `(path − dist) / (ρ·2^{i+2})` for the greedy portal path between `p` and
/// `q`, where `i` is their cut level. At most one when the detour bound holds.
pub fn portal_detour_ratio(tree: &ShiftedQuadtree, p: &[f64], q: &[f64]) -> f64 {
    let (len, _) = tree.portal_path(p, q);
    let excess = len - dist(p, q);
    match tree.cut_level_pair(p, q) {
        Some(i) => excess.max(0.0) / (tree.rho() * 2f64.powi(i + 2)),
        None if excess <= SLACK * len.max(1.0) => 0.0,
        None => f64::INFINITY,
    }
}

/// Greedy correspondence between a baseline and a reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterMapping {
    /// Baseline centers, padded to the common size.
    pub baseline: Vec<usize>,
    /// Reference centers, padded to the common size.
    pub opt: Vec<usize>,
    /// Position in `baseline` of the center closest to each reference center.
    pub owner: Vec<usize>,
    /// Reference positions owned by each baseline position.
    pub psi: Vec<Vec<usize>>,
    pub a0: Vec<usize>,
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub opt1: Vec<usize>,
    pub opt2: Vec<usize>,
    /// Owned reference position closest to each baseline position.
    pub f_ell: Vec<Option<usize>>,
}

impl CenterMapping {
    pub fn baseline_point<'a>(&self, instance: &'a Instance, pos: usize) -> &'a [f64] {
        instance.candidates()[self.baseline[pos]].coords()
    }

    pub fn opt_point<'a>(&self, instance: &'a Instance, pos: usize) -> &'a [f64] {
        instance.candidates()[self.opt[pos]].coords()
    }
}

/// Position in `list` of the candidate nearest to `x`, ties to the lowest position.
fn nearest_pos(instance: &Instance, x: &[f64], list: &[usize]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in list.iter().enumerate() {
        let d = dist(x, instance.candidates()[c].coords());
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn padded(centers: &[usize], len: usize) -> Vec<usize> {
    let mut out = centers.to_vec();
    let last = *out.last().expect("non-empty");
    out.resize(len, last);
    out
}

pub fn build_mapping(instance: &Instance, baseline: &Solution, opt: &Solution) -> Result<CenterMapping> {
    if baseline.is_empty() || opt.is_empty() {
        return Err(Error::EmptySolution);
    }
    let k = baseline.len().max(opt.len());
    let baseline = padded(baseline.centers(), k);
    let opt = padded(opt.centers(), k);
    let owner: Vec<usize> = opt
        .iter()
        .map(|&f| nearest_pos(instance, instance.candidates()[f].coords(), &baseline).0)
        .collect();
    let mut psi = vec![Vec::new(); k];
    for (j, &l) in owner.iter().enumerate() {
        psi[l].push(j);
    }
    let (mut a0, mut a1, mut a2, mut opt1, mut opt2) = (vec![], vec![], vec![], vec![], vec![]);
    let mut f_ell = vec![None; k];
    for (l, owned) in psi.iter().enumerate() {
        match owned.len() {
            0 => a0.push(l),
            1 => {
                a1.push(l);
                opt1.push(owned[0]);
            }
            _ => {
                a2.push(l);
                opt2.extend(owned);
            }
        }
        let x = instance.candidates()[baseline[l]].coords();
        f_ell[l] = owned.iter().copied().min_by(|&a, &b| {
            let da = dist(x, instance.candidates()[opt[a]].coords());
            let db = dist(x, instance.candidates()[opt[b]].coords());
            da.total_cmp(&db).then(a.cmp(&b))
        });
    }
    opt2.sort_unstable();
    Ok(CenterMapping { baseline, opt, owner, psi, a0, a1, a2, opt1, opt2, f_ell })
}

fn cost_of_list(instance: &Instance, centers: &[usize]) -> f64 {
    let z = instance.objective();
    compensated_sum(
        instance
            .clients()
            .iter()
            .map(|p| z.pow(instance.nearest(p.coords(), centers).1)),
    )
}

/// Reference solution with a few centers of `OPT^{≥2}` removed.
#[derive(Clone, Debug, PartialEq)]
pub struct OptPrime {
    /// Kept reference positions, ascending.
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub cost: f64,
    pub opt_cost: f64,
    pub baseline_cost: f64,
    /// Smallest `C` with `cost ≤ (1 + Cε)·opt_cost + Cε·baseline_cost`.
    pub fitted_c: f64,
    pub within_bound: bool,
}

impl OptPrime {
    pub fn centers(&self, mapping: &CenterMapping) -> Vec<usize> {
        self.kept.iter().map(|&j| mapping.opt[j]).collect()
    }
}

/// Removes `⌊ε·|OPT^{≥2}|/2⌋` centers of `OPT^{≥2}`, never an `f_ℓ`, each time
/// the one whose removal raises the cost least.
pub fn build_optprime(mapping: &CenterMapping, instance: &Instance, eps: f64) -> OptPrime {
    let target = (eps * mapping.opt2.len() as f64 / 2.0).floor() as usize;
    let protected: Vec<usize> = mapping.f_ell.iter().flatten().copied().collect();
    let mut removable: Vec<usize> = mapping.opt2.iter().copied().filter(|j| !protected.contains(j)).collect();
    let mut kept: Vec<usize> = (0..mapping.opt.len()).collect();
    let mut removed = Vec::new();
    while removed.len() < target && !removable.is_empty() {
        let (i, _) = removable
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let rest: Vec<usize> = kept.iter().filter(|&&x| x != j).map(|&x| mapping.opt[x]).collect();
                (i, cost_of_list(instance, &rest))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let j = removable.remove(i);
        kept.retain(|&x| x != j);
        removed.push(j);
    }
    let cost = cost_of_list(instance, &kept.iter().map(|&j| mapping.opt[j]).collect::<Vec<_>>());
    let opt_cost = cost_of_list(instance, &mapping.opt);
    let baseline_cost = cost_of_list(instance, &mapping.baseline);
    let fitted_c = fitted_ratio(cost - opt_cost, eps * (opt_cost + baseline_cost));
    OptPrime {
        kept,
        removed,
        cost,
        opt_cost,
        baseline_cost,
        fitted_c,
        within_bound: fitted_c <= OPTPRIME_MAX_C,
    }
}

/// `excess / unit`, clamped at zero; zero over zero is zero.
fn fitted_ratio(excess: f64, unit: f64) -> f64 {
    if excess <= SLACK * unit.abs().max(1.0) {
        0.0
    } else if unit > 0.0 {
        excess / unit
    } else {
        f64::INFINITY
    }
}

/// The structured solution built from `OPT′` and the baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SStar {
    /// Candidate indices, possibly with repeats.
    pub centers: Vec<usize>,
    /// `(f_ℓ position, ℓ position)` swaps.
    pub replaced: Vec<(usize, usize)>,
    /// Baseline positions added from `𝒜⁰`.
    pub added: Vec<usize>,
    /// Per baseline position: badly cut w.r.t. the reference.
    pub center_flags: Vec<bool>,
}

impl SStar {
    pub fn distinct(&self) -> usize {
        let mut c = self.centers.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

pub fn build_sstar<O: CutOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    mapping: &CenterMapping,
    optprime: &OptPrime,
    params: &CutParams,
) -> SStar {
    let center_flags: Vec<bool> = mapping
        .baseline
        .iter()
        .map(|&l| {
            let x = instance.candidates()[l].coords();
            let (_, r) = instance.nearest(x, &mapping.opt);
            classify_badly_cut(oracle, x, r, params)
        })
        .collect();
    let mut slots: Vec<(usize, usize)> = optprime.kept.iter().map(|&j| (j, mapping.opt[j])).collect();
    let mut replaced = Vec::new();
    let mut added = Vec::new();
    for (l, &bad) in center_flags.iter().enumerate() {
        if !bad {
            continue;
        }
        match mapping.f_ell[l] {
            Some(f) => {
                if let Some(slot) = slots.iter_mut().find(|s| s.0 == f) {
                    slot.1 = mapping.baseline[l];
                    replaced.push((f, l));
                }
            }
            None => added.push(l),
        }
    }
    let mut centers: Vec<usize> = slots.into_iter().map(|s| s.1).collect();
    centers.extend(added.iter().map(|&l| mapping.baseline[l]));
    SStar { centers, replaced, added, center_flags }
}

/// Distance inequalities that hold for every decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactChecks {
    /// `dist(ℓ, S*) ≤ 2·dist(ℓ, OPT′)` for every baseline center.
    pub centers: bool,
    /// `dist(p, p̃) + dist(p̃, S*) ≤ 3·𝒜_p + 2·OPT′_p` for every client.
    pub relocated: bool,
    /// `dist(p, S*) ≤ 2·dist(p, OPT′) + dist(p, 𝒜)` for every client.
    pub direct: bool,
    /// `|S*| ≤ k`.
    pub size: bool,
}

impl FactChecks {
    pub fn distances(&self) -> bool {
        self.centers && self.relocated && self.direct
    }
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + SLACK * rhs.abs().max(1.0)
}

pub fn fact_checks(
    instance: &Instance,
    mapping: &CenterMapping,
    optprime: &[usize],
    sstar: &SStar,
    relocation: &Relocation,
) -> FactChecks {
    let cand = instance.candidates();
    let centers = mapping.baseline.iter().all(|&l| {
        let x = cand[l].coords();
        le(instance.nearest(x, &sstar.centers).1, 2.0 * instance.nearest(x, optprime).1)
    });
    let mut relocated = true;
    let mut direct = true;
    for (p, t) in instance.clients().iter().zip(relocation.targets()) {
        let a = instance.nearest(p.coords(), &mapping.baseline).1;
        let o = instance.nearest(p.coords(), optprime).1;
        let lhs = p.dist(t) + instance.nearest(t.coords(), &sstar.centers).1;
        relocated &= le(lhs, 3.0 * a + 2.0 * o);
        direct &= le(instance.nearest(p.coords(), &sstar.centers).1, 2.0 * o + a);
    }
    FactChecks {
        centers,
        relocated,
        direct,
        size: sstar.distinct() <= instance.k(),
    }
}

/// Fitted constants for the first two small-distortion properties.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionConstants {
    pub budget: f64,
    pub cost: f64,
}

impl DistortionConstants {
    /// [`MARKOV_FACTOR`] times the mean of each ratio over `samples`.
    pub fn fit(samples: &[SmallDistortionReport]) -> Self {
        let mean = |f: fn(&SmallDistortionReport) -> f64| {
            let n = samples.len().max(1) as f64;
            compensated_sum(samples.iter().map(f)) / n
        };
        DistortionConstants {
            budget: MARKOV_FACTOR * mean(|r| r.budget_ratio),
            cost: MARKOV_FACTOR * mean(|r| r.cost_ratio),
        }
    }
}

/// A center of `S*` that absorbs a client's detour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub center: usize,
    pub level: CutLevel,
    /// Found only by searching all of `S*`.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallDistortionReport {
    pub objective: Objective,
    pub budget_total: f64,
    /// `budget_total / (ε·(cost OPT + cost 𝒜))`.
    pub budget_ratio: f64,
    /// `Σ (dist(p, p̃) + dist(p̃, S*))^z`.
    pub sstar_cost: f64,
    /// Excess of `sstar_cost` over `cost OPT`, in units of `ε·(cost OPT + cost 𝒜)`.
    pub cost_ratio: f64,
    pub witnesses: Vec<Option<Witness>>,
    pub sstar_size: usize,
    pub optprime: OptPrime,
    pub facts: FactChecks,
}

impl SmallDistortionReport {
    pub fn property1(&self, c: &DistortionConstants) -> bool {
        self.budget_ratio <= c.budget
    }

    pub fn property2(&self, c: &DistortionConstants) -> bool {
        self.cost_ratio <= c.cost
    }

    /// Every client has a witness among the proof's candidates.
    pub fn property3(&self) -> bool {
        self.witnesses.iter().all(|w| matches!(w, Some(w) if !w.exhaustive))
    }

    /// Clients witnessed only by the exhaustive search.
    pub fn rescued(&self) -> usize {
        self.witnesses.iter().filter(|w| matches!(w, Some(w) if w.exhaustive)).count()
    }

    pub fn unwitnessed(&self) -> usize {
        self.witnesses.iter().filter(|w| w.is_none()).count()
    }

    pub fn pass(&self, c: &DistortionConstants) -> bool {
        self.property1(c) && self.property2(c) && self.property3()
    }
}

/// Evaluates the small-distortion properties of `tree` for `instance`.
///
/// `tree` must contain every client and candidate; `opt` should be exact.
pub fn check_small_distortion(
    instance: &Instance,
    tree: &ShiftedQuadtree,
    baseline: &Solution,
    opt: &Solution,
    eps: f64,
) -> Result<SmallDistortionReport> {
    let params = CutParams::new(eps, instance.dim())?.with_rho(tree.rho())?;
    let z = instance.objective();
    let mapping = build_mapping(instance, baseline, opt)?;
    let optprime = build_optprime(&mapping, instance, eps);
    let prime = optprime.centers(&mapping);
    let sstar = build_sstar(tree, instance, &mapping, &optprime, &params);
    let report = bad_cut_report(tree, instance, baseline, None, &params);
    let relocation = Relocation::from_flags(instance, baseline, &report.point_flags);
    let facts = fact_checks(instance, &mapping, &prime, &sstar, &relocation);

    let budgets = budget(tree, instance, baseline, &Solution::new(prime.clone()), &params)?;
    let budget_total = budgets.sum();
    let unit = eps * (optprime.opt_cost + optprime.baseline_cost);

    let cand = instance.candidates();
    let mut terms = Vec::with_capacity(instance.n());
    let mut witnesses = Vec::with_capacity(instance.n());
    for (i, (p, t)) in instance.clients().iter().zip(relocation.targets()).enumerate() {
        let offset = p.dist(t);
        let (near, to_s) = nearest_pos(instance, t.coords(), &sstar.centers);
        let base = z.pow(offset + to_s);
        terms.push(base);
        let allowed = base + budgets.total[i];
        let absorbs = |s: usize| {
            let level = tree.cut_level_pair(t.coords(), cand[s].coords());
            let detour = level.map_or(0.0, |l| eps * 2f64.powi(l));
            let lhs = z.pow(offset + dist(t.coords(), cand[s].coords()) + detour);
            le(lhs, allowed).then_some(level)
        };
        let ap_center = instance.nearest(p.coords(), &mapping.baseline).0;
        let (via_a, _) = nearest_pos(instance, cand[ap_center].coords(), &sstar.centers);
        let mut proof = vec![sstar.centers[near], sstar.centers[via_a]];
        if sstar.centers.contains(&ap_center) {
            proof.push(ap_center);
        }
        let found = proof
            .iter()
            .find_map(|&s| absorbs(s).map(|level| Witness { center: s, level, exhaustive: false }))
            .or_else(|| {
                sstar
                    .centers
                    .iter()
                    .find_map(|&s| absorbs(s).map(|level| Witness { center: s, level, exhaustive: true }))
            });
        witnesses.push(found);
    }
    let sstar_cost = compensated_sum(terms);
    Ok(SmallDistortionReport {
        objective: z,
        budget_total,
        budget_ratio: fitted_ratio(budget_total, unit),
        sstar_cost,
        cost_ratio: fitted_ratio(sstar_cost - optprime.opt_cost, unit),
        witnesses,
        sstar_size: sstar.distinct(),
        optprime,
        facts,
    })
}

/// [`check_small_distortion`] on the tree drawn from `seed`.
pub fn distortion_sample(
    instance: &Instance,
    baseline: &Solution,
    opt: &Solution,
    eps: f64,
    seed: u64,
) -> Result<SmallDistortionReport> {
    let params = CutParams::new(eps, instance.dim())?;
    let tree = ShiftedQuadtree::build(&instance.all_points(), params.rho, seed)?;
    check_small_distortion(instance, &tree, baseline, opt, eps)
}

/// One client's budget row for a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetRow {
    pub seed: u64,
    pub client: usize,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub flagged: bool,
}

/// Budgets of every client under the grid drawn from `seed`.
pub fn budget_rows(
    instance: &Instance,
    baseline: &Solution,
    reference: &Solution,
    params: &CutParams,
    seed: u64,
) -> Result<Vec<BudgetRow>> {
    let grid = seeded_grid(&instance.all_points(), seed)?;
    let b = budget(&grid, instance, baseline, reference, params)?;
    let flags = crate::badcut::point_flags(&grid, instance, baseline, params);
    Ok((0..instance.n())
        .map(|client| BudgetRow {
            seed,
            client,
            b1: b.b1[client],
            b2: b.b2[client],
            b3: b.b3[client],
            flagged: flags[client],
        })
        .collect())
}

/// Mean over seeds of `Σ_p b(p, ε) / (cost 𝒜 + cost OPT)`.
pub fn mean_budget_ratio(
    exec: Execution,
    instance: &Instance,
    baseline: &Solution,
    reference: &Solution,
    eps: f64,
    first: u64,
    seeds: usize,
) -> Result<f64> {
    let params = CutParams::new(eps, instance.dim())?;
    let unit = crate::model::cost(instance, baseline)? + crate::model::cost(instance, reference)?;
    if unit <= 0.0 {
        return Ok(0.0);
    }
    let per_seed = map_range(exec, seeds, |i| -> Result<f64> {
        let grid = seeded_grid(&instance.all_points(), first + i as u64)?;
        Ok(budget(&grid, instance, baseline, reference, &params)?.sum())
    });
    let sums: Vec<f64> = per_seed.into_iter().collect::<Result<_>>()?;
    Ok(compensated_sum(sums) / seeds.max(1) as f64 / unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::brute_force_opt;
    use rand::Rng;

    fn line() -> Instance {
        let p = |x: f64| Point::new(vec![x, 0.0]);
        Instance::new(2, vec![p(0.0), p(10.0)], vec![p(0.0), p(10.0), p(5.0)], 1, Objective::Means).unwrap()
    }

    fn random(seed: u64, z: Objective) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |c: usize| -> Vec<Point> {
            (0..c)
                .map(|_| Point::new(vec![rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)]))
                .collect()
        };
        Instance::new(2, gen(10), gen(8), 3, z).unwrap()
    }

    #[test]
    fn monte_carlo_extremes() {
        let t = monte_carlo(Execution::Sequential, 0, 100, |_| true).unwrap();
        assert_eq!((t.frequency, t.sigma), (1.0, 0.0));
        let f = monte_carlo(Execution::Sequential, 0, 100, |_| false).unwrap();
        assert_eq!((f.frequency, f.hits), (0.0, 0));
        assert!(monte_carlo(Execution::Sequential, 0, 99, |_| true).is_err());
    }

    #[test]
    fn identical_solutions_map_to_themselves() {
        let i = random(1, Objective::Means);
        let s = Solution::new(vec![1, 4, 6]);
        let m = build_mapping(&i, &s, &s).unwrap();
        assert!(m.psi.iter().enumerate().all(|(l, p)| p == &vec![l]));
        assert!(m.a2.is_empty() && m.a0.is_empty());
        let o = build_optprime(&m, &i, 0.5);
        assert_eq!(o.kept, vec![0, 1, 2]);
    }

    #[test]
    fn pigeonhole_creates_empty_owner() {
        let p = |x: f64| Point::new(vec![x, 0.0]);
        let cand = vec![p(0.0), p(1.0), p(100.0), p(2.0)];
        let i = Instance::new(2, vec![p(0.0)], cand, 2, Objective::Median).unwrap();
        let m = build_mapping(&i, &Solution::new(vec![0, 2]), &Solution::new(vec![1, 3])).unwrap();
        assert_eq!(m.a2, vec![0]);
        assert_eq!(m.a0, vec![1]);
        assert_eq!(m.f_ell[0], Some(0));
    }

    #[test]
    fn mapping_cardinalities() {
        for seed in 0..20 {
            let i = random(seed, Objective::Median);
            let (opt, _) = brute_force_opt(&i).unwrap();
            let base = Solution::new(vec![0, 1, 2]);
            let m = build_mapping(&i, &base, &opt).unwrap();
            assert_eq!(m.opt2.len(), m.a0.len() + m.a2.len());
            assert_eq!(m.opt1.len(), m.a1.len());
            let mut all: Vec<usize> = m.psi.concat();
            all.sort_unstable();
            assert_eq!(all, (0..3).collect::<Vec<_>>());
        }
    }

    #[test]
    fn optprime_respects_protected_centers() {
        for seed in 0..20 {
            let i = random(seed, Objective::Means);
            let (opt, _) = brute_force_opt(&i).unwrap();
            let m = build_mapping(&i, &Solution::new(vec![0, 1, 2]), &opt).unwrap();
            let o = build_optprime(&m, &i, 0.9);
            assert_eq!(o.removed.len(), (0.9 * m.opt2.len() as f64 / 2.0).floor() as usize);
            for f in m.f_ell.iter().flatten() {
                assert!(o.kept.contains(f));
            }
            assert!(o.cost >= o.opt_cost - 1e-9);
        }
    }

    struct Never;
    impl CutOracle for Never {
        fn cut_level_ball(&self, _: &[f64], _: f64) -> CutLevel {
            None
        }
    }

    struct Always;
    impl CutOracle for Always {
        fn cut_level_ball(&self, _: &[f64], _: f64) -> CutLevel {
            Some(60)
        }
    }

    #[test]
    fn sstar_without_bad_cuts_is_optprime() {
        let i = random(3, Objective::Means);
        let (opt, _) = brute_force_opt(&i).unwrap();
        let m = build_mapping(&i, &Solution::new(vec![0, 1, 2]), &opt).unwrap();
        let o = build_optprime(&m, &i, 0.5);
        let p = CutParams::new(0.5, 2).unwrap();
        let s = build_sstar(&Never, &i, &m, &o, &p);
        assert_eq!(s.centers, o.centers(&m));
    }

    #[test]
    fn one_bad_empty_owner_adds_one_center() {
        let p = |x: f64| Point::new(vec![x, 0.0]);
        let cand = vec![p(0.0), p(1.0), p(100.0), p(2.0)];
        let i = Instance::new(2, vec![p(0.0), p(100.0)], cand, 2, Objective::Median).unwrap();
        let m = build_mapping(&i, &Solution::new(vec![0, 2]), &Solution::new(vec![1, 3])).unwrap();
        let o = build_optprime(&m, &i, 0.1);
        let params = CutParams::new(0.1, 2).unwrap();
        let s = build_sstar(&Always, &i, &m, &o, &params);
        assert_eq!(s.added, vec![1]);
        assert_eq!(s.centers.len(), o.kept.len() + 1);
    }

    #[test]
    fn fact_inequalities_hold_on_random_trees() {
        for seed in 0..40 {
            let z = if seed % 2 == 0 { Objective::Means } else { Objective::Median };
            let i = random(seed, z);
            let (opt, _) = brute_force_opt(&i).unwrap();
            let base = Solution::new(vec![0, 1, 2]);
            let r = distortion_sample(&i, &base, &opt, 0.25, seed).unwrap();
            assert!(r.facts.distances(), "seed {seed}: {:?}", r.facts);
        }
    }

    #[test]
    fn shared_center_passes_with_zeros() {
        let i = line();
        let one = Instance::new(2, vec![i.candidates()[2].clone()], i.candidates().to_vec(), 1, Objective::Means)
            .unwrap();
        let s = Solution::new(vec![2]);
        let r = distortion_sample(&one, &s, &s, 0.25, 7).unwrap();
        assert_eq!((r.budget_total, r.sstar_cost, r.cost_ratio), (0.0, 0.0, 0.0));
        let zero = DistortionConstants { budget: 0.0, cost: 0.0 };
        assert!(r.pass(&zero));
    }

    #[test]
    fn fitted_constants_are_markov_multiples() {
        let i = random(11, Objective::Means);
        let (opt, _) = brute_force_opt(&i).unwrap();
        let base = Solution::new(vec![0, 1, 2]);
        let samples: Vec<_> = (0..50).map(|s| distortion_sample(&i, &base, &opt, 0.25, s).unwrap()).collect();
        let c = DistortionConstants::fit(&samples);
        let mean = samples.iter().map(|r| r.budget_ratio).sum::<f64>() / 50.0;
        assert!((c.budget - MARKOV_FACTOR * mean).abs() < 1e-9);
        assert!(samples.iter().filter(|r| r.property1(&c)).count() >= 50 - 50 / 6);
    }
}
