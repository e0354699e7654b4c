//! Constant-factor baseline, exact enumeration and the exhaustive
//! portal-respecting oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{compensated_sum, dist, CompensatedSum};
use crate::dp::binarize;
use crate::model::{cost, Instance, Relocation, Solution};
use crate::quadtree::ShiftedQuadtree;
use crate::par::{map_range, Execution};

/// Knobs of the seeding plus local-search baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineParams {
    pub seeding_rounds: usize,
    /// The swap loop stops after `iterations_per_center * k` swaps.
    pub iterations_per_center: usize,
    /// A swap is taken only if it lowers the cost by more than this fraction.
    pub improvement_threshold: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            seeding_rounds: 3,
            iterations_per_center: 200,
            improvement_threshold: 1e-6,
        }
    }
}

impl BaselineParams {
    fn validate(&self) -> Result<()> {
        if self.seeding_rounds == 0 || self.iterations_per_center == 0 || self.improvement_threshold.is_nan() || self.improvement_threshold <= 0.0 {
            return Err(Error::param("baseline parameters must be positive"));
        }
        Ok(())
    }
}

/// `dist^z`-seeding followed by best-improvement single-swap local search.
/// Returns exactly `min(k, m)` centers.
pub fn baseline_solve(instance: &Instance, params: &BaselineParams, seed: u64) -> Result<Solution> {
    params.validate()?;
    let m = instance.m();
    let k = instance.k().min(m);
    if k == m {
        return Ok(Solution::new((0..m).collect()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..params.seeding_rounds {
        let start = seed_centers(instance, k, &mut rng);
        let (c, centers) = local_search(instance, start, params);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, centers));
        }
    }
    let (_, centers) = best.expect("at least one round");
    Ok(Solution::new(centers))
}

fn nearest_unchosen(instance: &Instance, x: &[f64], chosen: &[bool]) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, c) in instance.candidates().iter().enumerate() {
        if chosen[j] {
            continue;
        }
        let d = dist(x, c.coords());
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

fn seed_centers(instance: &Instance, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let z = instance.objective();
    let clients = instance.clients();
    let mut chosen = vec![false; instance.m()];
    let mut centers = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; clients.len()];
    let first = rng.random_range(0..clients.len());
    let mut next = nearest_unchosen(instance, clients[first].coords(), &chosen);
    loop {
        chosen[next] = true;
        centers.push(next);
        if centers.len() == k {
            return centers;
        }
        let c = instance.candidates()[next].coords();
        for (p, d) in clients.iter().zip(nearest.iter_mut()) {
            *d = d.min(dist(p.coords(), c));
        }
        let weights: Vec<f64> = nearest.iter().map(|&d| z.pow(d)).collect();
        let total: f64 = weights.iter().sum();
        next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = clients.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            nearest_unchosen(instance, clients[pick].coords(), &chosen)
        } else {
            chosen.iter().position(|&c| !c).expect("k < m")
        };
    }
}

/// Single-swap local search. Each iteration evaluates every swap in
/// `O(n (m - k))` using nearest and second-nearest distances.
fn local_search(instance: &Instance, mut centers: Vec<usize>, params: &BaselineParams) -> (f64, Vec<usize>) {
    let z = instance.objective();
    let clients = instance.clients();
    let cands = instance.candidates();
    let k = centers.len();
    let cap = params.iterations_per_center * k;
    let mut open = vec![false; instance.m()];
    for &c in &centers {
        open[c] = true;
    }
    let mut current = total_cost(instance, &centers);
    for _ in 0..cap {
        let mut d1 = vec![f64::INFINITY; clients.len()];
        let mut d2 = vec![f64::INFINITY; clients.len()];
        let mut a1 = vec![0usize; clients.len()];
        for (i, p) in clients.iter().enumerate() {
            for (slot, &c) in centers.iter().enumerate() {
                let d = dist(p.coords(), cands[c].coords());
                if d < d1[i] {
                    d2[i] = d1[i];
                    d1[i] = d;
                    a1[i] = slot;
                } else if d < d2[i] {
                    d2[i] = d;
                }
            }
        }
        let mut best = (0.0f64, usize::MAX, usize::MAX);
        let mut correction = vec![0.0f64; k];
        for (c, cand) in cands.iter().enumerate() {
            if open[c] {
                continue;
            }
            correction.iter_mut().for_each(|x| *x = 0.0);
            let mut gain = 0.0;
            for (i, p) in clients.iter().enumerate() {
                let dc = dist(p.coords(), cand.coords());
                let base = z.pow(d1[i]);
                let keep = z.pow(dc.min(d1[i])) - base;
                gain += keep;
                let lose = z.pow(dc.min(d2[i])) - base;
                correction[a1[i]] += lose - keep;
            }
            for (slot, corr) in correction.iter().enumerate() {
                let delta = gain + corr;
                if delta < best.0 {
                    best = (delta, c, slot);
                }
            }
        }
        if best.1 == usize::MAX || -best.0 <= params.improvement_threshold * current {
            break;
        }
        let (_, c, slot) = best;
        open[centers[slot]] = false;
        open[c] = true;
        centers[slot] = c;
        let next = total_cost(instance, &centers);
        if next >= current {
            break;
        }
        current = next;
    }
    centers.sort_unstable();
    (current, centers)
}

fn total_cost(instance: &Instance, centers: &[usize]) -> f64 {
    let z = instance.objective();
    compensated_sum(
        instance
            .clients()
            .iter()
            .map(|p| z.pow(instance.nearest(p.coords(), centers).1)),
    )
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Default limit on enumerated subsets.
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// Exact optimum by enumerating all `k`-subsets, ties to the lexicographically
/// smallest index set.
pub fn brute_force_opt(instance: &Instance) -> Result<(Solution, f64)> {
    brute_force_opt_with(instance, DEFAULT_SUBSET_CAP, Execution::default())
}

pub fn brute_force_opt_with(instance: &Instance, cap: u128, exec: Execution) -> Result<(Solution, f64)> {
    let (m, k) = (instance.m(), instance.k());
    let size = binomial(m, k);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let z = instance.objective();
    // Distances raised to z, one row per candidate.
    let table: Vec<Vec<f64>> = instance
        .candidates()
        .iter()
        .map(|c| instance.clients().iter().map(|p| z.pow(p.dist(c))).collect())
        .collect();
    let eval = |combo: &[usize]| -> f64 {
        let mut sum = CompensatedSum::new();
        #[allow(clippy::needless_range_loop)]
        for i in 0..instance.n() {
            sum.add(combo.iter().map(|&c| table[c][i]).fold(f64::INFINITY, f64::min));
        }
        sum.value()
    };
    let blocks = map_range(exec, m - k + 1, |first| {
        let mut combo: Vec<usize> = (first..first + k).collect();
        let mut best = (eval(&combo), combo.clone());
        while next_combination_tail(&mut combo, m) {
            let c = eval(&combo);
            if c < best.0 {
                best = (c, combo.clone());
            }
        }
        best
    });
    let (best_cost, best) = blocks
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("m >= k");
    Ok((Solution::new(best), best_cost))
}

/// Advances `combo[1..]` to the next combination with `combo[0]` fixed.
fn next_combination_tail(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 1 {
        i -= 1;
        if combo[i] < m - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Cost of a solution on an instance, for callers that already hold indices.
pub fn cost_of(instance: &Instance, centers: &[usize]) -> Result<f64> {
    cost(instance, &Solution::new(centers.to_vec()))
}

/// Largest client count the exhaustive portal oracle accepts.
pub const ORACLE_MAX_CLIENTS: usize = 10;

/// Best `k`-subset under the portal-respecting tilde-cost, by enumeration.
///
/// `tree` must be built on the relocated clients followed by the candidates.
/// Every client is routed to its best center along the cheapest
/// portal-respecting path of the binary split tree.
pub fn exhaustive_portal_opt(
    instance: &Instance,
    tree: &ShiftedQuadtree,
    relocation: &Relocation,
    k: usize,
) -> Result<(Solution, f64)> {
    let (n, m) = (instance.n(), instance.m());
    if n > ORACLE_MAX_CLIENTS {
        return Err(Error::CapExceeded {
            size: n as u128,
            cap: ORACLE_MAX_CLIENTS as u128,
        });
    }
    if k == 0 || k > m {
        return Err(Error::param(format!("k must lie in 1..={m}")));
    }
    let size = binomial(m, k);
    if size > DEFAULT_SUBSET_CAP {
        return Err(Error::CapExceeded { size, cap: DEFAULT_SUBSET_CAP });
    }
    if tree.points().len() != n + m {
        return Err(Error::InvalidInstance("tree is not built on clients and candidates".into()));
    }
    let bt = binarize(tree);
    let z = instance.objective();
    let offsets = relocation.offsets(instance);
    let targets = relocation.targets();
    let pr: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            (0..m)
                .map(|j| {
                    bt.portal_distance(
                        targets[p].coords(),
                        bt.leaf_of(p),
                        instance.candidates()[j].coords(),
                        bt.leaf_of(n + j),
                    )
                })
                .collect()
        })
        .collect();
    let eval = |combo: &[usize]| {
        let mut sum = CompensatedSum::new();
        for p in 0..n {
            let d = combo.iter().map(|&j| pr[p][j]).fold(f64::INFINITY, f64::min);
            sum.add(z.pow(offsets[p] + d));
        }
        sum.value()
    };
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = (eval(&combo), combo.clone());
    while next_combination(&mut combo, m) {
        let c = eval(&combo);
        if c < best.0 {
            best = (c, combo.clone());
        }
    }
    Ok((Solution::new(best.1), best.0))
}

fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < m - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
