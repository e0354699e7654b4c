//! Instances, solutions, objective evaluation and instance preparation.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{compensated_sum, dist, Point};

/// Which power of the distance is summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    /// `z = 1`.
    Median,
    /// `z = 2`.
    Means,
}

impl Objective {
    pub fn from_z(z: u32) -> Result<Self> {
        match z {
            1 => Ok(Objective::Median),
            2 => Ok(Objective::Means),
            _ => Err(Error::param(format!("objective exponent must be 1 or 2, got {z}"))),
        }
    }

    pub fn z(self) -> u32 {
        match self {
            Objective::Median => 1,
            Objective::Means => 2,
        }
    }

    /// `x^z`.
    #[inline]
    pub fn pow(self, x: f64) -> f64 {
        match self {
            Objective::Median => x,
            Objective::Means => x * x,
        }
    }
}

/// Clients, candidate centers, `k` and the objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    dim: usize,
    clients: Vec<Point>,
    candidates: Vec<Point>,
    k: usize,
    objective: Objective,
}

impl Instance {
    pub fn new(
        dim: usize,
        clients: Vec<Point>,
        candidates: Vec<Point>,
        k: usize,
        objective: Objective,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInstance("dimension must be positive".into()));
        }
        if clients.is_empty() || candidates.is_empty() {
            return Err(Error::InvalidInstance(
                "need at least one client and one candidate".into(),
            ));
        }
        if k == 0 || k > candidates.len() {
            return Err(Error::InvalidInstance(format!(
                "k must lie in 1..={}, got {k}",
                candidates.len()
            )));
        }
        for p in clients.iter().chain(&candidates) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::InvalidInstance("non-finite coordinate".into()));
            }
        }
        Ok(Instance {
            dim,
            clients,
            candidates,
            k,
            objective,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clients(&self) -> &[Point] {
        &self.clients
    }

    pub fn candidates(&self) -> &[Point] {
        &self.candidates
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn m(&self) -> usize {
        self.candidates.len()
    }

    /// Same points with a different `k`.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Instance::new(
            self.dim,
            self.clients.clone(),
            self.candidates.clone(),
            k,
            self.objective,
        )
    }

    /// Clients followed by candidates; candidate `j` sits at index `n + j`.
    pub fn all_points(&self) -> Vec<Point> {
        self.clients.iter().chain(&self.candidates).cloned().collect()
    }

    /// Index of the candidate in `centers` nearest to `x` (ties to the lowest
    /// candidate index) and its distance.
    pub fn nearest(&self, x: &[f64], centers: &[usize]) -> (usize, f64) {
        nearest_in(&self.candidates, x, centers)
    }
}

pub(crate) fn nearest_in(points: &[Point], x: &[f64], centers: &[usize]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for &c in centers {
        let d = dist(x, points[c].coords());
        if d < best.1 || (d == best.1 && c < best.0) {
            best = (c, d);
        }
    }
    best
}

/// A set of opened candidate indices, optionally with an assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    centers: Vec<usize>,
    assignment: Option<Vec<usize>>,
}

impl Solution {
    /// Centers are sorted and deduplicated.
    pub fn new(mut centers: Vec<usize>) -> Self {
        centers.sort_unstable();
        centers.dedup();
        Solution {
            centers,
            assignment: None,
        }
    }

    pub fn with_assignment(instance: &Instance, centers: Vec<usize>) -> Result<Self> {
        let mut s = Solution::new(centers);
        s.validate(instance)?;
        if s.centers.is_empty() {
            return Err(Error::EmptySolution);
        }
        let assignment = instance
            .clients()
            .iter()
            .map(|p| instance.nearest(p.coords(), &s.centers).0)
            .collect();
        s.assignment = Some(assignment);
        Ok(s)
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn assignment(&self) -> Option<&[usize]> {
        self.assignment.as_deref()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Checks index ranges, the size bound and the assignment.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.centers.len() > instance.k() {
            return Err(Error::InvalidInstance(format!(
                "{} centers exceed k = {}",
                self.centers.len(),
                instance.k()
            )));
        }
        if let Some(&c) = self.centers.iter().find(|&&c| c >= instance.m()) {
            return Err(Error::InvalidInstance(format!("center index {c} out of range")));
        }
        if let Some(a) = &self.assignment {
            if a.len() != instance.n() || a.iter().any(|c| self.centers.binary_search(c).is_err()) {
                return Err(Error::InvalidInstance("assignment uses an unopened center".into()));
            }
        }
        Ok(())
    }

    pub fn points(&self, instance: &Instance) -> Vec<Point> {
        self.centers
            .iter()
            .map(|&c| instance.candidates()[c].clone())
            .collect()
    }
}

/// `Σ_p dist(p, S)^z`, recomputed with the nearest-center rule.
pub fn cost(instance: &Instance, solution: &Solution) -> Result<f64> {
    if solution.is_empty() {
        return Err(Error::EmptySolution);
    }
    let z = instance.objective();
    Ok(compensated_sum(instance.clients().iter().map(|p| {
        z.pow(instance.nearest(p.coords(), solution.centers()).1)
    })))
}

/// Where every client is moved before the dynamic program runs: either the
/// client itself or its nearest baseline center.
#[derive(Clone, Debug, PartialEq)]
pub struct Relocation {
    targets: Vec<Point>,
    moved_to: Vec<Option<usize>>,
}

impl Relocation {
    pub fn identity(instance: &Instance) -> Self {
        Relocation {
            targets: instance.clients().to_vec(),
            moved_to: vec![None; instance.n()],
        }
    }

    /// Moves every flagged client onto its nearest center of `baseline`.
    pub fn from_flags(instance: &Instance, baseline: &Solution, flags: &[bool]) -> Self {
        let mut targets = Vec::with_capacity(instance.n());
        let mut moved_to = Vec::with_capacity(instance.n());
        for (p, &flag) in instance.clients().iter().zip(flags) {
            if flag {
                let (c, _) = instance.nearest(p.coords(), baseline.centers());
                targets.push(instance.candidates()[c].clone());
                moved_to.push(Some(c));
            } else {
                targets.push(p.clone());
                moved_to.push(None);
            }
        }
        Relocation { targets, moved_to }
    }

    pub fn targets(&self) -> &[Point] {
        &self.targets
    }

    /// The candidate a client was moved onto, if any.
    pub fn moved_to(&self) -> &[Option<usize>] {
        &self.moved_to
    }

    pub fn moved_count(&self) -> usize {
        self.moved_to.iter().filter(|m| m.is_some()).count()
    }

    /// `dist(p, p̃)` per client.
    pub fn offsets(&self, instance: &Instance) -> Vec<f64> {
        instance
            .clients()
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| p.dist(t))
            .collect()
    }
}

/// `Σ_p (dist(p, p̃) + dist(p̃, S))^z`.
pub fn tilde_cost(instance: &Instance, relocation: &Relocation, solution: &Solution) -> Result<f64> {
    if solution.is_empty() {
        return Err(Error::EmptySolution);
    }
    if relocation.targets.len() != instance.n() {
        return Err(Error::InvalidInstance("relocation does not cover all clients".into()));
    }
    let z = instance.objective();
    Ok(compensated_sum(instance.clients().iter().zip(&relocation.targets).map(
        |(p, t)| {
            let to_center = instance.nearest(t.coords(), solution.centers()).1;
            z.pow(p.dist(t) + to_center)
        },
    )))
}

/// A rescaled instance.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub instance: Instance,
    /// Coordinates were multiplied by this; costs scale by `scale^z`.
    pub scale: f64,
    /// Minimum distance between distinct points before scaling.
    pub min_distance: f64,
    /// Bounding-box diagonal of the scaled points, an upper bound on their
    /// diameter within a factor `sqrt(d)`.
    pub diameter_bound: f64,
}

/// Scales clients and candidates jointly so the closest pair of distinct points
/// is at distance 1.
pub fn normalize(instance: &Instance) -> Result<Normalized> {
    let points = instance.all_points();
    let min_distance = closest_pair_distance(&points).ok_or_else(|| {
        Error::Degenerate("all clients and candidates coincide".into())
    })?;
    let scale = 1.0 / min_distance;
    let scaled = if scale == 1.0 {
        instance.clone()
    } else {
        Instance::new(
            instance.dim(),
            instance.clients().iter().map(|p| p.scaled(scale)).collect(),
            instance.candidates().iter().map(|p| p.scaled(scale)).collect(),
            instance.k(),
            instance.objective(),
        )?
    };
    let diameter_bound = bounding_diagonal(&scaled.all_points());
    Ok(Normalized {
        instance: scaled,
        scale,
        min_distance,
        diameter_bound,
    })
}

/// Smallest positive pairwise distance, or `None` when all points coincide.
pub fn closest_pair_distance(points: &[Point]) -> Option<f64> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut best = f64::INFINITY;
    for (i, &a) in order.iter().enumerate() {
        let pa = points[a].coords();
        for &b in &order[i + 1..] {
            let pb = points[b].coords();
            if pb[0] - pa[0] >= best {
                break;
            }
            let d = dist(pa, pb);
            if d > 0.0 && d < best {
                best = d;
            }
        }
    }
    best.is_finite().then_some(best)
}

pub(crate) fn bounding_box(points: &[Point]) -> (Vec<f64>, Vec<f64>) {
    let dim = points.first().map_or(0, Point::dim);
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

fn bounding_diagonal(points: &[Point]) -> f64 {
    let (lo, hi) = bounding_box(points);
    dist(&lo, &hi)
}

/// Candidate centers for the continuous problem.
///
/// For each client `p` and each scale `2^j`, `j = 0..=ceil(log2 diam)`, emits
/// `p` and the points of the global lattice of spacing `eps * 2^j / sqrt(d)`
/// that fall inside `B(p, 2^j)`. Duplicates (after quantizing coordinates to
/// `1e-9`) are dropped, keeping first occurrences.
pub fn generate_candidates(clients: &[Point], eps: f64) -> Result<Vec<Point>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    let Some(first) = clients.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim();
    let diam = bounding_diagonal(clients);
    let top = if diam > 1.0 { diam.log2().ceil() as i32 } else { 0 };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |coords: Vec<f64>, out: &mut Vec<Point>| {
        let key: Vec<i64> = coords.iter().map(|c| (c * 1e9).round() as i64).collect();
        if seen.insert(key) {
            out.push(Point::new(coords));
        }
    };
    for p in clients {
        push(p.coords().to_vec(), &mut out);
    }
    for p in clients {
        for j in 0..=top {
            let radius = f64::powi(2.0, j);
            let step = eps * radius / (dim as f64).sqrt();
            let lo: Vec<i64> = p.coords().iter().map(|c| ((c - radius) / step).ceil() as i64).collect();
            let hi: Vec<i64> = p.coords().iter().map(|c| ((c + radius) / step).floor() as i64).collect();
            let mut idx = lo.clone();
            'lattice: loop {
                let coords: Vec<f64> = idx.iter().map(|&t| t as f64 * step).collect();
                if dist(&coords, p.coords()) <= radius {
                    push(coords, &mut out);
                }
                for a in 0..dim {
                    if idx[a] < hi[a] {
                        idx[a] += 1;
                        continue 'lattice;
                    }
                    idx[a] = lo[a];
                }
                break;
            }
        }
    }
    Ok(out)
}

/// Upper bound on the lattice points emitted per client and scale.
pub fn candidates_per_scale_bound(dim: usize, eps: f64) -> usize {
    let per_axis = 2 * ((dim as f64).sqrt() / eps).ceil() as usize + 1;
    per_axis.pow(dim as u32)
}
