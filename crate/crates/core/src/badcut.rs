//! Badly cut balls, client relocation and per-client budgets.

use crate::error::{Error, Result};
use crate::model::{Instance, Objective, Relocation, Solution};
use crate::quadtree::{CutLevel, ShiftedGrid, ShiftedQuadtree};

/// `log2(d) + log2(1/eps)`.
pub fn tau(eps: f64, dim: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    if dim == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    Ok((dim as f64).log2() + (1.0 / eps).log2())
}

/// Accuracy, dimension and the derived level slack and portal spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutParams {
    pub eps: f64,
    pub dim: usize,
    pub tau: f64,
    pub rho: f64,
}

impl CutParams {
    /// `rho = eps / log2(1/eps)`, clamped to at most `1/2`.
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        let tau = tau(eps, dim)?;
        let rho = (eps / (1.0 / eps).log2()).min(0.5);
        Ok(CutParams { eps, dim, tau, rho })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::param(format!("rho must lie in (0, 1), got {rho}")));
        }
        self.rho = rho;
        Ok(self)
    }

    /// Level at or above which `B(x, 3r)` counts as badly cut.
    pub fn threshold(&self, r: f64) -> f64 {
        (3.0 * r).log2() + self.tau
    }
}

/// Anything that can report the level at which a ball is cut.
pub trait CutOracle {
    fn cut_level_ball(&self, x: &[f64], r: f64) -> CutLevel;
}

impl CutOracle for ShiftedGrid {
    fn cut_level_ball(&self, x: &[f64], r: f64) -> CutLevel {
        ShiftedGrid::cut_level_ball(self, x, r)
    }
}

impl CutOracle for ShiftedQuadtree {
    fn cut_level_ball(&self, x: &[f64], r: f64) -> CutLevel {
        self.grid().cut_level_ball(x, r)
    }
}

/// Whether `B(x, 3r)` is cut at a level `>= log2(3r) + tau`.
pub fn classify_badly_cut<O: CutOracle + ?Sized>(oracle: &O, x: &[f64], r: f64, params: &CutParams) -> bool {
    if r <= 0.0 {
        return false;
    }
    match oracle.cut_level_ball(x, 3.0 * r) {
        Some(level) => level as f64 >= params.threshold(r),
        None => false,
    }
}

/// Detour of a ball cut at `level`: `eps 2^l r + eps^2 4^l` for means,
/// `eps 2^l` for median.
pub fn detour_at_level(level: CutLevel, r: f64, eps: f64, z: Objective) -> f64 {
    let Some(l) = level else { return 0.0 };
    let scale = eps * f64::powi(2.0, l);
    match z {
        Objective::Means => scale * r + scale * scale,
        Objective::Median => scale,
    }
}

/// Detour of the ball `B(x, r)`.
pub fn detour<O: CutOracle + ?Sized>(oracle: &O, x: &[f64], r: f64, params: &CutParams, z: Objective) -> f64 {
    detour_at_level(oracle.cut_level_ball(x, r), r, params.eps, z)
}

/// Flags for clients (w.r.t. the baseline) and for baseline centers (w.r.t. a
/// reference solution).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadCutReport {
    pub point_flags: Vec<bool>,
    /// Parallel to `baseline.centers()`; empty without a reference.
    pub center_flags: Vec<bool>,
}

impl BadCutReport {
    pub fn flagged_points(&self) -> usize {
        self.point_flags.iter().filter(|&&f| f).count()
    }
}

pub fn point_flags<O: CutOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    baseline: &Solution,
    params: &CutParams,
) -> Vec<bool> {
    instance
        .clients()
        .iter()
        .map(|p| {
            let (_, a) = instance.nearest(p.coords(), baseline.centers());
            classify_badly_cut(oracle, p.coords(), a, params)
        })
        .collect()
}

pub fn bad_cut_report<O: CutOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    baseline: &Solution,
    reference: Option<&Solution>,
    params: &CutParams,
) -> BadCutReport {
    let center_flags = match reference {
        Some(s) => baseline
            .centers()
            .iter()
            .map(|&l| {
                let x = instance.candidates()[l].coords();
                let (_, r) = instance.nearest(x, s.centers());
                classify_badly_cut(oracle, x, r, params)
            })
            .collect(),
        None => Vec::new(),
    };
    BadCutReport {
        point_flags: point_flags(oracle, instance, baseline, params),
        center_flags,
    }
}

/// Moves every flagged client onto its nearest baseline center.
pub fn relocate(instance: &Instance, baseline: &Solution, report: &BadCutReport) -> Relocation {
    Relocation::from_flags(instance, baseline, &report.point_flags)
}

/// Per-client budget terms.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetBreakdown {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub b3: Vec<f64>,
    pub total: Vec<f64>,
    pub objective: Objective,
}

impl BudgetBreakdown {
    pub fn sum(&self) -> f64 {
        crate::geometry::compensated_sum(self.total.iter().copied())
    }
}

/// Budgets of all clients w.r.t. `baseline` and `reference`.
///
/// Each term takes its detour branch exactly when the corresponding ball is
/// not badly cut; a level equal to the threshold selects the other branch.
pub fn budget<O: CutOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    baseline: &Solution,
    reference: &Solution,
    params: &CutParams,
) -> Result<BudgetBreakdown> {
    if baseline.is_empty() || reference.is_empty() {
        return Err(Error::EmptySolution);
    }
    let z = instance.objective();
    let d = instance.dim() as f64;
    let n = instance.n();
    let mut out = BudgetBreakdown {
        b1: Vec::with_capacity(n),
        b2: Vec::with_capacity(n),
        b3: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
        objective: z,
    };
    for p in instance.clients() {
        let x = p.coords();
        let (ap_center, a) = instance.nearest(x, baseline.centers());
        let (_, s) = instance.nearest(x, reference.centers());
        let center = instance.candidates()[ap_center].coords();
        let (_, s_center) = instance.nearest(center, reference.centers());

        let b1 = if classify_badly_cut(oracle, x, a, params) {
            0.0
        } else {
            detour(oracle, x, 3.0 * a, params, z)
        };
        let b2 = if classify_badly_cut(oracle, x, a + s, params) {
            match z {
                Objective::Means => 36.0 * d * a * a + 16.0 * d * s * s,
                Objective::Median => 3.0 * a + 2.0 * s,
            }
        } else {
            detour(oracle, x, 3.0 * (a + s), params, z)
        };
        let b3 = if classify_badly_cut(oracle, center, s_center, params) {
            0.0
        } else {
            detour(oracle, center, 3.0 * s_center, params, z)
        };
        out.b1.push(b1);
        out.b2.push(b2);
        out.b3.push(b3);
        out.total.push(b1 + b2 + b3);
    }
    Ok(out)
}
