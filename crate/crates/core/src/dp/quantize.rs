//! Distance quantization and the cost-bucket ladder.

use crate::error::{Error, Result};

/// `round(value / step)` with ties rounded up, clamped to
/// `[0, ceil(cap / step)]`.
pub fn quantize(value: f64, step: f64, cap: f64) -> u32 {
    debug_assert!(step > 0.0);
    let top = (cap / step).ceil();
    // Slack so decimal ties such as 0.35 / 0.1 still round up.
    let r = value / step;
    let q = (r + 0.5 + 4.0 * f64::EPSILON * r.abs().max(1.0)).floor();
    q.clamp(0.0, top) as u32
}

/// Index encoding of a distance on a node: multiples of `step` up to `cap`,
/// then geometric `(1 + eps)` buckets. `u32::MAX` encodes infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Scale {
    step: f64,
    cap: f64,
    top: u32,
    log_growth: f64,
}

impl Scale {
    /// Scale for a node of diameter `diam`: step `eps * diam`, linear range up
    /// to `diam / eps + 1`.
    pub(crate) fn for_node(diam: f64, eps: f64) -> Self {
        let step = eps * diam;
        let cap = diam / eps + 1.0;
        Scale {
            step,
            cap,
            top: (cap / step).ceil() as u32,
            log_growth: (1.0 + eps).ln(),
        }
    }

    pub(crate) fn up(&self, v: f64) -> u32 {
        if !v.is_finite() {
            return u32::MAX;
        }
        if v <= self.cap {
            return (v / self.step).ceil().min(self.top as f64) as u32;
        }
        let extra = ((v / self.cap).ln() / self.log_growth).ceil();
        (self.top as f64 + extra.max(1.0)).min((u32::MAX - 1) as f64) as u32
    }

    pub(crate) fn down(&self, v: f64) -> u32 {
        if !v.is_finite() {
            return u32::MAX;
        }
        if v <= self.cap {
            return (v / self.step).floor() as u32;
        }
        let extra = ((v / self.cap).ln() / self.log_growth).floor();
        if extra < 1.0 {
            return (self.cap / self.step).floor() as u32;
        }
        (self.top as f64 + extra).min((u32::MAX - 1) as f64) as u32
    }

    pub(crate) fn value(&self, q: u32) -> f64 {
        if q == u32::MAX {
            f64::INFINITY
        } else if q <= self.top {
            q as f64 * self.step
        } else {
            self.cap * ((q - self.top) as f64 * self.log_growth).exp()
        }
    }
}

/// Geometric ladder from `baseline_cost / n` to at least
/// `(1 + eps) * baseline_cost` with ratio `1 + eps / log2 n`.
pub fn cost_buckets(baseline_cost: f64, eps: f64, n: usize) -> Result<Vec<f64>> {
    if baseline_cost.is_nan() || baseline_cost <= 0.0 {
        return Err(Error::param("cost buckets need a positive baseline cost"));
    }
    if !(eps > 0.0 && eps < 1.0) || n == 0 {
        return Err(Error::param("cost buckets need eps in (0, 1) and n >= 1"));
    }
    let ratio = 1.0 + eps / (n.max(2) as f64).log2();
    let last = (1.0 + eps) * baseline_cost;
    let mut out = vec![baseline_cost / n as f64];
    while *out.last().unwrap() < last {
        let next = out.last().unwrap() * ratio;
        out.push(next);
    }
    Ok(out)
}

/// `ranges^(2 * portals) * 2 * buckets`, the size of a dense table over all
/// configurations of one node, saturating.
pub fn table_size_bound(ranges: u64, portals: usize, buckets: usize) -> u128 {
    let mut acc: u128 = 2 * buckets as u128;
    for _ in 0..2 * portals {
        acc = acc.saturating_mul(ranges as u128);
    }
    acc
}
