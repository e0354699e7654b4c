//! Text formats and the random instance generator.
//!
//! Instance files are line oriented. Lines starting with `#` and blank lines
//! are skipped. The first data line is `d n m k z`, followed by `n` client
//! lines and `m` candidate lines of `d` coordinates each.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{Instance, Objective, Solution};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

/// Data lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = data_lines(text);
    let Some((hl, header)) = lines.next() else {
        return Err(parse_err(1, "missing header"));
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 {
        return Err(parse_err(hl, "header must be `d n m k z`"));
    }
    let d: usize = field(toks[0], hl, "dimension")?;
    let n: usize = field(toks[1], hl, "client count")?;
    let m: usize = field(toks[2], hl, "candidate count")?;
    let k: usize = field(toks[3], hl, "k")?;
    let z = Objective::from_z(field(toks[4], hl, "z")?).map_err(|e| parse_err(hl, e.to_string()))?;
    let mut last = hl;
    let mut read = |count: usize, section: &str| -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let Some((ln, l)) = lines.next() else {
                return Err(parse_err(last + 1, format!("expected {count} {section} lines, got {}", out.len())));
            };
            last = ln;
            let coords: Vec<f64> = l
                .split_whitespace()
                .map(|t| field::<f64>(t, ln, "coordinate"))
                .collect::<Result<_>>()?;
            if coords.len() != d {
                return Err(parse_err(ln, format!("expected {d} coordinates, got {}", coords.len())));
            }
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(parse_err(ln, "non-finite coordinate"));
            }
            out.push(Point::new(coords));
        }
        Ok(out)
    };
    let clients = read(n, "client")?;
    let candidates = read(m, "candidate")?;
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after candidates"));
    }
    Instance::new(d, clients, candidates, k, z).map_err(|e| parse_err(hl, e.to_string()))
}

/// Renders with 17 significant digits, which round-trips every `f64`.
pub fn render_instance(instance: &Instance) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {} {} {}",
        instance.dim(),
        instance.n(),
        instance.m(),
        instance.k(),
        instance.objective().z()
    );
    for p in instance.clients().iter().chain(instance.candidates()) {
        let row: Vec<String> = p.coords().iter().map(|c| format!("{c:.16e}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Nine significant digits; plain decimal where that stays short.
pub fn format_cost(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&mag) {
        return format!("{x:.8e}");
    }
    let s = format!("{:.*}", (8 - mag).max(0) as usize, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `cost` line, `centers` line, then one `assign` line if an assignment is set.
pub fn render_solution(cost: f64, solution: &Solution) -> String {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut s = format!("cost {}\ncenters {}\n", format_cost(cost), join(solution.centers()));
    if let Some(a) = solution.assignment() {
        let _ = writeln!(s, "assign {}", join(a));
    }
    s
}

pub fn parse_solution(text: &str) -> Result<(f64, Solution)> {
    let mut cost = None;
    let mut centers = None;
    for (ln, l) in data_lines(text) {
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("cost") => {
                let t = toks.next().ok_or_else(|| parse_err(ln, "missing cost"))?;
                cost = Some(field::<f64>(t, ln, "cost")?);
            }
            Some("centers") => {
                let c: Vec<usize> = toks.map(|t| field(t, ln, "center index")).collect::<Result<_>>()?;
                if c.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(parse_err(ln, "centers must be strictly ascending"));
                }
                centers = Some(c);
            }
            Some("assign") => {}
            Some(other) => return Err(parse_err(ln, format!("unknown record {other:?}"))),
            None => {}
        }
    }
    match (cost, centers) {
        (Some(c), Some(s)) => Ok((c, Solution::new(s))),
        _ => Err(parse_err(0, "solution needs `cost` and `centers` lines")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointDistribution {
    Uniform,
    /// `k` hidden centers uniform in the box; points Gaussian around them.
    Clustered,
}

impl FromStr for PointDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PointDistribution::Uniform),
            "clustered" => Ok(PointDistribution::Clustered),
            _ => Err(Error::param(format!("unknown distribution {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub dim: usize,
    pub objective: Objective,
    pub seed: u64,
    pub distribution: PointDistribution,
}

/// Side of the generator's bounding box.
pub const GEN_BOX: f64 = 100.0;

pub fn generate(p: &GenParams) -> Result<Instance> {
    if p.k == 0 || p.dim == 0 || p.n == 0 || p.m == 0 {
        return Err(Error::param("n, m, k and d must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let uniform = |rng: &mut ChaCha8Rng| Point::new((0..p.dim).map(|_| rng.random_range(0.0..GEN_BOX)).collect());
    let (clients, candidates) = match p.distribution {
        PointDistribution::Uniform => {
            let c = (0..p.n).map(|_| uniform(&mut rng)).collect();
            let f = (0..p.m).map(|_| uniform(&mut rng)).collect();
            (c, f)
        }
        PointDistribution::Clustered => {
            let hidden: Vec<Point> = (0..p.k).map(|_| uniform(&mut rng)).collect();
            let noise = Normal::new(0.0, GEN_BOX / 20.0).expect("positive deviation");
            let around = |rng: &mut ChaCha8Rng| {
                let h = &hidden[rng.random_range(0..hidden.len())];
                Point::new(h.coords().iter().map(|c| c + noise.sample(rng)).collect())
            };
            let c = (0..p.n).map(|_| around(&mut rng)).collect();
            let f = (0..p.m).map(|_| around(&mut rng)).collect();
            (c, f)
        }
    };
    Instance::new(p.dim, clients, candidates, p.k, p.objective)
}
