//! Randomly shifted hierarchical grid with nested portals.
//!
//! A level-`i` cell is a cube of side `2^{i+1}/sqrt(d)`, so its diameter is
//! exactly `2^{i+1}`. All levels share one origin, which keeps the dyadic
//! nesting intact under the random shift.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};
use crate::model::{bounding_box, closest_pair_distance};

/// Level at which something is cut; `None` stands for minus infinity.
pub type CutLevel = Option<i32>;

/// The shifted grid hierarchy without any points attached.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedGrid {
    dim: usize,
    origin: Vec<f64>,
    root_level: i32,
    base_level: i32,
}

impl ShiftedGrid {
    /// Grid with an explicit origin. Cells at level `j` are
    /// `origin + side(j) * [t, t + 1)` per axis.
    pub fn new(origin: Vec<f64>, root_level: i32, base_level: i32) -> Result<Self> {
        if origin.is_empty() || base_level > root_level {
            return Err(Error::param("grid needs a dimension and base_level <= root_level"));
        }
        if root_level - base_level > 60 {
            return Err(Error::param("too many grid levels"));
        }
        Ok(ShiftedGrid {
            dim: origin.len(),
            origin,
            root_level,
            base_level,
        })
    }

    /// Random grid whose level-`root` cell with index zero holds all `points`.
    pub fn random<R: Rng + ?Sized>(points: &[Point], rng: &mut R) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInstance("no points to decompose".into()));
        };
        let dim = first.dim();
        let (lo, hi) = bounding_box(points);
        let diam = dist(&lo, &hi);
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let mut root = if diam > 0.0 { diam.log2().ceil() as i32 + 1 } else { 1 };
        while side_at(dim, root - 1) <= extent {
            root += 1;
        }
        let base = base_level_for(points).min(root);
        let period = side_at(dim, root - 1);
        let origin = lo
            .iter()
            .map(|&l| l - rng.random_range(0.0..period))
            .collect();
        ShiftedGrid::new(origin, root, base)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn root_level(&self) -> i32 {
        self.root_level
    }

    /// Lowest level that is ever materialized.
    pub fn base_level(&self) -> i32 {
        self.base_level
    }

    pub fn side(&self, level: i32) -> f64 {
        side_at(self.dim, level)
    }

    fn base_key(&self, x: &[f64]) -> Vec<i64> {
        let s = self.side(self.base_level);
        x.iter()
            .zip(&self.origin)
            .map(|(c, o)| ((c - o) / s).floor() as i64)
            .collect()
    }

    /// Integer index of the level-`level` cell containing `x`.
    pub fn cell_index(&self, x: &[f64], level: i32) -> Vec<i64> {
        let shift = (level.max(self.base_level) - self.base_level) as u32;
        self.base_key(x).into_iter().map(|k| k >> shift).collect()
    }

    pub fn cell_min(&self, key: &[i64], level: i32) -> Vec<f64> {
        let s = self.side(level);
        key.iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + k as f64 * s)
            .collect()
    }

    /// Smallest level whose cell contains both points, capped at the root.
    pub fn common_level(&self, p: &[f64], q: &[f64]) -> i32 {
        let (a, b) = (self.base_key(p), self.base_key(q));
        let mut level = self.base_level;
        for (x, y) in a.into_iter().zip(b) {
            let diff = (x ^ y) as u64;
            if diff != 0 {
                let bits = 64 - diff.leading_zeros() as i32;
                level = level.max(self.base_level + bits);
            }
        }
        level.min(self.root_level)
    }

    /// Highest level whose grid hyperplanes pass strictly through `B(x, r)`.
    ///
    /// A ball that only touches a hyperplane is not cut. Levels below the base
    /// level are not examined.
    pub fn cut_level_ball(&self, x: &[f64], r: f64) -> CutLevel {
        if r <= 0.0 {
            return None;
        }
        (self.base_level..=self.root_level).rev().find(|&j| {
            let s = self.side(j);
            x.iter().zip(&self.origin).any(|(c, o)| {
                let lo = (c - r - o) / s;
                let hi = (c + r - o) / s;
                lo.floor() + 1.0 < hi
            })
        })
    }
}

fn side_at(dim: usize, level: i32) -> f64 {
    f64::powi(2.0, level + 1) / (dim as f64).sqrt()
}

/// A level where every cell has diameter below a quarter of the closest pair.
fn base_level_for(points: &[Point]) -> i32 {
    match closest_pair_distance(points) {
        Some(d) => (d.log2().floor() as i32 - 2).min(-2),
        None => -2,
    }
}

/// Number of intervals each cell edge is divided into by the portal lattice.
pub fn subdivisions(dim: usize, rho: f64) -> usize {
    let d = dim as f64;
    let n = ((d - 1.0).sqrt() / (d.sqrt() * rho) - 1e-12).ceil();
    (n as usize).max(1)
}

/// Upper bound `2d(ceil(1/rho) + 1)^{d-1}` on portals per cell.
pub fn portal_count_bound(dim: usize, rho: f64) -> usize {
    2 * dim * ((1.0 / rho - 1e-12).ceil() as usize + 1).pow(dim as u32 - 1)
}

/// Boundary points of the box `[lo, hi]` on the lattice `anchor + step * Z^d`,
/// together with the points where that lattice meets the box faces.
pub(crate) fn box_portals(lo: &[f64], hi: &[f64], anchor: &[f64], step: f64) -> Vec<Vec<f64>> {
    let tol = 1e-9 * step;
    let axes: Vec<Vec<f64>> = (0..lo.len())
        .map(|a| {
            let mut vals = vec![lo[a], hi[a]];
            let first = ((lo[a] - anchor[a]) / step - 1e-9).ceil() as i64;
            let last = ((hi[a] - anchor[a]) / step + 1e-9).floor() as i64;
            for t in first..=last {
                let v = anchor[a] + t as f64 * step;
                if v - lo[a] > tol && hi[a] - v > tol {
                    vals.push(v);
                }
            }
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; lo.len()];
    'product: loop {
        let p: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| axes[a][i]).collect();
        if p.iter().enumerate().any(|(a, &c)| c == lo[a] || c == hi[a]) {
            out.push(p);
        }
        for a in 0..idx.len() {
            if idx[a] + 1 < axes[a].len() {
                idx[a] += 1;
                continue 'product;
            }
            idx[a] = 0;
        }
        break;
    }
    out
}

/// One materialized cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub level: i32,
    pub key: Vec<i64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    start: usize,
    end: usize,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// A shifted quadtree over a point set, materialized down to its leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedQuadtree {
    grid: ShiftedGrid,
    rho: f64,
    subdivisions: usize,
    points: Vec<Point>,
    cells: Vec<Cell>,
    order: Vec<usize>,
    leaf_of: Vec<usize>,
}

impl ShiftedQuadtree {
    /// Builds a tree with a shift drawn from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn build(points: &[Point], rho: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with_rng(points, rho, &mut rng)
    }

    pub fn build_with_rng<R: Rng + ?Sized>(points: &[Point], rho: f64, rng: &mut R) -> Result<Self> {
        check_rho(rho)?;
        let grid = ShiftedGrid::random(points, rng)?;
        Self::build_with_grid(points, rho, grid)
    }

    /// Builds the tree on a caller-supplied grid; the grid's root cell must
    /// contain every point.
    pub fn build_with_grid(points: &[Point], rho: f64, grid: ShiftedGrid) -> Result<Self> {
        check_rho(rho)?;
        if points.is_empty() {
            return Err(Error::InvalidInstance("no points to decompose".into()));
        }
        if points.iter().any(|p| p.dim() != grid.dim()) {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: points.iter().map(Point::dim).find(|&d| d != grid.dim()).unwrap_or(0),
            });
        }
        let keys: Vec<Vec<i64>> = points.iter().map(|p| grid.base_key(p.coords())).collect();
        let root_key = grid.cell_index(points[0].coords(), grid.root_level);
        if points
            .iter()
            .any(|p| grid.cell_index(p.coords(), grid.root_level) != root_key)
        {
            return Err(Error::InvalidInstance("points span more than one root cell".into()));
        }
        let mut tree = ShiftedQuadtree {
            subdivisions: subdivisions(grid.dim(), rho),
            grid,
            rho,
            points: points.to_vec(),
            cells: Vec::new(),
            order: (0..points.len()).collect(),
            leaf_of: vec![usize::MAX; points.len()],
        };
        tree.cells.push(Cell {
            level: tree.grid.root_level,
            key: root_key,
            parent: None,
            children: Vec::new(),
            start: 0,
            end: points.len(),
        });
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let (level, start, end) = {
                let c = &tree.cells[id];
                (c.level, c.start, c.end)
            };
            let first = &tree.points[tree.order[start]];
            let single = tree.order[start..end]
                .iter()
                .all(|&i| tree.points[i] == *first);
            if single || level == tree.grid.base_level {
                for &i in &tree.order[start..end] {
                    tree.leaf_of[i] = id;
                }
                continue;
            }
            let shift = (level - 1 - tree.grid.base_level) as u32;
            let child_key = |i: usize| -> Vec<i64> { keys[i].iter().map(|k| k >> shift).collect() };
            tree.order[start..end].sort_by_key(|&i| child_key(i));
            let mut s = start;
            let mut children = Vec::new();
            while s < end {
                let key = child_key(tree.order[s]);
                let mut e = s + 1;
                while e < end && child_key(tree.order[e]) == key {
                    e += 1;
                }
                let child = tree.cells.len();
                tree.cells.push(Cell {
                    level: level - 1,
                    key,
                    parent: Some(id),
                    children: Vec::new(),
                    start: s,
                    end: e,
                });
                children.push(child);
                s = e;
            }
            for &c in children.iter().rev() {
                stack.push(c);
            }
            tree.cells[id].children = children;
        }
        Ok(tree)
    }

    pub fn grid(&self) -> &ShiftedGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn root_level(&self) -> i32 {
        self.grid.root_level
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn cell(&self, id: usize) -> Result<&Cell> {
        self.cells.get(id).ok_or(Error::UnknownCell(id))
    }

    /// Indices of the points inside a cell.
    pub fn cell_points(&self, id: usize) -> &[usize] {
        let c = &self.cells[id];
        &self.order[c.start..c.end]
    }

    pub fn leaf_of(&self, point: usize) -> usize {
        self.leaf_of[point]
    }

    pub fn side(&self, level: i32) -> f64 {
        self.grid.side(level)
    }

    /// Lower corner and upper corner of a cell.
    pub fn cell_box(&self, id: usize) -> (Vec<f64>, Vec<f64>) {
        let c = &self.cells[id];
        let lo = self.grid.cell_min(&c.key, c.level);
        let s = self.side(c.level);
        let hi = lo.iter().map(|x| x + s).collect();
        (lo, hi)
    }

    /// Intervals per cell edge used by the portal lattice.
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    pub fn portals_of(&self, id: usize) -> Result<Vec<Point>> {
        let cell = self.cell(id)?;
        Ok(self.level_cell_portals(&cell.key.clone(), cell.level))
    }

    /// Portals of the grid cell `key` at `level`, materialized or not.
    pub fn level_cell_portals(&self, key: &[i64], level: i32) -> Vec<Point> {
        let lo = self.grid.cell_min(key, level);
        let s = self.side(level);
        let hi: Vec<f64> = lo.iter().map(|x| x + s).collect();
        box_portals(&lo, &hi, &lo, s / self.subdivisions as f64)
            .into_iter()
            .map(Point::new)
            .collect()
    }

    pub fn cut_level_ball(&self, x: &[f64], r: f64) -> CutLevel {
        self.grid.cut_level_ball(x, r)
    }

    /// Level of the smallest cell containing both points, or `None` if they
    /// share a leaf. Empty grid cells count as leaves.
    pub fn cut_level_pair(&self, p: &[f64], q: &[f64]) -> CutLevel {
        if p == q {
            return None;
        }
        let common = self.grid.common_level(p, q);
        let root_key = &self.cells[0].key;
        if self.grid.cell_index(p, self.grid.root_level) != *root_key
            || self.grid.cell_index(q, self.grid.root_level) != *root_key
        {
            return Some(self.grid.root_level);
        }
        let mut id = 0;
        while self.cells[id].level > common {
            let level = self.cells[id].level - 1;
            let key = self.grid.cell_index(p, level);
            match self.cells[id].children.iter().find(|&&c| self.cells[c].key == key) {
                Some(&c) => id = c,
                None => return None,
            }
        }
        if self.cells[id].is_leaf() {
            None
        } else {
            Some(common)
        }
    }

    /// Level of the deepest cell containing `x`, counting empty grid cells as
    /// leaves.
    fn leaf_level(&self, x: &[f64]) -> i32 {
        let mut id = 0;
        loop {
            let cell = &self.cells[id];
            if cell.is_leaf() {
                return cell.level;
            }
            let key = self.grid.cell_index(x, cell.level - 1);
            match cell.children.iter().find(|&&c| self.cells[c].key == key) {
                Some(&c) => id = c,
                None => return cell.level - 1,
            }
        }
    }

    /// Greedy portal-respecting path from `p` to `q`.
    ///
    /// For every level below the cut level, the path visits the portal nearest
    /// to where the segment leaves the cell of `p` (and likewise for `q`).
    pub fn portal_path(&self, p: &[f64], q: &[f64]) -> (f64, Vec<Point>) {
        let Some(cut) = self.cut_level_pair(p, q) else {
            return (dist(p, q), vec![Point::new(p.to_vec()), Point::new(q.to_vec())]);
        };
        let near = self.exit_portals(p, q, cut);
        let mut far = self.exit_portals(q, p, cut);
        far.reverse();
        let mut path = vec![Point::new(p.to_vec())];
        path.extend(near);
        path.extend(far);
        path.push(Point::new(q.to_vec()));
        let len = path.windows(2).map(|w| w[0].dist(&w[1])).sum();
        (len, path)
    }

    fn exit_portals(&self, from: &[f64], to: &[f64], cut: i32) -> Vec<Point> {
        let mut out = Vec::new();
        for level in self.leaf_level(from)..cut {
            let key = self.grid.cell_index(from, level);
            let lo = self.grid.cell_min(&key, level);
            let s = self.side(level);
            let mut t_exit = 1.0f64;
            for a in 0..from.len() {
                let v = to[a] - from[a];
                if v > 0.0 {
                    t_exit = t_exit.min((lo[a] + s - from[a]) / v);
                } else if v < 0.0 {
                    t_exit = t_exit.min((lo[a] - from[a]) / v);
                }
            }
            let t_exit = t_exit.clamp(0.0, 1.0);
            let exit: Vec<f64> = from
                .iter()
                .zip(to)
                .map(|(a, b)| a + t_exit * (b - a))
                .collect();
            let best = self
                .level_cell_portals(&key, level)
                .into_iter()
                .min_by(|x, y| dist(x.coords(), &exit).total_cmp(&dist(y.coords(), &exit)))
                .expect("cells have portals");
            out.push(best);
        }
        out
    }

    /// One line per cell: `level cell-id parent-id min-corner side n-points
    /// n-portals`, parent `-1` for the root.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, c) in self.cells.iter().enumerate() {
            let parent = c.parent.map_or(-1, |p| p as i64);
            let corner = self
                .grid
                .cell_min(&c.key, c.level)
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ");
            let portals = self.level_cell_portals(&c.key, c.level).len();
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                c.level,
                id,
                parent,
                corner,
                self.side(c.level),
                c.len(),
                portals
            );
        }
        out
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("rho must lie in (0, 1), got {rho}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_points(seed: u64, n: usize, dim: usize, span: f64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new((0..dim).map(|_| rng.random_range(0.0..span)).collect()))
            .collect()
    }

    fn inside(x: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(lo.iter().zip(hi))
            .all(|(c, (l, h))| *c >= l - tol && *c <= h + tol)
    }

    fn on_boundary(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
        inside(x, lo, hi, 1e-9)
            && x.iter()
                .zip(lo.iter().zip(hi))
                .any(|(c, (l, h))| (c - l).abs() < 1e-9 || (c - h).abs() < 1e-9)
    }

    #[test]
    fn rho_is_validated() {
        let pts = random_points(0, 3, 2, 4.0);
        assert!(ShiftedQuadtree::build(&pts, 0.0, 1).is_err());
        assert!(ShiftedQuadtree::build(&pts, 1.0, 1).is_err());
    }

    #[test]
    fn single_point_is_one_leaf() {
        let p = vec![Point::new(vec![3.0, 1.0])];
        let t = ShiftedQuadtree::build(&p, 0.5, 7).unwrap();
        assert_eq!(t.cells().len(), 1);
        assert!(t.cells()[0].is_leaf());
        assert_eq!(t.cut_level_pair(p[0].coords(), p[0].coords()), None);
    }

    #[test]
    fn zero_shift_hand_trace() {
        let pts = vec![Point::new(vec![0.25, 0.25]), Point::new(vec![0.75, 0.75])];
        let grid = ShiftedGrid::new(vec![0.0, 0.0], 1, -3).unwrap();
        let t = ShiftedQuadtree::build_with_grid(&pts, 0.5, grid).unwrap();
        // Level 0 has side sqrt(2): both points share cell (0, 0).
        // Level -1 has side sqrt(2)/2 ~ 0.707: 0.75 falls in index 1.
        let root = &t.cells()[0];
        assert_eq!(root.level, 1);
        assert_eq!(root.children.len(), 1);
        let level0 = &t.cells()[root.children[0]];
        assert_eq!(level0.level, 0);
        assert_eq!(level0.children.len(), 2);
        assert_eq!(t.cut_level_pair(pts[0].coords(), pts[1].coords()), Some(0));
        assert_ne!(t.leaf_of(0), t.leaf_of(1));
        assert_eq!(t.cells()[t.leaf_of(0)].level, -1);
    }

    #[test]
    fn structural_invariants() {
        for (seed, dim) in [(1, 1), (2, 2), (3, 2), (4, 3)] {
            let pts = random_points(seed, 40, dim, 30.0);
            let t = ShiftedQuadtree::build(&pts, 0.3, seed).unwrap();
            let mut seen = vec![0; pts.len()];
            for (id, c) in t.cells().iter().enumerate() {
                let (lo, hi) = t.cell_box(id);
                let diam = dist(&lo, &hi);
                assert!((diam - f64::powi(2.0, c.level + 1)).abs() < 1e-9 * diam);
                for &p in t.cell_points(id) {
                    assert!(inside(pts[p].coords(), &lo, &hi, 1e-9));
                }
                assert!(c.children.len() <= 1 << dim);
                if let Some(parent) = c.parent {
                    assert_eq!(t.cells()[parent].level, c.level + 1);
                    let (plo, phi) = t.cell_box(parent);
                    assert!(inside(&lo, &plo, &phi, 1e-9) && inside(&hi, &plo, &phi, 1e-9));
                }
                if !c.is_leaf() {
                    let total: usize = c.children.iter().map(|&k| t.cells()[k].len()).sum();
                    assert_eq!(total, c.len());
                }
                if c.is_leaf() {
                    for &p in t.cell_points(id) {
                        seen[p] += 1;
                        assert_eq!(t.leaf_of(p), id);
                    }
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn build_is_deterministic() {
        let pts = random_points(9, 30, 2, 50.0);
        let a = ShiftedQuadtree::build(&pts, 0.25, 42).unwrap();
        let b = ShiftedQuadtree::build(&pts, 0.25, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dump(), b.dump());
        let c = ShiftedQuadtree::build(&pts, 0.25, 43).unwrap();
        assert_ne!(a.grid(), c.grid());
    }

    #[test]
    fn duplicates_share_a_leaf() {
        let mut pts = random_points(5, 10, 2, 10.0);
        pts.push(pts[3].clone());
        let t = ShiftedQuadtree::build(&pts, 0.5, 1).unwrap();
        assert_eq!(t.leaf_of(3), t.leaf_of(10));
    }

    fn brute_cut_level(g: &ShiftedGrid, x: &[f64], r: f64) -> CutLevel {
        for j in (g.base_level()..=g.root_level()).rev() {
            let s = g.side(j);
            let ranges: Vec<(i64, i64)> = x
                .iter()
                .zip(g.origin())
                .map(|(c, o)| (((c - r - o) / s).floor() as i64, ((c + r - o) / s).floor() as i64))
                .collect();
            let mut hits = 0;
            let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'cells: loop {
                let lo = g.cell_min(&idx, j);
                let closest: Vec<f64> = x
                    .iter()
                    .zip(&lo)
                    .map(|(c, l)| c.clamp(*l, l + s))
                    .collect();
                let strictly = x.iter().zip(&lo).all(|(c, l)| c + r > *l && c - r < l + s);
                if strictly && dist(&closest, x) < r {
                    hits += 1;
                }
                for a in 0..idx.len() {
                    if idx[a] < ranges[a].1 {
                        idx[a] += 1;
                        continue 'cells;
                    }
                    idx[a] = ranges[a].0;
                }
                break;
            }
            if hits >= 2 {
                return Some(j);
            }
        }
        None
    }

    #[test]
    fn cut_level_ball_examples_and_oracle() {
        let pts = random_points(12, 20, 2, 40.0);
        let t = ShiftedQuadtree::build(&pts, 0.5, 3).unwrap();
        assert_eq!(t.cut_level_ball(pts[0].coords(), 0.0), None);
        let (lo, hi) = t.cell_box(0);
        assert_eq!(t.cut_level_ball(pts[0].coords(), dist(&lo, &hi)), Some(t.root_level()));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..40.0)).collect();
            let r = f64::powf(2.0, rng.random_range(-4.0..5.0));
            assert_eq!(t.cut_level_ball(&x, r), brute_cut_level(t.grid(), &x, r));
        }
    }

    fn path_walk_oracle(t: &ShiftedQuadtree, p: usize, q: usize) -> CutLevel {
        let ancestors = |mut id: usize| {
            let mut out = vec![id];
            while let Some(parent) = t.cells()[id].parent {
                out.push(parent);
                id = parent;
            }
            out
        };
        let (a, b) = (ancestors(t.leaf_of(p)), ancestors(t.leaf_of(q)));
        if a[0] == b[0] {
            return None;
        }
        a.iter().find(|id| b.contains(id)).map(|&id| t.cells()[id].level)
    }

    #[test]
    fn cut_level_pair_matches_path_walk() {
        for dim in 1..=3 {
            let pts = random_points(20 + dim as u64, 50, dim, 25.0);
            let t = ShiftedQuadtree::build(&pts, 0.4, 5).unwrap();
            for p in 0..pts.len() {
                assert_eq!(t.cut_level_pair(pts[p].coords(), pts[p].coords()), None);
                for q in 0..pts.len() {
                    assert_eq!(
                        t.cut_level_pair(pts[p].coords(), pts[q].coords()),
                        path_walk_oracle(&t, p, q),
                    );
                }
            }
        }
    }

    #[test]
    fn root_siblings_are_cut_at_the_root() {
        let pts = random_points(31, 30, 2, 60.0);
        let t = ShiftedQuadtree::build(&pts, 0.5, 8).unwrap();
        let root = &t.cells()[0];
        assert!(root.children.len() >= 2);
        let a = t.cell_points(root.children[0])[0];
        let b = t.cell_points(root.children[1])[0];
        assert_eq!(t.cut_level_pair(pts[a].coords(), pts[b].coords()), Some(t.root_level()));
    }

    #[test]
    fn portal_counts() {
        assert_eq!(subdivisions(2, 0.5), 2);
        assert_eq!(portal_count_bound(2, 0.5), 12);
        let pts = random_points(2, 12, 2, 16.0);
        let t = ShiftedQuadtree::build(&pts, 0.5, 2).unwrap();
        for id in 0..t.cells().len() {
            let n = t.portals_of(id).unwrap().len();
            assert_eq!(n, 8);
            assert!(n <= portal_count_bound(2, 0.5));
        }
        assert!(matches!(t.portals_of(usize::MAX), Err(Error::UnknownCell(_))));
        for dim in 1..=4 {
            for rho in [0.45, 0.2, 0.1] {
                let n = subdivisions(dim, rho);
                let count = (n + 1).pow(dim as u32) - (n - 1).pow(dim as u32);
                assert!(count <= portal_count_bound(dim, rho));
                let lo = vec![0.0; dim];
                let hi = vec![1.0; dim];
                assert_eq!(box_portals(&lo, &hi, &lo, 1.0 / n as f64).len(), count);
            }
        }
    }

    #[test]
    fn portals_lie_on_boundary_and_nest() {
        for dim in 1..=3 {
            let pts = random_points(40 + dim as u64, 30, dim, 20.0);
            let t = ShiftedQuadtree::build(&pts, 0.3, 11).unwrap();
            for (id, c) in t.cells().iter().enumerate() {
                let (lo, hi) = t.cell_box(id);
                let mine = t.portals_of(id).unwrap();
                for p in &mine {
                    assert!(on_boundary(p.coords(), &lo, &hi));
                }
                for &child in &c.children {
                    let (clo, chi) = t.cell_box(child);
                    let theirs = t.portals_of(child).unwrap();
                    for p in mine.iter().filter(|p| inside(p.coords(), &clo, &chi, 1e-9)) {
                        assert!(theirs.iter().any(|q| p.dist(q) < 1e-9), "parent portal missing");
                    }
                }
            }
        }
    }

    #[test]
    fn every_boundary_point_has_a_near_portal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in 1..=3 {
            for rho in [0.5, 0.3, 0.15] {
                let pts = random_points(dim as u64, 10, dim, 10.0);
                let t = ShiftedQuadtree::build(&pts, rho, 1).unwrap();
                for id in 0..t.cells().len() {
                    let (lo, hi) = t.cell_box(id);
                    let portals = t.portals_of(id).unwrap();
                    let bound = rho * f64::powi(2.0, t.cells()[id].level);
                    for _ in 0..20 {
                        let mut x: Vec<f64> =
                            (0..dim).map(|a| rng.random_range(lo[a]..hi[a])).collect();
                        let face = rng.random_range(0..dim);
                        x[face] = if rng.random_bool(0.5) { lo[face] } else { hi[face] };
                        let near = portals
                            .iter()
                            .map(|p| dist(p.coords(), &x))
                            .fold(f64::INFINITY, f64::min);
                        assert!(near <= bound * (1.0 + 1e-9), "{near} > {bound}");
                    }
                }
            }
        }
    }

    #[test]
    fn portal_path_examples() {
        let pts = vec![Point::new(vec![0.25, 0.25]), Point::new(vec![0.3, 0.3])];
        let grid = ShiftedGrid::new(vec![0.0, 0.0], 1, -1).unwrap();
        let t = ShiftedQuadtree::build_with_grid(&pts, 0.5, grid).unwrap();
        let (len, path) = t.portal_path(pts[0].coords(), pts[1].coords());
        assert_eq!(path.len(), 2);
        assert_eq!(len, pts[0].dist(&pts[1]));
        assert_eq!(t.portal_path(pts[0].coords(), pts[0].coords()).0, 0.0);
    }

    #[test]
    fn portal_path_detour_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in 1..=3 {
            let pts = random_points(60 + dim as u64, 60, dim, 64.0);
            let rho = 0.2;
            let t = ShiftedQuadtree::build(&pts, rho, 3).unwrap();
            for _ in 0..1000 {
                let p = &pts[rng.random_range(0..pts.len())];
                let q = &pts[rng.random_range(0..pts.len())];
                let (len, _) = t.portal_path(p.coords(), q.coords());
                let d = p.dist(q);
                assert!(len >= d - 1e-9);
                if let Some(i) = t.cut_level_pair(p.coords(), q.coords()) {
                    assert!(len - d <= rho * f64::powi(2.0, i + 2) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn pair_cut_frequency_is_bounded() {
        // Two points at distance one: Pr[cut at level >= i] <= d / 2^{i+1}.
        let pts = vec![Point::new(vec![0.0, 0.0]), Point::new(vec![0.6, 0.8])];
        let seeds = 4000u64;
        let mut counts = std::collections::HashMap::new();
        for seed in 0..seeds {
            let t = ShiftedQuadtree::build(&pts, 0.5, seed).unwrap();
            if let Some(level) = t.cut_level_pair(pts[0].coords(), pts[1].coords()) {
                *counts.entry(level).or_insert(0u64) += 1;
            }
        }
        for (&level, &c) in &counts {
            let f = c as f64 / seeds as f64;
            let p = 2.0 / f64::powi(2.0, level);
            let sigma = (p * (1.0 - p).max(0.0) / seeds as f64).sqrt();
            assert!(f <= p + 3.0 * sigma, "level {level}: {f}");
        }
    }
}
