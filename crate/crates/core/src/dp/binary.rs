//! Binary split tree derived from a shifted quadtree.
//!
//! Every quadtree cell is cut along axis 0, then axis 1, and so on. Halves
//! that hold no child cell are dropped and halves that hold exactly one child
//! cell are replaced by that cell, so a cell with `c` non-empty children gets
//! `c - 1` binary nodes (itself included) above them.

use crate::geometry::{dist, Point};
use crate::model::{Instance, Relocation};
use crate::quadtree::{box_portals, ShiftedQuadtree};

#[derive(Clone, Debug, PartialEq)]
pub struct BNode {
    pub parent: Option<usize>,
    children: [usize; 2],
    n_children: u8,
    /// Quadtree cell that owns this node's portal lattice.
    pub cell: usize,
    /// Whether the node is that quadtree cell itself.
    pub is_cell: bool,
    pub level: i32,
    pub depth: usize,
    step: f64,
    points: (usize, usize),
}

impl BNode {
    pub fn children(&self) -> &[usize] {
        &self.children[..self.n_children as usize]
    }

    pub fn is_leaf(&self) -> bool {
        self.n_children == 0
    }
}

/// Binary tree over the quadtree's points with per-node boxes and portal
/// lattices.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryTree {
    dim: usize,
    nodes: Vec<BNode>,
    /// `lo`, `hi` and lattice anchor of every node, `3 * dim` values each.
    geom: Vec<f64>,
    leaf_points: Vec<usize>,
    leaf_of: Vec<usize>,
    points: Vec<Point>,
}

pub fn binarize(tree: &ShiftedQuadtree) -> BinaryTree {
    let mut b = BinaryTree {
        dim: tree.dim(),
        nodes: Vec::new(),
        geom: Vec::new(),
        leaf_points: Vec::new(),
        leaf_of: vec![usize::MAX; tree.points().len()],
        points: tree.points().to_vec(),
    };
    b.cell_node(tree, tree.root(), None, 0);
    b
}

impl BinaryTree {
    fn push(&mut self, lo: &[f64], hi: &[f64], anchor: &[f64], node: BNode) -> usize {
        self.geom.extend_from_slice(lo);
        self.geom.extend_from_slice(hi);
        self.geom.extend_from_slice(anchor);
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn set_children(&mut self, id: usize, kids: &[usize]) {
        assert!(kids.len() <= 2, "binary node with {} children", kids.len());
        let node = &mut self.nodes[id];
        node.n_children = kids.len() as u8;
        node.children[..kids.len()].copy_from_slice(kids);
    }

    fn cell_node(&mut self, tree: &ShiftedQuadtree, cell: usize, parent: Option<usize>, depth: usize) -> usize {
        let (lo, hi) = tree.cell_box(cell);
        let c = &tree.cells()[cell];
        let step = tree.side(c.level) / tree.subdivisions() as f64;
        let id = self.push(
            &lo,
            &hi,
            &lo,
            BNode {
                parent,
                children: [0; 2],
                n_children: 0,
                cell,
                is_cell: true,
                level: c.level,
                depth,
                step,
                points: (0, 0),
            },
        );
        if c.is_leaf() {
            let start = self.leaf_points.len();
            for &p in tree.cell_points(cell) {
                self.leaf_points.push(p);
                self.leaf_of[p] = id;
            }
            self.nodes[id].points = (start, self.leaf_points.len());
        } else {
            let kids = c.children.clone();
            let made = self.split(tree, cell, 0, &lo, &hi, &kids, id, depth + 1);
            self.set_children(id, &made);
        }
        id
    }

    #[allow(clippy::too_many_arguments)]
    fn split(
        &mut self,
        tree: &ShiftedQuadtree,
        cell: usize,
        axis: usize,
        lo: &[f64],
        hi: &[f64],
        kids: &[usize],
        parent: usize,
        depth: usize,
    ) -> Vec<usize> {
        if axis == self.dim {
            return vec![self.cell_node(tree, kids[0], Some(parent), depth)];
        }
        let (low, high): (Vec<usize>, Vec<usize>) =
            kids.iter().partition(|&&k| tree.cells()[k].key[axis] & 1 == 0);
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let half = |upper: bool| {
            let (mut l, mut h) = (lo.to_vec(), hi.to_vec());
            if upper {
                l[axis] = mid;
            } else {
                h[axis] = mid;
            }
            (l, h)
        };
        if low.is_empty() || high.is_empty() {
            let (l, h) = half(low.is_empty());
            return self.split(tree, cell, axis + 1, &l, &h, kids, parent, depth);
        }
        let owner = &tree.cells()[cell];
        let anchor = tree.grid().cell_min(&owner.key, owner.level);
        let step = tree.side(owner.level) / tree.subdivisions() as f64;
        let mut out = Vec::with_capacity(2);
        for (upper, group) in [(false, low), (true, high)] {
            if group.len() == 1 {
                out.push(self.cell_node(tree, group[0], Some(parent), depth));
                continue;
            }
            let (l, h) = half(upper);
            let id = self.push(
                &l,
                &h,
                &anchor,
                BNode {
                    parent: Some(parent),
                    children: [0; 2],
                    n_children: 0,
                    cell,
                    is_cell: false,
                    level: owner.level,
                    depth,
                    step,
                    points: (0, 0),
                },
            );
            let made = self.split(tree, cell, axis + 1, &l, &h, &group, id, depth + 1);
            self.set_children(id, &made);
            out.push(id);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &BNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[BNode] {
        &self.nodes
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn lo(&self, id: usize) -> &[f64] {
        let s = 3 * self.dim * id;
        &self.geom[s..s + self.dim]
    }

    pub fn hi(&self, id: usize) -> &[f64] {
        let s = 3 * self.dim * id + self.dim;
        &self.geom[s..s + self.dim]
    }

    fn anchor(&self, id: usize) -> &[f64] {
        let s = 3 * self.dim * id + 2 * self.dim;
        &self.geom[s..s + self.dim]
    }

    /// Box diagonal.
    pub fn diameter(&self, id: usize) -> f64 {
        dist(self.lo(id), self.hi(id))
    }

    /// Tree-point indices held by a leaf.
    pub fn leaf_points(&self, id: usize) -> &[usize] {
        let (s, e) = self.nodes[id].points;
        &self.leaf_points[s..e]
    }

    pub fn leaf_of(&self, point: usize) -> usize {
        self.leaf_of[point]
    }

    /// Portals of a node, flattened with stride `dim`.
    pub fn portals(&self, id: usize) -> Vec<f64> {
        box_portals(self.lo(id), self.hi(id), self.anchor(id), self.nodes[id].step)
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Nodes from `leaf` up to, but excluding, `stop`.
    pub fn path_up(&self, leaf: usize, stop: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut v = leaf;
        while v != stop {
            out.push(v);
            v = self.nodes[v].parent.expect("stop is an ancestor");
        }
        out
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.nodes[a].depth > self.nodes[b].depth {
            a = self.nodes[a].parent.unwrap();
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            b = self.nodes[b].parent.unwrap();
        }
        while a != b {
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        a
    }

    /// Shortest portal-respecting distance between two points held in the
    /// given leaves.
    ///
    /// Inside one leaf this is the straight-line distance. Otherwise the path
    /// visits one portal of every node containing `x` strictly below the
    /// lowest common ancestor, then one portal of every such node containing
    /// `y`, top down. Computed by a layered shortest-path sweep.
    pub fn portal_distance(&self, x: &[f64], leaf_x: usize, y: &[f64], leaf_y: usize) -> f64 {
        if leaf_x == leaf_y {
            return dist(x, y);
        }
        let top = self.lca(leaf_x, leaf_y);
        let mut layers = self.path_up(leaf_x, top);
        let mut down = self.path_up(leaf_y, top);
        down.reverse();
        layers.extend(down);
        let d = self.dim;
        let mut prev_pts: Vec<f64> = x.to_vec();
        let mut prev_cost = vec![0.0];
        for node in layers {
            let pts = self.portals(node);
            let cost: Vec<f64> = pts
                .chunks(d)
                .map(|q| {
                    prev_pts
                        .chunks(d)
                        .zip(&prev_cost)
                        .map(|(p, c)| c + dist(p, q))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            prev_pts = pts;
            prev_cost = cost;
        }
        prev_pts
            .chunks(d)
            .zip(&prev_cost)
            .map(|(p, c)| c + dist(p, y))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Relocated clients followed by candidates: the point set the tree is built
/// on. Candidate `j` is tree point `n + j`.
pub fn tree_points(instance: &Instance, relocation: &Relocation) -> Vec<Point> {
    relocation
        .targets()
        .iter()
        .chain(instance.candidates())
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadtree::ShiftedGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(seed: u64, n: usize, dim: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new((0..dim).map(|_| rng.random_range(0.0..30.0)).collect()))
            .collect()
    }

    #[test]
    fn one_dimension_is_the_identity() {
        let pts = random_points(1, 25, 1);
        let q = ShiftedQuadtree::build(&pts, 0.3, 2).unwrap();
        let b = binarize(&q);
        assert_eq!(b.len(), q.cells().len());
        assert!(b.nodes().iter().all(|n| n.is_cell));
    }

    #[test]
    fn four_children_become_three_nodes() {
        let pts = vec![
            Point::new(vec![0.5, 0.5]),
            Point::new(vec![1.5, 0.5]),
            Point::new(vec![0.5, 1.5]),
            Point::new(vec![1.5, 1.5]),
        ];
        // Level-0 cells have side sqrt(2) ~ 1.414, so the four points fall in
        // the four quadrants of the level-1 cell at the origin.
        let grid = ShiftedGrid::new(vec![0.0, 0.0], 1, -3).unwrap();
        let q = ShiftedQuadtree::build_with_grid(&pts, 0.5, grid).unwrap();
        assert_eq!(q.cells()[0].children.len(), 4);
        let b = binarize(&q);
        let internal = b.nodes().iter().filter(|n| !n.is_leaf()).count();
        assert_eq!(internal, 3);
        assert_eq!(b.nodes().iter().filter(|n| !n.is_cell).count(), 2);
    }

    #[test]
    fn leaves_and_boxes_are_consistent() {
        for dim in 1..=3 {
            let pts = random_points(10 + dim as u64, 40, dim);
            let q = ShiftedQuadtree::build(&pts, 0.25, 4).unwrap();
            let b = binarize(&q);
            assert!(b.max_depth() <= dim * (q.root_level() - q.grid().base_level()) as usize);
            for p in 0..pts.len() {
                let leaf = b.leaf_of(p);
                assert!(b.node(leaf).is_cell);
                assert_eq!(b.node(leaf).cell, q.leaf_of(p));
                assert!(b.leaf_points(leaf).contains(&p));
            }
            for (id, n) in b.nodes().iter().enumerate() {
                assert!(n.children().len() <= 2);
                for &c in n.children() {
                    for a in 0..dim {
                        assert!(b.lo(c)[a] >= b.lo(id)[a] - 1e-9 && b.hi(c)[a] <= b.hi(id)[a] + 1e-9);
                    }
                    assert_eq!(b.node(c).parent, Some(id));
                }
                if n.is_cell {
                    assert_eq!(b.portals(id).len() / dim, q.portals_of(n.cell).unwrap().len());
                }
            }
        }
    }

    #[test]
    fn intermediate_portals_include_the_owner_portals_on_their_boundary() {
        let pts = random_points(3, 30, 2);
        let q = ShiftedQuadtree::build(&pts, 0.3, 9).unwrap();
        let b = binarize(&q);
        for (id, n) in b.nodes().iter().enumerate() {
            if n.is_cell {
                continue;
            }
            let flat = b.portals(id);
            let mine: Vec<&[f64]> = flat.chunks(2).collect();
            let (lo, hi) = (b.lo(id), b.hi(id));
            for p in q.portals_of(n.cell).unwrap() {
                let x = p.coords();
                let inside = (0..2).all(|a| x[a] >= lo[a] - 1e-9 && x[a] <= hi[a] + 1e-9);
                let on_face = (0..2).any(|a| (x[a] - lo[a]).abs() < 1e-9 || (x[a] - hi[a]).abs() < 1e-9);
                if inside && on_face {
                    assert!(mine.iter().any(|m| dist(m, x) < 1e-9));
                }
            }
        }
    }

    #[test]
    fn portal_distance_is_at_least_straight_and_symmetric() {
        let pts = random_points(5, 30, 2);
        let q = ShiftedQuadtree::build(&pts, 0.3, 1).unwrap();
        let b = binarize(&q);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let (x, y) = (pts[i].coords(), pts[j].coords());
                let d = b.portal_distance(x, b.leaf_of(i), y, b.leaf_of(j));
                let back = b.portal_distance(y, b.leaf_of(j), x, b.leaf_of(i));
                assert!(d >= dist(x, y) - 1e-9);
                assert!((d - back).abs() <= 1e-9 * d.max(1.0));
                if let Some(level) = q.cut_level_pair(x, y) {
                    // The binary path passes at most d portals per quadtree level.
                    assert!(d - dist(x, y) <= 2.0 * 0.3 * f64::powi(2.0, level + 2) + 1e-9);
                }
            }
        }
    }
}
