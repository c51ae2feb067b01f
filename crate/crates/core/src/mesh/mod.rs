//! Quadtree quadrilateral meshes with 2:1 balance and Q2 hanging-node constraints.
//!
//! Geometry is stored on an integer lattice with spacing `2^-MAX_LEVEL` so that
//! point location and node identification are exact. Cells live in an arena;
//! a cell's index is its element id and stays stable under refinement. The
//! active elements are the leaves, kept sorted by id, and every per-element
//! array in the crate is aligned with [`QuadMesh::elements`].

mod marking;
mod scenario;

pub use marking::mark_doerfler;
pub use scenario::{
    BoundarySegment, Dirichlet, Domain, Load, PointPin, Scenario, ScenarioKind, DEFAULT_SEGMENT_WIDTH,
};

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Finest representable level.
pub const MAX_LEVEL: u32 = 24;
/// Integer length of the unit interval.
pub const UNIT: i64 = 1 << MAX_LEVEL;

pub type ElementId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Reference coordinates of the point at parameter `t ∈ [0, 1]` along the side.
    pub fn reference_point(self, t: f64) -> [f64; 2] {
        match self {
            Side::Left => [0.0, t],
            Side::Right => [1.0, t],
            Side::Bottom => [t, 0.0],
            Side::Top => [t, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub level: u32,
    /// Lower-left corner in lattice units.
    pub x: i64,
    pub y: i64,
    pub parent: Option<ElementId>,
    /// Children ordered lower-left, lower-right, upper-left, upper-right.
    pub children: Option<[ElementId; 4]>,
}

impl Cell {
    pub fn size_units(&self) -> i64 {
        UNIT >> self.level
    }

    pub fn size(&self) -> f64 {
        self.size_units() as f64 / UNIT as f64
    }

    pub fn corner(&self) -> [f64; 2] {
        [self.x as f64 / UNIT as f64, self.y as f64 / UNIT as f64]
    }

    pub fn area(&self) -> f64 {
        self.size() * self.size()
    }

    fn contains_units(&self, px: i64, py: i64) -> bool {
        let s = self.size_units();
        px >= self.x && px < self.x + s && py >= self.y && py < self.y + s
    }

    /// Maps physical coordinates to reference coordinates in `[0, 1]²`.
    pub fn to_reference(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.corner();
        let h = self.size();
        [(p[0] - c[0]) / h, (p[1] - c[1]) / h]
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        let c = self.corner();
        let h = self.size();
        [c[0] + h * r[0], c[1] + h * r[1]]
    }
}

/// Neighbors across one side of a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideNeighbors {
    Boundary,
    /// A single leaf of the same or the next coarser level.
    Single(ElementId),
    /// Two leaves of the next finer level, ordered along the side.
    Two([ElementId; 2]),
}

/// A hanging Q2 node expressed through the three nodes of the coarse edge it lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub node: usize,
    pub masters: [(usize, f64); 3],
}

const QUARTER_WEIGHTS: [f64; 3] = [3.0 / 8.0, 3.0 / 4.0, -1.0 / 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    domain: Domain,
    cells: Vec<Cell>,
    roots: Vec<ElementId>,
    leaves: Vec<ElementId>,
    leaf_pos: Vec<Option<usize>>,
    nodes: Vec<[i64; 2]>,
    elem_nodes: Vec<[usize; 9]>,
    constraints: Vec<Constraint>,
    node_constraint: Vec<Option<usize>>,
}

impl QuadMesh {
    /// Uniform mesh with elements of size `2^-level`.
    pub fn uniform(domain: Domain, level: u32) -> Result<Self> {
        let root_level = domain.root_level();
        if level <= root_level {
            return Err(Error::InvalidInput(format!(
                "initial level {level} must exceed the root level {root_level} of the {domain:?} domain \
                 so that every element has siblings"
            )));
        }
        if level > 12 {
            return Err(Error::InvalidInput(format!("initial level {level} too fine")));
        }
        let mut cells = Vec::new();
        let mut roots = Vec::new();
        for (x, y) in domain.root_corners() {
            roots.push(cells.len());
            cells.push(Cell {
                level: root_level,
                x,
                y,
                parent: None,
                children: None,
            });
        }
        let mut mesh = Self {
            domain,
            cells,
            roots,
            leaves: Vec::new(),
            leaf_pos: Vec::new(),
            nodes: Vec::new(),
            elem_nodes: Vec::new(),
            constraints: Vec::new(),
            node_constraint: Vec::new(),
        };
        let mut frontier = mesh.roots.clone();
        for _ in root_level..level {
            let mut next = Vec::new();
            for id in frontier {
                next.extend(mesh.split(id));
            }
            frontier = next;
        }
        mesh.rebuild();
        Ok(mesh)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn cell(&self, id: ElementId) -> &Cell {
        &self.cells[id]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Active element ids, ascending.
    pub fn elements(&self) -> &[ElementId] {
        &self.leaves
    }

    pub fn num_elements(&self) -> usize {
        self.leaves.len()
    }

    /// Position of an element in [`Self::elements`], if it is a leaf.
    pub fn element_index(&self, id: ElementId) -> Option<usize> {
        self.leaf_pos.get(id).copied().flatten()
    }

    pub fn is_leaf(&self, id: ElementId) -> bool {
        self.element_index(id).is_some()
    }

    /// Cell of the `k`-th element.
    pub fn element(&self, k: usize) -> &Cell {
        &self.cells[self.leaves[k]]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_position(&self, n: usize) -> [f64; 2] {
        [
            self.nodes[n][0] as f64 / UNIT as f64,
            self.nodes[n][1] as f64 / UNIT as f64,
        ]
    }

    /// Q2 node indices of the `k`-th element, lexicographic in `(ix, iy)`, `ix + 3 iy`.
    pub fn element_nodes(&self, k: usize) -> &[usize; 9] {
        &self.elem_nodes[k]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn node_constraint(&self, n: usize) -> Option<&Constraint> {
        self.node_constraint[n].map(|c| &self.constraints[c])
    }

    /// Leaf containing the lattice point (half-open cells).
    pub fn leaf_at_units(&self, px: i64, py: i64) -> Option<ElementId> {
        let mut cur = *self
            .roots
            .iter()
            .find(|&&r| self.cells[r].contains_units(px, py))?;
        loop {
            match self.cells[cur].children {
                None => return Some(cur),
                Some(ch) => {
                    cur = *ch
                        .iter()
                        .find(|&&c| self.cells[c].contains_units(px, py))
                        .expect("children tile their parent");
                }
            }
        }
    }

    /// Leaf containing `p`, resolving points on cell boundaries towards `toward`.
    pub fn locate(&self, p: [f64; 2], toward: [f64; 2]) -> Option<ElementId> {
        let to_units = |v: f64| (v * UNIT as f64).round() as i64;
        let (mut px, mut py) = (to_units(p[0]), to_units(p[1]));
        px += (toward[0] - p[0]).signum() as i64;
        py += (toward[1] - p[1]).signum() as i64;
        self.leaf_at_units(px, py)
    }

    pub fn side_neighbors(&self, id: ElementId, side: Side) -> SideNeighbors {
        let c = &self.cells[id];
        let s = c.size_units();
        let samples = match side {
            Side::Left => [(c.x - 1, c.y + s / 4), (c.x - 1, c.y + 3 * s / 4)],
            Side::Right => [(c.x + s, c.y + s / 4), (c.x + s, c.y + 3 * s / 4)],
            Side::Bottom => [(c.x + s / 4, c.y - 1), (c.x + 3 * s / 4, c.y - 1)],
            Side::Top => [(c.x + s / 4, c.y + s), (c.x + 3 * s / 4, c.y + s)],
        };
        let a = self.leaf_at_units(samples[0].0, samples[0].1);
        let b = self.leaf_at_units(samples[1].0, samples[1].1);
        match (a, b) {
            (Some(a), Some(b)) if a == b => SideNeighbors::Single(a),
            (Some(a), Some(b)) => SideNeighbors::Two([a, b]),
            _ => SideNeighbors::Boundary,
        }
    }

    fn split(&mut self, id: ElementId) -> [ElementId; 4] {
        let c = self.cells[id].clone();
        debug_assert!(c.children.is_none());
        let h = c.size_units() / 2;
        let base = self.cells.len();
        for (dx, dy) in [(0, 0), (h, 0), (0, h), (h, h)] {
            self.cells.push(Cell {
                level: c.level + 1,
                x: c.x + dx,
                y: c.y + dy,
                parent: Some(id),
                children: None,
            });
        }
        let ch = [base, base + 1, base + 2, base + 3];
        self.cells[id].children = Some(ch);
        ch
    }

    /// Splits every marked leaf and closes the result under 2:1 balance.
    pub fn refine(&self, marked: &[ElementId]) -> Result<QuadMesh> {
        let mut mesh = self.clone();
        if marked.is_empty() {
            return Ok(mesh);
        }
        let mut queue = Vec::new();
        let mut sorted: Vec<ElementId> = marked.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &id in &sorted {
            if !self.is_leaf(id) {
                return Err(Error::InvalidInput(format!("element {id} is not a leaf")));
            }
            if self.cells[id].level >= MAX_LEVEL - 2 {
                return Err(Error::InvalidInput(format!("element {id} is at the finest level")));
            }
            queue.extend(mesh.split(id));
        }
        mesh.balance(queue);
        mesh.rebuild();
        Ok(mesh)
    }

    /// Uniform refinement of every element.
    pub fn refine_uniform(&self) -> Result<QuadMesh> {
        self.refine(&self.leaves)
    }

    fn balance(&mut self, mut queue: Vec<ElementId>) {
        while let Some(id) = queue.pop() {
            if self.cells[id].children.is_some() {
                continue;
            }
            let c = self.cells[id].clone();
            let s = c.size_units();
            let probes = [
                (c.x - 1, c.y + s / 2),
                (c.x + s, c.y + s / 2),
                (c.x + s / 2, c.y - 1),
                (c.x + s / 2, c.y + s),
            ];
            for (px, py) in probes {
                if let Some(n) = self.leaf_at_units(px, py) {
                    if self.cells[n].level + 1 < c.level {
                        let ch = self.split(n);
                        queue.extend(ch);
                        queue.push(id);
                    }
                }
            }
        }
    }

    fn rebuild(&mut self) {
        self.leaves = (0..self.cells.len())
            .filter(|&i| self.cells[i].children.is_none())
            .collect();
        self.leaf_pos = vec![None; self.cells.len()];
        for (k, &id) in self.leaves.iter().enumerate() {
            self.leaf_pos[id] = Some(k);
        }

        let mut index: HashMap<(i64, i64), usize> = HashMap::new();
        self.nodes.clear();
        self.elem_nodes = Vec::with_capacity(self.leaves.len());
        for &id in &self.leaves {
            let c = &self.cells[id];
            let h = c.size_units() / 2;
            let mut en = [0usize; 9];
            for (l, slot) in en.iter_mut().enumerate() {
                let key = (c.x + (l % 3) as i64 * h, c.y + (l / 3) as i64 * h);
                *slot = *index.entry(key).or_insert_with(|| {
                    self.nodes.push([key.0, key.1]);
                    self.nodes.len() - 1
                });
            }
            self.elem_nodes.push(en);
        }

        self.constraints.clear();
        self.node_constraint = vec![None; self.nodes.len()];
        for &id in &self.leaves {
            let c = self.cells[id].clone();
            let s = c.size_units();
            for side in Side::ALL {
                if let SideNeighbors::Two(_) = self.side_neighbors(id, side) {
                    let (start, dir) = match side {
                        Side::Left => ((c.x, c.y), (0, 1)),
                        Side::Right => ((c.x + s, c.y), (0, 1)),
                        Side::Bottom => ((c.x, c.y), (1, 0)),
                        Side::Top => ((c.x, c.y + s), (1, 0)),
                    };
                    let at = |k: i64| (start.0 + dir.0 * k * s / 4, start.1 + dir.1 * k * s / 4);
                    let masters = [index[&at(0)], index[&at(2)], index[&at(4)]];
                    for (k, w) in [(1, QUARTER_WEIGHTS), (3, reversed(QUARTER_WEIGHTS))] {
                        let node = index[&at(k)];
                        if self.node_constraint[node].is_none() {
                            self.node_constraint[node] = Some(self.constraints.len());
                            self.constraints.push(Constraint {
                                node,
                                masters: [
                                    (masters[0], w[0]),
                                    (masters[1], w[1]),
                                    (masters[2], w[2]),
                                ],
                            });
                        }
                    }
                }
            }
        }
    }

    /// The nearest ancestor (or the cell itself) that is an element of `coarse`.
    pub fn ancestor_in(&self, id: ElementId, coarse: &QuadMesh) -> Option<ElementId> {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if coarse.is_leaf(c) {
                return Some(c);
            }
            cur = self.cells.get(c).and_then(|cell| cell.parent);
        }
        None
    }

    /// Total area of the elements.
    pub fn area(&self) -> f64 {
        self.leaves.iter().map(|&id| self.cells[id].area()).sum()
    }

    /// Verifies sibling structure, tiling, 2:1 balance and constraint consistency.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (id, c) in self.cells.iter().enumerate() {
            if let Some(p) = c.parent {
                let ch = self.cells[p]
                    .children
                    .ok_or_else(|| format!("parent {p} of {id} has no children"))?;
                if !ch.contains(&id) {
                    return Err(format!("cell {id} missing from its parent's children"));
                }
                if ch.iter().any(|&s| self.cells[s].level != c.level) {
                    return Err(format!("siblings of {id} differ in level"));
                }
            }
        }
        // tiling: integer areas add up and each leaf center locates to itself
        let total: i128 = self
            .leaves
            .iter()
            .map(|&id| (self.cells[id].size_units() as i128).pow(2))
            .sum();
        let expected: i128 = self
            .roots
            .iter()
            .map(|&r| (self.cells[r].size_units() as i128).pow(2))
            .sum();
        if total != expected {
            return Err(format!("leaf area {total} != domain area {expected}"));
        }
        for &id in &self.leaves {
            let c = &self.cells[id];
            let h = c.size_units() / 2;
            if self.leaf_at_units(c.x + h, c.y + h) != Some(id) {
                return Err(format!("leaf {id} overlaps another leaf"));
            }
            for side in Side::ALL {
                let lv = |n: ElementId| self.cells[n].level as i64;
                match self.side_neighbors(id, side) {
                    SideNeighbors::Boundary => {}
                    SideNeighbors::Single(n) => {
                        if (lv(n) - c.level as i64).abs() > 1 {
                            return Err(format!("2:1 balance violated between {id} and {n}"));
                        }
                    }
                    SideNeighbors::Two([a, b]) => {
                        if lv(a) != c.level as i64 + 1 || lv(b) != c.level as i64 + 1 {
                            return Err(format!("2:1 balance violated at {id} ({side:?})"));
                        }
                    }
                }
            }
        }
        for con in &self.constraints {
            let sum: f64 = con.masters.iter().map(|m| m.1).sum();
            if (sum - 1.0).abs() > 1e-14 {
                return Err(format!("constraint weights of node {} sum to {sum}", con.node));
            }
            let p = self.nodes[con.node];
            let a = self.nodes[con.masters[0].0];
            let b = self.nodes[con.masters[2].0];
            let quarter = |num: i64| {
                [
                    a[0] + (b[0] - a[0]) * num / 4,
                    a[1] + (b[1] - a[1]) * num / 4,
                ]
            };
            if p != quarter(1) && p != quarter(3) {
                return Err(format!("hanging node {} not at a quarter point", con.node));
            }
            if con.masters.iter().any(|m| self.node_constraint[m.0].is_some()) {
                return Err(format!("constraint of node {} has a constrained master", con.node));
            }
        }
        Ok(())
    }

    /// Plain-text dump: element lines `E id level x y size` and constraint lines
    /// `H node master weight master weight master weight`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# elements {}", self.leaves.len());
        for &id in &self.leaves {
            let c = &self.cells[id];
            let [x, y] = c.corner();
            let _ = writeln!(s, "E {id} {} {x:.17e} {y:.17e} {:.17e}", c.level, c.size());
        }
        let _ = writeln!(s, "# constraints {}", self.constraints.len());
        for con in &self.constraints {
            let _ = write!(s, "H {}", con.node);
            for (m, w) in con.masters {
                let _ = write!(s, " {m} {w}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

fn reversed(w: [f64; 3]) -> [f64; 3] {
    [w[2], w[1], w[0]]
}

/// One parsed element line of a mesh dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpedElement {
    pub id: ElementId,
    pub level: u32,
    pub corner: [f64; 2],
    pub size: f64,
}

/// Parses the element lines of [`QuadMesh::dump`].
pub fn parse_dump(text: &str) -> Result<Vec<DumpedElement>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        if it.next() != Some("E") {
            continue;
        }
        let fields: Vec<&str> = it.collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("bad element line: {line}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        out.push(DumpedElement {
            id: fields[0].parse().map_err(|e| Error::Parse(format!("{e}")))?,
            level: fields[1].parse().map_err(|e| Error::Parse(format!("{e}")))?,
            corner: [num(fields[2])?, num(fields[3])?],
            size: num(fields[4])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(level: u32) -> QuadMesh {
        QuadMesh::uniform(Domain::UnitSquare, level).unwrap()
    }

    #[test]
    fn uniform_counts() {
        assert_eq!(square(1).num_elements(), 4);
        assert_eq!(square(3).num_elements(), 64);
        assert_eq!(QuadMesh::uniform(Domain::LShape, 2).unwrap().num_elements(), 12);
        assert_eq!(QuadMesh::uniform(Domain::Rectangle, 3).unwrap().num_elements(), 32);
    }

    #[test]
    fn root_level_rejected() {
        assert!(QuadMesh::uniform(Domain::UnitSquare, 0).is_err());
        assert!(QuadMesh::uniform(Domain::LShape, 1).is_err());
    }

    #[test]
    fn uniform_q2_node_count() {
        let m = square(2);
        assert_eq!(m.num_nodes(), 81);
        assert!(m.constraints().is_empty());
        m.check_invariants().unwrap();
    }

    #[test]
    fn refine_single_cell() {
        let m = square(1);
        let r = m.refine(&[m.elements()[0]]).unwrap();
        assert_eq!(r.num_elements(), 7);
        r.check_invariants().unwrap();
        // two coarse edges gain two hanging nodes each
        assert_eq!(r.constraints().len(), 4);
    }

    #[test]
    fn refine_empty_is_identity() {
        let m = square(2);
        assert_eq!(m.refine(&[]).unwrap(), m);
    }

    #[test]
    fn closure_refines_coarse_neighbor() {
        let m = square(1);
        // refine lower-left twice at its upper-right child
        let m1 = m.refine(&[m.elements()[0]]).unwrap();
        let target = m1
            .elements()
            .iter()
            .copied()
            .find(|&id| {
                let c = m1.cell(id);
                c.level == 2 && c.corner() == [0.25, 0.25]
            })
            .unwrap();
        let before = m1.num_elements();
        let m2 = m1.refine(&[target]).unwrap();
        m2.check_invariants().unwrap();
        // the level-1 neighbors to the right and above must have been split
        assert!(m2.num_elements() > before + 3);
        for &id in m2.elements() {
            assert!(m2.cell(id).level >= 2 || m2.cell(id).corner() == [0.5, 0.5]);
        }
    }

    #[test]
    fn repeated_corner_refinement_stays_balanced() {
        let mut m = square(2);
        for _ in 0..6 {
            let id = m.locate([0.0, 0.0], [1.0, 1.0]).unwrap();
            m = m.refine(&[id]).unwrap();
            m.check_invariants().unwrap();
        }
        let mut l = QuadMesh::uniform(Domain::LShape, 2).unwrap();
        for _ in 0..5 {
            let id = l.locate([0.5, 0.5], [0.0, 0.0]).unwrap();
            l = l.refine(&[id]).unwrap();
            l.check_invariants().unwrap();
        }
        assert!((l.area() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn ancestors_map_back() {
        let m = square(2);
        let r = m.refine(&[m.elements()[5]]).unwrap();
        for &id in r.elements() {
            let a = r.ancestor_in(id, &m).unwrap();
            assert!(m.is_leaf(a));
        }
    }

    #[test]
    fn dump_parses() {
        let m = square(1).refine(&[0 + 1]).unwrap();
        let parsed = parse_dump(&m.dump()).unwrap();
        assert_eq!(parsed.len(), m.num_elements());
        assert_eq!(parsed[0].id, m.elements()[0]);
    }
}
