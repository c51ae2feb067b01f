//! Bi-quadratic (Q2) finite elements for plane linear elasticity with one
//! constant elasticity tensor per element.
//!
//! Local degrees of freedom are ordered `2·a + c` for node `a` (lexicographic,
//! `a = ix + 3·iy`) and displacement component `c`. Hanging nodes are
//! eliminated by expanding them into their masters; fixed components are
//! dropped.

use std::sync::{Arc, OnceLock};

use crate::linalg::{SparsePattern, SymmetricMatrix};
use crate::mesh::{QuadMesh, Scenario, Side, SideNeighbors};
use crate::quadrature::{gauss3x3, lagrange2, GAUSS3_POINTS, GAUSS3_WEIGHTS};
use crate::tensor::{ElasticTensor2D, Sym2};
use crate::{Error, Result};

pub const LOCAL_DOFS: usize = 18;

type LocalMatrix = [[f64; LOCAL_DOFS]; LOCAL_DOFS];

/// Values, reference gradients and reference Hessians of the nine Q2 shape functions.
struct ShapeEval {
    val: [f64; 9],
    grad: [[f64; 2]; 9],
    hess: [[f64; 3]; 9],
}

fn shape(r: [f64; 2]) -> ShapeEval {
    let (vx, dx, ddx) = lagrange2(r[0]);
    let (vy, dy, ddy) = lagrange2(r[1]);
    let mut s = ShapeEval {
        val: [0.0; 9],
        grad: [[0.0; 2]; 9],
        hess: [[0.0; 3]; 9],
    };
    for a in 0..9 {
        let (i, j) = (a % 3, a / 3);
        s.val[a] = vx[i] * vy[j];
        s.grad[a] = [dx[i] * vy[j], vx[i] * dy[j]];
        s.hess[a] = [ddx[i] * vy[j], vx[i] * ddy[j], dx[i] * dy[j]];
    }
    s
}

fn basis_strain(grad: [f64; 2], comp: usize) -> Sym2 {
    if comp == 0 {
        Sym2::new(grad[0], 0.0, 0.5 * grad[1])
    } else {
        Sym2::new(0.0, grad[1], 0.5 * grad[0])
    }
}

/// Element stiffness matrices of the unit reference square for each of the six
/// tensor entries. For a square element the stiffness does not depend on its size.
fn reference_matrices() -> &'static [LocalMatrix; 6] {
    static REF: OnceLock<Box<[LocalMatrix; 6]>> = OnceLock::new();
    REF.get_or_init(|| {
        let mut out = Box::new([[[0.0; LOCAL_DOFS]; LOCAL_DOFS]; 6]);
        for (k, m) in out.iter_mut().enumerate() {
            let mut e = [0.0; 6];
            e[k] = 1.0;
            let unit = ElasticTensor2D::from_entries(e);
            for (r, w) in gauss3x3() {
                let s = shape(r);
                let strains: Vec<Sym2> = (0..LOCAL_DOFS)
                    .map(|i| basis_strain(s.grad[i / 2], i % 2))
                    .collect();
                for i in 0..LOCAL_DOFS {
                    let si = unit.apply(&strains[i]);
                    for j in 0..LOCAL_DOFS {
                        m[i][j] += w * si.ddot(&strains[j]);
                    }
                }
            }
        }
        out
    })
}

/// Element stiffness matrix for tensor `c` (any square element).
pub fn element_stiffness(c: &ElasticTensor2D) -> LocalMatrix {
    let refs = reference_matrices();
    let e = c.entries();
    let mut k = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
    for (ek, rk) in e.iter().zip(refs.iter()) {
        if *ek == 0.0 {
            continue;
        }
        for i in 0..LOCAL_DOFS {
            for j in 0..LOCAL_DOFS {
                k[i][j] += ek * rk[i][j];
            }
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Free,
    /// Components with a homogeneous Dirichlet condition.
    Fixed([bool; 2]),
    /// Hanging node determined by its constraint.
    Hanging,
}

/// Linear combination of free unknowns.
type Expansion = Vec<(usize, f64)>;

/// Degree-of-freedom map, sparsity pattern and load vector of one mesh and scenario.
/// Reused across solves with different tensor fields.
pub struct Discretization<'a> {
    mesh: &'a QuadMesh,
    scenario: &'a Scenario,
    status: Vec<NodeStatus>,
    /// Expansion of each nodal component `2·n + c`.
    expansions: Vec<Expansion>,
    n_free: usize,
    pattern: Arc<SparsePattern>,
    load: Vec<f64>,
}

impl<'a> Discretization<'a> {
    pub fn new(mesh: &'a QuadMesh, scenario: &'a Scenario) -> Result<Self> {
        if mesh.domain() != scenario.domain {
            return Err(Error::InvalidInput(
                "mesh and scenario are defined on different domains".into(),
            ));
        }
        let nn = mesh.num_nodes();
        let mut status = vec![NodeStatus::Free; nn];
        for (n, st) in status.iter_mut().enumerate() {
            if mesh.node_constraint(n).is_some() {
                *st = NodeStatus::Hanging;
            } else {
                let fix = scenario.fixed_components(mesh.node_position(n));
                if fix[0] || fix[1] {
                    *st = NodeStatus::Fixed(fix);
                }
            }
        }
        let mut index = vec![usize::MAX; 2 * nn];
        let mut n_free = 0;
        for n in 0..nn {
            for c in 0..2 {
                let free = match status[n] {
                    NodeStatus::Free => true,
                    NodeStatus::Fixed(f) => !f[c],
                    NodeStatus::Hanging => false,
                };
                if free {
                    index[2 * n + c] = n_free;
                    n_free += 1;
                }
            }
        }
        let mut expansions: Vec<Option<Expansion>> = vec![None; 2 * nn];
        for n in 0..nn {
            for c in 0..2 {
                expand(mesh, &status, &index, n, c, &mut expansions, 0)?;
            }
        }
        let expansions: Vec<Expansion> = expansions.into_iter().map(Option::unwrap).collect();

        let mut entries = Vec::new();
        for k in 0..mesh.num_elements() {
            let dofs = element_free_dofs(mesh.element_nodes(k), &expansions);
            for &i in &dofs {
                for &j in &dofs {
                    if i > j {
                        entries.push((i, j));
                    }
                }
            }
        }
        let pattern = Arc::new(SparsePattern::new(n_free, entries));

        let mut disc = Self {
            mesh,
            scenario,
            status,
            expansions,
            n_free,
            pattern,
            load: Vec::new(),
        };
        disc.load = disc.assemble_load();
        Ok(disc)
    }

    pub fn mesh(&self) -> &'a QuadMesh {
        self.mesh
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn num_free_dofs(&self) -> usize {
        self.n_free
    }

    pub fn node_status(&self, n: usize) -> NodeStatus {
        self.status[n]
    }

    /// Load vector `l(φ_i)` over the free unknowns.
    pub fn load_vector(&self) -> &[f64] {
        &self.load
    }

    fn local_expansions(&self, k: usize) -> [&Expansion; LOCAL_DOFS] {
        let nodes = self.mesh.element_nodes(k);
        std::array::from_fn(|i| &self.expansions[2 * nodes[i / 2] + i % 2])
    }

    fn assemble_load(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_free];
        for k in 0..self.mesh.num_elements() {
            let id = self.mesh.elements()[k];
            let cell = self.mesh.cell(id);
            let exps = self.local_expansions(k);
            for side in Side::ALL {
                if self.mesh.side_neighbors(id, side) != SideNeighbors::Boundary {
                    continue;
                }
                let a = cell.to_physical(side.reference_point(0.0));
                let b = cell.to_physical(side.reference_point(1.0));
                for (t0, t1, g) in self.scenario.load_pieces(a, b) {
                    let len = cell.size() * (t1 - t0);
                    for (tq, wq) in GAUSS3_POINTS.iter().zip(GAUSS3_WEIGHTS) {
                        let t = t0 + (t1 - t0) * tq;
                        let s = shape(side.reference_point(t));
                        for i in 0..LOCAL_DOFS {
                            let v = len * wq * g[i % 2] * s.val[i / 2];
                            for &(d, w) in exps[i] {
                                f[d] += w * v;
                            }
                        }
                    }
                }
            }
        }
        f
    }

    /// Assembles the reduced stiffness matrix for the tensor field.
    pub fn stiffness(&self, c_field: &[ElasticTensor2D]) -> Result<SymmetricMatrix> {
        self.check_field(c_field)?;
        let mut m = SymmetricMatrix::zeros(self.pattern.clone());
        let pattern = self.pattern.clone();
        let values = m.values_mut();
        for (k, c) in c_field.iter().enumerate() {
            let ke = element_stiffness(c);
            let exps = self.local_expansions(k);
            for i in 0..LOCAL_DOFS {
                for j in 0..LOCAL_DOFS {
                    let kij = ke[i][j];
                    if kij == 0.0 {
                        continue;
                    }
                    for &(r, wr) in exps[i] {
                        for &(s, ws) in exps[j] {
                            if r >= s {
                                let slot = pattern.slot(r, s).expect("entry in pattern");
                                values[slot] += wr * ws * kij;
                            }
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    fn check_field(&self, c_field: &[ElasticTensor2D]) -> Result<()> {
        if c_field.len() != self.mesh.num_elements() {
            return Err(Error::InvalidInput(format!(
                "tensor field has {} entries for {} elements",
                c_field.len(),
                self.mesh.num_elements()
            )));
        }
        for (k, c) in c_field.iter().enumerate() {
            if !c.is_positive_definite() {
                return Err(Error::InvalidInput(format!(
                    "elasticity tensor of element {} is not positive definite (min eigenvalue {:.3e})",
                    self.mesh.elements()[k],
                    c.min_eigenvalue()
                )));
            }
        }
        Ok(())
    }

    /// Galerkin solution for the tensor field.
    pub fn solve(&self, c_field: &[ElasticTensor2D]) -> Result<DisplacementField> {
        let k = self.stiffness(c_field)?;
        let x = k.solve(&self.load, "macroscopic state equation")?;
        Ok(self.field_from_free(&x))
    }

    /// Nodal field of a vector of free unknowns.
    pub fn field_from_free(&self, x: &[f64]) -> DisplacementField {
        let nn = self.mesh.num_nodes();
        let nodal = (0..nn)
            .map(|n| {
                std::array::from_fn(|c| {
                    self.expansions[2 * n + c]
                        .iter()
                        .map(|&(d, w)| w * x[d])
                        .sum()
                })
            })
            .collect();
        DisplacementField {
            nodal,
            status: self.status.clone(),
        }
    }
}

fn expand(
    mesh: &QuadMesh,
    status: &[NodeStatus],
    index: &[usize],
    n: usize,
    c: usize,
    out: &mut Vec<Option<Expansion>>,
    depth: usize,
) -> Result<()> {
    if out[2 * n + c].is_some() {
        return Ok(());
    }
    if depth > 8 {
        return Err(Error::InvalidInput("cyclic hanging-node constraints".into()));
    }
    let e = match status[n] {
        NodeStatus::Free => vec![(index[2 * n + c], 1.0)],
        NodeStatus::Fixed(f) if f[c] => Vec::new(),
        NodeStatus::Fixed(_) => vec![(index[2 * n + c], 1.0)],
        NodeStatus::Hanging => {
            let con = *mesh.node_constraint(n).expect("hanging node has a constraint");
            let mut acc: Expansion = Vec::new();
            for (m, w) in con.masters {
                expand(mesh, status, index, m, c, out, depth + 1)?;
                for &(d, v) in out[2 * m + c].as_ref().unwrap() {
                    match acc.iter_mut().find(|(dd, _)| *dd == d) {
                        Some(entry) => entry.1 += w * v,
                        None => acc.push((d, w * v)),
                    }
                }
            }
            acc
        }
    };
    out[2 * n + c] = Some(e);
    Ok(())
}

fn element_free_dofs(nodes: &[usize; 9], expansions: &[Expansion]) -> Vec<usize> {
    let mut d: Vec<usize> = nodes
        .iter()
        .flat_map(|&n| (0..2).flat_map(move |c| expansions[2 * n + c].iter().map(|e| e.0)))
        .collect();
    d.sort_unstable();
    d.dedup();
    d
}

/// Galerkin solution of [`Discretization::solve`] convenience wrapper.
pub fn assemble_and_solve(
    mesh: &QuadMesh,
    c_field: &[ElasticTensor2D],
    scenario: &Scenario,
) -> Result<DisplacementField> {
    Discretization::new(mesh, scenario)?.solve(c_field)
}

/// Continuous Q2 displacement given by its values at all mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub nodal: Vec<[f64; 2]>,
    pub status: Vec<NodeStatus>,
}

impl DisplacementField {
    pub fn zeros(mesh: &QuadMesh) -> Self {
        Self {
            nodal: vec![[0.0; 2]; mesh.num_nodes()],
            status: vec![NodeStatus::Free; mesh.num_nodes()],
        }
    }

    /// Nodal interpolant of `f` (hanging nodes take their constrained values).
    pub fn interpolate(mesh: &QuadMesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut nodal: Vec<[f64; 2]> = (0..mesh.num_nodes())
            .map(|n| f(mesh.node_position(n)))
            .collect();
        for con in mesh.constraints() {
            nodal[con.node] = std::array::from_fn(|c| {
                con.masters.iter().map(|&(m, w)| w * nodal[m][c]).sum()
            });
        }
        Self {
            nodal,
            status: vec![NodeStatus::Free; mesh.num_nodes()],
        }
    }

    pub fn local(&self, mesh: &QuadMesh, k: usize) -> [[f64; 2]; 9] {
        let nodes = mesh.element_nodes(k);
        std::array::from_fn(|a| self.nodal[nodes[a]])
    }

    pub fn value(&self, mesh: &QuadMesh, k: usize, r: [f64; 2]) -> [f64; 2] {
        let u = self.local(mesh, k);
        let s = shape(r);
        let mut v = [0.0; 2];
        for a in 0..9 {
            v[0] += s.val[a] * u[a][0];
            v[1] += s.val[a] * u[a][1];
        }
        v
    }

    /// Value at a physical point, or `None` outside the domain.
    pub fn value_at(&self, mesh: &QuadMesh, p: [f64; 2]) -> Option<[f64; 2]> {
        let id = mesh.locate(p, p)?;
        let k = mesh.element_index(id)?;
        let r = mesh.cell(id).to_reference(p);
        Some(self.value(mesh, k, r))
    }

    /// Physical gradient `[∂x u, ∂y u]` per component.
    pub fn gradient(&self, mesh: &QuadMesh, k: usize, r: [f64; 2]) -> [[f64; 2]; 2] {
        let u = self.local(mesh, k);
        let s = shape(r);
        let h = mesh.element(k).size();
        let mut g = [[0.0; 2]; 2];
        for a in 0..9 {
            for c in 0..2 {
                g[c][0] += u[a][c] * s.grad[a][0] / h;
                g[c][1] += u[a][c] * s.grad[a][1] / h;
            }
        }
        g
    }

    pub fn strain(&self, mesh: &QuadMesh, k: usize, r: [f64; 2]) -> Sym2 {
        let g = self.gradient(mesh, k, r);
        Sym2::sym_of(g[0][0], g[0][1], g[1][0], g[1][1])
    }

    /// Physical second derivatives `[∂xx, ∂yy, ∂xy]` per component.
    pub fn hessian(&self, mesh: &QuadMesh, k: usize, r: [f64; 2]) -> [[f64; 3]; 2] {
        let u = self.local(mesh, k);
        let s = shape(r);
        let h = mesh.element(k).size();
        let h2 = h * h;
        let mut out = [[0.0; 3]; 2];
        for a in 0..9 {
            for c in 0..2 {
                for m in 0..3 {
                    out[c][m] += u[a][c] * s.hess[a][m] / h2;
                }
            }
        }
        out
    }

    pub fn stress(&self, mesh: &QuadMesh, c: &ElasticTensor2D, k: usize, r: [f64; 2]) -> Sym2 {
        c.apply(&self.strain(mesh, k, r))
    }

    pub fn max_abs(&self) -> f64 {
        self.nodal
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Per-element integrals `∫_E ε(u):E_k ε(v)` for the six unit tensors `E_k`.
/// For an element tensor `C` with entries `c_k`, `∫_E Cε(u):ε(v) = Σ c_k m_k`.
pub fn element_energy_moments(
    mesh: &QuadMesh,
    u: &DisplacementField,
    v: &DisplacementField,
) -> Vec<[f64; 6]> {
    let refs = reference_matrices();
    (0..mesh.num_elements())
        .map(|k| {
            let uf = flatten(&u.local(mesh, k));
            let vf = flatten(&v.local(mesh, k));
            std::array::from_fn(|e| {
                let m = &refs[e];
                let mut s = 0.0;
                for i in 0..LOCAL_DOFS {
                    if uf[i] == 0.0 {
                        continue;
                    }
                    let mut row = 0.0;
                    for j in 0..LOCAL_DOFS {
                        row += m[i][j] * vf[j];
                    }
                    s += uf[i] * row;
                }
                s
            })
        })
        .collect()
}

fn flatten(u: &[[f64; 2]; 9]) -> [f64; LOCAL_DOFS] {
    std::array::from_fn(|i| u[i / 2][i % 2])
}

/// Per-element contributions `∫_E Cε(u):ε(v)`.
pub fn element_energies(
    mesh: &QuadMesh,
    c_field: &[ElasticTensor2D],
    u: &DisplacementField,
    v: &DisplacementField,
) -> Vec<f64> {
    element_energy_moments(mesh, u, v)
        .iter()
        .zip(c_field)
        .map(|(m, c)| m.iter().zip(c.entries()).map(|(a, b)| a * b).sum())
        .collect()
}

/// `a(C; u, v)`.
pub fn energy_product(
    mesh: &QuadMesh,
    c_field: &[ElasticTensor2D],
    u: &DisplacementField,
    v: &DisplacementField,
) -> f64 {
    element_energies(mesh, c_field, u, v).iter().sum()
}

/// `l(u) = ∫_{Γ_N} g·u`, the compliance when `u` is the state.
pub fn compliance(mesh: &QuadMesh, u: &DisplacementField, scenario: &Scenario) -> f64 {
    let mut total = 0.0;
    for k in 0..mesh.num_elements() {
        let id = mesh.elements()[k];
        let cell = mesh.cell(id);
        for side in Side::ALL {
            if mesh.side_neighbors(id, side) != SideNeighbors::Boundary {
                continue;
            }
            let a = cell.to_physical(side.reference_point(0.0));
            let b = cell.to_physical(side.reference_point(1.0));
            for (t0, t1, g) in scenario.load_pieces(a, b) {
                let len = cell.size() * (t1 - t0);
                for (tq, wq) in GAUSS3_POINTS.iter().zip(GAUSS3_WEIGHTS) {
                    let v = u.value(mesh, k, side.reference_point(t0 + (t1 - t0) * tq));
                    total += len * wq * (g[0] * v[0] + g[1] * v[1]);
                }
            }
        }
    }
    total
}

/// `div(C ε(u))` on element `k` at reference point `r`, from second derivatives.
pub fn element_residual(
    mesh: &QuadMesh,
    c: &ElasticTensor2D,
    u: &DisplacementField,
    k: usize,
    r: [f64; 2],
) -> [f64; 2] {
    let h = u.hessian(mesh, k, r);
    // d2[comp][j][l] = ∂j ∂l u_comp
    let d2 = |comp: usize, j: usize, l: usize| -> f64 {
        match (j, l) {
            (0, 0) => h[comp][0],
            (1, 1) => h[comp][1],
            _ => h[comp][2],
        }
    };
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            for kk in 0..2 {
                for l in 0..2 {
                    *o += c.get(i, j, kk, l) * d2(kk, j, l);
                }
            }
        }
    }
    out
}

/// Normal-stress jump on side `side` of element `k` at side parameter `t ∈ [0, 1]`:
/// `½(σ_E − σ_E′)ν` on interior edges (`ν` outward from `E`), `σν − g` on free or
/// loaded boundary, zero in fixed components.
pub fn edge_jump(
    mesh: &QuadMesh,
    scenario: &Scenario,
    c_field: &[ElasticTensor2D],
    u: &DisplacementField,
    k: usize,
    side: Side,
    t: f64,
) -> [f64; 2] {
    let id = mesh.elements()[k];
    let cell = mesh.cell(id);
    let r = side.reference_point(t);
    let p = cell.to_physical(r);
    let nu = side.normal();
    let sig = u.stress(mesh, &c_field[k], k, r).mul_vec(nu);
    let neighbor = match mesh.side_neighbors(id, side) {
        SideNeighbors::Boundary => {
            let g = scenario.traction_at(p);
            let fix = scenario.fixed_components(p);
            return std::array::from_fn(|c| if fix[c] { 0.0 } else { sig[c] - g[c] });
        }
        SideNeighbors::Single(n) => n,
        SideNeighbors::Two([a, b]) => {
            if t < 0.5 {
                a
            } else {
                b
            }
        }
    };
    let kn = mesh.element_index(neighbor).expect("neighbor is a leaf");
    let rn = mesh.cell(neighbor).to_reference(p);
    let sig_n = u.stress(mesh, &c_field[kn], kn, rn).mul_vec(nu);
    [0.5 * (sig[0] - sig_n[0]), 0.5 * (sig[1] - sig_n[1])]
}

/// Plane von Mises stress `√(σ11² − σ11σ22 + σ22² + 3σ12²)`.
pub fn von_mises_of(s: &Sym2) -> f64 {
    (s.xx * s.xx - s.xx * s.yy + s.yy * s.yy + 3.0 * s.xy * s.xy)
        .max(0.0)
        .sqrt()
}

/// Von Mises stress at each element center.
pub fn von_mises(mesh: &QuadMesh, c_field: &[ElasticTensor2D], u: &DisplacementField) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|k| von_mises_of(&u.stress(mesh, &c_field[k], k, [0.5, 0.5])))
        .collect()
}

/// Element average of `C ε(u)` over the 3×3 Gauss points.
pub fn element_mean_stress(
    mesh: &QuadMesh,
    c: &ElasticTensor2D,
    u: &DisplacementField,
    k: usize,
) -> Sym2 {
    let mut acc = Sym2::ZERO;
    for (r, w) in gauss3x3() {
        acc += u.stress(mesh, c, k, r) * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySegment, Dirichlet, Domain, Load, ScenarioKind};

    fn iso() -> ElasticTensor2D {
        ElasticTensor2D::isotropic(1.0, 1.0)
    }

    fn compression(t: f64) -> Scenario {
        Scenario {
            kind: ScenarioKind::Custom,
            domain: Domain::UnitSquare,
            dirichlet: vec![
                Dirichlet {
                    segment: BoundarySegment::horizontal(0.0, 0.0, 1.0),
                    fix: [false, true],
                },
                Dirichlet {
                    segment: BoundarySegment::vertical(0.0, 0.0, 1.0),
                    fix: [true, false],
                },
            ],
            pins: vec![],
            loads: vec![Load {
                segment: BoundarySegment::horizontal(1.0, 0.0, 1.0),
                traction: [0.0, -t],
            }],
            volume_fraction: 0.5,
            initial_level: 1,
        }
    }

    #[test]
    fn reference_matrices_are_symmetric_with_rigid_kernel() {
        let k = element_stiffness(&iso());
        for i in 0..LOCAL_DOFS {
            for j in 0..LOCAL_DOFS {
                assert!((k[i][j] - k[j][i]).abs() < 1e-13);
            }
        }
        // translations and the infinitesimal rotation (-y, x) lie in the kernel
        let rot: [f64; LOCAL_DOFS] = std::array::from_fn(|i| {
            let a = i / 2;
            let (x, y) = ((a % 3) as f64 / 2.0, (a / 3) as f64 / 2.0);
            if i % 2 == 0 {
                -y
            } else {
                x
            }
        });
        for i in 0..LOCAL_DOFS {
            let r: f64 = (0..LOCAL_DOFS).map(|j| k[i][j] * rot[j]).sum();
            let tx: f64 = (0..LOCAL_DOFS).step_by(2).map(|j| k[i][j]).sum();
            assert!(r.abs() < 1e-12 && tx.abs() < 1e-12);
        }
    }

    #[test]
    fn patch_test_uniaxial_compression() {
        // rollers on left and bottom, σ22 = −t: u = (t λ/(4μ(λ+μ)) x, −t(λ+2μ)/(4μ(λ+μ)) y)
        let (lam, mu, t) = (1.0, 1.0, 0.7);
        let s = compression(t);
        for level in [1, 2] {
            let mesh = QuadMesh::uniform(Domain::UnitSquare, level).unwrap();
            let c = vec![iso(); mesh.num_elements()];
            let u = assemble_and_solve(&mesh, &c, &s).unwrap();
            let ex = t * lam / (4.0 * mu * (lam + mu));
            let ey = -t * (lam + 2.0 * mu) / (4.0 * mu * (lam + mu));
            for n in 0..mesh.num_nodes() {
                let p = mesh.node_position(n);
                assert!((u.nodal[n][0] - ex * p[0]).abs() < 1e-12);
                assert!((u.nodal[n][1] - ey * p[1]).abs() < 1e-12);
            }
            // compliance = t * |u_y(top)| = t² (λ+2μ)/(4μ(λ+μ))
            let j = compliance(&mesh, &u, &s);
            assert!((j - t * t * (lam + 2.0 * mu) / (4.0 * mu * (lam + mu))).abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_identity_on_carrier() {
        let s = Scenario::carrier();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 2).unwrap();
        let mesh = mesh.refine(&[mesh.elements()[5], mesh.elements()[6]]).unwrap();
        let c: Vec<_> = (0..mesh.num_elements())
            .map(|k| iso().rotated(0.1 * k as f64) * (1.0 + (k % 3) as f64))
            .collect();
        let u = assemble_and_solve(&mesh, &c, &s).unwrap();
        let l = compliance(&mesh, &u, &s);
        let a = energy_product(&mesh, &c, &u, &u);
        assert!(l > 0.0);
        assert!((l - a).abs() <= 1e-10 * l.abs());
    }

    #[test]
    fn hanging_nodes_satisfy_constraints() {
        let s = Scenario::carrier();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 2).unwrap();
        let mesh = mesh.refine(&[mesh.elements()[5]]).unwrap();
        assert!(!mesh.constraints().is_empty());
        let c = vec![iso(); mesh.num_elements()];
        let u = assemble_and_solve(&mesh, &c, &s).unwrap();
        for con in mesh.constraints() {
            for comp in 0..2 {
                let v: f64 = con.masters.iter().map(|&(m, w)| w * u.nodal[m][comp]).sum();
                assert!((u.nodal[con.node][comp] - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_load_gives_zero_compliance() {
        let mut s = Scenario::carrier();
        s.loads.clear();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let c = vec![iso(); mesh.num_elements()];
        let u = assemble_and_solve(&mesh, &c, &s).unwrap();
        assert_eq!(compliance(&mesh, &u, &s), 0.0);
    }

    #[test]
    fn missing_support_is_a_solver_failure() {
        let mut s = Scenario::carrier();
        s.dirichlet.clear();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let c = vec![iso(); mesh.num_elements()];
        assert!(matches!(
            assemble_and_solve(&mesh, &c, &s),
            Err(Error::Solver { .. })
        ));
    }

    #[test]
    fn non_elliptic_tensor_rejected() {
        let s = Scenario::carrier();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let mut c = vec![iso(); mesh.num_elements()];
        c[2] = ElasticTensor2D::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            assemble_and_solve(&mesh, &c, &s),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn linear_field_has_no_residual_or_interior_jump() {
        let s = Scenario::carrier();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 2).unwrap();
        let mesh = mesh.refine(&[mesh.elements()[0]]).unwrap();
        let c = vec![iso().rotated(0.3); mesh.num_elements()];
        let u = DisplacementField::interpolate(&mesh, |p| [0.3 * p[0] - 0.2 * p[1], 0.5 * p[1] + 0.1 * p[0]]);
        for k in 0..mesh.num_elements() {
            let r = element_residual(&mesh, &c[k], &u, k, [0.3, 0.7]);
            assert!(r[0].abs() < 1e-11 && r[1].abs() < 1e-11);
            let id = mesh.elements()[k];
            for side in Side::ALL {
                if mesh.side_neighbors(id, side) == SideNeighbors::Boundary {
                    continue;
                }
                for t in [0.1, 0.5, 0.8] {
                    let j = edge_jump(&mesh, &s, &c, &u, k, side, t);
                    assert!(j[0].abs() < 1e-12 && j[1].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jump_between_different_tensors() {
        // two-element strip split at x = 0.5: tensors C (left) and 2C (right)
        let s = Scenario::carrier();
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let eps = Sym2::new(0.2, -0.1, 0.05);
        let u = DisplacementField::interpolate(&mesh, |p| {
            [eps.xx * p[0] + eps.xy * p[1], eps.xy * p[0] + eps.yy * p[1]]
        });
        let c: Vec<_> = (0..mesh.num_elements())
            .map(|k| {
                if mesh.element(k).corner()[0] < 0.25 {
                    iso()
                } else {
                    iso() * 2.0
                }
            })
            .collect();
        let k = (0..mesh.num_elements())
            .find(|&k| mesh.element(k).corner() == [0.0, 0.0])
            .unwrap();
        let j = edge_jump(&mesh, &s, &c, &u, k, Side::Right, 0.4);
        // ½(σ − 2σ)ν = −½ Cε ν with ν = (1, 0)
        let expect = iso().apply(&eps).mul_vec([1.0, 0.0]);
        assert!((j[0] + 0.5 * expect[0]).abs() < 1e-13);
        assert!((j[1] + 0.5 * expect[1]).abs() < 1e-13);
    }

    #[test]
    fn neumann_jump_vanishes_for_matching_traction() {
        let t = 0.7;
        let s = compression(t);
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let c = vec![iso(); mesh.num_elements()];
        let u = assemble_and_solve(&mesh, &c, &s).unwrap();
        for k in 0..mesh.num_elements() {
            let id = mesh.elements()[k];
            for side in Side::ALL {
                if mesh.side_neighbors(id, side) != SideNeighbors::Boundary {
                    continue;
                }
                let j = edge_jump(&mesh, &s, &c, &u, k, side, 0.3);
                assert!(j[0].abs() < 1e-11 && j[1].abs() < 1e-11, "{j:?}");
            }
        }
    }

    #[test]
    fn von_mises_reference_values() {
        assert_eq!(von_mises_of(&Sym2::ZERO), 0.0);
        assert!((von_mises_of(&Sym2::new(2.5, 0.0, 0.0)) - 2.5).abs() < 1e-15);
        // σ = pI: √(p² − p² + p²) = |p|
        assert!((von_mises_of(&Sym2::new(-3.0, -3.0, 0.0)) - 3.0).abs() < 1e-15);
        assert!((von_mises_of(&Sym2::new(0.0, 0.0, 1.0)) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rigid_translation_has_no_energy() {
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 2).unwrap();
        let c = vec![iso(); mesh.num_elements()];
        let u = DisplacementField::interpolate(&mesh, |_| [0.3, -1.2]);
        assert!(energy_product(&mesh, &c, &u, &u).abs() < 1e-13);
    }

    #[test]
    fn homogeneous_compliance_increases_under_refinement() {
        // the discrete solution is too stiff, so l(u_h) = a(u_h, u_h) grows towards l(u)
        let s = Scenario::carrier();
        let mut mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let mut prev = 0.0;
        for _ in 0..3 {
            let c = vec![iso(); mesh.num_elements()];
            let u = assemble_and_solve(&mesh, &c, &s).unwrap();
            let j = compliance(&mesh, &u, &s);
            assert!(j > prev);
            prev = j;
            mesh = mesh.refine_uniform().unwrap();
        }
    }
}
