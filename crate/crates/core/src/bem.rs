//! Collocation boundary elements for the perforated cell with a void hole.
//!
//! Displacements and tractions are piecewise linear on straight panels;
//! collocation points are the panel endpoints, including corners. All panel
//! integrals of the Kelvin solution and its traction kernel are evaluated in
//! closed form. Free terms (and the strongly singular self contributions) come
//! from the rigid-body identity `Σ_j H_ij = 0`. On the outer square the
//! displacement is periodic and the traction antiperiodic; on the hole the
//! total traction vanishes, so `A ε(w) ν = −A ξ ν` is known there.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::tensor::{ElasticTensor2D, IsotropicMaterial, Sym2};
use crate::{Error, Result};

pub type Block = [[f64; 2]; 2];

/// Kelvin fundamental solution `u*_ki(p, q)` (plane strain).
pub fn kelvin(p: [f64; 2], q: [f64; 2], mat: &IsotropicMaterial) -> Result<Block> {
    let d = [q[0] - p[0], q[1] - p[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    if r2 == 0.0 {
        return Err(Error::InvalidInput("coincident points in fundamental solution".into()));
    }
    let (lam, mu) = (mat.lambda, mat.mu);
    let pre = (lam + mu) / (4.0 * PI * mu * (lam + 2.0 * mu));
    let c1 = (lam + 3.0 * mu) / (lam + mu);
    let log_r = 0.5 * r2.ln();
    Ok(std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            let diag = if k == i { -c1 * log_r } else { 0.0 };
            pre * (diag + d[k] * d[i] / r2)
        })
    }))
}

/// Traction kernel `T*_lk(x, y)`: traction at `y` (normal `n`) of the Kelvin
/// field of a unit load in direction `l` at `x`.
pub fn traction_kernel(x: [f64; 2], y: [f64; 2], n: [f64; 2], mat: &IsotropicMaterial) -> Block {
    let nu = mat.poisson();
    let r = [y[0] - x[0], y[1] - x[1]];
    let r2 = r[0] * r[0] + r[1] * r[1];
    let rn = r[0] * n[0] + r[1] * n[1];
    let ct = 1.0 / (4.0 * PI * (1.0 - nu));
    let a = 1.0 - 2.0 * nu;
    std::array::from_fn(|l| {
        std::array::from_fn(|k| {
            let d = if l == k { 1.0 } else { 0.0 };
            -ct * (rn / r2 * (a * d + 2.0 * r[l] * r[k] / r2) - a * (r[l] * n[k] - r[k] * n[l]) / r2)
        })
    })
}

/// Single- and double-layer integrals over one panel against the two linear
/// shape functions (index 0 at the panel start, 1 at its end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBlocks {
    pub single: [Block; 2],
    pub double: [Block; 2],
}

/// `½ log(τ² + h²)` with the finite-part convention `0` at `r = 0`.
fn half_log(r2: f64) -> f64 {
    if r2 > 0.0 {
        0.5 * r2.ln()
    } else {
        0.0
    }
}

/// Antiderivatives in the panel frame at `τ` for offset `h` (`h = 0` exactly
/// on the panel line). Returns local moments `[k0, k1]` for each quantity.
struct Antiderivatives {
    /// ∫ ½ log r², ∫ τ ½ log r²
    log: [f64; 2],
    /// ∫ τ²/r², ∫ τ³/r²
    tt: [f64; 2],
    /// ∫ h²/r², ∫ τ h²/r²
    nn: [f64; 2],
    /// ∫ −hτ/r², ∫ −hτ²/r²
    tn: [f64; 2],
    /// double-layer local components, moments 0 and 1, without the constant factor
    dtt: [f64; 2],
    dnn: [f64; 2],
    dtn: [f64; 2],
    dnt: [f64; 2],
}

fn antiderivatives(t: f64, h: f64, nu: f64) -> Antiderivatives {
    let r2 = t * t + h * h;
    let hl = half_log(r2);
    let a = 1.0 - 2.0 * nu;
    if h == 0.0 {
        // on the panel line: terms carrying a factor h vanish
        let a1 = hl; // ∫ τ/r² = ½ log r², finite part at τ = 0
        let a2 = t;
        return Antiderivatives {
            log: [t * hl - t, 0.5 * r2 * hl - 0.25 * t * t],
            tt: [t, 0.5 * t * t],
            nn: [0.0, 0.0],
            tn: [0.0, 0.0],
            dtt: [0.0, 0.0],
            dnn: [0.0, 0.0],
            dtn: [a * a1, a * a2],
            dnt: [-a * a1, -a * a2],
        };
    }
    let at = (t / h).atan();
    let a1 = hl;
    let a2 = t - h * at;
    let a3 = 0.5 * t * t - h * h * hl;
    let h_a0 = at;
    let h_a1 = h * hl;
    let h_b2 = -h * t / (2.0 * r2) + 0.5 * at;
    let h_b3 = h * hl + h * h * h / (2.0 * r2);
    let h3_b0 = h * t / (2.0 * r2) + 0.5 * at;
    let h3_b1 = -h * h * h / (2.0 * r2);
    let h2_b1 = -h * h / (2.0 * r2);
    let h2_b2 = -h * h * t / (2.0 * r2) + 0.5 * h * at;
    Antiderivatives {
        log: [t * hl - t + h * at, 0.5 * r2 * hl - 0.25 * t * t],
        tt: [a2, a3],
        nn: [h * at, h * h * a1],
        tn: [-h * a1, -h * a2],
        dtt: [a * h_a0 + 2.0 * h_b2, a * h_a1 + 2.0 * h_b3],
        dnn: [a * h_a0 + 2.0 * h3_b0, a * h_a1 + 2.0 * h3_b1],
        dtn: [-(2.0 * h2_b1 - a * a1), -(2.0 * h2_b2 - a * a2)],
        dnt: [-(2.0 * h2_b1 + a * a1), -(2.0 * h2_b2 + a * a2)],
    }
}

/// Closed-form layer integrals over the panel `p0 → p1` for collocation point `x`.
/// The normal is the right-hand normal of the panel direction (outward when the
/// domain lies to the left). Strongly singular contributions use the finite part.
pub fn layer_integrals(
    p0: [f64; 2],
    p1: [f64; 2],
    x: [f64; 2],
    mat: &IsotropicMaterial,
) -> Result<LayerBlocks> {
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return Err(Error::InvalidInput("zero-length boundary panel".into()));
    }
    let t = [d[0] / len, d[1] / len];
    let n = [t[1], -t[0]];
    let rel = [x[0] - p0[0], x[1] - p0[1]];
    let tau0 = rel[0] * t[0] + rel[1] * t[1];
    let mut h = rel[0] * n[0] + rel[1] * n[1];
    if h.abs() < 1e-13 * len {
        h = 0.0;
    }
    let nu = mat.poisson();
    let (lam, mu) = (mat.lambda, mat.mu);
    let ku = (lam + mu) / (4.0 * PI * mu * (lam + 2.0 * mu));
    let c1 = (lam + 3.0 * mu) / (lam + mu);
    let ct = 1.0 / (4.0 * PI * (1.0 - nu));

    let fa = antiderivatives(-tau0, h, nu);
    let fb = antiderivatives(len - tau0, h, nu);
    let diff = |sel: fn(&Antiderivatives) -> [f64; 2]| -> [f64; 2] {
        let (b, a) = (sel(&fb), sel(&fa));
        [b[0] - a[0], b[1] - a[1]]
    };
    let log = diff(|v| v.log);
    let tt = diff(|v| v.tt);
    let nn = diff(|v| v.nn);
    let tn = diff(|v| v.tn);
    let dtt = diff(|v| v.dtt);
    let dnn = diff(|v| v.dnn);
    let dtn = diff(|v| v.dtn);
    let dnt = diff(|v| v.dnt);

    // local blocks for moments m = 0, 1 (basis t, n)
    let single_m: [Block; 2] = std::array::from_fn(|m| {
        [
            [ku * (-c1 * log[m] + tt[m]), ku * tn[m]],
            [ku * tn[m], ku * (-c1 * log[m] + nn[m])],
        ]
    });
    let double_m: [Block; 2] = std::array::from_fn(|m| {
        [[ct * dtt[m], ct * dtn[m]], [ct * dnt[m], ct * dnn[m]]]
    });
    // shape functions φ0 = (L − τ0 − τ)/L, φ1 = (τ0 + τ)/L
    let combine = |mm: &[Block; 2]| -> [Block; 2] {
        let phi0: Block = std::array::from_fn(|i| {
            std::array::from_fn(|j| ((len - tau0) * mm[0][i][j] - mm[1][i][j]) / len)
        });
        let phi1: Block =
            std::array::from_fn(|i| std::array::from_fn(|j| (tau0 * mm[0][i][j] + mm[1][i][j]) / len));
        [to_global(&phi0, t, n), to_global(&phi1, t, n)]
    };
    Ok(LayerBlocks {
        single: combine(&single_m),
        double: combine(&double_m),
    })
}

fn to_global(m: &Block, t: [f64; 2], n: [f64; 2]) -> Block {
    let p = [[t[0], n[0]], [t[1], n[1]]];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += p[i][a] * m[a][b] * p[j][b];
                }
            }
            s
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    Bottom,
    Right,
    Top,
    Left,
    Hole,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: usize,
    b: usize,
    edge: Edge,
}

/// Boundary of the perforated cell: the outer square (counter-clockwise) and
/// the hole rectangle (clockwise), so the hard phase lies to the left.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub nodes: Vec<[f64; 2]>,
    /// Number of nodes on the outer loop; hole nodes follow.
    pub outer_nodes: usize,
    /// Lattice coordinates `(i, j) ∈ [0, n]²` of the outer nodes.
    lattice: Vec<(usize, usize)>,
    panels: Vec<Panel>,
    n: usize,
}

impl BoundaryMesh {
    /// Cell with bar widths `(δ1, δ2)`, `panels_per_edge` panels on each outer
    /// edge, rotated by `alpha` about the origin.
    pub fn new(delta1: f64, delta2: f64, panels_per_edge: usize, alpha: f64) -> Result<Self> {
        let n = panels_per_edge;
        if n < 2 {
            return Err(Error::InvalidInput("need at least 2 panels per edge".into()));
        }
        if !(delta1 > 0.0 && delta1 < 1.0 && delta2 > 0.0 && delta2 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "bar widths ({delta1}, {delta2}) must lie in (0, 1) for a perforated cell"
            )));
        }
        let mut nodes = Vec::new();
        let mut lattice = Vec::new();
        for j in 0..n {
            lattice.push((j, 0));
        }
        for j in 0..n {
            lattice.push((n, j));
        }
        for j in 0..n {
            lattice.push((n - j, n));
        }
        for j in 0..n {
            lattice.push((0, n - j));
        }
        for &(i, j) in &lattice {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
        let mut panels = Vec::new();
        let edges = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];
        for k in 0..4 * n {
            panels.push(Panel {
                a: k,
                b: (k + 1) % (4 * n),
                edge: edges[k / n],
            });
        }
        let outer_nodes = nodes.len();

        let (x0, x1) = (0.5 * delta1, 1.0 - 0.5 * delta1);
        let (y0, y1) = (0.5 * delta2, 1.0 - 0.5 * delta2);
        let mh = ((n as f64 * (x1 - x0)).round() as usize).max(2);
        let mv = ((n as f64 * (y1 - y0)).round() as usize).max(2);
        let corners = [[x0, y0], [x0, y1], [x1, y1], [x1, y0]];
        let counts = [mv, mh, mv, mh];
        let start = nodes.len();
        for e in 0..4 {
            let (c, d) = (corners[e], corners[(e + 1) % 4]);
            for k in 0..counts[e] {
                let s = k as f64 / counts[e] as f64;
                nodes.push([c[0] + s * (d[0] - c[0]), c[1] + s * (d[1] - c[1])]);
            }
        }
        let hole = nodes.len() - start;
        for k in 0..hole {
            panels.push(Panel {
                a: start + k,
                b: start + (k + 1) % hole,
                edge: Edge::Hole,
            });
        }
        if alpha != 0.0 {
            let (s, c) = alpha.sin_cos();
            for p in &mut nodes {
                *p = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
            }
        }
        Ok(Self {
            nodes,
            outer_nodes,
            lattice,
            panels,
            n,
        })
    }

    pub fn num_panels(&self) -> usize {
        self.panels.len()
    }

    fn panel_normal(&self, p: &Panel) -> ([f64; 2], f64) {
        let (a, b) = (self.nodes[p.a], self.nodes[p.b]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        ([d[1] / len, -d[0] / len], len)
    }

    /// Area of the hard phase.
    pub fn hard_area(&self) -> f64 {
        // shoelace over both loops (hole is clockwise, so it subtracts)
        self.panels
            .iter()
            .map(|p| {
                let (a, b) = (self.nodes[p.a], self.nodes[p.b]);
                0.5 * (a[0] * b[1] - b[0] * a[1])
            })
            .sum()
    }
}

/// Boundary data and energy of one cell solve.
#[derive(Debug, Clone)]
pub struct BemSolution {
    /// Displacement corrector at every boundary node.
    pub w: Vec<[f64; 2]>,
    /// Traction `A ε(w) ν` at the start and end of every panel.
    pub traction: Vec<[[f64; 2]; 2]>,
    /// `C* ξ : ξ`.
    pub energy: f64,
    /// Relative least-squares residual of the collocation system.
    pub residual: f64,
}

/// Assembled and factorized collocation system of one cell geometry.
pub struct BemCell {
    mesh: BoundaryMesh,
    mat: IsotropicMaterial,
    matrix: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Summed single-layer blocks of each hole panel per collocation node.
    hole_single: Vec<Vec<Block>>,
    n_unknown_nodes: usize,
}

/// Unknown index of each kind of boundary value.
struct Layout {
    n: usize,
    hole_start: usize,
    outer_nodes: usize,
}

impl Layout {
    fn w_outer(&self, (i, j): (usize, usize)) -> usize {
        let (i, j) = (i % self.n, j % self.n);
        if j == 0 {
            i
        } else {
            debug_assert_eq!(i, 0);
            self.n + j - 1
        }
    }

    fn w(&self, mesh: &BoundaryMesh, g: usize) -> usize {
        if g < self.outer_nodes {
            self.w_outer(mesh.lattice[g])
        } else {
            self.hole_start + g - self.outer_nodes
        }
    }

    /// Unknown traction slot and sign of outer panel end at lattice point `(i, j)`.
    fn t_outer(&self, edge: Edge, (i, j): (usize, usize)) -> (usize, f64) {
        let tb = 2 * self.n - 1;
        let tl = 3 * self.n - 1;
        match edge {
            Edge::Bottom => (tb + i % self.n, 1.0),
            Edge::Top => (tb + i % self.n, -1.0),
            Edge::Left => (tl + j % self.n, 1.0),
            Edge::Right => (tl + j % self.n, -1.0),
            Edge::Hole => unreachable!(),
        }
    }
}

impl BemCell {
    pub fn new(
        delta1: f64,
        delta2: f64,
        mat: IsotropicMaterial,
        panels_per_edge: usize,
        alpha: f64,
    ) -> Result<Self> {
        let mesh = BoundaryMesh::new(delta1, delta2, panels_per_edge, alpha)?;
        let g_nodes = mesh.nodes.len();
        let layout = Layout {
            n: mesh.n,
            hole_start: 4 * mesh.n - 1,
            outer_nodes: mesh.outer_nodes,
        };
        let n_unknown_nodes = layout.hole_start + g_nodes - mesh.outer_nodes;
        let rows = 2 * g_nodes + 2;
        let cols = 2 * n_unknown_nodes;
        let mut matrix = DMatrix::<f64>::zeros(rows, cols);
        let hole_panels: Vec<usize> = (0..mesh.panels.len())
            .filter(|&k| mesh.panels[k].edge == Edge::Hole)
            .collect();
        let mut hole_single = vec![vec![[[0.0; 2]; 2]; hole_panels.len()]; g_nodes];

        for i in 0..g_nodes {
            let x = mesh.nodes[i];
            // geometric double-layer row, diagonal from the rigid-body identity
            let mut h_row = vec![[[0.0; 2]; 2]; g_nodes];
            let mut hp = 0;
            for p in &mesh.panels {
                let blocks = layer_integrals(mesh.nodes[p.a], mesh.nodes[p.b], x, &mat)?;
                for (e, g) in [p.a, p.b].into_iter().enumerate() {
                    if g != i {
                        add_block(&mut h_row[g], &blocks.double[e], 1.0);
                    }
                }
                if p.edge == Edge::Hole {
                    let mut s = blocks.single[0];
                    add_block(&mut s, &blocks.single[1], 1.0);
                    hole_single[i][hp] = s;
                    hp += 1;
                } else {
                    for (e, g) in [p.a, p.b].into_iter().enumerate() {
                        let (slot, sign) = layout.t_outer(p.edge, mesh.lattice[g]);
                        for r in 0..2 {
                            for c in 0..2 {
                                matrix[(2 * i + r, 2 * slot + c)] -= sign * blocks.single[e][r][c];
                            }
                        }
                    }
                }
            }
            let mut diag = [[0.0; 2]; 2];
            for (g, b) in h_row.iter().enumerate() {
                if g != i {
                    add_block(&mut diag, b, -1.0);
                }
            }
            h_row[i] = diag;
            for (g, b) in h_row.iter().enumerate() {
                let u = layout.w(&mesh, g);
                for r in 0..2 {
                    for c in 0..2 {
                        matrix[(2 * i + r, 2 * u + c)] += b[r][c];
                    }
                }
            }
        }
        // gauge rows: mean of the displacement unknowns vanishes
        let w_slots: Vec<usize> = (0..layout.hole_start - 2 * mesh.n + 1)
            .chain(layout.hole_start..n_unknown_nodes)
            .collect();
        let gw = 1.0 / mesh.n as f64;
        for &u in &w_slots {
            for c in 0..2 {
                matrix[(2 * g_nodes + c, 2 * u + c)] = gw;
            }
        }
        let svd = matrix.clone().svd(true, true);
        Ok(Self {
            mesh,
            mat,
            matrix,
            svd,
            hole_single,
            n_unknown_nodes,
        })
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn solve(&self, xi: &Sym2) -> Result<BemSolution> {
        let mesh = &self.mesh;
        let a = self.mat.tensor();
        let sxi = a.apply(xi);
        let g_nodes = mesh.nodes.len();
        let hole_panels: Vec<&Panel> = mesh.panels.iter().filter(|p| p.edge == Edge::Hole).collect();
        let loads: Vec<[f64; 2]> = hole_panels
            .iter()
            .map(|p| {
                let (nrm, _) = mesh.panel_normal(p);
                let t = sxi.mul_vec(nrm);
                [-t[0], -t[1]]
            })
            .collect();
        let mut rhs = DVector::<f64>::zeros(2 * g_nodes + 2);
        for i in 0..g_nodes {
            for (k, load) in loads.iter().enumerate() {
                let s = &self.hole_single[i][k];
                for r in 0..2 {
                    rhs[2 * i + r] += s[r][0] * load[0] + s[r][1] * load[1];
                }
            }
        }
        let x = self
            .svd
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::Solver {
                context: "boundary element cell problem".into(),
                detail: e.to_string(),
            })?;
        let res = &self.matrix * &x - &rhs;
        let bn = rhs.norm();
        let residual = if bn > 0.0 { res.norm() / bn } else { res.norm() };

        let layout = Layout {
            n: mesh.n,
            hole_start: 4 * mesh.n - 1,
            outer_nodes: mesh.outer_nodes,
        };
        debug_assert_eq!(x.len(), 2 * self.n_unknown_nodes);
        let w: Vec<[f64; 2]> = (0..g_nodes)
            .map(|g| {
                let u = layout.w(mesh, g);
                [x[2 * u], x[2 * u + 1]]
            })
            .collect();
        let mut hk = 0;
        let traction = mesh
            .panels
            .iter()
            .map(|p| {
                if p.edge == Edge::Hole {
                    hk += 1;
                    [loads[hk - 1]; 2]
                } else {
                    std::array::from_fn(|e| {
                        let g = if e == 0 { p.a } else { p.b };
                        let (slot, sign) = layout.t_outer(p.edge, mesh.lattice[g]);
                        [sign * x[2 * slot], sign * x[2 * slot + 1]]
                    })
                }
            })
            .collect();

        let mut energy = mesh.hard_area() * a.energy(xi);
        for p in &hole_panels {
            let (nrm, len) = mesh.panel_normal(p);
            let f = sxi.mul_vec(nrm);
            let (wa, wb) = (w[p.a], w[p.b]);
            energy += 0.5 * len * ((wa[0] + wb[0]) * f[0] + (wa[1] + wb[1]) * f[1]);
        }
        Ok(BemSolution {
            w,
            traction,
            energy,
            residual,
        })
    }

    /// Effective tensor by polarization of `C*ξ:ξ` over the unit strains.
    pub fn effective_tensor(&self) -> Result<ElasticTensor2D> {
        let xis = [
            Sym2::new(1.0, 0.0, 0.0),
            Sym2::new(0.0, 1.0, 0.0),
            Sym2::new(0.0, 0.0, 0.5),
        ];
        let e = |x: &Sym2| self.solve(x).map(|s| s.energy);
        let d: Vec<f64> = xis.iter().map(e).collect::<Result<_>>()?;
        let pol = |a: usize, b: usize| -> Result<f64> {
            Ok(0.5 * (e(&(xis[a] + xis[b]))? - d[a] - d[b]))
        };
        Ok(ElasticTensor2D::new(
            d[0],
            d[1],
            pol(0, 1)?,
            d[2],
            pol(0, 2)?,
            pol(1, 2)?,
        ))
    }

    /// Writes `x,y,w1,w2` rows for every boundary node.
    pub fn write_boundary_csv<W: Write>(&self, mut out: W, sol: &BemSolution) -> Result<()> {
        writeln!(out, "x,y,w1,w2")?;
        for (p, w) in self.mesh.nodes.iter().zip(&sol.w) {
            writeln!(out, "{},{},{:.12e},{:.12e}", p[0], p[1], w[0], w[1])?;
        }
        Ok(())
    }
}

fn add_block(acc: &mut Block, b: &Block, s: f64) {
    for r in 0..2 {
        for c in 0..2 {
            acc[r][c] += s * b[r][c];
        }
    }
}

/// `C*ξ:ξ` of the perforated cell for one strain.
pub fn solve_cell_bem(
    delta1: f64,
    delta2: f64,
    xi: &Sym2,
    mat: IsotropicMaterial,
    panels_per_edge: usize,
) -> Result<BemSolution> {
    BemCell::new(delta1, delta2, mat, panels_per_edge, 0.0)?.solve(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{GAUSS3_POINTS, GAUSS3_WEIGHTS};

    fn unit() -> IsotropicMaterial {
        IsotropicMaterial::unit()
    }

    /// Composite 3-point Gauss quadrature of `f` over the panel against φ0, φ1.
    fn quad_panel(p0: [f64; 2], p1: [f64; 2], sub: usize, f: impl Fn([f64; 2]) -> Block) -> [Block; 2] {
        let len = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..sub {
            for (g, w) in GAUSS3_POINTS.iter().zip(GAUSS3_WEIGHTS) {
                let s = (k as f64 + g) / sub as f64;
                let y = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                let v = f(y);
                let wt = w * len / sub as f64;
                for r in 0..2 {
                    for c in 0..2 {
                        out[0][r][c] += wt * (1.0 - s) * v[r][c];
                        out[1][r][c] += wt * s * v[r][c];
                    }
                }
            }
        }
        out
    }

    fn close(a: &Block, b: &Block, tol: f64) -> bool {
        (0..2).all(|r| (0..2).all(|c| (a[r][c] - b[r][c]).abs() <= tol))
    }

    #[test]
    fn kelvin_reference_entry() {
        let u = kelvin([0.0, 0.0], [1.0, 0.0], &unit()).unwrap();
        assert!((u[0][0] - 1.0 / (6.0 * PI)).abs() < 1e-15);
        assert_eq!(u[0][1], 0.0);
        assert!(kelvin([0.5, 0.5], [0.5, 0.5], &unit()).is_err());
    }

    #[test]
    fn kelvin_symmetry_and_scaling() {
        let m = IsotropicMaterial::new(0.7, 1.3).unwrap();
        let (p, q) = ([0.1, -0.3], [0.8, 0.45]);
        let a = kelvin(p, q, &m).unwrap();
        let b = kelvin(q, p, &m).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((a[r][c] - b[c][r]).abs() < 1e-15);
            }
        }
        let s = 3.0;
        let c = kelvin([s * p[0], s * p[1]], [s * q[0], s * q[1]], &m).unwrap();
        let pre = (m.lambda + m.mu) / (4.0 * PI * m.mu * (m.lambda + 2.0 * m.mu));
        let c1 = (m.lambda + 3.0 * m.mu) / (m.lambda + m.mu);
        for r in 0..2 {
            for k in 0..2 {
                let shift = if r == k { -pre * c1 * s.ln() } else { 0.0 };
                assert!((c[r][k] - a[r][k] - shift).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn layer_integrals_match_quadrature_off_panel() {
        let m = IsotropicMaterial::new(1.0, 1.0).unwrap();
        let (p0, p1) = ([0.2, 0.1], [0.5, 0.4]);
        for x in [[2.0, -1.0], [0.3, 0.35], [0.9, 0.8], [0.1, 0.0]] {
            let blocks = layer_integrals(p0, p1, x, &m).unwrap();
            let d = [p1[0] - p0[0], p1[1] - p0[1]];
            let len = d[0].hypot(d[1]);
            let n = [d[1] / len, -d[0] / len];
            let su = quad_panel(p0, p1, 4000, |y| kelvin(x, y, &m).unwrap());
            let dl = quad_panel(p0, p1, 4000, |y| traction_kernel(x, y, n, &m));
            for e in 0..2 {
                assert!(close(&blocks.single[e], &su[e], 1e-10), "{x:?} {:?} {:?}", blocks.single[e], su[e]);
                assert!(close(&blocks.double[e], &dl[e], 1e-10), "{x:?} {:?} {:?}", blocks.double[e], dl[e]);
            }
        }
    }

    #[test]
    fn layer_integrals_translation_invariant() {
        let m = unit();
        let s = [0.37, -1.2];
        let a = layer_integrals([0.0, 0.0], [0.3, 0.1], [0.4, 0.5], &m).unwrap();
        let b = layer_integrals([s[0], s[1]], [0.3 + s[0], 0.1 + s[1]], [0.4 + s[0], 0.5 + s[1]], &m).unwrap();
        for e in 0..2 {
            assert!(close(&a.single[e], &b.single[e], 1e-13));
            assert!(close(&a.double[e], &b.double[e], 1e-13));
        }
    }

    #[test]
    fn collinear_point_uses_closed_form() {
        // point on the extension of the panel: h = 0 branch vs quadrature
        let m = unit();
        let (p0, p1, x) = ([0.0, 0.0], [1.0, 0.0], [1.5, 0.0]);
        let blocks = layer_integrals(p0, p1, x, &m).unwrap();
        let su = quad_panel(p0, p1, 4000, |y| kelvin(x, y, &m).unwrap());
        let dl = quad_panel(p0, p1, 4000, |y| traction_kernel(x, y, [0.0, -1.0], &m));
        for e in 0..2 {
            assert!(close(&blocks.single[e], &su[e], 1e-10));
            assert!(close(&blocks.double[e], &dl[e], 1e-10));
        }
    }

    #[test]
    fn double_layer_jump_at_smooth_point() {
        // closed counter-clockwise square, collocation at an edge midpoint node
        let m = IsotropicMaterial::new(0.5, 1.0).unwrap();
        let n = 8;
        let mut pts = Vec::new();
        for k in 0..n {
            pts.push([k as f64 / n as f64, 0.0]);
        }
        for k in 0..n {
            pts.push([1.0, k as f64 / n as f64]);
        }
        for k in 0..n {
            pts.push([1.0 - k as f64 / n as f64, 1.0]);
        }
        for k in 0..n {
            pts.push([0.0, 1.0 - k as f64 / n as f64]);
        }
        let x = pts[n / 2];
        let mut total = [[0.0; 2]; 2];
        for k in 0..pts.len() {
            let b = layer_integrals(pts[k], pts[(k + 1) % pts.len()], x, &m).unwrap();
            add_block(&mut total, &b.double[0], 1.0);
            add_block(&mut total, &b.double[1], 1.0);
        }
        assert!(close(&total, &[[-0.5, 0.0], [0.0, -0.5]], 1e-12), "{total:?}");
    }

    #[test]
    fn zero_strain_gives_zero_solution() {
        let s = solve_cell_bem(0.5, 0.5, &Sym2::ZERO, unit(), 8).unwrap();
        assert!(s.w.iter().all(|w| w[0] == 0.0 && w[1] == 0.0));
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn small_hole_approaches_homogeneous_energy() {
        // the deficit of a dilute void scales with its area (here 2.5e-5)
        let s = solve_cell_bem(0.995, 0.995, &Sym2::new(1.0, 0.0, 0.0), unit(), 16).unwrap();
        assert!(s.energy < 3.0 && s.energy > 3.0 - 1e-3, "{}", s.energy);
        assert!(s.residual < 1e-8);
    }

    #[test]
    fn hard_area_is_density() {
        let m = BoundaryMesh::new(0.3, 0.6, 8, 0.4).unwrap();
        assert!((m.hard_area() - (0.3 + 0.6 - 0.18)).abs() < 1e-14);
    }

    #[test]
    fn tensor_is_symmetric_and_positive() {
        let cell = BemCell::new(0.4, 0.6, unit(), 12, 0.0).unwrap();
        let c = cell.effective_tensor().unwrap();
        assert!(c.is_positive_definite());
        // axis-aligned cross: no shear coupling; the wider horizontal bar (δ2)
        // stiffens the x direction
        assert!(c.c1112.abs() < 1e-8 * c.norm() && c.c2212.abs() < 1e-8 * c.norm());
        assert!(c.c1111 > c.c2222);
    }

    #[test]
    fn rotated_geometry_matches_rotated_tensor() {
        let alpha = 0.6;
        let c0 = BemCell::new(0.4, 0.6, unit(), 10, 0.0).unwrap().effective_tensor().unwrap();
        let ca = BemCell::new(0.4, 0.6, unit(), 10, alpha).unwrap().effective_tensor().unwrap();
        assert!(ca.max_abs_diff(&c0.rotated(alpha)) < 1e-9 * c0.norm());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(layer_integrals([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], &unit()).is_err());
        assert!(BoundaryMesh::new(1.0, 0.5, 8, 0.0).is_err());
    }
}
