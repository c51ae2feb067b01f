//! Periodic homogenization of the orthogonal-truss cell.
//!
//! The cell is the unit square whose hard phase is a cross of two bars along
//! the cell edges, i.e. everything outside the centered rectangular hole
//! `[δ1/2, 1−δ1/2] × [δ2/2, 1−δ2/2]`. The hole is filled with a weak copy of
//! the hard material. Correctors are computed with periodic Q1 elements on an
//! `N × N` grid; grid cells cut by the hole boundary get the area-weighted mix
//! of both materials so that the effective tensor depends continuously on the
//! widths. Rotations are applied analytically to the axis-aligned tensor.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;

use crate::linalg::{SparsePattern, SymmetricMatrix};
use crate::quadrature::{GAUSS2_POINTS, GAUSS2_WEIGHTS};
use crate::tensor::{wrap_angle, ElasticTensor2D, IsotropicMaterial, Sym2};
use crate::{Error, Result};

pub const DELTA_MIN: f64 = 0.01;
pub const DELTA_MAX: f64 = 0.99;
/// Step of the central differences in the widths.
pub const FD_STEP: f64 = 1e-3;
/// Resolution of the memoization key for the widths.
pub const CACHE_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_RESOLUTION: usize = 64;
/// Table points per axis; coarser tables overshoot into indefinite tensors near `δ → 1`.
pub const DEFAULT_TABLE_POINTS: usize = 25;
pub const DEFAULT_SOFT_RATIO: f64 = 1e-4;

/// Microstructure parameters of one macroscopic element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroParams {
    /// Lattice angle in `[0, π)`.
    pub alpha: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl MicroParams {
    /// Clamps the widths to the admissible box and wraps the angle.
    pub fn new(alpha: f64, delta1: f64, delta2: f64) -> Self {
        Self {
            alpha: wrap_angle(alpha),
            delta1: delta1.clamp(DELTA_MIN, DELTA_MAX),
            delta2: delta2.clamp(DELTA_MIN, DELTA_MAX),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(DELTA_MIN..=DELTA_MAX).contains(&d) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {d} outside [{DELTA_MIN}, {DELTA_MAX}]"
                )));
            }
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidInput("lattice angle is not finite".into()));
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        density(self.delta1, self.delta2)
    }
}

/// Area fraction of the hard cross, `δ1 + δ2 − δ1δ2`.
pub fn density(delta1: f64, delta2: f64) -> f64 {
    delta1 + delta2 - delta1 * delta2
}

/// Gradient of [`density`] with respect to `(δ1, δ2)`.
pub fn density_gradient(delta1: f64, delta2: f64) -> [f64; 2] {
    [1.0 - delta2, 1.0 - delta1]
}

/// Hard material and the stiffness ratio of the weak filling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMaterials {
    pub hard: IsotropicMaterial,
    pub soft_ratio: f64,
}

impl Default for CellMaterials {
    fn default() -> Self {
        Self {
            hard: IsotropicMaterial::unit(),
            soft_ratio: DEFAULT_SOFT_RATIO,
        }
    }
}

impl CellMaterials {
    pub fn hard_tensor(&self) -> ElasticTensor2D {
        self.hard.tensor()
    }

    pub fn soft_tensor(&self) -> ElasticTensor2D {
        self.hard.tensor() * self.soft_ratio
    }
}

const Q1_DOFS: usize = 8;
type Q1Matrix = [[f64; Q1_DOFS]; Q1_DOFS];

fn q1_grad(r: [f64; 2]) -> [[f64; 2]; 4] {
    let (x, y) = (r[0], r[1]);
    [
        [-(1.0 - y), -(1.0 - x)],
        [1.0 - y, -x],
        [-y, 1.0 - x],
        [y, x],
    ]
}

fn q1_strain(g: [f64; 2], comp: usize) -> Sym2 {
    if comp == 0 {
        Sym2::new(g[0], 0.0, 0.5 * g[1])
    } else {
        Sym2::new(0.0, g[1], 0.5 * g[0])
    }
}

fn gauss2x2() -> impl Iterator<Item = ([f64; 2], f64)> {
    (0..4).map(|q| {
        let (i, j) = (q % 2, q / 2);
        (
            [GAUSS2_POINTS[i], GAUSS2_POINTS[j]],
            GAUSS2_WEIGHTS[i] * GAUSS2_WEIGHTS[j],
        )
    })
}

/// Reference Q1 stiffness matrices per tensor entry and the reference load
/// vectors `∫ E_k ξ : ε(φ_i)` per entry and unit strain.
struct Q1Reference {
    stiffness: [Q1Matrix; 6],
    load: [[[f64; Q1_DOFS]; 3]; 6],
}

fn q1_reference() -> &'static Q1Reference {
    static REF: OnceLock<Q1Reference> = OnceLock::new();
    REF.get_or_init(|| {
        let mut stiffness = [[[0.0; Q1_DOFS]; Q1_DOFS]; 6];
        let mut load = [[[0.0; Q1_DOFS]; 3]; 6];
        let xis = unit_strains();
        for k in 0..6 {
            let mut e = [0.0; 6];
            e[k] = 1.0;
            let unit = ElasticTensor2D::from_entries(e);
            for (r, w) in gauss2x2() {
                let g = q1_grad(r);
                let eps: [Sym2; Q1_DOFS] = std::array::from_fn(|i| q1_strain(g[i / 2], i % 2));
                for i in 0..Q1_DOFS {
                    for j in 0..Q1_DOFS {
                        stiffness[k][i][j] += w * unit.bilinear(&eps[i], &eps[j]);
                    }
                    for (a, xi) in xis.iter().enumerate() {
                        load[k][a][i] += w * unit.bilinear(xi, &eps[i]);
                    }
                }
            }
        }
        Q1Reference { stiffness, load }
    })
}

/// The unit strains `e1⊗e1`, `e2⊗e2` and `sym(e1⊗e2)`.
pub fn unit_strains() -> [Sym2; 3] {
    [
        Sym2::new(1.0, 0.0, 0.0),
        Sym2::new(0.0, 1.0, 0.0),
        Sym2::new(0.0, 0.0, 0.5),
    ]
}

/// Correctors of the axis-aligned cell for the three unit strains.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub n: usize,
    pub delta1: f64,
    pub delta2: f64,
    /// Nodal values on the periodic grid, node `i + n·j` at `(i/n, j/n)`.
    pub correctors: [Vec<[f64; 2]>; 3],
    element_tensors: Vec<ElasticTensor2D>,
}

/// Hard area fraction of grid cell `[x0, x0+h] × [y0, y0+h]`.
fn hard_fraction(delta1: f64, delta2: f64, x0: f64, y0: f64, h: f64) -> f64 {
    let overlap = |lo: f64, hi: f64, a: f64, b: f64| (hi.min(b) - lo.max(a)).max(0.0);
    let ox = overlap(x0, x0 + h, 0.5 * delta1, 1.0 - 0.5 * delta1);
    let oy = overlap(y0, y0 + h, 0.5 * delta2, 1.0 - 0.5 * delta2);
    (1.0 - ox * oy / (h * h)).clamp(0.0, 1.0)
}

fn element_nodes(n: usize, i: usize, j: usize) -> [usize; 4] {
    let ip = (i + 1) % n;
    let jp = (j + 1) % n;
    [i + n * j, ip + n * j, i + n * jp, ip + n * jp]
}

/// Solves the three periodic cell problems of the axis-aligned cell.
pub fn solve_cell(
    delta1: f64,
    delta2: f64,
    materials: &CellMaterials,
    n: usize,
) -> Result<CellSolution> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("cell resolution {n} is below 4")));
    }
    for d in [delta1, delta2] {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::InvalidInput(format!("bar width {d} outside (0, 1]")));
        }
    }
    if !(materials.soft_ratio > 0.0) {
        return Err(Error::Solver {
            context: "cell problem".into(),
            detail: "weak phase is void; the periodic stiffness matrix is singular".into(),
        });
    }
    let h = 1.0 / n as f64;
    let a = materials.hard_tensor();
    let b = materials.soft_tensor();
    let element_tensors: Vec<ElasticTensor2D> = (0..n * n)
        .map(|e| {
            let (i, j) = (e % n, e / n);
            let phi = hard_fraction(delta1, delta2, i as f64 * h, j as f64 * h, h);
            a * phi + b * (1.0 - phi)
        })
        .collect();

    let pattern = periodic_pattern(n);
    let reference = q1_reference();
    let mut k = SymmetricMatrix::zeros(pattern.clone());
    let mut rhs = [vec![0.0; 2 * n * n - 2], vec![0.0; 2 * n * n - 2], vec![0.0; 2 * n * n - 2]];
    // node 0 is pinned; unknown index of nodal component (m, c) is 2m + c − 2
    let dof = |m: usize, c: usize| -> Option<usize> { (m != 0).then(|| 2 * m + c - 2) };
    {
        let values = k.values_mut();
        for (e, c) in element_tensors.iter().enumerate() {
            let nodes = element_nodes(n, e % n, e / n);
            let ent = c.entries();
            let dofs: [Option<usize>; Q1_DOFS] = std::array::from_fn(|i| dof(nodes[i / 2], i % 2));
            for i in 0..Q1_DOFS {
                let Some(r) = dofs[i] else { continue };
                for (kk, ek) in ent.iter().enumerate() {
                    for (s, rh) in rhs.iter_mut().enumerate() {
                        rh[r] -= h * ek * reference.load[kk][s][i];
                    }
                }
                for j in 0..Q1_DOFS {
                    let Some(s) = dofs[j] else { continue };
                    if r < s {
                        continue;
                    }
                    let v: f64 = (0..6).map(|kk| ent[kk] * reference.stiffness[kk][i][j]).sum();
                    values[pattern.slot(r, s).expect("periodic pattern")] += v;
                }
            }
        }
    }
    let fact = k.factorize("periodic cell problem")?;
    let mut correctors: [Vec<[f64; 2]>; 3] = Default::default();
    for (s, rh) in rhs.iter().enumerate() {
        let x = fact.solve(rh)?;
        let mut w = vec![[0.0; 2]; n * n];
        for (m, wm) in w.iter_mut().enumerate().skip(1) {
            *wm = [x[2 * m - 2], x[2 * m - 1]];
        }
        let mean: [f64; 2] = std::array::from_fn(|c| w.iter().map(|v| v[c]).sum::<f64>() / (n * n) as f64);
        for v in &mut w {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
        correctors[s] = w;
    }
    Ok(CellSolution {
        n,
        delta1,
        delta2,
        correctors,
        element_tensors,
    })
}

fn periodic_pattern(n: usize) -> Arc<SparsePattern> {
    static CACHE: OnceLock<DashMap<usize, Arc<SparsePattern>>> = OnceLock::new();
    let cache = CACHE.get_or_init(DashMap::new);
    if let Some(p) = cache.get(&n) {
        return p.clone();
    }
    let mut entries = Vec::new();
    for e in 0..n * n {
        let nodes = element_nodes(n, e % n, e / n);
        for &p in &nodes {
            for &q in &nodes {
                if p == 0 || q == 0 {
                    continue;
                }
                for c in 0..2 {
                    for d in 0..2 {
                        entries.push((2 * p + c - 2, 2 * q + d - 2));
                    }
                }
            }
        }
    }
    let p = Arc::new(SparsePattern::new(2 * n * n - 2, entries));
    cache.insert(n, p.clone());
    p
}

impl CellSolution {
    /// Strain `ε(w_s)` on grid cell `e` at reference point `r`.
    fn corrector_strain(&self, s: usize, e: usize, r: [f64; 2]) -> Sym2 {
        let n = self.n;
        let nodes = element_nodes(n, e % n, e / n);
        let g = q1_grad(r);
        let h = 1.0 / n as f64;
        let mut out = Sym2::ZERO;
        for a in 0..4 {
            let w = self.correctors[s][nodes[a]];
            out += q1_strain(g[a], 0) * (w[0] / h) + q1_strain(g[a], 1) * (w[1] / h);
        }
        out
    }

    /// Effective tensor of the axis-aligned cell,
    /// `M_ab = ∫ C(ξ_a + ε(w_a)) : (ξ_b + ε(w_b))`.
    pub fn effective_tensor(&self) -> ElasticTensor2D {
        let n = self.n;
        let h2 = 1.0 / (n * n) as f64;
        let xis = unit_strains();
        let mut m = [[0.0; 3]; 3];
        for (e, c) in self.element_tensors.iter().enumerate() {
            for (r, w) in gauss2x2() {
                let strains: [Sym2; 3] =
                    std::array::from_fn(|s| xis[s] + self.corrector_strain(s, e, r));
                for a in 0..3 {
                    let sa = c.apply(&strains[a]);
                    for b in a..3 {
                        m[a][b] += w * h2 * sa.ddot(&strains[b]);
                    }
                }
            }
        }
        ElasticTensor2D::new(m[0][0], m[1][1], m[0][1], m[2][2], m[0][2], m[1][2])
    }

    /// Cell average `∫ C dy` (Voigt bound).
    pub fn mean_tensor(&self) -> ElasticTensor2D {
        let scale = 1.0 / self.element_tensors.len() as f64;
        self.element_tensors
            .iter()
            .fold(ElasticTensor2D::ZERO, |acc, c| acc + *c * scale)
    }

    /// `∫ C ε(w_s) : ε(w_s)` for each corrector.
    pub fn corrector_energies(&self) -> [f64; 3] {
        let h2 = 1.0 / (self.n * self.n) as f64;
        std::array::from_fn(|s| {
            let mut acc = 0.0;
            for (e, c) in self.element_tensors.iter().enumerate() {
                for (r, w) in gauss2x2() {
                    acc += w * h2 * c.energy(&self.corrector_strain(s, e, r));
                }
            }
            acc
        })
    }

    pub fn corrector_means(&self) -> [[f64; 2]; 3] {
        let nn = (self.n * self.n) as f64;
        std::array::from_fn(|s| {
            std::array::from_fn(|c| self.correctors[s].iter().map(|v| v[c]).sum::<f64>() / nn)
        })
    }
}

/// Exact rotation by `π/2` of a tensor: swaps the axes.
pub fn quarter_turn(c: &ElasticTensor2D) -> ElasticTensor2D {
    ElasticTensor2D::new(c.c2222, c.c1111, c.c1122, c.c1212, -c.c2212, -c.c1112)
}

/// Axis-aligned effective tensor computed from scratch. Only `δ1 ≤ δ2` is
/// solved; the other case is the quarter turn of the swapped cell.
pub fn axis_tensor_uncached(
    delta1: f64,
    delta2: f64,
    materials: &CellMaterials,
    n: usize,
) -> Result<ElasticTensor2D> {
    if delta1 <= delta2 {
        Ok(solve_cell(delta1, delta2, materials, n)?.effective_tensor())
    } else {
        Ok(quarter_turn(&solve_cell(delta2, delta1, materials, n)?.effective_tensor()))
    }
}

/// Source of axis-aligned effective tensors and their width derivatives.
pub trait CellModel: Send + Sync {
    fn axis_tensor(&self, delta1: f64, delta2: f64) -> Result<ElasticTensor2D>;

    /// Tensor and its derivatives with respect to `δ1` and `δ2`.
    fn axis_tensor_with_derivatives(
        &self,
        delta1: f64,
        delta2: f64,
    ) -> Result<[ElasticTensor2D; 3]>;
}

/// Rotated effective tensor `R[α] C̄(δ1, δ2)`.
pub fn effective_tensor(model: &dyn CellModel, q: &MicroParams) -> Result<ElasticTensor2D> {
    Ok(model.axis_tensor(q.delta1, q.delta2)?.rotated(q.alpha))
}

/// Effective tensor with `[∂/∂α, ∂/∂δ1, ∂/∂δ2]`.
pub fn tensor_sensitivities(
    model: &dyn CellModel,
    q: &MicroParams,
) -> Result<(ElasticTensor2D, [ElasticTensor2D; 3])> {
    let [c, d1, d2] = model.axis_tensor_with_derivatives(q.delta1, q.delta2)?;
    Ok((
        c.rotated(q.alpha),
        [
            c.rotation_derivative(q.alpha),
            d1.rotated(q.alpha),
            d2.rotated(q.alpha),
        ],
    ))
}

/// Cell solves on demand, memoized by widths rounded to [`CACHE_RESOLUTION`];
/// width derivatives by central differences with step [`FD_STEP`], one-sided at
/// the box faces.
pub struct DirectCellModel {
    pub materials: CellMaterials,
    pub n: usize,
    cache: DashMap<(i64, i64), ElasticTensor2D>,
}

impl DirectCellModel {
    pub fn new(materials: CellMaterials, n: usize) -> Self {
        Self {
            materials,
            n,
            cache: DashMap::new(),
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    fn key(d: f64) -> i64 {
        (d / CACHE_RESOLUTION).round() as i64
    }

    fn lookup(&self, k1: i64, k2: i64) -> Result<ElasticTensor2D> {
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let c = match self.cache.get(&(lo, hi)) {
            Some(c) => *c,
            None => {
                let c = axis_tensor_uncached(
                    lo as f64 * CACHE_RESOLUTION,
                    hi as f64 * CACHE_RESOLUTION,
                    &self.materials,
                    self.n,
                )?;
                self.cache.insert((lo, hi), c);
                c
            }
        };
        Ok(if k1 <= k2 { c } else { quarter_turn(&c) })
    }
}

impl CellModel for DirectCellModel {
    fn axis_tensor(&self, delta1: f64, delta2: f64) -> Result<ElasticTensor2D> {
        self.lookup(Self::key(delta1), Self::key(delta2))
    }

    fn axis_tensor_with_derivatives(
        &self,
        delta1: f64,
        delta2: f64,
    ) -> Result<[ElasticTensor2D; 3]> {
        let (k1, k2) = (Self::key(delta1), Self::key(delta2));
        let step = Self::key(FD_STEP);
        let (kmin, kmax) = (Self::key(DELTA_MIN), Self::key(DELTA_MAX));
        let c = self.lookup(k1, k2)?;
        let diff = |k: i64, f: &dyn Fn(i64) -> Result<ElasticTensor2D>| -> Result<ElasticTensor2D> {
            let (lo, hi) = ((k - step).max(kmin), (k + step).min(kmax));
            Ok((f(hi)? - f(lo)?) * (1.0 / ((hi - lo) as f64 * CACHE_RESOLUTION)))
        };
        let d1 = diff(k1, &|k| self.lookup(k, k2))?;
        let d2 = diff(k2, &|k| self.lookup(k1, k))?;
        Ok([c, d1, d2])
    }
}

/// Axis-aligned tensors sampled on a uniform grid of widths over
/// `[DELTA_MIN, DELTA_MAX]²` and interpolated by tensor-product cubic
/// convolution (C¹, exact derivatives of the interpolant).
#[derive(Debug, Clone)]
pub struct TabulatedCellModel {
    nodes: Vec<f64>,
    values: Vec<[f64; 6]>,
}

impl TabulatedCellModel {
    /// Tabulates `points × points` widths with cell resolution `n`.
    pub fn build(materials: &CellMaterials, n: usize, points: usize) -> Result<Self> {
        if points < 4 {
            return Err(Error::InvalidInput("table needs at least 4 points per axis".into()));
        }
        let nodes: Vec<f64> = (0..points)
            .map(|i| DELTA_MIN + (DELTA_MAX - DELTA_MIN) * i as f64 / (points - 1) as f64)
            .collect();
        let mut values = vec![[0.0; 6]; points * points];
        for i in 0..points {
            for j in i..points {
                let c = solve_cell(nodes[i], nodes[j], materials, n)?.effective_tensor();
                values[i + points * j] = c.entries();
                values[j + points * i] = quarter_turn(&c).entries();
            }
            log::debug!("cell table row {}/{points}", i + 1);
        }
        Ok(Self { nodes, values })
    }

    pub fn from_samples(nodes: Vec<f64>, values: Vec<[f64; 6]>) -> Result<Self> {
        if nodes.len() < 4 || values.len() != nodes.len() * nodes.len() {
            return Err(Error::InvalidInput("inconsistent cell table".into()));
        }
        Ok(Self { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Rows `(δ1, δ2, entries)` of the table.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, [f64; 6])> + '_ {
        let m = self.nodes.len();
        (0..m * m).map(move |k| (self.nodes[k % m], self.nodes[k / m], self.values[k]))
    }

    /// Interval index, local coordinate and weights (value, derivative) of the
    /// four stencil nodes along one axis.
    fn weights(&self, x: f64) -> ([usize; 4], [f64; 4], [f64; 4]) {
        let m = self.nodes.len();
        let h = self.nodes[1] - self.nodes[0];
        let s = ((x - self.nodes[0]) / h).clamp(0.0, (m - 1) as f64);
        let i = (s.floor() as usize).min(m - 2);
        let t = s - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let mut w = [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ];
        let mut dw = [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0) / h,
            0.5 * (9.0 * t2 - 10.0 * t) / h,
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0) / h,
            0.5 * (3.0 * t2 - 2.0 * t) / h,
        ];
        // linear extrapolation for ghost nodes outside the table
        let mut idx = [i.wrapping_sub(1), i, i + 1, i + 2];
        if i == 0 {
            for v in [&mut w, &mut dw] {
                v[1] += 2.0 * v[0];
                v[2] -= v[0];
                v[0] = 0.0;
            }
            idx[0] = 0;
        }
        if i + 2 >= m {
            for v in [&mut w, &mut dw] {
                v[2] += 2.0 * v[3];
                v[1] -= v[3];
                v[3] = 0.0;
            }
            idx[3] = m - 1;
        }
        (idx, w, dw)
    }

    fn eval(&self, d1: f64, d2: f64) -> [[f64; 6]; 3] {
        let m = self.nodes.len();
        let (ix, wx, dwx) = self.weights(d1);
        let (iy, wy, dwy) = self.weights(d2);
        let mut out = [[0.0; 6]; 3];
        for a in 0..4 {
            for b in 0..4 {
                let coeffs = [wx[a] * wy[b], dwx[a] * wy[b], wx[a] * dwy[b]];
                if coeffs.iter().all(|c| *c == 0.0) {
                    continue;
                }
                let v = &self.values[ix[a] + m * iy[b]];
                for (o, cf) in out.iter_mut().zip(coeffs) {
                    for e in 0..6 {
                        o[e] += cf * v[e];
                    }
                }
            }
        }
        out
    }
}

impl CellModel for TabulatedCellModel {
    fn axis_tensor(&self, delta1: f64, delta2: f64) -> Result<ElasticTensor2D> {
        Ok(ElasticTensor2D::from_entries(self.eval(delta1, delta2)[0]))
    }

    fn axis_tensor_with_derivatives(
        &self,
        delta1: f64,
        delta2: f64,
    ) -> Result<[ElasticTensor2D; 3]> {
        let e = self.eval(delta1, delta2);
        Ok(e.map(ElasticTensor2D::from_entries))
    }
}

/// Writes `delta1,delta2,c1111,c2222,c1122,c1212,c1112,c2212` rows.
pub fn write_cell_database<W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (f64, f64, [f64; 6])>,
) -> Result<()> {
    writeln!(out, "delta1,delta2,c1111,c2222,c1122,c1212,c1112,c2212")?;
    for (d1, d2, e) in rows {
        write!(out, "{d1},{d2}")?;
        for v in e {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
