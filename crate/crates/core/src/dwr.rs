//! Dual-weighted-residual estimate of the compliance gap between the truss
//! model and optimal laminates.
//!
//! The laminate state is approximated by a few alternating laminate rounds
//! started from the truss state, its displacement is lifted to bi-quartic
//! polynomials on sibling patches, and the laminate tensor at each quadrature
//! point is recovered from the lifted strain by Newton's method.

use log::{debug, warn};

use crate::fem::{
    compliance, edge_jump, element_residual, energy_product, DisplacementField,
};
use crate::lamination::{alternating_optimize, LaminateModel, LaminateState};
use crate::mesh::{QuadMesh, Scenario, Side, SideNeighbors};
use crate::quadrature::{gauss3x3, lagrange_general, GAUSS3_POINTS, GAUSS3_WEIGHTS};
use crate::tensor::{ElasticTensor2D, Sym2};
use crate::Result;

pub const DEFAULT_LAMINATE_ROUNDS: usize = 50;

const QUARTIC_NODES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone)]
struct Patch {
    /// Values at the 5×5 Q2 nodes of the four siblings, row-major in `y`.
    values: [[f64; 2]; 25],
    /// Position of the element inside its parent, in parent reference units.
    offset: [f64; 2],
    parent_size: f64,
}

/// Bi-quartic lift of a Q2 field over sibling patches. Elements whose siblings
/// are not all leaves keep the Q2 field itself.
#[derive(Debug, Clone)]
pub struct PatchInterpolant<'a> {
    mesh: &'a QuadMesh,
    u: &'a DisplacementField,
    patches: Vec<Option<Patch>>,
}

impl<'a> PatchInterpolant<'a> {
    pub fn new(mesh: &'a QuadMesh, u: &'a DisplacementField) -> Self {
        let patches = (0..mesh.num_elements())
            .map(|k| Self::build_patch(mesh, u, k))
            .collect();
        Self { mesh, u, patches }
    }

    fn build_patch(mesh: &QuadMesh, u: &DisplacementField, k: usize) -> Option<Patch> {
        let cell = mesh.element(k);
        let parent = mesh.cell(cell.parent?);
        let children = parent.children?;
        if !children.iter().all(|&c| mesh.is_leaf(c)) {
            return None;
        }
        let child_k: Vec<usize> = children
            .iter()
            .map(|&c| mesh.element_index(c))
            .collect::<Option<_>>()?;
        let values = std::array::from_fn(|n| {
            let (i, j) = (n % 5, n / 5);
            let cx = usize::from(i > 2);
            let cy = usize::from(j > 2);
            let r = [(i - 2 * cx) as f64 / 2.0, (j - 2 * cy) as f64 / 2.0];
            u.value(mesh, child_k[cx + 2 * cy], r)
        });
        let s = cell.size_units();
        Some(Patch {
            values,
            offset: [
                ((cell.x - parent.x) / s) as f64 * 0.5,
                ((cell.y - parent.y) / s) as f64 * 0.5,
            ],
            parent_size: parent.size(),
        })
    }

    pub fn num_fallbacks(&self) -> usize {
        self.patches.iter().filter(|p| p.is_none()).count()
    }

    pub fn has_patch(&self, k: usize) -> bool {
        self.patches[k].is_some()
    }

    fn eval(patch: &Patch, r: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let rho = [patch.offset[0] + 0.5 * r[0], patch.offset[1] + 0.5 * r[1]];
        let (bx, dbx) = lagrange_general(&QUARTIC_NODES, rho[0]);
        let (by, dby) = lagrange_general(&QUARTIC_NODES, rho[1]);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for j in 0..5 {
            for i in 0..5 {
                let v = patch.values[i + 5 * j];
                let w = bx[i] * by[j];
                let wx = dbx[i] * by[j] / patch.parent_size;
                let wy = bx[i] * dby[j] / patch.parent_size;
                for c in 0..2 {
                    val[c] += w * v[c];
                    grad[c][0] += wx * v[c];
                    grad[c][1] += wy * v[c];
                }
            }
        }
        (val, grad)
    }

    pub fn value(&self, k: usize, r: [f64; 2]) -> [f64; 2] {
        match &self.patches[k] {
            Some(p) => Self::eval(p, r).0,
            None => self.u.value(self.mesh, k, r),
        }
    }

    /// `grad[c][d] = ∂_d u_c`.
    pub fn gradient(&self, k: usize, r: [f64; 2]) -> [[f64; 2]; 2] {
        match &self.patches[k] {
            Some(p) => Self::eval(p, r).1,
            None => self.u.gradient(self.mesh, k, r),
        }
    }

    pub fn strain(&self, k: usize, r: [f64; 2]) -> Sym2 {
        let g = self.gradient(k, r);
        Sym2::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
    }
}

/// Laminate tensors at the 3×3 Gauss points of every element, recovered from the
/// strain of `lifted` (the order of [`gauss3x3`]). Points where the inversion
/// fails or the strain vanishes take the element's laminate tensor.
pub fn approximate_cl(
    mesh: &QuadMesh,
    model: &LaminateModel,
    laminate: &LaminateState,
    lifted: &PatchInterpolant<'_>,
) -> (Vec<[ElasticTensor2D; 9]>, usize) {
    let mut fallbacks = 0;
    let tensors = (0..mesh.num_elements())
        .map(|k| {
            let ce = laminate.tensors[k];
            let mut out = [ce; 9];
            for (q, (r, _)) in gauss3x3().enumerate() {
                let eps = lifted.strain(k, r);
                let guess = ce.apply(&eps).eigen();
                let root = model
                    .newton_invert(&eps, laminate.multiplier, Some(guess))
                    .or_else(|_| model.newton_invert(&eps, laminate.multiplier, None));
                match root {
                    Ok(root) => out[q] = root.tensor,
                    Err(e) => {
                        fallbacks += 1;
                        debug!("element {k}, point {q}: laminate inversion fell back ({e})");
                    }
                }
            }
            out
        })
        .collect();
    (tensors, fallbacks)
}

/// Indicator contributions of one element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementIndicator {
    pub edge: f64,
    pub volume: f64,
    /// `|∫_E (C̃ᴸ − Cˢ) ε(uˢ):ε(uˢ)|`.
    pub model: f64,
    pub model_signed: f64,
}

impl ElementIndicator {
    /// `edge + volume + ½ model`.
    pub fn total(&self) -> f64 {
        self.edge + self.volume + 0.5 * self.model
    }
}

/// Estimator values of one adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBreakdown {
    pub elements: Vec<ElementIndicator>,
    pub edge: f64,
    pub volume: f64,
    /// `½ Σ_E |η_E^C|`.
    pub model: f64,
    /// `½ Σ_E η_E^C` without absolute values.
    pub model_signed: f64,
    pub total: f64,
    pub compliance: f64,
    pub num_elements: usize,
    pub newton_fallbacks: usize,
    pub patch_fallbacks: usize,
}

impl ErrorBreakdown {
    fn from_elements(elements: Vec<ElementIndicator>, compliance: f64) -> Self {
        let edge = elements.iter().map(|e| e.edge).sum();
        let volume = elements.iter().map(|e| e.volume).sum();
        let model = 0.5 * elements.iter().map(|e| e.model).sum::<f64>();
        let model_signed = 0.5 * elements.iter().map(|e| e.model_signed).sum::<f64>();
        let total = elements.iter().map(ElementIndicator::total).sum();
        Self {
            num_elements: elements.len(),
            elements,
            edge,
            volume,
            model,
            model_signed,
            total,
            compliance,
            newton_fallbacks: 0,
            patch_fallbacks: 0,
        }
    }

    /// Per-element marking values.
    pub fn marking_values(&self) -> Vec<f64> {
        self.elements.iter().map(ElementIndicator::total).collect()
    }
}

/// Residual, jump and model terms per element. `weight` gives the lifted
/// laminate displacement on element `k` at reference point `r`.
pub fn assemble_indicators(
    mesh: &QuadMesh,
    scenario: &Scenario,
    c_s: &[ElasticTensor2D],
    u_s: &DisplacementField,
    weight: &dyn Fn(usize, [f64; 2]) -> [f64; 2],
    c_l: &[[ElasticTensor2D; 9]],
) -> ErrorBreakdown {
    let elements = (0..mesh.num_elements())
        .map(|k| {
            let cell = mesh.element(k);
            let id = mesh.elements()[k];
            let h = cell.size();
            let area = cell.area();
            let diff = |r: [f64; 2]| -> [f64; 2] {
                let wl = weight(k, r);
                let ws = u_s.value(mesh, k, r);
                [wl[0] - ws[0], wl[1] - ws[1]]
            };
            let mut volume = 0.0;
            let mut model = 0.0;
            for (q, (r, w)) in gauss3x3().enumerate() {
                let res = element_residual(mesh, &c_s[k], u_s, k, r);
                let d = diff(r);
                volume += area * w * (res[0] * d[0] + res[1] * d[1]);
                let eps = u_s.strain(mesh, k, r);
                model += area * w * (c_l[k][q] - c_s[k]).energy(&eps);
            }
            let mut edge = 0.0;
            for side in Side::ALL {
                let a = cell.to_physical(side.reference_point(0.0));
                let b = cell.to_physical(side.reference_point(1.0));
                let mut cuts = vec![0.0];
                match mesh.side_neighbors(id, side) {
                    SideNeighbors::Boundary => cuts.extend(scenario.breakpoints(a, b)),
                    SideNeighbors::Two(_) => cuts.push(0.5),
                    SideNeighbors::Single(_) => {}
                }
                cuts.push(1.0);
                for seg in cuts.windows(2) {
                    let (t0, t1) = (seg[0], seg[1]);
                    for (tq, wq) in GAUSS3_POINTS.iter().zip(GAUSS3_WEIGHTS) {
                        let t = t0 + (t1 - t0) * tq;
                        let j = edge_jump(mesh, scenario, c_s, u_s, k, side, t);
                        let d = diff(side.reference_point(t));
                        edge += h * (t1 - t0) * wq * (j[0] * d[0] + j[1] * d[1]);
                    }
                }
            }
            ElementIndicator {
                edge: edge.abs(),
                volume: volume.abs(),
                model: model.abs(),
                model_signed: model,
            }
        })
        .collect();
    ErrorBreakdown::from_elements(elements, compliance(mesh, u_s, scenario))
}

/// Full estimate for the truss state `(c_s, u_s)`: `rounds` laminate rounds,
/// bi-quartic lift, pointwise laminate tensors and indicator assembly.
pub fn estimate(
    mesh: &QuadMesh,
    scenario: &Scenario,
    model: &LaminateModel,
    c_s: &[ElasticTensor2D],
    u_s: &DisplacementField,
    rounds: usize,
) -> Result<(ErrorBreakdown, LaminateState)> {
    let laminate = alternating_optimize(mesh, scenario, model, c_s, u_s, rounds)?;
    let lifted = PatchInterpolant::new(mesh, &laminate.u);
    let (c_l, newton_fallbacks) = if rounds == 0 {
        (c_s.iter().map(|c| [*c; 9]).collect(), 0)
    } else {
        approximate_cl(mesh, model, &laminate, &lifted)
    };
    if newton_fallbacks > 0 {
        warn!(
            "laminate inversion fell back to element tensors at {newton_fallbacks} of {} points",
            9 * mesh.num_elements()
        );
    }
    let weight = |k: usize, r: [f64; 2]| lifted.value(k, r);
    let mut breakdown = assemble_indicators(mesh, scenario, c_s, u_s, &weight, &c_l);
    breakdown.newton_fallbacks = newton_fallbacks;
    breakdown.patch_fallbacks = lifted.num_fallbacks();
    Ok((breakdown, laminate))
}

/// `ℒ(C, u) = 2 l(u) − a(C; u, u)`, the Lagrangian of the compliance problem at `p = −u`.
pub fn lagrangian(
    mesh: &QuadMesh,
    scenario: &Scenario,
    c: &[ElasticTensor2D],
    u: &DisplacementField,
) -> f64 {
    2.0 * compliance(mesh, u, scenario) - energy_product(mesh, c, u, u)
}

/// Terms of the trapezoidal error representation along `s ↦ (Cˢ + s e_C, uˢ + s e_u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidCheck {
    /// `ℒ(Cᴸ, uᴸ) − ℒ(Cˢ, uˢ)`.
    pub difference: f64,
    /// `f(0)` and `f(1)` with `f = dℒ/ds`.
    pub slopes: [f64; 2],
    /// `½ a(e_C; e_u, e_u)`.
    pub remainder: f64,
    /// `difference − ½(f(0) + f(1)) − remainder`.
    pub residual: f64,
    /// Sum of magnitudes of the terms entering the identity.
    pub scale: f64,
}

pub(crate) fn combine(a: &DisplacementField, sa: f64, b: &DisplacementField, sb: f64) -> DisplacementField {
    DisplacementField {
        nodal: a
            .nodal
            .iter()
            .zip(&b.nodal)
            .map(|(x, y)| [sa * x[0] + sb * y[0], sa * x[1] + sb * y[1]])
            .collect(),
        status: a.status.clone(),
    }
}

/// Evaluates the trapezoidal representation of the Lagrangian difference, which
/// holds exactly because `ℒ` is cubic along the path.
pub fn trapezoid_identity_check(
    mesh: &QuadMesh,
    scenario: &Scenario,
    c_s: &[ElasticTensor2D],
    u_s: &DisplacementField,
    c_l: &[ElasticTensor2D],
    u_l: &DisplacementField,
) -> TrapezoidCheck {
    let e_c: Vec<ElasticTensor2D> = c_l.iter().zip(c_s).map(|(l, s)| *l - *s).collect();
    let e_u = combine(u_l, 1.0, u_s, -1.0);
    let l_eu = compliance(mesh, &e_u, scenario);
    // f(s) = 2 l(e_u) − a(e_C; u(s), u(s)) − 2 a(C(s); u(s), e_u)
    let slope = |c: &[ElasticTensor2D], u: &DisplacementField| -> [f64; 3] {
        [
            2.0 * l_eu,
            -energy_product(mesh, &e_c, u, u),
            -2.0 * energy_product(mesh, c, u, &e_u),
        ]
    };
    let t0 = slope(c_s, u_s);
    let t1 = slope(c_l, u_l);
    let f0: f64 = t0.iter().sum();
    let f1: f64 = t1.iter().sum();
    let lag_s = [2.0 * compliance(mesh, u_s, scenario), -energy_product(mesh, c_s, u_s, u_s)];
    let lag_l = [2.0 * compliance(mesh, u_l, scenario), -energy_product(mesh, c_l, u_l, u_l)];
    let difference = lag_l.iter().sum::<f64>() - lag_s.iter().sum::<f64>();
    let remainder = 0.5 * energy_product(mesh, &e_c, &e_u, &e_u);
    let scale = t0
        .iter()
        .chain(&t1)
        .chain(&lag_s)
        .chain(&lag_l)
        .map(|x| x.abs())
        .sum::<f64>()
        + remainder.abs();
    TrapezoidCheck {
        difference,
        slopes: [f0, f1],
        remainder,
        residual: difference - 0.5 * (f0 + f1) - remainder,
        scale,
    }
}
