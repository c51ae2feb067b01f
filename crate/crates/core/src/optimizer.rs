//! Compliance minimization over the per-element truss parameters and the
//! adaptive optimize–estimate–refine loop.

use log::{debug, info, warn};

use crate::dwr::{estimate, ErrorBreakdown};
use crate::fem::{compliance, element_energy_moments, Discretization, DisplacementField};
use crate::lamination::LaminateModel;
use crate::mesh::{mark_doerfler, QuadMesh, Scenario};
use crate::microcell::{
    density, density_gradient, effective_tensor, tensor_sensitivities, CellModel, MicroParams,
    DELTA_MAX, DELTA_MIN,
};
use crate::tensor::ElasticTensor2D;
use crate::{Error, Result};

/// Relative accuracy of the volume projection.
pub const VOLUME_TOL: f64 = 1e-6;
pub const MAX_HALVINGS: usize = 30;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the relative compliance decrease of an accepted step is below this.
    pub tol: f64,
    /// Largest change of a width in the first trial step.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub compliance: f64,
    pub volume: f64,
    pub gradient_norm: f64,
}

/// Per-element design with its volume target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub params: Vec<MicroParams>,
    /// `Θ |D|`.
    pub target_volume: f64,
    pub history: Vec<IterationRecord>,
}

impl DesignState {
    /// Uniform widths `δ1 = δ2` of density `Θ`, lattice angle zero.
    pub fn uniform(mesh: &QuadMesh, volume_fraction: f64) -> Result<Self> {
        if !(volume_fraction > 0.0 && volume_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "volume fraction {volume_fraction} outside (0, 1)"
            )));
        }
        let d = 1.0 - (1.0 - volume_fraction).sqrt();
        let q = MicroParams::new(0.0, d, d);
        let mut state = Self {
            params: vec![q; mesh.num_elements()],
            target_volume: volume_fraction * mesh.area(),
            history: Vec::new(),
        };
        project_volume(&mut state.params, &element_areas(mesh), state.target_volume)?;
        Ok(state)
    }

    pub fn volume(&self, mesh: &QuadMesh) -> f64 {
        design_volume(&self.params, &element_areas(mesh))
    }

    /// Children inherit the parameters of the coarse element they came from.
    pub fn prolong(&self, coarse: &QuadMesh, fine: &QuadMesh) -> Result<Self> {
        let params = fine
            .elements()
            .iter()
            .map(|&id| {
                let a = fine.ancestor_in(id, coarse).ok_or_else(|| {
                    Error::InvalidInput(format!("element {id} has no ancestor in the coarse mesh"))
                })?;
                Ok(self.params[coarse.element_index(a).expect("ancestor is a leaf")])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            target_volume: self.target_volume,
            history: Vec::new(),
        })
    }
}

pub fn element_areas(mesh: &QuadMesh) -> Vec<f64> {
    (0..mesh.num_elements()).map(|k| mesh.element(k).area()).collect()
}

pub fn design_volume(params: &[MicroParams], areas: &[f64]) -> f64 {
    params.iter().zip(areas).map(|(q, a)| a * q.density()).sum()
}

/// Rescales all widths by a common factor (clamped to the box) so that the
/// volume matches `target`.
pub fn project_volume(params: &mut [MicroParams], areas: &[f64], target: f64) -> Result<()> {
    let base: Vec<(f64, f64)> = params.iter().map(|q| (q.delta1, q.delta2)).collect();
    let vol = |s: f64| -> f64 {
        base.iter()
            .zip(areas)
            .map(|(&(d1, d2), a)| {
                a * density(
                    (s * d1).clamp(DELTA_MIN, DELTA_MAX),
                    (s * d2).clamp(DELTA_MIN, DELTA_MAX),
                )
            })
            .sum()
    };
    let total: f64 = areas.iter().sum();
    let (vmin, vmax) = (
        total * density(DELTA_MIN, DELTA_MIN),
        total * density(DELTA_MAX, DELTA_MAX),
    );
    if target < vmin * (1.0 - VOLUME_TOL) || target > vmax * (1.0 + VOLUME_TOL) {
        return Err(Error::Bisection {
            target,
            achieved: if target > vmax { vmax } else { vmin },
        });
    }
    let dmin = base.iter().map(|b| b.0.min(b.1)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, DELTA_MAX / dmin.max(DELTA_MIN));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if vol(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let s = if (vol(hi) - target).abs() < (vol(lo) - target).abs() { hi } else { lo };
    for (q, &(d1, d2)) in params.iter_mut().zip(&base) {
        *q = MicroParams::new(q.alpha, s * d1, s * d2);
    }
    let achieved = design_volume(params, areas);
    if (achieved - target).abs() > VOLUME_TOL * target {
        return Err(Error::Bisection { target, achieved });
    }
    Ok(())
}

pub fn tensor_field(model: &dyn CellModel, params: &[MicroParams]) -> Result<Vec<ElasticTensor2D>> {
    params.iter().map(|q| effective_tensor(model, q)).collect()
}

/// `dJ/dq_E = −∫_E (∂C/∂q_E) ε(u):ε(u)` for `q_E = (α, δ1, δ2)`.
pub fn compliance_gradient(
    mesh: &QuadMesh,
    model: &dyn CellModel,
    params: &[MicroParams],
    u: &DisplacementField,
) -> Result<Vec<[f64; 3]>> {
    let moments = element_energy_moments(mesh, u, u);
    params
        .iter()
        .zip(&moments)
        .map(|(q, m)| {
            let (_, d) = tensor_sensitivities(model, q)?;
            Ok(d.map(|dc| -dc.entries().iter().zip(m).map(|(a, b)| a * b).sum::<f64>()))
        })
        .collect()
}

/// Compliance and state for a design.
pub fn evaluate(
    disc: &Discretization<'_>,
    model: &dyn CellModel,
    params: &[MicroParams],
) -> Result<(f64, Vec<ElasticTensor2D>, DisplacementField)> {
    let c = tensor_field(model, params)?;
    let u = disc.solve(&c)?;
    let j = compliance(disc.mesh(), &u, disc.scenario());
    Ok((j, c, u))
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub design: DesignState,
    pub tensors: Vec<ElasticTensor2D>,
    pub u: DisplacementField,
    pub compliance: f64,
    pub converged: bool,
}

/// Projected gradient descent with Armijo backtracking.
///
/// The widths move along the gradient with the linearized volume change removed,
/// then are clamped and rescaled onto the volume constraint; the angle moves
/// freely. Steps are scaled by the element area so that the gradient of an
/// element does not depend on its size. A successful step doubles the next
/// trial step.
pub fn optimize(
    mesh: &QuadMesh,
    scenario: &Scenario,
    model: &dyn CellModel,
    init: DesignState,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let disc = Discretization::new(mesh, scenario)?;
    let areas = element_areas(mesh);
    let mut design = init;
    project_volume(&mut design.params, &areas, design.target_volume)?;
    let (mut j, mut c, mut u) = evaluate(&disc, model, &design.params)?;
    let mut step = f64::NAN;
    let mut converged = false;
    for iter in 0..config.max_iters {
        let grad = compliance_gradient(mesh, model, &design.params, &u)?;
        let dir = descent_direction(&design.params, &grad, &areas);
        let gnorm = grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        design.history.push(IterationRecord {
            compliance: j,
            volume: design_volume(&design.params, &areas),
            gradient_norm: gnorm,
        });
        let dmax = dir.iter().flatten().fold(0.0f64, |m, d| m.max(d.abs()));
        if dmax == 0.0 {
            converged = true;
            break;
        }
        if !step.is_finite() {
            step = config.initial_step / dmax;
        }
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial: Vec<MicroParams> = design
                .params
                .iter()
                .zip(&dir)
                .map(|(q, d)| {
                    MicroParams::new(
                        q.alpha + step * d[0],
                        q.delta1 + step * d[1],
                        q.delta2 + step * d[2],
                    )
                })
                .collect();
            project_volume(&mut trial, &areas, design.target_volume)?;
            // predicted change along the realized step
            let predicted: f64 = design
                .params
                .iter()
                .zip(&trial)
                .zip(&grad)
                .map(|((q, t), g)| {
                    g[0] * angle_diff(t.alpha, q.alpha)
                        + g[1] * (t.delta1 - q.delta1)
                        + g[2] * (t.delta2 - q.delta2)
                })
                .sum();
            let (jt, ct, ut) = evaluate(&disc, model, &trial)?;
            if jt <= j + ARMIJO * predicted.min(0.0) && jt < j {
                accepted = Some((trial, jt, ct, ut));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, jt, ct, ut)) = accepted else {
            warn!("line search stalled at iteration {iter} (compliance {j:.8e}); stopping");
            converged = true;
            break;
        };
        let decrease = (j - jt) / j;
        design.params = trial;
        j = jt;
        c = ct;
        u = ut;
        step *= 2.0;
        debug!("optimizer iteration {iter}: compliance {j:.10e}");
        if decrease < config.tol {
            converged = true;
            break;
        }
    }
    design.history.push(IterationRecord {
        compliance: j,
        volume: design_volume(&design.params, &areas),
        gradient_norm: f64::NAN,
    });
    Ok(OptimizationResult {
        design,
        tensors: c,
        u,
        compliance: j,
        converged,
    })
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(pi);
    if d > 0.5 * pi {
        d - pi
    } else {
        d
    }
}

/// Area-scaled negative gradient; the width part is made tangent to the volume
/// constraint over the widths that are not held at a bound.
fn descent_direction(params: &[MicroParams], grad: &[[f64; 3]], areas: &[f64]) -> Vec<[f64; 3]> {
    let free = |d: f64, g: f64| -> bool {
        !((d <= DELTA_MIN && g > 0.0) || (d >= DELTA_MAX && g < 0.0))
    };
    let (mut num, mut den) = (0.0, 0.0);
    for ((q, g), a) in params.iter().zip(grad).zip(areas) {
        let v = density_gradient(q.delta1, q.delta2);
        for (i, d) in [q.delta1, q.delta2].into_iter().enumerate() {
            if free(d, g[i + 1]) {
                num += g[i + 1] * v[i];
                den += a * v[i] * v[i];
            }
        }
    }
    let lambda = if den > 0.0 { num / den } else { 0.0 };
    params
        .iter()
        .zip(grad)
        .zip(areas)
        .map(|((q, g), a)| {
            let v = density_gradient(q.delta1, q.delta2);
            let mut d = [-g[0] / a, 0.0, 0.0];
            for (i, w) in [q.delta1, q.delta2].into_iter().enumerate() {
                if free(w, g[i + 1]) {
                    d[i + 1] = -(g[i + 1] / a - lambda * v[i]);
                }
            }
            d
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Number of estimate rows; the mesh is refined between consecutive rows.
    pub steps: usize,
    pub doerfler_fraction: f64,
    pub laminate_rounds: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            steps: 15,
            doerfler_fraction: 0.4,
            laminate_rounds: crate::dwr::DEFAULT_LAMINATE_ROUNDS,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Everything produced at one adaptive step.
#[derive(Debug)]
pub struct StepOutput<'a> {
    pub step: usize,
    pub mesh: &'a QuadMesh,
    pub optimization: &'a OptimizationResult,
    pub breakdown: &'a ErrorBreakdown,
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub breakdowns: Vec<ErrorBreakdown>,
    pub mesh: QuadMesh,
    pub design: DesignState,
    /// Last step before the first increase of the total estimate.
    pub recommended_stop: Option<usize>,
}

/// First step whose successor has a larger total estimate.
pub fn turning_point(totals: &[f64]) -> Option<usize> {
    totals.windows(2).position(|w| w[1] > w[0])
}

/// Optimize, estimate, report, mark and refine, `config.steps` times. The
/// observer sees each step before the mesh is refined.
pub fn adaptive_loop(
    scenario: &Scenario,
    cell_model: &dyn CellModel,
    laminate: &LaminateModel,
    config: &AdaptiveConfig,
    observer: &mut dyn FnMut(&StepOutput<'_>) -> Result<()>,
) -> Result<AdaptiveResult> {
    if config.steps == 0 {
        return Err(Error::InvalidInput("adaptive loop needs at least one step".into()));
    }
    scenario.validate()?;
    let mut mesh = QuadMesh::uniform(scenario.domain, scenario.initial_level)?;
    let mut design = DesignState::uniform(&mesh, scenario.volume_fraction)?;
    let mut breakdowns = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let opt = optimize(&mesh, scenario, cell_model, design, &config.optimizer)?;
        let (breakdown, _) = estimate(
            &mesh,
            scenario,
            laminate,
            &opt.tensors,
            &opt.u,
            config.laminate_rounds,
        )?;
        info!(
            "step {step}: {} elements, compliance {:.6}, estimate {:.6} (edge {:.6}, volume {:.6}, model {:.6})",
            mesh.num_elements(),
            breakdown.compliance,
            breakdown.total,
            breakdown.edge,
            breakdown.volume,
            breakdown.model
        );
        observer(&StepOutput {
            step,
            mesh: &mesh,
            optimization: &opt,
            breakdown: &breakdown,
        })?;
        design = opt.design;
        let values = breakdown.marking_values();
        breakdowns.push(breakdown);
        if step + 1 == config.steps {
            break;
        }
        let pairs: Vec<_> = mesh.elements().iter().copied().zip(values).collect();
        let marked = mark_doerfler(&pairs, config.doerfler_fraction)?;
        let fine = mesh.refine(&marked)?;
        design = design.prolong(&mesh, &fine)?;
        mesh = fine;
    }
    let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
    Ok(AdaptiveResult {
        recommended_stop: turning_point(&totals),
        breakdowns,
        mesh,
        design,
    })
}
