use num_complex::Complex64;
use rayon::prelude::*;

use super::{best_index, objective_unchecked, random_layout, spread_layout, stream_rng, ObjectiveSpec, OptimizationResult, OptimizerParams, Problem};
use crate::channel::{CarrierSpec, Direction};
use crate::error::{Error, Result};
use crate::geometry::{project_to_feasible, ArrayLayout, Dim, PlacementConstraints, Point};

/// Flat coordinate vector: `x` per element in 1D, `x, y` pairs in 2D.
pub(crate) fn flatten(layout: &ArrayLayout) -> Vec<f64> {
    match layout.dim() {
        Dim::One => layout.xs(),
        Dim::Two => layout.positions().iter().flat_map(|p| [p.x, p.y]).collect(),
    }
}

pub(crate) fn unflatten(dim: Dim, coords: &[f64]) -> Result<ArrayLayout> {
    match dim {
        Dim::One => ArrayLayout::from_axis(coords),
        Dim::Two => ArrayLayout::new(
            Dim::Two,
            coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
        ),
    }
}

fn null_offsets(target: &Direction, nulls: &[Direction]) -> Result<Vec<f64>> {
    let cos = |d: &Direction| match *d {
        Direction::Axis { theta_deg } => Ok(theta_deg.to_radians().cos()),
        Direction::Planar { .. } => Err(Error::invalid("null-depth gradient is defined for 1D layouts")),
    };
    let c0 = cos(target)?;
    nulls.iter().map(|d| Ok(cos(d)? - c0)).collect()
}

/// Analytic gradient of the null-depth objective
/// `f(x) = n⁻² Σ_k |Σ_m exp(j·β·x_m·δ_k)|²`, `δ_k = cos θ_k − cos θ_0`,
/// with respect to each element coordinate.
pub fn nulling_gradient(spec: &ObjectiveSpec, layout: &ArrayLayout, carrier: &CarrierSpec) -> Result<Vec<f64>> {
    let ObjectiveSpec::NullDepth { target, nulls } = spec else {
        return Err(Error::invalid("nulling gradient needs a null-depth objective"));
    };
    if layout.dim() != Dim::One {
        return Err(Error::invalid("nulling gradient is defined for 1D layouts"));
    }
    let beta = carrier.wavenumber();
    let xs = layout.xs();
    let n = xs.len() as f64;
    let mut grad = vec![0.0; xs.len()];
    for delta in null_offsets(target, nulls)? {
        let phasors: Vec<Complex64> = xs.iter().map(|&x| Complex64::cis(beta * delta * x)).collect();
        let sum: Complex64 = phasors.iter().sum();
        for (g, z) in grad.iter_mut().zip(&phasors) {
            // d/dx |S|² = 2·Re(conj(S)·j·β·δ·z)
            *g += 2.0 * (sum.conj() * Complex64::new(0.0, beta * delta) * z).re / (n * n);
        }
    }
    Ok(grad)
}

pub(crate) struct Descent {
    pub layout: ArrayLayout,
    pub cost: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Backtracking state shared by the gradient-based optimizers: the move length
/// shrinks on every rejected step and resets after a run of accepted ones.
pub(crate) struct StepControl {
    initial: f64,
    shrink: f64,
    reset_after: usize,
    pub length: f64,
    streak: usize,
}

impl StepControl {
    pub fn new(params: &OptimizerParams, carrier: &CarrierSpec) -> Self {
        let initial = params.initial_step(carrier);
        StepControl {
            initial,
            shrink: params.step_shrink,
            reset_after: params.step_reset_after,
            length: initial,
            streak: 0,
        }
    }

    pub fn accept(&mut self) {
        self.streak += 1;
        if self.streak >= self.reset_after {
            self.length = self.initial;
            self.streak = 0;
        }
    }

    pub fn reject(&mut self) {
        self.length *= self.shrink;
        self.streak = 0;
    }

    /// Steps below this cannot move a coordinate measurably.
    pub fn exhausted(&self, scale: f64) -> bool {
        self.length < 1e-15 * scale.max(1e-300)
    }
}

/// One projected move of length `step` against the normalized gradient.
pub(crate) fn projected_step(
    layout: &ArrayLayout,
    grad: &[f64],
    step: f64,
    constraints: &PlacementConstraints,
) -> Result<Option<ArrayLayout>> {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Ok(None);
    }
    let coords: Vec<f64> = flatten(layout)
        .iter()
        .zip(grad)
        .map(|(x, g)| x - step * g / norm)
        .collect();
    project_to_feasible(&unflatten(layout.dim(), &coords)?, constraints).map(Some)
}

/// Projected gradient descent with backtracking on a cost (lower is better).
pub(crate) fn descend(
    start: ArrayLayout,
    cost: impl Fn(&ArrayLayout) -> Result<f64>,
    gradient: impl Fn(&ArrayLayout) -> Result<Vec<f64>>,
    target_cost: f64,
    constraints: &PlacementConstraints,
    params: &OptimizerParams,
    carrier: &CarrierSpec,
) -> Result<Descent> {
    let mut layout = start;
    let mut current = cost(&layout)?;
    let mut trace = vec![current];
    let mut step = StepControl::new(params, carrier);
    let mut iterations = 0;
    while iterations < params.max_iterations && current > target_cost && !step.exhausted(constraints.region.extent_m) {
        iterations += 1;
        let grad = gradient(&layout)?;
        let Some(candidate) = projected_step(&layout, &grad, step.length, constraints)? else {
            break;
        };
        let value = cost(&candidate)?;
        if value < current {
            layout = candidate;
            current = value;
            step.accept();
        } else {
            step.reject();
        }
        trace.push(current);
    }
    Ok(Descent {
        layout,
        cost: current,
        iterations,
        trace,
    })
}

/// Multistart projected-gradient search for positions whose MRT beam toward
/// the target has exact nulls in every listed direction.
///
/// Start 0 spreads the elements evenly over the segment; the other starts are
/// seeded random layouts. Starts run concurrently and the best one wins, ties
/// going to the lower start index.
pub fn beam_nulling_optimize(
    spec: &ObjectiveSpec,
    n: usize,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
    params: &OptimizerParams,
) -> Result<OptimizationResult> {
    let ObjectiveSpec::NullDepth { nulls, .. } = spec else {
        return Err(Error::invalid("beam nulling needs a null-depth objective"));
    };
    if constraints.region.dim != Dim::One {
        return Err(Error::invalid("beam nulling optimizes 1D layouts"));
    }
    if n == 0 {
        return Err(Error::invalid("at least one antenna is required"));
    }
    params.validate()?;
    if !constraints.fits_on_line(n) {
        return Err(Error::InfeasibleConstraints(format!(
            "{n} elements at spacing {} m do not fit in {} m",
            constraints.min_spacing_m, constraints.region.extent_m
        )));
    }
    let start = project_to_feasible(&spread_layout(n, constraints)?, constraints)?;
    if nulls.is_empty() {
        let weights = super::target_weights(spec, &start, carrier)?;
        return Ok(OptimizationResult {
            layout: start,
            weights,
            objective_value: 0.0,
            iterations: 0,
            converged: true,
            trace: params.record_trace.then(|| vec![0.0]),
        });
    }
    let problem = Problem::new(spec, carrier, constraints)?;

    let runs = (0..params.multistarts)
        .into_par_iter()
        .map(|s| {
            let init = if s == 0 {
                start.clone()
            } else {
                let mut rng = stream_rng(params.seed, s as u64);
                project_to_feasible(&random_layout(n, constraints, &mut rng)?, constraints)?
            };
            descend(
                init,
                |l| objective_unchecked(spec, l, carrier),
                |l| nulling_gradient(spec, l, carrier),
                params.tolerance,
                constraints,
                params,
                carrier,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let costs: Vec<f64> = runs.iter().map(|r| r.cost).collect();
    let best = best_index(&costs).ok_or_else(|| Error::invalid("no multistart produced a finite objective"))?;
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let winner = runs.into_iter().nth(best).expect("index from the same vector");
    let converged = winner.cost <= params.tolerance;
    problem.finish(winner.layout, iterations, converged, params.record_trace.then_some(winner.trace))
}
