use serde::{Deserialize, Serialize};

use super::gradient::{flatten, nulling_gradient, projected_step, unflatten, StepControl};
use super::{objective_unchecked, ObjectiveSpec, OptimizationResult, OptimizerParams, Problem, Sense};
use crate::beamforming::{mrt_weights, zf_weights, Weights};
use crate::channel::{CarrierSpec, ChannelVector};
use crate::error::{Error, Result};
use crate::geometry::{project_to_feasible, validate_layout, ArrayLayout, Dim, PlacementConstraints};

/// Closed-form weight update used between position steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Maximum-ratio transmission toward the target.
    #[default]
    Mrt,
    /// Target projected away from every adversary channel.
    ZeroForcing,
}

/// Relative finite-difference step for objectives without an analytic gradient.
const FD_STEP_WAVELENGTHS: f64 = 1e-6;

struct Alternation<'a> {
    problem: Problem<'a>,
    rule: WeightRule,
}

impl Alternation<'_> {
    fn channels(&self, layout: &ArrayLayout) -> Result<(ChannelVector, Vec<ChannelVector>)> {
        let carrier = self.problem.carrier;
        let spec = self.problem.spec;
        let target = spec.target_channel().resolve(layout, carrier)?;
        let adversaries = spec
            .adversary_channels()
            .iter()
            .map(|c| c.resolve(layout, carrier))
            .collect::<Result<Vec<_>>>()?;
        Ok((target, adversaries))
    }

    fn weights(&self, layout: &ArrayLayout) -> Result<Weights> {
        let (target, adversaries) = self.channels(layout)?;
        match self.rule {
            WeightRule::Mrt => mrt_weights(&target),
            WeightRule::ZeroForcing => zf_weights(&target, &adversaries),
        }
    }

    fn value(&self, layout: &ArrayLayout) -> Result<f64> {
        match self.rule {
            WeightRule::Mrt => objective_unchecked(self.problem.spec, layout, self.problem.carrier),
            WeightRule::ZeroForcing => {
                let (target, adversaries) = self.channels(layout)?;
                let w = zf_weights(&target, &adversaries)?;
                self.problem.spec.value_with_weights(&w, &target, &adversaries)
            }
        }
    }

    fn cost(&self, layout: &ArrayLayout) -> Result<f64> {
        Ok(self.problem.spec.cost(self.value(layout)?))
    }

    fn gradient(&self, layout: &ArrayLayout) -> Result<Vec<f64>> {
        let spec = self.problem.spec;
        if self.rule == WeightRule::Mrt && layout.dim() == Dim::One && matches!(spec, ObjectiveSpec::NullDepth { .. }) {
            return nulling_gradient(spec, layout, self.problem.carrier);
        }
        let h = FD_STEP_WAVELENGTHS * self.problem.carrier.wavelength_m;
        let coords = flatten(layout);
        (0..coords.len())
            .map(|i| {
                let mut up = coords.clone();
                let mut down = coords.clone();
                up[i] += h;
                down[i] -= h;
                let f = |c: &[f64]| self.cost(&unflatten(layout.dim(), c)?);
                Ok((f(&up)? - f(&down)?) / (2.0 * h))
            })
            .collect()
    }
}

/// Alternates a closed-form weight update with one projected-gradient line
/// search on the positions, starting from `init`.
///
/// A position move is only taken when it strictly improves the objective
/// under the re-derived weights, so the recorded trace never worsens. The
/// loop ends when a minimized objective reaches `params.tolerance`, when the
/// line search finds no improving move (a stationary point, reported as
/// converged), or after `params.max_iterations` outer iterations.
pub fn alternating_apv_awv(
    spec: &ObjectiveSpec,
    init: &ArrayLayout,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
    params: &OptimizerParams,
    rule: WeightRule,
) -> Result<OptimizationResult> {
    let problem = Problem::new(spec, carrier, constraints)?;
    params.validate()?;
    let alt = Alternation { problem, rule };
    let mut layout = project_to_feasible(init, constraints)?;
    let mut weights = alt.weights(&layout)?;
    let mut cost = alt.cost(&layout)?;
    let mut trace = vec![spec.cost(cost)];
    let mut step = StepControl::new(params, carrier);
    let target_cost = match spec.sense() {
        Sense::Minimize => params.tolerance,
        Sense::Maximize => f64::NEG_INFINITY,
    };

    let mut iterations = 0;
    let mut converged = cost <= target_cost;
    while !converged && iterations < params.max_iterations {
        iterations += 1;
        let grad = alt.gradient(&layout)?;
        let mut moved = false;
        while !step.exhausted(constraints.region.extent_m) {
            let Some(candidate) = projected_step(&layout, &grad, step.length, constraints)? else {
                break;
            };
            let c = alt.cost(&candidate)?;
            if c < cost {
                layout = candidate;
                cost = c;
                step.accept();
                moved = true;
                break;
            }
            step.reject();
        }
        if !moved {
            converged = true;
            break;
        }
        weights = alt.weights(&layout)?;
        trace.push(spec.cost(cost));
        converged = cost <= target_cost;
    }

    if !validate_layout(&layout, constraints)?.is_ok() {
        return Err(Error::InfeasibleConstraints("alternating update left the feasible set".into()));
    }
    Ok(OptimizationResult {
        objective_value: alt.value(&layout)?,
        layout,
        weights,
        iterations,
        converged,
        trace: params.record_trace.then_some(trace),
    })
}
