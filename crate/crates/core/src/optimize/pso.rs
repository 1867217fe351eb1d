use rand::Rng;
use rayon::prelude::*;

use super::gradient::{flatten, unflatten};
use super::{best_index, objective_unchecked, random_layout, spread_layout, stream_rng, ObjectiveSpec, OptimizationResult, OptimizerParams, Problem, Sense};
use crate::channel::CarrierSpec;
use crate::error::{Error, Result};
use crate::geometry::{clma_layout, project_to_feasible, project_tracks, validate_layout, ArrayLayout, ClmaCoupling, PlacementConstraints};

/// How particle coordinates map onto a layout.
enum Encoding<'a> {
    /// Every element coordinate is free.
    Free,
    /// Coordinates are the row tracks followed by the column tracks.
    Tracks { rows: usize, coupling: &'a ClmaCoupling },
}

struct Swarm<'a> {
    problem: Problem<'a>,
    encoding: Encoding<'a>,
    params: &'a OptimizerParams,
    grid_step: f64,
}

impl Swarm<'_> {
    /// Projects raw coordinates into the feasible set and returns the
    /// corrected coordinates together with the layout they encode.
    fn repair(&self, coords: &[f64]) -> Result<(Vec<f64>, ArrayLayout)> {
        let constraints = self.problem.constraints;
        match &self.encoding {
            Encoding::Free => {
                let layout = project_to_feasible(&unflatten(self.problem.dim(), coords)?, constraints)?;
                Ok((flatten(&layout), layout))
            }
            Encoding::Tracks { rows, .. } => {
                let tracks = project_tracks(
                    &ClmaCoupling {
                        row_track_coords: coords[..*rows].to_vec(),
                        col_track_coords: coords[*rows..].to_vec(),
                    },
                    constraints,
                )?;
                let layout = clma_layout(&tracks)?;
                let mut fixed = tracks.row_track_coords;
                fixed.extend(tracks.col_track_coords);
                Ok((fixed, layout))
            }
        }
    }

    /// Cost of a repaired particle; grid snapping may make it infeasible, in
    /// which case the cost is infinite.
    fn cost(&self, coords: &[f64], layout: &ArrayLayout) -> Result<(f64, ArrayLayout)> {
        let spec = self.problem.spec;
        let layout = if self.params.pso.snap_to_grid {
            let snapped: Vec<f64> = coords
                .iter()
                .map(|c| (c / self.grid_step).round() * self.grid_step)
                .collect();
            let snapped = match &self.encoding {
                Encoding::Free => unflatten(self.problem.dim(), &snapped)?,
                Encoding::Tracks { rows, .. } => clma_layout(&ClmaCoupling {
                    row_track_coords: snapped[..*rows].to_vec(),
                    col_track_coords: snapped[*rows..].to_vec(),
                })?,
            };
            if !validate_layout(&snapped, self.problem.constraints)?.is_ok() {
                return Ok((f64::INFINITY, snapped));
            }
            snapped
        } else {
            layout.clone()
        };
        let value = objective_unchecked(spec, &layout, self.problem.carrier)?;
        Ok((spec.cost(value), layout))
    }
}

/// Particle swarm search over full position vectors (or track coordinates
/// when the constraints declare a cross-linked coupling).
///
/// Each iteration applies the inertia/cognitive/social velocity update with a
/// velocity clamp, then projects every particle into the feasible set. All
/// random draws come from one seeded stream in a fixed order, and particle
/// costs are evaluated concurrently, so results do not depend on the number
/// of workers. Stops when a minimized objective reaches `params.tolerance`,
/// after `pso.stall_iterations` iterations without improvement, or at
/// `params.max_iterations`.
pub fn pso_optimize(
    spec: &ObjectiveSpec,
    n: usize,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
    params: &OptimizerParams,
) -> Result<OptimizationResult> {
    let problem = Problem::new(spec, carrier, constraints)?;
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("at least one antenna is required"));
    }
    let encoding = match &constraints.coupling {
        None => Encoding::Free,
        Some(coupling) => {
            if coupling.element_count() != n {
                return Err(Error::invalid(format!(
                    "coupling implies {} elements, {n} requested",
                    coupling.element_count()
                )));
            }
            Encoding::Tracks {
                rows: coupling.row_track_coords.len(),
                coupling,
            }
        }
    };
    if matches!(encoding, Encoding::Free) && problem.dim() == crate::geometry::Dim::One && !constraints.fits_on_line(n) {
        return Err(Error::InfeasibleConstraints(format!(
            "{n} elements at spacing {} m do not fit in {} m",
            constraints.min_spacing_m, constraints.region.extent_m
        )));
    }
    let swarm = Swarm {
        problem,
        encoding,
        params,
        grid_step: carrier.wavelength_m / params.grid_density(problem.dim()),
    };
    let pso = &params.pso;
    let extent = constraints.region.extent_m;
    let vmax = pso.velocity_clamp * extent;
    let target_cost = match spec.sense() {
        Sense::Minimize => params.tolerance,
        Sense::Maximize => f64::NEG_INFINITY,
    };
    let mut rng = stream_rng(params.seed, 0);

    // Initial swarm: particle 0 is the even spread (or the declared tracks).
    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(pso.swarm_size);
    for p in 0..pso.swarm_size {
        let raw = match &swarm.encoding {
            Encoding::Free if p == 0 => flatten(&spread_layout(n, constraints)?),
            Encoding::Free => flatten(&random_layout(n, constraints, &mut rng)?),
            Encoding::Tracks { coupling, .. } if p == 0 => {
                let mut c = coupling.row_track_coords.clone();
                c.extend(&coupling.col_track_coords);
                c
            }
            Encoding::Tracks { coupling, .. } => (0..coupling.track_count())
                .map(|_| rng.gen::<f64>() * extent)
                .collect(),
        };
        positions.push(raw);
    }
    let dims = positions[0].len();
    let mut velocities: Vec<Vec<f64>> = (0..pso.swarm_size)
        .map(|_| (0..dims).map(|_| (2.0 * rng.gen::<f64>() - 1.0) * vmax).collect())
        .collect();

    let evaluate = |positions: &[Vec<f64>]| -> Result<Vec<(Vec<f64>, f64, ArrayLayout)>> {
        positions
            .par_iter()
            .map(|raw| {
                let (coords, layout) = swarm.repair(raw)?;
                let (cost, layout) = swarm.cost(&coords, &layout)?;
                Ok((coords, cost, layout))
            })
            .collect()
    };

    let initial = evaluate(&positions)?;
    let mut personal: Vec<(Vec<f64>, f64, ArrayLayout)> = initial.clone();
    positions = initial.into_iter().map(|(c, _, _)| c).collect();
    let personal_costs = |personal: &[(Vec<f64>, f64, ArrayLayout)]| personal.iter().map(|p| p.1).collect::<Vec<_>>();
    let mut global = best_index(&personal_costs(&personal)).expect("swarm is non-empty");
    let mut trace = vec![spec.cost(personal[global].1)];
    let mut iterations = 0;
    let mut stall = 0;

    while iterations < params.max_iterations && personal[global].1 > target_cost && stall < pso.stall_iterations {
        iterations += 1;
        let leader = personal[global].0.clone();
        for (p, (x, v)) in positions.iter_mut().zip(velocities.iter_mut()).enumerate() {
            for d in 0..dims {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let pull = pso.cognitive * r1 * (personal[p].0[d] - x[d]) + pso.social * r2 * (leader[d] - x[d]);
                v[d] = (pso.inertia * v[d] + pull).clamp(-vmax, vmax);
                x[d] += v[d];
            }
        }
        let evaluated = evaluate(&positions)?;
        for (p, (coords, cost, layout)) in evaluated.into_iter().enumerate() {
            if cost < personal[p].1 {
                personal[p] = (coords.clone(), cost, layout);
            }
            positions[p] = coords;
        }
        let next = best_index(&personal_costs(&personal)).expect("swarm is non-empty");
        if personal[next].1 < personal[global].1 {
            stall = 0;
        } else {
            stall += 1;
        }
        global = next;
        trace.push(spec.cost(personal[global].1));
    }

    let (_, best_cost, layout) = personal.swap_remove(global);
    if !best_cost.is_finite() {
        return Err(Error::InfeasibleConstraints("no particle reached a feasible grid layout".into()));
    }
    let converged = match spec.sense() {
        Sense::Minimize => best_cost <= params.tolerance,
        Sense::Maximize => stall >= pso.stall_iterations,
    };
    problem.finish(layout, iterations, converged, params.record_trace.then_some(trace))
}
