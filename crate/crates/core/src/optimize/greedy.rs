use rayon::prelude::*;

use super::{best_index, strictly_better, candidate_grid, element_terms, ElementTerm, ObjectiveSpec, OptimizationResult, OptimizerParams, Problem, Stats};
use crate::channel::CarrierSpec;
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Dim, PlacementConstraints, Point, GEOMETRY_TOLERANCE_M};

/// Refinement grid: `REFINE_FACTOR`× finer than the coarse grid, spanning one
/// coarse step on each side of the incumbent.
const REFINE_FACTOR: i32 = 4;

/// Places antennas one at a time, each at the candidate that gives the best
/// objective for the partial layout (MRT toward the target after every
/// placement). Ties go to the lowest candidate index.
///
/// Candidates form a grid at `params.grid_density`; in 2D each placement is
/// followed by one refinement pass over a 4× finer local grid when
/// `params.refine` is set. The refined point only replaces the coarse winner
/// when it is strictly better.
pub fn greedy_sequential_placement(
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
    if constraints.coupling.is_some() {
        return Err(Error::invalid("greedy placement does not support cross-linked coupling"));
    }
    let dim = problem.dim();
    let density = params.grid_density(dim);
    let grid = candidate_grid(constraints, density, carrier);
    if grid.is_empty() {
        return Err(Error::InfeasibleConstraints("candidate grid is empty".into()));
    }
    let terms = element_terms(spec, dim, &grid, carrier)?;
    let coarse_step = carrier.wavelength_m / density;
    let spacing_limit = constraints.min_spacing_m - GEOMETRY_TOLERANCE_M;

    let mut available = vec![true; grid.len()];
    let mut placed: Vec<Point> = Vec::with_capacity(n);
    let mut stats = Stats::empty(spec.adversary_channels().len());
    let mut trace = Vec::with_capacity(n);

    for m in 0..n {
        let size = m + 1;
        let costs: Vec<f64> = terms
            .par_iter()
            .zip(available.par_iter())
            .map(|(term, &ok)| {
                if !ok {
                    return Ok(f64::NAN);
                }
                spec.search_cost(&stats.with(term), size)
            })
            .collect::<Result<Vec<f64>>>()?;
        let Some(best) = best_index(&costs) else {
            return Err(Error::InfeasibleConstraints(format!(
                "candidate grid exhausted after {m} of {n} placements"
            )));
        };
        let mut choice = (grid[best], terms[best].clone(), costs[best]);

        if params.refine && dim == Dim::Two {
            if let Some(better) = refine(spec, carrier, constraints, &placed, &stats, size, grid[best], coarse_step)? {
                if strictly_better(better.2, choice.2) {
                    choice = better;
                }
            }
        }

        let (point, term, _) = choice;
        stats.add(&term);
        placed.push(point);
        trace.push(spec.value_from_stats(&stats, size)?);
        for (slot, candidate) in available.iter_mut().zip(&grid) {
            if *slot && candidate.distance(&point) < spacing_limit {
                *slot = false;
            }
        }
        // The chosen grid point itself is never reused, even at zero spacing.
        if point == grid[best] {
            available[best] = false;
        }
    }

    let layout = ArrayLayout::new(dim, placed)?;
    problem.finish(layout, n, true, params.record_trace.then_some(trace))
}

#[allow(clippy::too_many_arguments)]
fn refine(
    spec: &ObjectiveSpec,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
    placed: &[Point],
    stats: &Stats,
    size: usize,
    center: Point,
    coarse_step: f64,
) -> Result<Option<(Point, ElementTerm, f64)>> {
    let fine = coarse_step / REFINE_FACTOR as f64;
    let spacing_limit = constraints.min_spacing_m - GEOMETRY_TOLERANCE_M;
    let local: Vec<Point> = (-REFINE_FACTOR..=REFINE_FACTOR)
        .flat_map(|j| (-REFINE_FACTOR..=REFINE_FACTOR).map(move |i| (i, j)))
        .filter(|&(i, j)| (i, j) != (0, 0))
        .map(|(i, j)| Point::new(center.x + i as f64 * fine, center.y + j as f64 * fine))
        .filter(|p| constraints.region.contains(p))
        .filter(|p| placed.iter().all(|q| q.distance(p) >= spacing_limit && q != p))
        .collect();
    if local.is_empty() {
        return Ok(None);
    }
    let terms = element_terms(spec, Dim::Two, &local, carrier)?;
    let costs = terms
        .iter()
        .map(|t| spec.search_cost(&stats.with(t), size))
        .collect::<Result<Vec<f64>>>()?;
    Ok(best_index(&costs).map(|i| (local[i], terms[i].clone(), costs[i])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::LinkBudget;
    use crate::channel::{AmplitudeModel, Direction, PolarLocation};
    use crate::geometry::{validate_layout, MovingRegion};
    use std::f64::consts::PI;

    const LAMBDA: f64 = 0.01;

    fn carrier() -> CarrierSpec {
        CarrierSpec::from_wavelength(LAMBDA).unwrap()
    }

    fn line(extent: f64) -> PlacementConstraints {
        PlacementConstraints::new(MovingRegion::new(Dim::One, extent).unwrap(), LAMBDA / 2.0).unwrap()
    }

    #[test]
    fn single_antenna_takes_lowest_index() {
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(80.0).unwrap(), Direction::axis(150.0).unwrap()],
        };
        let r = greedy_sequential_placement(&spec, 1, &carrier(), &line(0.05), &OptimizerParams::default()).unwrap();
        assert_eq!(r.layout.xs(), vec![0.0]);
        assert!((r.objective_value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_antenna_nulls_single_direction() {
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(60.0).unwrap()],
        };
        // δ = 1/2 so the exact null sits at λ, which is on the 4-per-λ grid.
        let r = greedy_sequential_placement(&spec, 2, &carrier(), &line(0.05), &OptimizerParams::default()).unwrap();
        assert!(r.objective_value < 1e-25, "{}", r.objective_value);
        assert_eq!(r.trace.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn grid_exhaustion_is_reported() {
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(60.0).unwrap()],
        };
        // 0.01 m at 4 points per λ holds 5 candidates; λ/2 spacing admits 3.
        let err = greedy_sequential_placement(&spec, 4, &carrier(), &line(0.01), &OptimizerParams::default());
        assert!(matches!(err, Err(Error::InfeasibleConstraints(_))));
    }

    #[test]
    fn planar_secrecy_placement_is_feasible() {
        let spec = ObjectiveSpec::SecrecyRateNearField {
            rx: PolarLocation::new(15.0, PI / 4.0).unwrap(),
            eves: vec![PolarLocation::new(10.0, PI / 4.0).unwrap()],
            budget: LinkBudget {
                tx_power_dbm: 20.0,
                noise_power_dbm: -80.0,
            },
            amplitude: AmplitudeModel::FreeSpace,
        };
        // Both users share a direction, so positive secrecy needs an aperture
        // whose near field reaches the eavesdropper.
        let c = PlacementConstraints::new(MovingRegion::new(Dim::Two, 100.0 * LAMBDA).unwrap(), LAMBDA / 2.0).unwrap();
        let r = greedy_sequential_placement(&spec, 6, &carrier(), &c, &OptimizerParams::default()).unwrap();
        assert_eq!(r.layout.len(), 6);
        assert!(validate_layout(&r.layout, &c).unwrap().is_ok());
        assert!(r.objective_value > 0.0);
        let trace = r.trace.unwrap();
        assert!((trace[5] - r.objective_value).abs() < 1e-9);
    }
}
