use rayon::prelude::*;

use super::{candidate_grid, strictly_better, element_terms, ElementTerm, ObjectiveSpec, OptimizationResult, OptimizerParams, Problem, Stats};
use crate::channel::CarrierSpec;
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, PlacementConstraints, Point, GEOMETRY_TOLERANCE_M};

/// Largest number of grid combinations the exhaustive search will enumerate.
pub const EXHAUSTIVE_COMBINATION_LIMIT: u128 = 10_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

struct Search<'a> {
    spec: &'a ObjectiveSpec,
    grid: &'a [Point],
    terms: &'a [ElementTerm],
    n: usize,
    spacing_limit: f64,
}

#[derive(Clone)]
struct Best {
    cost: f64,
    combo: Vec<usize>,
}

impl Search<'_> {
    fn feasible_with(&self, chosen: &[usize], candidate: usize) -> bool {
        let p = &self.grid[candidate];
        chosen.iter().all(|&i| self.grid[i].distance(p) >= self.spacing_limit)
    }

    /// Depth-first over increasing index tuples; visiting order is
    /// lexicographic, and only strictly better tuples replace the incumbent.
    fn walk(&self, chosen: &mut Vec<usize>, stats: &Stats, best: &mut Option<Best>) -> Result<()> {
        if chosen.len() == self.n {
            let cost = self.spec.search_cost(stats, self.n)?;
            if best.as_ref().is_none_or(|b| strictly_better(cost, b.cost)) {
                *best = Some(Best {
                    cost,
                    combo: chosen.clone(),
                });
            }
            return Ok(());
        }
        let start = chosen.last().map_or(0, |&i| i + 1);
        let remaining = self.n - chosen.len();
        for candidate in start..=self.grid.len() - remaining {
            if !self.feasible_with(chosen, candidate) {
                continue;
            }
            chosen.push(candidate);
            self.walk(chosen, &stats.with(&self.terms[candidate]), best)?;
            chosen.pop();
        }
        Ok(())
    }
}

/// Global optimum over all `n`-subsets of the candidate grid that respect the
/// minimum spacing. Serves as the reference the other optimizers are checked
/// against; refuses instances with more than
/// [`EXHAUSTIVE_COMBINATION_LIMIT`] subsets.
pub fn exhaustive_search(
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
        return Err(Error::invalid("exhaustive search does not support cross-linked coupling"));
    }
    let dim = problem.dim();
    let grid = candidate_grid(constraints, params.grid_density(dim), carrier);
    let count = binomial(grid.len(), n);
    if count > EXHAUSTIVE_COMBINATION_LIMIT {
        return Err(Error::TooLargeInstance {
            count,
            limit: EXHAUSTIVE_COMBINATION_LIMIT,
        });
    }
    if n > grid.len() {
        return Err(Error::InfeasibleConstraints(format!(
            "{n} antennas cannot be placed on {} candidates",
            grid.len()
        )));
    }
    let terms = element_terms(spec, dim, &grid, carrier)?;
    let search = Search {
        spec,
        grid: &grid,
        terms: &terms,
        n,
        spacing_limit: constraints.min_spacing_m - GEOMETRY_TOLERANCE_M,
    };
    let empty = Stats::empty(spec.adversary_channels().len());

    // One branch per first index; branches are reduced in index order.
    let branches = (0..=grid.len() - n)
        .into_par_iter()
        .map(|first| {
            let mut best = None;
            search.walk(&mut vec![first], &empty.with(&terms[first]), &mut best)?;
            Ok(best)
        })
        .collect::<Result<Vec<Option<Best>>>>()?;
    let mut best: Option<Best> = None;
    for b in branches.into_iter().flatten() {
        if best.as_ref().is_none_or(|cur| strictly_better(b.cost, cur.cost)) {
            best = Some(b);
        }
    }
    let best = best.ok_or_else(|| {
        Error::InfeasibleConstraints(format!("no spacing-feasible placement of {n} antennas on the grid"))
    })?;
    let layout = ArrayLayout::new(dim, best.combo.iter().map(|&i| grid[i]).collect())?;
    problem.finish(layout, count as usize, true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Direction;
    use crate::geometry::{Dim, MovingRegion};

    const LAMBDA: f64 = 0.01;

    fn carrier() -> CarrierSpec {
        CarrierSpec::from_wavelength(LAMBDA).unwrap()
    }

    fn line(extent: f64) -> PlacementConstraints {
        PlacementConstraints::new(MovingRegion::new(Dim::One, extent).unwrap(), LAMBDA / 2.0).unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(21, 2), 210);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(40401, 3), 40401u128 * 40400 * 40399 / 6);
    }

    #[test]
    fn single_antenna_scan() {
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(80.0).unwrap()],
        };
        let r = exhaustive_search(&spec, 1, &carrier(), &line(0.05), &OptimizerParams::default()).unwrap();
        assert_eq!(r.layout.xs(), vec![0.0]);
        assert_eq!(r.iterations, 21);
    }

    /// Closed-form optimum: two elements separated by λ/(2|δ|) null one
    /// direction; the grid optimum must be the nearest grid separation.
    #[test]
    fn two_antennas_match_closed_form_spacing() {
        let c = carrier();
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(70.0).unwrap()],
        };
        let r = exhaustive_search(&spec, 2, &c, &line(5.0 * LAMBDA), &OptimizerParams::default()).unwrap();
        let delta = 70f64.to_radians().cos();
        let ideal = LAMBDA / (2.0 * delta);
        let xs = r.layout.xs();
        let sep = xs[1] - xs[0];
        assert!((sep - ideal).abs() <= LAMBDA / 8.0 + 1e-12, "{sep} vs {ideal}");
    }

    #[test]
    fn oversized_instances_are_refused() {
        let spec = ObjectiveSpec::NullDepth {
            target: Direction::axis(90.0).unwrap(),
            nulls: vec![Direction::axis(80.0).unwrap()],
        };
        let err = exhaustive_search(&spec, 6, &carrier(), &line(100.0 * LAMBDA), &OptimizerParams::default());
        assert!(matches!(err, Err(Error::TooLargeInstance { .. })));
    }
}
