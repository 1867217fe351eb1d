//! Antenna-position optimization.
//!
//! Every objective here is evaluated with maximum-ratio weights toward a
//! target channel `h_t`, which reduces it to two additive statistics over the
//! elements: the target energy `E = ‖h_t‖²` and one cross term
//! `S_k = h_tᴴ h_k` per adversary. Optimizers that add antennas one at a time
//! update those sums incrementally instead of re-resolving whole channels.
//!
//! | objective                 | value                                      | sense    |
//! |---------------------------|--------------------------------------------|----------|
//! | `NullDepth`               | `Σ_k |S_k|² / n²`                          | minimize |
//! | `SecrecyRateFarField`     | `R_s(P·E/σ², max_k P·|S_k|²/(E·σ²))`       | maximize |
//! | `SecrecyRateNearField`    | same, spherical-wave channels              | maximize |
//! | `LeakageMin`              | `Σ_k |S_k|² / E`                           | minimize |

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{mrt_weights, secrecy_rate_worst, LinkBudget, Weights};
use crate::channel::{AmplitudeModel, CarrierSpec, ChannelSpec, ChannelVector, Direction, PolarLocation};
use crate::error::{Error, Result};
use crate::geometry::{validate_layout, ArrayLayout, Dim, PlacementConstraints, Point};

mod alternating;
mod exhaustive;
mod gradient;
mod greedy;
mod pso;

pub use alternating::{alternating_apv_awv, WeightRule};
pub use exhaustive::{exhaustive_search, EXHAUSTIVE_COMBINATION_LIMIT};
pub use gradient::{beam_nulling_optimize, nulling_gradient};
pub use greedy::greedy_sequential_placement;
pub use pso::pso_optimize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Normalized correlation energy between the target steering vector and
    /// each null direction; zero exactly when every null is exact.
    NullDepth { target: Direction, nulls: Vec<Direction> },
    SecrecyRateFarField {
        rx: Direction,
        eves: Vec<Direction>,
        budget: LinkBudget,
    },
    SecrecyRateNearField {
        rx: PolarLocation,
        eves: Vec<PolarLocation>,
        budget: LinkBudget,
        #[serde(default)]
        amplitude: AmplitudeModel,
    },
    LeakageMin { target: ChannelSpec, eves: Vec<ChannelSpec> },
}

impl ObjectiveSpec {
    pub fn sense(&self) -> Sense {
        match self {
            ObjectiveSpec::NullDepth { .. } | ObjectiveSpec::LeakageMin { .. } => Sense::Minimize,
            ObjectiveSpec::SecrecyRateFarField { .. } | ObjectiveSpec::SecrecyRateNearField { .. } => {
                Sense::Maximize
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObjectiveSpec::NullDepth { target, nulls } => {
                target.validate()?;
                if nulls.is_empty() {
                    return Err(Error::invalid("null-depth objective needs at least one null"));
                }
                for n in nulls {
                    n.validate()?;
                    if n == target {
                        return Err(Error::invalid("the target direction cannot also be a null"));
                    }
                }
            }
            ObjectiveSpec::SecrecyRateFarField { rx, eves, budget } => {
                rx.validate()?;
                eves.iter().try_for_each(Direction::validate)?;
                budget.validate()?;
            }
            ObjectiveSpec::SecrecyRateNearField { rx, eves, budget, .. } => {
                budget.validate()?;
                for (i, e) in eves.iter().enumerate() {
                    if e.to_point().distance(&rx.to_point()) < 1e-12 {
                        return Err(Error::invalid("receiver and eavesdropper locations coincide"));
                    }
                    if eves[..i].iter().any(|o| o.to_point().distance(&e.to_point()) < 1e-12) {
                        return Err(Error::invalid("eavesdropper locations must be distinct"));
                    }
                }
            }
            ObjectiveSpec::LeakageMin { .. } => {}
        }
        Ok(())
    }

    /// Layout dimension the objective's far-field directions require, if any.
    pub fn required_dim(&self) -> Option<Dim> {
        match self {
            ObjectiveSpec::NullDepth { target, .. } => Some(target.dim()),
            ObjectiveSpec::SecrecyRateFarField { rx, .. } => Some(rx.dim()),
            ObjectiveSpec::SecrecyRateNearField { .. } => Some(Dim::Two),
            ObjectiveSpec::LeakageMin { .. } => None,
        }
    }

    pub fn target_channel(&self) -> ChannelSpec {
        match self {
            ObjectiveSpec::NullDepth { target, .. } => ChannelSpec::FarField(*target),
            ObjectiveSpec::SecrecyRateFarField { rx, .. } => ChannelSpec::FarField(*rx),
            ObjectiveSpec::SecrecyRateNearField { rx, amplitude, .. } => ChannelSpec::NearField {
                location: *rx,
                amplitude: *amplitude,
            },
            ObjectiveSpec::LeakageMin { target, .. } => target.clone(),
        }
    }

    pub fn adversary_channels(&self) -> Vec<ChannelSpec> {
        match self {
            ObjectiveSpec::NullDepth { nulls, .. } => nulls.iter().map(|d| ChannelSpec::FarField(*d)).collect(),
            ObjectiveSpec::SecrecyRateFarField { eves, .. } => {
                eves.iter().map(|d| ChannelSpec::FarField(*d)).collect()
            }
            ObjectiveSpec::SecrecyRateNearField { eves, amplitude, .. } => eves
                .iter()
                .map(|l| ChannelSpec::NearField {
                    location: *l,
                    amplitude: *amplitude,
                })
                .collect(),
            ObjectiveSpec::LeakageMin { eves, .. } => eves.clone(),
        }
    }

    /// Objective value from accumulated statistics of an `n`-element layout.
    pub(crate) fn value_from_stats(&self, stats: &Stats, n: usize) -> Result<f64> {
        let cross_energy = || stats.cross.iter().map(|s| s.norm_sqr());
        match self {
            ObjectiveSpec::NullDepth { .. } => Ok(cross_energy().sum::<f64>() / (n * n) as f64),
            ObjectiveSpec::SecrecyRateFarField { budget, .. } | ObjectiveSpec::SecrecyRateNearField { budget, .. } => {
                let e = stats.target_energy;
                if e <= 0.0 {
                    return Err(Error::invalid("target channel is zero"));
                }
                let scale = budget.snr_scale();
                let gamma_e: Vec<f64> = cross_energy().map(|c| scale * c / e).collect();
                secrecy_rate_worst(scale * e, &gamma_e)
            }
            ObjectiveSpec::LeakageMin { .. } => {
                let e = stats.target_energy;
                if e <= 0.0 {
                    return Err(Error::invalid("target channel is zero"));
                }
                Ok(cross_energy().sum::<f64>() / e)
            }
        }
    }

    /// Objective value under arbitrary weights. With MRT weights toward the
    /// target this agrees with [`evaluate_objective`] up to rounding.
    pub fn value_with_weights(&self, w: &Weights, target: &ChannelVector, adversaries: &[ChannelVector]) -> Result<f64> {
        let leak = |h: &ChannelVector| w.response(h.entries()).norm_sqr();
        match self {
            ObjectiveSpec::NullDepth { .. } => Ok(adversaries.iter().map(leak).sum::<f64>() / w.len() as f64),
            ObjectiveSpec::SecrecyRateFarField { budget, .. } | ObjectiveSpec::SecrecyRateNearField { budget, .. } => {
                let scale = budget.snr_scale();
                let gamma_e: Vec<f64> = adversaries.iter().map(|h| scale * leak(h)).collect();
                secrecy_rate_worst(scale * leak(target), &gamma_e)
            }
            ObjectiveSpec::LeakageMin { .. } => Ok(adversaries.iter().map(leak).sum()),
        }
    }

    /// Search cost from statistics (lower is better). Secrecy objectives use
    /// the unclamped rate difference, which has the same maximizers as the
    /// clamped rate whenever some candidate achieves a positive rate and still
    /// ranks candidates on the zero plateau.
    pub(crate) fn search_cost(&self, stats: &Stats, n: usize) -> Result<f64> {
        match self {
            ObjectiveSpec::SecrecyRateFarField { budget, .. } | ObjectiveSpec::SecrecyRateNearField { budget, .. } => {
                let e = stats.target_energy;
                if e <= 0.0 {
                    return Err(Error::invalid("target channel is zero"));
                }
                let scale = budget.snr_scale();
                let worst = stats.cross.iter().map(|s| scale * s.norm_sqr() / e).fold(0.0, f64::max);
                Ok(-((scale * e).ln_1p() - worst.ln_1p()) / std::f64::consts::LN_2)
            }
            _ => Ok(self.cost(self.value_from_stats(stats, n)?)),
        }
    }

    /// Lower is better.
    pub(crate) fn cost(&self, value: f64) -> f64 {
        match self.sense() {
            Sense::Minimize => value,
            Sense::Maximize => -value,
        }
    }
}

/// Additive per-layout statistics: `E = Σ_m |h_t,m|²`, `S_k = Σ_m conj(h_t,m)·h_k,m`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stats {
    pub target_energy: f64,
    pub cross: Vec<Complex64>,
}

impl Stats {
    pub fn empty(adversaries: usize) -> Self {
        Stats {
            target_energy: 0.0,
            cross: vec![Complex64::new(0.0, 0.0); adversaries],
        }
    }

    pub fn add(&mut self, term: &ElementTerm) {
        self.target_energy += term.target.norm_sqr();
        for (s, h) in self.cross.iter_mut().zip(&term.adversaries) {
            *s += term.target.conj() * h;
        }
    }

    pub fn with(&self, term: &ElementTerm) -> Stats {
        let mut next = self.clone();
        next.add(term);
        next
    }
}

/// Channel entries of one element toward the target and each adversary.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ElementTerm {
    pub target: Complex64,
    pub adversaries: Vec<Complex64>,
}

/// Per-element channel terms for a set of positions, computed in one pass per channel.
pub(crate) fn element_terms(
    spec: &ObjectiveSpec,
    dim: Dim,
    positions: &[Point],
    carrier: &CarrierSpec,
) -> Result<Vec<ElementTerm>> {
    let layout = ArrayLayout::new(dim, positions.to_vec())?;
    let target = spec.target_channel().resolve(&layout, carrier)?;
    let adversaries = spec
        .adversary_channels()
        .iter()
        .map(|c| c.resolve(&layout, carrier))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..layout.len())
        .map(|m| ElementTerm {
            target: target[m],
            adversaries: adversaries.iter().map(|h| h[m]).collect(),
        })
        .collect())
}

pub(crate) fn stats_of(spec: &ObjectiveSpec, layout: &ArrayLayout, carrier: &CarrierSpec) -> Result<Stats> {
    let adversaries = spec.adversary_channels().len();
    let mut stats = Stats::empty(adversaries);
    for term in element_terms(spec, layout.dim(), layout.positions(), carrier)? {
        stats.add(&term);
    }
    Ok(stats)
}

/// Objective value without the feasibility check; used inside optimizer loops
/// where the layout is feasible by construction.
pub(crate) fn objective_unchecked(spec: &ObjectiveSpec, layout: &ArrayLayout, carrier: &CarrierSpec) -> Result<f64> {
    spec.value_from_stats(&stats_of(spec, layout, carrier)?, layout.len())
}

fn check_dim(spec: &ObjectiveSpec, dim: Dim) -> Result<()> {
    if let Some(required) = spec.required_dim() {
        if required != dim {
            return Err(Error::invalid(format!(
                "objective needs a {required} layout, got {dim}"
            )));
        }
    }
    Ok(())
}

/// Value of `spec` for a feasible `layout`, with MRT weights toward the target.
pub fn evaluate_objective(
    spec: &ObjectiveSpec,
    layout: &ArrayLayout,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
) -> Result<f64> {
    check_dim(spec, layout.dim())?;
    let report = validate_layout(layout, constraints)?;
    if !report.is_ok() {
        return Err(Error::invalid(format!(
            "layout is infeasible: {} violation(s), first {:?}",
            report.violations.len(),
            report.violations[0]
        )));
    }
    objective_unchecked(spec, layout, carrier)
}

/// MRT weights toward the objective's target channel.
pub fn target_weights(spec: &ObjectiveSpec, layout: &ArrayLayout, carrier: &CarrierSpec) -> Result<Weights> {
    mrt_weights(&spec.target_channel().resolve(layout, carrier)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp as a fraction of the region extent.
    pub velocity_clamp: f64,
    /// Round particles to the candidate grid; used to compare against
    /// grid-restricted searches.
    pub snap_to_grid: bool,
    /// Iterations without improvement of the global best before stopping.
    pub stall_iterations: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            swarm_size: 64,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            velocity_clamp: 0.25,
            snap_to_grid: false,
            stall_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerParams {
    pub seed: u64,
    /// Candidate-grid density; `None` picks 4 per wavelength in 1D and 2 per
    /// wavelength per axis in 2D.
    pub grid_points_per_wavelength: Option<f64>,
    pub multistarts: usize,
    pub max_iterations: usize,
    /// Initial move length in meters; `None` means λ/10.
    pub step_init: Option<f64>,
    pub step_shrink: f64,
    /// Successful steps after which the step length resets to `step_init`.
    pub step_reset_after: usize,
    pub tolerance: f64,
    /// One coarse-to-fine pass (4× finer) around each greedy 2D placement.
    pub refine: bool,
    pub pso: PsoParams,
    pub record_trace: bool,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            seed: 0,
            grid_points_per_wavelength: None,
            multistarts: 32,
            max_iterations: 2000,
            step_init: None,
            step_shrink: 0.5,
            step_reset_after: 5,
            tolerance: 1e-10,
            refine: true,
            pso: PsoParams::default(),
            record_trace: true,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(g) = self.grid_points_per_wavelength {
            positive(g, "grid_points_per_wavelength")?;
        }
        if let Some(s) = self.step_init {
            positive(s, "step_init")?;
        }
        positive(self.tolerance, "tolerance")?;
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::invalid(format!(
                "step_shrink must lie in (0, 1), got {}",
                self.step_shrink
            )));
        }
        if self.multistarts == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("multistarts and max_iterations must be positive"));
        }
        let p = &self.pso;
        if p.swarm_size < 2 {
            return Err(Error::invalid("PSO needs a swarm of at least two particles"));
        }
        for (v, name) in [(p.inertia, "inertia"), (p.cognitive, "cognitive"), (p.social, "social")] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("PSO {name} must be finite and non-negative")));
            }
        }
        positive(p.velocity_clamp, "velocity_clamp")
    }

    pub fn grid_density(&self, dim: Dim) -> f64 {
        self.grid_points_per_wavelength.unwrap_or(match dim {
            Dim::One => 4.0,
            Dim::Two => 2.0,
        })
    }

    pub fn initial_step(&self, carrier: &CarrierSpec) -> f64 {
        self.step_init.unwrap_or(carrier.wavelength_m / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub layout: ArrayLayout,
    pub weights: Weights,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// Everything an optimizer needs besides its own parameters.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub spec: &'a ObjectiveSpec,
    pub carrier: &'a CarrierSpec,
    pub constraints: &'a PlacementConstraints,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a ObjectiveSpec, carrier: &'a CarrierSpec, constraints: &'a PlacementConstraints) -> Result<Self> {
        spec.validate()?;
        check_dim(spec, constraints.region.dim)?;
        Ok(Problem {
            spec,
            carrier,
            constraints,
        })
    }

    pub(crate) fn dim(&self) -> Dim {
        self.constraints.region.dim
    }

    pub(crate) fn finish(&self, layout: ArrayLayout, iterations: usize, converged: bool, trace: Option<Vec<f64>>) -> Result<OptimizationResult> {
        let objective_value = evaluate_objective(self.spec, &layout, self.carrier, self.constraints)?;
        let weights = target_weights(self.spec, &layout, self.carrier)?;
        Ok(OptimizationResult {
            layout,
            weights,
            objective_value,
            iterations,
            converged,
            trace,
        })
    }
}

/// Seeded generator for one independent stream (multistart or particle set).
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evenly spread layout: a line across the segment in 1D, a near-square grid
/// across the square in 2D.
pub(crate) fn spread_layout(n: usize, constraints: &PlacementConstraints) -> Result<ArrayLayout> {
    let extent = constraints.region.extent_m;
    let frac = |i: usize, k: usize| if k <= 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
    match constraints.region.dim {
        Dim::One => ArrayLayout::from_axis(&(0..n).map(|i| extent * frac(i, n)).collect::<Vec<_>>()),
        Dim::Two => {
            let cols = (n as f64).sqrt().ceil() as usize;
            let rows = n.div_ceil(cols);
            let positions = (0..n)
                .map(|i| Point::new(extent * frac(i % cols, cols), extent * frac(i / cols, rows)))
                .collect();
            ArrayLayout::new(Dim::Two, positions)
        }
    }
}

pub(crate) fn random_layout(n: usize, constraints: &PlacementConstraints, rng: &mut impl Rng) -> Result<ArrayLayout> {
    let extent = constraints.region.extent_m;
    match constraints.region.dim {
        Dim::One => ArrayLayout::from_axis(&(0..n).map(|_| rng.gen::<f64>() * extent).collect::<Vec<_>>()),
        Dim::Two => ArrayLayout::new(
            Dim::Two,
            (0..n)
                .map(|_| {
                    let x = rng.gen::<f64>() * extent;
                    let y = rng.gen::<f64>() * extent;
                    Point::new(x, y)
                })
                .collect(),
        ),
    }
}

/// Candidate positions at `density` points per wavelength (per axis in 2D),
/// including both ends of the region; 2D candidates are row-major.
pub fn candidate_grid(constraints: &PlacementConstraints, density: f64, carrier: &CarrierSpec) -> Vec<Point> {
    let extent = constraints.region.extent_m;
    let step = carrier.wavelength_m / density;
    let count = (extent / step + 1e-9).floor() as usize + 1;
    let axis: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
    match constraints.region.dim {
        Dim::One => axis.iter().map(|&x| Point::on_axis(x)).collect(),
        Dim::Two => axis
            .iter()
            .flat_map(|&y| axis.iter().map(move |&x| Point::new(x, y)))
            .collect(),
    }
}

/// Relative margin below which two costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `true` when `candidate` beats `incumbent` by more than [`TIE_TOLERANCE`].
pub(crate) fn strictly_better(candidate: f64, incumbent: f64) -> bool {
    if incumbent.is_infinite() {
        return candidate < incumbent;
    }
    candidate < incumbent - TIE_TOLERANCE * incumbent.abs().max(1.0)
}

/// Index of the smallest cost scanning in index order; a later index only
/// wins when strictly better, so ties go to the lowest index. NaN never wins.
pub(crate) fn best_index(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in costs.iter().enumerate() {
        if c.is_nan() {
            continue;
        }
        match best {
            Some(b) if !strictly_better(c, costs[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}
