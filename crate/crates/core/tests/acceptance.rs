//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are written against the textbook formulas and do not call
//! the library routines they check.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use masim::beamforming::{beam_gain, mrt_weights, zf_weights, LinkBudget};
use masim::channel::{
    channel_correlation, multipath_channel, nearfield_response, steering_vector, AmplitudeModel, CarrierSpec,
    ChannelSpec, ChannelVector, Direction, PathSpec, PolarLocation,
};
use masim::geometry::{
    aperture, make_ula, project_to_feasible, ArrayLayout, Dim, MovingRegion, PlacementConstraints, Point,
};
use masim::optimize::{
    exhaustive_search, greedy_sequential_placement, nulling_gradient, pso_optimize, ObjectiveSpec,
    OptimizerParams, PsoParams, Sense,
};
use masim::scenario::{self, ScenarioConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 0.01;

fn carrier() -> CarrierSpec {
    CarrierSpec::from_wavelength(LAMBDA).unwrap()
}

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    scenario::load_config(&path).unwrap()
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

/// Retained gain fraction `|wᴴa(θ₀)|²/8` of zero-forcing on ULA(8, λ/2).
fn zf_gain_retention() -> Result<String, String> {
    let started = Instant::now();
    let c = carrier();
    let ula = make_ula(8, LAMBDA / 2.0, 0.0).unwrap();
    let a = |deg: f64| steering_vector(&ula, &Direction::axis(deg).unwrap(), &c).unwrap();
    let w = zf_weights(&a(90.0), &[a(80.0), a(100.0), a(150.0)]).unwrap();
    let retained = beam_gain(&w, &a(90.0)).unwrap() / 8.0;
    within(Duration::from_secs(1), started.elapsed())?;
    let detail = format!("retained fraction {retained:.6}, required [0.385, 0.445]");
    if (0.385..=0.445).contains(&retained) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ma_beam_nulling() -> Result<String, String> {
    let started = Instant::now();
    let run = scenario::compute_beampattern(&config("beampattern.json")).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let gain = run.ma_target_gain;
    let worst_null = run.ma_eve_gains_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let detail = format!(
        "objective {:.3e}, gain {gain:.15}, worst null {worst_null:.1} dB, {elapsed:.2?}",
        run.ma.objective_value
    );
    within(Duration::from_secs(60), elapsed)?;
    if run.ma.objective_value <= 1e-4 && worst_null <= -40.0 && (gain - 8.0).abs() <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near_field_focusing() -> Result<String, String> {
    let started = Instant::now();
    let cfg = config("focusmap.json");
    let run = scenario::compute_focusmap(&cfg).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let panel = |extent: f64| run.panels.iter().find(|p| p.extent_wavelengths == extent).unwrap();
    let (small, large) = (panel(10.0), panel(100.0));
    if run.grid.nx < 200 || run.grid.ny < 200 {
        return Err(format!("grid {}×{} is below 200×200", run.grid.nx, run.grid.ny));
    }
    let detail = format!(
        "-3 dB cells {} (100λ) vs {} (10λ), eve gain {:.2} dB vs {:.2} dB, {elapsed:.2?}",
        large.focal_cell_count, small.focal_cell_count, large.eve_gains_db[0], small.eve_gains_db[0]
    );
    within(Duration::from_secs(600), elapsed)?;
    if large.focal_cell_count < small.focal_cell_count && large.eve_gains_db[0] < small.eve_gains_db[0] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secrecy_sweep_ordering() -> Result<String, String> {
    let started = Instant::now();
    let cfg = config("secrecy_sweep.json");
    let run = scenario::compute_secrecy_sweep(&cfg).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    within(Duration::from_secs(1200), elapsed)?;
    for &p in &[20.0, 30.0] {
        let rows: Vec<_> = run.rows.iter().filter(|r| r.power_dbm == p).collect();
        let ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
        if ms != [4, 8, 16, 36, 64] {
            return Err(format!("antenna counts {ms:?} at {p} dBm"));
        }
        for r in &rows {
            if !(r.rs_ma >= r.rs_sparse && r.rs_sparse >= r.rs_dense) {
                return Err(format!("ordering broken at M = {}, {p} dBm: {r:?}", r.m));
            }
        }
        for pair in rows.windows(2) {
            if pair[1].rs_ma < pair[0].rs_ma {
                return Err(format!("rs_ma decreases from M = {} to {} at {p} dBm", pair[0].m, pair[1].m));
            }
        }
    }
    let top = |p: f64| run.rows.iter().find(|r| r.m == 64 && r.power_dbm == p).unwrap().rs_ma;
    Ok(format!("rs_ma(64) = {:.3} / {:.3} bps/Hz at 20 / 30 dBm, {elapsed:.2?}", top(20.0), top(30.0)))
}

fn steer(xs: &[f64], theta_deg: f64) -> Vec<Complex64> {
    let u = theta_deg.to_radians().cos();
    xs.iter().map(|x| Complex64::from_polar(1.0, 2.0 * PI / LAMBDA * x * u)).collect()
}

fn cross(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Independent value of each objective for an on-axis layout.
fn reference_value(spec: &ObjectiveSpec, xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let theta = |d: &Direction| match d {
        Direction::Axis { theta_deg } => *theta_deg,
        _ => unreachable!(),
    };
    match spec {
        ObjectiveSpec::NullDepth { target, nulls } => {
            let a0 = steer(xs, theta(target));
            nulls.iter().map(|d| cross(&a0, &steer(xs, theta(d))).norm_sqr()).sum::<f64>() / (n * n)
        }
        ObjectiveSpec::SecrecyRateFarField { rx, eves, budget } => {
            let scale = 10f64.powf((budget.tx_power_dbm - budget.noise_power_dbm) / 10.0);
            let a0 = steer(xs, theta(rx));
            let worst = eves
                .iter()
                .map(|d| scale * cross(&a0, &steer(xs, theta(d))).norm_sqr() / n)
                .fold(0.0, f64::max);
            ((1.0 + scale * n).log2() - (1.0 + worst).log2()).max(0.0)
        }
        ObjectiveSpec::LeakageMin { target, eves } => {
            let dir = |c: &ChannelSpec| match c {
                ChannelSpec::FarField(d) => theta(d),
                _ => unreachable!(),
            };
            let a0 = steer(xs, dir(target));
            eves.iter().map(|c| cross(&a0, &steer(xs, dir(c))).norm_sqr()).sum::<f64>() / n
        }
        _ => unreachable!(),
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> ObjectiveSpec {
    let angle = |rng: &mut ChaCha8Rng| Direction::axis(rng.gen_range(0.0..180.0)).unwrap();
    let target = angle(rng);
    let k = rng.gen_range(1..=3);
    let others: Vec<Direction> = (0..k).map(|_| angle(rng)).collect();
    match rng.gen_range(0..3) {
        0 => ObjectiveSpec::NullDepth { target, nulls: others },
        1 => ObjectiveSpec::SecrecyRateFarField {
            rx: target,
            eves: others,
            budget: LinkBudget {
                tx_power_dbm: rng.gen_range(0.0..20.0),
                noise_power_dbm: 0.0,
            },
        },
        _ => ObjectiveSpec::LeakageMin {
            target: ChannelSpec::FarField(target),
            eves: others.into_iter().map(ChannelSpec::FarField).collect(),
        },
    }
}

fn better(sense: Sense, a: f64, b: f64) -> bool {
    let margin = 1e-12 * b.abs().max(1.0);
    match sense {
        Sense::Minimize => a < b - margin,
        Sense::Maximize => a > b + margin,
    }
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let c = carrier();
    let step = LAMBDA / 4.0;
    let mut unique = 0;
    for case in 0..100 {
        let spec = random_spec(&mut rng);
        let cells = rng.gen_range(4..=20usize);
        let extent = cells as f64 * step;
        let constraints = PlacementConstraints::new(MovingRegion::new(Dim::One, extent).unwrap(), LAMBDA / 2.0).unwrap();
        let grid: Vec<f64> = (0..=cells).map(|k| k as f64 * step).collect();

        let sense = spec.sense();
        let mut values = Vec::new();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                if grid[j] - grid[i] >= LAMBDA / 2.0 - 1e-12 {
                    values.push(((i, j), reference_value(&spec, &[grid[i], grid[j]])));
                }
            }
        }
        let (best_pair, best) = values
            .iter()
            .fold(None::<((usize, usize), f64)>, |acc, &(pair, v)| match acc {
                Some((_, b)) if !better(sense, v, b) => acc,
                _ => Some((pair, v)),
            })
            .unwrap();
        let runner_up_close = values
            .iter()
            .filter(|(p, _)| *p != best_pair)
            .any(|(_, v)| (v - best).abs() <= 1e-9 * best.abs().max(1e-300));

        let params = OptimizerParams::default();
        let exh = exhaustive_search(&spec, 2, &c, &constraints, &params).map_err(|e| format!("case {case}: {e}"))?;
        if (exh.objective_value - best).abs() > 1e-12 * best.abs().max(1.0) {
            return Err(format!("case {case}: exhaustive {} vs brute force {best}", exh.objective_value));
        }
        if !runner_up_close {
            unique += 1;
            let xs = exh.layout.xs();
            if xs != [grid[best_pair.0], grid[best_pair.1]] {
                return Err(format!("case {case}: exhaustive picked {xs:?}, brute force {best_pair:?}"));
            }
        }

        let greedy = greedy_sequential_placement(&spec, 2, &c, &constraints, &params).map_err(|e| e.to_string())?;
        let pso_params = OptimizerParams {
            seed: case,
            max_iterations: 150,
            pso: PsoParams {
                swarm_size: 16,
                snap_to_grid: true,
                stall_iterations: 40,
                ..PsoParams::default()
            },
            ..OptimizerParams::default()
        };
        let pso = pso_optimize(&spec, 2, &c, &constraints, &pso_params).map_err(|e| e.to_string())?;
        for (name, v) in [("greedy", greedy.objective_value), ("pso", pso.objective_value)] {
            if better(sense, v, exh.objective_value) {
                return Err(format!("case {case}: {name} {v} beats exhaustive {}", exh.objective_value));
            }
        }
    }
    Ok(format!("100 instances, {unique} with a unique optimum compared by layout"))
}

fn random_layout(rng: &mut ChaCha8Rng, n: usize, extent: f64, spacing: f64) -> ArrayLayout {
    let k = PlacementConstraints::new(MovingRegion::new(Dim::One, extent).unwrap(), spacing).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..extent)).collect();
    project_to_feasible(&ArrayLayout::from_axis(&xs).unwrap(), &k).unwrap()
}

fn gradient_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = carrier();
    let h = 1e-6 * LAMBDA;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.gen_range(2..=10);
        let layout = random_layout(&mut rng, n, 10.0 * LAMBDA, LAMBDA / 2.0);
        let target = Direction::axis(rng.gen_range(20.0..160.0)).unwrap();
        let nulls = (0..rng.gen_range(1..=3))
            .map(|_| Direction::axis(rng.gen_range(0.0..180.0)).unwrap())
            .collect();
        let spec = ObjectiveSpec::NullDepth { target, nulls };
        let analytic = nulling_gradient(&spec, &layout, &c).map_err(|e| e.to_string())?;
        let xs = layout.xs();
        let numeric: Vec<f64> = (0..n)
            .map(|i| {
                let mut plus = xs.clone();
                let mut minus = xs.clone();
                plus[i] += h;
                minus[i] -= h;
                (reference_value(&spec, &plus) - reference_value(&spec, &minus)) / (2.0 * h)
            })
            .collect();
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
        if scale < 1e-6 {
            continue;
        }
        let rel = diff / scale;
        worst = worst.max(rel);
        if rel > 1e-5 {
            return Err(format!("case {case}: relative error {rel:.3e}"));
        }
    }
    Ok(format!("worst relative error {worst:.3e} over 100 layouts"))
}

fn unit_complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn nonzero_scalar() -> impl Strategy<Value = Complex64> {
    (0.1..10.0f64, -PI..PI).prop_map(|(r, phi)| Complex64::from_polar(r, phi))
}

fn axis_layout() -> impl Strategy<Value = ArrayLayout> {
    prop::collection::vec(0.0..10.0 * LAMBDA, 1..16).prop_map(|xs| ArrayLayout::from_axis(&xs).unwrap())
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(
        PropConfig {
            cases: 1000,
            failure_persistence: None,
            ..PropConfig::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn invariant_suite() -> Result<String, String> {
    let c = carrier();
    run_property("unit-modulus steering", (axis_layout(), 0.0..=180.0f64), |(layout, theta)| {
        let a = steering_vector(&layout, &Direction::axis(theta).unwrap(), &c).unwrap();
        for z in a.entries() {
            prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
        }
        Ok(())
    })?;

    run_property(
        "MRT gain",
        (axis_layout(), prop::collection::vec((0.0..=180.0f64, unit_complex()), 1..5)),
        |(layout, paths)| {
            let paths: Vec<PathSpec> = paths
                .into_iter()
                .map(|(t, coeff)| PathSpec {
                    direction: Direction::axis(t).unwrap(),
                    coeff,
                })
                .collect();
            let h = multipath_channel(&layout, &paths, &c).unwrap();
            prop_assume!(h.norm_sqr() > 1e-9);
            let w = mrt_weights(&h).unwrap();
            let g = beam_gain(&w, &h).unwrap();
            prop_assert!((g - h.norm_sqr()).abs() <= 1e-12 * h.norm_sqr());
            Ok(())
        },
    )?;

    run_property(
        "ZF null depth",
        (3usize..12, 0.0..=180.0f64, prop::collection::vec(0.0..=180.0f64, 1..6), any::<u64>()),
        |(n, theta0, null_angles, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = random_layout(&mut rng, n, 10.0 * LAMBDA, LAMBDA / 2.0);
            let k = null_angles.len().min(n - 1);
            let angles = &null_angles[..k];
            prop_assume!(angles.iter().all(|t| (t - theta0).abs() > 1.0));
            let a0 = steering_vector(&layout, &Direction::axis(theta0).unwrap(), &c).unwrap();
            let nulls: Vec<ChannelVector> = angles
                .iter()
                .map(|&t| steering_vector(&layout, &Direction::axis(t).unwrap(), &c).unwrap())
                .collect();
            let Ok(w) = zf_weights(&a0, &nulls) else {
                return Err(TestCaseError::reject("target inside the null span"));
            };
            for a in &nulls {
                prop_assert!(beam_gain(&w, a).unwrap() <= 1e-20 * n as f64);
            }
            Ok(())
        },
    )?;

    let vectors = || prop::collection::vec(unit_complex(), 4);
    run_property(
        "correlation range and scale invariance",
        (vectors(), vectors(), nonzero_scalar(), nonzero_scalar()),
        |(h1, h2, s1, s2)| {
            let h1 = ChannelVector::new(h1).unwrap();
            let h2 = ChannelVector::new(h2).unwrap();
            prop_assume!(h1.norm() > 1e-6 && h2.norm() > 1e-6);
            let rho = channel_correlation(&h1, &h2).unwrap();
            prop_assert!((0.0..=1.0).contains(&rho));
            let scaled = channel_correlation(&h1.scaled(s1), &h2.scaled(s2)).unwrap();
            prop_assert!((rho - scaled).abs() <= 1e-12);
            Ok(())
        },
    )?;

    run_property(
        "global shift",
        (axis_layout(), 0.0..=180.0f64, 0.0..=180.0f64, -1.0..1.0f64),
        |(layout, theta0, theta, shift)| {
            let w = mrt_weights(&steering_vector(&layout, &Direction::axis(theta0).unwrap(), &c).unwrap()).unwrap();
            let dir = Direction::axis(theta).unwrap();
            let g = beam_gain(&w, &steering_vector(&layout, &dir, &c).unwrap()).unwrap();
            let moved = layout.translated(shift, 0.0);
            let g2 = beam_gain(&w, &steering_vector(&moved, &dir, &c).unwrap()).unwrap();
            prop_assert!((g - g2).abs() <= 1e-9 * layout.len() as f64);
            Ok(())
        },
    )?;

    run_property(
        "far-field limit",
        (prop::collection::vec((0.0..2.0 * LAMBDA, 0.0..2.0 * LAMBDA), 2..10), -PI..PI),
        |(pts, phi)| {
            let layout = ArrayLayout::new(Dim::Two, pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
            // Aperture measured around the phase reference at the origin.
            let reach = pts.iter().map(|&(x, y)| x.hypot(y)).fold(aperture(&layout), f64::max);
            prop_assume!(reach > 0.0);
            let d = 1e4 * reach;
            let near = nearfield_response(&layout, &PolarLocation::new(d, phi).unwrap(), &c, AmplitudeModel::Unit).unwrap();
            let far = steering_vector(&layout, &Direction::planar(phi), &c).unwrap();
            let common = Complex64::from_polar(1.0, 2.0 * PI / LAMBDA * d);
            for (hn, af) in near.entries().iter().zip(far.entries()) {
                let err = (hn * af.conj() * common).arg().abs();
                prop_assert!(err <= 1e-3, "phase error {}", err);
            }
            Ok(())
        },
    )?;

    run_property(
        "projection idempotence",
        (prop::collection::vec((-0.02..0.12f64, -0.02..0.12f64), 1..12), any::<bool>()),
        |(pts, planar)| {
            let k = PlacementConstraints::new(
                MovingRegion::new(if planar { Dim::Two } else { Dim::One }, 0.1).unwrap(),
                LAMBDA / 2.0,
            )
            .unwrap();
            let layout = if planar {
                ArrayLayout::new(Dim::Two, pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
            } else {
                ArrayLayout::from_axis(&pts.iter().map(|p| p.0).collect::<Vec<_>>()).unwrap()
            };
            let Ok(once) = project_to_feasible(&layout, &k) else {
                return Err(TestCaseError::reject("infeasible"));
            };
            let twice = project_to_feasible(&once, &k).unwrap();
            prop_assert_eq!(once, twice);
            Ok(())
        },
    )?;
    Ok("7 properties × 1000 cases".into())
}

fn reproducibility() -> Result<String, String> {
    let experiments: [(&str, &str, fn(&ScenarioConfig, &std::path::Path) -> masim::Result<scenario::ExperimentReport>); 4] = [
        ("beampattern", "beampattern.json", scenario::run_beampattern),
        ("focusmap", "focusmap.json", scenario::run_focusmap),
        ("secrecy", "secrecy_sweep.json", scenario::run_secrecy_sweep),
        ("optimize", "optimize_pso.json", scenario::run_optimize),
    ];
    let mut files = 0;
    for (name, file, run) in experiments {
        let cfg = config(file);
        let mut outputs = Vec::new();
        for threads in [1, 4, 1] {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let report = pool.install(|| run(&cfg, dir.path())).map_err(|e| format!("{name}: {e}"))?;
            let bytes: Vec<(String, Vec<u8>)> = report
                .files
                .iter()
                .map(|f| (f.path.clone(), std::fs::read(dir.path().join(&f.path)).unwrap()))
                .collect();
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{name}: outputs differ between runs"));
        }
        files += outputs[0].len();
    }
    Ok(format!("{files} files byte-identical across 1, 4 and 1 worker threads"))
}

fn main() {
    let criteria: [(u8, &str, fn() -> Result<String, String>); 8] = [
        (1, "zero-forcing gain retention", zf_gain_retention),
        (2, "movable-array beam nulling", ma_beam_nulling),
        (3, "near-field focusing trend", near_field_focusing),
        (4, "secrecy sweep ordering", secrecy_sweep_ordering),
        (5, "optimizer oracle equivalence", oracle_equivalence),
        (6, "nulling gradient check", gradient_check),
        (7, "invariant suite", invariant_suite),
        (8, "reproducibility across worker counts", reproducibility),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} {name}: PASS ({detail}) [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} {name}: FAIL ({detail}) [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
