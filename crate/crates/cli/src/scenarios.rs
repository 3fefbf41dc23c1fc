//! Named experiments over the deformed-tube laboratory.
//!
//! Every scenario builds its charts from the configuration, runs a fixed
//! set of quantitative checks and returns a [`ScenarioReport`] whose bytes
//! depend only on (config, seed). Ensembles fan out over rayon with one
//! RNG stream per task id, so the thread count never changes a report.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;

use geoflow_core::cone::{
    detect_splitting, lyapunov_spectrum, norm_growth_rate, polynomial_growth_slope,
    sample_boundary_state, strong_growth_rate, task_rng, theta, theta_derivative_numeric,
    theta_derivative_symmetric, ConeSpec, OrbitClass, SplittingPlan, VerdictLabel,
};
use geoflow_core::deform::{
    check_estimates, check_f_bound, deformed_symmetric_chart, BumpProfile, DeformationSpec,
};
use geoflow_core::flow::{
    integrate_geodesic, integrate_orbit, ConstantJacobi, JacobiPath, JacobiState, OrbitOptions,
    PhasePoint,
};
use geoflow_core::geom::{ChartPoint, MetricChart};
use geoflow_core::linalg::linear_fit;
use geoflow_core::models::{symmetric_chart, ProductModel, SymmetricModel};
use rand::Rng;

use crate::config::ScenarioConfig;
use crate::report::{CheckRecord, ScenarioReport, SeriesTable, ValueSource};

pub const SCENARIOS: &[&str] = &[
    "symmetric-cones",
    "eberlein-flat",
    "central-bundle",
    "parallel-cones",
    "crossing-time",
    "net-invariance",
    "strong-rates",
    "product-gap",
    "bump-bounds",
];

pub fn run_scenario(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    match name {
        "symmetric-cones" => symmetric_cones(cfg),
        "eberlein-flat" => eberlein_flat(cfg),
        "central-bundle" => central_bundle(cfg),
        "parallel-cones" => parallel_cones(cfg),
        "crossing-time" => crossing_time(cfg),
        "net-invariance" => net_invariance(cfg),
        "strong-rates" => strong_rates(cfg),
        "product-gap" => product_gap(cfg),
        "bump-bounds" => bump_bounds(cfg),
        other => bail!("unknown scenario `{other}`; expected one of {}", SCENARIOS.join(", ")),
    }
}

struct Lab {
    model: SymmetricModel,
    base: MetricChart<f64>,
    gstar: MetricChart<f64>,
}

impl Lab {
    fn build(cfg: &ScenarioConfig) -> Result<Self> {
        Self::build_with_epsilon(cfg, cfg.epsilon_tube)
    }

    fn build_with_epsilon(cfg: &ScenarioConfig, epsilon: f64) -> Result<Self> {
        let model = SymmetricModel::new(cfg.dimension_n, cfg.block_dim_r)?;
        let base = symmetric_chart::<f64>(&model, cfg.period_time, cfg.chart_radius)?;
        let spec = DeformationSpec::with_amplitude(
            cfg.dimension_n,
            cfg.block_dim_r,
            epsilon,
            cfg.tau_ramp,
            cfg.amplitude_scale,
        )?;
        let gstar = deformed_symmetric_chart(&model, cfg.period_time, cfg.chart_radius, &spec)?;
        Ok(Lab { model, base, gstar })
    }

    fn m(&self) -> usize {
        self.model.transverse_dim()
    }
}

/// Isotropic unit Jacobi state.
fn sample_unit_state<R: Rng>(rng: &mut R, m: usize) -> JacobiState<f64> {
    loop {
        let draw: Vec<f64> =
            (0..2 * m).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let s = JacobiState::from_flat(&draw);
        if s.norm_sq() > 1e-6 {
            return s.normalized();
        }
    }
}

// ---------------------------------------------------------------------------
// symmetric-cones: alignment dynamics of the undeformed block model.
// ---------------------------------------------------------------------------

fn symmetric_cones(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let lab = Lab::build(cfg)?;
    let mut report = ScenarioReport::new("symmetric-cones", cfg.echo());
    let m = lab.m();
    let r = cfg.block_dim_r;

    // One short axis segment is enough for the derivative stencils.
    let start = PhasePoint::axis_start(&lab.base, 0.0);
    let seg = integrate_geodesic(&lab.base, &start, 0.2, 1e-11)?;

    // Numeric derivative against the closed formula on random unit states.
    let deviations: Vec<f64> = (0..1000usize)
        .into_par_iter()
        .map(|task| {
            let mut rng = task_rng(cfg.seed, task as u64);
            let s = sample_unit_state(&mut rng, m);
            let spec = ConeSpec::unstable(r, 1.5).expect("valid opening");
            let num = theta_derivative_numeric(&lab.base, &seg, &s, &spec, 1e-3)
                .expect("numeric derivative");
            let exact = theta_derivative_symmetric(&s, &spec).expect("closed form");
            (num - exact).abs()
        })
        .collect();
    let worst = deviations.iter().cloned().fold(0.0, f64::max);
    report.checks.push(CheckRecord::at_most(
        "alignment-rate-oracle-disagreement",
        worst,
        1e-5,
        ValueSource::Measured,
    ));

    // Boundary positivity across the opening grid.
    let mut table = SeriesTable::new("boundary-alignment-rate", &["opening", "min_rate", "mean_rate"]);
    let mut global_min = f64::INFINITY;
    for (ci, &opening) in cfg.cone_openings.iter().enumerate() {
        let spec = ConeSpec::unstable(r, opening)?;
        let rates: Vec<f64> = (0..200usize)
            .into_par_iter()
            .map(|task| {
                let mut rng = task_rng(cfg.seed, (1000 + ci * 200 + task) as u64);
                let s = sample_boundary_state::<f64, _>(&mut rng, m, &spec)
                    .expect("boundary sample");
                theta_derivative_numeric(&lab.base, &seg, &s, &spec, 1e-3)
                    .expect("numeric derivative")
            })
            .collect();
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        global_min = global_min.min(min);
        table.push(vec![opening.into(), min.into(), mean.into()]);
    }
    report.series.push(table);
    report.checks.push(CheckRecord::at_least(
        "min-boundary-alignment-rate",
        global_min,
        1e-3,
        ValueSource::Model,
    ));

    // Spot check of the strong growth law inside the cone.
    let long = integrate_geodesic(&lab.base, &start, cfg.t_end_time, cfg.tol_integration)?;
    let spec = ConeSpec::unstable(r, 1.5)?;
    let mut worst_rate_err = 0.0f64;
    for task in 0..20u64 {
        let mut rng = task_rng(cfg.seed, 9000 + task);
        let s = sample_boundary_state::<f64, _>(&mut rng, m, &spec)?;
        let (rate, _) = strong_growth_rate(&long, &s, &spec, cfg.t_end_time, 0.25)?;
        worst_rate_err = worst_rate_err.max((rate - 1.0).abs());
    }
    report.checks.push(CheckRecord::at_most(
        "strong-rate-deviation",
        worst_rate_err,
        0.02,
        ValueSource::Model,
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// eberlein-flat: the deformation cancels the weak axial curvature exactly.
// ---------------------------------------------------------------------------

fn eberlein_flat(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let lab = Lab::build(cfg)?;
    let mut report = ScenarioReport::new("eberlein-flat", cfg.echo());
    let n = cfg.dimension_n;
    let r = cfg.block_dim_r;

    let mut weak_worst = 0.0f64;
    let mut strong_worst = 0.0f64;
    let mut gamma_worst = 0.0f64;
    let mut table = SeriesTable::new("axis-curvature-diagonal", &["t", "index", "value"]);
    for s in 0..64 {
        let t = s as f64 * cfg.period_time / 64.0;
        let k = lab.gstar.axis_curvature_operator(t)?;
        for i in 0..n - 1 {
            if i < r {
                strong_worst = strong_worst.max((k[(i, i)] + 1.0).abs());
            } else {
                weak_worst = weak_worst.max(k[(i, i)].abs());
            }
            if s % 8 == 0 {
                table.push(vec![t.into(), i.into(), k[(i, i)].into()]);
            }
        }
        let p = ChartPoint::axis(t, n);
        let gamma = lab.gstar.christoffel(&p)?;
        gamma_worst = gamma_worst.max(gamma.christoffel.max_abs());
    }
    report.series.push(table);
    report.checks.push(CheckRecord::at_most(
        "weak-axis-curvature-max",
        weak_worst,
        1e-8,
        ValueSource::Model,
    ));
    report.checks.push(CheckRecord::at_most(
        "strong-axis-curvature-error",
        strong_worst,
        1e-8,
        ValueSource::Model,
    ));
    report.checks.push(CheckRecord::at_most(
        "axis-christoffel-max",
        gamma_worst,
        1e-10,
        ValueSource::Model,
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// central-bundle: flat and linear Jacobi fields along the deformed axis.
// ---------------------------------------------------------------------------

fn central_bundle(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let lab = Lab::build(cfg)?;
    let mut report = ScenarioReport::new("central-bundle", cfg.echo());
    let m = lab.m();
    let r = cfg.block_dim_r;
    let weak = r; // first weak transverse index

    let start = PhasePoint::axis_start(&lab.gstar, 0.0);
    let seg10 = integrate_geodesic(&lab.gstar, &start, 10.0, 1e-11)?;

    // (0, e_k) -> (t e_k, e_k).
    let mut linear = JacobiState::zeros(m);
    linear.eta[weak] = 1.0;
    let got = seg10.propagate(&linear);
    let mut want = JacobiState::zeros(m);
    want.xi[weak] = 10.0;
    want.eta[weak] = 1.0;
    let mut err2 = 0.0;
    for (a, b) in got.to_flat().iter().zip(want.to_flat()) {
        err2 += (a - b) * (a - b);
    }
    let rel = err2.sqrt() / want.norm_sq().sqrt();
    report.checks.push(CheckRecord::at_most(
        "linear-field-relative-error",
        rel,
        1e-6,
        ValueSource::Model,
    ));

    // (e_k, 0) stays put.
    let mut flat = JacobiState::zeros(m);
    flat.xi[weak] = 1.0;
    let got = seg10.propagate(&flat);
    let mut drift = 0.0f64;
    for (a, b) in got.to_flat().iter().zip(flat.to_flat()) {
        drift = drift.max((a - b).abs());
    }
    report.checks.push(CheckRecord::at_most("flat-field-drift", drift, 1e-8, ValueSource::Model));

    // Polynomial, not exponential: log-log slope of the state norm reads 1.
    let seg50 = integrate_geodesic(&lab.gstar, &start, 50.0, 1e-10)?;
    let (slope, _) = polynomial_growth_slope(&seg50, &linear, 50.0, 0.5)?;
    report.checks.push(CheckRecord::near(
        "central-loglog-slope",
        slope,
        1.0,
        0.05,
        ValueSource::Measured,
    ));

    // The strong pair keeps its exponential law along the axis.
    let mut up = JacobiState::zeros(m);
    up.xi[0] = 0.5f64.sqrt();
    up.eta[0] = 0.5f64.sqrt();
    let spec = ConeSpec::unstable(r, 1.5)?;
    let (rate, _) = strong_growth_rate(&seg10, &up, &spec, 10.0, 0.25)?;
    report.checks.push(CheckRecord::near("strong-pair-rate", rate, 1.0, 0.02, ValueSource::Model));
    let down = up.reversed();
    let sspec = ConeSpec::stable(r, 1.5)?;
    let (rate, _) = strong_growth_rate(&seg10, &down, &sspec, 10.0, 0.25)?;
    report.checks.push(CheckRecord::near("stable-pair-rate", rate, -1.0, 0.02, ValueSource::Model));

    let mut table = SeriesTable::new("central-field-norms", &["t", "linear_norm", "flat_norm"]);
    for i in (0..seg50.times.len()).step_by(usize::max(seg50.times.len() / 50, 1)) {
        let t = seg50.times[i];
        let a = seg50.propagate_to_index(&linear, i);
        let b = seg50.propagate_to_index(&flat, i);
        table.push(vec![t.into(), a.norm_sq().sqrt().into(), b.norm_sq().sqrt().into()]);
    }
    report.series.push(table);
    Ok(report)
}

// ---------------------------------------------------------------------------
// parallel-cones: positive alignment rate on and near the axis of the
// deformed metric; bounded dip for transversal starts, uniformly in the
// tube scale.
// ---------------------------------------------------------------------------

fn parallel_cones(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let lab = Lab::build(cfg)?;
    let mut report = ScenarioReport::new("parallel-cones", cfg.echo());
    let m = lab.m();
    let r = cfg.block_dim_r;
    let eps = cfg.epsilon_tube;

    // Orbit family: the axis itself plus near-parallel starts inside the
    // tube (every velocity component below theta).
    let mut starts = vec![PhasePoint::axis_start(&lab.gstar, 0.0)];
    let small = 0.1 * cfg.theta_transversal;
    for (i, dir) in [(0.0, small), (small, 0.0), (small * 0.5, -small)].iter().enumerate() {
        let mut x = vec![0.0; m];
        x[0] = 0.25 * eps * (i as f64 - 1.0);
        if m > r {
            x[r] = 0.25 * eps * eps;
        }
        let mut v = vec![0.0; cfg.dimension_n];
        v[0] = 1.0;
        v[1] = dir.0;
        v[1 + r.min(m - 1)] = dir.1;
        starts.push(PhasePoint::unit(&lab.gstar, ChartPoint::new(0.0, x), v)?);
    }

    let mut table = SeriesTable::new(
        "parallel-alignment-rates",
        &["orbit", "opening", "min_rate"],
    );
    let mut axis_min = f64::INFINITY;
    let mut parallel_min = f64::INFINITY;
    for (oi, start) in starts.iter().enumerate() {
        let seg = integrate_geodesic(&lab.gstar, start, 0.2, 1e-11)?;
        for (ci, &opening) in cfg.cone_openings.iter().enumerate() {
            let spec = ConeSpec::unstable(r, opening)?;
            let rates: Vec<f64> = (0..48usize)
                .into_par_iter()
                .map(|task| {
                    let id = ((oi * 16 + ci) * 100 + task) as u64;
                    let mut rng = task_rng(cfg.seed, id);
                    let s = sample_boundary_state::<f64, _>(&mut rng, m, &spec)
                        .expect("boundary sample");
                    theta_derivative_numeric(&lab.gstar, &seg, &s, &spec, 1e-3)
                        .expect("numeric derivative")
                })
                .collect();
            let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            if oi == 0 {
                axis_min = axis_min.min(min);
            } else {
                parallel_min = parallel_min.min(min);
            }
            table.push(vec![oi.into(), opening.into(), min.into()]);
        }
    }
    report.series.push(table);
    report.checks.push(CheckRecord::at_least(
        "axis-min-alignment-rate",
        axis_min,
        1e-3,
        ValueSource::Model,
    ));
    report.checks.push(CheckRecord::at_least(
        "theta-parallel-min-alignment-rate",
        parallel_min,
        0.0,
        ValueSource::Measured,
    ));

    // Transversal starts inside the tube: the alignment rate may dip below
    // zero, but its magnitude is governed by the axial profile bound, not
    // by the tube scale.
    let mut mins = Vec::new();
    let mut table = SeriesTable::new("transversal-rate-bound", &["epsilon", "min_rate"]);
    for (ei, &eps_i) in [0.1, 0.05, 0.02].iter().enumerate() {
        let lab_i = Lab::build_with_epsilon(cfg, eps_i)?;
        let theta_v = cfg.theta_transversal;
        let mut v = vec![0.0; cfg.dimension_n];
        v[0] = 1.0;
        v[1] = theta_v;
        if m > r {
            v[1 + r] = 0.5 * theta_v;
        }
        let mut x = vec![0.0; m];
        if m > r {
            x[r] = 0.3 * eps_i * eps_i;
        }
        let start = PhasePoint::unit(&lab_i.gstar, ChartPoint::new(0.0, x), v)?;
        let seg = integrate_geodesic(&lab_i.gstar, &start, 0.2, 1e-11)?;
        let spec = ConeSpec::unstable(r, 1.5)?;
        let rates: Vec<f64> = (0..64usize)
            .into_par_iter()
            .map(|task| {
                let mut rng = task_rng(cfg.seed, (40_000 + ei * 100 + task) as u64);
                let s =
                    sample_boundary_state::<f64, _>(&mut rng, m, &spec).expect("boundary sample");
                theta_derivative_numeric(&lab_i.gstar, &seg, &s, &spec, 1e-3)
                    .expect("numeric derivative")
            })
            .collect();
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        mins.push(min);
        table.push(vec![eps_i.into(), min.into()]);
    }
    report.series.push(table);
    let worst = mins.iter().cloned().fold(f64::INFINITY, f64::min);
    report.checks.push(CheckRecord::at_least(
        "transversal-rate-lower-bound",
        worst,
        -10.0,
        ValueSource::Measured,
    ));
    // Scale stability: the smallest-tube dip is no worse than the
    // largest-tube dip by more than a modest factor.
    let dip = |v: f64| (-v).max(0.01);
    let ratio = dip(mins[2]) / dip(mins[0]).max(0.01);
    report.checks.push(CheckRecord::at_most(
        "transversal-rate-scale-ratio",
        ratio,
        2.0,
        ValueSource::Measured,
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// crossing-time: transversal orbits leave the tube in time proportional to
// its width.
// ---------------------------------------------------------------------------

fn crossing_time(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new("crossing-time", cfg.echo());
    let theta_v = cfg.theta_transversal;
    let n = cfg.dimension_n;
    let m = n - 1;
    let epsilons = [2.0 * cfg.epsilon_tube, cfg.epsilon_tube, 0.5 * cfg.epsilon_tube];

    let mut table = SeriesTable::new("exit-times", &["epsilon", "orbit", "t_exit", "v_exit_max"]);
    let mut log_eps = Vec::new();
    let mut log_t = Vec::new();
    let mut c_worst = 0.0f64;
    let mut exit_speed_min = f64::INFINITY;
    for &eps in &epsilons {
        let lab = Lab::build_with_epsilon(cfg, eps)?;
        let mut max_t = 0.0f64;
        for orbit in 0..8usize {
            // Spread the transversal direction over the transverse axes.
            let mut v = vec![0.0; n];
            let dir = orbit % m;
            let blend = 0.25 * (orbit / m) as f64;
            v[1 + dir] = theta_v;
            v[1 + (dir + 1) % m] = blend * theta_v;
            let norm_rest: f64 = v.iter().map(|x| x * x).sum();
            v[0] = (1.0 - norm_rest).sqrt();
            let start = PhasePoint::unit(&lab.gstar, ChartPoint::axis(0.0, n), v)?;
            let seg = integrate_orbit(
                &lab.gstar,
                &start,
                &OrbitOptions::with_tube_exit(5.0, cfg.tol_integration, eps),
            )?;
            let exit = seg.exit.as_ref().ok_or_else(|| anyhow!("orbit never left the tube"))?;
            let v_exit =
                exit.state.velocity[1..].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            exit_speed_min = exit_speed_min.min(v_exit);
            max_t = max_t.max(exit.time);
            c_worst = c_worst.max(exit.time / eps);
            table.push(vec![eps.into(), orbit.into(), exit.time.into(), v_exit.into()]);
        }
        log_eps.push(eps.ln());
        log_t.push(max_t.ln());
    }
    report.series.push(table);
    let (exponent, _) = linear_fit(&log_eps, &log_t)?;
    report.checks.push(CheckRecord::near(
        "exit-time-scaling-exponent",
        exponent,
        1.0,
        0.1,
        ValueSource::Measured,
    ));
    report.checks.push(CheckRecord::at_most(
        "exit-time-constant",
        c_worst,
        2.0 / theta_v,
        ValueSource::Measured,
    ));
    report.checks.push(CheckRecord::at_least(
        "exit-speed-transversality",
        exit_speed_min,
        0.5 * theta_v,
        ValueSource::Model,
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// net-invariance: one tube crossing plus an outside arc gains alignment for
// a small tube; a too-large tube loses it for some state.
// ---------------------------------------------------------------------------

struct NetOutcome {
    net_min: f64,
    losses: usize,
    samples: usize,
    per_orbit: Vec<(usize, f64, f64)>,
}

fn net_invariance_ensemble(cfg: &ScenarioConfig, epsilon: f64, orbits: usize) -> Result<NetOutcome> {
    let lab = Lab::build_with_epsilon(cfg, epsilon)?;
    let n = cfg.dimension_n;
    let m = n - 1;
    let r = cfg.block_dim_r;
    let theta_v = cfg.theta_transversal;
    let arc = cfg.t_window_time.max(2.0);

    let results: Vec<Result<(usize, f64, f64)>> = (0..orbits)
        .into_par_iter()
        .map(|orbit| {
            let mut rng = task_rng(cfg.seed, 70_000 + orbit as u64);
            // Starts pass through the deformation support: weak offsets at
            // the narrow scale, strong offsets at the tube scale.
            let mut x = vec![0.0f64; m];
            for (j, xj) in x.iter_mut().enumerate() {
                if j < r {
                    *xj = epsilon * 0.5 * (rng.gen_range(-1.0..1.0));
                } else {
                    *xj = epsilon * epsilon * 0.5 * (rng.gen_range(-1.0..1.0));
                }
            }
            // Transversal velocity: the largest component hits theta; the
            // direction mixes strong and weak axes.
            let mut v = vec![0.0f64; n];
            let mut vmax = 0.0f64;
            for vj in v.iter_mut().skip(1) {
                *vj = rng.gen_range(-1.0..1.0);
                vmax = vmax.max(vj.abs());
            }
            for vj in v.iter_mut().skip(1) {
                *vj *= theta_v / vmax;
            }
            let rest: f64 = v.iter().map(|a| a * a).sum();
            v[0] = (1.0 - rest.min(0.99)).sqrt();
            let start = PhasePoint::unit(&lab.gstar, ChartPoint::new(0.0, x), v)
                .map_err(|e| anyhow!("{e}"))?;

            // Crossing segment, then the outside arc continued with the
            // transported frame.
            let crossing = integrate_orbit(
                &lab.gstar,
                &start,
                &OrbitOptions::with_tube_exit(5.0, cfg.tol_integration, epsilon),
            )
            .map_err(|e| anyhow!("{e}"))?;
            let exit = crossing
                .exit
                .as_ref()
                .ok_or_else(|| anyhow!("ensemble orbit never crossed the tube"))?;
            let outside = integrate_orbit(
                &lab.gstar,
                &exit.state,
                &OrbitOptions {
                    initial_frame: Some(crossing.frames.last().unwrap().clone()),
                    ..OrbitOptions::new(arc, cfg.tol_integration)
                },
            )
            .map_err(|e| anyhow!("{e}"))?;

            let spec = ConeSpec::unstable(r, 1.5).expect("valid opening");
            let mut worst = f64::INFINITY;
            let mut theta_end_of_worst = f64::NAN;
            for sample in 0..4u64 {
                let mut srng = task_rng(cfg.seed, 90_000 + (orbit as u64) * 16 + sample);
                let s = sample_boundary_state::<f64, _>(&mut srng, m, &spec)
                    .map_err(|e| anyhow!("{e}"))?;
                let th0 = theta(&s, &spec).map_err(|e| anyhow!("{e}"))?;
                let mid = crossing.propagate(&s);
                let end = outside.propagate(&mid);
                let th1 = theta(&end, &spec).map_err(|e| anyhow!("{e}"))?;
                if th1 - th0 < worst {
                    worst = th1 - th0;
                    theta_end_of_worst = th1;
                }
            }
            Ok((orbit, worst, theta_end_of_worst))
        })
        .collect();

    let mut net_min = f64::INFINITY;
    let mut losses = 0usize;
    let mut per_orbit = Vec::new();
    for res in results {
        let (orbit, worst, th_end) = res?;
        if worst <= 0.0 {
            losses += 1;
        }
        net_min = net_min.min(worst);
        per_orbit.push((orbit, worst, th_end));
    }
    Ok(NetOutcome { net_min, losses, samples: orbits, per_orbit })
}

fn net_invariance(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new("net-invariance", cfg.echo());

    let small = net_invariance_ensemble(cfg, cfg.epsilon_tube, 50)?;
    report.checks.push(CheckRecord::at_least(
        "alignment-net-gain-small-tube",
        small.net_min,
        1e-6,
        ValueSource::Measured,
    ));

    // A tube an order of magnitude wider keeps the dynamics inside the
    // deformation long enough that some state loses alignment overall.
    let large = net_invariance_ensemble(cfg, 0.2, 50)?;
    let fraction = large.losses as f64 / large.samples as f64;
    report.checks.push(CheckRecord::at_least(
        "alignment-loss-fraction-large-tube",
        fraction,
        1e-9,
        ValueSource::Measured,
    ));

    let mut table =
        SeriesTable::new("net-alignment-change", &["epsilon", "orbit", "worst_gain", "theta_end"]);
    for (orbit, gain, th) in &small.per_orbit {
        table.push(vec![cfg.epsilon_tube.into(), (*orbit).into(), (*gain).into(), (*th).into()]);
    }
    for (orbit, gain, th) in &large.per_orbit {
        table.push(vec![0.2.into(), (*orbit).into(), (*gain).into(), (*th).into()]);
    }
    report.series.push(table);
    Ok(report)
}

// ---------------------------------------------------------------------------
// strong-rates: exponential growth inside the strong cones, flatness of the
// central directions.
// ---------------------------------------------------------------------------

fn strong_rates(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let lab = Lab::build(cfg)?;
    let mut report = ScenarioReport::new("strong-rates", cfg.echo());
    let m = lab.m();
    let r = cfg.block_dim_r;

    let start = PhasePoint::axis_start(&lab.base, 0.0);
    let seg = integrate_geodesic(&lab.base, &start, cfg.t_end_time, cfg.tol_integration)?;

    let mut table = SeriesTable::new("fitted-rates", &["orbit_id", "cone", "fitted_rate", "r_squared"]);
    let rows: Vec<(usize, f64, f64, f64, f64)> = (0..100usize)
        .into_par_iter()
        .map(|task| {
            let mut rng = task_rng(cfg.seed, 50_000 + task as u64);
            // States inside the cone: boundary of a larger random opening.
            let inner = rng.gen_range(1.5..1.95);
            let spec = ConeSpec::unstable(r, inner).expect("valid opening");
            let s = sample_boundary_state::<f64, _>(&mut rng, m, &spec).expect("sample");
            let fit_spec = ConeSpec::unstable(r, 1.5).expect("valid opening");
            let (rate_u, r2_u) =
                strong_growth_rate(&seg, &s, &fit_spec, cfg.t_end_time, 0.25).expect("fit");
            let s_spec = ConeSpec::stable(r, 1.5).expect("valid opening");
            let (rate_s, r2_s) =
                strong_growth_rate(&seg, &s.reversed(), &s_spec, cfg.t_end_time, 0.25).expect("fit");
            (task, rate_u, r2_u, rate_s, r2_s)
        })
        .collect();
    let mut u_dev = 0.0f64;
    let mut s_dev = 0.0f64;
    for (task, rate_u, r2_u, rate_s, r2_s) in rows {
        u_dev = u_dev.max((rate_u - 1.0).abs());
        s_dev = s_dev.max((rate_s + 1.0).abs());
        table.push(vec![task.into(), "unstable".into(), rate_u.into(), r2_u.into()]);
        table.push(vec![task.into(), "stable".into(), rate_s.into(), r2_s.into()]);
    }
    report.checks.push(CheckRecord::at_most(
        "unstable-rate-max-deviation",
        u_dev,
        0.02,
        ValueSource::Model,
    ));
    report.checks.push(CheckRecord::at_most(
        "stable-rate-max-deviation",
        s_dev,
        0.02,
        ValueSource::Model,
    ));

    // Central directions of the deformed axis flow: exponentially flat,
    // polynomially linear.
    let gstart = PhasePoint::axis_start(&lab.gstar, 0.0);
    let gseg = integrate_geodesic(&lab.gstar, &gstart, 50.0, 1e-10)?;
    let mut linear = JacobiState::zeros(m);
    linear.eta[r] = 1.0;
    let (exp_rate, _) = norm_growth_rate(&gseg, &linear, 25.0, 50.0, 0.5)?;
    report.checks.push(CheckRecord::near(
        "central-exponential-rate",
        exp_rate,
        0.0,
        0.05,
        ValueSource::Measured,
    ));
    let (slope, r2) = polynomial_growth_slope(&gseg, &linear, 50.0, 0.5)?;
    report.checks.push(CheckRecord::near(
        "central-polynomial-slope",
        slope,
        1.0,
        0.05,
        ValueSource::Measured,
    ));
    table.push(vec![100usize.into(), "central".into(), slope.into(), r2.into()]);
    report.series.push(table);
    Ok(report)
}

// ---------------------------------------------------------------------------
// product-gap: exponent multiset of a weighted product of two block models
// and the collapse of domination at the colliding weight.
// ---------------------------------------------------------------------------

fn product_gap(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new("product-gap", cfg.echo());
    let model = SymmetricModel::new(cfg.dimension_n, cfg.block_dim_r)?;
    let k = model.jacobi_matrix::<f64>();

    // Separated weights.
    let (alpha, beta) = (0.6, 0.8);
    let prod = ProductModel::new(k.clone(), k.clone(), alpha, beta)?;
    let path = ConstantJacobi::new(&prod.weighted_jacobi_matrix());
    let measured = lyapunov_spectrum(&path, 200.0, 0.5)?;
    let analytic = prod.exponent_multiset();
    let expected: Vec<f64> =
        analytic.iter().cloned().chain(analytic.iter().map(|r| -r).rev()).collect();
    let mut worst = 0.0f64;
    let mut table = SeriesTable::new("exponent-multiset", &["index", "measured", "expected"]);
    for (i, (got, want)) in measured.iter().zip(&expected).enumerate() {
        worst = worst.max((got - want).abs());
        table.push(vec![i.into(), (*got).into(), (*want).into()]);
    }
    report.series.push(table);
    report.checks.push(CheckRecord::at_most(
        "exponent-multiset-deviation",
        worst,
        0.03,
        ValueSource::Measured,
    ));

    let plan = SplittingPlan {
        openings: cfg.cone_openings.clone(),
        states_per_path: 8,
        t_window: cfg.t_window_time,
        spectrum_time: 200.0,
        reorth_dt: 0.5,
        seed: cfg.seed,
    };
    let strong_dim = 2 * cfg.block_dim_r;
    let paths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> = vec![(OrbitClass::Outside, &path)];
    let verdict = detect_splitting(&paths, strong_dim, &plan)?;
    report.checks.push(CheckRecord::at_least(
        "separated-weights-domination-gap",
        verdict.domination_gap,
        0.05,
        ValueSource::Measured,
    ));
    report.checks.push(CheckRecord::near(
        "separated-weights-dominated",
        if verdict.label != VerdictLabel::NoDomination { 1.0 } else { 0.0 },
        1.0,
        0.0,
        ValueSource::Measured,
    ));

    // Colliding weights alpha = 2 beta: the strong group meets the rest.
    let beta_c = 1.0 / 5.0f64.sqrt();
    let collide = ProductModel::new(k.clone(), k, 2.0 * beta_c, beta_c)?;
    let cpath = ConstantJacobi::new(&collide.weighted_jacobi_matrix());
    let cpaths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> = vec![(OrbitClass::Outside, &cpath)];
    let cverdict = detect_splitting(&cpaths, strong_dim, &plan)?;
    report.checks.push(CheckRecord::near(
        "collision-weights-no-domination",
        if cverdict.label == VerdictLabel::NoDomination { 1.0 } else { 0.0 },
        1.0,
        0.0,
        ValueSource::Measured,
    ));
    report.checks.push(CheckRecord::at_most(
        "collision-weights-domination-gap",
        cverdict.domination_gap.abs(),
        0.05,
        ValueSource::Measured,
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// bump-bounds: profile calibration, the sup bound of the curvature
// combination F, and the scaling of alpha and its derivatives.
// ---------------------------------------------------------------------------

fn bump_bounds(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new("bump-bounds", cfg.echo());

    // Calibration: the profile value at the origin is exactly -1/2.
    let mut calib_worst = 0.0f64;
    for tau in [0.0, 0.1, 0.25] {
        let p = BumpProfile::<f64>::piecewise(tau, 1.0)?;
        calib_worst = calib_worst.max((p.eval(0.0).0 + 0.5).abs());
    }
    report.checks.push(CheckRecord::at_most(
        "profile-origin-calibration",
        calib_worst,
        1e-10,
        ValueSource::Exact,
    ));

    // Sup bound of F across ramp widths.
    let mut f0_worst = 0.0f64;
    let mut ratio_worst = 0.0f64;
    let mut table = SeriesTable::new("f-combination", &["tau", "x", "f"]);
    for tau in [0.0, 0.01, 0.05] {
        let p = if tau == 0.0 {
            BumpProfile::<f64>::piecewise(tau, 1.0)?
        } else {
            BumpProfile::<f64>::new(tau, 1.0)?
        };
        let rep = check_f_bound(&p, cfg.delta_slack, 10_000)?;
        f0_worst = f0_worst.max((rep.f_at_zero + 1.0).abs());
        ratio_worst = ratio_worst.max(rep.max_ratio);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            table.push(vec![tau.into(), x.into(), p.f_combination(x).into()]);
        }
    }
    report.series.push(table);
    report.checks.push(CheckRecord::at_most(
        "f-at-zero-error",
        f0_worst,
        1e-9,
        ValueSource::Model,
    ));
    report.checks.push(CheckRecord::at_most(
        "f-sup-ratio",
        ratio_worst,
        2.0 * (1.0 + cfg.delta_slack),
        ValueSource::Model,
    ));

    // Scaling of the deformation weight with the tube scale.
    let est = check_estimates::<f64>(
        cfg.dimension_n,
        cfg.block_dim_r,
        cfg.tau_ramp,
        &[0.2, 0.1, 0.05],
        10,
    )?;
    let names = [
        "alpha-scaling-exponent",
        "gradient-scaling-exponent",
        "mixed-hessian-scaling-exponent",
        "axial-hessian-scaling-exponent",
    ];
    let nominal = [4.0, 2.0, 1.0, 0.0];
    for ((name, want), got) in names.iter().zip(nominal).zip(est.exponents) {
        report.checks.push(CheckRecord::near(name, got, want, 0.2, ValueSource::Measured));
    }
    let mut table = SeriesTable::new(
        "alpha-maxima",
        &["epsilon", "max_alpha", "max_grad", "max_mixed_hess", "max_axial_hess"],
    );
    for (eps, maxima) in est.epsilons.iter().zip(&est.maxima) {
        table.push(vec![
            (*eps).into(),
            maxima[0].into(),
            maxima[1].into(),
            maxima[2].into(),
            maxima[3].into(),
        ]);
    }
    report.series.push(table);
    Ok(report)
}
