use geoflow_cli::ScenarioConfig;
use geoflow_core::cone::{sample_boundary_state, task_rng, theta, ConeSpec};
use geoflow_core::deform::{deformed_symmetric_chart, DeformationSpec};
use geoflow_core::flow::*;
use geoflow_core::geom::ChartPoint;
use geoflow_core::models::SymmetricModel;
use rand::Rng;

fn main() {
    let cfg = ScenarioConfig::default();
    let epsilon = cfg.epsilon_tube;
    let model = SymmetricModel::new(4, 1).unwrap();
    let spec_d = DeformationSpec::with_amplitude(4, 1, epsilon, cfg.tau_ramp, 1.0).unwrap();
    let gstar = deformed_symmetric_chart(&model, cfg.period_time, cfg.chart_radius, &spec_d).unwrap();
    let m = 3;
    let r = 1;
    let theta_v = 0.5;

    for orbit in 0..50u64 {
        let mut rng = task_rng(cfg.seed, 70_000 + orbit);
        let mut x = vec![0.0f64; m];
        for (j, xj) in x.iter_mut().enumerate() {
            if j < r { *xj = epsilon * 0.5 * rng.gen_range(-1.0..1.0); }
            else { *xj = epsilon * epsilon * 0.5 * rng.gen_range(-1.0..1.0); }
        }
        let mut v = vec![0.0f64; 4];
        let mut vmax = 0.0f64;
        for vj in v.iter_mut().skip(1) { *vj = rng.gen_range(-1.0..1.0); vmax = vmax.max(vj.abs()); }
        for vj in v.iter_mut().skip(1) { *vj *= theta_v / vmax; }
        let rest: f64 = v.iter().map(|a| a*a).sum();
        v[0] = (1.0 - rest.min(0.99)).sqrt();
        let start = PhasePoint::unit(&gstar, ChartPoint::new(0.0, x.clone()), v.clone()).unwrap();
        let crossing = integrate_orbit(&gstar, &start, &OrbitOptions::with_tube_exit(5.0, 1e-9, epsilon)).unwrap();
        let exit = crossing.exit.clone().unwrap();
        let outside = integrate_orbit(&gstar, &exit.state, &OrbitOptions {
            initial_frame: Some(crossing.frames.last().unwrap().clone()),
            ..OrbitOptions::new(2.0, 1e-9)
        }).unwrap();

        let spec = ConeSpec::unstable(r, 1.5).unwrap();
        for sample in 0..4u64 {
            let mut srng = task_rng(cfg.seed, 90_000 + orbit * 16 + sample);
            let s = sample_boundary_state::<f64, _>(&mut srng, m, &spec).unwrap();
            let th0 = theta(&s, &spec).unwrap();
            let mid_state = crossing.propagate(&s);
            let th_mid = theta(&mid_state, &spec).unwrap();
            let end = outside.propagate(&mid_state);
            let th1 = theta(&end, &spec).unwrap();
            if th1 - th0 <= 0.0 {
                println!("orbit {orbit} sample {sample}: th0 {th0:.4} mid {th_mid:.4} end {th1:.4}  exit_t {:.4}", exit.time);
                println!("  start x {:?} v {:?}", x, v);
                println!("  exit pos {:?} v {:?}", exit.state.position.x, exit.state.velocity);
                let end_state = outside.states.last().unwrap();
                println!("  outside end pos {:?} (t_end {})", end_state.position.x, outside.t_end());
                // theta along outside arc
                let series = outside.jacobi_series(&mid_state);
                for (i, st) in series.iter().enumerate().step_by((series.len()/8).max(1)) {
                    let _ = i; let _ = st;
                }
                let mut line = String::new();
                let n_s = series.len();
                for i in (0..n_s).step_by((n_s/8).max(1)) {
                    line.push_str(&format!(" {:.3}@{:.2}", theta(&series[i], &spec).unwrap(), outside.times[i]));
                }
                println!("  theta outside:{line}");
            }
        }
    }
}
