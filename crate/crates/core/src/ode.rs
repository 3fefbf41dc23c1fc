//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! [`Stepper`] exposes single accepted steps so callers can observe or
//! transform the state between steps (the orbit integrator resets its
//! transition block this way); [`integrate`] drives the stepper over a span
//! with optional event location. The continuous extension is the standard
//! fourth-order interpolant; events are bisected on it, so event times are
//! resolved far below the step size.

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Right-hand side of a first-order system `y' = f(t, y)`.
pub trait OdeSystem<T> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);
}

impl<T, F> OdeSystem<T> for (usize, F)
where
    F: Fn(T, &[T], &mut [T]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) {
        (self.1)(t, y, dy)
    }
}

/// One accepted step together with its dense-output coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<T> {
    pub t0: T,
    pub h: T,
    rcont: [Vec<T>; 5],
}

impl<T: Real> DenseStep<T> {
    /// Interpolated state at `t` inside `[t0, t0 + h]`.
    pub fn eval(&self, t: T) -> Vec<T> {
        let theta = (t - self.t0) / self.h;
        let one_m = T::one() - theta;
        let n = self.rcont[0].len();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + one_m
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + one_m * self.rcont[4][i])));
        }
        out
    }

    pub fn t_end(&self) -> T {
        self.t0 + self.h
    }
}

/// Piecewise dense solution over the integrated span.
#[derive(Debug, Clone)]
pub struct DenseSolution<T> {
    pub steps: Vec<DenseStep<T>>,
}

impl<T: Real> DenseSolution<T> {
    /// State at time `t`; clamps to the covered span.
    pub fn eval(&self, t: T) -> Vec<T> {
        self.locate(t).eval(t)
    }

    fn locate(&self, t: T) -> &DenseStep<T> {
        let idx = self.steps.partition_point(|s| s.t_end() < t);
        self.steps.get(idx).unwrap_or_else(|| self.steps.last().expect("non-empty dense solution"))
    }

    pub fn t_start(&self) -> T {
        self.steps[0].t0
    }

    pub fn t_end(&self) -> T {
        self.steps.last().unwrap().t_end()
    }
}

#[derive(Debug, Clone)]
pub struct Options<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    pub initial_step: Option<T>,
    pub max_step: Option<T>,
}

impl<T: Real> Options<T> {
    pub fn with_tol(tol: T) -> Self {
        Options { rtol: tol, atol: tol, max_steps: 2_000_000, initial_step: None, max_step: None }
    }
}

const STAGES: usize = 7;

const A: [[f64; 6]; STAGES] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; STAGES] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B: [f64; STAGES] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Weights of the 4th-order continuous extension.
const D: [f64; STAGES] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Single-step driver. The state is owned by the stepper; callers may edit
/// it between accepted steps through `state_mut` (the next step re-evaluates
/// the right-hand side, so edits are safe).
pub struct Stepper<'a, T, S: OdeSystem<T>> {
    sys: &'a S,
    opts: Options<T>,
    t: T,
    y: Vec<T>,
    h: T,
    k: Vec<Vec<T>>,
    steps_taken: usize,
}

impl<'a, T: Real, S: OdeSystem<T>> Stepper<'a, T, S> {
    pub fn new(sys: &'a S, t0: T, y0: &[T], opts: Options<T>) -> Self {
        let n = sys.dim();
        assert_eq!(y0.len(), n);
        let h0 = opts.initial_step.unwrap_or_else(|| c(1e-4));
        let h0 = opts.max_step.map_or(h0, |m| h0.min(m));
        Stepper {
            sys,
            opts,
            t: t0,
            y: y0.to_vec(),
            h: h0,
            k: (0..STAGES).map(|_| vec![T::zero(); n]).collect(),
            steps_taken: 0,
        }
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn state(&self) -> &[T] {
        &self.y
    }

    pub fn state_mut(&mut self) -> &mut Vec<T> {
        &mut self.y
    }

    /// Takes one accepted step, not stepping past `t_limit`.
    pub fn advance(&mut self, t_limit: T) -> Result<DenseStep<T>> {
        let n = self.sys.dim();
        let mut ytmp = vec![T::zero(); n];
        self.sys.rhs(self.t, &self.y, &mut self.k[0]);
        loop {
            self.steps_taken += 1;
            if self.steps_taken > self.opts.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at t = {}", self.t)));
            }
            let mut h = self.h;
            let mut clamped = false;
            // Stretch slightly oversized final steps onto the limit so no
            // sub-epsilon sliver is left behind.
            if self.t + h * c::<T>(1.05) >= t_limit {
                h = t_limit - self.t;
                clamped = true;
            }
            if h <= T::epsilon() * self.t.abs().max(T::one()) {
                return Err(Error::Integration(format!("step size underflow at t = {}", self.t)));
            }

            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = T::zero();
                    for j in 0..s.min(6) {
                        let aij = c::<T>(A[s][j]);
                        if aij != T::zero() {
                            acc += aij * self.k[j][i];
                        }
                    }
                    ytmp[i] = self.y[i] + h * acc;
                }
                let ts = self.t + c::<T>(C[s]) * h;
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                self.sys.rhs(ts, &ytmp, &mut tail[0]);
            }

            let mut ynew = vec![T::zero(); n];
            let mut err_norm = T::zero();
            for i in 0..n {
                let mut acc = T::zero();
                let mut errc = T::zero();
                for s in 0..STAGES {
                    let bs = c::<T>(B[s]);
                    if bs != T::zero() {
                        acc += bs * self.k[s][i];
                    }
                    let es = c::<T>(E[s]);
                    if es != T::zero() {
                        errc += es * self.k[s][i];
                    }
                }
                ynew[i] = self.y[i] + h * acc;
                let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(ynew[i].abs());
                let r = h * errc / sc;
                err_norm += r * r;
            }
            err_norm = (err_norm / c(n as f64)).sqrt();

            let safety: T = c(0.9);
            let order_exp: T = c(-0.2);
            if err_norm <= T::one() {
                self.sys.rhs(self.t + h, &ynew, &mut self.k[6]);
                let mut rcont: [Vec<T>; 5] = [
                    self.y.clone(),
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                ];
                for i in 0..n {
                    let dy = ynew[i] - self.y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = h * self.k[0][i] - dy;
                    rcont[3][i] = dy - h * self.k[6][i] - rcont[2][i];
                    let mut acc = T::zero();
                    for s in 0..STAGES {
                        let ds = c::<T>(D[s]);
                        if ds != T::zero() {
                            acc += ds * self.k[s][i];
                        }
                    }
                    rcont[4][i] = h * acc;
                }
                let step = DenseStep { t0: self.t, h, rcont };
                self.t = if clamped { t_limit } else { self.t + h };
                self.y = ynew;
                let scale = if err_norm == T::zero() {
                    c(5.0)
                } else {
                    (safety * err_norm.powf(order_exp)).max(c(0.2)).min(c(5.0))
                };
                self.h = h * scale;
                if let Some(hm) = self.opts.max_step {
                    self.h = self.h.min(hm);
                }
                return Ok(step);
            }
            let scale = (safety * err_norm.powf(order_exp)).max(c(0.2));
            self.h = h * scale;
        }
    }
}

/// Outcome of [`integrate`].
pub struct Integration<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub dense: DenseSolution<T>,
    /// Set when the event function changed sign; integration stops there.
    pub event: Option<EventHit<T>>,
}

#[derive(Debug, Clone)]
pub struct EventHit<T> {
    pub t: T,
    pub y: Vec<T>,
}

/// Integrates from `(t0, y0)` over `span > 0`, stopping early when `event`
/// crosses from negative to nonnegative.
pub fn integrate<T: Real, S: OdeSystem<T>>(
    sys: &S,
    t0: T,
    y0: &[T],
    span: T,
    opts: &Options<T>,
    event: Option<&dyn Fn(T, &[T]) -> T>,
) -> Result<Integration<T>> {
    if span <= T::zero() {
        return Err(Error::parameter("integration span must be positive"));
    }
    let t_final = t0 + span;
    let mut opts = opts.clone();
    if opts.initial_step.is_none() {
        opts.initial_step = Some(span * c(1e-3));
    }
    let mut stepper = Stepper::new(sys, t0, y0, opts);
    let mut times = vec![t0];
    let mut states = vec![y0.to_vec()];
    let mut dense_steps = Vec::new();
    let mut event_hit = None;
    let mut ev_prev = event.map(|f| f(t0, y0));

    while stepper.time() < t_final {
        let step = stepper.advance(t_final)?;
        if let (Some(f), Some(g0)) = (event, ev_prev) {
            let g1 = f(stepper.time(), stepper.state());
            if g0 < T::zero() && g1 >= T::zero() {
                let (te, ye) = bisect_event(&step, f, step.t0, step.t_end());
                times.push(te);
                states.push(ye.clone());
                dense_steps.push(step);
                event_hit = Some(EventHit { t: te, y: ye });
                break;
            }
            ev_prev = Some(g1);
        }
        dense_steps.push(step);
        times.push(stepper.time());
        states.push(stepper.state().to_vec());
    }

    Ok(Integration { times, states, dense: DenseSolution { steps: dense_steps }, event: event_hit })
}

/// Bisects the event function on a dense step until the bracket is below
/// `1e-10` in time.
pub fn bisect_event<T: Real>(
    step: &DenseStep<T>,
    f: &dyn Fn(T, &[T]) -> T,
    mut lo: T,
    mut hi: T,
) -> (T, Vec<T>) {
    let tol: T = c(1e-10);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * crate::scalar::half();
        let ym = step.eval(mid);
        if f(mid, &ym) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = step.eval(hi);
    (hi, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_high_accuracy() {
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let out = integrate(&sys, 0.0, &[1.0], 5.0, &Options::with_tol(1e-10), None).unwrap();
        let y_end = out.states.last().unwrap()[0];
        assert!((y_end - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sys = (2usize, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let out = integrate(&sys, 0.0, &[1.0, 0.0], 6.0, &Options::with_tol(1e-10), None).unwrap();
        for i in 0..=60 {
            let t = 0.1 * i as f64;
            let y = out.dense.eval(t);
            assert!((y[0] - t.cos()).abs() < 1e-7, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn event_located_to_tight_tolerance() {
        let sys = (1usize, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let ev = |_t: f64, y: &[f64]| y[0] - 1.25;
        let out = integrate(&sys, 0.0, &[0.0], 3.0, &Options::with_tol(1e-9), Some(&ev)).unwrap();
        let hit = out.event.expect("event expected");
        assert!((hit.t - 1.25).abs() < 1e-9);
        assert!(out.times.last().unwrap() - hit.t == 0.0);
    }

    #[test]
    fn no_event_runs_to_t_end() {
        let sys = (1usize, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let ev = |_t: f64, y: &[f64]| y[0] - 10.0;
        let out = integrate(&sys, 0.0, &[0.0], 3.0, &Options::with_tol(1e-9), Some(&ev)).unwrap();
        assert!(out.event.is_none());
        assert!((out.times.last().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn stepper_allows_state_edits_between_steps() {
        // Integrate y' = y but renormalize y to 1 after each accepted step;
        // each step then measures exp(h) of that step alone.
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0]);
        let mut stepper =
            Stepper::new(&sys, 0.0, &[1.0], Options { initial_step: Some(0.1), ..Options::with_tol(1e-10) });
        for _ in 0..5 {
            let step = stepper.advance(10.0).unwrap();
            let grew = stepper.state()[0];
            assert!((grew - step.h.exp()).abs() < 1e-9);
            stepper.state_mut()[0] = 1.0;
        }
    }

    #[test]
    fn f32_smoke() {
        let sys = (1usize, |_t: f32, y: &[f32], dy: &mut [f32]| dy[0] = -y[0]);
        let out = integrate(&sys, 0.0f32, &[1.0], 2.0, &Options::with_tol(1e-5), None).unwrap();
        let y_end = out.states.last().unwrap()[0];
        assert!((y_end - (-2.0f32).exp()).abs() < 1e-4);
    }
}
