//! Geodesic integration, parallel transport and Jacobi propagation.
//!
//! An orbit is integrated as one coupled system: chart position, velocity,
//! a parallel orthonormal frame, and the transition matrix of the transverse
//! Jacobi system `(xi, eta)' = [[0, I], [-K(t), 0]] (xi, eta)` in that
//! frame, where `K_ab = R(v, u_a, v, u_b)`. The transition block is reset to
//! the identity after every accepted step, so the segment stores
//! well-conditioned per-step transitions instead of one exponentially large
//! product; any Jacobi state is then propagated by folding them.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::geom::{quad_form, ChartPoint, MetricChart};
use crate::linalg::{dot, Mat};
use crate::models::cs_pair;
use crate::ode::{bisect_event, DenseSolution, Options, OdeSystem, Stepper};
use crate::scalar::{c, Real};

/// A point of the unit tangent bundle in chart coordinates.
#[derive(Debug, Clone)]
pub struct PhasePoint<T> {
    pub position: ChartPoint<T>,
    pub velocity: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    /// Normalizes the velocity to unit length for the chart metric.
    pub fn unit(chart: &MetricChart<T>, position: ChartPoint<T>, velocity: Vec<T>) -> Result<Self> {
        let g = chart.metric(&position);
        let norm_sq = quad_form(&g, &velocity, &velocity);
        if norm_sq <= T::epsilon() {
            return Err(Error::parameter("velocity must be nonzero"));
        }
        let inv = T::one() / norm_sq.sqrt();
        let velocity = velocity.into_iter().map(|v| v * inv).collect();
        Ok(PhasePoint { position, velocity })
    }

    /// On-axis start moving along the axis direction.
    pub fn axis_start(chart: &MetricChart<T>, t: T) -> Self {
        let n = chart.dim();
        let mut velocity = vec![T::zero(); n];
        velocity[0] = T::one();
        PhasePoint { position: ChartPoint::axis(t, n), velocity }
    }

    /// Same footpoint, reversed velocity.
    pub fn reversed(&self) -> Self {
        PhasePoint {
            position: self.position.clone(),
            velocity: self.velocity.iter().map(|v| -*v).collect(),
        }
    }

    pub fn speed_sq(&self, chart: &MetricChart<T>) -> T {
        let g = chart.metric(&self.position);
        quad_form(&g, &self.velocity, &self.velocity)
    }
}

/// Transverse Jacobi state in the parallel frame: frame components of the
/// field and of its covariant derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiState<T> {
    pub xi: Vec<T>,
    pub eta: Vec<T>,
}

impl<T: Real> JacobiState<T> {
    pub fn new(xi: Vec<T>, eta: Vec<T>) -> Self {
        assert_eq!(xi.len(), eta.len());
        JacobiState { xi, eta }
    }

    pub fn zeros(m: usize) -> Self {
        JacobiState { xi: vec![T::zero(); m], eta: vec![T::zero(); m] }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn norm_sq(&self) -> T {
        dot(&self.xi, &self.xi) + dot(&self.eta, &self.eta)
    }

    pub fn scale(&self, k: T) -> Self {
        JacobiState {
            xi: self.xi.iter().map(|v| *v * k).collect(),
            eta: self.eta.iter().map(|v| *v * k).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scale(T::one() / self.norm_sq().sqrt())
    }

    /// Canonical pairing `xi . eta' - eta . xi'`, conserved by propagation.
    pub fn pairing(&self, other: &JacobiState<T>) -> T {
        dot(&self.xi, &other.eta) - dot(&self.eta, &other.xi)
    }

    /// Time-reversal conjugation: the state carried by the reversed orbit.
    pub fn reversed(&self) -> Self {
        JacobiState { xi: self.xi.clone(), eta: self.eta.iter().map(|v| -*v).collect() }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.xi.clone();
        out.extend_from_slice(&self.eta);
        out
    }

    pub fn from_flat(flat: &[T]) -> Self {
        let m = flat.len() / 2;
        JacobiState { xi: flat[..m].to_vec(), eta: flat[m..].to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitBoundary {
    /// Crossed the requested tube surface `max_i |x_i| = half-width`.
    Tube,
    /// Reached the chart validity radius; integration cannot continue.
    Chart,
}

#[derive(Debug, Clone)]
pub struct ExitEvent<T> {
    pub time: T,
    pub state: PhasePoint<T>,
    pub boundary: ExitBoundary,
}

#[derive(Debug, Clone)]
pub struct OrbitOptions<T> {
    pub tol: T,
    pub t_end: T,
    /// Event surface `max_i |x_i| = w`; `None` watches only the chart radius.
    pub tube_halfwidth: Option<T>,
    /// Stop at the tube surface instead of recording the crossing and
    /// continuing.
    pub stop_at_tube_exit: bool,
    pub max_step: Option<T>,
    /// Frame to carry instead of the Gram-Schmidt completion of the start
    /// velocity; lets a continuation segment keep the transported frame of
    /// the segment it extends.
    pub initial_frame: Option<Mat<T>>,
}

impl<T: Real> OrbitOptions<T> {
    pub fn new(t_end: T, tol: T) -> Self {
        OrbitOptions {
            tol,
            t_end,
            tube_halfwidth: None,
            stop_at_tube_exit: false,
            max_step: None,
            initial_frame: None,
        }
    }

    pub fn with_tube_exit(t_end: T, tol: T, halfwidth: T) -> Self {
        OrbitOptions { tube_halfwidth: Some(halfwidth), stop_at_tube_exit: true, ..Self::new(t_end, tol) }
    }
}

/// An integrated orbit: samples at the accepted steps, parallel frames,
/// per-step Jacobi transitions, plus the dense solution of the coupled
/// system for interpolation and event work.
pub struct OrbitSegment<T> {
    dim: usize,
    pub times: Vec<T>,
    pub states: Vec<PhasePoint<T>>,
    /// Parallel orthonormal frames (columns; column 0 is the velocity).
    pub frames: Vec<Mat<T>>,
    /// Transition of the transverse Jacobi system over each step.
    pub transitions: Vec<Mat<T>>,
    pub exit: Option<ExitEvent<T>>,
    dense: DenseSolution<T>,
}

struct Layout {
    n: usize,
}

impl Layout {
    fn m(&self) -> usize {
        self.n - 1
    }
    fn v(&self) -> std::ops::Range<usize> {
        self.n..2 * self.n
    }
    fn frame(&self) -> std::ops::Range<usize> {
        2 * self.n..2 * self.n + self.n * self.n
    }
    fn phi(&self) -> std::ops::Range<usize> {
        let f = 2 * self.n + self.n * self.n;
        f..f + 4 * self.m() * self.m()
    }
    fn total(&self) -> usize {
        self.phi().end
    }
}

struct OrbitSystem<'a, T> {
    chart: &'a MetricChart<T>,
    layout: Layout,
    failure: Cell<bool>,
}

impl<'a, T: Real> OrbitSystem<'a, T> {
    fn point(&self, y: &[T]) -> ChartPoint<T> {
        ChartPoint::new(y[0], y[1..self.layout.n].to_vec())
    }
}

impl<'a, T: Real> OdeSystem<T> for OrbitSystem<'a, T> {
    fn dim(&self) -> usize {
        self.layout.total()
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) {
        let n = self.layout.n;
        let m = self.layout.m();
        let p = self.point(y);
        let v = &y[self.layout.v()];
        let (gamma, riemann) = match self.chart.orbit_data(&p) {
            Ok(d) => d,
            Err(_) => {
                self.failure.set(true);
                for d in dy.iter_mut() {
                    *d = T::zero();
                }
                return;
            }
        };

        // Position and velocity.
        for i in 0..n {
            dy[i] = v[i];
        }
        for k in 0..n {
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let g = gamma.upper(k, i, j);
                    if g != T::zero() {
                        acc += g * v[i] * v[j];
                    }
                }
            }
            dy[n + k] = -acc;
        }

        // Frame columns: u' = -Gamma(v, u).
        let fr = self.layout.frame().start;
        for col in 0..n {
            for k in 0..n {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        let g = gamma.upper(k, i, j);
                        if g != T::zero() {
                            acc += g * v[i] * y[fr + j * n + col];
                        }
                    }
                }
                dy[fr + k * n + col] = -acc;
            }
        }

        // K_ab = R(v, u_a, v, u_b) over the transverse frame columns.
        let mut kmat = Mat::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let mut acc = T::zero();
                for i in 0..n {
                    if v[i] == T::zero() {
                        continue;
                    }
                    for j in 0..n {
                        let ua = y[fr + j * n + (a + 1)];
                        if ua == T::zero() {
                            continue;
                        }
                        for k in 0..n {
                            if v[k] == T::zero() {
                                continue;
                            }
                            for l in 0..n {
                                let ub = y[fr + l * n + (b + 1)];
                                if ub != T::zero() {
                                    acc += riemann.get(i, j, k, l) * v[i] * ua * v[k] * ub;
                                }
                            }
                        }
                    }
                }
                kmat[(a, b)] = acc;
                kmat[(b, a)] = acc;
            }
        }

        // Phi' = [[0, I], [-K, 0]] Phi, row blocks of size m.
        let ph = self.layout.phi().start;
        let w = 2 * m;
        for row in 0..m {
            for col in 0..w {
                dy[ph + row * w + col] = y[ph + (m + row) * w + col];
            }
        }
        for row in 0..m {
            for col in 0..w {
                let mut acc = T::zero();
                for k in 0..m {
                    let kv = kmat[(row, k)];
                    if kv != T::zero() {
                        acc += kv * y[ph + k * w + col];
                    }
                }
                dy[ph + (m + row) * w + col] = -acc;
            }
        }
    }
}

/// Orthonormal frame at a point with the given unit vector as column 0,
/// completed by Gram-Schmidt in the chart metric from the transverse
/// coordinate axes first (then the axis direction), so the transverse
/// columns stay aligned with the strong/weak coordinate blocks for
/// near-axis velocities.
pub fn orthonormal_frame<T: Real>(
    chart: &MetricChart<T>,
    p: &ChartPoint<T>,
    v: &[T],
) -> Result<Mat<T>> {
    let n = chart.dim();
    let g = chart.metric(p);
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let vn = quad_form(&g, v, v);
    let tol = c::<T>(1e-8).max(T::epsilon() * c(256.0));
    if (vn - T::one()).abs() > tol {
        return Err(Error::NotUnit { norm_sq: vn.to_f64().unwrap_or(f64::NAN) });
    }
    cols.push(v.to_vec());
    for i in (1..n).chain([0]) {
        if cols.len() == n {
            break;
        }
        let mut cand = vec![T::zero(); n];
        cand[i] = T::one();
        for prev in &cols {
            let proj = quad_form(&g, &cand, prev);
            for (cj, pj) in cand.iter_mut().zip(prev) {
                *cj = *cj - proj * *pj;
            }
        }
        let nrm = quad_form(&g, &cand, &cand);
        if nrm > c(1e-8) {
            let inv = T::one() / nrm.sqrt();
            for cj in &mut cand {
                *cj *= inv;
            }
            cols.push(cand);
        }
    }
    if cols.len() != n {
        return Err(Error::parameter("failed to complete an orthonormal frame"));
    }
    let mut frame = Mat::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        frame.set_column(j, col);
    }
    Ok(frame)
}

/// Integrates a geodesic with the defaults: no tube surface, watch only the
/// chart radius.
pub fn integrate_geodesic<T: Real>(
    chart: &MetricChart<T>,
    start: &PhasePoint<T>,
    t_end: T,
    tol: T,
) -> Result<OrbitSegment<T>> {
    integrate_orbit(chart, start, &OrbitOptions::new(t_end, tol))
}

/// Integrates a geodesic together with its parallel frame and per-step
/// Jacobi transitions.
pub fn integrate_orbit<T: Real>(
    chart: &MetricChart<T>,
    start: &PhasePoint<T>,
    opts: &OrbitOptions<T>,
) -> Result<OrbitSegment<T>> {
    if opts.t_end <= T::zero() || opts.tol <= T::zero() {
        return Err(Error::parameter("orbit span and tolerance must be positive"));
    }
    chart.check_inside(&start.position)?;
    let n = chart.dim();
    let layout = Layout { n };
    let m = layout.m();

    let frame0 = match &opts.initial_frame {
        Some(f) => f.clone(),
        None => orthonormal_frame(chart, &start.position, &start.velocity)?,
    };
    let mut y0 = vec![T::zero(); layout.total()];
    y0[0] = start.position.t;
    y0[1..n].copy_from_slice(&start.position.x);
    y0[layout.v()].copy_from_slice(&start.velocity);
    y0[layout.frame()].copy_from_slice(Mat::identity(n).data());
    for i in 0..n {
        for j in 0..n {
            y0[layout.frame().start + i * n + j] = frame0[(i, j)];
        }
    }
    let phi0 = Mat::identity(2 * m);
    y0[layout.phi()].copy_from_slice(phi0.data());

    let sys = OrbitSystem { chart, layout: Layout { n }, failure: Cell::new(false) };
    let ode_opts = Options {
        rtol: opts.tol,
        atol: opts.tol,
        max_steps: 4_000_000,
        initial_step: Some(opts.tol.max(c(1e-10)).sqrt() * c(0.1)),
        max_step: opts.max_step,
    };
    let mut stepper = Stepper::new(&sys, T::zero(), &y0, ode_opts);

    let radius = chart.radius();
    let chart_event = move |_t: T, y: &[T]| -> T {
        let mut worst = T::zero();
        for xi in &y[1..n] {
            worst = worst.max(xi.abs());
        }
        worst - radius
    };
    let tube_event = opts.tube_halfwidth.map(|w| {
        move |_t: T, y: &[T]| -> T {
            let mut worst = T::zero();
            for xi in &y[1..n] {
                worst = worst.max(xi.abs());
            }
            worst - w
        }
    });

    let extract_phase = |y: &[T]| -> PhasePoint<T> {
        PhasePoint {
            position: ChartPoint::new(y[0], y[1..n].to_vec()),
            velocity: y[n..2 * n].to_vec(),
        }
    };
    let extract_frame = |y: &[T]| -> Mat<T> {
        let mut f = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                f[(i, j)] = y[layout.frame().start + i * n + j];
            }
        }
        f
    };
    let extract_phi = |y: &[T]| -> Mat<T> {
        let w = 2 * m;
        let mut f = Mat::zeros(w, w);
        for i in 0..w {
            for j in 0..w {
                f[(i, j)] = y[layout.phi().start + i * w + j];
            }
        }
        f
    };

    let mut seg = OrbitSegment {
        dim: n,
        times: vec![T::zero()],
        states: vec![extract_phase(&y0)],
        frames: vec![extract_frame(&y0)],
        transitions: Vec::new(),
        exit: None,
        dense: DenseSolution { steps: Vec::new() },
    };

    let mut tube_prev = tube_event.as_ref().map(|f| f(T::zero(), &y0));
    let mut chart_prev = chart_event(T::zero(), &y0);
    if chart_prev >= T::zero() {
        return Err(Error::OutsideChart {
            index: 0,
            value: chart_prev.to_f64().unwrap_or(f64::NAN),
            radius: chart.radius().to_f64().unwrap_or(f64::NAN),
        });
    }

    while stepper.time() < opts.t_end {
        let step = stepper.advance(opts.t_end)?;
        if sys.failure.get() {
            return Err(Error::Integration("metric evaluation failed along the orbit".into()));
        }
        let t_new = stepper.time();
        let y_new = stepper.state().to_vec();

        // Tube crossing: record the first one; optionally stop there.
        let mut stop_at: Option<(T, Vec<T>, ExitBoundary)> = None;
        if let (Some(f), Some(g0)) = (tube_event.as_ref(), tube_prev) {
            let g1 = f(t_new, &y_new);
            if seg.exit.is_none() && g0 < T::zero() && g1 >= T::zero() {
                let (te, ye) = bisect_event(&step, f, step.t0, step.t_end());
                let event =
                    ExitEvent { time: te, state: extract_phase(&ye), boundary: ExitBoundary::Tube };
                if opts.stop_at_tube_exit {
                    stop_at = Some((te, ye, ExitBoundary::Tube));
                }
                seg.exit = Some(event);
            }
            tube_prev = Some(g1);
        }
        let gc = chart_event(t_new, &y_new);
        if stop_at.is_none() && chart_prev < T::zero() && gc >= T::zero() {
            let (te, ye) = bisect_event(&step, &chart_event, step.t0, step.t_end());
            stop_at = Some((te, ye, ExitBoundary::Chart));
        }
        chart_prev = gc;

        if let Some((te, ye, boundary)) = stop_at {
            let phase = extract_phase(&ye);
            if boundary == ExitBoundary::Chart {
                seg.exit =
                    Some(ExitEvent { time: te, state: phase.clone(), boundary: ExitBoundary::Chart });
            }
            seg.times.push(te);
            seg.states.push(phase);
            seg.frames.push(extract_frame(&ye));
            // Within the step the transition block still measures the flow
            // from the step start, so the interpolated block is the partial
            // transition onto the stop time.
            seg.transitions.push(extract_phi(&ye));
            seg.dense.steps.push(step);
            return Ok(seg);
        }

        seg.times.push(t_new);
        seg.states.push(extract_phase(&y_new));
        seg.frames.push(extract_frame(&y_new));
        seg.transitions.push(extract_phi(&y_new));
        seg.dense.steps.push(step);

        // Reset the transition block for the next step.
        let phi_start = layout.phi().start;
        let ident = Mat::identity(2 * m);
        stepper.state_mut()[phi_start..phi_start + 4 * m * m].copy_from_slice(ident.data());
    }

    Ok(seg)
}

impl<T: Real> OrbitSegment<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transverse_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn t_end(&self) -> T {
        *self.times.last().unwrap()
    }

    /// Largest deviation of `g(v, v)` from 1 over the samples.
    pub fn max_speed_defect(&self, chart: &MetricChart<T>) -> T {
        let mut worst = T::zero();
        for s in &self.states {
            worst = worst.max((s.speed_sq(chart) - T::one()).abs());
        }
        worst
    }

    /// Largest deviation of the transported frame from orthonormality in
    /// the chart metric, over the samples.
    pub fn max_frame_defect(&self, chart: &MetricChart<T>) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for (s, f) in self.states.iter().zip(&self.frames) {
            let g = chart.metric(&s.position);
            let gram = f.transpose().matmul(&g.matmul(f));
            worst = worst.max(gram.max_abs_diff(&Mat::identity(n)));
        }
        worst
    }

    /// Jacobi state at segment end, by folding the per-step transitions.
    pub fn propagate(&self, state: &JacobiState<T>) -> JacobiState<T> {
        self.propagate_to_index(state, self.times.len() - 1)
    }

    /// Jacobi state at sample `idx`.
    pub fn propagate_to_index(&self, state: &JacobiState<T>, idx: usize) -> JacobiState<T> {
        let mut flat = state.to_flat();
        for tr in &self.transitions[..idx] {
            flat = tr.matvec(&flat);
        }
        JacobiState::from_flat(&flat)
    }

    /// Jacobi states at every sample time.
    pub fn jacobi_series(&self, state: &JacobiState<T>) -> Vec<JacobiState<T>> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut flat = state.to_flat();
        out.push(JacobiState::from_flat(&flat));
        for tr in &self.transitions {
            flat = tr.matvec(&flat);
            out.push(JacobiState::from_flat(&flat));
        }
        out
    }

    /// Inverse propagation from sample `idx` back to the segment start.
    pub fn propagate_back(&self, state: &JacobiState<T>, idx: usize) -> Result<JacobiState<T>> {
        let mut flat = state.to_flat();
        for tr in self.transitions[..idx].iter().rev() {
            flat = tr.solve(&flat)?;
        }
        Ok(JacobiState::from_flat(&flat))
    }

    /// Transition matrix of the transverse Jacobi system between two times
    /// inside the segment.
    pub fn transition_between(&self, t0: T, t1: T) -> Result<Mat<T>> {
        if t1 < t0 {
            return Err(Error::parameter("transition requires t0 <= t1"));
        }
        let i0 = self.step_index(t0);
        let i1 = self.step_index(t1);
        let phi_from = |i: usize, t: T| -> Mat<T> {
            // Partial transition from times[i] to t inside step i.
            if t <= self.times[i] {
                return Mat::identity(2 * self.transverse_dim());
            }
            let y = self.dense.steps[i].eval(t);
            self.phi_block(&y)
        };
        if i0 == i1 {
            let a = phi_from(i0, t0);
            let b = phi_from(i0, t1);
            return right_divide(&b, &a);
        }
        // From t0 to the end of its step.
        let mut acc = right_divide(&self.transitions[i0], &phi_from(i0, t0))?;
        for i in (i0 + 1)..i1 {
            acc = self.transitions[i].matmul(&acc);
        }
        acc = phi_from(i1, t1).matmul(&acc);
        Ok(acc)
    }

    fn step_index(&self, t: T) -> usize {
        let k = self.times.partition_point(|s| *s <= t);
        k.saturating_sub(1).min(self.transitions.len().saturating_sub(1))
    }

    fn phi_block(&self, y: &[T]) -> Mat<T> {
        let n = self.dim;
        let m = n - 1;
        let start = 2 * n + n * n;
        let w = 2 * m;
        let mut f = Mat::zeros(w, w);
        for i in 0..w {
            for j in 0..w {
                f[(i, j)] = y[start + i * w + j];
            }
        }
        f
    }

    /// Interpolated phase point at a time inside the segment.
    pub fn phase_at(&self, t: T) -> PhasePoint<T> {
        let n = self.dim;
        let y = self.dense.eval(t);
        PhasePoint { position: ChartPoint::new(y[0], y[1..n].to_vec()), velocity: y[n..2 * n].to_vec() }
    }
}

/// `B A^{-1}` by solving transposed systems columnwise.
fn right_divide<T: Real>(b: &Mat<T>, a: &Mat<T>) -> Result<Mat<T>> {
    // B A^{-1} = (A^{-T} B^T)^T
    let at = a.transpose();
    let bt = b.transpose();
    let k = bt.cols();
    let mut out = Mat::zeros(bt.rows(), k);
    for j in 0..k {
        let col = at.solve(&bt.column(j))?;
        out.set_column(j, &col);
    }
    Ok(out.transpose())
}

/// Parallel-transports the columns of `frame0` along the orbit; returns the
/// frames at the segment sample times.
pub fn parallel_frame<T: Real>(
    chart: &MetricChart<T>,
    seg: &OrbitSegment<T>,
    frame0: &Mat<T>,
) -> Result<Vec<Mat<T>>> {
    let n = chart.dim();
    let cols = frame0.cols();
    struct TransportSystem<'a, T> {
        chart: &'a MetricChart<T>,
        dense: &'a DenseSolution<T>,
        n: usize,
        cols: usize,
        failure: Cell<bool>,
    }
    impl<'a, T: Real> OdeSystem<T> for TransportSystem<'a, T> {
        fn dim(&self) -> usize {
            self.n * self.cols
        }
        fn rhs(&self, t: T, y: &[T], dy: &mut [T]) {
            let n = self.n;
            let orbit = self.dense.eval(t);
            let p = ChartPoint::new(orbit[0], orbit[1..n].to_vec());
            let v = &orbit[n..2 * n];
            let gamma = match self.chart.christoffel_unchecked(&p) {
                Ok(g) => g,
                Err(_) => {
                    self.failure.set(true);
                    for d in dy.iter_mut() {
                        *d = T::zero();
                    }
                    return;
                }
            };
            for col in 0..self.cols {
                for k in 0..n {
                    let mut acc = T::zero();
                    for i in 0..n {
                        for j in 0..n {
                            let g = gamma.upper(k, i, j);
                            if g != T::zero() {
                                acc += g * v[i] * y[j * self.cols + col];
                            }
                        }
                    }
                    dy[k * self.cols + col] = -acc;
                }
            }
        }
    }

    let sys = TransportSystem { chart, dense: &seg.dense, n, cols, failure: Cell::new(false) };
    let mut stepper = Stepper::new(&sys, T::zero(), frame0.data(), Options::with_tol(c(1e-10)));
    let mut out = Vec::with_capacity(seg.times.len());
    out.push(frame0.clone());
    for win in seg.times.windows(2) {
        let target = win[1];
        while stepper.time() < target {
            stepper.advance(target)?;
            if sys.failure.get() {
                return Err(Error::Integration("transport failed along the orbit".into()));
            }
        }
        let mut f = Mat::zeros(n, cols);
        for i in 0..n {
            for j in 0..cols {
                f[(i, j)] = stepper.state()[i * cols + j];
            }
        }
        out.push(f);
    }
    Ok(out)
}

/// Propagates a Jacobi state to the segment end.
pub fn propagate_jacobi<T: Real>(
    _chart: &MetricChart<T>,
    seg: &OrbitSegment<T>,
    state: &JacobiState<T>,
) -> JacobiState<T> {
    seg.propagate(state)
}

/// A source of transition matrices for the transverse Jacobi system.
pub trait JacobiPath<T> {
    fn transverse_dim(&self) -> usize;
    /// Largest admissible time.
    fn t_end(&self) -> T;
    fn transition(&self, t0: T, t1: T) -> Result<Mat<T>>;
}

impl<T: Real> JacobiPath<T> for OrbitSegment<T> {
    fn transverse_dim(&self) -> usize {
        self.dim - 1
    }
    fn t_end(&self) -> T {
        *self.times.last().unwrap()
    }
    fn transition(&self, t0: T, t1: T) -> Result<Mat<T>> {
        self.transition_between(t0, t1)
    }
}

/// Constant-coefficient Jacobi system `f'' + K f = 0` with symmetric `K`;
/// transitions are assembled mode by mode from the closed-form fundamental
/// pair, so they are exact up to the eigendecomposition.
pub struct ConstantJacobi<T> {
    evals: Vec<T>,
    evecs: Mat<T>,
}

impl<T: Real> ConstantJacobi<T> {
    pub fn new(k: &Mat<T>) -> Self {
        let (evals, evecs) = k.sym_eigen();
        ConstantJacobi { evals, evecs }
    }

    pub fn matrix_dim(&self) -> usize {
        self.evals.len()
    }
}

impl<T: Real> JacobiPath<T> for ConstantJacobi<T> {
    fn transverse_dim(&self) -> usize {
        self.evals.len()
    }
    fn t_end(&self) -> T {
        T::infinity()
    }
    fn transition(&self, t0: T, t1: T) -> Result<Mat<T>> {
        let dt = t1 - t0;
        let m = self.evals.len();
        let mut cdiag = Mat::zeros(m, m);
        let mut sdiag = Mat::zeros(m, m);
        let mut rsdiag = Mat::zeros(m, m);
        for (i, &rho) in self.evals.iter().enumerate() {
            let (cv, sv) = cs_pair(rho, dt);
            cdiag[(i, i)] = cv;
            sdiag[(i, i)] = sv;
            rsdiag[(i, i)] = -rho * sv;
        }
        let v = &self.evecs;
        let vt = v.transpose();
        let cc = v.matmul(&cdiag).matmul(&vt);
        let ss = v.matmul(&sdiag).matmul(&vt);
        let rs = v.matmul(&rsdiag).matmul(&vt);
        let mut phi = Mat::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                phi[(i, j)] = cc[(i, j)];
                phi[(i, m + j)] = ss[(i, j)];
                phi[(m + i, j)] = rs[(i, j)];
                phi[(m + i, m + j)] = cc[(i, j)];
            }
        }
        Ok(phi)
    }
}
