//! Cone-field diagnostics for the transverse Jacobi dynamics.
//!
//! The alignment quantity of a state `(xi, eta)` against the strong block A
//! is `Theta = |Pr_A(xi + eta)|^2 / (|xi|^2 + |eta|^2)` (unstable side; the
//! stable side uses `xi - eta`). It is twice the squared cosine of the angle
//! to the strong subspace axis, so values lie in `[0, 2]`, a cone of opening
//! `c in (1, 2)` is `{Theta >= c}`, and monotone growth of `Theta` along
//! the flow certifies proper cone invariance.
//!
//! For the block-diagonal model with curvature eigenvalues `(-1, -1/4)` the
//! derivative along the flow has the closed form
//! `dTheta/dt = 2 |xi_A + eta_A|^2 (|xi_A - eta_A|^2
//!              + |xi_B - (5/8) eta_B|^2 + (39/64) |eta_B|^2)`
//! on unit states, which this module uses as the oracle for the numeric
//! derivative; growth-rate fits and a reorthonormalized exponent spectrum
//! feed the dominated-splitting verdict.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flow::{integrate_geodesic, JacobiPath, JacobiState, OrbitSegment};
use crate::geom::MetricChart;
use crate::linalg::{linear_fit, Mat};
use crate::scalar::{c, half, two, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSide {
    /// Alignment of `xi + eta` (expanding states).
    Unstable,
    /// Alignment of `xi - eta` (contracting states).
    Stable,
}

/// Strong-block selector plus cone opening.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    /// Transverse indices of the strong block (a prefix in our frames).
    pub a_dim: usize,
    /// Opening `c in (1, 2)`.
    pub opening: f64,
    pub side: ConeSide,
}

impl ConeSpec {
    pub fn unstable(a_dim: usize, opening: f64) -> Result<Self> {
        Self::new(a_dim, opening, ConeSide::Unstable)
    }

    pub fn stable(a_dim: usize, opening: f64) -> Result<Self> {
        Self::new(a_dim, opening, ConeSide::Stable)
    }

    pub fn new(a_dim: usize, opening: f64, side: ConeSide) -> Result<Self> {
        if !(1.0 < opening && opening < 2.0) {
            return Err(Error::parameter(format!("cone opening must be in (1, 2), got {opening}")));
        }
        if a_dim == 0 {
            return Err(Error::parameter("strong block must be nonempty"));
        }
        Ok(ConeSpec { a_dim, opening, side })
    }

    fn signed_sum<T: Real>(&self, s: &JacobiState<T>) -> Vec<T> {
        match self.side {
            ConeSide::Unstable => s.xi.iter().zip(&s.eta).map(|(x, e)| *x + *e).collect(),
            ConeSide::Stable => s.xi.iter().zip(&s.eta).map(|(x, e)| *x - *e).collect(),
        }
    }
}

/// Alignment `Theta` of a Jacobi state; scale invariant, in `[0, 2]`.
pub fn theta<T: Real>(s: &JacobiState<T>, spec: &ConeSpec) -> Result<T> {
    let denom = s.norm_sq();
    if denom == T::zero() {
        return Err(Error::ZeroState);
    }
    let w = spec.signed_sum(s);
    let mut num = T::zero();
    for v in w.iter().take(spec.a_dim) {
        num += *v * *v;
    }
    Ok(num / denom)
}

/// Closed-form `dTheta/dt` of the block model `(-1, -1/4)` on a unit state.
pub fn theta_derivative_symmetric<T: Real>(s: &JacobiState<T>, spec: &ConeSpec) -> Result<T> {
    let norm = s.norm_sq();
    if (norm - T::one()).abs() > c(1e-9) {
        return Err(Error::NotNormalized { norm_sq: norm.to_f64().unwrap_or(f64::NAN) });
    }
    // The stable side is the unstable side of the time-reversed state.
    let s = match spec.side {
        ConeSide::Unstable => s.clone(),
        ConeSide::Stable => s.reversed(),
    };
    let r = spec.a_dim;
    let mut lead = T::zero();
    let mut bracket = T::zero();
    for i in 0..s.dim() {
        let (xi, eta) = (s.xi[i], s.eta[i]);
        if i < r {
            let sum = xi + eta;
            let diff = xi - eta;
            lead += sum * sum;
            bracket += diff * diff;
        } else {
            let d = xi - c::<T>(0.625) * eta;
            bracket += d * d + c::<T>(39.0 / 64.0) * eta * eta;
        }
    }
    Ok(two::<T>() * lead * bracket)
}

/// Central-difference `dTheta/dt` at the start of an orbit segment.
///
/// The backward half of the stencil integrates the reversed orbit from the
/// same start, carrying the time-reversal conjugate of the state.
pub fn theta_derivative_numeric<T: Real>(
    chart: &MetricChart<T>,
    seg: &OrbitSegment<T>,
    s: &JacobiState<T>,
    spec: &ConeSpec,
    h: T,
) -> Result<T> {
    if h <= T::zero() || h >= seg.t_end() {
        return Err(Error::parameter("difference step must be positive and inside the segment"));
    }
    let forward = seg.transition_between(T::zero(), h)?;
    let plus = JacobiState::from_flat(&forward.matvec(&s.to_flat()));
    let theta_plus = theta(&plus, spec)?;

    let rev_start = seg.states[0].reversed();
    let rev_seg = integrate_geodesic(chart, &rev_start, h + h, c(1e-11))?;
    let backward = rev_seg.transition_between(T::zero(), h)?;
    let minus_rev = JacobiState::from_flat(&backward.matvec(&s.reversed().to_flat()));
    let theta_minus = theta(&minus_rev.reversed(), spec)?;

    Ok((theta_plus - theta_minus) / (h + h))
}

/// Fitted exponential rate of `|Pr_A(xi +/- eta)|` along a Jacobi path,
/// with the fit's r-squared.
pub fn strong_growth_rate<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    spec: &ConeSpec,
    t_end: T,
    dt: T,
) -> Result<(T, T)> {
    // Boundary states count as inside; allow for roundoff at the opening.
    if theta(s, spec)? < c(spec.opening - 1e-9) {
        return Err(Error::parameter("state is outside the requested cone"));
    }
    let (times, norms) = strong_norm_series(path, s, spec, t_end, dt)?;
    let logs: Vec<T> = norms
        .iter()
        .map(|v| {
            if *v <= T::zero() {
                Err(Error::FitWindow("strong projection vanished along the path".into()))
            } else {
                Ok(v.ln())
            }
        })
        .collect::<Result<_>>()?;
    linear_fit(&times, &logs)
}

/// Fitted exponential rate of the full state norm over `[t_start, t_end]`.
pub fn norm_growth_rate<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    t_start: T,
    t_end: T,
    dt: T,
) -> Result<(T, T)> {
    let (times, states) = state_series(path, s, t_end, dt)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, st) in times.iter().zip(&states) {
        if *t >= t_start {
            xs.push(*t);
            ys.push(st.norm_sq().sqrt().ln());
        }
    }
    linear_fit(&xs, &ys)
}

/// Log-log slope of the state norm against time over the tail half of the
/// window; a polynomially growing state reads slope ~ degree, an
/// exponentially growing one diverges with the window.
pub fn polynomial_growth_slope<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    t_end: T,
    dt: T,
) -> Result<(T, T)> {
    let (times, states) = state_series(path, s, t_end, dt)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, st) in times.iter().zip(&states) {
        if *t >= t_end * half() {
            xs.push(t.ln());
            ys.push(st.norm_sq().sqrt().ln());
        }
    }
    linear_fit(&xs, &ys)
}

fn state_series<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    t_end: T,
    dt: T,
) -> Result<(Vec<T>, Vec<JacobiState<T>>)> {
    if dt <= T::zero() || t_end <= dt {
        return Err(Error::FitWindow("empty sampling window".into()));
    }
    let steps = (t_end / dt).to_f64().unwrap_or(0.0).round() as usize;
    if steps < 2 {
        return Err(Error::FitWindow("need at least two samples".into()));
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut flat = s.to_flat();
    let mut t = T::zero();
    times.push(t);
    states.push(JacobiState::from_flat(&flat));
    for _ in 0..steps {
        let t_next = (t + dt).min(path.t_end());
        if t_next <= t {
            break;
        }
        let phi = path.transition(t, t_next)?;
        flat = phi.matvec(&flat);
        t = t_next;
        times.push(t);
        states.push(JacobiState::from_flat(&flat));
    }
    Ok((times, states))
}

fn strong_norm_series<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    spec: &ConeSpec,
    t_end: T,
    dt: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let (times, states) = state_series(path, s, t_end, dt)?;
    let norms = states
        .iter()
        .map(|st| {
            let w = spec.signed_sum(st);
            let mut acc = T::zero();
            for v in w.iter().take(spec.a_dim) {
                acc += *v * *v;
            }
            acc.sqrt()
        })
        .collect();
    Ok((times, norms))
}

/// Alignment series at a fixed cadence along a path.
pub fn theta_series<T: Real>(
    path: &dyn JacobiPath<T>,
    s: &JacobiState<T>,
    spec: &ConeSpec,
    t_end: T,
    dt: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let (times, states) = state_series(path, s, t_end, dt)?;
    let mut thetas = Vec::with_capacity(states.len());
    for st in &states {
        thetas.push(theta(st, spec)?);
    }
    Ok((times, thetas))
}

/// Exponent spectrum by reorthonormalized propagation of a full basis,
/// sorted descending. `reorth_dt` is the reorthonormalization period.
pub fn lyapunov_spectrum<T: Real>(
    path: &dyn JacobiPath<T>,
    t_total: T,
    reorth_dt: T,
) -> Result<Vec<T>> {
    let m = path.transverse_dim();
    let w = 2 * m;
    if reorth_dt <= T::zero() || t_total <= reorth_dt {
        return Err(Error::parameter("spectrum window must exceed the reorthonormalization period"));
    }
    let mut basis = Mat::identity(w);
    let mut sums = vec![T::zero(); w];
    let mut t = T::zero();
    let horizon = t_total.min(path.t_end());
    while t < horizon {
        let t_next = (t + reorth_dt).min(horizon);
        let phi = path.transition(t, t_next)?;
        basis = phi.matmul(&basis);
        let diag = basis.mgs_qr();
        for (acc, d) in sums.iter_mut().zip(&diag) {
            if *d <= T::zero() {
                return Err(Error::Integration("degenerate basis in spectrum estimate".into()));
            }
            *acc += d.ln();
        }
        t = t_next;
    }
    let mut rates: Vec<T> = sums.into_iter().map(|v| v / t).collect();
    rates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(rates)
}

/// Counter-keyed generator: every `(seed, stream)` pair is an independent
/// deterministic stream, so fan-out order cannot perturb sampling.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a unit state on the cone boundary: block directions are sampled
/// isotropically, the strong pair is scaled to hit the opening and the
/// remaining mass is split between the weak components.
pub fn sample_boundary_state<T: Real, R: Rng>(
    rng: &mut R,
    m: usize,
    spec: &ConeSpec,
) -> Result<JacobiState<T>> {
    let r = spec.a_dim;
    if r > m {
        return Err(Error::parameter("strong block exceeds the transverse dimension"));
    }
    let copen: T = c(spec.opening);
    for _ in 0..1000 {
        let gauss = |rng: &mut R, k: usize| -> Vec<T> {
            (0..k).map(|_| c(rng.sample::<f64, _>(StandardNormal))).collect()
        };
        let xi_a = gauss(rng, r);
        let eta_a = gauss(rng, r);
        let xi_b = gauss(rng, m - r);
        let eta_b = gauss(rng, m - r);

        let mut sum_sq = T::zero();
        let mut pair_sq = T::zero();
        for (x, e) in xi_a.iter().zip(&eta_a) {
            let s = *x + *e;
            sum_sq += s * s;
            pair_sq += *x * *x + *e * *e;
        }
        if sum_sq <= c(1e-12) {
            continue;
        }
        let lam_sq = copen / sum_sq;
        let used = lam_sq * pair_sq;
        if used >= T::one() {
            continue;
        }
        let budget = T::one() - used;
        let frac: T = c(rng.gen_range(0.0..1.0));
        let xi_b_norm = crate::linalg::norm(&xi_b);
        let eta_b_norm = crate::linalg::norm(&eta_b);
        if m > r && (xi_b_norm == T::zero() || eta_b_norm == T::zero()) {
            continue;
        }
        let lam = lam_sq.sqrt();
        let mut xi: Vec<T> = xi_a.iter().map(|v| *v * lam).collect();
        let mut eta: Vec<T> = eta_a.iter().map(|v| *v * lam).collect();
        if m > r {
            let mu = (budget * frac).sqrt() / xi_b_norm;
            let nu = (budget * (T::one() - frac)).sqrt() / eta_b_norm;
            xi.extend(xi_b.iter().map(|v| *v * mu));
            eta.extend(eta_b.iter().map(|v| *v * nu));
        }
        let state = match spec.side {
            ConeSide::Unstable => JacobiState::new(xi, eta),
            ConeSide::Stable => JacobiState::new(xi, eta).reversed(),
        };
        debug_assert!((state.norm_sq() - T::one()).abs() < c(1e-9));
        return Ok(state);
    }
    Err(Error::parameter("boundary sampling failed to converge"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictLabel {
    /// Every transverse exponent is bounded away from zero.
    AnosovLike,
    /// Strong block dominates; central exponents are indistinguishable
    /// from zero.
    PartiallyHyperbolic,
    /// The strong block fails to dominate the rest of the spectrum.
    NoDomination,
}

impl VerdictLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictLabel::AnosovLike => "anosov-like",
            VerdictLabel::PartiallyHyperbolic => "partially-hyperbolic",
            VerdictLabel::NoDomination => "no-domination",
        }
    }
}

/// Orbit classes of a sample plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    Axis,
    ThetaParallel,
    ThetaTransversal,
    Outside,
}

/// Options of [`detect_splitting`].
#[derive(Debug, Clone)]
pub struct SplittingPlan {
    /// Cone openings to certify.
    pub openings: Vec<f64>,
    pub states_per_path: usize,
    /// Invariance window length.
    pub t_window: f64,
    /// Horizon for the exponent spectrum.
    pub spectrum_time: f64,
    pub reorth_dt: f64,
    pub seed: u64,
}

impl Default for SplittingPlan {
    fn default() -> Self {
        SplittingPlan {
            openings: vec![1.1, 1.3, 1.5, 1.7, 1.9],
            states_per_path: 32,
            t_window: 2.0,
            spectrum_time: 50.0,
            reorth_dt: 0.5,
            seed: 42,
        }
    }
}

/// Splitting diagnosis assembled from cone invariance and exponent data.
#[derive(Debug, Clone)]
pub struct SplittingVerdict<T> {
    pub invariance_pass: bool,
    /// Smallest observed alignment change rate on cone boundaries.
    pub min_boundary_rate: T,
    pub unstable_rate: T,
    pub stable_rate: T,
    /// Full exponent spectrum, sorted descending.
    pub spectrum: Vec<T>,
    pub strong_dim: usize,
    /// `min(strong rates) - max(remaining nonnegative rates)`.
    pub domination_gap: T,
    pub label: VerdictLabel,
}

impl<T: Real> SplittingVerdict<T> {
    /// The verdict of the time-reversed flow: stable and unstable data swap
    /// and the spectrum mirrors. Reversibility of the flow makes this an
    /// exact relabeling.
    pub fn reversed(&self) -> Self {
        let mut spectrum: Vec<T> = self.spectrum.iter().map(|v| -*v).collect();
        spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
        SplittingVerdict {
            invariance_pass: self.invariance_pass,
            min_boundary_rate: self.min_boundary_rate,
            unstable_rate: -self.stable_rate,
            stable_rate: -self.unstable_rate,
            spectrum,
            strong_dim: self.strong_dim,
            domination_gap: self.domination_gap,
            label: self.label,
        }
    }
}

/// Gap below which the strong block is declared non-dominating.
pub const DOMINATION_GAP_TOL: f64 = 0.05;
/// Exponent magnitude below which a direction counts as central.
pub const CENTRAL_RATE_TOL: f64 = 0.1;

/// Runs the cone-invariance and exponent checks over a family of Jacobi
/// paths and classifies the splitting.
///
/// Tasks are indexed by `(path, state, opening)` and sampled from streams
/// keyed by the task id, so any execution order gives identical output.
pub fn detect_splitting<T: Real>(
    paths: &[(OrbitClass, &dyn JacobiPath<T>)],
    strong_dim: usize,
    plan: &SplittingPlan,
) -> Result<SplittingVerdict<T>> {
    if paths.is_empty() {
        return Err(Error::Config("sample plan contains no orbits".into()));
    }
    let m = paths[0].1.transverse_dim();
    for (_, p) in paths {
        if p.transverse_dim() != m {
            return Err(Error::Config("inconsistent frame dimensions in sample plan".into()));
        }
    }
    if strong_dim == 0 || strong_dim > m {
        return Err(Error::Config("strong block dimension out of range".into()));
    }

    // Exponent spectrum: averaged over the paths that support the horizon.
    let mut spectrum = vec![T::zero(); 2 * m];
    let mut spectra = 0usize;
    for (_, path) in paths {
        let horizon = c::<T>(plan.spectrum_time).min(path.t_end());
        if horizon < c(plan.spectrum_time * 0.5) {
            continue;
        }
        let rates = lyapunov_spectrum(*path, horizon, c(plan.reorth_dt))?;
        for (acc, r) in spectrum.iter_mut().zip(&rates) {
            *acc += *r;
        }
        spectra += 1;
    }
    if spectra == 0 {
        return Err(Error::Config("no path long enough for the spectrum horizon".into()));
    }
    for v in &mut spectrum {
        *v /= c(spectra as f64);
    }

    // Cone invariance over windows plus boundary derivative statistics.
    let mut invariance_pass = true;
    let mut min_boundary_rate = T::infinity();
    let mut unstable_rates = Vec::new();
    let mut stable_rates = Vec::new();
    let mut task = 0u64;
    for (_, path) in paths {
        for &opening in &plan.openings {
            let u_spec = ConeSpec::unstable(strong_dim, opening)?;
            let s_spec = ConeSpec::stable(strong_dim, opening)?;
            for _ in 0..plan.states_per_path {
                task += 1;
                let mut rng = task_rng(plan.seed, task);
                let state = sample_boundary_state::<T, _>(&mut rng, m, &u_spec)?;
                let window = c::<T>(plan.t_window).min(path.t_end());
                let phi = path.transition(T::zero(), window)?;
                let moved = JacobiState::from_flat(&phi.matvec(&state.to_flat()));
                let th0 = theta(&state, &u_spec)?;
                let th1 = theta(&moved, &u_spec)?;
                if th1 <= th0 {
                    invariance_pass = false;
                }
                // Forward-difference rate estimate at the boundary state.
                let h: T = c(1e-3);
                let short = path.transition(T::zero(), h)?;
                let bumped = JacobiState::from_flat(&short.matvec(&state.to_flat()));
                let rate = (theta(&bumped, &u_spec)? - th0) / h;
                min_boundary_rate = min_boundary_rate.min(rate);

                // Growth rates inside both cones, skipping degenerate fits.
                let horizon = path.t_end().min(c(10.0));
                if horizon > c(1.0) {
                    if let Ok((rate, _)) =
                        strong_growth_rate(*path, &state, &u_spec, horizon, c(0.25))
                    {
                        unstable_rates.push(rate);
                    }
                    let s_state = state.reversed();
                    if let Ok((rate, _)) =
                        strong_growth_rate(*path, &s_state, &s_spec, horizon, c(0.25))
                    {
                        stable_rates.push(rate);
                    }
                }
            }
        }
    }

    let mean = |v: &[T]| -> T {
        if v.is_empty() {
            T::nan()
        } else {
            v.iter().fold(T::zero(), |a, b| a + *b) / c(v.len() as f64)
        }
    };
    let unstable_rate = mean(&unstable_rates);
    let stable_rate = mean(&stable_rates);

    // Domination gap between the strong group and the rest of the
    // nonnegative half of the spectrum.
    let positive: Vec<T> = spectrum.iter().take(m).cloned().collect();
    let strong_min = positive[strong_dim - 1];
    let rest_max = if strong_dim < positive.len() { positive[strong_dim] } else { T::zero() };
    let domination_gap = strong_min - rest_max;

    let label = if domination_gap < c(DOMINATION_GAP_TOL) {
        VerdictLabel::NoDomination
    } else if positive.iter().skip(strong_dim).all(|r| r.abs() < c(CENTRAL_RATE_TOL)) {
        VerdictLabel::PartiallyHyperbolic
    } else {
        VerdictLabel::AnosovLike
    };

    Ok(SplittingVerdict {
        invariance_pass,
        min_boundary_rate,
        unstable_rate,
        stable_rate,
        spectrum,
        strong_dim,
        domination_gap,
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{deformed_symmetric_chart, DeformationSpec};
    use crate::flow::{ConstantJacobi, PhasePoint};
    use crate::models::{symmetric_chart, ProductModel, SymmetricModel};

    const TAU: f64 = std::f64::consts::TAU;

    fn ch2() -> SymmetricModel {
        SymmetricModel::complex_hyperbolic_plane()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn theta_extreme_values() {
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        // xi = eta in the strong block: maximal alignment 2.
        let s = JacobiState::new(vec![0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]);
        assert_close(theta(&s, &spec).unwrap(), 2.0, 1e-15);
        // Weak-block field with no derivative: alignment 0.
        let s = JacobiState::new(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]);
        assert_close(theta(&s, &spec).unwrap(), 0.0, 1e-15);
        // Zero state is rejected.
        let z = JacobiState::<f64>::zeros(3);
        assert!(matches!(theta(&z, &spec), Err(Error::ZeroState)));
    }

    #[test]
    fn theta_mixed_example() {
        // r = 1, m = 3: xi = (a,0,0), eta = (a,0,b), 2a^2 + b^2 = 1.
        let a = 1.0 / 3.0f64.sqrt();
        let b = a;
        let spec = ConeSpec::unstable(1, 1.2).unwrap();
        let s = JacobiState::new(vec![a, 0.0, 0.0], vec![a, 0.0, b]);
        assert_close(theta(&s, &spec).unwrap(), 4.0 / 3.0, 1e-14);
    }

    #[test]
    fn theta_scale_invariance() {
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let s = JacobiState::new(vec![0.4, -0.2, 0.1], vec![0.3, 0.25, -0.15]);
        let base = theta(&s, &spec).unwrap();
        // Powers of two rescale both quadratic forms exactly.
        for k in [-2.0, -1.0, 0.5] {
            assert_eq!(theta(&s.scale(k), &spec).unwrap(), base);
        }
        assert_close(theta(&s.scale(3.0), &spec).unwrap(), base, 1e-14);
    }

    #[test]
    fn symmetric_derivative_examples() {
        // Pure strong alignment: all three terms vanish.
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let w = 0.5f64.sqrt();
        let s = JacobiState::new(vec![w, 0.0, 0.0], vec![w, 0.0, 0.0]);
        assert_close(theta_derivative_symmetric(&s, &spec).unwrap(), 0.0, 1e-14);

        // a = b = 1/sqrt(3): derivative 8/9.
        let a = 1.0 / 3.0f64.sqrt();
        let s = JacobiState::new(vec![a, 0.0, 0.0], vec![a, 0.0, a]);
        assert_close(theta_derivative_symmetric(&s, &spec).unwrap(), 8.0 / 9.0, 1e-14);

        // Unnormalized input is rejected.
        let s = JacobiState::new(vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            theta_derivative_symmetric(&s, &spec),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn symmetric_derivative_positive_off_strong_axis() {
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let mut rng = task_rng(7, 0);
        for _ in 0..200 {
            let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
            let d = theta_derivative_symmetric(&s, &spec).unwrap();
            assert!(d > 0.0, "boundary derivative must be positive, got {d}");
        }
    }

    #[test]
    fn numeric_derivative_matches_oracle_on_model() {
        let chart = symmetric_chart::<f64>(&ch2(), TAU, 1.0).unwrap();
        let start = PhasePoint::axis_start(&chart, 0.0);
        let seg = integrate_geodesic(&chart, &start, 0.1, 1e-11).unwrap();
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let mut rng = task_rng(11, 1);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
            let num = theta_derivative_numeric(&chart, &seg, &s, &spec, 1e-3).unwrap();
            let exact = theta_derivative_symmetric(&s, &spec).unwrap();
            worst = worst.max((num - exact).abs());
        }
        assert!(worst < 1e-5, "oracle disagreement {worst}");
    }

    #[test]
    fn boundary_sampling_hits_the_opening() {
        for opening in [1.1, 1.5, 1.9] {
            let spec = ConeSpec::unstable(1, opening).unwrap();
            let mut rng = task_rng(3, 9);
            for _ in 0..50 {
                let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
                assert_close(theta(&s, &spec).unwrap(), opening, 1e-12);
                assert_close(s.norm_sq(), 1.0, 1e-12);
            }
        }
        // Stable side lands on the stable boundary.
        let spec = ConeSpec::stable(1, 1.4).unwrap();
        let mut rng = task_rng(3, 10);
        let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
        assert_close(theta(&s, &spec).unwrap(), 1.4, 1e-12);
    }

    #[test]
    fn alignment_is_monotone_on_the_model() {
        let path = ConstantJacobi::new(&ch2().jacobi_matrix::<f64>());
        for opening in [1.1, 1.5, 1.9] {
            let spec = ConeSpec::unstable(1, opening).unwrap();
            let mut rng = task_rng(5, opening.to_bits());
            for _ in 0..20 {
                let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
                let (_, thetas) = theta_series(&path, &s, &spec, 5.0, 0.05).unwrap();
                for w in thetas.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9, "alignment decreased: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn strong_rate_is_one_on_the_model() {
        let chart = symmetric_chart::<f64>(&ch2(), TAU, 1.0).unwrap();
        let start = PhasePoint::axis_start(&chart, 0.0);
        let seg = integrate_geodesic(&chart, &start, 10.0, 1e-10).unwrap();
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let mut rng = task_rng(1, 2);
        for _ in 0..10 {
            let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
            let (rate, r2) = strong_growth_rate(&seg, &s, &spec, 10.0, 0.25).unwrap();
            assert_close(rate, 1.0, 0.02);
            assert!(r2 > 0.999);
            // Stable side contracts at the mirrored rate.
            let s_spec = ConeSpec::stable(1, 1.5).unwrap();
            let (rate, _) =
                strong_growth_rate(&seg, &s.reversed(), &s_spec, 10.0, 0.25).unwrap();
            assert_close(rate, -1.0, 0.02);
        }
    }

    #[test]
    fn central_state_rates_on_deformed_chart() {
        let model = ch2();
        let spec_def = DeformationSpec::new(4, 1, 0.05, 0.01).unwrap();
        let chart = deformed_symmetric_chart(&model, TAU, 1.0, &spec_def).unwrap();
        let start = PhasePoint::axis_start(&chart, 0.0);
        let seg = integrate_geodesic(&chart, &start, 50.0, 1e-9).unwrap();
        // Strong projection of a central state vanishes: degenerate fit.
        let central = JacobiState::new(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]);
        let cone = ConeSpec::unstable(1, 1.5).unwrap();
        assert!(strong_growth_rate(&seg, &central, &cone, 10.0, 0.25).is_err());
        // Full-norm exponential rate flattens on the tail window for the
        // linearly growing field.
        let linear = JacobiState::new(vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let (rate, _) = norm_growth_rate(&seg, &linear, 25.0, 50.0, 0.5).unwrap();
        assert!(rate.abs() < 0.05, "central exponential rate {rate}");
        // Its log-log slope reads the polynomial degree.
        let (slope, _) = polynomial_growth_slope(&seg, &linear, 50.0, 0.5).unwrap();
        assert_close(slope, 1.0, 0.05);
    }

    #[test]
    fn spectrum_of_the_model_and_the_deformation() {
        let chart = symmetric_chart::<f64>(&ch2(), TAU, 1.0).unwrap();
        let start = PhasePoint::axis_start(&chart, 0.0);
        let seg = integrate_geodesic(&chart, &start, 60.0, 1e-9).unwrap();
        let rates = lyapunov_spectrum(&seg, 60.0, 0.5).unwrap();
        let expected = [1.0, 0.5, 0.5, -0.5, -0.5, -1.0];
        for (got, want) in rates.iter().zip(expected) {
            assert_close(*got, want, 0.05);
        }
    }

    #[test]
    fn verdicts_across_the_three_regimes() {
        let plan = SplittingPlan { states_per_path: 8, spectrum_time: 60.0, ..Default::default() };

        // Block model: every exponent bounded away from zero.
        let model_path = ConstantJacobi::new(&ch2().jacobi_matrix::<f64>());
        let paths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> =
            vec![(OrbitClass::Axis, &model_path)];
        let v = detect_splitting(&paths, 1, &plan).unwrap();
        assert_eq!(v.label, VerdictLabel::AnosovLike);
        assert!(v.invariance_pass);
        assert!(v.min_boundary_rate > 0.0);
        assert!(v.unstable_rate > v.spectrum[1], "strong rate dominates the center");

        // Deformed axis dynamics: strong block persists, center flattens.
        let gstar = ConstantJacobi::new(&Mat::from_rows(&[
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]));
        let paths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> = vec![(OrbitClass::Axis, &gstar)];
        let plan_long = SplittingPlan { spectrum_time: 120.0, ..plan.clone() };
        let v = detect_splitting(&paths, 1, &plan_long).unwrap();
        assert_eq!(v.label, VerdictLabel::PartiallyHyperbolic);
        assert!(v.unstable_rate >= v.spectrum[1]);

        // Product at the collision weight: domination fails.
        let k = ch2().jacobi_matrix::<f64>();
        let beta = 1.0 / 5.0f64.sqrt();
        let prod = ProductModel::new(k.clone(), k, 2.0 * beta, beta).unwrap();
        let prod_path = ConstantJacobi::new(&prod.weighted_jacobi_matrix());
        let paths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> =
            vec![(OrbitClass::Outside, &prod_path)];
        let v = detect_splitting(&paths, 2, &plan).unwrap();
        assert_eq!(v.label, VerdictLabel::NoDomination);
    }

    #[test]
    fn reversal_swaps_the_verdict_data() {
        let path = ConstantJacobi::new(&ch2().jacobi_matrix::<f64>());
        let paths: Vec<(OrbitClass, &dyn JacobiPath<f64>)> = vec![(OrbitClass::Axis, &path)];
        let plan = SplittingPlan { states_per_path: 4, spectrum_time: 40.0, ..Default::default() };
        let v = detect_splitting(&paths, 1, &plan).unwrap();
        let r = v.reversed();
        assert_eq!(r.unstable_rate, -v.stable_rate);
        assert_eq!(r.stable_rate, -v.unstable_rate);
        assert_eq!(r.label, v.label);
        let twice = r.reversed();
        assert_eq!(twice.spectrum, v.spectrum);
        assert_eq!(twice.unstable_rate, v.unstable_rate);
    }

    #[test]
    fn net_invariance_through_a_tube_crossing() {
        // A transversal orbit crosses the deformed tube and then runs an
        // outside arc; the alignment must end above its starting value.
        let model = ch2();
        let eps = 0.02;
        let spec_def = DeformationSpec::new(4, 1, eps, 0.01).unwrap();
        let chart = deformed_symmetric_chart(&model, TAU, 3.0, &spec_def).unwrap();
        let theta_v = 0.5;
        let start = PhasePoint::unit(
            &chart,
            crate::geom::ChartPoint::axis(0.0, 4),
            vec![(1.0f64 - theta_v * theta_v).sqrt(), theta_v, 0.0, 0.0],
        )
        .unwrap();
        let seg = integrate_geodesic(&chart, &start, 2.0 + 4.0 * eps, 1e-10).unwrap();
        let spec = ConeSpec::unstable(1, 1.5).unwrap();
        let mut rng = task_rng(21, 4);
        for _ in 0..20 {
            let s = sample_boundary_state::<f64, _>(&mut rng, 3, &spec).unwrap();
            let end = seg.propagate(&s);
            let th0 = theta(&s, &spec).unwrap();
            let th1 = theta(&end, &spec).unwrap();
            assert!(th1 > th0, "alignment did not recover: {th0} -> {th1}");
        }
    }
}
