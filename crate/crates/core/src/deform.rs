//! The tube deformation: bump profiles, the transverse weight function
//! `alpha`, and the deformed metric that adds `alpha` to the axial
//! component `g_00` while leaving every other component untouched.
//!
//! Profiles are double integrals of a piecewise-linear slope function with
//! ramp width `tau`, calibrated so the profile value at the origin is
//! exactly -1/2 (which pins `h_tau = 2 / (1 - 2 tau)`). The combination
//! `F(x) = x^2 phi'' + 4x phi' + 2 phi` is what the deformation adds to the
//! axial curvature component after rescaling, so its sup bound relative to
//! `|F(0)| = 1` controls how far curvature is pushed in the weak block.
//!
//! `alpha(t, x) = sum_{b in B} x_b^2 Phi_b(x)` with
//! `Phi_b = 1/4 prod_j f_{b,j}(x_j)`, where the `j = b` factor is the
//! narrow profile at scale `eps^2` normalized to -1 at the origin and the
//! remaining factors are wide profiles at scale `eps` normalized to +1.
//! This makes `Phi_b(0) = -1/4` and `d2_{bb} alpha(t, 0) = -1/2`, so the
//! weak-block axial curvature -1/4 is cancelled exactly on the axis.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{ChartPoint, MetricChart, MetricComponents};
use crate::linalg::Mat;
use crate::models::{symmetric_chart, FermiTubeComponents, SymmetricModel};
use crate::scalar::{c, half, Real};

/// Piecewise polynomial in local segment coordinates.
#[derive(Debug, Clone)]
struct Piecewise<T> {
    breaks: Vec<T>,
    coefs: Vec<Vec<T>>,
}

impl<T: Real> Piecewise<T> {
    fn eval(&self, x: T) -> T {
        if x < self.breaks[0] || x >= *self.breaks.last().unwrap() {
            return T::zero();
        }
        let mut seg = 0;
        while seg + 1 < self.breaks.len() - 1 && x >= self.breaks[seg + 1] {
            seg += 1;
        }
        let s = x - self.breaks[seg];
        let mut acc = T::zero();
        for &a in self.coefs[seg].iter().rev() {
            acc = acc * s + a;
        }
        acc
    }

    /// Antiderivative vanishing at the left end, continuous across breaks.
    fn antiderivative(&self) -> Piecewise<T> {
        let mut coefs = Vec::with_capacity(self.coefs.len());
        let mut running = T::zero();
        for (seg, co) in self.coefs.iter().enumerate() {
            let mut anti = vec![running];
            for (p, &a) in co.iter().enumerate() {
                anti.push(a / c(p as f64 + 1.0));
            }
            let width = self.breaks[seg + 1] - self.breaks[seg];
            let mut val = T::zero();
            for &a in anti.iter().rev() {
                val = val * width + a;
            }
            running = val;
            coefs.push(anti);
        }
        Piecewise { breaks: self.breaks.clone(), coefs }
    }

    fn value_at_end(&self) -> T {
        let last = self.coefs.len() - 1;
        let width = self.breaks[last + 1] - self.breaks[last];
        let mut acc = T::zero();
        for &a in self.coefs[last].iter().rev() {
            acc = acc * width + a;
        }
        acc
    }
}

/// Calibrated height: `h_tau = 2 / (1 - 2 tau)`, the unique plateau height
/// for which the profile value at the origin is -1/2.
pub fn solve_h_tau<T: Real>(tau: T) -> Result<T> {
    if tau < T::zero() || tau >= half() {
        return Err(Error::parameter(format!("ramp width must satisfy 0 <= tau < 1/2, got {tau}")));
    }
    Ok(crate::scalar::two::<T>() / (T::one() - crate::scalar::two::<T>() * tau))
}

/// A calibrated even bump profile at support scale `lambda`.
///
/// `eval` returns the profile and its first two derivatives; outside the
/// support all three vanish. With a positive smoothing radius the piecewise
/// profile is mollified against a compactly supported kernel and recentered
/// so the origin value stays exactly -1/2.
#[derive(Debug, Clone)]
pub struct BumpProfile<T> {
    pub tau: T,
    pub h: T,
    pub lambda: T,
    pub sigma: T,
    /// Unit-scale slope of the profile second derivative source: phi'' = -w.
    slope: Piecewise<T>,
    /// Unit-scale first integral of the slope.
    first: Piecewise<T>,
    /// Unit-scale second integral of the slope.
    second: Piecewise<T>,
    /// second(1), so that phi(u) = second(1) - second(u).
    second_at_one: T,
    /// Multiplier pinning the (possibly smoothed) origin value to -1/2.
    calibration: T,
    /// Quadrature nodes/weights for the mollifier, unit interval [-1, 1].
    quad: Option<Arc<MollifierQuad<T>>>,
    /// Support scale of the piecewise profile before mollification.
    inner_lambda: T,
}

#[derive(Debug)]
struct MollifierQuad<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> BumpProfile<T> {
    /// Default smoothing radius: `tau * lambda / 4`, or `lambda / 100` for
    /// sharp ramps (`tau = 0`).
    pub fn new(tau: T, lambda: T) -> Result<Self> {
        let sigma = if tau == T::zero() { lambda * c(0.01) } else { tau * lambda * c(0.25) };
        Self::with_smoothing(tau, lambda, sigma)
    }

    /// Raw piecewise profile with no mollification.
    pub fn piecewise(tau: T, lambda: T) -> Result<Self> {
        Self::with_smoothing(tau, lambda, T::zero())
    }

    pub fn with_smoothing(tau: T, lambda: T, sigma: T) -> Result<Self> {
        if lambda <= T::zero() {
            return Err(Error::parameter("support scale must be positive"));
        }
        if sigma < T::zero() || sigma >= lambda * half::<T>() {
            return Err(Error::parameter("smoothing radius must satisfy 0 <= sigma < lambda/2"));
        }
        let h = solve_h_tau(tau)?;
        let inner_lambda = lambda - sigma;
        let slope = unit_slope(tau, h);
        let first = slope.antiderivative();
        let second = first.antiderivative();
        let second_at_one = second.value_at_end();
        let mut profile = BumpProfile {
            tau,
            h,
            lambda,
            sigma,
            slope,
            first,
            second,
            second_at_one,
            calibration: T::one(),
            quad: if sigma > T::zero() {
                Some(Arc::new(gauss_legendre_quad(48)))
            } else {
                None
            },
            inner_lambda,
        };
        let raw0 = profile.eval_uncalibrated(T::zero()).0;
        profile.calibration = c::<T>(-0.5) / raw0;
        Ok(profile)
    }

    /// `(phi, phi', phi'')` at `x`; identically zero outside `[-lambda, lambda]`.
    pub fn eval(&self, x: T) -> (T, T, T) {
        let (v, d, s) = self.eval_uncalibrated(x);
        (v * self.calibration, d * self.calibration, s * self.calibration)
    }

    fn eval_uncalibrated(&self, x: T) -> (T, T, T) {
        match &self.quad {
            None => self.eval_piecewise(x, self.inner_lambda),
            Some(q) => {
                let mut v = T::zero();
                let mut d = T::zero();
                let mut s = T::zero();
                for (node, w) in q.nodes.iter().zip(&q.weights) {
                    let y = x - self.sigma * *node;
                    let (pv, pd, ps) = self.eval_piecewise(y, self.inner_lambda);
                    v += *w * pv;
                    d += *w * pd;
                    s += *w * ps;
                }
                (v, d, s)
            }
        }
    }

    fn eval_piecewise(&self, x: T, lambda: T) -> (T, T, T) {
        let u = x.abs() / lambda;
        if u >= T::one() {
            return (T::zero(), T::zero(), T::zero());
        }
        let sign = if x < T::zero() { -T::one() } else { T::one() };
        let phi = self.second_at_one - self.second.eval(u);
        let dphi = -self.first.eval(u);
        let d2phi = -self.slope.eval(u);
        (phi, sign * dphi / lambda, d2phi / (lambda * lambda))
    }

    /// `F(x) = x^2 phi'' + 4 x phi' + 2 phi`; scale invariant in `lambda`.
    pub fn f_combination(&self, x: T) -> T {
        let (v, d, s) = self.eval(x);
        x * x * s + c::<T>(4.0) * x * d + crate::scalar::two::<T>() * v
    }
}

fn unit_slope<T: Real>(tau: T, h: T) -> Piecewise<T> {
    // Slope runs 0 -> -h -> +h -> 0 so the double integral is -1/2 at the
    // origin after calibration.
    let zero = T::zero();
    let one = T::one();
    let hf = half::<T>();
    if tau == zero {
        Piecewise {
            breaks: vec![zero, hf, one, one + one],
            coefs: vec![vec![-h], vec![h], vec![zero]],
        }
    } else {
        let ramp = h / tau;
        Piecewise {
            breaks: vec![zero, tau, hf - tau, hf + tau, one - tau, one, one + one],
            coefs: vec![
                vec![zero, -ramp],
                vec![-h],
                vec![-h, ramp],
                vec![h],
                vec![h, -ramp],
                vec![zero],
            ],
        }
    }
}

fn gauss_legendre_quad<T: Real>(n: usize) -> MollifierQuad<T> {
    // Nodes/weights on [-1, 1] by Newton iteration on Legendre polynomials,
    // then reweighted by the normalized bump kernel exp(-1/(1-u^2)).
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = c(x);
        weights[i] = c(2.0 / ((1.0 - x * x) * dp * dp));
    }
    // Fold the kernel into the weights and normalize to unit mass.
    let mut mass = T::zero();
    for (x, w) in nodes.iter().zip(weights.iter_mut()) {
        let u = *x;
        let k = (-(T::one() / (T::one() - u * u))).exp();
        *w *= k;
        mass += *w;
    }
    for w in &mut weights {
        *w /= mass;
    }
    MollifierQuad { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Report of a sup-bound sweep of `F` over the profile support.
#[derive(Debug, Clone)]
pub struct FBoundReport<T> {
    pub f_at_zero: T,
    pub max_ratio: T,
    pub worst_x: T,
    pub bound: T,
    pub pass: bool,
}

/// Evaluates `max |F| / |F(0)|` on a uniform grid over the support and
/// compares against `2 (1 + delta)`.
pub fn check_f_bound<T: Real>(
    profile: &BumpProfile<T>,
    delta: T,
    grid: usize,
) -> Result<FBoundReport<T>> {
    if grid < 1000 {
        return Err(Error::parameter(format!("F-bound sweep needs >= 1000 grid points, got {grid}")));
    }
    let f0 = profile.f_combination(T::zero());
    let mut max_ratio = T::zero();
    let mut worst_x = T::zero();
    for i in 0..=grid {
        let x = profile.lambda * c::<T>(i as f64 / grid as f64);
        let ratio = profile.f_combination(x).abs() / f0.abs();
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_x = x;
        }
    }
    let bound = crate::scalar::two::<T>() * (T::one() + delta);
    Ok(FBoundReport { f_at_zero: f0, max_ratio, worst_x, bound, pass: max_ratio <= bound })
}

/// Value, gradient and Hessian of `alpha` in the transverse coordinates.
#[derive(Debug, Clone)]
pub struct AlphaJet<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Mat<T>,
}

/// The deformation recipe for a tube of scale `eps` around the axis.
#[derive(Clone)]
pub struct DeformationSpec<T> {
    pub n: usize,
    pub r: usize,
    pub epsilon: T,
    pub tau: T,
    pub amplitude: T,
    wide: BumpProfile<T>,
    narrow: BumpProfile<T>,
}

impl<T: Real> DeformationSpec<T> {
    pub fn new(n: usize, r: usize, epsilon: T, tau: T) -> Result<Self> {
        Self::with_amplitude(n, r, epsilon, tau, T::one())
    }

    pub fn with_amplitude(n: usize, r: usize, epsilon: T, tau: T, amplitude: T) -> Result<Self> {
        let model = SymmetricModel::new(n, r)?;
        if model.r == model.transverse_dim() {
            return Err(Error::parameter("deformation needs a nonempty weak block (r < n - 1)"));
        }
        if epsilon <= T::zero() {
            return Err(Error::parameter("tube scale must be positive"));
        }
        let wide = BumpProfile::new(tau, epsilon)?;
        let narrow = BumpProfile::new(tau, epsilon * epsilon)?;
        Ok(DeformationSpec { n, r, epsilon, tau, amplitude, wide, narrow })
    }

    pub fn transverse_dim(&self) -> usize {
        self.n - 1
    }

    /// Weak-block transverse indices (0-based).
    pub fn weak_block(&self) -> std::ops::Range<usize> {
        self.r..self.transverse_dim()
    }

    /// Factor `f_{b,j}` and its two derivatives at a coordinate value.
    fn factor(&self, b: usize, j: usize, x: T) -> (T, T, T) {
        let neg2 = c::<T>(-2.0);
        let two = crate::scalar::two::<T>();
        if j == b {
            let (v, d, s) = self.narrow.eval(x);
            (two * v, two * d, two * s)
        } else {
            let (v, d, s) = self.wide.eval(x);
            (neg2 * v, neg2 * d, neg2 * s)
        }
    }

    /// `Phi_b(x) = 1/4 prod_j f_{b,j}(x_j)`.
    pub fn phi(&self, b: usize, x: &[T]) -> T {
        let quarter = c::<T>(0.25);
        let mut p = quarter;
        for j in 0..self.transverse_dim() {
            p *= self.factor(b, j, x[j]).0;
        }
        p
    }

    /// `alpha` with gradient and Hessian in the transverse coordinates;
    /// independent of the axis coordinate by construction.
    pub fn alpha_eval(&self, x: &[T]) -> AlphaJet<T> {
        let m = self.transverse_dim();
        assert_eq!(x.len(), m);
        let quarter = c::<T>(0.25);
        let two = crate::scalar::two::<T>();
        let mut value = T::zero();
        let mut grad = vec![T::zero(); m];
        let mut hess = Mat::zeros(m, m);

        for b in self.weak_block() {
            let facs: Vec<(T, T, T)> = (0..m).map(|j| self.factor(b, j, x[j])).collect();
            let prod_except = |skip: &[usize]| -> T {
                let mut p = T::one();
                for j in 0..m {
                    if !skip.contains(&j) {
                        p *= facs[j].0;
                    }
                }
                p
            };
            let p_full = prod_except(&[]);
            let xb = x[b];
            let xb2 = xb * xb;

            value += quarter * xb2 * p_full;

            let dp: Vec<T> = (0..m).map(|a| facs[a].1 * prod_except(&[a])).collect();
            for a in 0..m {
                let mut g = xb2 * dp[a];
                if a == b {
                    g += two * xb * p_full;
                }
                grad[a] += quarter * g;
            }

            for a in 0..m {
                for cidx in a..m {
                    let d2p = if a == cidx {
                        facs[a].2 * prod_except(&[a])
                    } else {
                        facs[a].1 * facs[cidx].1 * prod_except(&[a, cidx])
                    };
                    let mut hval = xb2 * d2p;
                    if a == b {
                        hval += two * xb * dp[cidx];
                    }
                    if cidx == b {
                        hval += two * xb * dp[a];
                    }
                    if a == b && cidx == b {
                        hval += two * p_full;
                    }
                    hess[(a, cidx)] += quarter * hval;
                }
            }
        }
        for a in 0..m {
            for cidx in 0..a {
                hess[(a, cidx)] = hess[(cidx, a)];
            }
        }
        AlphaJet { value, grad, hess }
    }
}

/// Scaling sweep of `alpha` and its derivatives over a list of tube scales.
#[derive(Debug, Clone)]
pub struct EstimatesReport<T> {
    pub epsilons: Vec<T>,
    /// Per-epsilon maxima: `(|alpha|, |grad|, mixed |hess|, axial |hess|)`.
    pub maxima: Vec<[T; 4]>,
    /// Fitted log-log exponents for the four quantities.
    pub exponents: [T; 4],
    /// Single constant bounding each quantity by `M0 * eps^p` with the
    /// nominal powers `(4, 2, 1, 0)`.
    pub m0: T,
}

/// Grid-maximizes `alpha` and its derivatives for each tube scale and fits
/// the scaling exponents. The per-axis grid is a two-scale union resolving
/// both the wide (`eps`) and narrow (`eps^2`) supports.
pub fn check_estimates<T: Real>(
    n: usize,
    r: usize,
    tau: T,
    epsilons: &[T],
    points_per_scale: usize,
) -> Result<EstimatesReport<T>> {
    if epsilons.len() < 3 {
        return Err(Error::parameter("scaling fit needs at least 3 tube scales"));
    }
    let mut maxima = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let spec = DeformationSpec::new(n, r, eps, tau)?;
        maxima.push(scan_alpha_maxima(&spec, points_per_scale));
    }
    let xs: Vec<T> = epsilons.iter().map(|e| e.ln()).collect();
    let mut exponents = [T::zero(); 4];
    for q in 0..4 {
        let ys: Vec<T> = maxima.iter().map(|m| m[q].max(c(1e-300)).ln()).collect();
        let (slope, _) = crate::linalg::linear_fit(&xs, &ys)?;
        exponents[q] = slope;
    }
    let nominal = [4.0, 2.0, 1.0, 0.0];
    let mut m0 = T::zero();
    for (i, &eps) in epsilons.iter().enumerate() {
        for q in 0..4 {
            m0 = m0.max(maxima[i][q] / eps.powf(c(nominal[q])));
        }
    }
    Ok(EstimatesReport { epsilons: epsilons.to_vec(), maxima, exponents, m0 })
}

fn scan_alpha_maxima<T: Real>(spec: &DeformationSpec<T>, points: usize) -> [T; 4] {
    let m = spec.transverse_dim();
    let eps = spec.epsilon;
    let mut axis_grid: Vec<T> = Vec::new();
    for i in 0..=points {
        let f = c::<T>(i as f64 / points as f64);
        axis_grid.push(eps * f);
        axis_grid.push(-eps * f);
        axis_grid.push(eps * eps * f);
        axis_grid.push(-eps * eps * f);
    }
    axis_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    axis_grid.dedup();

    let mut best = [T::zero(); 4];
    let mut index = vec![0usize; m];
    let total = axis_grid.len().pow(m as u32);
    let mut x = vec![T::zero(); m];
    for _ in 0..total {
        for (j, &ix) in index.iter().enumerate() {
            x[j] = axis_grid[ix];
        }
        let jet = spec.alpha_eval(&x);
        best[0] = best[0].max(jet.value.abs());
        for g in &jet.grad {
            best[1] = best[1].max(g.abs());
        }
        for a in 0..m {
            for b2 in 0..m {
                let v = jet.hess[(a, b2)].abs();
                if a == b2 && spec.weak_block().contains(&a) {
                    best[3] = best[3].max(v);
                } else {
                    best[2] = best[2].max(v);
                }
            }
        }
        // Odometer increment over the tensor grid.
        let mut j = 0;
        loop {
            index[j] += 1;
            if index[j] < axis_grid.len() {
                break;
            }
            index[j] = 0;
            j += 1;
            if j == m {
                break;
            }
        }
        if j == m {
            break;
        }
    }
    best
}

struct DeformedComponents<T> {
    base: Arc<dyn MetricComponents<T>>,
    spec: DeformationSpec<T>,
}

impl<T: Real> MetricComponents<T> for DeformedComponents<T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn metric_into(&self, p: &ChartPoint<T>, g: &mut Mat<T>) {
        self.base.metric_into(p, g);
        let jet = self.spec.alpha_eval(&p.x);
        g[(0, 0)] += self.spec.amplitude * jet.value;
    }

    fn d_metric_into(&self, p: &ChartPoint<T>, dg: &mut [Mat<T>]) -> bool {
        if !self.base.d_metric_into(p, dg) {
            return false;
        }
        let jet = self.spec.alpha_eval(&p.x);
        for a in 1..self.dim() {
            dg[a][(0, 0)] += self.spec.amplitude * jet.grad[a - 1];
        }
        true
    }

    fn d2_metric_into(&self, p: &ChartPoint<T>, d2g: &mut [Mat<T>]) -> bool {
        if !self.base.d2_metric_into(p, d2g) {
            return false;
        }
        let n = self.dim();
        let jet = self.spec.alpha_eval(&p.x);
        for a in 1..n {
            for b in 1..n {
                d2g[a * n + b][(0, 0)] += self.spec.amplitude * jet.hess[(a - 1, b - 1)];
            }
        }
        true
    }
}

/// Deformed chart over an arbitrary base: `g*_00 = g_00 + amplitude * alpha`,
/// all other components unchanged. Positive definiteness is checked on a
/// deterministic sample of the tube.
pub fn deformed_chart<T: Real>(
    base: Arc<dyn MetricComponents<T>>,
    period: T,
    radius: T,
    spec: &DeformationSpec<T>,
) -> Result<MetricChart<T>> {
    if base.dim() != spec.n {
        return Err(Error::parameter("deformation dimension does not match base chart"));
    }
    if spec.epsilon >= radius {
        return Err(Error::parameter("tube scale must be below the chart radius"));
    }
    let chart = MetricChart::new(
        Arc::new(DeformedComponents { base, spec: spec.clone() }),
        period,
        radius,
    )?;
    check_positive_definite(&chart, spec)?;
    Ok(chart)
}

/// Deformed chart over the tube chart of a symmetric model.
pub fn deformed_symmetric_chart<T: Real>(
    model: &SymmetricModel,
    period: T,
    radius: T,
    spec: &DeformationSpec<T>,
) -> Result<MetricChart<T>> {
    let _ = symmetric_chart::<T>(model, period, radius)?;
    let base: Arc<dyn MetricComponents<T>> = Arc::new(FermiTubeComponents::from_model(model));
    deformed_chart(base, period, radius, spec)
}

fn check_positive_definite<T: Real>(chart: &MetricChart<T>, spec: &DeformationSpec<T>) -> Result<()> {
    let m = spec.transverse_dim();
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut points: Vec<Vec<T>> = Vec::new();
    for b in spec.weak_block() {
        for i in 0..9 {
            let f = c::<T>(i as f64 / 8.0);
            let mut x = vec![T::zero(); m];
            x[b] = spec.epsilon * spec.epsilon * (f + f - T::one());
            points.push(x);
        }
    }
    for _ in 0..256 {
        let mut x = vec![T::zero(); m];
        for xj in x.iter_mut() {
            let u = (next() >> 11) as f64 / (1u64 << 53) as f64;
            *xj = spec.epsilon * c(2.0 * u - 1.0);
        }
        points.push(x);
    }
    for x in points {
        let p = ChartPoint::new(T::zero(), x);
        if chart.metric(&p).cholesky().is_err() {
            return Err(Error::DeformationTooLarge);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    /// Quadrature oracle: the profile value at the origin equals
    /// `int_0^1 (1 - t) w(t) dt` by swapping the order of the double
    /// integral; `w` is written out directly from the ramp description.
    fn phi_at_zero_oracle(tau: f64, h: f64) -> f64 {
        let w = |t: f64| -> f64 {
            if tau == 0.0 {
                if t < 0.5 {
                    -h
                } else if t <= 1.0 {
                    h
                } else {
                    0.0
                }
            } else if t < tau {
                -h * t / tau
            } else if t < 0.5 - tau {
                -h
            } else if t < 0.5 + tau {
                -h + h * (t - (0.5 - tau)) / tau
            } else if t < 1.0 - tau {
                h
            } else if t <= 1.0 {
                h - h * (t - (1.0 - tau)) / tau
            } else {
                0.0
            }
        };
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            acc += (1.0 - t) * w(t);
        }
        acc / n as f64
    }

    #[test]
    fn h_tau_matches_quadrature_oracle() {
        for (tau, expected) in [(0.0, 2.0), (0.1, 2.5), (0.25, 4.0)] {
            let h = solve_h_tau::<f64>(tau).unwrap();
            assert_close(h, expected, 1e-12);
            // Oracle: with height h the double integral at the origin is -1/2.
            let phi0 = phi_at_zero_oracle(tau, h);
            assert_close(phi0, -0.5, 1e-8);
        }
        assert!(solve_h_tau::<f64>(0.5).is_err());
        assert!(solve_h_tau::<f64>(-0.1).is_err());
    }

    #[test]
    fn profile_support_and_calibration() {
        for tau in [0.0, 0.05] {
            let p = BumpProfile::piecewise(tau, 0.7).unwrap();
            let (v, d, s) = p.eval(0.0);
            assert_close(v, -0.5, 1e-14);
            assert_close(d, 0.0, 1e-14);
            // The curvature of the profile at the origin is h for sharp
            // ramps and zero when the slope ramps up from zero.
            if tau == 0.0 {
                assert!(s > 0.0);
            } else {
                assert_close(s, 0.0, 1e-14);
            }
            for x in [0.7, 0.9, -0.75] {
                assert_eq!(p.eval(x), (0.0, 0.0, 0.0));
            }
            let (v_end, d_end, _) = p.eval(0.7 - 1e-13);
            assert!(v_end.abs() < 1e-12);
            assert!(d_end.abs() < 1e-10);
        }
    }

    #[test]
    fn plateau_second_derivative_value() {
        // tau = 0, sigma = 0: phi'' = h0 / lambda^2 on the inner plateau.
        for lambda in [1.0, 0.3] {
            let p = BumpProfile::piecewise(0.0, lambda).unwrap();
            let (_, _, s) = p.eval(0.25 * lambda);
            assert_close(s, 2.0 / (lambda * lambda), 1e-12);
        }
    }

    #[test]
    fn smoothed_profile_is_c2_close_to_piecewise() {
        // The smoothed profile keeps its support inside [-lambda, lambda] by
        // mollifying the piecewise profile at scale lambda - sigma, so the
        // C2 comparison is against that inner profile, away from its ramp
        // corners where the second derivative genuinely jumps in slope.
        let tau = 0.05;
        let lambda = 1.0;
        let smooth = BumpProfile::new(tau, lambda).unwrap();
        let sigma = smooth.sigma;
        let inner = lambda - sigma;
        let raw = BumpProfile::piecewise(tau, inner).unwrap();
        let corners: Vec<f64> =
            [0.0, tau, 0.5 - tau, 0.5 + tau, 1.0 - tau, 1.0].iter().map(|u| u * inner).collect();
        let mut worst = 0.0f64;
        for i in 0..=400 {
            let x = i as f64 / 400.0 * lambda;
            if corners.iter().any(|cx| (x - cx).abs() < 3.0 * sigma) {
                continue;
            }
            let a = raw.eval(x);
            let b = smooth.eval(x);
            worst = worst.max((a.0 - b.0).abs()).max((a.1 - b.1).abs()).max((a.2 - b.2).abs());
        }
        assert!(worst < 0.05, "C2 distance {worst}");
        // Calibration keeps the origin pinned and the support end clean
        // after smoothing.
        assert_close(smooth.eval(0.0).0, -0.5, 1e-14);
        assert_eq!(smooth.eval(lambda), (0.0, 0.0, 0.0));
        let near_end = smooth.eval(lambda - 1e-9);
        assert!(near_end.0.abs() < 1e-8 && near_end.1.abs() < 1e-8);
    }

    #[test]
    fn f_bound_sharp_profile() {
        let p = BumpProfile::piecewise(0.0, 1.0).unwrap();
        let report = check_f_bound(&p, 0.0, 2000).unwrap();
        assert_close(report.f_at_zero, -1.0, 1e-12);
        assert!(report.max_ratio <= 2.0 + 1e-9, "ratio {}", report.max_ratio);
        assert!(report.pass);
        // Interior formula on the first plateau: F = (-1/2 + 6 x^2) h0.
        for x in [0.1, 0.25, 0.4] {
            let f = p.f_combination(x);
            assert_close(f, (-0.5 + 6.0 * x * x) * 2.0, 1e-12);
        }
    }

    #[test]
    fn f_bound_small_ramps_pass_with_slack() {
        for tau in [0.01, 0.05] {
            let p = BumpProfile::new(tau, 1.0).unwrap();
            let report = check_f_bound(&p, 0.1, 10_000).unwrap();
            assert!(report.pass, "tau {tau}: ratio {}", report.max_ratio);
            assert_close(report.f_at_zero, -1.0, 1e-9);
        }
    }

    #[test]
    fn f_bound_requires_a_dense_grid() {
        let p = BumpProfile::piecewise(0.0, 1.0).unwrap();
        assert!(check_f_bound(&p, 0.0, 100).is_err());
    }

    #[test]
    fn alpha_on_axis_jet() {
        let spec = DeformationSpec::new(4, 1, 0.1, 0.0).unwrap();
        let jet = spec.alpha_eval(&[0.0, 0.0, 0.0]);
        assert_close(jet.value, 0.0, 1e-15);
        for g in &jet.grad {
            assert_close(*g, 0.0, 1e-15);
        }
        for b in 1..3 {
            assert_close(jet.hess[(b, b)], -0.5, 1e-12);
            assert_close(spec.phi(b, &[0.0, 0.0, 0.0]), -0.25, 1e-12);
        }
        // Strong-direction diagonal stays untouched.
        assert_close(jet.hess[(0, 0)], 0.0, 1e-15);
    }

    #[test]
    fn alpha_vanishes_outside_wide_support() {
        let spec = DeformationSpec::new(4, 1, 0.1, 0.0).unwrap();
        // |x_0| beyond eps kills every term through the wide factors.
        let jet = spec.alpha_eval(&[0.11, 0.001, 0.0]);
        assert_close(jet.value, 0.0, 1e-15);
        // |x_b| beyond eps^2 kills the b-term through the narrow factor.
        let jet = spec.alpha_eval(&[0.0, 0.02, 0.0]);
        assert_close(jet.value, 0.0, 1e-15);
    }

    #[test]
    fn alpha_jet_matches_finite_differences() {
        let spec = DeformationSpec::new(4, 1, 0.2, 0.05).unwrap();
        let x0 = [0.05f64, 0.012, -0.008];
        let jet = spec.alpha_eval(&x0);
        let h = 1e-6;
        for a in 0..3 {
            let mut xp = x0;
            let mut xm = x0;
            xp[a] += h;
            xm[a] -= h;
            let fd = (spec.alpha_eval(&xp).value - spec.alpha_eval(&xm).value) / (2.0 * h);
            assert_close(jet.grad[a], fd, 1e-7);
        }
        for a in 0..3 {
            for b in 0..3 {
                let mut xpp = x0;
                let mut xpm = x0;
                let mut xmp = x0;
                let mut xmm = x0;
                xpp[a] += h;
                xpp[b] += h;
                xpm[a] += h;
                xpm[b] -= h;
                xmp[a] -= h;
                xmp[b] += h;
                xmm[a] -= h;
                xmm[b] -= h;
                let fd = (spec.alpha_eval(&xpp).value - spec.alpha_eval(&xpm).value
                    - spec.alpha_eval(&xmp).value
                    + spec.alpha_eval(&xmm).value)
                    / (4.0 * h * h);
                assert_close(jet.hess[(a, b)], fd, 2e-4);
            }
        }
    }

    #[test]
    fn estimates_scaling_exponents() {
        let report = check_estimates::<f64>(4, 1, 0.0, &[0.2, 0.1, 0.05], 10).unwrap();
        assert!(report.exponents[0] >= 3.8, "alpha exponent {}", report.exponents[0]);
        assert!((report.exponents[1] - 2.0).abs() <= 0.2, "grad exponent {}", report.exponents[1]);
        assert!(report.exponents[2] >= 0.9, "mixed exponent {}", report.exponents[2]);
        assert!(report.exponents[3].abs() <= 0.2, "axial exponent {}", report.exponents[3]);
        // The axial second derivative is bounded by a constant across scales.
        let axial: Vec<f64> = report.maxima.iter().map(|m| m[3]).collect();
        let lo = axial.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = axial.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.5, "axial ratio {}", hi / lo);
        assert!(check_estimates::<f64>(4, 1, 0.0, &[0.2, 0.1], 10).is_err());
    }

    #[test]
    fn deformed_chart_zero_amplitude_equals_base() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let base = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        let spec = DeformationSpec::with_amplitude(4, 1, 0.1, 0.0, 0.0).unwrap();
        let chart = deformed_symmetric_chart(&model, 1.0, 0.5, &spec).unwrap();
        let p = ChartPoint::new(0.2, vec![0.03, 0.005, -0.002]);
        assert!(chart.metric(&p).max_abs_diff(&base.metric(&p)) < 1e-15);
    }

    #[test]
    fn deformed_chart_axis_operator_flattens_weak_block() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let spec = DeformationSpec::new(4, 1, 0.1, 0.0).unwrap();
        let chart = deformed_symmetric_chart(&model, 1.0, 0.5, &spec).unwrap();
        for s in 0..8 {
            let t = s as f64 / 8.0;
            let k = chart.axis_curvature_operator(t).unwrap();
            assert_close(k[(0, 0)], -1.0, 1e-10);
            assert_close(k[(1, 1)], 0.0, 1e-10);
            assert_close(k[(2, 2)], 0.0, 1e-10);
            assert_close(k[(0, 1)], 0.0, 1e-10);
        }
    }

    #[test]
    fn deformed_chart_onaxis_one_jet_identity() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let spec = DeformationSpec::new(4, 1, 0.05, 0.01).unwrap();
        let chart = deformed_symmetric_chart(&model, 2.0, 0.5, &spec).unwrap();
        for s in 0..16 {
            let t = s as f64 / 8.0;
            let p = ChartPoint::axis(t, 4);
            assert!(chart.metric(&p).max_abs_diff(&Mat::identity(4)) < 1e-10);
            for d in chart.d_metric(&p) {
                assert!(d.max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn deformed_curvature_shift_respects_f_bound() {
        // Single weak coordinate active: the axial curvature moves by
        // -F(x_k / eps^2) / 4 relative to the base value -1/4.
        let model = SymmetricModel::complex_hyperbolic_plane();
        let eps = 0.1f64;
        let spec = DeformationSpec::new(4, 1, eps, 0.0).unwrap();
        let chart = deformed_symmetric_chart(&model, 1.0, 0.5, &spec).unwrap();
        let base = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        let delta = 0.1;
        let bound = 0.5 * (1.0 + delta);
        for frac in [0.0, 0.2, 0.45, 0.7, 0.9] {
            let xk = frac * eps * eps;
            let p = ChartPoint::new(0.0, vec![0.0, xk, 0.0]);
            let rs = chart.curvature_tensor(&p).unwrap().riemann.unwrap();
            let rb = base.curvature_tensor(&p).unwrap().riemann.unwrap();
            let shift = rs.get(0, 2, 0, 2) - rb.get(0, 2, 0, 2);
            assert!(shift.abs() <= bound + 1e-9, "x_k = {xk}: shift {shift}");
        }
        // On-axis value: exactly cancelled weak curvature.
        let p0 = ChartPoint::axis(0.0, 4);
        let r0 = chart.curvature_tensor(&p0).unwrap().riemann.unwrap();
        assert_close(r0.get(0, 2, 0, 2), 0.0, 1e-10);
        assert_close(r0.get(0, 3, 0, 3), 0.0, 1e-10);
        assert_close(r0.get(0, 1, 0, 1), -1.0, 1e-10);
    }

    #[test]
    fn oversized_amplitude_is_rejected() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let spec = DeformationSpec::with_amplitude(4, 1, 0.3, 0.0, 4.0e3).unwrap();
        let err = deformed_symmetric_chart(&model, 1.0, 0.5, &spec);
        assert!(matches!(err, Err(Error::DeformationTooLarge)));
    }

    #[test]
    fn c1_smallness_orders() {
        // Global maxima of alpha and its gradient decay at orders >= 3.8
        // and >= 1.8 in the tube scale.
        let report = check_estimates::<f64>(4, 1, 0.01, &[0.2, 0.1, 0.05], 10).unwrap();
        assert!(report.exponents[0] >= 3.8);
        assert!(report.exponents[1] >= 1.8);
    }
}
