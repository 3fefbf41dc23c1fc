//! Metric charts and pointwise tensor calculus.
//!
//! A chart is a coordinate patch `(t, x_1..x_{n-1})` around a closed axis
//! curve: `t` runs along the axis (periodic with the chart period) and the
//! transverse coordinates are valid for `|x_i|` below the chart radius.
//! Charts expose metric components and, when available, analytic first and
//! second derivatives; otherwise central differences with one Richardson
//! extrapolation are used, with the step tied to the chart radius.
//!
//! Index conventions: coordinate 0 is `t`; the lowered Christoffel symbols
//! are `G_{j,ik} = (d_i g_{jk} + d_k g_{ij} - d_j g_{ik}) / 2` and the
//! curvature components follow
//! `R_{ijkl} = -(d2_{ik} g_{jl} + d2_{jl} g_{ik} - d2_{il} g_{jk} - d2_{jk} g_{il}) / 2
//!  - G_{ik}^T g^{-1} G_{jl} + G_{il}^T g^{-1} G_{jk}`,
//! so that the sectional curvature of a unit plane is `R(v,w,v,w)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::scalar::{c, half, Real};

/// A point of a chart: axis coordinate `t` plus transverse coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint<T> {
    pub t: T,
    pub x: Vec<T>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(t: T, x: Vec<T>) -> Self {
        ChartPoint { t, x }
    }

    /// On-axis point `(t, 0)`.
    pub fn axis(t: T, dim: usize) -> Self {
        ChartPoint { t, x: vec![T::zero(); dim - 1] }
    }

    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }

    pub fn coord(&self, i: usize) -> T {
        if i == 0 {
            self.t
        } else {
            self.x[i - 1]
        }
    }

    pub fn shifted(&self, i: usize, delta: T) -> Self {
        let mut p = self.clone();
        if i == 0 {
            p.t = p.t + delta;
        } else {
            p.x[i - 1] = p.x[i - 1] + delta;
        }
        p
    }

    pub fn max_transverse(&self) -> T {
        self.x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Component evaluator behind a [`MetricChart`].
///
/// `metric_into` must fill a symmetric positive definite matrix. The
/// derivative hooks return `false` when analytic values are unavailable.
pub trait MetricComponents<T>: Send + Sync {
    fn dim(&self) -> usize;

    fn metric_into(&self, p: &ChartPoint<T>, g: &mut Mat<T>);

    /// `dg[a][(i,j)] = d_a g_{ij}`; returns `false` if not implemented.
    fn d_metric_into(&self, _p: &ChartPoint<T>, _dg: &mut [Mat<T>]) -> bool {
        false
    }

    /// `d2g[a*n + b][(i,j)] = d2_{ab} g_{ij}`; returns `false` if not implemented.
    fn d2_metric_into(&self, _p: &ChartPoint<T>, _d2g: &mut [Mat<T>]) -> bool {
        false
    }
}

/// Christoffel symbols at a point, lowered and raised.
#[derive(Debug, Clone)]
pub struct Christoffel<T> {
    n: usize,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    fn zeros(n: usize) -> Self {
        Christoffel { n, lower: vec![T::zero(); n * n * n], upper: vec![T::zero(); n * n * n] }
    }

    /// `G_{j,ik}`.
    #[inline]
    pub fn lower(&self, j: usize, i: usize, k: usize) -> T {
        self.lower[(j * self.n + i) * self.n + k]
    }

    /// `G^k_{ij}`.
    #[inline]
    pub fn upper(&self, k: usize, i: usize, j: usize) -> T {
        self.upper[(k * self.n + i) * self.n + j]
    }

    pub fn max_abs(&self) -> T {
        self.upper
            .iter()
            .chain(self.lower.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Lowered curvature components `R_{ijkl}`.
#[derive(Debug, Clone)]
pub struct Riemann<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Riemann<T> {
    fn zeros(n: usize) -> Self {
        Riemann { n, data: vec![T::zero(); n * n * n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: T) {
        self.data[((i * self.n + j) * self.n + k) * self.n + l] = v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `R(v, w, v, w)` for coordinate vectors `v`, `w`.
    pub fn quad(&self, v: &[T], w: &[T]) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            if v[i] == T::zero() {
                continue;
            }
            for j in 0..n {
                if w[j] == T::zero() {
                    continue;
                }
                for k in 0..n {
                    if v[k] == T::zero() {
                        continue;
                    }
                    for l in 0..n {
                        acc += self.get(i, j, k, l) * v[i] * w[j] * v[k] * w[l];
                    }
                }
            }
        }
        acc
    }

    /// Largest violation of the antisymmetry and pair symmetries.
    pub fn symmetry_defect(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        worst = worst.max((r + self.get(j, i, k, l)).abs());
                        worst = worst.max((r + self.get(i, j, l, k)).abs());
                        worst = worst.max((r - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Christoffel symbols and curvature at a point.
#[derive(Debug, Clone)]
pub struct CurvatureData<T> {
    pub point: ChartPoint<T>,
    pub christoffel: Christoffel<T>,
    pub riemann: Option<Riemann<T>>,
}

/// A coordinate patch with metric components and chart metadata.
#[derive(Clone)]
pub struct MetricChart<T> {
    components: Arc<dyn MetricComponents<T>>,
    period: T,
    radius: T,
    fd_step: T,
}

impl<T: Real> MetricChart<T> {
    /// Wraps a component evaluator; `period` is the axis period, `radius`
    /// the transverse validity bound.
    pub fn new(components: Arc<dyn MetricComponents<T>>, period: T, radius: T) -> Result<Self> {
        if period <= T::zero() {
            return Err(Error::parameter("chart period must be positive"));
        }
        if radius <= T::zero() {
            return Err(Error::parameter("chart radius must be positive"));
        }
        let fd_step = radius * c(1e-3);
        Ok(MetricChart { components, period, radius, fd_step })
    }

    pub fn euclidean(dim: usize, period: T, radius: T) -> Self {
        MetricChart::new(Arc::new(EuclideanComponents { dim }), period, radius).unwrap()
    }

    /// Chart backed by closures; derivatives fall back to finite differences.
    pub fn from_fn<F>(dim: usize, period: T, radius: T, f: F) -> Result<Self>
    where
        F: Fn(&ChartPoint<T>, &mut Mat<T>) + Send + Sync + 'static,
    {
        MetricChart::new(Arc::new(FnComponents { dim, f }), period, radius)
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn check_inside(&self, p: &ChartPoint<T>) -> Result<()> {
        for (i, xi) in p.x.iter().enumerate() {
            if xi.abs() >= self.radius {
                return Err(Error::OutsideChart {
                    index: i + 1,
                    value: xi.abs().to_f64().unwrap_or(f64::NAN),
                    radius: self.radius.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Metric components `g_{ij}(p)`.
    pub fn metric(&self, p: &ChartPoint<T>) -> Mat<T> {
        let n = self.dim();
        let mut g = Mat::zeros(n, n);
        self.components.metric_into(p, &mut g);
        g
    }

    /// Inverse metric through Cholesky; degenerate input is an error.
    pub fn metric_inverse(&self, p: &ChartPoint<T>) -> Result<Mat<T>> {
        self.metric(p).spd_inverse()
    }

    /// First derivatives `d_a g_{ij}`, analytic or finite-difference.
    pub fn d_metric(&self, p: &ChartPoint<T>) -> Vec<Mat<T>> {
        let n = self.dim();
        let mut dg: Vec<Mat<T>> = (0..n).map(|_| Mat::zeros(n, n)).collect();
        if self.components.d_metric_into(p, &mut dg) {
            return dg;
        }
        for a in 0..n {
            dg[a] = self.fd_first(p, a, self.fd_step);
        }
        dg
    }

    /// Second derivatives `d2_{ab} g_{ij}`, analytic, differenced from
    /// analytic first derivatives, or double finite differences.
    pub fn d2_metric(&self, p: &ChartPoint<T>) -> Result<Vec<Mat<T>>> {
        let n = self.dim();
        let mut d2: Vec<Mat<T>> = (0..n * n).map(|_| Mat::zeros(n, n)).collect();
        if self.components.d2_metric_into(p, &mut d2) {
            return Ok(d2);
        }
        let h = self.fd_step;
        if h <= T::epsilon() * c(16.0) {
            return Err(Error::StepUnderflow { h: h.to_f64().unwrap_or(0.0) });
        }
        let analytic_first = {
            let mut probe: Vec<Mat<T>> = (0..n).map(|_| Mat::zeros(n, n)).collect();
            self.components.d_metric_into(p, &mut probe)
        };
        for a in 0..n {
            for b in a..n {
                let m = if analytic_first {
                    // One Richardson pass on central differences of d_b g.
                    let coarse = self.fd_of_first(p, a, b, h);
                    let fine = self.fd_of_first(p, a, b, h * half());
                    richardson(&fine, &coarse)
                } else {
                    let coarse = self.fd_second(p, a, b, h);
                    let fine = self.fd_second(p, a, b, h * half());
                    richardson(&fine, &coarse)
                };
                d2[a * n + b] = m.clone();
                d2[b * n + a] = m;
            }
        }
        Ok(d2)
    }

    fn fd_first(&self, p: &ChartPoint<T>, a: usize, h: T) -> Mat<T> {
        let coarse = self.central_first(p, a, h);
        let fine = self.central_first(p, a, h * half());
        richardson(&fine, &coarse)
    }

    fn central_first(&self, p: &ChartPoint<T>, a: usize, h: T) -> Mat<T> {
        let gp = self.metric(&p.shifted(a, h));
        let gm = self.metric(&p.shifted(a, -h));
        gp.sub(&gm).scale(half::<T>() / h)
    }

    fn fd_of_first(&self, p: &ChartPoint<T>, a: usize, b: usize, h: T) -> Mat<T> {
        let n = self.dim();
        let mut dgp: Vec<Mat<T>> = (0..n).map(|_| Mat::zeros(n, n)).collect();
        let mut dgm: Vec<Mat<T>> = (0..n).map(|_| Mat::zeros(n, n)).collect();
        let okp = self.components.d_metric_into(&p.shifted(a, h), &mut dgp);
        let okm = self.components.d_metric_into(&p.shifted(a, -h), &mut dgm);
        debug_assert!(okp && okm);
        dgp[b].sub(&dgm[b]).scale(half::<T>() / h)
    }

    fn fd_second(&self, p: &ChartPoint<T>, a: usize, b: usize, h: T) -> Mat<T> {
        if a == b {
            let gp = self.metric(&p.shifted(a, h));
            let g0 = self.metric(p);
            let gm = self.metric(&p.shifted(a, -h));
            gp.add(&gm).sub(&g0.scale(c(2.0))).scale(T::one() / (h * h))
        } else {
            let gpp = self.metric(&p.shifted(a, h).shifted(b, h));
            let gpm = self.metric(&p.shifted(a, h).shifted(b, -h));
            let gmp = self.metric(&p.shifted(a, -h).shifted(b, h));
            let gmm = self.metric(&p.shifted(a, -h).shifted(b, -h));
            gpp.sub(&gpm).sub(&gmp).add(&gmm).scale(c::<T>(0.25) / (h * h))
        }
    }

    /// Christoffel symbols at `p`, lowered and raised.
    pub fn christoffel(&self, p: &ChartPoint<T>) -> Result<CurvatureData<T>> {
        self.check_inside(p)?;
        let gamma = self.christoffel_raw(p, &self.d_metric(p))?;
        Ok(CurvatureData { point: p.clone(), christoffel: gamma, riemann: None })
    }

    /// Christoffel symbols without the chart-radius guard; orbit integration
    /// controls the domain through exit events instead.
    pub fn christoffel_unchecked(&self, p: &ChartPoint<T>) -> Result<Christoffel<T>> {
        self.christoffel_raw(p, &self.d_metric(p))
    }

    /// Christoffel symbols and curvature without the chart-radius guard.
    pub fn orbit_data(&self, p: &ChartPoint<T>) -> Result<(Christoffel<T>, Riemann<T>)> {
        let dg = self.d_metric(p);
        let d2g = self.d2_metric(p)?;
        let data = self.curvature_from_derivatives(p, &dg, &d2g)?;
        Ok((data.christoffel, data.riemann.expect("curvature computed")))
    }

    fn christoffel_raw(&self, p: &ChartPoint<T>, dg: &[Mat<T>]) -> Result<Christoffel<T>> {
        let n = self.dim();
        let ginv = self.metric_inverse(p)?;
        let mut gamma = Christoffel::zeros(n);
        for j in 0..n {
            for i in 0..n {
                for k in 0..n {
                    let v = half::<T>() * (dg[i][(j, k)] + dg[k][(i, j)] - dg[j][(i, k)]);
                    gamma.lower[(j * n + i) * n + k] = v;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = T::zero();
                    for l in 0..n {
                        acc += ginv[(k, l)] * gamma.lower(l, i, j);
                    }
                    gamma.upper[(k * n + i) * n + j] = acc;
                }
            }
        }
        Ok(gamma)
    }

    /// Full lowered curvature tensor at `p`.
    pub fn curvature_tensor(&self, p: &ChartPoint<T>) -> Result<CurvatureData<T>> {
        self.check_inside(p)?;
        let dg = self.d_metric(p);
        let d2g = self.d2_metric(p)?;
        self.curvature_from_derivatives(p, &dg, &d2g)
    }

    /// Curvature with second derivatives forced onto the finite-difference
    /// path at an explicit step `h` (no Richardson pass); used to verify the
    /// convergence order of the fallback against analytic charts.
    pub fn curvature_tensor_fd(&self, p: &ChartPoint<T>, h: T) -> Result<CurvatureData<T>> {
        self.check_inside(p)?;
        if h <= T::epsilon() * c(16.0) {
            return Err(Error::StepUnderflow { h: h.to_f64().unwrap_or(0.0) });
        }
        let n = self.dim();
        let dg = self.d_metric(p);
        let analytic_first = {
            let mut probe: Vec<Mat<T>> = (0..n).map(|_| Mat::zeros(n, n)).collect();
            self.components.d_metric_into(p, &mut probe)
        };
        let mut d2: Vec<Mat<T>> = (0..n * n).map(|_| Mat::zeros(n, n)).collect();
        for a in 0..n {
            for b in a..n {
                let m = if analytic_first {
                    self.fd_of_first(p, a, b, h)
                } else {
                    self.fd_second(p, a, b, h)
                };
                d2[a * n + b] = m.clone();
                d2[b * n + a] = m;
            }
        }
        self.curvature_from_derivatives(p, &dg, &d2)
    }

    fn curvature_from_derivatives(
        &self,
        p: &ChartPoint<T>,
        dg: &[Mat<T>],
        d2g: &[Mat<T>],
    ) -> Result<CurvatureData<T>> {
        let n = self.dim();
        let ginv = self.metric_inverse(p)?;
        let gamma = self.christoffel_raw(p, dg)?;

        // w[i][k] = g^{-1} [G_{m,ik}]_m
        let mut gvec = vec![vec![T::zero(); n]; n * n];
        let mut wvec = vec![vec![T::zero(); n]; n * n];
        for i in 0..n {
            for k in 0..n {
                let gv: Vec<T> = (0..n).map(|m| gamma.lower(m, i, k)).collect();
                wvec[i * n + k] = ginv.matvec(&gv);
                gvec[i * n + k] = gv;
            }
        }

        let mut r = Riemann::zeros(n);
        let h = half::<T>();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let second = d2g[i * n + k][(j, l)] + d2g[j * n + l][(i, k)]
                            - d2g[i * n + l][(j, k)]
                            - d2g[j * n + k][(i, l)];
                        let quad1 = dot(&gvec[i * n + k], &wvec[j * n + l]);
                        let quad2 = dot(&gvec[i * n + l], &wvec[j * n + k]);
                        r.set(i, j, k, l, -h * second - quad1 + quad2);
                    }
                }
            }
        }
        Ok(CurvatureData { point: p.clone(), christoffel: gamma, riemann: Some(r) })
    }

    /// Sectional curvature of the plane spanned by `v`, `w`.
    pub fn sectional_curvature(&self, p: &ChartPoint<T>, v: &[T], w: &[T]) -> Result<T> {
        let data = self.curvature_tensor(p)?;
        let riemann = data.riemann.expect("curvature computed");
        let g = self.metric(p);
        let gvv = quad_form(&g, v, v);
        let gww = quad_form(&g, w, w);
        let gvw = quad_form(&g, v, w);
        let gram = gvv * gww - gvw * gvw;
        let scale = (gvv * gww).max(T::epsilon());
        if gram <= scale * c(1e-12) {
            return Err(Error::DegeneratePlane { gram: gram.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(riemann.quad(v, w) / gram)
    }

    /// Matrix `K_{ab} = R(v, u_a, v, u_b)` for a unit `v` and an orthonormal
    /// frame `u_a` of its complement (frame vectors are the columns).
    pub fn curvature_operator_matrix(
        &self,
        p: &ChartPoint<T>,
        v: &[T],
        frame: &Mat<T>,
    ) -> Result<Mat<T>> {
        let g = self.metric(p);
        let vnorm = quad_form(&g, v, v);
        let tol = c::<T>(1e-8).max(T::epsilon() * c(256.0));
        if (vnorm - T::one()).abs() > tol {
            return Err(Error::NotUnit { norm_sq: vnorm.to_f64().unwrap_or(f64::NAN) });
        }
        let data = self.curvature_tensor(p)?;
        let riemann = data.riemann.expect("curvature computed");
        let n = self.dim();
        let m = frame.cols();
        let mut k = Mat::zeros(m, m);
        for a in 0..m {
            let ua = frame.column(a);
            for b in 0..m {
                let ub = frame.column(b);
                let mut acc = T::zero();
                for i in 0..n {
                    if v[i] == T::zero() {
                        continue;
                    }
                    for jj in 0..n {
                        for kk in 0..n {
                            if v[kk] == T::zero() {
                                continue;
                            }
                            for ll in 0..n {
                                acc += riemann.get(i, jj, kk, ll) * v[i] * ua[jj] * v[kk] * ub[ll];
                            }
                        }
                    }
                }
                k[(a, b)] = acc;
            }
        }
        k.symmetrize();
        Ok(k)
    }

    /// Curvature operator on the axis in the coordinate frame.
    pub fn axis_curvature_operator(&self, t: T) -> Result<Mat<T>> {
        let n = self.dim();
        let p = ChartPoint::axis(t, n);
        let mut v = vec![T::zero(); n];
        v[0] = T::one();
        let mut frame = Mat::zeros(n, n - 1);
        for a in 0..n - 1 {
            frame[(a + 1, a)] = T::one();
        }
        self.curvature_operator_matrix(&p, &v, &frame)
    }
}

/// `v^T g w`.
pub fn quad_form<T: Real>(g: &Mat<T>, v: &[T], w: &[T]) -> T {
    dot(&g.matvec(w), v)
}

fn richardson<T: Real>(fine: &Mat<T>, coarse: &Mat<T>) -> Mat<T> {
    // (4 F(h/2) - F(h)) / 3 for an O(h^2) base scheme.
    fine.scale(c(4.0)).sub(coarse).scale(c(1.0 / 3.0))
}

struct EuclideanComponents {
    dim: usize,
}

impl<T: Real> MetricComponents<T> for EuclideanComponents {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric_into(&self, _p: &ChartPoint<T>, g: &mut Mat<T>) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                g[(i, j)] = if i == j { T::one() } else { T::zero() };
            }
        }
    }
    fn d_metric_into(&self, _p: &ChartPoint<T>, dg: &mut [Mat<T>]) -> bool {
        for m in dg.iter_mut() {
            *m = Mat::zeros(self.dim, self.dim);
        }
        true
    }
    fn d2_metric_into(&self, _p: &ChartPoint<T>, d2g: &mut [Mat<T>]) -> bool {
        for m in d2g.iter_mut() {
            *m = Mat::zeros(self.dim, self.dim);
        }
        true
    }
}

struct FnComponents<F> {
    dim: usize,
    f: F,
}

impl<T: Real, F> MetricComponents<T> for FnComponents<F>
where
    F: Fn(&ChartPoint<T>, &mut Mat<T>) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric_into(&self, p: &ChartPoint<T>, g: &mut Mat<T>) {
        (self.f)(p, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_demo_chart(n: usize) -> MetricChart<f64> {
        // g = diag(1 + x_1^2, 1, ..., 1), evaluated through the
        // finite-difference fallback.
        MetricChart::from_fn(n, std::f64::consts::TAU, 1.0, move |p, g| {
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] = if i == j { 1.0 } else { 0.0 };
                }
            }
            g[(0, 0)] = 1.0 + p.x[0] * p.x[0];
        })
        .unwrap()
    }

    #[test]
    fn euclidean_christoffel_vanishes() {
        let chart = MetricChart::<f64>::euclidean(3, 1.0, 1.0);
        let p = ChartPoint::new(0.3, vec![0.1, -0.2]);
        let data = chart.christoffel(&p).unwrap();
        assert!(data.christoffel.max_abs() == 0.0);
    }

    #[test]
    fn euclidean_curvature_vanishes() {
        let chart = MetricChart::<f64>::euclidean(3, 1.0, 1.0);
        let p = ChartPoint::new(0.0, vec![0.2, 0.4]);
        let data = chart.curvature_tensor(&p).unwrap();
        assert!(data.riemann.unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn diagonal_demo_christoffel_matches_hand_values() {
        // With g_00 = 1 + x_1^2: G_{1,00} = -x_1 and G_{0,01} = x_1.
        let chart = diag_demo_chart(3);
        let p = ChartPoint::new(0.0, vec![0.1, 0.0]);
        let data = chart.christoffel(&p).unwrap();
        let gamma = &data.christoffel;
        assert!((gamma.lower(1, 0, 0) - (-0.1)).abs() < 1e-9);
        assert!((gamma.lower(0, 0, 1) - 0.1).abs() < 1e-9);
        assert!((gamma.lower(0, 1, 0) - 0.1).abs() < 1e-9);
        assert!(gamma.lower(2, 0, 0).abs() < 1e-9);
        // Raised symbols against g^{-1} at the point.
        assert!((gamma.upper(1, 0, 0) - (-0.1)).abs() < 1e-9);
        assert!((gamma.upper(0, 0, 1) - 0.1 / 1.01).abs() < 1e-9);
    }

    #[test]
    fn christoffel_symmetric_in_lower_pair() {
        let chart = diag_demo_chart(3);
        let p = ChartPoint::new(0.2, vec![0.15, -0.05]);
        let data = chart.christoffel(&p).unwrap();
        let n = 3;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let d = (data.christoffel.upper(k, i, j) - data.christoffel.upper(k, j, i))
                        .abs();
                    assert!(d < 1e-10);
                }
            }
        }
    }

    #[test]
    fn outside_chart_is_an_error() {
        let chart = MetricChart::<f64>::euclidean(3, 1.0, 0.5);
        let p = ChartPoint::new(0.0, vec![0.6, 0.0]);
        assert!(matches!(chart.christoffel(&p), Err(Error::OutsideChart { .. })));
    }

    #[test]
    fn degenerate_metric_is_an_error() {
        let chart = MetricChart::from_fn(2, 1.0, 2.0, |p: &ChartPoint<f64>, g: &mut Mat<f64>| {
            g[(0, 0)] = 1.0 - p.x[0];
            g[(0, 1)] = 0.0;
            g[(1, 0)] = 0.0;
            g[(1, 1)] = 1.0;
        })
        .unwrap();
        let p = ChartPoint::new(0.0, vec![1.5]);
        assert!(matches!(chart.christoffel(&p), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn sectional_curvature_euclidean_is_zero_and_degenerate_plane_errors() {
        let chart = MetricChart::<f64>::euclidean(3, 1.0, 1.0);
        let p = ChartPoint::new(0.0, vec![0.0, 0.0]);
        let k = chart
            .sectional_curvature(&p, &[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0])
            .unwrap();
        assert!(k.abs() < 1e-12);
        let err = chart.sectional_curvature(&p, &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::DegeneratePlane { .. })));
    }

    #[test]
    fn curvature_operator_requires_unit_vector() {
        let chart = MetricChart::<f64>::euclidean(3, 1.0, 1.0);
        let p = ChartPoint::new(0.0, vec![0.0, 0.0]);
        let mut frame = Mat::zeros(3, 2);
        frame[(1, 0)] = 1.0;
        frame[(2, 1)] = 1.0;
        let err = chart.curvature_operator_matrix(&p, &[2.0, 0.0, 0.0], &frame);
        assert!(matches!(err, Err(Error::NotUnit { .. })));
        let ok = chart
            .curvature_operator_matrix(&p, &[1.0, 0.0, 0.0], &frame)
            .unwrap();
        assert!(ok.max_abs() < 1e-12);
    }

    #[test]
    fn f32_euclidean_smoke() {
        let chart = MetricChart::<f32>::euclidean(2, 1.0, 1.0);
        let p = ChartPoint::new(0.0f32, vec![0.1]);
        let data = chart.christoffel(&p).unwrap();
        assert!(data.christoffel.max_abs() < 1e-5);
    }
}
