//! Concrete model geometries.
//!
//! The locally symmetric rank-one models carry, along any unit geodesic, a
//! curvature operator with an eigenvalue -1 block of dimension `r` (the
//! strong block, written A) and an eigenvalue -1/4 block on the complement
//! (the weak block, B). Their tube charts are built from the second-order
//! expansion of the metric in transverse normal coordinates, which is exact
//! on the axis: metric identity, vanishing first derivatives and the model
//! curvature operator are reproduced there to machine precision.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{ChartPoint, MetricChart, MetricComponents};
use crate::linalg::Mat;
use crate::scalar::{c, Real};

/// Rank-one symmetric model: dimension `n`, strong block dimension `r`.
///
/// `r = 1` is the complex-hyperbolic case, `r = 3` quaternionic, `r = 7`
/// octonionic (as a block dimension only), `r = n - 1` constant curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetricModel {
    pub n: usize,
    pub r: usize,
}

impl SymmetricModel {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::parameter("model dimension must be at least 2"));
        }
        if r < 1 || r > n - 1 {
            return Err(Error::parameter(format!(
                "strong block dimension must satisfy 1 <= r <= n-1 (got r = {r}, n = {n})"
            )));
        }
        Ok(SymmetricModel { n, r })
    }

    /// `CH^2`: real dimension 4, strong block of dimension 1.
    pub fn complex_hyperbolic_plane() -> Self {
        SymmetricModel { n: 4, r: 1 }
    }

    /// Transverse dimension `n - 1`.
    pub fn transverse_dim(&self) -> usize {
        self.n - 1
    }

    /// Curvature eigenvalue of transverse direction `k` (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        if k < self.r {
            -1.0
        } else {
            -0.25
        }
    }

    /// Curvature operator along any unit geodesic: `diag(-I_r, -I/4)`.
    pub fn axis_operator<T: Real>(&self) -> Mat<T> {
        let m = self.transverse_dim();
        let mut k = Mat::zeros(m, m);
        for i in 0..m {
            k[(i, i)] = c(self.eigenvalue(i));
        }
        k
    }

    /// Jacobi matrix `K` of the along-geodesic system `f'' + K f = 0`.
    pub fn jacobi_matrix<T: Real>(&self) -> Mat<T> {
        self.axis_operator()
    }
}

/// Quadratic tube-chart components: `g_ij(t, x) = d_ij + x^T Q_ij x`.
///
/// The coefficient forms come from the second-order normal-coordinate
/// expansion driven by the axis curvature tensor; components are
/// t-independent because the model curvature is parallel along the axis.
pub struct FermiTubeComponents<T> {
    n: usize,
    q: Vec<Mat<T>>,
}

impl<T: Real> FermiTubeComponents<T> {
    /// Builds the expansion from lowered axis curvature components
    /// `rhat(i, j, k, l)`.
    pub fn from_axis_curvature(n: usize, rhat: &dyn Fn(usize, usize, usize, usize) -> T) -> Self {
        let m = n - 1;
        let third: T = c(1.0 / 3.0);
        let sixth: T = c(1.0 / 6.0);
        let mut q = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut form = Mat::zeros(m, m);
                for k in 0..m {
                    for l in 0..m {
                        let (ck, cl) = (k + 1, l + 1);
                        let v = if i == 0 && j == 0 {
                            -rhat(0, ck, 0, cl)
                        } else if i == 0 {
                            -third * (rhat(0, ck, j, cl) + rhat(0, cl, j, ck))
                        } else if j == 0 {
                            -third * (rhat(0, ck, i, cl) + rhat(0, cl, i, ck))
                        } else {
                            -sixth * (rhat(i, ck, j, cl) + rhat(i, cl, j, ck))
                        };
                        form[(k, l)] = v;
                    }
                }
                form.symmetrize();
                q.push(form);
            }
        }
        FermiTubeComponents { n, q }
    }

    pub fn from_model(model: &SymmetricModel) -> Self {
        let diag: Vec<T> = (0..model.transverse_dim()).map(|k| c(model.eigenvalue(k))).collect();
        Self::from_axis_curvature(model.n, &move |i, j, k, l| {
            // Only the 0k0l-type components (and their symmetry images) are
            // nonzero for the block model.
            let val = |a: usize| -> T { diag[a - 1] };
            if i == 0 && k == 0 && j >= 1 && j == l {
                val(j)
            } else if j == 0 && l == 0 && i >= 1 && i == k {
                val(i)
            } else if i == 0 && l == 0 && j >= 1 && j == k {
                -val(j)
            } else if j == 0 && k == 0 && i >= 1 && i == l {
                -val(i)
            } else {
                T::zero()
            }
        })
    }
}

impl<T: Real> MetricComponents<T> for FermiTubeComponents<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_into(&self, p: &ChartPoint<T>, g: &mut Mat<T>) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let form = &self.q[i * n + j];
                let mut v = if i == j { T::one() } else { T::zero() };
                for k in 0..n - 1 {
                    for l in 0..n - 1 {
                        let qkl = form[(k, l)];
                        if qkl != T::zero() {
                            v += qkl * p.x[k] * p.x[l];
                        }
                    }
                }
                g[(i, j)] = v;
            }
        }
    }

    fn d_metric_into(&self, p: &ChartPoint<T>, dg: &mut [Mat<T>]) -> bool {
        let n = self.n;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = if a == 0 {
                        T::zero()
                    } else {
                        let form = &self.q[i * n + j];
                        let mut acc = T::zero();
                        for l in 0..n - 1 {
                            let q = form[(a - 1, l)];
                            if q != T::zero() {
                                acc += q * p.x[l];
                            }
                        }
                        acc + acc
                    };
                    dg[a][(i, j)] = v;
                }
            }
        }
        true
    }

    fn d2_metric_into(&self, _p: &ChartPoint<T>, d2g: &mut [Mat<T>]) -> bool {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let v = if a == 0 || b == 0 {
                            T::zero()
                        } else {
                            let q = self.q[i * n + j][(a - 1, b - 1)];
                            q + q
                        };
                        d2g[a * n + b][(i, j)] = v;
                    }
                }
            }
        }
        true
    }
}

/// Tube chart of a symmetric model (second-order expansion, exact on axis).
pub fn symmetric_chart<T: Real>(
    model: &SymmetricModel,
    period: T,
    radius: T,
) -> Result<MetricChart<T>> {
    if radius <= T::zero() {
        return Err(Error::parameter("chart radius must be positive"));
    }
    let comps: Arc<dyn MetricComponents<T>> = Arc::new(FermiTubeComponents::from_model(model));
    MetricChart::new(comps, period, radius)
}

/// Exact hyperbolic-surface chart `g = diag(cosh^2 x, 1)`; curvature is -1
/// everywhere, which makes it an oracle for the curvature pipeline and for
/// the truncation error of the quadratic tube expansion.
pub struct HyperbolicPlaneComponents {
    /// When false, second derivatives are withheld so the chart exercises
    /// the finite-difference fallback.
    pub analytic_second: bool,
}

impl<T: Real> MetricComponents<T> for HyperbolicPlaneComponents {
    fn dim(&self) -> usize {
        2
    }

    fn metric_into(&self, p: &ChartPoint<T>, g: &mut Mat<T>) {
        let ch = p.x[0].cosh();
        g[(0, 0)] = ch * ch;
        g[(0, 1)] = T::zero();
        g[(1, 0)] = T::zero();
        g[(1, 1)] = T::one();
    }

    fn d_metric_into(&self, p: &ChartPoint<T>, dg: &mut [Mat<T>]) -> bool {
        for m in dg.iter_mut() {
            *m = Mat::zeros(2, 2);
        }
        let x = p.x[0];
        dg[1][(0, 0)] = (x + x).sinh();
        true
    }

    fn d2_metric_into(&self, p: &ChartPoint<T>, d2g: &mut [Mat<T>]) -> bool {
        if !self.analytic_second {
            return false;
        }
        for m in d2g.iter_mut() {
            *m = Mat::zeros(2, 2);
        }
        let x = p.x[0];
        d2g[1 * 2 + 1][(0, 0)] = crate::scalar::two::<T>() * (x + x).cosh();
        true
    }
}

pub fn hyperbolic_plane_chart<T: Real>(period: T, radius: T, analytic_second: bool) -> MetricChart<T> {
    MetricChart::new(Arc::new(HyperbolicPlaneComponents { analytic_second }), period, radius)
        .unwrap()
}

/// Closed-form scalar Jacobi solution of `z'' + rho z = 0` with
/// `z(0) = a`, `z'(0) = b`: returns `(z(t), z'(t))`.
///
/// The fundamental pair is `(cos, sin/sqrt(rho))` for positive `rho`,
/// `(cosh, sinh/sqrt(-rho))` for negative `rho` and `(1, t)` at zero.
pub fn closed_form_jacobi<T: Real>(rho: T, a: T, b: T, t: T) -> (T, T) {
    let (cv, sv) = cs_pair(rho, t);
    (a * cv + b * sv, -rho * sv * a + cv * b)
}

/// `(c_rho(t), s_rho(t))`.
pub fn cs_pair<T: Real>(rho: T, t: T) -> (T, T) {
    if rho > T::zero() {
        let w = rho.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else if rho < T::zero() {
        let w = (-rho).sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    } else {
        (T::one(), t)
    }
}

/// Two decoupled along-geodesic Jacobi systems carried by a unit-speed
/// product geodesic with velocity shares `(alpha, beta)`.
#[derive(Debug, Clone)]
pub struct ProductModel<T> {
    pub factor1: Mat<T>,
    pub factor2: Mat<T>,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> ProductModel<T> {
    pub fn new(factor1: Mat<T>, factor2: Mat<T>, alpha: T, beta: T) -> Result<Self> {
        if !factor1.is_square() || !factor2.is_square() {
            return Err(Error::parameter("factor Jacobi matrices must be square"));
        }
        let defect = (alpha * alpha + beta * beta - T::one()).abs();
        if defect > c(1e-12) {
            return Err(Error::parameter(format!(
                "weights must satisfy alpha^2 + beta^2 = 1 (defect {defect})"
            )));
        }
        Ok(ProductModel { factor1, factor2, alpha, beta })
    }

    pub fn swapped(&self) -> Self {
        ProductModel {
            factor1: self.factor2.clone(),
            factor2: self.factor1.clone(),
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    /// Block Jacobi matrix of the combined system in the reordered parallel
    /// frame: `diag([0 I; -a^2 K1 0], [0 I; -b^2 K2 0])`.
    pub fn assembled_matrix(&self) -> Mat<T> {
        let m1 = self.factor1.rows();
        let m2 = self.factor2.rows();
        let dim = 2 * (m1 + m2);
        let mut f = Mat::zeros(dim, dim);
        let a2 = self.alpha * self.alpha;
        let b2 = self.beta * self.beta;
        for i in 0..m1 {
            f[(i, m1 + i)] = T::one();
            for j in 0..m1 {
                f[(m1 + i, j)] = -a2 * self.factor1[(i, j)];
            }
        }
        let off = 2 * m1;
        for i in 0..m2 {
            f[(off + i, off + m2 + i)] = T::one();
            for j in 0..m2 {
                f[(off + m2 + i, off + j)] = -b2 * self.factor2[(i, j)];
            }
        }
        f
    }

    /// Weighted Jacobi matrix `diag(a^2 K1, b^2 K2)` of the decoupled
    /// second-order system.
    pub fn weighted_jacobi_matrix(&self) -> Mat<T> {
        let m1 = self.factor1.rows();
        let m2 = self.factor2.rows();
        let mut k = Mat::zeros(m1 + m2, m1 + m2);
        let a2 = self.alpha * self.alpha;
        let b2 = self.beta * self.beta;
        for i in 0..m1 {
            for j in 0..m1 {
                k[(i, j)] = a2 * self.factor1[(i, j)];
            }
        }
        for i in 0..m2 {
            for j in 0..m2 {
                k[(m1 + i, m1 + j)] = b2 * self.factor2[(i, j)];
            }
        }
        k
    }

    /// Nonnegative growth rates of the combined system, sorted descending:
    /// `sqrt(-mu)` over the negative eigenvalues `mu` of the weighted Jacobi
    /// matrix (elliptic or flat modes contribute zero).
    pub fn exponent_multiset(&self) -> Vec<T> {
        let k = self.weighted_jacobi_matrix();
        let mut rates: Vec<T> = k
            .sym_eigenvalues()
            .into_iter()
            .map(|mu| if mu < T::zero() { (-mu).sqrt() } else { T::zero() })
            .collect();
        rates.sort_by(|a, b| b.partial_cmp(a).unwrap());
        rates
    }

    /// Dimension of the strong (fastest) block: count of rates tied with
    /// the maximum up to `tol`.
    pub fn strong_block_dim(&self, tol: T) -> usize {
        let rates = self.exponent_multiset();
        if rates.is_empty() {
            return 0;
        }
        let top = rates[0];
        rates.iter().filter(|r| (top - **r).abs() <= tol).count()
    }
}

/// Assembled first-order block matrix of the product Jacobi system.
pub fn product_jacobi_matrix<T: Real>(p: &ProductModel<T>, _t: T) -> Mat<T> {
    p.assembled_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ChartPoint;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn model_validation() {
        assert!(SymmetricModel::new(4, 0).is_err());
        assert!(SymmetricModel::new(4, 4).is_err());
        assert!(SymmetricModel::new(1, 1).is_err());
        assert!(SymmetricModel::new(4, 1).is_ok());
    }

    #[test]
    fn axis_operator_matches_model_blocks() {
        for (n, r, expect) in [
            (2usize, 1usize, vec![-1.0]),
            (4, 1, vec![-1.0, -0.25, -0.25]),
            (8, 3, vec![-1.0, -1.0, -1.0, -0.25, -0.25, -0.25, -0.25]),
        ] {
            let model = SymmetricModel::new(n, r).unwrap();
            let chart = symmetric_chart::<f64>(&model, std::f64::consts::TAU, 0.5).unwrap();
            for s in 0..64 {
                let t = s as f64 * std::f64::consts::TAU / 64.0;
                let k = chart.axis_curvature_operator(t).unwrap();
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        let want = if i == j { expect[i] } else { 0.0 };
                        assert!(
                            (k[(i, j)] - want).abs() < 1e-8,
                            "n={n} r={r} t={t} ({i},{j}): {} vs {want}",
                            k[(i, j)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn tube_chart_axis_jet() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let chart = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        for s in 0..16 {
            let t = s as f64 / 16.0;
            let p = ChartPoint::axis(t, 4);
            let g = chart.metric(&p);
            assert!(g.max_abs_diff(&Mat::identity(4)) < 1e-14);
            let dg = chart.d_metric(&p);
            for m in &dg {
                assert!(m.max_abs() < 1e-14);
            }
            let gamma = chart.christoffel(&p).unwrap();
            assert!(gamma.christoffel.max_abs() < 1e-10);
        }
    }

    #[test]
    fn tube_chart_is_periodic_in_t() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let chart = symmetric_chart::<f64>(&model, 2.0, 0.5).unwrap();
        let p0 = ChartPoint::new(0.37, vec![0.05, -0.02, 0.03]);
        let p1 = ChartPoint::new(0.37 + 2.0, vec![0.05, -0.02, 0.03]);
        assert!(chart.metric(&p0).max_abs_diff(&chart.metric(&p1)) < 1e-15);
    }

    #[test]
    fn onaxis_curvature_components_ch2() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let chart = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        let p = ChartPoint::axis(0.25, 4);
        let data = chart.curvature_tensor(&p).unwrap();
        let r = data.riemann.unwrap();
        assert_close(r.get(0, 1, 0, 1), -1.0, 1e-12);
        assert_close(r.get(0, 2, 0, 2), -0.25, 1e-12);
        assert_close(r.get(0, 3, 0, 3), -0.25, 1e-12);
        assert_close(r.get(0, 1, 0, 2), 0.0, 1e-12);
        assert_close(r.get(0, 1, 0, 3), 0.0, 1e-12);
        assert!(r.symmetry_defect() < 1e-12);
    }

    #[test]
    fn sectional_values_of_ch2_axis_planes() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let chart = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        let p = ChartPoint::axis(0.0, 4);
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let e1 = [0.0, 1.0, 0.0, 0.0];
        let e2 = [0.0, 0.0, 1.0, 0.0];
        assert_close(chart.sectional_curvature(&p, &e0, &e1).unwrap(), -1.0, 1e-12);
        assert_close(chart.sectional_curvature(&p, &e0, &e2).unwrap(), -0.25, 1e-12);
    }

    #[test]
    fn exact_hyperbolic_chart_has_constant_curvature() {
        let chart = hyperbolic_plane_chart::<f64>(1.0, 1.0, true);
        for x in [-0.5, -0.1, 0.0, 0.2, 0.45] {
            let p = ChartPoint::new(0.0, vec![x]);
            let k = chart.sectional_curvature(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
            assert_close(k, -1.0, 1e-10);
        }
    }

    #[test]
    fn quadratic_expansion_error_is_second_order_off_axis() {
        // n = 2, r = 1 tube chart truncates cosh^2 at second order; curvature
        // drifts from -1 by O(x^2).
        let model = SymmetricModel::new(2, 1).unwrap();
        let chart = symmetric_chart::<f64>(&model, 1.0, 0.5).unwrap();
        for x in [0.02, 0.05, 0.1] {
            let p = ChartPoint::new(0.0, vec![x]);
            let k = chart.sectional_curvature(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
            assert!((k + 1.0).abs() < 3.0 * x * x, "x={x}: K={k}");
        }
    }

    #[test]
    fn fd_fallback_matches_analytic_curvature_at_second_order() {
        // Chart with analytic first derivatives and withheld second
        // derivatives: the finite-difference curvature converges at order
        // two to the fully analytic value.
        let exact = hyperbolic_plane_chart::<f64>(1.0, 1.0, true);
        let fd = hyperbolic_plane_chart::<f64>(1.0, 1.0, false);
        let p = ChartPoint::new(0.0, vec![0.3]);
        let want = exact.curvature_tensor(&p).unwrap().riemann.unwrap();
        let mut errors = Vec::new();
        for h in [1e-2, 1e-3, 1e-4] {
            let got = fd.curvature_tensor_fd(&p, h).unwrap().riemann.unwrap();
            let mut worst = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            worst = worst.max((got.get(i, j, k, l) - want.get(i, j, k, l)).abs());
                        }
                    }
                }
            }
            errors.push(worst);
        }
        let xs: Vec<f64> = [1e-2f64, 1e-3, 1e-4].iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
        let (order, _) = crate::linalg::linear_fit(&xs, &ys).unwrap();
        assert!(order >= 1.8, "observed order {order}, errors {errors:?}");
    }

    #[test]
    fn closed_form_examples() {
        let (v, d) = closed_form_jacobi(0.0, 1.0, 1.0, 3.0);
        assert_close(v, 4.0, 1e-15);
        assert_close(d, 1.0, 1e-15);

        let (v, d) = closed_form_jacobi(-1.0, 1.0, 1.0, 2.0);
        assert_close(v, 2.0f64.exp(), 1e-12);
        assert_close(d, 2.0f64.exp(), 1e-12);

        let (v, _) = closed_form_jacobi(-0.25, 1.0, 0.0, 2.0);
        assert_close(v, 1.0f64.cosh(), 1e-12);
    }

    #[test]
    fn closed_form_solves_the_scalar_jacobi_equation() {
        // Residual via fourth-order five-point second differences.
        let h = 1e-2;
        for rho in [-1.0, -0.25, 0.0, 0.7, 2.0] {
            for t in [0.3, 1.0, 2.0] {
                let f = |s: f64| closed_form_jacobi(rho, 0.7, -0.4, s).0;
                let second = (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h)
                    - f(t - 2.0 * h))
                    / (12.0 * h * h);
                let residual = (second + rho * f(t)).abs();
                assert!(residual < 1e-9, "rho={rho} t={t}: residual {residual}");
            }
        }
    }

    #[test]
    fn closed_form_derivative_consistent() {
        let h = 1e-6;
        for rho in [-1.0, 0.0, 1.5] {
            let f = |s: f64| closed_form_jacobi(rho, 0.3, 0.9, s);
            let (_, d) = f(1.2);
            let fd = (f(1.2 + h).0 - f(1.2 - h).0) / (2.0 * h);
            assert_close(d, fd, 1e-8);
        }
    }

    #[test]
    fn product_single_factor_limit() {
        let k = Mat::from_rows(&[vec![-1.0]]);
        let p = ProductModel::new(k.clone(), k.clone(), 1.0, 0.0).unwrap();
        let f = product_jacobi_matrix(&p, 0.0);
        // Only the first factor block carries dynamics: -alpha^2 K1 = 1.
        assert_close(f[(1, 0)], 1.0, 1e-15);
        assert_close(f[(3, 2)], 0.0, 1e-15);
    }

    #[test]
    fn product_rejects_unnormalized_weights() {
        let k = Mat::from_rows(&[vec![-1.0]]);
        assert!(ProductModel::new(k.clone(), k, 0.9, 0.5).is_err());
    }

    #[test]
    fn product_equal_weights_constant_curvature() {
        let k = Mat::from_rows(&[vec![-1.0]]);
        let w = 0.5f64.sqrt();
        let p = ProductModel::new(k.clone(), k, w, w).unwrap();
        let rates = p.exponent_multiset();
        for r in rates {
            assert_close(r, w, 1e-12);
        }
    }

    #[test]
    fn product_of_ch2_factors_exponent_multiset() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let k: Mat<f64> = model.jacobi_matrix();
        let p = ProductModel::new(k.clone(), k, 0.6, 0.8).unwrap();
        let rates = p.exponent_multiset();
        let expected = [0.8, 0.6, 0.4, 0.4, 0.3, 0.3];
        assert_eq!(rates.len(), expected.len());
        for (got, want) in rates.iter().zip(expected) {
            assert_close(*got, want, 1e-10);
        }
    }

    #[test]
    fn product_multiset_invariant_under_swap() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let k: Mat<f64> = model.jacobi_matrix();
        let k2 = Mat::from_rows(&[vec![-1.0, 0.0], vec![0.0, -0.5]]);
        let p = ProductModel::new(k, k2, 0.28, (1.0f64 - 0.28 * 0.28).sqrt()).unwrap();
        let a = p.exponent_multiset();
        let b = p.swapped().exponent_multiset();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_close(*x, *y, 1e-12);
        }
    }

    #[test]
    fn exponent_gap_collapses_at_double_weight() {
        let model = SymmetricModel::complex_hyperbolic_plane();
        let k: Mat<f64> = model.jacobi_matrix();
        let beta = 1.0 / 5.0f64.sqrt();
        let alpha = 2.0 * beta;
        let p = ProductModel::new(k.clone(), k.clone(), alpha, beta).unwrap();
        let rates = p.exponent_multiset();
        // Strong rates are {alpha, beta}; the weak group reaches alpha/2 = beta.
        let strong_min = rates[1];
        let weak_max = rates[2];
        assert!((strong_min - weak_max).abs() < 1e-12, "separation should collapse");

        let q = ProductModel::new(k.clone(), k, 0.6, 0.8).unwrap();
        let r = q.exponent_multiset();
        assert!(r[1] - r[2] > 0.19, "separation should persist away from the collapse");
    }
}
