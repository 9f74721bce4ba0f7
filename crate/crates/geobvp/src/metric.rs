//! Metric tensor fields on a single chart: evaluation, derivatives,
//! Christoffel symbols, curvature and the product metric `g ⊕ (-g)`.
//!
//! The curvature sign convention is `R(X,Y) = [∇_X, ∇_Y] - ∇_{[X,Y]}`, under
//! which the round sphere has sectional curvature +1 and the Jacobi equation
//! along a geodesic reads `D²J = R(γ̇, J)γ̇`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::ChartDomain;
use crate::error::{Error, Result};
use crate::series::Series;
use crate::tol;

/// How metric derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMode {
    /// Closed-form partials of the builtin family.
    Analytic,
    /// Fourth-order central differences with step `cbrt(eps) * max(1, |x|)`.
    CentralDifference,
}

/// A symmetric 2-tensor field on the chart, with derivative access.
///
/// Perturbation tensors and any user-supplied field plug into metrics and the
/// mixed-derivative pairing through this trait. The default `partial` is a
/// fourth-order central difference of `eval`.
pub trait TensorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> DMatrix<f64>;

    fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        let h = tol::fd_step(x[k]);
        let mut xs = x.to_vec();
        let mut at = |delta: f64| {
            xs[k] = x[k] + delta;
            self.eval(&xs)
        };
        let f1 = at(h);
        let f2 = at(-h);
        let f3 = at(2.0 * h);
        let f4 = at(-2.0 * h);
        (f1 - f2) * (8.0 / (12.0 * h)) - (f3 - f4) * (1.0 / (12.0 * h))
    }
}

/// Constant symmetric tensor field.
pub struct ConstantTensor(pub DMatrix<f64>);

impl TensorField for ConstantTensor {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn eval(&self, _x: &[f64]) -> DMatrix<f64> {
        self.0.clone()
    }
    fn partial(&self, _x: &[f64], _k: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.0.nrows(), self.0.ncols())
    }
}

/// Symmetric tensor whose components are polynomial/trig series.
#[derive(Clone)]
pub struct SeriesTensor {
    dim: usize,
    /// Upper-triangle components, row-major: (0,0), (0,1), ..., (n-1,n-1).
    components: Vec<Series>,
    partials: Vec<Vec<Series>>,
}

impl SeriesTensor {
    pub fn new(dim: usize, components: Vec<Series>) -> Self {
        assert_eq!(components.len(), dim * (dim + 1) / 2);
        let partials = (0..dim)
            .map(|k| components.iter().map(|s| s.partial(k)).collect())
            .collect();
        SeriesTensor { dim, components, partials }
    }

    fn assemble(dim: usize, comps: &[Series], x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        let mut idx = 0;
        for i in 0..dim {
            for j in i..dim {
                let v = comps[idx].eval(x);
                m[(i, j)] = v;
                m[(j, i)] = v;
                idx += 1;
            }
        }
        m
    }
}

impl TensorField for SeriesTensor {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        Self::assemble(self.dim, &self.components, x)
    }
    fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        Self::assemble(self.dim, &self.partials[k], x)
    }
}

#[derive(Clone)]
enum MetricKind {
    Constant(DMatrix<f64>),
    SpherePolar { radius: f64 },
    SphereStereo { radius: f64 },
    Warped { profile: Series, dprofile: Series },
    Custom(SeriesTensor),
    Perturbed { base: Box<MetricField>, bump: Arc<dyn TensorField>, eps: f64 },
}

/// Semi-Riemannian metric of constant index on one chart.
#[derive(Clone)]
pub struct MetricField {
    pub name: String,
    dim: usize,
    index: usize,
    kind: MetricKind,
    pub deriv_mode: DerivMode,
    pub domain: ChartDomain,
}

impl MetricField {
    pub fn euclidean(dim: usize) -> Self {
        MetricField {
            name: "euclidean".into(),
            dim,
            index: 0,
            kind: MetricKind::Constant(DMatrix::identity(dim, dim)),
            deriv_mode: DerivMode::Analytic,
            domain: ChartDomain::unbounded(dim),
        }
    }

    pub fn minkowski(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::identity(dim, dim);
        for i in 0..index {
            m[(i, i)] = -1.0;
        }
        MetricField {
            name: "minkowski".into(),
            dim,
            index,
            kind: MetricKind::Constant(m),
            deriv_mode: DerivMode::Analytic,
            domain: ChartDomain::unbounded(dim),
        }
    }

    pub fn flat_torus(dim: usize) -> Self {
        let mut domain = ChartDomain::unbounded(dim);
        for k in 0..dim {
            domain = domain.with_period(k, 1.0);
        }
        MetricField {
            name: "flat_torus".into(),
            dim,
            index: 0,
            kind: MetricKind::Constant(DMatrix::identity(dim, dim)),
            deriv_mode: DerivMode::Analytic,
            domain,
        }
    }

    /// Polar chart `ds² = R²(dθ² + sin²θ dφ²)` on `(θ, φ)`, valid away from
    /// the poles; φ carries the 2π identification.
    pub fn sphere_polar(radius: f64) -> Self {
        let domain = ChartDomain::unbounded(2)
            .with_bounds(0, 0.02, std::f64::consts::PI - 0.02)
            .with_period(1, 2.0 * std::f64::consts::PI);
        MetricField {
            name: "sphere2".into(),
            dim: 2,
            index: 0,
            kind: MetricKind::SpherePolar { radius },
            deriv_mode: DerivMode::Analytic,
            domain,
        }
    }

    /// Stereographic chart `g = 4R⁴/(R² + |x|²)² δ`; covers the sphere minus
    /// one pole, so geodesics through either pole of the polar chart stay
    /// regular here.
    pub fn sphere_stereo(radius: f64) -> Self {
        let b = 8.0 * radius;
        MetricField {
            name: "sphere2".into(),
            dim: 2,
            index: 0,
            kind: MetricKind::SphereStereo { radius },
            deriv_mode: DerivMode::Analytic,
            domain: ChartDomain::boxed(vec![(-b, b), (-b, b)]),
        }
    }

    /// Warped product `ds² = dx² + f(x)² dy²`; closed y-fibers when a period
    /// is given.
    pub fn warped(profile: Series, y_period: Option<f64>, x_bounds: Option<(f64, f64)>) -> Self {
        let dprofile = profile.partial(0);
        let mut domain = ChartDomain::unbounded(2);
        if let Some((lo, hi)) = x_bounds {
            domain = domain.with_bounds(0, lo, hi);
        }
        if let Some(p) = y_period {
            domain = domain.with_period(1, p);
        }
        MetricField {
            name: "warped".into(),
            dim: 2,
            index: 0,
            kind: MetricKind::Warped { profile, dprofile },
            deriv_mode: DerivMode::Analytic,
            domain,
        }
    }

    /// Metric from per-component coefficient tables (upper triangle).
    pub fn custom(dim: usize, index: usize, components: Vec<Series>, domain: ChartDomain) -> Self {
        MetricField {
            name: "custom".into(),
            dim,
            index,
            kind: MetricKind::Custom(SeriesTensor::new(dim, components)),
            deriv_mode: DerivMode::Analytic,
            domain,
        }
    }

    /// `g + eps * h` with `h` a compactly supported symmetric tensor field.
    pub fn perturbed(base: MetricField, bump: Arc<dyn TensorField>, eps: f64) -> Self {
        assert_eq!(base.dim, bump.dim());
        MetricField {
            name: format!("{}+eps*h", base.name),
            dim: base.dim,
            index: base.index,
            domain: base.domain.clone(),
            deriv_mode: base.deriv_mode,
            kind: MetricKind::Perturbed { base: Box::new(base), bump, eps },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            MetricKind::Constant(m) => m.clone(),
            MetricKind::SpherePolar { radius } => {
                let r2 = radius * radius;
                DMatrix::from_diagonal(&DVector::from_vec(vec![r2, r2 * x[0].sin().powi(2)]))
            }
            MetricKind::SphereStereo { radius } => {
                let r2 = radius * radius;
                let s = x[0] * x[0] + x[1] * x[1];
                let c = 4.0 * r2 * r2 / ((r2 + s) * (r2 + s));
                DMatrix::identity(2, 2) * c
            }
            MetricKind::Warped { profile, .. } => {
                let f = profile.eval(&x[..1]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, f * f]))
            }
            MetricKind::Custom(t) => t.eval(x),
            MetricKind::Perturbed { base, bump, eps } => base.eval(x) + bump.eval(x) * *eps,
        }
    }

    /// ∂_k g at `x`.
    pub fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        if self.deriv_mode == DerivMode::CentralDifference {
            return self.partial_fd(x, k);
        }
        match &self.kind {
            MetricKind::Constant(m) => DMatrix::zeros(m.nrows(), m.ncols()),
            MetricKind::SpherePolar { radius } => {
                let mut d = DMatrix::zeros(2, 2);
                if k == 0 {
                    d[(1, 1)] = radius * radius * 2.0 * x[0].sin() * x[0].cos();
                }
                d
            }
            MetricKind::SphereStereo { radius } => {
                let r2 = radius * radius;
                let s = x[0] * x[0] + x[1] * x[1];
                let dc = -16.0 * r2 * r2 * x[k] / (r2 + s).powi(3);
                DMatrix::identity(2, 2) * dc
            }
            MetricKind::Warped { profile, dprofile } => {
                let mut d = DMatrix::zeros(2, 2);
                if k == 0 {
                    d[(1, 1)] = 2.0 * profile.eval(&x[..1]) * dprofile.eval(&x[..1]);
                }
                d
            }
            MetricKind::Custom(t) => t.partial(x, k),
            MetricKind::Perturbed { base, bump, eps } => {
                base.partial(x, k) + bump.partial(x, k) * *eps
            }
        }
    }

    fn partial_fd(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        let h = tol::fd_step(x[k]);
        let mut xs = x.to_vec();
        let mut at = |delta: f64| {
            xs[k] = x[k] + delta;
            self.eval(&xs)
        };
        let f1 = at(h);
        let f2 = at(-h);
        let f3 = at(2.0 * h);
        let f4 = at(-2.0 * h);
        (f1 - f2) * (8.0 / (12.0 * h)) - (f3 - f4) * (1.0 / (12.0 * h))
    }

    pub fn inner(&self, x: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * self.eval(x) * v)[(0, 0)]
    }

    /// Norm with respect to this metric; meaningful for Riemannian reference
    /// metrics, clamped at zero against roundoff.
    pub fn norm(&self, x: &[f64], v: &DVector<f64>) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// Verify nondegeneracy and index at a point.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let eig = self.eval(x).symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let min = eig.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        if !(min > tol::METRIC_DEGENERACY_RATIO * max) {
            return Err(Error::SingularMetric {
                point: x.to_vec(),
                ratio: if max > 0.0 { min / max } else { 0.0 },
            });
        }
        let neg = eig.iter().filter(|e| **e < 0.0).count();
        if neg != self.index {
            return Err(Error::IndexMismatch {
                point: x.to_vec(),
                expected: self.index,
                found: neg,
            });
        }
        Ok(())
    }

    fn inverse(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        self.eval(x)
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric { point: x.to_vec(), ratio: 0.0 })
    }

    /// Christoffel symbols `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij})`.
    pub fn christoffel(&self, x: &[f64]) -> Result<ChristoffelEval> {
        let n = self.dim;
        let ginv = self.inverse(x)?;
        let dg: Vec<DMatrix<f64>> = (0..n).map(|k| self.partial(x, k)).collect();
        let mut symbols = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    let v = 0.5 * s;
                    symbols[k][(i, j)] = v;
                    symbols[k][(j, i)] = v;
                }
            }
        }
        Ok(ChristoffelEval { point: x.to_vec(), symbols })
    }

    /// Geodesic acceleration `-Γ(v, v)` at `x`.
    pub fn acceleration(&self, x: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.christoffel(x)?.apply(v, v))
    }

    /// Curvature tensor `R^l_{ijk}`, assembled from Γ and central differences
    /// of Γ under the fixed sign convention.
    pub fn curvature(&self, x: &[f64]) -> Result<CurvatureEval> {
        let n = self.dim;
        let gamma = self.christoffel(x)?;
        let mut dgamma = Vec::with_capacity(n);
        for p in 0..n {
            let h = tol::fd_step(x[p]);
            let mut xs = x.to_vec();
            let mut at = |delta: f64| -> Result<Vec<DMatrix<f64>>> {
                xs[p] = x[p] + delta;
                Ok(self.christoffel(&xs)?.symbols)
            };
            let f1 = at(h)?;
            let f2 = at(-h)?;
            let f3 = at(2.0 * h)?;
            let f4 = at(-2.0 * h)?;
            let d: Vec<DMatrix<f64>> = (0..n)
                .map(|k| {
                    (&f1[k] - &f2[k]) * (8.0 / (12.0 * h)) - (&f3[k] - &f4[k]) * (1.0 / (12.0 * h))
                })
                .collect();
            dgamma.push(d);
        }
        let mut data = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
                        for m in 0..n {
                            v += gamma.symbols[l][(i, m)] * gamma.symbols[m][(j, k)]
                                - gamma.symbols[l][(j, m)] * gamma.symbols[m][(i, k)];
                        }
                        data[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        Ok(CurvatureEval { point: x.to_vec(), dim: n, data })
    }
}

/// Christoffel symbols at a point, `symbols[k][(i,j)] = Γ^k_{ij}`.
#[derive(Debug, Clone)]
pub struct ChristoffelEval {
    pub point: Vec<f64>,
    pub symbols: Vec<DMatrix<f64>>,
}

impl ChristoffelEval {
    /// `Γ(u, v)` as a vector, components `Γ^k_{ij} u^i v^j`.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.symbols.len();
        DVector::from_iterator(n, (0..n).map(|k| (u.transpose() * &self.symbols[k] * v)[(0, 0)]))
    }

    /// Largest spectral norm among the `Γ^k` slices.
    pub fn slice_norm(&self) -> f64 {
        self.symbols
            .iter()
            .map(|m| {
                m.clone()
                    .symmetric_eigenvalues()
                    .iter()
                    .fold(0.0f64, |a, e| a.max(e.abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Curvature tensor at a point with accessor `r(l, i, j, k) = R^l_{ijk}`.
#[derive(Debug, Clone)]
pub struct CurvatureEval {
    pub point: Vec<f64>,
    pub dim: usize,
    data: Vec<f64>,
}

impl CurvatureEval {
    pub fn r(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim;
        self.data[((l * n + i) * n + j) * n + k]
    }

    /// `R(x, y)z` as a vector.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for l in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += self.r(l, i, j, k) * x[i] * y[j] * z[k];
                    }
                }
            }
            out[l] = s;
        }
        out
    }

    /// Fully lowered tensor `R_{lijk} = g_{lm} R^m_{ijk}`... indexed as
    /// `(i, j, k, l) -> g(R(e_i,e_j)e_k, e_l)`.
    pub fn lowered(&self, g_at: &DMatrix<f64>) -> impl Fn(usize, usize, usize, usize) -> f64 + '_ {
        let n = self.dim;
        let g = g_at.clone();
        move |i, j, k, l| (0..n).map(|m| g[(l, m)] * self.r(m, i, j, k)).sum()
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, g_at: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let ruv = self.apply(u, v, v);
        let num = (ruv.transpose() * g_at * u)[(0, 0)];
        let gu = (u.transpose() * g_at * u)[(0, 0)];
        let gv = (v.transpose() * g_at * v)[(0, 0)];
        let guv = (u.transpose() * g_at * v)[(0, 0)];
        num / (gu * gv - guv * guv)
    }
}

/// Product metric `diag(g(p), -g(q))` on the doubled chart; index is always
/// the manifold dimension.
pub fn product_metric(g: &MetricField, p: &[f64], q: &[f64]) -> Result<DMatrix<f64>> {
    g.check_point(p)?;
    g.check_point(q)?;
    let n = g.dim();
    let gp = g.eval(p);
    let gq = g.eval(q);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&gp);
    out.view_mut((n, n), (n, n)).copy_from(&(-gq));
    Ok(out)
}
