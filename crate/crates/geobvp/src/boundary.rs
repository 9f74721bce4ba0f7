//! General boundary conditions `P ⊂ M×M`: parametric embeddings, tangent and
//! normal frames under the product metric `ḡ = g ⊕ (-g)`, nondegeneracy and
//! admissibility checks, and the second fundamental form.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{product_metric, MetricField};
use crate::parallel::batch_map;
use crate::series::Series;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    PointPair,
    Product,
    Parametric,
    Diagonal,
}

/// One factor of a product boundary condition, as a parametric curve or a
/// point in the chart.
#[derive(Debug, Clone)]
pub struct FactorCurve {
    /// Chart components as series in one parameter (var 0), or constants.
    pub components: Vec<Series>,
    /// Parameter range; `None` for points.
    pub range: Option<(f64, f64)>,
}

impl FactorCurve {
    pub fn point(coords: &[f64]) -> Self {
        FactorCurve {
            components: coords.iter().map(|c| Series::constant(*c)).collect(),
            range: None,
        }
    }

    /// Euclidean chart circle `center + radius (cos u, sin u)`.
    pub fn circle(center: [f64; 2], radius: f64, range: (f64, f64)) -> Self {
        let mk = |kind: fn(usize, f64) -> crate::series::Factor, c: f64| Series {
            terms: vec![
                crate::series::Term { coef: c, factors: vec![] },
                crate::series::Term { coef: radius, factors: vec![kind(0, 1.0)] },
            ],
        };
        FactorCurve {
            components: vec![
                mk(|var, freq| crate::series::Factor::Cos { var, freq }, center[0]),
                mk(|var, freq| crate::series::Factor::Sin { var, freq }, center[1]),
            ],
            range: Some(range),
        }
    }

    /// Straight chart segment `a + u (b - a)`, `u ∈ [0, 1]`.
    pub fn segment(a: &[f64], b: &[f64]) -> Self {
        let components = a
            .iter()
            .zip(b)
            .map(|(ai, bi)| Series {
                terms: vec![
                    crate::series::Term { coef: *ai, factors: vec![] },
                    crate::series::Term {
                        coef: bi - ai,
                        factors: vec![crate::series::Factor::Pow { var: 0, exp: 1 }],
                    },
                ],
            })
            .collect();
        FactorCurve { components, range: Some((0.0, 1.0)) }
    }

    /// Coordinate curve with explicit component series and range.
    pub fn curve(components: Vec<Series>, range: (f64, f64)) -> Self {
        FactorCurve { components, range: Some(range) }
    }

    fn param_dim(&self) -> usize {
        usize::from(self.range.is_some())
    }
}

/// Compact parametric submanifold of `M×M`, the boundary condition of the
/// geodesic variational problem.
#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    pub param_dim: usize,
    pub param_box: Vec<(f64, f64)>,
    ambient_dim: usize,
    /// 2n embedding components as series in the d parameters.
    components: Vec<Series>,
    jac: Vec<Vec<Series>>,
    hess: Vec<Vec<Vec<Series>>>,
    /// Use central differences of the embedding instead of the analytic
    /// series derivatives.
    pub fd_derivatives: bool,
}

impl BoundaryCondition {
    fn build(kind: BoundaryKind, n: usize, components: Vec<Series>, param_box: Vec<(f64, f64)>) -> Self {
        assert_eq!(components.len(), 2 * n);
        let d = param_box.len();
        let jac: Vec<Vec<Series>> =
            (0..d).map(|a| components.iter().map(|c| c.partial(a)).collect()).collect();
        let hess: Vec<Vec<Vec<Series>>> = (0..d)
            .map(|a| (0..d).map(|b| jac[a].iter().map(|c| c.partial(b)).collect()).collect())
            .collect();
        BoundaryCondition {
            kind,
            param_dim: d,
            param_box,
            ambient_dim: n,
            components,
            jac,
            hess,
            fd_derivatives: false,
        }
    }

    pub fn point_pair(p: &[f64], q: &[f64]) -> Self {
        let n = p.len();
        let comps = p.iter().chain(q.iter()).map(|c| Series::constant(*c)).collect();
        Self::build(BoundaryKind::PointPair, n, comps, vec![])
    }

    /// `P = F1 × F2` with independent parameters.
    pub fn product(first: &FactorCurve, second: &FactorCurve) -> Self {
        let n = first.components.len();
        assert_eq!(n, second.components.len());
        let d1 = first.param_dim();
        let mut comps: Vec<Series> = first.components.clone();
        comps.extend(second.components.iter().map(|c| c.shift_vars(d1)));
        let mut param_box = Vec::new();
        if let Some(r) = first.range {
            param_box.push(r);
        }
        if let Some(r) = second.range {
            param_box.push(r);
        }
        let kind = if param_box.is_empty() { BoundaryKind::PointPair } else { BoundaryKind::Product };
        Self::build(kind, n, comps, param_box)
    }

    pub fn parametric(n: usize, components: Vec<Series>, param_box: Vec<(f64, f64)>) -> Self {
        Self::build(BoundaryKind::Parametric, n, components, param_box)
    }

    /// The diagonal `Δ` over a parameter box; degenerate for every product
    /// metric, kept as a negative fixture.
    pub fn diagonal(n: usize, param_box: Vec<(f64, f64)>) -> Self {
        let mut comps: Vec<Series> = (0..n).map(Series::coordinate).collect();
        comps.extend((0..n).map(Series::coordinate));
        Self::build(BoundaryKind::Diagonal, n, comps, param_box)
    }

    /// Transposed condition `(q(u), p(u))`; an involution.
    pub fn transpose(&self) -> Self {
        let n = self.ambient_dim;
        let mut comps: Vec<Series> = self.components[n..].to_vec();
        comps.extend_from_slice(&self.components[..n]);
        let mut out = Self::build(self.kind, n, comps, self.param_box.clone());
        out.fd_derivatives = self.fd_derivatives;
        out
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Endpoint pair `(p(u), q(u))` as one 2n-vector.
    pub fn embed(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(2 * self.ambient_dim, self.components.iter().map(|c| c.eval(u)))
    }

    pub fn embed_split(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let e = self.embed(u);
        let n = self.ambient_dim;
        (e.as_slice()[..n].to_vec(), e.as_slice()[n..].to_vec())
    }

    /// 2n×d Jacobian of the embedding.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let m = 2 * self.ambient_dim;
        let d = self.param_dim;
        if self.fd_derivatives {
            let mut out = DMatrix::zeros(m, d);
            for a in 0..d {
                let h = tol::fd_step(u[a]);
                let mut us = u.to_vec();
                let mut at = |delta: f64| {
                    us[a] = u[a] + delta;
                    self.embed(&us)
                };
                let col = (at(h) - at(-h)) * (8.0 / (12.0 * h))
                    - (at(2.0 * h) - at(-2.0 * h)) * (1.0 / (12.0 * h));
                out.set_column(a, &col);
            }
            return out;
        }
        DMatrix::from_fn(m, d, |i, a| self.jac[a][i].eval(u))
    }

    /// `∂²(embed)/∂u_a ∂u_b`.
    pub fn second_derivative(&self, u: &[f64], a: usize, b: usize) -> DVector<f64> {
        let m = 2 * self.ambient_dim;
        if self.fd_derivatives {
            let h = 1e-5 * (1.0 + u[b].abs());
            let mut us = u.to_vec();
            let mut at = |delta: f64| {
                us[b] = u[b] + delta;
                self.jacobian(&us).column(a).into_owned()
            };
            return (at(h) - at(-h)) / (2.0 * h);
        }
        DVector::from_iterator(m, self.hess[a][b].iter().map(|c| c.eval(u)))
    }

    /// Deterministic sample grid over the parameter box.
    pub fn sample_grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        if self.param_dim == 0 {
            return vec![vec![]];
        }
        let mut grid = vec![Vec::new()];
        for (lo, hi) in &self.param_box {
            let mut next = Vec::with_capacity(grid.len() * per_dim);
            for base in &grid {
                for i in 0..per_dim {
                    let t = if per_dim == 1 { 0.5 } else { i as f64 / (per_dim - 1) as f64 };
                    let mut v = base.clone();
                    v.push(lo + t * (hi - lo));
                    next.push(v);
                }
            }
            grid = next;
        }
        grid
    }
}

/// ḡ-adapted frame at a point of `P`.
#[derive(Debug, Clone)]
pub struct EndpointFrame {
    pub u: Vec<f64>,
    /// Raw Jacobian columns spanning `T P` (parametric basis).
    pub tangent: DMatrix<f64>,
    /// Same span, columns normalized to unit Euclidean length.
    pub tangent_unit: DMatrix<f64>,
    /// Euclidean-orthonormal basis of the ḡ-orthogonal complement of `T P`.
    pub normal: DMatrix<f64>,
    /// `tangentᵀ ḡ tangent` in the parametric basis.
    pub gram: DMatrix<f64>,
    /// Gram on the unit-normalized tangent columns (scale-free conditioning).
    pub gram_unit: DMatrix<f64>,
    /// Product metric at the endpoint pair.
    pub gbar: DMatrix<f64>,
    pub col_scales: DVector<f64>,
}

impl EndpointFrame {
    /// Smallest/largest singular-value ratio of the unit gram; `inf` for
    /// point conditions (empty gram).
    pub fn gram_conditioning(&self) -> f64 {
        if self.gram_unit.nrows() == 0 {
            return f64::INFINITY;
        }
        let sv = self.gram_unit.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.gram_conditioning() >= tol::GRAM_DEGENERACY_RATIO
    }
}

/// Build the tangent/normal frame of `P` at `u` with respect to `ḡ`.
pub fn endpoint_frame(p: &BoundaryCondition, g: &MetricField, u: &[f64]) -> Result<EndpointFrame> {
    let n = p.ambient_dim();
    let (ep, eq) = p.embed_split(u);
    if !g.domain.contains(&ep) || !g.domain.contains(&eq) {
        return Err(Error::DomainExit { t: f64::NAN, point: [ep, eq].concat() });
    }
    let gbar = product_metric(g, &ep, &eq)?;
    let tangent = p.jacobian(u);
    let d = p.param_dim;

    let mut tangent_unit = tangent.clone();
    let mut col_scales = DVector::zeros(d);
    for a in 0..d {
        let s = tangent.column(a).norm();
        col_scales[a] = s;
        if s > 0.0 {
            tangent_unit.column_mut(a).scale_mut(1.0 / s);
        }
    }
    if d > 0 {
        let sv = tangent.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > 1e-10 * smax.max(1.0)).count();
        if rank < d {
            return Err(Error::ImmersionFailure { u: u.to_vec(), rank, expected: d });
        }
    }

    let gram = tangent.transpose() * &gbar * &tangent;
    let gram_unit = tangent_unit.transpose() * &gbar * &tangent_unit;

    // Normal space: kernel of (tangentᵀ ḡ), via the spectral kernel of AᵀA.
    let normal = if d == 0 {
        DMatrix::identity(2 * n, 2 * n)
    } else {
        let a = tangent_unit.transpose() * &gbar;
        let ata = a.transpose() * &a;
        let eig = nalgebra::SymmetricEigen::new(ata);
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let mut normal = DMatrix::zeros(2 * n, 2 * n - d);
        for (col, &i) in order.iter().take(2 * n - d).enumerate() {
            normal.set_column(col, &eig.eigenvectors.column(i));
        }
        normal
    };

    Ok(EndpointFrame { u: u.to_vec(), tangent, tangent_unit, normal, gram, gram_unit, gbar, col_scales })
}

#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    pub nondegenerate: bool,
    pub worst_conditioning: f64,
    pub worst_u: Vec<f64>,
}

/// Sample the gram conditioning of `i*ḡ` over the parameter box.
pub fn is_nondegenerate(p: &BoundaryCondition, g: &MetricField, per_dim: usize) -> Result<NondegeneracyReport> {
    let grid = p.sample_grid(per_dim);
    let results = batch_map(grid, |u| endpoint_frame(p, g, &u).map(|f| (f.gram_conditioning(), u)));
    let mut worst = (f64::INFINITY, vec![]);
    for r in results {
        let (c, u) = r?;
        if c < worst.0 {
            worst = (c, u);
        }
    }
    Ok(NondegeneracyReport {
        nondegenerate: worst.0 >= tol::GRAM_DEGENERACY_RATIO,
        worst_conditioning: worst.0,
        worst_u: worst.1,
    })
}

/// Second fundamental form `S^P_η(v, w) = ḡ(∇^ḡ_v w̄, η)` in the parametric
/// tangent basis, as a symmetric d×d matrix.
pub fn second_fundamental_form(
    p: &BoundaryCondition,
    g: &MetricField,
    u: &[f64],
    eta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let frame = endpoint_frame(p, g, u)?;
    if !frame.is_nondegenerate() {
        return Err(Error::DegenerateBoundary { u: u.to_vec(), conditioning: frame.gram_conditioning() });
    }
    let d = p.param_dim;
    let n = p.ambient_dim();
    let eta_scale = eta.norm().max(1e-300);
    let mut worst_pairing = 0.0f64;
    for a in 0..d {
        let pairing = (frame.tangent_unit.column(a).transpose() * &frame.gbar * eta)[(0, 0)].abs();
        worst_pairing = worst_pairing.max(pairing / eta_scale);
    }
    if worst_pairing > 1e-6 {
        return Err(Error::NotNormal { pairing: worst_pairing });
    }

    let (ep, eq) = p.embed_split(u);
    let gamma_p = g.christoffel(&ep)?;
    let gamma_q = g.christoffel(&eq)?;
    let mut s = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut x = p.second_derivative(u, a, b);
            let ta = frame.tangent.column(a);
            let tb = frame.tangent.column(b);
            // Product-metric Christoffels are block diagonal and invariant
            // under g -> -g, so each factor uses the same symbols.
            let va = DVector::from_iterator(n, ta.iter().take(n).copied());
            let vb = DVector::from_iterator(n, tb.iter().take(n).copied());
            let wa = DVector::from_iterator(n, ta.iter().skip(n).copied());
            let wb = DVector::from_iterator(n, tb.iter().skip(n).copied());
            let cp = gamma_p.apply(&va, &vb);
            let cq = gamma_q.apply(&wa, &wb);
            for i in 0..n {
                x[i] += cp[i];
                x[n + i] += cq[i];
            }
            let val = (x.transpose() * &frame.gbar * eta)[(0, 0)];
            s[(a, b)] = val;
            s[(b, a)] = val;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// False when P is degenerate for this metric, in which case the rest of
    /// the report is not applicable.
    pub applicable: bool,
    pub worst_conditioning: f64,
    pub intersects_diagonal: bool,
    pub transversal: bool,
    pub certified_admissible: bool,
    /// Parameter points realizing diagonal intersections.
    pub intersections: Vec<Vec<f64>>,
    pub min_endpoint_distance: f64,
}

#[derive(Debug, Clone)]
pub struct AdmissibilityOptions {
    pub samples_per_dim: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        AdmissibilityOptions { samples_per_dim: 32, starts: 16, seed: 1 }
    }
}

/// Diagonal-intersection and transversality certificate for `P`.
///
/// The endpoint separation `d(u) = ||p(u) - q(u)||` is measured with the
/// reference metric at the midpoint, so rescaling the reference metric leaves
/// the verdicts unchanged (thresholds are relative).
pub fn check_admissibility(
    p: &BoundaryCondition,
    g: &MetricField,
    g_r: &MetricField,
    opts: &AdmissibilityOptions,
) -> Result<AdmissibilityReport> {
    let nd = is_nondegenerate(p, g, opts.samples_per_dim)?;
    if !nd.nondegenerate {
        return Ok(AdmissibilityReport {
            applicable: false,
            worst_conditioning: nd.worst_conditioning,
            intersects_diagonal: false,
            transversal: false,
            certified_admissible: false,
            intersections: vec![],
            min_endpoint_distance: f64::NAN,
        });
    }

    let n = p.ambient_dim();
    let dist = |u: &[f64]| -> f64 {
        let (ep, eq) = p.embed_split(u);
        let diff = g.domain.diff(&ep, &eq);
        let mid: Vec<f64> = ep.iter().zip(&eq).map(|(a, b)| 0.5 * (a + b)).collect();
        (diff.transpose() * g_r.eval(&mid) * &diff)[(0, 0)].max(0.0).sqrt()
    };

    // Coarse grid scan for the typical scale and starting points.
    let grid = p.sample_grid(opts.samples_per_dim);
    let values: Vec<f64> = grid.iter().map(|u| dist(u)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let hit_tol = 1e-6 * (1.0 + mean);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    for &i in order.iter().take(opts.starts / 2) {
        starts.push(grid[i].clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts && p.param_dim > 0 {
        let u: Vec<f64> = p.param_box.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
        starts.push(u);
    }
    if p.param_dim == 0 {
        starts = vec![vec![]];
    }

    let mut minima: Vec<(f64, Vec<f64>)> = batch_map(starts, |s| {
        let u = nelder_mead(&dist, &s, &p.param_box);
        (dist(&u), u)
    });
    minima.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let min_distance = minima.first().map(|m| m.0).unwrap_or(f64::NAN);

    let mut intersections: Vec<Vec<f64>> = Vec::new();
    let box_diam: f64 = p
        .param_box
        .iter()
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    for (v, u) in &minima {
        if *v < hit_tol {
            let fresh = intersections.iter().all(|w| {
                w.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > 1e-3 * box_diam
            });
            if fresh {
                intersections.push(u.clone());
            }
        }
    }

    let intersects = !intersections.is_empty();
    let mut transversal = true;
    for u in &intersections {
        let jac = p.jacobian(u);
        let d = p.param_dim;
        let mut stacked = DMatrix::zeros(2 * n, d + n);
        stacked.view_mut((0, 0), (2 * n, d)).copy_from(&jac);
        for i in 0..n {
            stacked[(i, d + i)] = 1.0;
            stacked[(n + i, d + i)] = 1.0;
        }
        let sv = stacked.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > 1e-8 * smax.max(1.0)).count();
        if rank < 2 * n {
            transversal = false;
        }
    }

    Ok(AdmissibilityReport {
        applicable: true,
        worst_conditioning: nd.worst_conditioning,
        intersects_diagonal: intersects,
        transversal,
        certified_admissible: !intersects || transversal,
        intersections,
        min_endpoint_distance: min_distance,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ShortGeodesicBound {
    pub kappa: f64,
    /// `c = 2κ` in the turning-angle inequality.
    pub c: f64,
}

/// Turning-angle constant over a chart box: `κ = max_K ||Γ|| + 1`, where the
/// norm is the largest spectral norm among the `Γ^k` slices of the
/// Euclidean-relative Christoffel tensor.
pub fn short_geodesic_bound(
    g: &MetricField,
    region: &[(f64, f64)],
    per_dim: usize,
) -> Result<ShortGeodesicBound> {
    let mut grid = vec![Vec::new()];
    for (lo, hi) in region {
        let mut next = Vec::with_capacity(grid.len() * per_dim);
        for base in &grid {
            for i in 0..per_dim {
                let mut v = base.clone();
                v.push(lo + (hi - lo) * i as f64 / (per_dim - 1) as f64);
                next.push(v);
            }
        }
        grid = next;
    }
    let norms = batch_map(grid, |x| g.christoffel(&x).map(|c| c.slice_norm()));
    let mut kappa = 0.0f64;
    for r in norms {
        kappa = kappa.max(r?);
    }
    kappa += 1.0;
    Ok(ShortGeodesicBound { kappa, c: 2.0 * kappa })
}

/// Box-clamped Nelder–Mead on up to a few parameters.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    let d = start.len();
    if d == 0 {
        return vec![];
    }
    let clamp = |u: &mut Vec<f64>| {
        for (x, (lo, hi)) in u.iter_mut().zip(bounds) {
            *x = x.clamp(*lo, *hi);
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for a in 0..d {
        let mut v = start.to_vec();
        let step = 0.05 * (bounds[a].1 - bounds[a].0).max(1e-6);
        v[a] += step;
        clamp(&mut v);
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|u| f(u)).collect();
    for _ in 0..200 {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| fv[i].partial_cmp(&fv[j]).unwrap());
        let best = order[0];
        let worst = order[d];
        if (fv[worst] - fv[best]).abs() < 1e-14 * (1.0 + fv[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for &i in order.iter().take(d) {
            for a in 0..d {
                centroid[a] += simplex[i][a] / d as f64;
            }
        }
        let mut refl: Vec<f64> =
            centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + (c - w)).collect();
        clamp(&mut refl);
        let fr = f(&refl);
        if fr < fv[best] {
            let mut exp: Vec<f64> =
                centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + 2.0 * (c - w)).collect();
            clamp(&mut exp);
            let fe = f(&exp);
            if fe < fr {
                simplex[worst] = exp;
                fv[worst] = fe;
            } else {
                simplex[worst] = refl;
                fv[worst] = fr;
            }
        } else if fr < fv[order[d - 1]] {
            simplex[worst] = refl;
            fv[worst] = fr;
        } else {
            let mut con: Vec<f64> =
                centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + 0.5 * (w - c)).collect();
            clamp(&mut con);
            let fc = f(&con);
            if fc < fv[worst] {
                simplex[worst] = con;
                fv[worst] = fc;
            } else {
                let bestv = simplex[best].clone();
                for i in 0..=d {
                    if i == best {
                        continue;
                    }
                    for a in 0..d {
                        simplex[i][a] = 0.5 * (simplex[i][a] + bestv[a]);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..=d).collect();
    order.sort_by(|&i, &j| fv[i].partial_cmp(&fv[j]).unwrap());
    simplex[order[0]].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate, IntegrateOptions};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn equator_times_point_polar() -> BoundaryCondition {
        // θ = π/2, φ = u, crossed with a fixed point inside the chart.
        let circle = FactorCurve::curve(
            vec![Series::constant(PI / 2.0), Series::coordinate(0)],
            (0.0, 2.0 * PI),
        );
        let point = FactorCurve::point(&[PI / 4.0, 0.0]);
        BoundaryCondition::product(&circle, &point)
    }

    #[test]
    fn point_pair_has_trivial_tangent_space() {
        let g = MetricField::euclidean(2);
        let p = BoundaryCondition::point_pair(&[0.0, 0.0], &[1.0, 2.0]);
        let f = endpoint_frame(&p, &g, &[]).unwrap();
        assert_eq!(f.tangent.ncols(), 0);
        assert_eq!(f.normal.ncols(), 4);
        assert_eq!(f.gram.nrows(), 0);
        assert!(f.is_nondegenerate());
    }

    #[test]
    fn diagonal_gram_vanishes_identically() {
        for g in [MetricField::euclidean(2), MetricField::sphere_polar(1.0), MetricField::minkowski(2, 1)] {
            let p = BoundaryCondition::diagonal(2, vec![(0.7, 2.2), (-1.0, 1.0)]);
            for u in p.sample_grid(5) {
                let f = endpoint_frame(&p, &g, &u).unwrap();
                assert!(f.gram.amax() < 1e-12, "gram {:?} at {:?}", f.gram, u);
            }
            let nd = is_nondegenerate(&p, &g, 8).unwrap();
            assert!(!nd.nondegenerate);
            assert_abs_diff_eq!(nd.worst_conditioning, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn equator_times_point_gram_is_one() {
        let g = MetricField::sphere_polar(1.0);
        let p = equator_times_point_polar();
        let f = endpoint_frame(&p, &g, &[0.3]).unwrap();
        assert_eq!(f.gram.nrows(), 1);
        assert_relative_eq!(f.gram[(0, 0)], 1.0, max_relative = 1e-12);
        let nd = is_nondegenerate(&p, &g, 16).unwrap();
        assert!(nd.nondegenerate);
    }

    #[test]
    fn frame_columns_are_gbar_orthogonal() {
        let g = MetricField::sphere_polar(1.0);
        let p = equator_times_point_polar();
        for i in 0..100 {
            let u = [2.0 * PI * i as f64 / 100.0];
            let f = endpoint_frame(&p, &g, &u).unwrap();
            let cross = f.tangent.transpose() * &f.gbar * &f.normal;
            assert!(cross.amax() < tol::FRAME_ORTHO_ABS);
            let mut all = DMatrix::zeros(4, f.tangent.ncols() + f.normal.ncols());
            all.view_mut((0, 0), (4, f.tangent.ncols())).copy_from(&f.tangent);
            all.view_mut((0, f.tangent.ncols()), (4, f.normal.ncols())).copy_from(&f.normal);
            let sv = all.svd(false, false).singular_values;
            let rank = sv.iter().filter(|s| **s > 1e-10).count();
            assert_eq!(rank, 4);
        }
    }

    #[test]
    fn affine_subspace_in_flat_space_is_totally_geodesic() {
        let g = MetricField::euclidean(2);
        let line = FactorCurve::segment(&[0.0, 0.0], &[1.0, 1.0]);
        let point = FactorCurve::point(&[3.0, 0.0]);
        let p = BoundaryCondition::product(&line, &point);
        let f = endpoint_frame(&p, &g, &[0.4]).unwrap();
        let eta = f.normal.column(0).into_owned();
        let s = second_fundamental_form(&p, &g, &[0.4], &eta).unwrap();
        assert!(s.amax() < 1e-12);
    }

    #[test]
    fn sphere_equator_is_totally_geodesic() {
        let g = MetricField::sphere_polar(1.0);
        let p = equator_times_point_polar();
        // Meridian direction at the first factor is ḡ-normal to P.
        let eta = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let s = second_fundamental_form(&p, &g, &[1.0], &eta).unwrap();
        assert!(s.amax() < 1e-9, "S = {s:?}");
    }

    #[test]
    fn latitude_circle_shape_matches_brute_force() {
        let theta0 = 1.0f64;
        let g = MetricField::sphere_polar(1.0);
        let lat = FactorCurve::curve(
            vec![Series::constant(theta0), Series::coordinate(0)],
            (0.0, 2.0 * PI),
        );
        let point = FactorCurve::point(&[PI / 2.0, 1.0]);
        let p = BoundaryCondition::product(&lat, &point);
        let u = [0.7];
        // Inward meridian direction, unit for g (g_θθ = 1).
        let eta = DVector::from_vec(vec![-1.0, 0.0, 0.0, 0.0]);
        let s = second_fundamental_form(&p, &g, &u, &eta).unwrap();
        // Closed form in the parametric basis: S = sinθ0 cosθ0 for η = -∂θ.
        assert_relative_eq!(s[(0, 0)], theta0.sin() * theta0.cos(), max_relative = 1e-9);

        // Brute force: central second differences of the embedding plus the
        // product Christoffel correction, everything recomputed from scratch.
        let h = 1e-4;
        let at = |uu: f64| p.embed(&[uu]);
        let d2 = (at(u[0] + h) - at(u[0]) * 2.0 + at(u[0] - h)) / (h * h);
        let jac = (at(u[0] + h) - at(u[0] - h)) / (2.0 * h);
        let (ep, eq) = p.embed_split(&u);
        let gp = g.christoffel(&ep).unwrap();
        let gq = g.christoffel(&eq).unwrap();
        let va = DVector::from_vec(vec![jac[0], jac[1]]);
        let wa = DVector::from_vec(vec![jac[2], jac[3]]);
        let cp = gp.apply(&va, &va);
        let cq = gq.apply(&wa, &wa);
        let mut x = d2.clone();
        x[0] += cp[0];
        x[1] += cp[1];
        x[2] += cq[0];
        x[3] += cq[1];
        let gbar = crate::metric::product_metric(&g, &ep, &eq).unwrap();
        let brute = (x.transpose() * &gbar * &eta)[(0, 0)];
        assert_relative_eq!(s[(0, 0)], brute, max_relative = 1e-6);
    }

    #[test]
    fn sff_symmetry_under_fd_derivatives() {
        let g = MetricField::sphere_polar(1.0);
        let lat = FactorCurve::curve(
            vec![Series::constant(0.9), Series::coordinate(0)],
            (0.0, 2.0 * PI),
        );
        let mer = FactorCurve::curve(
            vec![Series::coordinate(0), Series::constant(0.3)],
            (0.6, 2.0),
        );
        let mut p = BoundaryCondition::product(&lat, &mer);
        p.fd_derivatives = true;
        let u = [0.7, 1.2];
        let f = endpoint_frame(&p, &g, &u).unwrap();
        let eta = f.normal.column(1).into_owned();
        let s = second_fundamental_form(&p, &g, &u, &eta).unwrap();
        assert!((s.clone() - s.transpose()).amax() < 1e-7);
    }

    #[test]
    fn not_normal_direction_is_rejected() {
        let g = MetricField::sphere_polar(1.0);
        let p = equator_times_point_polar();
        let f = endpoint_frame(&p, &g, &[0.5]).unwrap();
        let eta = f.tangent.column(0).into_owned();
        match second_fundamental_form(&p, &g, &[0.5], &eta) {
            Err(Error::NotNormal { .. }) => {}
            other => panic!("expected NotNormal, got {other:?}"),
        }
    }

    #[test]
    fn admissibility_point_pair_disjoint_from_diagonal() {
        let g = MetricField::euclidean(2);
        let gr = MetricField::euclidean(2);
        let p = BoundaryCondition::point_pair(&[0.0, 0.0], &[1.0, 0.0]);
        let rep = check_admissibility(&p, &g, &gr, &AdmissibilityOptions::default()).unwrap();
        assert!(rep.applicable);
        assert!(!rep.intersects_diagonal);
        assert!(rep.certified_admissible);
    }

    #[test]
    fn admissibility_transversal_product_on_sphere() {
        // Equator × meridian in the stereographic chart: intersects Δ at
        // (±1, 0), transversally.
        let g = MetricField::sphere_stereo(1.0);
        let gr = MetricField::euclidean(2);
        let equator = FactorCurve::circle([0.0, 0.0], 1.0, (0.0, 2.0 * PI));
        let meridian = FactorCurve::segment(&[-2.0, 0.0], &[2.0, 0.0]);
        let p = BoundaryCondition::product(&equator, &meridian);
        let rep = check_admissibility(&p, &g, &gr, &AdmissibilityOptions::default()).unwrap();
        assert!(rep.applicable, "conditioning {}", rep.worst_conditioning);
        assert!(rep.intersects_diagonal);
        assert!(rep.transversal);
        assert!(rep.certified_admissible);

        // Verdict is unchanged when the reference metric is doubled.
        let gr2 = MetricField::custom(
            2,
            0,
            vec![Series::constant(2.0), Series::zero(), Series::constant(2.0)],
            crate::chart::ChartDomain::unbounded(2),
        );
        let rep2 = check_admissibility(&p, &g, &gr2, &AdmissibilityOptions::default()).unwrap();
        assert_eq!(rep.certified_admissible, rep2.certified_admissible);
        assert_eq!(rep.intersects_diagonal, rep2.intersects_diagonal);
    }

    #[test]
    fn admissibility_rejects_degenerate_fixtures() {
        let g = MetricField::euclidean(2);
        let gr = MetricField::euclidean(2);
        // Δ itself.
        let delta = BoundaryCondition::diagonal(2, vec![(-1.0, 1.0), (-1.0, 1.0)]);
        let rep = check_admissibility(&delta, &g, &gr, &AdmissibilityOptions::default()).unwrap();
        assert!(!rep.applicable);

        // u ↦ ((u, 0), (u, 0)): tangent to Δ, hence degenerate.
        let tangent = BoundaryCondition::parametric(
            2,
            vec![Series::coordinate(0), Series::zero(), Series::coordinate(0), Series::zero()],
            vec![(-1.0, 1.0)],
        );
        let rep = check_admissibility(&tangent, &g, &gr, &AdmissibilityOptions::default()).unwrap();
        assert!(!rep.applicable);
    }

    #[test]
    fn transpose_is_an_involution() {
        let p = BoundaryCondition::point_pair(&[0.0, 1.0], &[2.0, 3.0]);
        let t = p.transpose();
        assert_eq!(t.embed(&[]).as_slice(), &[2.0, 3.0, 0.0, 1.0]);
        let tt = t.transpose();
        assert_eq!(tt.embed(&[]).as_slice(), p.embed(&[]).as_slice());
    }

    #[test]
    fn short_bound_flat_and_sphere_box() {
        let g = MetricField::euclidean(2);
        let b = short_geodesic_bound(&g, &[(-1.0, 1.0), (-1.0, 1.0)], 9).unwrap();
        assert_abs_diff_eq!(b.kappa, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.c, 2.0, epsilon = 1e-12);

        let s = MetricField::sphere_polar(1.0);
        let b = short_geodesic_bound(&s, &[(PI / 4.0, 3.0 * PI / 4.0), (0.0, PI)], 33).unwrap();
        assert_relative_eq!(b.kappa, 2.0, max_relative = 1e-6);
        assert_relative_eq!(b.c, 4.0, max_relative = 1e-6);
    }

    #[test]
    fn turning_angle_inequality_validates() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let g = MetricField::sphere_polar(1.0);
        let region = [(PI / 4.0, 3.0 * PI / 4.0), (0.0, PI)];
        let bound = short_geodesic_bound(&g, &region, 33).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = IntegrateOptions::default();
        for _ in 0..50 {
            let p = [
                rng.random_range(region[0].0 + 0.2..region[0].1 - 0.2),
                rng.random_range(region[1].0 + 0.2..region[1].1 - 0.2),
            ];
            let ang = rng.random_range(0.0..2.0 * PI);
            let speed = rng.random_range(0.01..0.15);
            let v = [speed * ang.cos(), speed * ang.sin()];
            let c = integrate(&g, &p, &v, 32, &opts).unwrap();
            let inside = c.knots.iter().all(|x| {
                x[0] >= region[0].0 && x[0] <= region[0].1 && x[1] >= region[1].0 && x[1] <= region[1].1
            });
            if !inside {
                continue;
            }
            let v0 = &c.velocities[0];
            let v1 = &c.velocities[32];
            let lhs = (v1 / v1.norm() - v0 / v0.norm()).norm();
            let len = crate::geodesic::riemannian_length(&c, &MetricField::euclidean(2));
            assert!(
                lhs <= bound.c * len + 1e-12,
                "turning angle {lhs:.3e} exceeds {:.3e}",
                bound.c * len
            );
            // Log-speed inequality from the same constant.
            let log_ratio = (v1.norm() / v0.norm()).ln().abs();
            assert!(log_ratio <= bound.kappa * len + 1e-12);
        }
    }
}
