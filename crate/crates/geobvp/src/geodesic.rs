//! Geodesic integration on a chart, lengths and energy, periodicity and
//! self-intersection detection for discretized curves.

use nalgebra::DVector;

use crate::chart::ChartDomain;
use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::ode::{integrate_at_times, OdeOptions};
use crate::tol;

#[derive(Debug, Clone, Default)]
pub struct IntegratorReport {
    pub steps: usize,
    pub rejected: usize,
    /// Max defect of the Hermite interpolant against the geodesic equation at
    /// interval midpoints. Scales like O(1/N^3); a certificate of mesh
    /// adequacy, not of integrator accuracy.
    pub max_defect: f64,
}

/// Affinely parametrized discrete geodesic on `[0, 1]` with `N + 1` uniform
/// knots carrying positions, velocities and accelerations.
#[derive(Debug, Clone)]
pub struct GeodesicCurve {
    pub knots: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
    pub report: IntegratorReport,
    /// `g(γ̇(0), γ̇(0))`; conserved along the curve.
    pub initial_speed_sq: f64,
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub fixed_substeps: Option<usize>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { tol: tol::INTEGRATOR_TOL, fixed_substeps: None }
    }
}

/// Solve `γ̈ = -Γ(γ)(γ̇, γ̇)` on `[0, 1]` from `(p, v)`, resampled to `n`
/// uniform knots (each knot is an exact integrator state).
pub fn integrate(
    g: &MetricField,
    p: &[f64],
    v: &[f64],
    n: usize,
    opts: &IntegrateOptions,
) -> Result<GeodesicCurve> {
    let dim = g.dim();
    assert_eq!(p.len(), dim);
    assert_eq!(v.len(), dim);
    if !g.domain.contains(p) {
        return Err(Error::DomainExit { t: 0.0, point: p.to_vec() });
    }
    let mut y0 = DVector::zeros(2 * dim);
    for i in 0..dim {
        y0[i] = p[i];
        y0[dim + i] = v[i];
    }
    let mut rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let x = y.rows(0, dim).iter().copied().collect::<Vec<_>>();
        if !g.domain.contains(&x) {
            return Err(Error::DomainExit { t, point: x });
        }
        let vel = DVector::from_iterator(dim, y.rows(dim, dim).iter().copied());
        let acc = g.acceleration(&x, &vel)?;
        let mut dy = DVector::zeros(2 * dim);
        for i in 0..dim {
            dy[i] = vel[i];
            dy[dim + i] = acc[i];
        }
        Ok(dy)
    };
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let ode_opts = OdeOptions {
        rtol: opts.tol,
        atol: opts.tol,
        fixed_substeps: opts.fixed_substeps,
        ..Default::default()
    };
    let (states, stats) = integrate_at_times(&mut rhs, y0, &times, &ode_opts)?;

    let mut knots = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    let mut accelerations = Vec::with_capacity(n + 1);
    for (i, y) in states.iter().enumerate() {
        let x: Vec<f64> = y.rows(0, dim).iter().copied().collect();
        if !g.domain.contains(&x) {
            return Err(Error::DomainExit { t: times[i], point: x });
        }
        let vel = DVector::from_iterator(dim, y.rows(dim, dim).iter().copied());
        let acc = g.acceleration(&x, &vel)?;
        knots.push(DVector::from_vec(x));
        velocities.push(vel);
        accelerations.push(acc);
    }

    let v0 = velocities[0].clone();
    let initial_speed_sq = g.inner(knots[0].as_slice(), &v0, &v0);

    let mut curve = GeodesicCurve {
        knots,
        velocities,
        accelerations,
        report: IntegratorReport { steps: stats.steps, rejected: stats.rejected, max_defect: 0.0 },
        initial_speed_sq,
    };
    curve.report.max_defect = midpoint_defect(g, &curve)?;
    Ok(curve)
}

/// Defect of the knot interpolant against the geodesic equation at interval
/// midpoints.
fn midpoint_defect(g: &MetricField, curve: &GeodesicCurve) -> Result<f64> {
    let n = curve.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let x = curve.position_at(t);
        let v = curve.velocity_at(t);
        let vdot = curve.acceleration_at(t);
        let defect = (&vdot + g.christoffel(x.as_slice())?.apply(&v, &v)).norm();
        worst = worst.max(defect);
    }
    Ok(worst)
}

impl GeodesicCurve {
    pub fn n(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.knots[0].len()
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let n = self.n();
        let tt = t.clamp(0.0, 1.0);
        let i = ((tt * n as f64).floor() as usize).min(n - 1);
        let dt = 1.0 / n as f64;
        let s = (tt - i as f64 * dt) / dt;
        (i, s, dt)
    }

    /// Cubic Hermite interpolation of the position.
    pub fn position_at(&self, t: f64) -> DVector<f64> {
        let (i, s, dt) = self.locate(t);
        hermite(&self.knots[i], &self.velocities[i], &self.knots[i + 1], &self.velocities[i + 1], s, dt)
    }

    /// Cubic Hermite interpolation of the velocity (using accelerations as
    /// endpoint slopes).
    pub fn velocity_at(&self, t: f64) -> DVector<f64> {
        let (i, s, dt) = self.locate(t);
        hermite(
            &self.velocities[i],
            &self.accelerations[i],
            &self.velocities[i + 1],
            &self.accelerations[i + 1],
            s,
            dt,
        )
    }

    /// Time derivative of the interpolated velocity.
    pub fn acceleration_at(&self, t: f64) -> DVector<f64> {
        let (i, s, dt) = self.locate(t);
        hermite_deriv(
            &self.velocities[i],
            &self.accelerations[i],
            &self.velocities[i + 1],
            &self.accelerations[i + 1],
            s,
            dt,
        )
    }

    /// The same trace traversed backwards: knots reversed, velocities negated.
    pub fn reversed(&self) -> GeodesicCurve {
        GeodesicCurve {
            knots: self.knots.iter().rev().cloned().collect(),
            velocities: self.velocities.iter().rev().map(|v| -v).collect(),
            accelerations: self.accelerations.iter().rev().cloned().collect(),
            report: self.report.clone(),
            initial_speed_sq: self.initial_speed_sq,
        }
    }

    /// Re-integrate the same initial data on a finer or coarser mesh.
    pub fn resample(&self, g: &MetricField, n: usize, opts: &IntegrateOptions) -> Result<GeodesicCurve> {
        integrate(g, self.knots[0].as_slice(), self.velocities[0].as_slice(), n, opts)
    }

    /// Euclidean chart length estimate used for tolerance scaling.
    pub fn chart_length(&self) -> f64 {
        simpson(&self.velocities.iter().map(|v| v.norm()).collect::<Vec<_>>())
    }
}

fn hermite(
    y0: &DVector<f64>,
    d0: &DVector<f64>,
    y1: &DVector<f64>,
    d1: &DVector<f64>,
    s: f64,
    dt: f64,
) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d0 * ((s3 - 2.0 * s2 + s) * dt)
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + d1 * ((s3 - s2) * dt)
}

fn hermite_deriv(
    y0: &DVector<f64>,
    d0: &DVector<f64>,
    y1: &DVector<f64>,
    d1: &DVector<f64>,
    s: f64,
    dt: f64,
) -> DVector<f64> {
    let s2 = s * s;
    (y0 * (6.0 * s2 - 6.0 * s)
        + d0 * ((3.0 * s2 - 4.0 * s + 1.0) * dt)
        + y1 * (-6.0 * s2 + 6.0 * s)
        + d1 * ((3.0 * s2 - 2.0 * s) * dt))
        / dt
}

/// Composite Simpson over uniform samples (3/8 rule on an odd tail).
pub fn simpson(samples: &[f64]) -> f64 {
    let n = samples.len() - 1;
    let h = 1.0 / n as f64;
    if n == 0 {
        return 0.0;
    }
    let even_part = if n % 2 == 0 { n } else { n - 3 };
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 <= even_part {
        total += h / 3.0 * (samples[i] + 4.0 * samples[i + 1] + samples[i + 2]);
        i += 2;
    }
    if n % 2 != 0 {
        let j = n - 3;
        total += 3.0 * h / 8.0 * (samples[j] + 3.0 * samples[j + 1] + 3.0 * samples[j + 2] + samples[j + 3]);
    }
    total
}

/// Riemannian length `∫ ||γ̇||_R dt` by composite Simpson (4th order).
pub fn riemannian_length(curve: &GeodesicCurve, g_r: &MetricField) -> f64 {
    let samples: Vec<f64> = curve
        .knots
        .iter()
        .zip(&curve.velocities)
        .map(|(x, v)| g_r.norm(x.as_slice(), v))
        .collect();
    simpson(&samples)
}

/// Energy `½ ∫ g(γ̇, γ̇) dt`.
pub fn energy(g: &MetricField, curve: &GeodesicCurve) -> f64 {
    let samples: Vec<f64> = curve
        .knots
        .iter()
        .zip(&curve.velocities)
        .map(|(x, v)| g.inner(x.as_slice(), v, v))
        .collect();
    0.5 * simpson(&samples)
}

#[derive(Debug, Clone)]
pub struct Periodicity {
    pub k: Option<usize>,
    /// Worst knot mismatch of the best accepted shift, for confidence
    /// reporting.
    pub position_mismatch: f64,
    pub velocity_mismatch: f64,
}

impl Periodicity {
    pub fn is_periodic(&self) -> bool {
        self.k.is_some()
    }
}

/// Smallest `k in [2, k_max]` such that `γ(t + 1/k) = γ(t)` (positions and
/// velocities, chart identification applied).
pub fn detect_periodicity(curve: &GeodesicCurve, domain: &ChartDomain, k_max: usize) -> Periodicity {
    let n = curve.n();
    let len = curve.chart_length();
    let pos_tol = tol::INTERSECT_DIST_REL * (1.0 + len);
    let vmax = curve.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let vel_tol = tol::INTERSECT_DIST_REL * (1.0 + vmax);

    for k in 2..=k_max {
        let shift = 1.0 / k as f64;
        let mut worst_pos = 0.0f64;
        let mut worst_vel = 0.0f64;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            if t + shift > 1.0 + 1e-12 {
                break;
            }
            let xs = curve.position_at(t + shift);
            let vs = curve.velocity_at(t + shift);
            worst_pos = worst_pos.max(domain.distance(curve.knots[i].as_slice(), xs.as_slice()));
            worst_vel = worst_vel.max((&vs - &curve.velocities[i]).norm());
            if worst_pos > pos_tol || worst_vel > vel_tol {
                break;
            }
        }
        if worst_pos <= pos_tol && worst_vel <= vel_tol {
            return Periodicity { k: Some(k), position_mismatch: worst_pos, velocity_mismatch: worst_vel };
        }
    }
    Periodicity { k: None, position_mismatch: f64::INFINITY, velocity_mismatch: f64::INFINITY }
}

/// Self-intersection structure of a discretized curve.
#[derive(Debug, Clone)]
pub enum SelfIntersections {
    /// Infinitely many analytic crossings; reported as the periodicity
    /// certificate instead of an unbounded pair list.
    Periodic { k: usize },
    /// Isolated crossings `(t, s)` with `t < s`, clusters merged.
    Pairs(Vec<(f64, f64)>),
}

/// Locate parameter pairs where the curve returns to the same chart point.
pub fn self_intersections(curve: &GeodesicCurve, domain: &ChartDomain) -> SelfIntersections {
    let periodic = detect_periodicity(curve, domain, 8);
    if let Some(k) = periodic.k {
        return SelfIntersections::Periodic { k };
    }
    let n = curve.n();
    let len = curve.chart_length();
    let dist_tol = tol::INTERSECT_DIST_REL * (1.0 + len);
    let floor = 2.0 / n as f64;
    // Seed candidates on the knot grid, fairly generous; refine locally.
    let seed_tol = (10.0 * dist_tol).max(len / n as f64);
    let mut hits: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        for j in (i + 1)..=n {
            let t = i as f64 / n as f64;
            let s = j as f64 / n as f64;
            if s - t <= floor {
                continue;
            }
            let d = domain.distance(curve.knots[i].as_slice(), curve.knots[j].as_slice());
            if d < seed_tol {
                if let Some(pair) = refine_intersection(curve, domain, t, s, dist_tol, floor) {
                    hits.push(pair);
                }
            }
        }
    }
    hits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (t, s) in hits {
        if let Some(last) = merged.last() {
            if (t - last.0).abs() < floor && (s - last.1).abs() < floor {
                continue;
            }
        }
        merged.push((t, s));
    }
    SelfIntersections::Pairs(merged)
}

/// Local coordinate-descent refinement of a crossing candidate.
fn refine_intersection(
    curve: &GeodesicCurve,
    domain: &ChartDomain,
    t0: f64,
    s0: f64,
    dist_tol: f64,
    floor: f64,
) -> Option<(f64, f64)> {
    let n = curve.n() as f64;
    let w = 1.0 / n;
    let dist = |t: f64, s: f64| {
        domain.distance(curve.position_at(t).as_slice(), curve.position_at(s).as_slice())
    };
    let mut t = t0;
    let mut s = s0;
    for _ in 0..24 {
        t = golden_min(|x| dist(x, s), (t - w).max(0.0), (t + w).min(1.0));
        s = golden_min(|x| dist(t, x), (s - w).max(0.0), (s + w).min(1.0));
    }
    if s - t > floor && dist(t, s) < dist_tol {
        Some((t, s))
    } else {
        None
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn opts() -> IntegrateOptions {
        IntegrateOptions::default()
    }

    #[test]
    fn flat_geodesics_are_straight_lines() {
        let g = MetricField::euclidean(2);
        let c = integrate(&g, &[0.0, 0.0], &[1.0, 2.0], 32, &opts()).unwrap();
        for (i, x) in c.knots.iter().enumerate() {
            let t = i as f64 / 32.0;
            assert_abs_diff_eq!(x[0], t, epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], 2.0 * t, epsilon = 1e-12);
        }
    }

    #[test]
    fn minkowski_causal_character_is_preserved() {
        let g = MetricField::minkowski(2, 1);
        for v in [[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]] {
            let c = integrate(&g, &[0.1, -0.3], &v, 16, &opts()).unwrap();
            let q0 = c.initial_speed_sq;
            for (x, vel) in c.knots.iter().zip(&c.velocities) {
                let q = g.inner(x.as_slice(), vel, vel);
                assert_abs_diff_eq!(q, q0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sphere_equator_is_a_geodesic() {
        let g = MetricField::sphere_polar(1.0);
        let c = integrate(&g, &[PI / 2.0, 0.0], &[0.0, 1.0], 64, &opts()).unwrap();
        for (i, x) in c.knots.iter().enumerate() {
            let t = i as f64 / 64.0;
            assert_abs_diff_eq!(x[0], PI / 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(x[1], t, epsilon = 1e-9);
        }
    }

    #[test]
    fn affine_parametrization_is_conserved() {
        let g = MetricField::sphere_stereo(1.0);
        let c = integrate(&g, &[0.9, -0.1], &[1.3, 2.1], 64, &opts()).unwrap();
        let q0 = c.initial_speed_sq;
        for (x, v) in c.knots.iter().zip(&c.velocities) {
            let q = g.inner(x.as_slice(), v, v);
            assert!((q - q0).abs() < tol::CONSERVATION_REL * (1.0 + q0.abs()));
        }
    }

    #[test]
    fn reversal_retraces_knots() {
        let g = MetricField::sphere_stereo(1.0);
        let c = integrate(&g, &[0.4, 0.2], &[0.8, -1.1], 48, &opts()).unwrap();
        let end = c.knots[48].clone();
        let vend = -c.velocities[48].clone();
        let back = integrate(&g, end.as_slice(), vend.as_slice(), 48, &opts()).unwrap();
        for i in 0..=48 {
            let d = (&back.knots[i] - &c.knots[48 - i]).norm();
            assert!(d < 1e-6, "reversal mismatch {d:.2e} at knot {i}");
        }
    }

    #[test]
    fn convergence_order_on_sphere_meridian() {
        // Closed-form great circle through the stereographic origin:
        // x(t) = tan((π/4)t), unit-sphere meridian with speed π/2.
        let g = MetricField::sphere_stereo(1.0);
        let mut errs = Vec::new();
        for m in [1usize, 2, 4, 8] {
            let o = IntegrateOptions { fixed_substeps: Some(m), ..Default::default() };
            let c = integrate(&g, &[0.0, 0.0], &[PI / 4.0, 0.0], 4, &o).unwrap();
            let exact = (PI / 4.0f64).tan();
            errs.push((c.knots[4][0] - exact).abs().max(1e-18));
        }
        // Log-log slope against substep count.
        let slopes: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        assert!(
            slopes.iter().all(|s| *s >= 3.5),
            "integrator convergence slopes {slopes:?} (errors {errs:?})"
        );
    }

    #[test]
    fn domain_exit_is_reported() {
        let g = MetricField::sphere_polar(1.0);
        // Meridian heading straight into the chart's polar boundary.
        let res = integrate(&g, &[PI / 2.0, 0.0], &[-2.0, 0.0], 32, &opts());
        match res {
            Err(Error::DomainExit { .. }) => {}
            other => panic!("expected DomainExit, got {:?}", other.map(|c| c.knots.len())),
        }
    }

    #[test]
    fn lengths_and_energy() {
        let e = MetricField::euclidean(2);
        let c = integrate(&e, &[0.0, 0.0], &[3.0, 4.0], 32, &opts()).unwrap();
        assert_relative_eq!(riemannian_length(&c, &e), 5.0, max_relative = 1e-10);
        assert_relative_eq!(energy(&e, &c), 12.5, max_relative = 1e-10);

        let mk = MetricField::minkowski(2, 1);
        let cl = integrate(&mk, &[0.0, 0.0], &[1.0, 1.0], 32, &opts()).unwrap();
        assert_abs_diff_eq!(energy(&mk, &cl), 0.0, epsilon = 1e-12);

        // Full equator loop measured in the Euclidean chart reference.
        let s = MetricField::sphere_polar(1.0);
        let eq = integrate(&s, &[PI / 2.0, 0.0], &[0.0, 2.0 * PI], 64, &opts()).unwrap();
        assert_relative_eq!(riemannian_length(&eq, &MetricField::euclidean(2)), 2.0 * PI, max_relative = 1e-9);
    }

    #[test]
    fn doubled_equator_is_periodic_single_loop_is_not() {
        let g = MetricField::sphere_polar(1.0);
        let twice = integrate(&g, &[PI / 2.0, 0.0], &[0.0, 4.0 * PI], 128, &opts()).unwrap();
        let p = detect_periodicity(&twice, &g.domain, 6);
        assert_eq!(p.k, Some(2));

        let once = integrate(&g, &[PI / 2.0, 0.0], &[0.0, 2.0 * PI], 128, &opts()).unwrap();
        let p = detect_periodicity(&once, &g.domain, 6);
        assert_eq!(p.k, None);
    }

    #[test]
    fn straight_line_has_no_self_intersections() {
        let g = MetricField::euclidean(2);
        let c = integrate(&g, &[0.0, 0.0], &[1.0, 0.5], 64, &opts()).unwrap();
        match self_intersections(&c, &g.domain) {
            SelfIntersections::Pairs(p) => assert!(p.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn torus_winding_identifies_endpoints() {
        let g = MetricField::flat_torus(2);
        let c = integrate(&g, &[0.0, 0.0], &[1.0, 0.0], 64, &opts()).unwrap();
        match self_intersections(&c, &g.domain) {
            SelfIntersections::Pairs(p) => {
                assert_eq!(p.len(), 1);
                assert_abs_diff_eq!(p[0].0, 0.0, epsilon = 1e-3);
                assert_abs_diff_eq!(p[0].1, 1.0, epsilon = 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn doubled_equator_reports_periodicity_certificate() {
        let g = MetricField::sphere_polar(1.0);
        let c = integrate(&g, &[PI / 2.0, 0.0], &[0.0, 4.0 * PI], 128, &opts()).unwrap();
        match self_intersections(&c, &g.domain) {
            SelfIntersections::Periodic { k } => assert_eq!(k, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
