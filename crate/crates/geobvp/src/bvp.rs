//! Shooting solver for `(g, P)`-geodesics: geodesics whose endpoint pair lies
//! on `P` and whose endpoint velocities are ḡ-orthogonal to `T P`.
//!
//! The unknown is `(u, v)` — a parameter point of `P` and an initial
//! velocity — against the square residual `[γ(1) - q(u); ḡ((v, γ̇(1)), ∂_a P)]`.
//! Damped Newton with a truncated-SVD step keeps making progress along
//! degenerate solution families (rank-deficient Jacobians), which are then
//! reported as clusters rather than failures.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{endpoint_frame, BoundaryCondition, EndpointFrame};
use crate::error::{Error, Result};
use crate::geodesic::{integrate, riemannian_length, GeodesicCurve, IntegrateOptions};
use crate::metric::MetricField;
use crate::parallel::batch_map;
use crate::tol;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub mesh: usize,
    pub integrator_tol: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mesh: 64,
            integrator_tol: tol::INTEGRATOR_TOL,
            newton_tol: tol::NEWTON_TOL,
            max_iters: tol::NEWTON_MAX_ITERS,
        }
    }
}

/// Converged solution of the boundary value problem.
#[derive(Debug, Clone)]
pub struct GpGeodesic {
    pub curve: GeodesicCurve,
    pub u: Vec<f64>,
    pub frame: EndpointFrame,
    /// Post-hoc verified residual: endpoint mismatch plus worst tangent
    /// pairing of the endpoint velocities.
    pub residual_norm: f64,
    pub newton_iters: usize,
    /// Relative smallest singular value of the last shooting Jacobian.
    pub jacobian_sigma_ratio: f64,
    pub rank_deficient: bool,
    pub seed_index: usize,
}

pub struct ShootingProblem<'a> {
    pub g: &'a MetricField,
    pub p: &'a BoundaryCondition,
    pub g_r: &'a MetricField,
    pub opts: SolverOptions,
}

impl<'a> ShootingProblem<'a> {
    pub fn new(g: &'a MetricField, p: &'a BoundaryCondition, g_r: &'a MetricField) -> Self {
        ShootingProblem { g, p, g_r, opts: SolverOptions::default() }
    }

    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn unpack(&self, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let d = self.p.param_dim;
        let u = z.as_slice()[..d].to_vec();
        let v = z.as_slice()[d..].to_vec();
        (u, v)
    }

    /// Residual of the shooting map at `(u, v)`.
    pub fn residual(&self, z: &DVector<f64>) -> Result<(DVector<f64>, GeodesicCurve)> {
        let n = self.dim();
        let d = self.p.param_dim;
        let (u, v) = self.unpack(z);
        let (start, target) = self.p.embed_split(&u);
        let curve = integrate(
            self.g,
            &start,
            &v,
            self.opts.mesh,
            &IntegrateOptions { tol: self.opts.integrator_tol, fixed_substeps: None },
        )?;
        let frame = endpoint_frame(self.p, self.g, &u)?;
        let mut res = DVector::zeros(n + d);
        let end_diff = self.g.domain.diff(curve.knots[curve.n()].as_slice(), &target);
        for i in 0..n {
            res[i] = end_diff[i];
        }
        let vel_pair = pair_velocity(&curve);
        for a in 0..d {
            res[n + a] = (frame.tangent_unit.column(a).transpose() * &frame.gbar * &vel_pair)[(0, 0)];
        }
        Ok((res, curve))
    }

    /// Damped Newton iteration from a seed.
    pub fn solve(&self, u0: &[f64], v0: &[f64]) -> Result<GpGeodesic> {
        let n = self.dim();
        let d = self.p.param_dim;
        assert_eq!(u0.len(), d);
        assert_eq!(v0.len(), n);
        let mut z = DVector::zeros(n + d);
        for (a, &x) in u0.iter().enumerate() {
            z[a] = x;
        }
        for (i, &x) in v0.iter().enumerate() {
            z[d + i] = x;
        }

        let scale = 1.0 + DVector::from_vec(v0.to_vec()).norm();
        let res_tol = self.opts.newton_tol * scale;

        let (mut res, mut curve) = self.residual(&z)?;
        let mut iters = 0;

        while res.norm() > res_tol {
            if iters >= self.opts.max_iters {
                return Err(Error::NoConvergence { iters, residual: res.norm() });
            }
            let jac = self.numerical_jacobian(&z)?;
            let svd = jac.clone().svd(true, true);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let sigma_ratio = if smax > 0.0 { smin / smax } else { 0.0 };
            if smax == 0.0 {
                return Err(Error::SingularJacobian { sigma_min: 0.0 });
            }
            // Truncated pseudo-inverse step; keeps Newton moving along
            // one-parameter solution families.
            let step = -pseudo_solve(&svd, &res, 1e-10 * smax);

            let mut lambda = 1.0;
            let base = res.norm_squared();
            let mut accepted = false;
            for _ in 0..12 {
                let zt = &z + &step * lambda;
                match self.residual(&zt) {
                    Ok((rt, ct)) => {
                        if rt.norm_squared() <= (1.0 - 1e-4 * lambda) * base {
                            z = zt;
                            res = rt;
                            curve = ct;
                            accepted = true;
                            break;
                        }
                    }
                    Err(Error::DomainExit { .. }) | Err(Error::SingularMetric { .. }) => {}
                    Err(e) => return Err(e),
                }
                lambda *= 0.5;
            }
            iters += 1;
            if !accepted {
                if sigma_ratio < tol::SHOOTING_RANK_RATIO {
                    return Err(Error::SingularJacobian { sigma_min: smin });
                }
                return Err(Error::NoConvergence { iters, residual: res.norm() });
            }
        }

        let (u, _) = self.unpack(&z);
        let u = self.wrap_params(&u);
        let frame = endpoint_frame(self.p, self.g, &u)?;

        // Rank diagnosis at the converged point itself; the Jacobian from the
        // last Newton step sits one quadratic-convergence step away from the
        // solution family and can miss the deficiency.
        let jac = self.numerical_jacobian(&z)?;
        let sv = jac.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let sigma_ratio = if smax > 0.0 { smin / smax } else { 0.0 };

        // Independent post-hoc verification of both defining constraints.
        let (_, target) = self.p.embed_split(&u);
        let endpoint_err = self.g.domain.distance(curve.knots[curve.n()].as_slice(), &target);
        let vel_pair = pair_velocity(&curve);
        let mut ortho_err = 0.0f64;
        for a in 0..d {
            let val = (frame.tangent_unit.column(a).transpose() * &frame.gbar * &vel_pair)[(0, 0)];
            ortho_err = ortho_err.max(val.abs());
        }

        Ok(GpGeodesic {
            curve,
            u,
            frame,
            residual_norm: endpoint_err.max(ortho_err),
            newton_iters: iters,
            jacobian_sigma_ratio: sigma_ratio,
            rank_deficient: sigma_ratio < tol::SHOOTING_RANK_RATIO,
            seed_index: 0,
        })
    }

    fn numerical_jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = z.len();
        let h_of = |x: f64| self.opts.integrator_tol.cbrt() * (1.0 + x.abs());
        let cols = batch_map((0..m).collect::<Vec<_>>(), |j| -> Result<DVector<f64>> {
            let h = h_of(z[j]);
            let mut zp = z.clone();
            zp[j] += h;
            let mut zm = z.clone();
            zm[j] -= h;
            let (rp, _) = self.residual(&zp)?;
            let (rm, _) = self.residual(&zm)?;
            Ok((rp - rm) / (2.0 * h))
        });
        let mut jac = DMatrix::zeros(z.len(), m);
        for (j, c) in cols.into_iter().enumerate() {
            jac.set_column(j, &c?);
        }
        Ok(jac)
    }

    /// Wrap parameters into the box when the embedding is periodic in them.
    fn wrap_params(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        for (a, (lo, hi)) in self.p.param_box.iter().enumerate() {
            let range = hi - lo;
            if range <= 0.0 {
                continue;
            }
            let mut probe = u.to_vec();
            probe[a] = *lo;
            let e_lo = self.p.embed(&probe);
            probe[a] = *hi;
            let e_hi = self.p.embed(&probe);
            let periodic = (e_lo - e_hi).norm() < 1e-9;
            if periodic {
                out[a] = lo + (out[a] - lo).rem_euclid(range);
            } else {
                out[a] = out[a].clamp(*lo, *hi);
            }
        }
        out
    }
}

/// Endpoint velocity pair `(γ̇(0), γ̇(1))` as a 2n-vector.
pub fn pair_velocity(curve: &GeodesicCurve) -> DVector<f64> {
    let n = curve.dim();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = curve.velocities[0][i];
        out[n + i] = curve.velocities[curve.n()][i];
    }
    out
}

fn pseudo_solve(
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
    cutoff: f64,
) -> DVector<f64> {
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with vt");
    let mut y = u.transpose() * rhs;
    for (i, s) in svd.singular_values.iter().enumerate() {
        y[i] = if *s > cutoff { y[i] / s } else { 0.0 };
    }
    vt.transpose() * y
}

/// Seed-grid specification for the multi-start scan.
#[derive(Debug, Clone)]
pub struct SeedGrid {
    pub u_per_dim: usize,
    /// Number of velocity directions per base point.
    pub directions: usize,
    /// Velocity magnitudes to try.
    pub speeds: Vec<f64>,
    /// Also seed with the chart secant `q(u) - p(u)`.
    pub include_secant: bool,
    pub seed: u64,
}

impl Default for SeedGrid {
    fn default() -> Self {
        SeedGrid { u_per_dim: 8, directions: 8, speeds: vec![1.0, 3.0], include_secant: true, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionCluster {
    pub members: Vec<usize>,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub attempted: usize,
    pub converged: usize,
    pub discarded_long: usize,
    pub discarded_short: usize,
}

#[derive(Debug)]
pub struct ScanResult {
    pub solutions: Vec<GpGeodesic>,
    pub clusters: Vec<SolutionCluster>,
    pub report: ScanReport,
}

/// Multi-start scan: solve from a tensor seed grid, deduplicate, filter by
/// Riemannian length, and group degenerate families into clusters.
pub fn scan(problem: &ShootingProblem, grid: &SeedGrid, l_max: f64, min_length: f64) -> ScanResult {
    let n = problem.dim();
    let d = problem.p.param_dim;

    let u_points = if d == 0 { vec![vec![]] } else { problem.p.sample_grid(grid.u_per_dim) };

    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    if n == 2 {
        for k in 0..grid.directions {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / grid.directions as f64;
            dirs.push(DVector::from_vec(vec![ang.cos(), ang.sin()]));
        }
    } else {
        for _ in 0..grid.directions {
            let mut v = DVector::zeros(n);
            for i in 0..n {
                v[i] = rng.random_range(-1.0..1.0);
            }
            let norm = v.norm();
            if norm > 1e-9 {
                dirs.push(v / norm);
            }
        }
    }

    let mut seeds: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for u in &u_points {
        if grid.include_secant {
            let (p0, q0) = problem.p.embed_split(u);
            let secant = problem.g.domain.diff(&q0, &p0);
            if secant.norm() > 1e-12 {
                seeds.push((u.clone(), secant.as_slice().to_vec()));
            }
        }
        for dir in &dirs {
            for s in &grid.speeds {
                seeds.push((u.clone(), (dir * *s).as_slice().to_vec()));
            }
        }
    }

    let attempted = seeds.len();
    let outcomes = batch_map(seeds, |(u, v)| problem.solve(&u, &v));

    let mut report = ScanReport { attempted, ..Default::default() };
    let mut solutions: Vec<GpGeodesic> = Vec::new();
    for (idx, out) in outcomes.into_iter().enumerate() {
        let Ok(mut sol) = out else { continue };
        report.converged += 1;
        sol.seed_index = idx;
        let len = riemannian_length(&sol.curve, problem.g_r);
        if len > l_max {
            report.discarded_long += 1;
            continue;
        }
        if len < min_length {
            report.discarded_short += 1;
            continue;
        }
        let dup = solutions.iter().any(|s| same_curve(problem, &s.curve, &sol.curve));
        if !dup {
            solutions.push(sol);
        }
    }

    // Cluster degenerate families: rank-deficient solutions whose parameters
    // are neighbors on the seed grid.
    let spacing: Vec<f64> = problem
        .p
        .param_box
        .iter()
        .map(|(lo, hi)| (hi - lo) / grid.u_per_dim.max(1) as f64)
        .collect();
    let mut cluster_of: Vec<Option<usize>> = vec![None; solutions.len()];
    let mut clusters: Vec<SolutionCluster> = Vec::new();
    for i in 0..solutions.len() {
        if cluster_of[i].is_some() {
            continue;
        }
        let cid = clusters.len();
        clusters.push(SolutionCluster { members: vec![i], rank_deficient: solutions[i].rank_deficient });
        cluster_of[i] = Some(cid);
        let mut frontier = vec![i];
        while let Some(a) = frontier.pop() {
            for b in 0..solutions.len() {
                if cluster_of[b].is_some() || !solutions[a].rank_deficient || !solutions[b].rank_deficient
                {
                    continue;
                }
                let close = d > 0
                    && solutions[a]
                        .u
                        .iter()
                        .zip(&solutions[b].u)
                        .zip(&spacing)
                        .all(|((x, y), s)| (x - y).abs() <= 1.6 * s);
                if close {
                    cluster_of[b] = Some(cid);
                    clusters[cid].members.push(b);
                    clusters[cid].rank_deficient |= solutions[b].rank_deficient;
                    frontier.push(b);
                }
            }
        }
    }

    ScanResult { solutions, clusters, report }
}

fn same_curve(problem: &ShootingProblem, a: &GeodesicCurve, b: &GeodesicCurve) -> bool {
    let len = riemannian_length(a, problem.g_r);
    let cut = tol::DEDUP_KNOT_REL * (1.0 + len);
    a.knots
        .iter()
        .zip(&b.knots)
        .all(|(x, y)| problem.g.domain.distance(x.as_slice(), y.as_slice()) < cut)
}
