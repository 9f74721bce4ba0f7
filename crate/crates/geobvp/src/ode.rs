//! Embedded Dormand–Prince 5(4) integrator.
//!
//! Steps are clipped so that every requested output time is hit exactly by a
//! full Runge–Kutta step; downstream consumers therefore see genuine solver
//! states at the uniform knots instead of interpolated ones. A fixed-step
//! mode (no error control) is used by the convergence-order studies.

use nalgebra::DVector;

use crate::error::{Error, Result};

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// When set, take exactly this many equal steps per output interval and
    /// skip error control.
    pub fixed_substeps: Option<usize>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: crate::tol::INTEGRATOR_TOL,
            atol: crate::tol::INTEGRATOR_TOL,
            max_steps: 200_000,
            fixed_substeps: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
}

/// Integrate `y' = f(t, y)` from `times[0]`, returning the state at every
/// requested time. `times` must be strictly increasing.
pub fn integrate_at_times<F>(
    f: &mut F,
    y0: DVector<f64>,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<DVector<f64>>, OdeStats)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(times.len());
    out.push(y0.clone());

    if let Some(m) = opts.fixed_substeps {
        let mut y = y0;
        let mut k1 = f(times[0], &y)?;
        for w in times.windows(2) {
            let h = (w[1] - w[0]) / m as f64;
            let mut t = w[0];
            for _ in 0..m {
                let (ynew, klast, _) = rk_step_raw(f, t, &y, &k1, h)?;
                y = ynew;
                k1 = klast;
                t += h;
                stats.steps += 1;
            }
            out.push(y.clone());
        }
        return Ok((out, stats));
    }

    let mut t = times[0];
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    let total = times[times.len() - 1] - times[0];
    let mut h = (total / 100.0).min(0.1).max(1e-6);
    let h_floor = 1e-14 * total.max(1.0);

    for &target in &times[1..] {
        while t < target - 1e-13 * total.max(1.0) {
            if stats.steps + stats.rejected > opts.max_steps {
                return Err(Error::IntegratorStall { t, step: h });
            }
            let clipped = h.min(target - t);
            let (ynew, klast, errv) = rk_step_raw(f, t, &y, &k1, clipped)?;
            // mixed error norm
            let mut err = 0.0f64;
            for i in 0..y.len() {
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err += (errv[i] / sc) * (errv[i] / sc);
            }
            let err = (err / y.len() as f64).sqrt();
            if err <= 1.0 {
                t += clipped;
                y = ynew;
                k1 = klast;
                stats.steps += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (clipped * factor).max(h_floor);
            } else {
                stats.rejected += 1;
                h = (clipped * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)).max(h_floor);
                if h <= h_floor {
                    return Err(Error::IntegratorStall { t, step: h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn rk_step_raw<F>(
    f: &mut F,
    t: f64,
    y: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(k1.clone());
    for s in 0..6 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                ys += kj * (a * h);
            }
        }
        k.push(f(t + C[s] * h, &ys)?);
    }
    let mut ynew = y.clone();
    for (j, kj) in k.iter().take(6).enumerate() {
        let a = A[5][j];
        if a != 0.0 {
            ynew += kj * (a * h);
        }
    }
    let mut errv = DVector::zeros(y.len());
    for (j, kj) in k.iter().enumerate() {
        if E[j] != 0.0 {
            errv += kj * (E[j] * h);
        }
    }
    let k_last = k.pop().expect("seven stages");
    Ok((ynew, k_last, errv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_exponential() {
        let mut f = |_t: f64, y: &DVector<f64>| Ok(y.clone());
        let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let (ys, _) =
            integrate_at_times(&mut f, DVector::from_vec(vec![1.0]), &times, &OdeOptions::default())
                .unwrap();
        for (i, y) in ys.iter().enumerate() {
            assert_relative_eq!(y[0], (i as f64 / 10.0).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        // y' = cos(t) * y, y(1) = exp(sin(1)).
        let mut errs = Vec::new();
        for m in [1usize, 2, 4] {
            let mut f = |t: f64, y: &DVector<f64>| Ok(y * t.cos());
            let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
            let opts = OdeOptions { fixed_substeps: Some(m), ..Default::default() };
            let (ys, _) =
                integrate_at_times(&mut f, DVector::from_vec(vec![1.0]), &times, &opts).unwrap();
            errs.push((ys[8][0] - 1f64.sin().exp()).abs());
        }
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!(slope1 > 4.0 && slope2 > 4.0, "orders {slope1:.2}, {slope2:.2}");
    }

    #[test]
    fn stalls_on_blowup() {
        // y' = y^2 with y(0)=1 blows up at t=1; requesting t=2 must fail.
        let mut f = |_t: f64, y: &DVector<f64>| Ok(y.component_mul(y));
        let times = vec![0.0, 2.0];
        let res = integrate_at_times(&mut f, DVector::from_vec(vec![1.0]), &times, &OdeOptions::default());
        assert!(res.is_err());
    }
}
