//! Chart domains: a coordinate box with optional periodic identifications.
//!
//! All test manifolds live in a single chart. Closed manifolds (flat torus,
//! the polar sphere chart in its angular coordinate) are realized by keeping
//! the chart unbounded in the periodic coordinates and applying the
//! identification only inside difference and distance computations.

use nalgebra::DVector;

/// Valid region of a chart plus periodic identifications per coordinate.
#[derive(Debug, Clone)]
pub struct ChartDomain {
    /// Per-coordinate closed bounds; `None` means unbounded.
    pub bounds: Vec<Option<(f64, f64)>>,
    /// Per-coordinate identification period; `None` means no identification.
    pub periods: Vec<Option<f64>>,
}

impl ChartDomain {
    pub fn unbounded(dim: usize) -> Self {
        ChartDomain {
            bounds: vec![None; dim],
            periods: vec![None; dim],
        }
    }

    pub fn boxed(bounds: Vec<(f64, f64)>) -> Self {
        let dim = bounds.len();
        ChartDomain {
            bounds: bounds.into_iter().map(Some).collect(),
            periods: vec![None; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn with_period(mut self, coord: usize, period: f64) -> Self {
        self.periods[coord] = Some(period);
        self
    }

    pub fn with_bounds(mut self, coord: usize, lo: f64, hi: f64) -> Self {
        self.bounds[coord] = Some((lo, hi));
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(xi, b)| match b {
            Some((lo, hi)) => *xi >= *lo && *xi <= *hi,
            None => xi.is_finite(),
        })
    }

    /// Difference `a - b` with periodic coordinates wrapped to the nearest
    /// representative.
    pub fn diff(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            a.len(),
            a.iter().zip(b).zip(&self.periods).map(|((ai, bi), p)| {
                let mut d = ai - bi;
                if let Some(p) = p {
                    d -= (d / p).round() * p;
                }
                d
            }),
        )
    }

    /// Euclidean chart distance after periodic wrapping.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.diff(a, b).norm()
    }
}
