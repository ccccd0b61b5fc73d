//! Bohm potential and quantum drift from a grid density.
//!
//! With `q = (d^2 sqrt(n)/dx^2) / sqrt(n)` the Bohm potential is
//! `V_B = -eps^2 q` and the drift added to the Langevin equation is
//! `+eps^2 dq/dx`. For a Gaussian of variance `S` this drift is
//! `eps^2 x / (2 S^2)`: outward, working against the confinement.

use log::debug;

use crate::density::{interpolate, DensityField, GridSpec};
use crate::error::{Error, Result};

/// Density floor applied before any division.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Default last-resort bound on `|drift|`.
pub const DEFAULT_DRIFT_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOptions {
    pub density_floor: f64,
    pub drift_max: Option<f64>,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self {
            density_floor: DENSITY_FLOOR,
            drift_max: Some(DEFAULT_DRIFT_MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BohmDrift {
    grid: GridSpec,
    drift_values: Vec<f64>,
    epsilon: f64,
    clamped: usize,
}

impl BohmDrift {
    /// A zero drift field on `grid`.
    pub fn zero(grid: GridSpec) -> Self {
        Self {
            grid,
            drift_values: vec![0.0; grid.points()],
            epsilon: 0.0,
            clamped: 0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.drift_values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of grid nodes whose drift hit `drift_max`.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Linearly interpolated drift at `x`, and whether `x` fell outside the
    /// grid (in which case the nearest edge value is returned).
    #[inline]
    pub fn at(&self, x: f64) -> (f64, bool) {
        match interpolate(&self.grid, &self.drift_values, x) {
            Some(v) => (v, false),
            None if x < self.grid.x_min() => (self.drift_values[0], true),
            None => (*self.drift_values.last().unwrap(), true),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    Ok(())
}

/// Second derivative: central in the interior, second-order one-sided at
/// both ends.
pub fn second_derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let m = f.len();
    assert!(m >= 4, "second derivative needs at least 4 samples");
    let inv = 1.0 / (dx * dx);
    let mut out = vec![0.0; m];
    for j in 1..m - 1 {
        out[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * inv;
    }
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    out[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) * inv;
    out
}

/// First derivative: central in the interior, second-order one-sided at
/// both ends.
pub fn first_derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let m = f.len();
    assert!(m >= 3, "first derivative needs at least 3 samples");
    let inv = 0.5 / dx;
    let mut out = vec![0.0; m];
    for j in 1..m - 1 {
        out[j] = (f[j + 1] - f[j - 1]) * inv;
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    out[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) * inv;
    out
}

/// `q = D2[sqrt(n)] / max(sqrt(n), sqrt(floor))`, with `n` floored first.
pub fn quantum_curvature(n: &DensityField, density_floor: f64) -> Vec<f64> {
    let root_floor = density_floor.sqrt();
    let root: Vec<f64> = n.values().iter().map(|&v| v.max(density_floor).sqrt()).collect();
    let mut q = second_derivative(&root, n.grid().dx());
    for (qj, &r) in q.iter_mut().zip(&root) {
        *qj /= r.max(root_floor);
    }
    q
}

/// Samples of `V_B = -eps^2 D2[sqrt(n)] / sqrt(n)`.
pub fn bohm_potential_field(n: &DensityField, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    let e2 = epsilon * epsilon;
    Ok(quantum_curvature(n, DENSITY_FLOOR)
        .into_iter()
        .map(|q| -e2 * q)
        .collect())
}

/// Quantum drift `eps^2 D1[D2[sqrt(n)] / sqrt(n)]`.
pub fn quantum_drift(n: &DensityField, epsilon: f64, options: &DriftOptions) -> Result<BohmDrift> {
    check_epsilon(epsilon)?;
    let e2 = epsilon * epsilon;
    let q = quantum_curvature(n, options.density_floor);
    let mut drift = first_derivative(&q, n.grid().dx());
    let mut clamped = 0;
    for d in &mut drift {
        *d *= e2;
        if !d.is_finite() {
            *d = 0.0;
            clamped += 1;
        }
        if let Some(max) = options.drift_max {
            if d.abs() > max {
                *d = d.signum() * max;
                clamped += 1;
            }
        }
    }
    if clamped > 0 {
        debug!("quantum drift clamped at {clamped} grid nodes");
    }
    Ok(BohmDrift {
        grid: *n.grid(),
        drift_values: drift,
        epsilon,
        clamped,
    })
}

/// Closed-form drift `eps^2 x / (2 S^2)` for a Gaussian density of variance `S`.
pub fn gaussian_quantum_drift(variance: f64, epsilon: f64, x: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::invalid("variance", format!("must be positive, got {variance}")));
    }
    Ok(epsilon * epsilon * x / (2.0 * variance * variance))
}

/// Closed-form `V_B = eps^2 (1/(2S) - x^2/(4S^2))` for a Gaussian density.
pub fn gaussian_bohm_potential(variance: f64, epsilon: f64, x: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::invalid("variance", format!("must be positive, got {variance}")));
    }
    let s = variance;
    Ok(epsilon * epsilon * (0.5 / s - x * x / (4.0 * s * s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian_field(variance: f64, half_width: f64, points: usize) -> DensityField {
        let grid = GridSpec::symmetric(half_width, points).unwrap();
        let values = grid
            .nodes()
            .iter()
            .map(|x| (-x * x / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt())
            .collect();
        DensityField::from_values(grid, values, 0.0).unwrap()
    }

    fn interior(grid: &GridSpec, fraction: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..grid.points())
            .map(move |j| (j, grid.node(j)))
            .filter(move |&(_, x)| grid.inner_contains(x, fraction))
    }

    #[test]
    fn closed_forms() {
        assert_eq!(gaussian_quantum_drift(1.0, 2.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_quantum_drift(1.0, 2.0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(gaussian_quantum_drift(2.0, 2.0, 1.0).unwrap(), 0.5);
        assert!(gaussian_quantum_drift(0.0, 2.0, 1.0).is_err());
        assert!(gaussian_quantum_drift(-1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn classical_limit_is_zero() {
        let n = gaussian_field(1.0, 6.0, 256);
        assert!(bohm_potential_field(&n, 0.0).unwrap().iter().all(|v| *v == 0.0));
        let d = quantum_drift(&n, 0.0, &DriftOptions::default()).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_density_has_no_interior_potential() {
        let grid = GridSpec::symmetric(1.0, 64).unwrap();
        let n = DensityField::from_values(grid, vec![0.5; 64], 0.0).unwrap();
        let v = bohm_potential_field(&n, 3.0).unwrap();
        assert!(v[1..63].iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn gaussian_potential_matches_closed_form() {
        let s = 1.5;
        let n = gaussian_field(s, 7.0, 1024);
        let v = bohm_potential_field(&n, 2.0).unwrap();
        let grid = *n.grid();
        for (j, x) in interior(&grid, 0.8) {
            let exact = gaussian_bohm_potential(s, 2.0, x).unwrap();
            assert_abs_diff_eq!(v[j], exact, epsilon = 1e-2 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn drift_and_potential_gradient_agree() {
        let n = gaussian_field(1.0, 6.0, 512);
        let v = bohm_potential_field(&n, 1.5).unwrap();
        let from_potential: Vec<f64> = first_derivative(&v, n.grid().dx()).iter().map(|g| -g).collect();
        let d = quantum_drift(&n, 1.5, &DriftOptions::default()).unwrap();
        for (a, b) in d.values().iter().zip(&from_potential) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn drift_is_odd_for_even_density() {
        let n = gaussian_field(0.7, 5.0, 301);
        let d = quantum_drift(&n, 1.0, &DriftOptions::default()).unwrap();
        let m = d.values().len();
        for j in 0..m {
            assert_abs_diff_eq!(d.values()[j], -d.values()[m - 1 - j], epsilon = 1e-8 * (1.0 + d.values()[j].abs()));
        }
        assert!(d.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn clamp_is_counted() {
        let n = gaussian_field(0.01, 5.0, 512);
        let opts = DriftOptions {
            drift_max: Some(1.0),
            ..Default::default()
        };
        let d = quantum_drift(&n, 1.0, &opts).unwrap();
        assert!(d.clamped() > 0);
        assert!(d.values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn edge_extrapolation_is_flagged() {
        let n = gaussian_field(1.0, 4.0, 64);
        let d = quantum_drift(&n, 1.0, &DriftOptions::default()).unwrap();
        assert!(!d.at(0.3).1);
        let (v, outside) = d.at(10.0);
        assert!(outside);
        assert_eq!(v, *d.values().last().unwrap());
    }
}
