//! External potentials and step-like stiffness protocols.
//!
//! All quantities are nondimensional (k_B T = gamma = 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant stiffness schedule.
///
/// `kappa_at(t)` returns the stiffness of the latest breakpoint with time
/// `<= t`. For `t < 0` the `initial` stiffness applies, which is the stiffness
/// the system was equilibrated in before the protocol started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessProtocol {
    breakpoints: Vec<(f64, f64)>,
    initial: f64,
}

impl StiffnessProtocol {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(t0, k0)) = breakpoints.first() else {
            return Err(Error::invalid("breakpoints", "protocol needs at least one breakpoint"));
        };
        if t0 != 0.0 {
            return Err(Error::invalid("breakpoints", format!("first breakpoint must be at t = 0, got {t0}")));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(
                    "breakpoints",
                    format!("times must be strictly increasing ({} then {})", w[0].0, w[1].0),
                ));
            }
        }
        for &(t, k) in &breakpoints {
            if !(k > 0.0) || !k.is_finite() || !t.is_finite() {
                return Err(Error::invalid("kappa", format!("stiffness must be positive and finite, got {k} at t = {t}")));
            }
        }
        Ok(Self {
            breakpoints,
            initial: k0,
        })
    }

    pub fn constant(kappa: f64) -> Result<Self> {
        Self::new(vec![(0.0, kappa)])
    }

    /// Equilibrated at `kappa_initial` for `t < t_step`, `kappa_final` after.
    pub fn step(kappa_initial: f64, kappa_final: f64, t_step: f64) -> Result<Self> {
        if !(t_step >= 0.0) {
            return Err(Error::invalid("t_step", format!("must be >= 0, got {t_step}")));
        }
        if !(kappa_initial > 0.0) {
            return Err(Error::invalid("kappa_initial", format!("must be positive, got {kappa_initial}")));
        }
        if kappa_initial == kappa_final {
            return Self::constant(kappa_final);
        }
        if t_step == 0.0 {
            let mut p = Self::constant(kappa_final)?;
            p.initial = kappa_initial;
            Ok(p)
        } else {
            Self::new(vec![(0.0, kappa_initial), (t_step, kappa_final)])
        }
    }

    pub fn kappa_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.initial;
        }
        // Last breakpoint with time <= t.
        let idx = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        self.breakpoints[idx.saturating_sub(1)].1
    }

    /// Stiffness in effect before the protocol starts.
    pub fn initial_kappa(&self) -> f64 {
        self.initial
    }

    pub fn final_kappa(&self) -> f64 {
        self.breakpoints.last().map(|b| b.1).unwrap_or(self.initial)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Breakpoint times strictly inside `(t0, t1)`.
    pub fn switch_times_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints
            .iter()
            .map(|b| b.0)
            .filter(move |&t| t > t0 && t < t1)
    }
}

/// Anything that supplies a (possibly negative) harmonic stiffness over time.
pub trait StiffnessSchedule: Sync {
    fn stiffness(&self, t: f64) -> f64;
}

impl StiffnessSchedule for StiffnessProtocol {
    fn stiffness(&self, t: f64) -> f64 {
        self.kappa_at(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    /// `alpha x^2 + beta x^4`; `alpha < 0` gives a double well.
    Quartic { alpha: f64, beta: f64 },
    /// `kappa(t) x^2 / 2`.
    Harmonic { protocol: StiffnessProtocol },
}

impl PotentialSpec {
    pub fn quartic(alpha: f64, beta: f64) -> Result<Self> {
        let spec = PotentialSpec::Quartic { alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn harmonic(kappa: f64) -> Result<Self> {
        Ok(PotentialSpec::Harmonic {
            protocol: StiffnessProtocol::constant(kappa)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Quartic { alpha, beta } => {
                if !alpha.is_finite() {
                    return Err(Error::invalid("alpha", format!("must be finite, got {alpha}")));
                }
                if !(*beta > 0.0) || !beta.is_finite() {
                    return Err(Error::invalid("beta", format!("quartic coefficient must be positive for confinement, got {beta}")));
                }
                Ok(())
            }
            // The protocol constructor already enforces positive stiffness.
            PotentialSpec::Harmonic { .. } => Ok(()),
        }
    }

    /// Potential energy at `x` and time `t`.
    pub fn potential(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Quartic { alpha, beta } => {
                let x2 = x * x;
                alpha * x2 + beta * x2 * x2
            }
            PotentialSpec::Harmonic { protocol } => 0.5 * protocol.kappa_at(t) * x * x,
        }
    }

    /// External force `-dV/dx`.
    #[inline]
    pub fn force(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Quartic { alpha, beta } => -(2.0 * alpha * x + 4.0 * beta * x * x * x),
            PotentialSpec::Harmonic { protocol } => -protocol.kappa_at(t) * x,
        }
    }

    /// Well minima `+-sqrt(-alpha / 2 beta)` of a double-well quartic.
    pub fn well_minimum(&self) -> Option<f64> {
        match *self {
            PotentialSpec::Quartic { alpha, beta } if alpha < 0.0 => Some((-alpha / (2.0 * beta)).sqrt()),
            _ => None,
        }
    }

    /// Curvature `V''(0)`, the stiffness governing small oscillations about
    /// the origin.
    pub fn curvature_at_origin(&self, t: f64) -> f64 {
        match self {
            PotentialSpec::Quartic { alpha, .. } => 2.0 * alpha,
            PotentialSpec::Harmonic { protocol } => protocol.kappa_at(t),
        }
    }

    pub fn is_confining(&self) -> bool {
        self.validate().is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        let single = PotentialSpec::quartic(0.6, 0.2).unwrap();
        assert_abs_diff_eq!(single.potential(1.0, 0.0), 0.8, epsilon = 1e-15);
        assert_eq!(single.potential(0.0, 0.0), 0.0);
        assert_eq!(single.force(0.0, 0.0), 0.0);

        let double = PotentialSpec::quartic(-1.0, 0.1).unwrap();
        let xm = 5.0_f64.sqrt();
        assert_abs_diff_eq!(double.potential(xm, 0.0), -2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(double.force(xm, 0.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(double.well_minimum().unwrap(), xm, epsilon = 1e-15);
        // Restoring on both sides of the minimum.
        assert!(double.force(xm + 0.1, 0.0) < 0.0);
        assert!(double.force(xm - 0.1, 0.0) > 0.0);
        assert_eq!(single.well_minimum(), None);
    }

    #[test]
    fn harmonic_values() {
        let h = PotentialSpec::harmonic(1.0).unwrap();
        assert_eq!(h.force(2.0, 0.0), -2.0);
        assert_eq!(h.potential(0.0, 3.0), 0.0);
        assert_eq!(h.potential(2.0, 0.0), 2.0);
    }

    #[test]
    fn rejects_nonconfining() {
        assert!(PotentialSpec::quartic(1.0, 0.0).is_err());
        assert!(PotentialSpec::quartic(-1.0, -0.1).is_err());
        assert!(PotentialSpec::harmonic(0.0).is_err());
        assert!(PotentialSpec::harmonic(-1.0).is_err());
    }

    #[test]
    fn protocol_is_piecewise_constant() {
        let p = StiffnessProtocol::new(vec![(0.0, 2.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        assert_eq!(p.kappa_at(0.0), 2.0);
        assert_eq!(p.kappa_at(0.999), 2.0);
        assert_eq!(p.kappa_at(1.0), 0.5);
        assert_eq!(p.kappa_at(2.5), 0.5);
        assert_eq!(p.kappa_at(100.0), 1.0);
        assert_eq!(p.kappa_at(-1.0), 2.0);
        assert_eq!(p.switch_times_in(0.5, 3.5).collect::<Vec<_>>(), vec![1.0, 3.0]);
    }

    #[test]
    fn protocol_invariants() {
        assert!(StiffnessProtocol::new(vec![]).is_err());
        assert!(StiffnessProtocol::new(vec![(0.1, 1.0)]).is_err());
        assert!(StiffnessProtocol::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(StiffnessProtocol::new(vec![(0.0, 1.0), (1.0, -2.0)]).is_err());
    }

    #[test]
    fn step_at_zero_keeps_initial_equilibrium() {
        let p = StiffnessProtocol::step(0.5, 2.0, 0.0).unwrap();
        assert_eq!(p.kappa_at(-1e-12), 0.5);
        assert_eq!(p.kappa_at(0.0), 2.0);
        assert_eq!(p.initial_kappa(), 0.5);
        assert_eq!(p.final_kappa(), 2.0);
    }

    proptest! {
        #[test]
        fn force_is_negative_gradient(
            alpha in -2.0f64..2.0,
            beta in 0.01f64..1.0,
            x in -4.0f64..4.0,
        ) {
            let spec = PotentialSpec::quartic(alpha, beta).unwrap();
            let d = 1e-4;
            let fd = -(spec.potential(x + d, 0.0) - spec.potential(x - d, 0.0)) / (2.0 * d);
            // Central difference error is 4 beta x d^2 plus cancellation noise.
            let tol = 4.0 * beta * x.abs() * d * d + 1e-9 * (1.0 + spec.potential(x, 0.0).abs()) / d;
            prop_assert!((spec.force(x, 0.0) - fd).abs() <= tol.max(1e-8));
        }

        #[test]
        fn harmonic_force_matches_gradient(kappa in 0.05f64..5.0, x in -5.0f64..5.0) {
            let spec = PotentialSpec::harmonic(kappa).unwrap();
            let d = 1e-4;
            let fd = -(spec.potential(x + d, 0.0) - spec.potential(x - d, 0.0)) / (2.0 * d);
            prop_assert!((spec.force(x, 0.0) - fd).abs() < 1e-8);
        }
    }
}
