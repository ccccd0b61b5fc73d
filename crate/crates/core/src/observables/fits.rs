//! Distribution fits: exponential dwell times, quartic-Boltzmann
//! histograms and odd-cubic force profiles.

use serde::{Deserialize, Serialize};

use super::linfit::weighted_least_squares;
use crate::error::{Error, Result};
use crate::special::kolmogorov_survival;

pub const MIN_EXPONENTIAL_SAMPLES: usize = 20;
pub const MIN_HISTOGRAM_SAMPLES: usize = 100;
pub const MIN_FORCE_SNAPSHOTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Maximum-likelihood rate `1 / mean`.
    pub lambda: f64,
    pub samples: usize,
    pub ks_statistic: f64,
    /// Asymptotic Kolmogorov p-value. The rate is estimated from the same
    /// data, so the test is conservative.
    pub ks_p_value: f64,
    /// All samples identical: no exponential can describe them.
    pub degenerate: bool,
}

impl ExponentialFit {
    pub fn passes(&self, significance: f64) -> bool {
        !self.degenerate && self.ks_p_value >= significance
    }
}

pub fn fit_exponential(durations: &[f64]) -> Result<ExponentialFit> {
    let n = durations.len();
    if n < MIN_EXPONENTIAL_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs at least {MIN_EXPONENTIAL_SAMPLES} durations, got {n}"
        )));
    }
    if let Some(bad) = durations.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::invalid("durations", format!("must be positive, got {bad}")));
    }
    let mean = durations.iter().sum::<f64>() / n as f64;
    let lambda = 1.0 / mean;
    let mut sorted = durations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let degenerate = sorted[0] == sorted[n - 1];

    let nf = n as f64;
    let ks_statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = -(-lambda * x).exp_m1();
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let ks_p_value = if degenerate {
        0.0
    } else {
        // Stephens' finite-sample correction of the Kolmogorov argument.
        let rn = nf.sqrt();
        kolmogorov_survival((rn + 0.12 + 0.11 / rn) * ks_statistic)
    };
    Ok(ExponentialFit {
        lambda,
        samples: n,
        ks_statistic,
        ks_p_value,
        degenerate,
    })
}

/// Histogram normalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(data: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bins", "need at least one bin"));
        }
        if data.is_empty() {
            return Err(Error::InsufficientData("histogram of no samples".into()));
        }
        let (lo, hi) = range.unwrap_or_else(|| {
            data.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
        });
        if !(hi > lo) {
            return Err(Error::InsufficientData("all samples fall in a single bin".into()));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        let mut inside = 0u64;
        for &x in data {
            if x < lo || x > hi {
                continue;
            }
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
            inside += 1;
        }
        let scale = 1.0 / (inside.max(1) as f64 * width);
        let density = counts.iter().map(|&c| c as f64 * scale).collect();
        Ok(Self { edges, counts, density })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoltzmannForm {
    /// `p1 exp(p2 x^2 + p3 x^4)`
    Quartic,
    /// `p1 exp(p2 x^2)`, i.e. `p3 = 0`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannFit {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Weighted residual sum of squares on log-density.
    pub residual: f64,
}

impl BoltzmannFit {
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.p1 * (self.p2 * x2 + self.p3 * x2 * x2).exp()
    }
}

/// Weighted least squares of `ln(density)` on nonempty bins; a bin with
/// `c` counts has log-variance about `1/c`, so it gets weight `c`.
pub fn fit_boltzmann_form(hist: &Histogram, form: BoltzmannForm) -> Result<BoltzmannFit> {
    let centers = hist.centers();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for ((&x, &c), &d) in centers.iter().zip(&hist.counts).zip(&hist.density) {
        if c == 0 {
            continue;
        }
        let x2 = x * x;
        rows.push(match form {
            BoltzmannForm::Quartic => vec![1.0, x2, x2 * x2],
            BoltzmannForm::Gaussian => vec![1.0, x2],
        });
        y.push(d.ln());
        w.push(c as f64);
    }
    let needed = if form == BoltzmannForm::Quartic { 3 } else { 2 };
    if rows.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} nonempty bins for a {needed}-parameter fit",
            rows.len()
        )));
    }
    let (beta, residual) = weighted_least_squares(&rows, &y, &w)?;
    Ok(BoltzmannFit {
        p1: beta[0].exp(),
        p2: beta[1],
        p3: beta.get(2).copied().unwrap_or(0.0),
        residual,
    })
}

/// Normalized histogram and quartic-Boltzmann fit of a position sample.
pub fn histogram_and_boltzmann_fit(positions: &[f64], bins: usize) -> Result<(Histogram, BoltzmannFit)> {
    if positions.len() < MIN_HISTOGRAM_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "histogram fit needs at least {MIN_HISTOGRAM_SAMPLES} samples, got {}",
            positions.len()
        )));
    }
    let hist = Histogram::new(positions, bins, None)?;
    if hist.counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InsufficientData("all mass in one bin".into()));
    }
    let fit = fit_boltzmann_form(&hist, BoltzmannForm::Quartic)?;
    Ok((hist, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicForceFit {
    pub c1: f64,
    pub c3: f64,
    /// Root-mean-square residual of the fit.
    pub residual_rms: f64,
}

/// Least squares of `drift(x) ~ c1 x + c3 x^3`. `snapshots` is the number
/// of fields averaged into `drift`.
pub fn fit_cubic_force(xs: &[f64], drift: &[f64], snapshots: usize) -> Result<CubicForceFit> {
    if snapshots < MIN_FORCE_SNAPSHOTS {
        return Err(Error::InsufficientData(format!(
            "force fit needs a field averaged over at least {MIN_FORCE_SNAPSHOTS} snapshots, got {snapshots}"
        )));
    }
    if xs.len() != drift.len() {
        return Err(Error::TimeBaseMismatch(format!("{} positions for {} drift samples", xs.len(), drift.len())));
    }
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, x * x * x]).collect();
    let (beta, rss) = weighted_least_squares(&rows, drift, &vec![1.0; xs.len()])?;
    Ok(CubicForceFit {
        c1: beta[0],
        c3: beta[1],
        residual_rms: (rss / xs.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, Stream};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_rate_and_ks() {
        let rng = CounterRng::new(2);
        let mut s = rng.stream(Stream::Synthetic, 0);
        let x: Vec<f64> = (0..10_000).map(|_| s.exponential(0.5)).collect();
        let fit = fit_exponential(&x).unwrap();
        assert!((fit.lambda - 0.5).abs() < 0.03 * 0.5);
        assert!(fit.passes(0.01));
    }

    #[test]
    fn degenerate_and_small_inputs() {
        let fit = fit_exponential(&[2.0; 50]).unwrap();
        assert!(fit.degenerate);
        assert!(!fit.passes(0.01));
        assert!(fit_exponential(&[1.0; 19]).is_err());
        let mut bad = vec![1.0; 30];
        bad[3] = 0.0;
        assert!(fit_exponential(&bad).is_err());
    }

    #[test]
    fn uniform_is_rejected_as_exponential() {
        let x: Vec<f64> = (1..=2000).map(|i| i as f64 / 2000.0).collect();
        assert!(!fit_exponential(&x).unwrap().passes(0.01));
    }

    #[test]
    fn histogram_normalization() {
        let rng = CounterRng::new(4);
        let x: Vec<f64> = (0..50_000u64).map(|i| rng.normal(Stream::Synthetic, i, 0)).collect();
        let h = Histogram::new(&x, 40, None).unwrap();
        let area: f64 = h.density.iter().sum::<f64>() * h.bin_width();
        assert_abs_diff_eq!(area, 1.0, epsilon = 1e-12);
        let (_, fit) = histogram_and_boltzmann_fit(&x, 40).unwrap();
        assert_abs_diff_eq!(fit.p2, -0.5, epsilon = 0.05);
        assert_abs_diff_eq!(fit.p3, 0.0, epsilon = 0.01);
    }

    #[test]
    fn histogram_errors() {
        assert!(histogram_and_boltzmann_fit(&[1.0; 50], 10).is_err());
        assert!(histogram_and_boltzmann_fit(&[1.0; 500], 10).is_err());
    }

    #[test]
    fn boltzmann_fit_exact_on_noiseless_density() {
        let edges: Vec<f64> = (0..=60).map(|k| -3.0 + 0.1 * k as f64).collect();
        let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let density: Vec<f64> = centers.iter().map(|x| 0.4 * (-0.6 * x * x - 0.2 * x.powi(4)).exp()).collect();
        let hist = Histogram {
            edges,
            counts: vec![1000; 60],
            density,
        };
        let fit = fit_boltzmann_form(&hist, BoltzmannForm::Quartic).unwrap();
        assert_abs_diff_eq!(fit.p1, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.p2, -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.p3, -0.2, epsilon = 1e-12);
        let gauss = fit_boltzmann_form(&hist, BoltzmannForm::Gaussian).unwrap();
        assert_eq!(gauss.p3, 0.0);
    }

    #[test]
    fn cubic_force() {
        let xs: Vec<f64> = (0..81).map(|j| -4.0 + 0.1 * j as f64).collect();
        // Gaussian Bohm drift eps^2 x / (2 S^2) with eps = 2, S = 1.5.
        let drift: Vec<f64> = xs.iter().map(|x| 4.0 * x / (2.0 * 2.25)).collect();
        let fit = fit_cubic_force(&xs, &drift, 20).unwrap();
        assert_abs_diff_eq!(fit.c1, 4.0 / 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.c3, 0.0, epsilon = 1e-12);
        let zero = fit_cubic_force(&xs, &vec![0.0; 81], 20).unwrap();
        assert_eq!((zero.c1, zero.c3), (0.0, 0.0));
        assert!(fit_cubic_force(&xs, &drift, 5).is_err());
    }
}
