//! Statistics over trajectory archives.

pub mod autocorr;
pub mod confidence;
pub mod fits;
mod linfit;
pub mod moments;
pub mod relaxation;
pub mod residency;
pub mod spectrum;

pub use autocorr::{autocorrelation, autocorrelation_over_origins, Autocorrelation};
pub use confidence::variance_confidence_interval;
pub use fits::{
    fit_boltzmann_form, fit_cubic_force, fit_exponential, histogram_and_boltzmann_fit, BoltzmannFit, BoltzmannForm,
    CubicForceFit, ExponentialFit, Histogram,
};
pub use moments::{ensemble_moments, Moments};
pub use relaxation::{settling_time, step_relaxation_fit, RelaxationFit};
pub use residency::{residency_times, HysteresisDetector, ResidencyRecord, ResidencyTracker, Well};
pub use spectrum::{compute_psd, fit_lorentzian, LorentzianFit, SpectrumEstimate};
