//! Gaussian-kernel density reconstruction on a uniform grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default kernel standard deviation for ensembles of a few thousand particles.
pub const DEFAULT_KERNEL_WIDTH: f64 = 0.8;
/// Kernels are truncated at this many standard deviations.
pub const KERNEL_CUTOFF: f64 = 5.0;
pub const MIN_GRID_POINTS: usize = 16;

const DEPOSIT_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("grid", format!("need finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if points < MIN_GRID_POINTS {
            return Err(Error::invalid("grid_points", format!("need at least {MIN_GRID_POINTS} points, got {points}")));
        }
        Ok(Self { x_min, x_max, points })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Whether `x` lies in the central `fraction` of the grid.
    pub fn inner_contains(&self, x: f64, fraction: f64) -> bool {
        let centre = 0.5 * (self.x_min + self.x_max);
        let half = 0.5 * fraction * (self.x_max - self.x_min);
        (x - centre).abs() <= half
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self {
            x_min: self.x_min + shift,
            x_max: self.x_max + shift,
            points: self.points,
        }
    }
}

/// How the simulation chooses the density grid at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridPolicy {
    Fixed(GridSpec),
    /// `[-L, L]` with `L = max|x| + margin * h`, rebuilt only once some
    /// particle leaves the inner `regrid_fraction` of the current grid.
    Auto {
        points: usize,
        margin: f64,
        regrid_fraction: f64,
    },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto {
            points: 512,
            margin: 6.0,
            regrid_fraction: 0.9,
        }
    }
}

impl GridPolicy {
    /// Returns the grid to use for `positions`, reusing `current` when the
    /// policy allows it.
    pub fn grid_for(&self, positions: &[f64], kernel_width: f64, current: Option<&GridSpec>) -> Result<GridSpec> {
        match *self {
            GridPolicy::Fixed(grid) => Ok(grid),
            GridPolicy::Auto {
                points,
                margin,
                regrid_fraction,
            } => {
                if let Some(g) = current {
                    if positions.iter().all(|&x| g.inner_contains(x, regrid_fraction)) {
                        return Ok(*g);
                    }
                }
                let reach = positions.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
                GridSpec::symmetric(reach + margin * kernel_width, points)
            }
        }
    }
}

/// Grid-sampled probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
    kernel_width: f64,
}

impl DensityField {
    /// Wraps precomputed samples, e.g. an analytic density.
    pub fn from_values(grid: GridSpec, values: Vec<f64>, kernel_width: f64) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::invalid(
                "values",
                format!("expected {} samples, got {}", grid.points(), values.len()),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("values", "density samples must be finite and nonnegative"));
        }
        Ok(Self {
            grid,
            values,
            kernel_width,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    /// Trapezoidal integral of `f(x) n(x)`.
    pub fn integrate_with(&self, f: impl Fn(f64) -> f64) -> f64 {
        let dx = self.grid.dx();
        let last = self.values.len() - 1;
        self.values
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                w * f(self.grid.node(j)) * n
            })
            .sum::<f64>()
            * dx
    }

    pub fn integral(&self) -> f64 {
        self.integrate_with(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.integrate_with(|x| x) / self.integral()
    }

    /// Second central moment of the field.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate_with(|x| (x - m) * (x - m)) / self.integral()
    }

    /// Linear interpolation of the field; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.values, x).unwrap_or(0.0)
    }
}

/// Linear interpolation on a uniform grid. `None` outside `[x_min, x_max]`.
pub(crate) fn interpolate(grid: &GridSpec, values: &[f64], x: f64) -> Option<f64> {
    if !grid.contains(x) {
        return None;
    }
    let s = (x - grid.x_min()) / grid.dx();
    let j = (s.floor() as usize).min(grid.points() - 2);
    let w = s - j as f64;
    Some(values[j] * (1.0 - w) + values[j + 1] * w)
}

/// Kernel density estimate `n(x_j) = (1/N) sum_i K_h(x_j - x_i)`.
///
/// Each kernel is truncated at `KERNEL_CUTOFF * h` and deposited with an exact
/// multiplicative recurrence. Particles are deposited in fixed-size chunks
/// whose partial grids are summed in chunk order, so the result is
/// bit-identical for any number of worker threads.
pub fn estimate_density(positions: &[f64], grid: &GridSpec, kernel_width: f64) -> Result<DensityField> {
    if positions.is_empty() {
        return Err(Error::InsufficientData("density estimate needs at least one particle".into()));
    }
    if !(kernel_width > 0.0) || !kernel_width.is_finite() {
        return Err(Error::invalid("kernel_width", format!("must be positive, got {kernel_width}")));
    }

    let m = grid.points();
    let partials: Vec<Vec<f64>> = positions
        .par_chunks(DEPOSIT_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; m];
            for &x in chunk {
                deposit(&mut acc, grid, x, kernel_width);
            }
            acc
        })
        .collect();

    let mut values = vec![0.0; m];
    for partial in &partials {
        for (v, p) in values.iter_mut().zip(partial) {
            *v += p;
        }
    }
    let norm = 1.0 / (positions.len() as f64 * kernel_width * (2.0 * std::f64::consts::PI).sqrt());
    values.iter_mut().for_each(|v| *v *= norm);

    Ok(DensityField {
        grid: *grid,
        values,
        kernel_width,
    })
}

fn deposit(acc: &mut [f64], grid: &GridSpec, x: f64, h: f64) {
    let dx = grid.dx();
    let lo = ((x - KERNEL_CUTOFF * h - grid.x_min()) / dx).ceil();
    let hi = ((x + KERNEL_CUTOFF * h - grid.x_min()) / dx).floor();
    if hi < 0.0 || lo > (grid.points() - 1) as f64 {
        return;
    }
    let lo = lo.max(0.0) as usize;
    let hi = (hi as usize).min(grid.points() - 1);
    if lo > hi {
        return;
    }
    // exp(-u_j^2/2) with u_j = (x_j - x)/h: successive ratios are
    // exp(-(u_j d + d^2/2)), which themselves shrink by exp(-d^2).
    let d = dx / h;
    let u0 = (grid.node(lo) - x) / h;
    let mut g = (-0.5 * u0 * u0).exp();
    let mut ratio = (-(u0 * d + 0.5 * d * d)).exp();
    let shrink = (-d * d).exp();
    for v in &mut acc[lo..=hi] {
        *v += g;
        g *= ratio;
        ratio *= shrink;
    }
}
