//! Periodic 1-D grids, sampled fields and exact spectral primitives.
//!
//! Every field lives on the torus `[-L, L)` sampled at `N` equispaced points
//! `x_i = -L + i·Δx`. Heat convolution, differentiation and translation are
//! applied as Fourier multipliers, so they are exact for the trigonometric
//! interpolant of the samples.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Periodic domain `[-L, L)` with `N` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain1D {
    half_length: f64,
    points: usize,
}

impl Default for Domain1D {
    fn default() -> Self {
        Self {
            half_length: 4.0,
            points: 1024,
        }
    }
}

impl Domain1D {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(invalid(format!("half length must be positive, got {half_length}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(invalid(format!(
                "point count must be a power of two >= 16, got {points}"
            )));
        }
        Ok(Self {
            half_length,
            points,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumber of DFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as isize;
        let j = j as isize;
        let signed = if j <= n / 2 { j } else { j - n };
        PI * signed as f64 / self.half_length
    }

    /// Index of the grid point nearest to `x` after periodic wrapping.
    pub fn nearest_index(&self, x: f64) -> usize {
        let p = ((self.wrap(x) + self.half_length) / self.dx()).round() as usize;
        p % self.points
    }

    /// Maps `x` into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.half_length;
        let y = (x + self.half_length).rem_euclid(period);
        y - self.half_length
    }

    /// Indices of grid points inside `[lo, hi]`, in increasing order.
    pub fn indices_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let dx = self.dx();
        let tol = 1e-9 * dx;
        let first = (((lo + self.half_length) / dx) - tol).ceil().max(0.0) as usize;
        let last = (((hi + self.half_length) / dx) + tol).floor();
        if last < 0.0 {
            return 0..0;
        }
        let last = (last as usize).min(self.points - 1);
        if first > last {
            0..0
        } else {
            first..last + 1
        }
    }

    /// Field `f(x)·χ(x)` where `χ` is a smooth cutoff equal to one on
    /// `[-L/4, L/4]` and vanishing outside `[-L/2, L/2]`.
    pub fn windowed(&self, f: impl Fn(f64) -> f64) -> GridField {
        let (inner, outer) = (0.25 * self.half_length, 0.5 * self.half_length);
        GridField::from_fn(*self, |x| f(x) * smooth_cutoff(x, inner, outer))
    }
}

/// C^∞ cutoff: one for `|x| <= inner`, zero for `|x| >= outer`.
pub fn smooth_cutoff(x: f64, inner: f64, outer: f64) -> f64 {
    let a = x.abs();
    if a <= inner {
        return 1.0;
    }
    if a >= outer {
        return 0.0;
    }
    let s = (outer - a) / (outer - inner);
    let bump = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    bump(s) / (bump(s) + bump(1.0 - s))
}

/// Heat kernel `h_v(z) = (2πv)^{-1/2} exp(-z²/(2v))`.
pub fn heat_kernel(v: f64, z: f64) -> f64 {
    (2.0 * PI * v).powf(-0.5) * (-z * z / (2.0 * v)).exp()
}

/// Samples of a function on a [`Domain1D`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    domain: Domain1D,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: Domain1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(invalid(format!(
                "field has {} samples, domain has {}",
                values.len(),
                domain.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { domain, values })
    }

    /// Wraps values that are already known to be finite.
    pub(crate) fn from_raw(domain: Domain1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn from_fn(domain: Domain1D, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..domain.len()).map(|i| f(domain.x(i))).collect();
        Self { domain, values }
    }

    pub fn constant(domain: Domain1D, c: f64) -> Self {
        Self {
            domain,
            values: vec![c; domain.len()],
        }
    }

    pub fn zeros(domain: Domain1D) -> Self {
        Self::constant(domain, 0.0)
    }

    /// Sampled heat kernel `h_v(x - center)` using the nearest periodic image.
    pub fn heat_kernel(domain: Domain1D, v: f64, center: f64) -> Self {
        Self::from_fn(domain, |x| heat_kernel(v, domain.wrap(x - center)))
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_norm_in(&self, lo: f64, hi: f64) -> f64 {
        self.domain
            .indices_in(lo, hi)
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rectangle-rule integral, exact for trigonometric polynomials.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.dx()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.domain.dx()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_domain(other)?;
        Ok(Self::from_raw(
            self.domain,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_same_domain(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain {
            return Err(invalid("fields live on different domains"));
        }
        Ok(())
    }

    /// Sup distance between two fields on a shared domain.
    pub fn sup_distance(&self, other: &GridField) -> Result<f64> {
        self.check_same_domain(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `x ↦ f(-x)`; grid index `i` maps to `N - i` modulo `N`.
    pub fn reflect(&self) -> Self {
        let n = self.len();
        Self::from_raw(
            self.domain,
            (0..n).map(|i| self.values[(n - i) % n]).collect(),
        )
    }

    /// `x ↦ f(x - k·Δx)`.
    pub fn roll(&self, k: isize) -> Self {
        let n = self.len() as isize;
        Self::from_raw(
            self.domain,
            (0..n)
                .map(|i| self.values[(i - k).rem_euclid(n) as usize])
                .collect(),
        )
    }

    /// Periodic cubic (Catmull–Rom) interpolation at an arbitrary point.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.len() as isize;
        let p = (self.domain.wrap(x) + self.domain.half_length()) / self.domain.dx();
        let i = p.floor() as isize;
        let s = p - i as f64;
        let at = |k: isize| self.values[(i + k).rem_euclid(n) as usize];
        let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        ((a * s + b) * s + c) * s + p1
    }

    /// Largest absolute first divided difference, a Lipschitz bound for the
    /// piecewise-linear interpolant.
    pub fn max_slope(&self) -> f64 {
        let n = self.len();
        let dx = self.domain.dx();
        (0..n).fold(0.0, |m, i| {
            m.max((self.values[(i + 1) % n] - self.values[i]).abs() / dx)
        })
    }
}

impl Add for &GridField {
    type Output = GridField;
    fn add(self, rhs: &GridField) -> GridField {
        self.zip_with(rhs, |a, b| a + b)
            .expect("adding fields on different domains")
    }
}

impl Sub for &GridField {
    type Output = GridField;
    fn sub(self, rhs: &GridField) -> GridField {
        self.zip_with(rhs, |a, b| a - b)
            .expect("subtracting fields on different domains")
    }
}

impl Mul<f64> for &GridField {
    type Output = GridField;
    fn mul(self, rhs: f64) -> GridField {
        self.map(|v| v * rhs)
    }
}

/// Frames `u(t_k, ·)` on one domain at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeField {
    times: Vec<f64>,
    frames: Vec<GridField>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, frames: Vec<GridField>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(invalid(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("frame times must be strictly increasing"));
        }
        let domain = *frames[0].domain();
        if frames.iter().any(|f| *f.domain() != domain) {
            return Err(invalid("frames live on different domains"));
        }
        Ok(Self { times, frames })
    }

    /// Same field at every listed time.
    pub fn steady(field: GridField, times: Vec<f64>) -> Result<Self> {
        let frames = vec![field; times.len()];
        Self::new(times, frames)
    }

    pub fn domain(&self) -> &Domain1D {
        self.frames[0].domain()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[GridField] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &GridField {
        self.frames.last().expect("space-time field has frames")
    }

    /// Linear interpolation in time, constant extrapolation outside the range.
    pub fn at_time(&self, t: f64) -> GridField {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.frames[0].clone();
        }
        if k == self.times.len() {
            return self.last().clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.frames[k - 1]
            .zip_with(&self.frames[k], |a, b| (1.0 - w) * a + w * b)
            .expect("frames share a domain")
    }

    /// Value at `(t, x)`: linear in time, cubic in space.
    pub fn interpolate(&self, t: f64, x: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.frames[0].interpolate(x);
        }
        if k == self.times.len() {
            return self.last().interpolate(x);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        (1.0 - w) * self.frames[k - 1].interpolate(x) + w * self.frames[k].interpolate(x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.frames.iter().fold(0.0, |m, f| m.max(f.sup_norm()))
    }

    pub fn map_frames(&self, f: impl Fn(&GridField) -> GridField) -> Self {
        Self {
            times: self.times.clone(),
            frames: self.frames.iter().map(f).collect(),
        }
    }

    pub fn try_map_frames(&self, f: impl Fn(&GridField) -> Result<GridField>) -> Result<Self> {
        Ok(Self {
            times: self.times.clone(),
            frames: self.frames.iter().map(f).collect::<Result<_>>()?,
        })
    }

    /// Largest pointwise distance over all shared frames.
    pub fn sup_distance(&self, other: &SpaceTimeField) -> Result<f64> {
        if self.times != other.times {
            return Err(invalid("space-time fields have different frame times"));
        }
        self.frames
            .iter()
            .zip(&other.frames)
            .try_fold(0.0_f64, |m, (a, b)| Ok(m.max(a.sup_distance(b)?)))
    }
}

/// Applies a Fourier multiplier `mult(k, is_nyquist)` and returns the real part.
pub fn apply_multiplier(
    f: &GridField,
    mult: impl Fn(f64, bool) -> Complex64,
) -> GridField {
    let domain = *f.domain();
    let n = domain.len();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    fwd.process(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= mult(domain.wavenumber(j), j == n / 2);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    GridField::from_raw(domain, buf.iter().map(|c| c.re * scale).collect())
}

/// Circular convolution `Δx·Σ_j f[i-j]·kernel[j]` where `kernel[j]` samples
/// the kernel at signed offset `j·Δx` (offsets past `N/2` are negative).
pub fn circular_convolve(f: &GridField, kernel: &[f64]) -> Result<GridField> {
    let domain = *f.domain();
    let n = domain.len();
    if kernel.len() != n {
        return Err(invalid("kernel length does not match the domain"));
    }
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    let mut a: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut b: Vec<Complex64> = kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = domain.dx() / n as f64;
    Ok(GridField::from_raw(
        domain,
        a.iter().map(|c| c.re * scale).collect(),
    ))
}

/// `h_v ⋆ f` through the exact periodic heat multiplier `exp(-k²v/2)`.
pub fn heat_convolve(f: &GridField, v: f64) -> Result<GridField> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(invalid(format!("heat variance must be >= 0, got {v}")));
    }
    if v == 0.0 {
        return Ok(f.clone());
    }
    Ok(apply_multiplier(f, |k, _| {
        Complex64::new((-0.5 * k * k * v).exp(), 0.0)
    }))
}

/// Periodic spectral derivative of order 1, 2 or 3. The Nyquist mode is
/// dropped for odd orders so the result stays real.
pub fn spectral_derivative(f: &GridField, order: u32) -> Result<GridField> {
    if !(1..=3).contains(&order) {
        return Err(invalid(format!("unsupported derivative order {order}")));
    }
    Ok(apply_multiplier(f, |k, nyquist| {
        if nyquist && order % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k).powu(order)
    }))
}

/// `∂_v (h_v ⋆ f) = ½ ∂_x² (h_v ⋆ f)`.
pub fn dv_heat_convolve(f: &GridField, v: f64) -> Result<GridField> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("heat variance must be > 0, got {v}")));
    }
    Ok(apply_multiplier(f, |k, _| {
        Complex64::new(-0.5 * k * k * (-0.5 * k * k * v).exp(), 0.0)
    }))
}

/// `∂_v^order (h_v ⋆ f)` for `order` in {1, 2}.
pub fn dv_heat_convolve_order(f: &GridField, v: f64, order: u32) -> Result<GridField> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("heat variance must be > 0, got {v}")));
    }
    if !(1..=2).contains(&order) {
        return Err(invalid(format!("unsupported thermic order {order}")));
    }
    Ok(apply_multiplier(f, |k, _| {
        let q = -0.5 * k * k;
        Complex64::new(q.powi(order as i32) * (q * v).exp(), 0.0)
    }))
}

/// `h_v ⋆ f` evaluated at `x + shift`, both applied spectrally.
pub fn heat_convolve_shifted(f: &GridField, v: f64, shift: f64) -> Result<GridField> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(invalid(format!("heat variance must be >= 0, got {v}")));
    }
    if !shift.is_finite() {
        return Err(invalid("non-finite shift"));
    }
    Ok(apply_multiplier(f, |k, nyquist| {
        let damp = (-0.5 * k * k * v).exp();
        if nyquist {
            Complex64::new(damp * (k * shift).cos(), 0.0)
        } else {
            Complex64::from_polar(damp, k * shift)
        }
    }))
}
