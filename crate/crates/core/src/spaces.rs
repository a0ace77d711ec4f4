//! Hölder and thermic Besov norm estimators on sampled fields.
//!
//! Besov norms use the heat-semigroup characterization
//! `sup_v v^{k-α/2} ‖∂_v^k h_v ⋆ f‖_∞` over a geometric variance grid, plus a
//! low-frequency term `‖h_1 ⋆ f‖_∞` standing in for a smooth Fourier cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dv_heat_convolve_order, heat_convolve, Domain1D, GridField};

/// Closed sub-interval `[lo, hi]` of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("bad window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// The whole periodic domain.
    pub fn full(domain: &Domain1D) -> Self {
        let l = domain.half_length();
        Self {
            lo: -l,
            hi: l - domain.dx(),
        }
    }

    /// `[-L/2 + margin, L/2 - margin]`, the region where windowed data live.
    pub fn interior(domain: &Domain1D, margin: f64) -> Result<Self> {
        let h = 0.5 * domain.half_length();
        Self::new(-h + margin, h - margin)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn check_inside(&self, domain: &Domain1D) -> Result<()> {
        let l = domain.half_length();
        if self.lo < -l - 1e-12 || self.hi > l + 1e-12 {
            return Err(invalid(format!(
                "window [{}, {}] leaves the domain [-{l}, {l})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Sup,
    /// Homogeneous seminorm `[f]_γ`.
    Holder { gamma: f64 },
    /// `[f]_γ + ‖f‖_∞`.
    HolderBounded { gamma: f64 },
    Besov {
        alpha: f64,
        order: u32,
        homogeneous: f64,
        low_frequency: f64,
    },
}

/// Grid size behind an estimate: point count plus the scan extent (pair
/// radius in points for Hölder, variance-grid length for Besov).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub points: usize,
    pub scan: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub kind: NormKind,
    pub window: Window,
    pub resolution: Resolution,
}

impl NormEstimate {
    /// Thermic part of a Besov estimate; the full value for other kinds.
    pub fn homogeneous(&self) -> f64 {
        match self.kind {
            NormKind::Besov { homogeneous, .. } => homogeneous,
            _ => self.value,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("Hölder exponent must lie in (0, 1], got {gamma}")))
    }
}

/// Default pair-scan radius `L/2`.
pub fn default_pair_distance(domain: &Domain1D) -> f64 {
    0.5 * domain.half_length()
}

/// Largest `|f(x)-f(y)|/|x-y|^γ` over grid pairs in `window` with
/// `0 < |x-y| <= max_pair_distance`.
pub fn holder_seminorm(
    f: &GridField,
    gamma: f64,
    window: Window,
    max_pair_distance: f64,
) -> Result<NormEstimate> {
    check_gamma(gamma)?;
    let domain = *f.domain();
    window.check_inside(&domain)?;
    let dx = domain.dx();
    if !(max_pair_distance >= dx * (1.0 - 1e-12)) {
        return Err(invalid(format!(
            "pair distance {max_pair_distance} is below the grid spacing {dx}"
        )));
    }
    let idx = domain.indices_in(window.lo, window.hi);
    if idx.len() < 2 {
        return Err(invalid("window holds fewer than two grid points"));
    }
    let reach = ((max_pair_distance / dx) * (1.0 + 1e-12)).floor() as usize;
    let reach = reach.max(1);
    let inv_dist: Vec<f64> = (0..=reach)
        .map(|k| if k == 0 { 0.0 } else { (k as f64 * dx).powf(-gamma) })
        .collect();
    let v = f.values();
    let (start, end) = (idx.start, idx.end);
    let row = |i: usize| {
        let stop = (i + reach).min(end - 1);
        (i + 1..=stop).fold(0.0_f64, |m, j| m.max((v[i] - v[j]).abs() * inv_dist[j - i]))
    };
    #[cfg(feature = "parallel")]
    let value = {
        use rayon::prelude::*;
        (start..end).into_par_iter().map(row).reduce(|| 0.0, f64::max)
    };
    #[cfg(not(feature = "parallel"))]
    let value = (start..end).map(row).fold(0.0, f64::max);
    Ok(NormEstimate {
        value,
        kind: NormKind::Holder { gamma },
        window,
        resolution: Resolution {
            points: domain.len(),
            scan: reach,
        },
    })
}

/// `[f]_γ + sup|f|` over the window, pairs up to the default radius.
pub fn holder_norm_b(f: &GridField, gamma: f64, window: Window) -> Result<NormEstimate> {
    let semi = holder_seminorm(f, gamma, window, default_pair_distance(f.domain()))?;
    let sup = f.sup_norm_in(window.lo, window.hi);
    Ok(NormEstimate {
        value: semi.value + sup,
        kind: NormKind::HolderBounded { gamma },
        ..semi
    })
}

/// Sup norm over a window, as an estimate record.
pub fn sup_norm(f: &GridField, window: Window) -> Result<NormEstimate> {
    window.check_inside(f.domain())?;
    Ok(NormEstimate {
        value: f.sup_norm_in(window.lo, window.hi),
        kind: NormKind::Sup,
        window,
        resolution: Resolution {
            points: f.len(),
            scan: 0,
        },
    })
}

/// Ascending variance grid for thermic norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGrid(Vec<f64>);

impl VarianceGrid {
    /// Smallest variance the grid resolves: `(2Δx)²`.
    pub fn min_variance(domain: &Domain1D) -> f64 {
        (2.0 * domain.dx()).powi(2)
    }

    /// `count` geometric points from `(2Δx)²` to 1.
    pub fn geometric(domain: &Domain1D, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(invalid("variance grid needs at least two points"));
        }
        let lo = Self::min_variance(domain);
        if lo >= 1.0 {
            return Err(Error::Resolution(format!(
                "grid spacing {} too coarse for a thermic variance grid",
                domain.dx()
            )));
        }
        let ratio = (1.0 / lo).ln() / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| lo * (ratio * i as f64).exp()).collect();
        v[count - 1] = 1.0;
        Ok(Self(v))
    }

    /// The 48-point default grid.
    pub fn default_for(domain: &Domain1D) -> Result<Self> {
        Self::geometric(domain, 48)
    }

    pub fn new(domain: &Domain1D, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("variance grid is empty"));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("variance grid must be strictly ascending"));
        }
        let lo = Self::min_variance(domain) * (1.0 - 1e-12);
        if values[0] < lo || *values.last().unwrap() > 1.0 {
            return Err(Error::Resolution(format!(
                "variance grid must lie in [{lo}, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Smallest thermic derivative order `k` with `k - α/2 > 0`, capped at 2.
pub fn thermic_order(alpha: f64) -> Result<u32> {
    if !alpha.is_finite() {
        return Err(invalid("non-finite Besov exponent"));
    }
    if alpha < 2.0 {
        Ok(1)
    } else if alpha < 4.0 {
        Ok(2)
    } else {
        Err(invalid(format!(
            "Besov exponent {alpha} is not coercive for thermic order <= 2"
        )))
    }
}

/// `‖f‖_{B^α_{∞,∞}}` through the thermic characterization.
pub fn besov_norm_thermic(f: &GridField, alpha: f64, v_grid: &VarianceGrid) -> Result<NormEstimate> {
    let order = thermic_order(alpha)?;
    let domain = *f.domain();
    let weight_exp = order as f64 - alpha / 2.0;
    let homogeneous = v_grid.values().iter().try_fold(0.0_f64, |m, &v| {
        let d = dv_heat_convolve_order(f, v, order)?;
        Ok::<_, Error>(m.max(v.powf(weight_exp) * d.sup_norm()))
    })?;
    let low_frequency = heat_convolve(f, 1.0)?.sup_norm();
    Ok(NormEstimate {
        value: homogeneous + low_frequency,
        kind: NormKind::Besov {
            alpha,
            order,
            homogeneous,
            low_frequency,
        },
        window: Window::full(&domain),
        resolution: Resolution {
            points: domain.len(),
            scan: v_grid.len(),
        },
    })
}

/// `B^α_{1,1}` proxy: `‖h_1⋆ψ‖_{L¹} + ∫ v^{k-α/2} ‖∂_v^k h_v⋆ψ‖_{L¹} dv/v`,
/// trapezoid in `log v` over the variance grid.
pub fn besov_l1_proxy(psi: &GridField, alpha: f64, v_grid: &VarianceGrid) -> Result<f64> {
    let order = thermic_order(alpha)?;
    let weight_exp = order as f64 - alpha / 2.0;
    let samples: Vec<(f64, f64)> = v_grid
        .values()
        .iter()
        .map(|&v| {
            let d = dv_heat_convolve_order(psi, v, order)?;
            Ok((v.ln(), v.powf(weight_exp) * d.l1_norm()))
        })
        .collect::<Result<_>>()?;
    let integral: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(heat_convolve(psi, 1.0)?.l1_norm() + integral)
}

/// Ratio `|∫φψ| / (‖φ‖_{B^α_{∞,∞}} · ‖ψ‖_{B^{-α}_{1,1}-proxy})`.
pub fn duality_gap(phi: &GridField, psi: &GridField, alpha: f64, v_grid: &VarianceGrid) -> Result<f64> {
    phi.check_same_domain(psi)?;
    thermic_order(alpha)?;
    thermic_order(-alpha)?;
    let pairing = phi.zip_with(psi, |a, b| a * b)?.integral().abs();
    if pairing == 0.0 {
        return Ok(0.0);
    }
    let denom = besov_norm_thermic(phi, alpha, v_grid)?.value * besov_l1_proxy(psi, -alpha, v_grid)?;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "duality denominator is {denom}"
        )));
    }
    Ok(pairing / denom)
}
