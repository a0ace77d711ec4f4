//! Mollification at scale `m` and the associated rate and blow-up checks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::log_log_slope;
use crate::flow::DriftSpec;
use crate::grid::{circular_convolve, heat_convolve, spectral_derivative, Domain1D, GridField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `ρ = h_1`, so `ρ_m = h_{m^{-2}}`.
    Gaussian,
    /// Normalized `exp(-1/(1-z²))` on `|z| < 1`.
    CompactBump,
}

/// `ρ_m(·) = m ρ(m ·)` with unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    family: KernelFamily,
    scale: f64,
}

impl MollifierKernel {
    pub fn new(family: KernelFamily, scale: f64) -> Result<Self> {
        if !(scale > 1.0) || !scale.is_finite() {
            return Err(invalid(format!("mollification scale must exceed 1, got {scale}")));
        }
        Ok(Self { family, scale })
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, scale)
    }

    pub fn bump(scale: f64) -> Result<Self> {
        Self::new(KernelFamily::CompactBump, scale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Kernel samples at signed grid offsets, normalized to unit discrete mass.
    pub fn offsets(&self, domain: &Domain1D) -> Vec<f64> {
        let n = domain.len();
        let dx = domain.dx();
        let m = self.scale;
        let profile = |z: f64| match self.family {
            KernelFamily::Gaussian => (-0.5 * z * z).exp(),
            KernelFamily::CompactBump => {
                if z.abs() < 1.0 {
                    (-1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            }
        };
        let mut k: Vec<f64> = (0..n)
            .map(|j| {
                let off = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                profile(m * off * dx)
            })
            .collect();
        let mass: f64 = k.iter().sum::<f64>() * dx;
        k.iter_mut().for_each(|v| *v /= mass);
        k
    }
}

/// `ρ_m ⋆ f`; the Gaussian family is exactly `heat_convolve(f, m^{-2})`.
pub fn mollify(f: &GridField, kernel: &MollifierKernel) -> Result<GridField> {
    match kernel.family {
        KernelFamily::Gaussian => heat_convolve(f, kernel.scale.powi(-2)),
        KernelFamily::CompactBump => circular_convolve(f, &kernel.offsets(f.domain())),
    }
}

fn check_geometric(m_list: &[f64]) -> Result<()> {
    if m_list.len() < 4 {
        return Err(invalid("rate fits need at least four scales"));
    }
    let r = m_list[1] / m_list[0];
    if !(r > 1.0) || m_list.windows(2).any(|w| ((w[1] / w[0]) / r - 1.0).abs() > 1e-9) {
        return Err(invalid("scales must form an increasing geometric sequence"));
    }
    Ok(())
}

/// Scale `m` is resolvable when `m^{-1} >= 4Δx`.
pub fn check_resolvable(domain: &Domain1D, m: f64) -> Result<()> {
    if 1.0 / m < 4.0 * domain.dx() * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!(
            "scale m = {m} is below four grid spacings (dx = {})",
            domain.dx()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Fitted slope of `log‖f_m - f‖_∞` against `log m`.
    pub slope: f64,
    /// The rate `-γ` expected for a γ-Hölder function.
    pub expected: f64,
    pub scales: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Convergence rate of Gaussian mollification on the interior window,
/// keeping `4/m_min` away from the window edges.
pub fn mollification_rate(f: &GridField, gamma: f64, m_list: &[f64]) -> Result<RateEstimate> {
    mollification_rate_with(f, gamma, m_list, |f, m| mollify(f, &MollifierKernel::gaussian(m)?))
}

/// Rate at which two kernel families approach each other.
pub fn kernel_gap_rate(f: &GridField, gamma: f64, m_list: &[f64]) -> Result<RateEstimate> {
    mollification_rate_with(f, gamma, m_list, |f, m| {
        let a = mollify(f, &MollifierKernel::gaussian(m)?)?;
        let b = mollify(f, &MollifierKernel::bump(m)?)?;
        // Returned so that `out - f == a - b`.
        Ok(&(&a - &b) + f)
    })
}

fn mollification_rate_with(
    f: &GridField,
    gamma: f64,
    m_list: &[f64],
    smooth: impl Fn(&GridField, f64) -> Result<GridField>,
) -> Result<RateEstimate> {
    check_geometric(m_list)?;
    let domain = *f.domain();
    for &m in m_list {
        check_resolvable(&domain, m)?;
    }
    let margin = 4.0 / m_list[0];
    let h = 0.5 * domain.half_length();
    if h - margin <= -h + margin {
        return Err(Error::Resolution("interior window vanishes for the smallest scale".into()));
    }
    let errors: Vec<f64> = m_list
        .iter()
        .map(|&m| {
            let fm = smooth(f, m)?;
            Ok((&fm - f).sup_norm_in(-h + margin, h - margin))
        })
        .collect::<Result<_>>()?;
    let slope = log_log_slope(m_list, &errors)?;
    Ok(RateEstimate {
        slope,
        expected: -gamma,
        scales: m_list.to_vec(),
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub m: f64,
    pub sup: f64,
    pub grad_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub rows: Vec<BlowupRow>,
    /// `‖b‖_∞` of the unmollified samples.
    pub drift_sup: f64,
    /// Present when `β <= 0`: whether `‖b_m‖_∞ <= ‖b‖_∞` held at every scale.
    pub sup_bounded: Option<bool>,
    /// Fitted growth exponent of `‖b_m‖_∞`; `None` when the values vanish.
    pub sup_exponent: Option<f64>,
    pub grad_exponent: Option<f64>,
    /// `max(β, 0)`.
    pub sup_bound_exponent: f64,
    /// `1 + β`.
    pub grad_bound_exponent: f64,
}

/// Sweeps `‖b_m‖_∞` and `‖∇b_m‖_∞` over `m_list` (sup over time samples).
pub fn drift_blowup_check(
    drift: &DriftSpec,
    domain: &Domain1D,
    m_list: &[f64],
    beta: f64,
) -> Result<BlowupReport> {
    if m_list.is_empty() {
        return Err(invalid("empty scale list"));
    }
    let frames = drift.sample_frames(domain);
    let drift_sup = frames.iter().fold(0.0_f64, |m, f| m.max(f.sup_norm()));
    let rows: Vec<BlowupRow> = m_list
        .iter()
        .map(|&m| {
            let kernel = MollifierKernel::gaussian(m)?;
            let (mut sup, mut grad_sup) = (0.0_f64, 0.0_f64);
            for f in &frames {
                let bm = mollify(f, &kernel)?;
                sup = sup.max(bm.sup_norm());
                grad_sup = grad_sup.max(spectral_derivative(&bm, 1)?.sup_norm());
            }
            Ok(BlowupRow { m, sup, grad_sup })
        })
        .collect::<Result<_>>()?;
    let fit = |ys: Vec<f64>| {
        let scale = ys.iter().cloned().fold(0.0, f64::max);
        if rows.len() < 2 || scale < 1e-12 || ys.iter().any(|&y| y <= 1e-14 * scale.max(1.0)) {
            None
        } else {
            log_log_slope(m_list, &ys).ok()
        }
    };
    let sup_exponent = fit(rows.iter().map(|r| r.sup).collect());
    let grad_exponent = fit(rows.iter().map(|r| r.grad_sup).collect());
    let sup_bounded = (beta <= 0.0).then(|| rows.iter().all(|r| r.sup <= drift_sup + 1e-12));
    Ok(BlowupReport {
        rows,
        drift_sup,
        sup_bounded,
        sup_exponent,
        grad_exponent,
        sup_bound_exponent: beta.max(0.0),
        grad_bound_exponent: 1.0 + beta,
    })
}
