//! Compatibility conditions between the mollification scale `m` and the
//! viscosity `ν`, with "≪" read as "at most `ε` times". Everything is
//! evaluated in log space since the thresholds reach far below `f64` range.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    /// Generic constant `C`.
    pub c: f64,
    /// Domination ratio `ε` in `(0, 1]`.
    pub eps: f64,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        Self { c: 1.0, eps: 0.1 }
    }
}

impl ScheduleConstants {
    pub fn new(c: f64, eps: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid(format!("C must be positive, got {c}")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid(format!("ε must lie in (0, 1], got {eps}")));
        }
        Ok(Self { c, eps })
    }
}

/// Norm inputs of the transport viscosity condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportNorms {
    /// `‖f‖_{L^∞(C^γ)}`.
    pub f_holder: f64,
    /// `[g]_γ`.
    pub g_seminorm: f64,
    /// `‖b‖_{L^∞(B^{-β})}`.
    pub b_norm: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityBound {
    /// `ν_max`, clamped to the smallest positive normal double.
    pub nu_max: f64,
    pub ln_nu_max: f64,
    /// A vanishing norm removed the constraint.
    pub unbounded: bool,
    /// `ν_max` lies below `f64::MIN_POSITIVE`.
    pub underflow: bool,
}

impl ViscosityBound {
    fn from_ln(ln: f64) -> Self {
        let floor = f64::MIN_POSITIVE.ln();
        Self {
            nu_max: if ln < floor { f64::MIN_POSITIVE } else { ln.exp() },
            ln_nu_max: ln,
            unbounded: ln == f64::INFINITY,
            underflow: ln < floor,
        }
    }
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// The two right-hand sides of the transport viscosity condition, in log form.
pub fn condinu_transport_terms(m: f64, norms: &TransportNorms, consts: &ScheduleConstants) -> Result<(f64, f64)> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(invalid(format!("m must exceed 1, got {m}")));
    }
    let g = norms.gamma;
    if !(g > 0.0 && g < 1.0) {
        return Err(invalid(format!("γ must lie in (0, 1), got {g}")));
    }
    if !(norms.horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    if [norms.f_holder, norms.g_seminorm, norms.b_norm].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("norm inputs must be finite and nonnegative"));
    }
    let (t, b, f, beta, c) = (norms.horizon, norms.b_norm, norms.f_holder, norms.beta, consts.c);
    let mb = m.powf(1.0 + beta);
    let lnm = m.ln();
    let lnt = t.ln();

    let p1 = -4.0 / (1.0 - g * g);
    let base1 = (2.0 + beta - g) * lnm + ((1.0 - g) * (2.0 + g) / (2.0 * g) + 2.0) * lnt + ln_or_neg_inf(f) + ln_or_neg_inf(b);
    let first = if base1 == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        p1 * base1 - c * mb * b * t / (1.0 - g * g)
    };

    let p2 = -4.0 / (g * (1.0 - g));
    let base2 = c.ln()
        + (2.0 + beta) * lnm
        + ln_or_neg_inf(b)
        + (2.0 - g * g + g) / (2.0 * g) * lnt
        + (1.0 - g) * lnm
        + ln_or_neg_inf(t * f + norms.g_seminorm)
        + (1.0 + f).ln();
    let second = if base2 == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        p2 * base2 - 8.0 * mb * t * b / (g * (1.0 - g))
    };
    Ok((first, second))
}

/// `ν_max = ε·min(first, second)`.
pub fn condinu_transport(m: f64, norms: &TransportNorms, consts: &ScheduleConstants) -> Result<ViscosityBound> {
    let (a, b) = condinu_transport_terms(m, norms, consts)?;
    Ok(ViscosityBound::from_ln(consts.eps.ln() + a.min(b)))
}

/// `ν‖∇²g_m‖_∞ + ν^{γ/2} m^{1-γ̃} <= ε`.
pub fn condinu_holder_timederiv(
    m: f64,
    nu: f64,
    gamma: f64,
    gamma_tilde: f64,
    g_m_hess: f64,
    consts: &ScheduleConstants,
) -> bool {
    nu * g_m_hess + nu.powf(0.5 * gamma) * m.powf(1.0 - gamma_tilde) <= consts.eps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuWindow {
    pub lo: f64,
    pub hi: f64,
    /// `γ̃ <= 1/(1+γ)`: no window survives `m → ∞`.
    pub below_threshold: bool,
    pub empty: bool,
}

impl NuWindow {
    pub fn contains(&self, nu: f64) -> bool {
        !self.empty && nu >= self.lo && nu <= self.hi
    }

    pub fn geometric_mean(&self) -> f64 {
        (self.lo * self.hi).sqrt()
    }
}

/// Viscosities with `ν^{(γ-1)/2} <= ε^{-1} m^{2γ̃-1}`, `m^{1-γ̃}ν^{γ/2} <= ε`
/// and `ν‖∇²g_m‖_∞ <= ε`.
pub fn uniqueness_window_transport(
    m: f64,
    gamma: f64,
    gamma_tilde: f64,
    g_m_hess: f64,
    consts: &ScheduleConstants,
) -> Result<NuWindow> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("γ must lie in (0, 1), got {gamma}")));
    }
    if !(gamma_tilde > 0.0 && gamma_tilde <= 1.0) {
        return Err(invalid(format!("γ̃ must lie in (0, 1], got {gamma_tilde}")));
    }
    if !(m > 1.0) {
        return Err(invalid(format!("m must exceed 1, got {m}")));
    }
    let eps = consts.eps;
    let lo = (m.powf(2.0 * gamma_tilde - 1.0) / eps).powf(-2.0 / (1.0 - gamma));
    let hi_a = (eps * m.powf(gamma_tilde - 1.0)).powf(2.0 / gamma);
    let hi_b = if g_m_hess > 0.0 { eps / g_m_hess } else { f64::INFINITY };
    let hi = hi_a.min(hi_b);
    let below_threshold = gamma_tilde <= 1.0 / (1.0 + gamma) + 1e-12;
    Ok(NuWindow {
        lo,
        hi,
        below_threshold,
        empty: below_threshold || !(lo < hi),
    })
}

/// Data norms entering the Burgers uniqueness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersNorms {
    pub f_sup: f64,
    pub g_sup: f64,
    /// `‖f_m‖_{L^∞(C^1)}`, `‖g_m‖_{C^1}`.
    pub f_m_c1: f64,
    pub g_m_c1: f64,
    /// `‖∂_x f‖_∞`, `‖∂_x g‖_∞`.
    pub f_grad: f64,
    pub g_grad: f64,
    pub g_m_hess: f64,
    pub gamma: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurgersKind {
    Turbulent,
    Viscous,
}

/// `C·a·exp(x)` in log form, treating `a = 0` as zero whatever `x` is.
fn ln_scaled_exp(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        return f64::NEG_INFINITY;
    }
    a.ln() + x
}

/// Logarithm of the left-hand side of the chosen Burgers condition.
pub fn burgers_lhs_ln(kind: BurgersKind, m: f64, nu: f64, n: &BurgersNorms, consts: &ScheduleConstants) -> f64 {
    let (c, t, g) = (consts.c, n.horizon, n.gamma);
    match kind {
        BurgersKind::Turbulent => {
            let a = c * t * (t * n.f_m_c1 + n.g_m_c1);
            let inner = c * m * t * (t * n.f_sup + n.g_sup);
            // exp(a·e^{inner}) as a log: a·e^{inner}.
            let outer = ln_scaled_exp(a, inner).exp();
            let small = (1.0 + m.powf(1.0 - g)) * nu.powf(0.5 * g) + nu * n.g_m_hess;
            outer + ln_or_neg_inf(small)
        }
        BurgersKind::Viscous => {
            let a = c * t * (t * n.f_grad + n.g_grad);
            let s = t * n.f_sup + n.g_sup;
            let inner = c * t * s * s / nu;
            let outer = ln_scaled_exp(a, inner).exp();
            outer - g * m.ln()
        }
    }
}

pub fn burgers_schedules(kind: BurgersKind, m: f64, nu: f64, n: &BurgersNorms, consts: &ScheduleConstants) -> bool {
    let lhs = burgers_lhs_ln(kind, m, nu, n, consts);
    !lhs.is_nan() && lhs <= consts.eps.ln()
}

/// Largest `ν` meeting the turbulent condition at scale `m`, by bisection in
/// `ln ν`; `ln ν_max` is returned alongside the clamped value.
pub fn turbulent_nu_max(m: f64, n: &BurgersNorms, consts: &ScheduleConstants) -> ViscosityBound {
    let holds = |ln_nu: f64| {
        let nu = ln_nu.exp();
        if nu > 0.0 {
            return burgers_schedules(BurgersKind::Turbulent, m, nu, n, consts);
        }
        // Below the double range evaluate the small factor in log form.
        let (c, t, g) = (consts.c, n.horizon, n.gamma);
        let a = c * t * (t * n.f_m_c1 + n.g_m_c1);
        let inner = c * m * t * (t * n.f_sup + n.g_sup);
        let outer = ln_scaled_exp(a, inner).exp();
        let ln_small = (1.0 + m.powf(1.0 - g)).ln() + 0.5 * g * ln_nu;
        outer + ln_small <= consts.eps.ln()
    };
    let (mut lo, mut hi) = (-1e6_f64, 0.0_f64);
    if holds(hi) {
        return ViscosityBound::from_ln(hi);
    }
    if !holds(lo) {
        return ViscosityBound::from_ln(f64::NEG_INFINITY);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ViscosityBound::from_ln(lo)
}

/// Smallest `ν` meeting the viscous condition at scale `m`, or `None` when
/// no viscosity works.
pub fn viscous_nu_min(m: f64, n: &BurgersNorms, consts: &ScheduleConstants) -> Option<f64> {
    let (c, t) = (consts.c, n.horizon);
    let a = c * t * (t * n.f_grad + n.g_grad);
    let s = t * n.f_sup + n.g_sup;
    let budget = n.gamma * m.ln() + consts.eps.ln();
    if budget < 0.0 {
        return None;
    }
    if a == 0.0 || s == 0.0 {
        return Some(0.0);
    }
    let ratio = budget / a;
    if ratio <= 1.0 {
        return None;
    }
    Some(c * t * s * s / ratio.ln())
}

/// `2·exp(πK²t)`, the half-order Grönwall–Henry envelope with `E_{1/2}`
/// bounded by `2e^t`.
pub fn gronwall_henry_envelope(t: f64, k: f64) -> Result<f64> {
    if !(t >= 0.0) || !(k >= 0.0) {
        return Err(invalid("Grönwall–Henry envelope needs t >= 0 and K >= 0"));
    }
    Ok(2.0 * (std::f64::consts::PI * k * k * t).exp())
}

/// Partial sums `Σ_{n<=N} t^{n/2}/Γ(n/2+1)` for `N = 0..=n_max`.
pub fn e_half_partial_sums(t: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("E_1/2 needs t >= 0, got {t}")));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut even = 1.0;
    let mut odd = 2.0 * t.sqrt() / std::f64::consts::PI.sqrt();
    let mut sum = 0.0;
    for n in 0..=n_max {
        if n % 2 == 0 {
            sum += even;
            even *= t / (n as f64 / 2.0 + 1.0);
        } else {
            sum += odd;
            odd *= t / (n as f64 / 2.0 + 1.0);
        }
        out.push(sum);
    }
    Ok(out)
}

/// `E_{1/2}(t)` from `n_max` terms, with a bound on the neglected tail.
pub fn e_half(t: f64, n_max: usize) -> Result<(f64, f64)> {
    let sums = e_half_partial_sums(t, n_max + 2)?;
    let s = sums[n_max];
    let next = sums[n_max + 2] - s;
    let q = t / ((n_max + 1) as f64 / 2.0 + 1.0);
    let tail = if q < 1.0 { next / (1.0 - q) } else { f64::INFINITY };
    Ok((s, tail))
}
