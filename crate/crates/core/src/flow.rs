//! Drift specifications, their mollifications and backward characteristic flows.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{smooth_cutoff, spectral_derivative, Domain1D, GridField, SpaceTimeField};
use crate::mollifier::{mollify, MollifierKernel};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    Constant { value: f64 },
    Linear { slope: f64 },
    /// `sign(x)·min(|x|, R)^exponent`.
    Peano { exponent: f64, radius: f64 },
    Tabulated(SpaceTimeField),
}

/// Declared regularity: Hölder `γ̃ ∈ (0, 1]`, or Besov `B^{-β}` with `β >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Holder(f64),
    Besov(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSpec {
    pub form: DriftForm,
    pub regularity: Regularity,
}

impl DriftSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            form: DriftForm::Constant { value },
            regularity: Regularity::Holder(1.0),
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            form: DriftForm::Linear { slope },
            regularity: Regularity::Holder(1.0),
        }
    }

    pub fn peano(exponent: f64, radius: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(invalid(format!("Peano exponent must lie in (0, 1], got {exponent}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("Peano radius must be positive, got {radius}")));
        }
        Ok(Self {
            form: DriftForm::Peano { exponent, radius },
            regularity: Regularity::Holder(exponent),
        })
    }

    pub fn tabulated(field: SpaceTimeField, regularity: Regularity) -> Self {
        Self {
            form: DriftForm::Tabulated(field),
            regularity,
        }
    }

    /// `β` in `b ∈ B^{-β}`; a Hölder exponent `γ̃` gives `β = -γ̃`.
    pub fn beta(&self) -> f64 {
        match self.regularity {
            Regularity::Holder(g) => -g,
            Regularity::Besov(b) => b,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match &self.form {
            DriftForm::Constant { value } => *value,
            DriftForm::Linear { slope } => slope * x,
            DriftForm::Peano { exponent, radius } => x.signum() * x.abs().min(*radius).powf(*exponent),
            DriftForm::Tabulated(field) => field.interpolate(t, x),
        }
    }

    pub fn is_steady(&self) -> bool {
        match &self.form {
            DriftForm::Tabulated(field) => field.len() == 1,
            _ => true,
        }
    }

    /// Grid samples at time `t`. The Peano form is tapered to zero on
    /// `L/2 <= |x| <= 7L/8` so that it stays smooth across the periodic seam.
    pub fn sample(&self, domain: &Domain1D, t: f64) -> GridField {
        match &self.form {
            DriftForm::Tabulated(field) if field.domain() == domain => field.at_time(t),
            DriftForm::Peano { .. } => {
                let l = domain.half_length();
                GridField::from_fn(*domain, |x| self.eval(t, x) * smooth_cutoff(x, 0.5 * l, 0.875 * l))
            }
            _ => GridField::from_fn(*domain, |x| self.eval(t, x)),
        }
    }

    /// One grid sample per tabulated frame, a single sample otherwise.
    pub fn sample_frames(&self, domain: &Domain1D) -> Vec<GridField> {
        match &self.form {
            DriftForm::Tabulated(field) => field
                .times()
                .iter()
                .map(|&t| self.sample(domain, t))
                .collect(),
            _ => vec![self.sample(domain, 0.0)],
        }
    }

    pub fn sup_norm(&self, domain: &Domain1D) -> f64 {
        self.sample_frames(domain)
            .iter()
            .fold(0.0, |m, f| m.max(f.sup_norm()))
    }

    /// `b_m = ρ_m ⋆ b`. Constant and linear drifts are left in closed form,
    /// which symmetric kernels preserve.
    pub fn mollified(&self, domain: &Domain1D, kernel: &MollifierKernel) -> Result<MollifiedDrift> {
        let repr = match &self.form {
            DriftForm::Constant { value } => Repr::Constant(*value),
            DriftForm::Linear { slope } => Repr::Linear(*slope),
            DriftForm::Peano { .. } => {
                let f = mollify(&self.sample(domain, 0.0), kernel)?;
                Repr::Gridded(SpaceTimeField::steady(f, vec![0.0])?)
            }
            DriftForm::Tabulated(field) => {
                let frames = self
                    .sample_frames(domain)
                    .iter()
                    .map(|f| mollify(f, kernel))
                    .collect::<Result<Vec<_>>>()?;
                Repr::Gridded(SpaceTimeField::new(field.times().to_vec(), frames)?)
            }
        };
        MollifiedDrift::from_repr(repr, *domain, Some(kernel.scale()))
    }

    /// The drift without smoothing; only meaningful for Lipschitz inputs.
    pub fn unmollified(&self, domain: &Domain1D) -> Result<MollifiedDrift> {
        let repr = match &self.form {
            DriftForm::Constant { value } => Repr::Constant(*value),
            DriftForm::Linear { slope } => Repr::Linear(*slope),
            _ => Repr::Gridded(SpaceTimeField::new(
                self.sample_times(),
                self.sample_frames(domain),
            )?),
        };
        MollifiedDrift::from_repr(repr, *domain, None)
    }

    fn sample_times(&self) -> Vec<f64> {
        match &self.form {
            DriftForm::Tabulated(field) => field.times().to_vec(),
            _ => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Constant(f64),
    Linear(f64),
    Gridded(SpaceTimeField),
}

/// A smooth drift ready for characteristic integration and the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedDrift {
    repr: Repr,
    domain: Domain1D,
    scale: Option<f64>,
    lipschitz: f64,
    sup: f64,
}

impl MollifiedDrift {
    fn from_repr(repr: Repr, domain: Domain1D, scale: Option<f64>) -> Result<Self> {
        let (lipschitz, sup) = match &repr {
            Repr::Constant(c) => (0.0, c.abs()),
            Repr::Linear(b) => (b.abs(), b.abs() * domain.half_length()),
            Repr::Gridded(field) => {
                let mut lip = 0.0_f64;
                for f in field.frames() {
                    lip = lip.max(spectral_derivative(f, 1)?.sup_norm()).max(f.max_slope());
                }
                (lip, field.sup_norm())
            }
        };
        Ok(Self {
            repr,
            domain,
            scale,
            lipschitz,
            sup,
        })
    }

    /// `-b_m`, whose backward flow is the forward characteristic of `b_m`.
    pub fn negated(&self) -> MollifiedDrift {
        let repr = match &self.repr {
            Repr::Constant(c) => Repr::Constant(-c),
            Repr::Linear(b) => Repr::Linear(-b),
            Repr::Gridded(field) => Repr::Gridded(field.map_frames(|f| f.map(|v| -v))),
        };
        MollifiedDrift { repr, ..self.clone() }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match &self.repr {
            Repr::Constant(c) => *c,
            Repr::Linear(b) => b * x,
            Repr::Gridded(field) => field.interpolate(t, x),
        }
    }

    /// Grid samples at time `t`.
    pub fn grid_at(&self, t: f64) -> GridField {
        match &self.repr {
            Repr::Gridded(field) => field.at_time(t),
            _ => GridField::from_fn(self.domain, |x| self.eval(t, x)),
        }
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn is_steady(&self) -> bool {
        match &self.repr {
            Repr::Gridded(field) => field.len() == 1,
            _ => true,
        }
    }

    /// `‖∇b_m‖_{L^∞}` over all time samples.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }
}

/// `θ_{s,τ}(ξ)` sampled at `s` values running monotonically away from `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub anchor: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// `∂_s θ = -b_m(s, θ)` at each sample.
    pub velocities: Vec<f64>,
    /// Set when the path left `[-L, L)` by more than one grid cell.
    pub escaped: bool,
}

impl FlowTrajectory {
    /// Cubic Hermite interpolation between samples; clamps outside the range.
    pub fn position_at(&self, s: f64) -> f64 {
        let n = self.times.len();
        if n == 1 {
            return self.positions[0];
        }
        let forward = self.times[n - 1] > self.times[0];
        let key = |t: f64| if forward { t } else { -t };
        let k = self.times.partition_point(|&t| key(t) <= key(s));
        if k == 0 {
            return self.positions[0];
        }
        if k == n {
            return self.positions[n - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let h = t1 - t0;
        let u = (s - t0) / h;
        let (p0, p1) = (self.positions[k - 1], self.positions[k]);
        let (m0, m1) = (self.velocities[k - 1] * h, self.velocities[k] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1
    }

    pub fn end(&self) -> f64 {
        *self.positions.last().expect("trajectory has samples")
    }
}

/// Integrates `∂_s θ = -b_m(s, θ)` from `θ_τ = ξ` towards `s_end` with RK4,
/// snapping the step so that it divides `|s_end - τ|`.
pub fn integrate_flow_to(
    b: &MollifiedDrift,
    xi: f64,
    tau: f64,
    s_end: f64,
    dt: f64,
) -> Result<FlowTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("flow step must be positive, got {dt}")));
    }
    if !xi.is_finite() || !tau.is_finite() || !s_end.is_finite() {
        return Err(invalid("non-finite flow anchor"));
    }
    let span = s_end - tau;
    let steps = (span.abs() / dt).ceil().max(if span == 0.0 { 0.0 } else { 1.0 }) as usize;
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };
    let rhs = |s: f64, x: f64| -b.eval(s, x);
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut x = xi;
    times.push(tau);
    positions.push(x);
    velocities.push(rhs(tau, x));
    for i in 0..steps {
        let s = tau + i as f64 * h;
        let k1 = rhs(s, x);
        let k2 = rhs(s + 0.5 * h, x + 0.5 * h * k1);
        let k3 = rhs(s + 0.5 * h, x + 0.5 * h * k2);
        let k4 = rhs(s + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x.is_finite() {
            return Err(Error::Instability("flow position became non-finite".into()));
        }
        let s_next = if i + 1 == steps { s_end } else { tau + (i + 1) as f64 * h };
        times.push(s_next);
        positions.push(x);
        velocities.push(rhs(s_next, x));
    }
    let l = b.domain().half_length();
    let tol = b.domain().dx();
    let escaped = positions.iter().any(|&p| p < -l - tol || p >= l + tol);
    Ok(FlowTrajectory {
        anchor: xi,
        tau,
        times,
        positions,
        velocities,
        escaped,
    })
}

/// `θ_{s,τ}(ξ)` for `s` running from `τ` down to 0.
pub fn integrate_flow(b: &MollifiedDrift, xi: f64, tau: f64, dt: f64) -> Result<FlowTrajectory> {
    integrate_flow_to(b, xi, tau, 0.0, dt)
}

pub fn default_flow_step(tau: f64) -> f64 {
    if tau > 0.0 {
        1e-3 * tau
    } else {
        1e-3
    }
}

/// Backward flows for a batch of anchors.
pub fn integrate_flows(
    b: &MollifiedDrift,
    anchors: &[f64],
    tau: f64,
    dt: f64,
) -> Result<Vec<FlowTrajectory>> {
    #[cfg(feature = "parallel")]
    let it = anchors.par_iter();
    #[cfg(not(feature = "parallel"))]
    let it = anchors.iter();
    it.map(|&xi| integrate_flow(b, xi, tau, dt)).collect()
}

/// `sup_s |θ_{s,τ}(x) - θ_{s,τ}(x')| / (|x - x'|·exp(‖∇b_m‖_∞ τ))`.
pub fn flow_lipschitz_check(b: &MollifiedDrift, x: f64, x2: f64, tau: f64, dt: f64) -> Result<f64> {
    if x == x2 {
        return Err(invalid("Lipschitz check needs distinct points"));
    }
    let a = integrate_flow(b, x, tau, dt)?;
    let c = integrate_flow(b, x2, tau, dt)?;
    let sep = a
        .positions
        .iter()
        .zip(&c.positions)
        .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
    Ok(sep / ((x - x2).abs() * (b.lipschitz() * tau).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `X_t = ±c_α (t - t*)^{1/(1-α)}` for `t >= t*`, zero before, solving
/// `Ẋ = sign(X)|X|^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeanoBranch {
    pub t_star: f64,
    pub branch: Branch,
    pub alpha: f64,
    pub horizon: f64,
}

impl PeanoBranch {
    pub fn coefficient(&self) -> f64 {
        (1.0 - self.alpha).powf(1.0 / (1.0 - self.alpha))
    }

    pub fn position(&self, t: f64) -> f64 {
        if t <= self.t_star {
            return 0.0;
        }
        self.branch.sign() * self.coefficient() * (t - self.t_star).powf(1.0 / (1.0 - self.alpha))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if t <= self.t_star {
            return 0.0;
        }
        let p = 1.0 / (1.0 - self.alpha);
        self.branch.sign() * self.coefficient() * p * (t - self.t_star).powf(p - 1.0)
    }

    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.position(t)).collect()
    }
}

pub fn peano_exact(t_star: f64, branch: Branch, alpha: f64, horizon: f64) -> Result<PeanoBranch> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("Peano exponent must lie in (0, 1), got {alpha}")));
    }
    if !(horizon > 0.0) || !(0.0..=horizon).contains(&t_star) {
        return Err(invalid(format!("branching time {t_star} outside [0, {horizon}]")));
    }
    Ok(PeanoBranch {
        t_star,
        branch,
        alpha,
        horizon,
    })
}
