//! Explicit finite differences for `∂_t u + b_m·∇u - νΔu = f_m` and for the
//! mollified viscous Burgers equation `∂_t u + (ρ_m ⋆ u)·∇u - νΔu = f_m`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flow::{DriftSpec, MollifiedDrift};
use crate::grid::{spectral_derivative, Domain1D, GridField, SpaceTimeField};
use crate::mollifier::{mollify, KernelFamily, MollifierKernel};
use crate::spaces::{besov_norm_thermic, holder_seminorm, VarianceGrid, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Transport,
    Burgers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStride {
    /// `⌈M/200⌉` steps between stored frames, plus the endpoints.
    Auto,
    Every(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    Steady(GridField),
    Unsteady(SpaceTimeField),
}

impl Forcing {
    pub fn at_time(&self, domain: &Domain1D, t: f64) -> GridField {
        match self {
            Forcing::Zero => GridField::zeros(*domain),
            Forcing::Steady(f) => f.clone(),
            Forcing::Unsteady(f) => f.at_time(t),
        }
    }

    /// `‖f‖_{L^∞}` over all samples.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Steady(f) => f.sup_norm(),
            Forcing::Unsteady(f) => f.sup_norm(),
        }
    }

    pub fn frames(&self) -> Vec<GridField> {
        match self {
            Forcing::Zero => Vec::new(),
            Forcing::Steady(f) => vec![f.clone()],
            Forcing::Unsteady(f) => f.frames().to_vec(),
        }
    }

    fn try_map(&self, op: impl Fn(&GridField) -> Result<GridField>) -> Result<Forcing> {
        Ok(match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Steady(f) => Forcing::Steady(op(f)?),
            Forcing::Unsteady(f) => Forcing::Unsteady(f.try_map_frames(op)?),
        })
    }

    fn check_domain(&self, domain: &Domain1D) -> Result<()> {
        match self.frames().first() {
            Some(f) if f.domain() != domain => Err(invalid("forcing lives on a different grid")),
            _ => Ok(()),
        }
    }

    /// As a space-time field on `times`, for the Duhamel diagnostics.
    pub fn to_space_time(&self, domain: &Domain1D, times: &[f64]) -> Result<Option<SpaceTimeField>> {
        match self {
            Forcing::Zero => Ok(None),
            Forcing::Steady(f) => Ok(Some(SpaceTimeField::steady(f.clone(), times.to_vec())?)),
            Forcing::Unsteady(_) => Ok(Some(SpaceTimeField::new(
                times.to_vec(),
                times.iter().map(|&t| self.at_time(domain, t)).collect(),
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub equation: Equation,
    pub drift: DriftSpec,
    /// Kernel used for the drift (transport) or the advection speed (Burgers).
    /// Data `f`, `g` are always mollified with the Gaussian kernel.
    pub kernel: KernelFamily,
    pub m: f64,
    pub nu: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub domain: Domain1D,
    pub dt_policy: f64,
    pub n_cut: usize,
    pub stride: FrameStride,
    /// Requested step; snapped so that `n_cut` divides the step count.
    pub dt: Option<f64>,
}

impl SolveConfig {
    pub fn transport(drift: DriftSpec, m: f64, nu: f64, horizon: f64, domain: Domain1D) -> Self {
        Self {
            equation: Equation::Transport,
            drift,
            kernel: KernelFamily::Gaussian,
            m,
            nu,
            horizon,
            gamma: 0.5,
            domain,
            dt_policy: 0.4,
            n_cut: 1,
            stride: FrameStride::Auto,
            dt: None,
        }
    }

    pub fn burgers(m: f64, nu: f64, horizon: f64, domain: Domain1D) -> Self {
        Self {
            equation: Equation::Burgers,
            drift: DriftSpec::constant(0.0),
            ..Self::transport(DriftSpec::constant(0.0), m, nu, horizon, domain)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(invalid(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.dt_policy > 0.0 && self.dt_policy < 1.0) {
            return Err(invalid(format!("dt_policy must lie in (0, 1), got {}", self.dt_policy)));
        }
        if self.n_cut == 0 {
            return Err(invalid("n_cut must be at least 1"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid(format!("γ must lie in (0, 1], got {}", self.gamma)));
        }
        if let FrameStride::Every(0) = self.stride {
            return Err(invalid("frame stride must be at least 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(invalid(format!("requested dt must be positive, got {dt}")));
            }
        }
        MollifierKernel::new(self.kernel, self.m)?;
        Ok(())
    }

    pub fn drift_kernel(&self) -> Result<MollifierKernel> {
        MollifierKernel::new(self.kernel, self.m)
    }

    pub fn data_kernel(&self) -> Result<MollifierKernel> {
        MollifierKernel::gaussian(self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Advection {
    Drift(MollifiedDrift),
    /// Advection speed `ρ_m ⋆ u`, refreshed every step.
    Burgers(MollifierKernel),
}

/// Mollified inputs shared by solves and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub advection: Advection,
    pub f_m: Forcing,
    pub g_m: GridField,
}

pub fn prepare(cfg: &SolveConfig, f: &Forcing, g: &GridField) -> Result<Prepared> {
    cfg.validate()?;
    if g.domain() != &cfg.domain {
        return Err(invalid("initial data lives on a different grid"));
    }
    f.check_domain(&cfg.domain)?;
    let data = cfg.data_kernel()?;
    let advection = match cfg.equation {
        Equation::Transport => Advection::Drift(cfg.drift.mollified(&cfg.domain, &cfg.drift_kernel()?)?),
        Equation::Burgers => Advection::Burgers(cfg.drift_kernel()?),
    };
    Ok(Prepared {
        advection,
        f_m: f.try_map(|x| mollify(x, &data))?,
        g_m: mollify(g, &data)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub field: SpaceTimeField,
    pub dt: f64,
    pub steps: usize,
    /// The requested or policy step had to be shortened to align with the cuts.
    pub snapped: bool,
    pub prepared: Prepared,
}

impl Solution {
    pub fn last(&self) -> &GridField {
        self.field.last()
    }
}

/// `(dt, steps, snapped)` with `steps` a multiple of `n_cut`.
pub fn time_step(cfg: &SolveConfig, speed: f64) -> Result<(f64, usize, bool)> {
    let dx = cfg.domain.dx();
    let rate = speed / dx + 2.0 * cfg.nu / (dx * dx);
    let stable = 1.0 / rate;
    let wanted = match cfg.dt {
        Some(dt) if dt > stable * (1.0 + 1e-12) => {
            return Err(Error::Instability(format!(
                "requested dt = {dt} exceeds the stability limit {stable}"
            )))
        }
        Some(dt) => dt,
        None => cfg.dt_policy * stable,
    };
    if wanted < 1e-9 {
        return Err(Error::Resolution(format!("time step {wanted} underflows 1e-9")));
    }
    let n = cfg.n_cut;
    let per_cut = (cfg.horizon / (n as f64 * wanted) * (1.0 - 1e-12)).ceil().max(1.0);
    if per_cut * n as f64 > 5e8 {
        return Err(Error::Resolution("more than 5e8 time steps requested".into()));
    }
    let steps = per_cut as usize * n;
    let dt = cfg.horizon / steps as f64;
    Ok((dt, steps, (dt - wanted).abs() > 1e-12 * wanted))
}

fn speed_bound(cfg: &SolveConfig, prep: &Prepared) -> f64 {
    match &prep.advection {
        Advection::Drift(b) => b.sup_norm(),
        Advection::Burgers(_) => prep.g_m.sup_norm() + cfg.horizon * prep.f_m.sup_norm(),
    }
}

struct Stepper<'a> {
    cfg: &'a SolveConfig,
    prep: &'a Prepared,
    dt: f64,
    steps: usize,
    stride: usize,
    steady_drift: Option<Vec<f64>>,
    steady_force: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a SolveConfig, prep: &'a Prepared, dt: f64, steps: usize) -> Self {
        let stride = match cfg.stride {
            FrameStride::Auto => steps.div_ceil(200).max(1),
            FrameStride::Every(k) => k,
        };
        let steady_drift = match &prep.advection {
            Advection::Drift(b) if b.is_steady() => Some(b.grid_at(0.0).into_values()),
            _ => None,
        };
        let steady_force = match &prep.f_m {
            Forcing::Zero => Some(vec![0.0; cfg.domain.len()]),
            Forcing::Steady(f) => Some(f.values().to_vec()),
            Forcing::Unsteady(_) => None,
        };
        Self {
            cfg,
            prep,
            dt,
            steps,
            stride,
            steady_drift,
            steady_force,
        }
    }

    fn records(&self, k: usize) -> bool {
        k % self.stride == 0 || k == self.steps
    }

    /// Advances `u` from global step `k0` to `k1`, pushing recorded frames.
    fn run(
        &self,
        u: &mut Vec<f64>,
        k0: usize,
        k1: usize,
        times: &mut Vec<f64>,
        frames: &mut Vec<GridField>,
    ) -> Result<()> {
        let domain = self.cfg.domain;
        let n = domain.len();
        let dx = domain.dx();
        let lam = self.dt / dx;
        let mu = self.cfg.nu * self.dt / (dx * dx);
        let mut next = vec![0.0; n];
        let mut speed_buf;
        let mut force_buf;
        for k in k0..k1 {
            let t = k as f64 * self.dt;
            let speed: &[f64] = match (&self.steady_drift, &self.prep.advection) {
                (Some(b), _) => b,
                (None, Advection::Drift(b)) => {
                    speed_buf = b.grid_at(t).into_values();
                    &speed_buf
                }
                (None, Advection::Burgers(kernel)) => {
                    let cur = GridField::new(domain, u.clone())
                        .map_err(|_| Error::Instability(format!("non-finite state at t = {t}")))?;
                    speed_buf = mollify(&cur, kernel)?.into_values();
                    &speed_buf
                }
            };
            let force: &[f64] = match &self.steady_force {
                Some(f) => f,
                None => {
                    force_buf = self.prep.f_m.at_time(&domain, t).into_values();
                    &force_buf
                }
            };
            for i in 0..n {
                let l = u[(i + n - 1) % n];
                let c = u[i];
                let r = u[(i + 1) % n];
                let b = speed[i];
                let adv = if b > 0.0 { b * (c - l) } else { b * (r - c) };
                next[i] = c - lam * adv + mu * ((r + l) - 2.0 * c) + self.dt * force[i];
            }
            std::mem::swap(u, &mut next);
            if self.records(k + 1) {
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Instability(format!(
                        "non-finite values at t = {}",
                        (k + 1) as f64 * self.dt
                    )));
                }
                times.push((k + 1) as f64 * self.dt);
                frames.push(GridField::new(domain, u.clone())?);
            }
        }
        Ok(())
    }
}

fn solve_cuts(cfg: &SolveConfig, prep: Prepared, cuts: usize) -> Result<Solution> {
    let (dt, steps, snapped) = time_step(cfg, speed_bound(cfg, &prep))?;
    let stepper = Stepper::new(cfg, &prep, dt, steps);
    let mut times = vec![0.0];
    let mut frames = vec![prep.g_m.clone()];
    let per_cut = steps / cuts;
    let mut state = prep.g_m.values().to_vec();
    for c in 0..cuts {
        // Each interval restarts from the stored data at its left end.
        let mut u = state.clone();
        stepper.run(&mut u, c * per_cut, (c + 1) * per_cut, &mut times, &mut frames)?;
        state = u;
    }
    Ok(Solution {
        field: SpaceTimeField::new(times, frames)?,
        dt,
        steps,
        snapped,
        prepared: prep,
    })
}

/// Solves with already mollified inputs.
pub fn solve_prepared(cfg: &SolveConfig, prep: Prepared) -> Result<Solution> {
    cfg.validate()?;
    solve_cuts(cfg, prep, 1)
}

pub fn solve_parabolic(cfg: &SolveConfig, f: &Forcing, g: &GridField) -> Result<Solution> {
    if cfg.equation != Equation::Transport {
        return Err(invalid("solve_parabolic needs the transport equation"));
    }
    solve_cuts(cfg, prepare(cfg, f, g)?, 1)
}

pub fn solve_burgers(cfg: &SolveConfig, f: &Forcing, g: &GridField) -> Result<Solution> {
    if cfg.equation != Equation::Burgers {
        return Err(invalid("solve_burgers needs the Burgers equation"));
    }
    solve_cuts(cfg, prepare(cfg, f, g)?, 1)
}

/// Solves on `[kT/n, (k+1)T/n]` in turn, restarting from `u(kT/n)`.
pub fn time_cut_solve(cfg: &SolveConfig, f: &Forcing, g: &GridField) -> Result<Solution> {
    solve_cuts(cfg, prepare(cfg, f, g)?, cfg.n_cut)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSeries {
    pub times: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub third: Vec<f64>,
}

/// `‖∇^k u(t)‖_∞` on `window` for `k = 1, 2, 3`, by spectral differentiation.
pub fn measure_derivatives(u: &SpaceTimeField, window: Window) -> Result<DerivativeSeries> {
    let mut out = DerivativeSeries {
        times: u.times().to_vec(),
        grad: Vec::with_capacity(u.len()),
        hess: Vec::with_capacity(u.len()),
        third: Vec::with_capacity(u.len()),
    };
    for f in u.frames() {
        out.grad.push(spectral_derivative(f, 1)?.sup_norm_in(window.lo, window.hi));
        out.hess.push(spectral_derivative(f, 2)?.sup_norm_in(window.lo, window.hi));
        out.third.push(spectral_derivative(f, 3)?.sup_norm_in(window.lo, window.hi));
    }
    Ok(out)
}

/// Norms entering the a priori derivative envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeInputs {
    pub m: f64,
    pub nu: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub beta: f64,
    /// `‖b‖_{L^∞(B^{-β})}`.
    pub b_besov: f64,
    /// `‖b_m‖_{L^∞(C^1)}`.
    pub b_m_c1: f64,
    /// `‖f_m‖_{L^∞(C^1)}`.
    pub f_m_c1: f64,
    /// `‖f‖_{L^∞(C^γ)}` and `‖f_m‖_{L^∞(C^γ)}`.
    pub f_holder: f64,
    pub f_m_holder: f64,
    /// `[g]_γ`, `‖g‖_{C^γ}`, `‖g_m‖_{C^γ}`.
    pub g_seminorm: f64,
    pub g_holder: f64,
    pub g_m_holder: f64,
    /// `‖g_m‖_{C^1}` and `‖∇²g_m‖_∞`.
    pub g_m_c1: f64,
    pub g_m_hess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `O_m(t)`.
    Gradient,
    /// `O^{(2)}_m(t)`.
    Hessian,
    Third,
    /// Viscosity-weighted gradient estimate.
    GradientViscous,
    /// Viscosity-weighted Hessian estimate.
    HessianViscous,
}

impl EnvelopeInputs {
    fn growth(&self, t: f64, c: f64) -> f64 {
        (c * self.m.powf(1.0 + self.beta) * t * self.b_besov).exp()
    }

    fn data(&self, t: f64) -> f64 {
        t * self.f_holder + self.g_seminorm
    }

    pub fn envelope(&self, kind: EnvelopeKind, t: f64, c: f64) -> f64 {
        let g = self.gamma;
        match kind {
            EnvelopeKind::Gradient => (self.horizon * self.f_m_c1 + self.g_m_c1) * self.growth(t, c),
            EnvelopeKind::Hessian => c * self.m.powf(2.0 - g) * self.data(t) * self.growth(t, c),
            EnvelopeKind::Third => c * self.m.powf(3.0 - g) * self.data(t) * self.growth(t, c),
            EnvelopeKind::GradientViscous => {
                self.m.powf(1.0 - g) * (t * self.f_holder + self.g_holder)
                    + c * self.b_m_c1
                        * (t * self.f_m_holder + self.g_m_holder)
                        * self.nu.powf(0.5 * (g - 1.0))
                        * t.powf(0.5 * (g + 1.0))
            }
            EnvelopeKind::HessianViscous => {
                let w = self.nu.powf(0.5 * g - 1.0) * t.powf(0.5 * g);
                c * w * self.f_holder
                    + self.g_m_hess
                    + c * self.b_m_c1 * (t * self.f_m_holder + self.g_m_holder) * w
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEnvelopes {
    pub series: DerivativeSeries,
    pub inputs: EnvelopeInputs,
}

impl DerivativeEnvelopes {
    fn measured(&self, kind: EnvelopeKind) -> &[f64] {
        match kind {
            EnvelopeKind::Gradient | EnvelopeKind::GradientViscous => &self.series.grad,
            EnvelopeKind::Hessian | EnvelopeKind::HessianViscous => &self.series.hess,
            EnvelopeKind::Third => &self.series.third,
        }
    }

    /// Whether every measured value sits below the envelope with constant `c`.
    pub fn holds(&self, kind: EnvelopeKind, c: f64) -> bool {
        self.series
            .times
            .iter()
            .zip(self.measured(kind))
            .all(|(&t, &v)| v <= self.inputs.envelope(kind, t, c) * (1.0 + 1e-12) + 1e-12)
    }

    /// Smallest constant for which the envelope holds, by bisection in log scale.
    /// `None` when even `c = 1e8` fails.
    pub fn min_constant(&self, kind: EnvelopeKind) -> Option<f64> {
        let (mut lo, mut hi) = (1e-8_f64, 1e8_f64);
        if self.holds(kind, lo) {
            return Some(lo);
        }
        if !self.holds(kind, hi) {
            return None;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.holds(kind, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi / lo < 1.0 + 1e-10 {
                break;
            }
        }
        Some(hi)
    }
}

/// Measures the derivative series of a transport run and collects the norms
/// its envelopes depend on. Norms are taken on `window`.
pub fn derivative_envelopes(
    cfg: &SolveConfig,
    solution: &Solution,
    f: &Forcing,
    g: &GridField,
    window: Window,
) -> Result<DerivativeEnvelopes> {
    let series = measure_derivatives(&solution.field, window)?;
    let prep = &solution.prepared;
    let gamma = cfg.gamma;
    let dist = crate::spaces::default_pair_distance(&cfg.domain);
    let full = Window::full(&cfg.domain);
    let seminorm = |h: &GridField| -> Result<f64> { Ok(holder_seminorm(h, gamma, full, dist)?.value) };
    let c1 = |h: &GridField| -> Result<f64> { Ok(h.sup_norm() + spectral_derivative(h, 1)?.sup_norm()) };
    let mut f_holder = 0.0_f64;
    for h in f.frames() {
        f_holder = f_holder.max(h.sup_norm() + seminorm(&h)?);
    }
    let (mut f_m_holder, mut f_m_c1) = (0.0_f64, 0.0_f64);
    for h in prep.f_m.frames() {
        f_m_holder = f_m_holder.max(h.sup_norm() + seminorm(&h)?);
        f_m_c1 = f_m_c1.max(c1(&h)?);
    }
    let beta = cfg.drift.beta();
    let vg = VarianceGrid::default_for(&cfg.domain)?;
    let mut b_besov = 0.0_f64;
    for frame in cfg.drift.sample_frames(&cfg.domain) {
        b_besov = b_besov.max(besov_norm_thermic(&frame, -beta, &vg)?.value);
    }
    let b_m_c1 = match &prep.advection {
        Advection::Drift(b) => b.sup_norm() + b.lipschitz(),
        Advection::Burgers(_) => return Err(invalid("derivative envelopes are defined for transport runs")),
    };
    let g_seminorm = seminorm(g)?;
    let inputs = EnvelopeInputs {
        m: cfg.m,
        nu: cfg.nu,
        horizon: cfg.horizon,
        gamma,
        beta,
        b_besov,
        b_m_c1,
        f_m_c1,
        f_holder,
        f_m_holder,
        g_seminorm,
        g_holder: g.sup_norm() + g_seminorm,
        g_m_holder: prep.g_m.sup_norm() + seminorm(&prep.g_m)?,
        g_m_c1: c1(&prep.g_m)?,
        g_m_hess: spectral_derivative(&prep.g_m, 2)?.sup_norm(),
    };
    Ok(DerivativeEnvelopes { series, inputs })
}
