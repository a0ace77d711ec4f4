//! Sweeps that turn the a priori bounds and uniqueness statements into
//! reproducible tables.

use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::grid::{Domain1D, GridField, SpaceTimeField};
use crate::mollifier::KernelFamily;
use crate::proxy::{duhamel_residual, FreezingPoint};
use crate::grid::spectral_derivative;
use crate::schedules::{
    condinu_transport, turbulent_nu_max, uniqueness_window_transport, viscous_nu_min, BurgersKind, BurgersNorms,
    ScheduleConstants, TransportNorms,
};
use crate::solver::{
    derivative_envelopes, prepare, solve_prepared, time_step, Advection, DerivativeEnvelopes,
    EnvelopeKind, Equation, Forcing, Solution, SolveConfig,
};
use crate::spaces::{
    besov_norm_thermic, default_pair_distance, holder_seminorm, NormEstimate, VarianceGrid, Window,
};

/// Lowercase hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configurations serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub equation: String,
    pub m: f64,
    pub nu: f64,
    pub n_cut: usize,
    pub t: f64,
    pub sup_norm: f64,
    pub holder_norm: f64,
    pub bound: f64,
    pub slack: f64,
    pub residual: f64,
    pub wall_ms: f64,
    /// `T‖f‖_∞ + ‖g‖_∞`.
    pub sup_bound: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

impl ReportRow {
    fn failed(cfg: &SolveConfig, err: &Error) -> Self {
        Self {
            equation: equation_name(cfg.equation).into(),
            m: cfg.m,
            nu: cfg.nu,
            n_cut: cfg.n_cut,
            t: f64::NAN,
            sup_norm: f64::NAN,
            holder_norm: f64::NAN,
            bound: f64::NAN,
            slack: f64::NAN,
            residual: f64::NAN,
            wall_ms: 0.0,
            sup_bound: f64::NAN,
            config_hash: config_hash(cfg),
            error: Some(err.to_string()),
        }
    }
}

pub fn equation_name(e: Equation) -> &'static str {
    match e {
        Equation::Transport => "transport",
        Equation::Burgers => "burgers",
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// Smallest `slack / bound` over successful rows.
    pub fn worst_relative_slack(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| if r.bound > 0.0 { r.slack / r.bound } else { r.slack })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Initial data and forcing shared across a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepData {
    pub f: Forcing,
    pub g: GridField,
}

/// `[-L/2, L/2]` shrunk by `4·max(1/m, √(νT))`.
pub fn interior_window(domain: &Domain1D, m: f64, nu: f64, horizon: f64) -> Result<Window> {
    Window::interior(domain, 4.0 * (1.0 / m).max((nu * horizon).sqrt()))
}

/// `sup_s [f(s)]_γ` and `sup_s ‖f(s)‖_∞` over the forcing samples.
fn forcing_norms(f: &Forcing, gamma: f64) -> Result<(f64, f64)> {
    let mut semi = 0.0_f64;
    let mut sup = 0.0_f64;
    for h in f.frames() {
        let d = *h.domain();
        semi = semi.max(holder_seminorm(&h, gamma, Window::full(&d), default_pair_distance(&d))?.value);
        sup = sup.max(h.sup_norm());
    }
    Ok((semi, sup))
}

fn g_seminorm(g: &GridField, gamma: f64) -> Result<f64> {
    let d = *g.domain();
    Ok(holder_seminorm(g, gamma, Window::full(&d), default_pair_distance(&d))?.value)
}

/// Norm inputs of the transport viscosity condition for `cfg` and `data`.
pub fn transport_norms(cfg: &SolveConfig, data: &SweepData) -> Result<TransportNorms> {
    let (semi, sup) = forcing_norms(&data.f, cfg.gamma)?;
    let vg = VarianceGrid::default_for(&cfg.domain)?;
    let beta = cfg.drift.beta();
    let mut b_norm = 0.0_f64;
    for frame in cfg.drift.sample_frames(&cfg.domain) {
        b_norm = b_norm.max(besov_norm_thermic(&frame, -beta, &vg)?.value);
    }
    Ok(TransportNorms {
        f_holder: semi + sup,
        g_seminorm: g_seminorm(&data.g, cfg.gamma)?,
        b_norm,
        horizon: cfg.horizon,
        gamma: cfg.gamma,
        beta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum NuSource {
    Fixed(Vec<f64>),
    /// The transport viscosity condition at each `m`.
    Condinu(ScheduleConstants),
}

fn frames_near(field: &SpaceTimeField, targets: &[f64]) -> Vec<usize> {
    let times = field.times();
    let mut out: Vec<usize> = targets
        .iter()
        .map(|&t| {
            (0..times.len())
                .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
                .expect("frames")
        })
        .collect();
    out.dedup();
    out
}

fn bound_rows(cfg: &SolveConfig, data: &SweepData, sol: &Solution, wall_ms: f64) -> Result<Vec<ReportRow>> {
    let (f_semi, f_sup) = forcing_norms(&data.f, cfg.gamma)?;
    let g_semi = g_seminorm(&data.g, cfg.gamma)?;
    let window = interior_window(&cfg.domain, cfg.m, cfg.nu, cfg.horizon)?;
    let dist = default_pair_distance(&cfg.domain);
    let hash = config_hash(cfg);
    let quarters: Vec<f64> = (1..=4).map(|k| cfg.horizon * k as f64 / 4.0).collect();
    frames_near(&sol.field, &quarters)
        .into_iter()
        .map(|k| {
            let t = sol.field.times()[k];
            let u = &sol.field.frames()[k];
            let holder = holder_seminorm(u, cfg.gamma, window, dist)?.value;
            let bound = t * f_semi + g_semi;
            Ok(ReportRow {
                equation: equation_name(cfg.equation).into(),
                m: cfg.m,
                nu: cfg.nu,
                n_cut: cfg.n_cut,
                t,
                sup_norm: u.sup_norm(),
                holder_norm: holder,
                bound,
                slack: bound - holder,
                residual: f64::NAN,
                wall_ms,
                sup_bound: cfg.horizon * f_sup + data.g.sup_norm(),
                config_hash: hash.clone(),
                error: None,
            })
        })
        .collect()
}

fn run_configs<T: Send>(configs: Vec<SolveConfig>, job: impl Fn(&SolveConfig) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    let it = configs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let it = configs.iter();
    it.map(job).collect()
}

/// Solves for every `(m, ν)` pair and records `[u(t)]_γ` and `‖u‖_∞` against
/// `t[f]_γ + [g]_γ` and `T‖f‖_∞ + ‖g‖_∞` at the quarter times. Failed runs
/// become rows carrying the error.
pub fn holder_bound_sweep(base: &SolveConfig, data: &SweepData, m_list: &[f64], nu: &NuSource) -> Result<RunReport> {
    if base.equation != Equation::Transport {
        return Err(invalid("Hölder sweeps run the transport equation"));
    }
    let mut configs = Vec::new();
    for &m in m_list {
        let nus = match nu {
            NuSource::Fixed(v) => v.clone(),
            NuSource::Condinu(consts) => {
                let mut probe = base.clone();
                probe.m = m;
                let bound = condinu_transport(m, &transport_norms(&probe, data)?, consts)?;
                vec![bound.nu_max.min(1.0 / base.horizon)]
            }
        };
        for v in nus {
            let mut cfg = base.clone();
            cfg.m = m;
            cfg.nu = v;
            configs.push(cfg);
        }
    }
    let rows = run_configs(configs, |cfg| {
        let start = Instant::now();
        let out = prepare(cfg, &data.f, &data.g).and_then(|p| solve_prepared(cfg, p));
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match out.and_then(|sol| bound_rows(cfg, data, &sol, ms)) {
            Ok(rows) => rows,
            Err(e) => vec![ReportRow::failed(cfg, &e)],
        }
    });
    Ok(RunReport {
        rows: rows.into_iter().flatten().collect(),
    })
}

/// One pair of runs compared by the uniqueness gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub m: f64,
    pub kernel: KernelFamily,
    pub nu: f64,
    pub kernel_bar: KernelFamily,
    pub nu_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub pair: GapPair,
    /// `sup_{t,x} |u - ū|`.
    pub gap: f64,
    pub dt: f64,
    pub wall_ms: f64,
}

/// Pairs from the transport uniqueness window: Gaussian at the geometric
/// mean of the window against the bump at half that viscosity.
pub fn transport_window_pairs(
    m_list: &[f64],
    gamma: f64,
    gamma_tilde: f64,
    data: &SweepData,
    consts: &ScheduleConstants,
) -> Result<Vec<GapPair>> {
    m_list
        .iter()
        .map(|&m| {
            let gm = crate::mollifier::mollify(&data.g, &crate::mollifier::MollifierKernel::gaussian(m)?)?;
            let hess = spectral_derivative(&gm, 2)?.sup_norm();
            let w = uniqueness_window_transport(m, gamma, gamma_tilde, hess, consts)?;
            if w.empty {
                return Err(Error::DegenerateInput(format!("empty viscosity window at m = {m}")));
            }
            let nu = w.geometric_mean();
            Ok(GapPair {
                m,
                kernel: KernelFamily::Gaussian,
                nu,
                kernel_bar: KernelFamily::CompactBump,
                nu_bar: 0.5 * nu,
            })
        })
        .collect()
}

/// Norm inputs of the Burgers uniqueness conditions for `cfg` and `data`.
pub fn burgers_norms(cfg: &SolveConfig, data: &SweepData) -> Result<BurgersNorms> {
    let prep = prepare(cfg, &data.f, &data.g)?;
    let c1 = |h: &GridField| -> Result<f64> { Ok(h.sup_norm() + spectral_derivative(h, 1)?.sup_norm()) };
    let mut f_m_c1 = 0.0_f64;
    for h in prep.f_m.frames() {
        f_m_c1 = f_m_c1.max(c1(&h)?);
    }
    let f_grad = data.f.frames().iter().map(GridField::max_slope).fold(0.0, f64::max);
    Ok(BurgersNorms {
        f_sup: data.f.sup_norm(),
        g_sup: data.g.sup_norm(),
        f_m_c1,
        g_m_c1: c1(&prep.g_m)?,
        f_grad,
        g_grad: data.g.max_slope(),
        g_m_hess: spectral_derivative(&prep.g_m, 2)?.sup_norm(),
        gamma: cfg.gamma,
        horizon: cfg.horizon,
    })
}

/// Pairs under a Burgers schedule. The turbulent schedule runs the Gaussian
/// at `ν_max` against the bump at `ν_max/2`; the viscous one runs both
/// kernels at `1.01·ν_min`.
pub fn burgers_schedule_pairs(
    kind: BurgersKind,
    base: &SolveConfig,
    data: &SweepData,
    m_list: &[f64],
    consts: &ScheduleConstants,
) -> Result<Vec<GapPair>> {
    m_list
        .iter()
        .map(|&m| {
            let mut cfg = base.clone();
            cfg.m = m;
            let norms = burgers_norms(&cfg, data)?;
            let (nu, nu_bar) = match kind {
                BurgersKind::Turbulent => {
                    let b = turbulent_nu_max(m, &norms, consts);
                    (b.nu_max, 0.5 * b.nu_max)
                }
                BurgersKind::Viscous => {
                    let nu = viscous_nu_min(m, &norms, consts)
                        .ok_or_else(|| Error::DegenerateInput(format!("no viscous-regime viscosity at m = {m}")))?;
                    (1.01 * nu, 1.01 * nu)
                }
            };
            Ok(GapPair {
                m,
                kernel: KernelFamily::Gaussian,
                nu,
                kernel_bar: KernelFamily::CompactBump,
                nu_bar,
            })
        })
        .collect()
}

/// `G = sup_{t,x}|u - ū|` for runs sharing the data and a common time step.
pub fn gap_between(base: &SolveConfig, data: &SweepData, pair: &GapPair) -> Result<GapRow> {
    let start = Instant::now();
    let mut a = base.clone();
    a.m = pair.m;
    a.kernel = pair.kernel;
    a.nu = pair.nu;
    let mut b = a.clone();
    b.kernel = pair.kernel_bar;
    b.nu = pair.nu_bar;
    let pa = prepare(&a, &data.f, &data.g)?;
    let pb = prepare(&b, &data.f, &data.g)?;
    let speed = |p: &crate::solver::Prepared, cfg: &SolveConfig| match &p.advection {
        Advection::Drift(d) => d.sup_norm(),
        Advection::Burgers(_) => p.g_m.sup_norm() + cfg.horizon * p.f_m.sup_norm(),
    };
    let dt = time_step(&a, speed(&pa, &a))?.0.min(time_step(&b, speed(&pb, &b))?.0);
    a.dt = Some(dt);
    b.dt = Some(dt);
    b.stride = a.stride;
    let ua = solve_prepared(&a, pa)?;
    let ub = solve_prepared(&b, pb)?;
    Ok(GapRow {
        pair: *pair,
        gap: ua.field.sup_distance(&ub.field)?,
        dt: ua.dt,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn uniqueness_gap(base: &SolveConfig, data: &SweepData, pairs: &[GapPair]) -> Result<Vec<GapRow>> {
    #[cfg(feature = "parallel")]
    let it = pairs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let it = pairs.iter();
    it.map(|p| gap_between(base, data, p)).collect()
}

/// `sgn(x)`, zero at the origin.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyReport {
    /// Sup error against `sgn(x)√|x|` on `[-0.8, -0.1] ∪ [0.1, 0.8]`.
    pub sup_error: f64,
    pub error_positive: f64,
    pub error_negative: f64,
    /// `sup_{|x| ≤ 0.8} |u(T) - u(T - δ)| / δ` over the last stored frame gap.
    pub final_rate: f64,
    /// `‖u + u(-·)‖_∞`.
    pub odd_defect: f64,
    pub solution: Solution,
}

fn branch_error(u: &GridField, lo: f64, hi: f64) -> f64 {
    let d = u.domain();
    d.indices_in(lo, hi)
        .map(|i| {
            let x = d.x(i);
            (u.values()[i] - sign(x) * x.abs().sqrt()).abs()
        })
        .fold(0.0, f64::max)
}

/// `f = ½ sgn` (windowed), `g = 0`: the forced Burgers flow settles on the odd
/// steady branch `sgn(x)√|x|` of `u u' = ½ sgn(x)`.
pub fn burgers_steady_state(nu: f64, horizon: f64, domain: Domain1D, m: f64) -> Result<SteadyReport> {
    let f = Forcing::Steady(domain.windowed(|x| 0.5 * sign(x)));
    let cfg = SolveConfig::burgers(m, nu, horizon, domain);
    let sol = crate::solver::solve_burgers(&cfg, &f, &GridField::zeros(domain))?;
    let u = sol.last();
    let error_positive = branch_error(u, 0.1, 0.8);
    let error_negative = branch_error(u, -0.8, -0.1);
    let n = sol.field.len();
    let final_rate = if n >= 2 {
        let dt = sol.field.times()[n - 1] - sol.field.times()[n - 2];
        (&sol.field.frames()[n - 1] - &sol.field.frames()[n - 2]).sup_norm_in(-0.8, 0.8) / dt
    } else {
        0.0
    };
    let odd_defect = (&u.reflect() + u).sup_norm();
    Ok(SteadyReport {
        sup_error: error_positive.max(error_negative),
        error_positive,
        error_negative,
        final_rate,
        odd_defect,
        solution: sol,
    })
}

/// `sup |u u' - f|` on `window`, with `u'` spectral.
pub fn steady_residual(u: &GridField, f: &GridField, window: Window) -> Result<f64> {
    let du = spectral_derivative(u, 1)?;
    let r = u.zip_with(&du, |a, b| a * b)?.zip_with(f, |a, b| a - b)?;
    Ok(r.sup_norm_in(window.lo, window.hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub times: Vec<f64>,
    pub runs: Vec<(f64, f64)>,
    /// `diameters[i][k]`: sup-norm diameter of `{u_j(times[i]) : j >= k}`.
    pub diameters: Vec<Vec<f64>>,
    /// Per run, `sup_t ‖u(t) - u(t, -·)‖_∞` and `sup_t ‖u(t) + u(t, -·)‖_∞`.
    pub even_defect: Vec<f64>,
    pub odd_defect: Vec<f64>,
}

/// Transport runs along a `(m, ν)` schedule with the drift of `base`; reports
/// per-time tail diameters and symmetry defects.
pub fn peano_selection(base: &SolveConfig, data: &SweepData, runs: &[(f64, f64)], times: &[f64]) -> Result<SelectionReport> {
    let configs: Vec<SolveConfig> = runs
        .iter()
        .map(|&(m, nu)| {
            let mut c = base.clone();
            c.m = m;
            c.nu = nu;
            c
        })
        .collect();
    let sols = run_configs(configs, |cfg| prepare(cfg, &data.f, &data.g).and_then(|p| solve_prepared(cfg, p)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut diameters = Vec::with_capacity(times.len());
    for &t in times {
        let us: Vec<GridField> = sols.iter().map(|s| s.field.at_time(t)).collect();
        let mut row = vec![0.0; us.len()];
        for k in (0..us.len()).rev() {
            let mut d = if k + 1 < us.len() { row[k + 1] } else { 0.0 };
            for j in k + 1..us.len() {
                d = f64::max(d, us[k].sup_distance(&us[j])?);
            }
            row[k] = d;
        }
        diameters.push(row);
    }
    let defect = |s: &Solution, sgn: f64| {
        s.field
            .frames()
            .iter()
            .map(|u| (&(&u.reflect() * sgn) + u).sup_norm())
            .fold(0.0, f64::max)
    };
    Ok(SelectionReport {
        times: times.to_vec(),
        runs: runs.to_vec(),
        diameters,
        even_defect: sols.iter().map(|s| defect(s, -1.0)).collect(),
        odd_defect: sols.iter().map(|s| defect(s, 1.0)).collect(),
    })
}

/// `B^{-1+γ}` norms of centred time differences of the stored frames.
pub fn time_derivative_besov(sol: &Solution, gamma: f64) -> Result<Vec<(f64, NormEstimate)>> {
    let times = sol.field.times();
    let horizon = *times.last().expect("frames");
    if times.len() < 3 || times.windows(2).any(|w| w[1] - w[0] > horizon / 100.0 * (1.0 + 1e-9)) {
        return Err(Error::Resolution("frame spacing exceeds T/100; store denser frames".into()));
    }
    let vg = VarianceGrid::default_for(sol.field.domain())?;
    let frames = sol.field.frames();
    (1..times.len() - 1)
        .map(|k| {
            let h = times[k + 1] - times[k - 1];
            let du = frames[k + 1].zip_with(&frames[k - 1], |a, b| (a - b) / h)?;
            Ok((times[k], besov_norm_thermic(&du, -1.0 + gamma, &vg)?))
        })
        .collect()
}

/// Duhamel residual of a transport solution at its final time.
pub fn duhamel_check(sol: &Solution, nu: f64, point: FreezingPoint) -> Result<f64> {
    let Advection::Drift(b) = &sol.prepared.advection else {
        return Err(invalid("the Duhamel residual is defined for transport runs"));
    };
    let f = sol.prepared.f_m.to_space_time(sol.field.domain(), sol.field.times())?;
    duhamel_residual(&sol.field, b, f.as_ref(), &sol.prepared.g_m, nu, point)
}

/// Derivative envelopes of transport runs over `m_list`.
pub fn envelope_sweep(base: &SolveConfig, data: &SweepData, m_list: &[f64]) -> Result<Vec<DerivativeEnvelopes>> {
    let configs: Vec<SolveConfig> = m_list
        .iter()
        .map(|&m| {
            let mut c = base.clone();
            c.m = m;
            c
        })
        .collect();
    run_configs(configs, |cfg| {
        let sol = solve_prepared(cfg, prepare(cfg, &data.f, &data.g)?)?;
        let window = interior_window(&cfg.domain, cfg.m, cfg.nu, cfg.horizon)?;
        derivative_envelopes(cfg, &sol, &data.f, &data.g, window)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCalibration {
    pub kind: EnvelopeKind,
    /// Largest per-run minimal constant over the calibration runs.
    pub calibrated: f64,
    /// Constant used for validation, `1.1·calibrated`.
    pub constant: f64,
    pub per_run: Vec<Option<f64>>,
    /// Every validation run satisfies the envelope with `constant`.
    pub validated: bool,
}

/// Calibrates one constant on `calibration` and checks it on `validation`.
pub fn calibrate_envelope(
    calibration: &[DerivativeEnvelopes],
    validation: &[DerivativeEnvelopes],
    kind: EnvelopeKind,
) -> EnvelopeCalibration {
    let per_run: Vec<Option<f64>> = calibration.iter().map(|e| e.min_constant(kind)).collect();
    let calibrated = per_run
        .iter()
        .map(|c| c.unwrap_or(f64::INFINITY))
        .fold(0.0_f64, f64::max);
    let constant = 1.1 * calibrated;
    let validated = constant.is_finite() && validation.iter().all(|e| e.holds(kind, constant));
    EnvelopeCalibration {
        kind,
        calibrated,
        constant,
        per_run,
        validated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DriftSpec;
    use crate::solver::FrameStride;

    fn dom() -> Domain1D {
        Domain1D::new(4.0, 256).unwrap()
    }

    #[test]
    fn hashes_are_stable_and_sensitive() {
        let cfg = SolveConfig::transport(DriftSpec::constant(0.5), 8.0, 0.1, 1.0, dom());
        let a = config_hash(&cfg);
        assert_eq!(a, config_hash(&cfg.clone()));
        assert_eq!(a.len(), 64);
        let mut other = cfg.clone();
        other.nu = 0.2;
        assert_ne!(a, config_hash(&other));
    }

    #[test]
    fn heat_sweep_has_nonnegative_slack() {
        let d = dom();
        let cfg = SolveConfig::transport(DriftSpec::constant(0.0), 8.0, 0.1, 0.5, d);
        let data = SweepData {
            f: Forcing::Zero,
            g: d.windowed(|x| x.abs().sqrt()),
        };
        let rep = holder_bound_sweep(&cfg, &data, &[8.0, 16.0], &NuSource::Fixed(vec![0.1, 0.01])).unwrap();
        assert_eq!(rep.rows.len(), 16);
        assert!(rep.rows.iter().all(|r| r.error.is_none() && r.slack >= 0.0));
        assert!(rep.rows.iter().all(|r| r.sup_norm <= r.sup_bound + 1e-12));
    }

    #[test]
    fn failed_runs_become_rows() {
        let d = dom();
        let cfg = SolveConfig::transport(DriftSpec::constant(0.0), 8.0, 0.1, 0.5, d);
        let data = SweepData {
            f: Forcing::Zero,
            g: d.windowed(|x| x.cos()),
        };
        let rep = holder_bound_sweep(&cfg, &data, &[8.0], &NuSource::Fixed(vec![0.1, 1e9])).unwrap();
        assert_eq!(rep.failures().count(), 1);
        assert!(rep.rows.iter().any(|r| r.error.is_none()));
    }

    #[test]
    fn identical_runs_have_zero_gap() {
        let d = dom();
        let cfg = SolveConfig::transport(DriftSpec::peano(0.9, 1.0).unwrap(), 8.0, 1e-3, 0.5, d);
        let data = SweepData {
            f: Forcing::Zero,
            g: d.windowed(|x| (-(x * x)).exp()),
        };
        let pair = GapPair {
            m: 8.0,
            kernel: KernelFamily::Gaussian,
            nu: 1e-3,
            kernel_bar: KernelFamily::Gaussian,
            nu_bar: 1e-3,
        };
        assert_eq!(gap_between(&cfg, &data, &pair).unwrap().gap, 0.0);
        let swapped = GapPair {
            kernel: KernelFamily::CompactBump,
            nu_bar: 5e-4,
            ..pair
        };
        let back = GapPair {
            kernel: swapped.kernel_bar,
            nu: swapped.nu_bar,
            kernel_bar: swapped.kernel,
            nu_bar: swapped.nu,
            ..swapped
        };
        let a = gap_between(&cfg, &data, &swapped).unwrap().gap;
        let b = gap_between(&cfg, &data, &back).unwrap().gap;
        assert!(a > 0.0 && a == b);
    }

    #[test]
    fn steady_profile_residual_is_small_away_from_origin() {
        let d = Domain1D::new(4.0, 2048).unwrap();
        let u = d.windowed(|x| sign(x) * x.abs().sqrt());
        let f = d.windowed(|x| 0.5 * sign(x));
        let pos = steady_residual(&u, &f, Window::new(0.1, 0.8).unwrap()).unwrap();
        let neg = steady_residual(&u, &f, Window::new(-0.8, -0.1).unwrap()).unwrap();
        assert!(pos <= 5e-2 && neg <= 5e-2, "{pos} {neg}");
    }

    #[test]
    fn constant_data_have_zero_diameter() {
        let d = dom();
        let cfg = SolveConfig::transport(DriftSpec::peano(0.5, 2.0).unwrap(), 8.0, 1e-3, 0.5, d);
        let data = SweepData {
            f: Forcing::Steady(GridField::constant(d, 0.2)),
            g: GridField::constant(d, 1.0),
        };
        let rep = peano_selection(&cfg, &data, &[(8.0, 1e-2), (16.0, 1e-3)], &[0.25, 0.5]).unwrap();
        for row in &rep.diameters {
            assert!(row.iter().all(|&v| v < 1e-13));
        }
        assert!(rep.even_defect.iter().all(|&v| v < 1e-13));
    }

    #[test]
    fn static_solution_has_zero_time_derivative() {
        let d = dom();
        let mut cfg = SolveConfig::transport(DriftSpec::peano(0.5, 2.0).unwrap(), 8.0, 1e-2, 0.5, d);
        cfg.stride = FrameStride::Every(1);
        cfg.dt = Some(1e-3);
        let sol = crate::solver::solve_parabolic(&cfg, &Forcing::Zero, &GridField::constant(d, 0.3)).unwrap();
        let series = time_derivative_besov(&sol, 0.5).unwrap();
        assert!(series.iter().all(|(_, n)| n.value < 1e-10));
        cfg.stride = FrameStride::Auto;
        cfg.dt = Some(0.5 / 50.0 * 0.999);
        assert!(crate::solver::solve_parabolic(&cfg, &Forcing::Zero, &GridField::constant(d, 0.3))
            .and_then(|s| time_derivative_besov(&s, 0.5))
            .is_err());
    }
}
