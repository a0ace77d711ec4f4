//! Frozen-coefficient proxies: perturbed heat kernels, the associated
//! semigroup and Green operators, regime exponents and the cut-locus time.
//!
//! Freezing at `(τ, ξ)` follows the characteristic `Ẋ_s = b_m(s, X_s)`,
//! `X_τ = ξ`, of `∂_t u + b_m·∇u - νΔu = f`. The perturbed kernel is centred
//! at `x - ∫_s^t b_m(r, X_r) dr`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::flow::{integrate_flow_to, FlowTrajectory, MollifiedDrift};
use crate::grid::{heat_convolve_shifted, spectral_derivative, GridField, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezingPoint {
    pub tau: f64,
    pub xi: f64,
}

impl FreezingPoint {
    pub fn new(tau: f64, xi: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() || !xi.is_finite() {
            return Err(invalid(format!("bad freezing point ({tau}, {xi})")));
        }
        Ok(Self { tau, xi })
    }
}

/// The frozen characteristic through `(τ, ξ)` on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPath {
    pub point: FreezingPoint,
    backward: FlowTrajectory,
    forward: FlowTrajectory,
}

impl FrozenPath {
    pub fn new(b: &MollifiedDrift, point: FreezingPoint, t_end: f64, dt: f64) -> Result<Self> {
        if point.tau > t_end {
            return Err(invalid("freezing time lies beyond the path horizon"));
        }
        let rev = b.negated();
        Ok(Self {
            point,
            backward: integrate_flow_to(&rev, point.xi, point.tau, 0.0, dt)?,
            forward: integrate_flow_to(&rev, point.xi, point.tau, t_end, dt)?,
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.forward.times.last().expect("path has samples")
    }

    /// `X_s`.
    pub fn position(&self, s: f64) -> f64 {
        if s <= self.point.tau {
            self.backward.position_at(s)
        } else {
            self.forward.position_at(s)
        }
    }

    /// `∫_s^t b_m(r, X_r) dr`, which equals `X_t - X_s`.
    pub fn drift_integral(&self, s: f64, t: f64) -> f64 {
        self.position(t) - self.position(s)
    }

    /// The same integral by the trapezoid rule on the stored samples.
    pub fn drift_integral_trapezoid(&self, s: f64, t: f64) -> f64 {
        let (lo, hi, sign) = if s <= t { (s, t, 1.0) } else { (t, s, -1.0) };
        let mut nodes: Vec<(f64, f64)> = self
            .backward
            .times
            .iter()
            .zip(&self.backward.velocities)
            .chain(self.forward.times.iter().zip(&self.forward.velocities).skip(1))
            .map(|(&r, &v)| (r, v))
            .collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let velocity = |r: f64| {
            let k = nodes.partition_point(|n| n.0 <= r).clamp(1, nodes.len() - 1);
            let (a, b) = (nodes[k - 1], nodes[k]);
            let w = if b.0 > a.0 { (r - a.0) / (b.0 - a.0) } else { 0.0 };
            (1.0 - w) * a.1 + w * b.1
        };
        let mut pts = vec![lo];
        pts.extend(nodes.iter().map(|n| n.0).filter(|&r| r > lo && r < hi));
        pts.push(hi);
        let sum: f64 = pts
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (velocity(w[0]) + velocity(w[1])))
            .sum();
        sign * sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeMode {
    Transport,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeExponents {
    pub alpha1: f64,
    pub alpha2: f64,
    pub mode: RegimeMode,
}

pub fn regime_exponents(mode: RegimeMode, gamma: f64) -> Result<RegimeExponents> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("γ must lie in (0, 1), got {gamma}")));
    }
    let (alpha1, alpha2) = match mode {
        RegimeMode::Transport => ((1.0 + gamma) / 4.0, (2.0 + gamma) / (2.0 * gamma)),
        RegimeMode::Parabolic => (0.5, 0.5),
    };
    Ok(RegimeExponents { alpha1, alpha2, mode })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutLocus {
    pub t0: f64,
    /// `t0 <= 0`: the off-diagonal regime holds on all of `[0, t]`.
    pub off_diagonal_everywhere: bool,
}

/// `t0 = t - ν^{-α1/α2}|x - x'|^{1/α2}`.
pub fn cut_locus_time(t: f64, x: f64, x2: f64, nu: f64, exps: &RegimeExponents) -> Result<CutLocus> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(invalid(format!("viscosity must be positive, got {nu}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    let t0 = t - nu.powf(-exps.alpha1 / exps.alpha2) * (x - x2).abs().powf(1.0 / exps.alpha2);
    Ok(CutLocus {
        t0,
        off_diagonal_everywhere: t0 <= 0.0,
    })
}

/// `|x - x'| <= ν^{α1}(t - s)^{α2}`.
pub fn is_diagonal(s: f64, t: f64, x: f64, x2: f64, nu: f64, exps: &RegimeExponents) -> bool {
    s <= t && (x - x2).abs() <= nu.powf(exps.alpha1) * (t - s).powf(exps.alpha2)
}

/// `p̂(s, t, x, y) = (4πν(t-s))^{-1/2} exp(-|x - ∫_s^t b_m(r, X_r)dr - y|²/(4ν(t-s)))`.
pub fn perturbed_kernel(s: f64, t: f64, x: f64, y: f64, path: &FrozenPath, nu: f64) -> Result<f64> {
    if !(s < t) {
        return Err(invalid(format!("kernel needs s < t, got s = {s}, t = {t}")));
    }
    if !(nu > 0.0) {
        return Err(invalid(format!("viscosity must be positive, got {nu}")));
    }
    let z = x - path.drift_integral(s, t) - y;
    let v = 4.0 * nu * (t - s);
    Ok((std::f64::consts::PI * v).powf(-0.5) * (-z * z / v).exp())
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("viscosity must be positive, got {nu}")))
    }
}

/// `x ↦ ∫ p̂(s, t, x, y) h(y) dy`, computed spectrally.
pub fn proxy_transfer(h: &GridField, s: f64, t: f64, path: &FrozenPath, nu: f64) -> Result<GridField> {
    heat_convolve_shifted(h, 2.0 * nu * (t - s), -path.drift_integral(s, t))
}

/// `P̂g(t, ·)`.
pub fn proxy_semigroup(g: &GridField, t: f64, path: &FrozenPath, nu: f64) -> Result<GridField> {
    check_nu(nu)?;
    proxy_transfer(g, 0.0, t, path, nu)
}

/// `Ĝf(t, ·) = ∫_0^t P̂_{s,t} f(s, ·) ds` by the trapezoid rule on the frame
/// times of `f` (200 uniform nodes when `f` has a single frame).
pub fn proxy_green(f: &SpaceTimeField, t: f64, path: &FrozenPath, nu: f64) -> Result<GridField> {
    check_nu(nu)?;
    let nodes = if f.len() > 1 {
        quadrature_nodes(f.times(), t)
    } else {
        (0..=200).map(|i| t * i as f64 / 200.0).collect()
    };
    time_integral(&nodes, |s| proxy_transfer(&f.at_time(s), s, t, path, nu), f.domain())
}

fn quadrature_nodes(times: &[f64], t: f64) -> Vec<f64> {
    let mut nodes: Vec<f64> = std::iter::once(0.0)
        .chain(times.iter().copied().filter(|&s| s > 0.0 && s < t))
        .collect();
    if t > 0.0 {
        nodes.push(t);
    }
    nodes
}

fn time_integral(
    nodes: &[f64],
    integrand: impl Fn(f64) -> Result<GridField>,
    domain: &crate::grid::Domain1D,
) -> Result<GridField> {
    let mut acc = vec![0.0; domain.len()];
    if nodes.len() < 2 {
        return GridField::new(*domain, acc);
    }
    let mut prev = integrand(nodes[0])?;
    for w in nodes.windows(2) {
        let next = integrand(w[1])?;
        let h = 0.5 * (w[1] - w[0]);
        for ((a, p), q) in acc.iter_mut().zip(prev.values()).zip(next.values()) {
            *a += h * (p + q);
        }
        prev = next;
    }
    GridField::new(*domain, acc)
}

/// `sup_x |u(t) - P̂g - Ĝf - Ĝ(b_Δ·∇u)|` at the last frame time of `u`, with
/// `b_Δ(s, y) = b_m(s, X_s) - b_m(s, y)`. Quadrature runs over the frames of `u`.
pub fn duhamel_residual(
    u: &SpaceTimeField,
    b: &MollifiedDrift,
    f: Option<&SpaceTimeField>,
    g: &GridField,
    nu: f64,
    point: FreezingPoint,
) -> Result<f64> {
    check_nu(nu)?;
    u.last().check_same_domain(g)?;
    let t = *u.times().last().expect("frames");
    let dt = 1e-3 * t.max(point.tau).max(1e-3);
    let path = FrozenPath::new(b, point, t.max(point.tau), dt)?;
    let nodes = quadrature_nodes(u.times(), t);
    let mut rhs = proxy_semigroup(g, t, &path, nu)?;
    if let Some(f) = f {
        f.last().check_same_domain(g)?;
        let fm = time_integral(&nodes, |s| proxy_transfer(&f.at_time(s), s, t, &path, nu), g.domain())?;
        rhs = &rhs + &fm;
    }
    let coupling = time_integral(
        &nodes,
        |s| {
            let us = u.at_time(s);
            let grad = spectral_derivative(&us, 1)?;
            let frozen = b.eval(s, path.position(s));
            let bs = b.grid_at(s);
            let integrand = bs.zip_with(&grad, |bv, gv| (frozen - bv) * gv)?;
            proxy_transfer(&integrand, s, t, &path, nu)
        },
        g.domain(),
    )?;
    rhs = &rhs + &coupling;
    rhs.sup_distance(&u.at_time(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DriftSpec;
    use crate::grid::{heat_convolve, Domain1D};
    use crate::mollifier::MollifierKernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> Domain1D {
        Domain1D::new(4.0, 512).unwrap()
    }

    fn moll(spec: DriftSpec) -> MollifiedDrift {
        spec.mollified(&dom(), &MollifierKernel::gaussian(16.0).unwrap()).unwrap()
    }

    #[test]
    fn exponents_by_mode() {
        let e = regime_exponents(RegimeMode::Transport, 0.5).unwrap();
        assert!((e.alpha1 - 0.375).abs() < 1e-15 && (e.alpha2 - 2.5).abs() < 1e-15);
        let p = regime_exponents(RegimeMode::Parabolic, 0.5).unwrap();
        assert_eq!((p.alpha1, p.alpha2), (0.5, 0.5));
        let e = regime_exponents(RegimeMode::Transport, 0.9).unwrap();
        assert!((e.alpha1 - 0.475).abs() < 1e-15 && (e.alpha2 - 2.9 / 1.8).abs() < 1e-15);
        assert!(regime_exponents(RegimeMode::Transport, 1.0).is_err());
        assert!(regime_exponents(RegimeMode::Parabolic, 0.0).is_err());
    }

    #[test]
    fn cut_locus_examples() {
        let p = regime_exponents(RegimeMode::Parabolic, 0.5).unwrap();
        assert_eq!(cut_locus_time(1.0, 0.3, 0.3, 0.01, &p).unwrap().t0, 1.0);
        let c = cut_locus_time(1.0, 0.0, 0.1, 0.01, &p).unwrap();
        assert!(c.t0.abs() < 1e-12 && c.off_diagonal_everywhere == (c.t0 <= 0.0));
        let tr = regime_exponents(RegimeMode::Transport, 0.5).unwrap();
        let nu: f64 = 1e-4;
        let c = cut_locus_time(1.0, 0.0, 0.05, nu, &tr).unwrap();
        assert!((c.t0 - (1.0 - nu.powf(-0.15) * 0.05f64.powf(0.4))).abs() < 1e-14);
        // Solving |x - x'| = ν^{α1}(t - s)^{α2} for s.
        let s = 1.0 - (0.05 / nu.powf(0.375)).powf(1.0 / 2.5);
        assert!((c.t0 - s).abs() < 1e-12);
        assert!(cut_locus_time(1.0, 0.0, 0.1, 0.0, &p).is_err());
    }

    #[test]
    fn cut_locus_splits_regimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [RegimeMode::Transport, RegimeMode::Parabolic] {
            let e = regime_exponents(mode, 0.5).unwrap();
            for _ in 0..2000 {
                let t = rng.gen_range(0.01..1.0);
                let s = rng.gen_range(0.0..t);
                let nu = 10f64.powf(rng.gen_range(-6.0..-1.0));
                let x = rng.gen_range(-1.0..1.0);
                let y = rng.gen_range(-1.0..1.0);
                let t0 = cut_locus_time(t, x, y, nu, &e).unwrap().t0;
                assert_eq!(s <= t0, is_diagonal(s, t, x, y, nu, &e));
            }
        }
    }

    #[test]
    fn zero_drift_kernel_is_heat_kernel() {
        let b = moll(DriftSpec::constant(0.0));
        let path = FrozenPath::new(&b, FreezingPoint::new(0.5, 0.1).unwrap(), 1.0, 1e-3).unwrap();
        let k = perturbed_kernel(0.2, 0.7, 0.3, -0.1, &path, 0.1).unwrap();
        let exact = crate::grid::heat_kernel(2.0 * 0.1 * 0.5, 0.4);
        assert!((k - exact).abs() < 1e-14);
        assert!(perturbed_kernel(0.7, 0.7, 0.3, -0.1, &path, 0.1).is_err());
    }

    #[test]
    fn kernel_on_own_flow_is_centred_on_theta() {
        // With (τ, ξ) = (t, x) the centre is X_s, the flow of -b_m at s.
        let b = moll(DriftSpec::peano(0.5, 2.0).unwrap());
        let (t, x) = (0.8, 0.4);
        let path = FrozenPath::new(&b, FreezingPoint::new(t, x).unwrap(), t, 1e-4).unwrap();
        let s = 0.3;
        let centre = x - path.drift_integral(s, t);
        let theta = integrate_flow_to(&b.negated(), x, t, s, 1e-4).unwrap().end();
        assert!((centre - theta).abs() < 1e-10);
    }

    #[test]
    fn kernel_mass_is_one() {
        let b = moll(DriftSpec::peano(0.5, 2.0).unwrap());
        let path = FrozenPath::new(&b, FreezingPoint::new(0.5, -0.2).unwrap(), 1.0, 1e-3).unwrap();
        let d = dom();
        for (s, t, x) in [(0.0, 0.5, 0.1), (0.2, 0.9, -0.4), (0.6, 0.65, 0.0)] {
            let mass: f64 = d
                .coordinates()
                .iter()
                .map(|&y| perturbed_kernel(s, t, x, y, &path, 0.05).unwrap())
                .sum::<f64>()
                * d.dx();
            assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        }
    }

    #[test]
    fn drift_integral_matches_trapezoid() {
        let b = moll(DriftSpec::peano(0.5, 2.0).unwrap());
        let path = FrozenPath::new(&b, FreezingPoint::new(0.4, 0.3).unwrap(), 1.0, 1e-3).unwrap();
        for (s, t) in [(0.0, 1.0), (0.1, 0.4), (0.5, 0.9), (0.9, 0.2)] {
            let a = path.drift_integral(s, t);
            let q = path.drift_integral_trapezoid(s, t);
            assert!((a - q).abs() < 1e-6, "{a} vs {q}");
        }
    }

    #[test]
    fn kernel_solves_frozen_equation() {
        let b = moll(DriftSpec::peano(0.5, 2.0).unwrap());
        let path = FrozenPath::new(&b, FreezingPoint::new(0.3, 0.2).unwrap(), 1.0, 1e-4).unwrap();
        let nu = 0.05;
        let (s, y) = (0.1, 0.05);
        let (h, k) = (1e-4, 1e-3);
        for (t, x) in [(0.5, 0.2), (0.7, 0.4), (0.9, -0.1)] {
            let p = |t: f64, x: f64| perturbed_kernel(s, t, x, y, &path, nu).unwrap();
            let dt = (p(t + h, x) - p(t - h, x)) / (2.0 * h);
            let dx = (p(t, x + k) - p(t, x - k)) / (2.0 * k);
            let dxx = (p(t, x + k) - 2.0 * p(t, x) + p(t, x - k)) / (k * k);
            let frozen = b.eval(t, path.position(t));
            let res = dt - (nu * dxx - frozen * dx);
            assert!(res.abs() < 1e-4, "residual {res}");
        }
    }

    #[test]
    fn semigroup_of_constants_and_constant_shift() {
        let d = dom();
        let c = 0.6;
        let b = moll(DriftSpec::constant(c));
        let path = FrozenPath::new(&b, FreezingPoint::new(0.0, 0.0).unwrap(), 1.0, 1e-3).unwrap();
        let one = GridField::constant(d, 1.0);
        assert!(proxy_semigroup(&one, 0.7, &path, 0.1).unwrap().sup_distance(&one).unwrap() < 1e-13);
        let g = d.windowed(|x| (-(x * x)).exp() * (1.0 + x));
        let (t, nu) = (0.5, 0.1);
        let got = proxy_semigroup(&g, t, &path, nu).unwrap();
        let smooth = heat_convolve(&g, 2.0 * nu * t).unwrap();
        let expect = GridField::from_fn(d, |x| smooth.interpolate(x - c * t));
        assert!(got.sup_distance(&expect).unwrap() < 1e-5);
    }

    #[test]
    fn green_of_one_is_elapsed_time() {
        let d = dom();
        let b = moll(DriftSpec::peano(0.5, 2.0).unwrap());
        let path = FrozenPath::new(&b, FreezingPoint::new(0.2, 0.1).unwrap(), 1.0, 1e-3).unwrap();
        let one = SpaceTimeField::steady(GridField::constant(d, 1.0), vec![0.0]).unwrap();
        let out = proxy_green(&one, 0.8, &path, 0.1).unwrap();
        assert!(out.sup_distance(&GridField::constant(d, 0.8)).unwrap() < 1e-12);
    }

    #[test]
    fn exact_constant_drift_solution_has_tiny_residual() {
        let d = dom();
        let (c, nu) = (0.5, 0.05);
        let b = moll(DriftSpec::constant(c));
        let g = GridField::heat_kernel(d, 0.05, 0.0);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.01).collect();
        let frames = times
            .iter()
            .map(|&t| heat_convolve_shifted(&g, 2.0 * nu * t, -c * t).unwrap())
            .collect();
        let u = SpaceTimeField::new(times, frames).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let fp = FreezingPoint::new(rng.gen_range(0.0..0.5), rng.gen_range(-1.0..1.0)).unwrap();
            let r = duhamel_residual(&u, &b, None, &g, nu, fp).unwrap();
            assert!(r < 1e-10, "{r}");
        }
    }
}
