use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vvlab::experiments::*;
use vvlab::flow::{flow_lipschitz_check, integrate_flow, DriftSpec, Regularity};
use vvlab::grid::smooth_cutoff;
use vvlab::mollifier::{mollification_rate, MollifierKernel};
use vvlab::proxy::{cut_locus_time, is_diagonal, regime_exponents, FreezingPoint, RegimeMode};
use vvlab::schedules::*;
use vvlab::solver::*;
use vvlab::spaces::{default_pair_distance, holder_seminorm};
use vvlab::{Domain1D, GridField, SpaceTimeField};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn heat_oracle() -> Outcome {
    let start = Instant::now();
    let d = Domain1D::new(4.0, 512).map_err(|e| e.to_string())?;
    let (nu, horizon) = (0.1, 0.5);
    let cfg = SolveConfig::transport(DriftSpec::constant(0.0), 1e6, nu, horizon, d);
    let g = GridField::heat_kernel(d, 0.05, 0.0);
    let sol = solve_parabolic(&cfg, &Forcing::Zero, &g).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for (t, u) in sol.field.times().iter().zip(sol.field.frames()) {
        let exact = GridField::heat_kernel(d, 0.05 + 2.0 * nu * t, 0.0);
        worst = worst.max(u.sup_distance(&exact).unwrap());
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    ensure(worst <= 1e-3, format!("sup error {worst:.3e}"))?;
    Ok(format!("sup error {worst:.3e} in {:.2?}", start.elapsed()))
}

fn corpus_domain() -> Domain1D {
    Domain1D::new(2.0, 1024).unwrap()
}

/// Drifts are expansive or neutral inside `[-L/2, L/2]`; tabulated ones are
/// tapered outside it.
fn corpus_drifts(d: Domain1D) -> Vec<(&'static str, DriftSpec)> {
    let half = d.half_length();
    let taper = move |x: f64| smooth_cutoff(x, 0.5 * half, 0.875 * half);
    let tanh = SpaceTimeField::steady(GridField::from_fn(d, move |x| 0.5 * (2.0 * x).tanh() * taper(x)), vec![0.0, 0.5])
        .unwrap();
    let pulsing = SpaceTimeField::new(
        vec![0.0, 0.25, 0.5],
        (0..3)
            .map(|k| {
                let a = 0.3 + 0.2 * k as f64;
                GridField::from_fn(d, move |x| a * x.signum() * x.abs().powf(0.7) * taper(x))
            })
            .collect(),
    )
    .unwrap();
    vec![
        ("peano 0.5", DriftSpec::peano(0.5, 1.0).unwrap()),
        ("peano 0.9", DriftSpec::peano(0.9, 1.0).unwrap()),
        ("constant 0.5", DriftSpec::constant(0.5)),
        ("constant -0.3", DriftSpec::constant(-0.3)),
        ("linear 0.5", DriftSpec::linear(0.5)),
        ("tabulated tanh", DriftSpec::tabulated(tanh, Regularity::Holder(1.0))),
        ("tabulated power", DriftSpec::tabulated(pulsing, Regularity::Holder(0.7))),
    ]
}

fn corpus_data(d: Domain1D) -> Vec<SweepData> {
    vec![
        SweepData {
            f: Forcing::Zero,
            g: d.windowed(|x| x.abs().sqrt()),
        },
        SweepData {
            f: Forcing::Steady(d.windowed(|x| 0.5 * (x + 0.2).abs().sqrt())),
            g: d.windowed(|x| (x - 0.3).abs().sqrt()),
        },
    ]
}

/// The shared sweep behind the sup-norm and Hölder criteria.
fn corpus() -> (Vec<RunReport>, Duration) {
    let start = Instant::now();
    let d = corpus_domain();
    let data = corpus_data(d);
    let mut reports = Vec::new();
    for (_, drift) in corpus_drifts(d) {
        for dat in &data {
            let base = SolveConfig::transport(drift.clone(), 8.0, 1e-3, 0.5, d);
            let nu = NuSource::Condinu(ScheduleConstants::default());
            reports.push(holder_bound_sweep(&base, dat, &[8.0, 16.0, 32.0, 64.0], &nu).unwrap());
        }
    }
    for dat in &data {
        let base = SolveConfig::transport(DriftSpec::peano(0.5, 1.0).unwrap(), 16.0, 1e-3, 0.5, d);
        let nu = NuSource::Fixed(vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]);
        reports.push(holder_bound_sweep(&base, dat, &[16.0], &nu).unwrap());
    }
    (reports, start.elapsed())
}

fn configs_in(reports: &[RunReport]) -> usize {
    let mut hashes: Vec<&str> = reports.iter().flat_map(|r| r.rows.iter().map(|row| row.config_hash.as_str())).collect();
    hashes.sort_unstable();
    hashes.dedup();
    hashes.len()
}

fn sup_bound(reports: &[RunReport]) -> Outcome {
    let configs = configs_in(reports);
    ensure(configs >= 40, format!("only {configs} configurations"))?;
    let rows: Vec<&ReportRow> = reports.iter().flat_map(|r| &r.rows).collect();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    ensure(failed == 0, format!("{failed} runs failed"))?;
    let violations = rows.iter().filter(|r| r.sup_norm > r.sup_bound + 1e-12).count();
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("{configs} configurations, {} rows, 0 violations", rows.len()))
}

fn holder_bound(reports: &[RunReport], elapsed: Duration) -> Outcome {
    within(elapsed, Duration::from_secs(300))?;
    let rows: Vec<&ReportRow> = reports.iter().flat_map(|r| &r.rows).collect();
    let worst = rows
        .iter()
        .map(|r| r.slack / r.bound)
        .fold(f64::INFINITY, f64::min);
    ensure(worst.is_finite() && worst >= -0.05, format!("worst slack {:.2}% of bound", 100.0 * worst))?;
    let nus: Vec<f64> = reports.last().unwrap().rows.iter().map(|r| r.nu).collect();
    ensure(nus.contains(&1e-1) && nus.contains(&1e-5), "ν-sweep missing")?;
    Ok(format!(
        "worst slack {:+.2}% of bound over {} rows in {:.2?}",
        100.0 * worst,
        rows.len(),
        elapsed
    ))
}

fn mollification_rate_criterion() -> Outcome {
    let d = Domain1D::new(4.0, 4096).unwrap();
    let f = d.windowed(|x| x.abs().sqrt());
    let r = mollification_rate(&f, 0.5, &[8.0, 16.0, 32.0, 64.0, 128.0]).map_err(|e| e.to_string())?;
    ensure((r.slope + 0.5).abs() <= 0.1, format!("slope {:.3}", r.slope))?;
    Ok(format!("slope {:.4}", r.slope))
}

fn flow_exactness() -> Outcome {
    let d = Domain1D::new(4.0, 1024).unwrap();
    let kernel = MollifierKernel::gaussian(32.0).unwrap();
    let (a, xi, tau) = (0.7, 0.4, 1.0);
    let lin = DriftSpec::linear(a).mollified(&d, &kernel).unwrap();
    let tr = integrate_flow(&lin, xi, tau, 1e-3).map_err(|e| e.to_string())?;
    let rel = tr
        .times
        .iter()
        .zip(&tr.positions)
        .map(|(s, p)| {
            let exact = xi * (a * (tau - s)).exp();
            ((p - exact) / exact).abs()
        })
        .fold(0.0, f64::max);
    ensure(rel <= 1e-6, format!("linear flow relative error {rel:.3e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    let tab = SpaceTimeField::steady(d.windowed(|x| 0.4 * (3.0 * x).sin()), vec![0.0, 1.0]).unwrap();
    let drifts = [
        DriftSpec::constant(0.6),
        DriftSpec::linear(-0.8),
        DriftSpec::peano(0.5, 2.0).unwrap(),
        DriftSpec::peano(0.9, 2.0).unwrap(),
        DriftSpec::tabulated(tab, Regularity::Holder(1.0)),
    ];
    for drift in drifts {
        let b = drift.mollified(&d, &kernel).unwrap();
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-1.5..1.5);
            let mut y: f64 = rng.gen_range(-1.5..1.5);
            if x == y {
                y += 0.1;
            }
            worst = worst.max(flow_lipschitz_check(&b, x, y, 1.0, 1e-2).map_err(|e| e.to_string())?);
        }
    }
    ensure(worst <= 1.0 + 1e-3, format!("Lipschitz ratio {worst}"))?;
    Ok(format!("linear relative error {rel:.2e}, worst Lipschitz ratio {worst:.6}"))
}

fn duhamel_run(n: usize, dt: f64) -> Result<Solution, String> {
    let d = Domain1D::new(4.0, n).unwrap();
    let mut cfg = SolveConfig::transport(DriftSpec::constant(0.1), 8.0, 1e-3, 1.0, d);
    cfg.dt = Some(dt);
    solve_parabolic(&cfg, &Forcing::Zero, &GridField::heat_kernel(d, 1.0, 0.0)).map_err(|e| e.to_string())
}

fn duhamel() -> Outcome {
    let coarse = duhamel_run(512, 2e-3)?;
    let fine = duhamel_run(1024, 1e-3)?;
    let origin = FreezingPoint::new(0.0, 0.0).unwrap();
    let r0 = duhamel_check(&coarse, 1e-3, origin).map_err(|e| e.to_string())?;
    let r1 = duhamel_check(&fine, 1e-3, origin).map_err(|e| e.to_string())?;
    ensure(r0 <= 1e-3, format!("residual {r0:.3e} at N = 512"))?;
    let ratio = r0 / r1;
    ensure((ratio - 2.0).abs() <= 0.6, format!("refinement ratio {ratio:.3}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut spread = 0.0_f64;
    for _ in 0..5 {
        let fp = FreezingPoint::new(rng.gen_range(0.0..1.0), rng.gen_range(-1.5..1.5)).unwrap();
        let r = duhamel_check(&coarse, 1e-3, fp).map_err(|e| e.to_string())?;
        spread = spread.max((r - r0).abs());
    }
    ensure(spread <= 1e-3 * r0, format!("freezing-point spread {spread:.3e}"))?;
    Ok(format!("residual {r0:.3e} -> {r1:.3e} (ratio {ratio:.3}), freezing spread {spread:.1e}"))
}

fn cut_locus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for mode in [RegimeMode::Transport, RegimeMode::Parabolic] {
        for _ in 0..10_000 {
            let gamma = rng.gen_range(0.05..0.95);
            let exps = regime_exponents(mode, gamma).unwrap();
            let nu = 10f64.powf(rng.gen_range(-6.0..0.0));
            let t: f64 = rng.gen_range(0.01..2.0);
            let s = rng.gen_range(0.0..t);
            let x = rng.gen_range(-2.0..2.0);
            let x2 = x + rng.gen_range(-1.0..1.0) * nu.powf(exps.alpha1) * t.powf(exps.alpha2) * 2.0;
            let t0 = cut_locus_time(t, x, x2, nu, &exps).unwrap().t0;
            ensure(
                (s <= t0) == is_diagonal(s, t, x, x2, nu, &exps),
                format!("{mode:?} disagreement at s={s}, t={t}, x={x}, x'={x2}, ν={nu}"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} samples, 0 violations"))
}

fn time_cutting() -> Outcome {
    let d = Domain1D::new(4.0, 256).unwrap();
    let mut cfg = SolveConfig::transport(DriftSpec::peano(0.5, 2.0).unwrap(), 16.0, 0.01, 0.5, d);
    cfg.dt = Some(0.5 / 800.0);
    let g = d.windowed(|x| x.abs().sqrt());
    let holder = |u: &GridField| holder_seminorm(u, 0.5, interior_window(&d, 16.0, 0.01, 0.5).unwrap(), default_pair_distance(&d)).unwrap().value;
    let one = time_cut_solve(&cfg, &Forcing::Zero, &g).map_err(|e| e.to_string())?;
    let (mut dist, mut hdiff) = (0.0_f64, 0.0_f64);
    for n in [2, 4, 8] {
        cfg.n_cut = n;
        let sol = time_cut_solve(&cfg, &Forcing::Zero, &g).map_err(|e| e.to_string())?;
        dist = dist.max(sol.field.sup_distance(&one.field).map_err(|e| e.to_string())?);
        hdiff = hdiff.max((holder(sol.last()) - holder(one.last())).abs());
    }
    ensure(dist <= 1e-12, format!("outputs differ by {dist:.3e}"))?;
    ensure(hdiff <= 1e-10, format!("Hölder norms differ by {hdiff:.3e}"))?;
    Ok(format!("max difference {dist:.1e}, Hölder difference {hdiff:.1e}"))
}

fn burgers_steady() -> Outcome {
    let start = Instant::now();
    let d = Domain1D::new(3.2, 1024).unwrap();
    let rep = burgers_steady_state(1e-3, 5.0, d, 40.0).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(120))?;
    ensure(rep.sup_error <= 5e-2, format!("sup error {:.3e}", rep.sup_error))?;
    Ok(format!(
        "sup error {:.3e}, final rate {:.1e}, in {:.2?}",
        rep.sup_error,
        rep.final_rate,
        start.elapsed()
    ))
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn strictly_decreasing(rows: &[GapRow]) -> bool {
    rows.windows(2).all(|w| w[1].gap < w[0].gap)
}

fn uniqueness() -> Outcome {
    let consts = ScheduleConstants::default();
    let d = Domain1D::new(2.0, 2048).unwrap();
    let data = SweepData {
        f: Forcing::Zero,
        g: d.windowed(|x| x.abs().sqrt()),
    };
    let base = SolveConfig::transport(DriftSpec::peano(0.9, 1.0).unwrap(), 8.0, 1e-3, 0.5, d);
    let pairs = transport_window_pairs(&[8.0, 16.0, 32.0, 64.0], 0.5, 0.9, &data, &consts).map_err(|e| e.to_string())?;
    let rows = uniqueness_gap(&base, &data, &pairs).map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    ensure(strictly_decreasing(&rows), format!("transport gaps not decreasing: {}", sci(&gaps)))?;
    ensure(gaps[3] <= 1e-2, format!("G(64) = {:.3e}", gaps[3]))?;
    let diagonal = GapPair {
        kernel_bar: pairs[0].kernel,
        nu_bar: pairs[0].nu,
        ..pairs[0]
    };
    let zero = gap_between(&base, &data, &diagonal).map_err(|e| e.to_string())?.gap;
    ensure(zero == 0.0, format!("diagonal gap {zero:e}"))?;

    let mut burgers = Vec::new();
    for (kind, n, ms) in [
        (BurgersKind::Turbulent, 2048, vec![8.0, 16.0, 32.0, 64.0]),
        (BurgersKind::Viscous, 4096, vec![192.0, 256.0]),
    ] {
        let d = Domain1D::new(2.0, n).unwrap();
        let data = SweepData {
            f: Forcing::Zero,
            g: d.windowed(|x| 0.1 * (-x * x / 0.5).exp()),
        };
        let base = SolveConfig::burgers(8.0, 1e-3, 0.5, d);
        let pairs = burgers_schedule_pairs(kind, &base, &data, &ms, &consts).map_err(|e| e.to_string())?;
        let rows = uniqueness_gap(&base, &data, &pairs).map_err(|e| e.to_string())?;
        let last = rows.last().unwrap().gap;
        ensure(last <= 1e-2, format!("{kind:?} Burgers gap {last:.3e} at m = {}", ms.last().unwrap()))?;
        burgers.push(format!("{kind:?} {last:.1e}"));
    }
    Ok(format!("transport G = {}; Burgers {}", sci(&gaps), burgers.join(", ")))
}

fn e_half_sandwich() -> Outcome {
    for t in [0.5, 1.0, 2.0, 5.0] {
        let s = *e_half_partial_sums(t, 200).unwrap().last().unwrap();
        let e = f64::exp(t);
        ensure(e <= s && s <= 2.0 * e, format!("E(t={t}) = {s}"))?;
    }
    Ok("e^t <= E_1/2(t) <= 2e^t at t = 0.5, 1, 2, 5".into())
}

fn exclusivity() -> Outcome {
    let consts = ScheduleConstants::default();
    let d = Domain1D::new(2.0, 4096).unwrap();
    let mut points = 0;
    for g in [
        d.windowed(|x| 0.2 * (-x * x / 0.5).exp()),
        d.windowed(|x| 0.1 * (-x * x / 0.5).exp()),
        d.windowed(|x| 0.5 * (2.0 * x).sin()),
    ] {
        let data = SweepData { f: Forcing::Zero, g };
        for i in 0..=56 {
            let m = 2f64.powf(1.0 + 7.0 * i as f64 / 56.0);
            let norms = burgers_norms(&SolveConfig::burgers(m, 1e-3, 0.5, d), &data).map_err(|e| e.to_string())?;
            for j in 0..=70 {
                let nu = 10f64.powf(-8.0 + 7.0 * j as f64 / 70.0);
                let both = burgers_schedules(BurgersKind::Turbulent, m, nu, &norms, &consts)
                    && burgers_schedules(BurgersKind::Viscous, m, nu, &norms, &consts);
                ensure(!both, format!("both conditions hold at m = {m}, ν = {nu}"))?;
                points += 1;
            }
        }
    }
    Ok(format!("{points} grid points, none in both regimes"))
}

fn envelopes() -> Outcome {
    let d = corpus_domain();
    let data = SweepData {
        f: Forcing::Zero,
        g: d.windowed(|x| (x - 0.1).abs().sqrt()),
    };
    let mut lines = Vec::new();
    for (name, drift) in [
        ("peano 0.5", DriftSpec::peano(0.5, 1.0).unwrap()),
        ("peano 0.9", DriftSpec::peano(0.9, 1.0).unwrap()),
        ("constant", DriftSpec::constant(0.5)),
        ("linear -1", DriftSpec::linear(-1.0)),
    ] {
        let base = SolveConfig::transport(drift, 8.0, 1e-3, 0.5, d);
        let calibration = envelope_sweep(&base, &data, &[8.0, 16.0, 32.0, 64.0]).map_err(|e| e.to_string())?;
        let validation = envelope_sweep(&base, &data, &[11.0, 22.0, 45.0]).map_err(|e| e.to_string())?;
        for kind in [EnvelopeKind::Gradient, EnvelopeKind::Hessian] {
            let cal = calibrate_envelope(&calibration, &validation, kind);
            ensure(cal.validated, format!("{name} {kind:?}: constant {:.3e} fails on held-out m", cal.constant))?;
            lines.push(format!("{name} {kind:?} C={:.2e}", cal.constant));
        }
    }
    Ok(lines.join("; "))
}

fn main() -> ExitCode {
    let (reports, corpus_time) = corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("heat-equation oracle", Box::new(heat_oracle)),
        ("L-infinity bound", Box::new(|| sup_bound(&reports))),
        ("Hölder bound", Box::new(|| holder_bound(&reports, corpus_time))),
        ("mollification rate", Box::new(mollification_rate_criterion)),
        ("flow exactness", Box::new(flow_exactness)),
        ("Duhamel residual", Box::new(duhamel)),
        ("cut-locus equivalence", Box::new(cut_locus)),
        ("time-cutting consistency", Box::new(time_cutting)),
        ("Burgers steady state", Box::new(burgers_steady)),
        ("uniqueness-gap decay", Box::new(uniqueness)),
        ("E_1/2 sandwich", Box::new(e_half_sandwich)),
        ("schedule exclusivity", Box::new(exclusivity)),
        ("derivative envelopes", Box::new(envelopes)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
