use vvlab::experiments::{burgers_steady_state, sign};
use vvlab::flow::DriftSpec;
use vvlab::mollifier::{mollify, KernelFamily, MollifierKernel};
use vvlab::solver::{solve_parabolic, Forcing, SolveConfig};
use vvlab::{Domain1D, GridField};
use wasm_bindgen::prelude::*;

fn err(e: vvlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn profile(d: &Domain1D, kind: &str, exponent: f64) -> Result<GridField, JsError> {
    let f: fn(f64, f64) -> f64 = match kind {
        "power" => |x, a| x.abs().powf(a),
        "sign" => |x, _| sign(x),
        "odd_power" => |x, a| sign(x) * x.abs().powf(a),
        "tent" => |x, _| (1.0 - x.abs()).max(0.0),
        _ => return Err(JsError::new(&format!("unknown profile `{kind}`"))),
    };
    Ok(d.windowed(|x| f(x, exponent)))
}

fn pack(d: &Domain1D, fields: &[&GridField]) -> Vec<f64> {
    let mut out = d.coordinates();
    for f in fields {
        out.extend_from_slice(f.values());
    }
    out
}

/// `[x, f, ρ_m ⋆ f]` concatenated, each of length `points`.
#[wasm_bindgen]
pub fn mollify_profile(kind: &str, exponent: f64, m: f64, bump: bool, points: usize) -> Result<Vec<f64>, JsError> {
    let d = Domain1D::new(2.0, points).map_err(err)?;
    let f = profile(&d, kind, exponent)?;
    let family = if bump { KernelFamily::CompactBump } else { KernelFamily::Gaussian };
    let k = MollifierKernel::new(family, m).map_err(err)?;
    let fm = mollify(&f, &k).map_err(err)?;
    Ok(pack(&d, &[&f, &fm]))
}

/// Transport with the Peano drift `sgn(x)|x|^α` from a centred bump:
/// `[x, u(0), u(T/2), u(T)]`.
#[wasm_bindgen]
pub fn peano_transport(alpha: f64, m: f64, nu: f64, horizon: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let d = Domain1D::new(2.0, points).map_err(err)?;
    let drift = DriftSpec::peano(alpha, 1.0).map_err(err)?;
    let cfg = SolveConfig::transport(drift, m, nu, horizon, d);
    let g = d.windowed(|x| (-x * x / 0.02).exp());
    let sol = solve_parabolic(&cfg, &Forcing::Zero, &g).map_err(err)?;
    let mid = sol.field.at_time(0.5 * horizon);
    Ok(pack(&d, &[&sol.prepared.g_m, &mid, sol.last()]))
}

/// Forced Burgers from rest: `[x, u(T), sgn(x)√|x|]`, then the sup error on
/// `0.1 ≤ |x| ≤ 0.8` as the last entry.
#[wasm_bindgen]
pub fn burgers_profile(nu: f64, m: f64, horizon: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let d = Domain1D::new(3.2, points).map_err(err)?;
    let rep = burgers_steady_state(nu, horizon, d, m).map_err(err)?;
    let target = GridField::from_fn(d, |x| sign(x) * x.abs().sqrt());
    let mut out = pack(&d, &[rep.solution.last(), &target]);
    out.push(rep.sup_error);
    Ok(out)
}
