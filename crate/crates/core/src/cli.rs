//! Configuration files, subcommand dispatch and report writers.
//!
//! CSV columns are fixed: `equation,m,nu,n_cut,t,sup_norm,holder_norm,bound,
//! slack,residual,wall_ms`. Floats are written with 17 significant digits
//! (`{:.16e}`); missing values are `NaN`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::experiments::*;
use crate::flow::{DriftSpec, Regularity};
use crate::grid::{Domain1D, GridField};
use crate::mollifier::KernelFamily;
use crate::schedules::{condinu_transport, BurgersKind, ScheduleConstants};
use crate::solver::{prepare, solve_prepared, Equation, FrameStride, Forcing, SolveConfig};
use crate::spaces::{besov_norm_thermic, default_pair_distance, holder_seminorm, VarianceGrid, Window};

pub const CSV_HEADER: [&str; 11] = [
    "equation",
    "m",
    "nu",
    "n_cut",
    "t",
    "sup_norm",
    "holder_norm",
    "bound",
    "slack",
    "residual",
    "wall_ms",
];

/// Keys every configuration must set, in dotted form.
pub const REQUIRED_KEYS: [&str; 5] = ["equation", "horizon", "m_list", "grid.half_length", "grid.points"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub equation: Equation,
    pub horizon: f64,
    pub m_list: Vec<f64>,
    pub grid: GridConfig,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub viscosity: ViscosityConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub uniqueness: UniquenessConfig,
    #[serde(default)]
    pub peano: PeanoConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: f64,
    pub points: usize,
}

/// Drift family; `tabulated` samples a profile once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Constant { value: f64 },
    Linear { slope: f64 },
    Peano { exponent: f64, radius: f64 },
    Tabulated { profile: Profile, holder: f64 },
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuPolicy {
    Fixed,
    Condinu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscosityConfig {
    pub policy: NuPolicy,
    pub values: Vec<f64>,
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        Self {
            policy: NuPolicy::Fixed,
            values: vec![1e-2],
        }
    }
}

/// Closed-form data profiles. All but `constant` and `heat_kernel` are
/// windowed to vanish near the seam of the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    HeatKernel { variance: f64, center: f64 },
    /// `amplitude·|x - center|^exponent`.
    PowerAbs { amplitude: f64, exponent: f64, center: f64 },
    /// `amplitude·exp(-x²/width)`.
    Gaussian { amplitude: f64, width: f64 },
    /// `amplitude·sgn(x)`, zero at the origin.
    Sign { amplitude: f64 },
    Sine { amplitude: f64, frequency: f64 },
    Linear { slope: f64 },
}

impl Profile {
    pub fn sample(&self, d: &Domain1D) -> GridField {
        match *self {
            Profile::Zero => GridField::zeros(*d),
            Profile::Constant { value } => GridField::constant(*d, value),
            Profile::HeatKernel { variance, center } => GridField::heat_kernel(*d, variance, center),
            Profile::PowerAbs {
                amplitude,
                exponent,
                center,
            } => d.windowed(|x| amplitude * (x - center).abs().powf(exponent)),
            Profile::Gaussian { amplitude, width } => d.windowed(|x| amplitude * (-x * x / width).exp()),
            Profile::Sign { amplitude } => d.windowed(|x| amplitude * sign(x)),
            Profile::Sine { amplitude, frequency } => d.windowed(|x| amplitude * (frequency * x).sin()),
            Profile::Linear { slope } => d.windowed(|x| slope * x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub initial: Profile,
    pub forcing: Profile,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            initial: Profile::HeatKernel {
                variance: 0.05,
                center: 0.0,
            },
            forcing: Profile::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub c: f64,
    pub eps: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let d = ScheduleConstants::default();
        Self { c: d.c, eps: d.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_policy: f64,
    pub n_cut: usize,
    pub kernel: KernelFamily,
    /// Steps between stored frames; automatic when absent.
    pub stride: Option<usize>,
    pub dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_policy: 0.4,
            n_cut: 1,
            kernel: KernelFamily::Gaussian,
            stride: None,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessSchedule {
    TransportWindow,
    Turbulent,
    Viscous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessConfig {
    pub schedule: UniquenessSchedule,
    pub gamma_tilde: f64,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        Self {
            schedule: UniquenessSchedule::TransportWindow,
            gamma_tilde: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PeanoConfig {
    /// Sample times; the quarter times of the horizon when empty.
    #[serde(default)]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepHolder,
    SweepUnique,
    BurgersSteady,
    Peano,
    Norms,
    Schedule,
    Report,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Solve,
        Command::SweepHolder,
        Command::SweepUnique,
        Command::BurgersSteady,
        Command::Peano,
        Command::Norms,
        Command::Schedule,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepHolder => "sweep-holder",
            Command::SweepUnique => "sweep-unique",
            Command::BurgersSteady => "burgers-steady",
            Command::Peano => "peano",
            Command::Norms => "norms",
            Command::Schedule => "schedule",
            Command::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration; exit status 2.
    Config(Vec<String>),
    /// A run became unstable; exit status 3. Rows are still written.
    Instability(String),
    /// Any other failure; exit status 1.
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Instability(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(lines) => {
                writeln!(f, "invalid configuration:")?;
                for l in lines {
                    writeln!(f, "  {l}")?;
                }
                Ok(())
            }
            CliError::Instability(msg) => write!(f, "{msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Config(vec![msg]),
            Error::Instability(msg) => CliError::Instability(msg),
            other => CliError::Run(other),
        }
    }
}

fn has_key(table: &toml::Table, dotted: &str) -> bool {
    let mut cur = table;
    let mut parts = dotted.split('.').peekable();
    while let Some(p) = parts.next() {
        match (cur.get(p), parts.peek()) {
            (Some(_), None) => return true,
            (Some(toml::Value::Table(t)), Some(_)) => cur = t,
            _ => return false,
        }
    }
    false
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().lines().map(String::from).collect()))?;
        let missing: Vec<String> = REQUIRED_KEYS
            .iter()
            .filter(|k| !has_key(&table, k))
            .map(|k| format!("missing required key `{k}`"))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(missing));
        }
        let cfg: Config =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim().lines().map(String::from).collect()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let domain = self.domain();
        if let Err(e) = &domain {
            errs.push(format!("grid: {e}"));
        }
        if self.m_list.is_empty() {
            errs.push("m_list: at least one scale is required".into());
        }
        if self.viscosity.policy == NuPolicy::Fixed && self.viscosity.values.is_empty() {
            errs.push("viscosity.values: a fixed policy needs at least one value".into());
        }
        if let Err(e) = ScheduleConstants::new(self.schedule.c, self.schedule.eps) {
            errs.push(format!("schedule: {e}"));
        }
        if let Err(e) = self.drift_spec() {
            errs.push(format!("drift: {e}"));
        }
        if let (Ok(d), Ok(drift)) = (&domain, self.drift_spec()) {
            for &m in &self.m_list {
                let nu = self.viscosity.values.first().copied().unwrap_or(1e-2);
                if let Err(e) = self.solve_config(drift.clone(), m, nu, *d).validate() {
                    errs.push(format!("m = {m}: {e}"));
                }
                if let Err(e) = crate::mollifier::check_resolvable(d, m) {
                    errs.push(format!("m = {m}: {e}"));
                }
            }
        }
        for &t in &self.peano.times {
            if !(t >= 0.0 && t <= self.horizon) {
                errs.push(format!("peano.times: {t} outside [0, horizon]"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    pub fn domain(&self) -> crate::Result<Domain1D> {
        Domain1D::new(self.grid.half_length, self.grid.points)
    }

    pub fn constants(&self) -> ScheduleConstants {
        ScheduleConstants {
            c: self.schedule.c,
            eps: self.schedule.eps,
        }
    }

    pub fn drift_spec(&self) -> crate::Result<DriftSpec> {
        Ok(match &self.drift {
            DriftConfig::Constant { value } => DriftSpec::constant(*value),
            DriftConfig::Linear { slope } => DriftSpec::linear(*slope),
            DriftConfig::Peano { exponent, radius } => DriftSpec::peano(*exponent, *radius)?,
            DriftConfig::Tabulated { profile, holder } => {
                let d = self.domain()?;
                let field = crate::SpaceTimeField::steady(profile.sample(&d), vec![0.0, self.horizon])?;
                DriftSpec::tabulated(field, Regularity::Holder(*holder))
            }
        })
    }

    pub fn solve_config(&self, drift: DriftSpec, m: f64, nu: f64, domain: Domain1D) -> SolveConfig {
        let mut cfg = match self.equation {
            Equation::Transport => SolveConfig::transport(drift, m, nu, self.horizon, domain),
            Equation::Burgers => SolveConfig::burgers(m, nu, self.horizon, domain),
        };
        cfg.gamma = self.gamma;
        cfg.kernel = self.solver.kernel;
        cfg.dt_policy = self.solver.dt_policy;
        cfg.n_cut = self.solver.n_cut;
        cfg.stride = self.solver.stride.map_or(FrameStride::Auto, FrameStride::Every);
        cfg.dt = self.solver.dt;
        cfg
    }

    pub fn sweep_data(&self) -> crate::Result<SweepData> {
        let d = self.domain()?;
        let f = match self.data.forcing {
            Profile::Zero => Forcing::Zero,
            ref p => Forcing::Steady(p.sample(&d)),
        };
        Ok(SweepData {
            f,
            g: self.data.initial.sample(&d),
        })
    }

    /// The base solver configuration at the first scale and viscosity.
    pub fn base(&self) -> crate::Result<SolveConfig> {
        let nu = self.viscosity.values.first().copied().unwrap_or(1e-2);
        Ok(self.solve_config(self.drift_spec()?, self.m_list[0], nu, self.domain()?))
    }

    /// Viscosity for the `i`-th scale: paired with `values[i]` when the list
    /// matches `m_list` in length, else `values[0]`; the transport condition
    /// under the `condinu` policy.
    pub fn nu_for(&self, i: usize) -> crate::Result<f64> {
        match self.viscosity.policy {
            NuPolicy::Fixed => {
                let v = &self.viscosity.values;
                Ok(if v.len() == self.m_list.len() { v[i] } else { v[0] })
            }
            NuPolicy::Condinu => {
                let mut cfg = self.base()?;
                cfg.m = self.m_list[i];
                let norms = transport_norms(&cfg, &self.sweep_data()?)?;
                Ok(condinu_transport(cfg.m, &norms, &self.constants())?.nu_max.min(1.0 / self.horizon))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: Config,
    pub config_hash: String,
    pub version: String,
    pub grid: GridSummary,
    pub constants: ScheduleConfig,
    pub rows: usize,
    /// Row index and message of every failed run.
    pub errors: Vec<(usize, String)>,
    /// Command-specific diagnostics.
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub half_length: f64,
    pub points: usize,
    pub dx: f64,
}

impl Manifest {
    pub fn new(command: Command, cfg: &Config, rows: &[ReportRow]) -> Self {
        let d = cfg.domain().expect("validated grid");
        Self {
            command: command.name().into(),
            config: cfg.clone(),
            config_hash: config_hash(cfg),
            version: env!("CARGO_PKG_VERSION").into(),
            grid: GridSummary {
                half_length: d.half_length(),
                points: d.len(),
                dx: d.dx(),
            },
            constants: cfg.schedule,
            rows: rows.len(),
            errors: rows
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.error.clone().map(|e| (i, e)))
                .collect(),
            extra: BTreeMap::new(),
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(CSV_HEADER).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        let rec = [
            r.equation.clone(),
            format_float(r.m),
            format_float(r.nu),
            r.n_cut.to_string(),
            format_float(r.t),
            format_float(r.sup_norm),
            format_float(r.holder_norm),
            format_float(r.bound),
            format_float(r.slack),
            format_float(r.residual),
            format_float(r.wall_ms),
        ];
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]; `NaN` fields come back as NaN.
pub fn read_csv(path: &Path) -> crate::Result<Vec<BTreeMap<String, String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let headers = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            Ok(headers.iter().map(String::from).zip(rec.iter().map(String::from)).collect())
        })
        .collect()
}

fn blank_row(cfg: &SolveConfig) -> ReportRow {
    ReportRow {
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
        wall_ms: f64::NAN,
        sup_bound: f64::NAN,
        config_hash: config_hash(cfg),
        error: None,
    }
}

fn error_row(cfg: &SolveConfig, e: &Error) -> ReportRow {
    ReportRow {
        error: Some(e.to_string()),
        ..blank_row(cfg)
    }
}

fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Output of one subcommand: report rows, extra manifest entries and text
/// for standard output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<ReportRow>,
    pub extra: BTreeMap<String, serde_json::Value>,
    pub stdout: String,
}

fn json(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("diagnostics serialize")
}

fn run_solve(cfg: &Config) -> crate::Result<Outcome> {
    let mut sc = cfg.base()?;
    sc.nu = cfg.nu_for(0)?;
    let data = cfg.sweep_data()?;
    let start = std::time::Instant::now();
    let sol = match prepare(&sc, &data.f, &data.g).and_then(|p| solve_prepared(&sc, p)) {
        Ok(s) => s,
        Err(e) => {
            return Ok(Outcome {
                rows: vec![error_row(&sc, &e)],
                ..Outcome::default()
            })
        }
    };
    let ms = elapsed_ms(start);
    let window = interior_window(&sc.domain, sc.m, sc.nu, sc.horizon)?;
    let dist = default_pair_distance(&sc.domain);
    let gamma = sc.gamma;
    let g_semi = holder_seminorm(&data.g, gamma, Window::full(&sc.domain), dist)?.value;
    let f_semi = data
        .f
        .frames()
        .iter()
        .map(|h| holder_seminorm(h, gamma, Window::full(&sc.domain), dist).map(|n| n.value))
        .try_fold(0.0_f64, |m, v| v.map(|v| m.max(v)))?;
    let transport = sc.equation == Equation::Transport;
    let mut rows = Vec::with_capacity(sol.field.len());
    for (&t, u) in sol.field.times().iter().zip(sol.field.frames()) {
        let holder = holder_seminorm(u, gamma, window, dist)?.value;
        let bound = if transport { t * f_semi + g_semi } else { f64::NAN };
        rows.push(ReportRow {
            t,
            sup_norm: u.sup_norm(),
            holder_norm: holder,
            bound,
            slack: bound - holder,
            wall_ms: ms,
            sup_bound: sc.horizon * data.f.sup_norm() + data.g.sup_norm(),
            ..blank_row(&sc)
        });
    }
    let mut extra = BTreeMap::new();
    extra.insert("dt".into(), json(sol.dt));
    extra.insert("steps".into(), json(sol.steps));
    extra.insert("snapped".into(), json(sol.snapped));
    Ok(Outcome {
        rows,
        extra,
        stdout: format!("solved {} steps of dt = {:.6e} in {ms:.1} ms\n", sol.steps, sol.dt),
    })
}

fn run_sweep_holder(cfg: &Config) -> crate::Result<Outcome> {
    let base = cfg.base()?;
    let nu = match cfg.viscosity.policy {
        NuPolicy::Fixed => NuSource::Fixed(cfg.viscosity.values.clone()),
        NuPolicy::Condinu => NuSource::Condinu(cfg.constants()),
    };
    let report = holder_bound_sweep(&base, &cfg.sweep_data()?, &cfg.m_list, &nu)?;
    let worst = report.worst_relative_slack();
    Ok(Outcome {
        stdout: format!(
            "{} rows, {} failed, worst slack/bound {}\n",
            report.rows.len(),
            report.failures().count(),
            format_float(worst)
        ),
        rows: report.rows,
        extra: BTreeMap::new(),
    })
}

fn run_sweep_unique(cfg: &Config) -> crate::Result<Outcome> {
    let base = cfg.base()?;
    let data = cfg.sweep_data()?;
    let consts = cfg.constants();
    let pairs = match cfg.uniqueness.schedule {
        UniquenessSchedule::TransportWindow => {
            if cfg.equation != Equation::Transport {
                return Err(Error::Config("the transport window schedule needs equation = \"transport\"".into()));
            }
            transport_window_pairs(&cfg.m_list, cfg.gamma, cfg.uniqueness.gamma_tilde, &data, &consts)?
        }
        s => {
            if cfg.equation != Equation::Burgers {
                return Err(Error::Config("Burgers schedules need equation = \"burgers\"".into()));
            }
            let kind = if s == UniquenessSchedule::Turbulent {
                BurgersKind::Turbulent
            } else {
                BurgersKind::Viscous
            };
            burgers_schedule_pairs(kind, &base, &data, &cfg.m_list, &consts)?
        }
    };
    let mut rows = Vec::new();
    let mut out = String::new();
    for pair in &pairs {
        let mut sc = base.clone();
        sc.m = pair.m;
        sc.nu = pair.nu;
        match gap_between(&base, &data, pair) {
            Ok(g) => {
                out.push_str(&format!("m = {} nu = {:.6e} nu_bar = {:.6e} G = {:.6e}\n", pair.m, pair.nu, pair.nu_bar, g.gap));
                rows.push(ReportRow {
                    t: base.horizon,
                    residual: g.gap,
                    wall_ms: g.wall_ms,
                    ..blank_row(&sc)
                });
            }
            Err(e) => rows.push(error_row(&sc, &e)),
        }
    }
    let mut extra = BTreeMap::new();
    extra.insert("pairs".into(), json(&pairs));
    Ok(Outcome { rows, extra, stdout: out })
}

fn run_burgers_steady(cfg: &Config) -> crate::Result<Outcome> {
    let d = cfg.domain()?;
    let mut rows = Vec::new();
    let mut out = String::new();
    let mut diag = Vec::new();
    for (i, &m) in cfg.m_list.iter().enumerate() {
        let nu = cfg.nu_for(i)?;
        let sc = SolveConfig::burgers(m, nu, cfg.horizon, d);
        let start = std::time::Instant::now();
        match burgers_steady_state(nu, cfg.horizon, d, m) {
            Ok(r) => {
                out.push_str(&format!(
                    "m = {m} nu = {nu:.6e} sup error {:.6e} final rate {:.6e}\n",
                    r.sup_error, r.final_rate
                ));
                diag.push(serde_json::json!({
                    "m": m, "error_positive": r.error_positive, "error_negative": r.error_negative,
                    "final_rate": r.final_rate, "odd_defect": r.odd_defect,
                }));
                rows.push(ReportRow {
                    t: cfg.horizon,
                    sup_norm: r.solution.last().sup_norm(),
                    residual: r.sup_error,
                    wall_ms: elapsed_ms(start),
                    ..blank_row(&sc)
                });
            }
            Err(e) => rows.push(error_row(&sc, &e)),
        }
    }
    let mut extra = BTreeMap::new();
    extra.insert("steady".into(), serde_json::Value::Array(diag));
    Ok(Outcome { rows, extra, stdout: out })
}

fn run_peano(cfg: &Config) -> crate::Result<Outcome> {
    let base = cfg.base()?;
    let data = cfg.sweep_data()?;
    let runs = (0..cfg.m_list.len())
        .map(|i| Ok((cfg.m_list[i], cfg.nu_for(i)?)))
        .collect::<crate::Result<Vec<_>>>()?;
    let times = if cfg.peano.times.is_empty() {
        (1..=4).map(|k| cfg.horizon * k as f64 / 4.0).collect()
    } else {
        cfg.peano.times.clone()
    };
    let rep = peano_selection(&base, &data, &runs, &times)?;
    let mut rows = Vec::new();
    let mut out = String::new();
    for (ti, &t) in rep.times.iter().enumerate() {
        out.push_str(&format!("t = {t}: tail diameters"));
        for (k, &(m, nu)) in rep.runs.iter().enumerate() {
            let mut sc = base.clone();
            sc.m = m;
            sc.nu = nu;
            out.push_str(&format!(" {:.3e}", rep.diameters[ti][k]));
            rows.push(ReportRow {
                t,
                residual: rep.diameters[ti][k],
                ..blank_row(&sc)
            });
        }
        out.push('\n');
    }
    let mut extra = BTreeMap::new();
    extra.insert("selection".into(), json(&rep));
    Ok(Outcome { rows, extra, stdout: out })
}

fn run_norms(cfg: &Config) -> crate::Result<Outcome> {
    let d = cfg.domain()?;
    let data = cfg.sweep_data()?;
    let vg = VarianceGrid::default_for(&d)?;
    let full = Window::full(&d);
    let dist = default_pair_distance(&d);
    let mut extra = BTreeMap::new();
    let mut out = String::new();
    let mut fields = vec![("initial", data.g.clone())];
    fields.extend(data.f.frames().into_iter().map(|f| ("forcing", f)));
    if cfg.equation == Equation::Transport {
        fields.push(("drift", cfg.drift_spec()?.sample(&d, 0.0)));
    }
    for (name, h) in fields {
        let holder = holder_seminorm(&h, cfg.gamma, full, dist)?.value;
        let besov = besov_norm_thermic(&h, cfg.gamma, &vg)?.value;
        let v = serde_json::json!({ "sup": h.sup_norm(), "holder_seminorm": holder, "besov_thermic": besov });
        out.push_str(&format!(
            "{name}: sup {} holder {} besov {}\n",
            format_float(h.sup_norm()),
            format_float(holder),
            format_float(besov)
        ));
        extra.insert(name.into(), v);
    }
    Ok(Outcome {
        rows: Vec::new(),
        extra,
        stdout: out,
    })
}

fn run_schedule(cfg: &Config) -> crate::Result<Outcome> {
    let base = cfg.base()?;
    let data = cfg.sweep_data()?;
    let consts = cfg.constants();
    let mut rows = Vec::new();
    let mut out = String::new();
    let mut bounds = Vec::new();
    for &m in &cfg.m_list {
        let mut sc = base.clone();
        sc.m = m;
        let norms = transport_norms(&sc, &data)?;
        let b = condinu_transport(m, &norms, &consts)?;
        out.push_str(&format!("m = {m} nu_max = {} ln_nu_max = {}\n", format_float(b.nu_max), format_float(b.ln_nu_max)));
        sc.nu = b.nu_max;
        rows.push(ReportRow {
            t: cfg.horizon,
            ..blank_row(&sc)
        });
        bounds.push(serde_json::json!({ "m": m, "norms": json(norms), "bound": json(b) }));
    }
    let mut extra = BTreeMap::new();
    extra.insert("condinu".into(), serde_json::Value::Array(bounds));
    Ok(Outcome { rows, extra, stdout: out })
}

fn run_report(cfg: &Config) -> crate::Result<Outcome> {
    let mut out = String::new();
    let mut names: Vec<PathBuf> = fs::read_dir(&cfg.output.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_stem().is_some_and(|s| s != "report"))
        .collect();
    names.sort();
    for p in names {
        let rows = read_csv(&p)?;
        let num = |r: &BTreeMap<String, String>, k: &str| r[k].parse::<f64>().unwrap_or(f64::NAN);
        let failed = match fs::read_to_string(p.with_extension("json")) {
            Ok(text) => serde_json::from_str::<Manifest>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                .errors
                .len(),
            Err(_) => 0,
        };
        let worst = rows
            .iter()
            .map(|r| num(r, "slack") / num(r, "bound"))
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        out.push_str(&format!(
            "{}: {} rows, {} failed, worst slack/bound {}\n",
            p.file_name().unwrap_or_default().to_string_lossy(),
            rows.len(),
            failed,
            if worst.is_finite() { format_float(worst) } else { "-".into() }
        ));
    }
    Ok(Outcome {
        stdout: out,
        ..Outcome::default()
    })
}

/// Runs `command`, writes `<dir>/<command>.csv` and `<dir>/<command>.json`
/// (except for `report`), and returns the text for standard output.
pub fn run(command: Command, cfg: &Config) -> Result<String, CliError> {
    let outcome = match command {
        Command::Solve => run_solve(cfg),
        Command::SweepHolder => run_sweep_holder(cfg),
        Command::SweepUnique => run_sweep_unique(cfg),
        Command::BurgersSteady => run_burgers_steady(cfg),
        Command::Peano => run_peano(cfg),
        Command::Norms => run_norms(cfg),
        Command::Schedule => run_schedule(cfg),
        Command::Report => return Ok(run_report(cfg)?.stdout),
    }?;
    fs::create_dir_all(&cfg.output.dir).map_err(Error::from)?;
    let stem = cfg.output.dir.join(command.name());
    write_csv(&stem.with_extension("csv"), &outcome.rows)?;
    let mut manifest = Manifest::new(command, cfg, &outcome.rows);
    manifest.extra = outcome.extra;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(stem.with_extension("json"), text).map_err(Error::from)?;
    let unstable = outcome
        .rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.error.as_deref().is_some_and(|e| e.starts_with("numerical instability")));
    if let Some((i, r)) = unstable {
        return Err(CliError::Instability(format!(
            "row {i} (m = {}, nu = {:e}): {}",
            r.m,
            r.nu,
            r.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(outcome.stdout)
}

/// Sizes the worker pool from `VVLAB_WORKERS` when set.
#[cfg(feature = "parallel")]
pub fn configure_workers() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("VVLAB_WORKERS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(vec![format!("VVLAB_WORKERS must be a positive integer, got `{v}`")]))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(Error::Config(e.to_string())))?;
    }
    Ok(())
}
