//! Config parsing: TOML sections `[scenario]`, `[grid]`, `[model]`,
//! `[initial]`, `[scheme]`, `[output]` over per-scenario defaults.
//! Unknown keys and duplicate keys are hard errors (no silent typos); the
//! fully resolved config is echoed into every output bundle and re-parses
//! to an identical resolution.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{GaussianSpec, ModelParams, ScatteringMatrix};
use crate::propagate::{NonlinearityUpdate, SplitKind, StepScheme};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioId {
    BerryTrace,
    SelfInterference,
    TimeOfFlight,
    PhononSwap,
    NonabelianRoundtrip,
    Custom,
}

impl ScenarioId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::BerryTrace => "berry_trace",
            ScenarioId::SelfInterference => "self_interference",
            ScenarioId::TimeOfFlight => "time_of_flight",
            ScenarioId::PhononSwap => "phonon_swap",
            ScenarioId::NonabelianRoundtrip => "nonabelian_roundtrip",
            ScenarioId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "berry_trace" => ScenarioId::BerryTrace,
            "self_interference" => ScenarioId::SelfInterference,
            "time_of_flight" => ScenarioId::TimeOfFlight,
            "phonon_swap" => ScenarioId::PhononSwap,
            "nonabelian_roundtrip" => ScenarioId::NonabelianRoundtrip,
            "custom" => ScenarioId::Custom,
            other => {
                return Err(Error::Config(format!(
                    "scenario.id: unknown scenario {other:?} (expected berry_trace, \
                     self_interference, time_of_flight, phonon_swap, nonabelian_roundtrip \
                     or custom)"
                )))
            }
        })
    }
}

/// Fully resolved simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: ScenarioId,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub initial: GaussianSpec,
    pub scheme: StepScheme,
    /// Evolution time; when absent the orbit scenarios measure one period.
    pub duration: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Additional nonzero scattering values swept by some scenarios.
    pub g_values: Vec<f64>,
    pub release_time: f64,
    pub tof_duration: f64,
    /// Scattering strength during ballistic expansion (default 0).
    pub tof_g: f64,
    /// Domain enlargement factor before time of flight.
    pub expand_factor: usize,
    pub sample_interval: f64,
    pub output_dir: Option<PathBuf>,
}

const TAU_COL_V8: f64 = 16.0 * PI;

fn base_defaults(scenario: ScenarioId) -> ResolvedConfig {
    ResolvedConfig {
        scenario,
        grid: GridSpec::default_grid(),
        params: ModelParams::isotropic(4.0, 0.0).expect("valid"),
        initial: GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0),
        scheme: StepScheme::default_strang(),
        duration: None,
        snapshot_times: Vec::new(),
        g_values: Vec::new(),
        release_time: TAU_COL_V8,
        tof_duration: PI,
        tof_g: 0.0,
        expand_factor: 4,
        sample_interval: 0.05,
        output_dir: None,
    }
}

/// Scenario defaults: exactly the published parameter sets.
pub fn scenario_defaults(scenario: ScenarioId) -> ResolvedConfig {
    let mut cfg = base_defaults(scenario);
    match scenario {
        ScenarioId::BerryTrace => {}
        ScenarioId::SelfInterference => {
            cfg.params = ModelParams::isotropic(8.0, 0.0).expect("valid");
            cfg.initial = GaussianSpec::lower_pair(0.0, 0.0, -8.0, 0.0, 1.0);
            cfg.duration = Some(TAU_COL_V8);
            cfg.snapshot_times = vec![0.5 * TAU_COL_V8, 0.75 * TAU_COL_V8, TAU_COL_V8];
            cfg.g_values = vec![0.25, -0.25];
        }
        ScenarioId::TimeOfFlight => {
            cfg.params = ModelParams::isotropic(8.0, 0.0).expect("valid");
            cfg.initial = GaussianSpec::lower_pair(0.0, 0.0, -8.0, 0.0, 1.0);
            cfg.release_time = TAU_COL_V8;
            cfg.tof_duration = PI;
        }
        ScenarioId::PhononSwap => {
            cfg.params = ModelParams::isotropic(8.0, 0.25).expect("valid");
            cfg.initial = GaussianSpec::lower_pair(0.0, 0.0, -8.0, 0.0, 1.0);
            cfg.duration = Some(400.0);
            cfg.g_values = vec![0.25, 0.0, -0.25];
            cfg.sample_interval = 0.5;
        }
        ScenarioId::NonabelianRoundtrip => {
            cfg.initial = GaussianSpec::lower_pair(0.0, 3.0, -4.0, 0.0, 1.0);
        }
        ScenarioId::Custom => {}
    }
    cfg
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ComplexIn {
    Re(f64),
    Pair([f64; 2]),
}

impl ComplexIn {
    fn to_c64(&self) -> C64 {
        match self {
            ComplexIn::Re(r) => C64::new(*r, 0.0),
            ComplexIn::Pair([r, i]) => C64::new(*r, *i),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: Option<String>,
    duration: Option<f64>,
    snapshot_times: Option<Vec<f64>>,
    g_values: Option<Vec<f64>>,
    release_time: Option<f64>,
    tof_duration: Option<f64>,
    tof_g: Option<f64>,
    expand_factor: Option<usize>,
    sample_interval: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    v: Option<f64>,
    v0: Option<f64>,
    v1: Option<f64>,
    g: Option<f64>,
    g11: Option<f64>,
    g22: Option<f64>,
    g12: Option<f64>,
    trap: Option<bool>,
    born_huang: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    a1: Option<ComplexIn>,
    a2: Option<ComplexIn>,
    x0: Option<f64>,
    y0: Option<f64>,
    px0: Option<f64>,
    py0: Option<f64>,
    width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<String>,
    dtau: Option<f64>,
    nonlinearity: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<RawScenario>,
    grid: Option<RawGrid>,
    model: Option<RawModel>,
    initial: Option<RawInitial>,
    scheme: Option<RawScheme>,
    output: Option<RawOutput>,
}

/// Parse config text and resolve it over the scenario defaults.
pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ResolvedConfig> {
    let sc = raw.scenario.unwrap_or_default();
    let id_str = sc
        .id
        .ok_or_else(|| Error::Config("scenario.id is required".into()))?;
    let id = ScenarioId::parse(&id_str)?;
    let mut cfg = scenario_defaults(id);

    if let Some(g) = raw.grid {
        let defaults = cfg.grid;
        cfg.grid = GridSpec::new(
            g.nx.unwrap_or(defaults.nx()),
            g.ny.unwrap_or(defaults.ny()),
            g.lx.unwrap_or(defaults.lx()),
            g.ly.unwrap_or(defaults.ly()),
        )
        .map_err(|e| Error::Config(format!("grid: {e}")))?;
    }

    if let Some(m) = raw.model {
        if m.v.is_some() && (m.v0.is_some() || m.v1.is_some()) {
            return Err(Error::Config(
                "model.v conflicts with model.v0/model.v1; set one form".into(),
            ));
        }
        if m.g.is_some() && (m.g11.is_some() || m.g22.is_some() || m.g12.is_some()) {
            return Err(Error::Config(
                "model.g conflicts with model.g11/g22/g12; set one form".into(),
            ));
        }
        let d = cfg.params;
        let (v0, v1) = match m.v {
            Some(v) => (v, v),
            None => (m.v0.unwrap_or(d.v0), m.v1.unwrap_or(d.v1)),
        };
        let g = match m.g {
            Some(g) => ScatteringMatrix::isotropic(g),
            None => ScatteringMatrix {
                g11: m.g11.unwrap_or(d.g.g11),
                g22: m.g22.unwrap_or(d.g.g22),
                g12: m.g12.unwrap_or(d.g.g12),
            },
        };
        cfg.params = ModelParams::new(
            v0,
            v1,
            g,
            m.trap.unwrap_or(d.trap_on),
            m.born_huang.unwrap_or(d.born_huang),
        )
        .map_err(|e| Error::Config(format!("model: {e}")))?;
        // Paper scenarios pin the packet to the ring: keep px0 = -v in sync
        // with an overridden v unless the user set px0 themselves.
        if m.v.is_some() || m.v0.is_some() {
            cfg.initial.px0 = -cfg.params.v0;
        }
    }

    if let Some(i) = raw.initial {
        let d = cfg.initial;
        cfg.initial = GaussianSpec::new(
            i.a1.as_ref().map(|c| c.to_c64()).unwrap_or(d.a1),
            i.a2.as_ref().map(|c| c.to_c64()).unwrap_or(d.a2),
            i.x0.unwrap_or(d.x0),
            i.y0.unwrap_or(d.y0),
            i.px0.unwrap_or(d.px0),
            i.py0.unwrap_or(d.py0),
            i.width.unwrap_or(d.delta_l),
        )
        .map_err(|e| Error::Config(format!("initial: {e}")))?;
    }

    if let Some(s) = raw.scheme {
        let d = cfg.scheme;
        let kind = match s.kind.as_deref() {
            None => d.kind,
            Some("strang") => SplitKind::StrangSymmetric,
            Some("lie") => SplitKind::LieFirstOrder,
            Some(other) => {
                return Err(Error::Config(format!(
                    "scheme.kind: unknown kind {other:?} (expected \"strang\" or \"lie\")"
                )))
            }
        };
        let nonlinearity = match s.nonlinearity.as_deref() {
            None => d.nonlinearity,
            Some("frozen") => NonlinearityUpdate::FrozenDensity,
            Some("midpoint") => NonlinearityUpdate::MidpointDensity,
            Some(other) => {
                return Err(Error::Config(format!(
                    "scheme.nonlinearity: unknown mode {other:?} (expected \"frozen\" or \
                     \"midpoint\")"
                )))
            }
        };
        cfg.scheme = StepScheme::new(kind, s.dtau.unwrap_or(d.dtau), nonlinearity)
            .map_err(|e| Error::Config(format!("scheme: {e}")))?;
    }

    cfg.duration = sc.duration.or(cfg.duration);
    if let Some(t) = sc.snapshot_times {
        cfg.snapshot_times = t;
    }
    if let Some(g) = sc.g_values {
        cfg.g_values = g;
    }
    cfg.release_time = sc.release_time.unwrap_or(cfg.release_time);
    cfg.tof_duration = sc.tof_duration.unwrap_or(cfg.tof_duration);
    cfg.tof_g = sc.tof_g.unwrap_or(cfg.tof_g);
    cfg.expand_factor = sc.expand_factor.unwrap_or(cfg.expand_factor);
    cfg.sample_interval = sc.sample_interval.unwrap_or(cfg.sample_interval);
    if let Some(o) = raw.output {
        cfg.output_dir = o.dir.map(PathBuf::from);
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ResolvedConfig) -> Result<()> {
    if let Some(d) = cfg.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Config(format!(
                "scenario.duration = {d} must be positive"
            )));
        }
        for (i, t) in cfg.snapshot_times.iter().enumerate() {
            if !(t.is_finite() && *t > 0.0 && *t <= d + 1e-9) {
                return Err(Error::Config(format!(
                    "scenario.snapshot_times[{i}] = {t} must lie in (0, duration]"
                )));
            }
        }
    }
    if !(cfg.sample_interval.is_finite() && cfg.sample_interval > 0.0) {
        return Err(Error::Config(format!(
            "scenario.sample_interval = {} must be positive",
            cfg.sample_interval
        )));
    }
    if !(cfg.release_time > 0.0 && cfg.tof_duration > 0.0) {
        return Err(Error::Config(
            "scenario.release_time and scenario.tof_duration must be positive".into(),
        ));
    }
    if cfg.expand_factor == 0 || !cfg.expand_factor.is_power_of_two() {
        return Err(Error::Config(format!(
            "scenario.expand_factor = {} must be a power of two",
            cfg.expand_factor
        )));
    }
    for (i, g) in cfg.g_values.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::Config(format!(
                "scenario.g_values[{i}] must be finite"
            )));
        }
    }
    Ok(())
}

/// Serializable mirror of the resolved config (the echo written into every
/// bundle; re-parses to an identical [`ResolvedConfig`]).
#[derive(Debug, Serialize)]
pub struct ConfigDoc {
    scenario: DocScenario,
    grid: DocGrid,
    model: DocModel,
    initial: DocInitial,
    scheme: DocScheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<DocOutput>,
}

#[derive(Debug, Serialize)]
struct DocScenario {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    snapshot_times: Vec<f64>,
    g_values: Vec<f64>,
    release_time: f64,
    tof_duration: f64,
    tof_g: f64,
    expand_factor: usize,
    sample_interval: f64,
}

#[derive(Debug, Serialize)]
struct DocGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

#[derive(Debug, Serialize)]
struct DocModel {
    v0: f64,
    v1: f64,
    g11: f64,
    g22: f64,
    g12: f64,
    trap: bool,
    born_huang: bool,
}

#[derive(Debug, Serialize)]
struct DocInitial {
    a1: [f64; 2],
    a2: [f64; 2],
    x0: f64,
    y0: f64,
    px0: f64,
    py0: f64,
    width: f64,
}

#[derive(Debug, Serialize)]
struct DocScheme {
    kind: String,
    dtau: f64,
    nonlinearity: String,
}

#[derive(Debug, Serialize)]
struct DocOutput {
    dir: String,
}

impl From<&ResolvedConfig> for ConfigDoc {
    fn from(cfg: &ResolvedConfig) -> Self {
        ConfigDoc {
            scenario: DocScenario {
                id: cfg.scenario.as_str().into(),
                duration: cfg.duration,
                snapshot_times: cfg.snapshot_times.clone(),
                g_values: cfg.g_values.clone(),
                release_time: cfg.release_time,
                tof_duration: cfg.tof_duration,
                tof_g: cfg.tof_g,
                expand_factor: cfg.expand_factor,
                sample_interval: cfg.sample_interval,
            },
            grid: DocGrid {
                nx: cfg.grid.nx(),
                ny: cfg.grid.ny(),
                lx: cfg.grid.lx(),
                ly: cfg.grid.ly(),
            },
            model: DocModel {
                v0: cfg.params.v0,
                v1: cfg.params.v1,
                g11: cfg.params.g.g11,
                g22: cfg.params.g.g22,
                g12: cfg.params.g.g12,
                trap: cfg.params.trap_on,
                born_huang: cfg.params.born_huang,
            },
            initial: DocInitial {
                a1: [cfg.initial.a1.re, cfg.initial.a1.im],
                a2: [cfg.initial.a2.re, cfg.initial.a2.im],
                x0: cfg.initial.x0,
                y0: cfg.initial.y0,
                px0: cfg.initial.px0,
                py0: cfg.initial.py0,
                width: cfg.initial.delta_l,
            },
            scheme: DocScheme {
                kind: match cfg.scheme.kind {
                    SplitKind::StrangSymmetric => "strang".into(),
                    SplitKind::LieFirstOrder => "lie".into(),
                },
                dtau: cfg.scheme.dtau,
                nonlinearity: match cfg.scheme.nonlinearity {
                    NonlinearityUpdate::FrozenDensity => "frozen".into(),
                    NonlinearityUpdate::MidpointDensity => "midpoint".into(),
                },
            },
            output: cfg.output_dir.as_ref().map(|d| DocOutput {
                dir: d.display().to_string(),
            }),
        }
    }
}

/// Render the resolved config as TOML (the config echo).
pub fn echo_config(cfg: &ResolvedConfig) -> String {
    toml::to_string(&ConfigDoc::from(cfg)).expect("resolved config serializes")
}
