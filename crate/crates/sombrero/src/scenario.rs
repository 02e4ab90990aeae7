//! Canned experiment runners producing result bundles: the Berry-phase
//! trace of one ring orbit, wave-packet self-interference against the
//! single-surface control, time-of-flight expansion, the long-time phonon
//! swap, and the clockwise/anti-clockwise population interchange.
//!
//! Runners are pure compute; [`write_bundle`] serializes a bundle into one
//! output directory (config echo, metadata, series, snapshots).

use crate::analysis::{
    self, berry_phase, bloch_sample, momentum_distribution, node_contrast, reduced_density,
    BlochSample,
};
use crate::config::{echo_config, ResolvedConfig, ScenarioId};
use crate::dense::dense_oracle_evolve;
use crate::error::{Error, Result};
use crate::grid::{Observable, SpinorField};
use crate::io::{write_series, write_snapshot, SeriesRow};
use crate::mat2::Mat2;
use crate::model::{make_initial, GaussianSpec, ModelParams, ScatteringMatrix};
use crate::propagate::{EngineKind, MonitorConfig, MonitorState, RunState, StepScheme, Stepper};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::path::Path;

/// Longest time the orbit scenarios will run while measuring one period.
pub const PERIOD_MEASURE_CAP: f64 = 25.0;
/// Sustained-exchange window for the phonon-swap detector (time units).
pub const SWAP_SUSTAIN_TIME: f64 = 20.0;
/// Fraction of the initial |n_x - n_y| gap that counts as exchanged.
pub const SWAP_MARGIN_FRACTION: f64 = 0.05;
/// Steps used for the (exact) ballistic expansion leg.
pub const TOF_STEPS: u64 = 64;
/// Scaled time unit in milliseconds for a 40 Hz trap (1/omega).
pub const TIME_UNIT_MS: f64 = 1000.0 / (2.0 * PI * 40.0);

/// One run's sampled series plus its monitor outcome.
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub engine: EngineKind,
    pub g: f64,
    pub direction: Option<&'static str>,
    pub rows: Vec<SeriesRow>,
    pub monitors: MonitorState,
    pub scheme: StepScheme,
}

impl RunSeries {
    pub fn file_stem(&self) -> String {
        let mut s = format!("series_{}", self.engine.label());
        if let Some(d) = self.direction {
            s.push('_');
            s.push_str(d);
        }
        s.push_str(&format!("_g{:+.2}", self.g));
        s
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotOut {
    pub label: String,
    pub tau: f64,
    pub field: SpinorField,
}

/// Everything one scenario produces.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: ResolvedConfig,
    pub series: Vec<RunSeries>,
    pub snapshots: Vec<SnapshotOut>,
    pub results: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl Bundle {
    fn new(config: &ResolvedConfig) -> Self {
        Bundle {
            config: config.clone(),
            series: Vec::new(),
            snapshots: Vec::new(),
            results: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn result(&self, key: &str) -> Option<f64> {
        self.results
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }

    pub fn series_for(&self, engine: EngineKind, g: f64) -> Option<&RunSeries> {
        self.series
            .iter()
            .find(|s| s.engine == engine && s.g == g && s.direction.is_none())
    }
}

/// Setup checks shared by every scenario: momentum resolution against the
/// spin-orbit ring and packet containment in the position domain.
pub fn validate_setup(cfg: &ResolvedConfig) -> Result<SpinorField> {
    cfg.grid
        .check_momentum_resolution(cfg.params.v0, cfg.params.v1, cfg.initial.delta_l)?;
    make_initial(&cfg.initial, &cfg.grid)
}

/// Dispatch on the scenario id.
pub fn run_scenario(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    match cfg.scenario {
        ScenarioId::BerryTrace => run_berry_trace(cfg, strict),
        ScenarioId::SelfInterference => run_self_interference(cfg, strict),
        ScenarioId::TimeOfFlight => run_time_of_flight(cfg, strict),
        ScenarioId::PhononSwap => run_phonon_swap(cfg, strict),
        ScenarioId::NonabelianRoundtrip => run_nonabelian_roundtrip(cfg, strict),
        ScenarioId::Custom => run_custom(cfg, strict),
    }
}

fn monitor_config(strict: bool) -> MonitorConfig {
    MonitorConfig {
        strict,
        ..MonitorConfig::default()
    }
}

/// Collector for the per-sample observables of one run.
struct Recorder {
    rows: Vec<SeriesRow>,
    rhos: Vec<Mat2>,
    times: Vec<f64>,
    mean_p: Vec<(f64, f64)>,
    spinor: bool,
}

impl Recorder {
    fn new(spinor: bool) -> Self {
        Recorder {
            rows: Vec::new(),
            rhos: Vec::new(),
            times: Vec::new(),
            mean_p: Vec::new(),
            spinor,
        }
    }

    fn sample(&mut self, state: &RunState, stepper: &Stepper) -> Result<()> {
        let f = &state.field;
        let mom = f.clone().to_momentum()?;
        let px = mom.expectation(Observable::Px)?;
        let py = mom.expectation(Observable::Py)?;
        let px2 = mom.expectation(Observable::Px2)?;
        let py2 = mom.expectation(Observable::Py2)?;
        let x2 = f.expectation(Observable::X2)?;
        let y2 = f.expectation(Observable::Y2)?;
        let energy = stepper.energy_parts(f, &mom)?;
        let norm = f.norm();
        let (bloch, rho) = if self.spinor {
            let rho = reduced_density(f)?;
            (bloch_sample(state.tau, f)?, rho)
        } else {
            (
                BlochSample {
                    tau: state.tau,
                    p1: f64::NAN,
                    p2: f64::NAN,
                    coherence: C64::new(f64::NAN, f64::NAN),
                    r: [f64::NAN; 3],
                },
                Mat2::zero(),
            )
        };
        self.rows.push(SeriesRow {
            tau: state.tau,
            p1: bloch.p1,
            p2: bloch.p2,
            u: bloch.r[0],
            v: bloch.r[1],
            w: bloch.r[2],
            r: if self.spinor { bloch.purity() } else { f64::NAN },
            gamma_wrapped: f64::NAN,
            gamma_unwrapped: f64::NAN,
            n_x: 0.5 * (px2 + x2),
            n_y: 0.5 * (py2 + y2),
            norm,
            energy,
            flags: state.monitors.flag_summary(),
        });
        self.rhos.push(rho);
        self.times.push(state.tau);
        self.mean_p.push((px, py));
        Ok(())
    }

    /// Fill the gamma columns from the collected density matrices.
    fn attach_berry(&mut self) -> Result<()> {
        let trace = berry_phase(&self.times, &self.rhos)?;
        for (row, (gw, gu)) in self.rows.iter_mut().zip(
            trace
                .gamma_wrapped
                .iter()
                .zip(trace.gamma_unwrapped.iter()),
        ) {
            row.gamma_wrapped = *gw;
            row.gamma_unwrapped = *gu;
        }
        Ok(())
    }

    fn bloch_series(&self) -> Vec<BlochSample> {
        self.rows
            .iter()
            .map(|r| BlochSample {
                tau: r.tau,
                p1: r.p1,
                p2: r.p2,
                coherence: C64::new(0.5 * r.u, -0.5 * r.v),
                r: [r.u, r.v, r.w],
            })
            .collect()
    }
}

struct EvolveOutput {
    state: RunState,
    recorder: Recorder,
    snapshots: Vec<SnapshotOut>,
}

/// Evolve to `duration`, sampling every `cfg.sample_interval` (plus the
/// initial point) and snapshotting the momentum-space field at the
/// requested times.
fn evolve_sampled(
    cfg: &ResolvedConfig,
    engine: EngineKind,
    params: ModelParams,
    initial: SpinorField,
    duration: f64,
    snapshot_times: &[f64],
    snapshot_prefix: &str,
    strict: bool,
) -> Result<EvolveOutput> {
    let dtau = cfg.scheme.dtau;
    let n_steps = (duration / dtau).round().max(1.0) as u64;
    let sample_every = (cfg.sample_interval / dtau).round().max(1.0) as u64;
    let mut snap_steps: Vec<(u64, f64)> = snapshot_times
        .iter()
        .map(|t| ((t / dtau).round().max(1.0) as u64, *t))
        .collect();
    snap_steps.sort_unstable_by_key(|(s, _)| *s);

    let mut state = RunState::new(initial, cfg.scheme, params)?;
    let mut stepper = match engine {
        EngineKind::FullModel => Stepper::full_model(&state, monitor_config(strict))?,
        EngineKind::SingleSurface => Stepper::single_surface(&state, monitor_config(strict))?,
        EngineKind::TimeOfFlight => Stepper::time_of_flight(&state, monitor_config(strict))?,
    };
    let mut recorder = Recorder::new(engine != EngineKind::SingleSurface);
    recorder.sample(&state, &stepper)?;
    let mut snapshots = Vec::new();
    let mut next_snap = 0usize;
    for step in 1..=n_steps {
        stepper.step(&mut state)?;
        if step % sample_every == 0 || step == n_steps {
            recorder.sample(&state, &stepper)?;
        }
        while next_snap < snap_steps.len() && snap_steps[next_snap].0 == step {
            let mom = state.field.clone().to_momentum()?;
            snapshots.push(SnapshotOut {
                label: format!("{snapshot_prefix}_tau{:.4}", state.tau),
                tau: state.tau,
                field: mom,
            });
            next_snap += 1;
        }
    }
    stepper.monitor_now(&mut state)?;
    recorder.rows.last_mut().expect("sampled").flags = state.monitors.flag_summary();
    Ok(EvolveOutput {
        state,
        recorder,
        snapshots,
    })
}

/// First time the mean-momentum azimuth has wound by a full turn, by
/// linear interpolation of the unwrapped angle.
pub fn measure_orbit_period(times: &[f64], mean_p: &[(f64, f64)]) -> Option<f64> {
    let mut unwrapped = 0.0;
    let mut prev = None;
    for (k, (px, py)) in mean_p.iter().enumerate() {
        if px.hypot(*py) < 1e-9 {
            return None;
        }
        let th = py.atan2(*px);
        if let Some(p) = prev {
            let d = analysis::wrap_angle(th - p);
            let before = unwrapped;
            unwrapped += d;
            if unwrapped.abs() >= 2.0 * PI {
                let need = 2.0 * PI * unwrapped.signum();
                let frac = (need - before) / d;
                return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
            }
        }
        prev = Some(th);
    }
    None
}

/// Scalar (single-component) copy of the configured Gaussian, the initial
/// state of the single-surface control.
fn scalar_initial(cfg: &ResolvedConfig) -> Result<SpinorField> {
    let spec = GaussianSpec::pure_first(
        cfg.initial.x0,
        cfg.initial.y0,
        cfg.initial.px0,
        cfg.initial.py0,
        cfg.initial.delta_l,
    );
    make_initial(&spec, &cfg.grid)
}

fn with_g(params: &ModelParams, g: f64) -> ModelParams {
    ModelParams {
        g: ScatteringMatrix::isotropic(g),
        ..*params
    }
}

fn convention_notes(bundle: &mut Bundle) {
    bundle.notes.push(format!(
        "time unit: {TIME_UNIT_MS:.3} ms for a 40 Hz trap (tau = omega t)"
    ));
    bundle.notes.push(
        "momentum sign: the initial phase exp(-i(px0 x + py0 y)) with the exp(-i x.p) \
         transform kernel gives mean momentum (-px0, -py0); scenario defaults use px0 = -v"
            .into(),
    );
}

/// Full-model evolution for one ring orbit; emits the Bloch path, |r|(tau)
/// and the non-cyclic phase trace.
pub fn run_berry_trace(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let initial = validate_setup(cfg)?;
    let mut bundle = Bundle::new(cfg);
    let horizon = cfg.duration.unwrap_or(PERIOD_MEASURE_CAP);
    let mut out = evolve_sampled(
        cfg,
        EngineKind::FullModel,
        cfg.params,
        initial,
        horizon,
        &[],
        "berry",
        strict,
    )?;
    let period = measure_orbit_period(&out.recorder.times, &out.recorder.mean_p);
    let duration = match (cfg.duration, period) {
        (Some(d), _) => d,
        (None, Some(t)) => t,
        (None, None) => {
            bundle
                .notes
                .push(format!("orbit period not reached within cap {PERIOD_MEASURE_CAP}"));
            horizon
        }
    };
    // Truncate to one orbit before evaluating the phase trace.
    let keep = out
        .recorder
        .times
        .iter()
        .take_while(|t| **t <= duration + 1e-9)
        .count();
    out.recorder.rows.truncate(keep);
    out.recorder.rhos.truncate(keep);
    out.recorder.times.truncate(keep);
    out.recorder.attach_berry()?;

    let bloch = out.recorder.bloch_series();
    let trace = berry_phase(&out.recorder.times, &out.recorder.rhos)?;
    let relation = analysis::relation_check(&trace, &bloch)?;
    if let Some(t) = period {
        bundle.results.push(("measured_period".into(), t));
    }
    bundle
        .results
        .push(("initial_purity".into(), bloch[0].purity()));
    let min_purity = bloch.iter().map(|b| b.purity()).fold(f64::INFINITY, f64::min);
    bundle.results.push(("min_purity".into(), min_purity));
    // Phase jump across the central window of the orbit.
    let (w0, w1) = (0.3 * duration, 0.7 * duration);
    let gamma_at = |t: f64| -> f64 {
        let k = out
            .recorder
            .times
            .iter()
            .position(|tt| *tt >= t)
            .unwrap_or(out.recorder.times.len() - 1);
        out.recorder.rows[k].gamma_unwrapped
    };
    bundle
        .results
        .push(("gamma_jump_abs".into(), (gamma_at(w1) - gamma_at(w0)).abs()));
    let pre_jump_max = out
        .recorder
        .rows
        .iter()
        .filter(|r| r.tau < w0)
        .map(|r| r.gamma_wrapped.abs())
        .fold(0.0, f64::max);
    bundle.results.push(("gamma_pre_jump_max".into(), pre_jump_max));
    bundle
        .results
        .push(("relation_max_residual".into(), relation.max_residual));
    bundle.results.push(("min_overlap".into(), trace.min_overlap));

    let final_field = out.state.field.clone();
    bundle.snapshots.push(SnapshotOut {
        label: format!("berry_final_tau{:.4}", out.state.tau),
        tau: out.state.tau,
        field: final_field,
    });
    bundle.series.push(RunSeries {
        engine: EngineKind::FullModel,
        g: cfg.params.g.g11,
        direction: None,
        rows: out.recorder.rows,
        monitors: out.state.monitors,
        scheme: cfg.scheme,
    });
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Full model and single-surface control spreading around the sombrero
/// ring, with momentum snapshots and node-contrast probes; `g_values`
/// adds nonlinear variants of both engines.
pub fn run_self_interference(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let _ = validate_setup(cfg)?;
    let mut bundle = Bundle::new(cfg);
    let duration = cfg
        .duration
        .ok_or_else(|| Error::Config("self_interference needs a duration".into()))?;
    let snapshot_times = if cfg.snapshot_times.is_empty() {
        vec![duration]
    } else {
        cfg.snapshot_times.clone()
    };
    let mut gs = vec![0.0];
    for g in &cfg.g_values {
        if !gs.contains(g) {
            gs.push(*g);
        }
    }
    let radius = cfg.params.v0;
    for engine in [EngineKind::FullModel, EngineKind::SingleSurface] {
        for &g in &gs {
            let params = with_g(&cfg.params, g);
            let initial = match engine {
                EngineKind::FullModel => make_initial(&cfg.initial, &cfg.grid)?,
                _ => scalar_initial(cfg)?,
            };
            let prefix = format!("mom_{}_g{:+.2}", engine.label(), g);
            let out = evolve_sampled(
                cfg,
                engine,
                params,
                initial,
                duration,
                &snapshot_times,
                &prefix,
                strict,
            )?;
            for (i, snap) in out.snapshots.iter().enumerate() {
                let dist = momentum_distribution(&snap.field)?;
                let contrast = node_contrast(&dist, radius);
                bundle.results.push((
                    format!("contrast_{}_g{:+.2}_snap{i}", engine.label(), g),
                    contrast,
                ));
            }
            bundle.snapshots.extend(out.snapshots);
            bundle.series.push(RunSeries {
                engine,
                g,
                direction: None,
                rows: out.recorder.rows,
                monitors: out.state.monitors,
                scheme: cfg.scheme,
            });
        }
    }
    if let (Some(a), Some(b)) = (
        bundle.result(&format!(
            "contrast_full_g{:+.2}_snap{}",
            0.0,
            snapshot_times.len() - 1
        )),
        bundle.result(&format!(
            "contrast_ssa_g{:+.2}_snap{}",
            0.0,
            snapshot_times.len() - 1
        )),
    ) {
        bundle.results.push(("contrast_diff_g0_final".into(), a - b));
    }
    bundle.notes.push(
        "nonzero g panels use the sweep from the phonon study (+0.25 / -0.25); the source \
         figures do not state their g values"
            .into(),
    );
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Trapped evolution to the release time, then ballistic expansion on an
/// enlarged domain; emits position distributions before and after for both
/// engines.
pub fn run_time_of_flight(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let _ = validate_setup(cfg)?;
    let mut bundle = Bundle::new(cfg);
    for engine in [EngineKind::FullModel, EngineKind::SingleSurface] {
        let initial = match engine {
            EngineKind::FullModel => make_initial(&cfg.initial, &cfg.grid)?,
            _ => scalar_initial(cfg)?,
        };
        let out = evolve_sampled(
            cfg,
            engine,
            cfg.params,
            initial,
            cfg.release_time,
            &[],
            "",
            strict,
        )?;
        let released = out.state.field.clone();
        bundle.snapshots.push(SnapshotOut {
            label: format!("release_{}_tau{:.4}", engine.label(), out.state.tau),
            tau: out.state.tau,
            field: released.clone().to_momentum()?,
        });

        // Expand the domain so the ballistic shell stays inside, then fly.
        let padded = released.zero_pad(cfg.expand_factor)?;
        let dist_before = momentum_distribution(&padded)?;
        let tof_scheme = StepScheme::new(
            cfg.scheme.kind,
            cfg.tof_duration / TOF_STEPS as f64,
            cfg.scheme.nonlinearity,
        )?;
        let tof_params = ModelParams {
            g: ScatteringMatrix::isotropic(cfg.tof_g),
            trap_on: false,
            ..cfg.params
        };
        let mut tof_state = RunState::new(padded, tof_scheme, tof_params)?;
        let mut tof_stepper = Stepper::time_of_flight(&tof_state, monitor_config(strict))?;
        tof_stepper.evolve(&mut tof_state, TOF_STEPS)?;
        tof_stepper.monitor_now(&mut tof_state)?;
        let dist_after = momentum_distribution(&tof_state.field)?;
        let drift = dist_before
            .density
            .iter()
            .zip(&dist_after.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        bundle.results.push((
            format!("momentum_invariance_{}", engine.label()),
            drift,
        ));
        // The shell lands near |x| = |p| tof_duration; probe the node there.
        let pos_dist = analysis::position_distribution(&tof_state.field)?;
        let ring = cfg.params.v0 * cfg.tof_duration;
        bundle.results.push((
            format!("position_contrast_{}", engine.label()),
            node_contrast(&pos_dist, ring),
        ));
        bundle.snapshots.push(SnapshotOut {
            label: format!(
                "tof_{}_tau{:.4}",
                engine.label(),
                cfg.release_time + cfg.tof_duration
            ),
            tau: cfg.release_time + cfg.tof_duration,
            field: tof_state.field.clone(),
        });
        let mut rows = out.recorder.rows;
        rows.last_mut().expect("rows").flags = tof_state.monitors.flag_summary();
        bundle.series.push(RunSeries {
            engine,
            g: cfg.params.g.g11,
            direction: None,
            rows,
            monitors: tof_state.monitors,
            scheme: cfg.scheme,
        });
    }
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Detect the onset of a sustained phonon exchange: the first time
/// `n_y - n_x` exceeds a margin and stays above it for
/// [`SWAP_SUSTAIN_TIME`].
pub fn swap_onset(rows: &[SeriesRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    let margin = SWAP_MARGIN_FRACTION * (rows[0].n_x - rows[0].n_y).abs();
    let mut start: Option<f64> = None;
    let mut last_tau = rows[0].tau;
    for r in rows {
        last_tau = r.tau;
        if r.n_y - r.n_x > margin {
            let s = *start.get_or_insert(r.tau);
            if r.tau - s >= SWAP_SUSTAIN_TIME {
                return Some(s);
            }
        } else {
            start = None;
        }
    }
    // A window still open at the end of the run counts if long enough.
    match start {
        Some(s) if last_tau - s >= SWAP_SUSTAIN_TIME => Some(s),
        _ => None,
    }
}

/// Long run recording the phonon numbers for both engines over the
/// configured scattering sweep.
pub fn run_phonon_swap(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let _ = validate_setup(cfg)?;
    let mut bundle = Bundle::new(cfg);
    let duration = cfg
        .duration
        .ok_or_else(|| Error::Config("phonon_swap needs a duration".into()))?;
    let gs = if cfg.g_values.is_empty() {
        vec![cfg.params.g.g11]
    } else {
        cfg.g_values.clone()
    };
    for engine in [EngineKind::FullModel, EngineKind::SingleSurface] {
        for &g in &gs {
            let params = with_g(&cfg.params, g);
            let initial = match engine {
                EngineKind::FullModel => make_initial(&cfg.initial, &cfg.grid)?,
                _ => scalar_initial(cfg)?,
            };
            let out = evolve_sampled(
                cfg, engine, params, initial, duration, &[], "", strict,
            )?;
            let onset = swap_onset(&out.recorder.rows);
            bundle.results.push((
                format!("swap_onset_{}_g{:+.2}", engine.label(), g),
                onset.unwrap_or(f64::NAN),
            ));
            bundle.series.push(RunSeries {
                engine,
                g,
                direction: None,
                rows: out.recorder.rows,
                monitors: out.state.monitors,
                scheme: cfg.scheme,
            });
        }
    }
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Two runs differing only in the sign of y0 (clockwise vs anti-clockwise
/// traversal of the ring); emits both population series and the
/// interchange residual `max |P1_cw - P2_ccw|`.
pub fn run_nonabelian_roundtrip(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let _ = validate_setup(cfg)?;
    let mut bundle = Bundle::new(cfg);
    let horizon = cfg.duration.unwrap_or(PERIOD_MEASURE_CAP);
    let mut series: Vec<RunSeries> = Vec::new();
    let mut duration_used = horizon;
    for (dir_idx, flip) in [false, true].iter().enumerate() {
        let mut spec = cfg.initial;
        if *flip {
            spec.y0 = -spec.y0;
        }
        // With mean momentum +v along x, positive y0 orbits clockwise.
        let direction = if spec.y0 >= 0.0 { "cw" } else { "ccw" };
        let initial = make_initial(&spec, &cfg.grid)?;
        let run_for = if dir_idx == 0 { horizon } else { duration_used };
        let mut out = evolve_sampled(
            cfg,
            EngineKind::FullModel,
            cfg.params,
            initial,
            run_for,
            &[],
            "",
            strict,
        )?;
        if dir_idx == 0 && cfg.duration.is_none() {
            if let Some(t) = measure_orbit_period(&out.recorder.times, &out.recorder.mean_p) {
                duration_used = t;
                bundle.results.push(("measured_period".into(), t));
            }
            let keep = out
                .recorder
                .times
                .iter()
                .take_while(|t| **t <= duration_used + 1e-9)
                .count();
            out.recorder.rows.truncate(keep);
        }
        series.push(RunSeries {
            engine: EngineKind::FullModel,
            g: cfg.params.g.g11,
            direction: Some(direction),
            rows: out.recorder.rows,
            monitors: out.state.monitors,
            scheme: cfg.scheme,
        });
    }
    let (cw, ccw) = {
        let a = series.iter().find(|s| s.direction == Some("cw")).unwrap();
        let b = series.iter().find(|s| s.direction == Some("ccw")).unwrap();
        (a, b)
    };
    let n = cw.rows.len().min(ccw.rows.len());
    let mut residual: f64 = 0.0;
    for k in 0..n {
        residual = residual.max((cw.rows[k].p1 - ccw.rows[k].p2).abs());
    }
    bundle
        .results
        .push(("interchange_residual".into(), residual));
    bundle.results.push(("p1_start_cw".into(), cw.rows[0].p1));
    bundle.results.push(("p2_start_cw".into(), cw.rows[0].p2));
    bundle.series = series;
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Plain full-model run with sampling and optional snapshots.
pub fn run_custom(cfg: &ResolvedConfig, strict: bool) -> Result<Bundle> {
    let initial = validate_setup(cfg)?;
    let duration = cfg
        .duration
        .ok_or_else(|| Error::Config("custom scenario needs scenario.duration".into()))?;
    let mut bundle = Bundle::new(cfg);
    let out = evolve_sampled(
        cfg,
        EngineKind::FullModel,
        cfg.params,
        initial,
        duration,
        &cfg.snapshot_times,
        "mom_full",
        strict,
    )?;
    bundle.snapshots.extend(out.snapshots);
    bundle.snapshots.push(SnapshotOut {
        label: format!("final_tau{:.4}", out.state.tau),
        tau: out.state.tau,
        field: out.state.field.clone(),
    });
    bundle.series.push(RunSeries {
        engine: EngineKind::FullModel,
        g: cfg.params.g.g11,
        direction: None,
        rows: out.recorder.rows,
        monitors: out.state.monitors,
        scheme: cfg.scheme,
    });
    convention_notes(&mut bundle);
    Ok(bundle)
}

/// Split-operator vs dense-eigendecomposition comparison on a small grid;
/// returns the weighted L2 distance of the final fields.
pub fn oracle_comparison(cfg: &ResolvedConfig) -> Result<f64> {
    let initial = make_initial(&cfg.initial, &cfg.grid)?;
    let tau = cfg.duration.unwrap_or(1.0);
    let oracle = dense_oracle_evolve(&initial, &cfg.params, tau)?;
    let mut state = RunState::new(initial, cfg.scheme, cfg.params)?;
    let mut stepper = Stepper::full_model(&state, MonitorConfig::default())?;
    let n = (tau / cfg.scheme.dtau).round().max(1.0) as u64;
    stepper.evolve(&mut state, n)?;
    state.field.l2_distance(&oracle)
}

/// Serialize a bundle into `dir`: config echo, metadata (units,
/// conventions, engine provenance, scalar results, notes), the series
/// files and the binary snapshots.
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config_resolved.toml"), echo_config(&bundle.config))?;

    let mut meta = toml::Table::new();
    let mut units = toml::Table::new();
    units.insert("time_unit_ms".into(), toml::Value::Float(TIME_UNIT_MS));
    units.insert(
        "note".into(),
        toml::Value::String("oscillator units: lengths in l = sqrt(hbar/(m omega)), times in 1/omega".into()),
    );
    meta.insert("units".into(), toml::Value::Table(units));
    let mut conventions = toml::Table::new();
    conventions.insert(
        "transform".into(),
        toml::Value::String(
            "unitary FFT pair with symmetric 1/sqrt(nx*ny) normalization; forward kernel exp(-i x.p)"
                .into(),
        ),
    );
    conventions.insert(
        "momentum_sign".into(),
        toml::Value::String(
            "initial phase exp(-i(px0 x + py0 y)) gives mean momentum (-px0, -py0)".into(),
        ),
    );
    meta.insert("conventions".into(), toml::Value::Table(conventions));
    let mut engines = toml::value::Array::new();
    for s in &bundle.series {
        let mut e = toml::Table::new();
        e.insert("series".into(), toml::Value::String(s.file_stem()));
        e.insert("engine".into(), toml::Value::String(s.engine.label().into()));
        e.insert("g".into(), toml::Value::Float(s.g));
        e.insert(
            "scheme".into(),
            toml::Value::String(
                match s.scheme.kind {
                    crate::propagate::SplitKind::StrangSymmetric => "strang",
                    crate::propagate::SplitKind::LieFirstOrder => "lie",
                }
                .into(),
            ),
        );
        e.insert("dtau".into(), toml::Value::Float(s.scheme.dtau));
        e.insert(
            "grid".into(),
            toml::Value::String(format!(
                "{}x{} L={}x{}",
                bundle.config.grid.nx(),
                bundle.config.grid.ny(),
                bundle.config.grid.lx(),
                bundle.config.grid.ly()
            )),
        );
        e.insert(
            "max_norm_drift".into(),
            toml::Value::Float(s.monitors.max_norm_drift),
        );
        e.insert(
            "max_edge_mass".into(),
            toml::Value::Float(s.monitors.max_edge_mass),
        );
        e.insert("flags".into(), toml::Value::String(s.monitors.flag_summary()));
        engines.push(toml::Value::Table(e));
    }
    meta.insert("engines".into(), toml::Value::Array(engines));
    let mut results = toml::Table::new();
    for (k, v) in &bundle.results {
        results.insert(k.clone(), toml::Value::Float(*v));
    }
    meta.insert("results".into(), toml::Value::Table(results));
    meta.insert(
        "notes".into(),
        toml::Value::Array(
            bundle
                .notes
                .iter()
                .map(|n| toml::Value::String(n.clone()))
                .collect(),
        ),
    );
    std::fs::write(dir.join("metadata.toml"), toml::to_string(&meta).expect("meta"))?;

    for s in &bundle.series {
        write_series(&s.rows, &dir.join(format!("{}.tsv", s.file_stem())))?;
    }
    for snap in &bundle.snapshots {
        write_snapshot(
            &snap.field,
            snap.tau,
            &dir.join(format!("{}.somb", snap.label)),
        )?;
    }
    Ok(())
}
