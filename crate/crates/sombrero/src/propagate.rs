//! Split-operator time evolution engines.
//!
//! One step factorizes the evolution into a position-diagonal factor
//! (trap + nonlinear phase) and a momentum-diagonal factor (kinetic +
//! spin-orbit, an exact 2x2 unitary per mode), glued by the unitary FFT.
//! Three engines share the machinery:
//!
//! * full spinor model — 2x2 kinetic factor from [`model::kinetic_soc_factor`];
//! * single-surface control — scalar dynamics on the lower adiabatic
//!   surface with the Berry vector potential deliberately omitted
//!   (optionally with the Born-Huang scalar);
//! * time of flight — kinetic factor only, for ballistic expansion.
//!
//! Every factor is unitary, so the norm is conserved to roundoff; monitors
//! track norm drift and the mass in the outermost grid cells at a
//! configurable cadence.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{GridSpec, Representation, SpinorField};
use crate::model::{aps, kinetic_soc_factor, Branch, ModelParams};
use crate::par;
use num_complex::Complex64 as C64;

/// Splitting order. The literal first-order factorization is kept
/// selectable; the symmetric variant gains an accuracy order for free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    LieFirstOrder,
    StrangSymmetric,
}

/// How the nonlinear phase treats the density within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityUpdate {
    /// Use the density of the field at the moment each position factor is
    /// applied (the density is invariant under the factor itself).
    FrozenDensity,
    /// One predictor half-step estimates the midpoint density, which is
    /// then frozen into both position half-factors.
    MidpointDensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub kind: SplitKind,
    pub dtau: f64,
    pub nonlinearity: NonlinearityUpdate,
}

impl StepScheme {
    pub fn new(kind: SplitKind, dtau: f64, nonlinearity: NonlinearityUpdate) -> Result<Self> {
        if !(dtau.is_finite() && dtau > 0.0) {
            return Err(Error::InvalidParams(format!(
                "scheme.dtau = {dtau} must be positive"
            )));
        }
        Ok(Self {
            kind,
            dtau,
            nonlinearity,
        })
    }

    /// Symmetric splitting at dtau = 1e-3 with frozen density.
    pub fn default_strang() -> Self {
        Self {
            kind: SplitKind::StrangSymmetric,
            dtau: 1e-3,
            nonlinearity: NonlinearityUpdate::FrozenDensity,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonitorConfig {
    /// Allowed |N(tau) - N(0)|.
    pub norm_tol: f64,
    /// Allowed mass fraction in the outermost `edge_cells` cells.
    pub edge_mass_tol: f64,
    pub edge_cells: usize,
    /// Steps between monitor samples.
    pub cadence: u64,
    /// Promote monitored failures to hard errors.
    pub strict: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            norm_tol: 1e-8,
            edge_mass_tol: 1e-6,
            edge_cells: 4,
            cadence: 100,
            strict: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorFlag {
    pub tau: f64,
    pub kind: &'static str,
    pub value: f64,
}

/// Accumulated run diagnostics.
#[derive(Debug, Clone)]
pub struct MonitorState {
    pub initial_norm: f64,
    pub initial_energy: Option<f64>,
    pub max_norm_drift: f64,
    pub max_edge_mass: f64,
    pub max_energy_drift: f64,
    pub flags: Vec<MonitorFlag>,
}

impl MonitorState {
    fn new(initial_norm: f64) -> Self {
        Self {
            initial_norm,
            initial_energy: None,
            max_norm_drift: 0.0,
            max_edge_mass: 0.0,
            max_energy_drift: 0.0,
            flags: Vec::new(),
        }
    }

    /// Compact "kind@tau" summary of recorded flags, "-" when clean.
    pub fn flag_summary(&self) -> String {
        if self.flags.is_empty() {
            return "-".into();
        }
        let mut parts: Vec<String> = Vec::new();
        for f in self.flags.iter().take(8) {
            parts.push(format!("{}@{:.2}", f.kind, f.tau));
        }
        if self.flags.len() > 8 {
            parts.push(format!("+{}", self.flags.len() - 8));
        }
        parts.join(";")
    }
}

/// One evolving run: the field, the clock and the accumulated monitors.
#[derive(Debug, Clone)]
pub struct RunState {
    pub field: SpinorField,
    pub tau: f64,
    pub steps: u64,
    pub scheme: StepScheme,
    pub params: ModelParams,
    pub monitors: MonitorState,
}

impl RunState {
    pub fn new(field: SpinorField, scheme: StepScheme, params: ModelParams) -> Result<Self> {
        if field.rep() != Representation::Position {
            return Err(Error::WrongRepresentation {
                expected: Representation::Position,
                found: field.rep(),
            });
        }
        let n = field.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite {
                context: "initial field norm",
            });
        }
        Ok(Self {
            field,
            tau: 0.0,
            steps: 0,
            scheme,
            params,
            monitors: MonitorState::new(n),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    FullModel,
    SingleSurface,
    TimeOfFlight,
}

impl EngineKind {
    pub fn label(&self) -> &'static str {
        match self {
            EngineKind::FullModel => "full",
            EngineKind::SingleSurface => "ssa",
            EngineKind::TimeOfFlight => "tof",
        }
    }
}

enum KineticTable {
    /// Per-mode 2x2 unitary stored as (diagonal, upper, lower).
    Spinor(Vec<[C64; 3]>),
    /// Per-mode scalar phase applied to the live components.
    Scalar(Vec<C64>),
}

/// A split-operator engine bound to one (grid, params, scheme) triple.
/// Tables are baked once and reused for the whole run.
pub struct Stepper {
    kind: EngineKind,
    grid: GridSpec,
    params: ModelParams,
    scheme: StepScheme,
    monitor: MonitorConfig,
    fft: Fft2,
    s1: Vec<C64>,
    s2: Vec<C64>,
    kin: KineticTable,
    /// Extra table at dtau/2 for the midpoint predictor.
    kin_half: Option<KineticTable>,
    /// 0.5 (x^2 + y^2) in position order; empty when the trap is off.
    trap_vals: Vec<f64>,
    /// e^{-i trap dt_v}, prebuilt when the nonlinearity vanishes.
    trap_phase: Vec<C64>,
    /// Whether the engine applies the trap factor at all.
    trap_active: bool,
    /// Scratch for the midpoint predictor.
    midpoint_buf: Option<Box<SpinorField>>,
}

impl Stepper {
    /// Full spinor model of the dimensionless GP equation.
    pub fn full_model(state: &RunState, monitor: MonitorConfig) -> Result<Self> {
        Self::build(EngineKind::FullModel, state, monitor)
    }

    /// Scalar dynamics on the lower adiabatic surface without the Berry
    /// vector potential (the no-geometric-phase control). The state must
    /// carry a single-component field.
    pub fn single_surface(state: &RunState, monitor: MonitorConfig) -> Result<Self> {
        if !state.field.is_scalar() {
            return Err(Error::InvalidParams(
                "single-surface engine needs a scalar (single-component) field".into(),
            ));
        }
        Self::build(EngineKind::SingleSurface, state, monitor)
    }

    /// Ballistic expansion: kinetic phase only (trap and lasers off); the
    /// scattering matrix from `params` still applies if nonzero.
    pub fn time_of_flight(state: &RunState, monitor: MonitorConfig) -> Result<Self> {
        Self::build(EngineKind::TimeOfFlight, state, monitor)
    }

    fn build(kind: EngineKind, state: &RunState, monitor: MonitorConfig) -> Result<Self> {
        let grid = *state.field.grid();
        let params = state.params;
        let scheme = state.scheme;
        let kin = build_kinetic_table(kind, &grid, &params, scheme.dtau);
        let needs_half = scheme.nonlinearity == NonlinearityUpdate::MidpointDensity
            && !params.g.is_zero()
            && scheme.kind == SplitKind::StrangSymmetric;
        let kin_half = needs_half.then(|| build_kinetic_table(kind, &grid, &params, 0.5 * scheme.dtau));
        let trap_active = params.trap_on && kind != EngineKind::TimeOfFlight;
        let dt_v = match scheme.kind {
            SplitKind::LieFirstOrder => scheme.dtau,
            SplitKind::StrangSymmetric => 0.5 * scheme.dtau,
        };
        let mut trap_vals = Vec::new();
        let mut trap_phase = Vec::new();
        if trap_active {
            trap_vals = (0..grid.len())
                .map(|i| {
                    let (ix, iy) = (i / grid.ny(), i % grid.ny());
                    let (x, y) = (grid.x(ix), grid.y(iy));
                    0.5 * (x * x + y * y)
                })
                .collect();
            if params.g.is_zero() {
                trap_phase = trap_vals.iter().map(|&t| unit_phase(t * dt_v)).collect();
            }
        }
        Ok(Self {
            kind,
            grid,
            params,
            scheme,
            monitor,
            fft: Fft2::new(grid.nx(), grid.ny()),
            s1: Vec::new(),
            s2: Vec::new(),
            kin,
            kin_half,
            trap_vals,
            trap_phase,
            trap_active,
            midpoint_buf: None,
        })
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    /// Advance the run by one step of `scheme.dtau`.
    pub fn step(&mut self, state: &mut RunState) -> Result<()> {
        debug_assert_eq!(*state.field.grid(), self.grid);
        debug_assert_eq!(state.field.rep(), Representation::Position);
        let dtau = self.scheme.dtau;
        match self.scheme.kind {
            SplitKind::LieFirstOrder => {
                self.apply_position_factor(&mut state.field, dtau, None);
                self.transform_and_kick(&mut state.field, false);
            }
            SplitKind::StrangSymmetric => {
                let fixed = if self.kin_half.is_some() {
                    Some(self.predict_midpoint_density(&state.field))
                } else {
                    None
                };
                let half = 0.5 * dtau;
                self.apply_position_factor(&mut state.field, half, fixed.as_ref());
                self.transform_and_kick(&mut state.field, false);
                self.apply_position_factor(&mut state.field, half, fixed.as_ref());
            }
        }
        state.steps += 1;
        state.tau = state.steps as f64 * dtau;
        if state.steps % self.monitor.cadence == 0 {
            self.monitor_now(state)?;
        }
        Ok(())
    }

    /// Advance by `n` steps.
    pub fn evolve(&mut self, state: &mut RunState, n: u64) -> Result<()> {
        for _ in 0..n {
            self.step(state)?;
        }
        Ok(())
    }

    /// Sample the monitored quantities now, recording flags (or failing in
    /// strict mode).
    pub fn monitor_now(&self, state: &mut RunState) -> Result<()> {
        let norm = state.field.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                context: "field norm during propagation",
            });
        }
        let drift = (norm - state.monitors.initial_norm).abs();
        state.monitors.max_norm_drift = state.monitors.max_norm_drift.max(drift);
        if drift > self.monitor.norm_tol {
            state.monitors.flags.push(MonitorFlag {
                tau: state.tau,
                kind: "norm",
                value: drift,
            });
            if self.monitor.strict {
                return Err(Error::Monitor {
                    kind: "norm",
                    tau: state.tau,
                    value: drift,
                    limit: self.monitor.norm_tol,
                });
            }
        }
        let edge = state.field.edge_mass(self.monitor.edge_cells)?;
        state.monitors.max_edge_mass = state.monitors.max_edge_mass.max(edge);
        if edge > self.monitor.edge_mass_tol {
            state.monitors.flags.push(MonitorFlag {
                tau: state.tau,
                kind: "edge",
                value: edge,
            });
            if self.monitor.strict {
                return Err(Error::Monitor {
                    kind: "edge",
                    tau: state.tau,
                    value: edge,
                    limit: self.monitor.edge_mass_tol,
                });
            }
        }
        let energy = self.energy(&state.field)?;
        match state.monitors.initial_energy {
            None => state.monitors.initial_energy = Some(energy),
            Some(e0) => {
                let scale = e0.abs().max(1e-12);
                state.monitors.max_energy_drift = state
                    .monitors
                    .max_energy_drift
                    .max((energy - e0).abs() / scale);
            }
        }
        Ok(())
    }

    /// Total energy per particle of `field` under this engine's
    /// Hamiltonian: grid-diagonal pieces in each representation plus the
    /// mean-field interaction energy
    /// `1/2 sum_ij g_ij |psi_i|^2 |psi_j|^2`.
    pub fn energy(&self, field: &SpinorField) -> Result<f64> {
        let pos_field;
        let pos = match field.rep() {
            Representation::Position => field,
            Representation::Momentum => {
                pos_field = field.clone().to_position()?;
                &pos_field
            }
        };
        let mom = pos.clone().to_momentum()?;
        self.energy_parts(pos, &mom)
    }

    /// [`Stepper::energy`] with both representations supplied by the
    /// caller (spares the internal transform when a momentum copy is
    /// already at hand).
    pub fn energy_parts(&self, pos: &SpinorField, mom: &SpinorField) -> Result<f64> {
        debug_assert_eq!(pos.rep(), Representation::Position);
        debug_assert_eq!(mom.rep(), Representation::Momentum);
        let w = self.grid.weight();
        let g = self.params.g;
        let block = par::BLOCK_ROWS * self.grid.ny();
        let (c1, c2) = (pos.c1(), pos.c2());
        let trap_e: f64 = if self.trap_active {
            par::sum_blocks(c1, block, |start, chunk| {
                let mut acc = 0.0;
                for (i, z) in chunk.iter().enumerate() {
                    acc += self.trap_vals[start + i] * z.norm_sqr();
                }
                acc
            }) + par::sum_blocks(c2, block, |start, chunk| {
                let mut acc = 0.0;
                for (i, z) in chunk.iter().enumerate() {
                    acc += self.trap_vals[start + i] * z.norm_sqr();
                }
                acc
            })
        } else {
            0.0
        };
        let int_e: f64 = if g.is_zero() {
            0.0
        } else {
            par::sum_blocks(c1, block, |start, chunk| {
                let mut acc = 0.0;
                for (i, z) in chunk.iter().enumerate() {
                    let r1 = z.norm_sqr();
                    let r2 = c2[start + i].norm_sqr();
                    acc += 0.5 * (g.g11 * r1 * r1 + 2.0 * g.g12 * r1 * r2 + g.g22 * r2 * r2);
                }
                acc
            })
        };

        let (m1, m2) = (mom.c1(), mom.c2());
        let nx = self.grid.nx();
        let mom_block = par::BLOCK_ROWS * nx;
        let kin_e: f64 = match self.kind {
            EngineKind::FullModel => par::sum_blocks(m1, mom_block, |start, chunk| {
                let mut acc = 0.0;
                for (i, z1) in chunk.iter().enumerate() {
                    let idx = start + i;
                    let (kx, ky) = (idx % nx, idx / nx);
                    let (px, py) = (self.grid.px(kx), self.grid.py(ky));
                    let z2 = m2[idx];
                    let cross = z1.conj() * z2;
                    acc += 0.5 * (px * px + py * py) * (z1.norm_sqr() + z2.norm_sqr())
                        + 2.0 * self.params.v0 * px * cross.re
                        + 2.0 * self.params.v1 * py * cross.im;
                }
                acc
            }),
            EngineKind::SingleSurface => {
                let bh_floor = born_huang_floor(&self.grid);
                par::sum_blocks(m1, mom_block, |start, chunk| {
                    let mut acc = 0.0;
                    for (i, z1) in chunk.iter().enumerate() {
                        let idx = start + i;
                        let (kx, ky) = (idx % nx, idx / nx);
                        let (px, py) = (self.grid.px(kx), self.grid.py(ky));
                        let mut val = aps(px, py, &self.params, Branch::Lower);
                        if self.params.born_huang {
                            val += 1.0 / (8.0 * (px * px + py * py).max(bh_floor));
                        }
                        acc += val * z1.norm_sqr();
                    }
                    acc
                })
            }
            EngineKind::TimeOfFlight => {
                let one = |m: &[C64]| {
                    par::sum_blocks(m, mom_block, |start, chunk| {
                        let mut acc = 0.0;
                        for (i, z) in chunk.iter().enumerate() {
                            let idx = start + i;
                            let (kx, ky) = (idx % nx, idx / nx);
                            let (px, py) = (self.grid.px(kx), self.grid.py(ky));
                            acc += 0.5 * (px * px + py * py) * z.norm_sqr();
                        }
                        acc
                    })
                };
                one(m1) + one(m2)
            }
        };
        let total = (trap_e + int_e + kin_e) * w / pos.norm();
        if !total.is_finite() {
            return Err(Error::NonFinite { context: "energy" });
        }
        Ok(total)
    }

    fn transform_and_kick(&mut self, field: &mut SpinorField, use_half_table: bool) {
        field.forward_in_place(&self.fft, &mut self.s1, &mut self.s2);
        let table = if use_half_table {
            self.kin_half.as_ref().expect("half table built")
        } else {
            &self.kin
        };
        let nx = self.grid.nx();
        let block = par::BLOCK_ROWS * nx;
        let (c1, c2) = field.components_mut();
        match table {
            KineticTable::Spinor(t) => {
                par::for_each_block_mut2(c1, c2, block, |start, a, b| {
                    for i in 0..a.len() {
                        let [d, up, lo] = t[start + i];
                        let (x, y) = (a[i], b[i]);
                        a[i] = d * x + up * y;
                        b[i] = lo * x + d * y;
                    }
                });
            }
            KineticTable::Scalar(t) => match self.kind {
                EngineKind::SingleSurface => {
                    par::for_each_block_mut(c1, block, |start, a| {
                        for (i, z) in a.iter_mut().enumerate() {
                            *z *= t[start + i];
                        }
                    });
                }
                _ => {
                    par::for_each_block_mut2(c1, c2, block, |start, a, b| {
                        for i in 0..a.len() {
                            let f = t[start + i];
                            a[i] *= f;
                            b[i] *= f;
                        }
                    });
                }
            },
        }
        field.inverse_in_place(&self.fft, &mut self.s1, &mut self.s2);
    }

    /// Apply the position-diagonal factor `exp(-i (trap + nonlinear) dt)`.
    /// With `fixed` densities (midpoint mode) the nonlinear phase is built
    /// from them instead of the live field.
    fn apply_position_factor(
        &self,
        field: &mut SpinorField,
        dt: f64,
        fixed: Option<&(Vec<f64>, Vec<f64>)>,
    ) {
        let g = self.params.g;
        if !self.trap_active && g.is_zero() {
            return;
        }
        let block = par::BLOCK_ROWS * self.grid.ny();
        let scalar_engine = self.kind == EngineKind::SingleSurface;
        let (c1, c2) = field.components_mut();
        if g.is_zero() {
            // Static trap phase only (prebuilt for this dt).
            let t = &self.trap_phase;
            let apply = |c: &mut [C64]| {
                par::for_each_block_mut(c, block, |start, chunk| {
                    for (i, z) in chunk.iter_mut().enumerate() {
                        *z *= t[start + i];
                    }
                });
            };
            if scalar_engine {
                apply(c1);
            } else {
                par::join(|| apply(c1), || apply(c2));
            }
            return;
        }
        let trap = if self.trap_active {
            Some(&self.trap_vals)
        } else {
            None
        };
        par::for_each_block_mut2(c1, c2, block, |start, a, b| {
            for i in 0..a.len() {
                let idx = start + i;
                let (r1, r2) = match fixed {
                    Some((f1, f2)) => (f1[idx], f2[idx]),
                    None => (a[i].norm_sqr(), b[i].norm_sqr()),
                };
                let trap_angle = trap.map_or(0.0, |t| t[idx]) * dt;
                // Component i sees sum_j g_ij |psi_j|^2.
                let th1 = trap_angle + (g.g11 * r1 + g.g12 * r2) * dt;
                a[i] *= unit_phase(th1);
                if !scalar_engine {
                    let th2 = trap_angle + (g.g12 * r1 + g.g22 * r2) * dt;
                    b[i] *= unit_phase(th2);
                }
            }
        });
    }

    fn predict_midpoint_density(&mut self, field: &SpinorField) -> (Vec<f64>, Vec<f64>) {
        let mut tmp = self
            .midpoint_buf
            .take()
            .map(|mut b| {
                (*b).clone_from(field);
                b
            })
            .unwrap_or_else(|| Box::new(field.clone()));
        let half = 0.5 * self.scheme.dtau;
        self.apply_position_factor(&mut tmp, half, None);
        field_forward(self, &mut tmp, true);
        let rho = (
            tmp.c1().iter().map(|z| z.norm_sqr()).collect(),
            tmp.c2().iter().map(|z| z.norm_sqr()).collect(),
        );
        self.midpoint_buf = Some(tmp);
        rho
    }
}

// Free helper so predict_midpoint_density can reuse transform_and_kick
// logic without fighting the borrow checker over `midpoint_buf`.
fn field_forward(stepper: &mut Stepper, field: &mut SpinorField, use_half: bool) {
    stepper.transform_and_kick(field, use_half);
}

#[inline]
fn born_huang_floor(grid: &GridSpec) -> f64 {
    let dp = grid.dpx().min(grid.dpy());
    dp * dp
}

/// `e^{-i theta}`, exactly unimodular: a short series covers the common
/// small-angle case, the sin_cos pair is renormalized otherwise.
#[inline]
fn unit_phase(theta: f64) -> C64 {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        let c = 1.0 - t2 * (0.5 - t2 * (1.0 / 24.0 - t2 / 720.0));
        let s = theta * (1.0 - t2 * (1.0 / 6.0 - t2 * (1.0 / 120.0 - t2 / 5040.0)));
        C64::new(c, -s)
    } else {
        let (s, c) = theta.sin_cos();
        let r = 1.0 / s.hypot(c);
        C64::new(c * r, -s * r)
    }
}

fn build_kinetic_table(
    kind: EngineKind,
    grid: &GridSpec,
    params: &ModelParams,
    dtau: f64,
) -> KineticTable {
    let (nx, ny) = (grid.nx(), grid.ny());
    match kind {
        EngineKind::FullModel => {
            let mut t = Vec::with_capacity(nx * ny);
            for ky in 0..ny {
                let py = grid.py(ky);
                for kx in 0..nx {
                    let px = grid.px(kx);
                    let u = kinetic_soc_factor(px, py, params, dtau);
                    t.push([u.a, u.b, u.c]);
                }
            }
            KineticTable::Spinor(t)
        }
        EngineKind::SingleSurface => {
            let floor = born_huang_floor(grid);
            let mut t = Vec::with_capacity(nx * ny);
            for ky in 0..ny {
                let py = grid.py(ky);
                for kx in 0..nx {
                    let px = grid.px(kx);
                    let mut val = aps(px, py, params, Branch::Lower);
                    if params.born_huang {
                        // The p = 0 grid point is regularized by capping at
                        // the smallest nonzero p^2 on the grid.
                        val += 1.0 / (8.0 * (px * px + py * py).max(floor));
                    }
                    t.push(unit_phase(val * dtau));
                }
            }
            KineticTable::Scalar(t)
        }
        EngineKind::TimeOfFlight => {
            let mut t = Vec::with_capacity(nx * ny);
            for ky in 0..ny {
                let py = grid.py(ky);
                for kx in 0..nx {
                    let px = grid.px(kx);
                    t.push(unit_phase(0.5 * (px * px + py * py) * dtau));
                }
            }
            KineticTable::Scalar(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Observable;
    use crate::model::{make_initial, GaussianSpec, ModelParams, ScatteringMatrix};

    fn scheme(dtau: f64) -> StepScheme {
        StepScheme::new(SplitKind::StrangSymmetric, dtau, NonlinearityUpdate::FrozenDensity).unwrap()
    }

    #[test]
    fn coherent_state_follows_classical_center() {
        // v = 0, g = 0: trapped coherent state, <x> = x0 cos(tau),
        // <px> = -x0 sin(tau), constant widths.
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params = ModelParams::isotropic(0.0, 0.0).unwrap();
        let field = make_initial(&GaussianSpec::pure_first(2.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let mut state = RunState::new(field, scheme(1e-3), params).unwrap();
        let mut stepper = Stepper::full_model(&state, MonitorConfig::default()).unwrap();
        let mut worst_x: f64 = 0.0;
        let mut worst_p: f64 = 0.0;
        let mut worst_w: f64 = 0.0;
        for _ in 0..63 {
            stepper.evolve(&mut state, 100).unwrap();
            let t = state.tau;
            let x = state.field.expectation(Observable::X).unwrap();
            let px = state.field.expectation(Observable::Px).unwrap();
            let x2 = state.field.expectation(Observable::X2).unwrap();
            worst_x = worst_x.max((x - 2.0 * t.cos()).abs());
            worst_p = worst_p.max((px + 2.0 * t.sin()).abs());
            worst_w = worst_w.max(((x2 - x * x) - 0.5).abs());
        }
        assert!(worst_x < 1e-4, "center error {worst_x}");
        assert!(worst_p < 1e-4, "momentum error {worst_p}");
        assert!(worst_w < 1e-6, "width drift {worst_w}");
    }

    #[test]
    fn norm_is_conserved_with_interactions() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params =
            ModelParams::new(4.0, 4.0, ScatteringMatrix::isotropic(0.25), true, false).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0), &grid).unwrap();
        let mut state = RunState::new(field, scheme(1e-3), params).unwrap();
        let mut stepper = Stepper::full_model(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 2000).unwrap();
        assert!((state.field.norm() - 1.0).abs() < 1e-12);
        assert!(state.monitors.max_norm_drift < 1e-12);
    }

    #[test]
    fn energy_of_coherent_state() {
        // <H> = 1 (zero point) + x0^2/2 for the displaced ground state.
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params = ModelParams::isotropic(0.0, 0.0).unwrap();
        let field = make_initial(&GaussianSpec::pure_first(2.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let state = RunState::new(field, scheme(1e-3), params).unwrap();
        let stepper = Stepper::full_model(&state, MonitorConfig::default()).unwrap();
        let e = stepper.energy(&state.field).unwrap();
        assert!((e - 3.0).abs() < 1e-8, "energy {e}");
    }

    #[test]
    fn tof_gaussian_width_formula() {
        let grid = GridSpec::square(128, 16.0).unwrap();
        let params = ModelParams::new(0.0, 0.0, ScatteringMatrix::zero(), false, false).unwrap();
        let field = make_initial(&GaussianSpec::pure_first(0.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let dtau = std::f64::consts::PI / 512.0;
        let mut state = RunState::new(
            field,
            StepScheme::new(SplitKind::StrangSymmetric, dtau, NonlinearityUpdate::FrozenDensity)
                .unwrap(),
            params,
        )
        .unwrap();
        let mut stepper = Stepper::time_of_flight(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 512).unwrap();
        let tau = state.tau;
        let x2 = state.field.expectation(Observable::X2).unwrap();
        let width = (2.0 * x2).sqrt();
        let expect = (1.0 + tau * tau).sqrt();
        assert!(
            (width - expect).abs() / expect < 1e-3,
            "width {width} vs {expect}"
        );
    }

    #[test]
    fn tof_preserves_momentum_distribution() {
        let grid = GridSpec::square(64, 12.0).unwrap();
        let params = ModelParams::new(0.0, 0.0, ScatteringMatrix::zero(), false, false).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, 0.0, -2.0, 1.0, 1.0), &grid).unwrap();
        let before = field.clone().to_momentum().unwrap();
        let mut state = RunState::new(field, scheme(1e-2), params).unwrap();
        let mut stepper = Stepper::time_of_flight(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 100).unwrap();
        let after = state.field.clone().to_momentum().unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in before.c1().iter().zip(after.c1()).chain(before.c2().iter().zip(after.c2())) {
            worst = worst.max((a.norm_sqr() - b.norm_sqr()).abs());
        }
        assert!(worst < 1e-12, "momentum density drift {worst}");
    }

    #[test]
    fn single_surface_phase_on_ring_mode() {
        // A field supported exactly on |p| = v picks up e^{+i v^2 dtau / 2}
        // per step from the lower surface (trap off).
        let grid = GridSpec::square(16, 8.0).unwrap();
        let v = 4.0 * grid.dpx();
        let params = ModelParams::new(v, v, ScatteringMatrix::zero(), false, false).unwrap();
        let mut field = SpinorField::zeros(grid, Representation::Momentum);
        field.components_mut().0[grid.mom_index(4, 0)] = C64::new(1.0, 0.0);
        let field = field.to_position().unwrap();
        let dtau = 1e-3;
        let mut state = RunState::new(field, scheme(dtau), params).unwrap();
        let mut stepper = Stepper::single_surface(&state, MonitorConfig::default()).unwrap();
        let before = state.field.clone().to_momentum().unwrap();
        stepper.step(&mut state).unwrap();
        let after = state.field.clone().to_momentum().unwrap();
        let idx = grid.mom_index(4, 0);
        let ratio = after.c1()[idx] / before.c1()[idx];
        let expect = C64::from_polar(1.0, 0.5 * v * v * dtau);
        assert!((ratio - expect).norm() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn single_surface_rejects_spinor_field() {
        let grid = GridSpec::square(16, 8.0).unwrap();
        let params = ModelParams::isotropic(1.0, 0.0).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let state = RunState::new(field, scheme(1e-3), params).unwrap();
        assert!(Stepper::single_surface(&state, MonitorConfig::default()).is_err());
    }

    #[test]
    fn single_surface_reduces_to_scalar_oscillator_at_v0() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params = ModelParams::isotropic(0.0, 0.0).unwrap();
        let field = make_initial(&GaussianSpec::pure_first(1.5, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let mut state = RunState::new(field, scheme(1e-3), params).unwrap();
        let mut stepper = Stepper::single_surface(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 1571).unwrap(); // quarter period
        let x = state.field.expectation(Observable::X).unwrap();
        let px = state.field.expectation(Observable::Px).unwrap();
        assert!((x - 1.5 * state.tau.cos()).abs() < 1e-4);
        assert!((px + 1.5 * state.tau.sin()).abs() < 1e-4);
    }

    #[test]
    fn edge_overflow_is_flagged_and_strict_mode_errors() {
        let grid = GridSpec::square(32, 4.0).unwrap();
        let params = ModelParams::new(0.0, 0.0, ScatteringMatrix::zero(), false, false).unwrap();
        let field =
            make_initial(&GaussianSpec::pure_first(0.0, 0.0, -6.0, 0.0, 0.6), &grid).unwrap();
        let mut state = RunState::new(field.clone(), scheme(1e-2), params).unwrap();
        let mut stepper = Stepper::time_of_flight(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 200).unwrap();
        assert!(
            state.monitors.flags.iter().any(|f| f.kind == "edge"),
            "expected an edge-mass flag, summary {}",
            state.monitors.flag_summary()
        );

        let mut strict_cfg = MonitorConfig::default();
        strict_cfg.strict = true;
        let mut state2 = RunState::new(field, scheme(1e-2), params).unwrap();
        let mut stepper2 = Stepper::time_of_flight(&state2, strict_cfg).unwrap();
        let res = stepper2.evolve(&mut state2, 200);
        assert!(matches!(res, Err(Error::Monitor { .. })));
    }

    #[test]
    fn midpoint_and_frozen_density_stay_close() {
        let grid = GridSpec::square(32, 6.0).unwrap();
        let params =
            ModelParams::new(2.0, 2.0, ScatteringMatrix::isotropic(0.25), true, false).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, -1.0, -2.0, 0.0, 1.0), &grid).unwrap();
        let mk = |nl| {
            let sch = StepScheme::new(SplitKind::StrangSymmetric, 1e-3, nl).unwrap();
            RunState::new(field.clone(), sch, params).unwrap()
        };
        let mut frozen = mk(NonlinearityUpdate::FrozenDensity);
        let mut midpoint = mk(NonlinearityUpdate::MidpointDensity);
        let mut s1 = Stepper::full_model(&frozen, MonitorConfig::default()).unwrap();
        let mut s2 = Stepper::full_model(&midpoint, MonitorConfig::default()).unwrap();
        s1.evolve(&mut frozen, 500).unwrap();
        s2.evolve(&mut midpoint, 500).unwrap();
        let dist = frozen.field.l2_distance(&midpoint.field).unwrap();
        assert!(dist < 1e-5, "frozen/midpoint distance {dist}");
        assert!((midpoint.field.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lie_splitting_runs_and_conserves_norm() {
        let grid = GridSpec::square(32, 6.0).unwrap();
        let params = ModelParams::isotropic(2.0, 0.0).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, -1.0, -2.0, 0.0, 1.0), &grid).unwrap();
        let sch = StepScheme::new(SplitKind::LieFirstOrder, 1e-3, NonlinearityUpdate::FrozenDensity)
            .unwrap();
        let mut state = RunState::new(field, sch, params).unwrap();
        let mut stepper = Stepper::full_model(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 1000).unwrap();
        assert!((state.field.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_covariance_of_density() {
        // Rotating positions, momenta and the spinor by 90 degrees commutes
        // with the evolution; the grid maps onto itself exactly.
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        let sqrt_half = 1.0 / 2.0_f64.sqrt();
        let a = make_initial(&GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0), &grid).unwrap();
        // Spin rotation matching the quarter turn: diag(e^{-i pi/4}, e^{+i pi/4})
        // applied to (1, -1)/sqrt(2).
        let spec_b = GaussianSpec::new(
            C64::from_polar(sqrt_half, -std::f64::consts::FRAC_PI_4),
            C64::from_polar(sqrt_half, -3.0 * std::f64::consts::FRAC_PI_4),
            3.0,
            0.0,
            0.0,
            -4.0,
            1.0,
        )
        .unwrap();
        let b = make_initial(&spec_b, &grid).unwrap();
        let run = |f: SpinorField| {
            let mut st = RunState::new(f, scheme(1e-3), params).unwrap();
            let mut sp = Stepper::full_model(&st, MonitorConfig::default()).unwrap();
            sp.evolve(&mut st, 1000).unwrap();
            st.field
        };
        let fa = run(a);
        let fb = run(b);
        let n = grid.nx();
        let dens = |f: &SpinorField, ix: usize, iy: usize| {
            let i = grid.pos_index(ix, iy);
            f.c1()[i].norm_sqr() + f.c2()[i].norm_sqr()
        };
        let mut worst: f64 = 0.0;
        for ix in 0..n {
            for iy in 0..n {
                let rot = dens(&fb, ix, iy);
                let orig = dens(&fa, iy, (n - ix) % n);
                worst = worst.max((rot - orig).abs());
            }
        }
        assert!(worst < 1e-9, "covariance defect {worst}");
    }

    #[test]
    fn zero_pad_preserves_norm_and_moments() {
        let grid = GridSpec::square(32, 6.0).unwrap();
        let field =
            make_initial(&GaussianSpec::pure_first(1.0, -0.5, -1.0, 0.5, 1.0), &grid).unwrap();
        let padded = field.zero_pad(2).unwrap();
        assert_eq!(padded.grid().nx(), 64);
        assert!((padded.norm() - field.norm()).abs() < 1e-14);
        for obs in [Observable::X, Observable::Y, Observable::Px, Observable::Py] {
            let a = field.expectation(obs).unwrap();
            let b = padded.expectation(obs).unwrap();
            assert!((a - b).abs() < 1e-9, "{obs:?}: {a} vs {b}");
        }
    }
}
