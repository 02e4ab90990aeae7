//! Physical parameters, initial-state construction, adiabatic surfaces,
//! gauge-field formulas and the closed-form kinetic + spin-orbit factor.
//!
//! Everything is expressed in oscillator units: lengths in l = sqrt(1/omega)
//! (hbar = m = 1), energies in the trap quantum, times in 1/omega.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Representation, SpinorField};
use crate::mat2::{sigma_z, Mat2};
use crate::par;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Singular-point guard radius around the conical intersection, in grid
/// momentum units.
pub const EPS_CI: f64 = 1e-12;

/// Sign convention note. The initial Gaussian carries the plane-wave factor
/// `exp(-i(px0*x + py0*y))` verbatim, while the forward transform uses the
/// `exp(-i x.p)` kernel; the physical mean momentum of the packet is
/// therefore `(-px0, -py0)`. The scenario layer passes `px0 = -v` so that
/// the packet starts at `<p_x> = +v`, on the sombrero ring.
pub const MEAN_MOMENTUM_SIGN: f64 = -1.0;

/// Symmetric 2x2 scattering matrix in trap-quantum units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringMatrix {
    pub g11: f64,
    pub g22: f64,
    pub g12: f64,
}

impl ScatteringMatrix {
    pub fn zero() -> Self {
        Self {
            g11: 0.0,
            g22: 0.0,
            g12: 0.0,
        }
    }

    /// Equal intra-species coupling, no cross coupling (the configuration
    /// studied throughout).
    pub fn isotropic(g: f64) -> Self {
        Self {
            g11: g,
            g22: g,
            g12: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.g11 == 0.0 && self.g22 == 0.0 && self.g12 == 0.0
    }
}

/// Dimensionless model couplings. The Zeeman splitting is fixed to zero
/// (suitable Stark shifts remove it), so it is not a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub v0: f64,
    pub v1: f64,
    pub g: ScatteringMatrix,
    pub trap_on: bool,
    /// Include the scalar 1/(8p^2) correction in the single-surface model.
    pub born_huang: bool,
}

impl ModelParams {
    pub fn new(v0: f64, v1: f64, g: ScatteringMatrix, trap_on: bool, born_huang: bool) -> Result<Self> {
        if !(v0.is_finite() && v0 >= 0.0 && v1.is_finite() && v1 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "spin-orbit speeds must be finite and nonnegative, got v0 = {v0}, v1 = {v1}"
            )));
        }
        if ![g.g11, g.g22, g.g12].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("scattering matrix must be finite".into()));
        }
        Ok(Self {
            v0,
            v1,
            g,
            trap_on,
            born_huang,
        })
    }

    /// Polar-symmetric parameters `v0 = v1 = v`, isotropic scattering `g`.
    pub fn isotropic(v: f64, g: f64) -> Result<Self> {
        Self::new(v, v, ScatteringMatrix::isotropic(g), true, false)
    }

    /// Radius of the lower-surface minimum ring (for v0 = v1).
    pub fn ring_radius(&self) -> f64 {
        self.v0
    }
}

/// Spin-orbit gap `lambda(p) = sqrt((v0 px)^2 + (v1 py)^2)`.
#[inline]
pub fn soc_gap(px: f64, py: f64, params: &ModelParams) -> f64 {
    (params.v0 * px).hypot(params.v1 * py)
}

/// Adiabatic surface branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

/// Adiabatic potential surface `p^2/2 ± lambda(p)`; the branches touch only
/// at the conical intersection p = 0.
pub fn aps(px: f64, py: f64, params: &ModelParams, branch: Branch) -> f64 {
    let kin = 0.5 * (px * px + py * py);
    match branch {
        Branch::Upper => kin + soc_gap(px, py, params),
        Branch::Lower => kin - soc_gap(px, py, params),
    }
}

/// Unitary that rotates the spin-orbit matrix at `p` onto `lambda sigma_z`,
/// with the phase gauge fixed by making the first component of each
/// eigenvector real nonnegative.
pub fn adiabatic_transform(px: f64, py: f64, params: &ModelParams) -> Result<Mat2> {
    let lam = soc_gap(px, py, params);
    if px.hypot(py) < EPS_CI || lam == 0.0 {
        return Err(Error::SingularMomentum { px, py, eps: EPS_CI });
    }
    // q = v0 px + i v1 py = lambda e^{i phi}; eigenvectors (1, ±e^{i phi})/sqrt(2).
    let q = C64::new(params.v0 * px, params.v1 * py);
    let phase = q / lam;
    let s = 1.0 / 2.0_f64.sqrt();
    // Rows are the bra vectors of the upper / lower branch.
    Ok(Mat2::new(
        C64::new(s, 0.0),
        (phase * s).conj(),
        C64::new(s, 0.0),
        -(phase * s).conj(),
    ))
}

/// sin(z)/z with a series branch below 1e-4 to avoid 0/0 (relative error
/// below 1e-16 at the switch point).
#[inline]
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
    } else {
        z.sin() / z
    }
}

/// Exact one-step unitary `exp(-i [p^2/2 + v0 px sx + v1 py sy] dtau)`.
///
/// Since the spin-orbit matrix squares to `lambda^2 I`, the exponential is
/// `e^{-i p^2 dtau / 2} [cos(lambda dtau) I - i sin(lambda dtau)/lambda M]`,
/// regular at the conical intersection. The cos/sin pair is renormalized so
/// the factor is unimodular to the last bit (the tables built from it are
/// reused for ~1e5 steps).
pub fn kinetic_soc_factor(px: f64, py: f64, params: &ModelParams, dtau: f64) -> Mat2 {
    let lam = soc_gap(px, py, params);
    let z = lam * dtau;
    let mut c = z.cos();
    let mut s_over_lam = dtau * sinc(z);
    let r = c.hypot(s_over_lam * lam);
    c /= r;
    s_over_lam /= r;
    let mut phase = C64::from_polar(1.0, -0.5 * (px * px + py * py) * dtau);
    phase /= phase.norm();
    let off = C64::new(0.0, -1.0) * s_over_lam;
    let q = C64::new(params.v0 * px, params.v1 * py);
    Mat2::new(
        phase * c,
        phase * off * q.conj(),
        phase * off * q,
        phase * c,
    )
}

/// Lower-surface Berry vector potential `(-py, px)/(2 p^2)` and Born-Huang
/// scalar `1/(8 p^2)` at `p`.
pub fn gauge_fields(px: f64, py: f64) -> Result<([f64; 2], f64)> {
    let p2 = px * px + py * py;
    if p2.sqrt() < EPS_CI {
        return Err(Error::SingularMomentum { px, py, eps: EPS_CI });
    }
    Ok(([-py / (2.0 * p2), px / (2.0 * p2)], 1.0 / (8.0 * p2)))
}

/// Commutator `[v0 sx, v1 sy] = 2 i v0 v1 sz` of the matrix-valued vector
/// potential; a diagnostic for the non-Abelian character, not used in
/// propagation.
pub fn nonabelian_commutator(params: &ModelParams) -> Mat2 {
    sigma_z().scale(C64::new(0.0, 2.0 * params.v0 * params.v1))
}

/// Parameters of the minimum-uncertainty Gaussian initial state.
///
/// The spinor amplitudes are normalized exactly at construction. See
/// [`MEAN_MOMENTUM_SIGN`] for the momentum sign convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub a1: C64,
    pub a2: C64,
    pub x0: f64,
    pub y0: f64,
    pub px0: f64,
    pub py0: f64,
    pub delta_l: f64,
}

impl GaussianSpec {
    pub fn new(a1: C64, a2: C64, x0: f64, y0: f64, px0: f64, py0: f64, delta_l: f64) -> Result<Self> {
        if !(delta_l.is_finite() && delta_l > 0.0) {
            return Err(Error::InvalidParams(format!(
                "initial.width = {delta_l} must be positive"
            )));
        }
        let n2 = a1.norm_sqr() + a2.norm_sqr();
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::InvalidParams(
                "initial amplitudes (a1, a2) must not both vanish".into(),
            ));
        }
        for (v, name) in [(x0, "x0"), (y0, "y0"), (px0, "px0"), (py0, "py0")] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("initial.{name} must be finite")));
            }
        }
        // Skip the rescale at machine precision so that resolving an echoed
        // (already normalized) config reproduces the amplitudes bit for bit.
        let s = if (n2 - 1.0).abs() <= 1e-14 {
            1.0
        } else {
            1.0 / n2.sqrt()
        };
        Ok(Self {
            a1: a1 * s,
            a2: a2 * s,
            x0,
            y0,
            px0,
            py0,
            delta_l,
        })
    }

    /// All amplitude in the first component.
    pub fn pure_first(x0: f64, y0: f64, px0: f64, py0: f64, delta_l: f64) -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), x0, y0, px0, py0, delta_l)
            .expect("valid by construction")
    }

    /// The balanced antisymmetric pair `a1 = -a2 = 1/sqrt(2)`, the lower
    /// adiabatic eigenstate at momentum along +x.
    pub fn lower_pair(x0: f64, y0: f64, px0: f64, py0: f64, delta_l: f64) -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(-1.0, 0.0), x0, y0, px0, py0, delta_l)
            .expect("valid by construction")
    }

    /// Physical mean momentum of the built state (see [`MEAN_MOMENTUM_SIGN`]).
    pub fn mean_momentum(&self) -> (f64, f64) {
        (MEAN_MOMENTUM_SIGN * self.px0, MEAN_MOMENTUM_SIGN * self.py0)
    }
}

/// Upper bound on the Gaussian mass outside the position domain, from the
/// bound `erfc(z) <= exp(-z^2)`.
fn escaped_mass_bound(spec: &GaussianSpec, grid: &GridSpec) -> f64 {
    let edges = [
        grid.lx() + spec.x0,
        grid.lx() - spec.x0,
        grid.ly() + spec.y0,
        grid.ly() - spec.y0,
    ];
    let mut bound = 0.0;
    for d in edges {
        if d <= 0.0 {
            return 1.0;
        }
        bound += 0.5 * (-(d / spec.delta_l).powi(2)).exp();
    }
    bound
}

/// Allowed initial-state mass outside the domain.
pub const ESCAPED_MASS_LIMIT: f64 = 1e-10;

/// Build the discretized minimum-uncertainty Gaussian
/// `psi_i = a_i (pi D^2)^{-1/2} e^{-i(px0 x + py0 y)}
///  e^{-((x-x0)^2+(y-y0)^2)/(2 D^2)}`,
/// renormalized to exactly unit norm after discretization.
pub fn make_initial(spec: &GaussianSpec, grid: &GridSpec) -> Result<SpinorField> {
    let mass = escaped_mass_bound(spec, grid);
    if mass >= ESCAPED_MASS_LIMIT {
        return Err(Error::DomainTooSmall {
            mass,
            limit: ESCAPED_MASS_LIMIT,
        });
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv2d2 = 1.0 / (2.0 * spec.delta_l * spec.delta_l);
    let amp = 1.0 / (PI * spec.delta_l * spec.delta_l).sqrt();
    // Separable profile: outer product of two 1D factors.
    let gx: Vec<C64> = (0..nx)
        .map(|ix| {
            let x = grid.x(ix);
            let env = (-(x - spec.x0).powi(2) * inv2d2).exp();
            C64::from_polar(env, -spec.px0 * x)
        })
        .collect();
    let gy: Vec<C64> = (0..ny)
        .map(|iy| {
            let y = grid.y(iy);
            let env = (-(y - spec.y0).powi(2) * inv2d2).exp();
            C64::from_polar(env, -spec.py0 * y)
        })
        .collect();

    let mut field = SpinorField::zeros(*grid, Representation::Position);
    {
        let (a1, a2) = (spec.a1 * amp, spec.a2 * amp);
        let (c1, c2) = field.components_mut();
        let fill = |c: &mut [C64], a: C64| {
            par::for_each_block_mut(c, par::BLOCK_ROWS * ny, |start, chunk| {
                let ix0 = start / ny;
                for (r, row) in chunk.chunks_exact_mut(ny).enumerate() {
                    let fx = a * gx[ix0 + r];
                    for (iy, z) in row.iter_mut().enumerate() {
                        *z = fx * gy[iy];
                    }
                }
            });
        };
        par::join(|| fill(c1, a1), || fill(c2, a2));
    }
    field.normalize()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Observable;
    use crate::mat2::{sigma_x, sigma_y};

    fn rand_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    /// Brute-force 2x2 matrix exponential by scaling and squaring with a
    /// plain Taylor series; independent of the closed form under test.
    fn expm_taylor(m: &Mat2) -> Mat2 {
        let norm = m.max_abs();
        let s = if norm > 0.25 {
            (norm / 0.25).log2().ceil() as u32
        } else {
            0
        };
        let scaled = m.scale(C64::new(1.0 / (1u64 << s) as f64, 0.0));
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for k in 1..=24 {
            term = term.mul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        let mut out = sum;
        for _ in 0..s {
            out = out.mul(&out);
        }
        out
    }

    fn soc_hamiltonian(px: f64, py: f64, params: &ModelParams) -> Mat2 {
        let kin = Mat2::identity().scale(C64::new(0.5 * (px * px + py * py), 0.0));
        kin.add(&sigma_x().scale(C64::new(params.v0 * px, 0.0)))
            .add(&sigma_y().scale(C64::new(params.v1 * py, 0.0)))
    }

    #[test]
    fn initial_pure_first_component() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        let f = make_initial(&GaussianSpec::pure_first(0.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap();
        let w = grid.weight();
        let p1: f64 = f.c1().iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
        let p2: f64 = f.c2().iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
        assert!((p1 - 1.0).abs() < 1e-12);
        assert!(p2 == 0.0);
        assert!(f.expectation(Observable::X).unwrap().abs() < 1e-10);
        assert!(f.expectation(Observable::Y).unwrap().abs() < 1e-10);
    }

    #[test]
    fn initial_lower_pair_is_pure_bloch_minus_x() {
        let grid = GridSpec::default_grid();
        let spec = GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0);
        let f = make_initial(&spec, &grid).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        // C = <psi1|psi2> = a1* a2 = -1/2 -> r = (-1, 0, 0), |r| = 1.
        let w = grid.weight();
        let c: C64 = f
            .c1()
            .iter()
            .zip(f.c2())
            .map(|(x, y)| x.conj() * y)
            .sum::<C64>()
            * w;
        let u = 2.0 * c.re;
        let v = -2.0 * c.im;
        let p1: f64 = f.c1().iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
        let p2: f64 = f.c2().iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
        let wz = p1 - p2;
        let r = (u * u + v * v + wz * wz).sqrt();
        assert!((u + 1.0).abs() < 1e-12);
        assert!(v.abs() < 1e-12);
        assert!(wz.abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
        // Scenario-layer sign: physical mean momentum +4 along x.
        assert!((f.expectation(Observable::Px).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn initial_rejects_leaking_domain() {
        let grid = GridSpec::square(32, 4.0).unwrap();
        let spec = GaussianSpec::pure_first(3.5, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            make_initial(&spec, &grid),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn amplitudes_renormalize_exactly() {
        let s = GaussianSpec::new(
            C64::new(0.7071, 0.0),
            C64::new(-0.7071, 0.0),
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
        )
        .unwrap();
        assert!((s.a1.norm_sqr() + s.a2.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aps_degenerate_at_conical_intersection() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        assert_eq!(aps(0.0, 0.0, &params, Branch::Upper), 0.0);
        assert_eq!(aps(0.0, 0.0, &params, Branch::Lower), 0.0);
    }

    #[test]
    fn aps_lower_value_on_ring() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        assert!((aps(4.0, 0.0, &params, Branch::Lower) + 8.0).abs() < 1e-14);
        assert!((aps(4.0, 0.0, &params, Branch::Upper) - 24.0).abs() < 1e-14);
    }

    #[test]
    fn lower_branch_radial_minimum_sits_at_ring_radius() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        let mut best = (0.0, f64::INFINITY);
        let mut r = 0.05;
        while r < 10.0 {
            let val = aps(r, 0.0, &params, Branch::Lower);
            if val < best.1 {
                best = (r, val);
            }
            r += 0.01;
        }
        assert!((best.0 - 4.0).abs() < 0.02, "minimum at {}", best.0);
        assert!((best.1 + 8.0).abs() < 1e-3);
    }

    #[test]
    fn aps_gap_is_twice_soc_gap() {
        let params = ModelParams::new(3.0, 1.5, ScatteringMatrix::zero(), true, false).unwrap();
        let mut rng = rand_stream(7);
        for _ in 0..100 {
            let (px, py) = (rng() * 10.0, rng() * 10.0);
            let gap = aps(px, py, &params, Branch::Upper) - aps(px, py, &params, Branch::Lower);
            assert!((gap - 2.0 * soc_gap(px, py, &params)).abs() < 1e-12);
        }
    }

    #[test]
    fn adiabatic_transform_diagonalizes_on_axes() {
        let params = ModelParams::isotropic(1.0, 0.0).unwrap();
        for (px, py) in [(1.0, 0.0), (0.0, 1.0)] {
            let u = adiabatic_transform(px, py, &params).unwrap();
            let m = sigma_x()
                .scale(C64::new(params.v0 * px, 0.0))
                .add(&sigma_y().scale(C64::new(params.v1 * py, 0.0)));
            let d = u.mul(&m).mul(&u.adjoint());
            assert!((d.a - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!((d.d - C64::new(-1.0, 0.0)).norm() < 1e-14);
            assert!(d.b.norm() < 1e-14 && d.c.norm() < 1e-14);
        }
    }

    #[test]
    fn adiabatic_transform_unitary_and_diagonalizing_random() {
        let params = ModelParams::new(2.0, 3.0, ScatteringMatrix::zero(), true, false).unwrap();
        let mut rng = rand_stream(11);
        for _ in 0..200 {
            let (px, py) = (rng() * 8.0, rng() * 8.0);
            if px.hypot(py) < 1e-3 {
                continue;
            }
            let u = adiabatic_transform(px, py, &params).unwrap();
            assert!(u.unitarity_defect() < 1e-14);
            let lam = soc_gap(px, py, &params);
            let m = sigma_x()
                .scale(C64::new(params.v0 * px, 0.0))
                .add(&sigma_y().scale(C64::new(params.v1 * py, 0.0)));
            let d = u.mul(&m).mul(&u.adjoint());
            let want = sigma_z().scale(C64::new(lam, 0.0));
            assert!(d.sub(&want).max_abs() < 1e-12);
        }
    }

    #[test]
    fn adiabatic_transform_rejects_conical_intersection() {
        let params = ModelParams::isotropic(1.0, 0.0).unwrap();
        assert!(matches!(
            adiabatic_transform(0.0, 0.0, &params),
            Err(Error::SingularMomentum { .. })
        ));
    }

    #[test]
    fn kinetic_factor_identity_at_origin() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        let u = kinetic_soc_factor(0.0, 0.0, &params, 1e-3);
        assert!(u.sub(&Mat2::identity()).max_abs() < 1e-15);
    }

    #[test]
    fn kinetic_factor_recovers_generator() {
        let params = ModelParams::new(4.0, 2.0, ScatteringMatrix::zero(), true, false).unwrap();
        let (px, py) = (1.3, -0.7);
        let dt = 1e-6;
        let u = kinetic_soc_factor(px, py, &params, dt);
        let h = soc_hamiltonian(px, py, &params);
        let first_order = Mat2::identity().sub(&h.scale(C64::new(0.0, dt)));
        assert!(u.sub(&first_order).max_abs() < 1e-9);
    }

    #[test]
    fn kinetic_factor_unitary_with_unimodular_det() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        let mut rng = rand_stream(23);
        for _ in 0..300 {
            let (px, py, dt) = (rng() * 20.0, rng() * 20.0, rng().abs() * 0.1 + 1e-6);
            let u = kinetic_soc_factor(px, py, &params, dt);
            assert!(u.unitarity_defect() < 1e-14);
            assert!((u.det().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kinetic_factor_matches_brute_force_exponential() {
        let params = ModelParams::new(4.0, 4.0, ScatteringMatrix::zero(), true, false).unwrap();
        let mut rng = rand_stream(42);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let (px, py) = (rng() * 24.0, rng() * 24.0);
            let dt = rng().abs() * 0.02 + 1e-5;
            let u = kinetic_soc_factor(px, py, &params, dt);
            let h = soc_hamiltonian(px, py, &params);
            let oracle = expm_taylor(&h.scale(C64::new(0.0, -dt)));
            worst = worst.max(u.sub(&oracle).max_abs());
        }
        assert!(worst < 1e-13, "worst deviation {worst}");
    }

    #[test]
    fn kinetic_factor_one_parameter_group() {
        let params = ModelParams::isotropic(3.0, 0.0).unwrap();
        let mut rng = rand_stream(5);
        for _ in 0..100 {
            let (px, py) = (rng() * 12.0, rng() * 12.0);
            let (t1, t2) = (rng().abs() * 0.01, rng().abs() * 0.01);
            let a = kinetic_soc_factor(px, py, &params, t1);
            let b = kinetic_soc_factor(px, py, &params, t2);
            let ab = a.mul(&b);
            let whole = kinetic_soc_factor(px, py, &params, t1 + t2);
            assert!(ab.sub(&whole).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_field_values() {
        let ([ax, ay], bh) = gauge_fields(1.0, 0.0).unwrap();
        assert!((ax - 0.0).abs() < 1e-15);
        assert!((ay - 0.5).abs() < 1e-15);
        assert!((bh - 0.125).abs() < 1e-15);
        assert!(matches!(
            gauge_fields(0.0, 0.0),
            Err(Error::SingularMomentum { .. })
        ));
    }

    #[test]
    fn gauge_field_circulation_is_pi() {
        // Numerical line integral of A around |p| = R, any R: half flux.
        for radius in [0.5, 2.0, 7.3] {
            let n = 8000;
            let mut integral = 0.0;
            for k in 0..n {
                let th0 = 2.0 * PI * k as f64 / n as f64;
                let th1 = 2.0 * PI * (k + 1) as f64 / n as f64;
                let mid = 0.5 * (th0 + th1);
                let ([ax, ay], _) = gauge_fields(radius * mid.cos(), radius * mid.sin()).unwrap();
                let dpx = radius * (th1.cos() - th0.cos());
                let dpy = radius * (th1.sin() - th0.sin());
                integral += ax * dpx + ay * dpy;
            }
            assert!((integral - PI).abs() < 1e-6, "circulation {integral}");
        }
    }

    #[test]
    fn born_huang_scales_inverse_square() {
        let (_, bh1) = gauge_fields(2.0, 0.0).unwrap();
        let (_, bh2) = gauge_fields(0.0, 4.0).unwrap();
        assert!((bh1 / bh2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn commutator_examples() {
        let params = ModelParams::isotropic(4.0, 0.0).unwrap();
        let c = nonabelian_commutator(&params);
        let want = sigma_z().scale(C64::new(0.0, 32.0));
        assert!(c.sub(&want).max_abs() < 1e-13);
        let zero = nonabelian_commutator(&ModelParams::isotropic(0.0, 0.0).unwrap());
        assert!(zero.max_abs() == 0.0);
        // anti-Hermitian
        assert!(c.adjoint().add(&c).max_abs() < 1e-13);
    }
}
