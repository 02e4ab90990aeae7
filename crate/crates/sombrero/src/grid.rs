//! The discretized 2D domain, the position ↔ momentum transform contract,
//! and quadrature for expectation values.
//!
//! Positions live on the uniform grid `x_j = -Lx + j*dx` with
//! `dx = 2Lx/nx` (domain `[-L, L)`), and the conjugate momentum grid is in
//! FFT (wrap-around) order with spacing `dpx = pi/Lx`, so that
//! `dx*dpx*nx = 2pi` exactly. Because the transform is unitary (symmetric
//! 1/sqrt(nx*ny) normalization in both directions, see [`crate::fft`]),
//! the norm weight is `dx*dy` in *both* representations: the factor
//! `dpx*dpy*nx*ny/(2pi)^2 = 1/(dx*dy)` that converts the momentum-space
//! Riemann sum into the stored coefficients is absorbed exactly.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::par;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Which basis the field data is currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Grid-diagonal observables for [`SpinorField::expectation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    X,
    Y,
    X2,
    Y2,
    Px,
    Py,
    Px2,
    Py2,
}

impl Observable {
    fn diagonal_in(self) -> Representation {
        match self {
            Observable::X | Observable::Y | Observable::X2 | Observable::Y2 => {
                Representation::Position
            }
            _ => Representation::Momentum,
        }
    }
}

/// Uniform 2D position grid paired with its conjugate momentum grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 8;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (n, name) in [(nx, "nx"), (ny, "ny")] {
            if n < Self::MIN_POINTS || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= {}",
                    Self::MIN_POINTS
                )));
            }
        }
        for (l, name) in [(lx, "lx"), (ly, "ly")] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} = {l} must be positive")));
            }
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    /// Default production grid: resolves both the sombrero ring at v = 8
    /// (|p|max ≈ 25.1) and a unit-width Gaussian.
    pub fn default_grid() -> Self {
        Self::square(256, 16.0).expect("default grid is valid")
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn lx(&self) -> f64 {
        self.lx
    }
    #[inline]
    pub fn ly(&self) -> f64 {
        self.ly
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }
    #[inline]
    pub fn dy(&self) -> f64 {
        2.0 * self.ly / self.ny as f64
    }
    #[inline]
    pub fn dpx(&self) -> f64 {
        PI / self.lx
    }
    #[inline]
    pub fn dpy(&self) -> f64 {
        PI / self.ly
    }
    /// Largest resolvable |p_x| (the Nyquist momentum pi/dx).
    #[inline]
    pub fn pmax_x(&self) -> f64 {
        PI / self.dx()
    }
    #[inline]
    pub fn pmax_y(&self) -> f64 {
        PI / self.dy()
    }

    /// Quadrature weight; representation independent by the unitary
    /// transform convention.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        -self.lx + ix as f64 * self.dx()
    }
    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        -self.ly + iy as f64 * self.dy()
    }

    /// Momentum value of FFT bin `kx` (wrap-around order).
    #[inline]
    pub fn px(&self, kx: usize) -> f64 {
        let k = if kx < self.nx / 2 {
            kx as isize
        } else {
            kx as isize - self.nx as isize
        };
        k as f64 * self.dpx()
    }
    #[inline]
    pub fn py(&self, ky: usize) -> f64 {
        let k = if ky < self.ny / 2 {
            ky as isize
        } else {
            ky as isize - self.ny as isize
        };
        k as f64 * self.dpy()
    }

    /// Index of `(ix, iy)` in position layout (y contiguous).
    #[inline]
    pub fn pos_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    /// Index of `(kx, ky)` in momentum layout (x contiguous).
    #[inline]
    pub fn mom_index(&self, kx: usize, ky: usize) -> usize {
        ky * self.nx + kx
    }

    /// Momentum-side resolution guard: the Nyquist momentum must clear the
    /// sombrero radius plus a few packet widths on both axes. Checked at
    /// simulation setup, not at grid construction.
    pub fn check_momentum_resolution(&self, v0: f64, v1: f64, delta_l: f64) -> Result<()> {
        let margin = 4.0 / delta_l;
        if self.pmax_x() <= v0 + margin {
            return Err(Error::MomentumUnderresolved {
                pmax: self.pmax_x(),
                required: v0 + margin,
            });
        }
        if self.pmax_y() <= v1 + margin {
            return Err(Error::MomentumUnderresolved {
                pmax: self.pmax_y(),
                required: v1 + margin,
            });
        }
        Ok(())
    }
}

/// Two complex scalar fields (the components on the dark states) over one
/// grid, in a declared representation.
///
/// Data layout follows the representation: position data is x-major
/// (`pos_index`), momentum data ky-major (`mom_index`). The transforms flip
/// the flag and the layout atomically.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: GridSpec,
    rep: Representation,
    c1: Vec<C64>,
    c2: Vec<C64>,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec, rep: Representation) -> Self {
        let n = grid.len();
        Self {
            grid,
            rep,
            c1: vec![C64::new(0.0, 0.0); n],
            c2: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_components(
        grid: GridSpec,
        rep: Representation,
        c1: Vec<C64>,
        c2: Vec<C64>,
    ) -> Result<Self> {
        if c1.len() != grid.len() || c2.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "component length {}/{} does not match grid size {}",
                c1.len(),
                c2.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, rep, c1, c2 })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    pub fn rep(&self) -> Representation {
        self.rep
    }
    #[inline]
    pub fn c1(&self) -> &[C64] {
        &self.c1
    }
    #[inline]
    pub fn c2(&self) -> &[C64] {
        &self.c2
    }
    #[inline]
    pub fn components_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        (&mut self.c1, &mut self.c2)
    }

    /// Whether the second component carries no amplitude (a scalar field
    /// stored in the first component).
    pub fn is_scalar(&self) -> bool {
        self.c2.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Total norm `sum (|c1|^2 + |c2|^2) * dx*dy` (both representations).
    pub fn norm(&self) -> f64 {
        let w = self.grid.weight();
        let row = row_len(&self.grid, self.rep);
        let block = par::BLOCK_ROWS * row;
        let (n1, n2) = par::join(
            || par::sum_blocks(&self.c1, block, |_, c| c.iter().map(|z| z.norm_sqr()).sum::<f64>()),
            || par::sum_blocks(&self.c2, block, |_, c| c.iter().map(|z| z.norm_sqr()).sum::<f64>()),
        );
        (n1 + n2) * w
    }

    /// Rescale to unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFinite {
                context: "normalize: field norm",
            });
        }
        let s = 1.0 / n.sqrt();
        let row = row_len(&self.grid, self.rep);
        let block = par::BLOCK_ROWS * row;
        let (c1, c2) = self.components_mut();
        par::join(
            || par::for_each_block_mut(c1, block, |_, c| c.iter_mut().for_each(|z| *z *= s)),
            || par::for_each_block_mut(c2, block, |_, c| c.iter_mut().for_each(|z| *z *= s)),
        );
        Ok(())
    }

    /// Fraction of the total mass sitting in the outermost `margin` grid
    /// cells of the position domain.
    pub fn edge_mass(&self, margin: usize) -> Result<f64> {
        if self.rep != Representation::Position {
            return Err(Error::WrongRepresentation {
                expected: Representation::Position,
                found: self.rep,
            });
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let edge_density = |c: &[C64]| -> f64 {
            par::sum_blocks(c, par::BLOCK_ROWS * ny, |start, chunk| {
                let ix0 = start / ny;
                let mut acc = 0.0;
                for (r, row) in chunk.chunks_exact(ny).enumerate() {
                    let ix = ix0 + r;
                    if ix < margin || ix >= nx - margin {
                        acc += row.iter().map(|z| z.norm_sqr()).sum::<f64>();
                    } else {
                        acc += row[..margin].iter().map(|z| z.norm_sqr()).sum::<f64>();
                        acc += row[ny - margin..].iter().map(|z| z.norm_sqr()).sum::<f64>();
                    }
                }
                acc
            })
        };
        let (e1, e2) = par::join(|| edge_density(&self.c1), || edge_density(&self.c2));
        let total = self.norm();
        Ok((e1 + e2) * self.grid.weight() / total)
    }

    pub(crate) fn forward_in_place(&mut self, fft: &Fft2, s1: &mut Vec<C64>, s2: &mut Vec<C64>) {
        debug_assert_eq!(self.rep, Representation::Position);
        par::join(|| fft.forward(&mut self.c1, s1), || fft.forward(&mut self.c2, s2));
        self.rep = Representation::Momentum;
    }

    pub(crate) fn inverse_in_place(&mut self, fft: &Fft2, s1: &mut Vec<C64>, s2: &mut Vec<C64>) {
        debug_assert_eq!(self.rep, Representation::Momentum);
        par::join(|| fft.inverse(&mut self.c1, s1), || fft.inverse(&mut self.c2, s2));
        self.rep = Representation::Position;
    }

    /// Unitary transform to the momentum representation.
    pub fn to_momentum(mut self) -> Result<Self> {
        if self.rep != Representation::Position {
            return Err(Error::WrongRepresentation {
                expected: Representation::Position,
                found: self.rep,
            });
        }
        let fft = Fft2::new(self.grid.nx, self.grid.ny);
        let (mut s1, mut s2) = (Vec::new(), Vec::new());
        self.forward_in_place(&fft, &mut s1, &mut s2);
        Ok(self)
    }

    /// Unitary transform back to the position representation.
    pub fn to_position(mut self) -> Result<Self> {
        if self.rep != Representation::Momentum {
            return Err(Error::WrongRepresentation {
                expected: Representation::Momentum,
                found: self.rep,
            });
        }
        let fft = Fft2::new(self.grid.nx, self.grid.ny);
        let (mut s1, mut s2) = (Vec::new(), Vec::new());
        self.inverse_in_place(&fft, &mut s1, &mut s2);
        Ok(self)
    }

    /// Normalized expectation value of a grid-diagonal observable; the
    /// field is transformed internally when the observable lives in the
    /// other representation.
    pub fn expectation(&self, obs: Observable) -> Result<f64> {
        let needed = obs.diagonal_in();
        if needed == self.rep {
            return expectation_in_rep(self, obs);
        }
        let transformed = match needed {
            Representation::Momentum => self.clone().to_momentum()?,
            Representation::Position => self.clone().to_position()?,
        };
        expectation_in_rep(&transformed, obs)
    }

    /// Embed the field in a position domain enlarged by an integer factor,
    /// keeping the grid spacing (and therefore the Nyquist momentum) exact.
    /// Used before ballistic expansion so the packet does not wrap.
    pub fn zero_pad(&self, factor: usize) -> Result<Self> {
        if self.rep != Representation::Position {
            return Err(Error::WrongRepresentation {
                expected: Representation::Position,
                found: self.rep,
            });
        }
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "zero_pad factor {factor} must be a power of two"
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let g = &self.grid;
        let big = GridSpec::new(
            g.nx * factor,
            g.ny * factor,
            g.lx * factor as f64,
            g.ly * factor as f64,
        )?;
        let mut out = SpinorField::zeros(big, Representation::Position);
        let off_x = (big.nx - g.nx) / 2;
        let off_y = (big.ny - g.ny) / 2;
        {
            let (o1, o2) = out.components_mut();
            for (src, dst) in [(&self.c1, o1), (&self.c2, o2)] {
                for ix in 0..g.nx {
                    let s = &src[ix * g.ny..(ix + 1) * g.ny];
                    let d0 = big.pos_index(ix + off_x, off_y);
                    dst[d0..d0 + g.ny].copy_from_slice(s);
                }
            }
        }
        Ok(out)
    }

    /// Weighted L2 distance `sqrt(sum |a-b|^2 * dx*dy)` between two fields
    /// in the same representation.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if self.rep != other.rep {
            return Err(Error::WrongRepresentation {
                expected: self.rep,
                found: other.rep,
            });
        }
        let mut acc = 0.0;
        for (a, b) in [(&self.c1, &other.c1), (&self.c2, &other.c2)] {
            acc += a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>();
        }
        Ok((acc * self.grid.weight()).sqrt())
    }

    /// Max-norm distance, ignoring representation weights.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in [(&self.c1, &other.c1), (&self.c2, &other.c2)] {
            for (x, y) in a.iter().zip(b.iter()) {
                m = m.max((x - y).norm());
            }
        }
        m
    }
}

fn row_len(grid: &GridSpec, rep: Representation) -> usize {
    match rep {
        Representation::Position => grid.ny,
        Representation::Momentum => grid.nx,
    }
}

fn expectation_in_rep(f: &SpinorField, obs: Observable) -> Result<f64> {
    let grid = *f.grid();
    let rep = f.rep();
    let row = row_len(&grid, rep);
    let block = par::BLOCK_ROWS * row;
    let sum_component = |c: &[C64]| -> f64 {
        par::sum_blocks(c, block, |start, chunk| {
            let r0 = start / row;
            let mut acc = 0.0;
            for (dr, data_row) in chunk.chunks_exact(row).enumerate() {
                let major = r0 + dr;
                let major_val = match (rep, obs) {
                    (Representation::Position, Observable::X) => grid.x(major),
                    (Representation::Position, Observable::X2) => grid.x(major).powi(2),
                    (Representation::Momentum, Observable::Py) => grid.py(major),
                    (Representation::Momentum, Observable::Py2) => grid.py(major).powi(2),
                    _ => f64::NAN,
                };
                match (rep, obs) {
                    (Representation::Position, Observable::X)
                    | (Representation::Position, Observable::X2)
                    | (Representation::Momentum, Observable::Py)
                    | (Representation::Momentum, Observable::Py2) => {
                        acc += major_val * data_row.iter().map(|z| z.norm_sqr()).sum::<f64>();
                    }
                    (Representation::Position, Observable::Y) => {
                        for (iy, z) in data_row.iter().enumerate() {
                            acc += grid.y(iy) * z.norm_sqr();
                        }
                    }
                    (Representation::Position, Observable::Y2) => {
                        for (iy, z) in data_row.iter().enumerate() {
                            acc += grid.y(iy).powi(2) * z.norm_sqr();
                        }
                    }
                    (Representation::Momentum, Observable::Px) => {
                        for (kx, z) in data_row.iter().enumerate() {
                            acc += grid.px(kx) * z.norm_sqr();
                        }
                    }
                    (Representation::Momentum, Observable::Px2) => {
                        for (kx, z) in data_row.iter().enumerate() {
                            acc += grid.px(kx).powi(2) * z.norm_sqr();
                        }
                    }
                    _ => unreachable!("observable not diagonal in this representation"),
                }
            }
            acc
        })
    };
    let (s1, s2) = par::join(|| sum_component(f.c1()), || sum_component(f.c2()));
    let value = (s1 + s2) * grid.weight() / f.norm();
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "expectation value",
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_initial, GaussianSpec};
    use proptest::prelude::*;

    fn unit_gaussian(grid: GridSpec) -> SpinorField {
        make_initial(&GaussianSpec::pure_first(0.0, 0.0, 0.0, 0.0, 1.0), &grid).unwrap()
    }

    #[test]
    fn spectral_pairing_is_exact() {
        let g = GridSpec::default_grid();
        assert!((g.dx() * g.dpx() * g.nx() as f64 - 2.0 * PI).abs() < 1e-14);
        assert!((g.dy() * g.dpy() * g.ny() as f64 - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::new(6, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(24, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn unit_gaussian_is_fourier_self_dual() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        let f = unit_gaussian(grid);
        let p = f.clone().to_momentum().unwrap();
        // |Phi(p)|^2 should be the same Gaussian profile as |psi(x)|^2:
        // compare second moments instead of raw samples (the stored
        // momentum field carries a known per-mode phase).
        let x2 = f.expectation(Observable::X2).unwrap();
        let px2 = p.expectation(Observable::Px2).unwrap();
        assert!((x2 - 0.5).abs() < 1e-10, "x2 = {x2}");
        assert!((px2 - 0.5).abs() < 1e-10, "px2 = {px2}");
    }

    #[test]
    fn plane_wave_factor_shifts_momentum() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        // e^{+i p0 x} Gaussian: mean momentum +p0 under the e^{-i x p} kernel.
        let p0 = 3.0 * grid.dpx();
        let spec = GaussianSpec::pure_first(0.0, 0.0, -p0, 0.0, 1.0);
        let f = make_initial(&spec, &grid).unwrap();
        let px = f.expectation(Observable::Px).unwrap();
        assert!((px - p0).abs() < 1e-9, "px = {px}, want {p0}");
    }

    #[test]
    fn delta_momentum_mode_is_constant_magnitude_plane_wave() {
        let grid = GridSpec::square(16, 4.0).unwrap();
        let mut f = SpinorField::zeros(grid, Representation::Momentum);
        f.components_mut().0[grid.mom_index(3, 5)] = C64::new(1.0, 0.0);
        let x = f.to_position().unwrap();
        let mags: Vec<f64> = x.c1().iter().map(|z| z.norm()).collect();
        let expect = 1.0 / (grid.len() as f64).sqrt();
        for m in mags {
            assert!((m - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_preserved_through_round_trip() {
        let grid = GridSpec::square(32, 6.0).unwrap();
        let f = unit_gaussian(grid);
        let n0 = f.norm();
        let p = f.clone().to_momentum().unwrap();
        let n1 = p.norm();
        let back = p.to_position().unwrap();
        assert!((n0 - n1).abs() < 1e-12);
        assert!(f.linf_distance(&back) < 1e-12);
    }

    #[test]
    fn expectation_of_ground_state_variances() {
        let grid = GridSpec::square(128, 10.0).unwrap();
        let f = unit_gaussian(grid);
        for (obs, want) in [
            (Observable::X2, 0.5),
            (Observable::Y2, 0.5),
            (Observable::Px2, 0.5),
            (Observable::Py2, 0.5),
            (Observable::X, 0.0),
            (Observable::Px, 0.0),
        ] {
            let got = f.expectation(obs).unwrap();
            assert!((got - want).abs() < 1e-9, "{obs:?}: {got} vs {want}");
        }
    }

    #[test]
    fn shifted_and_boosted_first_moments() {
        let grid = GridSpec::default_grid();
        let f = make_initial(&GaussianSpec::pure_first(0.0, -3.0, 0.0, 0.0, 1.0), &grid).unwrap();
        assert!((f.expectation(Observable::Y).unwrap() + 3.0).abs() < 1e-6);
        let f = make_initial(&GaussianSpec::pure_first(0.0, 0.0, -4.0, 0.0, 1.0), &grid).unwrap();
        assert!((f.expectation(Observable::Px).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn real_field_has_zero_mean_momentum() {
        let grid = GridSpec::square(32, 5.0).unwrap();
        let mut f = SpinorField::zeros(grid, Representation::Position);
        {
            let (c1, _) = f.components_mut();
            for ix in 0..32 {
                for iy in 0..32 {
                    let (x, y) = (grid.x(ix), grid.y(iy));
                    c1[grid.pos_index(ix, iy)] =
                        C64::new((-0.5 * (x * x + y * y)).exp() * (1.0 + 0.3 * x * y), 0.0);
                }
            }
        }
        f.normalize().unwrap();
        let px = f.expectation(Observable::Px).unwrap();
        assert!(px.abs() < 1e-10, "px = {px}");
    }

    #[test]
    fn wrong_representation_is_rejected() {
        let grid = GridSpec::square(8, 1.0).unwrap();
        let f = SpinorField::zeros(grid, Representation::Momentum);
        assert!(matches!(
            f.to_momentum(),
            Err(Error::WrongRepresentation { .. })
        ));
    }

    #[test]
    fn momentum_resolution_guard() {
        let g = GridSpec::default_grid();
        assert!(g.check_momentum_resolution(8.0, 8.0, 1.0).is_ok());
        assert!(g.check_momentum_resolution(25.0, 25.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_and_parseval_on_random_fields(seed in 0u64..1_000_000) {
            let grid = GridSpec::square(16, 3.0).unwrap();
            let n = grid.len();
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let c1: Vec<C64> = (0..n).map(|_| C64::new(next(), next())).collect();
            let c2: Vec<C64> = (0..n).map(|_| C64::new(next(), next())).collect();
            let f = SpinorField::from_components(grid, Representation::Position, c1, c2).unwrap();
            let n0 = f.norm();
            let p = f.clone().to_momentum().unwrap();
            prop_assert!((p.norm() - n0).abs() < 1e-12 * n0.max(1.0));
            let back = p.to_position().unwrap();
            prop_assert!(f.linf_distance(&back) < 1e-12);
        }
    }
}
