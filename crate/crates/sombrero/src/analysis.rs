//! Derived observables: reduced spinor density matrix, Bloch trace,
//! non-cyclic geometric phase, solid angles, phonon numbers, momentum
//! distributions and node/antinode contrast.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Observable, Representation, SpinorField};
use crate::mat2::Mat2;
use crate::par;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Allowed impurity `1 - lambda_max` of the initial density matrix for the
/// non-cyclic phase.
pub const PURITY_TOLERANCE: f64 = 1e-6;
/// Smallest accepted overlap between consecutive tracked eigenvectors.
pub const OVERLAP_THRESHOLD: f64 = 0.9;
/// Eigenvalue gap below which a sample is flagged as ill-conditioned.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Azimuthal samples for ring probing.
pub const RING_SAMPLES: usize = 720;
/// Probe window around azimuth pi for node contrast, in degrees each side.
pub const PROBE_HALF_WINDOW_DEG: f64 = 10.0;

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let m = x.rem_euclid(2.0 * PI);
    if m > PI {
        m - 2.0 * PI
    } else {
        m
    }
}

/// Reduce a solid angle mod 4 pi into (-2 pi, 2 pi].
pub fn reduce_solid_angle(x: f64) -> f64 {
    let m = x.rem_euclid(4.0 * PI);
    if m > 2.0 * PI {
        m - 4.0 * PI
    } else {
        m
    }
}

/// One sample of the spinor state seen through the reduced density matrix.
#[derive(Debug, Clone, Copy)]
pub struct BlochSample {
    pub tau: f64,
    pub p1: f64,
    pub p2: f64,
    pub coherence: C64,
    /// Bloch vector (u, v, w) = (2 Re C, -2 Im C, P1 - P2).
    pub r: [f64; 3],
}

impl BlochSample {
    pub fn purity(&self) -> f64 {
        let [u, v, w] = self.r;
        (u * u + v * v + w * w).sqrt()
    }
}

/// Reduced 2x2 density matrix `[[P1, C], [C*, P2]]` with
/// `P_i = int |psi_i|^2`, `C = int psi_1* psi_2`; representation
/// independent by unitarity of the transform.
pub fn reduced_density(f: &SpinorField) -> Result<Mat2> {
    let w = f.grid().weight();
    let row = match f.rep() {
        Representation::Position => f.grid().ny(),
        Representation::Momentum => f.grid().nx(),
    };
    let block = par::BLOCK_ROWS * row;
    let c2 = f.c2();
    let (p1, (p2, c)) = par::join(
        || par::sum_blocks(f.c1(), block, |_, c| c.iter().map(|z| z.norm_sqr()).sum::<f64>()),
        || {
            par::join(
                || par::sum_blocks(c2, block, |_, c| c.iter().map(|z| z.norm_sqr()).sum::<f64>()),
                || {
                    par::sum_blocks(f.c1(), block, |start, chunk| {
                        let mut acc = C64::new(0.0, 0.0);
                        for (i, z) in chunk.iter().enumerate() {
                            acc += z.conj() * c2[start + i];
                        }
                        acc
                    })
                },
            )
        },
    );
    let (p1, p2, c) = (p1 * w, p2 * w, c * w);
    if !(p1.is_finite() && p2.is_finite() && c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFinite {
            context: "reduced density matrix",
        });
    }
    Ok(Mat2::new(
        C64::new(p1, 0.0),
        c,
        c.conj(),
        C64::new(p2, 0.0),
    ))
}

/// Bloch-form sample of the reduced state at time `tau`.
pub fn bloch_sample(tau: f64, f: &SpinorField) -> Result<BlochSample> {
    let rho = reduced_density(f)?;
    let (p1, p2) = (rho.a.re, rho.d.re);
    let c = rho.b;
    Ok(BlochSample {
        tau,
        p1,
        p2,
        coherence: c,
        r: [2.0 * c.re, -2.0 * c.im, p1 - p2],
    })
}

/// Populations `(P1, P2)` extracted from a Bloch series.
pub fn populations_series(samples: &[BlochSample]) -> Vec<(f64, f64)> {
    samples.iter().map(|s| (s.p1, s.p2)).collect()
}

/// Spectral decomposition of one 2x2 Hermitian density matrix, eigenvalues
/// descending. Eigenvector phases follow a fixed deterministic gauge; the
/// phase evaluation below is gauge invariant anyway.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSample {
    pub lambda: [f64; 2],
    pub vecs: [[C64; 2]; 2],
}

/// Closed-form eigensystem of `[[p1, c], [c*, p2]]`.
pub fn spectral_decompose(rho: &Mat2) -> SpectralSample {
    let tr = rho.trace().re;
    let u = 2.0 * rho.b.re;
    let v = -2.0 * rho.b.im;
    let w = rho.a.re - rho.d.re;
    let r = (u * u + v * v + w * w).sqrt();
    let lambda = [0.5 * (tr + r), 0.5 * (tr - r)];
    if r < 1e-300 {
        return SpectralSample {
            lambda,
            vecs: [
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            ],
        };
    }
    let cos_half = ((1.0 + w / r) * 0.5).max(0.0).sqrt();
    let sin_half = ((1.0 - w / r) * 0.5).max(0.0).sqrt();
    let rho_xy = u.hypot(v);
    let phase = if rho_xy < 1e-300 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(u / rho_xy, v / rho_xy)
    };
    SpectralSample {
        lambda,
        vecs: [
            [C64::new(cos_half, 0.0), phase * sin_half],
            [C64::new(sin_half, 0.0), -phase * cos_half],
        ],
    }
}

/// Non-cyclic geometric phase trace of the tracked dominant eigenstate.
#[derive(Debug, Clone)]
pub struct BerryTrace {
    pub times: Vec<f64>,
    /// Phase wrapped into (-pi, pi]; starts at exactly 0.
    pub gamma_wrapped: Vec<f64>,
    /// Companion series unwrapped for plotting the pi-jump cleanly.
    pub gamma_unwrapped: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Smallest |<phi_k | phi_{k+1}>| seen while tracking.
    pub min_overlap: f64,
    /// Sample indices where the eigenvalue gap fell below [`DEGENERACY_GAP`].
    pub degeneracy_flags: Vec<usize>,
}

/// Gauge-invariant discrete evaluation of the non-cyclic phase
/// `gamma(tau_N) = arg<phi(0)|phi(tau_N)> - sum_k arg<phi(tau_k)|phi(tau_{k+1})>`
/// for the eigenvector tracked by maximal overlap (largest eigenvalue at
/// tau = 0).
///
/// At samples where the tracked state is orthogonal to the initial one the
/// phase is intrinsically undefined (this is exactly where the pi-jump
/// happens); such isolated samples carry an arbitrary value without
/// affecting their neighbors.
pub fn berry_phase(times: &[f64], rhos: &[Mat2]) -> Result<BerryTrace> {
    let samples: Vec<SpectralSample> = rhos.iter().map(spectral_decompose).collect();
    berry_phase_from_samples(times, &samples)
}

/// Same as [`berry_phase`] but from pre-decomposed samples; multiplying any
/// sample's eigenvectors by phases leaves the result unchanged (tested).
pub fn berry_phase_from_samples(times: &[f64], samples: &[SpectralSample]) -> Result<BerryTrace> {
    if times.len() != samples.len() || times.is_empty() {
        return Err(Error::InvalidParams(
            "berry_phase needs equally many times and samples, at least one".into(),
        ));
    }
    let first = &samples[0];
    let tr0 = first.lambda[0] + first.lambda[1];
    if tr0 <= 0.0 || 1.0 - first.lambda[0] / tr0 > PURITY_TOLERANCE {
        return Err(Error::NotPure {
            lambda: first.lambda[0] / tr0.max(1e-300),
            required: 1.0 - PURITY_TOLERANCE,
        });
    }
    let phi0 = first.vecs[0];
    let mut tracked = phi0;
    let mut pancharatnam = 0.0;
    let mut trace = BerryTrace {
        times: times.to_vec(),
        gamma_wrapped: vec![0.0],
        gamma_unwrapped: vec![0.0],
        lambda1: vec![first.lambda[0]],
        lambda2: vec![first.lambda[1]],
        min_overlap: 1.0,
        degeneracy_flags: Vec::new(),
    };
    if (first.lambda[0] - first.lambda[1]).abs() < DEGENERACY_GAP {
        trace.degeneracy_flags.push(0);
    }
    for (k, s) in samples.iter().enumerate().skip(1) {
        // Track by maximal overlap, not by eigenvalue order.
        let overlaps = [
            inner(&tracked, &s.vecs[0]),
            inner(&tracked, &s.vecs[1]),
        ];
        let pick = if overlaps[0].norm() >= overlaps[1].norm() { 0 } else { 1 };
        let o = overlaps[pick];
        trace.min_overlap = trace.min_overlap.min(o.norm());
        if o.norm() < OVERLAP_THRESHOLD {
            return Err(Error::Undersampled {
                overlap: o.norm(),
                index: k,
                threshold: OVERLAP_THRESHOLD,
            });
        }
        if (s.lambda[0] - s.lambda[1]).abs() < DEGENERACY_GAP {
            trace.degeneracy_flags.push(k);
        }
        pancharatnam += o.arg();
        tracked = s.vecs[pick];
        let total = inner(&phi0, &tracked);
        let gamma = wrap_angle(total.arg() - pancharatnam);
        let prev_u = *trace.gamma_unwrapped.last().unwrap();
        let prev_w = *trace.gamma_wrapped.last().unwrap();
        trace.gamma_unwrapped.push(prev_u + wrap_angle(gamma - prev_w));
        trace.gamma_wrapped.push(gamma);
        trace.lambda1.push(s.lambda[pick]);
        trace.lambda2.push(s.lambda[1 - pick]);
    }
    Ok(trace)
}

#[inline]
fn inner(a: &[C64; 2], b: &[C64; 2]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn check_unit(path: &[[f64; 3]]) -> Result<()> {
    for (i, n) in path.iter().enumerate() {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnitVector { index: i, norm });
        }
    }
    Ok(())
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn triple(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Signed spherical excess of the triangle (a, b, c) via
/// `tan(E/2) = a.(b x c) / (1 + a.b + b.c + c.a)`.
fn spherical_excess(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> Result<f64> {
    let num = triple(a, b, c);
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    if num.abs() < 1e-300 && den.abs() < 1e-12 {
        // A vertex pair is antipodal; the triangle is a degenerate lune.
        return Err(Error::AntipodalPoints { index: 0, other: 0 });
    }
    Ok(2.0 * num.atan2(den))
}

/// Cumulative signed solid angle of the path closed through its first
/// point: the fan `{n(0), n(k), n(k+1)}` sums spherical excesses, which
/// closes the open path with great-circle chords (the final chord is the
/// shortest geodesic whenever the endpoints are not antipodal). Raw sums,
/// not reduced.
pub fn solid_angle_series(path: &[[f64; 3]]) -> Result<Vec<f64>> {
    check_unit(path)?;
    for (i, pair) in path.windows(2).enumerate() {
        let d = [
            pair[0][0] + pair[1][0],
            pair[0][1] + pair[1][1],
            pair[0][2] + pair[1][2],
        ];
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < 1e-9 {
            return Err(Error::AntipodalPoints {
                index: i,
                other: i + 1,
            });
        }
    }
    let anchor = &path[0];
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..path.len() {
        if k + 1 <= path.len() {
            if k >= 2 {
                acc += spherical_excess(anchor, &path[k - 1], &path[k]).map_err(|_| {
                    Error::AntipodalPoints { index: 0, other: k }
                })?;
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Solid angle enclosed by the path and the shortest geodesic closing it,
/// reduced mod 4 pi into (-2 pi, 2 pi]. Errors if consecutive samples or
/// the endpoints are antipodal (the closure geodesic would be ambiguous).
pub fn solid_angle(path: &[[f64; 3]]) -> Result<f64> {
    if path.len() < 2 {
        check_unit(path)?;
        return Ok(0.0);
    }
    let first = path[0];
    let last = path[path.len() - 1];
    let d = [first[0] + last[0], first[1] + last[1], first[2] + last[2]];
    if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < 1e-9 {
        return Err(Error::AntipodalPoints {
            index: 0,
            other: path.len() - 1,
        });
    }
    let series = solid_angle_series(path)?;
    Ok(reduce_solid_angle(*series.last().unwrap()))
}

/// Diagnostic comparison of the geometric phase against
/// `-1/2 x (solid angle)`, evaluated only where the state is near pure
/// (|r| > 0.9); exact only for pure-state paths.
#[derive(Debug, Clone, Copy)]
pub struct RelationReport {
    pub max_residual: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn relation_check(trace: &BerryTrace, bloch: &[BlochSample]) -> Result<RelationReport> {
    if trace.times.len() != bloch.len() {
        return Err(Error::InvalidParams(
            "relation_check needs matching trace and Bloch series".into(),
        ));
    }
    let mut path = Vec::with_capacity(bloch.len());
    for s in bloch {
        let r = s.purity();
        if r < 1e-6 {
            return Err(Error::InvalidParams(
                "Bloch path passes through the origin; solid angle undefined".into(),
            ));
        }
        path.push([s.r[0] / r, s.r[1] / r, s.r[2] / r]);
    }
    let omega = solid_angle_series(&path)?;
    let mut report = RelationReport {
        max_residual: 0.0,
        checked: 0,
        skipped: 0,
    };
    for k in 1..bloch.len() {
        if bloch[k].purity() > 0.9 {
            let resid = wrap_angle(trace.gamma_wrapped[k] + 0.5 * omega[k]).abs();
            report.max_residual = report.max_residual.max(resid);
            report.checked += 1;
        } else {
            report.skipped += 1;
        }
    }
    Ok(report)
}

/// Phonon numbers `n_i = <p_i^2>/2 + <i^2>/2` per Cartesian mode.
pub fn phonon_numbers(f: &SpinorField) -> Result<(f64, f64)> {
    let x2 = f.expectation(Observable::X2)?;
    let y2 = f.expectation(Observable::Y2)?;
    let mom = match f.rep() {
        Representation::Momentum => f.clone(),
        Representation::Position => f.clone().to_momentum()?,
    };
    let px2 = mom.expectation(Observable::Px2)?;
    let py2 = mom.expectation(Observable::Py2)?;
    Ok((0.5 * (px2 + x2), 0.5 * (py2 + y2)))
}

/// Component-summed momentum density on monotone-ordered axes, normalized
/// so that `sum rho * dpx * dpy = 1`.
#[derive(Debug, Clone)]
pub struct MomentumDistribution {
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    /// Row-major over (px index, py index).
    pub density: Vec<f64>,
    pub dpx: f64,
    pub dpy: f64,
}

pub fn momentum_distribution(f: &SpinorField) -> Result<MomentumDistribution> {
    let grid = *f.grid();
    let mom_owned;
    let mom = match f.rep() {
        Representation::Momentum => f,
        Representation::Position => {
            mom_owned = f.clone().to_momentum()?;
            &mom_owned
        }
    };
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut density = vec![0.0; nx * ny];
    let (c1, c2) = (mom.c1(), mom.c2());
    let mut total = 0.0;
    for ipx in 0..nx {
        let kx = (ipx + nx / 2) % nx;
        for ipy in 0..ny {
            let ky = (ipy + ny / 2) % ny;
            let idx = grid.mom_index(kx, ky);
            let val = c1[idx].norm_sqr() + c2[idx].norm_sqr();
            density[ipx * ny + ipy] = val;
            total += val;
        }
    }
    let scale = 1.0 / (total * grid.dpx() * grid.dpy());
    if !scale.is_finite() {
        return Err(Error::NonFinite {
            context: "momentum distribution normalization",
        });
    }
    for v in &mut density {
        *v *= scale;
    }
    let px = (0..nx)
        .map(|i| (i as isize - (nx / 2) as isize) as f64 * grid.dpx())
        .collect();
    let py = (0..ny)
        .map(|i| (i as isize - (ny / 2) as isize) as f64 * grid.dpy())
        .collect();
    Ok(MomentumDistribution {
        px,
        py,
        density,
        dpx: grid.dpx(),
        dpy: grid.dpy(),
    })
}

/// Component-summed position density on the (already monotone) position
/// axes, normalized to integrate to 1; reuses the distribution container
/// (the axes are then x and y). Used to probe time-of-flight images with
/// the same ring machinery.
pub fn position_distribution(f: &SpinorField) -> Result<MomentumDistribution> {
    let grid = *f.grid();
    let pos_owned;
    let pos = match f.rep() {
        Representation::Position => f,
        Representation::Momentum => {
            pos_owned = f.clone().to_position()?;
            &pos_owned
        }
    };
    let (nx, ny) = (grid.nx(), grid.ny());
    let (c1, c2) = (pos.c1(), pos.c2());
    let mut density = vec![0.0; nx * ny];
    let mut total = 0.0;
    for (i, d) in density.iter_mut().enumerate() {
        let val = c1[i].norm_sqr() + c2[i].norm_sqr();
        *d = val;
        total += val;
    }
    let scale = 1.0 / (total * grid.dx() * grid.dy());
    if !scale.is_finite() {
        return Err(Error::NonFinite {
            context: "position distribution normalization",
        });
    }
    for v in &mut density {
        *v *= scale;
    }
    Ok(MomentumDistribution {
        px: (0..nx).map(|i| grid.x(i)).collect(),
        py: (0..ny).map(|i| grid.y(i)).collect(),
        density,
        dpx: grid.dx(),
        dpy: grid.dy(),
    })
}

impl MomentumDistribution {
    /// Bilinear interpolation; zero outside the covered box.
    pub fn sample(&self, px: f64, py: f64) -> f64 {
        let (nx, ny) = (self.px.len(), self.py.len());
        let fx = (px - self.px[0]) / self.dpx;
        let fy = (py - self.py[0]) / self.dpy;
        if fx < 0.0 || fy < 0.0 || fx > (nx - 1) as f64 || fy > (ny - 1) as f64 {
            return 0.0;
        }
        let ix = (fx.floor() as usize).min(nx - 2);
        let iy = (fy.floor() as usize).min(ny - 2);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |i: usize, j: usize| self.density[i * ny + j];
        (1.0 - tx) * (1.0 - ty) * at(ix, iy)
            + tx * (1.0 - ty) * at(ix + 1, iy)
            + (1.0 - tx) * ty * at(ix, iy + 1)
            + tx * ty * at(ix + 1, iy + 1)
    }

    /// Density sampled on the ring |p| = radius at `RING_SAMPLES` azimuths.
    pub fn ring_profile(&self, radius: f64) -> Vec<f64> {
        (0..RING_SAMPLES)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / RING_SAMPLES as f64;
                self.sample(radius * th.cos(), radius * th.sin())
            })
            .collect()
    }

    /// Mass per azimuth bin inside the radial band [r_lo, r_hi],
    /// accumulated from the grid cells directly.
    pub fn azimuthal_profile(&self, r_lo: f64, r_hi: f64, nbins: usize) -> Vec<f64> {
        let mut bins = vec![0.0; nbins];
        let ny = self.py.len();
        for (i, &pxv) in self.px.iter().enumerate() {
            for (j, &pyv) in self.py.iter().enumerate() {
                let r = pxv.hypot(pyv);
                if r < r_lo || r > r_hi {
                    continue;
                }
                let th = pyv.atan2(pxv).rem_euclid(2.0 * PI);
                let b = ((th / (2.0 * PI) * nbins as f64) as usize).min(nbins - 1);
                bins[b] += self.density[i * ny + j];
            }
        }
        bins
    }
}

/// Node/antinode contrast at azimuth pi on the ring |p| = radius:
/// `(max over the +-10 degree neighborhood excluding pi - rho(pi)) / max on ring`.
/// Near 1 for a node, near 0 or negative for an antinode.
pub fn node_contrast(dist: &MomentumDistribution, radius: f64) -> f64 {
    let ring = dist.ring_profile(radius);
    let n = ring.len();
    let center = n / 2; // azimuth pi
    let window = (PROBE_HALF_WINDOW_DEG / 360.0 * n as f64).round() as usize;
    let rho_pi = ring[center];
    let mut neighbors_max: f64 = f64::NEG_INFINITY;
    for d in 1..=window {
        neighbors_max = neighbors_max.max(ring[center - d]).max(ring[center + d]);
    }
    let ring_max = ring.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(ring_max > 0.0) {
        return 0.0;
    }
    (neighbors_max - rho_pi) / ring_max
}

/// Ratio of the azimuthal envelope at pi to the envelope maximum, on a
/// radial band around `radius`. The envelope is a moving maximum of half
/// width `smooth_half` bins, which rides over interference fringes; the
/// ratio rises towards 1 as the ring wraps around and self-overlaps.
pub fn azimuthal_envelope_ratio(
    dist: &MomentumDistribution,
    radius: f64,
    band: f64,
    smooth_half: usize,
) -> f64 {
    let nbins = RING_SAMPLES;
    let prof = dist.azimuthal_profile((radius - band).max(0.0), radius + band, nbins);
    let env_at = |b: usize| -> f64 {
        let mut m: f64 = 0.0;
        for d in 0..=smooth_half {
            m = m.max(prof[(b + d) % nbins]).max(prof[(b + nbins - d) % nbins]);
        }
        m
    };
    let back = env_at(nbins / 2);
    let mut front: f64 = 0.0;
    for b in 0..nbins {
        front = front.max(prof[b]);
    }
    if front <= 0.0 {
        return 0.0;
    }
    back / front
}

/// Is the grid large enough to host this distribution probe?
pub fn ring_fits(grid: &GridSpec, radius: f64) -> bool {
    radius < grid.pmax_x() && radius < grid.pmax_y()
}
