//! Brute-force dense propagator for small grids.
//!
//! Builds the full `2 nx ny`-dimensional Hamiltonian with spectral
//! derivative matrices (exact on the grid, same momentum values the FFT
//! path sees), exponentiates it by Hermitian eigendecomposition and applies
//! it. Completely independent of the split-operator code path; used only
//! for verification of the linear (g = 0) dynamics.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Representation, SpinorField};
use crate::model::ModelParams;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use std::f64::consts::TAU;

/// Memory guard: largest per-axis point count the dense oracle accepts.
pub const MAX_ORACLE_POINTS: usize = 48;

/// 1D spectral operator `F^dagger diag(f(p_k)) F` as a dense matrix.
fn spectral_matrix_1d(n: usize, dp: f64, f: impl Fn(f64) -> f64) -> Array2<C64> {
    let mut vals = vec![0.0; n];
    for (k, v) in vals.iter_mut().enumerate() {
        let signed = if k < n / 2 {
            k as isize
        } else {
            k as isize - n as isize
        };
        *v = f(signed as f64 * dp);
    }
    let mut m = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for jp in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (k, v) in vals.iter().enumerate() {
                let angle = TAU * (k as f64) * ((j as isize - jp as isize) as f64) / n as f64;
                acc += C64::from_polar(*v, angle);
            }
            m[[j, jp]] = acc / n as f64;
        }
    }
    m
}

/// Assemble the dense grid Hamiltonian of the linear model:
/// kinetic + trap + spin-orbit, in the basis
/// `index = component * nx*ny + ix*ny + iy`.
pub fn build_hamiltonian(grid: &GridSpec, params: &ModelParams) -> Result<Array2<C64>> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx > MAX_ORACLE_POINTS || ny > MAX_ORACLE_POINTS {
        return Err(Error::OracleGridTooLarge {
            nx,
            ny,
            max: MAX_ORACLE_POINTS,
        });
    }
    let m = nx * ny;
    let tx = spectral_matrix_1d(nx, grid.dpx(), |p| 0.5 * p * p);
    let ty = spectral_matrix_1d(ny, grid.dpy(), |p| 0.5 * p * p);
    let px = spectral_matrix_1d(nx, grid.dpx(), |p| p);
    let py = spectral_matrix_1d(ny, grid.dpy(), |p| p);

    let mut h = Array2::<C64>::zeros((2 * m, 2 * m));
    for ix in 0..nx {
        for iy in 0..ny {
            let r = ix * ny + iy;
            if params.trap_on {
                let (x, y) = (grid.x(ix), grid.y(iy));
                let trap = C64::new(0.5 * (x * x + y * y), 0.0);
                h[[r, r]] += trap;
                h[[r + m, r + m]] += trap;
            }
            for ixp in 0..nx {
                let c = ixp * ny + iy;
                let t = tx[[ix, ixp]];
                h[[r, c]] += t;
                h[[r + m, c + m]] += t;
                // v0 px sigma_x couples the components symmetrically.
                let sx = px[[ix, ixp]] * params.v0;
                h[[r, c + m]] += sx;
                h[[r + m, c]] += sx;
            }
            for iyp in 0..ny {
                let c = ix * ny + iyp;
                let t = ty[[iy, iyp]];
                h[[r, c]] += t;
                h[[r + m, c + m]] += t;
                // v1 py sigma_y: -i on the upper block, +i on the lower.
                let sy = py[[iy, iyp]] * params.v1;
                h[[r, c + m]] += C64::new(0.0, -1.0) * sy;
                h[[r + m, c]] += C64::new(0.0, 1.0) * sy;
            }
        }
    }
    Ok(h)
}

/// Hermitian eigendecomposition with a residual self-check. Depending on
/// the memory layout handed to LAPACK, the binding can return eigenvectors
/// of the conjugated matrix; verify `H v = e v` on sample columns and
/// conjugate once if needed, failing loudly if neither form works.
fn eigh_checked(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (evals, mut evecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    let scale = evals.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let resid = |v: &Array2<C64>| -> f64 {
        let mut worst = 0.0f64;
        for k in [0usize, v.ncols() - 1] {
            let col = v.column(k).to_owned();
            let hv = h.dot(&col);
            for i in 0..hv.len() {
                worst = worst.max((hv[i] - col[i] * evals[k]).norm());
            }
        }
        worst
    };
    if resid(&evecs) > 1e-8 * scale {
        evecs.mapv_inplace(|z| z.conj());
        if resid(&evecs) > 1e-8 * scale {
            return Err(Error::Eigen(
                "eigenvector residual check failed for both layout conventions".into(),
            ));
        }
    }
    Ok((evals, evecs))
}

/// Evolve `field` for time `tau` with `exp(-i H tau)` from the dense
/// Hermitian eigendecomposition of the grid Hamiltonian.
pub fn dense_oracle_evolve(field: &SpinorField, params: &ModelParams, tau: f64) -> Result<SpinorField> {
    if !params.g.is_zero() {
        return Err(Error::OracleNonlinear);
    }
    if field.rep() != Representation::Position {
        return Err(Error::WrongRepresentation {
            expected: Representation::Position,
            found: field.rep(),
        });
    }
    let grid = *field.grid();
    let h = build_hamiltonian(&grid, params)?;
    let (evals, evecs) = eigh_checked(&h)?;

    let m = grid.len();
    let mut c0 = Array1::<C64>::zeros(2 * m);
    for (i, z) in field.c1().iter().enumerate() {
        c0[i] = *z;
    }
    for (i, z) in field.c2().iter().enumerate() {
        c0[m + i] = *z;
    }
    // Amplitudes in the eigenbasis, phase advance, and back.
    let mut w = evecs.t().mapv(|z| z.conj()).dot(&c0);
    for (wi, e) in w.iter_mut().zip(evals.iter()) {
        *wi *= C64::from_polar(1.0, -e * tau);
    }
    let c = evecs.dot(&w);

    let mut out = SpinorField::zeros(grid, Representation::Position);
    {
        let (o1, o2) = out.components_mut();
        for i in 0..m {
            o1[i] = c[i];
            o2[i] = c[m + i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_initial, GaussianSpec};
    use crate::propagate::{MonitorConfig, RunState, StepScheme, Stepper};

    #[test]
    fn hamiltonian_is_hermitian() {
        let grid = GridSpec::square(16, 7.0).unwrap();
        let params = ModelParams::isotropic(2.0, 0.0).unwrap();
        let h = build_hamiltonian(&grid, &params).unwrap();
        let n = h.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((h[[i, j]] - h[[j, i]].conj()).norm());
            }
        }
        assert!(worst < 1e-12, "hermiticity defect {worst}");
    }

    #[test]
    fn harmonic_oscillator_spectrum_at_v0() {
        let grid = GridSpec::square(16, 5.0).unwrap();
        let params = ModelParams::isotropic(0.0, 0.0).unwrap();
        let h = build_hamiltonian(&grid, &params).unwrap();
        let (evals, evecs) = eigh_checked(&h).unwrap();
        // Doubly degenerate spinor copies of n_x + n_y + 1.
        let expect = [1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
        for (k, want) in expect.iter().enumerate() {
            assert!(
                (evals[k] - want).abs() < 1e-6,
                "eigenvalue {k}: {} vs {want}",
                evals[k]
            );
        }
        // Eigenvector column convention: H v_0 = e_0 v_0.
        let v0 = evecs.column(0).to_owned();
        let hv = h.dot(&v0);
        let mut resid: f64 = 0.0;
        for i in 0..hv.len() {
            resid = resid.max((hv[i] - v0[i] * evals[0]).norm());
        }
        assert!(resid < 1e-10, "eigenvector residual {resid}");
    }

    #[test]
    fn oracle_guards() {
        let grid = GridSpec::square(64, 8.0).unwrap();
        let params = ModelParams::isotropic(1.0, 0.0).unwrap();
        let f = SpinorField::zeros(grid, Representation::Position);
        assert!(matches!(
            build_hamiltonian(&grid, &params),
            Err(Error::OracleGridTooLarge { .. })
        ));
        let small = GridSpec::square(16, 6.0).unwrap();
        let f2 = SpinorField::zeros(small, Representation::Position);
        let nonlinear = ModelParams::isotropic(1.0, 0.3).unwrap();
        assert!(matches!(
            dense_oracle_evolve(&f2, &nonlinear, 1.0),
            Err(Error::OracleNonlinear)
        ));
        drop(f);
    }

    #[test]
    fn split_operator_agrees_on_small_grid() {
        let grid = GridSpec::square(16, 6.0).unwrap();
        let params = ModelParams::isotropic(2.0, 0.0).unwrap();
        let field =
            make_initial(&GaussianSpec::lower_pair(0.0, -1.0, -2.0, 0.0, 1.0), &grid).unwrap();
        let tau = 0.25;
        let oracle = dense_oracle_evolve(&field, &params, tau).unwrap();
        let mut state = RunState::new(field, StepScheme::default_strang(), params).unwrap();
        let mut stepper = Stepper::full_model(&state, MonitorConfig::default()).unwrap();
        stepper.evolve(&mut state, 250).unwrap();
        let dist = state.field.l2_distance(&oracle).unwrap();
        assert!(dist < 1e-5, "split vs dense distance {dist}");
    }
}
