//! Browser bindings for three small experiments: a slice of the Faddeev
//! symbol, the norm decay of `G0(rho)` in `|z|`, and Fourier recovery of a
//! Gaussian potential along a ray through the admissible shell.
//!
//! Energy is fixed at 1 and the declared decay rate at 3. Without threads
//! the parallel loops in the core run on the calling thread.

use cgo_core::faddeev::{norm_decay_probe, symbol_f, ComplexMomentum};
use cgo_core::grid::{norm, Frame, Grid};
use cgo_core::krylov::GmresConfig;
use cgo_core::potential::Potential;
use cgo_core::recon::{recover_fourier, shell_bounds, ReconGrid, RecoverConfig};
use cgo_core::sample::Descriptor;
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

const LAMBDA: f64 = 1.0;
const GAMMA0: f64 = 3.0;

/// `log10 |F|` on the plane `xi_par = const`, sampled on a `res x res` grid
/// over `[-extent, extent]^2` in the two perpendicular frequencies, row-major.
/// For `im_z != 0` the zero set is the circle `|xi_perp| = rho_perp` in the
/// plane `xi_par = 0`.
#[wasm_bindgen]
pub fn symbol_plane(res: usize, extent: f64, xi_par: f64, re_z: f64, im_z: f64, rho_perp: f64) -> Vec<f64> {
    let z = Complex64::new(re_z, im_z);
    let step = if res > 1 { 2.0 * extent / (res - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(res * res);
    for i in 0..res {
        let b = -extent + step * i as f64;
        for j in 0..res {
            let a = -extent + step * j as f64;
            out.push(symbol_f([xi_par, a, b], z, rho_perp * rho_perp).norm().max(1e-16).log10());
        }
    }
    out
}

/// Power-iteration estimates of the weighted norm of `G0(rho)` for
/// `z = i s`, one per entry of `im_z`, on an `n^3` grid over `[-8, 8)^3`.
#[wasm_bindgen]
pub fn norm_decay(n: usize, im_z: Vec<f64>, rho_perp: f64, iterations: usize, seed: u32) -> Result<Vec<f64>, String> {
    let grid = Grid::new(8.0, n, Frame::identity()).map_err(|e| e.to_string())?;
    let sweep = im_z
        .iter()
        .map(|&s| ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(0.0, s), [0.0, rho_perp, 0.0]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let gamma = cgo_core::potential::working_gamma(GAMMA0);
    let out = norm_decay_probe(&grid, &sweep, gamma, iterations, seed as u64).map_err(|e| e.to_string())?;
    Ok(out.iter().map(|s| s.norm_estimate).collect())
}

/// Open interval of admissible `|zeta|`.
#[wasm_bindgen]
pub fn shell_limits() -> Vec<f64> {
    let (lo, hi) = shell_bounds(LAMBDA, GAMMA0);
    vec![lo, hi]
}

/// Recovered Fourier transform of `A exp(-|w|^2 / 2)` at `zeta = r d` for
/// each radius, with the schedule `t_max / 4, t_max / 2, t_max`. Returns
/// `(r, re, im, exact)` per radius, flattened.
#[wasm_bindgen]
pub fn shell_profile(n: usize, amplitude: f64, direction: Vec<f64>, radii: Vec<f64>, t_max: f64) -> Result<Vec<f64>, String> {
    let d: [f64; 3] = direction.try_into().map_err(|_| "direction needs three components".to_string())?;
    let len = norm(d);
    if len == 0.0 {
        return Err("direction must be nonzero".into());
    }
    let d = [d[0] / len, d[1] / len, d[2] / len];
    let grid = Grid::new(8.0, n, Frame::identity()).map_err(|e| e.to_string())?;
    let gauss = Descriptor::Gaussian {
        amplitude,
        sigma: 1.0,
        center: [0.0; 3],
    };
    let v = Potential::from_descriptor(&gauss, &grid, GAMMA0).map_err(|e| e.to_string())?;
    let zero = Potential::zero(&grid, GAMMA0).map_err(|e| e.to_string())?;
    let cfg = RecoverConfig {
        grid: ReconGrid {
            half_width: 8.0,
            points_per_axis: n,
        },
        gmres: GmresConfig::default(),
        screening: None,
    };
    let schedule = [t_max / 4.0, t_max / 2.0, t_max];
    let mut out = Vec::with_capacity(4 * radii.len());
    for r in radii {
        let zeta = [r * d[0], r * d[1], r * d[2]];
        let rec = recover_fourier(&v, &zero, LAMBDA, zeta, &schedule, &cfg).map_err(|e| e.to_string())?;
        let exact = amplitude * (2.0 * std::f64::consts::PI).powf(1.5) * (-r * r / 2.0).exp();
        out.extend([r, rec.estimate.re, rec.estimate.im, exact]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_vanishes_on_the_circle() {
        let res = 41;
        let s = symbol_plane(res, 2.0, 0.0, 0.3, 1.0, 1.0);
        // (a, b) = (1, 0) sits on row 20, column 30
        let on = s[20 * res + 30];
        let off = s[20 * res + 20];
        assert!(on < -10.0, "{on}");
        assert!(off > -1.0, "{off}");
        let away = symbol_plane(res, 2.0, 0.5, 0.3, 1.0, 1.0);
        assert!(away.iter().all(|v| *v > -1.0));
    }

    #[test]
    fn norm_decays_in_im_z() {
        let est = norm_decay(16, vec![5.0, 10.0, 20.0], 1.0, 10, 3).unwrap();
        assert!(est.windows(2).all(|w| w[1] < w[0]), "{est:?}");
    }

    #[test]
    fn profile_tracks_the_transform() {
        let [lo, hi] = shell_limits()[..] else { panic!() };
        assert!(lo < 2.5 && hi > 3.2);
        let out = shell_profile(24, 0.1, vec![1.0, 1.0, 0.0], vec![2.5, 3.2], 8.0).unwrap();
        for row in out.chunks(4) {
            assert!((row[1] - row[3]).abs() <= 0.1 * row[3], "{row:?}");
        }
        assert!(shell_profile(16, 0.1, vec![0.0; 3], vec![3.0], 8.0).is_err());
        assert!(shell_profile(16, 0.1, vec![1.0, 0.0, 0.0], vec![1.5], 8.0).is_err());
    }
}
