//! Complex geometrical optics solutions `u = exp(i rho.w) (1 + v)` of
//! `(Delta + V - lambda) u = 0` and the exceptional-set indicator.
//!
//! The correction solves `(I + G0 V) v = -G0 V` by GMRES. Equivalently
//! `v = -G0 (I + V G0)^-1 V`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faddeev::{ComplexMomentum, FaddeevOperator};
use crate::field::{apply_weight, weighted_norm, ComplexField, WeightedNormSpec};
use crate::grid::{Grid, Vec3};
use crate::krylov::{gmres, GmresConfig};
use crate::potential::{working_gamma, Potential};
use crate::rng;

#[derive(Clone, Debug)]
pub struct CgoSolution {
    pub rho: ComplexMomentum,
    pub v: ComplexField,
    /// `|(P0 + V) v + V| / |V|`, measured independently of the Krylov residual.
    pub residual: f64,
    pub krylov_residual: f64,
    pub iterations: usize,
    pub indicator: Option<f64>,
}

impl CgoSolution {
    /// `exp(i rho.w) (1 + v)`. Grows like `exp(|Im rho| |w|)`; callers keep
    /// `|Im rho| L` moderate.
    pub fn eigenfunction(&self) -> ComplexField {
        let grid = self.v.grid().clone();
        let rho = self.rho.rho();
        let frame = *grid.frame();
        let mut out = self.v.clone();
        for (idx, s) in out.samples_mut().iter_mut().enumerate() {
            let w = frame.to_world(grid.node_local(idx));
            let phase: Complex64 = (0..3).map(|d| rho[d] * w[d]).sum();
            *s = (Complex64::i() * phase).exp() * (1.0 + *s);
        }
        out
    }

    pub fn weighted_correction_norm(&self, gamma: f64) -> f64 {
        weighted_norm(&self.v, WeightedNormSpec { gamma })
    }
}

fn to_field(grid: &Grid, x: Vec<Complex64>) -> ComplexField {
    ComplexField::from_samples(grid, x).expect("solver iterate stays finite")
}

/// `(P0 + V) v + V` with `P0` on the lattice matched to `G0`.
pub fn pde_residual(op: &FaddeevOperator, potential: &Potential, v: &ComplexField) -> Result<ComplexField> {
    let vf = potential.field();
    let p0v = op.apply_p0_matched(v)?;
    let vv = vf.mul(v)?;
    p0v.add(&vv)?.add(vf)
}

pub fn solve_cgo(potential: &Potential, rho: &ComplexMomentum, cfg: &GmresConfig) -> Result<CgoSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let grid = potential.grid();
    let op = FaddeevOperator::new(grid, rho)?;
    if potential.is_zero() {
        return Ok(CgoSolution {
            rho: *rho,
            v: ComplexField::zeros(grid),
            residual: 0.0,
            krylov_residual: 0.0,
            iterations: 0,
            indicator: None,
        });
    }
    let vf = potential.field();
    let rhs = op.apply(vf)?.scale(Complex64::new(-1.0, 0.0));
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let xf = to_field(grid, x.to_vec());
        let gvx = op.apply(&vf.mul(&xf).expect("same grid")).expect("same grid");
        x.iter().zip(gvx.samples()).map(|(a, b)| a + b).collect()
    };
    let out = gmres(&apply, rhs.samples(), None, cfg)?;
    let v = to_field(grid, out.x);
    let residual = pde_residual(&op, potential, &v)?.l2() / vf.l2();
    Ok(CgoSolution {
        rho: *rho,
        v,
        residual,
        krylov_residual: out.residual,
        iterations: out.iterations,
        indicator: None,
    })
}

pub const DEFAULT_PROBES: usize = 12;
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Estimate of the smallest singular value of `I + V G0(rho)` on the
/// weighted space `exp(-gamma <w>) L^2`, `gamma = min(0.25, gamma0 / 4)`, by
/// inverse power iteration on `(B^* B)^-1` from a seeded start.
/// Returns 0 when an inner solve fails to converge.
pub fn exceptional_indicator(potential: &Potential, rho: &ComplexMomentum, probes: usize, seed: u64) -> Result<f64> {
    let grid = potential.grid();
    let op = FaddeevOperator::new(grid, rho)?;
    if potential.is_zero() {
        return Ok(1.0);
    }
    let gamma = working_gamma(potential.gamma0());
    // B g = g + e^{g<w>} V G0 e^{-g<w>} g ; B* g = g + e^{-g<w>} G0^* V e^{g<w>} g
    let vw = apply_weight(potential.field(), gamma);
    let forward = |x: &[Complex64]| -> Vec<Complex64> {
        let xf = apply_weight(&to_field(grid, x.to_vec()), -gamma);
        let y = vw.mul(&op.apply(&xf).expect("same grid")).expect("same grid");
        x.iter().zip(y.samples()).map(|(a, b)| a + b).collect()
    };
    let adjoint = |x: &[Complex64]| -> Vec<Complex64> {
        let xf = to_field(grid, x.to_vec());
        let y = apply_weight(&op.apply_adjoint(&vw.mul(&xf).expect("same grid")).expect("same grid"), -gamma);
        x.iter().zip(y.samples()).map(|(a, b)| a + b).collect()
    };
    let cfg = GmresConfig {
        restart: 30,
        max_iter: 600,
        tol: 1e-10,
    };
    let mut r = rng::stream(seed, "indicator", 0);
    let mut x = rng::random_field(grid, &mut r).into_samples();
    let normalize = |x: &mut Vec<Complex64>| {
        let n = to_field(grid, x.clone()).l2();
        x.iter_mut().for_each(|v| *v /= n);
    };
    normalize(&mut x);
    for _ in 0..probes.max(1) {
        let y = match gmres(&adjoint, &x, None, &cfg) {
            Ok(o) => o.x,
            Err(Error::NonConvergence { .. }) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        x = match gmres(&forward, &y, None, &cfg) {
            Ok(o) => o.x,
            Err(Error::NonConvergence { .. }) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        normalize(&mut x);
    }
    Ok(to_field(grid, forward(&x)).l2())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanPoint {
    pub z: Complex64,
    pub rho_perp: Vec3,
    pub indicator: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExceptionalScan {
    pub threshold: f64,
    pub probes: usize,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
}

impl ExceptionalScan {
    pub fn flagged(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| p.flagged)
    }
}

/// Indicator over the product of `z` and `rho_perp` samples (z outer loop).
pub fn exceptional_scan(
    potential: &Potential,
    z_samples: &[Complex64],
    rho_perp_samples: &[Vec3],
    threshold: f64,
    probes: usize,
    seed: u64,
) -> Result<ExceptionalScan> {
    if let Some(z) = z_samples.iter().find(|z| z.im == 0.0) {
        let _ = z;
        return Err(Error::RealZ);
    }
    let nu = potential.grid().frame().nu();
    let pairs: Vec<(Complex64, Vec3)> = z_samples
        .iter()
        .flat_map(|&z| rho_perp_samples.iter().map(move |&rp| (z, rp)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|&(z, rp)| {
            let rho = ComplexMomentum::new(nu, z, rp)?;
            let indicator = exceptional_indicator(potential, &rho, probes, seed)?;
            Ok(ScanPoint {
                z,
                rho_perp: rp,
                indicator,
                flagged: indicator < threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExceptionalScan {
        threshold,
        probes,
        seed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;
    use crate::sample::Descriptor;

    fn gaussian(a: f64) -> Descriptor {
        Descriptor::Gaussian {
            amplitude: a,
            sigma: 1.0,
            center: [0.0; 3],
        }
    }

    #[test]
    fn zero_potential_gives_zero_correction() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let v = Potential::zero(&g, 1.0).unwrap();
        let rho = ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(0.0, 2.0), [0.0, 1.0, 0.0]).unwrap();
        let sol = solve_cgo(&v, &rho, &GmresConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.residual, 0.0);
        assert!(sol.v.is_zero());
        assert_eq!(exceptional_indicator(&v, &rho, 4, 0).unwrap(), 1.0);
    }

    #[test]
    fn pde_residual_tracks_krylov_residual() {
        let g = Grid::new(6.0, 16, Frame::identity()).unwrap();
        let v = Potential::from_descriptor(&gaussian(0.5), &g, 3.0).unwrap();
        let rho = ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(0.3, 1.5), [0.0, 0.8, 0.2]).unwrap();
        let cfg = GmresConfig { tol: 1e-9, ..Default::default() };
        let sol = solve_cgo(&v, &rho, &cfg).unwrap();
        assert!(sol.krylov_residual <= 1e-9);
        assert!(sol.residual <= 10.0 * 1e-9, "{}", sol.residual);
    }

    #[test]
    fn real_z_in_scan_rejected() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let v = Potential::zero(&g, 1.0).unwrap();
        assert!(matches!(
            exceptional_scan(&v, &[Complex64::new(1.0, 0.0)], &[[0.0; 3]], 1e-3, 2, 0),
            Err(Error::RealZ)
        ));
    }

    #[test]
    fn zero_potential_scan_has_no_flags() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let v = Potential::zero(&g, 1.0).unwrap();
        let zs = [Complex64::new(0.0, 1.0), Complex64::new(1.0, -3.0)];
        let scan = exceptional_scan(&v, &zs, &[[0.0, 1.0, 0.0], [0.0, 0.0, 2.0]], 1e-3, 2, 0).unwrap();
        assert_eq!(scan.points.len(), 4);
        assert_eq!(scan.flagged().count(), 0);
    }
}
