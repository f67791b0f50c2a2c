//! The operators `P0(rho) = Delta + 2 rho.D` and its Faddeev right inverse
//! `G0(rho)` as spectral multipliers, plus probes of norm decay and of
//! analyticity in `z`.
//!
//! `G0` is applied in conjugated form: modulate by `exp(i rho_perp.w)`,
//! divide by `F(xi, z, rho_perp) = xi_par^2 + 2 z xi_par + |xi_perp|^2 -
//! |rho_perp|^2` on the half-shifted lattice, and demodulate. On that lattice
//! `Im F = 2 Im z xi_par` never vanishes when `Im z != 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{apply_weight, forward_transform, inverse_transform, ComplexField, Spectrum};
use crate::grid::{dot, norm, Grid, Lattice, Vec3};
use crate::rng;
use crate::sum::pairwise_sum_complex_by;

const AXIS_TOL: f64 = 1e-12;
const ENERGY_TOL: f64 = 1e-10;

/// `rho = z nu + rho_perp` with real unit `nu` and real `rho_perp` orthogonal to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMomentum {
    nu: Vec3,
    z: Complex64,
    rho_perp: Vec3,
    energy: Option<f64>,
}

impl ComplexMomentum {
    pub fn new(nu: Vec3, z: Complex64, rho_perp: Vec3) -> Result<Self> {
        let unit = (norm(nu) - 1.0).abs();
        let ortho = dot(nu, rho_perp).abs();
        if !(unit <= AXIS_TOL && ortho <= AXIS_TOL * norm(rho_perp).max(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "momentum axis not unit or not orthogonal to rho_perp ({unit:e}, {ortho:e})"
            )));
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite z".into()));
        }
        Ok(ComplexMomentum {
            nu,
            z,
            rho_perp,
            energy: None,
        })
    }

    /// Energy-constrained momentum: `z^2 + |rho_perp|^2 = lambda`.
    pub fn with_energy(nu: Vec3, z: Complex64, rho_perp: Vec3, lambda: f64) -> Result<Self> {
        let mut m = Self::new(nu, z, rho_perp)?;
        let defect = (m.rho_dot_rho() - lambda).norm();
        if defect > ENERGY_TOL * lambda.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho.rho differs from the energy by {defect:e}"
            )));
        }
        m.energy = Some(lambda);
        Ok(m)
    }

    pub fn nu(&self) -> Vec3 {
        self.nu
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn rho_perp(&self) -> Vec3 {
        self.rho_perp
    }

    pub fn energy(&self) -> Option<f64> {
        self.energy
    }

    pub fn rho(&self) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for d in 0..3 {
            out[d] = self.z * self.nu[d] + self.rho_perp[d];
        }
        out
    }

    /// Bilinear (not Hermitian) square `rho.rho`.
    pub fn rho_dot_rho(&self) -> Complex64 {
        self.z * self.z + dot(self.rho_perp, self.rho_perp)
    }

    /// Hermitian length `|rho|`.
    pub fn magnitude(&self) -> f64 {
        (self.z.norm_sqr() + dot(self.rho_perp, self.rho_perp)).sqrt()
    }

    pub fn with_z(&self, z: Complex64) -> Self {
        ComplexMomentum {
            z,
            energy: None,
            ..*self
        }
    }
}

/// `F(xi, z, rho_perp)` at local frequency `xi` (axis 0 parallel to `nu`).
pub fn symbol_f(xi: Vec3, z: Complex64, rho_perp_sq: f64) -> Complex64 {
    let par = xi[0];
    let perp_sq = xi[1] * xi[1] + xi[2] * xi[2];
    Complex64::new(
        par * par + 2.0 * z.re * par + perp_sq - rho_perp_sq,
        2.0 * z.im * par,
    )
}

/// `F` evaluated on every node of the half-shifted lattice.
#[derive(Clone, Debug)]
pub struct SymbolSlice {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

pub fn symbol_slice(grid: &Grid, z: Complex64, rho_perp_sq: f64) -> SymbolSlice {
    SymbolSlice {
        grid: grid.clone(),
        values: (0..grid.len())
            .map(|idx| symbol_f(grid.freq_local(idx, Lattice::Shifted), z, rho_perp_sq))
            .collect(),
    }
}

fn check_axis(grid: &Grid, rho: &ComplexMomentum) -> Result<()> {
    let nu = grid.frame().nu();
    let d = norm(crate::grid::sub(nu, rho.nu));
    if d > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "momentum axis differs from grid axis 0 by {d:e}"
        )));
    }
    Ok(())
}

/// `G0(rho)` bound to a grid, with the modulation precomputed.
#[derive(Clone, Debug)]
pub struct FaddeevOperator {
    grid: Grid,
    rho: ComplexMomentum,
    rho_perp_sq: f64,
    modulation: Vec<Complex64>,
}

impl FaddeevOperator {
    pub fn new(grid: &Grid, rho: &ComplexMomentum) -> Result<Self> {
        if rho.z.im == 0.0 {
            return Err(Error::RealZ);
        }
        check_axis(grid, rho)?;
        let rp = grid.frame().to_local(rho.rho_perp);
        let modulation = (0..grid.len())
            .into_par_iter()
            .map(|idx| Complex64::from_polar(1.0, dot(rp, grid.node_local(idx))))
            .collect();
        Ok(FaddeevOperator {
            grid: grid.clone(),
            rho: *rho,
            rho_perp_sq: dot(rho.rho_perp, rho.rho_perp),
            modulation,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn momentum(&self) -> &ComplexMomentum {
        &self.rho
    }

    pub fn symbol(&self, xi: Vec3) -> Complex64 {
        symbol_f(xi, self.rho.z, self.rho_perp_sq)
    }

    /// Shifted-lattice spectrum of `exp(i rho_perp.w) f`.
    pub fn conjugated_spectrum(&self, f: &ComplexField) -> Result<Spectrum> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut g = f.clone();
        g.samples_mut()
            .par_iter_mut()
            .zip(self.modulation.par_iter())
            .for_each(|(v, m)| *v *= m);
        Ok(forward_transform(&g, Lattice::Shifted))
    }

    /// Inverse of [`Self::conjugated_spectrum`] after multiplying by `m(F)`.
    pub fn finish(&self, mut s: Spectrum, z: Complex64, m: impl Fn(Complex64) -> Complex64 + Sync) -> ComplexField {
        let rp2 = self.rho_perp_sq;
        s.multiply(|xi| m(symbol_f(xi, z, rp2)));
        let mut out = inverse_transform(&s);
        out.samples_mut()
            .par_iter_mut()
            .zip(self.modulation.par_iter())
            .for_each(|(v, m)| *v *= m.conj());
        out
    }

    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        let s = self.conjugated_spectrum(f)?;
        Ok(self.finish(s, self.rho.z, |f| f.inv()))
    }

    /// l2-adjoint of [`Self::apply`] on grid samples.
    pub fn apply_adjoint(&self, f: &ComplexField) -> Result<ComplexField> {
        let s = self.conjugated_spectrum(f)?;
        Ok(self.finish(s, self.rho.z, |f| f.inv().conj()))
    }

    /// `P0(rho)` on the same conjugated shifted lattice, so that
    /// `apply_p0_matched(apply(f)) = f` up to roundoff.
    pub fn apply_p0_matched(&self, f: &ComplexField) -> Result<ComplexField> {
        let s = self.conjugated_spectrum(f)?;
        Ok(self.finish(s, self.rho.z, |f| f))
    }
}

/// `P0(rho) f = F^-1[(|xi|^2 + 2 rho.xi) F f]` on the standard lattice.
///
/// Exact for characters of the standard lattice. Functions produced by
/// [`apply_g0`] live on the conjugated shifted lattice; use
/// [`FaddeevOperator::apply_p0_matched`] for those.
pub fn apply_p0(rho: &ComplexMomentum, f: &ComplexField) -> Result<ComplexField> {
    check_axis(f.grid(), rho)?;
    let rl = f.grid().frame().to_local(rho.rho_perp);
    let z = rho.z;
    let mut s = forward_transform(f, Lattice::Standard);
    s.multiply(|xi| {
        let sq = dot(xi, xi);
        Complex64::new(sq + 2.0 * (rl[1] * xi[1] + rl[2] * xi[2]), 0.0) + 2.0 * z * xi[0]
    });
    Ok(inverse_transform(&s))
}

pub fn apply_g0(rho: &ComplexMomentum, f: &ComplexField) -> Result<ComplexField> {
    FaddeevOperator::new(f.grid(), rho)?.apply(f)
}

/// Minimum distance from the half-shifted dual nodes to the singular set
/// `{xi_par = 0, |xi_perp| = |rho_perp|}`. Depends on `rho_perp` only.
pub fn singular_set_distance(grid: &Grid, rho_perp: Vec3) -> f64 {
    let r = norm(rho_perp);
    (0..grid.len())
        .map(|idx| {
            let xi = grid.freq_local(idx, Lattice::Shifted);
            let perp = (xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            (xi[0] * xi[0] + (perp - r) * (perp - r)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub z: Complex64,
    pub rho_perp: Vec3,
    pub rho_magnitude: f64,
    pub norm_estimate: f64,
}

pub const POWER_ITERATIONS: usize = 20;

/// Randomized power-iteration estimate of the norm of
/// `G0(rho): exp(-gamma <w>) L^2 -> exp(gamma <w>) L^2` at each sweep point.
pub fn norm_decay_probe(
    grid: &Grid,
    sweep: &[ComplexMomentum],
    gamma: f64,
    iterations: usize,
    seed: u64,
) -> Result<Vec<NormSample>> {
    if sweep.is_empty() {
        return Err(Error::EmptySweep);
    }
    sweep
        .par_iter()
        .enumerate()
        .map(|(i, rho)| {
            let op = FaddeevOperator::new(grid, rho)?;
            let mut r = rng::stream(seed, "norm-decay", i as u64);
            let mut x = rng::random_field(grid, &mut r);
            let weighted = |f: &ComplexField| apply_weight(f, -gamma);
            let mut estimate = 0.0;
            for _ in 0..iterations.max(1) {
                let n = x.l2();
                x = x.scale(Complex64::new(1.0 / n, 0.0));
                let kx = weighted(&op.apply(&weighted(&x))?);
                estimate = kx.l2();
                x = weighted(&op.apply_adjoint(&weighted(&kx))?);
            }
            Ok(NormSample {
                z: rho.z,
                rho_perp: rho.rho_perp,
                rho_magnitude: rho.magnitude(),
                norm_estimate: estimate,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticityReport {
    /// Worst `|dm/dx + i dm/dy| / |m'(z0)|` over the probes.
    pub residual: f64,
    /// Largest `|m'(z0)|` seen, the derivative scale.
    pub derivative_scale: f64,
}

/// Finite-difference Cauchy-Riemann residual of `m(z) = <g, V G0(z nu + rho_perp) h>`
/// for random `g`, `h`. `potential` is the sampled `V` on a grid aligned with `nu`.
pub fn analyticity_probe(
    z0: Complex64,
    rho_perp: Vec3,
    potential: &ComplexField,
    step: f64,
    probes: usize,
    seed: u64,
) -> Result<AnalyticityReport> {
    if z0.im == 0.0 {
        return Err(Error::RealZ);
    }
    if !(step > 0.0 && step < z0.im.abs() / 4.0) {
        return Err(Error::StepTooLarge {
            step,
            distance: z0.im.abs(),
        });
    }
    let grid = potential.grid();
    let rho = ComplexMomentum::new(grid.frame().nu(), z0, rho_perp)?;
    let op = FaddeevOperator::new(grid, &rho)?;
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for p in 0..probes.max(1) {
        let mut r = rng::stream(seed, "analyticity", p as u64);
        let g = rng::random_field(grid, &mut r);
        let h = rng::random_field(grid, &mut r);
        let spec = op.conjugated_spectrum(&h)?;
        let m = |z: Complex64| -> Result<Complex64> {
            let u = op.finish(spec.clone(), z, |f| f.inv());
            let vs = potential.samples();
            let us = u.samples();
            let gs = g.samples();
            Ok(pairwise_sum_complex_by(us.len(), &|i| gs[i].conj() * vs[i] * us[i]))
        };
        let dx = (m(z0 + step)? - m(z0 - step)?) / (2.0 * step);
        let i = Complex64::i();
        let dy = (m(z0 + i * step)? - m(z0 - i * step)?) / (2.0 * step);
        let cr = (dx + i * dy).norm();
        let d = dx.norm();
        scale = scale.max(d);
        let rel = if cr == 0.0 { 0.0 } else { cr / d };
        residual = residual.max(rel);
    }
    Ok(AnalyticityReport {
        residual,
        derivative_scale: scale,
    })
}
