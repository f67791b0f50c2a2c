//! Fixed-energy forward scattering for `H = Delta + V` (`Delta = -sum d^2`).
//!
//! With `k = sqrt(lambda)` and `c = k exp(-i pi/2) / (2 pi)`, the free Poisson
//! operator `c int exp(-i k w.omega) g(omega) d omega` behaves like
//! `r^-1 (exp(-ikr) g(theta) - exp(ikr) g(-theta))`. Solutions of
//! `(H - lambda) u = 0` are `u = u0 - R0(lambda + i0) V u` and their outgoing
//! amplitude is `-g(-theta) - (4 pi)^-1 int exp(-i k theta.y) V u dy`.
//!
//! Matrices are stored relative to the free problem: `S = I + K` with
//! `K_{lm,col} = i^l int V u_col j_l(k|w|) Y_lm(w_hat) dw`, which is the
//! identity at `V = 0`. The operator mapping incoming to outgoing amplitudes
//! is `-Pi S` with `Pi = diag((-1)^l)`; see [`ScatteringMatrixData::outgoing_map`].
//!
//! The limiting-absorption resolvent convolves with the outgoing kernel
//! truncated to a ball of radius `R`, whose Fourier transform is known in
//! closed form. By default the convolution runs on the doubled box with
//! `R = 2L`, so it equals the free-space convolution on the whole inner
//! half-box for sources that are negligible outside it. The damped multiplier
//! is kept as an alternative.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgo::CgoSolution;
use crate::error::{Error, Result};
use crate::field::{apply_multiplier, forward_transform, inverse_transform, ComplexField};
use crate::grid::{dot, norm, Grid, Lattice};
use crate::io::{write_complex_block, Reader};
use crate::krylov::{gmres, GmresConfig};
use crate::potential::Potential;
use crate::sample::Descriptor;
use crate::sphere::{
    gauss_legendre, harmonic_count, harmonic_degree, real_harmonics, spherical_bessel, SphereQuadrature,
};
use crate::sum::{pairwise_sum_complex, pairwise_sum_complex_by};

const C0: Complex64 = Complex64::new(0.0, 0.0);

fn i_pow(l: usize) -> Complex64 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][l % 4]
}

fn check_energy(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("energy must be positive, got {lambda}")));
    }
    Ok(lambda.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalHarmonicCoeffs {
    pub lambda: f64,
    pub k_max: usize,
    pub coeffs: Vec<Complex64>,
}

impl SphericalHarmonicCoeffs {
    pub fn new(lambda: f64, k_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_energy(lambda)?;
        if coeffs.len() != harmonic_count(k_max) {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients for degree {k_max}, got {}",
                harmonic_count(k_max),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(SphericalHarmonicCoeffs { lambda, k_max, coeffs })
    }

    pub fn zeros(lambda: f64, k_max: usize) -> Result<Self> {
        Self::new(lambda, k_max, vec![C0; harmonic_count(k_max)])
    }

    /// The single harmonic with flat index `idx`.
    pub fn unit(lambda: f64, k_max: usize, idx: usize) -> Result<Self> {
        let mut c = vec![C0; harmonic_count(k_max)];
        if idx >= c.len() {
            return Err(Error::InvalidArgument(format!("harmonic index {idx} out of range")));
        }
        c[idx] = Complex64::new(1.0, 0.0);
        Self::new(lambda, k_max, c)
    }

    pub fn conj(&self) -> Self {
        SphericalHarmonicCoeffs {
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
            ..self.clone()
        }
    }

    /// `g(-theta)`: degree `l` picks up `(-1)^l`.
    pub fn antipodal(&self) -> Self {
        SphericalHarmonicCoeffs {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if harmonic_degree(i).0.is_multiple_of(2) { *c } else { -c })
                .collect(),
            ..self.clone()
        }
    }

    pub fn eval(&self, dir: crate::grid::Vec3) -> Complex64 {
        let y = real_harmonics(self.k_max, dir);
        pairwise_sum_complex(&self.coeffs.iter().zip(&y).map(|(c, y)| c * y).collect::<Vec<_>>())
    }

    /// `<a, b> = int a conj(b)` over the sphere, over the common degrees.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let n = self.coeffs.len().min(other.coeffs.len());
        pairwise_sum_complex_by(n, &|i| self.coeffs[i] * other.coeffs[i].conj())
    }

    pub fn truncated(&self, k_max: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(harmonic_count(k_max), C0);
        SphericalHarmonicCoeffs {
            lambda: self.lambda,
            k_max,
            coeffs,
        }
    }

    fn combine(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let k_max = self.k_max.max(other.k_max);
        let (a, b) = (self.truncated(k_max), other.truncated(k_max));
        SphericalHarmonicCoeffs {
            lambda: self.lambda,
            k_max,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(*x, *y)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }
}

/// `+` is outgoing (`lambda + i0`, radial phase `exp(+i k |w|)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn conj_if_minus(self, z: Complex64) -> Complex64 {
        match self {
            Sign::Plus => z,
            Sign::Minus => z.conj(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ResolventMethod {
    /// Outgoing kernel cut off at `radius`. With `padded` the convolution
    /// runs on the doubled box and the default radius is `2L`, which makes
    /// it exact on the whole inner half-box; otherwise the default is `L`.
    Truncated { radius: Option<f64>, padded: bool },
    /// `(|xi|^2 - lambda -+ i eps)^-1` on the periodic lattice, optionally
    /// Richardson-extrapolated from `eps` and `eps / 2`.
    Damped { eps: Option<f64>, richardson: bool },
}

impl Default for ResolventMethod {
    fn default() -> Self {
        ResolventMethod::Truncated {
            radius: None,
            padded: true,
        }
    }
}

/// Fourier transform of `exp(ikr) / (4 pi r) 1{r < R}` at `|xi| = s`.
pub fn truncated_kernel_symbol(k: f64, radius: f64, s: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, k * radius);
    if s > 1e-3 && (s - k).abs() > 0.05 * k {
        let ik = Complex64::new(0.0, k);
        let num = 1.0 + e * (ik * (s * radius).sin() / s - (s * radius).cos());
        return num / (s * s - k * k);
    }
    // (1/s) int_0^R exp(ikr) sin(sr) dr by Gauss-Legendre where the closed
    // form cancels
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = NODES.get_or_init(|| gauss_legendre(64));
    let half = radius / 2.0;
    let terms: Vec<Complex64> = x
        .iter()
        .zip(w)
        .map(|(x, w)| {
            let r = half * (x + 1.0);
            let sinc = if s * r == 0.0 { r } else { (s * r).sin() / s };
            Complex64::from_polar(w * half * sinc, k * r)
        })
        .collect();
    pairwise_sum_complex(&terms)
}

/// `R0(lambda +- i0)` bound to a grid, with its multiplier precomputed.
#[derive(Clone, Debug)]
pub struct ResolventPlan {
    grid: Grid,
    /// Doubled box when the kernel is zero-padded.
    work: Option<Grid>,
    lambda: f64,
    sign: Sign,
    multiplier: Vec<Complex64>,
}

impl ResolventPlan {
    pub fn new(grid: &Grid, lambda: f64, sign: Sign, method: ResolventMethod) -> Result<Self> {
        let k = check_energy(lambda)?;
        let (work, multiplier) = match method {
            ResolventMethod::Truncated { radius, padded } => {
                let work = if padded {
                    Some(Grid::new(2.0 * grid.half_width(), 2 * grid.points_per_axis(), *grid.frame())?)
                } else {
                    None
                };
                let on = work.as_ref().unwrap_or(grid);
                let r = radius.unwrap_or(on.half_width());
                if !(r > 0.0) {
                    return Err(Error::InvalidArgument("kernel radius must be positive".into()));
                }
                let m = (0..on.len())
                    .into_par_iter()
                    .map(|i| sign.conj_if_minus(truncated_kernel_symbol(k, r, norm(on.freq_local(i, Lattice::Standard)))))
                    .collect();
                (work, m)
            }
            ResolventMethod::Damped { eps, richardson } => {
                let eps = eps.unwrap_or(k * grid.dual_spacing() / 4.0);
                if !(eps > 0.0) {
                    return Err(Error::InvalidArgument("damping must be positive".into()));
                }
                let m = (0..grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let xi = grid.freq_local(i, Lattice::Standard);
                        let d = |e: f64| Complex64::new(dot(xi, xi) - lambda, -e).inv();
                        let v = if richardson { 2.0 * d(eps / 2.0) - d(eps) } else { d(eps) };
                        sign.conj_if_minus(v)
                    })
                    .collect();
                (None, m)
            }
        };
        Ok(ResolventPlan {
            grid: grid.clone(),
            work,
            lambda,
            sign,
            multiplier,
        })
    }

    fn convolve(&self, f: &ComplexField) -> Result<ComplexField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let src = match &self.work {
            Some(big) => embed(f, big),
            None => f.clone(),
        };
        let mut spec = forward_transform(&src, Lattice::Standard);
        spec.values_mut()
            .par_iter_mut()
            .zip(self.multiplier.par_iter())
            .for_each(|(v, m)| *v *= m);
        Ok(inverse_transform(&spec))
    }

    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        let out = self.convolve(f)?;
        Ok(match &self.work {
            Some(_) => restrict(&out, &self.grid),
            None => out,
        })
    }

    /// `(Delta - lambda) R0 f`, differentiated on the grid the convolution
    /// used, so the periodic spectral derivative is consistent.
    pub fn helmholtz_of(&self, f: &ComplexField) -> Result<ComplexField> {
        let out = self.convolve(f)?;
        let d = helmholtz(self.lambda, 0.0, self.sign, &out);
        Ok(match &self.work {
            Some(_) => restrict(&d, &self.grid),
            None => d,
        })
    }
}

pub fn free_resolvent(lambda: f64, sign: Sign, f: &ComplexField, method: ResolventMethod) -> Result<ComplexField> {
    ResolventPlan::new(f.grid(), lambda, sign, method)?.apply(f)
}

/// Zero extension onto the doubled box; nodes coincide since the spacing is
/// unchanged.
fn embed(f: &ComplexField, big: &Grid) -> ComplexField {
    let n = f.grid().points_per_axis();
    let off = n / 2;
    let mut out = vec![C0; big.len()];
    let src = f.samples();
    for i in 0..n {
        for j in 0..n {
            let from = f.grid().index(i, j, 0);
            let to = big.index(i + off, j + off, off);
            out[to..to + n].copy_from_slice(&src[from..from + n]);
        }
    }
    ComplexField::from_samples(big, out).expect("finite input")
}

fn restrict(f: &ComplexField, small: &Grid) -> ComplexField {
    let n = small.points_per_axis();
    let off = n / 2;
    let mut out = vec![C0; small.len()];
    let src = f.samples();
    for i in 0..n {
        for j in 0..n {
            let to = small.index(i, j, 0);
            let from = f.grid().index(i + off, j + off, off);
            out[to..to + n].copy_from_slice(&src[from..from + n]);
        }
    }
    ComplexField::from_samples(small, out).expect("finite input")
}

/// `(Delta - lambda -+ i eps) f` spectrally on the standard lattice.
pub fn helmholtz(lambda: f64, eps: f64, sign: Sign, f: &ComplexField) -> ComplexField {
    apply_multiplier(f, Lattice::Standard, |xi| {
        sign.conj_if_minus(Complex64::new(dot(xi, xi) - lambda, -eps))
    })
}

fn poisson_constant(k: f64) -> Complex64 {
    Complex64::new(0.0, -k / (2.0 * PI))
}

/// Free incoming Poisson operator `c int exp(-i k w.omega) g(omega) d omega`,
/// evaluated exactly through `4 pi (-i)^l j_l(k|w|) Y_lm(w_hat)`.
pub fn free_poisson(lambda: f64, g: &SphericalHarmonicCoeffs, grid: &Grid) -> Result<ComplexField> {
    let k = check_energy(lambda)?;
    let c = poisson_constant(k) * 4.0 * PI;
    let weights: Vec<Complex64> = g
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, gi)| c * i_pow(3 * harmonic_degree(i).0) * gi)
        .collect();
    if weights.iter().all(|w| *w == C0) {
        return Ok(ComplexField::zeros(grid));
    }
    Ok(ComplexField::from_fn(grid, |w| {
        let r = norm(w);
        let y = real_harmonics(g.k_max, w);
        let j = spherical_bessel(g.k_max, k * r);
        let terms: Vec<Complex64> = weights
            .iter()
            .enumerate()
            .map(|(i, wt)| wt * j[harmonic_degree(i).0] * y[i])
            .collect();
        pairwise_sum_complex(&terms)
    }))
}

/// Direct product-rule evaluation of the same integral; the rule must be
/// exact to degree `2 k_max + 2`.
pub fn free_poisson_quadrature(
    lambda: f64,
    g: &SphericalHarmonicCoeffs,
    grid: &Grid,
    rule: &SphereQuadrature,
) -> Result<ComplexField> {
    let k = check_energy(lambda)?;
    rule.require(2 * g.k_max + 2)?;
    let c = poisson_constant(k);
    let gvals: Vec<Complex64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| g.eval(*p) * *w)
        .collect();
    Ok(ComplexField::from_fn(grid, |w| {
        let terms: Vec<Complex64> = rule
            .nodes
            .iter()
            .zip(&gvals)
            .map(|(p, gv)| gv * Complex64::from_polar(1.0, -k * dot(w, *p)))
            .collect();
        c * pairwise_sum_complex(&terms)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    pub resolvent: ResolventMethod,
    pub gmres: GmresConfig,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            resolvent: ResolventMethod::default(),
            gmres: GmresConfig {
                tol: 1e-10,
                ..GmresConfig::default()
            },
        }
    }
}

/// A generalized eigenfunction with its free part.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub sign: Sign,
    pub free: ComplexField,
    pub u: ComplexField,
    pub iterations: usize,
    pub krylov_residual: f64,
}

fn solve_ls(
    potential: &Potential,
    plan: &ResolventPlan,
    rhs: &ComplexField,
    cfg: &ScatteringConfig,
) -> Result<(ComplexField, usize, f64)> {
    let grid = potential.grid();
    let vf = potential.field();
    if potential.is_zero() {
        return Ok((rhs.clone(), 0, 0.0));
    }
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let xf = ComplexField::from_samples(grid, x.to_vec()).expect("solver iterate stays finite");
        let rv = plan.apply(&vf.mul(&xf).expect("same grid")).expect("same grid");
        x.iter().zip(rv.samples()).map(|(a, b)| a + b).collect()
    };
    let out = gmres(&apply, rhs.samples(), None, &cfg.gmres)?;
    Ok((ComplexField::from_samples(grid, out.x)?, out.iterations, out.residual))
}

/// `P+(lambda) g` (incoming data `g`) for `Sign::Plus`; `P-(lambda) g`
/// (outgoing data `g`) for `Sign::Minus`, so that `conj(P- g) = P+ conj(g)`.
pub fn poisson(
    potential: &Potential,
    lambda: f64,
    g: &SphericalHarmonicCoeffs,
    sign: Sign,
    cfg: &ScatteringConfig,
) -> Result<PoissonSolution> {
    let grid = potential.grid();
    let free = match sign {
        Sign::Plus => free_poisson(lambda, g, grid)?,
        Sign::Minus => free_poisson(lambda, &g.conj(), grid)?.conj(),
    };
    let plan = ResolventPlan::new(grid, lambda, sign, cfg.resolvent)?;
    poisson_with_plan(potential, &plan, free, cfg)
}

fn poisson_with_plan(potential: &Potential, plan: &ResolventPlan, free: ComplexField, cfg: &ScatteringConfig) -> Result<PoissonSolution> {
    let sign = plan.sign;
    let (u, iterations, krylov_residual) = solve_ls(potential, plan, &free, cfg)?;
    Ok(PoissonSolution {
        sign,
        free,
        u,
        iterations,
        krylov_residual,
    })
}

/// `u = R(lambda -+ i0) f` for `H`, by `(I + R0 V) u = R0 f`.
pub fn full_resolvent(
    potential: &Potential,
    lambda: f64,
    sign: Sign,
    f: &ComplexField,
    cfg: &ScatteringConfig,
) -> Result<ComplexField> {
    let plan = ResolventPlan::new(potential.grid(), lambda, sign, cfg.resolvent)?;
    let rhs = plan.apply(f)?;
    Ok(solve_ls(potential, &plan, &rhs, cfg)?.0)
}

fn masked_l2(f: &ComplexField, mask: &[bool]) -> f64 {
    let s = f.samples();
    let sum = crate::sum::pairwise_sum_by(s.len(), &|i| if mask[i] { s[i].norm_sqr() } else { 0.0 });
    (sum * f.grid().cell_volume()).sqrt()
}

/// `|(Delta + V - lambda) u| / |u|` on the inner half-box `|w_i| <= L/2`.
/// The free part solves the Helmholtz equation exactly. The scattered part is
/// split as `-R0 (V u) + e`, where `e` is the Lippmann-Schwinger defect left by
/// the iterative solve; both pieces are differentiated spectrally.
pub fn pde_residual(potential: &Potential, lambda: f64, sol: &PoissonSolution, method: ResolventMethod) -> Result<f64> {
    let grid = potential.grid();
    let plan = ResolventPlan::new(grid, lambda, sol.sign, method)?;
    let vu = potential.field().mul(&sol.u)?;
    let defect = sol.u.sub(&sol.free)?.add(&plan.apply(&vu)?)?;
    let r = vu
        .sub(&plan.helmholtz_of(&vu)?)?
        .add(&helmholtz(lambda, 0.0, sol.sign, &defect))?;
    let mask = half_box_mask(grid);
    Ok(masked_l2(&r, &mask) / masked_l2(&sol.u, &mask))
}

fn half_box_mask(grid: &Grid) -> Vec<bool> {
    let b = grid.half_width() / 2.0;
    (0..grid.len())
        .map(|i| grid.node_local(i).iter().all(|c| c.abs() <= b))
        .collect()
}

/// `j_l(k|w|) Y_lm(w_hat)` for every harmonic of degree `<= k_max`, as
/// `basis[idx][node]`.
fn bessel_harmonics(grid: &Grid, k: f64, k_max: usize) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let w = grid.node_world(i);
            let y = real_harmonics(k_max, w);
            let j = spherical_bessel(k_max, k * norm(w));
            y.iter().enumerate().map(|(idx, y)| j[harmonic_degree(idx).0] * y).collect()
        })
        .collect();
    (0..harmonic_count(k_max))
        .map(|idx| rows.iter().map(|r| r[idx]).collect())
        .collect()
}

/// Sphere amplitude `(4 pi)^-1 int exp(-+ i k theta.y) h(y) dy` of
/// `R0(lambda +- i0) h`, in harmonics of degree `<= k_max`.
pub fn source_amplitude(lambda: f64, sign: Sign, h: &ComplexField, k_max: usize) -> Result<SphericalHarmonicCoeffs> {
    let k = check_energy(lambda)?;
    let basis = bessel_harmonics(h.grid(), k, k_max);
    Ok(amplitude_from_basis(lambda, sign, h, k_max, &basis))
}

fn amplitude_from_basis(
    lambda: f64,
    sign: Sign,
    h: &ComplexField,
    k_max: usize,
    basis: &[Vec<f64>],
) -> SphericalHarmonicCoeffs {
    let s = h.samples();
    let h3 = h.grid().cell_volume();
    let coeffs = basis
        .iter()
        .enumerate()
        .map(|(idx, b)| {
            let l = harmonic_degree(idx).0;
            let phase = match sign {
                Sign::Plus => i_pow(3 * l),
                Sign::Minus => i_pow(l),
            };
            phase * pairwise_sum_complex_by(s.len(), &|i| s[i] * b[i]) * h3
        })
        .collect();
    SphericalHarmonicCoeffs {
        lambda,
        k_max,
        coeffs,
    }
}

/// Incoming (`exp(-ikr)`) and outgoing (`exp(+ikr)`) amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticData {
    pub incoming: SphericalHarmonicCoeffs,
    pub outgoing: SphericalHarmonicCoeffs,
}

impl AsymptoticData {
    /// Amplitudes of a Poisson solution, extracted to degree `k_max`.
    pub fn of_poisson(
        potential: &Potential,
        lambda: f64,
        g: &SphericalHarmonicCoeffs,
        sol: &PoissonSolution,
        k_max: usize,
    ) -> Result<Self> {
        let vu = potential.field().mul(&sol.u)?;
        let scattered = source_amplitude(lambda, sol.sign, &vu, k_max)?;
        let reflected = g.antipodal().truncated(k_max);
        let data = reflected.add(&scattered);
        let minus_data = SphericalHarmonicCoeffs {
            coeffs: data.coeffs.iter().map(|c| -c).collect(),
            ..data
        };
        let given = g.truncated(k_max);
        Ok(match sol.sign {
            Sign::Plus => AsymptoticData {
                incoming: given,
                outgoing: minus_data,
            },
            Sign::Minus => AsymptoticData {
                incoming: minus_data,
                outgoing: given,
            },
        })
    }

    /// Amplitudes of `u = R(lambda -+ i0) f`, from `u = R0 (f - V u)`.
    pub fn of_resolvent(potential: &Potential, lambda: f64, sign: Sign, f: &ComplexField, u: &ComplexField, k_max: usize) -> Result<Self> {
        let source = f.sub(&potential.field().mul(u)?)?;
        let amp = source_amplitude(lambda, sign, &source, k_max)?;
        let zero = SphericalHarmonicCoeffs::zeros(lambda, k_max)?;
        Ok(match sign {
            Sign::Plus => AsymptoticData {
                incoming: zero,
                outgoing: amp,
            },
            Sign::Minus => AsymptoticData {
                incoming: amp,
                outgoing: zero,
            },
        })
    }
}

/// One side of a boundary pairing: `u`, its source `(H - lambda) u` (absent
/// for eigenfunctions) and its asymptotic amplitudes.
#[derive(Clone, Debug)]
pub struct PairingSide {
    pub u: ComplexField,
    pub source: Option<ComplexField>,
    pub asymptotics: AsymptoticData,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

impl PairingResult {
    /// `|lhs - rhs| / (|lhs| + |rhs| + 1)`
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).norm() / (self.lhs.norm() + self.rhs.norm() + 1.0)
    }
}

fn grid_inner(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.check_same_grid(b)?;
    let (x, y) = (a.samples(), b.samples());
    Ok(pairwise_sum_complex_by(x.len(), &|i| x[i] * y[i].conj()) * a.grid().cell_volume())
}

/// `lhs = <u+, f-> - <f+, u->` by grid quadrature and
/// `rhs = 2 i sqrt(lambda) (<g++, g-+> - <g+-, g-->)` from the amplitudes.
pub fn boundary_pairing(plus: &PairingSide, minus: &PairingSide, lambda: f64) -> Result<PairingResult> {
    let k = check_energy(lambda)?;
    let mut lhs = C0;
    if let Some(f) = &minus.source {
        lhs += grid_inner(&plus.u, f)?;
    }
    if let Some(f) = &plus.source {
        lhs -= grid_inner(f, &minus.u)?;
    }
    let rhs = Complex64::new(0.0, 2.0 * k)
        * (plus.asymptotics.outgoing.inner(&minus.asymptotics.outgoing)
            - plus.asymptotics.incoming.inner(&minus.asymptotics.incoming));
    Ok(PairingResult { lhs, rhs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMatrixData {
    pub lambda: f64,
    pub k_max: usize,
    /// Row-major, side `(k_max + 1)^2`, relative to the free problem.
    pub matrix: Vec<Complex64>,
    /// Far-field normalization `kappa` fixed by the Born calibration.
    pub kappa: f64,
    /// `|S^* S - I|_2` of the stored matrix.
    pub unitarity_defect: f64,
    pub points_per_axis: usize,
    pub half_width: f64,
}

impl ScatteringMatrixData {
    pub fn side(&self) -> usize {
        harmonic_count(self.k_max)
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.side() + col]
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        let n = self.side();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn apply(&self, g: &SphericalHarmonicCoeffs) -> SphericalHarmonicCoeffs {
        let n = self.side();
        let g = g.truncated(self.k_max);
        let coeffs = (0..n)
            .map(|i| pairwise_sum_complex_by(n, &|j| self.entry(i, j) * g.coeffs[j]))
            .collect();
        SphericalHarmonicCoeffs {
            lambda: self.lambda,
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Incoming-to-outgoing amplitude map `-Pi S`.
    pub fn outgoing_map(&self, g: &SphericalHarmonicCoeffs) -> SphericalHarmonicCoeffs {
        let s = self.apply(g).antipodal();
        SphericalHarmonicCoeffs {
            coeffs: s.coeffs.iter().map(|c| -c).collect(),
            ..s
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let d = m.adjoint() * m - DMatrix::identity(n, n);
    d.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Calibration target: a weak off-center Gaussian.
pub fn calibration_descriptor() -> Descriptor {
    Descriptor::Gaussian {
        amplitude: 0.05,
        sigma: 1.0,
        center: [0.4, -0.3, 0.2],
    }
}

/// Closed-form Born matrix
/// `K_ab = -i k / (8 pi^2) int int Y_a(theta) V^(k(omega - theta)) Y_b(omega)`
/// with `V^(xi) = int exp(-i xi.w) V`, by a product rule exact to `degree`.
pub fn born_matrix(descriptor: &Descriptor, lambda: f64, k_max: usize, degree: usize) -> Result<DMatrix<Complex64>> {
    let k = check_energy(lambda)?;
    let rule = SphereQuadrature::for_degree(degree);
    rule.require(2 * k_max)?;
    let q = rule.nodes.len();
    let n = harmonic_count(k_max);
    let mut transform = Vec::with_capacity(q * q);
    for th in &rule.nodes {
        for om in &rule.nodes {
            let xi = [k * (om[0] - th[0]), k * (om[1] - th[1]), k * (om[2] - th[2])];
            let neg = [-xi[0], -xi[1], -xi[2]];
            let v = descriptor
                .fourier_transform(neg)
                .ok_or_else(|| Error::InvalidArgument("calibration needs a closed-form transform".into()))?;
            transform.push(v);
        }
    }
    let t = DMatrix::from_row_slice(q, q, &transform);
    let y = DMatrix::from_fn(q, n, |p, idx| {
        Complex64::new(rule.weights[p] * real_harmonics(k_max, rule.nodes[p])[idx], 0.0)
    });
    let pref = Complex64::new(0.0, -k / (8.0 * PI * PI));
    Ok((y.transpose() * t * y) * pref)
}

/// Extraction `K_{a,col} = i^l int V u_col j_l Y_a` for fields `u_col`.
fn extract(potential: &Potential, lambda: f64, k_max: usize, basis: &[Vec<f64>], fields: &[ComplexField]) -> Result<DMatrix<Complex64>> {
    let n = harmonic_count(k_max);
    let cols: Vec<SphericalHarmonicCoeffs> = fields
        .iter()
        .map(|u| {
            let vu = potential.field().mul(u)?;
            Ok(amplitude_from_basis(lambda, Sign::Minus, &vu, k_max, basis))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| cols[j].coeffs[i]))
}

fn unit_columns(lambda: f64, k_max: usize) -> Result<Vec<SphericalHarmonicCoeffs>> {
    (0..harmonic_count(k_max))
        .map(|j| SphericalHarmonicCoeffs::unit(lambda, k_max, j))
        .collect()
}

/// `P+(lambda) Y_lm` for every harmonic of degree `<= k_max`.
pub fn poisson_columns(potential: &Potential, lambda: f64, k_max: usize, cfg: &ScatteringConfig) -> Result<Vec<ComplexField>> {
    let grid = potential.grid();
    let plan = ResolventPlan::new(grid, lambda, Sign::Plus, cfg.resolvent)?;
    unit_columns(lambda, k_max)?
        .par_iter()
        .map(|g| {
            let free = free_poisson(lambda, g, grid)?;
            Ok(poisson_with_plan(potential, &plan, free, cfg)?.u)
        })
        .collect()
}

pub fn scattering_matrix(potential: &Potential, lambda: f64, k_max: usize, cfg: &ScatteringConfig) -> Result<ScatteringMatrixData> {
    Ok(scattering_matrix_with_columns(potential, lambda, k_max, cfg)?.0)
}

/// The scattering matrix together with the `P+ Y_lm` fields it was built from.
pub fn scattering_matrix_with_columns(
    potential: &Potential,
    lambda: f64,
    k_max: usize,
    cfg: &ScatteringConfig,
) -> Result<(ScatteringMatrixData, Vec<ComplexField>)> {
    let k = check_energy(lambda)?;
    let grid = potential.grid();
    let n = harmonic_count(k_max);
    let basis = bessel_harmonics(grid, k, k_max);

    // free matrix: the extraction run on V = 0, forced to the identity
    let zero = Potential::zero(grid, potential.gamma0())?;
    let free_fields = poisson_columns(&zero, lambda, k_max, cfg)?;
    let s_free = DMatrix::identity(n, n) - extract(&zero, lambda, k_max, &basis, &free_fields)?;

    // kappa: grid Born extraction against the closed-form Born matrix
    let reference = Potential::from_descriptor(&calibration_descriptor(), grid, 3.0)?;
    let born_grid = extract(&reference, lambda, k_max, &basis, &free_fields)?;
    let born_exact = born_matrix(&calibration_descriptor(), lambda, k_max, 4 * k_max + 24)?;
    let num: Complex64 = born_grid.iter().zip(born_exact.iter()).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = born_grid.iter().map(|a| a.norm_sqr()).sum();
    let ratio = num.re / den;

    let fields = poisson_columns(potential, lambda, k_max, cfg)?;
    let kmat = extract(potential, lambda, k_max, &basis, &fields)?;
    let s = s_free + kmat * Complex64::new(ratio, 0.0);
    let data = ScatteringMatrixData {
        lambda,
        k_max,
        matrix: (0..n * n).map(|q| s[(q / n, q % n)]).collect(),
        kappa: ratio / (4.0 * PI),
        unitarity_defect: unitarity_defect(&s),
        points_per_axis: grid.points_per_axis(),
        half_width: grid.half_width(),
    };
    Ok((data, fields))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub k_max: usize,
    pub residual: f64,
    pub rank: usize,
    pub columns: usize,
}

/// Relative residual of the weighted least-squares projection of the CGO
/// eigenfunction onto `span{P+ Y_lm : l <= k_max}`, with
/// weight `exp(-gamma' <w>)`, `gamma' = gamma0 / 2`, over the inner half-box.
pub fn density_residual(
    potential: &Potential,
    lambda: f64,
    target: &CgoSolution,
    k_max: usize,
    cfg: &ScatteringConfig,
) -> Result<DensityReport> {
    let u = target.eigenfunction();
    let members = poisson_columns(potential, lambda, k_max, cfg)?;
    project(&u, &members, potential.gamma0() / 2.0, k_max)
}

/// Weighted least-squares projection of `target` onto `members` over the
/// inner half-box. Rank deficiency is reported, not fatal.
pub fn project(target: &ComplexField, members: &[ComplexField], gamma: f64, k_max: usize) -> Result<DensityReport> {
    let grid = target.grid();
    let mask = half_box_mask(grid);
    let rows: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
    let wts: Vec<f64> = rows
        .iter()
        .map(|&i| (-gamma * crate::field::japanese_bracket(grid.node_local(i))).exp())
        .collect();
    let a = DMatrix::from_fn(rows.len(), members.len(), |r, c| members[c].samples()[rows[r]] * wts[r]);
    let b = DMatrix::from_fn(rows.len(), 1, |r, _| target.samples()[rows[r]] * wts[r]);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = smax * 1e-12;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let x = svd
        .solve(&b, tol)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let r = &a * x - &b;
    Ok(DensityReport {
        k_max,
        residual: r.norm() / b.norm(),
        rank,
        columns: members.len(),
    })
}

pub const SMATRIX_MAGIC: &[u8; 4] = b"CGOS";
pub const SMATRIX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SmatrixHeader {
    lambda: f64,
    k_max: usize,
    kappa: f64,
    unitarity_defect: f64,
    points_per_axis: usize,
    half_width: f64,
}

/// Magic, version, JSON header length and header, then the matrix as
/// interleaved little-endian `f64` pairs.
pub fn write_smatrix(s: &ScatteringMatrixData) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&SmatrixHeader {
        lambda: s.lambda,
        k_max: s.k_max,
        kappa: s.kappa,
        unitarity_defect: s.unitarity_defect,
        points_per_axis: s.points_per_axis,
        half_width: s.half_width,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + 16 * s.matrix.len());
    out.extend_from_slice(SMATRIX_MAGIC);
    out.extend_from_slice(&SMATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    write_complex_block(&mut out, &s.matrix);
    Ok(out)
}

pub fn read_smatrix(bytes: &[u8]) -> Result<ScatteringMatrixData> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != SMATRIX_MAGIC {
        return Err(Error::BadMagic { expected: "CGOS" });
    }
    let version = r.u32()?;
    if version != SMATRIX_VERSION {
        return Err(Error::BadVersion(version));
    }
    let len = r.u32()? as usize;
    let h: SmatrixHeader = serde_json::from_slice(r.take(len)?)?;
    let n = harmonic_count(h.k_max);
    let matrix = r.complex_block(n * n)?;
    Ok(ScatteringMatrixData {
        lambda: h.lambda,
        k_max: h.k_max,
        matrix,
        kappa: h.kappa,
        unitarity_defect: h.unitarity_defect,
        points_per_axis: h.points_per_axis,
        half_width: h.half_width,
    })
}

pub fn save_smatrix(path: &Path, s: &ScatteringMatrixData) -> Result<()> {
    std::fs::write(path, write_smatrix(s)?)?;
    Ok(())
}

pub fn load_smatrix(path: &Path) -> Result<ScatteringMatrixData> {
    read_smatrix(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;

    #[test]
    fn kernel_symbol_is_continuous_across_branches() {
        let (k, r) = (1.0, 8.0);
        for s in [1e-3, 0.95, 1.05] {
            let a = truncated_kernel_symbol(k, r, s * (1.0 - 1e-9));
            let b = truncated_kernel_symbol(k, r, s * (1.0 + 1e-9));
            assert!((a - b).norm() < 1e-6 * a.norm().max(1.0), "{s}: {a} {b}");
        }
        // s -> 0: int_0^R r exp(ikr) dr
        let e = Complex64::from_polar(1.0, k * r);
        let ik = Complex64::new(0.0, k);
        let expect = (e * (1.0 - ik * r) - 1.0) / (k * k);
        assert!((truncated_kernel_symbol(k, r, 0.0) - expect).norm() < 1e-12);
    }

    #[test]
    fn damped_resolvent_inverts_helmholtz() {
        let g = Grid::new(4.0, 12, Frame::identity()).unwrap();
        let mut r = crate::rng::stream(1, "res", 0);
        let f = crate::rng::random_field(&g, &mut r);
        for sign in [Sign::Plus, Sign::Minus] {
            let m = ResolventMethod::Damped { eps: Some(0.1), richardson: false };
            let u = free_resolvent(1.0, sign, &f, m).unwrap();
            let back = helmholtz(1.0, 0.1, sign, &u);
            assert!(back.sub(&f).unwrap().l2() <= 1e-10 * f.l2());
        }
    }

    #[test]
    fn minus_resolvent_conjugates_plus() {
        let g = Grid::new(4.0, 12, Frame::identity()).unwrap();
        let f = ComplexField::from_fn(&g, |w| Complex64::new((-dot(w, w)).exp(), 0.0));
        for m in [ResolventMethod::default(), ResolventMethod::Damped { eps: None, richardson: true }] {
            let p = free_resolvent(1.0, Sign::Plus, &f, m).unwrap();
            let q = free_resolvent(1.0, Sign::Minus, &f, m).unwrap();
            assert!(q.sub(&p.conj()).unwrap().l2() <= 1e-13 * p.l2());
        }
    }

    #[test]
    fn coefficient_helpers() {
        let g = SphericalHarmonicCoeffs::new(1.0, 1, vec![Complex64::new(1.0, 2.0); 4]).unwrap();
        let a = g.antipodal();
        assert_eq!(a.coeffs[0], g.coeffs[0]);
        assert_eq!(a.coeffs[2], -g.coeffs[2]);
        assert!((g.inner(&g) - Complex64::new(20.0, 0.0)).norm() < 1e-14);
        assert!(SphericalHarmonicCoeffs::new(1.0, 2, vec![C0; 4]).is_err());
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let z = SphericalHarmonicCoeffs::zeros(1.0, 3).unwrap();
        assert!(free_poisson(1.0, &z, &g).unwrap().is_zero());
    }

    #[test]
    fn smatrix_bytes_round_trip() {
        let s = ScatteringMatrixData {
            lambda: 1.0,
            k_max: 1,
            matrix: (0..16).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect(),
            kappa: 1.0 / (4.0 * PI),
            unitarity_defect: 1e-7,
            points_per_axis: 48,
            half_width: 8.0,
        };
        let back = read_smatrix(&write_smatrix(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let mut bad = write_smatrix(&s).unwrap();
        bad[0] = b'X';
        assert!(matches!(read_smatrix(&bad), Err(Error::BadMagic { .. })));
    }
}
