//! The acceptance criteria as runnable checks. Shared by `cgo verify` and the
//! `acceptance` test target; every tolerance is pinned here.
//!
//! Reference configuration: `L = 8`, `N = 48`, `lambda = 1`, `gamma0 = 3`,
//! Gaussian `A = 0.1`, `sigma = 1`, unless a criterion names another.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use cgo_core::cgo::solve_cgo;
use cgo_core::faddeev::{analyticity_probe, apply_g0, norm_decay_probe, ComplexMomentum, FaddeevOperator};
use cgo_core::field::{forward_transform, inverse_transform, ComplexField};
use cgo_core::grid::{dot, norm, Frame, Grid, Lattice};
use cgo_core::krylov::GmresConfig;
use cgo_core::oracle;
use cgo_core::potential::{working_gamma, Potential};
use cgo_core::recon::{
    lowfreq_complete, recover_fourier, rho_param, shell_bounds, shell_scan, uniqueness_experiment, CompletionConfig,
    ReconFrame, ReconGrid, RecoverConfig, ShellPoint, ShellRecovery, ShellSpec, UniquenessConfig,
};
use cgo_core::rng;
use cgo_core::sample::{sample_function, Descriptor};
use cgo_core::scattering::{
    boundary_pairing, born_matrix, full_resolvent, poisson, poisson_columns, project, scattering_matrix, AsymptoticData,
    PairingSide, PoissonSolution, ScatteringConfig, Sign, SphericalHarmonicCoeffs,
};
use cgo_core::sphere::harmonic_count;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::run::{run_scenario, Command};
use crate::scenario::Scenario;

pub const MULTIPLIER_TOL: f64 = 1e-8;
pub const DENSE_TOL: f64 = 1e-8;
pub const DECAY_RATIO: f64 = 0.5;
pub const CR_RATIO: (f64, f64) = (3.0, 5.0);
pub const CR_ABS: f64 = 1e-5;
pub const FREE_S_TOL: f64 = 1e-10;
pub const UNITARITY_TOL: f64 = 1e-3;
pub const BORN_TOL: f64 = 0.02;
pub const PAIRING_TOL: f64 = 1e-4;
pub const SHELL_TOL: f64 = 0.05;
pub const COMPLETION_EXACT_TOL: f64 = 0.03;
pub const COMPLETION_NOISY_TOL: f64 = 0.10;
pub const UNIQUENESS_TOL: f64 = 0.05;
pub const BASELINE_TOL: f64 = 1e-10;

const L: f64 = 8.0;
const N: usize = 48;
const LAMBDA: f64 = 1.0;
const GAMMA0: f64 = 3.0;
const NU: [f64; 3] = [1.0, 0.0, 0.0];
const GAUSS: Descriptor = Descriptor::Gaussian {
    amplitude: 0.1,
    sigma: 1.0,
    center: [0.0; 3],
};
/// `A (2 pi)^{3/2} sigma^3 exp(-sigma^2 |zeta|^2 / 2)` at `|zeta| = 3`.
const TRANSFORM_AT_3: f64 = 0.0174958;
/// The same at `zeta = 0`.
const TRANSFORM_AT_0: f64 = 1.574961;

pub const NAMES: [&str; 13] = [
    "multiplier correctness",
    "dense-oracle equivalence",
    "norm decay",
    "analyticity probe",
    "CGO decay",
    "scattering sanity",
    "boundary pairing",
    "shell recovery",
    "t-convergence",
    "low-frequency completion",
    "uniqueness discrimination",
    "density trend",
    "reproducibility",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    format!("error: {e}")
}

/// Run the listed criteria (all when `only` is empty) in order, calling
/// `report` as each finishes.
pub fn run(only: &[u32], report: impl Fn(&Criterion)) -> Vec<Criterion> {
    (1..=13u32)
        .filter(|id| only.is_empty() || only.contains(id))
        .map(|id| {
            let c = criterion(id);
            report(&c);
            c
        })
        .collect()
}

pub fn criterion(id: u32) -> Criterion {
    let out = match id {
        1 => multiplier(),
        2 => dense(),
        3 => norm_decay(),
        4 => analyticity(),
        5 => cgo_decay(),
        6 => scattering_sanity(),
        7 => pairing(),
        8 => shell_recovery(),
        9 => t_convergence(),
        10 => completion(),
        11 => uniqueness(),
        12 => density(),
        13 => reproducibility(),
        _ => Err(format!("no criterion {id}")),
    };
    let (pass, detail) = out.unwrap_or_else(|e| (false, e));
    Criterion {
        id,
        name: NAMES.get(id as usize - 1).copied().unwrap_or("unknown").to_string(),
        pass,
        detail,
    }
}

fn grid(l: f64, n: usize) -> Grid {
    Grid::new(l, n, Frame::identity()).expect("valid grid")
}

fn gaussian(a: f64, center: [f64; 3]) -> Descriptor {
    Descriptor::Gaussian {
        amplitude: a,
        sigma: 1.0,
        center,
    }
}

fn truth(r: f64) -> f64 {
    0.1 * (2.0 * PI).powf(1.5) * (-r * r / 2.0).exp()
}

fn recon_cfg() -> RecoverConfig {
    RecoverConfig {
        grid: ReconGrid {
            half_width: L,
            points_per_axis: N,
        },
        gmres: GmresConfig::default(),
        screening: None,
    }
}

fn reference_pair() -> Result<(Potential, Potential), String> {
    let g = grid(L, N);
    Ok((
        Potential::from_descriptor(&GAUSS, &g, GAMMA0).map_err(err)?,
        Potential::zero(&g, GAMMA0).map_err(err)?,
    ))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Random field with every frequency outside two thirds of Nyquist removed.
fn band_limited(g: &Grid, seed: u64) -> ComplexField {
    let mut r = rng::stream(seed, "band-limited", 0);
    let f = rng::random_field(g, &mut r);
    let mut s = forward_transform(&f, Lattice::Standard);
    let cut = g.dual_spacing() * (g.points_per_axis() as f64 / 2.0) * (2.0 / 3.0);
    let grid = g.clone();
    for (idx, v) in s.values_mut().iter_mut().enumerate() {
        if grid.freq_local(idx, Lattice::Standard).iter().any(|c| c.abs() > cut) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse_transform(&s)
}

fn multiplier() -> Check {
    let g = grid(L, 16);
    let momenta = [
        (0.7, 0.5, [0.0, 1.3, -0.4]),
        (-0.3, -0.5, [0.0, 0.2, 0.9]),
        (1.1, 2.0, [0.0, -0.8, 0.0]),
        (0.0, -2.0, [0.0, 0.5, 0.5]),
        (-1.4, 0.5, [0.0, 0.0, 2.1]),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (k, (re, im, rp)) in momenta.into_iter().enumerate() {
        let rho = ComplexMomentum::new(NU, Complex64::new(re, im), rp).map_err(err)?;
        let op = FaddeevOperator::new(&g, &rho).map_err(err)?;
        for s in 0..10 {
            let f = band_limited(&g, 100 * k as u64 + s);
            let back = op.apply_p0_matched(&op.apply(&f).map_err(err)?).map_err(err)?;
            worst = worst.max(back.sub(&f).map_err(err)?.l2() / f.l2());
            count += 1;
        }
    }
    Ok((
        worst <= MULTIPLIER_TOL,
        format!("max |P0 G0 f - f|/|f| = {worst:.3e} over {count} fields (tol {MULTIPLIER_TOL:e})"),
    ))
}

fn dense() -> Check {
    let g = grid(4.0, 8);
    let rho = ComplexMomentum::new(NU, Complex64::new(0.3, 1.2), [0.0, 0.9, 0.5]).map_err(err)?;
    let mut r = rng::stream(11, "dense-oracle", 0);
    let f = rng::random_field(&g, &mut r);
    let m = oracle::dense_g0(&g, &rho).map_err(err)?;
    let slow = oracle::dense_apply(&m, &f).map_err(err)?;
    let e_g0 = apply_g0(&rho, &f).map_err(err)?.sub(&slow).map_err(err)?.l2() / slow.l2();

    let v = Potential::from_descriptor(&gaussian(0.5, [0.0; 3]), &g, GAMMA0).map_err(err)?;
    let rho2 = ComplexMomentum::new(NU, Complex64::new(0.0, 1.5), [0.0, 1.0, 0.0]).map_err(err)?;
    let tight = GmresConfig {
        tol: 1e-12,
        ..GmresConfig::default()
    };
    let fast = solve_cgo(&v, &rho2, &tight).map_err(err)?.v;
    let slow = oracle::dense_cgo(v.field(), &rho2).map_err(err)?;
    let e_cgo = fast.sub(&slow).map_err(err)?.l2() / slow.l2();

    let a = rng::random_field(&g, &mut r);
    let b = rng::random_field(&g, &mut r);
    let zeta = [3.0, 0.5, -1.0];
    let p_fast = cgo_core::recon::pairing_integral(&f, &a, &b, zeta, 2.0).map_err(err)?.value;
    let p_slow = oracle::brute_pairing(&f, &a, &b, zeta);
    let e_pair = (p_fast - p_slow).norm() / p_slow.norm();
    Ok((
        e_g0 <= DENSE_TOL && e_cgo <= DENSE_TOL && e_pair <= DENSE_TOL,
        format!("N=8 relative errors: G0 {e_g0:.2e}, CGO {e_cgo:.2e}, pairing {e_pair:.2e} (tol {DENSE_TOL:e})"),
    ))
}

fn norm_decay() -> Check {
    let g = grid(L, 24);
    let sweep = [5.0, 10.0, 20.0, 40.0]
        .iter()
        .map(|&s| ComplexMomentum::new(NU, Complex64::new(0.0, s), [0.0, 1.0, 0.0]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let out = norm_decay_probe(&g, &sweep, working_gamma(GAMMA0), 20, 7).map_err(err)?;
    let est: Vec<f64> = out.iter().map(|s| s.norm_estimate).collect();
    let ratio = est[3] / est[1];
    Ok((
        strictly_decreasing(&est) && ratio <= DECAY_RATIO,
        format!(
            "estimates over |z| = 5,10,20,40: {}; est(40)/est(10) = {ratio:.3} (max {DECAY_RATIO})",
            fmt_list(&est)
        ),
    ))
}

fn analyticity() -> Check {
    let g = grid(6.0, 16);
    let v = sample_function(&gaussian(0.5, [0.0; 3]), &g);
    let z0 = Complex64::new(0.4, 1.0);
    let coarse = analyticity_probe(z0, [0.0, 0.8, 0.0], &v, 2e-3, 3, 1).map_err(err)?;
    let fine = analyticity_probe(z0, [0.0, 0.8, 0.0], &v, 1e-3, 3, 1).map_err(err)?;
    let ratio = coarse.residual / fine.residual;
    Ok((
        (CR_RATIO.0..=CR_RATIO.1).contains(&ratio) && fine.residual <= CR_ABS,
        format!(
            "CR residual {:.3e} (delta 2e-3) / {:.3e} (delta 1e-3) = {ratio:.3} in [{}, {}]; relative residual <= {CR_ABS:e}",
            coarse.residual, fine.residual, CR_RATIO.0, CR_RATIO.1
        ),
    ))
}

fn cgo_decay() -> Check {
    let frame = ReconFrame::canonical([3.0, 0.0, 0.0], LAMBDA).map_err(err)?;
    let g = Grid::new(L, N, frame.grid_frame().map_err(err)?).map_err(err)?;
    let v = Potential::from_descriptor(&GAUSS, &g, GAMMA0).map_err(err)?;
    let gamma = working_gamma(GAMMA0);
    let mut norms = Vec::new();
    for t in [2.0, 4.0, 8.0] {
        let (rho, _) = rho_param(&frame, t).map_err(err)?;
        norms.push(solve_cgo(&v, &rho, &GmresConfig::default()).map_err(err)?.weighted_correction_norm(gamma));
    }
    Ok((
        strictly_decreasing(&norms),
        format!("weighted |v_rho| at t = 2,4,8: {} (strictly decreasing)", fmt_list(&norms)),
    ))
}

fn scattering_sanity() -> Check {
    let cfg = ScatteringConfig::default();
    let g = grid(L, N);
    let zero = Potential::zero(&g, GAMMA0).map_err(err)?;
    let s0 = scattering_matrix(&zero, LAMBDA, 4, &cfg).map_err(err)?;
    let n = s0.side();
    let free_err = (0..n * n)
        .map(|q| (s0.matrix[q] - if q / n == q % n { 1.0 } else { 0.0 }).norm())
        .fold(0.0, f64::max);

    // flux conservation: an exponentially decaying bump, whose defect is
    // set by resolution; the smooth Gaussian sits at rounding level
    let bump = Descriptor::ExponentialBump {
        amplitude: 0.5,
        gamma0: 3.0,
        r0: 0.2,
        center: [0.0; 3],
    };
    let defect = |n: usize, d: &Descriptor| -> Result<f64, String> {
        let g = grid(L, n);
        let v = Potential::from_descriptor(d, &g, GAMMA0).map_err(err)?;
        Ok(scattering_matrix(&v, LAMBDA, 4, &cfg).map_err(err)?.unitarity_defect)
    };
    let d48 = defect(48, &bump)?;
    let d64 = defect(64, &bump)?;
    let dg = defect(48, &GAUSS)?;

    // Born regime: weak off-center Gaussian against its closed-form Born matrix
    let weak = gaussian(0.01, [0.5, -0.3, 0.2]);
    let v = Potential::from_descriptor(&weak, &g, GAMMA0).map_err(err)?;
    let s = scattering_matrix(&v, LAMBDA, 2, &cfg).map_err(err)?;
    let born = born_matrix(&weak, LAMBDA, 2, 40).map_err(err)?;
    let big = born.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for i in 0..s.side() {
        for j in 0..s.side() {
            let b = born[(i, j)];
            if b.norm() < 0.05 * big {
                continue;
            }
            let k = s.entry(i, j) - if i == j { 1.0 } else { 0.0 };
            worst = worst.max((k / b - 1.0).norm());
            entries += 1;
        }
    }
    let pass = free_err <= FREE_S_TOL && d48 <= UNITARITY_TOL && dg <= UNITARITY_TOL && d64 < d48 && worst <= BORN_TOL;
    Ok((
        pass,
        format!(
            "|S(0) - I| = {free_err:.2e} (tol {FREE_S_TOL:e}); unitarity defect bump N=48 {d48:.3e} -> N=64 {d64:.3e}, \
             Gaussian N=48 {dg:.3e} (tol {UNITARITY_TOL:e}); Born ratio deviation {:.3}% over {entries} entries (tol {}%)",
            100.0 * worst,
            100.0 * BORN_TOL
        ),
    ))
}

fn test_coeffs(k_max: usize, seed: u64) -> SphericalHarmonicCoeffs {
    let mut r = rng::stream(seed, "harmonic-coeffs", 0);
    let c = (0..harmonic_count(k_max))
        .map(|_| Complex64::new(r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)))
        .collect();
    SphericalHarmonicCoeffs::new(LAMBDA, k_max, c).expect("consistent length")
}

fn close(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / (lhs.norm() + rhs.norm() + 1.0)
}

fn pairing() -> Check {
    let cfg = ScatteringConfig::default();
    let g = grid(L, N);
    let v = Potential::from_descriptor(&gaussian(0.3, [0.2, 0.0, 0.1]), &g, GAMMA0).map_err(err)?;
    let mut rows = Vec::new();

    // dense-pairing instance: <u+, f> = -2i sqrt(lambda) <g, g-->
    let data = test_coeffs(3, 1);
    let plus = poisson(&v, LAMBDA, &data, Sign::Plus, &cfg).map_err(err)?;
    let f = ComplexField::from_fn(&g, |w| {
        let c = [0.4, 0.2, -0.3];
        let d = [w[0] - c[0], w[1] - c[1], w[2] - c[2]];
        Complex64::new(1.0, 0.3 * w[1]) * (-dot(d, d)).exp()
    });
    let u_minus = full_resolvent(&v, LAMBDA, Sign::Minus, &f, &cfg).map_err(err)?;
    let side_plus = PairingSide {
        u: plus.u.clone(),
        source: None,
        asymptotics: AsymptoticData::of_poisson(&v, LAMBDA, &data, &plus, 10).map_err(err)?,
    };
    let side_minus = PairingSide {
        asymptotics: AsymptoticData::of_resolvent(&v, LAMBDA, Sign::Minus, &f, &u_minus, 10).map_err(err)?,
        u: u_minus,
        source: Some(f),
    };
    let p = boundary_pairing(&side_plus, &side_minus, LAMBDA).map_err(err)?;
    rows.push(("dense", close(p.lhs, p.rhs)));
    let dense_rhs = Complex64::new(0.0, -2.0 * LAMBDA.sqrt()) * data.inner(&side_minus.asymptotics.incoming);
    rows.push(("dense <g,g-->", close(p.lhs, dense_rhs)));

    // two generalized eigenfunctions of the same operator
    let (a, b) = (test_coeffs(2, 2), test_coeffs(2, 3));
    let pa = poisson(&v, LAMBDA, &a, Sign::Plus, &cfg).map_err(err)?;
    let pb = poisson(&v, LAMBDA, &b, Sign::Plus, &cfg).map_err(err)?;
    let eig = |p: &PoissonSolution, c: &SphericalHarmonicCoeffs| -> Result<PairingSide, String> {
        Ok(PairingSide {
            u: p.u.clone(),
            source: None,
            asymptotics: AsymptoticData::of_poisson(&v, LAMBDA, c, p, 12).map_err(err)?,
        })
    };
    let r = boundary_pairing(&eig(&pa, &a)?, &eig(&pb, &b)?, LAMBDA).map_err(err)?;
    rows.push(("eigen-eigen", close(r.lhs, r.rhs)));

    // two potentials with the free Laplacian, cross-checked against S-matrices
    let v1 = Potential::from_descriptor(&gaussian(0.3, [0.0; 3]), &g, GAMMA0).map_err(err)?;
    let bump = Descriptor::ExponentialBump {
        amplitude: 0.2,
        gamma0: 3.0,
        r0: 0.5,
        center: [0.0; 3],
    };
    let v2 = Potential::from_descriptor(&bump, &g, GAMMA0).map_err(err)?;
    let p1 = poisson(&v1, LAMBDA, &a, Sign::Plus, &cfg).map_err(err)?;
    let p2 = poisson(&v2, LAMBDA, &b, Sign::Plus, &cfg).map_err(err)?;
    let side = |pot: &Potential, p: &PoissonSolution, c: &SphericalHarmonicCoeffs| -> Result<PairingSide, String> {
        Ok(PairingSide {
            u: p.u.clone(),
            source: Some(pot.field().mul(&p.u).map_err(err)?.scale(Complex64::new(-1.0, 0.0))),
            asymptotics: AsymptoticData::of_poisson(pot, LAMBDA, c, p, 8).map_err(err)?,
        })
    };
    let two = boundary_pairing(&side(&v1, &p1, &a)?, &side(&v2, &p2, &b)?, LAMBDA).map_err(err)?;
    rows.push(("two-potential", close(two.lhs, two.rhs)));
    let s1 = scattering_matrix(&v1, LAMBDA, 2, &cfg).map_err(err)?;
    let s2 = scattering_matrix(&v2, LAMBDA, 2, &cfg).map_err(err)?;
    let from_s = Complex64::new(0.0, 2.0 * LAMBDA.sqrt()) * (s1.outgoing_map(&a).inner(&s2.outgoing_map(&b)) - a.inner(&b));
    rows.push(("two-potential vs S", close(two.lhs, from_s)));

    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let parts: Vec<String> = rows.iter().map(|(n, e)| format!("{n} {e:.2e}")).collect();
    Ok((
        worst <= PAIRING_TOL,
        format!("|lhs - rhs|/(|lhs|+|rhs|+1): {} (tol {PAIRING_TOL:e})", parts.join(", ")),
    ))
}

fn reference_shell_spec() -> ShellSpec {
    ShellSpec {
        directions: 8,
        radii: vec![2.4, 3.0, 3.4],
        antipodal: true,
    }
}

fn shell_recovery() -> Check {
    let (v, z) = reference_pair()?;
    let shell = shell_scan(&v, &z, LAMBDA, &reference_shell_spec(), &[2.0, 4.0, 8.0, 16.0], &recon_cfg()).map_err(err)?;
    let failures = shell.failures().count();
    let worst = shell
        .estimates()
        .map(|(zeta, e)| (e - truth(norm(zeta))).norm() / truth(norm(zeta)))
        .fold(0.0, f64::max);
    let single = recover_fourier(&v, &z, LAMBDA, [3.0, 0.0, 0.0], &[2.0, 4.0, 8.0], &recon_cfg()).map_err(err)?;
    let e3 = (single.estimate - TRANSFORM_AT_3).norm() / TRANSFORM_AT_3;
    let conj = shell.conjugate_defect.unwrap_or(f64::INFINITY);
    Ok((
        shell.points.len() == 24 && failures == 0 && worst <= SHELL_TOL && e3 <= SHELL_TOL && conj <= 1e-8,
        format!(
            "{} points, {failures} failed, max relative error {:.2}% (tol {}%); zeta=(3,0,0): {:.7} vs {TRANSFORM_AT_3} ({:.2}%); \
             conjugate symmetry defect {conj:.1e}",
            shell.points.len(),
            100.0 * worst,
            100.0 * SHELL_TOL,
            single.estimate.re,
            100.0 * e3
        ),
    ))
}

fn t_convergence() -> Check {
    let (v, z) = reference_pair()?;
    let rec = recover_fourier(&v, &z, LAMBDA, [3.0, 0.0, 0.0], &[2.0, 4.0, 8.0], &recon_cfg()).map_err(err)?;
    let errs: Vec<f64> = rec.table.iter().map(|r| (r.value - TRANSFORM_AT_3).norm()).collect();
    Ok((
        strictly_decreasing(&errs),
        format!("|estimate - truth| at t = 2,4,8: {} (strictly decreasing)", fmt_list(&errs)),
    ))
}

fn synthetic_shell(noise: f64, seed: u64) -> Result<ShellRecovery, String> {
    let mut r = rng::stream(seed, "shell-noise", 0);
    let points = reference_shell_spec()
        .points()
        .map_err(err)?
        .into_iter()
        .map(|zeta| {
            let a = norm(zeta);
            // uniform with unit variance, scaled to the noise level
            let e = truth(a) * (1.0 + noise * 3f64.sqrt() * r.gen_range(-1.0..1.0));
            ShellPoint {
                zeta,
                abs_zeta: a,
                t: 16.0,
                estimate: Some(Complex64::new(e, 0.0)),
                quadrature_error: Some(0.0),
                error: None,
            }
        })
        .collect();
    let (lower, upper) = shell_bounds(LAMBDA, GAMMA0);
    Ok(ShellRecovery {
        lambda: LAMBDA,
        gamma0: GAMMA0,
        lower,
        upper,
        points,
        conjugate_defect: None,
    })
}

fn completion() -> Check {
    let cfg = CompletionConfig::default();
    let exact = lowfreq_complete(&synthetic_shell(0.0, 0)?, 2.0, &cfg).map_err(err)?;
    let e0 = (exact.eval(0.0) - TRANSFORM_AT_0).norm() / TRANSFORM_AT_0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let c = lowfreq_complete(&synthetic_shell(0.01, seed)?, 2.0, &cfg).map_err(err)?;
        worst = worst.max((c.eval(0.0) - TRANSFORM_AT_0).norm() / TRANSFORM_AT_0);
    }
    Ok((
        e0 <= COMPLETION_EXACT_TOL && worst <= COMPLETION_NOISY_TOL,
        format!(
            "exact shell: V(0) = {:.6} vs {TRANSFORM_AT_0} ({:.2}%, tol {}%); 1% noise, 20 draws: max deviation {:.2}% (tol {}%)",
            exact.eval(0.0).re,
            100.0 * e0,
            100.0 * COMPLETION_EXACT_TOL,
            100.0 * worst,
            100.0 * COMPLETION_NOISY_TOL
        ),
    ))
}

fn uniqueness() -> Check {
    let (v, _) = reference_pair()?;
    let cfg = UniquenessConfig {
        k_max: 2,
        scattering: ScatteringConfig::default(),
        shell: ShellSpec {
            directions: 4,
            radii: vec![2.5, 3.2],
            antipodal: true,
        },
        schedule: vec![4.0, 8.0, 16.0],
        recover: recon_cfg(),
    };
    let scaled = uniqueness_experiment(&v, &v.scaled(0.9), LAMBDA, &cfg).map_err(err)?;
    let worst = scaled
        .comparison
        .iter()
        .map(|c| {
            let target = 0.1 * v.fourier_transform(c.zeta);
            c.estimate.map_or(f64::INFINITY, |e| (e - target).norm() / target.norm())
        })
        .fold(0.0, f64::max);
    let same = uniqueness_experiment(&v, &v, LAMBDA, &cfg).map_err(err)?;
    let rel = |a: f64, s: f64| if a == 0.0 { 0.0 } else { a / s };
    let base = [
        rel(same.smatrix_discrepancy, same.smatrix_scale),
        rel(same.pairing_discrepancy, same.pairing_scale),
        rel(same.shell_discrepancy, same.shell_scale),
    ];
    let at_base = base.iter().all(|b| *b <= BASELINE_TOL);
    Ok((
        worst <= UNIQUENESS_TOL && at_base && !scaled.at_baseline(),
        format!(
            "V vs 0.9V: shell discrepancy within {:.2}% of 0.1 V^ (tol {}%), |S - S'| = {:.2e}; \
             V vs V: relative discrepancies S {:.1e}, pairing {:.1e}, shell {:.1e} (baseline {BASELINE_TOL:e})",
            100.0 * worst,
            100.0 * UNIQUENESS_TOL,
            scaled.smatrix_discrepancy,
            base[0],
            base[1],
            base[2]
        ),
    ))
}

fn density() -> Check {
    let frame = ReconFrame::canonical([3.0, 0.0, 0.0], LAMBDA).map_err(err)?;
    let g = Grid::new(L, N, frame.grid_frame().map_err(err)?).map_err(err)?;
    let v = Potential::from_descriptor(&GAUSS, &g, GAMMA0).map_err(err)?;
    // t below gamma0 / 2, the range where the density argument applies
    let (rho, _) = rho_param(&frame, 1.3).map_err(err)?;
    let sol = solve_cgo(&v, &rho, &GmresConfig::default()).map_err(err)?;
    let target = sol.eigenfunction();
    let members = poisson_columns(&v, LAMBDA, 8, &ScatteringConfig::default()).map_err(err)?;
    let mut res = Vec::new();
    for k in [2usize, 4, 8] {
        let rep = project(&target, &members[..harmonic_count(k)], GAMMA0 / 2.0, k).map_err(err)?;
        res.push(rep.residual);
    }
    Ok((
        res.windows(2).all(|w| w[1] <= w[0]),
        format!("weighted projection residual at k_max = 2,4,8: {} (non-increasing)", fmt_list(&res)),
    ))
}

const REPRO_SCENARIO: &str = r#"
name = "repro"
seed = 17
lambda = 1.0
gamma0 = 3.0

[grid]
half_width = 6.0
points_per_axis = 16

[potential]
kind = "gaussian"
amplitude = 0.1
sigma = 1.0

[cgo.family]
zeta = [3.0, 0.0, 0.0]
t = [2.0, 4.0]

[scan]
z = [[0.0, 0.5], [1.0, 2.0]]
rho_perp = [[0.5, 0.0]]
probes = 4

[scan.decay]
im_z = [5.0, 10.0]
rho_perp = [1.0, 0.0]

[recover]
schedule = [2.0, 4.0]
zeta = [[3.0, 0.0, 0.0]]

[recover.shell]
directions = 4
radii = [2.5, 3.0]

[recover.completion]
ball_radius = 2.0
"#;

fn read_dir(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(err)? {
        let e = e.map_err(err)?;
        out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).map_err(err)?);
    }
    Ok(out)
}

fn reproducibility() -> Check {
    let sc = Scenario::parse(REPRO_SCENARIO).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut files = 0;
    let mut mismatches = Vec::new();
    for cmd in [Command::Cgo, Command::ScanExceptional, Command::Recover] {
        sc.validate(cmd.name()).map_err(err)?;
        let mut runs = Vec::new();
        for (k, workers) in [1usize, 4, 4].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{}-{k}", cmd.name()));
            run_scenario(cmd, &sc, &dir, workers).map_err(err)?;
            runs.push(read_dir(&dir)?);
        }
        files += runs[0].len();
        for r in &runs[1..] {
            if *r != runs[0] {
                mismatches.push(cmd.name());
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{files} output files bit-identical across 1, 4 and 4 workers")
        } else {
            format!("outputs differ for {}", mismatches.join(", "))
        },
    ))
}
