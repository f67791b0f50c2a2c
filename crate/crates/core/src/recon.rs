//! Recovery of `int (V - V') exp(i zeta.w) dw` from CGO pairings.
//!
//! For `zeta` with `|zeta| > 2 sqrt(lambda)` pick unit `nu`, `mu` orthogonal
//! to it and each other, and for `t` above `sqrt(|zeta|^2/4 - lambda)` set
//!
//! ```text
//! rho  = zeta/2 + s mu + i t nu,   rho' = zeta/2 - s mu - i t nu,
//! s    = sqrt(t^2 - |zeta|^2/4 + lambda)
//! ```
//!
//! so `rho.rho = rho'.rho' = lambda` and `rho + rho' = zeta`. The pairing
//! `int exp(i zeta.w) (V - V') (1 + v_rho) (1 + v'_rho')` tends to the Fourier
//! transform of `V - V'` at `zeta` as `t` grows.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgo::{exceptional_indicator, solve_cgo};
use crate::error::{Error, Result};
use crate::faddeev::ComplexMomentum;
use crate::field::ComplexField;
use crate::grid::{add, cross, dot, norm, scale, Frame, Grid, Vec3};
use crate::krylov::GmresConfig;
use crate::potential::Potential;
use crate::scattering::{scattering_matrix_with_columns, ScatteringConfig, ScatteringMatrixData};
use crate::sum::pairwise_sum_complex_by;

const FRAME_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconFrame {
    pub zeta: Vec3,
    pub lambda: f64,
    pub nu: Vec3,
    pub mu: Vec3,
}

impl ReconFrame {
    pub fn new(zeta: Vec3, lambda: f64, nu: Vec3, mu: Vec3) -> Result<Self> {
        let zs = norm(zeta).max(1.0);
        let defect = [
            (norm(nu) - 1.0).abs(),
            (norm(mu) - 1.0).abs(),
            dot(nu, mu).abs(),
            dot(zeta, nu).abs() / zs,
            dot(zeta, mu).abs() / zs,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if !(defect <= FRAME_TOL) {
            return Err(Error::NonOrthogonalFrame(defect));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument("energy must be positive".into()));
        }
        Ok(ReconFrame { zeta, lambda, nu, mu })
    }

    /// Deterministic frame for `zeta`: `nu` is the unit vector orthogonal to
    /// `zeta` built from the coordinate axis least aligned with it. The frame
    /// of `-zeta` is `(nu, -mu)` with `(nu, mu)` the frame of `zeta`, which
    /// maps `rho(-zeta)` to `-conj(rho(zeta))` and keeps conjugate symmetry
    /// exact for real potentials.
    pub fn canonical(zeta: Vec3, lambda: f64) -> Result<Self> {
        let n = norm(zeta);
        if n == 0.0 {
            return Err(Error::InvalidArgument("zeta must be nonzero".into()));
        }
        let negative = zeta.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0);
        let d = scale(zeta, if negative { -1.0 / n } else { 1.0 / n });
        let axis = (0..3)
            .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
            .unwrap();
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let nu = cross(d, e);
        let nu = scale(nu, 1.0 / norm(nu));
        let mu = cross(d, nu);
        let mu = scale(mu, if negative { -1.0 / norm(mu) } else { 1.0 / norm(mu) });
        Self::new(zeta, lambda, nu, mu)
    }

    pub fn critical_t(&self) -> f64 {
        (dot(self.zeta, self.zeta) / 4.0 - self.lambda).max(0.0).sqrt()
    }

    /// Grid frame `(nu, mu, nu x mu)` aligning grid axis 0 with `nu`.
    pub fn grid_frame(&self) -> Result<Frame> {
        Frame::from_nu_mu(self.nu, self.mu)
    }
}

/// `(rho(t), rho'(t))`, both energy-constrained.
pub fn rho_param(frame: &ReconFrame, t: f64) -> Result<(ComplexMomentum, ComplexMomentum)> {
    let q = t * t - dot(frame.zeta, frame.zeta) / 4.0 + frame.lambda;
    if !(q > 0.0) || !(t > 0.0) || !(t > frame.critical_t()) {
        return Err(Error::SubcriticalT {
            t,
            critical: frame.critical_t(),
        });
    }
    let s = q.sqrt();
    let half = scale(frame.zeta, 0.5);
    let rp = add(half, scale(frame.mu, s));
    let rp_prime = add(half, scale(frame.mu, -s));
    let rho = ComplexMomentum::with_energy(frame.nu, Complex64::new(0.0, t), rp, frame.lambda)?;
    let rho_prime = ComplexMomentum::with_energy(frame.nu, Complex64::new(0.0, -t), rp_prime, frame.lambda)?;
    Ok((rho, rho_prime))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingSample {
    pub zeta: Vec3,
    pub t: f64,
    pub value: Complex64,
    /// `|I_h - I_2h|` against the every-other-node subgrid.
    pub quadrature_error: f64,
}

fn pairing_sum(vdiff: &ComplexField, v: &ComplexField, vp: &ComplexField, zeta: Vec3, stride: usize) -> Complex64 {
    let grid = vdiff.grid();
    let n = grid.points_per_axis();
    let m = n / stride;
    let (a, b, c) = (vdiff.samples(), v.samples(), vp.samples());
    let h = grid.spacing() * stride as f64;
    pairwise_sum_complex_by(m * m * m, &|q| {
        let (i, j, k) = (q / (m * m) * stride, (q / m) % m * stride, q % m * stride);
        let idx = grid.index(i, j, k);
        let d = a[idx];
        if d.re == 0.0 && d.im == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = grid.node_world(idx);
        Complex64::from_polar(1.0, dot(zeta, w)) * d * (1.0 + b[idx]) * (1.0 + c[idx])
    }) * (h * h * h)
}

/// `h^3 sum exp(i zeta.w) Vdiff (1 + v) (1 + v')` in fixed pairwise order.
pub fn pairing_integral(
    vdiff: &ComplexField,
    v: &ComplexField,
    v_prime: &ComplexField,
    zeta: Vec3,
    t: f64,
) -> Result<PairingSample> {
    vdiff.check_same_grid(v)?;
    vdiff.check_same_grid(v_prime)?;
    let value = pairing_sum(vdiff, v, v_prime, zeta, 1);
    let coarse = pairing_sum(vdiff, v, v_prime, zeta, 2);
    Ok(PairingSample {
        zeta,
        t,
        value,
        quadrature_error: (value - coarse).norm(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub value: Complex64,
    pub quadrature_error: f64,
    /// `|sample(t) - sample(t_max)|`
    pub distance_to_final: f64,
    pub iterations: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierRecovery {
    pub zeta: Vec3,
    pub estimate: Complex64,
    pub table: Vec<ConvergenceRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconGrid {
    pub half_width: f64,
    pub points_per_axis: usize,
}

/// Exceptional-point screening before each CGO solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub probes: usize,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub grid: ReconGrid,
    pub gmres: GmresConfig,
    pub screening: Option<Screening>,
}

fn solve_at(potential: &Potential, rho: &ComplexMomentum, t: f64, cfg: &RecoverConfig) -> Result<(ComplexField, usize)> {
    if potential.is_zero() {
        return Ok((ComplexField::zeros(potential.grid()), 0));
    }
    if let Some(sc) = cfg.screening {
        let indicator = exceptional_indicator(potential, rho, sc.probes, sc.seed)?;
        if indicator < sc.threshold {
            return Err(Error::Exceptional { t, indicator });
        }
    }
    match solve_cgo(potential, rho, &cfg.gmres) {
        Ok(s) => Ok((s.v, s.iterations)),
        Err(Error::NonConvergence { iterations, residual }) => Err(Error::NonConvergenceAt { t, iterations, residual }),
        Err(e) => Err(e),
    }
}

/// Pairing samples along an increasing `t` schedule; the estimate is the
/// value at the largest `t`.
pub fn recover_fourier(
    v: &Potential,
    v_prime: &Potential,
    lambda: f64,
    zeta: Vec3,
    schedule: &[f64],
    cfg: &RecoverConfig,
) -> Result<FourierRecovery> {
    if norm(zeta) <= 2.0 * lambda.sqrt() {
        return Err(Error::ShellBound {
            abs_zeta: norm(zeta),
            lower: 2.0 * lambda.sqrt(),
            upper: f64::INFINITY,
        });
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("t schedule must be nonempty and increasing".into()));
    }
    let frame = ReconFrame::canonical(zeta, lambda)?;
    let grid = Grid::new(cfg.grid.half_width, cfg.grid.points_per_axis, frame.grid_frame()?)?;
    let vg = v.on_grid(&grid)?;
    let vpg = v_prime.on_grid(&grid)?;
    let vdiff = vg.field().sub(vpg.field())?;
    let rows = schedule
        .par_iter()
        .map(|&t| {
            let (rho, rho_p) = rho_param(&frame, t)?;
            let ((sv, a), (svp, b)) = if vdiff.is_zero() {
                ((ComplexField::zeros(&grid), 0), (ComplexField::zeros(&grid), 0))
            } else {
                (solve_at(&vg, &rho, t, cfg)?, solve_at(&vpg, &rho_p, t, cfg)?)
            };
            let sample = pairing_integral(&vdiff, &sv, &svp, zeta, t)?;
            Ok((sample, [a, b]))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = rows.last().unwrap().0.value;
    let table = rows
        .iter()
        .map(|(s, it)| ConvergenceRow {
            t: s.t,
            value: s.value,
            quadrature_error: s.quadrature_error,
            distance_to_final: (s.value - last).norm(),
            iterations: *it,
        })
        .collect();
    Ok(FourierRecovery {
        zeta,
        estimate: last,
        table,
    })
}

/// Open shell `(2 sqrt(lambda), sqrt(4 lambda + gamma0^2))` on which the
/// pairing identifies the transform.
pub fn shell_bounds(lambda: f64, gamma0: f64) -> (f64, f64) {
    (2.0 * lambda.sqrt(), (4.0 * lambda + gamma0 * gamma0).sqrt())
}

/// Fibonacci sphere: `z_i = 1 - (2i + 1)/n`, azimuth advancing by the
/// golden angle.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub directions: usize,
    pub radii: Vec<f64>,
    /// Use `directions / 2` Fibonacci points and their antipodes.
    pub antipodal: bool,
}

impl ShellSpec {
    /// Sample points, radius-major.
    pub fn points(&self) -> Result<Vec<Vec3>> {
        if self.directions == 0 || self.radii.is_empty() {
            return Err(Error::EmptySweep);
        }
        let dirs = if self.antipodal {
            if !self.directions.is_multiple_of(2) {
                return Err(Error::InvalidArgument("antipodal shells need an even direction count".into()));
            }
            let half = fibonacci_directions(self.directions / 2);
            let neg: Vec<Vec3> = half.iter().map(|d| scale(*d, -1.0)).collect();
            [half, neg].concat()
        } else {
            fibonacci_directions(self.directions)
        };
        Ok(self
            .radii
            .iter()
            .flat_map(|&r| dirs.iter().map(move |d| scale(*d, r)))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPoint {
    pub zeta: Vec3,
    pub abs_zeta: f64,
    pub t: f64,
    pub estimate: Option<Complex64>,
    pub quadrature_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellRecovery {
    pub lambda: f64,
    pub gamma0: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: Vec<ShellPoint>,
    /// `max |est(-zeta) - conj est(zeta)| / max |est|` over sampled pairs,
    /// for real potentials.
    pub conjugate_defect: Option<f64>,
}

impl ShellRecovery {
    pub fn failures(&self) -> impl Iterator<Item = &ShellPoint> {
        self.points.iter().filter(|p| p.error.is_some())
    }

    pub fn estimates(&self) -> impl Iterator<Item = (Vec3, Complex64)> + '_ {
        self.points.iter().filter_map(|p| p.estimate.map(|e| (p.zeta, e)))
    }
}

fn conjugate_defect(points: &[ShellPoint]) -> Option<f64> {
    let scale = points.iter().filter_map(|p| p.estimate).map(|e| e.norm()).fold(0.0, f64::max);
    let mut worst: Option<f64> = None;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let (Some(ea), Some(eb)) = (a.estimate, b.estimate) else { continue };
            if (0..3).all(|d| a.zeta[d] == -b.zeta[d]) {
                let d = if scale > 0.0 { (eb - ea.conj()).norm() / scale } else { 0.0 };
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
    }
    worst
}

/// `recover_fourier` at every shell point. Failures are recorded per point.
pub fn shell_scan(
    v: &Potential,
    v_prime: &Potential,
    lambda: f64,
    spec: &ShellSpec,
    schedule: &[f64],
    cfg: &RecoverConfig,
) -> Result<ShellRecovery> {
    let gamma0 = v.gamma0().min(v_prime.gamma0());
    let (lower, upper) = shell_bounds(lambda, gamma0);
    if let Some(&r) = spec.radii.iter().find(|&&r| !(r > lower && r < upper)) {
        return Err(Error::ShellBound { abs_zeta: r, lower, upper });
    }
    let t_max = *schedule
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty t schedule".into()))?;
    let points = spec
        .points()?
        .par_iter()
        .map(|&zeta| {
            let (estimate, quadrature_error, error) = match recover_fourier(v, v_prime, lambda, zeta, schedule, cfg) {
                Ok(r) => (Some(r.estimate), Some(r.table.last().unwrap().quadrature_error), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ShellPoint {
                zeta,
                abs_zeta: norm(zeta),
                t: t_max,
                estimate,
                quadrature_error,
                error,
            }
        })
        .collect::<Vec<_>>();
    let real = [v, v_prime].iter().all(|p| p.field().samples().iter().all(|z| z.im == 0.0));
    Ok(ShellRecovery {
        lambda,
        gamma0,
        lower,
        upper,
        conjugate_defect: if real { conjugate_defect(&points) } else { None },
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    /// Widths `sigma_j` of the basis `exp(-sigma_j^2 |zeta|^2 / 2)`, the
    /// transforms of Gaussians of width `sigma_j`.
    pub widths: Vec<f64>,
    /// Tikhonov weight relative to the largest squared singular value.
    pub reg_weight: f64,
    /// Radial samples on `[0, ball_radius]`.
    pub ball_samples: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            widths: (0..8).map(|j| 2f64.powi(j - 2)).collect(),
            reg_weight: 1e-6,
            ball_samples: 17,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub widths: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub reg_weight: f64,
    /// `|M c - d| / |d|` on the shell data, 0 for zero data.
    pub shell_residual: f64,
    pub ball_radius: f64,
    /// `(|zeta|, value)` on the ball.
    pub samples: Vec<(f64, Complex64)>,
}

impl Completion {
    pub fn eval(&self, r: f64) -> Complex64 {
        self.widths
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * (-s * s * r * r / 2.0).exp())
            .sum()
    }
}

const COND_LIMIT: f64 = 1e12;

/// Radial Gaussian least-squares fit of the shell estimates, evaluated on the
/// ball `|zeta| <= ball_radius`.
pub fn lowfreq_complete(shell: &ShellRecovery, ball_radius: f64, cfg: &CompletionConfig) -> Result<Completion> {
    let data: Vec<(f64, Complex64)> = shell.estimates().map(|(z, e)| (norm(z), e)).collect();
    if data.is_empty() {
        return Err(Error::InvalidArgument("no shell estimates to complete".into()));
    }
    if cfg.widths.is_empty() || cfg.ball_samples < 2 {
        return Err(Error::InvalidArgument("completion needs widths and at least two ball samples".into()));
    }
    if !(cfg.reg_weight >= 0.0) {
        return Err(Error::InvalidArgument("regularization weight must be nonnegative".into()));
    }
    let m = DMatrix::from_fn(data.len(), cfg.widths.len(), |i, j| {
        let (r, s) = (data[i].0, cfg.widths[j]);
        (-s * s * r * r / 2.0).exp()
    });
    let normal = m.transpose() * &m;
    let ev = normal.clone().symmetric_eigenvalues();
    let top = ev.max();
    if cfg.reg_weight == 0.0 && !(ev.min() > top / COND_LIMIT) {
        return Err(Error::IllConditioned(format!(
            "normal system has condition number above {COND_LIMIT:e}; use a positive regularization weight"
        )));
    }
    let lhs = normal + DMatrix::identity(cfg.widths.len(), cfg.widths.len()) * (cfg.reg_weight * top);
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("regularized normal system is not positive definite".into()))?;
    let solve = |part: &dyn Fn(Complex64) -> f64| {
        let d = DVector::from_iterator(data.len(), data.iter().map(|(_, e)| part(*e)));
        (chol.solve(&(m.transpose() * &d)), d)
    };
    let (cr, dr) = solve(&|z| z.re);
    let (ci, di) = solve(&|z| z.im);
    let dn = (dr.norm_squared() + di.norm_squared()).sqrt();
    let rn = ((&m * &cr - dr).norm_squared() + (&m * &ci - di).norm_squared()).sqrt();
    let coefficients: Vec<Complex64> = cr.iter().zip(ci.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let mut out = Completion {
        widths: cfg.widths.clone(),
        coefficients,
        reg_weight: cfg.reg_weight,
        shell_residual: if dn > 0.0 { rn / dn } else { 0.0 },
        ball_radius,
        samples: Vec::new(),
    };
    let step = ball_radius / (cfg.ball_samples - 1) as f64;
    out.samples = (0..cfg.ball_samples)
        .map(|i| {
            let r = step * i as f64;
            (r, out.eval(r))
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessConfig {
    pub k_max: usize,
    pub scattering: ScatteringConfig,
    pub shell: ShellSpec,
    pub schedule: Vec<f64>,
    pub recover: RecoverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellComparison {
    pub zeta: Vec3,
    pub estimate: Option<Complex64>,
    /// `V^(zeta) - V'^(zeta)` computed directly.
    pub direct: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub lambda: f64,
    pub k_max: usize,
    /// `max |S - S'|` over entries, and `max |S - I|` over both as scale.
    pub smatrix_discrepancy: f64,
    pub smatrix_scale: f64,
    /// `max |int (V - V') P+ Y_a P'+ Y_b|` over the harmonic test set, and the
    /// largest `|int V P+ Y_a P+ Y_b|` as scale.
    pub pairing_discrepancy: f64,
    pub pairing_scale: f64,
    /// `max |shell estimate|` and `max |direct difference|` over the shell.
    pub shell_discrepancy: f64,
    pub shell_scale: f64,
    /// `max |estimate - direct| / max |direct|`, absent when the direct
    /// difference vanishes.
    pub shell_match: Option<f64>,
    pub shell: ShellRecovery,
    pub comparison: Vec<ShellComparison>,
}

/// Relative level treated as roundoff for identical inputs.
pub const BASELINE: f64 = 1e-10;

impl UniquenessReport {
    fn rel(a: f64, scale: f64) -> f64 {
        if a == 0.0 { 0.0 } else { a / scale }
    }

    /// Every discrepancy at or below the roundoff baseline.
    pub fn at_baseline(&self) -> bool {
        Self::rel(self.smatrix_discrepancy, self.smatrix_scale) <= BASELINE
            && Self::rel(self.pairing_discrepancy, self.pairing_scale) <= BASELINE
            && Self::rel(self.shell_discrepancy, self.shell_scale) <= BASELINE
    }
}

fn bilinear(weight: &ComplexField, a: &[ComplexField], b: &[ComplexField]) -> f64 {
    let h3 = weight.grid().cell_volume();
    let w = weight.samples();
    let mut worst: f64 = 0.0;
    for ua in a {
        for ub in b {
            let (x, y) = (ua.samples(), ub.samples());
            let s = pairwise_sum_complex_by(w.len(), &|i| w[i] * x[i] * y[i]) * h3;
            worst = worst.max(s.norm());
        }
    }
    worst
}

/// Scattering matrices, pair-8 integrals and the shell scan of `V - V'`,
/// side by side. `V'` is resampled onto the grid of `V`.
pub fn uniqueness_experiment(v: &Potential, v_prime: &Potential, lambda: f64, cfg: &UniquenessConfig) -> Result<UniquenessReport> {
    let vp = v_prime.on_grid(v.grid())?;
    let (s, us) = scattering_matrix_with_columns(v, lambda, cfg.k_max, &cfg.scattering)?;
    let (sp, usp) = scattering_matrix_with_columns(&vp, lambda, cfg.k_max, &cfg.scattering)?;
    let n = s.side();
    let dev = |m: &ScatteringMatrixData| {
        (0..n * n)
            .map(|q| (m.matrix[q] - if q / n == q % n { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max)
    };
    let smatrix_discrepancy = s.max_abs_diff(&sp);
    let smatrix_scale = dev(&s).max(dev(&sp));
    let vdiff = v.field().sub(vp.field())?;
    let pairing_discrepancy = if vdiff.is_zero() { 0.0 } else { bilinear(&vdiff, &us, &usp) };
    let pairing_scale = bilinear(v.field(), &us, &us);
    let shell = shell_scan(v, &vp, lambda, &cfg.shell, &cfg.schedule, &cfg.recover)?;
    let comparison: Vec<ShellComparison> = shell
        .points
        .iter()
        .map(|p| ShellComparison {
            zeta: p.zeta,
            estimate: p.estimate,
            direct: v.fourier_transform(p.zeta) - v_prime.fourier_transform(p.zeta),
        })
        .collect();
    let shell_discrepancy = shell.estimates().map(|(_, e)| e.norm()).fold(0.0, f64::max);
    let direct_scale = comparison.iter().map(|c| c.direct.norm()).fold(0.0, f64::max);
    let shell_scale = comparison
        .iter()
        .map(|c| v.fourier_transform(c.zeta).norm())
        .fold(0.0, f64::max);
    let shell_match = (direct_scale > 0.0).then(|| {
        comparison
            .iter()
            .map(|c| c.estimate.map_or(f64::INFINITY, |e| (e - c.direct).norm()))
            .fold(0.0, f64::max)
            / direct_scale
    });
    Ok(UniquenessReport {
        lambda,
        k_max: cfg.k_max,
        smatrix_discrepancy,
        smatrix_scale,
        pairing_discrepancy,
        pairing_scale,
        shell_discrepancy,
        shell_scale,
        shell_match,
        shell,
        comparison,
    })
}
