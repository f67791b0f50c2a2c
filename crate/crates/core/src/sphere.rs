//! Functions on the unit sphere: real orthonormal spherical harmonics,
//! spherical Bessel functions and a Gauss-Legendre x trapezoid product rule.
//!
//! Harmonics are indexed `l^2 + l + m`, `-l <= m <= l`. Since they are real,
//! coefficient vectors conjugate entrywise with the functions they describe.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Vec3;

pub fn harmonic_count(k_max: usize) -> usize {
    (k_max + 1) * (k_max + 1)
}

pub fn harmonic_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// `(l, m)` of flat index `idx`.
pub fn harmonic_degree(idx: usize) -> (usize, i64) {
    let l = (idx as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
    (l, idx as i64 - (l * l + l) as i64)
}

/// All real harmonics of degree `<= k_max` at the unit vector `dir`.
pub fn real_harmonics(k_max: usize, dir: Vec3) -> Vec<f64> {
    let r = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let (ct, st, phi) = if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        let ct = (dir[2] / r).clamp(-1.0, 1.0);
        (ct, (dir[0] * dir[0] + dir[1] * dir[1]).sqrt() / r, dir[1].atan2(dir[0]))
    };
    harmonics_from_angles(k_max, ct, st, phi)
}

/// Same as [`real_harmonics`] from `cos(theta)`, `sin(theta)` and `phi`.
pub fn harmonics_from_angles(k_max: usize, ct: f64, st: f64, phi: f64) -> Vec<f64> {
    let lm = k_max + 1;
    // normalized associated Legendre values pbar[l][m], including 1/sqrt(4 pi)
    let mut p = vec![vec![0.0; lm]; lm];
    p[0][0] = (0.25f64 / PI).sqrt();
    for m in 1..lm {
        let mf = m as f64;
        p[m][m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st * p[m - 1][m - 1];
    }
    for m in 0..lm {
        if m + 1 < lm {
            p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * ct * p[m][m];
        }
        for l in m + 2..lm {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[l][m] = a * (ct * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let mut out = vec![0.0; harmonic_count(k_max)];
    let s2 = std::f64::consts::SQRT_2;
    for l in 0..lm {
        out[harmonic_index(l, 0)] = p[l][0];
        for m in 1..=l {
            let (s, c) = (m as f64 * phi).sin_cos();
            out[harmonic_index(l, m as i64)] = s2 * p[l][m] * c;
            out[harmonic_index(l, -(m as i64))] = s2 * p[l][m] * s;
        }
    }
    out
}

/// `j_0(x), ..., j_{l_max}(x)` for `x >= 0`: upward recurrence where it is
/// stable (`x > l_max`), Miller's downward recurrence otherwise.
pub fn spherical_bessel(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; l_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < 1e-3 {
        // three-term series
        let mut df = 1.0;
        for l in 0..=l_max {
            if l > 0 {
                df *= (2 * l + 1) as f64;
            }
            let lead = x.powi(l as i32) / df;
            let (a, b) = ((2 * l + 3) as f64, (2 * l + 5) as f64);
            let x2 = x * x;
            out[l] = lead * (1.0 - x2 / (2.0 * a) + x2 * x2 / (8.0 * a * b));
        }
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if x > l_max as f64 {
        out[0] = j0;
        if l_max >= 1 {
            out[1] = s / (x * x) - c / x;
        }
        for l in 2..=l_max {
            out[l] = (2 * l - 1) as f64 / x * out[l - 1] - out[l - 2];
        }
        return out;
    }
    let start = l_max + 20 + (x as usize) * 2;
    let mut above = 0.0;
    let mut here = 1e-300;
    let mut vals = vec![0.0; start + 1];
    vals[start] = here;
    for l in (1..=start).rev() {
        let below = (2 * l + 1) as f64 / x * here - above;
        above = here;
        here = below;
        vals[l - 1] = here;
        if here.abs() > 1e250 {
            for v in vals[l - 1..].iter_mut() {
                *v *= 1e-250;
            }
            above *= 1e-250;
            here *= 1e-250;
        }
    }
    let scale = j0 / vals[0];
    for l in 0..=l_max {
        out[l] = vals[l] * scale;
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Product rule in `(cos theta, phi)`; exact for polynomials of degree
/// `<= min(2 n_theta - 1, n_phi - 1)` restricted to the sphere.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    degree: usize,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (x, wx) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (ct, wt) in x.iter().zip(&wx) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_phi {
                let (s, c) = (j as f64 * dphi).sin_cos();
                nodes.push([st * c, st * s, *ct]);
                weights.push(wt * dphi);
            }
        }
        SphereQuadrature {
            nodes,
            weights,
            degree: (2 * n_theta - 1).min(n_phi - 1),
        }
    }

    /// Smallest rule exact to `degree`.
    pub fn for_degree(degree: usize) -> Self {
        Self::new(degree / 2 + 1, degree + 1)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn require(&self, degree: usize) -> Result<()> {
        if degree > self.degree {
            return Err(Error::QuadratureOrder {
                order: self.degree,
                degree,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for idx in 0..harmonic_count(9) {
            let (l, m) = harmonic_degree(idx);
            assert!(m.unsigned_abs() as usize <= l);
            assert_eq!(harmonic_index(l, m), idx);
        }
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let k = 6;
        let q = SphereQuadrature::for_degree(2 * k);
        let n = harmonic_count(k);
        let mut gram = vec![0.0; n * n];
        for (p, w) in q.nodes.iter().zip(&q.weights) {
            let y = real_harmonics(k, *p);
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += w * y[a] * y[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * n + b] - e).abs() < 1e-13, "{a} {b} {}", gram[a * n + b]);
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let d = [0.6, 0.0, 0.8];
        let y = real_harmonics(1, d);
        let c0 = (0.25f64 / PI).sqrt();
        let c1 = (0.75f64 / PI).sqrt();
        assert!((y[0] - c0).abs() < 1e-15);
        assert!((y[harmonic_index(1, 0)] - c1 * 0.8).abs() < 1e-15);
        assert!((y[harmonic_index(1, 1)].abs() - c1 * 0.6).abs() < 1e-15);
        assert!(y[harmonic_index(1, -1)].abs() < 1e-15);
    }

    #[test]
    fn bessel_reference_values() {
        let j = spherical_bessel(5, 1.0);
        assert!((j[0] - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!((j[1] - 0.301_168_678_939_756_8).abs() < 1e-15);
        assert!((j[2] - 0.062_035_052_011_373_86).abs() < 1e-15);
        assert!((j[5] - 9.256_115_861_125_816e-5).abs() < 1e-18);
    }

    #[test]
    fn bessel_branches_agree() {
        // upward branch at x = 12.5 vs downward branch asked for a longer ladder
        for x in [5.5, 12.5] {
            let up = spherical_bessel(4, x);
            let down = spherical_bessel(20, x);
            for l in 0..=4 {
                assert!((up[l] - down[l]).abs() < 1e-13, "{x} {l}");
            }
        }
        let tiny = spherical_bessel(3, 5e-4);
        let mid = spherical_bessel(3, 2e-3);
        assert!((tiny[0] - (5e-4f64).sin() / 5e-4).abs() < 1e-15);
        assert!(mid[3] > 0.0 && tiny[3] > 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((int - 2.0 / 13.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn underresolved_rule_rejected() {
        let q = SphereQuadrature::for_degree(8);
        assert!(q.require(8).is_ok());
        assert!(matches!(q.require(9), Err(Error::QuadratureOrder { .. })));
    }

    #[test]
    fn funk_hecke_plane_wave() {
        // int exp(-i k w.omega) Y(omega) = 4 pi (-i)^l j_l(k|w|) Y(w_hat)
        let q = SphereQuadrature::new(40, 80);
        let w: Vec3 = [0.7, -1.1, 0.4];
        let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let dir = [w[0] / r, w[1] / r, w[2] / r];
        let k = 1.3;
        let yw = real_harmonics(3, dir);
        let j = spherical_bessel(3, k * r);
        for idx in 0..harmonic_count(3) {
            let (l, _) = harmonic_degree(idx);
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (p, wt) in q.nodes.iter().zip(&q.weights) {
                let ph = -k * (w[0] * p[0] + w[1] * p[1] + w[2] * p[2]);
                acc += num_complex::Complex64::from_polar(*wt * real_harmonics(3, *p)[idx], ph);
            }
            let expect = num_complex::Complex64::new(0.0, -1.0).powu(l as u32) * 4.0 * PI * j[l] * yw[idx];
            assert!((acc - expect).norm() < 1e-12, "{idx}");
        }
    }
}
