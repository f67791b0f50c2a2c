//! Restarted GMRES for complex linear systems given as a matrix-free map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{pairwise_sum_by, pairwise_sum_complex_by};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative residual target `|b - A x| / |b|`.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            restart: 30,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    pairwise_sum_complex_by(a.len(), &|i| a[i].conj() * b[i])
}

fn norm(a: &[Complex64]) -> f64 {
    pairwise_sum_by(a.len(), &|i| a[i].norm_sqr()).sqrt()
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    // returns (c, s) with [c, s; -conj(s), c] [a; b] = [r; 0]
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = (na * na + nb * nb).sqrt();
    let phase = a / na;
    (na / r, phase * b.conj() / r)
}

/// Solve `A x = b`. An error is returned when `max_iter` is exhausted; the
/// last iterate is discarded, since non-convergence is a signal the caller
/// must see.
pub fn gmres(
    apply: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![Complex64::new(0.0, 0.0); n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x: Vec<Complex64> = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); n],
    };
    let m = cfg.restart.max(1);
    let mut total = 0;
    let mut resid = {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        norm(&r) / bnorm
    };
    while resid > cfg.tol {
        if total >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iterations: total,
                residual: resid,
            });
        }
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![Complex64::new(0.0, 0.0); m];
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            if total >= cfg.max_iter {
                break;
            }
            let mut w = apply(&basis[k]);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dotc(vj, &w);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for j in 0..k {
                let (c, s) = (cs[j], sn[j]);
                let a = h[j][k];
                let bb = h[j + 1][k];
                h[j][k] = c * a + s * bb;
                h[j + 1][k] = -s.conj() * a + c * bb;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            let a = h[k][k];
            let bb = h[k + 1][k];
            h[k][k] = c * a + s * bb;
            h[k + 1][k] = Complex64::new(0.0, 0.0);
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            total += 1;
            k_used = k + 1;
            resid = g[k + 1].norm() / bnorm;
            if resid <= cfg.tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            if h[i][i].norm() == 0.0 {
                return Err(Error::NonConvergence {
                    iterations: total,
                    residual: resid,
                });
            }
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
        // true residual guards against drift of the rotated estimate
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        resid = norm(&r) / bnorm;
    }
    Ok(GmresOutcome {
        x,
        iterations: total,
        residual: resid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, seed: u64, shift: f64) -> (DMatrix<Complex64>, DVector<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (n as f64).sqrt()
        });
        for i in 0..n {
            a[(i, i)] += shift;
        }
        let b = DVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (a, b)
    }

    #[test]
    fn matches_dense_lu() {
        let (a, b) = random_system(60, 1, 2.0);
        let apply = |x: &[Complex64]| (&a * DVector::from_column_slice(x)).as_slice().to_vec();
        let cfg = GmresConfig { restart: 10, max_iter: 500, tol: 1e-12 };
        let out = gmres(&apply, b.as_slice(), None, &cfg).unwrap();
        let exact = a.clone().lu().solve(&b).unwrap();
        let err = (DVector::from_vec(out.x) - &exact).norm() / exact.norm();
        assert!(err < 1e-10, "{err}");
        assert!(out.residual <= 1e-12);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let apply = |x: &[Complex64]| x.to_vec();
        let out = gmres(&apply, &[Complex64::new(0.0, 0.0); 5], None, &GmresConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn reports_non_convergence() {
        // GMRES stagnates on a cyclic shift until the Krylov space is full
        let n = 40;
        let apply = |x: &[Complex64]| {
            let mut y = x.to_vec();
            y.rotate_right(1);
            y
        };
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[0] = Complex64::new(1.0, 0.0);
        let cfg = GmresConfig { restart: 5, max_iter: 20, tol: 1e-10 };
        assert!(matches!(gmres(&apply, &b, None, &cfg), Err(Error::NonConvergence { .. })));
    }
}
