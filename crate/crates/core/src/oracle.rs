//! Brute-force references for small grids. Everything here is dense and
//! built from direct exponential sums, sharing no code path with the FFT
//! operators it checks. Intended for `N <= 12`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::faddeev::{symbol_f, ComplexMomentum};
use crate::field::{japanese_bracket, ComplexField};
use crate::grid::{dot, Grid, Vec3};
use crate::potential::working_gamma;

const MAX_N: usize = 12;

fn check_small(grid: &Grid) -> Result<()> {
    if grid.points_per_axis() > MAX_N {
        return Err(Error::InvalidArgument(format!(
            "dense references need N <= {MAX_N}, got {}",
            grid.points_per_axis()
        )));
    }
    Ok(())
}

/// Dense matrix of `G0(rho)` acting on grid samples:
/// `K(a, b) = h^3 / (2L)^3 sum_xi exp(i (xi - rho_perp).(w_a - w_b)) / F(xi)`
/// over the half-shifted dual lattice, in local coordinates.
pub fn dense_g0(grid: &Grid, rho: &ComplexMomentum) -> Result<DMatrix<Complex64>> {
    check_small(grid)?;
    if rho.z().im == 0.0 {
        return Err(Error::RealZ);
    }
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let dxi = grid.dual_spacing();
    let rp = grid.frame().to_local(rho.rho_perp());
    let rp2 = dot(rp, rp);
    let bins: Vec<f64> = (0..n).map(|k| grid.signed_bin(k) as f64).collect();
    // kernel as a function of the index difference d in [-(n-1), n-1]^3
    let span = 2 * n - 1;
    let mut kernel = vec![Complex64::new(0.0, 0.0); span * span * span];
    let scale = grid.cell_volume() / grid.box_volume();
    for (q, slot) in kernel.iter_mut().enumerate() {
        let d = [
            (q / (span * span)) as f64 - (n - 1) as f64,
            ((q / span) % span) as f64 - (n - 1) as f64,
            (q % span) as f64 - (n - 1) as f64,
        ];
        let dw = [d[0] * h, d[1] * h, d[2] * h];
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in &bins {
            for &b in &bins {
                for &c in &bins {
                    let xi = [dxi * (a + 0.5), dxi * b, dxi * c];
                    let phase = dot([xi[0] - rp[0], xi[1] - rp[1], xi[2] - rp[2]], dw);
                    acc += Complex64::from_polar(1.0, phase) / symbol_f(xi, rho.z(), rp2);
                }
            }
        }
        *slot = acc * scale;
    }
    let len = grid.len();
    Ok(DMatrix::from_fn(len, len, |a, b| {
        let [ia, ja, ka] = grid.unravel(a);
        let [ib, jb, kb] = grid.unravel(b);
        let o = n - 1;
        let q = ((ia + o - ib) * span + (ja + o - jb)) * span + (ka + o - kb);
        kernel[q]
    }))
}

fn column(f: &ComplexField) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(f.samples().len(), 1, f.samples())
}

pub fn dense_apply(m: &DMatrix<Complex64>, f: &ComplexField) -> Result<ComplexField> {
    let out = m * column(f);
    ComplexField::from_samples(f.grid(), out.as_slice().to_vec())
}

/// `v` from `(I + G0 V) v = -G0 V 1` by dense LU.
pub fn dense_cgo(potential: &ComplexField, rho: &ComplexMomentum) -> Result<ComplexField> {
    let grid = potential.grid();
    let g = dense_g0(grid, rho)?;
    let len = grid.len();
    let vs = potential.samples();
    let gv = DMatrix::from_fn(len, len, |a, b| g[(a, b)] * vs[b]);
    let a = DMatrix::identity(len, len) + &gv;
    let rhs = -(&g * column(potential));
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("dense CGO system is singular".into()))?;
    ComplexField::from_samples(grid, x.as_slice().to_vec())
}

/// Smallest singular value of `I + W V G0 W^-1`, `W = exp(gamma <w>)`.
pub fn dense_sigma_min(potential: &ComplexField, rho: &ComplexMomentum, gamma0: f64) -> Result<f64> {
    let grid = potential.grid();
    let g = dense_g0(grid, rho)?;
    let gamma = working_gamma(gamma0);
    let len = grid.len();
    let w: Vec<f64> = (0..len)
        .map(|i| (gamma * japanese_bracket(grid.node_local(i))).exp())
        .collect();
    let vs = potential.samples();
    let b = DMatrix::from_fn(len, len, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) + w[i] * vs[i] * g[(i, j)] / w[j]
    });
    let sv = b.singular_values();
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Plain triple loop for `h^3 sum exp(i zeta.w) d (1 + v) (1 + v')`.
pub fn brute_pairing(vdiff: &ComplexField, v: &ComplexField, v_prime: &ComplexField, zeta: Vec3) -> Complex64 {
    let grid = vdiff.grid();
    let n = grid.points_per_axis();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = grid.index(i, j, k);
                let w = grid.node_world(idx);
                let e = Complex64::new(0.0, dot(zeta, w)).exp();
                acc += e * vdiff.samples()[idx] * (1.0 + v.samples()[idx]) * (1.0 + v_prime.samples()[idx]);
            }
        }
    }
    acc * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;

    #[test]
    fn refuses_large_grids() {
        let g = Grid::new(4.0, 16, Frame::identity()).unwrap();
        let rho = ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(0.0, 1.0), [0.0; 3]).unwrap();
        assert!(dense_g0(&g, &rho).is_err());
    }

    #[test]
    fn single_character_is_an_eigenvector() {
        // exp(i (xi - rho_perp).w) for a shifted-lattice xi is mapped to itself / F(xi)
        let g = Grid::new(3.0, 4, Frame::identity()).unwrap();
        let rho = ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(0.2, 0.9), [0.0, 0.4, 0.0]).unwrap();
        let m = dense_g0(&g, &rho).unwrap();
        let dxi = g.dual_spacing();
        let xi = [dxi * 1.5, dxi, -dxi];
        let arg = [xi[0], xi[1] - 0.4, xi[2]];
        let f = ComplexField::from_local_fn(&g, |w| Complex64::from_polar(1.0, dot(arg, w)));
        let out = dense_apply(&m, &f).unwrap();
        let expect = f.scale(symbol_f(xi, rho.z(), 0.16).inv());
        assert!(out.sub(&expect).unwrap().l2() <= 1e-12 * expect.l2());
    }
}
