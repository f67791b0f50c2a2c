//! Sampled complex fields and their spectral transforms.
//!
//! Transform convention: `f_hat(xi) = h^3 sum_w f(w) exp(-i xi.w)` with the
//! inverse `f(w) = (2L)^-3 sum_xi f_hat(xi) exp(i xi.w)`, so `f_hat`
//! approximates the continuum integral directly. Spectra are stored in FFT bin
//! order on each axis (see [`Grid::signed_bin`]).

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, Lattice, Vec3};
use crate::sum::{pairwise_sum_by, pairwise_sum_complex_by};

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_samples(grid: &Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            samples,
        })
    }

    /// Evaluate `f` at every node (world coordinates).
    pub fn from_fn(grid: &Grid, f: impl Fn(Vec3) -> Complex64 + Sync) -> Self {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.node_world(idx)))
            .collect();
        ComplexField {
            grid: grid.clone(),
            samples,
        }
    }

    /// Evaluate `f` at every node (local grid coordinates).
    pub fn from_local_fn(grid: &Grid, f: impl Fn(Vec3) -> Complex64 + Sync) -> Self {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.node_local(idx)))
            .collect();
        ComplexField {
            grid: grid.clone(),
            samples,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            samples: self.samples.par_iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64 + Sync,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(ComplexField {
            grid: self.grid.clone(),
            samples: self
                .samples
                .par_iter()
                .zip(other.samples.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mul(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Plain discrete l2 norm of the samples (no quadrature weight).
    pub fn l2(&self) -> f64 {
        pairwise_sum_by(self.samples.len(), &|i| self.samples[i].norm_sqr()).sqrt()
    }

    /// `h^3 sum f`.
    pub fn integral(&self) -> Complex64 {
        pairwise_sum_complex_by(self.samples.len(), &|i| self.samples[i]) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

/// Samples of a transform on one of the dual lattices.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    lattice: Lattice,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn freq_local(&self, idx: usize) -> Vec3 {
        self.grid.freq_local(idx, self.lattice)
    }

    /// Multiply pointwise by `m(xi_local)`.
    pub fn multiply(&mut self, m: impl Fn(Vec3) -> Complex64 + Sync) {
        let grid = &self.grid;
        let lattice = self.lattice;
        self.values
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| *v *= m(grid.freq_local(idx, lattice)));
    }

    pub fn from_values(grid: &Grid, lattice: Lattice, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument("spectrum length mismatch".into()));
        }
        Ok(Spectrum {
            grid: grid.clone(),
            lattice,
            values,
        })
    }
}

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// Unnormalized 3-D FFT in place (forward: `exp(-2 pi i jk/N)`).
fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let plane = n * n;
    // axes 1 and 2 inside each contiguous axis-0 plane
    data.par_chunks_mut(plane).for_each(|slab| {
        let (fwd, inv) = plans(n);
        let fft = if inverse { inv } else { fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(slab, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            for j in 0..n {
                line[j] = slab[j * n + k];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for j in 0..n {
                slab[j * n + k] = line[j];
            }
        }
    });
    // axis 0
    let columns: Vec<Vec<Complex64>> = (0..plane)
        .into_par_iter()
        .map(|jk| {
            let (fwd, inv) = plans(n);
            let fft = if inverse { inv } else { fwd };
            let mut line: Vec<Complex64> = (0..n).map(|i| data[i * plane + jk]).collect();
            fft.process(&mut line);
            line
        })
        .collect();
    for (jk, line) in columns.into_iter().enumerate() {
        for (i, v) in line.into_iter().enumerate() {
            data[i * plane + jk] = v;
        }
    }
}

fn parity(grid: &Grid, idx: usize) -> f64 {
    let [i, j, k] = grid.unravel(idx);
    if (i + j + k) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Half-shift modulation `exp(-i dxi x_par / 2)` at node `idx`.
fn shift_phase(grid: &Grid, idx: usize) -> Complex64 {
    let x = grid.node_local(idx)[0];
    Complex64::from_polar(1.0, -0.5 * grid.dual_spacing() * x)
}

pub fn forward_transform(f: &ComplexField, lattice: Lattice) -> Spectrum {
    let grid = f.grid();
    let mut data: Vec<Complex64> = match lattice {
        Lattice::Standard => f.samples().to_vec(),
        Lattice::Shifted => f
            .samples()
            .par_iter()
            .enumerate()
            .map(|(idx, &z)| z * shift_phase(grid, idx))
            .collect(),
    };
    fft3(&mut data, grid.points_per_axis(), false);
    let h3 = grid.cell_volume();
    data.par_iter_mut()
        .enumerate()
        .for_each(|(idx, v)| *v *= h3 * parity(grid, idx));
    Spectrum {
        grid: grid.clone(),
        lattice,
        values: data,
    }
}

pub fn inverse_transform(s: &Spectrum) -> ComplexField {
    let grid = s.grid();
    let mut data: Vec<Complex64> = s
        .values()
        .par_iter()
        .enumerate()
        .map(|(idx, &v)| v * parity(grid, idx))
        .collect();
    fft3(&mut data, grid.points_per_axis(), true);
    let norm = 1.0 / grid.box_volume();
    match s.lattice() {
        Lattice::Standard => data.par_iter_mut().for_each(|v| *v *= norm),
        Lattice::Shifted => data
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| *v *= norm * shift_phase(grid, idx).conj()),
    }
    ComplexField {
        grid: grid.clone(),
        samples: data,
    }
}

/// Apply the Fourier multiplier `m(xi_local)` on the given lattice.
pub fn apply_multiplier(
    f: &ComplexField,
    lattice: Lattice,
    m: impl Fn(Vec3) -> Complex64 + Sync,
) -> ComplexField {
    let mut s = forward_transform(f, lattice);
    s.multiply(m);
    inverse_transform(&s)
}

/// Weight exponent `gamma`: the norm is that of `exp(-gamma <w>) f`, so
/// positive `gamma` measures the space `exp(gamma <w>) L^2`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightedNormSpec {
    pub gamma: f64,
}

pub fn japanese_bracket(w: Vec3) -> f64 {
    (1.0 + w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}

pub fn weighted_norm(f: &ComplexField, spec: WeightedNormSpec) -> f64 {
    let grid = f.grid();
    let s = f.samples();
    let sum = pairwise_sum_by(s.len(), &|idx| {
        let wgt = (-spec.gamma * japanese_bracket(grid.node_local(idx))).exp();
        (s[idx] * wgt).norm_sqr()
    });
    (grid.cell_volume() * sum).sqrt()
}

/// Multiply a field by `exp(s <w>)` pointwise.
pub fn apply_weight(f: &ComplexField, s: f64) -> ComplexField {
    let grid = f.grid().clone();
    let samples = f
        .samples()
        .par_iter()
        .enumerate()
        .map(|(idx, &z)| z * (s * japanese_bracket(grid.node_local(idx))).exp())
        .collect();
    ComplexField { grid, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::from_samples(grid, samples).unwrap()
    }

    fn rel_err(a: &ComplexField, b: &ComplexField) -> f64 {
        a.sub(b).unwrap().l2() / b.l2()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::new(1.0, 8, Frame::identity()).unwrap();
        let s = forward_transform(&ComplexField::zeros(&g), Lattice::Shifted);
        assert!(s.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn round_trip_both_lattices() {
        for (l, n) in [(1.0, 8), (8.0, 16), (3.0, 12)] {
            let g = Grid::new(l, n, Frame::identity()).unwrap();
            let f = random_field(&g, 7);
            for lat in [Lattice::Standard, Lattice::Shifted] {
                let back = inverse_transform(&forward_transform(&f, lat));
                assert!(rel_err(&back, &f) <= 1e-12);
            }
        }
    }

    #[test]
    fn shifted_character_concentrates_on_its_node() {
        let g = Grid::new(2.0, 8, Frame::identity()).unwrap();
        let target = g.index(2, 7, 5);
        let xi0 = g.freq_local(target, Lattice::Shifted);
        let f = ComplexField::from_local_fn(&g, |w| {
            Complex64::from_polar(1.0, xi0[0] * w[0] + xi0[1] * w[1] + xi0[2] * w[2])
        });
        let s = forward_transform(&f, Lattice::Shifted);
        let vol = g.box_volume();
        for (idx, v) in s.values().iter().enumerate() {
            let expect = if idx == target { vol } else { 0.0 };
            assert!((v - expect).norm() <= 1e-10 * vol, "node {idx}: {v}");
        }
    }

    #[test]
    fn parseval_with_convention_factor() {
        let g = Grid::new(3.0, 10, Frame::identity()).unwrap();
        let f = random_field(&g, 3);
        let lhs = g.cell_volume() * f.l2().powi(2);
        for lat in [Lattice::Standard, Lattice::Shifted] {
            let s = forward_transform(&f, lat);
            let rhs = s.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / g.box_volume();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        }
    }

    #[test]
    fn weighted_norm_values() {
        let g = Grid::new(1.0, 8, Frame::identity()).unwrap();
        let zero = ComplexField::zeros(&g);
        assert_eq!(weighted_norm(&zero, WeightedNormSpec { gamma: 0.3 }), 0.0);
        let one = zero.map(|_| Complex64::new(1.0, 0.0));
        let n = weighted_norm(&one, WeightedNormSpec { gamma: 0.0 });
        assert!((n - 2.0f64.powf(1.5)).abs() < 1e-12);
        let f = random_field(&g, 11);
        assert!(
            weighted_norm(&f, WeightedNormSpec { gamma: 0.5 })
                <= weighted_norm(&f, WeightedNormSpec { gamma: 0.0 })
        );
    }
}
