//! Periodic sampling boxes in three dimensions.
//!
//! A [`Grid`] samples the cube `[-L, L)^3` with `N` points per axis. Local
//! axis 0 is aligned with the first frame vector `nu`, which is also the axis
//! whose dual lattice may be half-shifted (see [`Lattice`]). Samples are laid
//! out row-major with axis 0 slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Orthonormal basis `(nu, mu, e3)`, stored as rows, in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub axes: [Vec3; 3],
}

impl Frame {
    pub const FRAME_TOL: f64 = 1e-12;

    pub fn identity() -> Self {
        Frame {
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn new(axes: [Vec3; 3]) -> Result<Self> {
        let frame = Frame { axes };
        let defect = frame.orthonormality_defect();
        if !(defect <= Self::FRAME_TOL) {
            return Err(Error::NonOrthonormalFrame(defect));
        }
        Ok(frame)
    }

    /// Right-handed frame with `nu` and `mu` given; `e3 = nu x mu`.
    pub fn from_nu_mu(nu: Vec3, mu: Vec3) -> Result<Self> {
        Self::new([nu, mu, cross(nu, mu)])
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                let d = (dot(self.axes[i], self.axes[j]) - target).abs();
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
        }
        worst
    }

    pub fn nu(&self) -> Vec3 {
        self.axes[0]
    }

    /// Components of a world vector along the frame axes.
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        [dot(self.axes[0], v), dot(self.axes[1], v), dot(self.axes[2], v)]
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (a, &c) in self.axes.iter().zip(local.iter()) {
            for d in 0..3 {
                out[d] += c * a[d];
            }
        }
        out
    }
}

/// Dual lattice used by a spectral transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lattice {
    /// `xi = dxi * k` on every axis.
    Standard,
    /// `xi_par = dxi * (k + 1/2)` along axis 0, standard elsewhere.
    Shifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
    frame: Frame,
}

impl Grid {
    pub fn new(half_width: f64, n: usize, frame: Frame) -> Result<Self> {
        if !n.is_multiple_of(2) || n < 4 {
            return Err(Error::OddN(n));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::BadHalfWidth(half_width));
        }
        let frame = Frame::new(frame.axes)?;
        Ok(Grid { half_width, n, frame })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dual_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    pub fn box_volume(&self) -> f64 {
        let side = 2.0 * self.half_width;
        side * side * side
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        let i = idx / (self.n * self.n);
        [i, j, k]
    }

    /// Coordinate of sample `i` along any axis: `-L + i h`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn node_local(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn node_world(&self, idx: usize) -> Vec3 {
        self.frame.to_world(self.node_local(idx))
    }

    /// Signed integer frequency of FFT bin `k`: `k` below `N/2`, `k - N` above.
    pub fn signed_bin(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Local dual-lattice coordinates of spectral node `idx`.
    pub fn freq_local(&self, idx: usize, lattice: Lattice) -> Vec3 {
        let [i, j, k] = self.unravel(idx);
        let dxi = self.dual_spacing();
        let shift = match lattice {
            Lattice::Standard => 0.0,
            Lattice::Shifted => 0.5,
        };
        [
            dxi * (self.signed_bin(i) as f64 + shift),
            dxi * self.signed_bin(j) as f64,
            dxi * self.signed_bin(k) as f64,
        ]
    }

    /// Same box and resolution with a different frame.
    pub fn with_frame(&self, frame: Frame) -> Result<Self> {
        Grid::new(self.half_width, self.n, frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings_from_definitions() {
        let g = Grid::new(8.0, 16, Frame::identity()).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert!((g.dual_spacing() - std::f64::consts::PI / 8.0).abs() < 1e-15);
        assert_eq!(g.spacing() * g.points_per_axis() as f64, 2.0 * g.half_width());
    }

    #[test]
    fn odd_n_rejected() {
        assert!(matches!(
            Grid::new(8.0, 15, Frame::identity()),
            Err(Error::OddN(15))
        ));
    }

    #[test]
    fn first_node_is_box_corner() {
        let g = Grid::new(2.0, 4, Frame::identity()).unwrap();
        assert_eq!(g.node_local(0), [-2.0, -2.0, -2.0]);
        assert_eq!(g.node_world(0), [-2.0, -2.0, -2.0]);
    }

    #[test]
    fn skewed_frame_rejected() {
        let bad = Frame::new([[1.0, 0.0, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(bad, Err(Error::NonOrthonormalFrame(_))));
    }

    #[test]
    fn shifted_lattice_never_hits_zero_parallel_frequency() {
        let g = Grid::new(3.0, 10, Frame::identity()).unwrap();
        let min = (0..g.len())
            .map(|idx| g.freq_local(idx, Lattice::Shifted)[0].abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, g.dual_spacing() / 2.0);
    }

    #[test]
    fn unravel_inverts_index() {
        let g = Grid::new(1.0, 6, Frame::identity()).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.unravel(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }
}
