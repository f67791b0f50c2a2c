use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{norm, Grid, Vec3};
use crate::sample::{sample_function, Descriptor};

/// Real potential sampled on a grid, with its declared decay rate `gamma0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    field: ComplexField,
    gamma0: f64,
    descriptor: Option<Descriptor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `max |V(w)| exp(gamma0 |w|)` over the grid.
    pub weighted_sup: f64,
}

impl Potential {
    pub fn from_descriptor(descriptor: &Descriptor, grid: &Grid, gamma0: f64) -> Result<Self> {
        if !descriptor.is_real() {
            return Err(Error::InvalidArgument("potential descriptor must be real".into()));
        }
        check_gamma(gamma0)?;
        Ok(Potential {
            field: sample_function(descriptor, grid),
            gamma0,
            descriptor: Some(descriptor.clone()),
        })
    }

    pub fn from_field(field: ComplexField, gamma0: f64) -> Result<Self> {
        check_gamma(gamma0)?;
        if field.samples().iter().any(|z| z.im != 0.0) {
            return Err(Error::InvalidArgument("potential samples must be real".into()));
        }
        Ok(Potential {
            field,
            gamma0,
            descriptor: None,
        })
    }

    pub fn zero(grid: &Grid, gamma0: f64) -> Result<Self> {
        Self::from_field(ComplexField::zeros(grid), gamma0)
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn descriptor(&self) -> Option<&Descriptor> {
        self.descriptor.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_zero()
    }

    pub fn decay_report(&self) -> DecayReport {
        let grid = self.grid();
        let weighted_sup = self
            .field
            .samples()
            .iter()
            .enumerate()
            .map(|(idx, z)| z.norm() * (self.gamma0 * norm(grid.node_local(idx))).exp())
            .fold(0.0, f64::max);
        DecayReport { weighted_sup }
    }

    /// The same potential on another grid. Needs a descriptor unless the
    /// grids coincide.
    pub fn on_grid(&self, grid: &Grid) -> Result<Self> {
        if grid == self.grid() {
            return Ok(self.clone());
        }
        match &self.descriptor {
            Some(d) => Self::from_descriptor(d, grid, self.gamma0),
            None if self.is_zero() => Self::zero(grid, self.gamma0),
            None => Err(Error::GridMismatch),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Potential {
            field: self.field.scale(Complex64::new(factor, 0.0)),
            gamma0: self.gamma0,
            descriptor: self.descriptor.as_ref().map(|d| d.scaled(factor)),
        }
    }

    /// `int V(w) exp(i zeta.w) dw`, closed form when available, otherwise
    /// grid quadrature.
    pub fn fourier_transform(&self, zeta: Vec3) -> Complex64 {
        if let Some(v) = self.descriptor.as_ref().and_then(|d| d.fourier_transform(zeta)) {
            return v;
        }
        let grid = self.grid();
        let s = self.field.samples();
        crate::sum::pairwise_sum_complex_by(s.len(), &|idx| {
            s[idx] * Complex64::from_polar(1.0, crate::grid::dot(zeta, grid.node_world(idx)))
        }) * grid.cell_volume()
    }
}

fn check_gamma(gamma0: f64) -> Result<()> {
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay rate must be positive, got {gamma0}")));
    }
    Ok(())
}

/// Weight exponent used for the discrete weighted spaces: `min(0.25, gamma0 / 4)`.
pub fn working_gamma(gamma0: f64) -> f64 {
    0.25f64.min(gamma0 / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;

    #[test]
    fn descriptor_samples_match() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let d = Descriptor::Gaussian { amplitude: 0.3, sigma: 1.2, center: [0.5, 0.0, 0.0] };
        let v = Potential::from_descriptor(&d, &g, 3.0).unwrap();
        for (idx, z) in v.field().samples().iter().enumerate() {
            assert!((z - d.eval(g.node_world(idx))).norm() <= 1e-12);
            assert_eq!(z.im, 0.0);
        }
        assert!(v.decay_report().weighted_sup.is_finite());
    }

    #[test]
    fn complex_field_rejected() {
        let g = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let f = ComplexField::zeros(&g).map(|_| Complex64::new(0.0, 1.0));
        assert!(Potential::from_field(f, 1.0).is_err());
    }

    #[test]
    fn quadrature_transform_matches_closed_form() {
        let g = Grid::new(8.0, 32, Frame::identity()).unwrap();
        let d = Descriptor::Gaussian { amplitude: 0.1, sigma: 1.0, center: [0.3, -0.2, 0.1] };
        let v = Potential::from_descriptor(&d, &g, 3.0).unwrap();
        let raw = Potential::from_field(v.field().clone(), 3.0).unwrap();
        let zeta = [1.0, 2.0, -0.5];
        let exact = v.fourier_transform(zeta);
        assert!((raw.fourier_transform(zeta) - exact).norm() <= 1e-10 * exact.norm());
    }
}
