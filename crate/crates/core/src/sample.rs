//! Closed-form field descriptors and pointwise sampling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{dot, norm, sub, Grid, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Descriptor {
    /// `A exp(-|w - c|^2 / (2 sigma^2))`
    Gaussian {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        center: Vec3,
    },
    /// `A exp(-gamma0 (sqrt(|w - c|^2 + r0^2) - r0))`, smooth at the center
    /// and decaying like `exp(-gamma0 |w|)`.
    ExponentialBump {
        amplitude: f64,
        gamma0: f64,
        r0: f64,
        #[serde(default)]
        center: Vec3,
    },
    /// `A exp(i rho.w)` for complex `rho`, given as `(re, im)` pairs.
    PlaneWave {
        rho: [[f64; 2]; 3],
        #[serde(default = "unit")]
        amplitude: f64,
    },
    Sum { terms: Vec<Descriptor> },
}

fn unit() -> f64 {
    1.0
}

const KINDS: [&str; 4] = ["gaussian", "exponential-bump", "plane-wave", "sum"];

impl Descriptor {
    /// Parse from JSON, reporting an unknown `kind` as [`Error::UnknownDescriptor`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        check_kinds(value)?;
        Ok(serde_json::from_value(value.clone())?)
    }

    pub fn eval(&self, w: Vec3) -> Complex64 {
        match self {
            Descriptor::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                let d = sub(w, *center);
                Complex64::new(amplitude * (-dot(d, d) / (2.0 * sigma * sigma)).exp(), 0.0)
            }
            Descriptor::ExponentialBump {
                amplitude,
                gamma0,
                r0,
                center,
            } => {
                let r = norm(sub(w, *center));
                let s = (r * r + r0 * r0).sqrt() - r0;
                Complex64::new(amplitude * (-gamma0 * s).exp(), 0.0)
            }
            Descriptor::PlaneWave { rho, amplitude } => {
                let mut phase = Complex64::new(0.0, 0.0);
                for d in 0..3 {
                    phase += Complex64::new(rho[d][0], rho[d][1]) * w[d];
                }
                *amplitude * (Complex64::i() * phase).exp()
            }
            Descriptor::Sum { terms } => terms.iter().map(|t| t.eval(w)).sum(),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Descriptor::Gaussian { .. } | Descriptor::ExponentialBump { .. } => true,
            Descriptor::PlaneWave { .. } => false,
            Descriptor::Sum { terms } => terms.iter().all(Descriptor::is_real),
        }
    }

    /// Exponential decay rate guaranteed by the descriptor, if any.
    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            Descriptor::Gaussian { .. } => Some(f64::INFINITY),
            Descriptor::ExponentialBump { gamma0, .. } => Some(*gamma0),
            Descriptor::PlaneWave { .. } => None,
            Descriptor::Sum { terms } => terms
                .iter()
                .map(Descriptor::decay_rate)
                .try_fold(f64::INFINITY, |acc, g| g.map(|g| acc.min(g))),
        }
    }

    /// `int f(w) exp(i zeta.w) dw` when a closed form exists.
    pub fn fourier_transform(&self, zeta: Vec3) -> Option<Complex64> {
        match self {
            Descriptor::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                let s3 = sigma * sigma * sigma;
                let mag = amplitude
                    * (2.0 * std::f64::consts::PI).powf(1.5)
                    * s3
                    * (-sigma * sigma * dot(zeta, zeta) / 2.0).exp();
                Some(Complex64::from_polar(mag, dot(zeta, *center)))
            }
            Descriptor::Sum { terms } => terms.iter().map(|t| t.fourier_transform(zeta)).sum(),
            _ => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> Descriptor {
        match self {
            Descriptor::Gaussian {
                amplitude,
                sigma,
                center,
            } => Descriptor::Gaussian {
                amplitude: amplitude * factor,
                sigma: *sigma,
                center: *center,
            },
            Descriptor::ExponentialBump {
                amplitude,
                gamma0,
                r0,
                center,
            } => Descriptor::ExponentialBump {
                amplitude: amplitude * factor,
                gamma0: *gamma0,
                r0: *r0,
                center: *center,
            },
            Descriptor::PlaneWave { rho, amplitude } => Descriptor::PlaneWave {
                rho: *rho,
                amplitude: amplitude * factor,
            },
            Descriptor::Sum { terms } => Descriptor::Sum {
                terms: terms.iter().map(|t| t.scaled(factor)).collect(),
            },
        }
    }

    pub fn translated(&self, shift: Vec3) -> Descriptor {
        let mv = |c: &Vec3| [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]];
        match self {
            Descriptor::Gaussian {
                amplitude,
                sigma,
                center,
            } => Descriptor::Gaussian {
                amplitude: *amplitude,
                sigma: *sigma,
                center: mv(center),
            },
            Descriptor::ExponentialBump {
                amplitude,
                gamma0,
                r0,
                center,
            } => Descriptor::ExponentialBump {
                amplitude: *amplitude,
                gamma0: *gamma0,
                r0: *r0,
                center: mv(center),
            },
            Descriptor::PlaneWave { .. } => self.clone(),
            Descriptor::Sum { terms } => Descriptor::Sum {
                terms: terms.iter().map(|t| t.translated(shift)).collect(),
            },
        }
    }
}

fn check_kinds(value: &serde_json::Value) -> Result<()> {
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| Error::UnknownDescriptor("<missing>".into()))?;
    if !KINDS.contains(&kind) {
        return Err(Error::UnknownDescriptor(kind.to_string()));
    }
    if let Some(terms) = value.get("terms").and_then(|t| t.as_array()) {
        for t in terms {
            check_kinds(t)?;
        }
    }
    Ok(())
}

pub fn sample_function(descriptor: &Descriptor, grid: &Grid) -> ComplexField {
    ComplexField::from_fn(grid, |w| descriptor.eval(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frame;

    #[test]
    fn gaussian_peak() {
        let g = Descriptor::Gaussian {
            amplitude: 1.0,
            sigma: 1.0,
            center: [0.0; 3],
        };
        assert_eq!(g.eval([0.0; 3]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn decaying_plane_wave() {
        let p = Descriptor::PlaneWave {
            rho: [[0.0, 0.0], [0.0, 0.0], [0.0, 1.0]],
            amplitude: 1.0,
        };
        let v = p.eval([0.0, 0.0, 1.0]);
        assert!((v.re - 0.3678794).abs() < 1e-7 && v.im.abs() < 1e-15);
    }

    #[test]
    fn gaussian_samples_respect_tail_bound() {
        let grid = Grid::new(4.0, 8, Frame::identity()).unwrap();
        let d = Descriptor::Gaussian {
            amplitude: 2.0,
            sigma: 0.7,
            center: [0.0; 3],
        };
        let f = sample_function(&d, &grid);
        for (idx, z) in f.samples().iter().enumerate() {
            let w = grid.node_world(idx);
            let bound = 2.0 * (-dot(w, w) / (2.0 * 0.49)).exp();
            assert!(z.norm() <= bound * (1.0 + 1e-15));
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        let v = serde_json::json!({"kind": "lorentzian", "amplitude": 1.0});
        assert!(matches!(
            Descriptor::from_json(&v),
            Err(Error::UnknownDescriptor(k)) if k == "lorentzian"
        ));
        let nested = serde_json::json!({"kind": "sum", "terms": [{"kind": "box"}]});
        assert!(matches!(
            Descriptor::from_json(&nested),
            Err(Error::UnknownDescriptor(_))
        ));
    }

    #[test]
    fn gaussian_transform_reference_value() {
        let d = Descriptor::Gaussian {
            amplitude: 0.1,
            sigma: 1.0,
            center: [0.0; 3],
        };
        let v = d.fourier_transform([3.0, 0.0, 0.0]).unwrap();
        assert!((v.re - 0.017_496_236_236_57).abs() < 1e-12);
        assert!((v.re - 0.0174958).abs() < 0.05 * 0.0174958);
    }
}
