//! Scenario files: TOML, unknown keys rejected, every precondition checked
//! before any compute starts.

use std::path::{Path, PathBuf};

use cgo_core::faddeev::ComplexMomentum;
use cgo_core::grid::{dot, norm, Frame, Grid, Vec3};
use cgo_core::krylov::GmresConfig;
use cgo_core::potential::Potential;
use cgo_core::recon::{self, CompletionConfig, ReconFrame, ReconGrid, RecoverConfig, Screening, ShellSpec};
use cgo_core::scattering::{ResolventMethod, ScatteringConfig};
use cgo_core::Descriptor;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    300
}
fn default_restart() -> usize {
    30
}
fn default_scattering_tol() -> f64 {
    1e-10
}
fn default_probes() -> usize {
    cgo_core::cgo::DEFAULT_PROBES
}
fn default_threshold() -> f64 {
    cgo_core::cgo::DEFAULT_THRESHOLD
}
fn default_power_iterations() -> usize {
    cgo_core::faddeev::POWER_ITERATIONS
}
fn default_reg() -> f64 {
    CompletionConfig::default().reg_weight
}
fn default_widths() -> Vec<f64> {
    CompletionConfig::default().widths
}
fn default_ball_samples() -> usize {
    CompletionConfig::default().ball_samples
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Energy `lambda`, in inverse length squared.
    pub lambda: f64,
    /// Declared decay rate of the potentials, in inverse length.
    pub gamma0: f64,
    pub grid: GridSpec,
    pub potential: Descriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_prime: Option<Descriptor>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<ScatteringSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cgo: Option<CgoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover: Option<RecoverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Box is `[-L, L)^3`, in length units.
    pub half_width: f64,
    pub points_per_axis: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: default_tol(),
            max_iter: default_max_iter(),
            restart: default_restart(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolventSpec {
    /// Truncated kernel on a doubled box.
    #[default]
    Padded,
    /// Truncated kernel on the box itself.
    Truncated,
    /// Damped symbol with Richardson extrapolation.
    Damped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringSpec {
    pub k_max: usize,
    #[serde(default = "default_scattering_tol")]
    pub tol: f64,
    #[serde(default)]
    pub resolvent: ResolventSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumSpec {
    pub nu: Vec3,
    /// `(re, im)`
    pub z: [f64; 2],
    pub rho_perp: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Inverse length.
    pub zeta: Vec3,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgoSpec {
    #[serde(default)]
    pub momenta: Vec<MomentumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default = "yes")]
    pub save_fields: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub im_z: Vec<f64>,
    #[serde(default)]
    pub re_z: f64,
    /// Components along the second and third grid axes.
    pub rho_perp: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_power_iterations")]
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    /// `(re, im)` pairs.
    pub z: Vec<[f64; 2]>,
    /// Components along the second and third grid axes.
    pub rho_perp: Vec<[f64; 2]>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellBlock {
    pub directions: usize,
    pub radii: Vec<f64>,
    #[serde(default = "yes")]
    pub antipodal: bool,
}

impl ShellBlock {
    pub fn spec(&self) -> ShellSpec {
        ShellSpec {
            directions: self.directions,
            radii: self.radii.clone(),
            antipodal: self.antipodal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningSpec {
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionSpec {
    pub ball_radius: f64,
    #[serde(default = "default_reg")]
    pub reg_weight: f64,
    #[serde(default = "default_widths")]
    pub widths: Vec<f64>,
    #[serde(default = "default_ball_samples")]
    pub ball_samples: usize,
}

impl CompletionSpec {
    pub fn config(&self) -> CompletionConfig {
        CompletionConfig {
            widths: self.widths.clone(),
            reg_weight: self.reg_weight,
            ball_samples: self.ball_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSpec {
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub zeta: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<ShellBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<CompletionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSpec {
    pub schedule: Vec<f64>,
    pub shell: ShellBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Criterion numbers to run; all when empty.
    #[serde(default)]
    pub only: Vec<u32>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(config(msg()))
    }
}

fn schedule_ok(path: &str, s: &[f64]) -> Result<(), CliError> {
    check(!s.is_empty(), || format!("{path}: t schedule is empty"))?;
    check(s.iter().all(|t| t.is_finite() && *t > 0.0), || format!("{path}: t values must be positive"))?;
    check(s.windows(2).all(|w| w[1] > w[0]), || format!("{path}: t schedule must be strictly increasing"))
}

fn zeta_ok(path: &str, zeta: Vec3, lambda: f64, schedule: &[f64]) -> Result<(), CliError> {
    let lower = 2.0 * lambda.sqrt();
    check(norm(zeta) > lower, || {
        format!("{path}: |zeta| = {} violates the shell bound |zeta| > 2 sqrt(lambda) = {lower}", norm(zeta))
    })?;
    let frame = ReconFrame::canonical(zeta, lambda).map_err(|e| config(format!("{path}: {e}")))?;
    let tc = frame.critical_t();
    check(schedule.iter().all(|t| *t > tc), || {
        format!("{path}: every t must exceed the critical value {tc}")
    })
}

fn unit_ok(path: &str, v: Vec3) -> Result<(), CliError> {
    check((norm(v) - 1.0).abs() <= 1e-12, || format!("{path}: must be a unit vector"))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim().to_string();
            if path == "." || path.is_empty() {
                config(format!("scenario: {msg}"))
            } else {
                config(format!("scenario field `{path}`: {msg}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML with every default written out.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn gmres(&self) -> GmresConfig {
        GmresConfig {
            restart: self.solver.restart,
            max_iter: self.solver.max_iter,
            tol: self.solver.tol,
        }
    }

    pub fn scattering_config(&self) -> ScatteringConfig {
        let spec = self.scattering.unwrap_or(ScatteringSpec {
            k_max: 0,
            tol: default_scattering_tol(),
            resolvent: ResolventSpec::Padded,
        });
        let resolvent = match spec.resolvent {
            ResolventSpec::Padded => ResolventMethod::Truncated { radius: None, padded: true },
            ResolventSpec::Truncated => ResolventMethod::Truncated { radius: None, padded: false },
            ResolventSpec::Damped => ResolventMethod::Damped { eps: None, richardson: true },
        };
        ScatteringConfig {
            resolvent,
            gmres: GmresConfig {
                tol: spec.tol,
                ..self.gmres()
            },
        }
    }

    pub fn recover_config(&self) -> RecoverConfig {
        RecoverConfig {
            grid: ReconGrid {
                half_width: self.grid.half_width,
                points_per_axis: self.grid.points_per_axis,
            },
            gmres: self.gmres(),
            screening: self.recover.as_ref().and_then(|r| r.screening).map(|s| Screening {
                probes: s.probes,
                threshold: s.threshold,
                seed: self.seed,
            }),
        }
    }

    pub fn base_grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.half_width, self.grid.points_per_axis, Frame::identity())
            .map_err(|e| config(format!("grid: {e}")))
    }

    pub fn potential_on(&self, grid: &Grid) -> Result<Potential, CliError> {
        Potential::from_descriptor(&self.potential, grid, self.gamma0).map_err(|e| config(format!("potential: {e}")))
    }

    pub fn potential_prime_on(&self, grid: &Grid) -> Result<Potential, CliError> {
        let d = self
            .potential_prime
            .as_ref()
            .ok_or_else(|| config("missing block `potential_prime`"))?;
        Potential::from_descriptor(d, grid, self.gamma0).map_err(|e| config(format!("potential_prime: {e}")))
    }

    pub fn scan_momentum(z: [f64; 2], rp: [f64; 2]) -> Result<ComplexMomentum, CliError> {
        ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(z[0], z[1]), [0.0, rp[0], rp[1]])
            .map_err(|e| config(format!("scan: {e}")))
    }

    /// Checks shared by every subcommand plus those of `block`.
    pub fn validate(&self, block: &str) -> Result<(), CliError> {
        check(!self.name.is_empty(), || "name: must not be empty".into())?;
        check(
            !self.name.contains(['/', '\\']) && self.name != "." && self.name != "..",
            || "name: must be a plain file name".into(),
        )?;
        check(self.lambda.is_finite() && self.lambda > 0.0, || "lambda: energy must be positive".into())?;
        check(self.gamma0.is_finite() && self.gamma0 > 0.0, || "gamma0: decay rate must be positive".into())?;
        check(self.solver.tol > 0.0 && self.solver.tol < 1.0, || "solver.tol: must lie in (0, 1)".into())?;
        check(self.solver.restart > 0 && self.solver.max_iter > 0, || {
            "solver: restart and max_iter must be positive".into()
        })?;
        let grid = self.base_grid()?;
        self.potential_on(&grid)?;
        if self.potential_prime.is_some() {
            self.potential_prime_on(&grid)?;
        }
        if let Some(s) = &self.scattering {
            check(s.tol > 0.0 && s.tol < 1.0, || "scattering.tol: must lie in (0, 1)".into())?;
        }
        match block {
            "forward" => {
                check(self.scattering.is_some(), || "missing block `scattering`".into())?;
            }
            "cgo" => {
                let c = self.cgo.as_ref().ok_or_else(|| config("missing block `cgo`"))?;
                check(!c.momenta.is_empty() || c.family.is_some(), || {
                    "cgo: give `momenta` or `family`".into()
                })?;
                for (i, m) in c.momenta.iter().enumerate() {
                    let path = format!("cgo.momenta[{i}]");
                    unit_ok(&format!("{path}.nu"), m.nu)?;
                    check(m.z[1] != 0.0, || format!("{path}.z: imaginary part must be nonzero"))?;
                    check(dot(m.nu, m.rho_perp).abs() <= 1e-12, || {
                        format!("{path}.rho_perp: must be orthogonal to nu")
                    })?;
                }
                if let Some(f) = &c.family {
                    schedule_ok("cgo.family.t", &f.t)?;
                    zeta_ok("cgo.family.zeta", f.zeta, self.lambda, &f.t)?;
                }
            }
            "scan-exceptional" => {
                let s = self.scan.as_ref().ok_or_else(|| config("missing block `scan`"))?;
                for (i, z) in s.z.iter().enumerate() {
                    check(z[1] != 0.0, || format!("scan.z[{i}]: imaginary part must be nonzero"))?;
                }
                check(s.probes > 0, || "scan.probes: must be positive".into())?;
                if let Some(d) = &s.decay {
                    check(!d.im_z.is_empty(), || "scan.decay.im_z: empty sweep".into())?;
                    check(d.im_z.iter().all(|v| *v != 0.0), || {
                        "scan.decay.im_z: values must be nonzero".into()
                    })?;
                    check(d.gamma.is_none_or(|g| g > 0.0), || "scan.decay.gamma: must be positive".into())?;
                }
            }
            "recover" => {
                let r = self.recover.as_ref().ok_or_else(|| config("missing block `recover`"))?;
                schedule_ok("recover.schedule", &r.schedule)?;
                check(!r.zeta.is_empty() || r.shell.is_some(), || "recover: give `zeta` or `shell`".into())?;
                for (i, z) in r.zeta.iter().enumerate() {
                    zeta_ok(&format!("recover.zeta[{i}]"), *z, self.lambda, &r.schedule)?;
                }
                if let Some(s) = &r.shell {
                    self.shell_ok("recover.shell", s, &r.schedule)?;
                }
                if let Some(c) = &r.completion {
                    check(r.shell.is_some() || !r.zeta.is_empty(), || "recover.completion: no shell data".into())?;
                    check(c.ball_radius > 0.0, || "recover.completion.ball_radius: must be positive".into())?;
                    check(c.reg_weight > 0.0, || {
                        "recover.completion.reg_weight: must be positive (the normal system is ill-conditioned)".into()
                    })?;
                    check(!c.widths.is_empty() && c.widths.iter().all(|w| *w > 0.0), || {
                        "recover.completion.widths: must be positive".into()
                    })?;
                    check(c.ball_samples >= 2, || "recover.completion.ball_samples: need at least 2".into())?;
                }
            }
            "uniqueness" => {
                check(self.potential_prime.is_some(), || "missing block `potential_prime`".into())?;
                check(self.scattering.is_some(), || "missing block `scattering`".into())?;
                let u = self.uniqueness.as_ref().ok_or_else(|| config("missing block `uniqueness`"))?;
                schedule_ok("uniqueness.schedule", &u.schedule)?;
                self.shell_ok("uniqueness.shell", &u.shell, &u.schedule)?;
            }
            "verify" => {
                if let Some(v) = &self.verify {
                    check(v.only.iter().all(|c| (1..=13).contains(c)), || {
                        "verify.only: criteria are numbered 1 to 13".into()
                    })?;
                }
            }
            other => return Err(config(format!("unknown subcommand `{other}`"))),
        }
        Ok(())
    }

    fn shell_ok(&self, path: &str, s: &ShellBlock, schedule: &[f64]) -> Result<(), CliError> {
        let (lower, upper) = recon::shell_bounds(self.lambda, self.gamma0);
        s.spec().points().map_err(|e| config(format!("{path}: {e}")))?;
        for (i, r) in s.radii.iter().enumerate() {
            check(*r > lower && *r < upper, || {
                format!("{path}.radii[{i}]: {r} outside the open shell ({lower}, {upper})")
            })?;
            zeta_ok(&format!("{path}.radii[{i}]"), [*r, 0.0, 0.0], self.lambda, schedule)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "m"
lambda = 1.0
gamma0 = 3.0
[grid]
half_width = 4.0
points_per_axis = 8
[potential]
kind = "gaussian"
amplitude = 0.1
sigma = 1.0
"#;

    #[test]
    fn defaults_are_filled() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.solver, SolverSpec::default());
        s.validate("verify").unwrap();
    }

    #[test]
    fn normalization_is_a_fixed_point() {
        let s = Scenario::parse(MINIMAL).unwrap();
        let once = s.normalized();
        let again = Scenario::parse(&once).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.normalized(), once);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{MINIMAL}\n[solver]\ntol = 1e-8\ntolerance = 1e-9\n");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("solver"), "{err}");
        assert!(err.contains("tolerance"), "{err}");
    }

    #[test]
    fn missing_blocks_are_named() {
        let text = MINIMAL.replace("[potential]\nkind = \"gaussian\"\namplitude = 0.1\nsigma = 1.0\n", "");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("potential"), "{err}");
        let s = Scenario::parse(MINIMAL).unwrap();
        assert!(s.validate("recover").unwrap_err().to_string().contains("recover"));
    }

    #[test]
    fn shell_bound_is_strict() {
        let text = format!("{MINIMAL}\n[recover]\nschedule = [2.0]\nzeta = [[2.0, 0.0, 0.0]]\n");
        let err = Scenario::parse(&text).unwrap().validate("recover").unwrap_err();
        assert!(err.to_string().contains("shell bound"), "{err}");
    }
}
