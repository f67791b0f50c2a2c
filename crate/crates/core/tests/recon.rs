use cgo_core::field::ComplexField;
use cgo_core::grid::{norm, Frame, Grid};
use cgo_core::krylov::GmresConfig;
use cgo_core::oracle::brute_pairing;
use cgo_core::potential::Potential;
use cgo_core::recon::*;
use cgo_core::rng::stream;
use cgo_core::sample::Descriptor;
use cgo_core::scattering::ScatteringConfig;
use num_complex::Complex64;
use rand::Rng;

const GAUSS: Descriptor = Descriptor::Gaussian { amplitude: 0.1, sigma: 1.0, center: [0.0; 3] };

fn cfg() -> RecoverConfig {
    RecoverConfig {
        grid: ReconGrid { half_width: 8.0, points_per_axis: 32 },
        gmres: GmresConfig::default(),
        screening: None,
    }
}

fn potentials(d: &Descriptor) -> (Potential, Potential) {
    let g = Grid::new(8.0, 32, Frame::identity()).unwrap();
    (Potential::from_descriptor(d, &g, 3.0).unwrap(), Potential::zero(&g, 3.0).unwrap())
}

fn truth(r: f64) -> f64 {
    0.1 * (2.0 * std::f64::consts::PI).powf(1.5) * (-r * r / 2.0).exp()
}

#[test]
fn pairing_without_corrections_is_the_transform() {
    let g = Grid::new(8.0, 32, Frame::identity()).unwrap();
    let (v, _) = potentials(&GAUSS);
    let zero = ComplexField::zeros(&g);
    let s = pairing_integral(v.field(), &zero, &zero, [3.0, 0.0, 0.0], 1.0).unwrap();
    assert!((s.value.re - 0.0174958).abs() <= 1e-6, "{}", s.value);
    let none = pairing_integral(&zero, v.field(), v.field(), [3.0, 0.0, 0.0], 1.0).unwrap();
    assert_eq!(none.value, Complex64::new(0.0, 0.0));
}

#[test]
fn pairing_matches_triple_loop_with_corrections() {
    let g = Grid::new(3.0, 8, Frame::identity()).unwrap();
    let mut r = stream(3, "pairing", 0);
    let mut field = || {
        let s = (0..g.len()).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        ComplexField::from_samples(&g, s).unwrap()
    };
    let (d, a, b) = (field(), field(), field());
    let zeta = [2.1, -0.4, 1.3];
    let fast = pairing_integral(&d, &a, &b, zeta, 1.0).unwrap().value;
    let slow = brute_pairing(&d, &a, &b, zeta);
    assert!((fast - slow).norm() <= 1e-12 * slow.norm());
}

#[test]
fn gaussian_transform_recovered_with_decreasing_error() {
    let (v, z) = potentials(&GAUSS);
    let rec = recover_fourier(&v, &z, 1.0, [3.0, 0.0, 0.0], &[2.0, 4.0, 8.0], &cfg()).unwrap();
    let exact = 0.0174958;
    let errs: Vec<f64> = rec.table.iter().map(|r| (r.value - exact).norm()).collect();
    assert!((rec.estimate - exact).norm() <= 0.05 * exact, "{}", rec.estimate);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(rec.table.iter().all(|r| r.iterations[0] > 0 && r.iterations[1] == 0));
    assert_eq!(rec.table.last().unwrap().distance_to_final, 0.0);
}

#[test]
fn equal_potentials_give_zero() {
    let (v, _) = potentials(&GAUSS);
    let rec = recover_fourier(&v, &v, 1.0, [3.0, 0.0, 0.0], &[2.0, 4.0], &cfg()).unwrap();
    assert!(rec.table.iter().all(|r| r.value == Complex64::new(0.0, 0.0)));
}

#[test]
fn shell_preconditions() {
    let (v, z) = potentials(&GAUSS);
    assert!(matches!(
        recover_fourier(&v, &z, 1.0, [2.0, 0.0, 0.0], &[2.0], &cfg()),
        Err(cgo_core::Error::ShellBound { .. })
    ));
    assert!(recover_fourier(&v, &z, 1.0, [3.0, 0.0, 0.0], &[4.0, 2.0], &cfg()).is_err());
    let spec = ShellSpec { directions: 4, radii: vec![3.7], antipodal: true };
    assert!(matches!(
        shell_scan(&v, &z, 1.0, &spec, &[4.0], &cfg()),
        Err(cgo_core::Error::ShellBound { .. })
    ));
}

#[test]
fn screening_passes_regular_momenta() {
    let (v, z) = potentials(&GAUSS);
    let c = RecoverConfig {
        screening: Some(Screening { probes: 4, threshold: 1e-3, seed: 1 }),
        ..cfg()
    };
    let rec = recover_fourier(&v, &z, 1.0, [3.0, 0.0, 0.0], &[4.0], &c).unwrap();
    assert!((rec.estimate - 0.0174958).norm() <= 0.05 * 0.0174958);
}

fn reference_shell() -> ShellRecovery {
    let (v, z) = potentials(&GAUSS);
    let spec = ShellSpec { directions: 8, radii: vec![2.4, 3.0, 3.4], antipodal: true };
    shell_scan(&v, &z, 1.0, &spec, &[2.0, 4.0, 8.0, 16.0], &cfg()).unwrap()
}

#[test]
fn shell_scan_recovers_gaussian_profile() {
    let shell = reference_shell();
    assert_eq!(shell.points.len(), 24);
    assert_eq!(shell.failures().count(), 0);
    for (zeta, e) in shell.estimates() {
        let t = truth(norm(zeta));
        assert!((e - t).norm() <= 0.05 * t, "{zeta:?}: {e} vs {t}");
    }
    let defect = shell.conjugate_defect.unwrap();
    assert!(defect <= 1e-8, "{defect}");
    // isotropy at each radius
    for r in [2.4, 3.0, 3.4] {
        let vals: Vec<f64> = shell
            .points
            .iter()
            .filter(|p| (p.abs_zeta - r).abs() < 1e-12)
            .map(|p| p.estimate.unwrap().re)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(var.sqrt() <= 0.02 * mean.abs(), "r={r}: {vals:?}");
    }
}

fn exact_shell(noise: f64, seed: u64) -> ShellRecovery {
    let mut rng = stream(seed, "shell-noise", 0);
    let spec = ShellSpec { directions: 8, radii: vec![2.4, 3.0, 3.4], antipodal: true };
    let points = spec
        .points()
        .unwrap()
        .into_iter()
        .map(|zeta| {
            let r = norm(zeta);
            let e = truth(r) * (1.0 + noise * rng.gen_range(-1.0..1.0) * 3f64.sqrt());
            ShellPoint {
                zeta,
                abs_zeta: r,
                t: 16.0,
                estimate: Some(Complex64::new(e, 0.0)),
                quadrature_error: Some(0.0),
                error: None,
            }
        })
        .collect();
    let (lower, upper) = shell_bounds(1.0, 3.0);
    ShellRecovery { lambda: 1.0, gamma0: 3.0, lower, upper, points, conjugate_defect: None }
}

#[test]
fn completion_reaches_the_origin() {
    let c = lowfreq_complete(&exact_shell(0.0, 0), 2.0, &CompletionConfig::default()).unwrap();
    let v0 = c.samples[0].1;
    assert_eq!(c.samples[0].0, 0.0);
    assert!((v0 - 1.574961).norm() <= 0.03 * 1.574961, "{v0}");
    for seed in 0..20 {
        let c = lowfreq_complete(&exact_shell(0.01, seed), 2.0, &CompletionConfig::default()).unwrap();
        let v0 = c.eval(0.0);
        assert!((v0 - 1.574961).norm() <= 0.10 * 1.574961, "seed {seed}: {v0}");
    }
}

#[test]
fn completion_of_recovered_shell() {
    let shell = reference_shell();
    let c = lowfreq_complete(&shell, 2.0, &CompletionConfig::default()).unwrap();
    assert!((c.eval(0.0) - 1.574961).norm() <= 0.10 * 1.574961, "{}", c.eval(0.0));
}

fn uniqueness_cfg() -> UniquenessConfig {
    UniquenessConfig {
        k_max: 2,
        scattering: ScatteringConfig::default(),
        shell: ShellSpec { directions: 4, radii: vec![2.5, 3.2], antipodal: true },
        schedule: vec![4.0, 8.0, 16.0],
        recover: cfg(),
    }
}

#[test]
fn identical_potentials_sit_at_baseline() {
    let (v, _) = potentials(&GAUSS);
    let rep = uniqueness_experiment(&v, &v, 1.0, &uniqueness_cfg()).unwrap();
    assert!(rep.at_baseline(), "{rep:?}");
    assert!(rep.shell_match.is_none());
    assert!(rep.smatrix_scale > 0.0 && rep.pairing_scale > 0.0 && rep.shell_scale > 0.0);
}

#[test]
fn scaled_potential_is_discriminated() {
    let (v, _) = potentials(&GAUSS);
    let rep = uniqueness_experiment(&v, &v.scaled(0.9), 1.0, &uniqueness_cfg()).unwrap();
    assert!(!rep.at_baseline());
    assert!(rep.smatrix_discrepancy > 1e-4 * rep.smatrix_scale);
    assert!(rep.pairing_discrepancy > 1e-3 * rep.pairing_scale);
    for c in &rep.comparison {
        let target = 0.1 * truth(norm(c.zeta));
        assert!((c.direct - target).norm() <= 1e-12);
        assert!((c.estimate.unwrap() - target).norm() <= 0.05 * target, "{c:?}");
    }
}

#[test]
fn translation_phase_is_recovered() {
    let w0 = [0.3, -0.2, 0.1];
    let (v, _) = potentials(&GAUSS);
    let moved = Potential::from_descriptor(&GAUSS.translated(w0), v.grid(), 3.0).unwrap();
    let rep = uniqueness_experiment(&v, &moved, 1.0, &uniqueness_cfg()).unwrap();
    assert!(rep.smatrix_discrepancy > 1e-4 * rep.smatrix_scale);
    for c in &rep.comparison {
        let e = c.estimate.unwrap();
        assert!((e - c.direct).norm() <= 0.05 * c.direct.norm(), "{c:?}");
    }
    assert!(rep.shell_match.unwrap() <= 0.05);
}
