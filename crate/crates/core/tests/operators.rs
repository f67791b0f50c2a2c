use cgo_core::cgo::{exceptional_indicator, exceptional_scan, solve_cgo};
use cgo_core::faddeev::{analyticity_probe, apply_g0, norm_decay_probe, singular_set_distance, ComplexMomentum, FaddeevOperator};
use cgo_core::field::{forward_transform, inverse_transform, ComplexField};
use cgo_core::grid::{Frame, Grid, Lattice};
use cgo_core::krylov::GmresConfig;
use cgo_core::oracle;
use cgo_core::potential::{working_gamma, Potential};
use cgo_core::rng;
use cgo_core::sample::{sample_function, Descriptor};
use num_complex::Complex64;

const NU: [f64; 3] = [1.0, 0.0, 0.0];

fn grid(l: f64, n: usize) -> Grid {
    Grid::new(l, n, Frame::identity()).unwrap()
}

fn gaussian(a: f64) -> Descriptor {
    Descriptor::Gaussian { amplitude: a, sigma: 1.0, center: [0.0; 3] }
}

fn band_limited(g: &Grid, seed: u64) -> ComplexField {
    let mut r = rng::stream(seed, "band", 0);
    let f = rng::random_field(g, &mut r);
    let mut s = forward_transform(&f, Lattice::Standard);
    let cut = g.dual_spacing() * (g.points_per_axis() as f64 / 2.0) * (2.0 / 3.0);
    let grid = g.clone();
    for (idx, v) in s.values_mut().iter_mut().enumerate() {
        let xi = grid.freq_local(idx, Lattice::Standard);
        if xi.iter().any(|c| c.abs() > cut) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse_transform(&s)
}

#[test]
fn p0_inverts_g0_on_band_limited_fields() {
    let g = grid(8.0, 16);
    for (k, im) in [0.5, -0.5, 2.0, -2.0].into_iter().enumerate() {
        let rho = ComplexMomentum::new(NU, Complex64::new(0.7, im), [0.0, 1.3, -0.4]).unwrap();
        let op = FaddeevOperator::new(&g, &rho).unwrap();
        for s in 0..5 {
            let f = band_limited(&g, 10 * k as u64 + s);
            let back = op.apply_p0_matched(&op.apply(&f).unwrap()).unwrap();
            let err = back.sub(&f).unwrap().l2() / f.l2();
            assert!(err <= 1e-8, "{err}");
        }
    }
}

#[test]
fn g0_matches_dense_kernel() {
    let g = grid(4.0, 8);
    let rho = ComplexMomentum::new(NU, Complex64::new(0.3, 1.2), [0.0, 0.9, 0.5]).unwrap();
    let m = oracle::dense_g0(&g, &rho).unwrap();
    let mut r = rng::stream(3, "dense", 0);
    let f = rng::random_field(&g, &mut r);
    let fast = apply_g0(&rho, &f).unwrap();
    let slow = oracle::dense_apply(&m, &f).unwrap();
    let err = fast.sub(&slow).unwrap().l2() / slow.l2();
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn cgo_matches_dense_solve() {
    let g = grid(4.0, 8);
    let v = Potential::from_descriptor(&gaussian(0.5), &g, 3.0).unwrap();
    let rho = ComplexMomentum::new(NU, Complex64::new(0.0, 1.5), [0.0, 1.0, 0.0]).unwrap();
    let cfg = GmresConfig { tol: 1e-12, ..Default::default() };
    let fast = solve_cgo(&v, &rho, &cfg).unwrap().v;
    let slow = oracle::dense_cgo(v.field(), &rho).unwrap();
    let err = fast.sub(&slow).unwrap().l2() / slow.l2();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn weighted_norm_of_g0_decays_in_z() {
    let g = grid(8.0, 24);
    let sweep: Vec<_> = [5.0, 10.0, 20.0, 40.0]
        .iter()
        .map(|&s| ComplexMomentum::new(NU, Complex64::new(0.0, s), [0.0, 1.0, 0.0]).unwrap())
        .collect();
    let out = norm_decay_probe(&g, &sweep, 0.25, 20, 7).unwrap();
    let est: Vec<f64> = out.iter().map(|s| s.norm_estimate).collect();
    assert!(est.windows(2).all(|w| w[1] < w[0]), "{est:?}");
    assert!(est[3] / est[1] <= 0.5, "{est:?}");
}

#[test]
fn singular_distance_ignores_z() {
    let g = grid(8.0, 16);
    let a = singular_set_distance(&g, [0.0, 1.1, 0.3]);
    let b = singular_set_distance(&g, [0.0, 1.1, 0.3]);
    assert_eq!(a, b);
    assert!(a >= g.dual_spacing() / 2.0 - 1e-15);
    assert!(a <= g.dual_spacing() * 2.0);
}

#[test]
fn vg0_is_analytic_in_z() {
    let g = grid(6.0, 16);
    let v = sample_function(&gaussian(0.5), &g);
    let z0 = Complex64::new(0.4, 1.0);
    let coarse = analyticity_probe(z0, [0.0, 0.8, 0.0], &v, 2e-3, 3, 1).unwrap();
    let fine = analyticity_probe(z0, [0.0, 0.8, 0.0], &v, 1e-3, 3, 1).unwrap();
    let ratio = coarse.residual / fine.residual;
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    assert!(fine.residual <= 1e-5, "{}", fine.residual);
}

#[test]
fn correction_shrinks_along_parametrization() {
    let g = grid(8.0, 24);
    let v = Potential::from_descriptor(&gaussian(0.1), &g, 3.0).unwrap();
    let gamma = working_gamma(3.0);
    let norms: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|&t| {
            let s = (t * t - 2.25f64 + 1.0).sqrt();
            let rho = ComplexMomentum::with_energy(NU, Complex64::new(0.0, t), [0.0, s, 1.5], 1.0)
                .unwrap_or_else(|_| ComplexMomentum::new(NU, Complex64::new(0.0, t), [0.0, s, 1.5]).unwrap());
            solve_cgo(&v, &rho, &GmresConfig::default()).unwrap().weighted_correction_norm(gamma)
        })
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}

#[test]
fn indicator_tracks_dense_singular_value_through_a_dip() {
    // the estimate is an upper bound that becomes sharp once the smallest
    // singular value separates from the cluster near 1
    let g = grid(4.0, 8);
    let rho = ComplexMomentum::new(NU, Complex64::new(0.2, 0.8), [0.0, 0.6, 0.0]).unwrap();
    let mut exact = Vec::new();
    for c in [-0.5, -2.0, -5.0, -10.0, -15.0, -20.0, 5.0] {
        let v = Potential::from_descriptor(&gaussian(c), &g, 3.0).unwrap();
        let est = exceptional_indicator(&v, &rho, 12, 1).unwrap();
        let s = oracle::dense_sigma_min(v.field(), &rho, 3.0).unwrap();
        assert!(est >= s * (1.0 - 1e-9), "c={c}: {est} < {s}");
        if s < 0.4 {
            assert!((est - s).abs() <= 1e-3 * s, "c={c}: {est} vs {s}");
        }
        exact.push(s);
    }
    // interior minimum of the amplitude scan
    let (imin, _) = exact.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(imin, 4, "{exact:?}");
}

#[test]
fn weak_potential_scan_is_clean() {
    let g = grid(6.0, 12);
    let v = Potential::from_descriptor(&gaussian(0.05), &g, 3.0).unwrap();
    let zs = [Complex64::new(0.0, 0.5), Complex64::new(1.0, 2.0), Complex64::new(-1.0, -1.0)];
    let scan = exceptional_scan(&v, &zs, &[[0.0, 0.5, 0.0], [0.0, 0.0, 1.5]], 1e-3, 6, 2).unwrap();
    assert_eq!(scan.flagged().count(), 0);
    assert!(scan.points.iter().all(|p| p.indicator > 0.5));
}

#[test]
fn pairing_matches_triple_loop() {
    use cgo_core::recon::pairing_integral;
    let g = grid(4.0, 8);
    let mut r = rng::stream(9, "pair", 0);
    let a = rng::random_field(&g, &mut r);
    let b = rng::random_field(&g, &mut r);
    let c = rng::random_field(&g, &mut r);
    let zeta = [3.0, 0.5, -1.0];
    let fast = pairing_integral(&a, &b, &c, zeta, 2.0).unwrap().value;
    let slow = oracle::brute_pairing(&a, &b, &c, zeta);
    assert!((fast - slow).norm() <= 1e-12 * slow.norm(), "{fast} {slow}");
}
