use std::f64::consts::PI;

use num_complex::Complex64 as C;
use slelab_core::partition::*;
use slelab_core::{Error, Geometry};

const CH: Geometry = Geometry::Chordal;
const RA: Geometry = Geometry::Radial;

#[test]
fn params_recompute_constants() {
    let p = PartitionParams::new(2.0, 0.5).unwrap();
    assert_eq!((p.b(), p.c(), p.b_tilde()), (1.0, -2.0, 0.0));
    let q = PartitionParams::new(8.0 / 3.0, 0.0).unwrap();
    assert!(q.c().abs() < 1e-14);
    let v: serde_json::Value = serde_json::to_value(p).unwrap();
    assert_eq!(v["b"], 1.0);
    let back: PartitionParams = serde_json::from_value(v).unwrap();
    assert_eq!(back, p);
    assert!(PartitionParams::new(0.0, 0.0).is_err());
}

#[test]
fn halfwatermelon_values() {
    assert_eq!(z_halfwatermelon(2.0, &[0.3]).unwrap(), 1.0);
    assert!((z_halfwatermelon(2.0, &[0.0, 1.0, 3.0]).unwrap() - 6.0).abs() < 1e-12);
    assert!((z_halfwatermelon(4.0, &[0.0, 1.0, 3.0]).unwrap() - 6f64.sqrt()).abs() < 1e-12);
    assert!(matches!(z_halfwatermelon(2.0, &[1.0, 0.0]), Err(Error::ChamberViolation(_))));
}

#[test]
fn nradial_values() {
    assert_eq!(z_nradial(2.0, 0.0, &[1.0]).unwrap(), 1.0);
    assert!((z_nradial(2.0, 0.0, &[0.0, PI]).unwrap() - 2.0).abs() < 1e-12);
    assert!((z_nradial(1.0, 1.0, &[PI]).unwrap() - 23.140692632779267).abs() < 1e-10);
    assert!(matches!(z_nradial(2.0, 0.0, &[0.0, 7.0]), Err(Error::ChamberViolation(_))));
}

#[test]
fn small_kappa_stays_finite_in_log_space() {
    let l = log_z_halfwatermelon(1e-3, &[0.0, 1.0, 3.0]).unwrap();
    assert!((l - 2000.0 * 6f64.ln()).abs() < 1e-8);
}

#[test]
fn potentials() {
    assert_eq!(semiclassical_potential(CH, 0.0, &[0.0, 1.0]).unwrap(), 0.0);
    assert!((semiclassical_potential(CH, 0.0, &[0.0, 1.0, 3.0]).unwrap() + 2.0 * 6f64.ln()).abs() < 1e-12);
    assert!((semiclassical_potential(RA, 1.0, &[PI]).unwrap() + PI).abs() < 1e-15);
}

#[test]
fn gradients_match_finite_differences() {
    let cases: [(Geometry, f64, Vec<f64>); 2] = [(CH, 0.0, vec![-1.0, 0.4, 2.0, 3.5]), (RA, 0.7, vec![0.1, 1.3, 2.0, 4.4])];
    for (g, mu, p) in cases {
        let grad = semiclassical_gradient(g, mu, &p).unwrap();
        for j in 0..p.len() {
            let h = 1e-6;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (semiclassical_potential(g, mu, &a).unwrap() - semiclassical_potential(g, mu, &b).unwrap()) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-7, "{g:?} {j}: {fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn semiclassical_limit_is_exact() {
    let r = semiclassical_limit_check(&[2.0, 1.0, 0.5, 0.1], &[0.0, 1.0, 3.0], CH, 0.0).unwrap();
    assert!(r.iter().all(|&x| x <= 1e-12), "{r:?}");
    let r = semiclassical_limit_check(&[1.0, 0.5], &[0.0, PI], RA, 0.0).unwrap();
    assert!(r.iter().all(|&x| x <= 1e-12), "{r:?}");
    let r = semiclassical_limit_check(&[3.0, 1.0, 0.2], &[PI], RA, 1.0).unwrap();
    assert!(r.iter().all(|&x| x <= 1e-12), "{r:?}");
    // the raw difference for two radial points is 2 log 2
    let raw = 0.5 * log_z_nradial(0.5, 0.0, &[0.0, PI]).unwrap() + semiclassical_potential(RA, 0.0, &[0.0, PI]).unwrap();
    assert!((raw - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!(semiclassical_limit_check(&[0.5, 1.0], &[0.0, 1.0], CH, 0.0).is_err());
}

/// BPZ left-hand side from closed-form derivatives of log Z, independent of the FD code.
fn analytic_bpz(g: Geometry, kappa: f64, mu: f64, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let (d1, d2): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let (mut a, mut b) = (0.0, 0.0);
            for i in (0..n).filter(|&i| i != j) {
                let d = p[j] - p[i];
                match g {
                    Geometry::Chordal => {
                        a += 2.0 / kappa / d;
                        b -= 2.0 / kappa / (d * d);
                    }
                    Geometry::Radial => {
                        a += 1.0 / kappa / (0.5 * d).tan();
                        b -= 0.5 / kappa / (0.5 * d).sin().powi(2);
                    }
                }
            }
            if g == Geometry::Radial {
                a += mu / kappa;
            }
            (a, b + a * a)
        })
        .unzip();
    (0..n)
        .map(|j| {
            let mut r = 0.5 * kappa * d2[j];
            for i in (0..n).filter(|&i| i != j) {
                let d = p[i] - p[j];
                r += match g {
                    Geometry::Chordal => 2.0 / d * d1[i] - (6.0 - kappa) / kappa / (d * d),
                    Geometry::Radial => {
                        1.0 / (0.5 * d).tan() * d1[i] - (6.0 - kappa) / kappa / (4.0 * (0.5 * d).sin().powi(2))
                    }
                };
            }
            match g {
                Geometry::Chordal => r,
                Geometry::Radial => r - (mu * mu - (n * n) as f64 + 1.0) / (2.0 * kappa),
            }
        })
        .collect()
}

#[test]
fn fundamental_solutions_solve_bpz_exactly() {
    for (g, mu, p) in [
        (CH, 0.0, vec![0.0, 1.0]),
        (CH, 0.0, vec![-2.0, 0.5, 1.0, 4.0]),
        (RA, 0.0, vec![0.0, PI]),
        (RA, 1.3, vec![0.2, 1.0, 3.0, 5.5]),
        (RA, 3.0, vec![0.4]),
    ] {
        for kappa in [0.5, 2.0, 8.0 / 3.0, 4.0] {
            let r = analytic_bpz(g, kappa, mu, &p);
            assert!(r.iter().all(|x| x.abs() < 1e-10), "{g:?} {kappa} {p:?}: {r:?}");
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn bpz_finite_difference_residuals() {
    let r = bpz_residual(CH, 2.0, 0.0, &[0.0, 1.0], 1e-4).unwrap();
    assert!(max_abs(&r) <= 1e-5, "{r:?}");
    let r = bpz_residual(RA, 2.0, 0.0, &[0.0, PI], 1e-4).unwrap();
    assert!(max_abs(&r) <= 1e-5, "{r:?}");
    let r = bpz_residual(RA, 2.0, 3.0, &[1.234], 1e-4).unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].abs() <= 1e-5, "{r:?}");
    let p = [0.0, 1.0, 3.0];
    let r = bpz_residual(CH, 3.0, 0.0, &p, default_fd_step(CH, &p)).unwrap();
    assert!(max_abs(&r) <= 1e-5, "{r:?}");
}

#[test]
fn bpz_residuals_converge_at_second_order() {
    for (g, mu, p) in [(CH, 0.0, vec![0.0, 1.0, 3.0]), (RA, 0.8, vec![0.0, 1.5, 4.0])] {
        let e: Vec<f64> =
            [4e-2, 2e-2, 1e-2].iter().map(|&h| max_abs(&bpz_residual(g, 3.0, mu, &p, h).unwrap())).collect();
        for w in e.windows(2) {
            let q = w[0] / w[1];
            assert!((3.5..4.5).contains(&q), "{g:?}: ratio {q} from {e:?}");
        }
    }
}

#[test]
fn bpz_rejects_points_too_close_for_the_step() {
    assert!(matches!(bpz_residual(CH, 2.0, 0.0, &[0.0, 1e-4], 1e-4), Err(Error::ChamberViolation(_))));
}

#[test]
fn semiclassical_bpz_residuals() {
    let r = semiclassical_bpz_residual(CH, 0.0, &[0.0, 1.0]).unwrap();
    assert!(max_abs(&r) <= 1e-12, "{r:?}");
    let r = semiclassical_bpz_residual(RA, 2.5, &[0.7]).unwrap();
    assert!(max_abs(&r) <= 1e-12, "{r:?}");
    let r = semiclassical_bpz_residual(CH, 0.0, &[0.0, 1.0, 3.0]).unwrap();
    assert!(max_abs(&r) <= 1e-10, "{r:?}");
    let r = semiclassical_bpz_residual(RA, -1.2, &[0.3, 1.1, 2.9, 5.0]).unwrap();
    assert!(max_abs(&r) <= 1e-10, "{r:?}");
    let r = semiclassical_bpz_residual(RA, 0.0, &[0.0, PI]).unwrap();
    assert!(max_abs(&r) <= 1e-12, "{r:?}");
}

#[test]
fn chordal_martingale_initial_values() {
    let m = martingale_chordal(2.0, &[], &[2.0], &[0.0], &[vec![0.0, 1.0, 0.0]]).unwrap();
    assert!((m[0] - 1.0).abs() < 1e-15);
    let m = martingale_chordal(2.0, &[], &[2.0, 2.0], &[0.0], &[vec![0.0, 1.0, 2.0, 0.0, 0.0]]).unwrap();
    assert!((m[0] - 2.0).abs() < 1e-12);
    // left and right: (W - VL)(VR - W) (VR - VL)^{1} with kappa = 2, rho = 2
    let m = martingale_chordal(2.0, &[2.0], &[2.0], &[0.0], &[vec![0.0, -1.0, 3.0, 0.0, 0.0]]).unwrap();
    assert!((m[0] - 1.0 * 3.0 * 4.0).abs() < 1e-12);
    let e = martingale_chordal(2.0, &[], &[2.0], &[0.0, 0.1], &[vec![0.0, 1.0, 0.0], vec![1.0, 1.0, -0.2]]);
    assert!(matches!(e, Err(Error::ForcePointSwallowed { index: 0, .. })));
}

#[test]
fn radial_martingale_initial_values() {
    let m = martingale_radial(2.0, 0.0, &[2.0], &[0.0], &[vec![0.0, PI / 2.0, 0.0]]).unwrap();
    assert!((m[0] - (PI / 4.0).sin()).abs() < 1e-12);
    let m = martingale_radial(2.0, 0.0, &[], &[0.0], &[vec![0.3]]).unwrap();
    assert_eq!(m[0], 1.0);
    // exponential martingale of xi = sqrt(kappa) B: exp(mu xi/kappa - mu^2 t/(2 kappa))
    let m = martingale_radial(2.0, 1.0, &[], &[0.5], &[vec![0.8]]).unwrap();
    assert!((m[0] - (0.8f64 / 2.0 - 0.5 / 4.0).exp()).abs() < 1e-12);
}

#[test]
fn poisson_kernels() {
    let d = DomainData::half_plane(&[0.0, 1.0], Some(C::new(0.0, 1.0)));
    assert!((boundary_functionals(&d, 0.0, Functional::PBoundary).unwrap() - 1.0).abs() < 1e-15);
    assert!((boundary_functionals(&d, 0.0, Functional::PInterior).unwrap() - 2.0).abs() < 1e-15);
    assert!((boundary_functionals(&d, 0.0, Functional::Cr).unwrap() - 2.0).abs() < 1e-15);
    let u = DomainData::disk(&[0.0], Some(C::new(0.0, 0.0)));
    assert!((boundary_functionals(&u, 0.0, Functional::Cr).unwrap() - 1.0).abs() < 1e-14);
    assert!((boundary_functionals(&u, 0.0, Functional::PInterior).unwrap() - 1.0).abs() < 1e-14);
    assert!(boundary_functionals(&u, 0.0, Functional::Lv).unwrap().abs() < 1e-14);
}

#[test]
fn disk_kernels_have_closed_forms() {
    // P(U; e^{ia}; 0) = 1, P(U; e^{ia}, e^{ib}) = 1/(4 sin^2((b-a)/2))
    let th = [0.4, 2.5];
    let u = DomainData::disk(&th, Some(C::new(0.0, 0.0)));
    let pb = boundary_functionals(&u, 0.0, Functional::PBoundary).unwrap();
    assert!((pb - 0.25 / (0.5 * (th[1] - th[0])).sin().powi(2)).abs() < 1e-12);
    let pi = boundary_functionals(&u, 0.0, Functional::PInterior).unwrap();
    assert!((pi - 1.0).abs() < 1e-12);
    // off-centre interior point: Poisson kernel (1 - |z|^2)/|e^{ia} - z|^2
    let z = C::new(0.3, -0.2);
    let u2 = DomainData::disk(&th, Some(z));
    let x = C::new(th[0].cos(), th[0].sin());
    let want = (1.0 - z.norm_sqr()) / (x - z).norm_sqr();
    assert!((boundary_functionals(&u2, 0.0, Functional::PInterior).unwrap() - want).abs() < 1e-12);
    assert!((boundary_functionals(&u2, 0.0, Functional::Cr).unwrap() - (1.0 - z.norm_sqr())).abs() < 1e-12);
}

#[test]
fn covariance_under_half_plane_automorphisms() {
    // phi(z) = (2z + 1)/(z + 3) preserves H; the kernels must not change
    let phi = Mobius::new(C::new(2.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(3.0, 0.0)).unwrap();
    let pts = [-1.0, 0.5, 2.0, 7.0];
    let z = C::new(0.3, 1.7);
    let plain = DomainData::half_plane(&pts, Some(z));
    let mut mapped = plain.clone();
    mapped.map = Some(phi);
    for f in [Functional::PBoundary, Functional::PInterior, Functional::Cr, Functional::Lu, Functional::Lv] {
        let a = boundary_functionals(&plain, 0.9, f).unwrap();
        let b = boundary_functionals(&mapped, 0.9, f).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{f:?}: {a} vs {b}");
    }
}

#[test]
fn lu_matches_direct_sum_in_the_half_plane() {
    let x = [0.0, 1.0, 3.0];
    let y = 10.0;
    let mut all = x.to_vec();
    all.push(y);
    let d = DomainData::half_plane(&all, None);
    let mut want = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            want -= 2.0 * f64::ln(x[j] - x[i]);
        }
        want += 5.0 * 2.0 * f64::ln(y - x[i]);
    }
    assert!((boundary_functionals(&d, 0.0, Functional::Lu).unwrap() - want).abs() < 1e-12);
}

#[test]
fn lv_in_the_disk_reduces_to_the_angular_potential() {
    // for (U; e^{i theta}; 0): CR = 1, P(x_j; 0) = 1, and the remaining terms are V^mu(theta) - 2P log 2 up to the
    // arg normalisation mu n arg psi'(0) = 0
    let th = [0.3, 1.9, 4.0];
    let mu = 0.6;
    let d = DomainData::disk(&th, Some(C::new(0.0, 0.0)));
    let lv = boundary_functionals(&d, mu, Functional::Lv).unwrap();
    let v = semiclassical_potential(RA, mu, &th).unwrap() - semiclassical_offset(RA, 3);
    assert!((lv - v).abs() < 1e-12, "{lv} vs {v}");
}

#[test]
fn unsupported_domain_without_a_map() {
    let d = DomainData { domain: RefDomain::Image, boundary: vec![C::new(0.0, 0.0)], interior: None, map: None };
    assert!(matches!(boundary_functionals(&d, 0.0, Functional::PBoundary), Err(Error::UnsupportedDomain(_))));
}
