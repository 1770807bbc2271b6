use std::f64::consts::PI;

use slelab_core::energy::{
    dirichlet_energy, dyson_rate_chordal, dyson_rate_radial, loop_measure_mt, multitime_energy_chordal,
    multitime_energy_radial, rho_energy_chordal, rho_energy_radial, EnergyBreakdown, MultiDrivingState, MultiMethod,
    RealizeOptions, RhoMethod,
};
use slelab_core::{DrivingPath, Error, Geometry};

fn path(g: Geometry, dt: f64, t: f64, f: impl Fn(f64) -> f64) -> DrivingPath {
    DrivingPath::from_fn(g, dt, t, f, None).unwrap()
}

/// Fixed-step RK4 of `y' = f(y)`, sampled every `sub` steps.
fn rk4(y0: Vec<f64>, h: f64, steps: usize, sub: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let mut y = y0;
    let mut out = vec![y.clone()];
    let ax = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for i in 0..steps {
        let k1 = f(&y);
        let k2 = f(&ax(&y, &k1, h / 2.0));
        let k3 = f(&ax(&y, &k2, h / 2.0));
        let k4 = f(&ax(&y, &k3, h));
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if (i + 1) % sub == 0 {
            out.push(y.clone());
        }
    }
    out
}

fn sum_check(e: &EnergyBreakdown) {
    let s: f64 = e.components.values().sum();
    assert!((s - e.total).abs() <= 1e-9 * (1.0 + e.total.abs()));
}

#[test]
fn dirichlet_closed_forms() {
    let z = path(Geometry::Chordal, 1e-3, 1.0, |_| 0.0);
    assert_eq!(dirichlet_energy(&z, 1.0).unwrap(), 0.0);
    let lin = path(Geometry::Chordal, 1e-3, 1.0, |t| t);
    assert!((dirichlet_energy(&lin, 1.0).unwrap() - 0.5).abs() < 1e-12);
    let s = path(Geometry::Chordal, 2.0 * PI / 6000.0, 2.0 * PI, f64::sin);
    assert!((dirichlet_energy(&s, 2.0 * PI).unwrap() - PI / 2.0).abs() < 1e-6);
}

#[test]
fn rough_paths_are_infinite() {
    let mut p = path(Geometry::Chordal, 1e-3, 1.0, |t| t);
    p.rough = true;
    assert_eq!(dirichlet_energy(&p, 1.0).unwrap(), f64::INFINITY);
    let e = rho_energy_chordal(&p, &[1.0], &[2.0], 1.0, RhoMethod::Integral).unwrap();
    assert_eq!(e.total, f64::INFINITY);
    let json = serde_json::to_string(&e).unwrap();
    assert!(json.contains("\"inf\""));
    let back: EnergyBreakdown = serde_json::from_str(&json).unwrap();
    assert_eq!(back.total, f64::INFINITY);
}

#[test]
fn chordal_rho_forms_agree() {
    let w = DrivingPath::from_fn(Geometry::Chordal, 1e-3, 0.5, f64::sin, Some(&f64::cos)).unwrap();
    let a = rho_energy_chordal(&w, &[1.0], &[2.0], 0.5, RhoMethod::Integral).unwrap();
    let b = rho_energy_chordal(&w, &[1.0], &[2.0], 0.5, RhoMethod::Boundary).unwrap();
    sum_check(&a);
    sum_check(&b);
    assert!((a.total - b.total).abs() <= 1e-6, "{} vs {}", a.total, b.total);
    // several points on both sides
    let a = rho_energy_chordal(&w, &[-1.5, -0.7, 0.8, 2.0], &[1.0, 0.5, 2.0, 1.5], 0.5, RhoMethod::Integral).unwrap();
    let b = rho_energy_chordal(&w, &[-1.5, -0.7, 0.8, 2.0], &[1.0, 0.5, 2.0, 1.5], 0.5, RhoMethod::Boundary).unwrap();
    assert!((a.total - b.total).abs() <= 1e-6, "{} vs {}", a.total, b.total);
}

#[test]
fn chordal_rho_zero_weights_is_dirichlet() {
    let w = path(Geometry::Chordal, 1e-3, 1.0, |t| (2.0 * t).sin());
    let d = dirichlet_energy(&w, 1.0).unwrap();
    for m in [RhoMethod::Integral, RhoMethod::Boundary] {
        let e = rho_energy_chordal(&w, &[1.0, 3.0], &[0.0, 0.0], 1.0, m).unwrap();
        assert!((e.total - d).abs() < 1e-12);
    }
}

#[test]
fn chordal_zero_energy_flow() {
    // W' = rho/(W - V), V' = 2/(V - W), solved independently
    let (rho, dt) = (2.0, 5e-4);
    let sol = rk4(vec![0.0, 1.0], dt / 10.0, 20_000, 10, |y| vec![rho / (y[0] - y[1]), 2.0 / (y[1] - y[0])]);
    let vals: Vec<f64> = sol.iter().map(|y| y[0]).collect();
    let der: Vec<f64> = sol.iter().map(|y| rho / (y[0] - y[1])).collect();
    let w = DrivingPath::new(Geometry::Chordal, dt, vals).unwrap().with_derivative(der, 2e3).unwrap();
    for m in [RhoMethod::Integral, RhoMethod::Boundary] {
        let e = rho_energy_chordal(&w, &[1.0], &[rho], 1.0, m).unwrap();
        assert!(e.total.abs() <= 1e-6, "{m:?}: {}", e.total);
    }
}

#[test]
fn chordal_swallowed_force_point() {
    // a steep smooth ramp from 0 to 3 on [0.1, 0.11] overtakes x = 1 (whose image stays below 1.5)
    let ramp = |t: f64| {
        let u = ((t - 0.1) / 0.01).clamp(0.0, 1.0);
        3.0 * u * u * (3.0 - 2.0 * u)
    };
    let w = path(Geometry::Chordal, 1e-3, 0.3, ramp);
    let r = rho_energy_chordal(&w, &[1.0], &[1.0], 0.3, RhoMethod::Integral);
    match r {
        Err(Error::ForcePointSwallowed { index: 0, t }) => assert!((0.1..=0.111).contains(&t), "{t}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn radial_rho_forms_agree() {
    let xi = DrivingPath::from_fn(Geometry::Radial, 5e-4, 0.5, f64::sin, Some(&f64::cos)).unwrap();
    let a = rho_energy_radial(&xi, &[0.0, PI / 2.0], &[2.0], 1.0, 0.5, RhoMethod::Integral).unwrap();
    let b = rho_energy_radial(&xi, &[0.0, PI / 2.0], &[2.0], 1.0, 0.5, RhoMethod::Boundary).unwrap();
    sum_check(&b);
    assert!((a.total - b.total).abs() <= 1e-6, "{} vs {}", a.total, b.total);
    // start away from 0 and several points
    let xi = path(Geometry::Radial, 5e-4, 0.4, |t| 1.0 + 0.5 * (3.0 * t).sin());
    let th = [1.0, 2.0, 3.5, 5.0];
    let a = rho_energy_radial(&xi, &th, &[1.0, 0.5, 2.0], -0.7, 0.4, RhoMethod::Integral).unwrap();
    let b = rho_energy_radial(&xi, &th, &[1.0, 0.5, 2.0], -0.7, 0.4, RhoMethod::Boundary).unwrap();
    assert!((a.total - b.total).abs() <= 1e-6, "{} vs {}", a.total, b.total);
}

#[test]
fn radial_rho_trivial_cases() {
    let xi = path(Geometry::Radial, 1e-3, 1.0, |t| t * t);
    let d = dirichlet_energy(&xi, 1.0).unwrap();
    for m in [RhoMethod::Integral, RhoMethod::Boundary] {
        let e = rho_energy_radial(&xi, &[0.0, 2.0], &[0.0], 0.0, 1.0, m).unwrap();
        assert!((e.total - d).abs() < 1e-9, "{m:?}");
    }
    // xi' = mu + rho/2 cot((xi - h)/2), h' = cot((h - xi)/2)
    let (rho, mu, dt) = (2.0, 1.0, 1e-3);
    let f = |y: &[f64]| {
        let c = 1.0 / (0.5 * (y[0] - y[1])).tan();
        vec![mu + 0.5 * rho * c, -c]
    };
    let sol = rk4(vec![0.0, 2.0], dt / 10.0, 10_000, 10, f);
    let vals: Vec<f64> = sol.iter().map(|y| y[0]).collect();
    let der: Vec<f64> = sol.iter().map(|y| f(y)[0]).collect();
    let xi = DrivingPath::new(Geometry::Radial, dt, vals).unwrap().with_derivative(der, 2e3).unwrap();
    for m in [RhoMethod::Integral, RhoMethod::Boundary] {
        let e = rho_energy_radial(&xi, &[0.0, 2.0], &[rho], mu, 1.0, m).unwrap();
        assert!(e.total.abs() <= 1e-6, "{m:?}: {}", e.total);
    }
}

#[test]
fn dyson_rates() {
    let c = |v: f64| path(Geometry::Chordal, 1e-3, 1.0, move |_| v);
    assert!((dyson_rate_chordal(&[c(0.0), c(1.0)], 1.0).unwrap() - 16.0).abs() < 1e-9);
    let lin = path(Geometry::Chordal, 1e-3, 2.0, |t| 0.5 + 3.0 * t);
    assert!((dyson_rate_chordal(&[lin], 2.0).unwrap() - 9.0).abs() < 1e-9);
    assert!(matches!(dyson_rate_chordal(&[c(1.0), c(0.0)], 1.0), Err(Error::ChamberViolation(_))));
    // X' = 4/(X1 - X2) etc., three particles
    let dt = 1e-3;
    let sol = rk4(vec![-1.0, 0.2, 1.5], dt / 10.0, 5_000, 10, |x| {
        (0..3).map(|j| (0..3).filter(|&i| i != j).map(|i| 4.0 / (x[j] - x[i])).sum()).collect()
    });
    let ps: Vec<DrivingPath> =
        (0..3).map(|j| DrivingPath::new(Geometry::Chordal, dt, sol.iter().map(|y| y[j]).collect()).unwrap()).collect();
    assert!(dyson_rate_chordal(&ps, 0.5).unwrap() < 1e-6);

    let r = |v: f64| path(Geometry::Radial, 1e-3, 1.0, move |_| v);
    assert!((dyson_rate_radial(&[r(0.3)], 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
    assert!(dyson_rate_radial(&[r(0.0), r(PI)], 0.0, 1.0).unwrap() < 1e-20);
    let sol = rk4(vec![0.0, 1.0, 2.5], dt / 10.0, 5_000, 10, |x| {
        (0..3).map(|j| 0.7 + (0..3).filter(|&i| i != j).map(|i| 2.0 / (0.5 * (x[j] - x[i])).tan()).sum::<f64>()).collect()
    });
    let ps: Vec<DrivingPath> =
        (0..3).map(|j| DrivingPath::new(Geometry::Radial, dt, sol.iter().map(|y| y[j]).collect()).unwrap()).collect();
    assert!(dyson_rate_radial(&ps, 0.7, 0.5).unwrap() < 1e-6);
}

#[test]
fn single_curve_multitime_is_dirichlet() {
    let w = path(Geometry::Chordal, 1e-2, 1.0, |t| (3.0 * t).sin());
    let d = dirichlet_energy(&w, 1.0).unwrap();
    let s = MultiDrivingState::from_components(Geometry::Chordal, std::slice::from_ref(&w), RealizeOptions::default()).unwrap();
    assert_eq!(loop_measure_mt(&s, None).unwrap(), 0.0);
    let e = multitime_energy_chordal(&s, MultiMethod::Component).unwrap();
    assert!((e.total - d).abs() < 1e-12);
    let s = MultiDrivingState::from_common_time(Geometry::Chordal, &[w], RealizeOptions::default()).unwrap();
    let e = multitime_energy_chordal(&s, MultiMethod::DysonReduction).unwrap();
    assert!((e.total - d).abs() < 1e-12);

    let xi = path(Geometry::Radial, 1e-2, 1.0, |t| 0.4 * t * t);
    let d = dirichlet_energy(&xi, 1.0).unwrap();
    let s = MultiDrivingState::from_components(Geometry::Radial, &[xi], RealizeOptions::default()).unwrap();
    let e = multitime_energy_radial(&s, 0.0, MultiMethod::Component).unwrap();
    assert!((e.total - d).abs() < 1e-12, "{} vs {d}", e.total);
}

#[test]
fn multitime_zero_energy_dyson_flow() {
    let dt = 1e-3;
    let sol = rk4(vec![-0.5, 0.5], dt / 10.0, 2_000, 10, |x| vec![4.0 / (x[0] - x[1]), 4.0 / (x[1] - x[0])]);
    let ps: Vec<DrivingPath> =
        (0..2).map(|j| DrivingPath::new(Geometry::Chordal, dt, sol.iter().map(|y| y[j]).collect()).unwrap()).collect();
    let s = MultiDrivingState::from_common_time(Geometry::Chordal, &ps, RealizeOptions::default()).unwrap();
    let e = multitime_energy_chordal(&s, MultiMethod::DysonReduction).unwrap();
    assert!(e.total.abs() <= 1e-6, "{}", e.total);
    let c = multitime_energy_chordal(&s, MultiMethod::Component).unwrap();
    assert!(c.total.abs() <= 1e-3, "{c:?}");
}

fn two_slits(sep: f64, t: f64) -> MultiDrivingState {
    let a = path(Geometry::Chordal, t / 200.0, t, |_| 0.0);
    let b = path(Geometry::Chordal, t / 200.0, t, move |_| sep);
    MultiDrivingState::from_components(Geometry::Chordal, &[a, b], RealizeOptions::default()).unwrap()
}

#[test]
fn loop_measure_is_path_independent() {
    let s = two_slits(5.0, 1.0);
    let ma = loop_measure_mt(&s, Some(&[0, 1])).unwrap();
    let mb = loop_measure_mt(&s, Some(&[1, 0])).unwrap();
    assert!(ma > 0.0);
    assert!((ma - mb).abs() <= 1e-4, "{ma} vs {mb}");
    let far = loop_measure_mt(&two_slits(100.0, 1.0), None).unwrap();
    assert!(far < ma && far <= 1e-3, "{far} vs {ma}");
}

#[test]
fn touching_curves_are_rejected() {
    let a = path(Geometry::Chordal, 1e-2, 1.0, |_| 0.0);
    let b = path(Geometry::Chordal, 1e-2, 1.0, |_| 0.0);
    let r = MultiDrivingState::from_components(Geometry::Chordal, &[a, b], RealizeOptions::default());
    assert!(matches!(r, Err(Error::CurvesTouch) | Err(Error::ChamberViolation(_))), "{r:?}");
}

#[test]
fn chordal_routes_agree() {
    let dt = 5e-4;
    let t = 0.25;
    let x1 = path(Geometry::Chordal, dt, t, |t| -1.0 + 0.5 * (2.0 * t).sin());
    let x2 = path(Geometry::Chordal, dt, t, |t| 1.0 + t * t);
    let s = MultiDrivingState::from_common_time(Geometry::Chordal, &[x1, x2], RealizeOptions::default()).unwrap();
    let a = multitime_energy_chordal(&s, MultiMethod::DysonReduction).unwrap();
    let b = multitime_energy_chordal(&s, MultiMethod::Component).unwrap();
    eprintln!("{a:?}\n{b:?}\n{:?} {:?}", s.tips, s.times);
    assert!((a.total - b.total).abs() <= 1e-3, "{} vs {}", a.total, b.total);
}

#[test]
fn radial_routes_agree() {
    let dt = 5e-4;
    let t = 0.25;
    let w1 = path(Geometry::Radial, dt, t, |t| 0.3 * (2.0 * t).sin());
    let w2 = path(Geometry::Radial, dt, t, |t| PI - t);
    let s = MultiDrivingState::from_common_time(Geometry::Radial, &[w1, w2], RealizeOptions::default()).unwrap();
    let a = multitime_energy_radial(&s, 0.5, MultiMethod::DysonReduction).unwrap();
    let b = multitime_energy_radial(&s, 0.5, MultiMethod::Component).unwrap();
    eprintln!("{a:?}\n{b:?}\n{:?} {:?} {}", s.tips, s.times, s.aleph);
    assert!((a.total - b.total).abs() <= 1e-3, "{} vs {}", a.total, b.total);
}
