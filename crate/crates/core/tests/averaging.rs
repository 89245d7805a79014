use std::f64::consts::PI;

use cbs_core::averaging::{
    angular_factor_analytic, average_intensities, cbs_cone, full_configuration_evaluator,
    monte_carlo_average, DisorderModel,
};
use cbs_core::{DriveConfig, PointSolver};

fn ratio(r: num_rational::Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// Composite Simpson rule on [0, pi] in the polar angle.
fn polar_average(f: impl Fn(f64) -> f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(t) * t.sin();
    }
    s * h / 3.0 / 2.0
}

#[test]
fn analytic_factors_match_quadrature() {
    let f = angular_factor_analytic();
    let bg = polar_average(|t| t.sin().powi(4) / 4.0);
    assert!((bg - ratio(f.background)).abs() < 1e-12);
    // second-order term of <sin^4/4 cos(q.n x)> with q along x: x^2/2 <sin^4/4 sin^2 cos^2 phi>
    let curv = 0.5 * 0.5 * polar_average(|t| t.sin().powi(6) / 4.0);
    assert!((curv - ratio(f.curvature)).abs() < 1e-12);
}

#[test]
fn monte_carlo_angular_factor() {
    let model = DisorderModel::new(100.0, 1_000_000, 2024).unwrap();
    let est = monte_carlo_average(&model, 1, |c, o| {
        o[0] = c.channel_weight();
        Ok(())
    })
    .unwrap();
    let want = 2.0 / 15.0;
    assert!((est.mean[0] - want).abs() < 4.0 * est.std_error[0]);
    // standard error should follow 1/sqrt(N)
    let small = monte_carlo_average(&DisorderModel { samples: 10_000, ..model }, 1, |c, o| {
        o[0] = c.channel_weight();
        Ok(())
    })
    .unwrap();
    let r = small.std_error[0] / est.std_error[0];
    assert!((r - 10.0).abs() < 0.5, "standard error ratio {r}");
}

#[test]
fn crossed_average_factorizes() {
    let solver = PointSolver::new(&DriveConfig::new(20.0, 20.0).unwrap()).unwrap();
    let ib = solver.intensities().unwrap();
    let model = DisorderModel::new(100.0, 100_000, 5).unwrap();
    let est = monte_carlo_average(&model, 1, |c, o| {
        o[0] = c.channel_weight() * ib.c_tot / ib.c_tot.abs();
        Ok(())
    })
    .unwrap();
    let want = ratio(angular_factor_analytic().background) * ib.c_tot.signum();
    assert!((est.mean[0] - want).abs() < 1e-3);
}

#[test]
fn full_evaluator_agrees_with_factorized_route() {
    let drive = DriveConfig::new(3.0, 1.0).unwrap();
    let ib = PointSolver::new(&drive).unwrap().intensities().unwrap();
    let model = DisorderModel::new(60.0, 48, 9).unwrap();
    let full = monte_carlo_average(&model, 2, full_configuration_evaluator(drive)).unwrap();
    let weights = monte_carlo_average(&model, 1, |c, o| {
        o[0] = c.weight();
        Ok(())
    })
    .unwrap();
    // same seed, same samples: the two routes must agree sample by sample
    assert!((full.mean[0] - weights.mean[0] * ib.l_tot).abs() < 1e-9 * full.mean[0]);
    assert!((full.mean[1] - weights.mean[0] * ib.c_tot).abs() < 1e-9 * full.mean[0]);
}

#[test]
fn averaged_intensities_report_both_conventions() {
    let ib = PointSolver::new(&DriveConfig::new(1.0, 0.0).unwrap())
        .unwrap()
        .intensities()
        .unwrap();
    let model = DisorderModel::new(50.0, 200_000, 1).unwrap();
    let avg = average_intensities(&ib, &model, true).unwrap();
    let g2 = (1.5f64 / 50.0).powi(2);
    assert!((avg.analytic.l_tot - ib.l_tot * g2 * 2.0 / 15.0).abs() < 1e-15);
    let sampled = avg.sampled.unwrap();
    let expect = ib.l_tot * model.averaged_coupling_sqr() * 2.0 / 15.0;
    let se = avg.sampled_std_error.unwrap() * ib.l_tot;
    assert!((sampled.l_tot - expect).abs() < 4.0 * se);
    assert_eq!(sampled.alpha, ib.alpha);
}

#[test]
fn monte_carlo_cone_follows_small_angle_form() {
    let ib = PointSolver::new(&DriveConfig::new(0.5, 0.0).unwrap())
        .unwrap()
        .intensities()
        .unwrap();
    let model = DisorderModel::new(100.0, 400_000, 3).unwrap();
    let theta = [0.0, 0.001, 0.002, 0.003];
    let p = cbs_cone(&theta, &ib, &model, true).unwrap();
    let mc = p.monte_carlo.unwrap();
    let err = p.monte_carlo_error.unwrap();
    assert!((mc[0] - ib.c_tot / ib.l_tot).abs() < 1e-12);
    for k in 1..theta.len() {
        // the expansion neglects (k l theta)^4 terms and the distance spread
        let tol = 4.0 * err[k] + 0.02 * mc[0].abs();
        assert!((mc[k] - p.analytic[k]).abs() < tol, "theta {}", theta[k]);
        assert!(mc[k] < mc[k - 1]);
    }
}
