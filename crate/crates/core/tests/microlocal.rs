//! Stability matrices and the multiplicity census.

use geoxray_core::geodesic::Tracer;
use geoxray_core::microlocal::pair_kappas;
use geoxray_core::{
    build_q, census, make_attenuation, make_metric, make_rayset, max_multiplicity, AttenuationKind,
    ConformalMetric, ForwardOperator, Grid2D, PhasePoint, ScalarField2D, SpeedConvention,
    SpeedKind, Stability, Vec2,
};

fn det(q: [[f64; 2]; 2]) -> f64 {
    q[0][0] * q[1][1] - q[0][1] * q[1][0]
}

fn flat_diameter_kappas(a: f64) -> [f64; 4] {
    let grid = Grid2D::new(128).unwrap();
    let m = ConformalMetric::unit(grid);
    let atten = ScalarField2D::constant(grid, a);
    let dt = m.default_dt();
    let path = Tracer::new(dt)
        .with_attenuation(&atten)
        .shoot(&m, PhasePoint::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)))
        .unwrap();
    assert!((path.tau() - 2.0).abs() < 1e-9);
    pair_kappas(&m, &atten, dt, &path, 0.5, 1.5).unwrap()
}

#[test]
fn flat_diameter_with_unit_attenuation() {
    let k = flat_diameter_kappas(1.0);
    let e = |x: f64| (-x).exp();
    let want = [e(1.5), e(0.5), e(0.5), e(1.5)];
    for (g, w) in k.iter().zip(want) {
        assert!((g - w).abs() < 1e-9, "{k:?}");
    }
    let d = det([[k[0], k[1]], [k[2], k[3]]]);
    assert!((d - (e(3.0) - e(1.0))).abs() < 1e-6, "{d}");
    assert!((d + 0.3181).abs() < 1e-4);
}

#[test]
fn zero_attenuation_is_singular() {
    let k = flat_diameter_kappas(0.0);
    assert!(det([[k[0], k[1]], [k[2], k[3]]]).abs() < 1e-6);
}

fn census_op(speed: SpeedKind, atten: &AttenuationKind, nb: usize, na: usize, dt_scale: f64) -> ForwardOperator {
    let grid = Grid2D::new(128).unwrap();
    let m = make_metric(speed, SpeedConvention::Index, grid);
    let dt = m.default_dt() * dt_scale;
    ForwardOperator::build(&m, &make_attenuation(atten, grid), &make_rayset(nb, na).unwrap(), dt).unwrap()
}

/// With `A(s, t)` the attenuation integral between two path times,
/// `det Q = -2 exp(-A(0, tau)) sinh(A(t1, t2))`.
#[test]
fn bump_pairs_are_stable_with_closed_form_det() {
    let atten = AttenuationKind::gaussian_bump();
    let op = census_op(SpeedKind::C1, &atten, 64, 128, 1.0);
    let reports = census(&op).unwrap();
    assert!(reports.len() > 50, "{} pairs", reports.len());
    let mut meeting = 0;
    for rep in &reports {
        let path = op.trace(rep.pair.ray).unwrap();
        let total = *path.cum_atten.last().unwrap();
        let a12 = path.cum_atten_at(rep.pair.t2) - path.cum_atten_at(rep.pair.t1);
        let want = -2.0 * (-total).exp() * a12.sinh();
        assert!(
            (rep.det_q - want).abs() <= 1e-3 * want.abs() + 1e-12,
            "ray {}: {} vs {want}",
            rep.pair.ray,
            rep.det_q
        );
        assert!((det(build_q(&rep.pair)) - rep.det_q).abs() < 1e-15);
        let meets = path
            .t
            .iter()
            .zip(&path.points)
            .filter(|(t, _)| **t >= rep.pair.t1 && **t <= rep.pair.t2)
            .any(|(_, p)| atten.eval(p.x) >= 0.1);
        if meets {
            meeting += 1;
            assert!(rep.det_q < -1e-4, "ray {}: det {}", rep.pair.ray, rep.det_q);
            assert_eq!(rep.stability, Stability::Stable);
        }
    }
    assert!(meeting > 0);
}

#[test]
fn unattenuated_pairs_are_all_unstable() {
    let op = census_op(SpeedKind::C1, &AttenuationKind::Zero, 64, 128, 1.0);
    let reports = census(&op).unwrap();
    assert!(!reports.is_empty());
    for rep in &reports {
        assert!(rep.det_q.abs() < 1e-6);
        assert_eq!(rep.stability, Stability::Unstable);
    }
}

#[test]
fn multiplicities_of_the_two_media() {
    let c1 = census(&census_op(SpeedKind::C1, &AttenuationKind::Zero, 128, 256, 1.0)).unwrap();
    assert_eq!(max_multiplicity(&c1), 2);
    let c2 = census(&census_op(SpeedKind::C2, &AttenuationKind::Zero, 128, 256, 1.0)).unwrap();
    assert!(max_multiplicity(&c2) >= 3, "c2 max multiplicity {}", max_multiplicity(&c2));
}

/// Multiplicity per ray, 1 for rays without conjugate points.
fn per_ray(op: &ForwardOperator) -> Vec<usize> {
    let mut m = vec![1; op.rays().len()];
    for rep in census(op).unwrap() {
        m[rep.pair.ray] = rep.multiplicity;
    }
    m
}

#[test]
fn census_is_stable_under_step_halving() {
    for speed in [SpeedKind::C1, SpeedKind::C3] {
        let coarse = per_ray(&census_op(speed, &AttenuationKind::Zero, 64, 128, 1.0));
        let fine = per_ray(&census_op(speed, &AttenuationKind::Zero, 64, 128, 0.5));
        let same = coarse.iter().zip(&fine).filter(|(a, b)| a == b).count();
        let frac = same as f64 / coarse.len() as f64;
        assert!(frac >= 0.95, "{speed:?}: {frac}");
    }
}
