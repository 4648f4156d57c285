//! Jacobi fields against a geodesic-fan oracle, the energy identity for
//! `b`, integrator order and time reversal.

use geoxray_core::geodesic::{jacobi_with, Tracer};
use geoxray_core::{
    make_metric, AnalyticSpeed, Geometry, GeodesicPath, Grid2D, PhasePoint, SpeedConvention,
    SpeedKind, Vec2,
};

fn geometry(kind: SpeedKind) -> Geometry {
    Geometry::new(make_metric(kind, SpeedConvention::Index, Grid2D::new(128).unwrap())).unwrap()
}

/// First time the neighbours shot at `theta +- eps` cross the central
/// geodesic's normal line on the same side, i.e. the first sign change of
/// the finite-difference Jacobi field.
fn envelope_time(geo: &Geometry, p: Vec2, theta: f64, eps: f64) -> Option<f64> {
    let shoot = |a: f64| geo.shoot(PhasePoint::new(p, Vec2::from_angle(a))).unwrap();
    let mid = shoot(theta);
    let plus = shoot(theta + eps);
    let minus = shoot(theta - eps);
    let tau = mid.tau().min(plus.tau()).min(minus.tau());
    let j = |t: f64| {
        let normal = mid.velocity_at(t).normalized().perp();
        (plus.position_at(t) - minus.position_at(t)).dot(normal)
    };
    let dt = geo.dt() / 4.0;
    let mut t = 4.0 * geo.dt();
    let mut prev = j(t);
    while t + dt < tau {
        let next = j(t + dt);
        if (prev < 0.0) != (next < 0.0) {
            return Some(t + dt * prev / (prev - next));
        }
        prev = next;
        t += dt;
    }
    None
}

#[test]
fn jacobi_matches_geodesic_fan_envelope() {
    let cases = [
        (SpeedKind::C1, Vec2::new(-0.7, 0.0), 0.0),
        (SpeedKind::C1, Vec2::new(-0.7, 0.0), 0.08),
        (SpeedKind::C1, Vec2::new(-0.7, 0.02), -0.05),
        (SpeedKind::C1, Vec2::new(-0.8, -0.03), 0.04),
        (SpeedKind::C1, Vec2::new(-0.75, 0.0), -0.1),
        (SpeedKind::C3, Vec2::new(-0.75, 0.0), 0.55),
        (SpeedKind::C3, Vec2::new(-0.75, 0.0), -0.55),
        (SpeedKind::C3, Vec2::new(-0.75, 0.0), 0.45),
        (SpeedKind::C3, Vec2::new(-0.75, 0.0), -0.65),
        (SpeedKind::C3, Vec2::new(-0.7, 0.05), 0.6),
    ];
    for (kind, p, theta) in cases {
        let geo = geometry(kind);
        let path = geo.shoot(PhasePoint::new(p, Vec2::from_angle(theta))).unwrap();
        let ode = geo.jacobi(&path).conjugate_times.first().copied();
        let fan = envelope_time(&geo, p, theta, 1e-4);
        let (Some(a), Some(b)) = (ode, fan) else {
            panic!("{kind:?} {p:?} {theta}: jacobi {ode:?}, envelope {fan:?}");
        };
        assert!((a - b).abs() < 2.0 * geo.dt(), "{kind:?} {p:?} {theta}: {a} vs {b}");
    }
}

#[test]
fn bdot_energy_identity() {
    // d/dt (b'^2 + K b^2) = K' b^2, so at a zero t0 of b:
    // b'(t0)^2 - b'(0)^2 = int_0^t0 K' b^2.
    let mut checked = 0;
    for (kind, p, theta) in [
        (SpeedKind::C1, Vec2::new(-0.8, 0.05), 0.1),
        (SpeedKind::C1, Vec2::new(-0.6, -0.04), -0.12),
        (SpeedKind::C1, Vec2::new(-0.7, 0.02), -0.05),
        (SpeedKind::C3, Vec2::new(-0.75, 0.0), 0.5),
        (SpeedKind::C3, Vec2::new(-0.7, -0.1), -0.6),
    ] {
        let geo = geometry(kind);
        let path = geo.shoot(PhasePoint::new(p, Vec2::from_angle(theta))).unwrap();
        let j = geo.jacobi(&path);
        let t0 = j.conjugate_times[0];
        let lhs = j.b_dot_at(t0).powi(2) - j.b_dot[0].powi(2);
        let rhs = j.curvature_flux(t0);
        assert!(lhs.abs() > 1e-2, "{kind:?} {theta}: degenerate case {lhs}");
        assert!((lhs - rhs).abs() < 1e-3 * lhs.abs(), "{kind:?} {theta}: {lhs} vs {rhs}");
        // The opposite sign convention is clearly violated.
        assert!((lhs + rhs).abs() > 0.5 * lhs.abs());
        checked += 1;
    }
    assert_eq!(checked, 5);
}

#[test]
fn symmetric_geodesic_has_unit_bdot_ratio() {
    let geo = geometry(SpeedKind::C1);
    let path = geo.shoot(PhasePoint::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0))).unwrap();
    let j = geo.jacobi(&path);
    let t0 = j.conjugate_times[0];
    assert!((j.bdot_ratio(t0).unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn injected_constant_curvature() {
    let dt = 1e-3;
    let n = 4000;
    let path = GeodesicPath {
        t: (0..=n).map(|i| i as f64 * dt).collect(),
        points: (0..=n)
            .map(|i| PhasePoint::new(Vec2::new(i as f64 * dt, 0.0), Vec2::new(1.0, 0.0)))
            .collect(),
        cum_atten: vec![0.0; n + 1],
    };
    let j = jacobi_with(&path, |_| 1.0);
    assert!((j.conjugate_times[0] - std::f64::consts::PI).abs() < 1e-3);
}

fn state_at(kind: SpeedKind, dt: f64, t: f64) -> PhasePoint {
    let m = AnalyticSpeed::new(kind, SpeedConvention::Index);
    let start = PhasePoint::new(Vec2::new(-0.9, 0.05), Vec2::from_angle(0.2));
    let path = Tracer::new(dt).shoot(&m, start).unwrap();
    let i = (t / dt).round() as usize;
    assert!((path.t[i] - t).abs() < 1e-9);
    path.points[i]
}

#[test]
fn integrator_is_fourth_order() {
    for kind in [SpeedKind::C1, SpeedKind::C3] {
        let t = 1.0;
        let reference = state_at(kind, 1e-4, t);
        let err = |dt: f64| {
            let s = state_at(kind, dt, t);
            (s.x - reference.x).norm() + (s.v - reference.v).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "{kind:?}: observed order {order} ({e1:e}, {e2:e})");
    }
}

#[test]
fn reversed_exit_returns_to_start() {
    let geo = geometry(SpeedKind::C3);
    for beta in [0.3, 1.9, 3.5, 5.0] {
        let x0 = Vec2::from_angle(beta);
        let start = PhasePoint::new(x0, (-x0).rotate(0.4));
        let fwd = geo.shoot(start).unwrap();
        let back = geo.shoot(fwd.exit().reversed()).unwrap();
        assert!((back.exit().x - x0).norm() < 1e-6, "beta {beta}");
        assert!((back.tau() - fwd.tau()).abs() < 1e-6);
    }
}

#[test]
fn c3_locus_has_one_cluster_behind_each_lens() {
    let geo = geometry(SpeedKind::C3);
    let locus = geo.conjugate_locus(Vec2::new(-0.75, 0.0), 256).unwrap();
    let upper: Vec<_> = locus.iter().filter(|c| c.q.y > 0.0).collect();
    let lower: Vec<_> = locus.iter().filter(|c| c.q.y < 0.0).collect();
    assert!(upper.len() > 5 && lower.len() > 5, "{} / {}", upper.len(), lower.len());
    // Nothing on the axis between the two lenses, everything past them.
    assert!(locus.iter().all(|c| c.q.y.abs() > 0.15 && c.q.x > 0.2));
    for c in &upper {
        let mirror = Vec2::new(c.q.x, -c.q.y);
        let d = lower.iter().map(|l| (l.q - mirror).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 0.05, "{:?} has no mirror partner", c.q);
    }
}

#[test]
fn c1_locus_hugs_the_axis() {
    let geo = geometry(SpeedKind::C1);
    let near = geo.conjugate_locus(Vec2::new(-0.7, 0.0), 256).unwrap();
    assert!(!near.is_empty());
    let on_axis = near.iter().filter(|c| c.q.y.abs() < 0.05).count();
    assert!(on_axis * 2 > near.len(), "{on_axis} of {}", near.len());
    // From the centre the refocusing time exceeds the time to the boundary.
    assert!(geo.conjugate_locus(Vec2::ZERO, 256).unwrap().is_empty());
}
