//! Test objects and attenuation profiles.

use core::f64::consts::PI;

use crate::grid::{Grid2D, ScalarField2D};
use crate::metric::smoothstep;
use crate::vec2::Vec2;

/// Coherent-state width.
pub const COHERENT_SIGMA: f64 = 0.1;
/// Rotation applied to the coherent state about its center.
pub const COHERENT_ROTATION: f64 = PI / 24.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhantomSpec {
    Zero,
    /// Smoothed ellipse with horizontal and vertical semi-axes.
    Ellipse {
        center: Vec2,
        semi_axes: (f64, f64),
        width: f64,
        amplitude: f64,
    },
    /// `sin(y / sigma^2) exp(-|x|^2 / 2 sigma^2)` in coordinates rotated by
    /// `rotation` about `center`.
    Coherent {
        center: Vec2,
        sigma: f64,
        rotation: f64,
        amplitude: f64,
    },
    /// The coherent state plus its own envelope, so that it is nonnegative.
    CoherentPositive {
        center: Vec2,
        sigma: f64,
        rotation: f64,
        amplitude: f64,
    },
    /// Narrow Gaussian standing in for a point mass.
    Bump {
        center: Vec2,
        width: f64,
        amplitude: f64,
    },
}

impl PhantomSpec {
    pub fn ellipse(center: Vec2) -> Self {
        PhantomSpec::Ellipse {
            center,
            semi_axes: (0.45, 0.18),
            width: 0.05,
            amplitude: 1.0,
        }
    }

    pub fn coherent(center: Vec2) -> Self {
        PhantomSpec::Coherent {
            center,
            sigma: COHERENT_SIGMA,
            rotation: COHERENT_ROTATION,
            amplitude: 1.0,
        }
    }

    pub fn coherent_positive(center: Vec2) -> Self {
        PhantomSpec::CoherentPositive {
            center,
            sigma: COHERENT_SIGMA,
            rotation: COHERENT_ROTATION,
            amplitude: 1.0,
        }
    }

    pub fn bump(center: Vec2) -> Self {
        PhantomSpec::Bump {
            center,
            width: 0.04,
            amplitude: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhantomSpec::Zero => "zero",
            PhantomSpec::Ellipse { .. } => "ellipse",
            PhantomSpec::Coherent { .. } => "coherent",
            PhantomSpec::CoherentPositive { .. } => "coherent_positive",
            PhantomSpec::Bump { .. } => "bump",
        }
    }

    pub fn center(&self) -> Vec2 {
        match *self {
            PhantomSpec::Zero => Vec2::ZERO,
            PhantomSpec::Ellipse { center, .. }
            | PhantomSpec::Coherent { center, .. }
            | PhantomSpec::CoherentPositive { center, .. }
            | PhantomSpec::Bump { center, .. } => center,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            PhantomSpec::Zero => 0.0,
            PhantomSpec::Ellipse { amplitude, .. }
            | PhantomSpec::Coherent { amplitude, .. }
            | PhantomSpec::CoherentPositive { amplitude, .. }
            | PhantomSpec::Bump { amplitude, .. } => amplitude,
        }
    }

    pub fn with_center(mut self, c: Vec2) -> Self {
        match &mut self {
            PhantomSpec::Zero => {}
            PhantomSpec::Ellipse { center, .. }
            | PhantomSpec::Coherent { center, .. }
            | PhantomSpec::CoherentPositive { center, .. }
            | PhantomSpec::Bump { center, .. } => *center = c,
        }
        self
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        match &mut self {
            PhantomSpec::Zero => {}
            PhantomSpec::Ellipse { amplitude, .. }
            | PhantomSpec::Coherent { amplitude, .. }
            | PhantomSpec::CoherentPositive { amplitude, .. }
            | PhantomSpec::Bump { amplitude, .. } => *amplitude = a,
        }
        self
    }

    /// Radius of the region the phantom's energy concentrates in.
    pub fn core_radius(&self) -> f64 {
        match *self {
            PhantomSpec::Zero => 0.0,
            PhantomSpec::Ellipse { semi_axes, .. } => semi_axes.1,
            PhantomSpec::Coherent { sigma, .. } | PhantomSpec::CoherentPositive { sigma, .. } => sigma,
            PhantomSpec::Bump { width, .. } => width,
        }
    }

    /// Smallest length scale the grid has to resolve.
    pub fn feature_size(&self) -> Option<f64> {
        match *self {
            PhantomSpec::Zero => None,
            PhantomSpec::Ellipse { width, .. } => Some(width),
            PhantomSpec::Coherent { sigma, .. } | PhantomSpec::CoherentPositive { sigma, .. } => {
                Some(2.0 * PI * sigma * sigma)
            }
            PhantomSpec::Bump { width, .. } => Some(2.0 * width),
        }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        match *self {
            PhantomSpec::Zero => 0.0,
            PhantomSpec::Ellipse {
                center,
                semi_axes: (a, b),
                width,
                amplitude,
            } => {
                let q = p - center;
                let u = Vec2::new(q.x / a, q.y / b);
                let rho = u.norm();
                if rho < 1e-12 {
                    return amplitude;
                }
                // First-order signed distance (rho - 1) / |grad rho|.
                let grad = Vec2::new(q.x / (a * a), q.y / (b * b)) * (1.0 / rho);
                let d = (rho - 1.0) / grad.norm();
                amplitude * (1.0 - smoothstep(d / width + 0.5))
            }
            PhantomSpec::Coherent {
                center,
                sigma,
                rotation,
                amplitude,
            } => {
                let (osc, env) = coherent_parts(p, center, sigma, rotation);
                amplitude * osc * env
            }
            PhantomSpec::CoherentPositive {
                center,
                sigma,
                rotation,
                amplitude,
            } => {
                let (osc, env) = coherent_parts(p, center, sigma, rotation);
                amplitude * (1.0 + osc) * env
            }
            PhantomSpec::Bump {
                center,
                width,
                amplitude,
            } => amplitude * libm::exp(-(p - center).norm_sq() / (2.0 * width * width)),
        }
    }
}

fn coherent_parts(p: Vec2, center: Vec2, sigma: f64, rotation: f64) -> (f64, f64) {
    let q = (p - center).rotate(-rotation);
    let s2 = sigma * sigma;
    (libm::sin(q.y / s2), libm::exp(-q.norm_sq() / (2.0 * s2)))
}

/// Samples `spec`; warns if its finest feature spans fewer than 3 cells.
pub fn make_phantom(spec: &PhantomSpec, grid: Grid2D) -> ScalarField2D {
    if let Some(size) = spec.feature_size() {
        let cells = size / grid.spacing();
        if cells < 3.0 {
            log::warn!(
                "{} phantom is under-resolved: feature {size:.4} spans {cells:.2} cells",
                spec.name()
            );
        }
    }
    ScalarField2D::from_fn(grid, |p| spec.eval(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttenuationKind {
    Zero,
    /// `a0 exp(-|x - center|^2 / 2 width^2)`.
    GaussianBump { a0: f64, center: Vec2, width: f64 },
    /// `value` on a disk, rolled off to 0 by a quintic smoothstep.
    Disk {
        value: f64,
        center: Vec2,
        radius: f64,
        rolloff: f64,
    },
}

impl AttenuationKind {
    pub fn gaussian_bump() -> Self {
        AttenuationKind::GaussianBump {
            a0: 1.0,
            center: Vec2::ZERO,
            width: 0.35,
        }
    }

    pub fn disk2() -> Self {
        AttenuationKind::Disk {
            value: 2.0,
            center: Vec2::new(0.0, -0.55),
            radius: 0.18,
            rolloff: 0.06,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttenuationKind::Zero => "zero",
            AttenuationKind::GaussianBump { .. } => "gaussian_bump",
            AttenuationKind::Disk { .. } => "disk2",
        }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        match *self {
            AttenuationKind::Zero => 0.0,
            AttenuationKind::GaussianBump { a0, center, width } => {
                a0 * libm::exp(-(p - center).norm_sq() / (2.0 * width * width))
            }
            AttenuationKind::Disk {
                value,
                center,
                radius,
                rolloff,
            } => value * (1.0 - smoothstep(((p - center).norm() - radius) / rolloff)),
        }
    }
}

pub fn make_attenuation(kind: &AttenuationKind, grid: Grid2D) -> ScalarField2D {
    ScalarField2D::from_fn(grid, |p| kind.eval(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_move_and_scale() {
        let c = Vec2::new(0.2, -0.1);
        let spec = PhantomSpec::bump(Vec2::ZERO).with_center(c).with_amplitude(3.0);
        assert_eq!(spec.center(), c);
        assert_eq!(spec.amplitude(), 3.0);
        assert_eq!(spec.eval(c), 3.0);
        assert_eq!(PhantomSpec::Zero.with_center(c), PhantomSpec::Zero);
    }

    #[test]
    fn coherent_values() {
        let spec = PhantomSpec::Coherent {
            center: Vec2::ZERO,
            sigma: 0.1,
            rotation: 0.0,
            amplitude: 1.0,
        };
        assert_eq!(spec.eval(Vec2::ZERO), 0.0);
        let y = PI * 0.01 / 2.0;
        let want = libm::exp(-y * y / 0.02);
        assert!((spec.eval(Vec2::new(0.0, y)) - want).abs() < 1e-12);
        assert!((want - 0.9877).abs() < 1e-4);
    }

    #[test]
    fn coherent_is_odd_about_its_center() {
        let c = Vec2::new(-0.7, 0.0);
        let spec = PhantomSpec::coherent(c);
        for d in [Vec2::new(0.03, 0.01), Vec2::new(-0.02, 0.05)] {
            assert!((spec.eval(c + d) + spec.eval(c - d)).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_variant_is_nonnegative() {
        let g = Grid2D::new(128).unwrap();
        let f = make_phantom(&PhantomSpec::coherent_positive(Vec2::ZERO), g);
        assert!(f.min() >= 0.0);
        assert!(f.max() > 1.5);
    }

    #[test]
    fn ellipse_profile() {
        let spec = PhantomSpec::ellipse(Vec2::ZERO);
        assert_eq!(spec.eval(Vec2::ZERO), 1.0);
        assert_eq!(spec.eval(Vec2::new(0.3, 0.0)), 1.0);
        assert!((spec.eval(Vec2::new(0.45, 0.0)) - 0.5).abs() < 1e-12);
        assert_eq!(spec.eval(Vec2::new(0.6, 0.0)), 0.0);
        let p = Vec2::new(0.21, 0.13);
        let v = spec.eval(p);
        for q in [Vec2::new(-p.x, p.y), Vec2::new(p.x, -p.y), -p] {
            assert!((spec.eval(q) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn attenuation_profiles() {
        let d = AttenuationKind::disk2();
        assert_eq!(d.eval(Vec2::new(0.0, -0.55)), 2.0);
        assert_eq!(d.eval(Vec2::new(0.0, 0.5)), 0.0);
        let g = Grid2D::new(32).unwrap();
        assert!(make_attenuation(&AttenuationKind::gaussian_bump(), g).min() >= 0.0);
        assert_eq!(make_attenuation(&AttenuationKind::Zero, g).max_abs(), 0.0);
    }
}
