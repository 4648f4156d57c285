//! Conformal metrics `c^-2 |dx|^2` on the unit disk.
//!
//! A [`ConformalMetric`] keeps the sampled speed, its logarithm and the
//! centered-difference gradient of `ln c`; geodesic tracing and curvature
//! both read from these samples so they stay mutually consistent.

use alloc::format;
use alloc::vec::Vec;

use crate::grid::{Grid2D, ScalarField2D};
use crate::vec2::Vec2;
use crate::{Error, Result};

/// Closed-form speed profiles on the disk.
///
/// `C1` and `C2` are Gaussian "gutters" along the `x` axis with widths 0.25
/// and 0.12, `C3` is a pair of Gaussian lenses centred at `(0, +-0.3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedKind {
    Unit,
    C1,
    C2,
    C3,
}

pub const SIGMA_1: f64 = 0.25;
pub const SIGMA_2: f64 = 0.12;
pub const SIGMA_3: f64 = 0.25;

impl SpeedKind {
    pub fn name(self) -> &'static str {
        match self {
            SpeedKind::Unit => "unit",
            SpeedKind::C1 => "c1",
            SpeedKind::C2 => "c2",
            SpeedKind::C3 => "c3",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "unit" => Some(SpeedKind::Unit),
            "c1" => Some(SpeedKind::C1),
            "c2" => Some(SpeedKind::C2),
            "c3" => Some(SpeedKind::C3),
            _ => None,
        }
    }

    /// `ln c` and its gradient.
    pub fn log_speed_with_grad(self, p: Vec2) -> (f64, Vec2) {
        let gutter = |sigma: f64| {
            let s2 = sigma * sigma;
            let e = 0.3 * libm::exp(-p.y * p.y / (2.0 * s2));
            (e, Vec2::new(0.0, -e * p.y / s2))
        };
        match self {
            SpeedKind::Unit => (0.0, Vec2::ZERO),
            SpeedKind::C1 => gutter(SIGMA_1),
            SpeedKind::C2 => gutter(SIGMA_2),
            SpeedKind::C3 => {
                let s2 = SIGMA_3 * SIGMA_3;
                let mut value = 0.0;
                let mut grad = Vec2::ZERO;
                for yc in [0.3, -0.3] {
                    let d = Vec2::new(p.x, p.y - yc);
                    let e = 0.65 * libm::exp(-d.norm_sq() / (2.0 * s2));
                    value += e;
                    grad = grad + d * (-e / s2);
                }
                (value, grad)
            }
        }
    }

    pub fn log_speed(self, p: Vec2) -> f64 {
        self.log_speed_with_grad(p).0
    }

    pub fn speed(self, p: Vec2) -> f64 {
        libm::exp(self.log_speed(p))
    }
}

/// How a [`SpeedKind`] profile becomes a metric.
///
/// `Speed` reads the profile as the wave speed `c`, so the metric is
/// `c^-2 |dx|^2` and rays bend towards low `c`. `Index` reads it as a
/// refractive index, giving `c^2 |dx|^2` (wave speed `1/c`): rays are
/// attracted to the maxima of the profile, which turns the `C1`/`C2` gutters
/// into waveguides with conjugate points and `C3` into focusing lenses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SpeedConvention {
    Speed,
    #[default]
    Index,
}

impl SpeedConvention {
    pub fn name(self) -> &'static str {
        match self {
            SpeedConvention::Speed => "speed",
            SpeedConvention::Index => "index",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "speed" => Some(SpeedConvention::Speed),
            "index" => Some(SpeedConvention::Index),
            _ => None,
        }
    }

    fn sign(self) -> f64 {
        match self {
            SpeedConvention::Speed => 1.0,
            SpeedConvention::Index => -1.0,
        }
    }
}

/// Wave speed and `grad ln c` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSpeed {
    pub c: f64,
    pub grad_log: Vec2,
}

/// Anything that can drive the geodesic equations of `c^-2 |dx|^2`.
pub trait SpeedModel: Sync {
    fn local(&self, p: Vec2) -> LocalSpeed;

    /// Upper bound of `c` on the disk; sets the default step size.
    fn c_max(&self) -> f64;
}

/// Exact profile evaluation, used as a reference for the sampled metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSpeed {
    pub kind: SpeedKind,
    pub convention: SpeedConvention,
}

impl AnalyticSpeed {
    pub fn new(kind: SpeedKind, convention: SpeedConvention) -> Self {
        AnalyticSpeed { kind, convention }
    }
}

impl SpeedModel for AnalyticSpeed {
    fn local(&self, p: Vec2) -> LocalSpeed {
        let (l, g) = self.kind.log_speed_with_grad(p);
        let s = self.convention.sign();
        LocalSpeed {
            c: libm::exp(s * l),
            grad_log: g * s,
        }
    }

    fn c_max(&self) -> f64 {
        match (self.kind, self.convention) {
            (SpeedKind::Unit, _) | (_, SpeedConvention::Index) => 1.0,
            (SpeedKind::C1 | SpeedKind::C2, SpeedConvention::Speed) => libm::exp(0.3),
            // Both lenses overlap slightly at the origin.
            (SpeedKind::C3, SpeedConvention::Speed) => libm::exp(0.65 * 1.0 + 0.65 * libm::exp(-0.36 / (2.0 * SIGMA_3 * SIGMA_3))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConformalMetric {
    speed: ScalarField2D,
    log_speed: ScalarField2D,
    grad_x: ScalarField2D,
    grad_y: ScalarField2D,
    /// `c^-2 h^2`, the Riemannian area of each node's cell.
    area: Vec<f64>,
    in_disk: Vec<bool>,
    c_min: f64,
    c_max: f64,
}

impl ConformalMetric {
    pub fn new(speed: ScalarField2D) -> Result<Self> {
        if let Some(i) = speed.values().iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "speed must be positive and finite, node {i} has {}",
                speed.values()[i]
            )));
        }
        let grid = speed.grid();
        let log_speed = speed.map(libm::log);
        let (grad_x, grad_y) = log_speed.gradient();
        let h2 = grid.cell_area();
        let area = speed.values().iter().map(|c| h2 / (c * c)).collect();
        let in_disk = (0..grid.len()).map(|i| grid.in_disk(i)).collect();
        Ok(ConformalMetric {
            c_min: speed.min(),
            c_max: speed.max(),
            speed,
            log_speed,
            grad_x,
            grad_y,
            area,
            in_disk,
        })
    }

    pub fn unit(grid: Grid2D) -> Self {
        Self::new(ScalarField2D::constant(grid, 1.0)).expect("unit speed is valid")
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.speed.grid()
    }

    pub fn speed(&self) -> &ScalarField2D {
        &self.speed
    }

    pub fn log_speed(&self) -> &ScalarField2D {
        &self.log_speed
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    /// Speed at `p` from the interpolated `ln c`.
    pub fn eval(&self, p: Vec2) -> f64 {
        libm::exp(self.log_speed.eval(p))
    }

    /// Per-node Riemannian area weights `c^-2 h^2`.
    pub fn area_weights(&self) -> &[f64] {
        &self.area
    }

    pub fn in_disk(&self) -> &[bool] {
        &self.in_disk
    }

    /// `L^2` inner product of the Riemannian area measure.
    pub fn dot(&self, f: &ScalarField2D, g: &ScalarField2D) -> Result<f64> {
        f.check_grid(self.grid())?;
        g.check_grid(self.grid())?;
        Ok(f.values()
            .iter()
            .zip(g.values())
            .zip(&self.area)
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    pub fn norm(&self, f: &ScalarField2D) -> Result<f64> {
        Ok(libm::sqrt(self.dot(f, f)?))
    }

    /// Default geodesic step `h / (2 c_max)`.
    pub fn default_dt(&self) -> f64 {
        self.grid().spacing() / (2.0 * self.c_max)
    }
}

impl SpeedModel for ConformalMetric {
    #[inline]
    fn local(&self, p: Vec2) -> LocalSpeed {
        let s = self.grid().locate(p);
        LocalSpeed {
            c: libm::exp(self.log_speed.eval_stencil(&s)),
            grad_log: Vec2::new(self.grad_x.eval_stencil(&s), self.grad_y.eval_stencil(&s)),
        }
    }

    fn c_max(&self) -> f64 {
        self.c_max
    }
}

/// Samples a closed-form profile read as a wave speed (`unit` gives `c = 1`).
pub fn make_speed(kind: SpeedKind, grid: Grid2D) -> ConformalMetric {
    make_metric(kind, SpeedConvention::Speed, grid)
}

pub fn make_metric(kind: SpeedKind, convention: SpeedConvention, grid: Grid2D) -> ConformalMetric {
    let s = convention.sign();
    let speed = ScalarField2D::from_fn(grid, |p| libm::exp(s * kind.log_speed(p)));
    ConformalMetric::new(speed).expect("closed-form speeds are positive")
}

/// Gaussian curvature `K = c^2 lap(ln c)` of `c^-2 |dx|^2`, by centred
/// second differences; the outer ring copies its nearest interior node.
pub fn gaussian_curvature(m: &ConformalMetric) -> Result<ScalarField2D> {
    let grid = m.grid();
    let n = grid.n();
    if n < 32 {
        return Err(Error::InvalidGrid(format!(
            "curvature needs at least 32 points per axis, got {n}"
        )));
    }
    let h2 = grid.cell_area();
    let l = m.log_speed();
    let mut k = ScalarField2D::zeros(grid);
    let vals = k.values_mut();
    for iy in 0..n {
        for ix in 0..n {
            let jx = ix.clamp(1, n - 2);
            let jy = iy.clamp(1, n - 2);
            let lap = (l.get(jx + 1, jy) + l.get(jx - 1, jy) + l.get(jx, jy + 1) + l.get(jx, jy - 1)
                - 4.0 * l.get(jx, jy))
                / h2;
            vals[grid.index(ix, iy)] = libm::exp(2.0 * l.get(jx, jy)) * lap;
        }
    }
    Ok(k)
}

/// `Delta_g u = c^2 * (five-point Laplacian of u)` with homogeneous Dirichlet
/// data: nodes with `|x| >= 1` read as zero and are returned as zero.
pub fn metric_laplacian(m: &ConformalMetric, u: &ScalarField2D) -> Result<ScalarField2D> {
    let grid = m.grid();
    u.check_grid(grid)?;
    let n = grid.n();
    let inv_h2 = 1.0 / grid.cell_area();
    let inside = m.in_disk();
    let uv = u.values();
    let read = |i: usize| if inside[i] { uv[i] } else { 0.0 };
    let c = m.speed().values();
    let mut out = ScalarField2D::zeros(grid);
    let ov = out.values_mut();
    for (i, o) in ov.iter_mut().enumerate() {
        if !inside[i] {
            continue;
        }
        // Disk nodes never touch the square's edge, so all four neighbours exist.
        let lap = read(i + 1) + read(i - 1) + read(i + n) + read(i - n) - 4.0 * uv[i];
        *o = c[i] * c[i] * lap * inv_h2;
    }
    Ok(out)
}

/// Radial `C^2` cutoff: 1 for `r <= r_one`, 0 for `r >= r_zero`, quintic
/// smoothstep in between.
pub fn make_cutoff(grid: Grid2D, r_one: f64, r_zero: f64) -> Result<ScalarField2D> {
    if !(r_one > 0.0 && r_one < r_zero && r_zero <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff radii need 0 < r_one < r_zero <= 1, got ({r_one}, {r_zero})"
        )));
    }
    Ok(ScalarField2D::from_fn(grid, |p| {
        1.0 - smoothstep((p.norm() - r_one) / (r_zero - r_one))
    }))
}

pub const DEFAULT_CUTOFF: (f64, f64) = (0.88, 0.96);

/// Quintic smoothstep clamped to `[0, 1]`; `C^2` at both ends.
pub(crate) fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}
